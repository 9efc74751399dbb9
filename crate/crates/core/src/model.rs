//! Potentials, diffusion fields and drift assembly.
//!
//! The sampled dynamics is
//!
//! ```text
//! dX = F(X) dt + σ Σ(X) dW,    F = −D ∇V + (σ²/2) div D,    D = Σ² ,
//! ```
//!
//! whose invariant density is `ρ∞ ∝ exp(−(2/σ²) V)` independently of `Σ`.
//! Every diffusion field is symmetric by construction and all derivatives
//! are analytic; finite differences only appear in the tests.

use crate::error::{Error, Result};

/// Potential energy `V`.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    /// `|x|²/2`
    Quadratic,
    /// `Σ xᵢ⁴/4`
    Quartic,
    /// `x²/2 + sin(1 + 3x)`, one-dimensional.
    DoubleWell,
    /// `√(17/16 − 2x₁² + x₁⁴) + √(17/16 − 2x₂² + x₂⁴)`, two-dimensional.
    QuadrupleWell,
    /// `k (1 − |x|)² / 2`
    Ring { k: f64 },
}

/// One coordinate of the separable quadruple-well potential.
pub fn quadruple_well_1d(x: f64) -> f64 {
    (17.0 / 16.0 - 2.0 * x * x + x.powi(4)).sqrt()
}

fn quadruple_well_1d_grad(x: f64) -> f64 {
    (-2.0 * x + 2.0 * x.powi(3)) / quadruple_well_1d(x)
}

impl Potential {
    pub fn name(&self) -> &'static str {
        match self {
            Potential::Quadratic => "quadratic",
            Potential::Quartic => "quartic",
            Potential::DoubleWell => "double_well",
            Potential::QuadrupleWell => "quadruple_well",
            Potential::Ring { .. } => "ring",
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let ok = match self {
            Potential::DoubleWell => d == 1,
            Potential::QuadrupleWell => d == 2,
            Potential::Ring { k } => {
                if !(k.is_finite() && *k > 0.0) {
                    return Err(Error::InvalidProblem(format!("ring stiffness k={k} must be > 0")));
                }
                true
            }
            Potential::Quadratic | Potential::Quartic => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidProblem(format!(
                "potential {} is not defined in dimension {d}",
                self.name()
            )))
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Quadratic => 0.5 * norm2(x),
            Potential::Quartic => x.iter().map(|v| 0.25 * v.powi(4)).sum(),
            Potential::DoubleWell => 0.5 * x[0] * x[0] + (1.0 + 3.0 * x[0]).sin(),
            Potential::QuadrupleWell => quadruple_well_1d(x[0]) + quadruple_well_1d(x[1]),
            Potential::Ring { k } => {
                let r = norm2(x).sqrt();
                0.5 * k * (1.0 - r) * (1.0 - r)
            }
        }
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Potential::Quadratic => out.copy_from_slice(x),
            Potential::Quartic => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v * v * v;
                }
            }
            Potential::DoubleWell => out[0] = x[0] + 3.0 * (1.0 + 3.0 * x[0]).cos(),
            Potential::QuadrupleWell => {
                out[0] = quadruple_well_1d_grad(x[0]);
                out[1] = quadruple_well_1d_grad(x[1]);
            }
            Potential::Ring { k } => {
                let r = norm2(x).sqrt();
                if r == 0.0 {
                    out.fill(0.0);
                } else {
                    let s = -k * (1.0 - r) / r;
                    for (o, v) in out.iter_mut().zip(x) {
                        *o = s * v;
                    }
                }
            }
        }
    }
}

/// Diffusion field `Σ(x)` (symmetric square root of `D`).
#[derive(Debug, Clone, PartialEq)]
pub enum Diffusion {
    Identity,
    /// Constant symmetric positive-definite matrix, row-major `d×d`.
    Constant { matrix: Vec<f64> },
    /// `3/2 + cos(x)/2`
    Cosine1D,
    /// `3/2 + sin(x)/2`
    Sine1D,
    /// `exp(c V(x))`
    ExpPotential1D { c: f64 },
    /// `(1 + A exp(−|x|²/(2ε²)))^{±1} I`; `inverted` selects the negative power.
    MoroCardin { amplitude: f64, eps: f64, inverted: bool },
    /// `I − x xᵀ/(2|x|² + 1)`
    RadialProjection2D,
    /// `I − x xᵀ/(2|x|²)`, with `Σ(0) = I`.
    RingRadial,
}

/// Gradient of an isotropic factor `g`, kept symbolic so no scratch vector is needed.
#[derive(Debug, Clone, Copy)]
enum IsoGrad {
    Zero,
    /// `g'` in one dimension.
    Scalar(f64),
    /// `s · x`
    AlongX(f64),
    /// `s · ∇V`
    AlongGradV(f64),
}

impl IsoGrad {
    #[inline]
    fn component(self, i: usize, x: &[f64], grad_v: &[f64]) -> f64 {
        match self {
            IsoGrad::Zero => 0.0,
            IsoGrad::Scalar(s) => s,
            IsoGrad::AlongX(s) => s * x[i],
            IsoGrad::AlongGradV(s) => s * grad_v[i],
        }
    }
}

/// Structure of `Σ` at one point.
enum Shape {
    /// `g I` with `∇g`.
    Isotropic(f64, IsoGrad),
    /// `I − β(u) x xᵀ`, `u = |x|²`, with `(β, β')`.
    RankOne { beta: f64, dbeta: f64, u: f64 },
    Constant,
}

impl Diffusion {
    pub fn name(&self) -> &'static str {
        match self {
            Diffusion::Identity => "identity",
            Diffusion::Constant { .. } => "constant",
            Diffusion::Cosine1D => "cosine",
            Diffusion::Sine1D => "sine",
            Diffusion::ExpPotential1D { .. } => "exp_potential",
            Diffusion::MoroCardin { .. } => "moro_cardin",
            Diffusion::RadialProjection2D => "radial_projection",
            Diffusion::RingRadial => "ring_radial",
        }
    }

    /// Whether `Σ(x) = g(x) I` everywhere.
    pub fn is_isotropic(&self) -> bool {
        match self {
            Diffusion::Identity
            | Diffusion::Cosine1D
            | Diffusion::Sine1D
            | Diffusion::ExpPotential1D { .. }
            | Diffusion::MoroCardin { .. } => true,
            Diffusion::Constant { matrix } => matrix.len() == 1,
            Diffusion::RadialProjection2D | Diffusion::RingRadial => false,
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProblem(msg));
        match self {
            Diffusion::Cosine1D | Diffusion::Sine1D | Diffusion::ExpPotential1D { .. } if d != 1 => {
                bad(format!("diffusion {} is one-dimensional, got d={d}", self.name()))
            }
            Diffusion::RadialProjection2D if d != 2 => {
                bad(format!("diffusion {} is two-dimensional, got d={d}", self.name()))
            }
            Diffusion::MoroCardin { amplitude, eps, .. } => {
                if !(eps.is_finite() && *eps > 0.0) {
                    return bad(format!("moro_cardin eps={eps} must be > 0"));
                }
                if !(amplitude.is_finite() && *amplitude > -1.0) {
                    return bad(format!("moro_cardin A={amplitude} must be > -1"));
                }
                Ok(())
            }
            Diffusion::ExpPotential1D { c } if !c.is_finite() => bad(format!("exp_potential c={c}")),
            Diffusion::Constant { matrix } => {
                if matrix.len() != d * d {
                    return bad(format!("constant diffusion needs {} entries, got {}", d * d, matrix.len()));
                }
                for i in 0..d {
                    for j in 0..i {
                        if matrix[i * d + j] != matrix[j * d + i] {
                            return bad("constant diffusion matrix is not symmetric".into());
                        }
                    }
                }
                if cholesky(matrix, d).is_none() {
                    return bad("constant diffusion matrix is not positive definite".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Lower Cholesky factor of a row-major symmetric matrix, `None` unless positive definite.
pub fn cholesky(m: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = m[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Form {
    Scaled(f64),
    RankOne(f64),
    Dense,
}

/// `Σ` evaluated at one point.
///
/// Stored structurally (`g I`, `I − β x xᵀ`, or dense) so that products and
/// columns cost `O(d)` for the radial fields. Buffers are reused across
/// evaluations.
#[derive(Debug, Clone)]
pub struct DiffusionEval {
    dim: usize,
    form: Form,
    data: Vec<f64>,
}

impl DiffusionEval {
    pub fn new(dim: usize) -> Self {
        DiffusionEval {
            dim,
            form: Form::Scaled(1.0),
            data: Vec::with_capacity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set_scaled(&mut self, g: f64) {
        self.form = Form::Scaled(g);
    }

    /// `Σ = I − β x xᵀ`
    pub fn set_rank_one(&mut self, beta: f64, x: &[f64]) {
        self.form = Form::RankOne(beta);
        self.data.clear();
        self.data.extend_from_slice(x);
    }

    pub fn set_dense(&mut self, m: &[f64]) {
        self.form = Form::Dense;
        self.data.clear();
        self.data.extend_from_slice(m);
    }

    /// Scalar factor when `Σ = g I`.
    pub fn as_scaled(&self) -> Option<f64> {
        match self.form {
            Form::Scaled(g) => Some(g),
            _ => None,
        }
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let delta = if i == j { 1.0 } else { 0.0 };
        match self.form {
            Form::Scaled(g) => g * delta,
            Form::RankOne(beta) => delta - beta * (self.data[i] * self.data[j]),
            Form::Dense => self.data[i * self.dim + j],
        }
    }

    /// `out += coef · Σ v`
    #[inline]
    pub fn mul_add(&self, coef: f64, v: &[f64], out: &mut [f64]) {
        match self.form {
            Form::Scaled(g) => {
                let s = coef * g;
                for (o, vi) in out.iter_mut().zip(v) {
                    *o += s * vi;
                }
            }
            Form::RankOne(beta) => {
                let x = &self.data;
                let proj = coef * beta * dot(x, v);
                for ((o, vi), xi) in out.iter_mut().zip(v).zip(x) {
                    *o += coef * vi - proj * xi;
                }
            }
            Form::Dense => {
                let d = self.dim;
                for (i, o) in out.iter_mut().enumerate() {
                    *o += coef * dot(&self.data[i * d..(i + 1) * d], v);
                }
            }
        }
    }

    /// `out += coef · Σ_a` (column `a`).
    #[inline]
    pub fn column_add(&self, coef: f64, a: usize, out: &mut [f64]) {
        match self.form {
            Form::Scaled(g) => out[a] += coef * g,
            Form::RankOne(beta) => {
                let x = &self.data;
                let s = coef * beta * x[a];
                for (o, xi) in out.iter_mut().zip(x) {
                    *o -= s * xi;
                }
                out[a] += coef;
            }
            Form::Dense => {
                let d = self.dim;
                for (i, o) in out.iter_mut().enumerate() {
                    *o += coef * self.data[i * d + a];
                }
            }
        }
    }

    pub fn column(&self, a: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.column_add(1.0, a, &mut out);
        out
    }

    /// Dense row-major copy of `Σ`.
    pub fn sigma_mat(&self) -> Vec<f64> {
        let d = self.dim;
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                m[i * d + j] = self.entry(i, j);
            }
        }
        m
    }
}

/// Drift `F(x)` with its two parts.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEval {
    pub f: Vec<f64>,
    /// `−D ∇V`
    pub gradient_term: Vec<f64>,
    /// `(σ²/2) div D`
    pub divergence_term: Vec<f64>,
}

/// An Itô SDE `dX = F(X) dt + σ Σ(X) dW` as seen by the integrators.
pub trait Sde: Sync {
    fn dim(&self) -> usize;
    /// The scalar noise level `σ`.
    fn noise_level(&self) -> f64;
    fn drift_into(&self, x: &[f64], f: &mut [f64]);
    fn sigma_into(&self, x: &[f64], out: &mut DiffusionEval);
    /// `div(Σ²)(x)`
    fn div_d_into(&self, x: &[f64], out: &mut [f64]);
}

/// The sampling problem: potential, diffusion field, noise level and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    dim: usize,
    sigma: f64,
    potential: Potential,
    diffusion: Diffusion,
    /// `D = Σ²` for constant diffusions.
    constant_d: Option<Vec<f64>>,
}

impl ProblemSpec {
    /// Validates dimensions and parameters. `σ = 0` is accepted for
    /// deterministic limits; samplers of the invariant law require `σ > 0`.
    pub fn new(dim: usize, sigma: f64, potential: Potential, diffusion: Diffusion) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidProblem("dimension must be >= 1".into()));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Error::InvalidProblem(format!("sigma={sigma} must be finite and >= 0")));
        }
        potential.check_dim(dim)?;
        diffusion.check_dim(dim)?;
        let constant_d = match &diffusion {
            Diffusion::Constant { matrix } => Some(square(matrix, dim)),
            _ => None,
        };
        Ok(ProblemSpec {
            dim,
            sigma,
            potential,
            diffusion,
            constant_d,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn diffusion(&self) -> &Diffusion {
        &self.diffusion
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn grad_potential(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut g = vec![0.0; self.dim];
        self.potential.grad_into(x, &mut g);
        Ok(g)
    }

    pub fn sigma_eval(&self, x: &[f64]) -> Result<DiffusionEval> {
        self.check_x(x)?;
        let mut s = DiffusionEval::new(self.dim);
        self.sigma_into(x, &mut s);
        Ok(s)
    }

    pub fn div_d(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut out = vec![0.0; self.dim];
        self.div_d_into(x, &mut out);
        Ok(out)
    }

    pub fn drift(&self, x: &[f64]) -> Result<DriftEval> {
        self.check_x(x)?;
        let d = self.dim;
        let mut grad_v = vec![0.0; d];
        self.potential.grad_into(x, &mut grad_v);
        let mut div = vec![0.0; d];
        self.div_d_into(x, &mut div);
        let half_s2 = 0.5 * self.sigma * self.sigma;
        let gradient_term: Vec<f64> = (0..d).map(|i| -self.d_times(x, &grad_v, i)).collect();
        let divergence_term: Vec<f64> = div.iter().map(|v| half_s2 * v).collect();
        let f = gradient_term.iter().zip(&divergence_term).map(|(a, b)| a + b).collect();
        Ok(DriftEval {
            f,
            gradient_term,
            divergence_term,
        })
    }

    /// For `Σ = g I` in one dimension: `(g, g'/g)`. Used by the time-rescaled sampler.
    pub fn isotropic_log_grad_1d(&self, x: f64) -> Option<(f64, f64)> {
        if self.dim != 1 || !self.diffusion.is_isotropic() {
            return None;
        }
        let xs = [x];
        let mut gv = [0.0];
        self.potential.grad_into(&xs, &mut gv);
        match self.shape(&xs, &gv) {
            Shape::Isotropic(g, grad) => Some((g, grad.component(0, &xs, &gv) / g)),
            Shape::Constant => {
                let g = match &self.diffusion {
                    Diffusion::Constant { matrix } => matrix[0],
                    _ => unreachable!(),
                };
                Some((g, 0.0))
            }
            Shape::RankOne { .. } => None,
        }
    }

    /// `(D ∇V)_i`
    #[inline]
    fn d_times(&self, x: &[f64], grad_v: &[f64], i: usize) -> f64 {
        match self.shape(x, grad_v) {
            Shape::Isotropic(g, _) => g * g * grad_v[i],
            Shape::RankOne { beta, u, .. } => {
                let c = 2.0 * beta - beta * beta * u;
                grad_v[i] - c * x[i] * dot(x, grad_v)
            }
            Shape::Constant => {
                let d = self.dim;
                let m = self.constant_d.as_ref().expect("constant D cached");
                dot(&m[i * d..(i + 1) * d], grad_v)
            }
        }
    }

    /// `grad_v` is only read by the exponential diffusion.
    #[inline]
    fn shape(&self, x: &[f64], grad_v: &[f64]) -> Shape {
        match &self.diffusion {
            Diffusion::Identity => Shape::Isotropic(1.0, IsoGrad::Zero),
            Diffusion::Constant { .. } => Shape::Constant,
            Diffusion::Cosine1D => {
                let (sn, cs) = x[0].sin_cos();
                Shape::Isotropic(1.5 + 0.5 * cs, IsoGrad::Scalar(-0.5 * sn))
            }
            Diffusion::Sine1D => {
                let (sn, cs) = x[0].sin_cos();
                Shape::Isotropic(1.5 + 0.5 * sn, IsoGrad::Scalar(0.5 * cs))
            }
            Diffusion::ExpPotential1D { c } => {
                let g = (c * self.potential.value(x)).exp();
                let _ = grad_v;
                Shape::Isotropic(g, IsoGrad::AlongGradV(c * g))
            }
            Diffusion::MoroCardin { amplitude, eps, inverted } => {
                let e = (-norm2(x) / (2.0 * eps * eps)).exp();
                let b = 1.0 + amplitude * e;
                // ∇b = −A e x / ε²
                let db = -amplitude * e / (eps * eps);
                if *inverted {
                    Shape::Isotropic(1.0 / b, IsoGrad::AlongX(-db / (b * b)))
                } else {
                    Shape::Isotropic(b, IsoGrad::AlongX(db))
                }
            }
            Diffusion::RadialProjection2D => {
                let u = norm2(x);
                let beta = 1.0 / (2.0 * u + 1.0);
                Shape::RankOne {
                    beta,
                    dbeta: -2.0 * beta * beta,
                    u,
                }
            }
            Diffusion::RingRadial => {
                let u = norm2(x);
                if u == 0.0 {
                    Shape::Isotropic(1.0, IsoGrad::Zero)
                } else {
                    Shape::RankOne {
                        beta: 0.5 / u,
                        dbeta: -0.5 / (u * u),
                        u,
                    }
                }
            }
        }
    }
}

impl Sde for ProblemSpec {
    fn dim(&self) -> usize {
        self.dim
    }

    fn noise_level(&self) -> f64 {
        self.sigma
    }

    fn drift_into(&self, x: &[f64], f: &mut [f64]) {
        // f holds ∇V first, then is overwritten in place.
        self.potential.grad_into(x, f);
        let s2 = self.sigma * self.sigma;
        match self.shape(x, f) {
            Shape::Isotropic(g, grad) => {
                let g2 = g * g;
                for i in 0..self.dim {
                    // −g²∇V + (σ²/2)·2g∇g
                    let gi = grad.component(i, x, f);
                    f[i] = -g2 * f[i] + s2 * g * gi;
                }
            }
            Shape::RankOne { beta, dbeta, u } => {
                let (c, dc) = rank_one_d(beta, dbeta, u);
                let xg = dot(x, f);
                let div_coef = -(2.0 * u * dc + (self.dim as f64 + 1.0) * c);
                for i in 0..self.dim {
                    f[i] = -(f[i] - c * x[i] * xg) + 0.5 * s2 * div_coef * x[i];
                }
            }
            Shape::Constant => {
                let d = self.dim;
                let m = self.constant_d.as_ref().expect("constant D cached");
                let mut tmp = [0.0f64; 8];
                if d <= tmp.len() {
                    for i in 0..d {
                        tmp[i] = -dot(&m[i * d..(i + 1) * d], f);
                    }
                    f.copy_from_slice(&tmp[..d]);
                } else {
                    let out: Vec<f64> = (0..d).map(|i| -dot(&m[i * d..(i + 1) * d], f)).collect();
                    f.copy_from_slice(&out);
                }
            }
        }
    }

    fn sigma_into(&self, x: &[f64], out: &mut DiffusionEval) {
        match &self.diffusion {
            Diffusion::Constant { matrix } => out.set_dense(matrix),
            Diffusion::Cosine1D => out.set_scaled(1.5 + 0.5 * x[0].cos()),
            Diffusion::Sine1D => out.set_scaled(1.5 + 0.5 * x[0].sin()),
            _ => match self.shape(x, &[]) {
                Shape::Isotropic(g, _) => out.set_scaled(g),
                Shape::RankOne { beta, .. } => out.set_rank_one(beta, x),
                Shape::Constant => unreachable!(),
            },
        }
    }

    fn div_d_into(&self, x: &[f64], out: &mut [f64]) {
        let needs_grad = matches!(self.diffusion, Diffusion::ExpPotential1D { .. });
        if needs_grad {
            self.potential.grad_into(x, out);
        }
        match self.shape(x, out) {
            Shape::Isotropic(g, grad) => {
                for i in 0..self.dim {
                    out[i] = 2.0 * g * grad.component(i, x, out);
                }
            }
            Shape::RankOne { beta, dbeta, u } => {
                let (c, dc) = rank_one_d(beta, dbeta, u);
                let coef = -(2.0 * u * dc + (self.dim as f64 + 1.0) * c);
                for i in 0..self.dim {
                    out[i] = coef * x[i];
                }
            }
            Shape::Constant => out.fill(0.0),
        }
    }
}

/// For `Σ = I − β(u) x xᵀ`: `D = Σ² = I − c(u) x xᵀ`, returns `(c, c')`.
#[inline]
fn rank_one_d(beta: f64, dbeta: f64, u: f64) -> (f64, f64) {
    let c = 2.0 * beta - beta * beta * u;
    let dc = 2.0 * dbeta - 2.0 * beta * dbeta * u - beta * beta;
    (c, dc)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(x: &[f64]) -> f64 {
    dot(x, x)
}

fn square(m: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            out[i * d + j] = (0..d).map(|k| m[i * d + k] * m[k * d + j]).sum();
        }
    }
    out
}
