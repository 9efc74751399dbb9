//! Mean-square stability on the scalar test problem `dX = λX dt + μX dW`.
//!
//! For the post-processed methods one step is linear in `(X_n, X̄_{n−1})`:
//!
//! ```text
//! X_{n+1} = R₁₁ X_n + R₁₂ X̄_{n−1},    X̄_n = R₂₁ X_n,
//! ```
//!
//! with random coefficients depending on `p = λh`, `q = μ√h` and the step's
//! draws. Second moments then propagate through a 3×3 matrix whose
//! spectral radius decides stability.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::integrators::{Integrator, MethodKind};
use crate::model::{DiffusionEval, Sde};
use crate::quadrature::GaussHermite;
use crate::rng::{NoiseDraws, StreamKey};

const GH_NODES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityPoint {
    pub p: f64,
    pub q2: f64,
}

impl StabilityPoint {
    pub fn new(p: f64, q2: f64) -> Result<Self> {
        if !(q2 >= 0.0) || !p.is_finite() || !q2.is_finite() {
            return Err(Error::InvalidArgument(format!("stability point needs finite p and q² ≥ 0, got ({p}, {q2})")));
        }
        Ok(StabilityPoint { p, q2 })
    }

    /// Mean-square stability of the exact solution: `p + q²/2 < 0`.
    pub fn exact_stable(&self) -> bool {
        self.p + 0.5 * self.q2 < 0.0
    }
}

/// `dX = λX dt + μX dW` with `σ = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearTestProblem {
    pub lambda: f64,
    pub mu: f64,
}

impl Sde for LinearTestProblem {
    fn dim(&self) -> usize {
        1
    }

    fn noise_level(&self) -> f64 {
        1.0
    }

    fn drift_into(&self, x: &[f64], f: &mut [f64]) {
        f[0] = self.lambda * x[0];
    }

    fn sigma_into(&self, x: &[f64], out: &mut DiffusionEval) {
        out.set_scaled(self.mu * x[0]);
    }

    fn div_d_into(&self, x: &[f64], out: &mut [f64]) {
        out[0] = 2.0 * self.mu * self.mu * x[0];
    }
}

/// Coefficients of one linearized step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepCoefficients {
    pub r11: f64,
    pub r12: f64,
    pub r21: f64,
}

fn check_method(kind: MethodKind) -> Result<()> {
    if kind.is_postprocessed() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "stability maps are defined for the post-processed methods, not {kind}"
        )))
    }
}

/// `(R₁₁, R₁₂, R₂₁)` obtained by running the method's own step map on the
/// test problem (`h = 1`, `λ = p`, `μ = q`) from the unit states
/// `(X_n, X̄_{n−1}) = (1, 0)` and `(0, 1)`.
pub fn stability_entries(kind: MethodKind, p: f64, q: f64, draws: &NoiseDraws) -> Result<StepCoefficients> {
    check_method(kind)?;
    let problem = LinearTestProblem { lambda: p, mu: q };
    let mut it = Integrator::new(kind, &problem, 1.0)?;
    Ok(entries_with(&mut it, p, draws))
}

fn entries_with(it: &mut Integrator<'_, LinearTestProblem>, p: f64, draws: &NoiseDraws) -> StepCoefficients {
    let key = StreamKey::new(0, 0, 0);
    let mut st = it.init(&[0.0], key);

    st.x[0] = 1.0;
    st.lagged_force[0] = 0.0;
    it.step_with(&mut st, draws, &[0.0]);
    let (r11, r21) = (st.x[0], st.xbar[0]);

    st.x[0] = 0.0;
    st.lagged_force[0] = p; // F(X̄_{n−1}) with X̄_{n−1} = 1
    it.step_with(&mut st, draws, &[0.0]);
    StepCoefficients { r11, r12: st.x[0], r21 }
}

/// Symbolic form of [`stability_entries`]; the Rademacher variables drop out
/// in one dimension.
pub fn closed_form_entries(kind: MethodKind, p: f64, q: f64, r: f64) -> Result<StepCoefficients> {
    check_method(kind)?;
    let rhat = q * r + 0.5 * q * q * (r * r - 1.0);
    let r21 = 1.0 + 0.5 * q * r;
    let (r11, r12) = match kind {
        MethodKind::Pvd2 { .. } => (1.0 + p + 0.5 * p * q * r + rhat, 0.25 * p * rhat),
        MethodKind::Pvd2Markov { .. } => (1.0 + p * r21 + (1.0 + 0.25 * p) * rhat, 0.0),
        MethodKind::Pvd2Mod1 { .. } => (1.0 + p * r21 + rhat, 0.25 * p * q * r),
        MethodKind::Pvd2Mod2 { .. } => (
            1.0 + p * r21 + q * r + 0.5 * q * q * (r * r - 1.0) * (1.0 + 0.5 * p * r21),
            0.25 * p * q * r,
        ),
        _ => unreachable!(),
    };
    Ok(StepCoefficients { r11, r12, r21 })
}

/// Matrix acting on `(E[X_n²], E[X̄²_{n−1}], E[X_n X̄_{n−1}])`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentMatrix(pub [[f64; 3]; 3]);

impl MomentMatrix {
    /// Moment matrix of a single coefficient realization; averaging these
    /// over the draws gives [`moment_matrix`].
    pub fn from_coefficients(c: &StepCoefficients) -> Self {
        MomentMatrix([
            [c.r11 * c.r11, c.r12 * c.r12, 2.0 * c.r11 * c.r12],
            [c.r21 * c.r21, 0.0, 0.0],
            [c.r21 * c.r11, 0.0, c.r21 * c.r12],
        ])
    }

    fn add_scaled(&mut self, w: f64, other: &MomentMatrix) {
        for i in 0..3 {
            for j in 0..3 {
                self.0[i][j] += w * other.0[i][j];
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

/// Expected moment matrix: Gauss–Hermite in the Gaussian and exact sums
/// over `χ`, `χ̂₁`, `χ̂₂`.
pub fn moment_matrix(kind: MethodKind, p: f64, q: f64) -> Result<MomentMatrix> {
    check_method(kind)?;
    let problem = LinearTestProblem { lambda: p, mu: q };
    let mut it = Integrator::new(kind, &problem, 1.0)?;
    let gh = GaussHermite::new(GH_NODES);
    let mut m = MomentMatrix([[0.0; 3]; 3]);
    for (&r, &w) in gh.nodes.iter().zip(&gh.weights) {
        for bits in 0..8u32 {
            let sign = |b: u32| if bits >> b & 1 == 1 { 1.0 } else { -1.0 };
            let draws = NoiseDraws::from_parts(vec![r], vec![sign(0)], sign(1), sign(2));
            let c = entries_with(&mut it, p, &draws);
            m.add_scaled(w / 8.0, &MomentMatrix::from_coefficients(&c));
        }
    }
    Ok(m)
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Eigenvalues from the characteristic cubic `λ³ − a λ² + b λ − c`, solved in
/// closed form and polished by Newton steps.
pub fn eigenvalues(m: &MomentMatrix) -> [Complex64; 3] {
    let a = &m.0;
    let tr = a[0][0] + a[1][1] + a[2][2];
    let minors = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0] + a[1][1] * a[2][2]
        - a[1][2] * a[2][1];
    let det = det3(a);
    let poly = |z: Complex64| ((z - tr) * z + minors) * z - det;
    let dpoly = |z: Complex64| (z * 3.0 - tr * 2.0) * z + minors;

    // depressed cubic t³ + P t + Q with λ = t + tr/3
    let s = tr / 3.0;
    let pp = minors - tr * tr / 3.0;
    let qq = -2.0 * s * s * s + minors * s - det;
    let disc = Complex64::new(qq * qq / 4.0 + pp * pp * pp / 27.0, 0.0).sqrt();
    let mut u = (Complex64::new(-qq / 2.0, 0.0) + disc).cbrt();
    if u.norm() < 1e-300 {
        u = (Complex64::new(-qq / 2.0, 0.0) - disc).cbrt();
    }
    let omega = Complex64::new(-0.5, 3f64.sqrt() / 2.0);
    let mut roots = [Complex64::new(0.0, 0.0); 3];
    let mut w = Complex64::new(1.0, 0.0);
    for root in roots.iter_mut() {
        let uk = u * w;
        let t = if uk.norm() < 1e-300 { Complex64::new(0.0, 0.0) } else { uk - pp / (uk * 3.0) };
        let mut z = t + s;
        for _ in 0..4 {
            let d = dpoly(z);
            if d.norm() < 1e-300 {
                break;
            }
            let step = poly(z) / d;
            if !step.is_finite() {
                break;
            }
            z -= step;
        }
        *root = z;
        w *= omega;
    }
    roots
}

/// Largest eigenvalue modulus. The residual `|det(m − r I)|` of every root
/// is checked against the matrix scale.
pub fn spectral_radius(m: &MomentMatrix) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument("moment matrix has non-finite entries".into()));
    }
    let roots = eigenvalues(m);
    let scale = m.0.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1.0);
    for r in roots {
        let mut shifted = [[Complex64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                shifted[i][j] = Complex64::new(m.0[i][j], 0.0) - if i == j { r } else { Complex64::new(0.0, 0.0) };
            }
        }
        let s = &shifted;
        let res = s[0][0] * (s[1][1] * s[2][2] - s[1][2] * s[2][1]) - s[0][1] * (s[1][0] * s[2][2] - s[1][2] * s[2][0])
            + s[0][2] * (s[1][0] * s[2][1] - s[1][1] * s[2][0]);
        if res.norm() > 1e-9 * scale.powi(3) {
            return Err(Error::InvalidArgument(format!(
                "eigenvalue residual {:.3e} too large for root {r}",
                res.norm()
            )));
        }
    }
    Ok(roots.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// One cell of a region scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionCell {
    pub p: f64,
    pub q2: f64,
    pub rho: f64,
    pub stable: bool,
    pub exact_stable: bool,
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Spectral radius on the grid `q2_grid × p_grid`, rows ordered by `q²`
/// and `p` within a row.
pub fn scan_region(kind: MethodKind, p_grid: &[f64], q2_grid: &[f64], exec: &Executor) -> Result<Vec<RegionCell>> {
    check_method(kind)?;
    for &q2 in q2_grid {
        StabilityPoint::new(0.0, q2)?;
    }
    if let Some(p) = p_grid.iter().find(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite p = {p} in grid")));
    }
    let np = p_grid.len();
    let cells = exec.map_collect(np * q2_grid.len(), |k| {
        let (p, q2) = (p_grid[k % np], q2_grid[k / np]);
        let rho = moment_matrix(kind, p, q2.sqrt()).and_then(|m| spectral_radius(&m));
        rho.map(|rho| RegionCell {
            p,
            q2,
            rho,
            stable: rho < 1.0,
            exact_stable: StabilityPoint { p, q2 }.exact_stable(),
        })
    });
    cells.into_iter().collect()
}

/// Monte Carlo `E[X_n²]` after `n_steps` steps from `X_0 = 1` on the test
/// problem, over `n_traj` trajectories.
pub fn empirical_second_moment(
    kind: MethodKind,
    p: f64,
    q: f64,
    n_steps: u64,
    n_traj: usize,
    seed: u64,
    exec: &Executor,
) -> Result<f64> {
    let problem = LinearTestProblem { lambda: p, mu: q };
    Integrator::new(kind, &problem, 1.0)?;
    let sq = exec.map_collect(n_traj, |t| {
        let mut it = Integrator::new(kind, &problem, 1.0).expect("validated");
        let mut st = it.init(&[1.0], StreamKey::new(seed, t as u64, 0));
        for _ in 0..n_steps {
            it.step(&mut st);
        }
        st.x[0] * st.x[0]
    });
    Ok(sq.iter().sum::<f64>() / n_traj as f64)
}
