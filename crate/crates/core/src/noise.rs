//! Weak order two integrators for the drift-free equation `dX = σ Σ(X) dW`.
//!
//! Both schemes are derivative free and use a number of `Σ` evaluations
//! that does not grow with the dimension: a batch of one column per noise
//! direction counts as one evaluation.
//!
//! * [`NoiseScheme::Mt2`]: a Milstein block built from the `J` table and a
//!   symmetrised `χ` stage, 5 evaluations.
//! * [`NoiseScheme::W2Ito1`]: a stage method driven by `Ĵ`, 3 evaluations.
//!
//! The `Mod1`/`Mod2` variants move some stage points to auxiliary points
//! supplied by the caller (see [`AuxPoints`]); this is how the modified
//! post-processed methods enlarge their mean-square stability regions.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{DiffusionEval, Sde};
use crate::rng::NoiseDraws;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseScheme {
    Mt2,
    W2Ito1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseVariant {
    Base,
    Mod1,
    Mod2,
}

impl NoiseVariant {
    pub fn aux_count(self) -> usize {
        match self {
            NoiseVariant::Base => 0,
            NoiseVariant::Mod1 => 1,
            NoiseVariant::Mod2 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseVariant::Base => "base",
            NoiseVariant::Mod1 => "mod1",
            NoiseVariant::Mod2 => "mod2",
        }
    }
}

impl NoiseScheme {
    pub fn name(self) -> &'static str {
        match self {
            NoiseScheme::Mt2 => "mt2",
            NoiseScheme::W2Ito1 => "w2ito1",
        }
    }

    /// Evaluations of `Σ` per increment for the given variant.
    pub fn sigma_evals(self, variant: NoiseVariant) -> u64 {
        match (self, variant) {
            (NoiseScheme::Mt2, _) => 5,
            (NoiseScheme::W2Ito1, NoiseVariant::Mod2) => 4,
            (NoiseScheme::W2Ito1, _) => 3,
        }
    }
}

impl fmt::Display for NoiseScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mt2" => Ok(NoiseScheme::Mt2),
            "w2ito1" => Ok(NoiseScheme::W2Ito1),
            _ => Err(Error::UnknownName {
                what: "noise integrator",
                value: s.to_string(),
            }),
        }
    }
}

impl FromStr for NoiseVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(NoiseVariant::Base),
            "mod1" => Ok(NoiseVariant::Mod1),
            "mod2" => Ok(NoiseVariant::Mod2),
            _ => Err(Error::UnknownName {
                what: "noise variant",
                value: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NoiseMethodKind {
    pub scheme: NoiseScheme,
    pub variant: NoiseVariant,
}

impl NoiseMethodKind {
    pub fn new(scheme: NoiseScheme, variant: NoiseVariant) -> Self {
        NoiseMethodKind { scheme, variant }
    }

    pub fn base(scheme: NoiseScheme) -> Self {
        NoiseMethodKind::new(scheme, NoiseVariant::Base)
    }
}

/// Auxiliary evaluation points `X⁽¹⁾`, `X⁽²⁾`.
#[derive(Debug, Clone, Copy)]
pub enum AuxPoints<'a> {
    None,
    One(&'a [f64]),
    Two(&'a [f64], &'a [f64]),
}

impl AuxPoints<'_> {
    fn len(&self) -> usize {
        match self {
            AuxPoints::None => 0,
            AuxPoints::One(_) => 1,
            AuxPoints::Two(..) => 2,
        }
    }
}

/// Scratch buffers for [`noise_increment_into`].
#[derive(Debug, Clone)]
pub struct NoiseWorkspace {
    sig_x: DiffusionEval,
    sig_s: DiffusionEval,
    sig_tmp: DiffusionEval,
    dir: Vec<f64>,
    point: Vec<f64>,
    coefs: Vec<f64>,
}

impl NoiseWorkspace {
    pub fn new(d: usize) -> Self {
        NoiseWorkspace {
            sig_x: DiffusionEval::new(d),
            sig_s: DiffusionEval::new(d),
            sig_tmp: DiffusionEval::new(d),
            dir: vec![0.0; d],
            point: vec![0.0; d],
            coefs: vec![0.0; d],
        }
    }
}

/// `Φ̂_h^Σ = Φ_h^Σ − x` with the auxiliary points checked against the variant.
pub fn noise_increment<S: Sde + ?Sized>(
    kind: NoiseMethodKind,
    sde: &S,
    x: &[f64],
    aux: &[&[f64]],
    h: f64,
    draws: &NoiseDraws,
) -> Result<Vec<f64>> {
    let d = sde.dim();
    if x.len() != d || draws.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x.len() != d { x.len() } else { draws.dim() },
        });
    }
    let expected = kind.variant.aux_count();
    if aux.len() != expected {
        return Err(Error::AuxArity {
            variant: kind.variant.name(),
            expected,
            got: aux.len(),
        });
    }
    if let Some(bad) = aux.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step size h={h} must be > 0")));
    }
    let aux = match aux {
        [] => AuxPoints::None,
        [a] => AuxPoints::One(a),
        [a, b] => AuxPoints::Two(a, b),
        _ => unreachable!(),
    };
    let mut ws = NoiseWorkspace::new(d);
    let mut out = vec![0.0; d];
    let mut units = 0;
    noise_increment_into(kind, sde, x, aux, h, draws, &mut ws, &mut units, &mut out);
    Ok(out)
}

/// Adds `Φ̂_h^Σ(x)` to `out`.
///
/// `sigma_units` is incremented by the number of `Σ` column evaluations
/// (a full matrix evaluation counts `d`).
#[allow(clippy::too_many_arguments)]
pub fn noise_increment_into<S: Sde + ?Sized>(
    kind: NoiseMethodKind,
    sde: &S,
    x: &[f64],
    aux: AuxPoints<'_>,
    h: f64,
    draws: &NoiseDraws,
    ws: &mut NoiseWorkspace,
    sigma_units: &mut u64,
    out: &mut [f64],
) {
    debug_assert_eq!(aux.len(), kind.variant.aux_count());
    // stage point for the √h / K₁ stage, and point of the inner Σ
    let (stage_pt, inner_pt) = match (kind.variant, aux) {
        (NoiseVariant::Base, _) => (x, None),
        (NoiseVariant::Mod1, AuxPoints::One(x1)) => (x1, None),
        (NoiseVariant::Mod2, AuxPoints::Two(x1, x2)) => (x1, Some(x2)),
        _ => panic!("auxiliary points do not match the noise variant"),
    };
    match kind.scheme {
        NoiseScheme::Mt2 => mt2(sde, x, stage_pt, inner_pt, h, draws, ws, sigma_units, out),
        NoiseScheme::W2Ito1 => w2ito1(sde, x, stage_pt, inner_pt, h, draws, ws, sigma_units, out),
    }
}

#[allow(clippy::too_many_arguments)]
fn mt2<S: Sde + ?Sized>(
    sde: &S,
    x: &[f64],
    stage_pt: &[f64],
    inner_pt: Option<&[f64]>,
    h: f64,
    draws: &NoiseDraws,
    ws: &mut NoiseWorkspace,
    units: &mut u64,
    out: &mut [f64],
) {
    let d = sde.dim();
    let sigma = sde.noise_level();
    let du = d as u64;
    // The inner Σ is Σ(x) except for mod2, where it is Σ(X⁽²⁾). Σ(x) itself is
    // then not needed.
    let inner = &mut ws.sig_s;
    sde.sigma_into(inner_pt.unwrap_or(x), inner);
    *units += du;

    // Milstein block: ½ Σ_a σ[Σ_a(x + hσ Σ J_a) − Σ_a(x − hσ Σ J_a)]
    for a in 0..d {
        for (b, c) in ws.coefs.iter_mut().enumerate() {
            *c = draws.j(a, b);
        }
        ws.dir.fill(0.0);
        inner.mul_add(h * sigma, &ws.coefs, &mut ws.dir);
        for sgn in [1.0, -1.0] {
            for i in 0..d {
                ws.point[i] = x[i] + sgn * ws.dir[i];
            }
            sde.sigma_into(&ws.point, &mut ws.sig_tmp);
            ws.sig_tmp.column_add(0.5 * sgn * sigma, a, out);
            *units += 1;
        }
    }

    // (√h/2) [σΣ(c + √(h/2) σ Σ χ) + σΣ(c − √(h/2) σ Σ χ)] R
    ws.dir.fill(0.0);
    inner.mul_add((0.5 * h).sqrt() * sigma, &draws.chi, &mut ws.dir);
    let coef = 0.5 * h.sqrt() * sigma;
    for sgn in [1.0, -1.0] {
        for i in 0..d {
            ws.point[i] = stage_pt[i] + sgn * ws.dir[i];
        }
        sde.sigma_into(&ws.point, &mut ws.sig_tmp);
        ws.sig_tmp.mul_add(coef, &draws.gaussian, out);
        *units += du;
    }
}

#[allow(clippy::too_many_arguments)]
fn w2ito1<S: Sde + ?Sized>(
    sde: &S,
    x: &[f64],
    stage_pt: &[f64],
    inner_pt: Option<&[f64]>,
    h: f64,
    draws: &NoiseDraws,
    ws: &mut NoiseWorkspace,
    units: &mut u64,
    out: &mut [f64],
) {
    let d = sde.dim();
    let sigma = sde.noise_level();
    let sqh = h.sqrt();
    let r = &draws.gaussian;

    sde.sigma_into(x, &mut ws.sig_x);
    *units += d as u64;
    let inner = match inner_pt {
        Some(p) => {
            sde.sigma_into(p, &mut ws.sig_s);
            *units += d as u64;
            &ws.sig_s
        }
        None => &ws.sig_x,
    };

    for a in 0..d {
        let jaa = draws.j_hat(a, a);
        // −σΣ_a(x) R_a + 2σΣ_a(x) Ĵ_aa
        ws.sig_x.column_add(sqh * sigma * (2.0 * jaa - r[a]), a, out);

        // K₁ = c + (√h/2)σΣ_a(s)χ̂₁ + √h Σ_{b≠a} σΣ_b(s) Ĵ_{a,b}
        for (b, c) in ws.coefs.iter_mut().enumerate() {
            *c = if b == a { 0.5 * draws.chi_hat1 } else { draws.j_hat(a, b) };
        }
        ws.point.copy_from_slice(stage_pt);
        inner.mul_add(sqh * sigma, &ws.coefs, &mut ws.point);
        sde.sigma_into(&ws.point, &mut ws.sig_tmp);
        ws.sig_tmp.column_add(sqh * sigma * r[a], a, out);

        // K₂ = x − (√h/2)σΣ_a(s)χ̂₁
        ws.point.copy_from_slice(x);
        inner.column_add(-0.5 * sqh * sigma * draws.chi_hat1, a, &mut ws.point);
        sde.sigma_into(&ws.point, &mut ws.sig_tmp);
        ws.sig_tmp.column_add(sqh * sigma * (r[a] - 2.0 * jaa), a, out);
        *units += 2;
    }
}
