//! One-step maps for all time integrators.
//!
//! An [`Integrator`] binds a method, an SDE and a step size, and owns the
//! scratch buffers so that stepping never allocates. Per-trajectory data
//! lives in [`MethodState`].
//!
//! After each call to [`Integrator::step`] the state exposes the sample for
//! the time index just left: `X̄_n` for the post-processed methods, `X_n`
//! otherwise (see [`MethodState::sample`]).

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{DiffusionEval, Sde};
use crate::noise::{noise_increment_into, AuxPoints, NoiseMethodKind, NoiseScheme, NoiseVariant, NoiseWorkspace};
use crate::rng::{NoiseDraws, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    Em,
    Lmd,
    Lmt,
    Rk4Strang { noise: NoiseScheme },
    Pvd2 { noise: NoiseScheme },
    Pvd2Markov { noise: NoiseScheme },
    Pvd2Mod1 { noise: NoiseScheme },
    Pvd2Mod2 { noise: NoiseScheme },
}

impl MethodKind {
    /// Every method the library implements, in a fixed order.
    pub fn all() -> Vec<MethodKind> {
        let mut v = vec![MethodKind::Em, MethodKind::Lmd, MethodKind::Lmt];
        for noise in [NoiseScheme::W2Ito1, NoiseScheme::Mt2] {
            v.extend([
                MethodKind::Rk4Strang { noise },
                MethodKind::Pvd2 { noise },
                MethodKind::Pvd2Markov { noise },
                MethodKind::Pvd2Mod1 { noise },
                MethodKind::Pvd2Mod2 { noise },
            ]);
        }
        v
    }

    pub fn is_postprocessed(self) -> bool {
        matches!(
            self,
            MethodKind::Pvd2 { .. } | MethodKind::Pvd2Markov { .. } | MethodKind::Pvd2Mod1 { .. } | MethodKind::Pvd2Mod2 { .. }
        )
    }

    /// The noise integrator invoked inside a step, if any.
    pub fn noise_kind(self) -> Option<NoiseMethodKind> {
        match self {
            MethodKind::Em | MethodKind::Lmd | MethodKind::Lmt => None,
            MethodKind::Rk4Strang { noise } | MethodKind::Pvd2 { noise } | MethodKind::Pvd2Markov { noise } => {
                Some(NoiseMethodKind::base(noise))
            }
            MethodKind::Pvd2Mod1 { noise } => Some(NoiseMethodKind::new(noise, NoiseVariant::Mod1)),
            MethodKind::Pvd2Mod2 { noise } => Some(NoiseMethodKind::new(noise, NoiseVariant::Mod2)),
        }
    }

    /// Drift evaluations per step, excluding the one-off warm-up.
    pub fn force_per_step(self) -> u64 {
        match self {
            MethodKind::Rk4Strang { .. } => 8,
            MethodKind::Pvd2Markov { .. } => 2,
            _ => 1,
        }
    }

    /// Drift evaluations made once before the first step.
    pub fn force_warmup(self) -> u64 {
        match self {
            MethodKind::Pvd2 { .. } | MethodKind::Pvd2Mod1 { .. } | MethodKind::Pvd2Mod2 { .. } => 1,
            _ => 0,
        }
    }

    /// `Σ` evaluations per step inside the integrator proper. The
    /// post-processor's `Σ(X_n)` is tallied separately.
    pub fn sigma_per_step(self) -> u64 {
        match self.noise_kind() {
            Some(k) => k.scheme.sigma_evals(k.variant),
            None => 1,
        }
    }

    /// Whether the step consumes the next step's Gaussian vector.
    pub fn needs_next_gaussian(self) -> bool {
        matches!(self, MethodKind::Lmd | MethodKind::Lmt)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodKind::Em => f.write_str("em"),
            MethodKind::Lmd => f.write_str("lmd"),
            MethodKind::Lmt => f.write_str("lmt"),
            MethodKind::Rk4Strang { noise } => write!(f, "rk4_{noise}"),
            MethodKind::Pvd2 { noise } => write!(f, "pvd2_{noise}"),
            MethodKind::Pvd2Markov { noise } => write!(f, "pvd2_markov_{noise}"),
            MethodKind::Pvd2Mod1 { noise } => write!(f, "pvd2_mod1_{noise}"),
            MethodKind::Pvd2Mod2 { noise } => write!(f, "pvd2_mod2_{noise}"),
        }
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownName {
            what: "method",
            value: s.to_string(),
        };
        match s {
            "em" => return Ok(MethodKind::Em),
            "lmd" => return Ok(MethodKind::Lmd),
            "lmt" => return Ok(MethodKind::Lmt),
            _ => {}
        }
        let (head, noise) = s.rsplit_once('_').ok_or_else(unknown)?;
        let noise: NoiseScheme = noise.parse().map_err(|_| unknown())?;
        match head {
            "rk4" => Ok(MethodKind::Rk4Strang { noise }),
            "pvd2" => Ok(MethodKind::Pvd2 { noise }),
            "pvd2_markov" => Ok(MethodKind::Pvd2Markov { noise }),
            "pvd2_mod1" => Ok(MethodKind::Pvd2Mod1 { noise }),
            "pvd2_mod2" => Ok(MethodKind::Pvd2Mod2 { noise }),
            _ => Err(unknown()),
        }
    }
}

/// Evaluation tallies.
///
/// `Σ` work is kept in column units: a full matrix evaluation adds `d`, a
/// single column adds 1, so [`Counters::n_sigma`] is a dimension-free count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    /// Drift evaluations made by steps.
    pub force: u64,
    /// The one-off drift evaluation at `X̄_{-1} = X_0` of the lagged methods.
    pub warmup_force: u64,
    pub sigma_units: u64,
    pub postprocess_sigma_units: u64,
    pub steps: u64,
}

impl Counters {
    pub fn n_sigma(&self, d: usize) -> u64 {
        self.sigma_units / d as u64
    }

    pub fn n_sigma_postprocess(&self, d: usize) -> u64 {
        self.postprocess_sigma_units / d as u64
    }

    pub fn merge(&mut self, other: &Counters) {
        self.force += other.force;
        self.warmup_force += other.warmup_force;
        self.sigma_units += other.sigma_units;
        self.postprocess_sigma_units += other.postprocess_sigma_units;
        self.steps += other.steps;
    }
}

/// Per-trajectory carry.
#[derive(Debug, Clone)]
pub struct MethodState {
    pub x: Vec<f64>,
    /// `F(X̄_{n-1})`; only maintained by the lagged post-processed methods.
    pub lagged_force: Vec<f64>,
    /// Sample for the last completed time index.
    pub xbar: Vec<f64>,
    /// Reweighting factor of that sample (`1/g²` for LMt, else 1).
    pub weight: f64,
    /// Index of the next step.
    pub n: u64,
    pub key: StreamKey,
    pub counters: Counters,
    pending: Vec<f64>,
    pending_valid: bool,
}

impl MethodState {
    /// The sample point of the last completed step and its weight.
    pub fn sample(&self) -> (&[f64], f64) {
        (&self.xbar, self.weight)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().all(|v| v.is_finite())
    }
}

/// Scratch space owned by an [`Integrator`].
#[derive(Debug, Clone)]
struct Workspace {
    draws: NoiseDraws,
    next: NoiseDraws,
    noise: NoiseWorkspace,
    sig: DiffusionEval,
    f: Vec<f64>,
    point: Vec<f64>,
    aux1: Vec<f64>,
    aux2: Vec<f64>,
    inc: Vec<f64>,
    k: [Vec<f64>; 4],
}

impl Workspace {
    fn new(d: usize) -> Self {
        Workspace {
            draws: NoiseDraws::zeros(d),
            next: NoiseDraws::zeros(d),
            noise: NoiseWorkspace::new(d),
            sig: DiffusionEval::new(d),
            f: vec![0.0; d],
            point: vec![0.0; d],
            aux1: vec![0.0; d],
            aux2: vec![0.0; d],
            inc: vec![0.0; d],
            k: [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]],
        }
    }
}

/// A method bound to an SDE and a step size.
#[derive(Debug, Clone)]
pub struct Integrator<'a, S: Sde + ?Sized> {
    kind: MethodKind,
    sde: &'a S,
    h: f64,
    ws: Workspace,
}

impl<'a, S: Sde + ?Sized> Integrator<'a, S> {
    pub fn new(kind: MethodKind, sde: &'a S, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size h={h} must be positive and finite")));
        }
        let d = sde.dim();
        if kind == MethodKind::Lmd && d > 1 {
            log::warn!("lmd is not consistent for d > 1 (d = {d}); its error will plateau");
        }
        let mut ws = Workspace::new(d);
        if kind == MethodKind::Lmt {
            if d != 1 {
                return Err(Error::Unsupported(format!("lmt needs a one-dimensional problem, got d = {d}")));
            }
            sde.sigma_into(&[0.0], &mut ws.sig);
            if ws.sig.as_scaled().is_none() {
                return Err(Error::Unsupported("lmt needs an isotropic diffusion".into()));
            }
        }
        Ok(Integrator { kind, sde, h, ws })
    }

    pub fn kind(&self) -> MethodKind {
        self.kind
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn sde(&self) -> &'a S {
        self.sde
    }

    /// Fresh state at `x0` for the trajectory addressed by `key`; performs the
    /// warm-up force evaluation of the lagged methods.
    pub fn init(&mut self, x0: &[f64], key: StreamKey) -> MethodState {
        let d = self.sde.dim();
        assert_eq!(x0.len(), d, "initial condition has the wrong dimension");
        let mut st = MethodState {
            x: x0.to_vec(),
            lagged_force: vec![0.0; d],
            xbar: x0.to_vec(),
            weight: 1.0,
            n: 0,
            key: key.with_step(0),
            counters: Counters::default(),
            pending: vec![0.0; d],
            pending_valid: false,
        };
        if self.kind.force_warmup() > 0 {
            self.sde.drift_into(x0, &mut st.lagged_force);
            st.counters.warmup_force += 1;
        }
        st
    }

    /// Advances one step using the draws addressed by the state's key.
    pub fn step(&mut self, st: &mut MethodState) {
        let key = st.key.with_step(st.n);
        if self.kind.needs_next_gaussian() {
            if st.pending_valid {
                self.ws.draws.gaussian.copy_from_slice(&st.pending);
            } else {
                self.ws.draws.refill(key);
            }
            self.ws.next.refill(key.with_step(st.n + 1));
            st.pending.copy_from_slice(&self.ws.next.gaussian);
            st.pending_valid = true;
        } else {
            self.ws.draws.refill(key);
        }
        let draws = std::mem::take(&mut self.ws.draws);
        let next = std::mem::take(&mut self.ws.next);
        self.step_with(st, &draws, &next.gaussian);
        self.ws.draws = draws;
        self.ws.next = next;
    }

    /// Advances one step with explicit draws. `next_gaussian` is `R_{n+1}`
    /// and is read only by LMd and LMt.
    pub fn step_with(&mut self, st: &mut MethodState, draws: &NoiseDraws, next_gaussian: &[f64]) {
        match self.kind {
            MethodKind::Em => self.em(st, draws),
            MethodKind::Lmd => self.lmd(st, draws, next_gaussian),
            MethodKind::Lmt => self.lmt(st, draws, next_gaussian),
            MethodKind::Rk4Strang { noise } => self.rk4_strang(st, NoiseMethodKind::base(noise), draws),
            kind => self.pvd2(st, kind, draws),
        }
        st.n += 1;
        st.counters.steps += 1;
    }

    fn em(&mut self, st: &mut MethodState, draws: &NoiseDraws) {
        let (sde, h, d) = (self.sde, self.h, self.sde.dim());
        let ws = &mut self.ws;
        st.xbar.copy_from_slice(&st.x);
        st.weight = 1.0;
        sde.drift_into(&st.x, &mut ws.f);
        sde.sigma_into(&st.x, &mut ws.sig);
        st.counters.force += 1;
        st.counters.sigma_units += d as u64;
        for i in 0..d {
            st.x[i] += h * ws.f[i];
        }
        ws.sig.mul_add(h.sqrt() * sde.noise_level(), &draws.gaussian, &mut st.x);
    }

    fn lmd(&mut self, st: &mut MethodState, draws: &NoiseDraws, next: &[f64]) {
        let (sde, h, d) = (self.sde, self.h, self.sde.dim());
        let sigma = sde.noise_level();
        let ws = &mut self.ws;
        st.xbar.copy_from_slice(&st.x);
        st.weight = 1.0;
        sde.drift_into(&st.x, &mut ws.f);
        sde.div_d_into(&st.x, &mut ws.point);
        sde.sigma_into(&st.x, &mut ws.sig);
        st.counters.force += 1;
        st.counters.sigma_units += d as u64;
        for i in 0..d {
            st.x[i] += h * ws.f[i] + 0.25 * h * 0.5 * sigma * sigma * ws.point[i];
            ws.inc[i] = 0.5 * (draws.gaussian[i] + next[i]);
        }
        ws.sig.mul_add(h.sqrt() * sigma, &ws.inc, &mut st.x);
    }

    // LM on the time-changed equation dX = (F/g²) dτ + σ dW̃; the sample is
    // reweighted by 1/g².
    fn lmt(&mut self, st: &mut MethodState, draws: &NoiseDraws, next: &[f64]) {
        let (sde, h) = (self.sde, self.h);
        let sigma = sde.noise_level();
        let ws = &mut self.ws;
        sde.drift_into(&st.x, &mut ws.f);
        sde.sigma_into(&st.x, &mut ws.sig);
        st.counters.force += 1;
        st.counters.sigma_units += 1;
        let g = ws.sig.as_scaled().expect("lmt needs an isotropic diffusion");
        let w = 1.0 / (g * g);
        st.xbar.copy_from_slice(&st.x);
        st.weight = w;
        st.x[0] += h * ws.f[0] * w + sigma * h.sqrt() * 0.5 * (draws.gaussian[0] + next[0]);
    }

    fn rk4_half(&mut self, st: &mut MethodState) {
        let (sde, d) = (self.sde, self.sde.dim());
        let dt = 0.5 * self.h;
        let ws = &mut self.ws;
        let [k1, k2, k3, k4] = &mut ws.k;
        sde.drift_into(&st.x, k1);
        for i in 0..d {
            ws.point[i] = st.x[i] + 0.5 * dt * k1[i];
        }
        sde.drift_into(&ws.point, k2);
        for i in 0..d {
            ws.point[i] = st.x[i] + 0.5 * dt * k2[i];
        }
        sde.drift_into(&ws.point, k3);
        for i in 0..d {
            ws.point[i] = st.x[i] + dt * k3[i];
        }
        sde.drift_into(&ws.point, k4);
        for i in 0..d {
            st.x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        st.counters.force += 4;
    }

    fn rk4_strang(&mut self, st: &mut MethodState, noise: NoiseMethodKind, draws: &NoiseDraws) {
        st.xbar.copy_from_slice(&st.x);
        st.weight = 1.0;
        self.rk4_half(st);
        let ws = &mut self.ws;
        ws.inc.fill(0.0);
        noise_increment_into(
            noise,
            self.sde,
            &st.x,
            AuxPoints::None,
            self.h,
            draws,
            &mut ws.noise,
            &mut st.counters.sigma_units,
            &mut ws.inc,
        );
        for (x, v) in st.x.iter_mut().zip(&ws.inc) {
            *x += v;
        }
        self.rk4_half(st);
    }

    fn pvd2(&mut self, st: &mut MethodState, kind: MethodKind, draws: &NoiseDraws) {
        let (sde, h, d) = (self.sde, self.h, self.sde.dim());
        let noise = kind.noise_kind().expect("post-processed methods carry a noise integrator");
        let ws = &mut self.ws;

        postprocess_into(sde, &st.x, h, &draws.gaussian, &mut ws.sig, &mut st.xbar);
        st.counters.postprocess_sigma_units += d as u64;
        st.weight = 1.0;

        // the force that shifts the noise integrator's evaluation point
        if let MethodKind::Pvd2Markov { .. } = kind {
            sde.drift_into(&st.x, &mut st.lagged_force);
            st.counters.force += 1;
        }
        for i in 0..d {
            ws.aux1[i] = st.x[i] + 0.25 * h * st.lagged_force[i];
        }

        sde.drift_into(&st.xbar, &mut ws.f);
        st.counters.force += 1;

        ws.inc.fill(0.0);
        let (base, aux) = match noise.variant {
            NoiseVariant::Base => (&ws.aux1[..], AuxPoints::None),
            NoiseVariant::Mod1 => (&st.x[..], AuxPoints::One(&ws.aux1)),
            NoiseVariant::Mod2 => {
                for i in 0..d {
                    ws.aux2[i] = st.x[i] + 0.5 * h * ws.f[i];
                }
                (&st.x[..], AuxPoints::Two(&ws.aux1, &ws.aux2))
            }
        };
        noise_increment_into(
            noise,
            sde,
            base,
            aux,
            h,
            draws,
            &mut ws.noise,
            &mut st.counters.sigma_units,
            &mut ws.inc,
        );
        for i in 0..d {
            st.x[i] += h * ws.f[i] + ws.inc[i];
        }
        st.lagged_force.copy_from_slice(&ws.f);
    }

    /// Post-processed sample `X̄` at the current state, drawn with the key of
    /// the step that would come next. Used for final-time observables.
    pub fn final_sample(&mut self, st: &MethodState) -> Vec<f64> {
        if !self.kind.is_postprocessed() {
            return st.x.clone();
        }
        let key = st.key.with_step(st.n);
        self.ws.draws.refill(key);
        let mut out = vec![0.0; st.x.len()];
        postprocess_into(self.sde, &st.x, self.h, &self.ws.draws.gaussian, &mut self.ws.sig, &mut out);
        out
    }
}

/// `X̄ = x + ½√h σ Σ(x) R`.
pub fn postprocess<S: Sde + ?Sized>(sde: &S, x: &[f64], h: f64, gaussian: &[f64]) -> Vec<f64> {
    let mut sig = DiffusionEval::new(sde.dim());
    let mut out = vec![0.0; x.len()];
    postprocess_into(sde, x, h, gaussian, &mut sig, &mut out);
    out
}

fn postprocess_into<S: Sde + ?Sized>(
    sde: &S,
    x: &[f64],
    h: f64,
    gaussian: &[f64],
    sig: &mut DiffusionEval,
    out: &mut [f64],
) {
    out.copy_from_slice(x);
    if h == 0.0 {
        return;
    }
    sde.sigma_into(x, sig);
    sig.mul_add(0.5 * h.sqrt() * sde.noise_level(), gaussian, out);
}
