use crate::error::{Error, Result};
use crate::estimators::Histogram;
use crate::exec::Executor;
use crate::integrators::{Counters, Integrator, MethodKind};
use crate::model::Sde;
use crate::rng::StreamKey;

/// Trajectories are checked for overflow every this many steps.
pub const DIVERGENCE_CHECK_INTERVAL: u64 = 1024;

const ENSEMBLE_BLOCK: usize = 256;

/// Something that absorbs weighted samples and merges associatively.
pub trait Accumulator: Clone + Send {
    fn add(&mut self, x: &[f64], w: f64);
    fn merge(&mut self, other: &Self);
}

impl Accumulator for Histogram {
    #[inline]
    fn add(&mut self, x: &[f64], w: f64) {
        Histogram::add(self, x[0], w)
    }

    fn merge(&mut self, other: &Self) {
        Histogram::merge(self, other)
    }
}

/// Running weighted mean of `φ`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedMoments {
    phi: fn(&[f64]) -> f64,
    pub sum_w: f64,
    pub sum_wphi: f64,
    pub count: u64,
}

impl WeightedMoments {
    pub fn new(phi: fn(&[f64]) -> f64) -> Self {
        WeightedMoments {
            phi,
            sum_w: 0.0,
            sum_wphi: 0.0,
            count: 0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.sum_wphi / self.sum_w
    }
}

impl Accumulator for WeightedMoments {
    #[inline]
    fn add(&mut self, x: &[f64], w: f64) {
        self.sum_w += w;
        self.sum_wphi += w * (self.phi)(x);
        self.count += 1;
    }

    fn merge(&mut self, other: &Self) {
        self.sum_w += other.sum_w;
        self.sum_wphi += other.sum_wphi;
        self.count += other.count;
    }
}

/// Parameters shared by the time-average and ensemble estimators.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub method: MethodKind,
    pub h: f64,
    /// Final time; the step count is `⌈T/h⌉`.
    pub t_final: f64,
    /// Discarded steps per replicate; `None` selects [`default_burn_in`].
    pub burn_in: Option<u64>,
    /// Independent replicates (time average) or trajectories (ensemble).
    pub replicates: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
}

/// `⌈T/h⌉`, ignoring round-off in the ratio.
pub fn step_count(t_final: f64, h: f64) -> u64 {
    let r = t_final / h;
    let n = r.round();
    if (r - n).abs() <= 1e-9 * n.max(1.0) {
        n as u64
    } else {
        r.ceil() as u64
    }
}

/// `min(1000, 1% of the steps)`.
pub fn default_burn_in(steps: u64) -> u64 {
    (steps / 100).min(1000)
}

/// Raw per-replicate output of [`time_average`].
#[derive(Debug, Clone)]
pub struct TimeAverageRun<A> {
    pub replicates: Vec<A>,
    pub counters: Counters,
    pub unstable: bool,
    pub steps: u64,
    pub burn_in: u64,
    /// `n · h`.
    pub t_actual: f64,
    /// `h ⟨w⟩`; equals `h` for unweighted methods.
    pub effective_h: f64,
}

/// Summary of a scalar observable.
#[derive(Debug, Clone)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    /// False when fewer than two replicates were available; `stderr` is then 0.
    pub stderr_defined: bool,
    pub unstable: bool,
    pub effective_h: f64,
    pub counters: Counters,
    pub steps: u64,
    pub t_actual: f64,
}

fn validate<S: Sde + ?Sized>(sde: &S, cfg: &RunConfig) -> Result<(u64, u64)> {
    if cfg.x0.len() != sde.dim() {
        return Err(Error::DimensionMismatch {
            expected: sde.dim(),
            got: cfg.x0.len(),
        });
    }
    if !(cfg.t_final > 0.0 && cfg.t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time T={} must be positive", cfg.t_final)));
    }
    if cfg.replicates == 0 {
        return Err(Error::InvalidArgument("at least one replicate is required".into()));
    }
    Integrator::new(cfg.method, sde, cfg.h)?;
    let steps = step_count(cfg.t_final, cfg.h);
    let burn_in = cfg.burn_in.unwrap_or_else(|| default_burn_in(steps));
    if burn_in >= steps {
        return Err(Error::InvalidArgument(format!("burn-in of {burn_in} steps leaves no samples out of {steps}")));
    }
    Ok((steps, burn_in))
}

/// Long-run averages along `cfg.replicates` independent trajectories, each
/// run for `⌈T/h⌉` steps and started from `x0`. Replicate `r` draws from
/// trajectory stream `r`.
pub fn time_average<S, A, M>(sde: &S, cfg: &RunConfig, exec: &Executor, make: M) -> Result<TimeAverageRun<A>>
where
    S: Sde + ?Sized,
    A: Accumulator,
    M: Fn() -> A + Sync + Send,
{
    let (steps, burn_in) = validate(sde, cfg)?;
    let per_rep = exec.map_collect(cfg.replicates, |r| {
        let mut it = Integrator::new(cfg.method, sde, cfg.h).expect("validated");
        let mut st = it.init(&cfg.x0, StreamKey::new(cfg.seed, r as u64, 0));
        let mut acc = make();
        let mut sum_w = 0.0;
        let mut unstable = false;
        for n in 0..steps {
            it.step(&mut st);
            if n >= burn_in {
                acc.add(&st.xbar, st.weight);
                sum_w += st.weight;
            }
            if n % DIVERGENCE_CHECK_INTERVAL == DIVERGENCE_CHECK_INTERVAL - 1 && !st.is_finite() {
                unstable = true;
                break;
            }
        }
        unstable |= !st.is_finite() || !sum_w.is_finite();
        (acc, st.counters, sum_w, unstable)
    });
    let mut counters = Counters::default();
    let mut unstable = false;
    let mut sum_w = 0.0;
    let mut replicates = Vec::with_capacity(per_rep.len());
    for (acc, c, w, u) in per_rep {
        counters.merge(&c);
        unstable |= u;
        sum_w += w;
        replicates.push(acc);
    }
    let samples = (steps - burn_in) as f64 * cfg.replicates as f64;
    Ok(TimeAverageRun {
        replicates,
        counters,
        unstable,
        steps,
        burn_in,
        t_actual: steps as f64 * cfg.h,
        effective_h: cfg.h * sum_w / samples,
    })
}

/// Time average of `φ(X̄_n)` after burn-in (reweighted for LMt); the
/// standard error is taken across replicates.
pub fn time_average_observable<S: Sde + ?Sized>(
    sde: &S,
    cfg: &RunConfig,
    phi: fn(&[f64]) -> f64,
    exec: &Executor,
) -> Result<Estimate> {
    let run = time_average(sde, cfg, exec, || WeightedMoments::new(phi))?;
    let mut pooled = WeightedMoments::new(phi);
    for r in &run.replicates {
        pooled.merge(r);
    }
    let means: Vec<f64> = run.replicates.iter().map(WeightedMoments::mean).collect();
    let (stderr, defined) = standard_error(&means);
    Ok(Estimate {
        mean: pooled.mean(),
        stderr,
        stderr_defined: defined,
        unstable: run.unstable || !pooled.mean().is_finite(),
        effective_h: run.effective_h,
        counters: run.counters,
        steps: run.steps,
        t_actual: run.t_actual,
    })
}

/// Final samples of an ensemble run.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub dim: usize,
    /// Row-major `n_traj × d`; rows of diverged trajectories are NaN.
    pub samples: Vec<f64>,
    pub counters: Counters,
    pub unstable: bool,
    pub steps: u64,
    pub t_actual: f64,
}

impl EnsembleRun {
    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.samples.chunks_exact(self.dim)
    }
}

/// Runs `cfg.replicates` independent trajectories to `⌈T/h⌉` steps and
/// returns their final states (post-processed for the PVD-2 family).
/// Trajectory `i` draws from stream `i`.
pub fn ensemble<S: Sde + ?Sized>(sde: &S, cfg: &RunConfig, exec: &Executor) -> Result<EnsembleRun> {
    if cfg.method == MethodKind::Lmt {
        return Err(Error::Unsupported(
            "lmt runs in rescaled time and has no fixed final time; use time-average mode".into(),
        ));
    }
    let (steps, _) = validate(sde, &RunConfig { burn_in: Some(0), ..cfg.clone() })?;
    let (n, d) = (cfg.replicates, sde.dim());
    let blocks = n.div_ceil(ENSEMBLE_BLOCK);
    let per_block = exec.map_collect(blocks, |b| {
        let mut it = Integrator::new(cfg.method, sde, cfg.h).expect("validated");
        let mut counters = Counters::default();
        let mut samples = Vec::with_capacity(ENSEMBLE_BLOCK * d);
        let mut unstable = false;
        for traj in b * ENSEMBLE_BLOCK..((b + 1) * ENSEMBLE_BLOCK).min(n) {
            let mut st = it.init(&cfg.x0, StreamKey::new(cfg.seed, traj as u64, 0));
            for k in 0..steps {
                it.step(&mut st);
                if k % DIVERGENCE_CHECK_INTERVAL == DIVERGENCE_CHECK_INTERVAL - 1 && !st.is_finite() {
                    break;
                }
            }
            let y = if st.is_finite() { it.final_sample(&st) } else { vec![f64::NAN; d] };
            unstable |= y.iter().any(|v| !v.is_finite());
            samples.extend_from_slice(&y);
            counters.merge(&st.counters);
        }
        (samples, counters, unstable)
    });
    let mut samples = Vec::with_capacity(n * d);
    let mut counters = Counters::default();
    let mut unstable = false;
    for (s, c, u) in per_block {
        samples.extend(s);
        counters.merge(&c);
        unstable |= u;
    }
    Ok(EnsembleRun {
        dim: d,
        samples,
        counters,
        unstable,
        steps,
        t_actual: steps as f64 * cfg.h,
    })
}

/// Mean over `cfg.replicates` trajectories of `φ` at the final time
/// (post-processed for the PVD-2 family).
pub fn ensemble_observable<S: Sde + ?Sized>(
    sde: &S,
    cfg: &RunConfig,
    phi: fn(&[f64]) -> f64,
    exec: &Executor,
) -> Result<Estimate> {
    let run = ensemble(sde, cfg, exec)?;
    let values: Vec<f64> = run.iter().map(phi).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let (stderr, defined) = standard_error(&values);
    Ok(Estimate {
        mean,
        stderr,
        stderr_defined: defined,
        unstable: run.unstable || !mean.is_finite(),
        effective_h: cfg.h,
        counters: run.counters,
        steps: run.steps,
        t_actual: run.t_actual,
    })
}

/// Sample standard deviation over `√n`; `(0, false)` when `n < 2`.
pub fn standard_error(values: &[f64]) -> (f64, bool) {
    let n = values.len();
    if n < 2 {
        return (0.0, false);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    ((var / n as f64).sqrt(), true)
}
