//! Flat TOML experiment configuration.
//!
//! ```toml
//! name = "quadratic_cosine"
//! potential = "quadratic"
//! diffusion = "cosine"
//! methods = ["em", "pvd2_w2ito1", "pvd2_mt2"]
//! h_list = [0.32, 0.16, 0.08, 0.04]
//! mode = "time_average"
//! T = 2e6
//! replicates = 8
//! observable = "square_norm"
//! seed = 1
//! out = "quadratic_cosine.csv"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use vardiff::integrators::MethodKind;
use vardiff::{Diffusion, Potential, ProblemSpec};

use crate::error::{HarnessError, Result};

/// Default number of replicates in time-average mode.
pub const DEFAULT_REPLICATES: usize = 8;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    potential: String,
    diffusion: String,
    d: Option<usize>,
    #[serde(default = "one")]
    sigma: f64,
    k: Option<f64>,
    #[serde(rename = "A")]
    amplitude: Option<f64>,
    eps: Option<f64>,
    inverted: Option<bool>,
    c: Option<f64>,
    sigma_matrix: Option<Vec<f64>>,
    methods: Vec<String>,
    h_list: Option<Vec<f64>>,
    h_grid: Option<String>,
    mode: String,
    #[serde(rename = "T")]
    t_final: f64,
    burn_in: Option<u64>,
    replicates: Option<usize>,
    n_traj: Option<usize>,
    observable: String,
    #[serde(default)]
    seed: u64,
    out: Option<PathBuf>,
    x0: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    /// `E|x|²`
    SquareNorm,
    /// L1 error of the 30 bin masses on `[−5, 5]` (d = 1).
    L1Bins,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Observable::SquareNorm => "square_norm",
            Observable::L1Bins => "l1_bins",
        }
    }
}

impl std::str::FromStr for Observable {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "square_norm" => Ok(Observable::SquareNorm),
            "l1_bins" => Ok(Observable::L1Bins),
            _ => Err(HarnessError::usage(format!(
                "unknown observable {s:?} (expected square_norm or l1_bins)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    TimeAverage {
        t_final: f64,
        burn_in: Option<u64>,
        replicates: usize,
    },
    Ensemble {
        t_final: f64,
        n_traj: usize,
    },
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::TimeAverage { .. } => "time_average",
            Mode::Ensemble { .. } => "ensemble",
        }
    }

    pub fn t_final(&self) -> f64 {
        match *self {
            Mode::TimeAverage { t_final, .. } | Mode::Ensemble { t_final, .. } => t_final,
        }
    }

    /// Replicates or trajectories.
    pub fn n_traj(&self) -> usize {
        match *self {
            Mode::TimeAverage { replicates, .. } => replicates,
            Mode::Ensemble { n_traj, .. } => n_traj,
        }
    }
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemSpec,
    pub methods: Vec<MethodKind>,
    /// Strictly decreasing.
    pub h_list: Vec<f64>,
    pub mode: Mode,
    pub observable: Observable,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub x0: Vec<f64>,
}

/// The geometric grid `10^{-2} · 10^{0.1 k}`, `k = 0..=k_max`, largest first.
pub fn paper_grid(k_max: u32) -> Vec<f64> {
    (0..=k_max).rev().map(|k| 10f64.powf(-2.0 + 0.1 * k as f64)).collect()
}

/// Named step-size grids.
pub fn named_grid(name: &str) -> Result<Vec<f64>> {
    match name {
        // From 10⁻² upwards until every method has gone unstable.
        "paper_1d" => Ok(paper_grid(25)),
        // {10⁻², 10⁻¹·⁹, …, 10⁰}
        "paper_2d" => Ok(paper_grid(20)),
        _ => Err(HarnessError::usage(format!(
            "unknown h_grid {name:?} (expected paper_1d or paper_2d)"
        ))),
    }
}

fn require(v: Option<f64>, key: &str, what: &str) -> Result<f64> {
    v.ok_or_else(|| HarnessError::usage(format!("{what} needs key {key:?}")))
}

fn problem_error(e: vardiff::Error) -> HarnessError {
    HarnessError::usage(e.to_string())
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| HarnessError::usage(e.to_string()))?;
        raw.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Usage(msg) => HarnessError::usage(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn dim(&self) -> usize {
        vardiff::Sde::dim(&self.problem)
    }
}

impl RawConfig {
    fn validate(self) -> Result<ExperimentConfig> {
        let potential = match self.potential.as_str() {
            "quadratic" => Potential::Quadratic,
            "quartic" => Potential::Quartic,
            "double_well" => Potential::DoubleWell,
            "quadruple_well" => Potential::QuadrupleWell,
            "ring" => Potential::Ring {
                k: require(self.k, "k", "ring potential")?,
            },
            other => return Err(HarnessError::usage(format!("unknown potential {other:?}"))),
        };
        let default_d = match potential {
            Potential::QuadrupleWell => 2,
            _ => 1,
        };
        let d = self.d.unwrap_or(default_d);
        let diffusion = match self.diffusion.as_str() {
            "identity" => Diffusion::Identity,
            "constant" => Diffusion::Constant {
                matrix: self
                    .sigma_matrix
                    .clone()
                    .ok_or_else(|| HarnessError::usage("constant diffusion needs key \"sigma_matrix\""))?,
            },
            "cosine" => Diffusion::Cosine1D,
            "sine" => Diffusion::Sine1D,
            "exp_potential" => Diffusion::ExpPotential1D {
                c: require(self.c, "c", "exp_potential diffusion")?,
            },
            "moro_cardin" => Diffusion::MoroCardin {
                amplitude: require(self.amplitude, "A", "moro_cardin diffusion")?,
                eps: require(self.eps, "eps", "moro_cardin diffusion")?,
                inverted: self.inverted.unwrap_or(false),
            },
            "radial_projection" => Diffusion::RadialProjection2D,
            "ring_radial" => Diffusion::RingRadial,
            other => return Err(HarnessError::usage(format!("unknown diffusion {other:?}"))),
        };
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(HarnessError::usage(format!("sigma={} must be > 0", self.sigma)));
        }
        let problem = ProblemSpec::new(d, self.sigma, potential, diffusion).map_err(problem_error)?;

        if self.methods.is_empty() {
            return Err(HarnessError::usage("methods is empty"));
        }
        let methods = self
            .methods
            .iter()
            .map(|m| m.parse::<MethodKind>().map_err(problem_error))
            .collect::<Result<Vec<_>>>()?;

        let h_list = match (self.h_list, self.h_grid) {
            (Some(_), Some(_)) => return Err(HarnessError::usage("give either h_list or h_grid, not both")),
            (None, None) => return Err(HarnessError::usage("missing h_list (or h_grid)")),
            (Some(h), None) => h,
            (None, Some(g)) => named_grid(&g)?,
        };
        if h_list.is_empty() {
            return Err(HarnessError::usage("h_list is empty"));
        }
        if h_list.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
            return Err(HarnessError::usage("every step size must be positive"));
        }
        if h_list.windows(2).any(|w| w[0] <= w[1]) {
            return Err(HarnessError::usage("h_list must be strictly decreasing"));
        }

        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(HarnessError::usage(format!("T={} must be positive", self.t_final)));
        }
        let mode = match self.mode.as_str() {
            "time_average" => {
                if self.n_traj.is_some() {
                    return Err(HarnessError::usage("n_traj applies to ensemble mode; use replicates"));
                }
                let replicates = self.replicates.unwrap_or(DEFAULT_REPLICATES);
                if replicates == 0 {
                    return Err(HarnessError::usage("replicates must be >= 1"));
                }
                Mode::TimeAverage {
                    t_final: self.t_final,
                    burn_in: self.burn_in,
                    replicates,
                }
            }
            "ensemble" => {
                if self.replicates.is_some() || self.burn_in.is_some() {
                    return Err(HarnessError::usage("replicates and burn_in apply to time_average mode"));
                }
                let n_traj = self
                    .n_traj
                    .ok_or_else(|| HarnessError::usage("ensemble mode needs key \"n_traj\""))?;
                if n_traj == 0 {
                    return Err(HarnessError::usage("n_traj must be >= 1"));
                }
                if methods.contains(&MethodKind::Lmt) {
                    return Err(HarnessError::usage("lmt runs in rescaled time and needs time_average mode"));
                }
                Mode::Ensemble {
                    t_final: self.t_final,
                    n_traj,
                }
            }
            other => {
                return Err(HarnessError::usage(format!(
                    "unknown mode {other:?} (expected time_average or ensemble)"
                )))
            }
        };

        let observable: Observable = self.observable.parse()?;
        if observable == Observable::L1Bins && d != 1 {
            return Err(HarnessError::usage(format!("l1_bins requires d = 1, got d = {d}")));
        }

        let x0 = match self.x0 {
            Some(x0) if x0.len() != d => {
                return Err(HarnessError::usage(format!("x0 has {} entries, expected {d}", x0.len())))
            }
            Some(x0) => x0,
            None => default_x0(problem.potential(), d),
        };

        Ok(ExperimentConfig {
            name: self.name,
            problem,
            methods,
            h_list,
            mode,
            observable,
            seed: self.seed,
            out: self.out,
            x0,
        })
    }
}

/// Origin, except on the ring where trajectories start at `e₁`.
pub fn default_x0(potential: &Potential, d: usize) -> Vec<f64> {
    let mut x0 = vec![0.0; d];
    if matches!(potential, Potential::Ring { .. }) {
        x0[0] = 1.0;
    }
    x0
}
