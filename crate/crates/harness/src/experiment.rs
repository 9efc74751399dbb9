use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vardiff::estimators::{
    ensemble, standard_error, time_average, ConvergenceRecord, Histogram, ReferenceOracle, RunConfig,
};
use vardiff::exec::Executor;
use vardiff::integrators::{Counters, MethodKind};
use vardiff::quadrature::Quad;
use vardiff::{ProblemSpec, Sde};

use crate::config::{ExperimentConfig, Mode, Observable};
use crate::error::{HarnessError, Result};

/// Column order of the convergence CSV.
pub const CSV_HEADER: [&str; 10] = [
    "method",
    "h",
    "effective_h",
    "error",
    "stderr",
    "n_force",
    "n_sigma",
    "seed",
    "T",
    "n_traj",
];

/// Written in place of `error` and `stderr` for diverged runs.
pub const UNSTABLE: &str = "unstable";

/// Ensemble histograms are split into this many groups for the standard error.
pub const L1_GROUPS: usize = 10;

/// Reference value(s) of the configured observable.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    SquareNorm(Quad),
    /// Masses of the 30 bins on `[−5, 5]`.
    Bins(Vec<f64>),
}

impl Reference {
    pub fn compute(problem: &ProblemSpec, observable: Observable) -> Result<Self> {
        let oracle = ReferenceOracle::new(problem.potential(), problem.sigma(), problem.dim())?;
        Ok(match observable {
            Observable::SquareNorm => Reference::SquareNorm(oracle.square_norm()?),
            Observable::L1Bins => {
                let h = Histogram::standard();
                Reference::Bins(oracle.bin_masses(h.lo(), h.hi(), h.len())?)
            }
        })
    }
}

/// Bookkeeping for one `(method, h)` run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub method: String,
    pub h: f64,
    pub steps: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    pub t_actual: f64,
    pub unstable: bool,
    pub warmup_force: u64,
    pub n_sigma_postprocess: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct MetaFile<'a> {
    name: &'a str,
    mode: &'a str,
    observable: &'a str,
    potential: &'a str,
    diffusion: &'a str,
    d: usize,
    sigma: f64,
    #[serde(rename = "T")]
    t_final: f64,
    n_traj: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_error: Option<f64>,
    runs: &'a [RunMeta],
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ConvergenceRecord>,
    pub runs: Vec<RunMeta>,
    pub reference: Reference,
}

fn observed_error(reference: &Reference, mean: f64) -> f64 {
    match reference {
        Reference::SquareNorm(q) => (mean - q.value).abs(),
        Reference::Bins(_) => unreachable!("histograms are scored separately"),
    }
}

fn square_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

struct Outcome {
    error: f64,
    stderr: f64,
    effective_h: f64,
    counters: Counters,
    unstable: bool,
    steps: u64,
    burn_in: Option<u64>,
    t_actual: f64,
}

fn run_one(cfg: &ExperimentConfig, reference: &Reference, method: MethodKind, h: f64, exec: &Executor) -> Result<Outcome> {
    let run_cfg = RunConfig {
        method,
        h,
        t_final: cfg.mode.t_final(),
        burn_in: match cfg.mode {
            Mode::TimeAverage { burn_in, .. } => burn_in,
            Mode::Ensemble { .. } => None,
        },
        replicates: cfg.mode.n_traj(),
        seed: cfg.seed,
        x0: cfg.x0.clone(),
    };
    let p = &cfg.problem;
    match (&cfg.mode, reference) {
        (Mode::TimeAverage { .. }, Reference::SquareNorm(_)) => {
            let e = vardiff::estimators::time_average_observable(p, &run_cfg, square_norm, exec)?;
            Ok(Outcome {
                error: observed_error(reference, e.mean),
                stderr: e.stderr,
                effective_h: e.effective_h,
                counters: e.counters,
                unstable: e.unstable,
                steps: e.steps,
                burn_in: Some(run_cfg.burn_in.unwrap_or_else(|| vardiff::estimators::default_burn_in(e.steps))),
                t_actual: e.t_actual,
            })
        }
        (Mode::TimeAverage { .. }, Reference::Bins(masses)) => {
            let run = time_average(p, &run_cfg, exec, Histogram::standard)?;
            let mut pooled = Histogram::standard();
            let mut per_rep = Vec::with_capacity(run.replicates.len());
            for r in &run.replicates {
                pooled.merge(r);
                per_rep.push(r.l1_error(masses).unwrap_or(f64::NAN));
            }
            let error = pooled.l1_error(masses).unwrap_or(f64::NAN);
            Ok(Outcome {
                error,
                stderr: standard_error(&per_rep).0,
                effective_h: run.effective_h,
                counters: run.counters,
                unstable: run.unstable || !error.is_finite(),
                steps: run.steps,
                burn_in: Some(run.burn_in),
                t_actual: run.t_actual,
            })
        }
        (Mode::Ensemble { .. }, Reference::SquareNorm(_)) => {
            let e = vardiff::estimators::ensemble_observable(p, &run_cfg, square_norm, exec)?;
            Ok(Outcome {
                error: observed_error(reference, e.mean),
                stderr: e.stderr,
                effective_h: e.effective_h,
                counters: e.counters,
                unstable: e.unstable,
                steps: e.steps,
                burn_in: None,
                t_actual: e.t_actual,
            })
        }
        (Mode::Ensemble { .. }, Reference::Bins(masses)) => {
            let run = ensemble(p, &run_cfg, exec)?;
            let n = run.len();
            let groups = L1_GROUPS.min(n);
            let mut pooled = Histogram::standard();
            let mut per_group = Vec::with_capacity(groups);
            for g in 0..groups {
                let mut hg = Histogram::standard();
                for i in g * n / groups..(g + 1) * n / groups {
                    hg.add(run.sample(i)[0], 1.0);
                }
                per_group.push(hg.l1_error(masses).unwrap_or(f64::NAN));
                pooled.merge(&hg);
            }
            let error = pooled.l1_error(masses).unwrap_or(f64::NAN);
            Ok(Outcome {
                error,
                stderr: standard_error(&per_group).0,
                effective_h: h,
                counters: run.counters,
                unstable: run.unstable || !error.is_finite(),
                steps: run.steps,
                burn_in: None,
                t_actual: run.t_actual,
            })
        }
    }
}

/// Runs every `(method, h)` pair of `cfg` in order (methods outer, step
/// sizes in the configured order) and scores it against the reference.
/// Diverged runs are kept as records with `error = None`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: &Executor) -> Result<ExperimentOutput> {
    let reference = Reference::compute(&cfg.problem, cfg.observable)?;
    let d = cfg.dim();
    let mut records = Vec::new();
    let mut runs = Vec::new();
    for &method in &cfg.methods {
        for &h in &cfg.h_list {
            log::info!("{}: {method} h={h}", cfg.name);
            let o = run_one(cfg, &reference, method, h, exec)?;
            if o.unstable {
                log::warn!("{}: {method} h={h} diverged", cfg.name);
            }
            records.push(ConvergenceRecord {
                method: method.to_string(),
                h,
                effective_h: o.effective_h,
                error: (!o.unstable).then_some(o.error),
                stderr: if o.unstable { f64::NAN } else { o.stderr },
                n_force: o.counters.force,
                n_sigma: o.counters.n_sigma(d),
                seed: cfg.seed,
                t_final: o.t_actual,
                n_traj: cfg.mode.n_traj() as u64,
            });
            runs.push(RunMeta {
                method: method.to_string(),
                h,
                steps: o.steps,
                burn_in: o.burn_in,
                t_actual: o.t_actual,
                unstable: o.unstable,
                warmup_force: o.counters.warmup_force,
                n_sigma_postprocess: o.counters.n_sigma_postprocess(d),
            });
        }
    }
    Ok(ExperimentOutput {
        records,
        runs,
        reference,
    })
}

/// `<out>.meta`
pub fn meta_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes the records as CSV and the run metadata next to it as TOML.
pub fn write_outputs(cfg: &ExperimentConfig, output: &ExperimentOutput, out: &Path) -> Result<()> {
    write_records(out, &output.records)?;
    let (reference, reference_error) = match &output.reference {
        Reference::SquareNorm(q) => (Some(q.value), Some(q.error)),
        Reference::Bins(_) => (None, None),
    };
    let meta = MetaFile {
        name: &cfg.name,
        mode: cfg.mode.name(),
        observable: cfg.observable.name(),
        potential: cfg.problem.potential().name(),
        diffusion: cfg.problem.diffusion().name(),
        d: cfg.dim(),
        sigma: cfg.problem.sigma(),
        t_final: cfg.mode.t_final(),
        n_traj: cfg.mode.n_traj(),
        seed: cfg.seed,
        reference,
        reference_error,
        runs: &output.runs,
    };
    let text = toml::to_string(&meta).map_err(|e| HarnessError::usage(e.to_string()))?;
    let path = meta_path(out);
    std::fs::write(&path, text).map_err(|e| HarnessError::io(path, e))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_records(path: &Path, records: &[ConvergenceRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(CSV_HEADER).map_err(csv_err(path))?;
    for r in records {
        let (error, stderr) = match r.error {
            Some(e) => (e.to_string(), r.stderr.to_string()),
            None => (UNSTABLE.to_string(), UNSTABLE.to_string()),
        };
        w.write_record([
            r.method.clone(),
            r.h.to_string(),
            r.effective_h.to_string(),
            error,
            stderr,
            r.n_force.to_string(),
            r.n_sigma.to_string(),
            r.seed.to_string(),
            r.t_final.to_string(),
            r.n_traj.to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

pub fn read_records(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let header = rdr.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(HarnessError::Parse {
            path: path.to_path_buf(),
            row: 1,
            msg: format!("expected header {}", CSV_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 2;
        let row = row.map_err(csv_err(path))?;
        let bad = |col: &str, v: &str| HarnessError::Parse {
            path: path.to_path_buf(),
            row: row_no,
            msg: format!("cannot parse {col}={v:?}"),
        };
        let real = |j: usize| -> Result<f64> { row[j].parse::<f64>().map_err(|_| bad(CSV_HEADER[j], &row[j])) };
        let int = |j: usize| -> Result<u64> { row[j].parse::<u64>().map_err(|_| bad(CSV_HEADER[j], &row[j])) };
        let (error, stderr) = if &row[3] == UNSTABLE {
            (None, f64::NAN)
        } else {
            (Some(real(3)?), real(4)?)
        };
        out.push(ConvergenceRecord {
            method: row[0].to_string(),
            h: real(1)?,
            effective_h: real(2)?,
            error,
            stderr,
            n_force: int(5)?,
            n_sigma: int(6)?,
            seed: int(7)?,
            t_final: real(8)?,
            n_traj: int(9)?,
        });
    }
    if out.is_empty() {
        return Err(HarnessError::Parse {
            path: path.to_path_buf(),
            row: 1,
            msg: "no records".into(),
        });
    }
    Ok(out)
}

/// Prints the reference value(s) of the configured observable.
pub fn run_reference(problem: &ProblemSpec, observable: Observable, w: &mut impl Write) -> Result<Reference> {
    let r = Reference::compute(problem, observable)?;
    let io = |e| HarnessError::io("<stdout>", e);
    match &r {
        Reference::SquareNorm(q) => {
            writeln!(w, "square_norm = {}", q.value).map_err(io)?;
            writeln!(w, "quadrature_error = {:e}", q.error).map_err(io)?;
        }
        Reference::Bins(m) => {
            let h = Histogram::standard();
            for (i, (edge, mass)) in h.edges().iter().zip(m).enumerate() {
                writeln!(w, "bin {i:2} [{:+.6}, {:+.6}) = {mass}", edge, edge + h.bin_width()).map_err(io)?;
            }
            writeln!(w, "total = {}", m.iter().sum::<f64>()).map_err(io)?;
        }
    }
    Ok(r)
}

/// Samples `V` and `Σ` of a one-dimensional problem on `n` points of `[lo, hi]`
/// and writes `x,V,Sigma` rows.
pub fn write_problem_grid(problem: &ProblemSpec, lo: f64, hi: f64, n: usize, path: &Path) -> Result<()> {
    if problem.dim() != 1 {
        return Err(HarnessError::usage(format!(
            "problem panels are one-dimensional, got d = {}",
            problem.dim()
        )));
    }
    if n < 2 || !(lo < hi) {
        return Err(HarnessError::usage("grid needs at least 2 points and lo < hi"));
    }
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["x", "V", "Sigma"]).map_err(csv_err(path))?;
    for x in vardiff::stability::linspace(lo, hi, n) {
        let s = problem.sigma_eval(&[x])?.entry(0, 0);
        let v = problem.potential().value(&[x]);
        w.write_record([x.to_string(), v.to_string(), s.to_string()])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

/// Writes `p,q2,rho,stable,exact_stable` rows for a stability scan.
pub fn write_region(path: &Path, cells: &[vardiff::stability::RegionCell]) -> Result<()> {
    let file = File::create(path).map_err(|e| HarnessError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(["p", "q2", "rho", "stable", "exact_stable"])
        .map_err(csv_err(path))?;
    for c in cells {
        w.write_record([
            c.p.to_string(),
            c.q2.to_string(),
            c.rho.to_string(),
            u8::from(c.stable).to_string(),
            u8::from(c.exact_stable).to_string(),
        ])
        .map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(method: &str, h: f64, error: Option<f64>) -> ConvergenceRecord {
        ConvergenceRecord {
            method: method.into(),
            h,
            effective_h: h,
            error,
            stderr: if error.is_some() { 1e-3 } else { f64::NAN },
            n_force: 10,
            n_sigma: 30,
            seed: 4,
            t_final: 1.5,
            n_traj: 8,
        }
    }

    #[test]
    fn csv_round_trip_with_sentinel() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let recs = vec![rec("em", 0.1, Some(0.0263157894736842)), rec("pvd2_mt2", 0.05, None)];
        write_records(&path, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("method,h,effective_h,error,stderr,n_force,n_sigma,seed,T,n_traj\n"));
        assert!(text.contains("pvd2_mt2,0.05,0.05,unstable,unstable,"));
        let back = read_records(&path).unwrap();
        assert_eq!(back[0], recs[0]);
        assert!(back[1].is_unstable());
    }

    #[test]
    fn malformed_csv_names_the_row() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(
            &path,
            "method,h,effective_h,error,stderr,n_force,n_sigma,seed,T,n_traj\nem,0.1,0.1,0.2,0.01,1,1,0,1,1\nem,x,0.1,0.2,0.01,1,1,0,1,1\n",
        )
        .unwrap();
        let e = read_records(&path).unwrap_err().to_string();
        assert!(e.contains("row 3"), "{e}");
    }

    #[test]
    fn meta_path_appends_suffix() {
        assert_eq!(meta_path(Path::new("out/a.csv")), PathBuf::from("out/a.csv.meta"));
    }
}
