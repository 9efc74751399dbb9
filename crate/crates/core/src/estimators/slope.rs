use crate::error::{Error, Result};

/// One `(method, h)` row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub method: String,
    pub h: f64,
    pub effective_h: f64,
    /// `None` when the run diverged.
    pub error: Option<f64>,
    pub stderr: f64,
    pub n_force: u64,
    pub n_sigma: u64,
    pub seed: u64,
    pub t_final: f64,
    pub n_traj: u64,
}

impl ConvergenceRecord {
    pub fn is_unstable(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Number of records that entered the fit.
    pub used: usize,
}

/// Least-squares slope of `log(error)` against `log(h)`.
///
/// Only stable records with `error > stderr` are used, and at least three
/// distinct step sizes are required. The weight of a point is the inverse
/// variance of `log(error)`, `(error/stderr)²`; the fit is unweighted if any
/// used record has a zero standard error.
pub fn fit_slope(records: &[ConvergenceRecord]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64, f64)> = records
        .iter()
        .filter_map(|r| match r.error {
            Some(e) if e > r.stderr && e > 0.0 && r.h > 0.0 => Some((r.h, e, r.stderr)),
            _ => None,
        })
        .collect();
    let mut hs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    if hs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 distinct step sizes with error > stderr, got {}",
            hs.len()
        )));
    }
    let weighted = pts.iter().all(|p| p.2 > 0.0);
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(h, e, s) in &pts {
        let w = if weighted { (e / s).powi(2) } else { 1.0 };
        let (x, y) = (h.ln(), e.ln());
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    let slope = (sw * sxy - sx * sy) / det;
    Ok(SlopeFit {
        slope,
        intercept: (sy - slope * sx) / sw,
        used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rec(h: f64, e: f64, s: f64) -> ConvergenceRecord {
        ConvergenceRecord {
            method: "m".into(),
            h,
            effective_h: h,
            error: Some(e),
            stderr: s,
            n_force: 0,
            n_sigma: 0,
            seed: 0,
            t_final: 1.0,
            n_traj: 1,
        }
    }

    #[test]
    fn exact_power_laws() {
        let hs = [0.32, 0.16, 0.08, 0.04];
        let sq: Vec<_> = hs.iter().map(|&h| rec(h, h * h, 0.0)).collect();
        assert_abs_diff_eq!(fit_slope(&sq).unwrap().slope, 2.0, epsilon = 1e-12);
        let lin: Vec<_> = hs.iter().map(|&h| rec(h, h, 1e-3 * h)).collect();
        assert_abs_diff_eq!(fit_slope(&lin).unwrap().slope, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn noisy_quadratic() {
        let noise = [0.01, -0.01, 0.007, -0.004, 0.0];
        let recs: Vec<_> = [0.2, 0.1, 0.05, 0.025, 0.0125]
            .iter()
            .zip(noise)
            .map(|(&h, n)| rec(h, 3.0 * h * h * (1.0 + n), 0.01 * 3.0 * h * h))
            .collect();
        assert_abs_diff_eq!(fit_slope(&recs).unwrap().slope, 2.0, epsilon = 0.05);
    }

    #[test]
    fn unresolved_and_unstable_points_are_dropped() {
        let mut recs = vec![rec(0.4, 1.0, 0.1), rec(0.2, 0.25, 0.1), rec(0.1, 0.01, 0.1)];
        assert!(fit_slope(&recs).is_err());
        recs.push(rec(0.05, 1e-3, 1e-4));
        let mut bad = rec(0.8, 0.0, 0.0);
        bad.error = None;
        recs.push(bad);
        assert_eq!(fit_slope(&recs).unwrap().used, 3);
    }
}
