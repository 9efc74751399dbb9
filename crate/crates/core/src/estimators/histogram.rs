use crate::error::{Error, Result};

/// Weighted histogram on `[lo, hi)` with equal bins.
///
/// Samples outside the range still count towards the total, so the
/// frequencies of the bins are sub-normalized exactly like the true bin
/// masses of the target density.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    lo: f64,
    hi: f64,
    bins: Vec<f64>,
    total: f64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, m: usize) -> Self {
        assert!(hi > lo && m > 0, "histogram needs lo < hi and at least one bin");
        Histogram {
            lo,
            hi,
            bins: vec![0.0; m],
            total: 0.0,
        }
    }

    /// 30 bins on `[−5, 5]`.
    pub fn standard() -> Self {
        Histogram::new(-5.0, 5.0, 30)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0.0
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins.len() as f64
    }

    pub fn edges(&self) -> Vec<f64> {
        let w = self.bin_width();
        (0..=self.bins.len()).map(|i| self.lo + w * i as f64).collect()
    }

    pub fn counts(&self) -> &[f64] {
        &self.bins
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    #[inline]
    pub fn add(&mut self, x: f64, w: f64) {
        self.total += w;
        if x >= self.lo && x < self.hi {
            let m = self.bins.len();
            let i = (((x - self.lo) / (self.hi - self.lo)) * m as f64) as usize;
            self.bins[i.min(m - 1)] += w;
        }
    }

    pub fn merge(&mut self, other: &Histogram) {
        assert!(
            self.lo == other.lo && self.hi == other.hi && self.bins.len() == other.bins.len(),
            "merging histograms on different grids"
        );
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        self.total += other.total;
    }

    /// `ω̂ᵢ = countᵢ / total`.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if !(self.total > 0.0) {
            return Err(Error::InsufficientData("histogram holds no samples".into()));
        }
        Ok(self.bins.iter().map(|c| c / self.total).collect())
    }

    pub fn l1_error(&self, masses: &[f64]) -> Result<f64> {
        if masses.len() != self.bins.len() {
            return Err(Error::DimensionMismatch {
                expected: self.bins.len(),
                got: masses.len(),
            });
        }
        let f = self.frequencies()?;
        Ok(f.iter().zip(masses).map(|(a, b)| (a - b).abs()).sum::<f64>() / f.len() as f64)
    }
}
