use crate::error::{Error, Result};
use crate::model::{quadruple_well_1d, Potential};
use crate::quadrature::{adaptive_simpson, truncated_support, Quad};

const REL_TOL: f64 = 1e-10;
const CUTOFF: f64 = 1e-16;
const SEARCH: (f64, f64, usize) = (-60.0, 60.0, 24_001);

/// Reference values of the invariant law `ρ∞ ∝ exp(−(2/σ²) V)`.
///
/// Built from the potential and `σ` only: the diffusion field never enters.
#[derive(Debug, Clone)]
pub struct ReferenceOracle {
    potential: Potential,
    sigma: f64,
    dim: usize,
    shape: Shape,
}

#[derive(Debug, Clone)]
enum Shape {
    /// Product of identical one-dimensional marginals `exp(−β v(x) + c)`.
    Separable { support: (f64, f64), shift: f64, z: Quad },
    /// Radial potential `k(1 − r)²/2`.
    Radial { k: f64 },
}

impl ReferenceOracle {
    pub fn new(potential: &Potential, sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidProblem(format!("reference values need σ > 0, got {sigma}")));
        }
        if dim == 0 {
            return Err(Error::InvalidProblem("dimension must be at least 1".into()));
        }
        let shape = match potential {
            Potential::Ring { k } => Shape::Radial { k: *k },
            Potential::DoubleWell if dim != 1 => {
                return Err(Error::InvalidProblem("double_well is one-dimensional".into()));
            }
            Potential::QuadrupleWell if dim != 2 => {
                return Err(Error::InvalidProblem("quadruple_well is two-dimensional".into()));
            }
            _ => {
                let beta = 2.0 / (sigma * sigma);
                let v = marginal_potential(potential);
                let (lo, hi, n) = SEARCH;
                let dx = (hi - lo) / (n - 1) as f64;
                let vmin = (0..n).map(|i| v(lo + dx * i as f64)).fold(f64::INFINITY, f64::min);
                let shift = beta * vmin;
                let rho = |x: f64| (-beta * v(x) + shift).exp();
                let support = truncated_support(rho, lo, hi, n, CUTOFF)?;
                let z = adaptive_simpson(rho, support.0, support.1, REL_TOL);
                Shape::Separable { support, shift, z }
            }
        };
        Ok(ReferenceOracle {
            potential: potential.clone(),
            sigma,
            dim,
            shape,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn beta(&self) -> f64 {
        2.0 / (self.sigma * self.sigma)
    }

    /// Normalized density of one coordinate (separable potentials only).
    pub fn marginal_density(&self, x: f64) -> Result<f64> {
        match &self.shape {
            Shape::Separable { shift, z, .. } => {
                let v = marginal_potential(&self.potential);
                Ok((-self.beta() * v(x) + shift).exp() / z.value)
            }
            Shape::Radial { .. } => Err(Error::Unsupported("ring potential has no separable marginal".into())),
        }
    }

    /// Masses of `ρ∞` on the `m` equal bins of `[lo, hi)` (d = 1).
    pub fn bin_masses(&self, lo: f64, hi: f64, m: usize) -> Result<Vec<f64>> {
        let Shape::Separable { support, shift, z } = &self.shape else {
            return Err(Error::Unsupported("bin masses need a separable potential".into()));
        };
        if self.dim != 1 {
            return Err(Error::Unsupported(format!("bin masses need d = 1, got d = {}", self.dim)));
        }
        let beta = self.beta();
        let v = marginal_potential(&self.potential);
        let rho = |x: f64| (-beta * v(x) + shift).exp();
        let w = (hi - lo) / m as f64;
        Ok((0..m)
            .map(|i| {
                let a = (lo + w * i as f64).max(support.0);
                let b = (lo + w * (i + 1) as f64).min(support.1);
                if a >= b {
                    0.0
                } else {
                    adaptive_simpson(rho, a, b, REL_TOL).value / z.value
                }
            })
            .collect())
    }

    /// `E[|x|²]` under `ρ∞`.
    pub fn square_norm(&self) -> Result<Quad> {
        match &self.shape {
            Shape::Separable { support, shift, z } => {
                let beta = self.beta();
                let v = marginal_potential(&self.potential);
                let m2 = adaptive_simpson(|x| x * x * (-beta * v(x) + shift).exp(), support.0, support.1, REL_TOL);
                let d = self.dim as f64;
                let value = d * m2.value / z.value;
                let rel = m2.error / m2.value.abs() + z.error / z.value.abs();
                Ok(Quad {
                    value,
                    error: value.abs() * rel,
                })
            }
            Shape::Radial { k } => {
                let d = self.dim as f64;
                let num = radial_integral(d + 1.0, *k, self.beta())?;
                let den = radial_integral(d - 1.0, *k, self.beta())?;
                let value = (num.0 - den.0).exp() * num.1.value / den.1.value;
                let rel = num.1.error / num.1.value + den.1.error / den.1.value;
                Ok(Quad {
                    value,
                    error: value * rel,
                })
            }
        }
    }

    /// `|h Σ ρ(xᵢ)/Z − 1|` by the trapezoid rule on a uniform grid of `n`
    /// points over the truncated support: an independent check of `Z`.
    pub fn normalization_residual(&self, n: usize) -> Result<f64> {
        let Shape::Separable { support, shift, z } = &self.shape else {
            return Err(Error::Unsupported("normalization check needs a separable potential".into()));
        };
        let beta = self.beta();
        let v = marginal_potential(&self.potential);
        let dx = (support.1 - support.0) / (n - 1) as f64;
        let mut s = 0.0;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            s += w * (-beta * v(support.0 + dx * i as f64) + shift).exp();
        }
        Ok((s * dx / z.value - 1.0).abs())
    }
}

fn marginal_potential(p: &Potential) -> fn(f64) -> f64 {
    match p {
        Potential::Quadratic => |x| 0.5 * x * x,
        Potential::Quartic => |x| 0.25 * x.powi(4),
        Potential::DoubleWell => |x| 0.5 * x * x + (1.0 + 3.0 * x).sin(),
        Potential::QuadrupleWell => quadruple_well_1d,
        Potential::Ring { .. } => unreachable!("ring potential is not separable"),
    }
}

/// `∫₀^∞ rʲ exp(−β k (1 − r)²/2) dr` as `(log scale, integral of the
/// rescaled integrand)`.
fn radial_integral(j: f64, k: f64, beta: f64) -> Result<(f64, Quad)> {
    let log_f = |r: f64| {
        if r <= 0.0 {
            if j == 0.0 {
                -0.5 * beta * k
            } else {
                f64::NEG_INFINITY
            }
        } else {
            j * r.ln() - 0.5 * beta * k * (1.0 - r) * (1.0 - r)
        }
    };
    let hi = 4.0 + j.max(1.0).sqrt() * 4.0 + 40.0 / (beta * k).sqrt();
    let n = 40_001;
    let dr = hi / (n - 1) as f64;
    let lmax = (0..n).map(|i| log_f(dr * i as f64)).fold(f64::NEG_INFINITY, f64::max);
    let f = |r: f64| (log_f(r) - lmax).exp();
    let (a, b) = truncated_support(f, 0.0, hi, n, CUTOFF)?;
    Ok((lmax, adaptive_simpson(f, a, b, REL_TOL)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // erf via its Taylor series; adequate for |x| ≤ 3.
    fn erf(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn quadratic_values() {
        let o = ReferenceOracle::new(&Potential::Quadratic, 1.0, 1).unwrap();
        assert_relative_eq!(o.square_norm().unwrap().value, 0.5, max_relative = 1e-10);
        let m = o.bin_masses(-5.0, 5.0, 30).unwrap();
        assert_relative_eq!(m[15], erf(1.0 / 3.0) / 2.0, max_relative = 1e-9);
        let central = o.bin_masses(-1.0 / 6.0, 1.0 / 6.0, 1).unwrap()[0];
        assert_relative_eq!(central, erf(1.0 / 6.0), max_relative = 1e-9);
        assert_relative_eq!(central, 0.1872, max_relative = 1e-2);
        assert_relative_eq!(m.iter().sum::<f64>(), 1.0 - 1.537_459_794_428e-12, max_relative = 1e-9);
        assert!(o.normalization_residual(200_001).unwrap() < 1e-8);
    }

    #[test]
    fn separable_scaling_and_sigma() {
        let o = ReferenceOracle::new(&Potential::Quadratic, 0.7, 3).unwrap();
        assert_relative_eq!(o.square_norm().unwrap().value, 3.0 * 0.49 / 2.0, max_relative = 1e-10);
    }

    #[test]
    fn ring_tends_to_unit_radius() {
        let o = ReferenceOracle::new(&Potential::Ring { k: 50.0 }, 1.0, 10).unwrap();
        let v = o.square_norm().unwrap().value;
        assert!(v > 1.1 && v < 1.3, "{v}");
        let stiff = ReferenceOracle::new(&Potential::Ring { k: 1e6 }, 1.0, 10).unwrap();
        assert_relative_eq!(stiff.square_norm().unwrap().value, 1.0, max_relative = 1e-3);
    }

    #[test]
    fn ring_in_one_dimension_matches_direct_quadrature() {
        let o = ReferenceOracle::new(&Potential::Ring { k: 3.0 }, 1.0, 1).unwrap();
        let rho = |x: f64| (-3.0 * (1.0 - x.abs()).powi(2)).exp();
        let z = adaptive_simpson(rho, -12.0, 12.0, 1e-12).value;
        let m2 = adaptive_simpson(|x| x * x * rho(x), -12.0, 12.0, 1e-12).value;
        assert_relative_eq!(o.square_norm().unwrap().value, m2 / z, max_relative = 1e-8);
    }

    #[test]
    fn bins_need_one_dimension() {
        let o = ReferenceOracle::new(&Potential::QuadrupleWell, 1.0, 2).unwrap();
        assert!(o.bin_masses(-5.0, 5.0, 30).is_err());
        assert!(ReferenceOracle::new(&Potential::QuadrupleWell, 1.0, 3).is_err());
    }
}
