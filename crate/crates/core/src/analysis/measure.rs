//! Empirical measures Pₙ and the exact expectation P against a known density.

use rayon::prelude::*;

use super::quadrature::{pairwise_mean, QuadratureSpec};
use crate::error::{invalid, Result};
use crate::points::PointSet;
use crate::targets::TargetDensity;

/// A sample X₁,…,Xₙ together with the seed that produced it, if any.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    sample: PointSet,
    seed: Option<u64>,
}

impl EmpiricalMeasure {
    pub fn new(sample: PointSet) -> Result<Self> {
        if sample.is_empty() {
            return Err(invalid("sample", "empirical measure needs n ≥ 1 points"));
        }
        if !sample.all_finite() {
            return Err(invalid("sample", "points must be finite"));
        }
        Ok(Self { sample, seed: None })
    }

    /// n i.i.d. draws from `f0`.
    pub fn draw(f0: &TargetDensity, n: usize, seed: u64) -> Result<Self> {
        let mut m = Self::new(f0.sample(n, seed))?;
        m.seed = Some(seed);
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.sample.len()
    }

    pub fn dim(&self) -> usize {
        self.sample.dim()
    }

    pub fn points(&self) -> &PointSet {
        &self.sample
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Pₙf = n⁻¹ Σ f(Xᵢ).
    pub fn mean<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values: Vec<f64> = (0..self.n())
            .into_par_iter()
            .map(|i| f(self.sample.get(i)))
            .collect();
        pairwise_mean(&values)
    }
}

/// Pₙf.
pub fn empirical_mean<F>(mu: &EmpiricalMeasure, f: F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    mu.mean(f)
}

/// Pf = ∫ f f₀ by quadrature.
pub fn expectation<F>(f0: &TargetDensity, f: F, quad: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    quad.integrate(f0.dim(), |x| f(x) * f0.eval(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_single_point() {
        let mu = EmpiricalMeasure::new(PointSet::from_scalars(&[0.3, -1.0, 2.0])).unwrap();
        assert_eq!(empirical_mean(&mu, |_| 2.5), 2.5);
        let one = EmpiricalMeasure::new(PointSet::from_scalars(&[0.7])).unwrap();
        assert_eq!(empirical_mean(&one, |x| x[0] * x[0]), 0.7 * 0.7);
        assert!(EmpiricalMeasure::new(PointSet::empty(1)).is_err());
        assert!(EmpiricalMeasure::new(PointSet::from_scalars(&[f64::NAN])).is_err());
    }

    #[test]
    fn half_line_indicator() {
        let n = 100_000;
        let mu = EmpiricalMeasure::draw(&TargetDensity::standard_gaussian(1), n, 5).unwrap();
        let v = empirical_mean(&mu, |x| if x[0] > 0.0 { 1.0 } else { 0.0 });
        assert!((v - 0.5).abs() <= 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn expectation_of_second_moment() {
        let f0 = TargetDensity::standard_gaussian(1);
        let v = expectation(&f0, |x| x[0] * x[0], &QuadratureSpec::symmetric(10.0, 1024)).unwrap();
        assert!((v - 1.0).abs() < 1e-10);
    }
}
