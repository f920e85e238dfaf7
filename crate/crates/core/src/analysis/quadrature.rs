//! Truncated tensor-grid and stratified Monte Carlo quadrature.
//!
//! Tensor grids use composite 8-point Gauss–Legendre panels on each axis;
//! `points` is rounded up to a multiple of 8. Monte Carlo uses jittered
//! stratification with `ceil(points^(1/d))` strata per axis. Every reduction
//! goes through [`pairwise_sum`], whose split points do not depend on the
//! thread count.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::points::PointSet;
use crate::rng::rng_from_seed;

const GL8_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

const PAIRWISE_BLOCK: usize = 64;
const PARALLEL_SPLIT: usize = 1 << 15;

/// Sum with a fixed binary split tree.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= PAIRWISE_BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    let (a, b) = xs.split_at(mid);
    if xs.len() >= PARALLEL_SPLIT {
        let (sa, sb) = rayon::join(|| pairwise_sum(a), || pairwise_sum(b));
        sa + sb
    } else {
        pairwise_sum(a) + pairwise_sum(b)
    }
}

/// Mean with pairwise summation.
pub fn pairwise_mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureMode {
    TensorGrid,
    MonteCarlo,
}

/// How an integral over the truncated box `[lower, upper]^d` is computed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub mode: QuadratureMode,
    pub lower: f64,
    pub upper: f64,
    /// Points per axis (tensor grid) or total sample count (Monte Carlo).
    pub points: usize,
    pub seed: u64,
}

/// A value together with an empirical error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Measured {
    pub value: f64,
    pub tolerance: f64,
}

impl QuadratureSpec {
    pub const MIN_POINTS: usize = 16;

    pub fn tensor(lower: f64, upper: f64, points: usize) -> Self {
        Self {
            mode: QuadratureMode::TensorGrid,
            lower,
            upper,
            points,
            seed: 0,
        }
    }

    pub fn monte_carlo(lower: f64, upper: f64, samples: usize, seed: u64) -> Self {
        Self {
            mode: QuadratureMode::MonteCarlo,
            lower,
            upper,
            points: samples,
            seed,
        }
    }

    /// Symmetric tensor grid on `[-radius, radius]`.
    pub fn symmetric(radius: f64, points: usize) -> Self {
        Self::tensor(-radius, radius, points)
    }

    /// Default rule for a `dim`-dimensional box of half-width `radius`:
    /// 4096 points per axis for d = 1, 256 for d = 2, stratified Monte Carlo
    /// with 2^18 samples beyond.
    pub fn default_for(dim: usize, radius: f64) -> Self {
        match dim {
            1 => Self::symmetric(radius, 4096),
            2 => Self::symmetric(radius, 256),
            _ => Self::monte_carlo(-radius, radius, 1 << 18, 0),
        }
    }

    pub fn with_points(&self, points: usize) -> Self {
        Self {
            points,
            ..self.clone()
        }
    }

    pub fn with_bounds(&self, lower: f64, upper: f64) -> Self {
        Self {
            lower,
            upper,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(invalid(
                "quadrature.bounds",
                format!("need finite lower < upper, got [{}, {}]", self.lower, self.upper),
            ));
        }
        if self.points < Self::MIN_POINTS {
            return Err(invalid(
                "quadrature.points",
                format!("need at least {}, got {}", Self::MIN_POINTS, self.points),
            ));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Distance from the origin to the nearest face of the box.
    pub fn inner_radius(&self) -> f64 {
        (-self.lower).min(self.upper)
    }

    /// One-dimensional composite Gauss–Legendre rule on the spec's interval.
    pub fn axis_rule(&self) -> (Vec<f64>, Vec<f64>) {
        let panels = self.points.div_ceil(8).max(1);
        let h = self.width() / panels as f64;
        let mut nodes = Vec::with_capacity(panels * 8);
        let mut weights = Vec::with_capacity(panels * 8);
        for k in 0..panels {
            let mid = self.lower + (k as f64 + 0.5) * h;
            for i in (0..4).rev() {
                nodes.push(mid - 0.5 * h * GL8_NODES[i]);
                weights.push(0.5 * h * GL8_WEIGHTS[i]);
            }
            for i in 0..4 {
                nodes.push(mid + 0.5 * h * GL8_NODES[i]);
                weights.push(0.5 * h * GL8_WEIGHTS[i]);
            }
        }
        (nodes, weights)
    }

    /// Materialises the nodes and weights in `dim` dimensions.
    pub fn nodes(&self, dim: usize) -> Result<Nodes> {
        self.validate()?;
        if dim == 0 {
            return Err(invalid("dim", "dimension must be positive"));
        }
        match self.mode {
            QuadratureMode::TensorGrid => {
                let (axis, aw) = self.axis_rule();
                let n = axis.len();
                let total = n
                    .checked_pow(dim as u32)
                    .filter(|&t| t <= 1 << 26)
                    .ok_or_else(|| invalid("quadrature.points", "tensor grid too large"))?;
                let mut data = Vec::with_capacity(total * dim);
                let mut weights = Vec::with_capacity(total);
                let mut idx = vec![0usize; dim];
                for _ in 0..total {
                    let mut w = 1.0;
                    for &i in idx.iter() {
                        data.push(axis[i]);
                        w *= aw[i];
                    }
                    weights.push(w);
                    for slot in idx.iter_mut().rev() {
                        *slot += 1;
                        if *slot < n {
                            break;
                        }
                        *slot = 0;
                    }
                }
                Ok(Nodes {
                    points: PointSet::new(dim, data)?,
                    weights,
                    mode: self.mode,
                    volume: self.width().powi(dim as i32),
                })
            }
            QuadratureMode::MonteCarlo => {
                let per_axis = (self.points as f64).powf(1.0 / dim as f64).ceil() as usize;
                let per_axis = per_axis.max(1);
                let total = per_axis
                    .checked_pow(dim as u32)
                    .filter(|&t| t <= 1 << 26)
                    .ok_or_else(|| invalid("quadrature.points", "sample count too large"))?;
                let cell = self.width() / per_axis as f64;
                let volume = self.width().powi(dim as i32);
                let mut rng = rng_from_seed(self.seed);
                let mut data = Vec::with_capacity(total * dim);
                let mut idx = vec![0usize; dim];
                for _ in 0..total {
                    for &i in idx.iter() {
                        let u: f64 = rng.random();
                        data.push(self.lower + (i as f64 + u) * cell);
                    }
                    for slot in idx.iter_mut().rev() {
                        *slot += 1;
                        if *slot < per_axis {
                            break;
                        }
                        *slot = 0;
                    }
                }
                Ok(Nodes {
                    points: PointSet::new(dim, data)?,
                    weights: vec![volume / total as f64; total],
                    mode: self.mode,
                    volume,
                })
            }
        }
    }

    /// ∫ f over the box.
    pub fn integrate<F>(&self, dim: usize, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        self.nodes(dim)?.integrate(f)
    }

    /// ∫ f with an error estimate: grid halving for tensor grids, three
    /// standard errors for Monte Carlo.
    pub fn integrate_measured<F>(&self, dim: usize, f: F) -> Result<Measured>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let nodes = self.nodes(dim)?;
        let values = nodes.values(&f)?;
        let value = nodes.weighted_sum(&values);
        let tolerance = match self.mode {
            QuadratureMode::TensorGrid => {
                let coarse = self.with_points((self.points / 2).max(8));
                (value - coarse.nodes(dim)?.integrate(&f)?).abs()
            }
            QuadratureMode::MonteCarlo => nodes.monte_carlo_error(&values),
        };
        Ok(Measured { value, tolerance })
    }
}

/// Materialised quadrature nodes.
#[derive(Debug, Clone)]
pub struct Nodes {
    pub points: PointSet,
    pub weights: Vec<f64>,
    mode: QuadratureMode,
    volume: f64,
}

impl Nodes {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    /// Evaluates `f` at every node, failing on the first non-finite value.
    pub fn values<F>(&self, f: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| f(self.points.get(i)))
            .collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure {
                context: "quadrature",
                point: self.points.get(i).to_vec(),
                detail: format!("integrand evaluated to {}", values[i]),
            });
        }
        Ok(values)
    }

    pub fn weighted_sum(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.weights.len());
        let terms: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| v * w)
            .collect();
        pairwise_sum(&terms)
    }

    pub fn integrate<F>(&self, f: F) -> Result<f64>
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let values = self.values(f)?;
        Ok(self.weighted_sum(&values))
    }

    /// ‖v‖_p from nodal values: (Σ wᵢ |vᵢ|ᵖ)^{1/p}.
    pub fn lp_norm_of_values(&self, values: &[f64], p: f64) -> f64 {
        let terms: Vec<f64> = values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * v.abs().powf(p))
            .collect();
        pairwise_sum(&terms).powf(1.0 / p)
    }

    fn monte_carlo_error(&self, values: &[f64]) -> f64 {
        match self.mode {
            QuadratureMode::TensorGrid => 0.0,
            QuadratureMode::MonteCarlo => {
                let n = values.len() as f64;
                let mean = pairwise_mean(values);
                let sq: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
                let var = pairwise_sum(&sq) / (n - 1.0).max(1.0);
                3.0 * self.volume * (var / n).sqrt()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_are_integrated_exactly() {
        let q = QuadratureSpec::tensor(-1.0, 2.0, 16);
        let v = q.integrate(1, |x| x[0].powi(7) - 3.0 * x[0].powi(2) + 1.0).unwrap();
        let exact = (2f64.powi(8) - 1.0) / 8.0 - (8.0 + 1.0) + 3.0;
        assert!((v - exact).abs() < 1e-12, "{v} vs {exact}");
    }

    #[test]
    fn tensor_grid_in_two_dimensions() {
        let q = QuadratureSpec::tensor(0.0, 1.0, 16);
        let v = q.integrate(2, |x| x[0] * x[1] * x[1]).unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn monte_carlo_is_seeded_and_close() {
        let q = QuadratureSpec::monte_carlo(0.0, 1.0, 4096, 11);
        let a = q.integrate_measured(2, |x| x[0] + x[1]).unwrap();
        let b = q.integrate_measured(2, |x| x[0] + x[1]).unwrap();
        assert_eq!(a, b);
        assert!((a.value - 1.0).abs() <= a.tolerance.max(1e-3));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(QuadratureSpec::tensor(1.0, 0.0, 64).validate().is_err());
        assert!(QuadratureSpec::tensor(0.0, 1.0, 8).validate().is_err());
    }

    #[test]
    fn nan_integrand_reports_point() {
        let q = QuadratureSpec::tensor(-1.0, 1.0, 16);
        let err = q
            .integrate(1, |x| if x[0] > 0.5 { f64::NAN } else { 1.0 })
            .unwrap_err();
        match err {
            Error::NumericalFailure { point, .. } => assert!(point[0] > 0.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let xs: Vec<f64> = (0..100_000).map(|i| (i as f64).sin() * 1e-3).collect();
        let a = pairwise_sum(&xs);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| pairwise_sum(&xs));
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
