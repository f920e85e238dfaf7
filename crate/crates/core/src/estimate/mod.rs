//! Adaptive least-squares mixture estimation: the empirical criterion and
//! its Gram expansion, Frank–Wolfe ε-minimisation over the simplex, the
//! (mₙ, ν, εₙ) schedule, and empirical-process diagnostics.

pub mod diagnostics;
pub mod experiment;
pub mod frank_wolfe;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use diagnostics::{
    convex_sup_check, empirical_process_sup, klemela_decomposition_check, ConvexSupCheck,
    EmpiricalProcessSup, ExcessRiskCheck,
};
pub use experiment::{estimation_rate_experiment, EstimationExperiment, EstimationRateReport};
pub use frank_wolfe::{fit_weights_frank_wolfe, WeightFit};

use crate::analysis::measure::EmpiricalMeasure;
use crate::analysis::quadrature::{pairwise_sum, QuadratureSpec};
use crate::approx::{optimal_nu, BoundInputs, MixtureModel};
use crate::error::{invalid, Error, Result};
use crate::kernels::{dilate, self_convolution, KernelDensity};
use crate::points::PointSet;
use crate::rng::rng_from_seed;

/// Dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds from a full row-major buffer, symmetrising (A + Aᵀ)/2.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(invalid("matrix", "buffer length is not n²"));
        }
        let mut m = Self { n, data };
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m.get(i, j) + m.get(j, i));
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        Ok(m)
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    /// G·x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let m = nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data);
        m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// xᵀGx
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let gx = self.mul_vec(x);
        gx.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

/// G_{jk} = (φ_ν∗φ_ν)(μⱼ − μ_k).
pub fn gram_matrix(locations: &PointSet, kernel: &KernelDensity, nu: f64) -> Result<SymMatrix> {
    if locations.dim() != kernel.dim() {
        return Err(invalid("locations", "dimension differs from the kernel"));
    }
    let m = locations.len();
    let quad = QuadratureSpec::symmetric(kernel.axis_radius() / nu, 512);
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mj = locations.get(j);
            (0..m)
                .map(|k| {
                    let delta: Vec<f64> = mj.iter().zip(locations.get(k)).map(|(a, b)| a - b).collect();
                    self_convolution(kernel, nu, &delta, &quad)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    SymMatrix::from_row_major(m, rows.concat())
}

/// bⱼ = Pₙ[φ_ν(· − μⱼ)].
pub fn atom_means(locations: &PointSet, kernel: &KernelDensity, nu: f64, sample: &EmpiricalMeasure) -> Result<Vec<f64>> {
    let k = dilate(kernel, nu)?;
    Ok((0..locations.len())
        .into_par_iter()
        .map(|j| {
            let mu = locations.get(j);
            let vals: Vec<f64> = sample.points().iter().map(|x| k.eval_at(x, mu)).collect();
            pairwise_sum(&vals) / sample.n() as f64
        })
        .collect())
}

/// πᵀGπ − 2πᵀb.
pub fn quadratic_risk(g: &SymMatrix, b: &[f64], weights: &[f64]) -> f64 {
    g.quad_form(weights) - 2.0 * weights.iter().zip(b).map(|(w, v)| w * v).sum::<f64>()
}

/// ∫f² − 2Pₙf for a mixture, via its Gram expansion.
pub fn empirical_risk(mixture: &MixtureModel, sample: &EmpiricalMeasure) -> Result<f64> {
    if sample.dim() != mixture.dim() {
        return Err(invalid("sample", "dimension mismatch"));
    }
    let g = gram_matrix(mixture.locations(), mixture.kernel(), mixture.nu())?;
    let b = atom_means(mixture.locations(), mixture.kernel(), mixture.nu(), sample)?;
    Ok(quadratic_risk(&g, &b, mixture.weights()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateRule {
    /// First m points of the seed-shuffled sample.
    Subsample,
    /// m points at evenly spaced ranks of the lexicographically sorted sample.
    Grid,
}

/// Settings for one adaptive fit.
#[derive(Debug, Clone)]
pub struct EstimationSettings {
    pub kernel: KernelDensity,
    pub s: f64,
    pub candidate_rule: CandidateRule,
    pub b3: f64,
    pub max_iters: usize,
    /// Seed for the candidate shuffle.
    pub seed: u64,
}

/// Constants entering the ν schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimationConstants {
    pub k1: f64,
    pub k2: f64,
    pub phi_norm_2: f64,
    pub c_2: f64,
}

/// The fitted ε-minimiser with its certificate.
#[derive(Debug, Clone)]
pub struct LeastSquaresFit {
    pub mixture: MixtureModel,
    pub empirical_risk: f64,
    pub duality_gap: f64,
    pub epsilon: f64,
    pub iterations: usize,
    pub certified: bool,
    pub risk_history: Vec<f64>,
    pub gram: SymMatrix,
    pub atom_means: Vec<f64>,
}

/// mₙ = ⌈√n⌉.
pub fn atoms_for(n: usize) -> usize {
    let mut m = (n as f64).sqrt() as usize;
    while m * m < n {
        m += 1;
    }
    while m > 0 && (m - 1) * (m - 1) >= n {
        m -= 1;
    }
    m
}

/// εₙ = B₃ n^{−s/(2s+d)}.
pub fn epsilon_for(n: usize, s: f64, d: usize, b3: f64) -> f64 {
    b3 * (n as f64).powf(-s / (2.0 * s + d as f64))
}

/// ν for mₙ atoms from the p = 2 schedule with α = s.
pub fn nu_for(m: usize, s: f64, d: usize, c: &EstimationConstants) -> Result<f64> {
    optimal_nu(
        m,
        &BoundInputs {
            p: 2.0,
            alpha: s,
            d,
            k1: c.k1,
            k2: c.k2,
            phi_norm_p: c.phi_norm_2,
            c_p: c.c_2,
        },
    )
}

pub fn select_candidates(sample: &PointSet, m: usize, rule: CandidateRule, seed: u64) -> PointSet {
    let n = sample.len();
    let m = m.min(n);
    let idx: Vec<usize> = match rule {
        CandidateRule::Subsample => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng_from_seed(seed));
            idx.truncate(m);
            idx
        }
        CandidateRule::Grid => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                sample
                    .get(a)
                    .iter()
                    .zip(sample.get(b))
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            (0..m)
                .map(|k| order[(((k as f64 + 0.5) * n as f64 / m as f64) as usize).min(n - 1)])
                .collect()
        }
    };
    sample.select(&idx)
}

pub fn adaptive_estimate(
    sample: &EmpiricalMeasure,
    settings: &EstimationSettings,
    constants: &EstimationConstants,
) -> Result<LeastSquaresFit> {
    let n = sample.n();
    if n < 4 {
        return Err(Error::InsufficientData { needed: 4, got: n });
    }
    let kernel = &settings.kernel;
    if kernel.dim() != sample.dim() {
        return Err(invalid("sample", "dimension differs from the kernel"));
    }
    if !kernel.is_symmetric() {
        return Err(Error::UnsupportedKernel(format!("`{}` is not symmetric", kernel.name())));
    }
    if !kernel.sup_norm().is_finite() {
        return Err(Error::UnsupportedKernel(format!("`{}` is unbounded", kernel.name())));
    }
    let d = sample.dim();
    let m = atoms_for(n);
    let nu = nu_for(m, settings.s, d, constants)?;
    let locations = select_candidates(sample.points(), m, settings.candidate_rule, settings.seed);
    let gram = gram_matrix(&locations, kernel, nu)?;
    let b = atom_means(&locations, kernel, nu, sample)?;
    let epsilon = epsilon_for(n, settings.s, d, settings.b3);
    let fit = fit_weights_frank_wolfe(&gram, &b, epsilon, settings.max_iters)?;
    let mixture = MixtureModel::new(kernel, nu, locations, fit.weights.clone())?;
    Ok(LeastSquaresFit {
        mixture,
        empirical_risk: fit.risk,
        duality_gap: fit.gap,
        epsilon,
        iterations: fit.iterations,
        certified: fit.certified,
        risk_history: fit.risk_history,
        gram,
        atom_means: b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::TargetDensity;

    #[test]
    fn gram_examples() {
        let k = KernelDensity::gaussian(1);
        let g = gram_matrix(&PointSet::from_scalars(&[0.3]), &k, 1.0).unwrap();
        assert_eq!(g.size(), 1);
        assert!((g.get(0, 0) - 0.282_094_791_773_878_14).abs() < 1e-12);
        let g = gram_matrix(&PointSet::from_scalars(&[0.5, 0.5]), &k, 2.0).unwrap();
        assert_eq!(g.get(0, 1), g.get(0, 0));
        assert!(g.quad_form(&[1.0, -1.0]).abs() < 1e-15);
        assert!(g.min_eigenvalue().abs() < 1e-12);
        let locs = TargetDensity::standard_gaussian(1).sample(8, 4);
        assert!(gram_matrix(&locs, &k, 1.5).unwrap().min_eigenvalue() >= -1e-10);
    }

    #[test]
    fn atoms_and_epsilon() {
        assert_eq!(atoms_for(100), 10);
        assert_eq!(atoms_for(101), 11);
        assert_eq!(atoms_for(1), 1);
        assert_eq!(atoms_for(8192), 91);
        assert!((epsilon_for(4096, 1.0, 1, 1.0) - 4096f64.powf(-1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn risk_is_linear_in_b() {
        let g = SymMatrix::from_row_major(2, vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let b = [0.3, 0.1];
        let w = [0.4, 0.6];
        let r = quadratic_risk(&g, &b, &w);
        let r2 = quadratic_risk(&g, &[0.6, 0.2], &w);
        let shift = 2.0 * (0.4 * 0.3 + 0.6 * 0.1);
        assert!((r2 - (r - shift)).abs() < 1e-15);
    }

    #[test]
    fn candidate_rules() {
        let sample = PointSet::from_scalars(&(0..20).map(|i| (19 - i) as f64).collect::<Vec<_>>());
        let a = select_candidates(&sample, 5, CandidateRule::Subsample, 1);
        let b = select_candidates(&sample, 5, CandidateRule::Subsample, 1);
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        let g = select_candidates(&sample, 4, CandidateRule::Grid, 0);
        assert_eq!(g.as_flat(), &[2.0, 7.0, 12.0, 17.0]);
    }

    #[test]
    fn adaptive_fit_is_certified_and_descends() {
        let f0 = TargetDensity::standard_gaussian(1);
        let sample = EmpiricalMeasure::draw(&f0, 400, 11).unwrap();
        let settings = EstimationSettings {
            kernel: KernelDensity::gaussian(1),
            s: 1.0,
            candidate_rule: CandidateRule::Subsample,
            b3: 0.01,
            max_iters: 10_000,
            seed: 3,
        };
        let constants = EstimationConstants {
            k1: (2.0 / std::f64::consts::PI).sqrt(),
            k2: 0.375_563_4,
            phi_norm_2: 0.531_125_966,
            c_2: 1.0,
        };
        let fit = adaptive_estimate(&sample, &settings, &constants).unwrap();
        assert_eq!(fit.mixture.m(), 20);
        assert!(fit.certified && fit.duality_gap <= fit.epsilon);
        assert!(fit.risk_history.windows(2).all(|w| w[1] <= w[0] + 1e-15));
        let direct = empirical_risk(&fit.mixture, &sample).unwrap();
        assert!((direct - fit.empirical_risk).abs() < 1e-12);
        let tiny = EmpiricalMeasure::new(PointSet::from_scalars(&[0.0, 1.0, 2.0])).unwrap();
        assert!(matches!(
            adaptive_estimate(&tiny, &settings, &constants),
            Err(Error::InsufficientData { .. })
        ));
    }
}
