//! Checks on the estimator's proof steps: the basic excess-risk inequality,
//! the empirical-process supremum and its envelope bound, and the reduction
//! of a supremum over convex combinations to the atoms.

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::Serialize;

use super::LeastSquaresFit;
use crate::analysis::measure::{expectation, EmpiricalMeasure};
use crate::analysis::quadrature::{pairwise_mean, pairwise_sum, QuadratureSpec};
use crate::analysis::{SmoothedTarget, DEFAULT_INNER_POINTS};
use crate::approx::MixtureModel;
use crate::error::{invalid, Error, Result};
use crate::kernels::{dilate, KernelDensity};
use crate::points::PointSet;
use crate::rng::{derive_seed, rng_from_seed};
use crate::targets::TargetDensity;

/// Slack for the excess-risk inequality.
pub const EXCESS_RISK_SLACK: f64 = 1e-5;
/// Slack for the convex-supremum inequality.
pub const CONVEX_SUP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcessRiskCheck {
    /// ‖f̂ − f₀‖₂²
    pub lhs: f64,
    /// ‖f* − f₀‖₂² + 2(Pₙ − P)(f̂ − f*) + ε
    pub rhs: f64,
    pub approx_term: f64,
    pub fluctuation_term: f64,
    pub epsilon: f64,
    pub holds: bool,
}

/// Evaluates both sides of
/// ‖f̂ − f₀‖² ≤ ‖f* − f₀‖² + 2(Pₙ − P)(f̂ − f*) + ε
/// with squared distances and P by quadrature and Pₙ as a sample average.
pub fn klemela_decomposition_check(
    fit: &LeastSquaresFit,
    f_star: &MixtureModel,
    f0: &TargetDensity,
    sample: &EmpiricalMeasure,
    quad: &QuadratureSpec,
) -> Result<ExcessRiskCheck> {
    check_same_class(&fit.mixture, f_star)?;
    let nodes = quad.nodes(f0.dim())?;
    let f0v = nodes.values(|x| f0.eval(x))?;
    let hat = nodes.values(|x| fit.mixture.eval(x))?;
    let star = nodes.values(|x| f_star.eval(x))?;
    let sq = |v: &[f64]| -> f64 {
        let t: Vec<f64> = v.iter().zip(&f0v).zip(&nodes.weights).map(|((a, b), w)| (a - b).powi(2) * w).collect();
        pairwise_sum(&t)
    };
    let lhs = sq(&hat);
    let approx_term = sq(&star);
    let pn = sample.mean(|x| fit.mixture.eval(x) - f_star.eval(x));
    let diff: Vec<f64> = hat.iter().zip(&star).zip(&f0v).zip(&nodes.weights).map(|(((a, b), f), w)| (a - b) * f * w).collect();
    let p = pairwise_sum(&diff);
    let fluctuation_term = 2.0 * (pn - p);
    let rhs = approx_term + fluctuation_term + fit.epsilon;
    Ok(ExcessRiskCheck {
        lhs,
        rhs,
        approx_term,
        fluctuation_term,
        epsilon: fit.epsilon,
        holds: lhs <= rhs + EXCESS_RISK_SLACK,
    })
}

fn check_same_class(a: &MixtureModel, b: &MixtureModel) -> Result<()> {
    if a.locations() != b.locations() || a.nu() != b.nu() || a.kernel().name() != b.kernel().name() {
        return Err(invalid("f_star", "must share the fitted mixture's atoms and scale"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalProcessSup {
    pub n: usize,
    pub nu: f64,
    /// Mean over trials of sup_μ |Pₙφ_ν(· − μ) − Pφ_ν(· − μ)|.
    pub mean_sup: f64,
    pub sups: Vec<f64>,
    /// ν^d ‖φ‖_∞ √(vc/n)
    pub bound: f64,
    pub holds: bool,
}

/// Monte Carlo estimate of E sup over `mu_grid` of the centred empirical
/// process indexed by the atoms φ_ν(· − μ).
pub fn empirical_process_sup(
    kernel: &KernelDensity,
    nu: f64,
    n: usize,
    mu_grid: &PointSet,
    trials: usize,
    seed: u64,
    f0: &TargetDensity,
) -> Result<EmpiricalProcessSup> {
    if mu_grid.is_empty() || mu_grid.dim() != kernel.dim() || f0.dim() != kernel.dim() {
        return Err(invalid("mu_grid", "need a nonempty grid matching the kernel dimension"));
    }
    if n == 0 || trials == 0 {
        return Err(invalid("n", "sample size and trials must be positive"));
    }
    if !kernel.is_symmetric() {
        return Err(Error::UnsupportedKernel(format!("`{}` is not symmetric", kernel.name())));
    }
    let k = dilate(kernel, nu)?;
    // Pφ_ν(· − μ) = (φ_ν∗f₀)(μ) for symmetric φ
    let smoothed = SmoothedTarget::new(&k, f0, DEFAULT_INNER_POINTS)?;
    let expected: Vec<f64> = mu_grid.iter().map(|mu| smoothed.eval(mu)).collect();
    let sups: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let sample = f0.sample(n, derive_seed(seed, &[n as u64, t as u64]));
            mu_grid
                .iter()
                .zip(&expected)
                .map(|(mu, e)| {
                    let vals: Vec<f64> = sample.iter().map(|x| k.eval_at(x, mu)).collect();
                    (pairwise_mean(&vals) - e).abs()
                })
                .fold(0.0f64, f64::max)
        })
        .collect();
    let mean_sup = pairwise_mean(&sups);
    let bound = k.sup_norm() * (kernel.vc_dim() / n as f64).sqrt();
    Ok(EmpiricalProcessSup {
        n,
        nu,
        mean_sup,
        sups,
        bound,
        holds: mean_sup <= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexSupCheck {
    pub cases: usize,
    pub holds: usize,
    /// max over cases of |Pₙf − Pf| / maxⱼ|Pₙfⱼ − Pfⱼ|
    pub max_ratio: f64,
    pub max_atom_deviation: f64,
}

impl ConvexSupCheck {
    pub fn all_hold(&self) -> bool {
        self.holds == self.cases
    }
}

/// For random convex combinations f of the atoms φ_ν(· − μⱼ), checks
/// |Pₙf − Pf| ≤ maxⱼ |Pₙfⱼ − Pfⱼ|. Both sides are evaluated directly: Pₙ
/// by the sample average of the mixture, P by quadrature against f₀.
#[allow(clippy::too_many_arguments)]
pub fn convex_sup_check(
    sample: &EmpiricalMeasure,
    f0: &TargetDensity,
    kernel: &KernelDensity,
    nu: f64,
    atoms: &PointSet,
    weight_trials: usize,
    seed: u64,
    quad: &QuadratureSpec,
) -> Result<ConvexSupCheck> {
    if atoms.is_empty() {
        return Err(invalid("atoms", "need at least one atom"));
    }
    let m = atoms.len();
    let deviation = |mix: &MixtureModel| -> Result<f64> {
        let pn = sample.mean(|x| mix.eval(x));
        let p = expectation(f0, |x| mix.eval(x), quad)?;
        Ok((pn - p).abs())
    };
    let atom_devs = (0..m)
        .map(|j| {
            let mut w = vec![0.0; m];
            w[j] = 1.0;
            deviation(&MixtureModel::new(kernel, nu, atoms.clone(), w)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let max_atom = atom_devs.iter().cloned().fold(0.0f64, f64::max);
    let mut rng = rng_from_seed(seed);
    let mut holds = 0;
    let mut max_ratio = 0.0f64;
    for _ in 0..weight_trials {
        let raw: Vec<f64> = (0..m).map(|_| Exp1.sample(&mut rng)).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let dev = deviation(&MixtureModel::new(kernel, nu, atoms.clone(), w)?)?;
        if dev <= max_atom + CONVEX_SUP_SLACK {
            holds += 1;
        }
        if max_atom > 0.0 {
            max_ratio = max_ratio.max(dev / max_atom);
        }
    }
    Ok(ConvexSupCheck {
        cases: weight_trials,
        holds,
        max_ratio,
        max_atom_deviation: max_atom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::{adaptive_estimate, CandidateRule, EstimationConstants, EstimationSettings};

    fn fit_for(n: usize, seed: u64) -> (LeastSquaresFit, EmpiricalMeasure, TargetDensity) {
        let f0 = TargetDensity::standard_gaussian(1);
        let sample = EmpiricalMeasure::draw(&f0, n, seed).unwrap();
        let settings = EstimationSettings {
            kernel: KernelDensity::gaussian(1),
            s: 1.0,
            candidate_rule: CandidateRule::Subsample,
            b3: 1.0,
            max_iters: 10_000,
            seed,
        };
        let constants = EstimationConstants {
            k1: (2.0 / std::f64::consts::PI).sqrt(),
            k2: 0.375_563_4,
            phi_norm_2: 0.531_125_966,
            c_2: 1.0,
        };
        (adaptive_estimate(&sample, &settings, &constants).unwrap(), sample, f0)
    }

    #[test]
    fn excess_risk_examples() {
        let quad = QuadratureSpec::symmetric(14.0, 4096);
        for seed in 0..10 {
            let (fit, sample, f0) = fit_for(256, seed);
            let same = klemela_decomposition_check(&fit, &fit.mixture, &f0, &sample, &quad).unwrap();
            assert!(same.holds);
            assert!((same.lhs - same.approx_term).abs() < 1e-15);
            let m = fit.mixture.m();
            let mut rng = rng_from_seed(seed);
            let raw: Vec<f64> = (0..m).map(|_| Exp1.sample(&mut rng)).collect();
            let t: f64 = raw.iter().sum();
            let star = fit.mixture.with_weights(raw.iter().map(|v| v / t).collect()).unwrap();
            assert!(klemela_decomposition_check(&fit, &star, &f0, &sample, &quad).unwrap().holds);
        }
    }

    #[test]
    fn excess_risk_detects_corrupted_weights() {
        let quad = QuadratureSpec::symmetric(14.0, 4096);
        let (mut fit, sample, f0) = fit_for(256, 4);
        let star = fit.mixture.clone();
        // worst vertex of the empirical risk
        let m = fit.mixture.m();
        let worst = (0..m)
            .max_by(|&a, &b| {
                let ra = fit.gram.get(a, a) - 2.0 * fit.atom_means[a];
                let rb = fit.gram.get(b, b) - 2.0 * fit.atom_means[b];
                ra.total_cmp(&rb)
            })
            .unwrap();
        let mut w = vec![0.0; m];
        w[worst] = 1.0;
        fit.mixture = fit.mixture.with_weights(w).unwrap();
        assert!(!klemela_decomposition_check(&fit, &star, &f0, &sample, &quad).unwrap().holds);
    }

    #[test]
    fn empirical_process_examples() {
        let k = KernelDensity::gaussian(1);
        let f0 = TargetDensity::standard_gaussian(1);
        let grid = PointSet::from_scalars(&(0..41).map(|i| -4.0 + 0.2 * i as f64).collect::<Vec<_>>());
        let a = empirical_process_sup(&k, 2.0, 500, &grid, 1, 9, &f0).unwrap();
        let b = empirical_process_sup(&k, 2.0, 500, &grid, 1, 9, &f0).unwrap();
        assert_eq!(a, b);
        let expected = 2.0 / (2.0 * std::f64::consts::PI).sqrt() * (4.0f64 / 500.0).sqrt();
        assert!((a.bound - expected).abs() < 1e-15);
        assert!(a.holds);
    }

    #[test]
    fn convex_sup_examples() {
        let k = KernelDensity::gaussian(1);
        let f0 = TargetDensity::standard_gaussian(1);
        let sample = EmpiricalMeasure::draw(&f0, 300, 2).unwrap();
        let quad = QuadratureSpec::symmetric(12.0, 2048);
        let one = convex_sup_check(&sample, &f0, &k, 2.0, &PointSet::from_scalars(&[0.4]), 5, 1, &quad).unwrap();
        assert!(one.all_hold());
        assert!((one.max_ratio - 1.0).abs() < 1e-9);
        let atoms = PointSet::from_scalars(&[-1.5, -0.5, 0.0, 0.8, 2.0]);
        let many = convex_sup_check(&sample, &f0, &k, 2.0, &atoms, 100, 3, &quad).unwrap();
        assert_eq!(many.cases, 100);
        assert!(many.all_hold());
        assert!(many.max_ratio <= 1.0 + 1e-9);
    }
}
