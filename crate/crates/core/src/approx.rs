//! Finite mixture approximation: scale selection, the two-branch rate and
//! its constant, Maurey-type sampling of m-component mixtures, greedy
//! refinement, and the approximation-rate experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::quadrature::{pairwise_mean, pairwise_sum, QuadratureSpec};
use crate::analysis::{default_quadrature, SmoothedTarget, DEFAULT_INNER_POINTS};
use crate::error::{invalid, Error, Result};
use crate::harness::report::{RateReport, RateRow, SLOPE_TOLERANCE};
use crate::kernels::{check_nu, check_p, dilate, kernel_lp_norm, kernel_moment, DilatedKernel, KernelDensity};
use crate::points::PointSet;
use crate::rng::derive_seed;
use crate::targets::{resolve_smoothness, TargetDensity};

/// A finite location mixture Σⱼ πⱼ φ_ν(· − μⱼ).
#[derive(Debug, Clone)]
pub struct MixtureModel {
    weights: Vec<f64>,
    locations: PointSet,
    kernel: DilatedKernel,
}

impl MixtureModel {
    /// Weights must be nonnegative and sum to one within 1e-9; they are
    /// renormalised exactly.
    pub fn new(kernel: &KernelDensity, nu: f64, locations: PointSet, weights: Vec<f64>) -> Result<Self> {
        check_nu(nu)?;
        if locations.is_empty() {
            return Err(invalid("locations", "a mixture needs at least one atom"));
        }
        if locations.dim() != kernel.dim() {
            return Err(invalid("locations", "dimension differs from the kernel"));
        }
        if !locations.all_finite() {
            return Err(invalid("locations", "locations must be finite"));
        }
        if weights.len() != locations.len() {
            return Err(invalid("weights", "one weight per location required"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(invalid("weights", "weights must be finite and nonnegative"));
        }
        let total = pairwise_sum(&weights);
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid("weights", format!("weights sum to {total}, expected 1")));
        }
        Ok(Self {
            weights: weights.iter().map(|w| w / total).collect(),
            locations,
            kernel: dilate(kernel, nu)?,
        })
    }

    pub fn uniform(kernel: &KernelDensity, nu: f64, locations: PointSet) -> Result<Self> {
        let m = locations.len().max(1);
        Self::new(kernel, nu, locations, vec![1.0 / m as f64; m])
    }

    pub fn m(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.locations.dim()
    }

    pub fn nu(&self) -> f64 {
        self.kernel.nu
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn locations(&self) -> &PointSet {
        &self.locations
    }

    pub fn kernel(&self) -> &KernelDensity {
        &self.kernel.base
    }

    pub fn dilated(&self) -> &DilatedKernel {
        &self.kernel
    }

    /// Same atoms, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::new(&self.kernel.base, self.kernel.nu, self.locations.clone(), weights)
    }

    /// Σⱼ πⱼ ν^d φ(ν(x − μⱼ)).
    pub fn eval(&self, x: &[f64]) -> f64 {
        let base = &self.kernel.base;
        let nu = self.kernel.nu;
        let mut acc = 0.0;
        for (w, mu) in self.weights.iter().zip(self.locations.iter()) {
            if *w != 0.0 {
                acc += w * base.eval_scaled(x, nu, Some(mu));
            }
        }
        acc * self.kernel.prefactor()
    }

    /// Per-axis radius of a box containing the (effective) support.
    pub fn axis_extent(&self) -> f64 {
        let far = self
            .locations
            .as_flat()
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        far + self.kernel.axis_radius()
    }
}

/// Conjugate exponent q = p/(p − 1).
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RateBranch {
    #[serde(rename = "p_lt_2")]
    PLt2,
    #[serde(rename = "p_ge_2")]
    PGe2,
}

impl RateBranch {
    pub fn of(p: f64) -> Self {
        if p < 2.0 {
            RateBranch::PLt2
        } else {
            RateBranch::PGe2
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RateBranch::PLt2 => "p_lt_2",
            RateBranch::PGe2 => "p_ge_2",
        }
    }
}

/// Exponent of m in the approximation bound.
pub fn rate_exponent(p: f64, alpha: f64, d: usize) -> Result<f64> {
    check_p(p)?;
    check_alpha(alpha)?;
    if d == 0 {
        return Err(invalid("d", "dimension must be positive"));
    }
    let q = conjugate(p);
    let d = d as f64;
    Ok(match RateBranch::of(p) {
        RateBranch::PLt2 => -alpha / (alpha * q + d),
        RateBranch::PGe2 => -alpha * q / (2.0 * (alpha * q + d)),
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("must lie in (0, 1], got {alpha}")))
    }
}

/// Default Maurey constant: 1 for p = 2, 2 otherwise.
pub fn default_c_p(p: f64) -> f64 {
    if p == 2.0 {
        1.0
    } else {
        2.0
    }
}

/// Everything the bound depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundInputs {
    pub p: f64,
    pub alpha: f64,
    pub d: usize,
    pub k1: f64,
    pub k2: f64,
    pub phi_norm_p: f64,
    pub c_p: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        check_p(self.p)?;
        check_alpha(self.alpha)?;
        if self.d == 0 {
            return Err(invalid("d", "dimension must be positive"));
        }
        for (name, v) in [
            ("k1", self.k1),
            ("k2", self.k2),
            ("phi_norm_p", self.phi_norm_p),
            ("c_p", self.c_p),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// B = 3d‖φ‖_p C_p / (αq K₁K₂).
    pub fn bracket(&self) -> f64 {
        let q = conjugate(self.p);
        3.0 * self.d as f64 * self.phi_norm_p * self.c_p / (self.alpha * q * self.k1 * self.k2)
    }

    fn denom(&self) -> f64 {
        self.alpha * conjugate(self.p) + self.d as f64
    }
}

/// Scale minimising the two-term bound for m atoms.
pub fn optimal_nu(m: usize, inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    if m == 0 {
        return Err(invalid("m", "number of atoms must be positive"));
    }
    let q = conjugate(inputs.p);
    let denom = inputs.denom();
    let m_power = match RateBranch::of(inputs.p) {
        RateBranch::PLt2 => 1.0 / denom,
        RateBranch::PGe2 => q / (2.0 * denom),
    };
    Ok(inputs.bracket().powf(-q / denom) * (m as f64).powf(m_power))
}

/// K = 3‖φ‖_pC_p B^{−d/(αq+d)} + K₁K₂ B^{αq/(αq+d)}; both branches share
/// this form once ν*_m is substituted.
pub fn theorem_constant_k(inputs: &BoundInputs) -> Result<f64> {
    inputs.validate()?;
    let b = inputs.bracket();
    let denom = inputs.denom();
    let aq = inputs.alpha * conjugate(inputs.p);
    Ok(3.0 * inputs.phi_norm_p * inputs.c_p * b.powf(-(inputs.d as f64) / denom)
        + inputs.k1 * inputs.k2 * b.powf(aq / denom))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBoundConstants {
    pub c_p: f64,
    pub k: f64,
    pub exponent: f64,
    pub branch: RateBranch,
    pub bracket: f64,
}

impl RateBoundConstants {
    pub fn from_inputs(inputs: &BoundInputs) -> Result<Self> {
        Ok(Self {
            c_p: inputs.c_p,
            k: theorem_constant_k(inputs)?,
            exponent: rate_exponent(inputs.p, inputs.alpha, inputs.d)?,
            branch: RateBranch::of(inputs.p),
            bracket: inputs.bracket(),
        })
    }

    /// K·m^{exponent}.
    pub fn bound(&self, m: usize) -> f64 {
        self.k * (m as f64).powf(self.exponent)
    }
}

/// Equal-weight mixture with m locations drawn i.i.d. from f₀.
pub fn maurey_sample(
    f0: &TargetDensity,
    kernel: &KernelDensity,
    nu: f64,
    m: usize,
    seed: u64,
) -> Result<MixtureModel> {
    if m == 0 {
        return Err(invalid("m", "number of atoms must be positive"));
    }
    if f0.dim() != kernel.dim() {
        return Err(invalid("dim", "kernel and target dimensions differ"));
    }
    MixtureModel::uniform(kernel, nu, f0.sample(m, seed))
}

/// Frank–Wolfe over candidate atoms on the squared L² distance to
/// `reference`, evaluated on the nodes of `quad`. Each step moves mass
/// toward the best candidate with an exact line search; a step that cannot
/// decrease the objective leaves the mixture unchanged. Returns the refined
/// mixture and the objective after each step (index 0 = initial).
pub fn greedy_refine<R>(
    init: &MixtureModel,
    reference: R,
    candidates: &PointSet,
    p: f64,
    quad: &QuadratureSpec,
    steps: usize,
) -> Result<(MixtureModel, Vec<f64>)>
where
    R: Fn(&[f64]) -> f64 + Sync,
{
    if p != 2.0 {
        return Err(invalid("p", "greedy refinement needs p = 2"));
    }
    if candidates.is_empty() {
        return Err(invalid("candidates", "candidate grid is empty"));
    }
    if candidates.dim() != init.dim() {
        return Err(invalid("candidates", "dimension mismatch"));
    }
    let nodes = quad.nodes(init.dim())?;
    let reference = nodes.values(&reference)?;
    let atoms: Vec<Vec<f64>> = candidates
        .iter()
        .map(|c| nodes.values(|x| init.dilated().eval_at(x, c)))
        .collect::<Result<_>>()?;
    let inner = |a: &[f64], b: &[f64]| {
        let t: Vec<f64> = a.iter().zip(b).zip(&nodes.weights).map(|((x, y), w)| x * y * w).collect();
        pairwise_sum(&t)
    };
    let mut current = nodes.values(|x| init.eval(x))?;
    let mut locations = init.locations().clone();
    let mut weights = init.weights().to_vec();
    let residual = |f: &[f64]| -> Vec<f64> { f.iter().zip(&reference).map(|(a, b)| a - b).collect() };
    let mut history = vec![{
        let e = residual(&current);
        inner(&e, &e)
    }];
    for _ in 0..steps {
        let e = residual(&current);
        let scores: Vec<f64> = atoms.iter().map(|g| inner(&e, g)).collect();
        let best = scores
            .iter()
            .enumerate()
            .fold(0usize, |b, (i, s)| if *s < scores[b] { i } else { b });
        let dir: Vec<f64> = atoms[best].iter().zip(&current).map(|(g, f)| g - f).collect();
        let curvature = inner(&dir, &dir);
        let gamma = if curvature > 0.0 {
            (-inner(&e, &dir) / curvature).clamp(0.0, 1.0)
        } else {
            0.0
        };
        if gamma > 0.0 {
            for (f, d) in current.iter_mut().zip(&dir) {
                *f += gamma * d;
            }
            weights.iter_mut().for_each(|w| *w *= 1.0 - gamma);
            let c = candidates.get(best);
            match locations.iter().position(|l| l == c) {
                Some(j) => weights[j] += gamma,
                None => {
                    locations.push(c);
                    weights.push(gamma);
                }
            }
        }
        let e = residual(&current);
        let obj = inner(&e, &e);
        let prev = *history.last().expect("nonempty");
        history.push(obj.min(prev));
    }
    let total: f64 = weights.iter().sum();
    let weights = weights.iter().map(|w| w / total).collect();
    let refined = MixtureModel::new(init.kernel(), init.nu(), locations, weights)?;
    Ok((refined, history))
}

/// Settings for the approximation-rate experiment.
#[derive(Debug, Clone)]
pub struct ApproxExperiment {
    pub kernel: KernelDensity,
    pub target: TargetDensity,
    pub p: f64,
    /// Overrides the target's smoothness order when set.
    pub alpha: Option<f64>,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    /// Maurey constant; defaults to [`default_c_p`].
    pub c_p: Option<f64>,
    /// Quadrature override (per-axis points); bounds follow ν.
    pub quad_points: Option<usize>,
    pub slope_tolerance: f64,
}

impl ApproxExperiment {
    pub fn new(kernel: KernelDensity, target: TargetDensity, p: f64, m_grid: Vec<usize>) -> Self {
        Self {
            kernel,
            target,
            p,
            alpha: None,
            m_grid,
            trials: 20,
            seed: 0,
            c_p: None,
            quad_points: None,
            slope_tolerance: SLOPE_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxRow {
    pub m: usize,
    pub nu: f64,
    pub mean_error: f64,
    pub std_error: f64,
    pub std_dev: f64,
    pub best_error: f64,
    pub bound: f64,
    /// ‖φ_ν∗f₀ − f₀‖_p
    pub smoothing_error: f64,
    /// Mean over trials of ‖f_m − φ_ν∗f₀‖_p
    pub mean_sampling_error: f64,
    /// 2‖φ_ν‖_p
    pub sampling_cap: f64,
    pub quadrature_tolerance: f64,
    pub decomposition_holds: usize,
    pub sampling_cap_holds: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxRateReport {
    pub report: RateReport,
    pub rows: Vec<ApproxRow>,
    pub constants: RateBoundConstants,
    pub inputs: BoundInputs,
    pub kernel: String,
    pub target: String,
}

pub fn approx_rate_experiment(cfg: &ApproxExperiment) -> Result<ApproxRateReport> {
    if cfg.m_grid.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: cfg.m_grid.len(),
        });
    }
    if cfg.m_grid.windows(2).any(|w| w[1] <= w[0]) || cfg.m_grid[0] == 0 {
        return Err(invalid("approx.m_grid", "must be positive and strictly increasing"));
    }
    if cfg.trials == 0 {
        return Err(invalid("experiment.trials", "need at least one trial"));
    }
    if cfg.kernel.dim() != cfg.target.dim() {
        return Err(invalid("kernel.dim", "kernel and target dimensions differ"));
    }
    let p = cfg.p;
    check_p(p)?;
    let d = cfg.target.dim();
    let smooth_quad = QuadratureSpec::default_for(d, cfg.target.effective_support_radius() + 1.0);
    let mut smooth = resolve_smoothness(&cfg.target, p, &smooth_quad)?;
    if let Some(a) = cfg.alpha {
        check_alpha(a)?;
        smooth.alpha = a;
    }
    let k1 = kernel_moment(
        &cfg.kernel,
        smooth.alpha,
        &QuadratureSpec::symmetric(cfg.kernel.axis_radius(), 4096),
    )?;
    let inputs = BoundInputs {
        p,
        alpha: smooth.alpha,
        d,
        k1,
        k2: smooth.require_k2()?,
        phi_norm_p: kernel_lp_norm(&cfg.kernel, p, 4096)?,
        c_p: cfg.c_p.unwrap_or_else(|| default_c_p(p)),
    };
    let constants = RateBoundConstants::from_inputs(&inputs)?;
    let certified = p == 2.0 && inputs.c_p == 1.0;

    let mut rows = Vec::with_capacity(cfg.m_grid.len());
    for &m in &cfg.m_grid {
        let nu = optimal_nu(m, &inputs)?;
        let mut quad = default_quadrature(&cfg.target, &cfg.kernel, nu);
        if let Some(points) = cfg.quad_points {
            quad = quad.with_points(points);
        }
        let nodes = quad.nodes(d)?;
        let f0_vals = nodes.values(|x| cfg.target.eval(x))?;
        let smoothed = SmoothedTarget::new(&dilate(&cfg.kernel, nu)?, &cfg.target, DEFAULT_INNER_POINTS)?;
        let smooth_vals = nodes.values(|x| smoothed.eval(x))?;
        let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
        let smoothing_error = nodes.lp_norm_of_values(&diff(&smooth_vals, &f0_vals), p);
        let quadrature_tolerance = {
            let coarse = quad.with_points((quad.points / 2).max(16)).nodes(d)?;
            let c0 = coarse.values(|x| cfg.target.eval(x))?;
            let cs = coarse.values(|x| smoothed.eval(x))?;
            (coarse.lp_norm_of_values(&diff(&cs, &c0), p) - smoothing_error).abs()
        };
        let sampling_cap = 2.0 * nu.powf(d as f64 / conjugate(p)) * inputs.phi_norm_p;

        let trials: Vec<(f64, f64)> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| -> Result<(f64, f64)> {
                let seed = derive_seed(cfg.seed, &[m as u64, t as u64]);
                let mixture = maurey_sample(&cfg.target, &cfg.kernel, nu, m, seed)?;
                let vals: Vec<f64> = (0..nodes.len()).map(|i| mixture.eval(nodes.points.get(i))).collect();
                let total = nodes.lp_norm_of_values(&diff(&vals, &f0_vals), p);
                let sampling = nodes.lp_norm_of_values(&diff(&vals, &smooth_vals), p);
                Ok((total, sampling))
            })
            .collect::<Result<_>>()?;
        let errors: Vec<f64> = trials.iter().map(|t| t.0).collect();
        let sampling: Vec<f64> = trials.iter().map(|t| t.1).collect();
        let mean_error = pairwise_mean(&errors);
        let std_dev = if errors.len() > 1 {
            let sq: Vec<f64> = errors.iter().map(|e| (e - mean_error).powi(2)).collect();
            (pairwise_sum(&sq) / (errors.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let slack = 1e-9 + quadrature_tolerance;
        let decomposition_holds = trials
            .iter()
            .filter(|(t, s)| *t <= s + smoothing_error + slack)
            .count();
        let sampling_cap_holds = sampling.iter().filter(|s| **s <= sampling_cap + slack).count();
        rows.push(ApproxRow {
            m,
            nu,
            mean_error,
            std_error: std_dev / (errors.len() as f64).sqrt(),
            std_dev,
            best_error: errors.iter().cloned().fold(f64::INFINITY, f64::min),
            bound: constants.bound(m),
            smoothing_error,
            mean_sampling_error: pairwise_mean(&sampling),
            sampling_cap,
            quadrature_tolerance,
            decomposition_holds,
            sampling_cap_holds,
            trials: cfg.trials,
        });
    }

    let rate_rows = rows
        .iter()
        .map(|r| RateRow {
            size: r.m as u64,
            mean_error: r.mean_error,
            std_error: r.std_error,
            bound: Some(r.bound),
            within_bound: Some(r.mean_error <= r.bound + r.quadrature_tolerance),
        })
        .collect();
    let mut report = RateReport::assemble(
        rate_rows,
        constants.exponent,
        Some(constants.k),
        cfg.slope_tolerance,
        certified,
        true,
    )?;
    report.provenance.seeds = vec![cfg.seed];
    Ok(ApproxRateReport {
        report,
        rows,
        constants,
        inputs,
        kernel: cfg.kernel.name().to_string(),
        target: cfg.target.name().to_string(),
    })
}
