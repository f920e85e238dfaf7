//! Property checks run by the `invariants` experiment kind.

use serde::Serialize;

use crate::analysis::quadrature::QuadratureSpec;
use crate::analysis::{default_quadrature, smoothing_error, SmoothedTarget, DEFAULT_INNER_POINTS};
use crate::approx::{conjugate, rate_exponent};
use crate::error::Result;
use crate::estimate::frank_wolfe::fit_weights_frank_wolfe;
use crate::estimate::{gram_matrix, quadratic_risk, SymMatrix};
use crate::kernels::{dilate, dilated_lp_norm, kernel_lp_norm, KernelDensity};
use crate::rng::{derive_seed, rng_from_seed};
use crate::targets::{resolve_smoothness, translation_modulus, TargetDensity};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// ‖φ_ν‖_p = ν^{d/q}‖φ‖_p for p ∈ {1.5, 2, 3}, ν ∈ {¼, 1, 4}.
pub fn dilation_identity(kernel: &KernelDensity, points: usize) -> Result<CheckOutcome> {
    let d = kernel.dim() as f64;
    let mut worst = 0.0f64;
    for p in [1.5, 2.0, 3.0] {
        let base = kernel_lp_norm(kernel, p, points)?;
        for nu in [0.25, 1.0, 4.0] {
            let quad = QuadratureSpec::symmetric(kernel.axis_radius() / nu, points);
            let measured = dilated_lp_norm(kernel, nu, p, &quad)?;
            let predicted = nu.powf(d / conjugate(p)) * base;
            worst = worst.max((measured - predicted).abs() / measured);
        }
    }
    Ok(outcome(
        "dilation_identity",
        worst <= 1e-5,
        format!("max relative deviation {worst:e}"),
    ))
}

/// ‖φ_ν∗f₀ − f₀‖_p ≤ K₁K₂ν^{−α} on ν ∈ {1, …, 32}.
pub fn smoothing_bound(
    f0: &TargetDensity,
    kernel: &KernelDensity,
    p: f64,
    points: Option<usize>,
) -> Result<CheckOutcome> {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for nu in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
        let mut quad = default_quadrature(f0, kernel, nu);
        if let Some(n) = points {
            quad = quad.with_points(n);
        }
        let e = smoothing_error(f0, kernel, nu, p, &quad)?;
        worst = worst.max(e.measured.value / e.bound);
        if e.measured.value > e.bound * (1.0 + 1e-3) + e.measured.tolerance {
            failures += 1;
        }
    }
    Ok(outcome(
        "smoothing_bound",
        failures == 0,
        format!("{failures} violations; max measured/bound {worst:.4}"),
    ))
}

/// ‖f₀(· − y) − f₀‖_p ≤ K₂‖y‖^α on 12 shifts along the first axis.
pub fn smoothness_inequality(f0: &TargetDensity, p: f64, points: usize) -> Result<CheckOutcome> {
    let r = f0.effective_support_radius();
    let spec = resolve_smoothness(f0, p, &QuadratureSpec::default_for(f0.dim(), r + 1.0))?;
    let k2 = spec.require_k2()?;
    let mut failures = 0;
    let mut worst = 0.0f64;
    for k in 0..12 {
        let t = 0.01 * 200f64.powf(k as f64 / 11.0);
        let mut y = vec![0.0; f0.dim()];
        y[0] = t;
        let quad = QuadratureSpec::default_for(f0.dim(), r + t + 1.0).with_points(points);
        let m = translation_modulus(f0, &y, p, &quad)?;
        let bound = k2 * t.powf(spec.alpha);
        worst = worst.max(m / bound);
        if m > bound * (1.0 + 1e-6) {
            failures += 1;
        }
    }
    Ok(outcome(
        "smoothness_inequality",
        failures == 0,
        format!("{failures} violations; α = {}, K₂ = {k2}, max modulus/bound {worst:.4}", spec.alpha),
    ))
}

/// Young-type bound ‖φ_ν∗f₀‖_p ≤ ‖φ_ν‖_p on five scales.
pub fn young_bound(f0: &TargetDensity, kernel: &KernelDensity, p: f64) -> Result<CheckOutcome> {
    let mut failures = 0;
    for nu in [0.5, 1.0, 2.0, 5.0, 11.0] {
        let quad = default_quadrature(f0, kernel, nu);
        let s = SmoothedTarget::new(&dilate(kernel, nu)?, f0, DEFAULT_INNER_POINTS)?;
        let norm = quad.integrate(f0.dim(), |x| s.eval(x).abs().powf(p))?.powf(1.0 / p);
        let cap = nu.powf(f0.dim() as f64 / conjugate(p)) * kernel_lp_norm(kernel, p, 4096)?;
        if norm > cap * (1.0 + 1e-6) {
            failures += 1;
        }
    }
    Ok(outcome("young_bound", failures == 0, format!("{failures} violations")))
}

/// Gram matrices on random locations are positive semidefinite.
pub fn gram_psd(f0: &TargetDensity, kernel: &KernelDensity, seed: u64) -> Result<CheckOutcome> {
    let mut worst = f64::INFINITY;
    for (i, nu) in [0.5, 2.0, 8.0].iter().enumerate() {
        let locs = f0.sample(8, derive_seed(seed, &[i as u64]));
        worst = worst.min(gram_matrix(&locs, kernel, *nu)?.min_eigenvalue());
    }
    Ok(outcome(
        "gram_psd",
        worst >= -1e-10,
        format!("min eigenvalue {worst:e}"),
    ))
}

/// Brute-force search on a simplex grid never beats a certified Frank–Wolfe
/// fit by more than ε.
pub fn frank_wolfe_certificate(seed: u64, instances: usize, step: f64) -> Result<CheckOutcome> {
    use rand::Rng as _;
    let mut violations = 0;
    let mut rng = rng_from_seed(seed);
    for _ in 0..instances {
        let m = 3;
        let a: Vec<f64> = (0..m * m).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                g[i * m + j] = (0..m).map(|k| a[k * m + i] * a[k * m + j]).sum();
            }
        }
        let g = SymMatrix::from_row_major(m, g)?;
        let b: Vec<f64> = (0..m).map(|_| rng.random::<f64>() - 0.5).collect();
        let eps = 1e-3;
        let fit = fit_weights_frank_wolfe(&g, &b, eps, 100_000)?;
        let steps = (1.0 / step).round() as usize;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let w = [i as f64 * step, j as f64 * step, (steps - i - j) as f64 * step];
                best = best.min(quadratic_risk(&g, &b, &w));
            }
        }
        if !fit.certified || best < fit.risk - eps - 1e-6 {
            violations += 1;
        }
    }
    Ok(outcome(
        "frank_wolfe_certificate",
        violations == 0,
        format!("{violations} of {instances} instances beaten"),
    ))
}

/// Both exponent branches agree at p = 2.
pub fn exponent_continuity(d: usize) -> Result<CheckOutcome> {
    let mut worst = 0.0f64;
    for alpha in [0.25, 0.5, 1.0] {
        let lo = rate_exponent(2.0 - 1e-9, alpha, d)?;
        let hi = rate_exponent(2.0 + 1e-9, alpha, d)?;
        worst = worst.max((lo - hi).abs());
    }
    Ok(outcome(
        "exponent_continuity",
        worst <= 1e-6,
        format!("max gap {worst:e}"),
    ))
}

/// The full battery for a kernel/target pair.
pub fn run_all(f0: &TargetDensity, kernel: &KernelDensity, seed: u64, points: Option<usize>) -> Result<Vec<CheckOutcome>> {
    let p = 2.0;
    let mut out = vec![
        dilation_identity(kernel, 8192)?,
        exponent_continuity(kernel.dim())?,
        gram_psd(f0, kernel, seed)?,
        frank_wolfe_certificate(seed, 5, 1e-2)?,
        young_bound(f0, kernel, p)?,
    ];
    let smoothness_points = points.unwrap_or(if f0.dim() == 1 { 8192 } else { 256 });
    match smoothness_inequality(f0, p, smoothness_points) {
        Ok(c) => out.push(c),
        Err(e) => out.push(outcome("smoothness_inequality", false, e.to_string())),
    }
    match smoothing_bound(f0, kernel, p, points) {
        Ok(c) => out.push(c),
        Err(e) => out.push(outcome("smoothing_bound", false, e.to_string())),
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_for_gaussian_pair() {
        let checks = run_all(&TargetDensity::standard_gaussian(1), &KernelDensity::gaussian(1), 3, None).unwrap();
        for c in &checks {
            assert!(c.passed, "{c:?}");
        }
        assert_eq!(checks.len(), 7);
    }
}
