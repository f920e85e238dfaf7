//! Shared numerics: Lᵖ distances, convolution φ_ν∗f₀, the smoothing error
//! and empirical operators.

pub mod measure;
pub mod quadrature;

use std::f64::consts::PI;

use serde::Serialize;

pub use measure::{empirical_mean, expectation, EmpiricalMeasure};
pub use quadrature::{Measured, QuadratureMode, QuadratureSpec};

use crate::error::{invalid, Error, Result};
use crate::kernels::{check_p, dilate, kernel_moment, DilatedKernel, KernelDensity};
use crate::targets::{resolve_smoothness, SmoothnessSpec, TargetDensity};

/// Inner quadrature points per axis used when φ_ν∗f₀ has no closed form.
pub const DEFAULT_INNER_POINTS: usize = 64;

/// [∫|f − g|ᵖ]^{1/p} over the quadrature box.
pub fn lp_distance<F, G>(f: F, g: G, p: f64, dim: usize, quad: &QuadratureSpec) -> Result<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    check_p(p)?;
    let integral = quad.integrate(dim, |x| (f(x) - g(x)).abs().powf(p))?;
    Ok(integral.max(0.0).powf(1.0 / p))
}

/// As [`lp_distance`], with the tolerance of the quadrature carried through
/// the p-th root.
pub fn lp_distance_measured<F, G>(
    f: F,
    g: G,
    p: f64,
    dim: usize,
    quad: &QuadratureSpec,
) -> Result<Measured>
where
    F: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> f64 + Sync,
{
    check_p(p)?;
    let m = quad.integrate_measured(dim, |x| (f(x) - g(x)).abs().powf(p))?;
    Ok(root_measured(m, p))
}

pub(crate) fn root_measured(m: Measured, p: f64) -> Measured {
    let value = m.value.max(0.0).powf(1.0 / p);
    let low = (m.value - m.tolerance).max(0.0).powf(1.0 / p);
    let high = (m.value + m.tolerance).max(0.0).powf(1.0 / p);
    Measured {
        value,
        tolerance: (value - low).max(high - value),
    }
}

/// Evaluator for φ_ν∗f₀. Uses the closed form for a Gaussian kernel against
/// Gaussian-mixture targets; otherwise a fixed Gauss–Legendre rule over the
/// support box of φ_ν.
#[derive(Debug, Clone)]
pub struct SmoothedTarget {
    f0: TargetDensity,
    repr: SmoothedRepr,
}

#[derive(Debug, Clone)]
enum SmoothedRepr {
    /// (weight, mean, variance) of each Gaussian component.
    Closed(Vec<(f64, Vec<f64>, f64)>),
    /// Shifts zᵢ (flattened) and weights wᵢφ_ν(zᵢ).
    Rule { shifts: Vec<f64>, weights: Vec<f64> },
}

impl SmoothedTarget {
    pub fn new(kernel: &DilatedKernel, f0: &TargetDensity, inner_points: usize) -> Result<Self> {
        if kernel.dim() != f0.dim() {
            return Err(invalid("dim", "kernel and target dimensions differ"));
        }
        if kernel.base.is_gaussian() {
            if let Some(components) = f0.gaussian_components() {
                let extra = kernel.nu.powi(-2);
                let closed = components
                    .into_iter()
                    .map(|(w, m, sd)| (w, m, sd * sd + extra))
                    .collect();
                return Ok(Self {
                    f0: f0.clone(),
                    repr: SmoothedRepr::Closed(closed),
                });
            }
        }
        let nodes = kernel.support_quadrature(inner_points).nodes(kernel.dim())?;
        let mut shifts = Vec::new();
        let mut weights = Vec::new();
        for (z, w) in nodes.points.iter().zip(&nodes.weights) {
            let k = kernel.eval(z);
            if k != 0.0 {
                shifts.extend_from_slice(z);
                weights.push(w * k);
            }
        }
        Ok(Self {
            f0: f0.clone(),
            repr: SmoothedRepr::Rule { shifts, weights },
        })
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.repr, SmoothedRepr::Closed(_))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let d = x.len();
        match &self.repr {
            SmoothedRepr::Closed(components) => components
                .iter()
                .map(|(w, m, var)| {
                    let r2: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                    w * (-0.5 * r2 / var).exp() * (2.0 * PI * var).powf(-0.5 * d as f64)
                })
                .sum(),
            SmoothedRepr::Rule { shifts, weights } => {
                let mut buf = [0.0f64; 8];
                let mut heap;
                let y: &mut [f64] = if d <= buf.len() {
                    &mut buf[..d]
                } else {
                    heap = vec![0.0; d];
                    &mut heap
                };
                let mut acc = 0.0;
                for (z, w) in shifts.chunks_exact(d).zip(weights) {
                    for k in 0..d {
                        y[k] = x[k] - z[k];
                    }
                    acc += w * self.f0.eval(y);
                }
                acc
            }
        }
    }
}

/// (φ_ν∗f₀)(x).
pub fn convolve(
    kernel_nu: &DilatedKernel,
    f0: &TargetDensity,
    x: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    if x.len() != f0.dim() {
        return Err(invalid("x", "dimension mismatch"));
    }
    let s = SmoothedTarget::new(kernel_nu, f0, quad.points)?;
    let v = s.eval(x);
    if !v.is_finite() {
        return Err(Error::NumericalFailure {
            context: "convolve",
            point: x.to_vec(),
            detail: format!("convolution evaluated to {v}"),
        });
    }
    Ok(v.max(0.0))
}

/// Truncation box for norms involving φ_ν and f₀.
pub fn default_quadrature(f0: &TargetDensity, kernel: &KernelDensity, nu: f64) -> QuadratureSpec {
    let rt = f0.effective_support_radius();
    let rk = kernel.axis_radius() / nu;
    let radius = (rt.max(rk) + 6.0 / nu).max(rt + rk);
    QuadratureSpec::default_for(f0.dim(), radius)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SmoothingError {
    /// ‖φ_ν∗f₀ − f₀‖_p
    pub measured: Measured,
    /// K₁K₂ν^{−α}
    pub bound: f64,
    pub k1: f64,
    pub k2: f64,
    pub alpha: f64,
    pub nu: f64,
}

impl SmoothingError {
    pub fn within_bound(&self) -> bool {
        self.measured.value <= self.bound + self.measured.tolerance
    }
}

/// Smoothing error with K₂ resolved from the target (closed form or quadrature).
pub fn smoothing_error(
    f0: &TargetDensity,
    kernel: &KernelDensity,
    nu: f64,
    p: f64,
    quad: &QuadratureSpec,
) -> Result<SmoothingError> {
    let smooth = resolve_smoothness(f0, p, &f0_quadrature(f0, quad))?;
    smoothing_error_with(f0, kernel, nu, p, &smooth, quad)
}

fn f0_quadrature(f0: &TargetDensity, quad: &QuadratureSpec) -> QuadratureSpec {
    let r = f0.effective_support_radius();
    if quad.inner_radius() >= r {
        quad.clone()
    } else {
        QuadratureSpec::default_for(f0.dim(), r)
    }
}

/// Smoothing error against a given smoothness descriptor; fails with
/// `UnknownConstant` when K₂ is missing (fit it with `estimate_smoothness`).
pub fn smoothing_error_with(
    f0: &TargetDensity,
    kernel: &KernelDensity,
    nu: f64,
    p: f64,
    smooth: &SmoothnessSpec,
    quad: &QuadratureSpec,
) -> Result<SmoothingError> {
    check_p(p)?;
    let k2 = smooth.require_k2()?;
    let k = dilate(kernel, nu)?;
    let k1 = kernel_moment(
        kernel,
        smooth.alpha,
        &QuadratureSpec::symmetric(kernel.axis_radius(), 4096.min(quad.points.max(512))),
    )?;
    let smoothed = SmoothedTarget::new(&k, f0, DEFAULT_INNER_POINTS)?;
    let measured = lp_distance_measured(|x| smoothed.eval(x), |x| f0.eval(x), p, f0.dim(), quad)?;
    Ok(SmoothingError {
        measured,
        bound: k1 * k2 * nu.powf(-smooth.alpha),
        k1,
        k2,
        alpha: smooth.alpha,
        nu,
    })
}

/// Least-squares fit of log y on log x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn loglog_ols(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(invalid("fit", "x and y lengths differ"));
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(invalid("fit", "all x values coincide"));
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelFamily;

    #[test]
    fn distance_examples() {
        let q = QuadratureSpec::symmetric(10.0, 4096);
        let g = TargetDensity::standard_gaussian(1);
        assert_eq!(lp_distance(|x| g.eval(x), |x| g.eval(x), 2.0, 1, &q).unwrap(), 0.0);
        let shifted = TargetDensity::gaussian(vec![0.5], 1.0).unwrap();
        let d = lp_distance(|x| g.eval(x), |x| shifted.eval(x), 2.0, 1, &q).unwrap();
        let phi_sq = 1.0 / (2.0 * PI.sqrt());
        let exact = (2.0 * phi_sq * (1.0 - (-0.25f64 / 4.0).exp())).sqrt();
        assert!((d - exact).abs() < 1e-10, "{d} vs {exact}");
        assert!((d - 0.186).abs() < 2e-3);
    }

    #[test]
    fn nan_is_reported_with_point() {
        let q = QuadratureSpec::symmetric(1.0, 64);
        let err = lp_distance(|x| if x[0] > 0.5 { f64::NAN } else { 0.0 }, |_| 0.0, 2.0, 1, &q);
        match err {
            Err(Error::NumericalFailure { point, .. }) => assert!(point[0] > 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gaussian_convolution_closed_form_matches_quadrature() {
        let f0 = TargetDensity::standard_gaussian(1);
        let k = dilate(&KernelDensity::gaussian(1), 1.0).unwrap();
        let closed = SmoothedTarget::new(&k, &f0, 64).unwrap();
        assert!(closed.is_closed_form());
        let custom = KernelDensity::custom(
            crate::kernels::CustomKernel {
                name: "gauss-copy".into(),
                eval: std::sync::Arc::new(|x: &[f64]| (-0.5 * x[0] * x[0]).exp() / (2.0 * PI).sqrt()),
                axis_radius: 8.5,
                bounded: false,
                sup_norm: 1.0 / (2.0 * PI).sqrt(),
                symmetric: true,
            },
            1,
        )
        .unwrap();
        let kq = dilate(&custom, 1.0).unwrap();
        let numeric = SmoothedTarget::new(&kq, &f0, 256).unwrap();
        for x in [0.0, 0.7, -2.0] {
            let exact = (-x * x / 4.0f64).exp() / (4.0 * PI).sqrt();
            assert!((closed.eval(&[x]) - exact).abs() < 1e-14);
            assert!((numeric.eval(&[x]) - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn convolution_limit_and_mass() {
        let f0 = TargetDensity::standard_gaussian(1);
        let q = QuadratureSpec::symmetric(10.0, 256);
        let k = dilate(&KernelDensity::gaussian(1), 64.0).unwrap();
        let v = convolve(&k, &f0, &[0.0], &q).unwrap();
        assert!((v - f0.eval(&[0.0])).abs() < 1e-3);
        let box_target = TargetDensity::uniform_box(1, 1.0, 0.25).unwrap();
        let kernel = KernelDensity::new(KernelFamily::Epanechnikov, 1).unwrap();
        let k = dilate(&kernel, 4.0).unwrap();
        let s = SmoothedTarget::new(&k, &box_target, 64).unwrap();
        let mass = QuadratureSpec::symmetric(1.0, 1 << 14).integrate(1, |x| s.eval(x)).unwrap();
        assert!((mass - 1.0).abs() < 1e-5, "{mass}");
    }

    #[test]
    fn smoothing_error_examples() {
        let f0 = TargetDensity::standard_gaussian(1);
        let kernel = KernelDensity::gaussian(1);
        let mut last = f64::INFINITY;
        for nu in [1.0, 2.0, 4.0, 8.0, 16.0, 32.0] {
            let q = default_quadrature(&f0, &kernel, nu);
            let e = smoothing_error(&f0, &kernel, nu, 2.0, &q).unwrap();
            assert!(e.within_bound(), "nu={nu}: {:?}", e);
            assert!(e.measured.value <= last);
            last = e.measured.value;
            assert!((e.k1 - (2.0 / PI).sqrt()).abs() < 1e-12);
            assert!((e.k2 - (4.0 * PI.sqrt()).powf(-0.5)).abs() < 1e-9);
        }
    }

    #[test]
    fn ols_recovers_power_law() {
        let xs: Vec<f64> = (1..10).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-0.5)).collect();
        let fit = loglog_ols(&xs, &ys).unwrap();
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept.exp() - 3.0).abs() < 1e-12);
        assert!(loglog_ols(&[1.0], &[1.0]).is_err());
    }
}
