//! Base kernel densities φ, their dilations φ_ν(x) = ν^d φ(νx), and the
//! analytic constants consumed by the rate bounds.
//!
//! Catalogued kernels are products of one-dimensional profiles, so d > 1
//! kernels factor over the axes (the Gaussian is also radial). A custom kernel
//! can be supplied through [`CustomKernel`]; it carries no closed-form hooks.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, ln_gamma};

use crate::analysis::quadrature::QuadratureSpec;
use crate::error::{invalid, Error, Result};
use crate::points::euclidean_norm;

/// Per-axis truncation radius for the Gaussian; the tail mass beyond it is
/// below 1e-16.
pub const GAUSSIAN_AXIS_RADIUS: f64 = 8.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Gaussian,
    /// Uniform box on [-1/2, 1/2].
    Uniform,
    /// (1 - |t|)₊ on [-1, 1].
    Triangular,
    /// (3/4)(1 - t²)₊ on [-1, 1].
    Epanechnikov,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 4] = [
        KernelFamily::Gaussian,
        KernelFamily::Uniform,
        KernelFamily::Triangular,
        KernelFamily::Epanechnikov,
    ];

    pub fn from_name(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "uniform" => Ok(Self::Uniform),
            "triangular" => Ok(Self::Triangular),
            "epanechnikov" => Ok(Self::Epanechnikov),
            other => Err(invalid(
                "kernel.name",
                format!(
                    "unknown kernel `{other}` (expected gaussian | uniform | triangular | epanechnikov)"
                ),
            )),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Uniform => "uniform",
            Self::Triangular => "triangular",
            Self::Epanechnikov => "epanechnikov",
        }
    }

    #[inline]
    fn profile(self, t: f64) -> f64 {
        match self {
            Self::Gaussian => (-0.5 * t * t).exp() / (2.0 * PI).sqrt(),
            Self::Uniform => {
                if t.abs() <= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Triangular => (1.0 - t.abs()).max(0.0),
            Self::Epanechnikov => {
                if t.abs() < 1.0 {
                    0.75 * (1.0 - t * t)
                } else {
                    0.0
                }
            }
        }
    }

    fn half_width(self) -> Option<f64> {
        match self {
            Self::Gaussian => None,
            Self::Uniform => Some(0.5),
            Self::Triangular | Self::Epanechnikov => Some(1.0),
        }
    }

    fn sup_1d(self) -> f64 {
        match self {
            Self::Gaussian => 1.0 / (2.0 * PI).sqrt(),
            Self::Uniform | Self::Triangular => 1.0,
            Self::Epanechnikov => 0.75,
        }
    }

    fn lp_norm_1d(self, p: f64) -> f64 {
        let integral = match self {
            Self::Gaussian => (2.0 * PI).powf(-0.5 * p) * (2.0 * PI / p).sqrt(),
            Self::Uniform => 1.0,
            Self::Triangular => 2.0 / (p + 1.0),
            Self::Epanechnikov => {
                // ∫(1 - t²)^p dt = B(1/2, p + 1)
                let beta = (ln_gamma(0.5) + ln_gamma(p + 1.0) - ln_gamma(p + 1.5)).exp();
                0.75f64.powf(p) * beta
            }
        };
        integral.powf(1.0 / p)
    }

    fn abs_moment_1d(self, alpha: f64) -> f64 {
        match self {
            Self::Gaussian => 2f64.powf(0.5 * alpha) * gamma(0.5 * (alpha + 1.0)) / PI.sqrt(),
            Self::Uniform => 0.5f64.powf(alpha) / (alpha + 1.0),
            Self::Triangular => 2.0 / ((alpha + 1.0) * (alpha + 2.0)),
            Self::Epanechnikov => 3.0 / ((alpha + 1.0) * (alpha + 3.0)),
        }
    }

    /// (φ ∗ φ)(t) for the one-dimensional profile.
    fn self_convolution_1d(self, t: f64) -> f64 {
        let a = t.abs();
        match self {
            Self::Gaussian => (-0.25 * t * t).exp() / (2.0 * PI.sqrt()),
            // box ∗ box = triangle
            Self::Uniform => (1.0 - a).max(0.0),
            // triangle = box ∗ box, so this is the centred cubic B-spline
            Self::Triangular => {
                if a <= 1.0 {
                    2.0 / 3.0 - a * a + 0.5 * a * a * a
                } else if a <= 2.0 {
                    (2.0 - a).powi(3) / 6.0
                } else {
                    0.0
                }
            }
            Self::Epanechnikov => {
                if a <= 2.0 {
                    3.0 / 160.0 * (2.0 - a).powi(3) * (a * a + 6.0 * a + 4.0)
                } else {
                    0.0
                }
            }
        }
    }
}

/// A user-supplied base density without closed-form hooks.
pub struct CustomKernel {
    pub name: String,
    pub eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    /// Per-axis half-width of the (effective) support.
    pub axis_radius: f64,
    pub bounded: bool,
    pub sup_norm: f64,
    pub symmetric: bool,
}

#[derive(Clone)]
enum Shape {
    Family(KernelFamily),
    Custom(Arc<CustomKernel>),
}

/// A base density φ on ℝᵈ with its analytic metadata.
#[derive(Clone)]
pub struct KernelDensity {
    shape: Shape,
    dim: usize,
    vc_dim: f64,
}

impl fmt::Debug for KernelDensity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelDensity")
            .field("name", &self.name())
            .field("dim", &self.dim)
            .field("vc_dim", &self.vc_dim)
            .finish()
    }
}

/// Default VC-dimension constant: 2(d + 1). It is a configuration value used
/// only in diagnostic bounds, not a derived quantity.
pub fn default_vc_dim(dim: usize) -> f64 {
    2.0 * (dim as f64 + 1.0)
}

impl KernelDensity {
    pub fn new(family: KernelFamily, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("kernel.dim", "dimension must be positive"));
        }
        Ok(Self {
            shape: Shape::Family(family),
            dim,
            vc_dim: default_vc_dim(dim),
        })
    }

    pub fn from_name(name: &str, dim: usize) -> Result<Self> {
        Self::new(KernelFamily::from_name(name)?, dim)
    }

    pub fn gaussian(dim: usize) -> Self {
        Self::new(KernelFamily::Gaussian, dim).expect("positive dimension")
    }

    pub fn custom(kernel: CustomKernel, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("kernel.dim", "dimension must be positive"));
        }
        if !(kernel.axis_radius > 0.0 && kernel.sup_norm > 0.0) {
            return Err(invalid("kernel", "radius and sup norm must be positive"));
        }
        Ok(Self {
            shape: Shape::Custom(Arc::new(kernel)),
            dim,
            vc_dim: default_vc_dim(dim),
        })
    }

    pub fn with_vc_dim(mut self, vc_dim: f64) -> Result<Self> {
        if !(vc_dim.is_finite() && vc_dim > 0.0) {
            return Err(invalid("kernel.vc_dim", format!("must be positive, got {vc_dim}")));
        }
        self.vc_dim = vc_dim;
        Ok(self)
    }

    pub fn family(&self) -> Option<KernelFamily> {
        match &self.shape {
            Shape::Family(f) => Some(*f),
            Shape::Custom(_) => None,
        }
    }

    pub fn is_gaussian(&self) -> bool {
        self.family() == Some(KernelFamily::Gaussian)
    }

    pub fn name(&self) -> &str {
        match &self.shape {
            Shape::Family(f) => f.name(),
            Shape::Custom(c) => &c.name,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vc_dim(&self) -> f64 {
        self.vc_dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.eval_scaled(x, 1.0, None)
    }

    /// φ(scale · (x − shift)), without allocating for catalogued kernels.
    #[inline]
    pub fn eval_scaled(&self, x: &[f64], scale: f64, shift: Option<&[f64]>) -> f64 {
        match &self.shape {
            Shape::Family(KernelFamily::Gaussian) => {
                let mut r2 = 0.0;
                for (i, xi) in x.iter().enumerate() {
                    let t = scale * (xi - shift.map_or(0.0, |s| s[i]));
                    r2 += t * t;
                }
                (-0.5 * r2).exp() * (2.0 * PI).powf(-0.5 * self.dim as f64)
            }
            Shape::Family(f) => {
                let mut v = 1.0;
                for (i, xi) in x.iter().enumerate() {
                    v *= f.profile(scale * (xi - shift.map_or(0.0, |s| s[i])));
                    if v == 0.0 {
                        break;
                    }
                }
                v
            }
            Shape::Custom(c) => {
                let y: Vec<f64> = x
                    .iter()
                    .enumerate()
                    .map(|(i, xi)| scale * (xi - shift.map_or(0.0, |s| s[i])))
                    .collect();
                (c.eval)(&y)
            }
        }
    }

    /// Euclidean radius of the support, `None` when unbounded.
    pub fn support_radius(&self) -> Option<f64> {
        let axis = match &self.shape {
            Shape::Family(f) => f.half_width()?,
            Shape::Custom(c) if c.bounded => c.axis_radius,
            Shape::Custom(_) => return None,
        };
        Some(axis * (self.dim as f64).sqrt())
    }

    /// Per-axis half-width used to truncate integrals involving φ.
    pub fn axis_radius(&self) -> f64 {
        match &self.shape {
            Shape::Family(f) => f.half_width().unwrap_or(GAUSSIAN_AXIS_RADIUS),
            Shape::Custom(c) => c.axis_radius,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match &self.shape {
            Shape::Family(f) => f.sup_1d().powi(self.dim as i32),
            Shape::Custom(c) => c.sup_norm,
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.shape {
            Shape::Family(_) => true,
            Shape::Custom(c) => c.symmetric,
        }
    }

    /// Closed-form ‖φ‖_p.
    pub fn lp_norm(&self, p: f64) -> Option<f64> {
        match &self.shape {
            Shape::Family(f) => Some(f.lp_norm_1d(p).powi(self.dim as i32)),
            Shape::Custom(_) => None,
        }
    }

    /// Closed-form ∫‖x‖₂^α φ(x)dx, when available (all families for d = 1,
    /// the Gaussian in any dimension).
    pub fn moment(&self, alpha: f64) -> Option<f64> {
        match (&self.shape, self.dim) {
            (Shape::Family(f), 1) => Some(f.abs_moment_1d(alpha)),
            (Shape::Family(KernelFamily::Gaussian), d) => {
                let d = d as f64;
                Some(
                    2f64.powf(0.5 * alpha)
                        * (ln_gamma(0.5 * (d + alpha)) - ln_gamma(0.5 * d)).exp(),
                )
            }
            _ => None,
        }
    }

    /// Closed-form (φ ∗ φ)(δ).
    pub fn self_convolution_closed(&self, delta: &[f64]) -> Option<f64> {
        match &self.shape {
            Shape::Family(f) => Some(delta.iter().map(|&t| f.self_convolution_1d(t)).product()),
            Shape::Custom(_) => None,
        }
    }
}

/// The dilation φ_ν(x) = ν^d φ(νx).
#[derive(Debug, Clone)]
pub struct DilatedKernel {
    pub base: KernelDensity,
    pub nu: f64,
}

impl DilatedKernel {
    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// ν^d, the mass-preserving prefactor.
    pub fn prefactor(&self) -> f64 {
        self.nu.powi(self.base.dim() as i32)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.prefactor() * self.base.eval_scaled(x, self.nu, None)
    }

    /// φ_ν(x − μ).
    pub fn eval_at(&self, x: &[f64], mu: &[f64]) -> f64 {
        self.prefactor() * self.base.eval_scaled(x, self.nu, Some(mu))
    }

    pub fn axis_radius(&self) -> f64 {
        self.base.axis_radius() / self.nu
    }

    pub fn sup_norm(&self) -> f64 {
        self.prefactor() * self.base.sup_norm()
    }

    /// Quadrature rule on the per-axis support box of φ_ν.
    pub fn support_quadrature(&self, points: usize) -> QuadratureSpec {
        QuadratureSpec::symmetric(self.axis_radius(), points)
    }
}

pub(crate) fn check_nu(nu: f64) -> Result<()> {
    if nu.is_finite() && nu > 0.0 {
        Ok(())
    } else {
        Err(invalid("nu", format!("scale must be positive and finite, got {nu}")))
    }
}

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(invalid("p", format!("exponent must lie in (1, ∞), got {p}")))
    }
}

pub fn dilate(kernel: &KernelDensity, nu: f64) -> Result<DilatedKernel> {
    check_nu(nu)?;
    Ok(DilatedKernel {
        base: kernel.clone(),
        nu,
    })
}

/// ∫‖x‖₂^α φ(x)dx. Uses the closed form when available, else quadrature.
pub fn kernel_moment(kernel: &KernelDensity, alpha: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_alpha(alpha)?;
    match kernel.moment(alpha) {
        Some(v) => Ok(v),
        None => moment_by_quadrature(kernel, alpha, quad),
    }
}

/// ∫‖x‖₂^α φ(x)dx by quadrature only.
pub fn moment_by_quadrature(
    kernel: &KernelDensity,
    alpha: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_alpha(alpha)?;
    let v = quad.integrate(kernel.dim(), |x| euclidean_norm(x).powf(alpha) * kernel.eval(x))?;
    if !v.is_finite() || v > 1e300 {
        return Err(Error::NumericalFailure {
            context: "kernel_moment",
            point: vec![alpha],
            detail: format!("moment estimate {v} over [{}, {}]", quad.lower, quad.upper),
        });
    }
    Ok(v)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(invalid("alpha", format!("moment order must be positive, got {alpha}")))
    }
}

/// ‖φ_ν‖_p by quadrature over `quad`.
pub fn dilated_lp_norm(
    kernel: &KernelDensity,
    nu: f64,
    p: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_p(p)?;
    let k = dilate(kernel, nu)?;
    let integral = quad.integrate(kernel.dim(), |x| k.eval(x).powf(p))?;
    Ok(integral.powf(1.0 / p))
}

/// ‖φ‖_p, closed form when available, else quadrature on the kernel's box.
pub fn kernel_lp_norm(kernel: &KernelDensity, p: f64, points: usize) -> Result<f64> {
    check_p(p)?;
    match kernel.lp_norm(p) {
        Some(v) => Ok(v),
        None => dilated_lp_norm(
            kernel,
            1.0,
            p,
            &QuadratureSpec::symmetric(kernel.axis_radius(), points),
        ),
    }
}

/// (φ_ν ∗ φ_ν)(δ). Only symmetric kernels are accepted.
pub fn self_convolution(
    kernel: &KernelDensity,
    nu: f64,
    delta: &[f64],
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_nu(nu)?;
    if !kernel.is_symmetric() {
        return Err(Error::UnsupportedKernel(format!(
            "`{}` is not symmetric; the Gram expansion requires φ(x) = φ(-x)",
            kernel.name()
        )));
    }
    if delta.len() != kernel.dim() {
        return Err(invalid("delta", "dimension mismatch"));
    }
    let scaled: Vec<f64> = delta.iter().map(|t| nu * t).collect();
    if let Some(v) = kernel.self_convolution_closed(&scaled) {
        return Ok(nu.powi(kernel.dim() as i32) * v);
    }
    let k = dilate(kernel, nu)?;
    quad.integrate(kernel.dim(), |y| k.eval(y) * k.eval_at(delta, y))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q1(radius: f64) -> QuadratureSpec {
        QuadratureSpec::symmetric(radius, 4096)
    }

    #[test]
    fn dilation_examples() {
        let g = KernelDensity::gaussian(1);
        let k1 = dilate(&g, 1.0).unwrap();
        assert_eq!(k1.eval(&[0.3]), g.eval(&[0.3]));
        let k2 = dilate(&g, 2.0).unwrap();
        assert!((k2.eval(&[0.0]) - 0.797_884_560_802_865_4).abs() < 1e-12);
        let u = KernelDensity::new(KernelFamily::Uniform, 1).unwrap();
        assert_eq!(dilate(&u, 4.0).unwrap().eval(&[0.2]), 0.0);
        assert!(dilate(&g, 0.0).is_err());
        assert!(dilate(&g, -1.0).is_err());
    }

    #[test]
    fn every_kernel_integrates_to_one_and_respects_metadata() {
        for family in KernelFamily::ALL {
            for dim in [1, 2] {
                let k = KernelDensity::new(family, dim).unwrap();
                let q = QuadratureSpec::symmetric(k.axis_radius(), if dim == 1 { 4096 } else { 512 });
                let mass = q.integrate(dim, |x| k.eval(x)).unwrap();
                assert!((mass - 1.0).abs() < 1e-6, "{family:?} d={dim}: {mass}");
                let nodes = QuadratureSpec::symmetric(k.axis_radius() * 1.5, 64).nodes(dim).unwrap();
                for x in nodes.points.iter() {
                    let v = k.eval(x);
                    assert!(v >= 0.0 && v <= k.sup_norm() * (1.0 + 1e-12));
                    if let Some(r) = k.support_radius() {
                        if euclidean_norm(x) > r {
                            assert_eq!(v, 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn moment_examples() {
        let g = KernelDensity::gaussian(1);
        let q = q1(GAUSSIAN_AXIS_RADIUS);
        let m = kernel_moment(&g, 1.0, &q).unwrap();
        assert!((m - (2.0 / PI).sqrt()).abs() < 1e-12);
        let u = KernelDensity::new(KernelFamily::Uniform, 1).unwrap();
        assert!((kernel_moment(&u, 1.0, &q1(0.5)).unwrap() - 0.25).abs() < 1e-12);
        assert!(kernel_moment(&g, 0.0, &q).is_err());
    }

    #[test]
    fn closed_form_moments_match_quadrature() {
        for family in KernelFamily::ALL {
            let k = KernelDensity::new(family, 1).unwrap();
            let q = q1(k.axis_radius());
            for alpha in [0.3, 0.5, 1.0, 1.7] {
                let closed = k.moment(alpha).unwrap();
                let quad = moment_by_quadrature(&k, alpha, &q).unwrap();
                assert!((closed - quad).abs() / closed < 1e-4, "{family:?} {alpha}: {closed} vs {quad}");
            }
        }
        let g2 = KernelDensity::gaussian(2);
        let q = QuadratureSpec::symmetric(GAUSSIAN_AXIS_RADIUS, 512);
        let quad = moment_by_quadrature(&g2, 1.0, &q).unwrap();
        // E‖Z‖ for Z ~ N(0, I₂) is √(π/2)
        assert!((g2.moment(1.0).unwrap() - (PI / 2.0).sqrt()).abs() < 1e-12);
        assert!((quad - (PI / 2.0).sqrt()).abs() < 1e-4);
    }

    #[test]
    fn moment_scales_as_nu_to_minus_alpha() {
        let k = KernelDensity::new(KernelFamily::Epanechnikov, 1).unwrap();
        for nu in [0.25, 1.0, 4.0] {
            let kn = dilate(&k, nu).unwrap();
            let q = kn.support_quadrature(4096);
            let m = q.integrate(1, |y| y[0].abs().powf(0.7) * kn.eval(y)).unwrap();
            let expected = nu.powf(-0.7) * k.moment(0.7).unwrap();
            assert!((m - expected).abs() / expected < 1e-4);
        }
    }

    #[test]
    fn lp_norm_examples() {
        let g = KernelDensity::gaussian(1);
        let n1 = dilated_lp_norm(&g, 1.0, 2.0, &q1(GAUSSIAN_AXIS_RADIUS)).unwrap();
        assert!((n1 - 0.531_125_966_013_598_4).abs() < 1e-9);
        let n4 = dilated_lp_norm(&g, 4.0, 2.0, &q1(GAUSSIAN_AXIS_RADIUS / 4.0)).unwrap();
        assert!((n4 - 2.0 * 0.531_125_966_013_598_4).abs() < 1e-8);
        assert!(dilated_lp_norm(&g, 1.0, 1.0, &q1(8.0)).is_err());
    }

    #[test]
    fn closed_form_lp_norms_match_quadrature() {
        for family in KernelFamily::ALL {
            let k = KernelDensity::new(family, 1).unwrap();
            for p in [1.5, 2.0, 3.0] {
                let q = q1(k.axis_radius());
                let quad = dilated_lp_norm(&k, 1.0, p, &q).unwrap();
                let closed = k.lp_norm(p).unwrap();
                assert!((quad - closed).abs() / closed < 1e-7, "{family:?} p={p}");
            }
        }
    }

    #[test]
    fn self_convolution_examples() {
        let g = KernelDensity::gaussian(1);
        let q = q1(GAUSSIAN_AXIS_RADIUS);
        let v = self_convolution(&g, 1.0, &[0.0], &q).unwrap();
        assert!((v - 0.282_094_791_773_878_14).abs() < 1e-12);
        assert!(self_convolution(&g, 1.0, &[60.0], &q).unwrap() < 1e-300);
        let u = KernelDensity::new(KernelFamily::Uniform, 1).unwrap();
        assert!((self_convolution(&u, 1.0, &[0.0], &q1(0.5)).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn closed_form_self_convolutions_match_quadrature() {
        for family in KernelFamily::ALL {
            let k = KernelDensity::new(family, 1).unwrap();
            let kn = dilate(&k, 1.0).unwrap();
            let q = QuadratureSpec::symmetric(k.axis_radius(), 8192);
            for delta in [0.0, 0.3, 0.77, 1.4] {
                let closed = self_convolution(&k, 1.0, &[delta], &q).unwrap();
                let quad = q.integrate(1, |y| kn.eval(y) * kn.eval(&[delta - y[0]])).unwrap();
                let tol = if family == KernelFamily::Uniform { 1e-4 } else { 1e-5 };
                assert!((closed - quad).abs() < tol, "{family:?} δ={delta}: {closed} vs {quad}");
                let mirrored = self_convolution(&k, 1.0, &[-delta], &q).unwrap();
                assert_eq!(closed, mirrored);
                assert!(closed <= self_convolution(&k, 1.0, &[0.0], &q).unwrap());
            }
        }
    }

    #[test]
    fn asymmetric_kernel_is_rejected() {
        let k = KernelDensity::custom(
            CustomKernel {
                name: "exponential".into(),
                eval: Arc::new(|x: &[f64]| if x[0] >= 0.0 { (-x[0]).exp() } else { 0.0 }),
                axis_radius: 40.0,
                bounded: false,
                sup_norm: 1.0,
                symmetric: false,
            },
            1,
        )
        .unwrap();
        let err = self_convolution(&k, 1.0, &[0.0], &q1(40.0)).unwrap_err();
        assert!(matches!(err, Error::UnsupportedKernel(_)));
    }

    #[test]
    fn vc_dim_is_configurable() {
        let k = KernelDensity::gaussian(1).with_vc_dim(3.0).unwrap();
        assert_eq!(k.vc_dim(), 3.0);
        assert!(KernelDensity::gaussian(1).with_vc_dim(0.0).is_err());
        assert!(KernelDensity::from_name("cosine", 1).is_err());
    }
}
