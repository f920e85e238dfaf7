//! Synthetic target densities f₀ with exact samplers, and the smoothness
//! quantities that control the smoothing error: the Lᵖ translation modulus,
//! the W^{1,p} gradient constant and the fractional (Gagliardo) seminorm.

use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::analysis::loglog_ols;
use crate::analysis::quadrature::{pairwise_sum, Measured, QuadratureSpec};
use crate::error::{invalid, Error, Result};
use crate::kernels::{check_p, GAUSSIAN_AXIS_RADIUS};
use crate::points::{euclidean_norm, PointSet};
use crate::rng::{rng_from_seed, Rng};

/// Per-axis truncation radius of a unit-scale Laplace density.
pub const LAPLACE_AXIS_RADIUS: f64 = 36.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessKind {
    W1p,
    Wsp,
    Empirical,
}

/// Smoothness descriptor: ‖f₀(· − y) − f₀‖_p ≤ K₂‖y‖₂^α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessSpec {
    pub alpha: f64,
    pub k2: Option<f64>,
    pub kind: SmoothnessKind,
}

impl SmoothnessSpec {
    pub fn new(alpha: f64, k2: Option<f64>, kind: SmoothnessKind) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("smoothness order must lie in (0, 1], got {alpha}")));
        }
        if let Some(k) = k2 {
            if !(k.is_finite() && k > 0.0) {
                return Err(invalid("k2", format!("must be positive, got {k}")));
            }
        }
        Ok(Self { alpha, k2, kind })
    }

    pub fn require_k2(&self) -> Result<f64> {
        self.k2.ok_or(Error::UnknownConstant("K2"))
    }
}

/// A one-dimensional density given by a table of (x, f(x)) values, linearly
/// interpolated and sampled by exact inversion of the piecewise-quadratic CDF.
#[derive(Debug, Clone)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    fs: Vec<f64>,
    cdf: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl TabulatedDensity {
    pub fn new(xs: Vec<f64>, fs: Vec<f64>) -> Result<Self> {
        if xs.len() != fs.len() || xs.len() < 2 {
            return Err(invalid("table", "need at least two (x, f0) rows"));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("table", "x values must be strictly increasing"));
        }
        if fs.iter().chain(&xs).any(|v| !v.is_finite()) || fs.iter().any(|&f| f < 0.0) {
            return Err(invalid("table", "values must be finite and densities nonnegative"));
        }
        let mut cdf = vec![0.0; xs.len()];
        for k in 1..xs.len() {
            cdf[k] = cdf[k - 1] + 0.5 * (xs[k] - xs[k - 1]) * (fs[k] + fs[k - 1]);
        }
        let mass = cdf[xs.len() - 1];
        if (mass - 1.0).abs() > 1e-2 {
            return Err(invalid("table", format!("density integrates to {mass}, expected 1")));
        }
        let fs: Vec<f64> = fs.iter().map(|f| f / mass).collect();
        cdf.iter_mut().for_each(|c| *c /= mass);
        // x·f and x²·f are at most cubic on each segment, so Simpson is exact
        let (mut m1, mut m2) = (0.0, 0.0);
        for k in 1..xs.len() {
            let (a, b) = (xs[k - 1], xs[k]);
            let mid = 0.5 * (a + b);
            let fm = 0.5 * (fs[k - 1] + fs[k]);
            let w = (b - a) / 6.0;
            m1 += w * (a * fs[k - 1] + 4.0 * mid * fm + b * fs[k]);
            m2 += w * (a * a * fs[k - 1] + 4.0 * mid * mid * fm + b * b * fs[k]);
        }
        Ok(Self {
            xs,
            fs,
            cdf,
            mean: m1,
            variance: m2 - m1 * m1,
        })
    }

    /// Reads a CSV with a header row and columns `x, f0`.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let mut xs = Vec::new();
        let mut fs = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(Error::Config(format!(
                    "{}: row {} has {} columns; only one-dimensional tables (x, f0) are supported",
                    path.display(),
                    line + 2,
                    record.len()
                )));
            }
            let parse = |i: usize| -> Result<f64> {
                record[i].parse::<f64>().map_err(|e| {
                    Error::Config(format!("{}: row {}: {e}", path.display(), line + 2))
                })
            };
            xs.push(parse(0)?);
            fs.push(parse(1)?);
        }
        Self::new(xs, fs)
    }

    fn segment(&self, x: f64) -> Option<usize> {
        if x < self.xs[0] || x > self.xs[self.xs.len() - 1] {
            return None;
        }
        let k = self.xs.partition_point(|&v| v <= x);
        Some(k.clamp(1, self.xs.len() - 1) - 1)
    }

    fn eval(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(k) => {
                let t = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
                self.fs[k] + t * (self.fs[k + 1] - self.fs[k])
            }
        }
    }

    fn slope(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(k) => (self.fs[k + 1] - self.fs[k]) / (self.xs[k + 1] - self.xs[k]),
        }
    }

    fn inverse_cdf(&self, u: f64) -> f64 {
        let n = self.xs.len();
        let k = (self.cdf.partition_point(|&c| c <= u)).clamp(1, n - 1) - 1;
        let dx = self.xs[k + 1] - self.xs[k];
        let r = (u - self.cdf[k]).max(0.0);
        let a = 0.5 * (self.fs[k + 1] - self.fs[k]) / dx;
        let b = self.fs[k];
        let disc = (b * b + 4.0 * a * r).max(0.0);
        let denom = b + disc.sqrt();
        let t = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        self.xs[k] + t.clamp(0.0, dx)
    }
}

#[derive(Debug, Clone)]
enum Shape {
    /// Isotropic N(mean, sd² I).
    Gaussian { mean: Vec<f64>, sd: f64 },
    /// Σ wₖ N(0, sdₖ² I).
    GaussianScaleMixture { weights: Vec<f64>, sds: Vec<f64> },
    /// Product of Laplace(0, scale) marginals.
    Laplace { scale: f64 },
    /// Uniform on [-width/2, width/2]^d, tagged with the fractional order s
    /// used for its smoothness descriptor.
    UniformBox { width: f64, s: f64 },
    Tabulated(Arc<TabulatedDensity>),
}

/// A target density with evaluator, exact sampler and smoothness metadata.
#[derive(Debug, Clone)]
pub struct TargetDensity {
    shape: Shape,
    dim: usize,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(invalid("target.dim", "dimension must be positive"))
    } else {
        Ok(())
    }
}

impl TargetDensity {
    pub fn standard_gaussian(dim: usize) -> Self {
        Self::gaussian(vec![0.0; dim.max(1)], 1.0).expect("valid standard Gaussian")
    }

    pub fn gaussian(mean: Vec<f64>, sd: f64) -> Result<Self> {
        check_dim(mean.len())?;
        if !(sd.is_finite() && sd > 0.0) || mean.iter().any(|m| !m.is_finite()) {
            return Err(invalid("target.sd", "need finite mean and positive sd"));
        }
        let dim = mean.len();
        Ok(Self {
            shape: Shape::Gaussian { mean, sd },
            dim,
        })
    }

    pub fn gaussian_scale_mixture(dim: usize, weights: Vec<f64>, sds: Vec<f64>) -> Result<Self> {
        check_dim(dim)?;
        if weights.is_empty() || weights.len() != sds.len() {
            return Err(invalid("target.weights", "need matching nonempty weights and sds"));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("target.weights", "weights must be ≥ 0 and sds > 0"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("target.weights", "weights must not all be zero"));
        }
        Ok(Self {
            shape: Shape::GaussianScaleMixture {
                weights: weights.iter().map(|w| w / total).collect(),
                sds,
            },
            dim,
        })
    }

    pub fn laplace(dim: usize, scale: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid("target.scale", "must be positive"));
        }
        Ok(Self {
            shape: Shape::Laplace { scale },
            dim,
        })
    }

    pub fn uniform_box(dim: usize, width: f64, s: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(width.is_finite() && width > 0.0) {
            return Err(invalid("target.width", "must be positive"));
        }
        if !(s > 0.0 && s < 1.0) {
            return Err(invalid("target.s", format!("fractional order must lie in (0, 1), got {s}")));
        }
        Ok(Self {
            shape: Shape::UniformBox { width, s },
            dim,
        })
    }

    pub fn tabulated(table: TabulatedDensity) -> Self {
        Self {
            shape: Shape::Tabulated(Arc::new(table)),
            dim: 1,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.shape {
            Shape::Gaussian { .. } => "gaussian",
            Shape::GaussianScaleMixture { .. } => "gaussian_scale_mixture",
            Shape::Laplace { .. } => "laplace",
            Shape::UniformBox { .. } => "uniform_box",
            Shape::Tabulated(_) => "tabulated",
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        match &self.shape {
            Shape::Gaussian { mean, sd } => {
                let r2: f64 = x.iter().zip(mean).map(|(a, m)| (a - m) * (a - m)).sum();
                gaussian_density(r2, *sd, self.dim)
            }
            Shape::GaussianScaleMixture { weights, sds } => {
                let r2: f64 = x.iter().map(|a| a * a).sum();
                weights
                    .iter()
                    .zip(sds)
                    .map(|(w, s)| w * gaussian_density(r2, *s, self.dim))
                    .sum()
            }
            Shape::Laplace { scale } => x
                .iter()
                .map(|a| (-a.abs() / scale).exp() / (2.0 * scale))
                .product(),
            Shape::UniformBox { width, .. } => {
                if x.iter().all(|a| a.abs() <= 0.5 * width) {
                    width.powi(-(self.dim as i32))
                } else {
                    0.0
                }
            }
            Shape::Tabulated(t) => t.eval(x[0]),
        }
    }

    /// ∇f₀(x), defined almost everywhere; `None` when f₀ has no weak gradient
    /// in Lᵖ (the uniform box).
    pub fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        match &self.shape {
            Shape::Gaussian { mean, sd } => {
                let f = self.eval(x);
                Some(x.iter().zip(mean).map(|(a, m)| -(a - m) / (sd * sd) * f).collect())
            }
            Shape::GaussianScaleMixture { weights, sds } => {
                let r2: f64 = x.iter().map(|a| a * a).sum();
                let c: f64 = weights
                    .iter()
                    .zip(sds)
                    .map(|(w, s)| w * gaussian_density(r2, *s, self.dim) / (s * s))
                    .sum();
                Some(x.iter().map(|a| -a * c).collect())
            }
            Shape::Laplace { scale } => {
                let f = self.eval(x);
                Some(x.iter().map(|a| -a.signum() * f / scale).collect())
            }
            Shape::UniformBox { .. } => None,
            Shape::Tabulated(t) => Some(vec![t.slope(x[0])]),
        }
    }

    pub fn has_gradient(&self) -> bool {
        !matches!(self.shape, Shape::UniformBox { .. })
    }

    /// Draws one point into `out`.
    pub fn sample_into(&self, rng: &mut Rng, out: &mut [f64]) {
        match &self.shape {
            Shape::Gaussian { mean, sd } => {
                for (o, m) in out.iter_mut().zip(mean) {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = m + sd * z;
                }
            }
            Shape::GaussianScaleMixture { weights, sds } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = weights.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = i;
                        break;
                    }
                }
                for o in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    *o = sds[k] * z;
                }
            }
            Shape::Laplace { scale } => {
                for o in out.iter_mut() {
                    let e: f64 = Exp1.sample(rng);
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    *o = sign * scale * e;
                }
            }
            Shape::UniformBox { width, .. } => {
                for o in out.iter_mut() {
                    *o = width * (rng.random::<f64>() - 0.5);
                }
            }
            Shape::Tabulated(t) => out[0] = t.inverse_cdf(rng.random::<f64>()),
        }
    }

    /// n i.i.d. draws with the given seed.
    pub fn sample(&self, n: usize, seed: u64) -> PointSet {
        let mut rng = rng_from_seed(seed);
        let mut data = vec![0.0; n * self.dim];
        for chunk in data.chunks_exact_mut(self.dim) {
            self.sample_into(&mut rng, chunk);
        }
        PointSet::new(self.dim, data).expect("dimension is positive")
    }

    pub fn mean(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Gaussian { mean, .. } => mean.clone(),
            Shape::Tabulated(t) => vec![t.mean],
            _ => vec![0.0; self.dim],
        }
    }

    /// Per-coordinate variance.
    pub fn variance(&self) -> f64 {
        match &self.shape {
            Shape::Gaussian { sd, .. } => sd * sd,
            Shape::GaussianScaleMixture { weights, sds } => {
                weights.iter().zip(sds).map(|(w, s)| w * s * s).sum()
            }
            Shape::Laplace { scale } => 2.0 * scale * scale,
            Shape::UniformBox { width, .. } => width * width / 12.0,
            Shape::Tabulated(t) => t.variance,
        }
    }

    /// Per-axis half-width outside of which f₀ is negligible (zero for the
    /// compactly supported targets).
    pub fn effective_support_radius(&self) -> f64 {
        match &self.shape {
            Shape::Gaussian { mean, sd } => {
                mean.iter().fold(0.0f64, |a, m| a.max(m.abs())) + GAUSSIAN_AXIS_RADIUS * sd
            }
            Shape::GaussianScaleMixture { sds, .. } => {
                GAUSSIAN_AXIS_RADIUS * sds.iter().fold(0.0f64, |a, &s| a.max(s))
            }
            Shape::Laplace { scale } => LAPLACE_AXIS_RADIUS * scale,
            Shape::UniformBox { width, .. } => 0.5 * width,
            Shape::Tabulated(t) => t.xs[0].abs().max(t.xs[t.xs.len() - 1].abs()),
        }
    }

    /// Gaussian components (weight, mean, sd) when f₀ is a Gaussian mixture;
    /// enables closed-form convolution with a Gaussian kernel.
    pub fn gaussian_components(&self) -> Option<Vec<(f64, Vec<f64>, f64)>> {
        match &self.shape {
            Shape::Gaussian { mean, sd } => Some(vec![(1.0, mean.clone(), *sd)]),
            Shape::GaussianScaleMixture { weights, sds } => Some(
                weights
                    .iter()
                    .zip(sds)
                    .map(|(w, s)| (*w, vec![0.0; self.dim], *s))
                    .collect(),
            ),
            _ => None,
        }
    }

    /// Closed-form K₂ = ‖∇f₀‖_p (W^{1,p} targets) or the Gagliardo seminorm
    /// (uniform box, d = 1), when known.
    pub fn analytic_k2(&self, p: f64) -> Option<f64> {
        let d = self.dim as f64;
        match &self.shape {
            Shape::Gaussian { sd, .. } => {
                // ∫‖∇f‖ᵖ = (2πσ²)^{-dp/2} σ^{-2p} |S^{d-1}| ½ (2σ²/p)^{(p+d)/2} Γ((p+d)/2)
                let ln_sphere = 2f64.ln() + 0.5 * d * PI.ln() - ln_gamma(0.5 * d);
                let ln_int = -0.5 * d * p * (2.0 * PI * sd * sd).ln() - 2.0 * p * sd.ln()
                    + ln_sphere
                    + 0.5f64.ln()
                    + 0.5 * (p + d) * (2.0 * sd * sd / p).ln()
                    + ln_gamma(0.5 * (p + d));
                Some((ln_int / p).exp())
            }
            Shape::Laplace { scale } if self.dim == 1 => {
                Some((2.0 * (2.0 * scale * scale).powf(-p) * scale / p).powf(1.0 / p))
            }
            Shape::UniformBox { width, s } if self.dim == 1 && s * p < 1.0 => {
                let sp = s * p;
                let integral = 4.0 * width.powf(-p) * width.powf(1.0 - sp) / (sp * (1.0 - sp));
                Some(integral.powf(1.0 / p))
            }
            _ => None,
        }
    }

    /// Smoothness descriptor for the Lᵖ modulus at exponent p.
    pub fn smoothness(&self, p: f64) -> Result<SmoothnessSpec> {
        check_p(p)?;
        match &self.shape {
            Shape::UniformBox { s, .. } => {
                if s * p >= 1.0 {
                    return Err(Error::UnsupportedTarget(format!(
                        "uniform box is not in W^{{s,p}} for s·p = {} ≥ 1",
                        s * p
                    )));
                }
                SmoothnessSpec::new(*s, self.analytic_k2(p), SmoothnessKind::Wsp)
            }
            _ => SmoothnessSpec::new(1.0, self.analytic_k2(p), SmoothnessKind::W1p),
        }
    }
}

fn gaussian_density(r2: f64, sd: f64, dim: usize) -> f64 {
    (-0.5 * r2 / (sd * sd)).exp() * (2.0 * PI * sd * sd).powf(-0.5 * dim as f64)
}

fn check_domain(f0: &TargetDensity, y: &[f64], quad: &QuadratureSpec) -> Result<()> {
    let reach = f0.effective_support_radius() + y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if reach > quad.inner_radius() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "support radius {} shifted by {:?} escapes [{}, {}]",
            f0.effective_support_radius(),
            y,
            quad.lower,
            quad.upper
        )));
    }
    Ok(())
}

/// [∫|f₀(x − y) − f₀(x)|ᵖ dx]^{1/p}.
pub fn translation_modulus(
    f0: &TargetDensity,
    y: &[f64],
    p: f64,
    quad: &QuadratureSpec,
) -> Result<f64> {
    check_p(p)?;
    if y.len() != f0.dim() {
        return Err(invalid("y", "dimension mismatch"));
    }
    if y.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    check_domain(f0, y, quad)?;
    let integral = quad.integrate(f0.dim(), |x| {
        let shifted: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        (f0.eval(&shifted) - f0.eval(x)).abs().powf(p)
    })?;
    Ok(integral.max(0.0).powf(1.0 / p))
}

/// [∫‖∇f₀(x)‖₂ᵖ dx]^{1/p}.
pub fn sobolev_w1p_constant(f0: &TargetDensity, p: f64, quad: &QuadratureSpec) -> Result<f64> {
    check_p(p)?;
    if !f0.has_gradient() {
        return Err(Error::UnsupportedTarget(format!(
            "`{}` has no weak gradient in Lᵖ",
            f0.name()
        )));
    }
    check_domain(f0, &vec![0.0; f0.dim()], quad)?;
    let integral = quad.integrate(f0.dim(), |x| {
        let g = f0.gradient(x).unwrap_or_default();
        euclidean_norm(&g).powf(p)
    })?;
    Ok(integral.powf(1.0 / p))
}

/// Fractional seminorm and its raw double integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionalSeminorm {
    /// (∫∫ |f(x) − f(y)|ᵖ / ‖x − y‖^{d+sp} dx dy)^{1/p}
    pub seminorm: Measured,
    /// The double integral itself.
    pub double_integral: f64,
}

/// Gagliardo seminorm of order s by a midpoint double sum over the box of
/// `quad` with `quad.points` cells per axis. Cell pairs closer than half a
/// cell width are excluded; the region outside the box is added analytically
/// (f₀ is assumed negligible there). The tolerance is the change under
/// halving the resolution.
pub fn fractional_seminorm(
    f0: &TargetDensity,
    s: f64,
    p: f64,
    quad: &QuadratureSpec,
) -> Result<FractionalSeminorm> {
    check_p(p)?;
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("s", format!("must lie in (0, 1), got {s}")));
    }
    if !(1..=2).contains(&f0.dim()) {
        return Err(invalid("dim", "fractional seminorm is implemented for d ∈ {1, 2}"));
    }
    quad.validate()?;
    check_domain(f0, &vec![0.0; f0.dim()], quad)?;
    let fine = gagliardo_double_integral(f0, s, p, quad.lower, quad.upper, quad.points);
    let coarse = gagliardo_double_integral(f0, s, p, quad.lower, quad.upper, quad.points / 2);
    let value = fine.powf(1.0 / p);
    if !value.is_finite() {
        return Err(Error::NumericalFailure {
            context: "fractional_seminorm",
            point: vec![s, p],
            detail: format!("double integral evaluated to {fine}"),
        });
    }
    Ok(FractionalSeminorm {
        seminorm: Measured {
            value,
            tolerance: (value - coarse.powf(1.0 / p)).abs(),
        },
        double_integral: fine,
    })
}

fn gagliardo_double_integral(
    f0: &TargetDensity,
    s: f64,
    p: f64,
    lower: f64,
    upper: f64,
    cells: usize,
) -> f64 {
    let d = f0.dim();
    let h = (upper - lower) / cells as f64;
    let centres: Vec<f64> = (0..cells).map(|i| lower + (i as f64 + 0.5) * h).collect();
    let total = cells.pow(d as u32);
    let point = |i: usize| -> [f64; 2] {
        if d == 1 {
            [centres[i], 0.0]
        } else {
            [centres[i / cells], centres[i % cells]]
        }
    };
    let values: Vec<f64> = (0..total)
        .map(|i| {
            let x = point(i);
            f0.eval(&x[..d])
        })
        .collect();
    let exponent = d as f64 + s * p;
    let vol = h.powi(d as i32);
    let min_dist = 0.5 * h;
    let rows: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|i| {
            let xi = point(i);
            let fi = values[i];
            let terms: Vec<f64> = ((i + 1)..total)
                .map(|j| {
                    let diff = (fi - values[j]).abs();
                    if diff == 0.0 {
                        return 0.0;
                    }
                    let xj = point(j);
                    let dist = euclidean_norm(&[xi[0] - xj[0], xi[1] - xj[1]][..d]);
                    if dist < min_dist {
                        0.0
                    } else {
                        diff.powf(p) / dist.powf(exponent)
                    }
                })
                .collect();
            // pairs (i, j) and (j, i), plus the two mixed inside/outside regions
            2.0 * vol * vol * pairwise_sum(&terms)
                + 2.0 * vol * fi.abs().powf(p) * outside_box_integral(&xi[..d], lower, upper, s * p)
        })
        .collect();
    pairwise_sum(&rows)
}

/// ∫_{y ∉ box} ‖x − y‖^{-d-sp} dy for x inside the box, d ∈ {1, 2}.
fn outside_box_integral(x: &[f64], lower: f64, upper: f64, sp: f64) -> f64 {
    if x.len() == 1 {
        return ((upper - x[0]).powf(-sp) + (x[0] - lower).powf(-sp)) / sp;
    }
    // polar form: ∫₀^{2π} ρ(θ)^{-sp} / sp dθ, ρ = distance to the boundary
    const ANGLES: usize = 720;
    let terms: Vec<f64> = (0..ANGLES)
        .map(|k| {
            let theta = (k as f64 + 0.5) * 2.0 * PI / ANGLES as f64;
            let u = [theta.cos(), theta.sin()];
            let rho = x
                .iter()
                .zip(u)
                .filter(|(_, c)| c.abs() > 1e-15)
                .map(|(xi, c)| if c > 0.0 { (upper - xi) / c } else { (lower - xi) / c })
                .fold(f64::INFINITY, f64::min);
            rho.powf(-sp) / sp
        })
        .collect();
    pairwise_sum(&terms) * 2.0 * PI / ANGLES as f64
}

/// Result of an empirical smoothness fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothnessFit {
    pub spec: SmoothnessSpec,
    /// (‖y‖₂, modulus) pairs that entered the fit.
    pub points: Vec<(f64, f64)>,
    pub raw_slope: f64,
    pub r_squared: f64,
}

/// Log-log least-squares fit of the translation modulus against ‖y‖₂,
/// restricted to shifts with ‖y‖₂ ≤ effective_support_radius / 4.
pub fn estimate_smoothness(
    f0: &TargetDensity,
    p: f64,
    shift_grid: &PointSet,
    quad: &QuadratureSpec,
) -> Result<SmoothnessSpec> {
    estimate_smoothness_detailed(f0, p, shift_grid, quad).map(|fit| fit.spec)
}

pub fn estimate_smoothness_detailed(
    f0: &TargetDensity,
    p: f64,
    shift_grid: &PointSet,
    quad: &QuadratureSpec,
) -> Result<SmoothnessFit> {
    check_p(p)?;
    if shift_grid.dim() != f0.dim() {
        return Err(invalid("shift_grid", "dimension mismatch"));
    }
    let limit = f0.effective_support_radius() / 4.0;
    let shifts: Vec<&[f64]> = shift_grid
        .iter()
        .filter(|y| {
            let r = euclidean_norm(y);
            r > 0.0 && r <= limit
        })
        .collect();
    let mut norms: Vec<f64> = shifts.iter().map(|y| euclidean_norm(y)).collect();
    norms.sort_by(f64::total_cmp);
    norms.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    if norms.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: norms.len(),
        });
    }
    let decades = (norms[norms.len() - 1] / norms[0]).log10();
    if decades < 1.5 {
        return Err(invalid(
            "shift_grid",
            format!("shift norms span {decades:.2} decades, need at least 1.5"),
        ));
    }
    let moduli = shifts
        .par_iter()
        .map(|y| translation_modulus(f0, y, p, quad))
        .collect::<Result<Vec<f64>>>()?;
    let points: Vec<(f64, f64)> = shifts
        .iter()
        .zip(&moduli)
        .filter(|(_, m)| **m > 0.0)
        .map(|(y, m)| (euclidean_norm(y), *m))
        .collect();
    if points.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: points.len(),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = loglog_ols(&xs, &ys)?;
    let alpha = fit.slope.clamp(1e-6, 1.0);
    Ok(SmoothnessFit {
        spec: SmoothnessSpec::new(alpha, Some(fit.intercept.exp()), SmoothnessKind::Empirical)?,
        points,
        raw_slope: fit.slope,
        r_squared: fit.r_squared,
    })
}

/// Resolves K₂ for f₀ at exponent p: closed form when known, otherwise the
/// gradient constant for W^{1,p} targets, otherwise the fractional seminorm.
pub fn resolve_smoothness(
    f0: &TargetDensity,
    p: f64,
    quad: &QuadratureSpec,
) -> Result<SmoothnessSpec> {
    let spec = f0.smoothness(p)?;
    if spec.k2.is_some() {
        return Ok(spec);
    }
    let k2 = match spec.kind {
        SmoothnessKind::W1p => sobolev_w1p_constant(f0, p, quad)?,
        SmoothnessKind::Wsp => {
            let grid = if f0.dim() == 1 { quad.with_points(2048) } else { quad.with_points(48) };
            fractional_seminorm(f0, spec.alpha, p, &grid)?.seminorm.value
        }
        SmoothnessKind::Empirical => return Err(Error::UnknownConstant("K2")),
    };
    SmoothnessSpec::new(spec.alpha, Some(k2), spec.kind)
}
