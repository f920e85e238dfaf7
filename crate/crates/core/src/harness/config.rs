//! Experiment configuration: a flat TOML document with one table per module.
//!
//! ```toml
//! [experiment]
//! kind = "approx_rate"      # approx_rate | estimate_rate | smoothing | diagnostics | invariants
//! seed = 42
//! trials = 20
//!
//! [kernel]
//! name = "gaussian"         # gaussian | uniform | triangular | epanechnikov
//! dim = 1
//!
//! [target]
//! name = "gaussian"         # gaussian | gaussian_scale_mixture | laplace | uniform_box | tabulated
//!
//! [approx]
//! p = 2.0
//! m_grid = [4, 8, 16, 32, 64, 128, 256]
//! ```
//!
//! Unknown keys are rejected. Only the table for the selected kind is
//! required; the others are ignored when present.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::quadrature::{QuadratureMode, QuadratureSpec};
use crate::error::{Error, Result};
use crate::estimate::CandidateRule;
use crate::kernels::KernelDensity;
use crate::targets::{TabulatedDensity, TargetDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    ApproxRate,
    EstimateRate,
    Smoothing,
    Diagnostics,
    Invariants,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::ApproxRate => "approx_rate",
            ExperimentKind::EstimateRate => "estimate_rate",
            ExperimentKind::Smoothing => "smoothing",
            ExperimentKind::Diagnostics => "diagnostics",
            ExperimentKind::Invariants => "invariants",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

fn default_trials() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    pub name: String,
    #[serde(default = "one")]
    pub dim: usize,
    pub vc_dim: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub name: String,
    pub mean: Option<Vec<f64>>,
    pub sd: Option<f64>,
    pub weights: Option<Vec<f64>>,
    pub sds: Option<Vec<f64>>,
    pub scale: Option<f64>,
    pub width: Option<f64>,
    pub s: Option<f64>,
    pub path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxSection {
    pub p: f64,
    pub m_grid: Vec<usize>,
    pub c_p: Option<f64>,
    pub alpha: Option<f64>,
    pub slope_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateSection {
    pub s: f64,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_b3")]
    pub b3: f64,
    #[serde(default = "default_rule")]
    pub candidate_rule: CandidateRule,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_diagnostic_trials")]
    pub diagnostic_trials: usize,
    pub slope_tolerance: Option<f64>,
}

fn default_b3() -> f64 {
    1.0
}
fn default_rule() -> CandidateRule {
    CandidateRule::Subsample
}
fn default_max_iters() -> usize {
    10_000
}
fn default_diagnostic_trials() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingSection {
    #[serde(default = "two")]
    pub p: f64,
    pub nu_grid: Vec<f64>,
}

fn two() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub nu: f64,
    pub n_grid: Vec<usize>,
    /// Atom centres per axis on [−R, R]ᵈ, R the target's support radius.
    #[serde(default = "default_mu_points")]
    pub mu_points: usize,
    #[serde(default = "default_atoms")]
    pub atoms: usize,
    #[serde(default = "default_weight_trials")]
    pub weight_trials: usize,
    /// Sample size for the convex-combination check.
    #[serde(default = "default_convex_n")]
    pub convex_n: usize,
    /// Independent samples for the convex-combination check.
    #[serde(default = "default_convex_seeds")]
    pub convex_seeds: usize,
}

fn default_mu_points() -> usize {
    65
}
fn default_atoms() -> usize {
    5
}
fn default_weight_trials() -> usize {
    100
}
fn default_convex_n() -> usize {
    1000
}
fn default_convex_seeds() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    pub mode: Option<QuadratureMode>,
    pub points: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub kernel: KernelSection,
    pub target: TargetSection,
    pub approx: Option<ApproxSection>,
    pub estimate: Option<EstimateSection>,
    pub smoothing: Option<SmoothingSection>,
    pub diagnostics: Option<DiagnosticsSection>,
    pub quadrature: Option<QuadratureSection>,
    /// Directory against which relative paths in the file resolve.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn field(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

fn strictly_increasing<T: PartialOrd>(name: &'static str, grid: &[T]) -> Result<()> {
    if grid.is_empty() {
        return Err(field(name, "must be nonempty"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(field(name, "must be strictly increasing"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every field the selected kind depends on.
    pub fn validate(&self) -> Result<()> {
        if self.experiment.trials == 0 {
            return Err(field("experiment.trials", "must be at least 1"));
        }
        if self.kernel.dim == 0 {
            return Err(field("kernel.dim", "must be positive"));
        }
        self.build_kernel()?;
        self.build_target()?;
        if let Some(q) = &self.quadrature {
            if q.points.is_some_and(|p| p < QuadratureSpec::MIN_POINTS) {
                return Err(field("quadrature.points", format!("must be at least {}", QuadratureSpec::MIN_POINTS)));
            }
        }
        match self.experiment.kind {
            ExperimentKind::ApproxRate => {
                let a = self.approx.as_ref().ok_or_else(|| field("approx", "section is required for approx_rate"))?;
                strictly_increasing("approx.m_grid", &a.m_grid)?;
                if a.m_grid[0] == 0 {
                    return Err(field("approx.m_grid", "entries must be positive"));
                }
                if !(a.p > 1.0 && a.p.is_finite()) {
                    return Err(field("approx.p", "must lie in (1, ∞)"));
                }
                if a.c_p.is_some_and(|c| !(c > 0.0)) {
                    return Err(field("approx.c_p", "must be positive"));
                }
                if a.alpha.is_some_and(|v| !(v > 0.0 && v <= 1.0)) {
                    return Err(field("approx.alpha", "must lie in (0, 1]"));
                }
            }
            ExperimentKind::EstimateRate => {
                let e = self.estimate.as_ref().ok_or_else(|| field("estimate", "section is required for estimate_rate"))?;
                strictly_increasing("estimate.n_grid", &e.n_grid)?;
                if e.n_grid[0] < 4 {
                    return Err(field("estimate.n_grid", "sample sizes must be at least 4"));
                }
                if !(e.s > 0.0 && e.s <= 1.0) {
                    return Err(field("estimate.s", "must lie in (0, 1]"));
                }
                if !(e.b3 > 0.0) {
                    return Err(field("estimate.b3", "must be positive"));
                }
                if e.max_iters == 0 {
                    return Err(field("estimate.max_iters", "must be positive"));
                }
            }
            ExperimentKind::Smoothing => {
                let s = self.smoothing.as_ref().ok_or_else(|| field("smoothing", "section is required for smoothing"))?;
                strictly_increasing("smoothing.nu_grid", &s.nu_grid)?;
                if s.nu_grid[0] <= 0.0 {
                    return Err(field("smoothing.nu_grid", "scales must be positive"));
                }
                if !(s.p > 1.0 && s.p.is_finite()) {
                    return Err(field("smoothing.p", "must lie in (1, ∞)"));
                }
            }
            ExperimentKind::Diagnostics => {
                let d = self.diagnostics.as_ref().ok_or_else(|| field("diagnostics", "section is required for diagnostics"))?;
                strictly_increasing("diagnostics.n_grid", &d.n_grid)?;
                if d.n_grid[0] == 0 {
                    return Err(field("diagnostics.n_grid", "entries must be positive"));
                }
                if !(d.nu > 0.0 && d.nu.is_finite()) {
                    return Err(field("diagnostics.nu", "must be positive"));
                }
                if d.mu_points < 2 {
                    return Err(field("diagnostics.mu_points", "must be at least 2"));
                }
                if d.atoms == 0 {
                    return Err(field("diagnostics.atoms", "must be at least 1"));
                }
                if d.convex_n == 0 || d.convex_seeds == 0 {
                    return Err(field("diagnostics.convex_n", "sample size and seed count must be positive"));
                }
            }
            ExperimentKind::Invariants => {}
        }
        Ok(())
    }

    pub fn build_kernel(&self) -> Result<KernelDensity> {
        let k = KernelDensity::from_name(&self.kernel.name, self.kernel.dim)?;
        match self.kernel.vc_dim {
            Some(v) => k.with_vc_dim(v),
            None => Ok(k),
        }
    }

    pub fn build_target(&self) -> Result<TargetDensity> {
        let t = &self.target;
        let d = self.kernel.dim;
        match t.name.as_str() {
            "gaussian" => {
                let mean = t.mean.clone().unwrap_or_else(|| vec![0.0; d]);
                if mean.len() != d {
                    return Err(field("target.mean", format!("needs {d} entries")));
                }
                TargetDensity::gaussian(mean, t.sd.unwrap_or(1.0))
            }
            "gaussian_scale_mixture" => TargetDensity::gaussian_scale_mixture(
                d,
                t.weights.clone().ok_or_else(|| field("target.weights", "required for gaussian_scale_mixture"))?,
                t.sds.clone().ok_or_else(|| field("target.sds", "required for gaussian_scale_mixture"))?,
            ),
            "laplace" => TargetDensity::laplace(d, t.scale.unwrap_or(1.0)),
            "uniform_box" => TargetDensity::uniform_box(d, t.width.unwrap_or(1.0), t.s.unwrap_or(0.25)),
            "tabulated" => {
                if d != 1 {
                    return Err(field("target.path", "tabulated targets are one-dimensional"));
                }
                let path = t.path.as_ref().ok_or_else(|| field("target.path", "required for tabulated"))?;
                let path = match (&self.base_dir, path.is_relative()) {
                    (Some(base), true) => base.join(path),
                    _ => path.clone(),
                };
                Ok(TargetDensity::tabulated(TabulatedDensity::from_csv(&path)?))
            }
            other => Err(Error::UnsupportedTarget(format!("unknown target `{other}`"))),
        }
    }

    /// Applies the config's quadrature overrides on top of `base`.
    pub fn quadrature_override(&self, base: QuadratureSpec) -> QuadratureSpec {
        let mut q = base;
        if let Some(sec) = &self.quadrature {
            if let Some(mode) = sec.mode {
                q.mode = mode;
            }
            if let Some(points) = sec.points {
                q.points = points;
            }
            if let Some(seed) = sec.seed {
                q.seed = seed;
            }
        }
        q
    }

    pub fn quadrature_points(&self) -> Option<usize> {
        self.quadrature.as_ref().and_then(|q| q.points)
    }

    /// SHA-256 of the canonical JSON form of the effective configuration
    /// (output location excluded).
    pub fn provenance_hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serialises");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[experiment]
kind = "approx_rate"
seed = 1
trials = 4

[kernel]
name = "gaussian"

[target]
name = "gaussian"

[approx]
p = 2.0
m_grid = [4, 8, 16]
"#;

    #[test]
    fn parses_and_hashes() {
        let a = ExperimentConfig::from_toml_str(BASIC).unwrap();
        assert_eq!(a.experiment.kind, ExperimentKind::ApproxRate);
        let b = ExperimentConfig::from_toml_str(&BASIC.replace("seed = 1", "seed = 2")).unwrap();
        assert_ne!(a.provenance_hash(), b.provenance_hash());
        assert_eq!(a.provenance_hash(), ExperimentConfig::from_toml_str(BASIC).unwrap().provenance_hash());
    }

    #[test]
    fn empty_grid_names_the_field() {
        let err = ExperimentConfig::from_toml_str(&BASIC.replace("[4, 8, 16]", "[]")).unwrap_err();
        assert!(err.to_string().contains("approx.m_grid"), "{err}");
        let err = ExperimentConfig::from_toml_str(&BASIC.replace("[4, 8, 16]", "[8, 4]")).unwrap_err();
        assert!(err.to_string().contains("approx.m_grid"), "{err}");
    }

    #[test]
    fn unknown_keys_and_bad_types_are_reported() {
        let err = ExperimentConfig::from_toml_str(&BASIC.replace("p = 2.0", "p = 2.0\nq = 3")).unwrap_err();
        assert!(err.to_string().contains('q'), "{err}");
        let err = ExperimentConfig::from_toml_str(&BASIC.replace("trials = 4", "trials = \"four\"")).unwrap_err();
        assert!(err.to_string().contains("line"), "{err}");
    }

    #[test]
    fn missing_section_is_reported() {
        let text = BASIC.replace("approx_rate", "estimate_rate");
        let err = ExperimentConfig::from_toml_str(&text).unwrap_err();
        assert!(err.to_string().contains("estimate"), "{err}");
    }
}
