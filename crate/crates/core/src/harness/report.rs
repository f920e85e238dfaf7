//! Rate reports: log-log slope fits, bound overlays and verdicts.

use serde::Serialize;

use crate::analysis::loglog_ols;
use crate::error::{Error, Result};

/// Default slack on the fitted slope relative to the theoretical exponent.
pub const SLOPE_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    NotCertified,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Pass => 0,
            Verdict::Fail => 2,
            Verdict::NotCertified => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::NotCertified => "not_certified",
        }
    }
}

/// Config hash plus every seed that fed the run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateRow {
    pub size: u64,
    pub mean_error: f64,
    pub std_error: f64,
    pub bound: Option<f64>,
    /// Whether `mean_error` respects `bound`; `None` when not checked.
    pub within_bound: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    pub warnings: Vec<String>,
}

/// OLS of log mean_error on log size. Rows with nonpositive or non-finite
/// errors are dropped with a warning; fewer than three usable rows is an
/// error.
pub fn fit_loglog_slope(rows: &[RateRow]) -> Result<SlopeFit> {
    let sizes: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
    fit_loglog_points(&sizes, &errors)
}

pub fn fit_loglog_points(sizes: &[f64], values: &[f64]) -> Result<SlopeFit> {
    let mut warnings = Vec::new();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&x, &y) in sizes.iter().zip(values) {
        if y > 0.0 && y.is_finite() && x > 0.0 {
            xs.push(x);
            ys.push(y);
        } else {
            let msg = format!("excluded row size={x} value={y} from log-log fit");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    if xs.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            got: xs.len(),
        });
    }
    let fit = loglog_ols(&xs, &ys)?;
    Ok(SlopeFit {
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        points_used: fit.points,
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    pub fit: SlopeFit,
    pub exponent: f64,
    pub constant_k: Option<f64>,
    pub slope_tolerance: f64,
    /// Whether the per-row bound checks enter the verdict.
    pub bounds_certified: bool,
    pub verdict: Verdict,
    pub provenance: Provenance,
}

impl RateReport {
    /// Fits the slope and decides the verdict: fail if the slope exceeds
    /// `exponent + tolerance` or a certified bound is violated; otherwise
    /// not_certified when some fit lacked its optimisation certificate;
    /// otherwise pass.
    pub fn assemble(
        rows: Vec<RateRow>,
        exponent: f64,
        constant_k: Option<f64>,
        slope_tolerance: f64,
        bounds_certified: bool,
        fits_certified: bool,
    ) -> Result<Self> {
        let fit = fit_loglog_slope(&rows)?;
        let slope_ok = fit.slope <= exponent + slope_tolerance;
        let bounds_ok = !bounds_certified || rows.iter().all(|r| r.within_bound != Some(false));
        let verdict = if !(slope_ok && bounds_ok) {
            Verdict::Fail
        } else if !fits_certified {
            Verdict::NotCertified
        } else {
            Verdict::Pass
        };
        Ok(Self {
            rows,
            fit,
            exponent,
            constant_k,
            slope_tolerance,
            bounds_certified,
            verdict,
            provenance: Provenance::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(size: u64, e: f64) -> RateRow {
        RateRow {
            size,
            mean_error: e,
            std_error: 0.0,
            bound: None,
            within_bound: None,
        }
    }

    #[test]
    fn exact_power_law() {
        let rows: Vec<RateRow> = [1u64, 8, 64]
            .iter()
            .map(|&x| row(x, 2.0 * (x as f64).powf(-1.0 / 3.0)))
            .collect();
        let fit = fit_loglog_slope(&rows).unwrap();
        assert!((fit.slope + 1.0 / 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_rows_and_exclusions() {
        assert!(matches!(
            fit_loglog_slope(&[row(1, 1.0), row(2, 0.5)]),
            Err(Error::InsufficientData { needed: 3, got: 2 })
        ));
        let fit = fit_loglog_slope(&[row(1, 1.0), row(2, 0.0), row(4, 0.25), row(8, 0.125)]).unwrap();
        assert_eq!(fit.points_used, 3);
        assert_eq!(fit.warnings.len(), 1);
        assert!(matches!(
            fit_loglog_slope(&[row(1, 1.0), row(2, -1.0), row(4, 0.25)]),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn verdicts() {
        let rows: Vec<RateRow> = [4u64, 8, 16].iter().map(|&m| row(m, 1.0 / m as f64)).collect();
        let r = RateReport::assemble(rows.clone(), -0.5, None, 0.1, false, true).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        let r = RateReport::assemble(rows.clone(), -2.0, None, 0.1, false, true).unwrap();
        assert_eq!(r.verdict, Verdict::Fail);
        let r = RateReport::assemble(rows.clone(), -0.5, None, 0.1, false, false).unwrap();
        assert_eq!(r.verdict, Verdict::NotCertified);
        let mut bad = rows;
        bad[1].within_bound = Some(false);
        assert_eq!(
            RateReport::assemble(bad.clone(), -0.5, None, 0.1, true, true).unwrap().verdict,
            Verdict::Fail
        );
        assert_eq!(
            RateReport::assemble(bad, -0.5, None, 0.1, false, true).unwrap().verdict,
            Verdict::Pass
        );
    }
}
