//! Log-log rate fits of distance series against predicted exponents.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::distances::DistanceRow;
use crate::error::{Error, Result};

/// Below this many points a fit is never conclusive.
pub const MIN_POINTS: usize = 4;
/// Required span of the grid, in decades of n.
pub const MIN_DECADES: f64 = 2.0;
/// Seeds needed before the CI comes from refits instead of the regression SE.
pub const MIN_SEEDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    Kolmogorov,
    W1,
    /// W₁ of S_n/√V_n, i.e. W₁ of S_n divided by √V_n.
    W1Normalized,
}

impl DistanceKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "kolmogorov" => Ok(Self::Kolmogorov),
            "w1" => Ok(Self::W1),
            "w1_normalized" => Ok(Self::W1Normalized),
            other => Err(Error::config(format!(
                "unknown distance kind {other:?} (expected kolmogorov, w1 or w1_normalized)"
            ))),
        }
    }
}

impl fmt::Display for DistanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Kolmogorov => "kolmogorov",
            Self::W1 => "w1",
            Self::W1Normalized => "w1_normalized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub v_n: Option<f64>,
    pub distance: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSeries {
    pub model_id: String,
    pub kind: DistanceKind,
    pub points: Vec<RatePoint>,
    /// Points dropped before fitting, with the reason.
    pub notes: Vec<String>,
}

impl RateSeries {
    /// Non-positive or non-finite distances are dropped and noted.
    pub fn new(model_id: impl Into<String>, kind: DistanceKind, points: Vec<RatePoint>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].n >= w[1].n) {
            return Err(Error::config("rate series: n must be strictly increasing"));
        }
        let mut notes = Vec::new();
        let mut kept = Vec::with_capacity(points.len());
        for pt in points {
            if pt.n == 0 {
                return Err(Error::config("rate series: n must be positive"));
            }
            if pt.distance > 0.0 && pt.distance.is_finite() {
                kept.push(pt);
            } else {
                notes.push(format!("n={} excluded: distance {}", pt.n, pt.distance));
            }
        }
        Ok(Self {
            model_id: model_id.into(),
            kind,
            points: kept,
            notes,
        })
    }

    /// Build from distance CSV rows of one model. W₁ standard errors that are
    /// not finite are treated as unknown, which disables weighting.
    pub fn from_distance_rows(rows: &[DistanceRow], model_id: &str, kind: DistanceKind) -> Result<Self> {
        let mut rows: Vec<&DistanceRow> = rows.iter().filter(|r| r.model_id == model_id).collect();
        if rows.is_empty() {
            return Err(Error::config(format!("no distance rows for model {model_id:?}")));
        }
        rows.sort_by_key(|r| r.n);
        let points = rows
            .iter()
            .map(|r| {
                let (d, se) = match kind {
                    DistanceKind::Kolmogorov => (r.report.kolmogorov, r.report.mc_se_kolmogorov),
                    DistanceKind::W1 | DistanceKind::W1Normalized => (r.report.w1, r.report.mc_se_w1),
                };
                RatePoint {
                    n: r.n,
                    v_n: None,
                    distance: d,
                    se: if se.is_finite() { se } else { 0.0 },
                }
            })
            .collect();
        Self::new(model_id, kind, points)
    }

    pub fn decades(&self) -> f64 {
        match (self.points.first(), self.points.last()) {
            (Some(a), Some(b)) => (b.n as f64 / a.n as f64).log10(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitVariant {
    /// log d against log n.
    Raw,
    /// log d − log log n against log n.
    LogCorrected,
}

impl fmt::Display for FitVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Raw => "raw",
            Self::LogCorrected => "log_corrected",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Consistent => "consistent",
            Self::Inconsistent => "inconsistent",
            Self::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitResult {
    pub model_id: String,
    pub kind: DistanceKind,
    pub points: usize,
    pub seeds: usize,
    pub exponent: f64,
    pub intercept: f64,
    /// 95% half-width.
    pub ci_halfwidth: f64,
    pub log_corrected_exponent: f64,
    pub log_corrected_intercept: f64,
    pub log_corrected_ci_halfwidth: f64,
    pub target_exponent: f64,
    pub tolerance: f64,
    /// Which exponent the verdict compares against the target.
    pub compared: FitVariant,
    pub verdict: Verdict,
}

impl RateFitResult {
    pub fn compared_exponent(&self) -> (f64, f64) {
        match self.compared {
            FitVariant::Raw => (self.exponent, self.ci_halfwidth),
            FitVariant::LogCorrected => (self.log_corrected_exponent, self.log_corrected_ci_halfwidth),
        }
    }
}

/// Weighted least squares line y = a + b x.
#[derive(Debug, Clone, Copy)]
struct Line {
    intercept: f64,
    slope: f64,
    /// Standard error of the slope from the residuals; NaN with < 3 points.
    slope_se: f64,
}

fn wls(x: &[f64], y: &[f64], w: &[f64]) -> Line {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - mx;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let k = x.len();
    let slope_se = if k > 2 {
        let rss: f64 = (0..k)
            .map(|i| {
                let r = y[i] - intercept - slope * x[i];
                w[i] * r * r
            })
            .sum();
        (rss / (k as f64 - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Line { intercept, slope, slope_se }
}

fn t975(df: usize) -> f64 {
    StudentsT::new(0.0, 1.0, df as f64)
        .map(|t| t.inverse_cdf(0.975))
        .unwrap_or(f64::NAN)
}

struct RawFit {
    raw: Line,
    corrected: Line,
    points: usize,
}

/// Weights 1/(se/d)², the delta-method variance of log d; uniform when any
/// SE is missing. Points with n < 3 are skipped by the corrected fit.
fn fit_lines(series: &RateSeries) -> Option<RawFit> {
    let pts = &series.points;
    if pts.len() < 2 {
        return None;
    }
    let weighted = pts.iter().all(|p| p.se > 0.0 && p.se.is_finite());
    let w: Vec<f64> = pts
        .iter()
        .map(|p| if weighted { (p.distance / p.se).powi(2) } else { 1.0 })
        .collect();
    let x: Vec<f64> = pts.iter().map(|p| (p.n as f64).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.distance.ln()).collect();
    let raw = wls(&x, &y, &w);

    let idx: Vec<usize> = (0..pts.len()).filter(|&i| pts[i].n >= 3).collect();
    let corrected = if idx.len() >= 2 {
        let xc: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
        let yc: Vec<f64> = idx.iter().map(|&i| y[i] - x[i].ln()).collect();
        let wc: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
        wls(&xc, &yc, &wc)
    } else {
        Line {
            intercept: f64::NAN,
            slope: f64::NAN,
            slope_se: f64::NAN,
        }
    };
    Some(RawFit {
        raw,
        corrected,
        points: pts.len(),
    })
}

fn ci_from_se(line: &Line, points: usize) -> f64 {
    if points > 2 {
        t975(points - 2) * line.slope_se
    } else {
        f64::NAN
    }
}

fn conclusive(series: &RateSeries) -> bool {
    series.points.len() >= MIN_POINTS && series.decades() >= MIN_DECADES - 1e-12
}

fn verdict(exponent: f64, ci: f64, target: f64, tolerance: f64, conclusive: bool) -> Verdict {
    if !conclusive || !exponent.is_finite() {
        return Verdict::Inconclusive;
    }
    let slack = if ci.is_finite() { ci.max(tolerance) } else { tolerance };
    if (exponent - target).abs() <= slack {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    }
}

fn assemble(
    series: &RateSeries,
    fit: Option<RawFit>,
    cis: (f64, f64),
    seeds: usize,
    target: f64,
    tolerance: f64,
    compared: FitVariant,
    conclusive: bool,
) -> RateFitResult {
    let nan = f64::NAN;
    let (raw, corr, points) = match &fit {
        Some(f) => (f.raw, f.corrected, f.points),
        None => {
            let l = Line {
                intercept: nan,
                slope: nan,
                slope_se: nan,
            };
            (l, l, series.points.len())
        }
    };
    let mut out = RateFitResult {
        model_id: series.model_id.clone(),
        kind: series.kind,
        points,
        seeds,
        exponent: raw.slope,
        intercept: raw.intercept,
        ci_halfwidth: cis.0,
        log_corrected_exponent: corr.slope,
        log_corrected_intercept: corr.intercept,
        log_corrected_ci_halfwidth: cis.1,
        target_exponent: target,
        tolerance,
        compared,
        verdict: Verdict::Inconclusive,
    };
    let (e, ci) = out.compared_exponent();
    out.verdict = verdict(e, ci, target, tolerance, conclusive);
    out
}

/// Fit one series. The CI is t-based from the weighted residuals; use
/// [`fit_replicated`] for refits across independent seeds.
pub fn fit(series: &RateSeries, target: f64, tolerance: f64) -> RateFitResult {
    fit_variant(series, target, tolerance, FitVariant::Raw)
}

pub fn fit_variant(series: &RateSeries, target: f64, tolerance: f64, compared: FitVariant) -> RateFitResult {
    let f = fit_lines(series);
    let cis = match &f {
        Some(f) => (ci_from_se(&f.raw, f.points), ci_from_se(&f.corrected, f.points)),
        None => (f64::NAN, f64::NAN),
    };
    assemble(series, f, cis, 1, target, tolerance, compared, conclusive(series))
}

/// Fit the pooled mean series of several seeds and take the CI from the
/// spread of the per-seed exponents: t_{0.975, m−1}·sd/√m. With fewer than
/// [`MIN_SEEDS`] seeds the verdict is inconclusive.
pub fn fit_replicated(
    per_seed: &[RateSeries],
    target: f64,
    tolerance: f64,
    compared: FitVariant,
) -> Result<RateFitResult> {
    let first = per_seed
        .first()
        .ok_or_else(|| Error::config("fit_replicated: no series"))?;
    for s in per_seed {
        let same_grid = s.points.len() == first.points.len()
            && s.points.iter().zip(&first.points).all(|(a, b)| a.n == b.n);
        if !same_grid {
            return Err(Error::config("fit_replicated: series must share the same n grid"));
        }
    }
    let m = per_seed.len();
    let pooled_points = first
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let ds: Vec<f64> = per_seed.iter().map(|s| s.points[i].distance).collect();
            let (mean, se) = crate::numerics::mean_and_se(&ds);
            RatePoint {
                n: p.n,
                v_n: p.v_n,
                distance: mean,
                se: if m > 1 { se } else { p.se },
            }
        })
        .collect();
    let pooled = RateSeries::new(first.model_id.clone(), first.kind, pooled_points)?;

    let mut raw = Vec::with_capacity(m);
    let mut corr = Vec::with_capacity(m);
    for s in per_seed {
        if let Some(f) = fit_lines(s) {
            raw.push(f.raw.slope);
            corr.push(f.corrected.slope);
        }
    }
    let spread = |v: &[f64]| {
        if v.len() < 2 {
            return f64::NAN;
        }
        let (_, se) = crate::numerics::mean_and_se(v);
        t975(v.len() - 1) * se
    };
    let cis = (spread(&raw), spread(&corr));
    let ok = conclusive(&pooled) && m >= MIN_SEEDS;
    let f = fit_lines(&pooled);
    Ok(assemble(&pooled, f, cis, m, target, tolerance, compared, ok))
}

pub const RATEFIT_CSV_HEADER: &str = "model_id,distance_kind,points,seeds,exponent,intercept,ci_halfwidth,log_corrected_exponent,log_corrected_intercept,log_corrected_ci_halfwidth,target_exponent,tolerance,compared,verdict";

pub fn ratefit_csv(results: &[RateFitResult]) -> String {
    let mut out = String::from(RATEFIT_CSV_HEADER);
    out.push('\n');
    for r in results {
        out += &format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.model_id,
            r.kind,
            r.points,
            r.seeds,
            r.exponent,
            r.intercept,
            r.ci_halfwidth,
            r.log_corrected_exponent,
            r.log_corrected_intercept,
            r.log_corrected_ci_halfwidth,
            r.target_exponent,
            r.tolerance,
            r.compared,
            r.verdict
        );
    }
    out
}

pub fn write_ratefit_csv(path: &Path, results: &[RateFitResult]) -> Result<()> {
    std::fs::write(path, ratefit_csv(results)).map_err(|e| Error::io(path, e))
}

/// Smallest constant C with d ≤ C·shape(n) at every point, and the ratio
/// max/min of d/shape over the grid.
pub fn envelope_constant(points: &[RatePoint], shape: impl Fn(&RatePoint) -> f64) -> (f64, f64) {
    let ratios: Vec<f64> = points.iter().map(|p| p.distance / shape(p)).collect();
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    (hi, hi / lo)
}
