//! Exact one-dimensional distances between an empirical sample and N(0, 1).
//!
//! The empirical cdf is right-continuous, equal to i/R on [x_(i), x_(i+1)).
//! The Kolmogorov distance is attained at a one-sided limit of some jump, and
//! the L¹ distance is integrated piecewise in closed form through
//! J(x) = ∫_{-∞}^x Φ, so neither needs a grid or quadrature.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::gaussian::{j_unchecked, phi_cdf, quantile_unchecked, INV_SQRT_2PI};

/// Number of contiguous replicate batches behind the W₁ standard error.
pub const W1_BATCHES: usize = 10;

/// Which streams produced a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleLineage {
    pub master_seed: u64,
    /// Stream id of replicate 0; replicate i used `first_stream + i`.
    pub first_stream: u64,
}

/// Sorted replicate values of a normalized statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
    lineage: Option<SampleLineage>,
    label: String,
}

impl EmpiricalSample {
    /// Sorts `values`; rejects empty input and non-finite entries.
    pub fn new(mut values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("EmpiricalSample::new", "sample is empty"));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(
                "EmpiricalSample::new",
                format!("non-finite value {bad}"),
            ));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self {
            values,
            lineage: None,
            label: label.into(),
        })
    }

    pub fn with_lineage(mut self, lineage: SampleLineage) -> Self {
        self.lineage = Some(lineage);
        self
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn replicates(&self) -> usize {
        self.values.len()
    }

    pub fn lineage(&self) -> Option<SampleLineage> {
        self.lineage
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Multiply every value by `c` (re-sorting when `c < 0`).
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| v * c).collect();
        let mut out = Self::new(values, self.label.clone())?;
        out.lineage = self.lineage;
        Ok(out)
    }
}

fn nonempty(op: &'static str, sample: &EmpiricalSample) -> Result<()> {
    if sample.values.is_empty() {
        Err(Error::domain(op, "sample is empty"))
    } else {
        Ok(())
    }
}

/// sup_x |F̂_R(x) − Φ(x)|.
pub fn kolmogorov_vs_normal(sample: &EmpiricalSample) -> Result<f64> {
    nonempty("kolmogorov_vs_normal", sample)?;
    Ok(kolmogorov_sorted(&sample.values))
}

fn kolmogorov_sorted(xs: &[f64]) -> f64 {
    let r = xs.len() as f64;
    let mut worst = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = phi_cdf(x);
        let below = i as f64 / r;
        let above = (i + 1) as f64 / r;
        worst = worst.max((f - below).abs()).max((above - f).abs());
    }
    worst.min(1.0)
}

/// ∫ |F̂_R − Φ| over the real line, in closed form.
pub fn w1_vs_normal(sample: &EmpiricalSample) -> Result<f64> {
    nonempty("w1_vs_normal", sample)?;
    Ok(w1_sorted(&sample.values))
}

// ∫_u^v (Φ(t) − c) dt, using the complementary form right of zero so the
// result does not cancel against J(t) ≈ t.
#[inline]
fn excess_over(u: f64, v: f64, c: f64) -> f64 {
    if u + v < 0.0 {
        j_unchecked(v) - j_unchecked(u) - c * (v - u)
    } else {
        (1.0 - c) * (v - u) - (j_unchecked(-u) - j_unchecked(-v))
    }
}

fn w1_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    let r = n as f64;
    let mut total = j_unchecked(xs[0]) + j_unchecked(-xs[n - 1]);
    let mut f_left = phi_cdf(xs[0]);
    for i in 1..n {
        let (u, v) = (xs[i - 1], xs[i]);
        let f_right = phi_cdf(v);
        if v > u {
            let c = i as f64 / r;
            total += if f_left >= c {
                excess_over(u, v, c)
            } else if f_right <= c {
                -excess_over(u, v, c)
            } else {
                let z = quantile_unchecked(c).clamp(u, v);
                -excess_over(u, z, c) + excess_over(z, v, c)
            };
        }
        f_left = f_right;
    }
    total.max(0.0)
}

/// Result of the quantile-coupling estimate of W_r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WrEstimate {
    pub r: f64,
    pub value: f64,
    /// True when r < 1: the comonotone coupling is feasible but not claimed optimal.
    pub is_upper_bound: bool,
}

/// (1/R) Σ |x_(i) − Φ⁻¹((i − ½)/R)|^r for r in (0, 1].
pub fn wr_quantile_coupling(sample: &EmpiricalSample, r: f64) -> Result<WrEstimate> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::domain(
            "wr_quantile_coupling",
            format!("order r = {r} outside (0, 1]"),
        ));
    }
    nonempty("wr_quantile_coupling", sample)?;
    let n = sample.values.len() as f64;
    let sum: f64 = sample
        .values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let q = quantile_unchecked((i as f64 + 0.5) / n);
            let d = (x - q).abs();
            if r == 1.0 {
                d
            } else {
                d.powf(r)
            }
        })
        .sum();
    Ok(WrEstimate {
        r,
        value: sum / n,
        is_upper_bound: r < 1.0,
    })
}

/// The constant 1 + (2π)^{-1/2} of the Kolmogorov–Wasserstein transfer.
pub const TRANSFER_CONSTANT: f64 = 1.0 + INV_SQRT_2PI;

/// Upper bound on the Kolmogorov distance from W_{p−2}: (1 + (2π)^{-1/2}) W^{1/(p−1)}.
pub fn be_transfer(wr_value: f64, p: f64) -> Result<f64> {
    if !(p > 2.0 && p <= 3.0) {
        return Err(Error::domain("be_transfer", format!("p = {p} outside (2, 3]")));
    }
    if !(wr_value >= 0.0) {
        return Err(Error::domain(
            "be_transfer",
            format!("distance {wr_value} must be nonnegative"),
        ));
    }
    Ok(TRANSFER_CONSTANT * wr_value.powf(1.0 / (p - 1.0)))
}

/// Exact W₁ between two empirical laws with the same number of atoms.
pub fn two_sample_w1(a: &EmpiricalSample, b: &EmpiricalSample) -> Result<f64> {
    if a.values.len() != b.values.len() {
        return Err(Error::domain(
            "two_sample_w1",
            format!(
                "replicate counts differ ({} vs {})",
                a.values.len(),
                b.values.len()
            ),
        ));
    }
    nonempty("two_sample_w1", a)?;
    let sum: f64 = a
        .values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / a.values.len() as f64)
}

/// Dvoretzky–Kiefer–Wolfowitz 95% envelope √(ln(2/0.05)/(2R)).
pub fn dkw_envelope(replicates: usize) -> f64 {
    ((2.0f64 / 0.05).ln() / (2.0 * replicates as f64)).sqrt()
}

/// Kolmogorov and Wasserstein distances of one sample to N(0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub kolmogorov: f64,
    pub w1: f64,
    pub wr: Option<WrEstimate>,
    pub mc_se_kolmogorov: f64,
    pub mc_se_w1: f64,
    /// (1 + (2π)^{-1/2}) W_{p−2}^{1/(p−1)}, when a moment order p in (2, 3] is attached.
    pub be_transfer: Option<f64>,
}

impl DistanceReport {
    /// Measure a sample given in replicate order.
    ///
    /// `p`, when in (2, 3], adds W_{p−2} (exact W₁ at p = 3, quantile
    /// coupling below) and the transfer bound built from it.
    pub fn measure(
        replicate_values: &[f64],
        p: Option<f64>,
        label: &str,
    ) -> Result<(EmpiricalSample, DistanceReport)> {
        let sample = EmpiricalSample::new(replicate_values.to_vec(), label)?;
        let kolmogorov = kolmogorov_sorted(&sample.values);
        let w1 = w1_sorted(&sample.values);
        let mc_se_w1 = batch_se_w1(replicate_values);
        let (wr, be) = match p {
            Some(p) if p > 2.0 && p <= 3.0 => {
                let r = p - 2.0;
                let wr = if r == 1.0 {
                    WrEstimate {
                        r,
                        value: w1,
                        is_upper_bound: false,
                    }
                } else {
                    wr_quantile_coupling(&sample, r)?
                };
                (Some(wr), Some(be_transfer(wr.value, p)?))
            }
            _ => (None, None),
        };
        let report = DistanceReport {
            kolmogorov,
            w1,
            wr,
            mc_se_kolmogorov: dkw_envelope(sample.replicates()),
            mc_se_w1,
            be_transfer: be,
        };
        Ok((sample, report))
    }

    /// Kolmogorov ≤ transfer bound + 3 (SE_K + SE_W); vacuous when no transfer bound is attached.
    pub fn transfer_holds(&self) -> bool {
        match self.be_transfer {
            Some(bound) => {
                let slack = 3.0 * (self.mc_se_kolmogorov + finite_or_zero(self.mc_se_w1));
                self.kolmogorov <= bound + slack
            }
            None => true,
        }
    }
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// Batch-means standard error of W₁ over [`W1_BATCHES`] contiguous splits.
/// NaN when there are fewer replicates than batches.
pub fn batch_se_w1(replicate_values: &[f64]) -> f64 {
    let n = replicate_values.len();
    if n < W1_BATCHES {
        return f64::NAN;
    }
    let mut batch_values = Vec::with_capacity(W1_BATCHES);
    let mut scratch = Vec::with_capacity(n / W1_BATCHES + 1);
    for b in 0..W1_BATCHES {
        let lo = b * n / W1_BATCHES;
        let hi = (b + 1) * n / W1_BATCHES;
        scratch.clear();
        scratch.extend_from_slice(&replicate_values[lo..hi]);
        scratch.sort_unstable_by(f64::total_cmp);
        batch_values.push(w1_sorted(&scratch));
    }
    crate::numerics::mean_and_se(&batch_values).1
}

/// One row of the distance CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceRow {
    pub model_id: String,
    pub n: usize,
    pub p: f64,
    pub replicates: usize,
    pub report: DistanceReport,
}

pub const DISTANCE_CSV_HEADER: &str = "model_id,n,p,replicates,kolmogorov,kolmogorov_se,w1,w1_se,wr_r,wr_value,wr_is_upper_bound,be_transfer";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl DistanceRow {
    pub fn to_csv_line(&self) -> String {
        let r = &self.report;
        let mut line = String::new();
        write!(
            line,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.model_id,
            self.n,
            self.p,
            self.replicates,
            r.kolmogorov,
            r.mc_se_kolmogorov,
            r.w1,
            r.mc_se_w1,
            opt(r.wr.map(|w| w.r)),
            opt(r.wr.map(|w| w.value)),
            r.wr.map(|w| w.is_upper_bound.to_string()).unwrap_or_default(),
            opt(r.be_transfer),
        )
        .expect("writing to a String");
        line
    }
}

pub fn distance_csv(rows: &[DistanceRow]) -> String {
    let mut out = String::from(DISTANCE_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

pub fn write_distance_csv(path: &Path, rows: &[DistanceRow]) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(distance_csv(rows).as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub fn read_distance_csv(path: &Path) -> Result<Vec<DistanceRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_distance_csv(&text).map_err(|detail| Error::Parse {
        path: path.to_path_buf(),
        detail,
    })
}

pub fn parse_distance_csv(text: &str) -> std::result::Result<Vec<DistanceRow>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == DISTANCE_CSV_HEADER => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    let num = |field: &str, name: &str| -> std::result::Result<f64, String> {
        field
            .parse::<f64>()
            .map_err(|e| format!("column {name}: {field:?}: {e}"))
    };
    let opt_num = |field: &str, name: &str| -> std::result::Result<Option<f64>, String> {
        if field.is_empty() {
            Ok(None)
        } else {
            num(field, name).map(Some)
        }
    };
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 12 {
            return Err(format!("line {}: expected 12 fields, got {}", lineno + 2, f.len()));
        }
        let wr_r = opt_num(f[8], "wr_r")?;
        let wr_value = opt_num(f[9], "wr_value")?;
        let wr = match (wr_r, wr_value) {
            (Some(r), Some(value)) => Some(WrEstimate {
                r,
                value,
                is_upper_bound: f[10] == "true",
            }),
            _ => None,
        };
        rows.push(DistanceRow {
            model_id: f[0].to_string(),
            n: f[1].parse().map_err(|e| format!("column n: {e}"))?,
            p: num(f[2], "p")?,
            replicates: f[3].parse().map_err(|e| format!("column replicates: {e}"))?,
            report: DistanceReport {
                kolmogorov: num(f[4], "kolmogorov")?,
                mc_se_kolmogorov: num(f[5], "kolmogorov_se")?,
                w1: num(f[6], "w1")?,
                mc_se_w1: num(f[7], "w1_se")?,
                wr,
                be_transfer: opt_num(f[11], "be_transfer")?,
            },
        });
    }
    Ok(rows)
}
