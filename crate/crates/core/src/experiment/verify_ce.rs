//! The three numeric claims about the counterexample model, checked per n.

use std::path::PathBuf;

use crate::distances::kolmogorov_vs_normal;
use crate::distances::EmpiricalSample;
use crate::error::{Error, Result};
use crate::models::{Family, Model, ModelSpec};
use crate::numerics::{ordered_fold, SeedLineage};

/// Full paths used for the moment check are capped at this many replicates.
pub const MOMENT_BUDGET: usize = 20_000;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyCeRequest {
    pub n_grid: Vec<usize>,
    pub p: f64,
    pub replicates: usize,
    pub master_seed: u64,
    pub outputs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeCheckRow {
    pub n: usize,
    pub p: f64,
    pub replicates: usize,
    pub atom: f64,
    /// Binomial SE √(q(1−q)/R).
    pub atom_se: f64,
    pub atom_threshold: f64,
    pub atom_pass: bool,
    pub kolmogorov: f64,
    /// 1/(2√R), the largest pointwise SE of an empirical cdf.
    pub kolmogorov_se: f64,
    pub kolmogorov_threshold: f64,
    pub kolmogorov_pass: bool,
    pub moment_max: f64,
    pub moment_se: f64,
    pub moment_cap: f64,
    pub moment_pass: bool,
    pub moment_replicates: usize,
}

impl CeCheckRow {
    pub fn passed(&self) -> bool {
        self.atom_pass && self.kolmogorov_pass && self.moment_pass
    }
}

/// Per-index mean and SE of |X_k|^p over `replicates` full paths. Blocks are
/// reduced in a fixed order so the result does not depend on the thread count.
pub(crate) fn ce_abs_moments(model: &Model, p: f64, seed: u64, replicates: usize) -> Vec<(f64, f64)> {
    let n = model.n();
    let (s1, s2) = ordered_fold(
        replicates,
        || (vec![0.0; n], vec![0.0; n]),
        |(s1, s2), r| {
            let path = model.sample_path(SeedLineage::for_replicate(seed, n, r));
            for (k, x) in path.increments.iter().enumerate() {
                let v = x.abs().powf(p);
                s1[k] += v;
                s2[k] += v * v;
            }
        },
        |(mut a, mut b), (c, d)| {
            for k in 0..n {
                a[k] += c[k];
                b[k] += d[k];
            }
            (a, b)
        },
    );
    let r = replicates as f64;
    (0..n)
        .map(|k| {
            let mean = s1[k] / r;
            let var = ((s2[k] - r * mean * mean) / (r - 1.0)).max(0.0);
            (mean, (var / r).sqrt())
        })
        .collect()
}

fn check_n(n: usize, req: &VerifyCeRequest) -> Result<CeCheckRow> {
    let model = Model::compile(&ModelSpec::new(n, req.p, Family::CeLowerbound {}))?;
    let params = *model.ce_params().expect("ce model");
    let r = req.replicates;
    let sums = model.replicate_sums(req.master_seed, r);
    let zeros = sums.iter().filter(|s| **s == 0.0).count();
    let atom = zeros as f64 / r as f64;
    let atom_se = (atom * (1.0 - atom) / r as f64).sqrt();
    let scale = (n as f64).sqrt();
    let normalized: Vec<f64> = sums.iter().map(|s| s / scale).collect();
    let kolmogorov = kolmogorov_vs_normal(&EmpiricalSample::new(normalized, "ce_lowerbound")?)?;
    let kolmogorov_se = 0.5 / (r as f64).sqrt();

    let mr = r.min(MOMENT_BUDGET);
    let moments = ce_abs_moments(&model, req.p, req.master_seed, mr);
    let cap = params.moment_cap();
    let moment_pass = moments.iter().all(|(m, se)| *m <= cap + 3.0 * se);
    let (moment_max, moment_se) = moments
        .iter()
        .cloned()
        .fold((f64::NEG_INFINITY, 0.0), |best, x| if x.0 > best.0 { x } else { best });

    Ok(CeCheckRow {
        n,
        p: req.p,
        replicates: r,
        atom,
        atom_se,
        atom_threshold: params.atom_threshold(),
        atom_pass: atom >= params.atom_threshold() - 3.0 * atom_se,
        kolmogorov,
        kolmogorov_se,
        kolmogorov_threshold: params.kolmogorov_threshold(),
        kolmogorov_pass: kolmogorov >= params.kolmogorov_threshold() - 3.0 * kolmogorov_se,
        moment_max,
        moment_se,
        moment_cap: cap,
        moment_pass,
        moment_replicates: mr,
    })
}

pub fn verify_ce(req: &VerifyCeRequest) -> Result<Vec<CeCheckRow>> {
    if req.n_grid.is_empty() {
        return Err(Error::config("verify-ce: n grid is empty"));
    }
    if req.replicates < 2 {
        return Err(Error::config("verify-ce: at least 2 replicates are needed"));
    }
    // Reject bad grid points before any sampling.
    for &n in &req.n_grid {
        Model::compile(&ModelSpec::new(n, req.p, Family::CeLowerbound {}))?;
    }
    req.n_grid.iter().map(|&n| check_n(n, req)).collect()
}

pub const VERIFY_CE_CSV_HEADER: &str = "n,p,replicates,atom,atom_se,atom_threshold,atom_pass,kolmogorov,kolmogorov_se,kolmogorov_threshold,kolmogorov_pass,moment_max,moment_se,moment_cap,moment_pass,moment_replicates";

pub fn verify_ce_csv(rows: &[CeCheckRow]) -> String {
    let mut out = String::from(VERIFY_CE_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out += &format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.p,
            r.replicates,
            r.atom,
            r.atom_se,
            r.atom_threshold,
            r.atom_pass,
            r.kolmogorov,
            r.kolmogorov_se,
            r.kolmogorov_threshold,
            r.kolmogorov_pass,
            r.moment_max,
            r.moment_se,
            r.moment_cap,
            r.moment_pass,
            r.moment_replicates
        );
    }
    out
}
