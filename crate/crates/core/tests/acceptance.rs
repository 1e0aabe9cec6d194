//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits with status 1 if any criterion fails.
//!
//! Criterion numbers given as arguments select a subset, e.g.
//! `cargo test --test acceptance -- 5 8`. CSVs land in
//! `target/tmp/acceptance/`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;

use cltlab::bounds::{
    berry_esseen_bound, rho_mixing_bound, seqdyn_bound, u_profile, BoundOptions, PsiMode, PsiProfile, UMethod,
};
use cltlab::distances::{distance_csv, w1_vs_normal, DistanceReport, DistanceRow, EmpiricalSample, TRANSFER_CONSTANT};
use cltlab::experiment::{self, default_family, verify_ce, verify_ce_csv, CeCheckRow, ExperimentConfig, VerifyCeRequest};
use cltlab::models::ce::branch_sum;
use cltlab::models::{
    ce_generate, ChainIncrements, ChainKind, CoefficientRule, Family, LinearBase, Model, ModelSpec, PathAux, SigmaRule,
};
use cltlab::numerics::{
    integral_of_phi, mean_and_se, normal_abs_moment, normal_cdf, normal_pdf, normal_quantile, quadrature,
    SeedLineage,
};
use cltlab::ratefit::{
    fit_replicated, fit_variant, ratefit_csv, DistanceKind, FitVariant, RatePoint, RateSeries,
};

const CE_GRID: [usize; 3] = [64, 256, 1024];
const CE_REPLICATES: usize = 500_000;
const SEED_CE: u64 = 20_001;
const SEED_CE_MOMENTS: u64 = 20_003;
const SEED_RADEMACHER: u64 = 20_005;
const SEED_AR: u64 = 20_100;
const SEED_CHAIN: u64 = 20_007;
const SEED_MAPS: u64 = 20_009;
const SEED_ORACLE: u64 = 20_011;

/// Everything one acceptance run produced.
#[derive(Default)]
struct Run {
    csv: BTreeMap<String, String>,
    /// p = 3 reports, for the transfer check.
    reports: Vec<(String, DistanceReport)>,
    ce: Option<Vec<CeCheckRow>>,
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn compile(n: usize, p: f64, family: Family) -> Model {
    Model::compile(&ModelSpec::new(n, p, family)).expect("model compiles")
}

fn measure(run: &mut Run, model_id: &str, n: usize, normalized: &[f64]) -> DistanceRow {
    let (_, report) = DistanceReport::measure(normalized, Some(3.0), model_id).expect("nonempty sample");
    run.reports.push((format!("{model_id} n={n}"), report));
    DistanceRow {
        model_id: model_id.into(),
        n,
        p: 3.0,
        replicates: normalized.len(),
        report,
    }
}

/// Smallest C with d ≤ C·shape at the first grid point; the remaining points
/// must satisfy d ≤ C·shape + 3 SE.
fn first_point_envelope(points: &[(usize, f64, f64, f64)]) -> (f64, bool) {
    let (_, d0, _, s0) = points[0];
    let c = d0 / s0;
    let ok = points.iter().all(|(_, d, se, shape)| *d <= c * shape + 3.0 * se);
    (c, ok)
}

// ---------------------------------------------------------------- 1, 2, 3

fn ce_rows(run: &mut Run) -> Vec<CeCheckRow> {
    if let Some(rows) = &run.ce {
        return rows.clone();
    }
    let req = VerifyCeRequest {
        n_grid: CE_GRID.to_vec(),
        p: 3.0,
        replicates: CE_REPLICATES,
        master_seed: SEED_CE,
        outputs: None,
    };
    let rows = verify_ce(&req).expect("verify-ce runs");
    run.csv.insert("verify_ce.csv".into(), verify_ce_csv(&rows));
    let mut drows = Vec::new();
    for n in CE_GRID {
        let model = compile(n, 3.0, Family::CeLowerbound {});
        let scale = (n as f64).sqrt();
        let sums: Vec<f64> = model.replicate_sums(SEED_CE, CE_REPLICATES).iter().map(|s| s / scale).collect();
        drows.push(measure(run, "ce_lowerbound", n, &sums));
    }
    run.csv.insert("ce_distances.csv".into(), distance_csv(&drows));
    run.ce = Some(rows.clone());
    rows
}

fn criterion_1(run: &mut Run) -> Verdict {
    let rows = ce_rows(run);
    let mut detail = String::new();
    for r in &rows {
        let _ = write!(
            detail,
            "n={}: K={:.5} vs 0.06n^-1/4={:.5} (SE {:.1e}); ",
            r.n, r.kolmogorov, r.kolmogorov_threshold, r.kolmogorov_se
        );
    }
    let ok = rows.iter().all(|r| {
        (r.kolmogorov_threshold - 0.06 * (r.n as f64).powf(-0.25)).abs() < 1e-15
            && r.kolmogorov >= r.kolmogorov_threshold - 3.0 * r.kolmogorov_se
    });
    verdict(ok, detail)
}

fn criterion_2(run: &mut Run) -> Verdict {
    let rows = ce_rows(run);
    let mut detail = String::new();
    for r in &rows {
        let _ = write!(
            detail,
            "n={}: P(S=0)={:.5} vs 0.12n^-1/4={:.5} (SE {:.1e}); ",
            r.n, r.atom, r.atom_threshold, r.atom_se
        );
    }
    let atoms = rows.iter().all(|r| {
        (r.atom_threshold - 0.12 * (r.n as f64).powf(-0.25)).abs() < 1e-15
            && r.atom >= r.atom_threshold - 3.0 * r.atom_se
    });

    // Symbolic cancellation: b = k gives exactly 0 for any S_m and k.
    let mut rng = SeedLineage::new(SEED_CE, u64::MAX).rng();
    let mut symbolic = true;
    for _ in 0..100_000 {
        let s = (rng.open_unit() - 0.5) * 64.0;
        let k = 1 + (rng.next_u64() % 256) as usize;
        symbolic &= branch_sum(s, k, k) == 0.0;
    }
    // Full generator: S_n = 0 exactly when the branch cancels every trailing step.
    let params = *compile(64, 3.0, Family::CeLowerbound {}).ce_params().expect("ce");
    let mut bookkeeping = true;
    let mut zeros = 0;
    for rep in 0..50_000 {
        let d = ce_generate(&params, &mut SeedLineage::new(SEED_CE, rep).rng());
        let cancelled = d.branch_taken && d.cancel_count == params.k;
        bookkeeping &= (d.s_n == 0.0) == cancelled;
        zeros += cancelled as usize;
    }
    let _ = write!(
        detail,
        "symbolic b=k -> 0 on 1e5 draws: {symbolic}; generator zero bookkeeping ({zeros} atoms / 5e4): {bookkeeping}"
    );
    verdict(atoms && symbolic && bookkeeping && zeros > 0, detail)
}

/// Per-path statistics of the CE generator for one (n, p).
struct CeScan {
    count: usize,
    abs_p: Vec<f64>,
    abs_p2: Vec<f64>,
    /// Per bin of S_m on the branch: paths, Σu, Σu², Σv, Σv², where u and v
    /// are the means of X_j and X_j² over the trailing indices.
    bins: [[f64; 5]; 4],
    bookkeeping_errors: usize,
}

impl CeScan {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            abs_p: vec![0.0; n],
            abs_p2: vec![0.0; n],
            bins: [[0.0; 5]; 4],
            bookkeeping_errors: 0,
        }
    }

    fn merge(mut self, o: Self) -> Self {
        self.count += o.count;
        for k in 0..self.abs_p.len() {
            self.abs_p[k] += o.abs_p[k];
            self.abs_p2[k] += o.abs_p2[k];
        }
        for (a, b) in self.bins.iter_mut().zip(&o.bins) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        self.bookkeeping_errors += o.bookkeeping_errors;
        self
    }
}

fn scan_ce(n: usize, p: f64, replicates: usize) -> (Model, CeScan) {
    let model = compile(n, p, Family::CeLowerbound {});
    let params = *model.ce_params().expect("ce");
    const BLOCK: usize = 1024;
    let blocks: Vec<CeScan> = (0..replicates.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = CeScan::new(n);
            for r in b * BLOCK..((b + 1) * BLOCK).min(replicates) {
                let path = model.sample_path(SeedLineage::for_replicate(SEED_CE_MOMENTS, n, r as u64));
                acc.count += 1;
                for (k, x) in path.increments.iter().enumerate() {
                    let v = x.abs().powf(p);
                    acc.abs_p[k] += v;
                    acc.abs_p2[k] += v * v;
                }
                let PathAux::Ce { s_m, branch_taken, cancel_count } = path.aux else {
                    unreachable!()
                };
                let cancelled = branch_taken && cancel_count == params.k;
                acc.bookkeeping_errors += ((path.sum == 0.0) != cancelled) as usize;
                if branch_taken {
                    let tail = &path.increments[params.m..];
                    let u = tail.iter().sum::<f64>() / tail.len() as f64;
                    let v = tail.iter().map(|x| x * x).sum::<f64>() / tail.len() as f64;
                    let bin = 2 * (s_m > 0.0) as usize + (s_m.abs() >= 1.5 * params.a) as usize;
                    let cell = &mut acc.bins[bin];
                    cell[0] += 1.0;
                    cell[1] += u;
                    cell[2] += u * u;
                    cell[3] += v;
                    cell[4] += v * v;
                }
            }
            acc
        })
        .collect();
    let scan = blocks.into_iter().fold(CeScan::new(n), CeScan::merge);
    (model, scan)
}

fn mean_se_from_sums(count: f64, sum: f64, sum_sq: f64) -> (f64, f64) {
    let mean = sum / count;
    let var = ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0);
    (mean, (var / count).sqrt())
}

fn criterion_3(run: &mut Run) -> Verdict {
    const REPLICATES: usize = 40_000;
    let mut ok = true;
    let mut detail = String::new();
    let mut csv = String::from("p,n,k,mean_abs_p,se,cap\n");
    let mut bins_csv = String::from("p,n,bin,paths,mean_increment,se,mean_square,se\n");
    for p in [2.5, 3.0] {
        let cap = normal_abs_moment(p).unwrap() + 5f64.powf(p - 2.0);
        let mut worst: (f64, f64, usize) = (f64::NEG_INFINITY, 0.0, 0);
        let mut bins_ok = true;
        let mut bins_checked = 0;
        for n in CE_GRID {
            let (model, scan) = scan_ce(n, p, REPLICATES);
            assert!((model.ce_params().unwrap().moment_cap() - cap).abs() < 1e-12);
            let r = scan.count as f64;
            for k in 0..n {
                let (m, se) = mean_se_from_sums(r, scan.abs_p[k], scan.abs_p2[k]);
                let _ = writeln!(csv, "{p},{n},{},{m},{se},{cap}", k + 1);
                ok &= m <= cap + 3.0 * se;
                if m > worst.0 {
                    worst = (m, se, n);
                }
            }
            for (b, cell) in scan.bins.iter().enumerate() {
                let c = cell[0];
                if c < 30.0 {
                    bins_ok = false;
                    continue;
                }
                let (u, use_) = mean_se_from_sums(c, cell[1], cell[2]);
                let (v, vse) = mean_se_from_sums(c, cell[3], cell[4]);
                let _ = writeln!(bins_csv, "{p},{n},{b},{c},{u},{use_},{v},{vse}");
                bins_ok &= u.abs() <= 3.0 * use_ && (v - 1.0).abs() <= 3.0 * vse;
                bins_checked += 1;
            }
            ok &= scan.bookkeeping_errors == 0;
        }
        ok &= bins_ok;
        let _ = write!(
            detail,
            "p={p}: max_k E|X_k|^p={:.4}±{:.4} (n={}) <= cap {:.4}; {bins_checked} S_m-bins mean 0 / var 1 within 3 SE: {bins_ok}; ",
            worst.0, worst.1, worst.2, cap
        );
    }
    run.csv.insert("ce_moments.csv".into(), csv);
    run.csv.insert("ce_conditional_bins.csv".into(), bins_csv);
    verdict(ok, detail)
}

// ---------------------------------------------------------------- 4

fn criterion_4(run: &mut Run) -> Verdict {
    if run.reports.is_empty() {
        ce_rows(run);
    }
    let mut failures = Vec::new();
    let mut worst = 0.0f64;
    for (label, r) in &run.reports {
        let w = r.wr.expect("p = 3 attaches W1").value;
        let bound = TRANSFER_CONSTANT * w.sqrt();
        assert_eq!(r.be_transfer, Some(bound));
        let slack = 3.0 * (r.mc_se_kolmogorov + if r.mc_se_w1.is_finite() { r.mc_se_w1 } else { 0.0 });
        worst = worst.max(r.kolmogorov / (bound + slack));
        if !r.transfer_holds() || r.kolmogorov > bound + slack {
            failures.push(label.clone());
        }
    }
    verdict(
        failures.is_empty() && (TRANSFER_CONSTANT - 1.3989422804014327).abs() < 1e-15,
        format!(
            "{} reports at p=3; max K / (1.39894 W1^(1/2) + slack) = {worst:.4}; failures: {failures:?}",
            run.reports.len()
        ),
    )
}

// ---------------------------------------------------------------- 5

fn criterion_5(run: &mut Run) -> Verdict {
    const REPLICATES: usize = 200_000;
    let mut drows = Vec::new();
    let mut points = Vec::new();
    let mut env = Vec::new();
    for e in 7..=13 {
        let n = 1usize << e;
        let model = compile(n, 3.0, Family::RademacherIid { sigma: SigmaRule::default() });
        let scale = (n as f64).sqrt();
        let sums: Vec<f64> = model.replicate_sums(SEED_RADEMACHER, REPLICATES).iter().map(|s| s / scale).collect();
        let row = measure(run, "rademacher_iid", n, &sums);
        let shape = berry_esseen_bound(3.0, &model, &BoundOptions::default()).unwrap().total;
        points.push(RatePoint {
            n,
            v_n: Some(n as f64),
            distance: row.report.kolmogorov,
            se: row.report.mc_se_kolmogorov,
        });
        env.push((n, row.report.kolmogorov, row.report.mc_se_kolmogorov, shape));
        drows.push(row);
    }
    let series = RateSeries::new("rademacher_iid", DistanceKind::Kolmogorov, points).unwrap();
    let fit = fit_variant(&series, -0.5, 0.1, FitVariant::Raw);
    let (c, valid) = first_point_envelope(&env);
    run.csv.insert("rademacher_distances.csv".into(), distance_csv(&drows));
    run.csv.insert("rademacher_ratefit.csv".into(), ratefit_csv(std::slice::from_ref(&fit)));
    let rate_ok = (fit.exponent + 0.5).abs() <= 0.1;
    verdict(
        rate_ok && valid,
        format!(
            "fitted exponent {:.4} ± {:.4} (target -0.50 ± 0.10); K_n <= {c:.4}·V_n^(-1/4)(log)^(1/2) + 3 SE at all 7 n: {valid}",
            fit.exponent, fit.ci_halfwidth
        ),
    )
}

// ---------------------------------------------------------------- 6

fn criterion_6(run: &mut Run) -> Verdict {
    const REPLICATES: u64 = 5_000;
    const SEEDS: u64 = 8;
    let base = LinearBase::GaussianAr1 { phi: 0.5, innovation_sd: 1.0 };
    let grid: Vec<usize> = (6..=13).map(|e| 1usize << e).collect();
    let models: Vec<Model> = grid
        .iter()
        .map(|&n| {
            compile(n, 3.0, Family::LinearStatistic { base: base.clone(), alphas: CoefficientRule::default() })
        })
        .collect();
    let mut csv = String::from("n,master_seed,replicates,coupled_w1,se\n");
    let mut per_seed = Vec::new();
    for s in 0..SEEDS {
        let seed = SEED_AR + s;
        let points = models
            .iter()
            .map(|model| {
                let n = model.n();
                let norm = model.linear().unwrap().sum_alpha2().sqrt();
                // E|T_n − G| for the coupled reference G ~ N(0, σ²) bounds W1 from above.
                let gaps: Vec<f64> = (0..REPLICATES)
                    .into_par_iter()
                    .map(|r| {
                        let (s, g) = model.sum_with_reference(SeedLineage::for_replicate(seed, n, r));
                        (s / norm - g.expect("constant coefficients")).abs()
                    })
                    .collect();
                let (d, se) = mean_and_se(&gaps);
                let _ = writeln!(csv, "{n},{seed},{REPLICATES},{d},{se}");
                RatePoint { n, v_n: None, distance: d, se }
            })
            .collect();
        per_seed.push(RateSeries::new("linear_statistic", DistanceKind::W1, points).unwrap());
    }
    let fit = fit_replicated(&per_seed, -0.5, 0.1, FitVariant::LogCorrected).unwrap();
    let env: Vec<(usize, f64, f64, f64)> = grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let ds: Vec<f64> = per_seed.iter().map(|s| s.points[i].distance).collect();
            let (d, se) = mean_and_se(&ds);
            (n, d, se, (n as f64).ln() / (n as f64).sqrt())
        })
        .collect();
    let (c, valid) = first_point_envelope(&env);
    run.csv.insert("linear_coupling.csv".into(), csv);
    run.csv.insert("linear_ratefit.csv".into(), ratefit_csv(std::slice::from_ref(&fit)));
    let upper = fit.log_corrected_exponent + fit.log_corrected_ci_halfwidth;
    verdict(
        upper <= -0.40 && valid,
        format!(
            "log-corrected exponent {:.4} ± {:.4} over {} seeds (upper end {upper:.4} <= -0.40); raw {:.4}; W1 <= {c:.4}·n^(-1/2) log n + 3 SE at all 8 n: {valid}",
            fit.log_corrected_exponent, fit.log_corrected_ci_halfwidth, fit.seeds, fit.exponent
        ),
    )
}

// ---------------------------------------------------------------- 7

fn criterion_7(run: &mut Run) -> Verdict {
    const REPLICATES: usize = 50_000;
    const MAX_N: usize = 1 << 13;
    // Independent covariances: values ±1, stay probability 0.75, γ_k = 0.5^k.
    let rho = 0.5f64;
    let mut v = Vec::with_capacity(MAX_N);
    let (mut lag_sum, mut weighted) = (0.0f64, 0.0f64);
    for m in 1..=MAX_N {
        // V_m = m + 2 Σ_{k=1}^{m−1} (m − k) ρ^k; each step adds 2 Σ_{k<m} ρ^k.
        if m > 1 {
            lag_sum += rho.powi(m as i32 - 1);
            weighted += lag_sum;
        }
        v.push(m as f64 + 2.0 * weighted);
    }
    let mut running = 0.0f64;
    let oracle_c: Vec<f64> = v
        .iter()
        .enumerate()
        .map(|(i, vm)| {
            running = running.max((i + 1) as f64 / vm);
            running
        })
        .collect();
    let c_max = oracle_c.iter().cloned().fold(0.0, f64::max);

    let family = default_family("rho_mixing_chain").unwrap();
    let mut drows = Vec::new();
    let mut csv = String::from("n,c_n,v_n,w1_unnormalized,w1_se,bound,ratio\n");
    let mut ratios = Vec::new();
    let mut agree = true;
    for e in [7, 9, 11, 13] {
        let n = 1usize << e;
        let model = compile(n, 3.0, family.clone());
        let chain = model.chain().unwrap();
        let vn = model.exact_moments().v_n;
        let c_n = chain.c_n(n);
        agree &= (c_n - oracle_c[n - 1]).abs() <= 1e-12 && (vn - v[n - 1]).abs() <= 1e-9 * vn;
        let sd = vn.sqrt();
        let sums: Vec<f64> = model.replicate_sums(SEED_CHAIN, REPLICATES).iter().map(|s| s / sd).collect();
        let row = measure(run, "rho_mixing_chain", n, &sums);
        let w1 = row.report.w1 * sd;
        let bound = rho_mixing_bound(chain.k_n(), c_n, vn);
        ratios.push(w1 / bound);
        let _ = writeln!(csv, "{n},{c_n},{vn},{w1},{},{bound},{}", row.report.mc_se_w1 * sd, w1 / bound);
        drows.push(row);
    }
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    run.csv.insert("chain_distances.csv".into(), distance_csv(&drows));
    run.csv.insert("chain_bound_ratio.csv".into(), csv);
    verdict(
        c_max <= 3.0 && agree && hi / lo <= 5.0,
        format!(
            "max C_n over n <= 8192 = {c_max:.4} (<= 3); library C_n and V_n match the covariance oracle: {agree}; \
             W1(S_n, G_Vn)/[K_n(1+C_n log(1+C_n V_n))] in [{lo:.4}, {hi:.4}], max/min = {:.3} (<= 5)",
            hi / lo
        ),
    )
}

// ---------------------------------------------------------------- 8

fn criterion_8(run: &mut Run) -> Verdict {
    const REPLICATES: usize = 200_000;
    const MOMENT_REPLICATES: usize = 20_000;
    let family = default_family("sequential_maps").unwrap();
    let mut drows = Vec::new();
    let mut env = Vec::new();
    let mut var_ok = true;
    let mut var_csv = String::from("n,v_n_exact,v_n_mc,v_n_mc_se\n");
    let mut var_detail = Vec::new();
    for n in [16usize, 64, 256, 1024] {
        let model = compile(n, 3.0, family.clone());
        let exact = model.exact_moments().v_n;
        let est = model.estimate_moments(SEED_MAPS, MOMENT_REPLICATES);
        var_ok &= (exact - n as f64).abs() <= 1e-9 * n as f64 && (est.v_n - exact).abs() <= 3.0 * est.v_n_se;
        let _ = writeln!(var_csv, "{n},{exact},{},{}", est.v_n, est.v_n_se);
        var_detail.push(format!("{:.1}±{:.1}", est.v_n, est.v_n_se));
        let scale = (n as f64).sqrt();
        let sums: Vec<f64> = model.replicate_sums(SEED_MAPS, REPLICATES).iter().map(|s| s / scale).collect();
        let row = measure(run, "sequential_maps", n, &sums);
        env.push((n, row.report.w1, row.report.mc_se_w1, seqdyn_bound(n, n as f64) / scale));
        drows.push(row);
    }
    let decreasing = env.windows(2).all(|w| w[1].1 < w[0].1);
    let (c, valid) = first_point_envelope(&env);
    run.csv.insert("maps_distances.csv".into(), distance_csv(&drows));
    run.csv.insert("maps_variance.csv".into(), var_csv);
    let w1s: Vec<String> = env.iter().map(|e| format!("{:.4}", e.1)).collect();
    verdict(
        var_ok && decreasing && valid,
        format!(
            "V_n = n vs MC {} (within 3 SE: {var_ok}); W1 at n=16,64,256,1024: {} (decreasing: {decreasing}); \
             W1 <= {c:.5}·log(n+1)log(2+n)/sqrt(n) + 3 SE: {valid}",
            var_detail.join(", "),
            w1s.join(", ")
        ),
    )
}

// ---------------------------------------------------------------- 9

fn w1_by_quadrature(sorted: &[f64]) -> f64 {
    let r = sorted.len() as f64;
    let mut cuts = vec![-12.0];
    cuts.extend(sorted.iter().copied().filter(|x| *x > -12.0 && *x < 12.0));
    cuts.push(12.0);
    let mut total = 0.0;
    for w in cuts.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let mid = 0.5 * (w[0] + w[1]);
        let level = sorted.iter().filter(|x| **x <= mid).count() as f64 / r;
        let f = |x: f64| (level - normal_cdf(x).unwrap()).abs();
        total += quadrature(f, w[0], w[1], 1e-12).unwrap().value;
    }
    total
}

/// U_{ℓ,n}(p) for ℓ = 2..n by enumerating all 2^n state paths of the
/// two-state chain with transition [[0.9, 0.1], [0.3, 0.7]] and f = (1, −3).
fn u_by_enumeration(p: f64, n: usize) -> Vec<f64> {
    let pm = [[0.9f64, 0.1], [0.3, 0.7]];
    let pi = [0.75f64, 0.25];
    let f = [1.0f64, -3.0];
    let pf = [pm[0][0] * f[0] + pm[0][1] * f[1], pm[1][0] * f[0] + pm[1][1] * f[1]];
    let xi = |ys: &[usize], k: usize| if k == 0 { f[ys[0]] } else { f[ys[k]] - pf[ys[k - 1]] };
    let prob = |ys: &[usize]| (1..ys.len()).fold(pi[ys[0]], |w, t| w * pm[ys[t - 1]][ys[t]]);
    let paths: Vec<Vec<usize>> = (0..1usize << n).map(|bits| (0..n).map(|t| (bits >> t) & 1).collect()).collect();
    let sigma2: Vec<f64> = (0..n).map(|k| paths.iter().map(|ys| prob(ys) * xi(ys, k).powi(2)).sum()).collect();
    (2..=n)
        .map(|ell| {
            paths
                .iter()
                .map(|ys| {
                    let prefix = &ys[..ell - 1];
                    let wp = prob(prefix);
                    let mut cond = 0.0;
                    for other in paths.iter().filter(|o| o[..ell - 1] == *prefix) {
                        cond += prob(other) / wp
                            * (ell - 1..n).map(|k| xi(other, k).powi(2) - sigma2[k]).sum::<f64>();
                    }
                    let x = xi(ys, ell - 2);
                    prob(ys) * x.abs().max(sigma2[ell - 2].sqrt()).powf(p - 2.0) * cond.abs()
                })
                .sum()
        })
        .collect()
}

fn numerics_goldens() -> (Vec<String>, usize, f64) {
    let mut bad = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            bad.push(name.to_string());
        }
    };
    let cdf = |x: f64| normal_cdf(x).unwrap();
    let q = |u: f64| normal_quantile(u).unwrap();
    check("cdf(0)", cdf(0.0) == 0.5);
    check("cdf(1)", (cdf(1.0) - 0.8413447460685429).abs() <= 1e-15);
    check("cdf(-8)", cdf(-8.0) > 0.0 && cdf(-8.0) < 1e-14);
    check("cdf(nan)", normal_cdf(f64::NAN).is_err());
    check("quantile(0.5)", q(0.5) == 0.0);
    check("quantile(cdf(1))", (q(0.8413447460685429) - 1.0).abs() <= 1e-10);
    check("quantile(1e-300)", q(1e-300).is_finite() && q(1e-300) < 0.0);
    check("quantile domain", normal_quantile(0.0).is_err() && normal_quantile(1.0).is_err());
    let m = |p: f64| normal_abs_moment(p).unwrap();
    check("E|Y|^2", (m(2.0) - 1.0).abs() <= 1e-12);
    check("E|Y|^3", (m(3.0) / 1.5957691216057308 - 1.0).abs() <= 1e-12);
    check("E|Y|", (m(1.0) / 0.7978845608028654 - 1.0).abs() <= 1e-12);
    check("E|Y|^0", normal_abs_moment(0.0).is_err());
    let j = |x: f64| integral_of_phi(x).unwrap();
    check("J(0)", (j(0.0) - 0.3989422804014327).abs() <= 1e-12);
    check("J(-40)", (0.0..1e-300).contains(&j(-40.0)));
    // xΦ(x) + φ(x) at x = 1 with the golden Φ(1).
    check("J(1)", (j(1.0) - (0.8413447460685429 + normal_pdf(1.0))).abs() <= 1e-12);
    check("J(inf)", integral_of_phi(f64::INFINITY).is_err());
    for x in [-5.0, -1.3, 0.4, 2.0, 7.5] {
        let quad = quadrature(|t| normal_cdf(t).unwrap(), -40.0, x, 1e-14).unwrap().value;
        check("J vs quadrature", (j(x) - quad).abs() <= 1e-12);
    }
    check("quad 1", (quadrature(|_| 1.0, 0.0, 1.0, 1e-12).unwrap().value - 1.0).abs() <= 1e-12);
    check("quad phi", (quadrature(normal_pdf, -10.0, 10.0, 1e-14).unwrap().value - 1.0).abs() <= 1e-12);
    let cube = quadrature(|y| y.abs().powi(3) * normal_pdf(y), -12.0, 12.0, 1e-12).unwrap().value;
    check("quad |y|^3 phi", (cube - m(3.0)).abs() <= 1e-10);

    let mut rng = SeedLineage::new(SEED_ORACLE, 1).rng();
    let mut prev = f64::NEG_INFINITY;
    let mut beyond_floor = Vec::new();
    for i in 0..10_000 {
        let x = -8.0 + 16.0 * rng.open_unit();
        check("cdf symmetry", (cdf(x) + cdf(-x) - 1.0).abs() <= 1e-15);
        let g = -8.0 + 16.0 * i as f64 / 9_999.0;
        check("cdf monotone", cdf(g) >= prev);
        prev = cdf(g);
        // Rounding Φ(y) to a double moves its exact quantile by up to
        // ε·Φ(y)/φ(y), about 1e-8 at y = 6; no inverse can undo that.
        let y = -6.0 + 12.0 * rng.open_unit();
        let err = (q(cdf(y)) - y).abs();
        check("quantile(cdf)", err <= 1e-9 + f64::EPSILON * cdf(y) / normal_pdf(y));
        if err > 1e-9 {
            beyond_floor.push(y);
        }
        let u = rng.open_unit();
        check("cdf(quantile)", (cdf(q(u)) - u).abs() <= 1e-12);
    }
    let h = 0.01;
    let mut x = -10.0;
    while x < 10.0 {
        check("J >= max(0,x)", j(x) >= x.max(0.0) - 1e-12);
        check("J(x) - J(-x) = x", (j(x) - j(-x) - x).abs() <= 1e-12);
        check("J convex", j(x - h) - 2.0 * j(x) + j(x + h) >= -1e-10);
        x += 0.37;
    }

    // Streams: reproducible, and no shared 4-output prefix across distinct ids.
    let draw = |seed: u64, id: u64| {
        let mut g = SeedLineage::new(seed, id).rng();
        [g.next_u64(), g.next_u64(), g.next_u64(), g.next_u64()]
    };
    for _ in 0..1_000 {
        let (a, b) = (rng.next_u64(), rng.next_u64());
        let seed = rng.next_u64();
        check("stream reproducible", draw(seed, a) == draw(seed, a));
        if a != b {
            check("stream 4-prefix", draw(seed, a) != draw(seed, b));
        }
    }
    // Only the conditioning floor may exceed the bare 1e-9, which happens far in the upper tail.
    let lowest = beyond_floor.iter().cloned().fold(f64::INFINITY, f64::min);
    check("round trip 1e-9 below y = 5", lowest > 5.0);
    bad.sort();
    bad.dedup();
    (bad, beyond_floor.len(), lowest)
}

fn criterion_9(run: &mut Run) -> Verdict {
    let mut detail = String::new();
    let mut csv = String::from("check,case,value,oracle,tolerance\n");

    // W1 against piecewise quadrature of |F̂ − Φ|.
    let mut rng = SeedLineage::new(SEED_ORACLE, 0).rng();
    let mut worst_w1 = 0.0f64;
    for case in 0..200 {
        let r = 1 + (rng.next_u64() % 64) as usize;
        let scale = 0.3 + 2.0 * rng.open_unit();
        let shift = rng.open_unit() - 0.5;
        let values: Vec<f64> = (0..r).map(|_| shift + scale * normal_quantile(rng.open_unit()).unwrap()).collect();
        let sample = EmpiricalSample::new(values, "random").unwrap();
        let got = w1_vs_normal(&sample).unwrap();
        let want = w1_by_quadrature(sample.values());
        worst_w1 = worst_w1.max((got - want).abs());
        let _ = writeln!(csv, "w1_vs_quadrature,{case},{got},{want},1e-8");
    }
    let w1_ok = worst_w1 <= 1e-8;
    let _ = write!(detail, "W1 vs quadrature max |diff| {worst_w1:.1e} on 200 samples; ");

    // U_{ℓ,n}: exact profile and Monte Carlo against 2^6-path enumeration.
    let chain = compile(
        6,
        3.0,
        Family::RhoMixingChain {
            chain: ChainKind::General { transition: vec![vec![0.9, 0.1], vec![0.3, 0.7]] },
            values: vec![1.0, -3.0],
            increments: ChainIncrements::Martingale,
        },
    );
    let brute = u_by_enumeration(3.0, 6);
    let exact = u_profile(3.0, &chain, UMethod::Exact).unwrap();
    let mc = u_profile(3.0, &chain, UMethod::MonteCarlo { replicates: 40_000, seed: SEED_ORACLE }).unwrap();
    let mut u_ok = brute.iter().all(|v| *v > 0.0);
    let mut worst_z = 0.0f64;
    for (ell, want) in (2..=6).zip(&brute) {
        let e = mc.get(ell);
        u_ok &= (exact.get(ell).value - want).abs() <= 1e-12;
        u_ok &= (e.value - want).abs() <= 3.0 * e.se;
        worst_z = worst_z.max((e.value - want).abs() / e.se);
        let _ = writeln!(csv, "u_ln_mc,{ell},{},{want},{}", e.value, 3.0 * e.se);
    }
    let _ = write!(detail, "U_l,n MC vs enumeration max |z| {worst_z:.2}; ");

    // ψ_n: Monte Carlo per-index value at the closed-form maximizer.
    let mut psi_ok = true;
    let mut worst_psi = 0.0f64;
    let models = [
        compile(100, 3.0, Family::CeLowerbound {}),
        compile(40, 3.0, Family::GaussianIid { sigma: SigmaRule::Affine { intercept: 0.5, slope: 1.0 } }),
    ];
    for model in &models {
        let closed = PsiProfile::new(model, PsiMode::ClosedForm).unwrap();
        let sampled = PsiProfile::new(model, PsiMode::MonteCarlo { replicates: 4_000, seed: SEED_ORACLE }).unwrap();
        for t in [0.2, 1.0, 5.0] {
            let sup = closed.eval(t).unwrap().value;
            let exact = closed.per_index(t).unwrap();
            let est = sampled.per_index(t).unwrap();
            let k_star = exact.iter().max_by(|a, b| a.1.value.total_cmp(&b.1.value)).unwrap().0;
            let at = est.iter().find(|(k, _)| *k == k_star).unwrap().1;
            psi_ok &= (at.value - sup).abs() <= 3.0 * at.se;
            worst_psi = worst_psi.max((at.value - sup).abs() / at.se);
            let _ = writeln!(csv, "psi_n_mc,{}:t={t}:k={k_star},{},{sup},{}", model.tag(), at.value, 3.0 * at.se);
        }
    }
    let _ = write!(detail, "psi_n MC vs closed form max |z| {worst_psi:.2}; ");

    let (bad, floored, lowest) = numerics_goldens();
    let _ = write!(
        detail,
        "numerics goldens failing: {bad:?} ({floored} of 1e4 round trips at y >= {lowest:.2} need the f64 conditioning floor)"
    );
    run.csv.insert("oracles.csv".into(), csv);
    verdict(w1_ok && u_ok && psi_ok && bad.is_empty(), detail)
}

// ---------------------------------------------------------------- 10

/// Criteria whose CSVs are regenerated for the byte comparison.
const REPLAYED: [u32; 8] = [1, 2, 3, 5, 6, 7, 8, 9];

fn run_criterion(id: u32, run: &mut Run) -> Verdict {
    match id {
        1 => criterion_1(run),
        2 => criterion_2(run),
        3 => criterion_3(run),
        4 => criterion_4(run),
        5 => criterion_5(run),
        6 => criterion_6(run),
        7 => criterion_7(run),
        8 => criterion_8(run),
        9 => criterion_9(run),
        _ => unreachable!(),
    }
}

fn experiment_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut cfg = ExperimentConfig::for_model("rademacher_iid", 3.0).unwrap();
    cfg.n_grid = vec![128, 256, 512, 1024, 2048, 4096];
    cfg.replicates = 4000;
    cfg.master_seed = 77;
    cfg.outputs = dir.to_path_buf();
    experiment::distance(&cfg).unwrap();
    experiment::bounds(&cfg).unwrap();
    experiment::ratefit(&cfg).unwrap();
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap());
        }
    }
    out
}

fn criterion_10(first: &Run, ran: &[u32], root: &Path) -> Verdict {
    let mut replay: Vec<u32> = ran.iter().copied().filter(|c| REPLAYED.contains(c)).collect();
    if replay.is_empty() {
        replay = vec![5, 9];
    }
    let mut reference = Run::default();
    if first.csv.is_empty() || replay.iter().any(|c| !ran.contains(c)) {
        for &c in &replay {
            run_criterion(c, &mut reference);
        }
    }
    let reference = if reference.csv.is_empty() { first } else { &reference };

    // Same seeds, different worker count.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let second = pool.install(|| {
        let mut again = Run::default();
        for &c in &replay {
            run_criterion(c, &mut again);
        }
        again
    });
    let mut differing = Vec::new();
    for (name, text) in &reference.csv {
        if second.csv.get(name) != Some(text) {
            differing.push(name.clone());
        }
    }

    let a = experiment_files(&root.join("replay_a"));
    let b = pool.install(|| experiment_files(&root.join("replay_b")));
    for (name, bytes) in &a {
        if b.get(name) != Some(bytes) {
            differing.push(format!("experiment/{name}"));
        }
    }
    verdict(
        differing.is_empty() && a.len() == b.len() && !a.is_empty(),
        format!(
            "replayed criteria {replay:?} on 3 workers: {} CSVs; distance/bounds/ratefit commands: {} CSVs; differing: {differing:?}",
            reference.csv.len(),
            a.len()
        ),
    )
}

fn main() {
    let selected: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .filter(|c| (1..=10).contains(c))
        .collect();
    let wanted = |c: u32| selected.is_empty() || selected.contains(&c);
    let root: PathBuf = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let _ = std::fs::remove_dir_all(&root);
    std::fs::create_dir_all(&root).unwrap();

    let mut run = Run::default();
    let mut results: BTreeMap<u32, Verdict> = BTreeMap::new();
    let mut ran = Vec::new();
    let start = Instant::now();
    // The transfer check reads the reports of the others, so it runs late.
    for c in [1, 2, 3, 5, 6, 7, 8, 4, 9] {
        if wanted(c) {
            let t = Instant::now();
            eprintln!("acceptance: running criterion {c}");
            results.insert(c, run_criterion(c, &mut run));
            eprintln!("acceptance: criterion {c} took {:.1?}", t.elapsed());
            ran.push(c);
        }
    }
    for (name, text) in &run.csv {
        std::fs::write(root.join(name), text).unwrap();
    }
    if wanted(10) {
        let t = Instant::now();
        eprintln!("acceptance: running criterion 10");
        results.insert(10, criterion_10(&run, &ran, &root));
        eprintln!("acceptance: criterion 10 took {:.1?}", t.elapsed());
    }

    for (c, v) in &results {
        println!("criterion {c:>2}: {} - {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    let failed = results.values().filter(|v| !v.pass).count();
    println!(
        "acceptance: {}/{} criteria passed in {:.1?}; CSVs in {}",
        results.len() - failed,
        results.len(),
        start.elapsed(),
        root.display()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
