//! Reproducible experiment runs: JSON config in, CSV files and a manifest out.

mod config;
mod verify_ce;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bounds::{
    berry_esseen_bound, bounds_csv, corollary_w1_bound, heyde_brown_bound, linear_statistic_bound,
    rho_mixing_breakdown, seqdyn_breakdown, theorem1_auto, theorem1_rhs, vn_of_a, BoundBreakdown, BoundOptions,
    W1Form,
};
use crate::distances::{distance_csv, read_distance_csv, DistanceReport, DistanceRow};
use crate::error::{Error, Result};
use crate::models::{pathfile, Model};
use crate::ratefit::{fit_replicated, fit_variant, ratefit_csv, DistanceKind, RateSeries};

pub use config::{
    default_bounds, default_family, AMode, BoundSettings, ExperimentConfig, RateFitSettings, BOUND_TAGS, DEFAULT_TOLERANCE,
    MIN_REPLICATES, MODEL_TAGS, SCHEMA_VERSION,
};
pub use verify_ce::{verify_ce, verify_ce_csv, CeCheckRow, VerifyCeRequest, MOMENT_BUDGET, VERIFY_CE_CSV_HEADER};

pub const STREAM_ID_RULE: &str = "(n << 32) | replicate";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRun {
    pub n: usize,
    pub spec_sha256: String,
    pub first_stream_id: u64,
    pub last_stream_id: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFile {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Everything needed to trace an output row back to its spec and streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub model_id: String,
    pub master_seed: u64,
    pub replicates: usize,
    pub stream_id_rule: String,
    pub config_sha256: String,
    pub runs: Vec<ManifestRun>,
    pub outputs: Vec<ManifestFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub files: Vec<PathBuf>,
    pub manifest: PathBuf,
    /// SHA-256 of the manifest bytes.
    pub manifest_sha256: String,
    /// False when a check failed (exit code 1).
    pub passed: bool,
    pub summary: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn file_entry(path: &Path) -> Result<ManifestFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(ManifestFile {
        file: path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        bytes: bytes.len() as u64,
        sha256: sha256_hex(&bytes),
    })
}

fn write_manifest(
    cfg: &ExperimentConfig,
    command: &str,
    models: &[Model],
    replicates: usize,
    files: &[PathBuf],
) -> Result<(PathBuf, String)> {
    let runs = models
        .iter()
        .map(|m| {
            let n = m.n() as u64;
            ManifestRun {
                n: m.n(),
                spec_sha256: m.spec().hash_hex(),
                first_stream_id: n << 32,
                last_stream_id: (n << 32) | (replicates as u64).saturating_sub(1),
            }
        })
        .collect();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        model_id: cfg.model_id(),
        master_seed: cfg.master_seed,
        replicates,
        stream_id_rule: STREAM_ID_RULE.into(),
        config_sha256: sha256_hex(&serde_json::to_vec(cfg).expect("config serializes")),
        runs,
        outputs: files.iter().map(|f| file_entry(f)).collect::<Result<_>>()?,
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = cfg.outputs.join(format!("manifest_{}.json", command.replace('-', "_")));
    write_file(&path, text.as_bytes())?;
    Ok((path, sha256_hex(text.as_bytes())))
}

fn finish(
    cfg: &ExperimentConfig,
    command: &str,
    models: &[Model],
    files: Vec<PathBuf>,
    passed: bool,
    summary: String,
) -> Result<CommandOutcome> {
    let (manifest, manifest_sha256) = write_manifest(cfg, command, models, cfg.replicates, &files)?;
    Ok(CommandOutcome {
        files,
        manifest,
        manifest_sha256,
        passed,
        summary,
    })
}

pub fn path_file_name(n: usize) -> String {
    format!("paths_n{n}.bin")
}

/// Write one path file per grid point.
pub fn simulate(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let models = cfg.validate()?;
    ensure_dir(&cfg.outputs)?;
    let mut files = Vec::new();
    for m in &models {
        let path = cfg.outputs.join(path_file_name(m.n()));
        pathfile::write_paths(m, cfg.master_seed, cfg.replicates, &path)?;
        files.push(path);
    }
    let summary = format!(
        "wrote {} path files of {} replicates",
        files.len(),
        cfg.replicates
    );
    finish(cfg, "simulate", &models, files, true, summary)
}

/// S_n for replicates 0..R in replicate order, from the path file or inline.
fn sums_for(cfg: &ExperimentConfig, model: &Model, seed: u64) -> Result<Vec<f64>> {
    if !cfg.from_batches {
        return Ok(model.replicate_sums(seed, cfg.replicates));
    }
    let path = cfg.outputs.join(path_file_name(model.n()));
    if !path.exists() {
        return Err(Error::io(
            &path,
            std::io::Error::new(
                std::io::ErrorKind::NotFound,
                "path batch missing; run `simulate` first or set from_batches to false",
            ),
        ));
    }
    let (header, rows) = pathfile::read_paths(&path, Some(model.spec()))?;
    if header.master_seed != seed || header.replicates as usize != cfg.replicates {
        return Err(Error::Parse {
            path,
            detail: format!(
                "batch holds seed {} with {} replicates, config asks for seed {seed} with {}",
                header.master_seed, header.replicates, cfg.replicates
            ),
        });
    }
    Ok(rows.iter().map(|r| r.iter().fold(0.0, |a, x| a + x)).collect())
}

fn distance_rows(cfg: &ExperimentConfig, models: &[Model], seed: u64) -> Result<Vec<DistanceRow>> {
    let id = cfg.model_id();
    models
        .iter()
        .map(|m| {
            let scale = m.exact_moments().v_n.sqrt();
            let normalized: Vec<f64> = sums_for(cfg, m, seed)?.iter().map(|s| s / scale).collect();
            let (_, report) = DistanceReport::measure(&normalized, Some(m.spec().p), &id)?;
            Ok(DistanceRow {
                model_id: id.clone(),
                n: m.n(),
                p: m.spec().p,
                replicates: cfg.replicates,
                report,
            })
        })
        .collect()
}

pub const DISTANCES_FILE: &str = "distances.csv";
pub const BOUNDS_FILE: &str = "bounds.csv";
pub const BOUNDS_META_FILE: &str = "bounds_meta.csv";
pub const RATEFIT_FILE: &str = "ratefit.csv";

/// Distances of S_n/√V_n to N(0, 1), one row per grid point.
pub fn distance(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let models = cfg.validate()?;
    ensure_dir(&cfg.outputs)?;
    let rows = distance_rows(cfg, &models, cfg.master_seed)?;
    let path = cfg.outputs.join(DISTANCES_FILE);
    write_file(&path, distance_csv(&rows).as_bytes())?;
    let violations = rows.iter().filter(|r| !r.report.transfer_holds()).count();
    let summary = format!(
        "{} rows; transfer inequality violated on {violations}",
        rows.len()
    );
    finish(cfg, "distance", &models, vec![path], violations == 0, summary)
}

/// Minimize `eval(a).total` over a ∈ {1, 2, 4, …} up to √V_n/δ_n.
fn auto_a(model: &Model, eval: impl Fn(f64) -> Result<BoundBreakdown>) -> Result<BoundBreakdown> {
    let m = model.exact_moments();
    let cap = m.v_n.sqrt() / m.delta_n;
    let mut a = 1.0;
    let mut best = eval(a)?;
    while 2.0 * a <= cap {
        a *= 2.0;
        let b = eval(a)?;
        if b.total < best.total {
            best = b;
        }
    }
    Ok(best)
}

fn bound_for(tag: &str, cfg: &ExperimentConfig, model: &Model, opts: &BoundOptions) -> Result<BoundBreakdown> {
    let p = model.spec().p;
    let r = cfg.bounds.r;
    let with_a = |eval: &dyn Fn(f64) -> Result<BoundBreakdown>| match cfg.a_mode {
        AMode::Fixed(a) => eval(a),
        AMode::Auto => auto_a(model, eval),
    };
    match tag {
        "zeta_r_bound" => match cfg.a_mode {
            AMode::Fixed(a) => theorem1_rhs(r, p, a, model, opts),
            AMode::Auto => theorem1_auto(r, p, model, opts),
        },
        "w1_corollary:psi" => with_a(&|a| corollary_w1_bound(r, p, a, model, W1Form::Psi, opts)),
        "w1_corollary:moment" => with_a(&|a| corollary_w1_bound(r, p, a, model, W1Form::Moment, opts)),
        "berry_esseen" => berry_esseen_bound(p, model, opts),
        "heyde_brown" => heyde_brown_bound(p, model, cfg.replicates, cfg.master_seed),
        "linear_statistic" => linear_statistic_bound(p, model, cfg.bounds.spectral_floor),
        "rho_mixing" => rho_mixing_breakdown(model),
        "sequential_maps" => seqdyn_breakdown(model),
        other => Err(Error::config(format!("unknown bound tag {other:?}"))),
    }
}

pub const BOUNDS_META_HEADER: &str = "n,equation_tag,a,v_n_a,normalization,total,normalized_total,constants_mode,target_exponent";

fn bounds_meta_csv(rows: &[(BoundBreakdown, Option<f64>)]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from(BOUNDS_META_HEADER);
    out.push('\n');
    for (b, v) in rows {
        out += &format!(
            "{},{},{},{},{},{},{},{},{}\n",
            b.n,
            b.equation_tag,
            opt(b.a),
            opt(*v),
            b.normalization,
            b.total,
            b.normalized_total(),
            b.constants_mode,
            opt(b.target_exponent)
        );
    }
    out
}

/// Every requested bound at every grid point.
pub fn bounds(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let models = cfg.validate()?;
    if cfg.bound_requests.is_empty() {
        return Err(Error::config("bound_requests is empty"));
    }
    ensure_dir(&cfg.outputs)?;
    let opts = cfg.bounds.options(cfg.master_seed);
    let mut rows = Vec::new();
    for m in &models {
        for tag in &cfg.bound_requests {
            let b = bound_for(tag, cfg, m, &opts)?;
            let v = match b.a {
                Some(a) => Some(vn_of_a(a, &m.exact_moments())?),
                None => None,
            };
            rows.push((b, v));
        }
    }
    let breakdowns: Vec<BoundBreakdown> = rows.iter().map(|(b, _)| b.clone()).collect();
    let main = cfg.outputs.join(BOUNDS_FILE);
    write_file(&main, bounds_csv(&breakdowns).as_bytes())?;
    let meta = cfg.outputs.join(BOUNDS_META_FILE);
    write_file(&meta, bounds_meta_csv(&rows).as_bytes())?;
    let summary = breakdowns.iter().map(|b| b.table()).collect::<Vec<_>>().join("\n");
    finish(cfg, "bounds", &models, vec![main, meta], true, summary)
}

fn series_from_rows(rows: &[DistanceRow], cfg: &ExperimentConfig, kind: DistanceKind) -> Result<RateSeries> {
    let mut s = RateSeries::from_distance_rows(rows, &cfg.model_id(), kind)?;
    for pt in &mut s.points {
        let m = Model::compile(&cfg.model.with_n(pt.n))?;
        pt.v_n = Some(m.exact_moments().v_n);
    }
    Ok(s)
}

/// Fit the distance series. With one seed, distances.csv must exist; with
/// several, each seed's series is recomputed inline.
pub fn ratefit(cfg: &ExperimentConfig) -> Result<CommandOutcome> {
    let models = cfg.validate()?;
    ensure_dir(&cfg.outputs)?;
    let kind = cfg.distance_kind();
    let (target, compared) = cfg.target();
    let tolerance = cfg.ratefit.tolerance.unwrap_or(DEFAULT_TOLERANCE);
    let seeds = cfg.ratefit.seeds.unwrap_or(1).max(1);
    let result = if seeds == 1 {
        let path = cfg.outputs.join(DISTANCES_FILE);
        if !path.exists() {
            return Err(Error::io(
                &path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "distance CSV missing; run `distance` first"),
            ));
        }
        let rows = read_distance_csv(&path)?;
        fit_variant(&series_from_rows(&rows, cfg, kind)?, target, tolerance, compared)
    } else {
        let per_seed = (0..seeds as u64)
            .map(|i| {
                let rows = distance_rows(cfg, &models, cfg.master_seed.wrapping_add(i))?;
                series_from_rows(&rows, cfg, kind)
            })
            .collect::<Result<Vec<_>>>()?;
        fit_replicated(&per_seed, target, tolerance, compared)?
    };
    let path = cfg.outputs.join(RATEFIT_FILE);
    write_file(&path, ratefit_csv(std::slice::from_ref(&result)).as_bytes())?;
    let (e, ci) = result.compared_exponent();
    let summary = format!(
        "{} {}: exponent {e:.4} ± {ci:.4} ({}), target {target}, verdict {}",
        result.model_id, result.kind, result.compared, result.verdict
    );
    let passed = result.verdict != crate::ratefit::Verdict::Inconsistent;
    finish(cfg, "ratefit", &models, vec![path], passed, summary)
}

pub const VERIFY_CE_FILE: &str = "verify_ce.csv";

/// Write the verify-ce table and its manifest into `dir`.
pub fn write_verify_ce(dir: &Path, req: &VerifyCeRequest, rows: &[CeCheckRow]) -> Result<CommandOutcome> {
    ensure_dir(dir)?;
    let path = dir.join(VERIFY_CE_FILE);
    write_file(&path, verify_ce_csv(rows).as_bytes())?;
    let runs = rows
        .iter()
        .map(|r| {
            let spec = crate::models::ModelSpec::new(r.n, r.p, crate::models::Family::CeLowerbound {});
            let n = r.n as u64;
            ManifestRun {
                n: r.n,
                spec_sha256: spec.hash_hex(),
                first_stream_id: n << 32,
                last_stream_id: (n << 32) | (r.replicates as u64).saturating_sub(1),
            }
        })
        .collect();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "verify-ce".into(),
        model_id: "ce_lowerbound".into(),
        master_seed: req.master_seed,
        replicates: req.replicates,
        stream_id_rule: STREAM_ID_RULE.into(),
        config_sha256: String::new(),
        runs,
        outputs: vec![file_entry(&path)?],
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let mpath = dir.join("manifest_verify_ce.json");
    write_file(&mpath, text.as_bytes())?;
    let passed = rows.iter().all(|r| r.passed());
    Ok(CommandOutcome {
        files: vec![path],
        manifest: mpath,
        manifest_sha256: sha256_hex(text.as_bytes()),
        passed,
        summary: String::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(dir: &Path, tag: &str) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_model(tag, 3.0).unwrap();
        c.n_grid = vec![32, 64];
        c.replicates = 200;
        c.master_seed = 11;
        c.outputs = dir.to_path_buf();
        c
    }

    #[test]
    fn simulate_writes_documented_size_and_stable_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path(), "gaussian_iid");
        c.n_grid = vec![32];
        c.replicates = 100;
        let a = simulate(&c).unwrap();
        let size = fs::metadata(&a.files[0]).unwrap().len();
        assert_eq!(size, 64 + 8 * 32 * 100);
        let b = simulate(&c).unwrap();
        assert_eq!(a.manifest_sha256, b.manifest_sha256);
        let m: Manifest = serde_json::from_slice(&fs::read(&a.manifest).unwrap()).unwrap();
        assert_eq!(m.runs[0].first_stream_id, 32 << 32);
        assert_eq!(m.runs[0].last_stream_id, (32 << 32) | 99);
    }

    #[test]
    fn distance_from_batches_matches_inline_for_path_families() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path(), "gaussian_iid");
        let inline = distance(&c).unwrap();
        let inline_csv = fs::read(&inline.files[0]).unwrap();
        c.from_batches = true;
        let err = distance(&c).unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(err.to_string().contains("paths_n32.bin"));
        simulate(&c).unwrap();
        let batched = distance(&c).unwrap();
        assert_eq!(fs::read(&batched.files[0]).unwrap(), inline_csv);
    }

    #[test]
    fn bounds_and_ratefit_run() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path(), "ce_lowerbound");
        c.bound_requests = vec!["zeta_r_bound".into(), "berry_esseen".into(), "w1_corollary:moment".into()];
        let out = bounds(&c).unwrap();
        let csv = fs::read_to_string(&out.files[0]).unwrap();
        // L_n vanishes for the CE model.
        for line in csv.lines().filter(|l| l.contains(",l_n,")) {
            assert_eq!(line.split(',').nth(3), Some("0"), "{line}");
        }
        let meta = fs::read_to_string(&out.files[1]).unwrap();
        assert!(meta.lines().nth(1).unwrap().starts_with("32,zeta_r_bound,"));

        assert_eq!(ratefit(&c).unwrap_err().exit_code(), 3);
        distance(&c).unwrap();
        let r = ratefit(&c).unwrap();
        let text = fs::read_to_string(&r.files[0]).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",inconclusive"));
    }

    #[test]
    fn a_mode_fixed_is_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = cfg(dir.path(), "rademacher_iid");
        c.bound_requests = vec!["w1_corollary:psi".into()];
        c.a_mode = AMode::Fixed(2.0);
        let out = bounds(&c).unwrap();
        let meta = fs::read_to_string(&out.files[1]).unwrap();
        let row: Vec<&str> = meta.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(row[2], "2");
        // v_n(2) = 4 + (5/4)·32 for unit Rademacher increments.
        assert_eq!(row[3].parse::<f64>().unwrap(), 4.0 + 1.25 * 32.0);
    }
}
