use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cltlab::experiment::{
    self, default_bounds, default_family, write_verify_ce, AMode, CommandOutcome, ExperimentConfig, VerifyCeRequest,
};
use cltlab::{Error, Result};

#[derive(Parser)]
#[command(name = "cltlab", version, about = "Gaussian approximation rates for martingales, by simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand)]
enum Command {
    /// Write sample paths for every grid point.
    Simulate,
    /// Kolmogorov and W1 distances of the normalized sums to N(0, 1).
    Distance,
    /// Itemized bound evaluations.
    Bounds,
    /// Fit convergence exponents to the distance series.
    Ratefit,
    /// Check the atom, Kolmogorov and moment claims for the counterexample model.
    VerifyCe,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    reps: Option<usize>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Family tag; replaces the model of the config with its defaults.
    #[arg(long, global = true)]
    model: Option<String>,
    /// Comma-separated path lengths, e.g. 128,256,512.
    #[arg(long = "n-grid", global = true, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long, global = true)]
    p: Option<f64>,
    /// Truncation level: a real >= 1 or "auto".
    #[arg(long, global = true)]
    a: Option<String>,
}

fn config_from(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match (&c.config, &c.model) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, Some(tag)) => ExperimentConfig::for_model(tag, c.p.unwrap_or(3.0))?,
        (None, None) => return Err(Error::Config("either --config or --model is required".into())),
    };
    if let (Some(_), Some(tag)) = (&c.config, &c.model) {
        cfg.model.family = default_family(tag)?;
        cfg.bound_requests = default_bounds(&cfg.model.family);
    }
    if let Some(seed) = c.seed {
        cfg.master_seed = seed;
    }
    if let Some(r) = c.reps {
        cfg.replicates = r;
    }
    if let Some(out) = &c.out {
        cfg.outputs = out.clone();
    }
    if let Some(grid) = &c.n_grid {
        cfg.n_grid = grid.clone();
    }
    if let Some(p) = c.p {
        cfg.model.p = p;
    }
    if let Some(a) = &c.a {
        cfg.a_mode = AMode::parse(a)?;
    }
    Ok(cfg)
}

fn verify_request(c: &Common) -> Result<VerifyCeRequest> {
    let base = match &c.config {
        Some(path) => Some(ExperimentConfig::load(path)?),
        None => None,
    };
    Ok(VerifyCeRequest {
        n_grid: c
            .n_grid
            .clone()
            .or_else(|| base.as_ref().map(|b| b.n_grid.clone()))
            .unwrap_or_else(|| vec![64, 256, 1024]),
        p: c.p.or(base.as_ref().map(|b| b.model.p)).unwrap_or(3.0),
        replicates: c.reps.or(base.as_ref().map(|b| b.replicates)).unwrap_or(100_000),
        master_seed: c.seed.or(base.as_ref().map(|b| b.master_seed)).unwrap_or(0),
        outputs: c.out.clone().or(base.map(|b| b.outputs)),
    })
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("CLTLAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| Error::Config(format!("CLTLAB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn report(out: &CommandOutcome) {
    if !out.summary.is_empty() {
        println!("{}", out.summary);
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    println!("manifest {} sha256 {}", out.manifest.display(), out.manifest_sha256);
}

fn run(cli: Cli) -> Result<bool> {
    init_threads()?;
    if let Command::VerifyCe = cli.command {
        let req = verify_request(&cli.common)?;
        let rows = experiment::verify_ce(&req)?;
        println!(
            "{:>6} {:>10} {:>10} {:>5} {:>10} {:>10} {:>5} {:>9} {:>9} {:>5}",
            "n", "atom", "need", "ok", "kolm", "need", "ok", "moment", "cap", "ok"
        );
        for r in &rows {
            println!(
                "{:>6} {:>10.5} {:>10.5} {:>5} {:>10.5} {:>10.5} {:>5} {:>9.4} {:>9.4} {:>5}",
                r.n,
                r.atom,
                r.atom_threshold,
                r.atom_pass,
                r.kolmogorov,
                r.kolmogorov_threshold,
                r.kolmogorov_pass,
                r.moment_max,
                r.moment_cap,
                r.moment_pass
            );
        }
        if let Some(dir) = &req.outputs {
            report(&write_verify_ce(dir, &req, &rows)?);
        }
        return Ok(rows.iter().all(|r| r.passed()));
    }
    let cfg = config_from(&cli.common)?;
    let out = match cli.command {
        Command::Simulate => experiment::simulate(&cfg)?,
        Command::Distance => experiment::distance(&cfg)?,
        Command::Bounds => experiment::bounds(&cfg)?,
        Command::Ratefit => experiment::ratefit(&cfg)?,
        Command::VerifyCe => unreachable!(),
    };
    report(&out);
    Ok(out.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cltlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
