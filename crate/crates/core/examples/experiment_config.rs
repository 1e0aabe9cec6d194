//! Run distance, bounds and ratefit from a JSON config, as the command-line tool does.

use cltlab::experiment::{bounds, distance, ratefit, ExperimentConfig};

fn main() -> cltlab::Result<()> {
    let out = std::env::temp_dir().join("cltlab-config-example");
    let text = format!(
        r#"{{
            "schema_version": 1,
            "name": "ce_p3",
            "model": {{"n": 64, "p": 3.0, "family": "ce_lowerbound"}},
            "n_grid": [64, 128, 256, 512, 1024, 2048, 4096, 8192],
            "replicates": 50000,
            "master_seed": 17,
            "outputs": {:?},
            "bound_requests": ["zeta_r_bound", "berry_esseen"],
            "a_mode": "auto"
        }}"#,
        out.display().to_string()
    );
    let cfg = ExperimentConfig::from_json(&text)?;
    for step in [distance(&cfg)?, bounds(&cfg)?, ratefit(&cfg)?] {
        for f in &step.files {
            println!("wrote {}", f.display());
        }
        println!("manifest sha256 {}", step.manifest_sha256);
    }
    let fit = std::fs::read_to_string(out.join("ratefit.csv")).unwrap_or_default();
    print!("{fit}");
    Ok(())
}
