//! Every model family: exact moments next to Monte Carlo estimates.

use cltlab::models::{Family, Model, ModelSpec};

fn main() -> cltlab::Result<()> {
    let text = r#"[
        {"n": 200, "family": "gaussian_iid", "sigma": {"rule": "affine", "intercept": 1.0, "slope": 1.0}},
        {"n": 200, "family": "rademacher_iid"},
        {"n": 200, "family": "ce_lowerbound"},
        {"n": 200, "family": "linear_statistic", "base": {"kind": "gaussian_ar1", "phi": 0.5}},
        {"n": 200, "family": "rho_mixing_chain"},
        {"n": 200, "family": "sequential_maps", "schedule": [2, 3], "observable": "cos1"}
    ]"#;
    let specs: Vec<ModelSpec> = serde_json::from_str(text).expect("valid specs");
    println!("{:<18} {:>12} {:>12} {:>10} {:>8}", "family", "V_n exact", "V_n MC", "SE", "delta_n");
    for spec in &specs {
        let model = Model::compile(spec)?;
        let exact = model.exact_moments();
        let est = model.estimate_moments(1, 20_000);
        println!(
            "{:<18} {:>12.4} {:>12.4} {:>10.4} {:>8.4}",
            model.tag(),
            exact.v_n,
            est.v_n,
            est.v_n_se,
            exact.delta_n
        );
    }

    // Invalid specs are rejected with the violated condition.
    let bad = ModelSpec::new(19, 3.0, Family::CeLowerbound {});
    println!("n = 19: {}", Model::compile(&bad).unwrap_err());
    Ok(())
}
