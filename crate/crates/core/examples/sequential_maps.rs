//! Alternating doubling and tripling maps with sqrt(2) cos(2 pi x).

use cltlab::bounds::seqdyn_bound;
use cltlab::distances::DistanceReport;
use cltlab::experiment::default_family;
use cltlab::models::{Model, ModelSpec};

fn main() -> cltlab::Result<()> {
    for n in [64, 256, 1024, 4096] {
        let model = Model::compile(&ModelSpec::new(n, 3.0, default_family("sequential_maps")?))?;
        let exact = model.exact_moments().v_n;
        let est = model.estimate_moments(2, 20_000);
        let sums: Vec<f64> = model.replicate_sums(2, 20_000).iter().map(|s| s / (n as f64).sqrt()).collect();
        let (_, r) = DistanceReport::measure(&sums, None, "maps")?;
        println!(
            "n = {n:>5}: V_n = {exact} (MC {:.1} +- {:.1})  W1 = {:.4}  shape {:.4}",
            est.v_n,
            est.v_n_se,
            r.w1,
            seqdyn_bound(n, exact) / (n as f64).sqrt()
        );
    }
    Ok(())
}
