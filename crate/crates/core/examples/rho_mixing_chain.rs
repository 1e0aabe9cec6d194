//! The two-state chain: exact C_n, the bound K_n(1 + C_n log(1 + C_n V_n)) and measured W1.

use cltlab::bounds::rho_mixing_breakdown;
use cltlab::distances::DistanceReport;
use cltlab::models::{Model, ModelSpec};
use cltlab::experiment::default_family;

fn main() -> cltlab::Result<()> {
    for n in [128, 512, 2048, 8192] {
        let model = Model::compile(&ModelSpec::new(n, 3.0, default_family("rho_mixing_chain")?))?;
        let chain = model.chain().expect("chain model");
        let v = model.exact_moments().v_n;
        let sums: Vec<f64> = model.replicate_sums(8, 20_000).iter().map(|s| s / v.sqrt()).collect();
        let (_, r) = DistanceReport::measure(&sums, None, "chain")?;
        let b = rho_mixing_breakdown(&model)?;
        println!(
            "n = {n:>5}: C_n = {:.4} (<= {:.1})  W1(S_n, G_Vn) = {:.4}  bound {:.4}",
            chain.c_n(n),
            chain.c_n_bound(),
            r.w1 * v.sqrt(),
            b.total
        );
    }
    Ok(())
}
