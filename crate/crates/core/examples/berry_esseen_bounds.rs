//! Kolmogorov-distance bound shapes next to the Heyde-Brown comparison.

use cltlab::bounds::{berry_esseen_bound, heyde_brown_bound, heyde_brown_exponent, BoundOptions};
use cltlab::models::{Family, Model, ModelSpec};

fn main() -> cltlab::Result<()> {
    let opts = BoundOptions::default();
    for p in [2.5, 3.0] {
        println!("p = {p}: Heyde-Brown exponent of V_n = {:.4}", heyde_brown_exponent(p));
        for n in [64, 256, 1024, 4096] {
            let model = Model::compile(&ModelSpec::new(n, p, Family::CeLowerbound {}))?;
            let be = berry_esseen_bound(p, &model, &opts)?;
            let hb = heyde_brown_bound(p, &model, 1000, 1)?;
            println!(
                "  n = {n:>5}: {} = {:.4}   heyde_brown = {:.4}",
                be.equation_tag, be.total, hb.total
            );
        }
    }
    Ok(())
}
