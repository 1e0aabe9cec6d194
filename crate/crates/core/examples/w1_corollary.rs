//! The three displays of the Wasserstein corollary side by side.

use cltlab::bounds::{corollary_w1_bound, BoundOptions, W1Form};
use cltlab::models::{Family, Model, ModelSpec, SigmaRule};

fn main() -> cltlab::Result<()> {
    let opts = BoundOptions::default();
    for n in [100, 1000, 10_000] {
        let model = Model::compile(&ModelSpec::new(n, 3.0, Family::RademacherIid { sigma: SigmaRule::default() }))?;
        let psi = corollary_w1_bound(1.0, 3.0, 4.0, &model, W1Form::Psi, &opts)?;
        let log = corollary_w1_bound(1.0, 3.0, 4.0, &model, W1Form::Moment, &opts)?;
        let m25 = Model::compile(&ModelSpec::new(n, 2.5, Family::RademacherIid { sigma: SigmaRule::default() }))?;
        let pow = corollary_w1_bound(1.0, 2.5, 4.0, &m25, W1Form::Moment, &opts)?;
        println!(
            "n = {n:>6}: psi {:.4}  log {:.4}  power(p=2.5) {:.4}   (normalized)",
            psi.normalized_total(),
            log.normalized_total(),
            pow.normalized_total()
        );
    }
    Ok(())
}
