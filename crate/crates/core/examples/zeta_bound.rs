//! Itemized martingale bound on zeta_r, for a fixed a and with a chosen by grid search.

use cltlab::bounds::{theorem1_auto, theorem1_rhs, BoundOptions, ConstantsMode};
use cltlab::models::{Family, Model, ModelSpec, SigmaRule};

fn main() -> cltlab::Result<()> {
    let spec = ModelSpec::new(
        400,
        3.0,
        Family::GaussianIid { sigma: SigmaRule::Affine { intercept: 1.0, slope: 1.0 } },
    );
    let model = Model::compile(&spec)?;
    let opts = BoundOptions {
        constants: ConstantsMode::ExplicitR1,
        ..BoundOptions::default()
    };
    print!("{}", theorem1_rhs(1.0, 3.0, 2.0, &model, &opts)?.table());
    let best = theorem1_auto(1.0, 3.0, &model, &opts)?;
    println!("auto: a = {:?}", best.a);
    print!("{}", best.table());
    Ok(())
}
