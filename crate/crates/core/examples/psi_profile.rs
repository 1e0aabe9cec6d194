//! t -> psi_n(t) in closed form and from simulated increments.

use cltlab::bounds::{PsiMode, PsiProfile};
use cltlab::models::{Family, Model, ModelSpec};

fn main() -> cltlab::Result<()> {
    let model = Model::compile(&ModelSpec::new(100, 3.0, Family::CeLowerbound {}))?;
    let closed = PsiProfile::new(&model, PsiMode::ClosedForm)?;
    let mc = PsiProfile::new(&model, PsiMode::MonteCarlo { replicates: 5000, seed: 1 })?;
    for t in [0.1, 0.5, 1.0, 2.0, 5.0, 20.0] {
        let e = mc.eval(t)?;
        println!("psi({t:>4}) = {:.5}   MC {:.5} +- {:.5}", closed.eval(t)?.value, e.value, e.se);
    }
    Ok(())
}
