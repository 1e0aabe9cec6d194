//! Exact Kolmogorov and W1 distances of a sample to N(0, 1).

use cltlab::distances::{kolmogorov_vs_normal, w1_vs_normal, DistanceReport, EmpiricalSample};
use cltlab::models::{Family, Model, ModelSpec, SigmaRule};

fn main() -> cltlab::Result<()> {
    let tiny = EmpiricalSample::new(vec![-1.0, 0.2, 0.5], "tiny")?;
    println!("tiny: K = {:.6}, W1 = {:.6}", kolmogorov_vs_normal(&tiny)?, w1_vs_normal(&tiny)?);

    for n in [16, 64, 256, 1024] {
        let model = Model::compile(&ModelSpec::new(n, 3.0, Family::RademacherIid { sigma: SigmaRule::default() }))?;
        let scale = model.exact_moments().v_n.sqrt();
        let sums: Vec<f64> = model.replicate_sums(9, 100_000).iter().map(|s| s / scale).collect();
        let (_, r) = DistanceReport::measure(&sums, Some(3.0), "rademacher")?;
        println!(
            "n = {n:>5}: K = {:.5} (+- {:.5})  W1 = {:.5} (+- {:.5})",
            r.kolmogorov, r.mc_se_kolmogorov, r.w1, r.mc_se_w1
        );
    }
    Ok(())
}
