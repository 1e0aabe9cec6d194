//! Weighted sums of a Gaussian AR(1): projective quantities, the bound shape,
//! and W1 of T_n = S_n / (sum of squared weights)^(1/2) to N(0, sigma^2).

use cltlab::bounds::{linear_projections, linear_statistic_bound};
use cltlab::distances::two_sample_w1;
use cltlab::distances::EmpiricalSample;
use cltlab::models::{CoefficientRule, Family, LinearBase, Model, ModelSpec};
use cltlab::numerics::SeedLineage;

fn main() -> cltlab::Result<()> {
    let base = LinearBase::GaussianAr1 { phi: 0.5, innovation_sd: 1.0 };
    let proj = linear_projections(&base, 8, 3.0)?;
    println!("Lambda_n = {:.5}, eta_n = {:.5}", proj.big_lambda(), proj.eta());

    for n in [128, 512, 2048] {
        let spec = ModelSpec::new(n, 3.0, Family::LinearStatistic { base: base.clone(), alphas: CoefficientRule::default() });
        let model = Model::compile(&spec)?;
        let b = linear_statistic_bound(3.0, &model, true)?;
        let norm = model.linear().expect("linear model").sum_alpha2().sqrt();
        // Each replicate carries a coupled N(0, sigma^2) draw.
        let (sums, refs): (Vec<f64>, Vec<f64>) = (0..20_000u64)
            .map(|r| {
                let (s, g) = model.sum_with_reference(SeedLineage::for_replicate(4, n, r));
                (s / norm, g.unwrap_or(f64::NAN))
            })
            .unzip();
        let w = two_sample_w1(&EmpiricalSample::new(sums, "T_n")?, &EmpiricalSample::new(refs, "G")?)?;
        println!("n = {n:>5}: W1(T_n, G) ~ {w:.4}   bound shape {:.4}", b.total);
    }
    Ok(())
}
