//! The Kolmogorov distance is controlled by W_{p-2}: K <= (1 + 1/sqrt(2 pi)) W^{1/(p-1)}.

use cltlab::distances::{DistanceReport, TRANSFER_CONSTANT};
use cltlab::models::{Family, Model, ModelSpec};

fn main() -> cltlab::Result<()> {
    println!("constant = {TRANSFER_CONSTANT:.10}");
    for p in [2.5, 3.0] {
        for n in [64, 256, 1024] {
            let model = Model::compile(&ModelSpec::new(n, p, Family::CeLowerbound {}))?;
            let scale = model.exact_moments().v_n.sqrt();
            let sums: Vec<f64> = model.replicate_sums(3, 50_000).iter().map(|s| s / scale).collect();
            let (_, r) = DistanceReport::measure(&sums, Some(p), "ce")?;
            println!(
                "p = {p}, n = {n:>5}: K = {:.4} <= {:.4} ? {}",
                r.kolmogorov,
                r.be_transfer.unwrap_or(f64::NAN),
                r.transfer_holds()
            );
        }
    }
    Ok(())
}
