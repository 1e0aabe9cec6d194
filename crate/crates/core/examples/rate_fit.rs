//! Fit a convergence exponent from a distance series.

use cltlab::distances::DistanceReport;
use cltlab::models::{Family, Model, ModelSpec, SigmaRule};
use cltlab::ratefit::{fit, fit_variant, DistanceKind, FitVariant, RatePoint, RateSeries};

fn main() -> cltlab::Result<()> {
    // Synthetic n^{-1/2} log n: the log-corrected fit recovers -1/2.
    let pts = (0..=16)
        .map(|i| {
            let n = (100.0 * 10f64.powf(i as f64 / 4.0)).round();
            RatePoint { n: n as usize, v_n: None, distance: n.powf(-0.5) * n.ln(), se: 0.0 }
        })
        .collect();
    let s = RateSeries::new("synthetic", DistanceKind::W1, pts)?;
    let r = fit_variant(&s, -0.5, 0.02, FitVariant::LogCorrected);
    println!("synthetic: raw {:.4}, log-corrected {:.4} -> {}", r.exponent, r.log_corrected_exponent, r.verdict);

    let mut pts = Vec::new();
    for k in 7..=13 {
        let n = 1usize << k;
        let model = Model::compile(&ModelSpec::new(n, 3.0, Family::RademacherIid { sigma: SigmaRule::default() }))?;
        let scale = (n as f64).sqrt();
        let sums: Vec<f64> = model.replicate_sums(1, 50_000).iter().map(|s| s / scale).collect();
        let (_, d) = DistanceReport::measure(&sums, None, "rademacher")?;
        pts.push(RatePoint { n, v_n: Some(n as f64), distance: d.kolmogorov, se: 0.5 / (50_000f64).sqrt() });
    }
    let r = fit(&RateSeries::new("rademacher", DistanceKind::Kolmogorov, pts)?, -0.5, 0.1);
    println!("rademacher: exponent {:.4} +- {:.4} -> {}", r.exponent, r.ci_halfwidth, r.verdict);
    Ok(())
}
