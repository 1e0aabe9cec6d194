//! Gaussian special functions, the quadrature oracle and the random stream contract.

pub mod gaussian;
pub mod quadrature;
pub mod rng;

pub use gaussian::{
    integral_of_phi, normal_abs_moment, normal_cdf, normal_pdf, normal_quantile,
    normal_truncated_cubic,
};
pub use quadrature::{quadrature, QuadratureResult};
pub use rng::{SeedLineage, StreamRng};

use rand_distr::{Distribution, StandardNormal};

/// Law N(0, a), parameterized by its variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRef {
    variance: f64,
}

impl GaussianRef {
    pub const STANDARD: GaussianRef = GaussianRef { variance: 1.0 };

    pub fn new(variance: f64) -> crate::Result<Self> {
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(crate::Error::domain(
                "GaussianRef::new",
                format!("variance {variance} must be positive"),
            ));
        }
        Ok(Self { variance })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// One standard normal draw (ziggurat).
#[inline]
pub fn standard_normal(rng: &mut StreamRng) -> f64 {
    StandardNormal.sample(rng)
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

const REDUCE_BLOCK: u64 = 1024;

/// Fold replicates 0..count in fixed blocks of 1024 on the rayon pool and
/// merge the block results left to right. Float sums come out the same for
/// every thread count.
pub(crate) fn ordered_fold<A, I, F, M>(count: usize, init: I, step: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) + Sync,
    M: Fn(A, A) -> A,
{
    use rayon::prelude::*;
    let count = count as u64;
    let blocks: Vec<A> = (0..count.div_ceil(REDUCE_BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut acc = init();
            for r in b * REDUCE_BLOCK..((b + 1) * REDUCE_BLOCK).min(count) {
                step(&mut acc, r);
            }
            acc
        })
        .collect();
    blocks.into_iter().fold(init(), merge)
}
