//! The lower-bound martingale: n − k standard normals followed by k
//! increments that, when the partial sum lands in ±[a, 2a], can cancel it
//! exactly and put an atom at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::gaussian::{phi_cdf, quantile_unchecked};
use crate::numerics::{normal_abs_moment, quadrature, standard_normal, StreamRng};

/// Smallest path length for which the construction is defined.
pub const CE_MIN_N: usize = 20;

/// Tuning of the construction: a = (n/4)^{1/(2p−2)}, k = ⌈4a²⌉, m = n − k.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeParams {
    pub n: usize,
    pub p: f64,
    pub a: f64,
    pub k: usize,
    pub m: usize,
}

impl CeParams {
    pub fn new(n: usize, p: f64) -> Result<Self> {
        if n < CE_MIN_N {
            return Err(Error::domain(
                "ce_lowerbound",
                format!("path length n = {n} violates the hypothesis n >= 20"),
            ));
        }
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::domain(
                "ce_lowerbound",
                format!("moment order p = {p} violates the hypothesis p > 2"),
            ));
        }
        let quarter = n as f64 / 4.0;
        let a = quarter.powf(1.0 / (2.0 * p - 2.0));
        // 4a² straight from (n/4)^{1/(p−1)}; snap values within rounding of an
        // integer so that e.g. n = 100, p = 3 gives k = 20 and not 21.
        let four_a2 = 4.0 * quarter.powf(1.0 / (p - 1.0));
        let nearest = four_a2.round();
        let four_a2 = if (four_a2 - nearest).abs() <= 1e-12 * four_a2 {
            nearest
        } else {
            four_a2
        };
        let k = four_a2.ceil() as usize;
        if k >= n {
            return Err(Error::domain(
                "ce_lowerbound",
                format!("k = {k} leaves no Gaussian prefix for n = {n}, p = {p}"),
            ));
        }
        Ok(Self {
            n,
            p,
            a,
            k,
            m: n - k,
        })
    }

    /// Whether a < √n/4 and m ≥ 7n/10, the window the moment and atom
    /// estimates are proved in. For p = 3 this needs n ≥ 64.
    pub fn within_proof_window(&self) -> bool {
        let n = self.n as f64;
        self.a < n.sqrt() / 4.0 && self.m as f64 >= 0.7 * n
    }

    /// Closed interval test |S_m| ∈ [a, 2a].
    #[inline]
    pub fn on_branch(&self, s_m: f64) -> bool {
        let x = s_m.abs();
        x >= self.a && x <= 2.0 * self.a
    }

    /// P(U ≤ k²/(S_m² + k²)): the probability of the cancelling value −S_m/k.
    #[inline]
    pub fn cancel_probability(&self, s_m: f64) -> f64 {
        let k = self.k as f64;
        k * k / (s_m * s_m + k * k)
    }

    /// P(|S_m| ∈ [a, 2a]) = 2(Φ(2a/√m) − Φ(a/√m)) with S_m ~ N(0, m).
    pub fn branch_probability(&self) -> f64 {
        let sd = (self.m as f64).sqrt();
        2.0 * (phi_cdf(2.0 * self.a / sd) - phi_cdf(self.a / sd))
    }

    /// The atom threshold 0.12 n^{−(p−2)/(2p−2)}.
    pub fn atom_threshold(&self) -> f64 {
        0.12 * (self.n as f64).powf(-self.rate_exponent())
    }

    /// The Kolmogorov threshold 0.06 n^{−(p−2)/(2p−2)}.
    pub fn kolmogorov_threshold(&self) -> f64 {
        0.06 * (self.n as f64).powf(-self.rate_exponent())
    }

    /// (p − 2)/(2p − 2).
    pub fn rate_exponent(&self) -> f64 {
        (self.p - 2.0) / (2.0 * self.p - 2.0)
    }

    /// E(|Y|^p) + 5^{p−2}, the uniform cap on E|X_j|^p.
    pub fn moment_cap(&self) -> f64 {
        normal_abs_moment(self.p).expect("p > 2") + 5f64.powf(self.p - 2.0)
    }

    /// E(|X_j|^q | S_m = x) on the branch: (|x|^q k^{2−q} + k^q |x|^{2−q})/(x² + k²).
    pub fn branch_conditional_moment(&self, x: f64, q: f64) -> f64 {
        let k = self.k as f64;
        let ax = x.abs();
        (ax.powf(q) * k.powf(2.0 - q) + k.powf(q) * ax.powf(2.0 - q)) / (x * x + k * k)
    }

    /// E g(X_j) for j > m, with the branch part integrated against the N(0, m) density.
    pub fn tail_expectation<G: Fn(f64) -> f64>(
        &self,
        gaussian_part: f64,
        g: G,
    ) -> Result<f64> {
        let m = self.m as f64;
        let sd = m.sqrt();
        let off = 1.0 - self.branch_probability();
        let density = |x: f64| (-(x * x) / (2.0 * m)).exp() / (sd * crate::numerics::gaussian::SQRT_2PI);
        let branch = |x: f64| {
            let q = self.cancel_probability(x);
            let k = self.k as f64;
            q * g(-x / k) + (1.0 - q) * g(k / x)
        };
        // The law of S_m is symmetric; integrate both signs of the window.
        let pos = quadrature(|x| density(x) * branch(x), self.a, 2.0 * self.a, 1e-13)?.value;
        let neg = quadrature(|x| density(x) * branch(-x), self.a, 2.0 * self.a, 1e-13)?.value;
        Ok(off * gaussian_part + pos + neg)
    }

    /// E|X_j|^q for j > m (q > 0).
    pub fn tail_abs_moment(&self, q: f64) -> Result<f64> {
        self.tail_expectation(normal_abs_moment(q)?, |v| v.abs().powf(q))
    }
}

/// One realization of the full construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CeDraw {
    pub increments: Vec<f64>,
    pub s_m: f64,
    pub branch_taken: bool,
    /// Number of trailing increments equal to −S_m/k (0 off the branch).
    pub cancel_count: usize,
    pub s_n: f64,
}

/// S_n on the branch, written so that b = k evaluates to exactly 0.
#[inline]
pub fn branch_sum(s_m: f64, k: usize, b: usize) -> f64 {
    let kf = k as f64;
    s_m * (1.0 - b as f64 / kf) + (k - b) as f64 * (kf / s_m)
}

/// Draw the full path: X_1..X_m iid N(0, 1), then one uniform U_j per trailing index.
pub fn ce_generate(params: &CeParams, rng: &mut StreamRng) -> CeDraw {
    let mut increments = Vec::with_capacity(params.n);
    let (s_m, branch_taken, cancel_count, s_n) = ce_fill(params, rng, &mut increments);
    CeDraw {
        increments,
        s_m,
        branch_taken,
        cancel_count,
        s_n,
    }
}

pub(crate) fn ce_fill(
    params: &CeParams,
    rng: &mut StreamRng,
    increments: &mut Vec<f64>,
) -> (f64, bool, usize, f64) {
    increments.clear();
    let mut s_m = 0.0;
    for _ in 0..params.m {
        let x = standard_normal(rng);
        s_m += x;
        increments.push(x);
    }
    let branch = params.on_branch(s_m);
    let kf = params.k as f64;
    let mut cancel = 0usize;
    let mut s_n = s_m;
    if branch {
        let threshold = params.cancel_probability(s_m);
        let (down, up) = (-s_m / kf, kf / s_m);
        for _ in 0..params.k {
            if rng.open_unit() <= threshold {
                cancel += 1;
                increments.push(down);
            } else {
                increments.push(up);
            }
        }
        s_n = branch_sum(s_m, params.k, cancel);
    } else {
        for _ in 0..params.k {
            let x = quantile_unchecked(rng.open_unit());
            s_n += x;
            increments.push(x);
        }
    }
    (s_m, branch, cancel, s_n)
}

/// Draw S_n only, with the same law as [`ce_generate`] but O(1) work off the branch:
/// S_m = √m·Z, and off the branch the k trailing normals sum to √k·Z'.
pub fn ce_fast_sum(params: &CeParams, rng: &mut StreamRng) -> (f64, bool) {
    let s_m = (params.m as f64).sqrt() * standard_normal(rng);
    if params.on_branch(s_m) {
        let threshold = params.cancel_probability(s_m);
        let cancel = (0..params.k)
            .filter(|_| rng.open_unit() <= threshold)
            .count();
        (branch_sum(s_m, params.k, cancel), true)
    } else {
        (s_m + (params.k as f64).sqrt() * standard_normal(rng), false)
    }
}
