//! Weighted sums S_n = Σ α_{i,n} Y_i of a stationary Gaussian AR(1) or MA(q) sequence.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{standard_normal, StreamRng};

/// The stationary sequence (Y_i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LinearBase {
    /// Y_i = φ Y_{i−1} + s ε_i, started from the stationary law.
    GaussianAr1 {
        phi: f64,
        #[serde(default = "one")]
        innovation_sd: f64,
    },
    /// Y_i = Σ_{j=0}^{q} c_j ε_{i−j}.
    GaussianMa { coeffs: Vec<f64> },
}

/// The coefficients α_{i,n}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum CoefficientRule {
    Constant {
        #[serde(default = "one")]
        kappa: f64,
    },
    /// α_{k,n} = κ k^α with α > −1/2.
    Power {
        #[serde(default = "one")]
        kappa: f64,
        alpha: f64,
    },
    /// α_{1,n}, …, α_{n,n} given verbatim (at least n entries).
    Explicit { values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Default for CoefficientRule {
    fn default() -> Self {
        CoefficientRule::Constant { kappa: 1.0 }
    }
}

impl LinearBase {
    pub fn validate(&self) -> Result<()> {
        match self {
            LinearBase::GaussianAr1 { phi, innovation_sd } => {
                if !(phi.abs() < 1.0) {
                    return Err(Error::config(format!(
                        "linear_statistic: AR(1) needs |phi| < 1 for stationarity, got {phi}"
                    )));
                }
                if !(*innovation_sd > 0.0) || !innovation_sd.is_finite() {
                    return Err(Error::config(format!(
                        "linear_statistic: innovation_sd must be positive, got {innovation_sd}"
                    )));
                }
            }
            LinearBase::GaussianMa { coeffs } => {
                if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(Error::config(
                        "linear_statistic: MA coefficients must be a nonempty list of finite reals",
                    ));
                }
                if coeffs.iter().all(|c| *c == 0.0) {
                    return Err(Error::config(
                        "linear_statistic: MA coefficients are all zero (variance must be > 0)",
                    ));
                }
            }
        }
        Ok(())
    }

    /// γ_k = Cov(Y_0, Y_k).
    pub fn autocovariance(&self, k: usize) -> f64 {
        match self {
            LinearBase::GaussianAr1 { phi, innovation_sd } => {
                let s2 = innovation_sd * innovation_sd;
                s2 * phi.powi(k as i32) / (1.0 - phi * phi)
            }
            LinearBase::GaussianMa { coeffs } => {
                if k >= coeffs.len() {
                    0.0
                } else {
                    coeffs.iter().zip(&coeffs[k..]).map(|(a, b)| a * b).sum()
                }
            }
        }
    }

    /// Number of lags after which γ_k is treated as zero (exactly zero for MA).
    pub fn lag_horizon(&self, n: usize) -> usize {
        match self {
            LinearBase::GaussianAr1 { phi, .. } => {
                if *phi == 0.0 {
                    1
                } else {
                    // |φ|^K below 1e-18.
                    let k = (-18.0 * std::f64::consts::LN_10 / phi.abs().ln()).ceil() as usize + 1;
                    k.min(n)
                }
            }
            LinearBase::GaussianMa { coeffs } => coeffs.len().min(n),
        }
    }

    /// σ² = Σ_{k∈Z} γ_k, the long-run variance (2π times the spectral density at 0).
    pub fn long_run_variance(&self) -> f64 {
        match self {
            LinearBase::GaussianAr1 { phi, innovation_sd } => {
                let s = innovation_sd / (1.0 - phi);
                s * s
            }
            LinearBase::GaussianMa { coeffs } => {
                let s: f64 = coeffs.iter().sum();
                s * s
            }
        }
    }

    /// Scale applied to Σ ε_i so that it has the long-run variance: s/(1 − φ) or Σ c_j.
    fn innovation_scale(&self) -> f64 {
        match self {
            LinearBase::GaussianAr1 { phi, innovation_sd } => innovation_sd / (1.0 - phi),
            LinearBase::GaussianMa { coeffs } => coeffs.iter().sum(),
        }
    }

    /// ‖E(Y_i | G_0)‖_q for Y_i Gaussian: the conditional mean is Gaussian with the
    /// variance of the part of Y_i already fixed at time 0.
    pub fn conditional_mean_norm(&self, i: usize, q: f64) -> f64 {
        let var = match self {
            LinearBase::GaussianAr1 { phi, .. } => {
                phi.powi(2 * i as i32) * self.autocovariance(0)
            }
            LinearBase::GaussianMa { coeffs } => {
                coeffs.iter().skip(i).map(|c| c * c).sum()
            }
        };
        var.sqrt() * crate::numerics::normal_abs_moment(q).expect("q > 0").powf(1.0 / q)
    }
}

impl CoefficientRule {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            CoefficientRule::Constant { kappa } => {
                if *kappa == 0.0 || !kappa.is_finite() {
                    return Err(Error::config("linear_statistic: kappa must be finite and nonzero"));
                }
            }
            CoefficientRule::Power { kappa, alpha } => {
                if *kappa == 0.0 || !kappa.is_finite() {
                    return Err(Error::config("linear_statistic: kappa must be finite and nonzero"));
                }
                if !(*alpha > -0.5) || !alpha.is_finite() {
                    return Err(Error::config(format!(
                        "linear_statistic: power rule needs alpha > -1/2, got {alpha}"
                    )));
                }
            }
            CoefficientRule::Explicit { values } => {
                if values.len() < n {
                    return Err(Error::config(format!(
                        "linear_statistic: {} explicit coefficients for n = {n}",
                        values.len()
                    )));
                }
                if values[..n].iter().any(|v| !v.is_finite()) || values[..n].iter().all(|v| *v == 0.0) {
                    return Err(Error::config(
                        "linear_statistic: explicit coefficients must be finite and not all zero",
                    ));
                }
            }
        }
        Ok(())
    }

    /// α_{1,n}, …, α_{n,n}.
    pub fn coefficients(&self, n: usize) -> Vec<f64> {
        match self {
            CoefficientRule::Constant { kappa } => vec![*kappa; n],
            CoefficientRule::Power { kappa, alpha } => {
                (1..=n).map(|k| kappa * (k as f64).powf(*alpha)).collect()
            }
            CoefficientRule::Explicit { values } => values[..n].to_vec(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, CoefficientRule::Constant { .. })
    }
}

/// A compiled linear statistic for one n.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub base: LinearBase,
    pub alphas: Vec<f64>,
    constant_alphas: bool,
    ar_stationary_sd: f64,
}

impl LinearModel {
    pub fn new(base: LinearBase, rule: &CoefficientRule, n: usize) -> Result<Self> {
        base.validate()?;
        rule.validate(n)?;
        let ar_stationary_sd = base.autocovariance(0).sqrt();
        Ok(Self {
            alphas: rule.coefficients(n),
            constant_alphas: rule.is_constant(),
            base,
            ar_stationary_sd,
        })
    }

    pub fn n(&self) -> usize {
        self.alphas.len()
    }

    /// Σ α_{i,n}².
    pub fn sum_alpha2(&self) -> f64 {
        self.alphas.iter().map(|a| a * a).sum()
    }

    /// m_n = max |α_{i,n}|.
    pub fn max_alpha(&self) -> f64 {
        self.alphas.iter().fold(0.0f64, |m, a| m.max(a.abs()))
    }

    /// V_n = Σ_i Σ_j α_i α_j γ_{|i−j|}, summed by lag.
    pub fn exact_variance(&self) -> f64 {
        let n = self.n();
        let horizon = self.base.lag_horizon(n);
        let mut total = 0.0;
        for k in 0..horizon {
            let g = self.base.autocovariance(k);
            if g == 0.0 {
                continue;
            }
            let cross: f64 = self.alphas.iter().zip(&self.alphas[k..]).map(|(a, b)| a * b).sum();
            total += if k == 0 { g * cross } else { 2.0 * g * cross };
        }
        total
    }

    /// Fill `out` with X_{i,n} = α_{i,n} Y_i; returns S_n and, for constant α,
    /// the coupled reference Σ ε_i · scale / √n, an exact draw from G_{σ²}.
    pub fn simulate(&self, rng: &mut StreamRng, mut out: Option<&mut Vec<f64>>) -> (f64, Option<f64>) {
        if let Some(o) = out.as_deref_mut() {
            o.clear();
        }
        let n = self.n();
        let mut s = 0.0;
        let mut eps_sum = 0.0;
        match &self.base {
            LinearBase::GaussianAr1 { phi, innovation_sd } => {
                let mut y = self.ar_stationary_sd * standard_normal(rng);
                for alpha in &self.alphas {
                    let e = standard_normal(rng);
                    eps_sum += e;
                    y = phi * y + innovation_sd * e;
                    let x = alpha * y;
                    s += x;
                    if let Some(o) = out.as_deref_mut() {
                        o.push(x);
                    }
                }
            }
            LinearBase::GaussianMa { coeffs } => {
                let q = coeffs.len() - 1;
                // Ring of the last q + 1 innovations, newest at `head`.
                let mut ring = vec![0.0; q + 1];
                for slot in ring.iter_mut().take(q) {
                    *slot = standard_normal(rng);
                }
                let mut head = q;
                for alpha in &self.alphas {
                    let e = standard_normal(rng);
                    eps_sum += e;
                    ring[head] = e;
                    let mut y = 0.0;
                    for (j, c) in coeffs.iter().enumerate() {
                        y += c * ring[(head + q + 1 - j) % (q + 1)];
                    }
                    head = (head + 1) % (q + 1);
                    let x = alpha * y;
                    s += x;
                    if let Some(o) = out.as_deref_mut() {
                        o.push(x);
                    }
                }
            }
        }
        let reference = if self.constant_alphas {
            Some(eps_sum * self.base.innovation_scale() / (n as f64).sqrt())
        } else {
            None
        };
        (s, reference)
    }

    /// |√(V_n/Σα²) − σ|, the variance-mismatch term of the normalized bound.
    pub fn variance_mismatch(&self) -> f64 {
        ((self.exact_variance() / self.sum_alpha2()).sqrt() - self.base.long_run_variance().sqrt()).abs()
    }
}
