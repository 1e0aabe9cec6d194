//! Functionals of a finite stationary Markov chain.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::StreamRng;

/// Transition structure of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChainKind {
    /// Two states that stay put with probability q.
    TwoState { stay_probability: f64 },
    General { transition: Vec<Vec<f64>> },
}

impl Default for ChainKind {
    fn default() -> Self {
        ChainKind::TwoState {
            stay_probability: 0.75,
        }
    }
}

/// What the path records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChainIncrements {
    /// X_i = f(Y_i): centered, bounded, ρ-mixing, not a martingale.
    #[default]
    Observable,
    /// ξ_1 = f(Y_1), ξ_k = f(Y_k) − (Pf)(Y_{k−1}): martingale differences.
    Martingale,
}

const STOCHASTIC_TOL: f64 = 1e-12;

/// A validated chain with the function f and its precomputed moments.
#[derive(Debug, Clone)]
pub struct ChainModel {
    pub transition: Vec<Vec<f64>>,
    pub stationary: Vec<f64>,
    pub values: Vec<f64>,
    pub mode: ChainIncrements,
    /// Row-wise cumulative transition probabilities for sampling.
    cumulative: Vec<Vec<f64>>,
    stationary_cumulative: Vec<f64>,
    /// (Pf)(y).
    pf: Vec<f64>,
    /// g(y) = (P f²)(y) − (Pf)(y)², the conditional variance of ξ_k given Y_{k−1} = y.
    cond_var: Vec<f64>,
}

fn cumulative(row: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = row
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

fn apply(p: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    p.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

impl ChainModel {
    pub fn new(kind: &ChainKind, values: Vec<f64>, mode: ChainIncrements) -> Result<Self> {
        let transition = match kind {
            ChainKind::TwoState { stay_probability: q } => {
                if !(*q > 0.0 && *q < 1.0) {
                    return Err(Error::config(format!(
                        "rho_mixing_chain: stay_probability must lie in (0, 1), got {q}"
                    )));
                }
                vec![vec![*q, 1.0 - q], vec![1.0 - q, *q]]
            }
            ChainKind::General { transition } => transition.clone(),
        };
        let s = transition.len();
        if s == 0 || transition.iter().any(|r| r.len() != s) {
            return Err(Error::config("rho_mixing_chain: transition matrix must be square and nonempty"));
        }
        if s > u16::MAX as usize {
            return Err(Error::config("rho_mixing_chain: too many states"));
        }
        for (i, row) in transition.iter().enumerate() {
            if row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
                return Err(Error::config(format!("rho_mixing_chain: row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::config(format!("rho_mixing_chain: row {i} sums to {sum}, not 1")));
            }
        }
        if values.len() != s {
            return Err(Error::config(format!(
                "rho_mixing_chain: {} function values for {s} states",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("rho_mixing_chain: function values must be finite"));
        }
        check_primitive(&transition)?;
        let stationary = stationary_law(&transition)?;
        let mean: f64 = stationary.iter().zip(&values).map(|(p, v)| p * v).sum();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if mean.abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::config(format!(
                "rho_mixing_chain: f is not centered under the stationary law (mean {mean})"
            )));
        }
        if values.iter().zip(&stationary).all(|(v, _)| *v == 0.0) {
            return Err(Error::config("rho_mixing_chain: f vanishes identically (variance must be > 0)"));
        }
        let pf = apply(&transition, &values);
        let f2: Vec<f64> = values.iter().map(|v| v * v).collect();
        let pf2 = apply(&transition, &f2);
        let cond_var = pf2.iter().zip(&pf).map(|(a, b)| (a - b * b).max(0.0)).collect();
        Ok(Self {
            cumulative: transition.iter().map(|r| cumulative(r)).collect(),
            stationary_cumulative: cumulative(&stationary),
            transition,
            stationary,
            values,
            mode,
            pf,
            cond_var,
        })
    }

    pub fn states(&self) -> usize {
        self.values.len()
    }

    /// π·h.
    pub fn stationary_mean(&self, h: &[f64]) -> f64 {
        self.stationary.iter().zip(h).map(|(p, v)| p * v).sum()
    }

    /// ρ_Y(1): second singular value of D^{1/2} P D^{−1/2}, D = diag(π).
    pub fn rho1(&self) -> f64 {
        let s = self.states();
        if s == 1 {
            return 0.0;
        }
        let m = DMatrix::from_fn(s, s, |i, j| {
            self.stationary[i].sqrt() * self.transition[i][j] / self.stationary[j].sqrt()
        });
        let mut sv: Vec<f64> = m.singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv[1].min(1.0)
    }

    /// (1 + ρ)(1 − ρ)^{−1} with ρ = ρ_Y(1).
    pub fn c_n_bound(&self) -> f64 {
        let r = self.rho1();
        (1.0 + r) / (1.0 - r)
    }

    /// Autocovariances γ_0..γ_{lags−1} of X_i = f(Y_i) under stationarity.
    pub fn autocovariances(&self, lags: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(lags);
        let mut h = self.values.clone();
        let weighted: Vec<f64> = self.stationary.iter().zip(&self.values).map(|(p, v)| p * v).collect();
        for _ in 0..lags {
            out.push(weighted.iter().zip(&h).map(|(a, b)| a * b).sum());
            h = apply(&self.transition, &h);
        }
        out
    }

    /// V_m = Var(S_m) of the observable sums for m = 1..=n.
    pub fn observable_variances(&self, n: usize) -> Vec<f64> {
        let gamma = self.autocovariances(n);
        let mut out = Vec::with_capacity(n);
        let mut v = 0.0;
        let mut tail = 0.0; // Σ_{k=1}^{m−1} γ_k
        for m in 1..=n {
            if m >= 2 {
                tail += gamma[m - 1];
            }
            v += gamma[0] + 2.0 * tail;
            out.push(v);
        }
        out
    }

    /// C_n = max_ℓ Σ_{i=ℓ}^n E X_i² / E(S_n − S_{ℓ−1})², which under stationarity is max_{m≤n} m γ_0 / V_m.
    pub fn c_n(&self, n: usize) -> f64 {
        let gamma0 = self.autocovariances(1)[0];
        self.observable_variances(n)
            .iter()
            .enumerate()
            .map(|(i, v)| (i + 1) as f64 * gamma0 / v)
            .fold(0.0, f64::max)
    }

    /// K_n = max |f| over states.
    pub fn k_n(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// σ_k² of the martingale increments: π·f² for k = 1, π·g after.
    pub fn martingale_sigma2(&self, n: usize) -> Vec<f64> {
        let f2: Vec<f64> = self.values.iter().map(|v| v * v).collect();
        let first = self.stationary_mean(&f2);
        let rest = self.stationary_mean(&self.cond_var);
        (0..n).map(|k| if k == 0 { first } else { rest }).collect()
    }

    /// Whether E(ξ_k² | F_{k−1}) is constant on the support of π.
    pub fn martingale_conditional_variance_constant(&self) -> bool {
        let on_support: Vec<f64> = self
            .cond_var
            .iter()
            .zip(&self.stationary)
            .filter(|(_, p)| **p > 0.0)
            .map(|(g, _)| *g)
            .collect();
        let lo = on_support.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = on_support.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo <= 1e-14 * hi.abs().max(1.0)
    }

    pub fn pf(&self) -> &[f64] {
        &self.pf
    }

    pub fn conditional_variance(&self) -> &[f64] {
        &self.cond_var
    }

    /// G_t(y) = Σ_{j=0}^{t} (P^j g)(y) for t = 0..horizon−1, so that for the
    /// martingale increments Σ_{k=ℓ}^n E_{ℓ−1}(ξ_k²) = G_{n−ℓ}(Y_{ℓ−1}).
    pub fn cumulative_conditional_variance(&self, horizon: usize) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(horizon);
        let mut h = self.cond_var.clone();
        let mut acc = vec![0.0; self.states()];
        for _ in 0..horizon {
            for (a, v) in acc.iter_mut().zip(&h) {
                *a += v;
            }
            out.push(acc.clone());
            h = apply(&self.transition, &h);
        }
        out
    }

    #[inline]
    fn draw(cum: &[f64], u: f64) -> usize {
        cum.iter().position(|c| u < *c).unwrap_or(cum.len() - 1)
    }

    /// Run the chain from its stationary law. Returns S_n; fills increments and states when asked.
    pub fn simulate(
        &self,
        n: usize,
        rng: &mut StreamRng,
        mut increments: Option<&mut Vec<f64>>,
        mut states: Option<&mut Vec<u16>>,
    ) -> f64 {
        if let Some(o) = increments.as_deref_mut() {
            o.clear();
        }
        if let Some(o) = states.as_deref_mut() {
            o.clear();
        }
        let mut y = Self::draw(&self.stationary_cumulative, rng.open_unit());
        let mut s = 0.0;
        for k in 0..n {
            let prev = y;
            if k > 0 {
                y = Self::draw(&self.cumulative[prev], rng.open_unit());
            }
            let x = match self.mode {
                ChainIncrements::Observable => self.values[y],
                ChainIncrements::Martingale if k == 0 => self.values[y],
                ChainIncrements::Martingale => self.values[y] - self.pf[prev],
            };
            s += x;
            if let Some(o) = increments.as_deref_mut() {
                o.push(x);
            }
            if let Some(o) = states.as_deref_mut() {
                o.push(y as u16);
            }
        }
        s
    }
}

/// Primitive (irreducible and aperiodic) iff P^{(s−1)²+1} has no zero entry.
fn check_primitive(p: &[Vec<f64>]) -> Result<()> {
    let s = p.len();
    let adj: Vec<Vec<bool>> = p.iter().map(|r| r.iter().map(|v| *v > 0.0).collect()).collect();
    // Irreducibility first, so the error names the actual defect.
    let mut reach = adj.clone();
    for k in 0..s {
        for i in 0..s {
            if reach[i][k] {
                for j in 0..s {
                    if reach[k][j] {
                        reach[i][j] = true;
                    }
                }
            }
        }
    }
    if reach.iter().any(|r| r.iter().any(|b| !b)) {
        return Err(Error::config("rho_mixing_chain: transition matrix is reducible"));
    }
    let power = (s - 1) * (s - 1) + 1;
    let mut acc = adj.clone();
    for _ in 1..power {
        let mut next = vec![vec![false; s]; s];
        for i in 0..s {
            for k in 0..s {
                if acc[i][k] {
                    for j in 0..s {
                        next[i][j] |= adj[k][j];
                    }
                }
            }
        }
        acc = next;
    }
    if acc.iter().any(|r| r.iter().any(|b| !b)) {
        return Err(Error::config("rho_mixing_chain: transition matrix is periodic"));
    }
    Ok(())
}

/// Solve π P = π, Σπ = 1 by replacing one balance equation with the normalization.
fn stationary_law(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    let s = p.len();
    let mut a = DMatrix::from_fn(s, s, |i, j| p[j][i] - if i == j { 1.0 } else { 0.0 });
    for j in 0..s {
        a[(s - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::zeros(s);
    b[s - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::config("rho_mixing_chain: stationary law is not unique"))?;
    Ok(pi.iter().map(|v| v.max(0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeedLineage;

    fn symmetric(q: f64) -> ChainModel {
        ChainModel::new(
            &ChainKind::TwoState { stay_probability: q },
            vec![1.0, -1.0],
            ChainIncrements::Observable,
        )
        .unwrap()
    }

    pub(crate) fn asymmetric(mode: ChainIncrements) -> ChainModel {
        ChainModel::new(
            &ChainKind::General {
                transition: vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            },
            vec![1.0, -3.0],
            mode,
        )
        .unwrap()
    }

    #[test]
    fn symmetric_chain_spectrum() {
        let c = symmetric(0.75);
        assert!((c.rho1() - 0.5).abs() < 1e-14);
        assert!((c.c_n_bound() - 3.0).abs() < 1e-13);
        let g = c.autocovariances(5);
        for (k, v) in g.iter().enumerate() {
            assert!((v - 0.5f64.powi(k as i32)).abs() < 1e-15);
        }
        assert!((c.observable_variances(4)[3] - 8.25).abs() < 1e-14);
    }

    #[test]
    fn independent_case_has_zero_rho() {
        let c = symmetric(0.5);
        assert!(c.rho1().abs() < 1e-14);
        assert!(c.autocovariances(4)[1..].iter().all(|g| g.abs() < 1e-16));
        assert!((c.c_n(50) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn c_n_respects_the_bound() {
        let c = symmetric(0.75);
        let cn = c.c_n(1 << 13);
        assert!(cn >= 1.0 && cn <= 3.0, "{cn}");
        let a = asymmetric(ChainIncrements::Observable);
        assert!(a.c_n(1000) <= a.c_n_bound() + 1e-12);
    }

    #[test]
    fn stationary_law_of_asymmetric_chain() {
        let a = asymmetric(ChainIncrements::Observable);
        assert!((a.stationary[0] - 0.75).abs() < 1e-14);
        assert!((a.stationary[1] - 0.25).abs() < 1e-14);
        // Reversible two-state chain: ρ = |1 − p01 − p10| = 0.6.
        assert!((a.rho1() - 0.6).abs() < 1e-13);
    }

    #[test]
    fn invalid_chains_rejected() {
        let reducible = ChainKind::General {
            transition: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let err = ChainModel::new(&reducible, vec![1.0, -1.0], ChainIncrements::Observable).unwrap_err();
        assert!(err.to_string().contains("reducible"));
        let periodic = ChainKind::General {
            transition: vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        };
        let err = ChainModel::new(&periodic, vec![1.0, -1.0], ChainIncrements::Observable).unwrap_err();
        assert!(err.to_string().contains("periodic"));
        assert!(ChainModel::new(&ChainKind::default(), vec![1.0, 0.0], ChainIncrements::Observable).is_err());
    }

    #[test]
    fn martingale_increments_have_constant_variance_only_when_symmetric() {
        let s = ChainModel::new(
            &ChainKind::default(),
            vec![1.0, -1.0],
            ChainIncrements::Martingale,
        )
        .unwrap();
        assert!(s.martingale_conditional_variance_constant());
        let a = asymmetric(ChainIncrements::Martingale);
        assert!(!a.martingale_conditional_variance_constant());
    }

    #[test]
    fn simulated_variance_matches_covariance_sum() {
        let c = symmetric(0.75);
        let n = 20;
        let v = c.observable_variances(n)[n - 1];
        let reps = 50_000;
        let mean_sq = (0..reps)
            .map(|r| {
                let s = c.simulate(n, &mut SeedLineage::new(8, r).rng(), None, None);
                s * s
            })
            .sum::<f64>()
            / reps as f64;
        // Var(S²) ≈ 2V² for near-Gaussian sums.
        assert!((mean_sq - v).abs() < 4.0 * v * (2.0 / reps as f64).sqrt());
    }
}
