//! Sequential compositions of the maps T_k(x) = m_k x mod 1 under Lebesgue measure.
//!
//! Iterating m_k x mod 1 forward in floating point loses one digit per step
//! and collapses to 0 after ~53 doublings. Paths are therefore built
//! backwards: τ_n(x) is uniform, and given τ_k(x) = y_k the previous point is
//! y_{k−1} = (d_k + y_k)/m_k with d_k uniform on {0, …, m_k − 1}. This is the
//! exact joint law of (τ_1(x), …, τ_n(x)) for x uniform on [0, 1).

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::StreamRng;

use std::f64::consts::{PI, SQRT_2};

/// Trigonometric observables, centered under the uniform measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// √2 cos(2πx).
    Cos1,
    /// cos(2πx) + ½ cos(4πx).
    Cos12,
}

impl Observable {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Observable::Cos1 => SQRT_2 * (2.0 * PI * x).cos(),
            Observable::Cos12 => {
                let c = (2.0 * PI * x).cos();
                // cos(4πx) = 2cos²(2πx) − 1
                c + 0.5 * (2.0 * c * c - 1.0)
            }
        }
    }

    /// (harmonic, coefficient) pairs of the cosine expansion.
    pub fn harmonics(self) -> &'static [(u64, f64)] {
        match self {
            Observable::Cos1 => &[(1, SQRT_2)],
            Observable::Cos12 => &[(1, 1.0), (2, 0.5)],
        }
    }

    /// ∫ φ² over [0, 1).
    pub fn second_moment(self) -> f64 {
        self.harmonics().iter().map(|(_, c)| c * c / 2.0).sum()
    }

    /// sup |φ|.
    pub fn sup_norm(self) -> f64 {
        match self {
            Observable::Cos1 => SQRT_2,
            Observable::Cos12 => 1.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SeqMapsModel {
    /// m_1..m_n (the configured schedule repeated cyclically).
    pub multipliers: Vec<u32>,
    pub observable: Observable,
}

impl SeqMapsModel {
    pub fn new(schedule: &[u32], observable: Observable, n: usize) -> Result<Self> {
        if schedule.is_empty() {
            return Err(Error::config("sequential_maps: schedule is empty"));
        }
        if let Some(bad) = schedule.iter().find(|m| **m < 2) {
            return Err(Error::config(format!(
                "sequential_maps: multiplier {bad} < 2 loses expansion"
            )));
        }
        Ok(Self {
            multipliers: schedule.iter().copied().cycle().take(n).collect(),
            observable,
        })
    }

    pub fn n(&self) -> usize {
        self.multipliers.len()
    }

    /// Fill increments φ(τ_k x), k = 1..n, and return their sum accumulated from k = n down to 1.
    pub fn simulate(&self, rng: &mut StreamRng, mut out: Option<&mut Vec<f64>>) -> f64 {
        let n = self.n();
        if let Some(o) = out.as_deref_mut() {
            o.clear();
            o.resize(n, 0.0);
        }
        let mut y = rng.open_unit();
        let mut s = 0.0;
        for k in (0..n).rev() {
            let v = self.observable.eval(y);
            s += v;
            if let Some(o) = out.as_deref_mut() {
                o[k] = v;
            }
            let m = self.multipliers[k];
            let d = rng.random_range(0..m);
            y = (d as f64 + y) / m as f64;
        }
        s
    }

    /// V_n = ∫ S_n² from the cosine expansion of S_n.
    ///
    /// Term k contributes c·cos(2π h M_k x) with M_k = m_1⋯m_k. Frequencies are
    /// kept as prime-exponent vectors so they never overflow; distinct
    /// frequencies are orthogonal with ∫cos² = ½.
    pub fn exact_variance(&self) -> f64 {
        let mut primes: Vec<u64> = Vec::new();
        let factor_of = |mut v: u64, primes: &mut Vec<u64>| -> Vec<(usize, u32)> {
            let mut out = Vec::new();
            let mut d = 2;
            while d * d <= v {
                let mut e = 0;
                while v % d == 0 {
                    v /= d;
                    e += 1;
                }
                if e > 0 {
                    out.push((d, e));
                }
                d += 1;
            }
            if v > 1 {
                out.push((v, 1));
            }
            out.into_iter()
                .map(|(p, e)| {
                    let idx = primes.iter().position(|q| *q == p).unwrap_or_else(|| {
                        primes.push(p);
                        primes.len() - 1
                    });
                    (idx, e)
                })
                .collect()
        };
        let harmonic_factors: Vec<(Vec<(usize, u32)>, f64)> = self
            .observable
            .harmonics()
            .iter()
            .map(|(h, c)| (factor_of(*h, &mut primes), *c))
            .collect();
        let mut exponent: Vec<u32> = Vec::new();
        let mut coefficient: HashMap<Vec<u32>, f64> = HashMap::new();
        for &m in &self.multipliers {
            for (idx, e) in factor_of(m as u64, &mut primes) {
                if exponent.len() <= idx {
                    exponent.resize(idx + 1, 0);
                }
                exponent[idx] += e;
            }
            for (hf, c) in &harmonic_factors {
                let mut key = exponent.clone();
                for &(idx, e) in hf {
                    if key.len() <= idx {
                        key.resize(idx + 1, 0);
                    }
                    key[idx] += e;
                }
                while key.last() == Some(&0) {
                    key.pop();
                }
                *coefficient.entry(key).or_insert(0.0) += c;
            }
        }
        coefficient.values().map(|c| c * c / 2.0).sum()
    }
}
