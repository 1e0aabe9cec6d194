//! One-dimensional marginal laws of the increments ξ_k.
//!
//! Everything the bound evaluators need from a single ξ_k (ψ_n, moment
//! ratios, Σ E|ξ_k|^p) is an expectation under its marginal law, so each
//! family describes its marginals here and the expectations are evaluated in
//! closed form or by one-dimensional quadrature.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::numerics::{normal_abs_moment, normal_pdf, normal_truncated_cubic, quadrature};

use super::{CeParams, ChainIncrements, Model, Observable};

#[derive(Debug, Clone, PartialEq)]
pub enum MarginalLaw {
    Normal { sd: f64 },
    /// ±value with probability ½ each.
    Symmetric2 { value: f64 },
    /// Finite support: (value, probability) pairs.
    Discrete { atoms: Vec<(f64, f64)> },
    /// X_j, j > m, of the lower-bound construction.
    CeTail(CeParams),
    /// φ(U) with U uniform on [0, 1).
    Observable(Observable),
}

const TOL: f64 = 1e-12;

impl MarginalLaw {
    /// E g(X). `g` is assumed continuous; kinks are handled by adaptive quadrature.
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        match self {
            MarginalLaw::Normal { sd } => normal_expect(*sd, &g),
            MarginalLaw::Symmetric2 { value } => Ok(0.5 * (g(*value) + g(-value))),
            MarginalLaw::Discrete { atoms } => Ok(atoms.iter().map(|(x, w)| w * g(*x)).sum()),
            MarginalLaw::CeTail(c) => {
                let gaussian = normal_expect(1.0, &g)?;
                c.tail_expectation(gaussian, g)
            }
            MarginalLaw::Observable(obs) => {
                let f = |u: f64| g(obs.eval(u));
                Ok(quadrature(&f, 0.0, 0.5, TOL)?.value + quadrature(&f, 0.5, 1.0, TOL)?.value)
            }
        }
    }

    /// E|X|^q.
    pub fn abs_moment(&self, q: f64) -> Result<f64> {
        match self {
            MarginalLaw::Normal { sd } => Ok(sd.powf(q) * normal_abs_moment(q)?),
            MarginalLaw::Symmetric2 { value } => Ok(value.abs().powf(q)),
            MarginalLaw::CeTail(c) => c.tail_abs_moment(q),
            _ => self.expect(|x| x.abs().powf(q)),
        }
    }

    /// E min(c X², |X|³) for c ≥ 0.
    pub fn truncated_cubic(&self, c: f64) -> Result<f64> {
        let g = |x: f64| (c * x * x).min(x.abs().powi(3));
        match self {
            MarginalLaw::Normal { sd } => Ok(sd.powi(3) * normal_truncated_cubic(c / sd)),
            MarginalLaw::CeTail(p) => p.tail_expectation(normal_truncated_cubic(c), g),
            _ => self.expect(g),
        }
    }
}

fn normal_expect(sd: f64, g: &dyn Fn(f64) -> f64) -> Result<f64> {
    let f = |z: f64| g(sd * z) * normal_pdf(z);
    Ok(quadrature(f, -40.0, 0.0, TOL)?.value + quadrature(f, 0.0, 40.0, TOL)?.value)
}

/// A marginal law shared by the increments at `indices` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalGroup {
    pub law: MarginalLaw,
    pub sigma2: f64,
    pub indices: Vec<usize>,
}

fn group_normals(sds: impl Iterator<Item = f64>) -> Vec<MarginalGroup> {
    let mut by_sd: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
    for (k, sd) in sds.enumerate() {
        by_sd.entry(sd.abs().to_bits()).or_default().push(k);
    }
    by_sd
        .into_iter()
        .map(|(bits, indices)| {
            let sd = f64::from_bits(bits);
            MarginalGroup {
                law: MarginalLaw::Normal { sd },
                sigma2: sd * sd,
                indices,
            }
        })
        .collect()
}

impl Model {
    /// The marginal laws of ξ_1..ξ_n, grouped.
    pub fn marginal_groups(&self) -> Vec<MarginalGroup> {
        let n = self.n();
        if let Some(sigmas) = self.independent_sigmas() {
            if self.is_gaussian() {
                return group_normals(sigmas.iter().copied());
            }
            let mut by_sd: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
            for (k, s) in sigmas.iter().enumerate() {
                by_sd.entry(s.to_bits()).or_default().push(k);
            }
            return by_sd
                .into_iter()
                .map(|(bits, indices)| {
                    let value = f64::from_bits(bits);
                    MarginalGroup {
                        law: MarginalLaw::Symmetric2 { value },
                        sigma2: value * value,
                        indices,
                    }
                })
                .collect();
        }
        if let Some(c) = self.ce_params() {
            return vec![
                MarginalGroup {
                    law: MarginalLaw::Normal { sd: 1.0 },
                    sigma2: 1.0,
                    indices: (0..c.m).collect(),
                },
                MarginalGroup {
                    law: MarginalLaw::CeTail(c.clone()),
                    sigma2: 1.0,
                    indices: (c.m..n).collect(),
                },
            ];
        }
        if let Some(l) = self.linear() {
            let g0 = l.base.autocovariance(0).sqrt();
            return group_normals(l.alphas.iter().map(|a| a * g0));
        }
        if let Some(ch) = self.chain() {
            let s = ch.states();
            let stationary = MarginalLaw::Discrete {
                atoms: (0..s).map(|j| (ch.values[j], ch.stationary[j])).collect(),
            };
            let f2: Vec<f64> = ch.values.iter().map(|v| v * v).collect();
            let first = MarginalGroup {
                law: stationary,
                sigma2: ch.stationary_mean(&f2),
                indices: vec![0],
            };
            if n == 1 {
                return vec![first];
            }
            return match ch.mode {
                ChainIncrements::Observable => {
                    let mut g = first;
                    g.indices = (0..n).collect();
                    vec![g]
                }
                ChainIncrements::Martingale => {
                    let mut atoms = Vec::new();
                    for i in 0..s {
                        for j in 0..s {
                            let w = ch.stationary[i] * ch.transition[i][j];
                            if w > 0.0 {
                                atoms.push((ch.values[j] - ch.pf()[i], w));
                            }
                        }
                    }
                    vec![
                        first,
                        MarginalGroup {
                            law: MarginalLaw::Discrete { atoms },
                            sigma2: ch.stationary_mean(ch.conditional_variance()),
                            indices: (1..n).collect(),
                        },
                    ]
                }
            };
        }
        let obs = self.maps().expect("all families covered").observable;
        vec![MarginalGroup {
            law: MarginalLaw::Observable(obs),
            sigma2: obs.second_moment(),
            indices: (0..n).collect(),
        }]
    }

    /// sup_k E|ξ_k|^q / σ_k² over indices with σ_k > 0.
    pub fn moment_ratio(&self, q: f64) -> Result<f64> {
        let mut best = 0.0f64;
        for g in self.marginal_groups() {
            if g.sigma2 > 0.0 {
                best = best.max(g.law.abs_moment(q)? / g.sigma2);
            }
        }
        Ok(best)
    }

    /// Σ_k E|ξ_k|^q.
    pub fn abs_moment_sum(&self, q: f64) -> Result<f64> {
        let mut total = 0.0;
        for g in self.marginal_groups() {
            total += g.indices.len() as f64 * g.law.abs_moment(q)?;
        }
        Ok(total)
    }
}
