//! Sample-path generators with exact moment metadata.
//!
//! A [`ModelSpec`] is the serializable description; [`Model::compile`]
//! validates it and precomputes everything that does not depend on the
//! random stream. Every path is a pure function of `(spec, SeedLineage)`.

pub mod ce;
pub mod chain;
pub mod linear;
pub mod marginal;
pub mod pathfile;
pub mod seqmaps;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerics::{standard_normal, SeedLineage};

pub use ce::{ce_fast_sum, ce_generate, CeDraw, CeParams};
pub use chain::{ChainIncrements, ChainKind, ChainModel};
pub use linear::{CoefficientRule, LinearBase, LinearModel};
pub use marginal::{MarginalGroup, MarginalLaw};
pub use seqmaps::{Observable, SeqMapsModel};

/// Standard deviations σ_1..σ_n of independent increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum SigmaRule {
    Constant { value: f64 },
    /// σ_k = intercept + slope · k/n.
    Affine { intercept: f64, slope: f64 },
    Explicit { values: Vec<f64> },
}

impl Default for SigmaRule {
    fn default() -> Self {
        SigmaRule::Constant { value: 1.0 }
    }
}

impl SigmaRule {
    pub fn sigmas(&self, n: usize) -> Result<Vec<f64>> {
        let out: Vec<f64> = match self {
            SigmaRule::Constant { value } => vec![*value; n],
            SigmaRule::Affine { intercept, slope } => (1..=n)
                .map(|k| intercept + slope * k as f64 / n as f64)
                .collect(),
            SigmaRule::Explicit { values } => {
                if values.len() < n {
                    return Err(Error::config(format!(
                        "sigma: {} explicit values for n = {n}",
                        values.len()
                    )));
                }
                values[..n].to_vec()
            }
        };
        if let Some(bad) = out.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
            return Err(Error::config(format!(
                "sigma: every standard deviation must be positive, got {bad}"
            )));
        }
        Ok(out)
    }
}

/// Family tag and family-specific parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    GaussianIid {
        #[serde(default)]
        sigma: SigmaRule,
    },
    RademacherIid {
        #[serde(default)]
        sigma: SigmaRule,
    },
    CeLowerbound {},
    LinearStatistic {
        base: LinearBase,
        #[serde(default)]
        alphas: CoefficientRule,
    },
    RhoMixingChain {
        #[serde(default)]
        chain: ChainKind,
        #[serde(default = "default_chain_values")]
        values: Vec<f64>,
        #[serde(default)]
        increments: ChainIncrements,
    },
    SequentialMaps {
        schedule: Vec<u32>,
        observable: Observable,
    },
}

fn default_chain_values() -> Vec<f64> {
    vec![1.0, -1.0]
}

impl Family {
    pub fn tag(&self) -> &'static str {
        match self {
            Family::GaussianIid { .. } => "gaussian_iid",
            Family::RademacherIid { .. } => "rademacher_iid",
            Family::CeLowerbound {} => "ce_lowerbound",
            Family::LinearStatistic { .. } => "linear_statistic",
            Family::RhoMixingChain { .. } => "rho_mixing_chain",
            Family::SequentialMaps { .. } => "sequential_maps",
        }
    }
}

/// Full description of a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n: usize,
    /// Moment order under study.
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(flatten)]
    pub family: Family,
}

fn default_p() -> f64 {
    3.0
}

impl ModelSpec {
    pub fn new(n: usize, p: f64, family: Family) -> Self {
        Self { n, p, family }
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self {
            n,
            ..self.clone()
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("spec serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }
}

/// Moments of the increments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMoments {
    /// σ_k² = E ξ_k² (marginal variances for non-martingale families).
    pub sigma2: Vec<f64>,
    /// V_n = Var(S_n).
    pub v_n: f64,
    pub delta_n: f64,
    /// E(ξ_k² | F_{k−1}) = σ_k² almost surely.
    pub conditional_variance_constant: bool,
    /// True for martingale families, where V_n = Σ σ_k² holds.
    pub martingale: bool,
    pub exact: bool,
    /// Standard error of v_n (0 when exact).
    pub v_n_se: f64,
}

impl PathMoments {
    fn from_sigma2(sigma2: Vec<f64>, v_n: f64, cvc: bool, martingale: bool) -> Self {
        let delta_n = sigma2.iter().fold(0.0f64, |m, s| m.max(s.sqrt()));
        Self {
            sigma2,
            v_n,
            delta_n,
            conditional_variance_constant: cvc,
            martingale,
            exact: true,
            v_n_se: 0.0,
        }
    }
}

/// Family-specific state recorded alongside the increments.
#[derive(Debug, Clone, PartialEq)]
pub enum PathAux {
    None,
    Ce {
        s_m: f64,
        branch_taken: bool,
        cancel_count: usize,
    },
    Chain {
        states: Vec<u16>,
    },
    Linear {
        /// Coupled exact draw from G_{σ²} (constant coefficients only).
        reference: Option<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub increments: Vec<f64>,
    /// S_n (computed by the family's own summation, exact zero for cancelled CE paths).
    pub sum: f64,
    pub aux: PathAux,
}

#[derive(Debug, Clone)]
enum Kernel {
    Gaussian { sigmas: Vec<f64> },
    Rademacher { sigmas: Vec<f64>, constant: bool },
    Ce(CeParams),
    Linear(LinearModel),
    Chain(ChainModel),
    Maps(SeqMapsModel),
}

/// A validated, precomputed model for one path length.
#[derive(Debug, Clone)]
pub struct Model {
    spec: ModelSpec,
    kernel: Kernel,
}

impl Model {
    pub fn compile(spec: &ModelSpec) -> Result<Self> {
        let n = spec.n;
        if n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if !(spec.p > 2.0) || !spec.p.is_finite() {
            return Err(Error::config(format!("p must exceed 2, got {}", spec.p)));
        }
        let is_ce = matches!(spec.family, Family::CeLowerbound {});
        if !is_ce && spec.p > 3.0 {
            return Err(Error::config(format!(
                "p must lie in (2, 3] for {}, got {}",
                spec.family.tag(),
                spec.p
            )));
        }
        let kernel = match &spec.family {
            Family::GaussianIid { sigma } => {
                Kernel::Gaussian {
                    sigmas: sigma.sigmas(n)?,
                }
            }
            Family::RademacherIid { sigma } => {
                let sigmas = sigma.sigmas(n)?;
                Kernel::Rademacher {
                    constant: sigmas.iter().all(|s| *s == sigmas[0]),
                    sigmas,
                }
            }
            Family::CeLowerbound {} => Kernel::Ce(CeParams::new(n, spec.p).map_err(|e| match e {
                Error::Domain { detail, .. } => Error::config(format!("ce_lowerbound: {detail}")),
                other => other,
            })?),
            Family::LinearStatistic { base, alphas } => {
                Kernel::Linear(LinearModel::new(base.clone(), alphas, n)?)
            }
            Family::RhoMixingChain {
                chain,
                values,
                increments,
            } => Kernel::Chain(ChainModel::new(chain, values.clone(), *increments)?),
            Family::SequentialMaps {
                schedule,
                observable,
            } => Kernel::Maps(SeqMapsModel::new(schedule, *observable, n)?),
        };
        Ok(Self {
            spec: spec.clone(),
            kernel,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn tag(&self) -> &'static str {
        self.spec.family.tag()
    }

    pub fn ce_params(&self) -> Option<&CeParams> {
        match &self.kernel {
            Kernel::Ce(c) => Some(c),
            _ => None,
        }
    }

    pub fn chain(&self) -> Option<&ChainModel> {
        match &self.kernel {
            Kernel::Chain(c) => Some(c),
            _ => None,
        }
    }

    pub fn linear(&self) -> Option<&LinearModel> {
        match &self.kernel {
            Kernel::Linear(l) => Some(l),
            _ => None,
        }
    }

    pub fn maps(&self) -> Option<&SeqMapsModel> {
        match &self.kernel {
            Kernel::Maps(m) => Some(m),
            _ => None,
        }
    }

    /// Standard deviations of the independent-increment families.
    pub fn independent_sigmas(&self) -> Option<&[f64]> {
        match &self.kernel {
            Kernel::Gaussian { sigmas, .. } | Kernel::Rademacher { sigmas, .. } => Some(sigmas),
            _ => None,
        }
    }

    pub fn is_rademacher(&self) -> bool {
        matches!(self.kernel, Kernel::Rademacher { .. })
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.kernel, Kernel::Gaussian { .. })
    }

    /// Whether the increments form a martingale difference sequence.
    pub fn is_martingale(&self) -> bool {
        match &self.kernel {
            Kernel::Gaussian { .. } | Kernel::Rademacher { .. } | Kernel::Ce(_) => true,
            Kernel::Chain(c) => c.mode == ChainIncrements::Martingale,
            Kernel::Linear(_) | Kernel::Maps(_) => false,
        }
    }

    /// The full path ξ_1..ξ_n with auxiliary state.
    pub fn sample_path(&self, lineage: SeedLineage) -> SamplePath {
        let mut rng = lineage.rng();
        let mut increments = Vec::with_capacity(self.n());
        let (sum, aux) = match &self.kernel {
            Kernel::Gaussian { sigmas, .. } => {
                let mut s = 0.0;
                for sd in sigmas {
                    let x = sd * standard_normal(&mut rng);
                    s += x;
                    increments.push(x);
                }
                (s, PathAux::None)
            }
            Kernel::Rademacher { sigmas, .. } => {
                let n = sigmas.len();
                let mut s = 0.0;
                let mut word = 0u64;
                for (k, sd) in sigmas.iter().enumerate() {
                    if k % 64 == 0 {
                        word = rng.next_u64();
                    }
                    let x = if (word >> (k % 64)) & 1 == 1 { *sd } else { -sd };
                    s += x;
                    increments.push(x);
                }
                debug_assert_eq!(increments.len(), n);
                (s, PathAux::None)
            }
            Kernel::Ce(params) => {
                let (s_m, branch_taken, cancel_count, s_n) =
                    ce::ce_fill(params, &mut rng, &mut increments);
                (
                    s_n,
                    PathAux::Ce {
                        s_m,
                        branch_taken,
                        cancel_count,
                    },
                )
            }
            Kernel::Linear(l) => {
                let (s, reference) = l.simulate(&mut rng, Some(&mut increments));
                (s, PathAux::Linear { reference })
            }
            Kernel::Chain(c) => {
                let mut states = Vec::with_capacity(self.n());
                let s = c.simulate(self.n(), &mut rng, Some(&mut increments), Some(&mut states));
                (s, PathAux::Chain { states })
            }
            Kernel::Maps(m) => (m.simulate(&mut rng, Some(&mut increments)), PathAux::None),
        };
        SamplePath {
            increments,
            sum,
            aux,
        }
    }

    /// S_n alone. Equal to `sample_path(lineage).sum` for every family except
    /// ce_lowerbound, which uses the equal-in-law [`ce_fast_sum`] sampler.
    pub fn sum(&self, lineage: SeedLineage) -> f64 {
        let mut rng = lineage.rng();
        match &self.kernel {
            Kernel::Rademacher {
                sigmas,
                constant: true,
            } => {
                let n = sigmas.len();
                let mut ones = 0u32;
                let full = n / 64;
                for _ in 0..full {
                    ones += rng.next_u64().count_ones();
                }
                let rest = n % 64;
                if rest > 0 {
                    ones += (rng.next_u64() & ((1u64 << rest) - 1)).count_ones();
                }
                sigmas[0] * (2.0 * ones as f64 - n as f64)
            }
            Kernel::Gaussian { sigmas, .. } => {
                sigmas.iter().map(|sd| sd * standard_normal(&mut rng)).fold(0.0, |a, x| a + x)
            }
            Kernel::Ce(params) => ce_fast_sum(params, &mut rng).0,
            Kernel::Linear(l) => l.simulate(&mut rng, None).0,
            Kernel::Chain(c) => c.simulate(self.n(), &mut rng, None, None),
            Kernel::Maps(m) => m.simulate(&mut rng, None),
            Kernel::Rademacher { .. } => self.sample_path(lineage).sum,
        }
    }

    /// S_n together with the coupled G_{σ²} reference draw (linear statistics with constant coefficients).
    pub fn sum_with_reference(&self, lineage: SeedLineage) -> (f64, Option<f64>) {
        match &self.kernel {
            Kernel::Linear(l) => l.simulate(&mut lineage.rng(), None),
            _ => (self.sum(lineage), None),
        }
    }

    /// S_n for replicates 0..R in replicate order, on the rayon pool.
    pub fn replicate_sums(&self, master_seed: u64, replicates: usize) -> Vec<f64> {
        let n = self.n();
        (0..replicates as u64)
            .into_par_iter()
            .map(|r| self.sum(SeedLineage::for_replicate(master_seed, n, r)))
            .collect()
    }

    /// Exact moments of the increments and of S_n.
    pub fn exact_moments(&self) -> PathMoments {
        let n = self.n();
        match &self.kernel {
            Kernel::Gaussian { sigmas, .. } | Kernel::Rademacher { sigmas, .. } => {
                let sigma2: Vec<f64> = sigmas.iter().map(|s| s * s).collect();
                let v = sigma2.iter().sum();
                PathMoments::from_sigma2(sigma2, v, true, true)
            }
            Kernel::Ce(_) => PathMoments::from_sigma2(vec![1.0; n], n as f64, true, true),
            Kernel::Linear(l) => {
                let g0 = l.base.autocovariance(0);
                let sigma2 = l.alphas.iter().map(|a| a * a * g0).collect();
                PathMoments::from_sigma2(sigma2, l.exact_variance(), false, false)
            }
            Kernel::Chain(c) => match c.mode {
                ChainIncrements::Observable => {
                    let v = c.observable_variances(n)[n - 1];
                    let g0 = c.autocovariances(1)[0];
                    PathMoments::from_sigma2(vec![g0; n], v, false, false)
                }
                ChainIncrements::Martingale => {
                    let sigma2 = c.martingale_sigma2(n);
                    let v = sigma2.iter().sum();
                    PathMoments::from_sigma2(
                        sigma2,
                        v,
                        c.martingale_conditional_variance_constant(),
                        true,
                    )
                }
            },
            Kernel::Maps(m) => {
                let s2 = m.observable.second_moment();
                PathMoments::from_sigma2(vec![s2; n], m.exact_variance(), false, false)
            }
        }
    }

    /// Monte Carlo estimates of σ_k² and V_n from `replicates` full paths.
    pub fn estimate_moments(&self, master_seed: u64, replicates: usize) -> EstimatedMoments {
        let n = self.n();
        let partial = crate::numerics::ordered_fold(
            replicates,
            || MomentAccumulator::new(n),
            |acc, r| acc.push(&self.sample_path(SeedLineage::for_replicate(master_seed, n, r))),
            MomentAccumulator::merge,
        );
        partial.finish()
    }
}

/// Monte Carlo moment estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedMoments {
    pub sigma2: Vec<f64>,
    pub sigma2_se: Vec<f64>,
    pub v_n: f64,
    pub v_n_se: f64,
    pub replicates: usize,
}

struct MomentAccumulator {
    count: usize,
    sq: Vec<f64>,
    sq2: Vec<f64>,
    s2: f64,
    s4: f64,
}

impl MomentAccumulator {
    fn new(n: usize) -> Self {
        Self {
            count: 0,
            sq: vec![0.0; n],
            sq2: vec![0.0; n],
            s2: 0.0,
            s4: 0.0,
        }
    }

    fn push(&mut self, path: &SamplePath) {
        self.count += 1;
        for (k, x) in path.increments.iter().enumerate() {
            let x2 = x * x;
            self.sq[k] += x2;
            self.sq2[k] += x2 * x2;
        }
        let s2 = path.sum * path.sum;
        self.s2 += s2;
        self.s4 += s2 * s2;
    }

    fn merge(mut self, other: Self) -> Self {
        self.count += other.count;
        for k in 0..self.sq.len() {
            self.sq[k] += other.sq[k];
            self.sq2[k] += other.sq2[k];
        }
        self.s2 += other.s2;
        self.s4 += other.s4;
        self
    }

    fn finish(self) -> EstimatedMoments {
        let r = self.count.max(1) as f64;
        let se = |sum: f64, sum_sq: f64| {
            let mean = sum / r;
            let var = (sum_sq / r - mean * mean).max(0.0) * r / (r - 1.0).max(1.0);
            (var / r).sqrt()
        };
        EstimatedMoments {
            sigma2: self.sq.iter().map(|s| s / r).collect(),
            sigma2_se: self.sq.iter().zip(&self.sq2).map(|(a, b)| se(*a, *b)).collect(),
            v_n: self.s2 / r,
            v_n_se: se(self.s2, self.s4),
            replicates: self.count,
        }
    }
}
