use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::{berry_esseen_exponent, BoundOptions, ConstantsMode, PsiMode, UMethod, EXPLICIT_KAPPA};
use crate::error::{Error, Result};
use crate::models::{
    ChainIncrements, ChainKind, CoefficientRule, Family, LinearBase, Model, ModelSpec, Observable, SigmaRule,
};
use crate::ratefit::{DistanceKind, FitVariant};

pub const SCHEMA_VERSION: u32 = 1;
pub const MIN_REPLICATES: usize = 100;

/// Bound tags accepted in `bound_requests`.
pub const BOUND_TAGS: &[&str] = &[
    "zeta_r_bound",
    "w1_corollary:psi",
    "w1_corollary:moment",
    "berry_esseen",
    "heyde_brown",
    "linear_statistic",
    "rho_mixing",
    "sequential_maps",
];

/// Family tags accepted by `--model`.
pub const MODEL_TAGS: &[&str] = &[
    "gaussian_iid",
    "rademacher_iid",
    "ce_lowerbound",
    "linear_statistic",
    "rho_mixing_chain",
    "sequential_maps",
];

/// How the truncation level a is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AMode {
    Fixed(f64),
    /// Minimize the total over a ∈ {1, 2, 4, …, √V_n/δ_n}.
    #[default]
    Auto,
}

impl AMode {
    pub fn parse(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(AMode::Auto);
        }
        match s.parse::<f64>() {
            Ok(a) if a >= 1.0 && a.is_finite() => Ok(AMode::Fixed(a)),
            _ => Err(Error::config(format!("--a expects a real >= 1 or \"auto\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSettings {
    #[serde(default = "one")]
    pub r: f64,
    #[serde(default = "shape_only")]
    pub constants: ConstantsMode,
    #[serde(default = "kappa")]
    pub kappa: f64,
    /// Replicates for Monte Carlo ψ_n; closed form when absent.
    #[serde(default)]
    pub psi_replicates: Option<usize>,
    /// Replicates for Monte Carlo U_{ℓ,n}; exact when absent.
    #[serde(default)]
    pub u_replicates: Option<usize>,
    /// Whether the spectral density of the base sequence is bounded below.
    #[serde(default = "yes")]
    pub spectral_floor: bool,
}

fn one() -> f64 {
    1.0
}
fn shape_only() -> ConstantsMode {
    ConstantsMode::ShapeOnly
}
fn kappa() -> f64 {
    EXPLICIT_KAPPA
}
fn yes() -> bool {
    true
}

impl Default for BoundSettings {
    fn default() -> Self {
        Self {
            r: 1.0,
            constants: ConstantsMode::ShapeOnly,
            kappa: EXPLICIT_KAPPA,
            psi_replicates: None,
            u_replicates: None,
            spectral_floor: true,
        }
    }
}

impl BoundSettings {
    pub fn options(&self, seed: u64) -> BoundOptions {
        BoundOptions {
            constants: self.constants,
            kappa: self.kappa,
            psi: match self.psi_replicates {
                Some(replicates) => PsiMode::MonteCarlo { replicates, seed },
                None => PsiMode::ClosedForm,
            },
            u: match self.u_replicates {
                Some(replicates) => UMethod::MonteCarlo { replicates, seed },
                None => UMethod::Exact,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RateFitSettings {
    /// Defaults per family: kolmogorov for the martingale families, w1_normalized otherwise.
    #[serde(default)]
    pub distance_kind: Option<DistanceKind>,
    #[serde(default)]
    pub target_exponent: Option<f64>,
    #[serde(default)]
    pub compare: Option<FitVariant>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    /// Independent master seeds master_seed, master_seed + 1, …; 1 fits distances.csv as is.
    #[serde(default)]
    pub seeds: Option<usize>,
}

pub const DEFAULT_TOLERANCE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Row label in the CSV outputs; the family tag when absent.
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSpec,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub master_seed: u64,
    pub outputs: PathBuf,
    #[serde(default)]
    pub bound_requests: Vec<String>,
    #[serde(default)]
    pub a_mode: AMode,
    #[serde(default)]
    pub bounds: BoundSettings,
    #[serde(default)]
    pub ratefit: RateFitSettings,
    /// Read S_n from the path files written by `simulate` instead of sampling inline.
    #[serde(default)]
    pub from_batches: bool,
}

/// Parameters the built-in family defaults use.
pub fn default_family(tag: &str) -> Result<Family> {
    Ok(match tag {
        "gaussian_iid" => Family::GaussianIid { sigma: SigmaRule::default() },
        "rademacher_iid" => Family::RademacherIid { sigma: SigmaRule::default() },
        "ce_lowerbound" => Family::CeLowerbound {},
        "linear_statistic" => Family::LinearStatistic {
            base: LinearBase::GaussianAr1 { phi: 0.5, innovation_sd: 1.0 },
            alphas: CoefficientRule::default(),
        },
        "rho_mixing_chain" => Family::RhoMixingChain {
            chain: ChainKind::default(),
            values: vec![1.0, -1.0],
            increments: ChainIncrements::Observable,
        },
        "sequential_maps" => Family::SequentialMaps {
            schedule: vec![2, 3],
            observable: Observable::Cos1,
        },
        other => {
            return Err(Error::config(format!(
                "unknown model tag {other:?}; known: {}",
                MODEL_TAGS.join(", ")
            )))
        }
    })
}

/// Bound tags that apply to a family.
pub fn default_bounds(family: &Family) -> Vec<String> {
    let tags: &[&str] = match family {
        Family::GaussianIid { .. } | Family::RademacherIid { .. } | Family::CeLowerbound {} => {
            &["zeta_r_bound", "w1_corollary:moment", "berry_esseen"]
        }
        Family::LinearStatistic { .. } => &["linear_statistic"],
        Family::RhoMixingChain { .. } => &["rho_mixing"],
        Family::SequentialMaps { .. } => &["sequential_maps"],
    };
    tags.iter().map(|t| t.to_string()).collect()
}

impl ExperimentConfig {
    pub fn for_model(tag: &str, p: f64) -> Result<Self> {
        let family = default_family(tag)?;
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            name: None,
            model: ModelSpec::new(128, p, family.clone()),
            n_grid: vec![128, 256, 512, 1024],
            replicates: 10_000,
            master_seed: 0,
            outputs: PathBuf::from("cltlab-out"),
            bound_requests: default_bounds(&family),
            a_mode: AMode::Auto,
            bounds: BoundSettings::default(),
            ratefit: RateFitSettings::default(),
            from_batches: false,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn model_id(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.model.family.tag().to_string())
    }

    /// Checks every invariant and compiles the model at each grid point.
    pub fn validate(&self) -> Result<Vec<Model>> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.replicates < MIN_REPLICATES {
            return Err(Error::config(format!(
                "replicates must be >= {MIN_REPLICATES}, got {}",
                self.replicates
            )));
        }
        if self.n_grid.is_empty() {
            return Err(Error::config("n_grid must be nonempty"));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_grid must be strictly increasing"));
        }
        if let Some(bad) = self.bound_requests.iter().find(|t| !BOUND_TAGS.contains(&t.as_str())) {
            return Err(Error::config(format!(
                "unknown bound tag {bad:?}; known: {}",
                BOUND_TAGS.join(", ")
            )));
        }
        if let AMode::Fixed(a) = self.a_mode {
            if !(a >= 1.0 && a.is_finite()) {
                return Err(Error::config(format!("a must be >= 1, got {a}")));
            }
        }
        if let Some(name) = &self.name {
            if name.is_empty() || name.contains([',', '"', '\n']) {
                return Err(Error::config("name must be nonempty and free of commas, quotes and newlines"));
            }
        }
        self.n_grid
            .iter()
            .map(|&n| Model::compile(&self.model.with_n(n)))
            .collect()
    }

    pub fn distance_kind(&self) -> DistanceKind {
        self.ratefit.distance_kind.unwrap_or(match self.model.family {
            Family::GaussianIid { .. } | Family::RademacherIid { .. } | Family::CeLowerbound {} => {
                DistanceKind::Kolmogorov
            }
            _ => DistanceKind::W1Normalized,
        })
    }

    /// The predicted exponent in n and the fit it is compared with.
    pub fn target(&self) -> (f64, FitVariant) {
        let p = self.model.p;
        let (target, variant) = match self.model.family {
            Family::CeLowerbound {} => (-(p - 2.0) / (2.0 * p - 2.0), FitVariant::Raw),
            Family::GaussianIid { .. } | Family::RademacherIid { .. } => (berry_esseen_exponent(p), FitVariant::Raw),
            _ => (-0.5, FitVariant::LogCorrected),
        };
        (
            self.ratefit.target_exponent.unwrap_or(target),
            self.ratefit.compare.unwrap_or(variant),
        )
    }
}
