//! Theoretical bound evaluators, itemized term by term.

mod applications;
mod oracle;
mod psi;
mod theorem;

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use applications::{
    ar1_lambda, bnp, gaussian_product_norm, linear_projections, linear_statistic_bound,
    rho_mixing_bound, rho_mixing_breakdown, seqdyn_bound, seqdyn_breakdown, LinearProjections,
};
pub use oracle::{bracket_deviation, l_n, l_n_from, u_ln, u_profile, UMethod, UProfile};
pub use psi::{psi_n, PsiMode, PsiProfile};
pub use theorem::{
    berry_esseen_bound, berry_esseen_exponent, corollary_w1_bound, heyde_brown_bound,
    heyde_brown_exponent, theorem1_auto, theorem1_rhs, vn_of_a, BoundOptions, W1Form,
    EXPLICIT_KAPPA,
};

/// A value with its Monte Carlo standard error (0 for exact values).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { value, se: 0.0 }
    }

    pub fn scaled(self, c: f64) -> Self {
        Self {
            value: self.value * c,
            se: self.se * c.abs(),
        }
    }

    pub fn from_sums(sum: f64, sum_sq: f64, count: usize) -> Self {
        let r = count as f64;
        let mean = sum / r;
        let var = if count > 1 {
            ((sum_sq - r * mean * mean) / (r - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            se: (var / r).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstantsMode {
    /// r = 1 with κ = 6, c₃ = 1, c₄ = 8/5 carried into the coefficients.
    ExplicitR1,
    /// Every unknown constant set to 1.
    ShapeOnly,
}

impl fmt::Display for ConstantsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConstantsMode::ExplicitR1 => "explicit_r1",
            ConstantsMode::ShapeOnly => "shape_only",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTerm {
    pub name: String,
    pub value: f64,
    pub se: f64,
    pub exact: bool,
    /// The formula this term instantiates.
    pub formula: String,
}

impl BoundTerm {
    pub fn exact(name: &str, value: f64, formula: &str) -> Self {
        Self {
            name: name.into(),
            value,
            se: 0.0,
            exact: true,
            formula: formula.into(),
        }
    }

    pub fn estimated(name: &str, est: Estimate, exact: bool, formula: &str) -> Self {
        Self {
            name: name.into(),
            value: est.value,
            se: est.se,
            exact,
            formula: formula.into(),
        }
    }
}

/// How the terms combine into the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Combination {
    Sum,
    /// prefactor · (Σ terms)^exponent.
    ScaledPower { prefactor: f64, exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundBreakdown {
    pub n: usize,
    pub equation_tag: String,
    pub terms: Vec<BoundTerm>,
    pub combination: Combination,
    pub total: f64,
    /// Conservative: standard errors of the terms are added, not combined in quadrature.
    pub total_se: f64,
    pub constants_mode: ConstantsMode,
    /// Divide by this to pass from S_n to S_n/√V_n (V_n^{r/2} for Wasserstein-type bounds).
    pub normalization: f64,
    /// Rate exponent in V_n predicted by the bound, when it has one.
    pub target_exponent: Option<f64>,
    /// The truncation level a, for bounds that take one.
    pub a: Option<f64>,
}

impl BoundBreakdown {
    pub fn new(n: usize, tag: impl Into<String>, terms: Vec<BoundTerm>, combination: Combination) -> Self {
        let mut b = Self {
            n,
            equation_tag: tag.into(),
            terms,
            combination,
            total: 0.0,
            total_se: 0.0,
            constants_mode: ConstantsMode::ShapeOnly,
            normalization: 1.0,
            target_exponent: None,
            a: None,
        };
        b.total = b.recompute_total();
        let se: f64 = b.terms.iter().map(|t| t.se).sum();
        b.total_se = match combination {
            Combination::Sum => se,
            Combination::ScaledPower { prefactor, exponent } => {
                let s: f64 = b.terms.iter().map(|t| t.value).sum();
                if se == 0.0 {
                    0.0
                } else {
                    (prefactor * exponent * s.powf(exponent - 1.0) * se).abs()
                }
            }
        };
        b
    }

    pub fn recompute_total(&self) -> f64 {
        let s: f64 = self.terms.iter().map(|t| t.value).sum();
        match self.combination {
            Combination::Sum => s,
            Combination::ScaledPower { prefactor, exponent } => prefactor * s.powf(exponent),
        }
    }

    pub fn normalized_total(&self) -> f64 {
        self.total / self.normalization
    }

    pub fn term(&self, name: &str) -> Option<&BoundTerm> {
        self.terms.iter().find(|t| t.name == name)
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{}  n={}  constants={}{}\n",
            self.equation_tag,
            self.n,
            self.constants_mode,
            self.a.map(|a| format!("  a={a}")).unwrap_or_default()
        );
        let width = self.terms.iter().map(|t| t.name.chars().count()).max().unwrap_or(5).max(5);
        for t in &self.terms {
            let se = if t.exact {
                "exact".to_string()
            } else {
                format!("± {:.3e}", t.se)
            };
            out += &format!(
                "  {:<width$}  {:>14.6e}  {:<12}  {}\n",
                t.name, t.value, se, t.formula
            );
        }
        out += &format!("  {:<width$}  {:>14.6e}", "total", self.total);
        if self.total_se > 0.0 {
            out += &format!("  ± {:.3e}", self.total_se);
        }
        out += &format!("\n  {:<width$}  {:>14.6e}\n", "normalized", self.normalized_total());
        out
    }
}

pub const BOUND_CSV_HEADER: &str = "n,equation_tag,term_name,value,se,exact_flag,formula";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per term plus a closing `total` row.
pub fn bounds_csv(rows: &[BoundBreakdown]) -> String {
    let mut out = String::from(BOUND_CSV_HEADER);
    out.push('\n');
    for b in rows {
        for t in &b.terms {
            out += &format!(
                "{},{},{},{},{},{},{}\n",
                b.n,
                csv_field(&b.equation_tag),
                csv_field(&t.name),
                t.value,
                t.se,
                if t.exact { "exact" } else { "mc" },
                csv_field(&t.formula)
            );
        }
        let exact = b.terms.iter().all(|t| t.exact);
        out += &format!(
            "{},{},total,{},{},{},{}\n",
            b.n,
            csv_field(&b.equation_tag),
            b.total,
            b.total_se,
            if exact { "exact" } else { "mc" },
            csv_field(&format!("{} ({})", describe(&b.combination), b.constants_mode))
        );
    }
    out
}

fn describe(c: &Combination) -> String {
    match c {
        Combination::Sum => "sum of terms".into(),
        Combination::ScaledPower { prefactor, exponent } => {
            format!("{prefactor} * (sum of terms)^{exponent}")
        }
    }
}

pub fn write_bounds_csv(rows: &[BoundBreakdown], path: &Path) -> Result<()> {
    fs::write(path, bounds_csv(rows)).map_err(|e| Error::io(path, e))
}

pub(crate) fn check_p(p: f64, hi: f64) -> Result<()> {
    if !(p > 2.0 && p <= hi) {
        return Err(Error::domain("bounds", format!("p must lie in (2, {hi}], got {p}")));
    }
    Ok(())
}
