//! Shape bounds for linear statistics, ρ-mixing chains and sequential maps.

use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::models::{LinearBase, Model};
use crate::numerics::{normal_abs_moment, normal_pdf, quadrature};

use super::{check_p, BoundBreakdown, BoundTerm, Combination};

/// (E|XY − c·E[XY]|^q)^{1/q} for a centered Gaussian pair with the given
/// variances and covariance; `centered` selects c = 1.
pub fn gaussian_product_norm(var_x: f64, var_y: f64, cov: f64, q: f64, centered: bool) -> Result<f64> {
    if var_x <= 0.0 || var_y <= 0.0 {
        return Ok(0.0);
    }
    let (sx, sy) = (var_x.sqrt(), var_y.sqrt());
    let rho = (cov / (sx * sy)).clamp(-1.0, 1.0);
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    let scale = sx * sy;
    let m = if centered { rho } else { 0.0 };
    // X = sx Z₁, Y = sy(ρZ₁ + sZ₂): |XY − c·cov| = scale·|ρz₁² − m + s z₁ Z₂|.
    let inner = |z1: f64| -> Result<f64> {
        let a = rho * z1 * z1 - m;
        let b = s * z1;
        if b.abs() < 1e-300 {
            return Ok(a.abs().powf(q));
        }
        let f = |z: f64| (a + b * z).abs().powf(q) * normal_pdf(z);
        let root = -a / b;
        let mut cuts = vec![-40.0];
        if root.abs() < 40.0 {
            cuts.push(root);
        }
        cuts.push(40.0);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += quadrature(f, w[0], w[1], 1e-12)?.value;
        }
        Ok(total)
    };
    let mut outer_cuts = vec![0.0];
    if rho != 0.0 && m / rho > 0.0 {
        outer_cuts.push((m / rho).sqrt());
    }
    outer_cuts.push(40.0);
    outer_cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let err: RefCell<Option<Error>> = RefCell::new(None);
    for w in outer_cuts.windows(2) {
        // The integrand is even in z₁.
        let f = |z1: f64| match inner(z1) {
            Ok(v) => v * normal_pdf(z1),
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        let v = quadrature(f, w[0], w[1], 1e-10);
        if let Some(e) = err.borrow_mut().take() {
            return Err(e);
        }
        total += 2.0 * v?.value;
    }
    Ok(scale * total.powf(1.0 / q))
}

/// λ_k for a stationary Gaussian AR(1):
/// γ₀ max(|φ|^k (E|Z|^p)^{2/p}, φ^{2k} ‖Z² − 1‖_{p/2}).
pub fn ar1_lambda(phi: f64, gamma0: f64, k: usize, p: f64) -> Result<f64> {
    let first = phi.abs().powi(k as i32) * normal_abs_moment(p)?.powf(2.0 / p);
    let second = phi.powi(2 * k as i32) * gaussian_product_norm(1.0, 1.0, 1.0, p / 2.0, true)?;
    Ok(gamma0 * first.max(second))
}

/// Projective quantities of the base sequence up to lag n.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProjections {
    /// λ_1..λ_n.
    pub lambda: Vec<f64>,
    /// ‖E(Y_i | G_0)‖_p for i = 0..n.
    pub eta_terms: Vec<f64>,
    /// ‖E(Y_i | G_0)‖_2 for i = 0..n.
    pub l2_terms: Vec<f64>,
}

impl LinearProjections {
    /// Λ_n = Σ i λ_i.
    pub fn big_lambda(&self) -> f64 {
        self.lambda.iter().enumerate().map(|(i, l)| (i + 1) as f64 * l).sum()
    }

    /// η_n = Σ_{i=0}^n ‖E(Y_i | G_0)‖_p.
    pub fn eta(&self) -> f64 {
        self.eta_terms.iter().sum()
    }
}

/// λ_i, ‖E(Y_i|G_0)‖_p and ‖E(Y_i|G_0)‖_2 for the Gaussian bases. For MA(q)
/// the past σ-field is identified with that of the innovations.
pub fn linear_projections(base: &LinearBase, n: usize, p: f64) -> Result<LinearProjections> {
    base.validate()?;
    let eta_terms = (0..=n).map(|i| base.conditional_mean_norm(i, p)).collect();
    let l2_terms = (0..=n).map(|i| base.conditional_mean_norm(i, 2.0)).collect();
    let lambda = match base {
        LinearBase::GaussianAr1 { phi, .. } => {
            let g0 = base.autocovariance(0);
            (1..=n).map(|k| ar1_lambda(*phi, g0, k, p)).collect::<Result<Vec<_>>>()?
        }
        LinearBase::GaussianMa { coeffs } => {
            let q = coeffs.len() - 1;
            // A_i = E(Y_i | G_0) = Σ_{t≥0} c_{i+t} ε_{−t}; A_i = 0 for i > q.
            let var_a = |i: usize| coeffs.iter().skip(i).map(|c| c * c).sum::<f64>();
            let cov_a = |i: usize, j: usize| {
                (0..coeffs.len())
                    .filter(|t| i + t <= q && j + t <= q)
                    .map(|t| coeffs[i + t] * coeffs[j + t])
                    .sum::<f64>()
            };
            let g0 = base.autocovariance(0);
            // tail[i] = sup_{j ≥ i' ≥ i} ‖A_{i'} A_j − E A_{i'} A_j‖, filled from the back.
            let top = q.min(n);
            let mut tail = vec![0.0f64; top + 2];
            let mut row_max = 0.0f64;
            for i in (1..=q).rev() {
                for j in i..=q {
                    row_max = row_max.max(gaussian_product_norm(var_a(i), var_a(j), cov_a(i, j), p / 2.0, true)?);
                }
                if i <= top {
                    tail[i] = row_max;
                }
            }
            let mut out = Vec::with_capacity(n);
            for k in 1..=n {
                if k > q {
                    out.push(0.0);
                    continue;
                }
                let first = gaussian_product_norm(g0, var_a(k), base.autocovariance(k), p / 2.0, false)?;
                out.push(first.max(tail[k]));
            }
            out
        }
    };
    Ok(LinearProjections { lambda, eta_terms, l2_terms })
}

/// B(n, p) from the coefficients and the projective quantities.
pub fn bnp(p: f64, alphas: &[f64], big_lambda: f64, eta: f64) -> Result<f64> {
    check_p(p, 3.0)?;
    if alphas.is_empty() {
        return Err(Error::domain("bnp", "empty coefficient list"));
    }
    let m = alphas.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let s2: f64 = alphas.iter().map(|a| a * a).sum();
    Ok(if p == 3.0 {
        m * eta * (big_lambda + eta * eta) * (s2 / m).ln()
    } else {
        (m * eta).powf(p - 2.0) * (big_lambda + eta * eta) * s2.powf((3.0 - p) / 2.0)
    })
}

/// Shape of the W1 bound for a linear statistic. Without a spectral floor
/// the first-difference term (Σ_{k=1}^{n+1}(α_k − α_{k−1})²)^{1/2}, with
/// α_0 = α_{n+1} = 0, is added.
pub fn linear_statistic_bound(p: f64, model: &Model, spectral_floor: bool) -> Result<BoundBreakdown> {
    check_p(p, 3.0)?;
    let lin = model
        .linear()
        .ok_or_else(|| Error::Capability(format!("{} is not a linear statistic", model.tag())))?;
    let n = model.n();
    let proj = linear_projections(&lin.base, n, p)?;
    let m_n = lin.max_alpha();
    let mut terms = vec![
        BoundTerm::exact(
            "projective",
            m_n * proj.l2_terms.iter().sum::<f64>(),
            "m_n Σ_{k=0}^n ‖E(Y_k|G_0)‖_2",
        ),
        BoundTerm::exact(
            "b_np",
            bnp(p, &lin.alphas, proj.big_lambda(), proj.eta())?,
            if p == 3.0 {
                "m_n η_n (Λ_n + η_n²) log(m_n^{-1} Σ α²)"
            } else {
                "m_n^{p−2} η_n^{p−2} (Λ_n + η_n²) (Σ α²)^{(3−p)/2}"
            },
        ),
    ];
    if !spectral_floor {
        let mut prev = 0.0;
        let mut d2 = 0.0;
        for a in lin.alphas.iter().chain(std::iter::once(&0.0)) {
            d2 += (a - prev) * (a - prev);
            prev = *a;
        }
        terms.push(BoundTerm::exact(
            "coefficient_variation",
            d2.sqrt(),
            "(Σ_{k=1}^{n+1} (α_k − α_{k−1})²)^{1/2}",
        ));
    }
    let mut b = BoundBreakdown::new(n, "linear_statistic", terms, Combination::Sum);
    b.normalization = lin.exact_variance().sqrt();
    Ok(b)
}

/// K_n (1 + C_n log(1 + C_n V_n)).
pub fn rho_mixing_bound(k_n: f64, c_n: f64, v_n: f64) -> f64 {
    k_n * (1.0 + c_n * (1.0 + c_n * v_n).ln())
}

/// The ρ-mixing bound with K_n, the bound (1 + ρ)/(1 − ρ) on C_n, and the exact V_n.
pub fn rho_mixing_breakdown(model: &Model) -> Result<BoundBreakdown> {
    let chain = model
        .chain()
        .ok_or_else(|| Error::Capability(format!("{} is not a finite chain", model.tag())))?;
    let k = chain.k_n();
    let c = chain.c_n_bound();
    if !c.is_finite() {
        return Err(Error::Capability("rho_mixing: ρ_Y(1) = 1, C_n is unbounded".into()));
    }
    let v = model.exact_moments().v_n;
    let terms = vec![
        BoundTerm::exact("k_n", k, "K_n = max_i ‖X_i‖_∞"),
        BoundTerm::exact(
            "k_n_c_n_log",
            k * c * (1.0 + c * v).ln(),
            "K_n C_n log(1 + C_n V_n), C_n ≤ (1+ρ_Y(1))/(1−ρ_Y(1))",
        ),
    ];
    let mut b = BoundBreakdown::new(model.n(), "rho_mixing", terms, Combination::Sum);
    b.normalization = v.sqrt();
    Ok(b)
}

/// log(n + 1) log(2 + V_n).
pub fn seqdyn_bound(n: usize, v_n: f64) -> f64 {
    ((n + 1) as f64).ln() * (2.0 + v_n).ln()
}

pub fn seqdyn_breakdown(model: &Model) -> Result<BoundBreakdown> {
    if model.maps().is_none() {
        return Err(Error::Capability(format!("{} is not a sequential-map model", model.tag())));
    }
    let v = model.exact_moments().v_n;
    let terms = vec![BoundTerm::exact("log_log", seqdyn_bound(model.n(), v), "log(n+1) log(2+V_n)")];
    let mut b = BoundBreakdown::new(model.n(), "sequential_maps", terms, Combination::Sum);
    b.normalization = v.sqrt();
    Ok(b)
}
