//! The martingale bound on ζ_r(P_{M_n}, G_{V_n}) and the corollaries built from it.

use std::f64::consts::SQRT_2;

use crate::error::{Error, Result};
use crate::models::{Model, PathMoments};

use super::oracle::{bracket_deviation, l_n_from, u_profile, UMethod, UProfile};
use super::psi::{PsiMode, PsiProfile};
use super::{check_p, BoundBreakdown, BoundTerm, Combination, ConstantsMode, Estimate};

/// κ for r = 1; also used, flagged, for every other r.
pub const EXPLICIT_KAPPA: f64 = 6.0;

const ADDITIVE: &str = "4√2 a^r δ_n^r";
const L_FORMULA: &str = "L_n(p,r,aδ_n) = Σ_{ℓ=2}^n U_{ℓ,n}(p) / (V_n − V_{ℓ−1} + a²δ_n²)^{(p−r)/2}";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundOptions {
    pub constants: ConstantsMode,
    pub kappa: f64,
    pub psi: PsiMode,
    pub u: UMethod,
}

impl Default for BoundOptions {
    fn default() -> Self {
        Self {
            constants: ConstantsMode::ShapeOnly,
            kappa: EXPLICIT_KAPPA,
            psi: PsiMode::ClosedForm,
            u: UMethod::Exact,
        }
    }
}

/// v_n(a) = a²δ_n² + (1 + a²)/a² · V_n.
pub fn vn_of_a(a: f64, moments: &PathMoments) -> Result<f64> {
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::domain("vn_of_a", format!("a must be >= 1, got {a}")));
    }
    let alpha = (1.0 + a * a) / (a * a);
    Ok(a * a * moments.delta_n * moments.delta_n + alpha * moments.v_n)
}

fn check_a(a: f64) -> Result<()> {
    if !(a >= 1.0) || !a.is_finite() {
        return Err(Error::domain("bounds", format!("a must be >= 1, got {a}")));
    }
    Ok(())
}

/// ∫_lo^hi F(x) dx by the trapezoid rule in u = ln x, starting from 512
/// intervals and doubling until two successive grids agree.
fn log_trapezoid<F: Fn(f64) -> Result<Estimate>>(f: F, lo: f64, hi: f64) -> Result<Estimate> {
    if hi <= lo {
        return Ok(Estimate::exact(0.0));
    }
    let (ul, uh) = (lo.ln(), hi.ln());
    let eval = |u: f64| -> Result<Estimate> {
        let x = u.exp();
        let e = f(x)?;
        Ok(Estimate { value: e.value * x, se: e.se * x })
    };
    let mut intervals = 256usize;
    let h0 = (uh - ul) / intervals as f64;
    let mut sum = Estimate::exact(0.0);
    for i in 0..=intervals {
        let e = eval(ul + i as f64 * h0)?;
        let w = if i == 0 || i == intervals { 0.5 } else { 1.0 };
        sum.value += w * e.value;
        sum.se += w * e.se;
    }
    let mut prev = sum.value * h0;
    loop {
        // Add the midpoints of the current grid.
        let h = (uh - ul) / intervals as f64;
        for i in 0..intervals {
            let e = eval(ul + (i as f64 + 0.5) * h)?;
            sum.value += e.value;
            sum.se += e.se;
        }
        intervals *= 2;
        let h = (uh - ul) / intervals as f64;
        let current = sum.value * h;
        if (current - prev).abs() <= 1e-10 * (1.0 + current.abs()) || intervals >= 1 << 16 {
            return Ok(Estimate { value: current, se: sum.se * h });
        }
        prev = current;
    }
}

/// δ^r ∫_a^X x^{r−3} dx.
fn power_integral(r: f64, delta: f64, a: f64, x: f64) -> f64 {
    let inner = if (r - 2.0).abs() < 1e-15 {
        (x / a).ln()
    } else {
        (x.powf(r - 2.0) - a.powf(r - 2.0)) / (r - 2.0)
    };
    delta.powf(r) * inner
}

struct Prepared {
    moments: PathMoments,
    psi: PsiProfile,
    u: UProfile,
}

fn prepare(p: f64, model: &Model, opts: &BoundOptions) -> Result<Prepared> {
    Ok(Prepared {
        moments: model.exact_moments(),
        psi: PsiProfile::new(model, opts.psi)?,
        u: u_profile(p, model, opts.u)?,
    })
}

fn check_theorem_args(r: f64, p: f64, opts: &BoundOptions) -> Result<()> {
    check_p(p, 3.0)?;
    if !(r > 0.0 && r <= p) {
        return Err(Error::domain("theorem1_rhs", format!("r must lie in (0, p], got {r}")));
    }
    if !(opts.kappa > 0.0) {
        return Err(Error::domain("theorem1_rhs", format!("kappa must be positive, got {}", opts.kappa)));
    }
    if opts.constants == ConstantsMode::ExplicitR1 && r != 1.0 {
        return Err(Error::domain(
            "theorem1_rhs",
            format!("explicit constants are only known for r = 1, got r = {r}"),
        ));
    }
    Ok(())
}

fn theorem1_prepared(r: f64, a: f64, model: &Model, opts: &BoundOptions, prep: &Prepared) -> Result<BoundBreakdown> {
    check_a(a)?;
    let m = &prep.moments;
    let delta = m.delta_n;
    let upper = vn_of_a(a, m)?.sqrt() / delta;
    let t1 = power_integral(r, delta, a, upper);
    let kappa = opts.kappa;
    let integral = log_trapezoid(|x| Ok(prep.psi.eval(kappa * x)?.scaled(x.powf(r - 2.0))), a, upper)?;
    let t2 = integral.scaled(delta.powf(r - 1.0));
    let l = l_n_from(&prep.u, r, a, m)?;
    let additive = 4.0 * SQRT_2 * a.powf(r) * delta.powf(r);
    let (c_psi, c_delta) = match opts.constants {
        // Taylor remainder (c₃/6)·A + (c₄/8)·B plus the second-derivative swap c₄·B,
        // with A ≤ 2·(ψ integral) and B ≤ 2√3·(δ integral).
        ConstantsMode::ExplicitR1 => (1.0 / 3.0, 18.0 * 3f64.sqrt() / 5.0),
        ConstantsMode::ShapeOnly => (1.0, 1.0),
    };
    let terms = vec![
        BoundTerm::exact(
            "delta_integral",
            c_delta * t1,
            "δ_n^r ∫_a^{√(v_n(a)/δ_n²)} x^{r−3} dx",
        ),
        BoundTerm::estimated(
            "psi_integral",
            t2.scaled(c_psi),
            prep.psi.is_exact(),
            "δ_n^{r−1} ∫_a^{√(v_n(a)/δ_n²)} ψ_n(κx) x^{r−2} dx",
        ),
        BoundTerm::estimated("l_n", l, prep.u.exact, L_FORMULA),
        BoundTerm::exact("additive", additive, ADDITIVE),
    ];
    let mut b = BoundBreakdown::new(model.n(), "zeta_r_bound", terms, Combination::Sum);
    b.constants_mode = opts.constants;
    b.normalization = m.v_n.powf(r / 2.0);
    b.a = Some(a);
    Ok(b)
}

/// Right-hand side of the ζ_r bound for a given a ≥ 1, term by term.
pub fn theorem1_rhs(r: f64, p: f64, a: f64, model: &Model, opts: &BoundOptions) -> Result<BoundBreakdown> {
    check_theorem_args(r, p, opts)?;
    check_a(a)?;
    let prep = prepare(p, model, opts)?;
    theorem1_prepared(r, a, model, opts, &prep)
}

/// The a minimizing the total over a ∈ {1, 2, 4, …} up to √V_n/δ_n.
pub fn theorem1_auto(r: f64, p: f64, model: &Model, opts: &BoundOptions) -> Result<BoundBreakdown> {
    check_theorem_args(r, p, opts)?;
    let prep = prepare(p, model, opts)?;
    let cap = prep.moments.v_n.sqrt() / prep.moments.delta_n;
    let mut a = 1.0;
    let mut best = theorem1_prepared(r, a, model, opts, &prep)?;
    while 2.0 * a <= cap {
        a *= 2.0;
        let b = theorem1_prepared(r, a, model, opts, &prep)?;
        if b.total < best.total {
            best = b;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum W1Form {
    /// ψ-integral display with κ = 6.
    Psi,
    /// Moment display: power of v_n(a), or the logarithm when (r, p) = (1, 3).
    Moment,
}

/// Shape of the Wasserstein corollary (unknown constant set to 1).
pub fn corollary_w1_bound(r: f64, p: f64, a: f64, model: &Model, form: W1Form, opts: &BoundOptions) -> Result<BoundBreakdown> {
    check_p(p, 3.0)?;
    check_a(a)?;
    if !(r > 0.0 && r <= 1.0) {
        return Err(Error::domain("corollary_w1_bound", format!("r must lie in (0, 1], got {r}")));
    }
    let m = model.exact_moments();
    let delta = m.delta_n;
    let v = vn_of_a(a, &m)?;
    let u = u_profile(p, model, opts.u)?;
    let l = l_n_from(&u, r, a, &m)?;
    let additive = BoundTerm::exact("additive", 4.0 * SQRT_2 * (a * delta).powf(r), "4√2 (aδ_n)^r");
    let (tag, main) = match form {
        W1Form::Psi => {
            let psi = PsiProfile::new(model, opts.psi)?;
            let upper = v.sqrt() / delta;
            let kappa = opts.kappa;
            let i = log_trapezoid(|x| Ok(psi.eval(kappa * x)?.scaled(1.0 / x)), a, upper)?;
            (
                "w1_corollary:psi",
                BoundTerm::estimated("psi_integral", i, psi.is_exact(), "∫_a^{√(v_n(a)/δ_n²)} ψ_n(6x)/x dx"),
            )
        }
        W1Form::Moment if r == 1.0 && p == 3.0 => {
            let sup = model.moment_ratio(3.0)?;
            (
                "w1_corollary:log",
                BoundTerm::exact(
                    "moment_log",
                    sup * (v.sqrt() / delta).ln(),
                    "sup_k E|ξ_k|³/σ_k² · log(√v_n(a)/δ_n)",
                ),
            )
        }
        W1Form::Moment => {
            let sup = model.moment_ratio(p)?;
            (
                "w1_corollary:power",
                BoundTerm::exact(
                    "moment_power",
                    sup * v.powf((2.0 + r - p) / 2.0),
                    "sup_k E|ξ_k|^p/σ_k² · v_n(a)^{(2+r−p)/2}",
                ),
            )
        }
    };
    let terms = vec![additive, main, BoundTerm::estimated("l_n", l, u.exact, L_FORMULA)];
    let mut b = BoundBreakdown::new(model.n(), tag, terms, Combination::Sum);
    b.normalization = m.v_n.powf(r / 2.0);
    b.a = Some(a);
    Ok(b)
}

/// Exponent of V_n in the Kolmogorov bound: −(p−2)/(2(p−1)) for p < 3, −1/4 at p = 3.
pub fn berry_esseen_exponent(p: f64) -> f64 {
    if p >= 3.0 {
        -0.25
    } else {
        -(p - 2.0) / (2.0 * (p - 1.0))
    }
}

/// Shape of the Kolmogorov-distance corollary (unknown constant set to 1).
pub fn berry_esseen_bound(p: f64, model: &Model, opts: &BoundOptions) -> Result<BoundBreakdown> {
    check_p(p, 3.0)?;
    let m = model.exact_moments();
    let u = u_profile(p, model, opts.u)?;
    let sup = model.moment_ratio(p)?;
    let prefactor = m.v_n.powf(berry_esseen_exponent(p));
    let (tag, main, l, exponent) = if p == 3.0 {
        let v1 = vn_of_a(1.0, &m)?;
        (
            "berry_esseen:p=3",
            BoundTerm::exact(
                "moment_log",
                sup * (v1.sqrt() / m.delta_n).ln(),
                "sup_k E|ξ_k|³/σ_k² · log(√v_n(1)/δ_n)",
            ),
            l_n_from(&u, 1.0, 1.0, &m)?,
            0.5,
        )
    } else {
        (
            "berry_esseen:p<3",
            BoundTerm::exact("moment_ratio", sup, "sup_k E|ξ_k|^p/σ_k²"),
            l_n_from(&u, p - 2.0, 1.0, &m)?,
            1.0 / (p - 1.0),
        )
    };
    let terms = vec![main, BoundTerm::estimated("l_n", l, u.exact, L_FORMULA)];
    let mut b = BoundBreakdown::new(model.n(), tag, terms, Combination::ScaledPower { prefactor, exponent });
    b.target_exponent = Some(berry_esseen_exponent(p));
    b.a = Some(1.0);
    Ok(b)
}

/// Exponent of V_n in the Heyde–Brown bound under constant conditional variances.
pub fn heyde_brown_exponent(p: f64) -> f64 {
    -(p - 2.0) / (2.0 * (p + 1.0))
}

/// Shape of the Heyde–Brown bound, for comparison (C_p set to 1).
pub fn heyde_brown_bound(p: f64, model: &Model, replicates: usize, seed: u64) -> Result<BoundBreakdown> {
    check_p(p, 4.0)?;
    let m = model.exact_moments();
    let bracket = bracket_deviation(p, model, replicates, seed)?;
    let moment = m.v_n.powf(-p / 2.0) * model.abs_moment_sum(p)?;
    let terms = vec![
        BoundTerm::estimated(
            "bracket_deviation",
            bracket,
            bracket.se == 0.0,
            "‖V_n^{-1}⟨M⟩_n − 1‖_{p/2}^{p/2}",
        ),
        BoundTerm::exact("moment_sum", moment, "V_n^{-p/2} Σ_k E|ξ_k|^p"),
    ];
    let mut b = BoundBreakdown::new(
        model.n(),
        "heyde_brown",
        terms,
        Combination::ScaledPower { prefactor: 1.0, exponent: 1.0 / (p + 1.0) },
    );
    if bracket.value == 0.0 && bracket.se == 0.0 {
        b.target_exponent = Some(heyde_brown_exponent(p));
    }
    Ok(b)
}
