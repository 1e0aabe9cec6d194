//! Adaptive Gauss–Kronrod (7/15) quadrature with interval bisection.
//!
//! This is the independent oracle for golden tests and for a handful of
//! one-dimensional integrals in the bound evaluators. It is not a hot path.

use crate::error::{Error, Result};

/// Maximum number of integrand evaluations before giving up.
pub const EVALUATION_BUDGET: usize = 15 * 4000;

const INITIAL_SEGMENTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    /// Estimated absolute error (sum of per-interval Kronrod–Gauss differences).
    pub error: f64,
    pub evaluations: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrate `f` over `[lo, hi]` to absolute tolerance `tol`.
///
/// Repeatedly bisects the interval with the largest error estimate until the
/// summed estimate drops below `tol`. Fails with [`Error::NonConvergence`]
/// when the evaluation budget runs out first.
pub fn quadrature<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<QuadratureResult> {
    if !(tol > 0.0) {
        return Err(Error::domain("quadrature", format!("tolerance {tol} must be positive")));
    }
    if !lo.is_finite() || !hi.is_finite() {
        return Err(Error::domain("quadrature", "integration limits must be finite"));
    }
    if lo == hi {
        return Ok(QuadratureResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };

    // Start from a uniform partition so narrow features inside wide limits
    // are seen by at least one rule before the error estimate is trusted.
    let width = (b - a) / INITIAL_SEGMENTS as f64;
    let mut segments: Vec<Segment> = (0..INITIAL_SEGMENTS)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == INITIAL_SEGMENTS { b } else { lo + width };
            kronrod(&f, lo, hi)
        })
        .collect();
    let mut evaluations = 15 * INITIAL_SEGMENTS;
    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        if !value.is_finite() {
            return Err(Error::domain("quadrature", "integrand produced a non-finite value"));
        }
        // Floor at a few ulps of the result: below that the estimate is noise.
        let floor = 50.0 * f64::EPSILON * value.abs();
        if error <= tol || error <= floor {
            return Ok(QuadratureResult {
                value: sign * value,
                error,
                evaluations,
            });
        }
        if evaluations + 30 > EVALUATION_BUDGET {
            return Err(Error::NonConvergence {
                lo,
                hi,
                error,
                tol,
                evaluations,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one segment");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.lo + seg.hi);
        if mid <= seg.lo || mid >= seg.hi {
            return Err(Error::NonConvergence {
                lo,
                hi,
                error,
                tol,
                evaluations,
            });
        }
        segments.push(kronrod(&f, seg.lo, mid));
        segments.push(kronrod(&f, mid, seg.hi));
        evaluations += 30;
    }
}
