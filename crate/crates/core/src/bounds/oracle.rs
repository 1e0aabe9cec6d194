//! Conditional-variance terms: U_{ℓ,n}(p), L_n and the bracket deviation.
//!
//! Only two kinds of model carry an oracle for E(ξ_k² | F_{ℓ−1}): those with
//! constant conditional variance (the oracle returns σ_k² and every U
//! vanishes) and the martingale increments of a finite chain, where
//! Σ_{k=ℓ}^n E_{ℓ−1}(ξ_k²) = G_{n−ℓ}(Y_{ℓ−1}) with G_t = Σ_{j≤t} P^j g.

use crate::error::{Error, Result};
use crate::models::{ChainIncrements, ChainModel, Model, PathAux, PathMoments};
use crate::numerics::{ordered_fold, SeedLineage};

use super::Estimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum UMethod {
    /// Finite sums over the chain's transition structure.
    Exact,
    /// Average over `replicates` outer paths, one path set shared by every ℓ.
    MonteCarlo { replicates: usize, seed: u64 },
}

impl Default for UMethod {
    fn default() -> Self {
        UMethod::Exact
    }
}

enum Oracle<'a> {
    ConstantVariance,
    Chain(&'a ChainModel),
}

fn oracle(model: &Model) -> Result<Oracle<'_>> {
    if model.is_martingale() && model.exact_moments().conditional_variance_constant {
        return Ok(Oracle::ConstantVariance);
    }
    match model.chain() {
        Some(c) if c.mode == ChainIncrements::Martingale => Ok(Oracle::Chain(c)),
        _ => Err(Error::Capability(format!(
            "{} has no conditional-variance oracle; the U/L terms are unavailable, \
             use the shape-only bounds (rho_mixing, seq_maps, linear) instead",
            model.tag()
        ))),
    }
}

/// U_{ℓ,n}(p) for ℓ = 2..n, stored at index ℓ − 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UProfile {
    pub p: f64,
    pub values: Vec<Estimate>,
    pub exact: bool,
}

impl UProfile {
    pub fn get(&self, ell: usize) -> Estimate {
        self.values[ell - 2]
    }

    pub fn all_zero(&self) -> bool {
        self.values.iter().all(|e| e.value.abs() <= 1e-14)
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::domain("u_ln", format!("p must be >= 2, got {p}")));
    }
    Ok(())
}

pub fn u_profile(p: f64, model: &Model, method: UMethod) -> Result<UProfile> {
    check_p(p)?;
    let n = model.n();
    let len = n.saturating_sub(1);
    let chain = match oracle(model)? {
        Oracle::ConstantVariance => {
            return Ok(UProfile {
                p,
                values: vec![Estimate::exact(0.0); len],
                exact: true,
            })
        }
        Oracle::Chain(c) => c,
    };
    let moments = model.exact_moments();
    let table = chain.cumulative_conditional_variance(n.saturating_sub(1));
    let sigma_star = if n > 1 { moments.sigma2[1] } else { 0.0 };
    // R_ℓ(y) = G_{n−ℓ}(y) − (n − ℓ + 1)σ_*².
    let residual = |ell: usize, y: usize| table[n - ell][y] - (n - ell + 1) as f64 * sigma_star;
    let weight = |x: f64, ell: usize| x.abs().max(moments.sigma2[ell - 2].sqrt()).powf(p - 2.0);
    match method {
        UMethod::Exact => {
            let s = chain.states();
            let values = (2..=n)
                .map(|ell| {
                    let mut total = 0.0;
                    if ell == 2 {
                        for j in 0..s {
                            total += chain.stationary[j] * weight(chain.values[j], ell) * residual(ell, j).abs();
                        }
                    } else {
                        for i in 0..s {
                            for j in 0..s {
                                let w = chain.stationary[i] * chain.transition[i][j];
                                if w > 0.0 {
                                    let x = chain.values[j] - chain.pf()[i];
                                    total += w * weight(x, ell) * residual(ell, j).abs();
                                }
                            }
                        }
                    }
                    Estimate::exact(total)
                })
                .collect();
            Ok(UProfile { p, values, exact: true })
        }
        UMethod::MonteCarlo { replicates, seed } => {
            if replicates < 2 {
                return Err(Error::config("u_ln: Monte Carlo mode needs at least 2 replicates"));
            }
            let (sum, sum_sq) = ordered_fold(
                replicates,
                || (vec![0.0; len], vec![0.0; len]),
                |(sum, sq), r| {
                    let path = model.sample_path(SeedLineage::for_replicate(seed, n, r));
                    let PathAux::Chain { states } = &path.aux else {
                        unreachable!("chain paths record states")
                    };
                    for ell in 2..=n {
                        let v = weight(path.increments[ell - 2], ell) * residual(ell, states[ell - 2] as usize).abs();
                        sum[ell - 2] += v;
                        sq[ell - 2] += v * v;
                    }
                },
                |(mut a, mut b), (c, d)| {
                    for i in 0..len {
                        a[i] += c[i];
                        b[i] += d[i];
                    }
                    (a, b)
                },
            );
            let values = sum
                .iter()
                .zip(&sum_sq)
                .map(|(s, q)| Estimate::from_sums(*s, *q, replicates))
                .collect();
            Ok(UProfile { p, values, exact: false })
        }
    }
}

/// U_{ℓ,n}(p) = ‖(|ξ_{ℓ−1}| ∨ σ_{ℓ−1})^{p−2} |Σ_{k=ℓ}^n (E_{ℓ−1}(ξ_k²) − σ_k²)|‖₁.
pub fn u_ln(ell: usize, p: f64, model: &Model, method: UMethod) -> Result<Estimate> {
    if ell < 2 || ell > model.n() {
        return Err(Error::domain("u_ln", format!("ell must lie in [2, {}], got {ell}", model.n())));
    }
    Ok(u_profile(p, model, method)?.get(ell))
}

/// L_n(p, r, aδ_n) from a precomputed U profile. The SE adds the per-ℓ SEs,
/// which bounds the SE of the sum whatever the correlation across ℓ.
pub fn l_n_from(profile: &UProfile, r: f64, a: f64, moments: &PathMoments) -> Result<Estimate> {
    let p = profile.p;
    if !(r > 0.0 && r <= p) {
        return Err(Error::domain("l_n", format!("r must lie in (0, p], got {r}")));
    }
    if !(a >= 1.0) {
        return Err(Error::domain("l_n", format!("a must be >= 1, got {a}")));
    }
    let ad2 = (a * moments.delta_n).powi(2);
    let mut v_prefix = 0.0;
    let (mut value, mut se) = (0.0, 0.0);
    for (i, u) in profile.values.iter().enumerate() {
        let ell = i + 2;
        v_prefix += moments.sigma2[ell - 2];
        let den = (moments.v_n - v_prefix + ad2).powf((p - r) / 2.0);
        value += u.value / den;
        se += u.se / den;
    }
    Ok(Estimate { value, se })
}

pub fn l_n(p: f64, r: f64, a: f64, model: &Model, method: UMethod) -> Result<Estimate> {
    let profile = u_profile(p, model, method)?;
    l_n_from(&profile, r, a, &model.exact_moments())
}

/// ‖V_n^{−1}⟨M⟩_n − 1‖_{p/2}^{p/2} with ⟨M⟩_n = Σ_k E(ξ_k² | F_{k−1}).
pub fn bracket_deviation(p: f64, model: &Model, replicates: usize, seed: u64) -> Result<Estimate> {
    let chain = match oracle(model)? {
        Oracle::ConstantVariance => return Ok(Estimate::exact(0.0)),
        Oracle::Chain(c) => c,
    };
    if replicates < 2 {
        return Err(Error::config("bracket: Monte Carlo mode needs at least 2 replicates"));
    }
    let n = model.n();
    let m = model.exact_moments();
    let g = chain.conditional_variance();
    let (sum, sum_sq) = ordered_fold(
        replicates,
        || (0.0, 0.0),
        |acc, r| {
            let path = model.sample_path(SeedLineage::for_replicate(seed, n, r));
            let PathAux::Chain { states } = &path.aux else {
                unreachable!("chain paths record states")
            };
            let bracket = m.sigma2[0] + states[..n - 1].iter().map(|y| g[*y as usize]).sum::<f64>();
            let v = (bracket / m.v_n - 1.0).abs().powf(p / 2.0);
            acc.0 += v;
            acc.1 += v * v;
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    );
    Ok(Estimate::from_sums(sum, sum_sq, replicates))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ChainKind, Family, ModelSpec, SigmaRule};

    fn asymmetric(n: usize) -> Model {
        Model::compile(&ModelSpec::new(
            n,
            3.0,
            Family::RhoMixingChain {
                chain: ChainKind::General { transition: vec![vec![0.9, 0.1], vec![0.3, 0.7]] },
                values: vec![1.0, -3.0],
                increments: ChainIncrements::Martingale,
            },
        ))
        .unwrap()
    }

    /// U_{ℓ,n} by enumerating every path y_1..y_n and, for each prefix, every continuation.
    fn brute_force(p: f64, n: usize) -> Vec<f64> {
        let pm = [[0.9f64, 0.1], [0.3, 0.7]];
        let pi = [0.75f64, 0.25];
        let f = [1.0f64, -3.0];
        let pf = [pm[0][0] * f[0] + pm[0][1] * f[1], pm[1][0] * f[0] + pm[1][1] * f[1]];
        let xi = |ys: &[usize], k: usize| if k == 0 { f[ys[0]] } else { f[ys[k]] - pf[ys[k - 1]] };
        let prob = |ys: &[usize]| {
            let mut w = pi[ys[0]];
            for t in 1..ys.len() {
                w *= pm[ys[t - 1]][ys[t]];
            }
            w
        };
        let paths: Vec<Vec<usize>> = (0..1usize << n)
            .map(|bits| (0..n).map(|t| (bits >> t) & 1).collect())
            .collect();
        // σ_k² from the full enumeration.
        let sigma2: Vec<f64> = (0..n)
            .map(|k| paths.iter().map(|ys| prob(ys) * xi(ys, k).powi(2)).sum())
            .collect();
        (2..=n)
            .map(|ell| {
                paths
                    .iter()
                    .map(|ys| {
                        let prefix = &ys[..ell - 1];
                        let wp = prob(prefix);
                        // E(ξ_k² | y_1..y_{ℓ−1}) over continuations sharing the prefix.
                        let mut cond = 0.0;
                        for other in paths.iter().filter(|o| o[..ell - 1] == *prefix) {
                            let wc = prob(other) / wp;
                            cond += wc * (ell - 1..n).map(|k| xi(other, k).powi(2) - sigma2[k]).sum::<f64>();
                        }
                        let x = xi(ys, ell - 2);
                        prob(ys) * x.abs().max(sigma2[ell - 2].sqrt()).powf(p - 2.0) * cond.abs()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn exact_chain_profile_matches_enumeration() {
        for p in [2.5, 3.0] {
            let m = asymmetric(6);
            let prof = u_profile(p, &m, UMethod::Exact).unwrap();
            let brute = brute_force(p, 6);
            for (ell, want) in (2..=6).zip(&brute) {
                let got = prof.get(ell).value;
                assert!((got - want).abs() < 1e-12, "ell={ell}: {got} vs {want}");
            }
            assert!(brute.iter().all(|v| *v > 0.0));
        }
    }

    #[test]
    fn monte_carlo_profile_matches_enumeration() {
        let m = asymmetric(6);
        let prof = u_profile(3.0, &m, UMethod::MonteCarlo { replicates: 40_000, seed: 17 }).unwrap();
        for (ell, want) in (2..=6).zip(brute_force(3.0, 6)) {
            let e = prof.get(ell);
            assert!((e.value - want).abs() < 3.0 * e.se, "ell={ell}: {} ± {} vs {want}", e.value, e.se);
        }
    }

    #[test]
    fn constant_variance_models_vanish() {
        for fam in [Family::CeLowerbound {}, Family::GaussianIid { sigma: SigmaRule::default() }] {
            let m = Model::compile(&ModelSpec::new(30, 3.0, fam)).unwrap();
            let prof = u_profile(3.0, &m, UMethod::MonteCarlo { replicates: 10, seed: 1 }).unwrap();
            assert!(prof.exact && prof.all_zero());
            assert_eq!(l_n(3.0, 1.0, 1.0, &m, UMethod::Exact).unwrap().value, 0.0);
            assert_eq!(bracket_deviation(3.0, &m, 10, 1).unwrap().value, 0.0);
        }
        // The symmetric two-state chain has g ≡ 4q(1 − q).
        let sym = Model::compile(&ModelSpec::new(12, 3.0, Family::RhoMixingChain {
            chain: ChainKind::default(),
            values: vec![1.0, -1.0],
            increments: ChainIncrements::Martingale,
        }))
        .unwrap();
        assert!(u_profile(3.0, &sym, UMethod::Exact).unwrap().all_zero());
    }

    #[test]
    fn missing_oracle_is_a_capability_error() {
        let m = Model::compile(&ModelSpec::new(8, 3.0, Family::RhoMixingChain {
            chain: ChainKind::default(),
            values: vec![1.0, -1.0],
            increments: ChainIncrements::Observable,
        }))
        .unwrap();
        assert!(matches!(u_ln(2, 3.0, &m, UMethod::Exact), Err(Error::Capability(_))));
    }

    #[test]
    fn l_n_two_steps_by_hand() {
        let m = asymmetric(2);
        let prof = u_profile(3.0, &m, UMethod::Exact).unwrap();
        let u = prof.get(2).value;
        let mo = m.exact_moments();
        let (r, a) = (1.0, 1.5);
        let want = u / (mo.sigma2[1] + a * a * mo.delta_n * mo.delta_n).powf(1.0);
        let got = l_n_from(&prof, r, a, &mo).unwrap().value;
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn l_n_nonincreasing_in_a() {
        let m = asymmetric(20);
        let prof = u_profile(2.5, &m, UMethod::Exact).unwrap();
        let mo = m.exact_moments();
        let mut prev = f64::INFINITY;
        for a in [1.0, 1.5, 2.0, 4.0, 10.0] {
            let v = l_n_from(&prof, 0.5, a, &mo).unwrap().value;
            assert!(v <= prev && v > 0.0);
            prev = v;
        }
        assert!(l_n_from(&prof, 0.5, 0.9, &mo).is_err());
    }

    #[test]
    fn bracket_deviation_positive_for_asymmetric_chain() {
        let m = asymmetric(50);
        let e = bracket_deviation(3.0, &m, 5000, 3).unwrap();
        assert!(e.value > 5.0 * e.se);
    }
}
