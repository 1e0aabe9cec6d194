//! ψ_n(t) = sup_k E min(t δ_n ξ_k², |ξ_k|³) / σ_k².

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::models::{MarginalGroup, Model};
use crate::numerics::SeedLineage;

use super::Estimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiMode {
    ClosedForm,
    /// Estimate from `replicates` simulated paths. Memory is 40·n·R bytes.
    MonteCarlo { replicates: usize, seed: u64 },
}

/// Per-index sorted |ξ_k| with prefix/suffix power sums, so that the
/// empirical mean of min(c ξ², |ξ|³) costs one binary search.
#[derive(Debug, Clone)]
struct EmpiricalIndex {
    abs: Vec<f64>,
    /// Σ_{i<j} |x_i|³ and Σ_{i<j} x_i⁶.
    cube_prefix: Vec<f64>,
    sixth_prefix: Vec<f64>,
    /// Σ_{i≥j} x_i² and Σ_{i≥j} x_i⁴.
    square_suffix: Vec<f64>,
    fourth_suffix: Vec<f64>,
    sigma2: f64,
    index: usize,
}

impl EmpiricalIndex {
    fn new(mut abs: Vec<f64>, sigma2: f64, index: usize) -> Self {
        abs.sort_by(f64::total_cmp);
        let r = abs.len();
        let mut cube_prefix = vec![0.0; r + 1];
        let mut sixth_prefix = vec![0.0; r + 1];
        for (i, x) in abs.iter().enumerate() {
            let c = x.powi(3);
            cube_prefix[i + 1] = cube_prefix[i] + c;
            sixth_prefix[i + 1] = sixth_prefix[i] + c * c;
        }
        let mut square_suffix = vec![0.0; r + 1];
        let mut fourth_suffix = vec![0.0; r + 1];
        for i in (0..r).rev() {
            let s = abs[i] * abs[i];
            square_suffix[i] = square_suffix[i + 1] + s;
            fourth_suffix[i] = fourth_suffix[i + 1] + s * s;
        }
        Self {
            abs,
            cube_prefix,
            sixth_prefix,
            square_suffix,
            fourth_suffix,
            sigma2,
            index,
        }
    }

    fn eval(&self, c: f64) -> Estimate {
        // min(c x², |x|³) = |x|³ for |x| ≤ c, c x² above.
        let j = self.abs.partition_point(|x| *x <= c);
        let sum = self.cube_prefix[j] + c * self.square_suffix[j];
        let sum_sq = self.sixth_prefix[j] + c * c * self.fourth_suffix[j];
        let e = Estimate::from_sums(sum, sum_sq, self.abs.len());
        Estimate {
            value: e.value / self.sigma2,
            se: e.se / self.sigma2,
        }
    }
}

#[derive(Debug, Clone)]
enum Profile {
    Closed(Vec<MarginalGroup>),
    Empirical(Vec<EmpiricalIndex>),
}

/// A reusable evaluator of t ↦ ψ_n(t).
#[derive(Debug, Clone)]
pub struct PsiProfile {
    profile: Profile,
    delta: f64,
}

impl PsiProfile {
    pub fn new(model: &Model, mode: PsiMode) -> Result<Self> {
        let moments = model.exact_moments();
        let delta = moments.delta_n;
        let profile = match mode {
            PsiMode::ClosedForm => Profile::Closed(
                model
                    .marginal_groups()
                    .into_iter()
                    .filter(|g| g.sigma2 > 0.0)
                    .collect(),
            ),
            PsiMode::MonteCarlo { replicates, seed } => {
                if replicates < 2 {
                    return Err(Error::config("psi_n: Monte Carlo mode needs at least 2 replicates"));
                }
                let n = model.n();
                let paths: Vec<Vec<f64>> = (0..replicates as u64)
                    .into_par_iter()
                    .map(|r| model.sample_path(SeedLineage::for_replicate(seed, n, r)).increments)
                    .collect();
                let indices = (0..n)
                    .into_par_iter()
                    .filter(|k| moments.sigma2[*k] > 0.0)
                    .map(|k| {
                        let abs = paths.iter().map(|p| p[k].abs()).collect();
                        EmpiricalIndex::new(abs, moments.sigma2[k], k)
                    })
                    .collect();
                Profile::Empirical(indices)
            }
        };
        Ok(Self { profile, delta })
    }

    pub fn eval(&self, t: f64) -> Result<Estimate> {
        if !(t >= 0.0) {
            return Err(Error::domain("psi_n", format!("t must be >= 0, got {t}")));
        }
        let c = t * self.delta;
        match &self.profile {
            Profile::Closed(groups) => {
                let mut best = 0.0f64;
                for g in groups {
                    best = best.max(g.law.truncated_cubic(c)? / g.sigma2);
                }
                Ok(Estimate::exact(best))
            }
            Profile::Empirical(indices) => Ok(indices
                .iter()
                .map(|e| e.eval(c))
                .fold(Estimate::exact(0.0), |best, e| if e.value > best.value { e } else { best })),
        }
    }

    /// E min(tδ_n ξ_k², |ξ_k|³)/σ_k² for every k with σ_k > 0, in index order.
    /// The Monte Carlo sup in [`eval`](Self::eval) is biased upward by the
    /// max over noisy means; single indices are not.
    pub fn per_index(&self, t: f64) -> Result<Vec<(usize, Estimate)>> {
        if !(t >= 0.0) {
            return Err(Error::domain("psi_n", format!("t must be >= 0, got {t}")));
        }
        let c = t * self.delta;
        let mut out = match &self.profile {
            Profile::Closed(groups) => {
                let mut v = Vec::new();
                for g in groups {
                    let e = Estimate::exact(g.law.truncated_cubic(c)? / g.sigma2);
                    v.extend(g.indices.iter().map(|&k| (k, e)));
                }
                v
            }
            Profile::Empirical(indices) => indices.iter().map(|e| (e.index, e.eval(c))).collect(),
        };
        out.sort_by_key(|(k, _)| *k);
        Ok(out)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.profile, Profile::Closed(_))
    }
}

pub fn psi_n(t: f64, model: &Model, mode: PsiMode) -> Result<Estimate> {
    if !(t >= 0.0) {
        return Err(Error::domain("psi_n", format!("t must be >= 0, got {t}")));
    }
    PsiProfile::new(model, mode)?.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Family, ModelSpec, SigmaRule};
    use crate::numerics::{normal_abs_moment, quadrature};

    fn model(n: usize, family: Family) -> Model {
        Model::compile(&ModelSpec::new(n, 3.0, family)).unwrap()
    }

    #[test]
    fn zero_at_zero_and_rademacher_min() {
        let m = model(50, Family::RademacherIid { sigma: SigmaRule::default() });
        assert_eq!(psi_n(0.0, &m, PsiMode::ClosedForm).unwrap().value, 0.0);
        for t in [0.1, 0.5, 1.0, 2.0, 10.0] {
            assert_eq!(psi_n(t, &m, PsiMode::ClosedForm).unwrap().value, t.min(1.0));
        }
        assert!(psi_n(-1.0, &m, PsiMode::ClosedForm).is_err());
    }

    #[test]
    fn gaussian_closed_form_matches_quadrature_and_envelope() {
        let fam = Family::GaussianIid { sigma: SigmaRule::Affine { intercept: 0.5, slope: 1.0 } };
        let m = model(7, fam);
        let sigmas: Vec<f64> = (1..=7).map(|k| 0.5 + k as f64 / 7.0).collect();
        let delta = 1.5;
        let cap = m.moment_ratio(3.0).unwrap();
        for t in [0.05, 0.3, 1.0, 3.0, 20.0] {
            let got = psi_n(t, &m, PsiMode::ClosedForm).unwrap().value;
            let want = sigmas
                .iter()
                .map(|s| {
                    let f = |z: f64| {
                        let x = s * z;
                        (t * delta * x * x).min(x.abs().powi(3)) * (-z * z / 2.0).exp()
                            / (2.0 * std::f64::consts::PI).sqrt()
                    };
                    2.0 * quadrature(f, 0.0, 40.0, 1e-13).unwrap().value / (s * s)
                })
                .fold(0.0, f64::max);
            assert!((got - want).abs() < 1e-10, "t={t}: {got} vs {want}");
            assert!(got <= (t * delta).min(cap) + 1e-12);
        }
        assert!((cap - 1.5 * normal_abs_moment(3.0).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn monotone_in_t() {
        let m = model(100, Family::CeLowerbound {});
        let mut prev = 0.0;
        for i in 0..40 {
            let t = 0.05 * 1.3f64.powi(i);
            let v = psi_n(t, &m, PsiMode::ClosedForm).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        let m = model(100, Family::CeLowerbound {});
        let closed = PsiProfile::new(&m, PsiMode::ClosedForm).unwrap();
        let mc = PsiProfile::new(&m, PsiMode::MonteCarlo { replicates: 4000, seed: 9 }).unwrap();
        let cap = m.moment_ratio(3.0).unwrap();
        let delta = m.exact_moments().delta_n;
        for t in [0.2, 1.0, 5.0] {
            let c = closed.eval(t).unwrap().value;
            let exact = closed.per_index(t).unwrap();
            let est = mc.per_index(t).unwrap();
            assert_eq!(exact.len(), est.len());
            let (k_star, _) = exact
                .iter()
                .copied()
                .fold((0, Estimate::exact(-1.0)), |b, x| if x.1.value > b.1.value { x } else { b });
            let at = est.iter().find(|(k, _)| *k == k_star).unwrap().1;
            assert!((at.value - c).abs() <= 3.0 * at.se, "t={t}: {} ± {} vs {c}", at.value, at.se);
            // The sup of the estimates dominates the estimate at k*.
            let e = mc.eval(t).unwrap();
            assert!(e.value >= at.value);
            assert!(e.value <= (t * delta).min(cap) + 3.0 * e.se, "t={t}: {} vs envelope", e.value);
        }
    }
}
