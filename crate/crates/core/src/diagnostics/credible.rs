//! Credible sets: the oracle ellipsoid on the truth support and the plug-in
//! ellipsoid on the selected support, with the positive-definite fallback
//! and the zero-dimensional convention `chi2_{0, 1-gamma} = 0`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF};

use crate::design::{GroupedDesign, Support};
use crate::error::{Error, Result};
use crate::num::binomial_se;
use crate::num::linalg::cholesky;
use crate::posterior::{OracleLaw, SupportPosterior};

/// Upper `level` quantile of the chi-square law with `p` degrees of freedom;
/// zero when `p = 0`. The library inverse CDF is only ~1e-5 accurate, so the
/// root is polished by Newton steps on the exact CDF.
pub fn chi2_quantile(p: usize, level: f64) -> f64 {
    if p == 0 {
        return 0.0;
    }
    let dist = ChiSquared::new(p as f64).expect("positive dof");
    let mut x = dist.inverse_cdf(level).max(1e-12);
    for _ in 0..64 {
        let f = dist.cdf(x) - level;
        let d = dist.pdf(x);
        if d <= 0.0 || !d.is_finite() {
            break;
        }
        let step = f / d;
        x -= step;
        if step.abs() <= 1e-13 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CredibleKind {
    Oracle,
    Plugin,
}

/// A quadratic-form credible set
/// `{beta : S_beta subset support, (beta_S - center)' P (beta_S - center) <= q}`
/// with `P` the alpha-scaled precision.
#[derive(Debug, Clone)]
pub struct CredibleSet {
    pub kind: CredibleKind,
    pub support: Support,
    pub center: DVector<f64>,
    pub precision: DMatrix<f64>,
    pub level: f64,
    pub chi2_quantile: f64,
    /// Set when the plug-in information was not positive definite and the
    /// unit-precision fallback was used.
    pub fallback: bool,
}

impl CredibleSet {
    /// Membership: the group support must be contained in the set's support
    /// and the quadratic form must not exceed the quantile.
    pub fn contains(&self, design: &GroupedDesign, beta: &DVector<f64>) -> Result<bool> {
        if beta.len() != design.p() {
            return Err(Error::invalid("ambient vector has wrong length"));
        }
        let s_beta = design.group_support_of(beta);
        if !self.support.is_superset_of(&s_beta) {
            return Ok(false);
        }
        let restricted = design.restrict(beta, &self.support)?.values;
        let d = &restricted - &self.center;
        let quad = d.dot(&(&self.precision * &d));
        Ok(quad <= self.chi2_quantile)
    }
}

/// The oracle ellipsoid built from the oracle Gaussian law.
pub fn oracle_credible_set(oracle: &OracleLaw, level: f64) -> Result<CredibleSet> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level must lie in (0, 1)"));
    }
    Ok(CredibleSet {
        kind: CredibleKind::Oracle,
        support: oracle.support.clone(),
        center: oracle.mean.clone(),
        precision: oracle.precision.clone(),
        level,
        chi2_quantile: chi2_quantile(oracle.mean.len(), level),
        fallback: false,
    })
}

/// The plug-in ellipsoid on the selected support with the observed
/// information; falls back to unit precision when that matrix is not
/// positive definite.
pub fn plugin_credible_set(
    support: &Support,
    center: DVector<f64>,
    observed_info: &DMatrix<f64>,
    alpha: f64,
    level: f64,
) -> Result<CredibleSet> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid("level must lie in (0, 1)"));
    }
    let p = center.len();
    let (precision, fallback) = if p == 0 {
        (DMatrix::zeros(0, 0), false)
    } else {
        match cholesky(observed_info) {
            Ok(_) => (observed_info * alpha, false),
            Err(_) => (DMatrix::identity(p, p) * alpha, true),
        }
    };
    Ok(CredibleSet {
        kind: CredibleKind::Plugin,
        support: support.clone(),
        center,
        precision,
        level,
        chi2_quantile: chi2_quantile(p, level),
        fallback,
    })
}

/// Posterior probability of a credible set under an enumerated support
/// posterior, with Monte Carlo on the non-pivotal components.
///
/// Components on supports not contained in the set's support contribute
/// zero. A component whose Gaussian summary equals the set's center and
/// precision contributes the exact chi-square pivot mass.
pub fn posterior_mass_of_set(
    sp: &SupportPosterior,
    design: &GroupedDesign,
    cs: &CredibleSet,
    mc: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mass = 0.0;
    let mut var = 0.0;
    for entry in &sp.entries {
        let w = entry.log_weight.exp();
        if w == 0.0 || !cs.support.is_superset_of(&entry.support) {
            continue;
        }
        match &entry.summary {
            None => {
                // Point mass at the ambient zero vector.
                let zero = DVector::zeros(design.p());
                if cs.contains(design, &zero)? {
                    mass += w;
                }
            }
            Some(summary) => {
                let same_support = entry.support == cs.support;
                let pivotal = same_support
                    && (&summary.mean - &cs.center).amax() <= 1e-10
                    && (&summary.precision - &cs.precision).amax()
                        <= 1e-10 * cs.precision.amax().max(1.0);
                if pivotal {
                    // Chi-square pivot: exact mass.
                    let p = cs.center.len();
                    let exact = if p == 0 {
                        1.0
                    } else {
                        ChiSquared::new(p as f64)
                            .expect("positive dof")
                            .cdf(cs.chi2_quantile)
                    };
                    mass += w * exact;
                } else {
                    let mut hits = 0usize;
                    for _ in 0..mc {
                        let draw = summary.sample(&mut rng);
                        let padded =
                            crate::design::PaddedVector::new(entry.support.clone(), draw);
                        let ambient = design.embed(&padded)?;
                        // Support containment already established; test the
                        // quadratic form directly to avoid the exact-zero
                        // group-support subtlety of continuous draws.
                        let restricted = design.restrict(&ambient, &cs.support)?.values;
                        let d = &restricted - &cs.center;
                        if d.dot(&(&cs.precision * &d)) <= cs.chi2_quantile {
                            hits += 1;
                        }
                    }
                    let p_hat = hits as f64 / mc as f64;
                    mass += w * p_hat;
                    let se = binomial_se(hits, mc);
                    var += (w * se).powi(2);
                }
            }
        }
    }
    Ok((mass.clamp(0.0, 1.0), var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn design3() -> GroupedDesign {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = DMatrix::from_fn(10, 3, |_, _| rng.gen_range(-1.0..1.0));
        GroupedDesign::new(x, vec![1; 3]).unwrap()
    }

    #[test]
    fn chi2_quantile_values() {
        assert_eq!(chi2_quantile(0, 0.95), 0.0);
        assert_relative_eq!(chi2_quantile(1, 0.95), 3.841458820694124, epsilon = 1e-9);
        assert_relative_eq!(chi2_quantile(2, 0.95), 5.991464547107979, epsilon = 1e-9);
    }

    #[test]
    fn one_dim_radius_matches_normal_quantile() {
        // Precision 1, alpha 1, level 0.95: radius sqrt(3.8415) = 1.95996.
        let oracle = OracleLaw {
            support: Support::new(vec![0]).unwrap(),
            mean: DVector::zeros(1),
            precision: DMatrix::identity(1, 1),
        };
        let cs = oracle_credible_set(&oracle, 0.95).unwrap();
        let radius = cs.chi2_quantile.sqrt();
        assert_relative_eq!(radius, 1.959963984540054, epsilon = 1e-9);
    }

    #[test]
    fn center_is_always_contained() {
        let design = design3();
        let oracle = OracleLaw {
            support: Support::new(vec![0, 2]).unwrap(),
            mean: DVector::from_vec(vec![0.6, -0.3]),
            precision: DMatrix::identity(2, 2) * 4.0,
        };
        for level in [0.05, 0.5, 0.99] {
            let cs = oracle_credible_set(&oracle, level).unwrap();
            let padded = crate::design::PaddedVector::new(
                cs.support.clone(),
                cs.center.clone(),
            );
            let ambient = design.embed(&padded).unwrap();
            assert!(cs.contains(&design, &ambient).unwrap());
        }
    }

    #[test]
    fn vectors_with_support_outside_are_never_contained() {
        let design = design3();
        let oracle = OracleLaw {
            support: Support::new(vec![0]).unwrap(),
            mean: DVector::zeros(1),
            precision: DMatrix::identity(1, 1),
        };
        let cs = oracle_credible_set(&oracle, 0.95).unwrap();
        // beta has group 1 active: not a subset of {0}, excluded regardless
        // of values.
        let beta = DVector::from_vec(vec![0.0, 1e-9, 0.0]);
        assert!(!cs.contains(&design, &beta).unwrap());
    }

    #[test]
    fn empty_support_set_contains_only_zero() {
        let design = design3();
        let cs = plugin_credible_set(
            &Support::empty(),
            DVector::zeros(0),
            &DMatrix::zeros(0, 0),
            1.0,
            0.95,
        )
        .unwrap();
        assert_eq!(cs.chi2_quantile, 0.0);
        assert!(cs.contains(&design, &DVector::zeros(3)).unwrap());
        let nonzero = DVector::from_vec(vec![0.1, 0.0, 0.0]);
        assert!(!cs.contains(&design, &nonzero).unwrap());
    }

    #[test]
    fn plugin_falls_back_to_unit_precision() {
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let cs = plugin_credible_set(
            &Support::new(vec![0, 1]).unwrap(),
            DVector::zeros(2),
            &indefinite,
            0.5,
            0.9,
        )
        .unwrap();
        assert!(cs.fallback);
        assert_relative_eq!(cs.precision, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn oracle_component_mass_is_exactly_the_level() {
        // The mixture restricted to S0 assigns the oracle ellipsoid exactly
        // 1 - gamma (chi-square pivot); cross-checked by Monte Carlo.
        let design = design3();
        let oracle = OracleLaw {
            support: Support::new(vec![0, 1]).unwrap(),
            mean: DVector::from_vec(vec![0.4, -0.9]),
            precision: DMatrix::from_row_slice(2, 2, &[3.0, 0.4, 0.4, 2.0]),
        };
        let level = 0.9;
        let cs = oracle_credible_set(&oracle, level).unwrap();
        let sp = SupportPosterior {
            alpha: 1.0,
            entries: vec![crate::posterior::PosteriorEntry {
                support: oracle.support.clone(),
                log_weight: 0.0,
                summary: Some(oracle.summary()),
                flagged: false,
            }],
            normalized: true,
        };
        let (mass, se) = posterior_mass_of_set(&sp, &design, &cs, 10, 5).unwrap();
        assert_relative_eq!(mass, level, epsilon = 1e-6);
        assert_eq!(se, 0.0);

        // MC cross-check with a deliberately perturbed component (loses the
        // pivot shortcut).
        let mut perturbed = oracle.summary();
        perturbed.mean[0] += 1e-6;
        let sp_mc = SupportPosterior {
            alpha: 1.0,
            entries: vec![crate::posterior::PosteriorEntry {
                support: oracle.support.clone(),
                log_weight: 0.0,
                summary: Some(perturbed),
                flagged: false,
            }],
            normalized: true,
        };
        let (mass_mc, se_mc) = posterior_mass_of_set(&sp_mc, &design, &cs, 200_000, 5).unwrap();
        assert!(
            (mass_mc - level).abs() <= 4.0 * se_mc.max(1e-4),
            "{mass_mc} vs {level}"
        );
    }

    #[test]
    fn components_off_the_set_support_contribute_nothing() {
        let design = design3();
        let cs = plugin_credible_set(
            &Support::new(vec![0]).unwrap(),
            DVector::zeros(1),
            &DMatrix::identity(1, 1),
            1.0,
            0.95,
        )
        .unwrap();
        let sp = SupportPosterior {
            alpha: 1.0,
            entries: vec![
                crate::posterior::PosteriorEntry {
                    support: Support::new(vec![0]).unwrap(),
                    log_weight: 0.5f64.ln(),
                    summary: Some(crate::posterior::GaussianSummary {
                        mean: DVector::zeros(1),
                        precision: DMatrix::identity(1, 1),
                    }),
                    flagged: false,
                },
                crate::posterior::PosteriorEntry {
                    support: Support::new(vec![1]).unwrap(),
                    log_weight: 0.5f64.ln(),
                    summary: Some(crate::posterior::GaussianSummary {
                        mean: DVector::zeros(1),
                        precision: DMatrix::identity(1, 1),
                    }),
                    flagged: false,
                },
            ],
            normalized: true,
        };
        let (mass, _) = posterior_mass_of_set(&sp, &design, &cs, 10, 3).unwrap();
        assert_relative_eq!(mass, 0.5 * 0.95, epsilon = 1e-6);
    }

    #[test]
    fn fractional_alpha_scales_oracle_covariance() {
        let f0 = DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let a1 = OracleLaw {
            support: Support::new(vec![0, 1]).unwrap(),
            mean: DVector::zeros(2),
            precision: f0.clone() * 1.0,
        };
        let a_half = OracleLaw {
            support: Support::new(vec![0, 1]).unwrap(),
            mean: DVector::zeros(2),
            precision: f0 * 0.5,
        };
        assert_relative_eq!(
            a_half.covariance(),
            a1.covariance() * 2.0,
            epsilon = 1e-12
        );
    }
}
