//! Total variation between posteriors over sparse supports.
//!
//! Components living on different supports force different coordinates to be
//! exactly zero, so they are mutually singular and their mass enters the
//! distance whole. Shared supports contribute
//! `1/2 integral |w_a f_a - w_b f_b|`, computed exactly for univariate
//! Gaussian pairs (crossing points plus normal CDF pieces) and by common
//! importance sampling otherwise.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::special::norm_cdf;
use crate::num::{logsumexp, mean_se};
use crate::posterior::{GaussianSummary, OracleLaw, PosteriorEngine, SupportPosterior};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TvMethod {
    ExactSingularSum,
    PerSupportQuadrature,
    Mc,
}

/// A total-variation estimate in `[0, 1]`; exact methods report `se = 0`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TvEstimate {
    pub value: f64,
    pub se: f64,
    pub method: TvMethod,
}

/// How one side's per-support conditional densities are evaluated.
#[derive(Clone, Copy)]
pub enum ComponentDensity<'a, 'b> {
    /// Use the Gaussian summaries stored in the posterior.
    Gaussian,
    /// Evaluate the exact tempered density through the engine (the Gaussian
    /// summary still serves as the importance proposal).
    Exact(&'a PosteriorEngine<'b>),
}

struct Side<'p> {
    weight: f64,
    summary: Option<&'p GaussianSummary>,
    /// Log normalizer of the exact conditional density, when exact.
    exact_log_norm: Option<f64>,
}

/// TV between two support mixtures over the same ambient space.
pub fn tv_between_support_mixtures(
    a: &SupportPosterior,
    da: ComponentDensity,
    b: &SupportPosterior,
    db: ComponentDensity,
    draws: usize,
    seed: u64,
) -> Result<TvEstimate> {
    if !a.normalized || !b.normalized {
        return Err(Error::invalid("both posteriors must be normalized"));
    }
    // Union of supports keyed by group lists.
    let mut keys: BTreeMap<Vec<usize>, (Option<usize>, Option<usize>)> = BTreeMap::new();
    for (i, e) in a.entries.iter().enumerate() {
        keys.entry(e.support.groups().to_vec()).or_default().0 = Some(i);
    }
    for (i, e) in b.entries.iter().enumerate() {
        keys.entry(e.support.groups().to_vec()).or_default().1 = Some(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut total = 0.0;
    let mut var = 0.0;
    let mut any_mc = false;
    let mut any_shared = false;

    for (groups, (ia, ib)) in keys {
        match (ia, ib) {
            (Some(i), None) => total += 0.5 * a.entries[i].log_weight.exp(),
            (None, Some(j)) => total += 0.5 * b.entries[j].log_weight.exp(),
            (Some(i), Some(j)) => {
                any_shared = true;
                let ea = &a.entries[i];
                let eb = &b.entries[j];
                let wa = ea.log_weight.exp();
                let wb = eb.log_weight.exp();
                if ea.summary.is_none() || eb.summary.is_none() {
                    // Atom at zero on the empty support.
                    total += 0.5 * (wa - wb).abs();
                    continue;
                }
                let support = &ea.support;
                let side_a = Side {
                    weight: wa,
                    summary: ea.summary.as_ref(),
                    exact_log_norm: match da {
                        ComponentDensity::Gaussian => None,
                        ComponentDensity::Exact(engine) => {
                            Some(engine.exact_log_marginal(support)?.log_exact)
                        }
                    },
                };
                let side_b = Side {
                    weight: wb,
                    summary: eb.summary.as_ref(),
                    exact_log_norm: match db {
                        ComponentDensity::Gaussian => None,
                        ComponentDensity::Exact(engine) => {
                            Some(engine.exact_log_marginal(support)?.log_exact)
                        }
                    },
                };
                let both_gaussian =
                    side_a.exact_log_norm.is_none() && side_b.exact_log_norm.is_none();
                if both_gaussian && groups.len() == 1 && ea.summary.as_ref().unwrap().mean.len() == 1
                {
                    total += half_l1_gaussian_1d(
                        wa,
                        ea.summary.as_ref().unwrap(),
                        wb,
                        eb.summary.as_ref().unwrap(),
                    );
                } else {
                    any_mc = true;
                    let (term, term_var) = half_l1_mc(
                        &side_a,
                        da,
                        &side_b,
                        db,
                        support,
                        a,
                        b,
                        draws,
                        &mut rng,
                    )?;
                    total += term;
                    var += term_var;
                }
            }
            (None, None) => unreachable!(),
        }
    }
    let method = if !any_shared {
        TvMethod::ExactSingularSum
    } else if any_mc {
        TvMethod::Mc
    } else {
        TvMethod::PerSupportQuadrature
    };
    Ok(TvEstimate {
        value: total.clamp(0.0, 1.0),
        se: var.sqrt(),
        method,
    })
}

/// Exact `1/2 integral |w_a N_a - w_b N_b|` for univariate Gaussians via the
/// crossing points of the weighted log densities.
fn half_l1_gaussian_1d(
    wa: f64,
    sa: &GaussianSummary,
    wb: f64,
    sb: &GaussianSummary,
) -> f64 {
    let (ma, va) = (sa.mean[0], 1.0 / sa.precision[(0, 0)]);
    let (mb, vb) = (sb.mean[0], 1.0 / sb.precision[(0, 0)]);
    if (ma - mb).abs() <= 1e-14 && (va - vb).abs() <= 1e-14 * va {
        return 0.5 * (wa - wb).abs();
    }
    // log(wa f_a) - log(wb f_b) = A x^2 + B x + C.
    let a = -0.5 / va + 0.5 / vb;
    let b = ma / va - mb / vb;
    let c = (wa / wb).ln() - 0.5 * (va / vb).ln() - 0.5 * ma * ma / va + 0.5 * mb * mb / vb;
    let mut roots: Vec<f64> = Vec::new();
    if a.abs() <= 1e-14 {
        if b.abs() > 1e-14 {
            roots.push(-c / b);
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc > 0.0 {
            let sq = disc.sqrt();
            roots.push((-b - sq) / (2.0 * a));
            roots.push((-b + sq) / (2.0 * a));
            roots.sort_by(f64::total_cmp);
        } else if disc == 0.0 {
            roots.push(-b / (2.0 * a));
        }
    }
    // Piecewise integration of w_a f_a - w_b f_b between the crossings.
    let mut cuts = vec![f64::NEG_INFINITY];
    cuts.extend(roots.iter());
    cuts.push(f64::INFINITY);
    let cdf = |m: f64, v: f64, x: f64| -> f64 {
        if x == f64::INFINITY {
            1.0
        } else if x == f64::NEG_INFINITY {
            0.0
        } else {
            norm_cdf((x - m) / v.sqrt())
        }
    };
    let mut acc = 0.0;
    for w in cuts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let pa = wa * (cdf(ma, va, hi) - cdf(ma, va, lo));
        let pb = wb * (cdf(mb, vb, hi) - cdf(mb, vb, lo));
        acc += (pa - pb).abs();
    }
    0.5 * acc
}

#[allow(clippy::too_many_arguments)]
fn half_l1_mc(
    side_a: &Side,
    da: ComponentDensity,
    side_b: &Side,
    db: ComponentDensity,
    support: &crate::design::Support,
    sp_a: &SupportPosterior,
    sp_b: &SupportPosterior,
    draws: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let _ = (sp_a, sp_b);
    let qa = side_a.summary.expect("shared support carries a summary");
    let qb = side_b.summary.expect("shared support carries a summary");
    let log_f = |side: &Side, d: ComponentDensity, x: &DVector<f64>| -> Result<f64> {
        match (d, side.exact_log_norm) {
            (ComponentDensity::Gaussian, _) | (_, None) => {
                Ok(side.summary.unwrap().log_density(x))
            }
            (ComponentDensity::Exact(engine), Some(log_norm)) => {
                let model = crate::fit::RestrictedModel::new(
                    engine.family,
                    engine.design,
                    engine.dispersion,
                    support.clone(),
                    engine.y.clone(),
                )?;
                let l = match model.loglik(x) {
                    Ok(v) => v,
                    Err(_) => return Ok(f64::NEG_INFINITY),
                };
                let slab = engine
                    .prior
                    .log_slab_density(engine.design, support, x)
                    .unwrap_or(f64::NEG_INFINITY);
                Ok(engine.alpha * l + slab - log_norm)
            }
        }
    };
    let mut values = Vec::with_capacity(draws);
    for _ in 0..draws {
        let x = if rng.gen::<bool>() {
            qa.sample(rng)
        } else {
            qb.sample(rng)
        };
        let log_q = logsumexp(&[qa.log_density(&x), qb.log_density(&x)]) - std::f64::consts::LN_2;
        let fa = (side_a.weight.ln() + log_f(side_a, da, &x)? - log_q).exp();
        let fb = (side_b.weight.ln() + log_f(side_b, db, &x)? - log_q).exp();
        values.push((fa - fb).abs());
    }
    let (mean, se) = mean_se(&values);
    Ok((0.5 * mean, 0.25 * se * se))
}

/// TV between a superset mixture and the oracle law: exactly `1 - omega_S0`
/// when the mixture's `S0` component matches the oracle Gaussian; otherwise
/// falls back to the general mixture distance.
pub fn tv_mixture_vs_oracle(
    mix: &SupportPosterior,
    oracle: &OracleLaw,
    draws: usize,
    seed: u64,
) -> Result<TvEstimate> {
    let entry = mix
        .entries
        .iter()
        .find(|e| e.support == oracle.support);
    if let Some(entry) = entry {
        if let Some(summary) = &entry.summary {
            let mean_ok = (&summary.mean - &oracle.mean).amax() <= 1e-10;
            let scale = oracle.precision.amax().max(1.0);
            let prec_ok = (&summary.precision - &oracle.precision).amax() <= 1e-10 * scale;
            if mean_ok && prec_ok {
                return Ok(TvEstimate {
                    value: (1.0 - entry.log_weight.exp()).clamp(0.0, 1.0),
                    se: 0.0,
                    method: TvMethod::ExactSingularSum,
                });
            }
        }
    }
    // Component mismatch: compare against the oracle as a one-component
    // posterior.
    let oracle_sp = SupportPosterior {
        alpha: mix.alpha,
        entries: vec![crate::posterior::PosteriorEntry {
            support: oracle.support.clone(),
            log_weight: 0.0,
            summary: Some(oracle.summary()),
            flagged: false,
        }],
        normalized: true,
    };
    tv_between_support_mixtures(
        mix,
        ComponentDensity::Gaussian,
        &oracle_sp,
        ComponentDensity::Gaussian,
        draws,
        seed,
    )
}
