//! Replicated experiments: frequentist coverage of the plug-in credible set,
//! support recovery along a sample-size grid, the supportwise score
//! envelope, and Hellinger contraction.
//!
//! Replicates are independent tasks with pre-split random streams; every
//! aggregation is an order-insensitive sum over the replicate index.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::design::Support;
use crate::diagnostics::credible::{plugin_credible_set, posterior_mass_of_set};
use crate::error::{Error, Result};
use crate::experiment::{build_design, build_truth, ExperimentConfig};
use crate::family::{Dispersion, GlmFamily};
use crate::fit::{pseudo_true_center, FitOptions, RestrictedModel};
use crate::num::linalg::sym_sqrt_and_inv_sqrt;
use crate::num::{binomial_se, mean_se};
use crate::posterior::{EngineOptions, PosteriorEngine};

pub(crate) fn engine_options(config: &ExperimentConfig) -> EngineOptions {
    let mut opts = EngineOptions::default();
    opts.enum_cap = config.tolerances.enum_cap as u128;
    opts.gh_tol = config.tolerances.gh_tol;
    opts.importance_draws = config.tolerances.importance_draws;
    opts.seed = config.seed;
    opts
}

/// Outcome of the coverage experiment at one sample size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n: usize,
    pub level: f64,
    pub coverage: f64,
    pub coverage_se: f64,
    /// Mean absolute posterior-credibility error `E |Pi(C*|Y) - level|`.
    pub credibility_gap: f64,
    pub gap_se: f64,
    pub replicates_used: usize,
    pub excluded: usize,
    pub seed: u64,
}

/// Frequentist coverage of the plug-in credible set on the posterior-mode
/// support. Separated or otherwise flagged replicates are excluded with a
/// disclosed count.
pub fn coverage_experiment(config: &ExperimentConfig) -> Result<CoverageReport> {
    if config.replications < 200 {
        return Err(Error::Config("coverage needs >= 200 replications".into()));
    }
    let n = config.design.n;
    let design = build_design(config, n)?;
    let truth = build_truth(config, &design)?;
    let beta0 = design.embed(&truth)?;
    let dispersion = config.dispersion(design.n())?;
    let prior = config.prior()?;
    let opts = engine_options(config);

    let results: Result<Vec<Option<(bool, f64)>>> = (0..config.replications)
        .into_par_iter()
        .map(|r| -> Result<Option<(bool, f64)>> {
            let y = crate::experiment::sample_response(config, &design, &truth, r as u64)?;
            let engine = PosteriorEngine::new(
                config.family.kind,
                &design,
                &dispersion,
                &y,
                &prior,
                config.alpha,
            )?
            .with_options(opts);
            let sp = engine.support_posterior(config.s_max, config.marginal_mode)?;
            if sp.any_flagged() {
                return Ok(None);
            }
            let mode = sp.mode_support().clone();
            let plugin = if mode.is_empty() {
                plugin_credible_set(
                    &mode,
                    DVector::zeros(0),
                    &DMatrix::zeros(0, 0),
                    config.alpha,
                    config.level,
                )?
            } else {
                let model = RestrictedModel::new(
                    config.family.kind,
                    &design,
                    &dispersion,
                    mode.clone(),
                    y.clone(),
                )?;
                let fit =
                    model.restricted_mle(&DVector::zeros(model.dim()), None, &FitOptions::default())?;
                if fit.separated || !fit.converged {
                    return Ok(None);
                }
                plugin_credible_set(
                    &mode,
                    fit.beta_hat,
                    &fit.observed_info,
                    config.alpha,
                    config.level,
                )?
            };
            let covered = plugin.contains(&design, &beta0)?;
            let (mass, _) = posterior_mass_of_set(
                &sp,
                &design,
                &plugin,
                config.tolerances.mc_draws,
                config.seed ^ (0xC0FFEE + r as u64),
            )?;
            Ok(Some((covered, (mass - config.level).abs())))
        })
        .collect();
    let results = results?;
    let excluded = results.iter().filter(|r| r.is_none()).count();
    let kept: Vec<(bool, f64)> = results.into_iter().flatten().collect();
    if kept.is_empty() {
        return Err(Error::NonConvergence(
            "every coverage replicate was excluded".into(),
        ));
    }
    let hits = kept.iter().filter(|(c, _)| *c).count();
    let gaps: Vec<f64> = kept.iter().map(|(_, g)| *g).collect();
    let (gap_mean, gap_se) = mean_se(&gaps);
    Ok(CoverageReport {
        n,
        level: config.level,
        coverage: hits as f64 / kept.len() as f64,
        coverage_se: binomial_se(hits, kept.len()),
        credibility_gap: gap_mean,
        gap_se,
        replicates_used: kept.len(),
        excluded,
        seed: config.seed,
    })
}

/// One sample size of the recovery curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub n: usize,
    /// `E Pi(S_beta = S_0 | Y)`.
    pub posterior_truth_mass: f64,
    pub mass_se: f64,
    /// `P(S_hat = S_0)`.
    pub mode_recovery: f64,
    pub mode_se: f64,
    pub replicates_used: usize,
    pub excluded: usize,
}

/// Support recovery along the configured `n` grid.
pub fn support_recovery_experiment(config: &ExperimentConfig) -> Result<Vec<RecoveryRow>> {
    let prior = config.prior()?;
    let opts = engine_options(config);
    let mut rows = Vec::new();
    for n in config.n_values() {
        let design = build_design(config, n)?;
        let truth = build_truth(config, &design)?;
        let dispersion = config.dispersion(design.n())?;
        let results: Result<Vec<Option<(f64, bool)>>> = (0..config.replications)
            .into_par_iter()
            .map(|r| -> Result<Option<(f64, bool)>> {
                let y = crate::experiment::sample_response(config, &design, &truth, r as u64)?;
                let engine = PosteriorEngine::new(
                    config.family.kind,
                    &design,
                    &dispersion,
                    &y,
                    &prior,
                    config.alpha,
                )?
                .with_options(opts);
                let sp = engine.support_posterior(config.s_max, config.marginal_mode)?;
                if sp.any_flagged() {
                    return Ok(None);
                }
                let mass = sp.weight_of(&truth.support);
                let hit = sp.mode_support() == &truth.support;
                Ok(Some((mass, hit)))
            })
            .collect();
        let results = results?;
        let excluded = results.iter().filter(|r| r.is_none()).count();
        let kept: Vec<(f64, bool)> = results.into_iter().flatten().collect();
        if kept.is_empty() {
            return Err(Error::NonConvergence(format!(
                "every recovery replicate at n = {n} was excluded"
            )));
        }
        let masses: Vec<f64> = kept.iter().map(|(m, _)| *m).collect();
        let hits = kept.iter().filter(|(_, h)| *h).count();
        let (mass_mean, mass_se) = mean_se(&masses);
        rows.push(RecoveryRow {
            n,
            posterior_truth_mass: mass_mean,
            mass_se,
            mode_recovery: hits as f64 / kept.len() as f64,
            mode_se: binomial_se(hits, kept.len()),
            replicates_used: kept.len(),
            excluded,
        });
    }
    Ok(rows)
}

/// Precomputed whitened-score operator for one support: `Z_S = M y - c`.
struct ScoreOperator {
    m: DMatrix<f64>,
    offset: DVector<f64>,
    dim: usize,
}

/// Outcome of the score-envelope experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreEnvelopeReport {
    pub n: usize,
    pub s: usize,
    /// Numerically estimated sub-Gaussian constant of the normalized scores.
    pub b_mgf: f64,
    /// `K_sc = 4 sqrt(b_mgf (3 + log 5))`.
    pub k_sc: f64,
    pub threshold: f64,
    pub exceedance: f64,
    pub se: f64,
    /// Theoretical envelope bound `2 G^{-2s}`.
    pub bound: f64,
    /// Empirical sup-norm samples (one per replicate).
    pub sup_norms: Vec<f64>,
    /// Dimension of each enumerated support, for chi-square cross-checks.
    pub support_dims: Vec<usize>,
    pub seed: u64,
}

/// Union chi-square tail bound `min(1, sum_S P(chi2_{p_S} > t^2))`.
pub fn chi2_union_tail(dims: &[usize], threshold: f64) -> f64 {
    let t2 = threshold * threshold;
    let mut total = 0.0;
    for &d in dims {
        if d == 0 {
            continue;
        }
        let tail = 1.0 - ChiSquared::new(d as f64).expect("positive dof").cdf(t2);
        total += tail;
    }
    total.min(1.0)
}

/// Numerical estimate of the sub-Gaussian mgf constant
/// `b_mgf = sup log E exp(lambda u' Z_S) / lambda^2` over a lambda grid of
/// the form `+-(window/32) {1..32}` and a fixed direction set per support.
#[allow(clippy::too_many_arguments)]
pub fn estimate_b_mgf(
    family: GlmFamily,
    dispersion: &Dispersion,
    eta0: &DVector<f64>,
    operators: &[ScoreOpView],
    window: f64,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for op in operators {
        let d = op.m.nrows();
        let mut directions: Vec<DVector<f64>> = (0..d)
            .map(|k| DVector::from_fn(d, |i, _| if i == k { 1.0 } else { 0.0 }))
            .collect();
        for _ in 0..8 {
            let v = DVector::from_fn(d, |_, _| {
                rand::Rng::gen_range(&mut rng, -1.0..1.0)
            });
            let norm = v.norm();
            if norm > 0.0 {
                directions.push(v / norm);
            }
        }
        for u in &directions {
            let a = op.m.transpose() * u;
            for k in 1..=32 {
                for sign in [-1.0, 1.0] {
                    let lambda = sign * window * k as f64 / 32.0;
                    let mut log_mgf = 0.0;
                    let mut valid = true;
                    for i in 0..a.len() {
                        match family.centered_log_mgf(eta0[i], dispersion[i], lambda * a[i]) {
                            Some(v) => log_mgf += v,
                            None => {
                                valid = false;
                                break;
                            }
                        }
                    }
                    if valid {
                        best = best.max(log_mgf / (lambda * lambda));
                    }
                }
            }
        }
    }
    best
}

/// Borrowed view of a score operator (used by the mgf estimator).
pub struct ScoreOpView<'a> {
    pub m: &'a DMatrix<f64>,
}

/// Score-envelope experiment: empirical exceedance of
/// `sup_S ||Z_S|| > K_sc sqrt(s log G)` over all nonempty supports of size
/// at most `s`, against the `2 G^{-2s}` bound.
pub fn score_envelope_experiment(
    config: &ExperimentConfig,
    s: usize,
    replications: usize,
) -> Result<ScoreEnvelopeReport> {
    let n = config.design.n;
    let design = build_design(config, n)?;
    let truth = build_truth(config, &design)?;
    let dispersion = config.dispersion(design.n())?;
    let family = config.family.kind;
    let beta0 = design.embed(&truth)?;
    let eta0 = design.matrix() * &beta0;

    let supports: Vec<Support> = design
        .supports_up_to(s, config.tolerances.enum_cap as u128)?
        .into_iter()
        .filter(|sup| !sup.is_empty())
        .collect();
    // Pseudo-true centers are deterministic given the design and truth:
    // build the whitened score operators once.
    let operators: Result<Vec<ScoreOperator>> = supports
        .par_iter()
        .map(|support| -> Result<ScoreOperator> {
            let center = pseudo_true_center(family, &design, &dispersion, support, &truth, None)?;
            let (_, inv_sqrt) = sym_sqrt_and_inv_sqrt(&center.fisher_circ)?;
            let xs = design.submatrix(support);
            let eta_c = &xs * &center.beta_circ;
            let nn = design.n();
            let mut weighted = DMatrix::zeros(xs.ncols(), nn);
            let mut mean_c = DVector::zeros(nn);
            for i in 0..nn {
                let (theta, xi1, _) = family.link(eta_c[i]);
                let (_, b1, _) = family.cumulant(theta)?;
                mean_c[i] = b1;
                for a in 0..xs.ncols() {
                    weighted[(a, i)] = xs[(i, a)] * xi1 / dispersion[i];
                }
            }
            let m = inv_sqrt * weighted;
            let offset = &m * mean_c;
            Ok(ScoreOperator {
                dim: m.nrows(),
                m,
                offset,
            })
        })
        .collect();
    let operators = operators?;

    let log_g = (design.num_groups() as f64).ln();
    let window = (s as f64 * log_g).sqrt();
    let views: Vec<ScoreOpView> = operators.iter().map(|o| ScoreOpView { m: &o.m }).collect();
    let b_mgf = estimate_b_mgf(family, &dispersion, &eta0, &views, window, config.seed ^ 0xB15);
    let kappa0 = 3.0 + 5.0f64.ln();
    let k_sc = 4.0 * (b_mgf * kappa0).sqrt();
    let threshold = k_sc * (s as f64 * log_g).sqrt();

    let sup_norms: Result<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let y = crate::experiment::sample_response(config, &design, &truth, r as u64)?;
            let mut sup = 0.0f64;
            for op in &operators {
                let z = &op.m * &y - &op.offset;
                sup = sup.max(z.norm());
            }
            Ok(sup)
        })
        .collect();
    let sup_norms = sup_norms?;
    let hits = sup_norms.iter().filter(|v| **v > threshold).count();
    let bound = 2.0 * (design.num_groups() as f64).powi(-2 * s as i32);
    Ok(ScoreEnvelopeReport {
        n,
        s,
        b_mgf,
        k_sc,
        threshold,
        exceedance: hits as f64 / replications as f64,
        se: binomial_se(hits, replications),
        bound,
        sup_norms,
        support_dims: operators.iter().map(|o| o.dim).collect(),
        seed: config.seed,
    })
}

/// One sample size of the Hellinger contraction table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionRow {
    pub n: usize,
    pub eps_n: f64,
    pub threshold: f64,
    /// Mean posterior mass of `{H_n(beta, beta0) > K_hel eps_n}`.
    pub mean_exceedance: f64,
    pub se: f64,
    pub excluded: usize,
}

/// Posterior Hellinger exceedance along the `n` grid; `H_n` is evaluated
/// exactly per posterior draw through the one-observation Hellinger
/// distances.
pub fn hellinger_contraction(
    config: &ExperimentConfig,
    k_hel: f64,
    draws: usize,
) -> Result<Vec<ContractionRow>> {
    let prior = config.prior()?;
    let opts = engine_options(config);
    let family = config.family.kind;
    let mut rows = Vec::new();
    for n in config.n_values() {
        let design = build_design(config, n)?;
        let truth = build_truth(config, &design)?;
        let dispersion = config.dispersion(design.n())?;
        let beta0 = design.embed(&truth)?;
        let eta0 = design.matrix() * &beta0;
        let g = design.num_groups() as f64;
        let eps_n = (truth.support.len() as f64 * g.ln() / n as f64).sqrt();
        let threshold = k_hel * eps_n;
        let results: Result<Vec<Option<f64>>> = (0..config.replications)
            .into_par_iter()
            .map(|r| -> Result<Option<f64>> {
                let y = crate::experiment::sample_response(config, &design, &truth, r as u64)?;
                let engine =
                    PosteriorEngine::new(family, &design, &dispersion, &y, &prior, config.alpha)?
                        .with_options(opts);
                let sp = engine.support_posterior(config.s_max, config.marginal_mode)?;
                if sp.any_flagged() {
                    return Ok(None);
                }
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x4E11);
                rng.set_stream(r as u64);
                let sample = engine.sample_posterior(&sp, draws, false, &mut rng)?;
                let mut exceed = 0usize;
                for beta in &sample.ambient {
                    let eta = design.matrix() * beta;
                    let mut h2 = 0.0;
                    for i in 0..design.n() {
                        h2 += family.hellinger_sq(eta[i], eta0[i], dispersion[i]);
                    }
                    let h_n = (h2 / design.n() as f64).sqrt();
                    if h_n > threshold {
                        exceed += 1;
                    }
                }
                Ok(Some(exceed as f64 / draws as f64))
            })
            .collect();
        let results = results?;
        let excluded = results.iter().filter(|r| r.is_none()).count();
        let kept: Vec<f64> = results.into_iter().flatten().collect();
        if kept.is_empty() {
            return Err(Error::NonConvergence(format!(
                "every contraction replicate at n = {n} was excluded"
            )));
        }
        let (mean, se) = mean_se(&kept);
        rows.push(ContractionRow {
            n,
            eps_n,
            threshold,
            mean_exceedance: mean,
            se,
            excluded,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentConfig;

    fn config(toml: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(toml).unwrap()
    }

    fn gaussian_pivotal_toml(level: f64, replications: usize) -> String {
        format!(
            r#"
alpha = 1.0
s_max = 2
seed = 11
replications = {replications}
level = {level}

[family]
kind = "gaussian"
tau = 1.0

[design]
n = 120
num_groups = 2
generator = "iid_gaussian_normalized"

[truth]
groups = [0, 1]
values = [0.9, -0.7]

[prior]
size = {{ kind = "complexity", c = 1.0, a = 2.0 }}
slab = {{ kind = "group_gaussian", sigma2 = 100.0 }}

[tolerances]
mc_draws = 2000
"#
        )
    }

    #[test]
    fn gaussian_pivotal_coverage_matches_level() {
        // Strong signal, s_max = s_0: selection is essentially fixed at the
        // truth, and the gaussian plug-in quadratic form is exactly pivotal
        // up to the wide-slab shrinkage, so coverage tracks the level.
        for level in [0.5, 0.95] {
            let cfg = config(&gaussian_pivotal_toml(level, 400));
            let report = coverage_experiment(&cfg).unwrap();
            assert!(
                (report.coverage - level).abs() <= 3.0 * report.coverage_se + 0.01,
                "level {level}: coverage {} (se {})",
                report.coverage,
                report.coverage_se
            );
            assert!(report.credibility_gap <= 0.05);
            assert_eq!(report.excluded, 0);
        }
    }

    #[test]
    fn coverage_requires_enough_replicates() {
        let cfg = config(&gaussian_pivotal_toml(0.95, 10));
        assert!(coverage_experiment(&cfg).is_err());
    }

    #[test]
    fn recovery_improves_with_sample_size() {
        let toml = r#"
alpha = 0.5
s_max = 3
seed = 5
replications = 60
n_grid = [60, 240]

[family]
kind = "gaussian"

[design]
n = 60
num_groups = 8
generator = "iid_gaussian_normalized"

[truth]
groups = [1, 4]
signal_multiple = 8.0

[prior]
size = { kind = "complexity", c = 1.0, a = 2.0 }
slab = { kind = "group_gaussian", sigma2 = 4.0 }
"#;
        let cfg = config(toml);
        let rows = support_recovery_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        // Nondecreasing within 2 combined standard errors.
        let tol = 2.0 * (rows[0].mass_se + rows[1].mass_se);
        assert!(
            rows[1].posterior_truth_mass >= rows[0].posterior_truth_mass - tol,
            "{} then {}",
            rows[0].posterior_truth_mass,
            rows[1].posterior_truth_mass
        );
        assert!(rows[1].mode_recovery >= 0.9, "{}", rows[1].mode_recovery);
    }

    #[test]
    fn duplicated_design_recovery_plateaus() {
        // Identifiability failure: the duplicate of the active group soaks
        // up half the posterior mass, so recovery stalls below 1.
        let toml = r#"
alpha = 0.5
s_max = 2
seed = 19
replications = 50

[family]
kind = "gaussian"

[design]
n = 150
num_groups = 4
generator = "duplicated_pair"

[truth]
groups = [0]
values = [1.5]

[prior]
size = { kind = "complexity", c = 1.0, a = 1.0 }
slab = { kind = "group_gaussian", sigma2 = 4.0 }
"#;
        let cfg = config(toml);
        let rows = support_recovery_experiment(&cfg).unwrap();
        assert!(
            rows[0].posterior_truth_mass < 0.75,
            "duplicated design should not recover cleanly: {}",
            rows[0].posterior_truth_mass
        );
    }

    #[test]
    fn score_envelope_gaussian_matches_chi_square() {
        let toml = r#"
alpha = 0.5
s_max = 2
seed = 23
replications = 100

[family]
kind = "gaussian"

[design]
n = 150
num_groups = 8
generator = "iid_gaussian_normalized"

[truth]
groups = [0, 5]
values = [0.8, -0.6]

[prior]
size = { kind = "complexity", c = 1.0, a = 2.0 }
slab = { kind = "group_gaussian", sigma2 = 4.0 }
"#;
        let cfg = config(toml);
        let reps = 4000;
        let report = score_envelope_experiment(&cfg, 2, reps).unwrap();
        // K_sc threshold exceedance obeys the theoretical bound.
        assert!(
            report.exceedance <= report.bound + 3.0 * report.se.max(1e-4),
            "exceedance {} vs bound {}",
            report.exceedance,
            report.bound
        );
        // Gaussian scores are exactly standard normal per support: the
        // union chi-square bound must dominate the sup exceedance at a
        // moderate threshold where it is informative.
        let t = chi2_quantile_helper(2, 0.995).sqrt();
        let union = chi2_union_tail(&report.support_dims, t);
        let hits = report.sup_norms.iter().filter(|v| **v > t).count();
        let emp = hits as f64 / reps as f64;
        let se = binomial_se(hits, reps);
        assert!(union < 1.0, "threshold should be informative");
        assert!(emp <= union + 3.0 * se, "empirical {emp} vs union {union}");
        // b_mgf for the gaussian family is 1/2 up to the variance inflation
        // of pseudo-true supports; K_sc must be at least the ideal value.
        assert!(report.b_mgf >= 0.5 - 1e-9);
        assert!(report.k_sc >= 4.0 * (0.5 * (3.0 + 5.0f64.ln())).sqrt() - 1e-9);
    }

    fn chi2_quantile_helper(p: usize, level: f64) -> f64 {
        crate::diagnostics::credible::chi2_quantile(p, level)
    }

    #[test]
    fn infinite_threshold_has_zero_exceedance() {
        let toml = r#"
alpha = 0.5
s_max = 1
seed = 29
replications = 10

[family]
kind = "logistic"

[design]
n = 60
num_groups = 4
generator = "iid_gaussian_normalized"

[truth]
groups = [0]
values = [1.0]

[prior]
size = { kind = "complexity", c = 1.0, a = 1.0 }
slab = { kind = "group_gaussian", sigma2 = 4.0 }
"#;
        let cfg = config(toml);
        let report = score_envelope_experiment(&cfg, 1, 200).unwrap();
        let beyond = report.sup_norms.iter().filter(|v| **v > 1e6).count();
        assert_eq!(beyond, 0);
    }

    #[test]
    fn hellinger_contraction_decreases_with_n() {
        let toml = r#"
alpha = 0.5
s_max = 2
seed = 31
replications = 40
n_grid = [80, 320]

[family]
kind = "gaussian"

[design]
n = 80
num_groups = 6
generator = "iid_gaussian_normalized"

[truth]
groups = [0, 3]
signal_multiple = 8.0

[prior]
size = { kind = "complexity", c = 1.0, a = 2.0 }
slab = { kind = "group_gaussian", sigma2 = 4.0 }
"#;
        let cfg = config(toml);
        let rows = hellinger_contraction(&cfg, 1.0, 128).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(
            rows[1].mean_exceedance
                <= rows[0].mean_exceedance + 2.0 * (rows[0].se + rows[1].se) + 1e-12,
            "{} then {}",
            rows[0].mean_exceedance,
            rows[1].mean_exceedance
        );
    }

    #[test]
    fn gaussian_hellinger_closed_form_matches_module_distance() {
        // Per observation h^2 = 2(1 - exp(-(d eta)^2 / (8 tau))).
        let fam = GlmFamily::Gaussian;
        for (e1, e0, tau) in [(0.3f64, -0.2, 1.0), (1.0, 0.0, 2.0)] {
            let direct = 2.0 * (1.0 - (-(e1 - e0) * (e1 - e0) / (8.0 * tau)).exp());
            approx::assert_relative_eq!(
                fam.hellinger_sq(e1, e0, tau),
                direct,
                max_relative = 1e-12
            );
        }
    }
}
