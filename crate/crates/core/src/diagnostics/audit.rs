//! The assumption audit: every instance-computable constant of the rate,
//! design, prior, and likelihood conditions, each reported with the
//! inequality it enters. Constants are fitted/observed values, never
//! asserted; infeasible enumerations are flagged rather than silently
//! approximated.

use serde::{Deserialize, Serialize};

use crate::diagnostics::experiments::{estimate_b_mgf, ScoreOpView};
use crate::diagnostics::renyi::RenyiTable;
use crate::diagnostics::tv::TvEstimate;
use crate::error::Result;
use crate::experiment::{build_design, build_truth, ExperimentConfig};
use crate::fit::{pseudo_true_center, truth_fisher_weights};
use crate::num::linalg::sym_sqrt_and_inv_sqrt;
use crate::prior::audit_prior_constants;

use super::experiments::{ContractionRow, CoverageReport, RecoveryRow, ScoreEnvelopeReport};

/// One audited constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRow {
    pub name: String,
    pub value: f64,
    /// Module that defines the quantity.
    pub provenance: String,
    /// The condition the constant enters, as text.
    pub constraint: String,
    /// Set when the instance visibly violates a smallness/positivity
    /// requirement or the computation hit its enumeration budget.
    pub flagged: bool,
}

/// The full constants table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionAudit {
    pub rows: Vec<AuditRow>,
}

impl AssumptionAudit {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.name == name).map(|r| r.value)
    }
}

/// Aggregated diagnostics artifact.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub config_hash: String,
    pub seed: u64,
    pub audit: AssumptionAudit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub renyi: Option<RenyiTable>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recovery: Option<Vec<RecoveryRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_mixture_oracle: Option<TvEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tv_exact_mixture: Option<TvEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contraction: Option<Vec<ContractionRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub score_envelope: Option<ScoreEnvelopeReport>,
}

impl DiagnosticsReport {
    /// Flat `(n, metric, value, se)` rows for the metrics CSV.
    pub fn metric_rows(&self) -> Vec<(usize, String, f64, f64)> {
        let mut out = Vec::new();
        let n0 = self.audit.get("n").unwrap_or(0.0) as usize;
        for row in &self.audit.rows {
            out.push((n0, format!("audit.{}", row.name), row.value, 0.0));
        }
        if let Some(renyi) = &self.renyi {
            let mut min_r = f64::INFINITY;
            for row in &renyi.rows {
                min_r = min_r.min(row.r_value);
            }
            out.push((renyi.n, "renyi.min_gap".into(), min_r, 0.0));
            out.push((renyi.n, "renyi.summability".into(), renyi.summability, 0.0));
        }
        if let Some(rows) = &self.recovery {
            for r in rows {
                out.push((
                    r.n,
                    "recovery.posterior_truth_mass".into(),
                    r.posterior_truth_mass,
                    r.mass_se,
                ));
                out.push((r.n, "recovery.mode_rate".into(), r.mode_recovery, r.mode_se));
            }
        }
        if let Some(c) = &self.coverage {
            out.push((c.n, "coverage.rate".into(), c.coverage, c.coverage_se));
            out.push((
                c.n,
                "coverage.credibility_gap".into(),
                c.credibility_gap,
                c.gap_se,
            ));
        }
        if let Some(tv) = &self.tv_mixture_oracle {
            out.push((n0, "tv.mixture_vs_oracle".into(), tv.value, tv.se));
        }
        if let Some(tv) = &self.tv_exact_mixture {
            out.push((n0, "tv.exact_vs_mixture".into(), tv.value, tv.se));
        }
        if let Some(rows) = &self.contraction {
            for r in rows {
                out.push((
                    r.n,
                    "contraction.exceedance".into(),
                    r.mean_exceedance,
                    r.se,
                ));
            }
        }
        if let Some(sc) = &self.score_envelope {
            out.push((sc.n, "score.exceedance".into(), sc.exceedance, sc.se));
            out.push((sc.n, "score.k_sc".into(), sc.k_sc, 0.0));
            out.push((sc.n, "score.b_mgf".into(), sc.b_mgf, 0.0));
        }
        out
    }
}

/// Compute the full constants table for a config's design/truth instance.
pub fn assumption_audit(config: &ExperimentConfig) -> Result<AssumptionAudit> {
    let design = build_design(config, config.design.n)?;
    let truth = build_truth(config, &design)?;
    let dispersion = config.dispersion(design.n())?;
    let family = config.family.kind;
    let prior = config.prior()?;
    let cap = config.tolerances.enum_cap as u128;

    let n = design.n() as f64;
    let g = design.num_groups();
    let log_g = (g as f64).ln();
    let s0 = truth.support.len();
    let s_dagger = (config.k_dim * s0).min(g);
    let s_star = (s_dagger + s0).min(g);
    let eps_n = (s0 as f64 * log_g / n).sqrt();

    let beta0 = design.embed(&truth)?;
    let eta0 = design.matrix() * &beta0;
    let l_n = 2.0 * eta0.amax().max(1.0);
    // Fisher-weight envelopes over the predictor window.
    let mut gamma_hi = f64::NEG_INFINITY;
    let mut gamma_lo = f64::INFINITY;
    for k in 0..=2000 {
        let eta = -l_n + 2.0 * l_n * k as f64 / 2000.0;
        let w = family.fisher_weight(eta, 1.0); // (h^-1)' xi' without tau
        gamma_hi = gamma_hi.max(w);
        gamma_lo = gamma_lo.min(w);
    }
    let tau_min = dispersion.min();
    let tau_max = dispersion.max();
    let w0 = truth_fisher_weights(family, &dispersion, &eta0);
    let unit = vec![1.0; design.n()];

    let mut rows: Vec<AuditRow> = Vec::new();
    let mut push = |name: &str, value: f64, provenance: &str, constraint: &str, flagged: bool| {
        rows.push(AuditRow {
            name: name.into(),
            value,
            provenance: provenance.into(),
            constraint: constraint.into(),
            flagged,
        });
    };

    push("n", n, "experiments_io", "sample size", false);
    push("num_groups", g as f64, "experiments_io", "G", false);
    push("s0", s0 as f64, "experiments_io", "1 <= s0", s0 == 0);
    push(
        "eps_n",
        eps_n,
        "design",
        "target rate sqrt(s0 log G / n)",
        false,
    );
    push("l_n", l_n, "glm_family", "predictor window ||X b0||_inf <= L_n/2", false);
    push(
        "gamma_bar",
        gamma_hi,
        "glm_family",
        "sup_{|eta|<=L_n} (h^-1)'(eta) xi'(eta)",
        false,
    );
    push(
        "gamma_underbar",
        gamma_lo,
        "glm_family",
        "inf_{|eta|<=L_n} (h^-1)'(eta) xi'(eta); must stay positive",
        gamma_lo <= 0.0,
    );
    push("tau_min", tau_min, "glm_family", "0 < tau_-", tau_min <= 0.0);
    push("tau_max", tau_max, "glm_family", "tau_+ < inf", false);

    let env_s0 = design.sparse_row_envelope(s0)?;
    let r_n0 = eps_n / (env_s0 * (gamma_hi / tau_min).sqrt());
    push(
        "row_envelope_s0",
        env_s0,
        "design",
        "x_n(s0) <~ sqrt(s0 log G)",
        false,
    );
    push(
        "r_n0",
        r_n0,
        "prior",
        "truth-centered coefficient radius eps_n / (x_n(s0) sqrt(gamma_bar/tau_-))",
        false,
    );
    if s_dagger <= g {
        let env_dag = design.sparse_row_envelope(s_dagger)?;
        push(
            "row_envelope_s_dagger",
            env_dag,
            "design",
            "x_n(s_dagger) <~ sqrt(s0 log G)",
            false,
        );
    }

    // Compatibility and Gram constants: truth-Fisher weighted for the
    // recovery block, unit weights for the Gram-side rows.
    let phi2_tf = design.compatibility_phi2(&w0, s0, cap);
    match phi2_tf {
        Ok(v) => {
            push(
                "phi2_truth_fisher_s0",
                v,
                "design",
                "phi_2(s0) >= a9 > 0",
                v <= 0.0,
            );
            let beta_min = truth
                .support
                .groups()
                .iter()
                .enumerate()
                .map(|(k, _)| {
                    // Block norms in support order.
                    let mut off = 0;
                    for (j, &gg) in truth.support.groups().iter().enumerate() {
                        let m = design.group_sizes()[gg];
                        if j == k {
                            return truth.values.rows(off, m).norm();
                        }
                        off += m;
                    }
                    unreachable!()
                })
                .fold(f64::INFINITY, f64::min);
            push(
                "beta_min",
                beta_min,
                "experiments_io",
                "min_g ||b_g^0||_2",
                false,
            );
            push(
                "beta_min_margin",
                beta_min * v / eps_n,
                "bvm_diagnostics",
                "beta-min margin: min_g ||b_g^0|| phi_2(s0) / eps_n >= a11",
                false,
            );
            let localization = env_s0 * eps_n / v * (gamma_hi / tau_min).sqrt();
            push(
                "localization_a10",
                localization,
                "design",
                "x_n(s0) eps_n phi_2(s0)^-1 sqrt(gamma_bar/tau_-) <= a10 (small)",
                localization > 1.0,
            );
        }
        Err(_) => push(
            "phi2_truth_fisher_s0",
            f64::NAN,
            "design",
            "enumeration budget exceeded",
            true,
        ),
    }
    if let Ok(v) = design.compatibility_phi2(&unit, s0, cap) {
        push("phi2_gram_s0", v, "design", "unit-weight phi_2(s0)", v <= 0.0);
    }
    let mut phi1_rng = rand_chacha::ChaCha8Rng::seed_from_u64(config.seed ^ 0xF1);
    use rand::SeedableRng;
    match design.compatibility_phi1(&w0, s0, 64, cap, &mut phi1_rng) {
        Ok(est) => push(
            "phi1_truth_fisher_s0",
            est.value,
            "design",
            if est.heuristic {
                "phi_1(s0) >= a9 (heuristic restarts)"
            } else {
                "phi_1(s0) >= a9 (exact at s = 1)"
            },
            est.value <= 0.0,
        ),
        Err(_) => push(
            "phi1_truth_fisher_s0",
            f64::NAN,
            "design",
            "enumeration budget exceeded",
            true,
        ),
    }
    match design.sparse_gram_extremes(&w0, s_star.min(g), cap) {
        Ok((c_f, c_big)) => {
            push(
                "c_f_truth_fisher",
                c_f,
                "design",
                "0 < c_F <= eig(n^-1 F_T^0)",
                c_f <= 0.0,
            );
            push(
                "c_f_upper_truth_fisher",
                c_big,
                "design",
                "eig(n^-1 F_T^0) <= C_F",
                false,
            );
        }
        Err(_) => push(
            "c_f_truth_fisher",
            f64::NAN,
            "design",
            "enumeration budget exceeded at s_star",
            true,
        ),
    }
    match design.sparse_influence_leverage(&w0, s_star.min(g), cap) {
        Ok(out) => {
            push(
                "q_star",
                out.q_star,
                "design",
                "q_star(s_star); q_star sqrt(s_dagger log G) -> 0",
                false,
            );
            push(
                "l_star",
                out.l_star,
                "design",
                "l_star(s_star) ~ q_star^2 for bounded weights",
                false,
            );
            push(
                "leverage_ratio",
                out.ratio,
                "design",
                "l_star / q_star^2 within the weight range",
                false,
            );
            let infl = out.q_star * (s_dagger as f64 * log_g).sqrt();
            push(
                "q_star_sqrt_s_log_g",
                infl,
                "bvm_diagnostics",
                "q_star sqrt(s_dagger log G) (small)",
                infl > 1.0,
            );
        }
        Err(_) => push(
            "q_star",
            f64::NAN,
            "design",
            "enumeration budget exceeded at s_star",
            true,
        ),
    }

    // Active-block coverage constants.
    let f0_s0 = design.fisher_block(&w0, &truth.support);
    if let Ok((_, inv_sqrt)) = sym_sqrt_and_inv_sqrt(&f0_s0) {
        let xs = design.submatrix(&truth.support);
        let mut kappa: f64 = 0.0;
        for i in 0..design.n() {
            let xi = xs.row(i).transpose();
            kappa = kappa.max(w0[i].sqrt() * (&inv_sqrt * xi).norm());
        }
        push(
            "kappa_n0",
            kappa,
            "bvm_diagnostics",
            "active-block Lindeberg: kappa_n0 -> 0",
            kappa > 1.0,
        );
    }
    // Standardized residual moments: variance exactly one, third absolute
    // moment bounded.
    let mut var_err_max: f64 = 0.0;
    let mut zeta3_max: f64 = 0.0;
    for i in 0..design.n() {
        let (theta, xi1, _) = family.link(eta0[i]);
        let (_, _, b2) = family.cumulant(theta)?;
        let c = xi1 / (dispersion[i] * w0[i].sqrt());
        let var = c * c * dispersion[i] * b2;
        var_err_max = var_err_max.max((var - 1.0).abs());
        let m3 = family.centered_abs_moment3(eta0[i], dispersion[i])?;
        zeta3_max = zeta3_max.max(c.abs().powi(3) * m3);
    }
    push(
        "zeta_variance_error",
        var_err_max,
        "bvm_diagnostics",
        "Var(zeta_i^0) = 1 exactly",
        var_err_max > 1e-8,
    );
    push(
        "zeta_abs_moment3_max",
        zeta3_max,
        "bvm_diagnostics",
        "sup_i E|zeta_i^0|^3 <= K_act3",
        false,
    );

    // Score mgf constant over supports of size <= s0 (budget-friendly) and
    // the derived theorem constants.
    let b_mgf = {
        let supports: Vec<_> = design
            .supports_up_to(s0, cap)?
            .into_iter()
            .filter(|s| !s.is_empty())
            .collect();
        let mut ops = Vec::new();
        for support in &supports {
            let center = pseudo_true_center(family, &design, &dispersion, support, &truth, None)?;
            let (_, inv_sqrt) = sym_sqrt_and_inv_sqrt(&center.fisher_circ)?;
            let xs = design.submatrix(support);
            let eta_c = &xs * &center.beta_circ;
            let mut weighted = nalgebra::DMatrix::zeros(xs.ncols(), design.n());
            for i in 0..design.n() {
                let (_, xi1, _) = family.link(eta_c[i]);
                for a in 0..xs.ncols() {
                    weighted[(a, i)] = xs[(i, a)] * xi1 / dispersion[i];
                }
            }
            ops.push(inv_sqrt * weighted);
        }
        let views: Vec<ScoreOpView> = ops.iter().map(|m| ScoreOpView { m }).collect();
        estimate_b_mgf(
            family,
            &dispersion,
            &eta0,
            &views,
            (s0 as f64 * log_g).sqrt().max(1.0),
            config.seed ^ 0xB16,
        )
    };
    let kappa0 = 3.0 + 5.0f64.ln();
    let k_sc = 4.0 * (b_mgf * kappa0).sqrt();
    push(
        "b_mgf",
        b_mgf,
        "bvm_diagnostics",
        "sup log mgf(lambda)/lambda^2 over the grid window",
        false,
    );
    push(
        "k_sc",
        k_sc,
        "bvm_diagnostics",
        "K_sc = 4 sqrt(b_mgf (3 + log 5))",
        false,
    );
    push(
        "k_pr",
        config.alpha * (k_sc * k_sc / 2.0 + 1.0),
        "bvm_diagnostics",
        "K_pr = alpha (K_sc^2/2 + 1); prior penalty needs a8 > 1 + K_pr",
        false,
    );

    // Prior constants.
    let prior_audit = audit_prior_constants(
        &prior,
        &design,
        &truth,
        r_n0,
        config.tolerances.mc_draws.max(10_000),
        config.seed ^ 0xA0D17,
    )?;
    push(
        "a_pi",
        prior_audit.implied_a_pi,
        "prior",
        "pi_G(s0)/C(G,s0) >= exp(-a_pi s0 log G)",
        false,
    );
    push(
        "prior_ratio_exponent_min",
        prior_audit.ratio_exponent_min,
        "prior",
        "pi_G(s)/pi_G(s-1) = G^-x; lower exponent a3",
        false,
    );
    push(
        "prior_ratio_exponent_max",
        prior_audit.ratio_exponent_max,
        "prior",
        "pi_G(s)/pi_G(s-1) = G^-x; upper exponent a4",
        false,
    );
    let a5 = -prior_audit.small_ball_mass.ln() / (s0 as f64 * log_g);
    push(
        "a5_small_ball",
        a5,
        "prior",
        if prior_audit.small_ball_upper_only {
            "slab small-ball exponent (mass below MC resolution; upper bound)"
        } else {
            "slab small-ball exponent: Phi(||b - b0|| <= r_n0) = exp(-a5 s0 log G)"
        },
        prior_audit.small_ball_upper_only,
    );
    push(
        "a6_slab_at_zero",
        prior_audit.implied_a6,
        "prior",
        "phi_g(0) <= exp(a6 m_g)",
        false,
    );
    push(
        "slab_flatness_r_n0",
        prior_audit.flatness_by_radius[0].sup_abs_log_ratio,
        "prior",
        "sup |log phi(b)/phi(b0)| on the r_n0 sphere (b_n scale)",
        false,
    );
    push(
        "k_lb",
        prior_audit.implied_a_pi + a5 + 4.0 + 4.0 * b_mgf * kappa0,
        "bvm_diagnostics",
        "K_lb = a_pi + a5 + 4 + 4 b_mgf (3 + log 5)",
        false,
    );

    Ok(AssumptionAudit { rows })
}

/// Convenience: pack an audit into a bare report.
pub fn report_from_audit(config: &ExperimentConfig, audit: AssumptionAudit) -> DiagnosticsReport {
    DiagnosticsReport {
        config_hash: config.hash(),
        seed: config.seed,
        audit,
        renyi: None,
        recovery: None,
        coverage: None,
        tv_mixture_oracle: None,
        tv_exact_mixture: None,
        contraction: None,
        score_envelope: None,
    }
}
