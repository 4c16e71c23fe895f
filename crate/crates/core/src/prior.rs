//! Dirac spike-and-slab priors on grouped supports: complexity and
//! Beta-Binomial support-size priors, group Gaussian and group Laplace slabs,
//! and the numerical audits of the prior-regularity constants and the
//! predictor-envelope sieve mass.
//!
//! Beta-Binomial masses and all binomial coefficients are evaluated in
//! log-Gamma form; `G^u` overflows naive Beta functions well inside the
//! desk-scale regime.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::design::{GroupedDesign, PaddedVector, Support};
use crate::error::{Error, Result};
use crate::num::{binomial_se, logsumexp};

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// `log C(n, k)` via log-Gamma.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Support-size prior kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SizePriorKind {
    /// `pi_G(s) proportional to c^-s G^-(A s)`.
    Complexity { c: f64, a: f64 },
    /// Beta-Binomial induced by iid Bernoulli(theta) inclusions with
    /// `theta ~ Beta(1, G^u)`.
    BetaBinomial { u: f64 },
}

/// Normalized prior on the number of active groups `s` in `0..=G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizePrior {
    pub kind: SizePriorKind,
    pub num_groups: usize,
    #[serde(skip)]
    log_masses: Vec<f64>,
}

impl SizePrior {
    pub fn new(kind: SizePriorKind, num_groups: usize) -> Result<Self> {
        if num_groups == 0 {
            return Err(Error::invalid("size prior needs G >= 1"));
        }
        match kind {
            SizePriorKind::Complexity { c, a } => {
                if !(c > 0.0 && a > 0.0) {
                    return Err(Error::invalid("complexity prior needs c > 0 and A > 0"));
                }
            }
            SizePriorKind::BetaBinomial { u } => {
                if !(u > 1.0) {
                    return Err(Error::invalid("beta-binomial prior needs u > 1"));
                }
            }
        }
        let g = num_groups;
        let raw: Vec<f64> = match kind {
            SizePriorKind::Complexity { c, a } => {
                let step = c.ln() + a * (g as f64).ln();
                (0..=g).map(|s| -(s as f64) * step).collect()
            }
            SizePriorKind::BetaBinomial { u } => {
                // pi(s) = C(G,s) B(s+1, G^u + G - s) / B(1, G^u).
                let gu = (g as f64).powf(u);
                (0..=g)
                    .map(|s| {
                        ln_choose(g, s) + ln_gamma(s as f64 + 1.0)
                            + ln_gamma(gu + (g - s) as f64)
                            - ln_gamma(gu + g as f64 + 1.0)
                            + gu.ln()
                    })
                    .collect()
            }
        };
        let norm = logsumexp(&raw);
        let log_masses = raw.iter().map(|v| v - norm).collect();
        Ok(SizePrior {
            kind,
            num_groups,
            log_masses,
        })
    }

    /// `log pi_G(s)` for `0 <= s <= G`.
    pub fn log_mass(&self, s: usize) -> f64 {
        if s > self.num_groups {
            f64::NEG_INFINITY
        } else {
            self.log_masses[s]
        }
    }

    /// Draw a size from the prior by inverse CDF.
    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (s, lm) in self.log_masses.iter().enumerate() {
            acc += lm.exp();
            if u <= acc {
                return s;
            }
        }
        self.num_groups
    }
}

/// Factorized group slab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Slab {
    /// `phi_g = N(0, sigma2 I_{m_g})`.
    GroupGaussian { sigma2: f64 },
    /// `phi_g(b) = c_{m_g,lambda} exp(-lambda ||b||_2)`; the radial law is
    /// Gamma(m_g, lambda).
    GroupLaplace { lambda: f64 },
}

impl Slab {
    pub fn validate(&self) -> Result<()> {
        match self {
            Slab::GroupGaussian { sigma2 } if *sigma2 > 0.0 => Ok(()),
            Slab::GroupLaplace { lambda } if *lambda > 0.0 => Ok(()),
            _ => Err(Error::invalid("slab scale must be positive")),
        }
    }

    /// Log normalizer of one group block of dimension `m`.
    fn log_block_normalizer(&self, m: usize) -> f64 {
        let mf = m as f64;
        match self {
            Slab::GroupGaussian { sigma2 } => {
                -0.5 * mf * (crate::num::special::LN_2PI + sigma2.ln())
            }
            Slab::GroupLaplace { lambda } => {
                // c_{m,lambda} = lambda^m Gamma(m/2) / (Gamma(m) 2 pi^(m/2)).
                mf * lambda.ln() + ln_gamma(mf / 2.0)
                    - ln_gamma(mf)
                    - std::f64::consts::LN_2
                    - 0.5 * mf * LN_PI
            }
        }
    }

    /// Log density of one group block.
    pub fn log_block_density(&self, block: &[f64]) -> f64 {
        let norm_sq: f64 = block.iter().map(|b| b * b).sum();
        match self {
            Slab::GroupGaussian { sigma2 } => {
                self.log_block_normalizer(block.len()) - 0.5 * norm_sq / sigma2
            }
            Slab::GroupLaplace { lambda } => {
                self.log_block_normalizer(block.len()) - lambda * norm_sq.sqrt()
            }
        }
    }

    /// `log phi_g(0)` for a block of dimension `m`.
    pub fn log_density_at_zero(&self, m: usize) -> f64 {
        self.log_block_normalizer(m)
    }

    /// Gradient and negative Hessian of `log phi_g` at a block.
    ///
    /// The group-Laplace radius is floored at 1e-8 so the curvature stays
    /// finite through the origin.
    pub fn block_grad_neg_hess(&self, block: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let m = block.len();
        match self {
            Slab::GroupGaussian { sigma2 } => {
                let grad = block.iter().map(|b| -b / sigma2).collect();
                (grad, DMatrix::identity(m, m) / *sigma2)
            }
            Slab::GroupLaplace { lambda } => {
                let r = block
                    .iter()
                    .map(|b| b * b)
                    .sum::<f64>()
                    .sqrt()
                    .max(1e-8);
                let grad = block.iter().map(|b| -lambda * b / r).collect();
                let mut neg_hess = DMatrix::identity(m, m) * (lambda / r);
                for i in 0..m {
                    for j in 0..m {
                        neg_hess[(i, j)] -= lambda * block[i] * block[j] / (r * r * r);
                    }
                }
                (grad, neg_hess)
            }
        }
    }

    /// Draw one group block of dimension `m`.
    pub fn sample_block(&self, m: usize, rng: &mut impl Rng) -> Vec<f64> {
        match self {
            Slab::GroupGaussian { sigma2 } => {
                let sd = sigma2.sqrt();
                (0..m)
                    .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            }
            Slab::GroupLaplace { lambda } => {
                // Uniform direction times a Gamma(m, lambda) radius.
                let dir: Vec<f64> = (0..m)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
                let radius = GammaDist::new(m as f64, 1.0 / lambda)
                    .expect("valid gamma parameters")
                    .sample(rng);
                dir.iter().map(|d| d / norm * radius).collect()
            }
        }
    }
}

/// The joint spike-and-slab prior on `(S, beta_S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SasPrior {
    pub size: SizePrior,
    pub slab: Slab,
}

impl SasPrior {
    pub fn new(size: SizePrior, slab: Slab) -> Result<Self> {
        slab.validate()?;
        Ok(SasPrior { size, slab })
    }

    /// Log slab density `log phi_S(beta_S)` on a support.
    pub fn log_slab_density(
        &self,
        design: &GroupedDesign,
        support: &Support,
        beta_s: &DVector<f64>,
    ) -> Result<f64> {
        if beta_s.len() != design.support_dim(support) {
            return Err(Error::invalid("slab evaluated with mismatched block dims"));
        }
        let mut out = 0.0;
        let mut off = 0;
        for &g in support.groups() {
            let m = design.group_sizes()[g];
            out += self.slab.log_block_density(&beta_s.as_slice()[off..off + m]);
            off += m;
        }
        Ok(out)
    }

    /// Draw `beta_S` from the slab on a support.
    pub fn sample_slab(
        &self,
        design: &GroupedDesign,
        support: &Support,
        rng: &mut impl Rng,
    ) -> DVector<f64> {
        let mut out = Vec::with_capacity(design.support_dim(support));
        for &g in support.groups() {
            out.extend(self.slab.sample_block(design.group_sizes()[g], rng));
        }
        DVector::from_vec(out)
    }

    /// Slab log density, gradient, and negative Hessian on a support, summed
    /// over the group blocks.
    pub fn slab_value_grad_neg_hess(
        &self,
        design: &GroupedDesign,
        support: &Support,
        beta_s: &DVector<f64>,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        if beta_s.len() != design.support_dim(support) {
            return Err(Error::invalid("slab evaluated with mismatched block dims"));
        }
        let d = beta_s.len();
        let mut value = 0.0;
        let mut grad = DVector::zeros(d);
        let mut neg_hess = DMatrix::zeros(d, d);
        let mut off = 0;
        for &g in support.groups() {
            let m = design.group_sizes()[g];
            let block = &beta_s.as_slice()[off..off + m];
            value += self.slab.log_block_density(block);
            let (bg, bh) = self.slab.block_grad_neg_hess(block);
            for i in 0..m {
                grad[off + i] = bg[i];
                for j in 0..m {
                    neg_hess[(off + i, off + j)] = bh[(i, j)];
                }
            }
            off += m;
        }
        Ok((value, grad, neg_hess))
    }

    /// Joint log prior `log [pi_G(s)/C(G,s)] + log phi_S(beta_S)`.
    pub fn log_joint(
        &self,
        design: &GroupedDesign,
        support: &Support,
        beta_s: &DVector<f64>,
    ) -> Result<f64> {
        Ok(self.log_support_mass(support) + self.log_slab_density(design, support, beta_s)?)
    }

    /// `log [pi_G(|S|) / C(G,|S|)]`, the prior mass of a specific support.
    pub fn log_support_mass(&self, support: &Support) -> f64 {
        let s = support.len();
        self.size.log_mass(s) - ln_choose(self.size.num_groups, s)
    }

    /// Draw `(S, beta)` from the joint prior; returns the padded vector.
    pub fn sample_joint(&self, design: &GroupedDesign, rng: &mut impl Rng) -> Result<PaddedVector> {
        let s = self.size.sample(rng);
        let g = design.num_groups();
        let mut groups: Vec<usize> = (0..g).collect();
        for k in 0..s {
            let j = rng.gen_range(k..g);
            groups.swap(k, j);
        }
        let support = Support::new(groups[..s].to_vec())?;
        let values = self.sample_slab(design, &support, rng);
        Ok(PaddedVector::new(support, values))
    }
}

/// Instance-level report of the prior-regularity constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorAudit {
    /// Exact `log [pi_G(s0)/C(G,s0)]`.
    pub log_true_support_mass: f64,
    /// `a_pi` implied by `pi_G(s0)/C(G,s0) = exp(-a_pi s0 log G)`.
    pub implied_a_pi: f64,
    /// Fitted exponents of `pi_G(s)/pi_G(s-1) = G^-x(s)` over all s; the
    /// upper/lower ratio-bound exponents of the recursive condition.
    pub ratio_exponent_min: f64,
    pub ratio_exponent_max: f64,
    /// Monte Carlo slab mass of the truth-centered coefficient ball of
    /// radius `r_n0`, with its standard error.
    pub small_ball_mass: f64,
    pub small_ball_se: f64,
    /// Set when no MC hits landed in the ball; the mass is then reported
    /// only as the upper bound `3/mc`.
    pub small_ball_upper_only: bool,
    /// Sampled slab-flatness sup `|log phi_S(beta)/phi_S(beta0)|` on
    /// truth-centered spheres of increasing radius (multiples of `r_n0`).
    pub flatness_by_radius: Vec<FlatnessRow>,
    /// `a_6` implied by `phi_g(0) <= exp(a_6 m_g)` across groups.
    pub implied_a6: f64,
    /// Seed used for the MC parts.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlatnessRow {
    pub radius: f64,
    pub sup_abs_log_ratio: f64,
}

/// Audit the Assumption-3 style constants on a concrete instance.
///
/// All constants are reported as fitted/implied values with no pass/fail
/// semantics; margins belong to the caller.
pub fn audit_prior_constants(
    prior: &SasPrior,
    design: &GroupedDesign,
    truth: &PaddedVector,
    r_n0: f64,
    mc: usize,
    seed: u64,
) -> Result<PriorAudit> {
    use rand::SeedableRng;
    if truth.support.is_empty() {
        return Err(Error::invalid("audit needs a nonempty truth support"));
    }
    let g = design.num_groups();
    let s0 = truth.support.len();
    let log_g = (g as f64).ln();
    let log_true_support_mass = prior.log_support_mass(&truth.support);
    let implied_a_pi = -log_true_support_mass / (s0 as f64 * log_g);

    let mut ratio_exponent_min = f64::INFINITY;
    let mut ratio_exponent_max = f64::NEG_INFINITY;
    for s in 1..=g {
        let x = -(prior.size.log_mass(s) - prior.size.log_mass(s - 1)) / log_g;
        ratio_exponent_min = ratio_exponent_min.min(x);
        ratio_exponent_max = ratio_exponent_max.max(x);
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let dim = design.support_dim(&truth.support);
    let mut hits = 0usize;
    for _ in 0..mc {
        let draw = prior.sample_slab(design, &truth.support, &mut rng);
        if (&draw - &truth.values).norm() <= r_n0 {
            hits += 1;
        }
    }
    let small_ball_upper_only = hits == 0;
    let small_ball_mass = if small_ball_upper_only {
        3.0 / mc as f64
    } else {
        hits as f64 / mc as f64
    };
    let small_ball_se = binomial_se(hits, mc);

    // Flatness on truth-centered spheres; directions shared across radii so
    // the sampled sup inherits the monotonicity of the exact sup.
    let log_at_truth = prior.log_slab_density(design, &truth.support, &truth.values)?;
    let dirs: Vec<DVector<f64>> = (0..512.min(mc.max(64)))
        .map(|_| {
            let v = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let n = v.norm();
            v / n
        })
        .collect();
    let mut flatness_by_radius = Vec::new();
    for mult in [1.0, 2.0, 4.0, 8.0] {
        let radius = mult * r_n0;
        let mut sup: f64 = 0.0;
        for u in &dirs {
            let beta = &truth.values + u * radius;
            let lr = prior.log_slab_density(design, &truth.support, &beta)? - log_at_truth;
            sup = sup.max(lr.abs());
        }
        flatness_by_radius.push(FlatnessRow {
            radius,
            sup_abs_log_ratio: sup,
        });
    }

    let implied_a6 = (0..g)
        .map(|gi| {
            let m = design.group_sizes()[gi];
            prior.slab.log_density_at_zero(m) / m as f64
        })
        .fold(f64::NEG_INFINITY, f64::max);

    Ok(PriorAudit {
        log_true_support_mass,
        implied_a_pi,
        ratio_exponent_min,
        ratio_exponent_max,
        small_ball_mass,
        small_ball_se,
        small_ball_upper_only,
        flatness_by_radius,
        implied_a6,
        seed,
    })
}

/// Monte Carlo estimate of the prior sieve-violation mass together with the
/// closed tail bound for the configured slab.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SieveMass {
    pub estimate: f64,
    pub se: f64,
    /// Closed-form tail bound built from the slab's radial law.
    pub closed_bound: f64,
    pub seed: u64,
}

/// Prior mass of `{s_beta <= floor(C0 s0), ||X beta||_inf > L_n}` by Monte
/// Carlo, compared against the closed slab-tail bound.
pub fn sieve_mass(
    prior: &SasPrior,
    design: &GroupedDesign,
    c0: f64,
    s0: usize,
    l_n: f64,
    mc: usize,
    seed: u64,
) -> Result<SieveMass> {
    use rand::SeedableRng;
    if mc < 10_000 {
        return Err(Error::invalid("sieve_mass needs mc >= 10^4"));
    }
    let budget = ((c0 * s0 as f64).floor() as usize).min(design.num_groups());
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..mc {
        let draw = prior.sample_joint(design, &mut rng)?;
        if draw.support.is_empty() || draw.support.len() > budget {
            continue;
        }
        let xs = design.submatrix(&draw.support);
        let pred = xs * &draw.values;
        if pred.amax() > l_n {
            hits += 1;
        }
    }
    let estimate = hits as f64 / mc as f64;
    let se = binomial_se(hits, mc);

    // Closed bound: ||X_S b||_inf <= envelope(budget) ||b||_2 (and <= the
    // 2,1-norm for the Laplace slab), then the radial tail of the slab.
    let envelope = design.sparse_row_envelope(budget.max(1))?;
    let t_n = l_n / envelope;
    let mut sizes_desc: Vec<usize> = design.group_sizes().to_vec();
    sizes_desc.sort_unstable_by(|a, b| b.cmp(a));
    let mut closed_bound = 0.0;
    for s in 1..=budget {
        let p_max: usize = sizes_desc.iter().take(s).sum();
        let tail = match prior.slab {
            Slab::GroupGaussian { sigma2 } => {
                // Chernoff chi-square tail: P(chi^2_p >= x) <= (x/p)^(p/2) e^((p-x)/2).
                let x = t_n * t_n / sigma2;
                let p = p_max as f64;
                if x > p {
                    (0.5 * p * (x / p).ln() + 0.5 * (p - x)).exp()
                } else {
                    1.0
                }
            }
            Slab::GroupLaplace { lambda } => {
                // ||b||_{2,1} ~ Gamma(p_S, lambda); Chernoff at lambda/2.
                (-0.5 * lambda * t_n + p_max as f64 * std::f64::consts::LN_2).exp()
            }
        };
        closed_bound += prior.size.log_mass(s).exp() * tail.min(1.0);
    }
    Ok(SieveMass {
        estimate,
        se,
        closed_bound: closed_bound.min(1.0),
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::num::quad::{gauss_hermite, gauss_laguerre_gamma_adaptive};
    use crate::num::special::LN_2PI;

    fn complexity(c: f64, a: f64, g: usize) -> SizePrior {
        SizePrior::new(SizePriorKind::Complexity { c, a }, g).unwrap()
    }

    fn beta_binomial(u: f64, g: usize) -> SizePrior {
        SizePrior::new(SizePriorKind::BetaBinomial { u }, g).unwrap()
    }

    #[test]
    fn size_priors_normalize() {
        for prior in [
            complexity(1.0, 2.0, 25),
            complexity(0.5, 1.5, 100),
            beta_binomial(2.0, 25),
            beta_binomial(1.5, 200),
        ] {
            let total: f64 = (0..=prior.num_groups)
                .map(|s| prior.log_mass(s).exp())
                .sum();
            assert!((total - 1.0).abs() <= 1e-12, "total {total}");
        }
    }

    #[test]
    fn complexity_ratio_identity_is_exact() {
        let (c, a, g) = (0.7, 2.3, 40);
        let prior = complexity(c, a, g);
        let expected = -(c.ln() + a * (g as f64).ln());
        for s in 1..=g {
            assert_relative_eq!(
                prior.log_mass(s) - prior.log_mass(s - 1),
                expected,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn complexity_mass_concentrates_at_zero_for_large_penalty() {
        let prior = complexity(1.0, 50.0, 10);
        assert!(prior.log_mass(0).exp() > 1.0 - 1e-12);
    }

    #[test]
    fn beta_binomial_ratio_matches_quadrature_oracle() {
        // pi(1)/pi(0) = G E[theta (1-theta)^(G-1)] / E[(1-theta)^G] under
        // theta ~ Beta(1, G^u); oracle by adaptive Simpson on [0, 1].
        let (u, g) = (2.0, 10usize);
        let prior = beta_binomial(u, g);
        let gu = (g as f64).powf(u);
        let density = |t: f64| gu * (1.0 - t).powf(gu - 1.0);
        let simpson = |f: &dyn Fn(f64) -> f64| {
            let m = 200_000;
            let h = 1.0 / m as f64;
            let mut acc = 0.0;
            for k in 0..m {
                let a = k as f64 * h;
                acc += h / 6.0 * (f(a) + 4.0 * f(a + 0.5 * h) + f(a + h));
            }
            acc
        };
        let num = simpson(&|t| g as f64 * t * (1.0 - t).powi(g as i32 - 1) * density(t));
        let den = simpson(&|t| (1.0 - t).powi(g as i32) * density(t));
        let oracle = (num / den).ln();
        assert_relative_eq!(
            prior.log_mass(1) - prior.log_mass(0),
            oracle,
            max_relative = 1e-6
        );
    }

    #[test]
    fn beta_binomial_ratios_sit_in_the_stated_band() {
        for g in [50usize, 200] {
            let u = 2.0;
            let prior = beta_binomial(u, g);
            let gf = g as f64;
            for s in 1..=5 {
                let ratio = (prior.log_mass(s) - prior.log_mass(s - 1)).exp();
                assert!(ratio >= 0.5 * gf.powf(-u), "G={g} s={s} ratio {ratio}");
                assert!(ratio <= gf.powf(-(u - 1.0)), "G={g} s={s} ratio {ratio}");
            }
        }
    }

    #[test]
    fn slab_point_values() {
        let gauss = Slab::GroupGaussian { sigma2: 1.0 };
        assert_relative_eq!(gauss.log_block_density(&[0.0]), -0.5 * LN_2PI, epsilon = 1e-12);
        let laplace = Slab::GroupLaplace { lambda: 1.0 };
        assert_relative_eq!(laplace.log_block_density(&[0.0]), 0.5f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn laplace_slab_normalizes_by_radial_quadrature_and_mc() {
        // m = 3, lambda = 2: integral over R^3 reduces to the radial Gamma
        // law; surface(S^2) = 4 pi.
        let (m, lambda) = (3usize, 2.0);
        let slab = Slab::GroupLaplace { lambda };
        let log_c = slab.log_density_at_zero(m);
        let surface = 4.0 * std::f64::consts::PI;
        // integral = c * surface * int r^2 e^(-lambda r) dr; fold into a
        // Gamma(3, lambda) expectation of a constant.
        let (radial, _) = gauss_laguerre_gamma_adaptive(
            |_| 1.0,
            m as f64,
            lambda,
            64,
            1024,
            1e-12,
        );
        let gamma_norm = ln_gamma(m as f64) - (m as f64) * lambda.ln();
        let total = log_c.exp() * surface * radial * gamma_norm.exp();
        assert!((total - 1.0).abs() <= 1e-6, "radial integral {total}");

        // MC: radius moments match Gamma(3, 2).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mean_r: f64 = (0..n)
            .map(|_| {
                let b = slab.sample_block(m, &mut rng);
                b.iter().map(|x| x * x).sum::<f64>().sqrt()
            })
            .sum::<f64>()
            / n as f64;
        let target = m as f64 / lambda;
        let se = (m as f64 / (lambda * lambda) / n as f64).sqrt();
        assert!((mean_r - target).abs() <= 4.0 * se, "{mean_r} vs {target}");
    }

    fn tiny_design(g: usize) -> GroupedDesign {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(6, g, |_, _| rng.gen_range(-1.0..1.0));
        GroupedDesign::new(x, vec![1; g]).unwrap()
    }

    #[test]
    fn joint_prior_integrates_to_one_by_enumeration_and_quadrature() {
        // G = 3 singleton groups, gaussian slab: per-support Gauss-Hermite
        // tensor integration of exp(log_joint) summed over all supports.
        let design = tiny_design(3);
        let prior = SasPrior::new(
            complexity(1.0, 1.2, 3),
            Slab::GroupGaussian { sigma2: 0.8 },
        )
        .unwrap();
        let rule = gauss_hermite(40);
        let sigma = 0.8f64.sqrt();
        let mut total = 0.0;
        for support in design.supports_up_to(3, 1000).unwrap() {
            let d = support.len();
            // Tensor GH against N(0, sigma^2) per coordinate.
            let mut acc = 0.0;
            let mut idx = vec![0usize; d];
            loop {
                let mut point = DVector::zeros(d);
                let mut weight = 1.0;
                for (k, &i) in idx.iter().enumerate() {
                    point[k] = 2.0f64.sqrt() * sigma * rule.nodes[i];
                    weight *= rule.weights[i] / std::f64::consts::PI.sqrt();
                }
                let lj = prior.log_joint(&design, &support, &point).unwrap();
                // Divide by the reference gaussian density used for GH.
                let mut log_ref = 0.0;
                for k in 0..d {
                    log_ref += -0.5 * (point[k] / sigma).powi(2) - 0.5 * LN_2PI - sigma.ln();
                }
                acc += weight * (lj - log_ref).exp();
                // Advance the tensor index.
                let mut carry = true;
                for slot in idx.iter_mut() {
                    *slot += 1;
                    if *slot < rule.nodes.len() {
                        carry = false;
                        break;
                    }
                    *slot = 0;
                }
                if carry || d == 0 {
                    break;
                }
            }
            total += acc;
        }
        assert!((total - 1.0).abs() <= 1e-8, "joint mass {total}");
    }

    #[test]
    fn slab_factorizes_over_groups() {
        let design = GroupedDesign::new(DMatrix::zeros(2, 5), vec![2, 3]).unwrap();
        let prior = SasPrior::new(
            complexity(1.0, 1.0, 2),
            Slab::GroupLaplace { lambda: 1.3 },
        )
        .unwrap();
        let support = Support::new(vec![0, 1]).unwrap();
        let beta = DVector::from_vec(vec![0.4, -0.2, 1.0, 0.5, -0.7]);
        let joint = prior.log_slab_density(&design, &support, &beta).unwrap();
        let block0 = prior.slab.log_block_density(&[0.4, -0.2]);
        let block1 = prior.slab.log_block_density(&[1.0, 0.5, -0.7]);
        assert_relative_eq!(joint, block0 + block1, epsilon = 1e-12);
    }

    #[test]
    fn joint_prior_of_empty_support_is_size_mass() {
        let design = tiny_design(3);
        let prior =
            SasPrior::new(complexity(1.0, 1.0, 3), Slab::GroupGaussian { sigma2: 1.0 }).unwrap();
        let lj = prior
            .log_joint(&design, &Support::empty(), &DVector::zeros(0))
            .unwrap();
        assert_relative_eq!(lj, prior.size.log_mass(0), epsilon = 1e-12);
    }

    #[test]
    fn audit_complexity_exponents_are_exact() {
        let (c, a, g) = (2.0, 3.0, 20usize);
        let design = tiny_design(g);
        let prior =
            SasPrior::new(complexity(c, a, g), Slab::GroupGaussian { sigma2: 1.0 }).unwrap();
        let truth = PaddedVector::new(
            Support::new(vec![0, 1]).unwrap(),
            DVector::from_vec(vec![1.0, -1.0]),
        );
        let audit = audit_prior_constants(&prior, &design, &truth, 0.1, 10_000, 7).unwrap();
        let expected = a + c.ln() / (g as f64).ln();
        assert_relative_eq!(audit.ratio_exponent_min, expected, epsilon = 1e-10);
        assert_relative_eq!(audit.ratio_exponent_max, expected, epsilon = 1e-10);
    }

    #[test]
    fn audit_small_ball_near_one_for_huge_radius() {
        let design = tiny_design(4);
        let prior =
            SasPrior::new(complexity(1.0, 1.0, 4), Slab::GroupGaussian { sigma2: 1.0 }).unwrap();
        let truth = PaddedVector::new(Support::new(vec![1]).unwrap(), DVector::zeros(1));
        let audit = audit_prior_constants(&prior, &design, &truth, 100.0, 5_000, 3).unwrap();
        assert!(audit.small_ball_mass > 0.999);
        assert!(!audit.small_ball_upper_only);
    }

    #[test]
    fn audit_small_ball_matches_laplace_cdf() {
        // m = 1 Laplace slab centered at 0: ball mass = 1 - exp(-lambda r).
        let lambda = 1.5;
        let r = 0.8;
        let design = tiny_design(3);
        let prior =
            SasPrior::new(complexity(1.0, 1.0, 3), Slab::GroupLaplace { lambda }).unwrap();
        let truth = PaddedVector::new(Support::new(vec![0]).unwrap(), DVector::zeros(1));
        let mc = 200_000;
        let audit = audit_prior_constants(&prior, &design, &truth, r, mc, 11).unwrap();
        let exact = 1.0 - (-lambda * r).exp();
        assert!(
            (audit.small_ball_mass - exact).abs() <= 3.0 * audit.small_ball_se.max(1e-4),
            "{} vs {exact}",
            audit.small_ball_mass
        );
    }

    #[test]
    fn audit_flatness_is_monotone_in_radius() {
        let design = tiny_design(4);
        let prior =
            SasPrior::new(complexity(1.0, 1.0, 4), Slab::GroupGaussian { sigma2: 2.0 }).unwrap();
        let truth = PaddedVector::new(
            Support::new(vec![0, 2]).unwrap(),
            DVector::from_vec(vec![0.7, -0.4]),
        );
        let audit = audit_prior_constants(&prior, &design, &truth, 0.05, 2_000, 13).unwrap();
        for w in audit.flatness_by_radius.windows(2) {
            assert!(w[1].sup_abs_log_ratio >= w[0].sup_abs_log_ratio - 1e-12);
        }
    }

    #[test]
    fn sieve_mass_limits() {
        let design = tiny_design(4);
        let prior =
            SasPrior::new(complexity(1.0, 1.0, 4), Slab::GroupGaussian { sigma2: 1.0 }).unwrap();
        // L_n = 0: everything sparse and nonnull violates the envelope.
        let at_zero = sieve_mass(&prior, &design, 2.0, 1, 0.0, 20_000, 1).unwrap();
        let mut non_null_sparse = 0.0;
        for s in 1..=2 {
            non_null_sparse += prior.size.log_mass(s).exp();
        }
        assert!(
            (at_zero.estimate - non_null_sparse).abs() <= 4.0 * at_zero.se.max(1e-3),
            "{} vs {non_null_sparse}",
            at_zero.estimate
        );
        // Huge L_n: nothing violates it.
        let at_inf = sieve_mass(&prior, &design, 2.0, 1, 1e6, 20_000, 2).unwrap();
        assert_eq!(at_inf.estimate, 0.0);
        assert!(at_inf.closed_bound <= 1e-6);
    }

    #[test]
    fn sieve_mass_matches_univariate_gaussian_tail() {
        // Single group, m = 1: the event is |b| * colmax > L under the
        // size-1 draw, so the mass is pi(1) * 2 (1 - Phi(L / (sigma colmax))).
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = DMatrix::from_fn(8, 1, |_, _| rng.gen_range(-1.0..1.0));
        let design = GroupedDesign::new(x, vec![1]).unwrap();
        let sigma2 = 1.0;
        let prior =
            SasPrior::new(complexity(1.0, 1.0, 1), Slab::GroupGaussian { sigma2 }).unwrap();
        let colmax = (0..8)
            .map(|i| design.matrix()[(i, 0)].abs())
            .fold(0.0f64, f64::max);
        let l_n = 1.2;
        let out = sieve_mass(&prior, &design, 1.0, 1, l_n, 400_000, 3).unwrap();
        let tail = 2.0 * (1.0 - crate::num::special::norm_cdf(l_n / colmax));
        let expected = prior.size.log_mass(1).exp() * tail;
        assert!(
            (out.estimate - expected).abs() <= 4.0 * out.se,
            "{} vs {expected}",
            out.estimate
        );
        // The MC estimate must not exceed the closed bound by noise.
        assert!(out.estimate <= out.closed_bound + 3.0 * out.se);
    }

    #[test]
    fn sieve_mass_rejects_small_mc() {
        let design = tiny_design(3);
        let prior =
            SasPrior::new(complexity(1.0, 1.0, 3), Slab::GroupGaussian { sigma2: 1.0 }).unwrap();
        assert!(sieve_mass(&prior, &design, 2.0, 1, 1.0, 100, 1).is_err());
    }

    #[test]
    fn joint_sampler_respects_size_distribution() {
        let design = tiny_design(4);
        let prior =
            SasPrior::new(beta_binomial(2.0, 4), Slab::GroupGaussian { sigma2: 1.0 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 100_000;
        let mut counts = vec![0usize; 5];
        for _ in 0..n {
            let draw = prior.sample_joint(&design, &mut rng).unwrap();
            counts[draw.support.len()] += 1;
        }
        for s in 0..=4 {
            let p = prior.size.log_mass(s).exp();
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let observed = counts[s] as f64 / n as f64;
            assert!(
                (observed - p).abs() <= 4.0 * se + 1e-4,
                "s={s}: {observed} vs {p}"
            );
        }
    }
}
