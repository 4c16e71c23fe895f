//! The six exponential-family/link bundles: cumulant functions, links,
//! Fisher weights, exact one-observation densities, samplers, and the
//! Hellinger / Renyi divergence machinery.
//!
//! Every family is an overdispersed exponential family
//! `f(y; theta, tau) = exp{(y*theta - b(theta))/tau + k(y, tau)}` with the
//! natural parameter tied to the linear predictor through `theta = xi(eta)`.
//! For the canonical families (gaussian, logistic, poisson) `xi` is the
//! identity. Binary and count families are standard distributions only at
//! `tau = 1`, and their density/sampling paths enforce that; the cumulant,
//! link, and weight formulas accept arbitrary positive `tau` since the fit
//! layer treats dispersion as an objective weight.

use rand::Rng;
use rand_distr::{Distribution, Gamma as GammaDist, Normal, Poisson as PoissonDist};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::num::quad::{gauss_hermite_normal_adaptive, gauss_laguerre_gamma_adaptive};
use crate::num::special::{log_ndtr, LN_2PI};
use crate::num::logsumexp;

/// `log(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic sigmoid.
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One of the six GLM family/link bundles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GlmFamily {
    Gaussian,
    Logistic,
    Poisson,
    Probit,
    GammaLog,
    NegBinLog { size_r: f64 },
}

/// Per-observation dispersion vector with `0 < tau_i` enforced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dispersion(Vec<f64>);

impl Dispersion {
    pub fn new(tau: Vec<f64>) -> Result<Self> {
        if tau.is_empty() {
            return Err(Error::invalid("dispersion vector must be nonempty"));
        }
        if tau.iter().any(|t| !t.is_finite() || *t <= 0.0) {
            return Err(Error::invalid("dispersion entries must be finite and positive"));
        }
        Ok(Dispersion(tau))
    }

    pub fn constant(tau: f64, n: usize) -> Result<Self> {
        Self::new(vec![tau; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn min(&self) -> f64 {
        self.0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().cloned().fold(0.0, f64::max)
    }
}

impl std::ops::Index<usize> for Dispersion {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl GlmFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GlmFamily::Gaussian => "gaussian",
            GlmFamily::Logistic => "logistic",
            GlmFamily::Poisson => "poisson",
            GlmFamily::Probit => "probit",
            GlmFamily::GammaLog => "gamma_log",
            GlmFamily::NegBinLog { .. } => "negbin_log",
        }
    }

    /// Canonical families have the identity link, `xi(eta) = eta`.
    pub fn is_canonical(&self) -> bool {
        matches!(
            self,
            GlmFamily::Gaussian | GlmFamily::Logistic | GlmFamily::Poisson
        )
    }

    /// Binary/count families are proper distributions only at `tau = 1`.
    pub fn requires_unit_dispersion(&self) -> bool {
        !matches!(self, GlmFamily::Gaussian | GlmFamily::GammaLog)
    }

    pub fn theta_in_domain(&self, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        match self {
            GlmFamily::GammaLog | GlmFamily::NegBinLog { .. } => theta < 0.0,
            _ => true,
        }
    }

    /// Cumulant `b` and its first two derivatives at `theta`.
    pub fn cumulant(&self, theta: f64) -> Result<(f64, f64, f64)> {
        if !self.theta_in_domain(theta) {
            return Err(Error::NaturalDomain {
                family: self.name(),
                theta,
            });
        }
        Ok(match self {
            GlmFamily::Gaussian => (0.5 * theta * theta, theta, 1.0),
            GlmFamily::Logistic | GlmFamily::Probit => {
                let p = sigmoid(theta);
                (softplus(theta), p, p * (1.0 - p))
            }
            GlmFamily::Poisson => {
                let m = theta.exp();
                (m, m, m)
            }
            GlmFamily::GammaLog => (-(-theta).ln(), -1.0 / theta, 1.0 / (theta * theta)),
            GlmFamily::NegBinLog { size_r: r } => {
                // b(theta) = -r log(1 - e^theta); stable for theta < 0.
                let q = theta.exp();
                let one_minus_q = -theta.exp_m1(); // 1 - e^theta
                let b = -r * one_minus_q.ln();
                let b1 = r * q / one_minus_q;
                let b2 = r * q / (one_minus_q * one_minus_q);
                (b, b1, b2)
            }
        })
    }

    /// Link composition `xi = (b')^{-1} o h^{-1}` and its first two
    /// derivatives at `eta`. Entire in `eta` for every family.
    pub fn link(&self, eta: f64) -> (f64, f64, f64) {
        match self {
            GlmFamily::Gaussian | GlmFamily::Logistic | GlmFamily::Poisson => (eta, 1.0, 0.0),
            GlmFamily::Probit => {
                let lcdf = log_ndtr(eta);
                let lsf = log_ndtr(-eta);
                let xi = lcdf - lsf;
                // xi' = phi / (Phi * (1-Phi)); log-space to survive the tails.
                let lpdf = -0.5 * eta * eta - 0.5 * LN_2PI;
                let xi1 = (lpdf - lcdf - lsf).exp();
                // d log xi'/d eta = -eta - phi/Phi + phi/(1-Phi).
                let a = (lpdf - lcdf).exp(); // phi/Phi
                let b = (lpdf - lsf).exp(); // phi/(1-Phi)
                let xi2 = xi1 * (-eta - a + b);
                (xi, xi1, xi2)
            }
            GlmFamily::GammaLog => {
                let e = (-eta).exp();
                (-e, e, -e)
            }
            GlmFamily::NegBinLog { size_r: r } => {
                // xi = eta - log(r + e^eta) = -softplus(log r - eta) < 0.
                let u = eta - r.ln();
                let xi = -softplus(-u);
                let s = sigmoid(-u); // r / (r + e^eta)
                let xi1 = s;
                let xi2 = -s * (1.0 - s);
                (xi, xi1, xi2)
            }
        }
    }

    /// Mean response `b'(xi(eta))`.
    pub fn mean(&self, eta: f64) -> f64 {
        match self {
            GlmFamily::Gaussian => eta,
            GlmFamily::Logistic => sigmoid(eta),
            GlmFamily::Poisson | GlmFamily::GammaLog => eta.exp(),
            GlmFamily::Probit => log_ndtr(eta).exp(),
            GlmFamily::NegBinLog { .. } => eta.exp(),
        }
    }

    /// Response variance `tau * b''(xi(eta))`.
    pub fn variance(&self, eta: f64, tau: f64) -> f64 {
        let (xi, _, _) = self.link(eta);
        let (_, _, b2) = self.cumulant(xi).expect("link lands in domain");
        tau * b2
    }

    /// Fisher weight `w = b''(xi(eta)) * xi'(eta)^2 / tau`.
    pub fn fisher_weight(&self, eta: f64, tau: f64) -> f64 {
        assert!(tau > 0.0, "dispersion must be positive");
        match self {
            GlmFamily::Gaussian => 1.0 / tau,
            GlmFamily::Logistic => {
                let p = sigmoid(eta);
                p * (1.0 - p) / tau
            }
            GlmFamily::Poisson => eta.exp() / tau,
            GlmFamily::Probit => {
                // w = phi(eta)^2 / (Phi * (1 - Phi)); log-space in the tails.
                let lpdf = -0.5 * eta * eta - 0.5 * LN_2PI;
                (2.0 * lpdf - log_ndtr(eta) - log_ndtr(-eta)).exp() / tau
            }
            GlmFamily::GammaLog => 1.0 / tau,
            GlmFamily::NegBinLog { size_r: r } => {
                // r e^eta / (r + e^eta) = r * sigmoid(eta - log r).
                r * sigmoid(eta - r.ln()) / tau
            }
        }
    }

    /// Validate an observation for this family's observation space.
    pub fn validate_observation(&self, y: f64) -> Result<()> {
        let fail = |reason| {
            Err(Error::InvalidObservation {
                family: self.name(),
                y,
                reason,
            })
        };
        if !y.is_finite() {
            return fail("must be finite");
        }
        match self {
            GlmFamily::Gaussian => Ok(()),
            GlmFamily::Logistic | GlmFamily::Probit => {
                if y == 0.0 || y == 1.0 {
                    Ok(())
                } else {
                    fail("must be 0 or 1")
                }
            }
            GlmFamily::Poisson | GlmFamily::NegBinLog { .. } => {
                if y >= 0.0 && y.fract() == 0.0 {
                    Ok(())
                } else {
                    fail("must be a nonnegative integer")
                }
            }
            GlmFamily::GammaLog => {
                if y > 0.0 {
                    Ok(())
                } else {
                    fail("must be positive")
                }
            }
        }
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid(format!("dispersion {tau} must be positive")));
        }
        if self.requires_unit_dispersion() && tau != 1.0 {
            return Err(Error::invalid(format!(
                "{} is a proper distribution only at tau = 1 (got {tau})",
                self.name()
            )));
        }
        Ok(())
    }

    /// Exact log density/mass at `y`, carrier included; normalized over the
    /// observation space.
    pub fn log_density(&self, y: f64, eta: f64, tau: f64) -> Result<f64> {
        self.validate_observation(y)?;
        self.check_tau(tau)?;
        Ok(match self {
            GlmFamily::Gaussian => {
                let d = y - eta;
                -0.5 * d * d / tau - 0.5 * (LN_2PI + tau.ln())
            }
            GlmFamily::Logistic => y * eta - softplus(eta),
            GlmFamily::Probit => {
                if y == 1.0 {
                    log_ndtr(eta)
                } else {
                    log_ndtr(-eta)
                }
            }
            GlmFamily::Poisson => y * eta - eta.exp() - ln_gamma(y + 1.0),
            GlmFamily::GammaLog => {
                // Gamma with shape 1/tau and rate e^{-eta}/tau.
                let shape = 1.0 / tau;
                let rate = (-eta).exp() / tau;
                shape * rate.ln() + (shape - 1.0) * y.ln() - rate * y - ln_gamma(shape)
            }
            GlmFamily::NegBinLog { size_r: r } => {
                let (xi, _, _) = self.link(eta);
                // log(1 - e^xi) = log r - log(r + e^eta).
                let log_one_minus_q = r.ln() - (r.ln() + softplus(eta - r.ln()));
                ln_gamma(y + r) - ln_gamma(*r) - ln_gamma(y + 1.0) + y * xi + r * log_one_minus_q
            }
        })
    }

    /// Draw one observation at linear predictor `eta` and dispersion `tau`.
    pub fn sample(&self, eta: f64, tau: f64, rng: &mut impl Rng) -> Result<f64> {
        self.check_tau(tau)?;
        Ok(match self {
            GlmFamily::Gaussian => Normal::new(eta, tau.sqrt())
                .map_err(|e| Error::invalid(e.to_string()))?
                .sample(rng),
            GlmFamily::Logistic | GlmFamily::Probit => {
                let p = self.mean(eta);
                if rng.gen::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            }
            GlmFamily::Poisson => {
                let lambda = eta.exp();
                PoissonDist::new(lambda)
                    .map_err(|e| Error::invalid(e.to_string()))?
                    .sample(rng)
            }
            GlmFamily::GammaLog => {
                let shape = 1.0 / tau;
                let scale = tau * eta.exp();
                GammaDist::new(shape, scale)
                    .map_err(|e| Error::invalid(e.to_string()))?
                    .sample(rng)
            }
            GlmFamily::NegBinLog { size_r: r } => {
                // Gamma-Poisson mixture with mean e^eta and size r.
                let lambda: f64 = GammaDist::new(*r, eta.exp() / r)
                    .map_err(|e| Error::invalid(e.to_string()))?
                    .sample(rng);
                if lambda <= 0.0 {
                    0.0
                } else {
                    PoissonDist::new(lambda)
                        .map_err(|e| Error::invalid(e.to_string()))?
                        .sample(rng)
                }
            }
        })
    }

    /// One-observation Renyi gap of order `alpha`:
    /// `J_alpha = {alpha b(xi) + (1-alpha) b(xi0) - b(alpha xi + (1-alpha) xi0)} / tau`,
    /// satisfying the transform identity
    /// `integral f^alpha g^(1-alpha) dnu = exp(-J_alpha)`.
    pub fn renyi_gap(&self, alpha: f64, eta: f64, eta0: f64, tau: f64) -> Result<f64> {
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha {alpha} must lie in (0,1)")));
        }
        if eta == eta0 {
            return Ok(0.0);
        }
        let (theta, _, _) = self.link(eta);
        let (theta0, _, _) = self.link(eta0);
        let theta_mix = alpha * theta + (1.0 - alpha) * theta0;
        let (b, _, _) = self.cumulant(theta)?;
        let (b0, _, _) = self.cumulant(theta0)?;
        let (bm, _, _) = self.cumulant(theta_mix)?;
        Ok(((alpha * b + (1.0 - alpha) * b0 - bm) / tau).max(0.0))
    }

    /// Squared one-observation Hellinger distance
    /// `h^2 = 2 (1 - exp(-J_{1/2}))`, in `[0, 2]`.
    pub fn hellinger_sq(&self, eta: f64, eta0: f64, tau: f64) -> f64 {
        if eta == eta0 {
            return 0.0;
        }
        let j = self
            .renyi_gap(0.5, eta, eta0, tau)
            .expect("alpha = 1/2 is interior and the midpoint stays in domain");
        (2.0 * (-(-j).exp_m1())).clamp(0.0, 2.0)
    }

    /// Exact expectation of `g(Y)` under the family at `(eta, tau)` for
    /// integrands of at most polynomial growth.
    ///
    /// Count families are summed until the cumulative mass reaches
    /// `1 - 1e-12` (and past the bulk), continuous families use adaptive
    /// Gauss-Hermite / Gauss-Laguerre rules. No Monte Carlo noise.
    /// Exponentially growing integrands are outside the Laguerre convergence
    /// domain; use `centered_log_mgf` for moment generating functions.
    pub fn expectation(&self, eta: f64, tau: f64, g: impl Fn(f64) -> f64) -> Result<f64> {
        self.check_tau(tau)?;
        Ok(match self {
            GlmFamily::Gaussian => {
                let sd = tau.sqrt();
                gauss_hermite_normal_adaptive(|z| g(eta + sd * z), 32, 1024, 1e-13).0
            }
            GlmFamily::Logistic | GlmFamily::Probit => {
                let p = self.mean(eta);
                p * g(1.0) + (1.0 - p) * g(0.0)
            }
            GlmFamily::Poisson | GlmFamily::NegBinLog { .. } => self.count_expectation(eta, g),
            GlmFamily::GammaLog => {
                let shape = 1.0 / tau;
                let rate = (-eta).exp() / tau;
                gauss_laguerre_gamma_adaptive(g, shape, rate, 64, 4096, 1e-13).0
            }
        })
    }

    /// Tail-truncated summation for count families: stops once cumulative
    /// mass exceeds `1 - 1e-12` and the index is past the bulk of the
    /// distribution, so polynomially growing integrands keep a negligible
    /// remainder.
    fn count_expectation(&self, eta: f64, g: impl Fn(f64) -> f64) -> f64 {
        let mean = self.mean(eta);
        let sd = self.variance(eta, 1.0).sqrt();
        let past_bulk = (mean + 12.0 * sd + 30.0).ceil() as u64;
        let mut total = 0.0;
        let mut mass = 0.0;
        let mut y = 0u64;
        loop {
            let fy = y as f64;
            let p = self
                .log_density(fy, eta, 1.0)
                .expect("integer observations are valid")
                .exp();
            total += p * g(fy);
            mass += p;
            if (mass >= 1.0 - 1e-12 && y >= past_bulk) || y > 10_000_000 {
                break;
            }
            y += 1;
        }
        total
    }

    /// Centered log moment generating function `log E exp{t (Y - mu)}`.
    ///
    /// Returns `None` when `t` leaves the admissible window (Gamma and
    /// negative binomial have one-sided natural domains).
    pub fn centered_log_mgf(&self, eta: f64, tau: f64, t: f64) -> Option<f64> {
        match self {
            GlmFamily::Gaussian => Some(0.5 * tau * t * t),
            GlmFamily::Logistic | GlmFamily::Probit => {
                let p = self.mean(eta);
                let q = 1.0 - p;
                if p <= 0.0 || q <= 0.0 {
                    return Some(0.0);
                }
                Some(logsumexp(&[q.ln() - t * p, p.ln() + t * q]))
            }
            GlmFamily::Poisson => {
                let mu = eta.exp();
                Some(mu * (t.exp() - 1.0 - t))
            }
            GlmFamily::GammaLog => {
                let rate = (-eta).exp() / tau;
                if t >= rate {
                    return None;
                }
                let shape = 1.0 / tau;
                Some(-shape * (1.0 - t / rate).ln() - t * eta.exp())
            }
            GlmFamily::NegBinLog { .. } => {
                let (theta, _, _) = self.link(eta);
                if theta + t >= 0.0 {
                    return None;
                }
                let (b0, b1, _) = self.cumulant(theta).ok()?;
                let (bt, _, _) = self.cumulant(theta + t).ok()?;
                Some(bt - b0 - t * b1)
            }
        }
    }

    /// Exact third absolute central moment `E |Y - mu|^3`.
    pub fn centered_abs_moment3(&self, eta: f64, tau: f64) -> Result<f64> {
        match self {
            GlmFamily::Gaussian => Ok(tau.powf(1.5) * (8.0 / std::f64::consts::PI).sqrt()),
            GlmFamily::Logistic | GlmFamily::Probit => {
                let p = self.mean(eta);
                let q = 1.0 - p;
                Ok(p * q * (p * p + q * q))
            }
            _ => {
                let mu = self.mean(eta);
                self.expectation(eta, tau, |y| (y - mu).abs().powi(3))
            }
        }
    }
}

/// All six families, with a representative size for the negative binomial.
pub fn all_families(negbin_size: f64) -> [GlmFamily; 6] {
    [
        GlmFamily::Gaussian,
        GlmFamily::Logistic,
        GlmFamily::Poisson,
        GlmFamily::Probit,
        GlmFamily::GammaLog,
        GlmFamily::NegBinLog {
            size_r: negbin_size,
        },
    ]
}
