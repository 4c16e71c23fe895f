//! Restricted log-likelihoods and the machinery built on them: Newton fits
//! on ellipsoid trust regions, population pseudo-true centers, normalized
//! scores, LAN remainders, and the Schur-complement projection algebra used
//! by the strict-superset comparison.
//!
//! The carrier `k(y, tau)` is dropped from every log-likelihood; it cancels
//! in all posterior ratios, so per-support log-marginals are comparable only
//! within one dataset.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::{GroupedDesign, PaddedVector, Support};
use crate::error::{Error, Result};
use crate::family::{Dispersion, GlmFamily};
use crate::num::linalg::{solve_pd, sym_sqrt_and_inv_sqrt};

/// A family/design/dispersion/response bundle restricted to one support.
///
/// `y` may be a response vector or, for population objects, the true mean
/// vector; the likelihood depends on it linearly so both share the code.
#[derive(Debug, Clone)]
pub struct RestrictedModel<'a> {
    pub family: GlmFamily,
    pub design: &'a GroupedDesign,
    pub dispersion: &'a Dispersion,
    pub support: Support,
    xs: DMatrix<f64>,
    y: DVector<f64>,
}

impl<'a> RestrictedModel<'a> {
    /// Restricted model for observed data; validates the observations.
    pub fn new(
        family: GlmFamily,
        design: &'a GroupedDesign,
        dispersion: &'a Dispersion,
        support: Support,
        y: DVector<f64>,
    ) -> Result<Self> {
        if y.len() != design.n() || dispersion.len() != design.n() {
            return Err(Error::invalid("response/dispersion length must equal n"));
        }
        for &yi in y.iter() {
            family.validate_observation(yi)?;
        }
        Ok(Self::new_unchecked(family, design, dispersion, support, y))
    }

    /// Restricted model around a population mean vector (no observation
    /// validation; the mean of a count family is not an integer).
    pub fn new_population(
        family: GlmFamily,
        design: &'a GroupedDesign,
        dispersion: &'a Dispersion,
        support: Support,
        mean: DVector<f64>,
    ) -> Result<Self> {
        if mean.len() != design.n() || dispersion.len() != design.n() {
            return Err(Error::invalid("mean/dispersion length must equal n"));
        }
        Ok(Self::new_unchecked(family, design, dispersion, support, mean))
    }

    fn new_unchecked(
        family: GlmFamily,
        design: &'a GroupedDesign,
        dispersion: &'a Dispersion,
        support: Support,
        y: DVector<f64>,
    ) -> Self {
        let xs = design.submatrix(&support);
        RestrictedModel {
            family,
            design,
            dispersion,
            support,
            xs,
            y,
        }
    }

    /// Dimension `p_S` of the restricted parameter.
    pub fn dim(&self) -> usize {
        self.xs.ncols()
    }

    pub fn response(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn design_block(&self) -> &DMatrix<f64> {
        &self.xs
    }

    /// Restricted log-likelihood (carrier dropped).
    pub fn loglik(&self, beta_s: &DVector<f64>) -> Result<f64> {
        self.check_dim(beta_s)?;
        let eta = &self.xs * beta_s;
        let mut l = 0.0;
        for i in 0..eta.len() {
            let (theta, _, _) = self.family.link(eta[i]);
            let (b, _, _) = self.family.cumulant(theta)?;
            l += (self.y[i] * theta - b) / self.dispersion[i];
        }
        Ok(l)
    }

    /// Log-likelihood, score, and observed negative Hessian `F_{n,S}`.
    ///
    /// The Hessian carries the `xi''` residual term for noncanonical
    /// families; per observation the curvature splits as
    /// `[b''(xi) xi'^2 - xi'' (y - b'(xi))] / tau`.
    pub fn loglik_grad_hess(
        &self,
        beta_s: &DVector<f64>,
    ) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        self.check_dim(beta_s)?;
        let n = self.xs.nrows();
        let d = self.dim();
        let eta = &self.xs * beta_s;
        let mut l = 0.0;
        let mut score_coef = DVector::zeros(n);
        let mut curv_coef = DVector::zeros(n);
        for i in 0..n {
            let tau = self.dispersion[i];
            let (theta, xi1, xi2) = self.family.link(eta[i]);
            let (b, b1, b2) = self.family.cumulant(theta)?;
            let resid = self.y[i] - b1;
            l += (self.y[i] * theta - b) / tau;
            score_coef[i] = xi1 * resid / tau;
            curv_coef[i] = (b2 * xi1 * xi1 - xi2 * resid) / tau;
        }
        let grad = self.xs.transpose() * &score_coef;
        let mut hess = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += curv_coef[i] * self.xs[(i, a)] * self.xs[(i, b)];
                }
                hess[(a, b)] = acc;
                hess[(b, a)] = acc;
            }
        }
        Ok((l, grad, hess))
    }

    fn check_dim(&self, beta_s: &DVector<f64>) -> Result<()> {
        if beta_s.len() != self.dim() {
            return Err(Error::invalid(format!(
                "coefficient vector has {} entries, support {} needs {}",
                beta_s.len(),
                self.support,
                self.dim()
            )));
        }
        Ok(())
    }

    /// Newton maximization of the restricted log-likelihood with Armijo
    /// backtracking, optionally constrained to an ellipsoid trust region.
    pub fn restricted_mle(
        &self,
        init: &DVector<f64>,
        trust: Option<&Ellipsoid>,
        opts: &FitOptions,
    ) -> Result<FitResult> {
        self.newton_maximize(
            |beta| self.loglik(beta),
            |beta| self.loglik_grad_hess(beta),
            init,
            trust,
            opts,
        )
    }

    /// Newton maximization of the tempered penalized objective
    /// `alpha l(beta) + log phi_S(beta)`, the exponent of the per-support
    /// tempered integrand. The returned `observed_info` is the total
    /// negative Hessian `alpha F_{n,S} + slab curvature`, i.e. the Laplace
    /// expansion matrix of the conditional posterior.
    pub fn penalized_mle(
        &self,
        prior: &crate::prior::SasPrior,
        alpha: f64,
        init: &DVector<f64>,
        opts: &FitOptions,
    ) -> Result<FitResult> {
        let support = self.support.clone();
        self.newton_maximize(
            |beta| {
                let l = self.loglik(beta)?;
                let slab = prior.log_slab_density(self.design, &support, beta)?;
                Ok(alpha * l + slab)
            },
            |beta| {
                let (l, g, h) = self.loglik_grad_hess(beta)?;
                let (sv, sg, sh) = prior.slab_value_grad_neg_hess(self.design, &support, beta)?;
                Ok((alpha * l + sv, g * alpha + sg, h * alpha + sh))
            },
            init,
            None,
            opts,
        )
    }

    fn newton_maximize(
        &self,
        value_fn: impl Fn(&DVector<f64>) -> Result<f64>,
        vgh_fn: impl Fn(&DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)>,
        init: &DVector<f64>,
        trust: Option<&Ellipsoid>,
        opts: &FitOptions,
    ) -> Result<FitResult> {
        self.check_dim(init)?;
        if self.dim() == 0 {
            return Err(Error::invalid(
                "restricted maximization rejects the degenerate empty support",
            ));
        }
        let mut beta = match trust {
            Some(e) => e.project(init).0,
            None => init.clone(),
        };
        let (mut l, mut g, mut h) = vgh_fn(&beta)?;
        let mut trace = vec![l];
        let mut boundary_hit = false;
        let mut separated = false;
        let mut converged = false;
        let mut iterations = 0;

        for iter in 0..opts.max_iter {
            iterations = iter + 1;
            if g.amax() <= opts.grad_tol * (1.0 + l.abs()) {
                converged = true;
                iterations = iter;
                break;
            }
            let dir = newton_direction(&h, &g)?;
            let slope = dir.dot(&g);
            let mut step = 1.0;
            let mut accepted = false;
            let mut beta_new = beta.clone();
            let mut l_new = l;
            let mut clipped = false;
            for _ in 0..60 {
                let cand = &beta + &dir * step;
                let (proj, was_clipped) = match trust {
                    Some(e) => e.project(&cand),
                    None => (cand, false),
                };
                match value_fn(&proj) {
                    Ok(v) if v.is_finite() && v >= l + 1e-4 * step * slope.max(0.0) - 1e-14 => {
                        beta_new = proj;
                        l_new = v;
                        clipped = was_clipped;
                        accepted = true;
                        break;
                    }
                    _ => step *= 0.5,
                }
            }
            if !accepted {
                break;
            }
            let moved = (&beta_new - &beta).amax();
            beta = beta_new;
            trace.push(l_new);
            let (l2, g2, h2) = vgh_fn(&beta)?;
            l = l2;
            g = g2;
            h = h2;
            boundary_hit = clipped;
            if beta.norm() > opts.separation_cap && g.amax() > opts.grad_tol * (1.0 + l.abs()) {
                separated = true;
                break;
            }
            if moved <= opts.param_tol {
                converged = g.amax() <= opts.grad_tol * (1.0 + l.abs()) || boundary_hit;
                break;
            }
        }
        if !converged && !separated {
            converged = g.amax() <= opts.grad_tol * (1.0 + l.abs());
        }
        // Saturated binary fits are separation in disguise: the gradient
        // vanishes numerically while the maximizer runs off to infinity.
        if matches!(self.family, GlmFamily::Logistic | GlmFamily::Probit) {
            let eta = &self.xs * &beta;
            if eta.amax() > opts.predictor_saturation {
                separated = true;
            }
        }
        Ok(FitResult {
            beta_hat: beta,
            loglik: l,
            gradient: g,
            observed_info: h,
            converged,
            iterations,
            boundary_hit,
            separated,
            loglik_trace: trace,
        })
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    // Concave families give PSD observed info; jitter rescues the
    // near-singular cases (e.g. all-zero gamma rows).
    let max_diag = h.diagonal().amax().max(1.0);
    let mut jitter = 0.0;
    for _ in 0..16 {
        let mut h_try = h.clone();
        if jitter > 0.0 {
            for i in 0..h.nrows() {
                h_try[(i, i)] += jitter;
            }
        }
        if let Ok(dir) = solve_pd(&h_try, g) {
            return Ok(dir);
        }
        jitter = if jitter == 0.0 { 1e-10 * max_diag } else { jitter * 10.0 };
    }
    Err(Error::NotPositiveDefinite { support: None })
}

/// Solver knobs; defaults favor determinism over speed.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub param_tol: f64,
    /// Coefficient norm beyond which a non-vanishing gradient is treated as
    /// perfect separation.
    pub separation_cap: f64,
    /// For binary families, fitted predictors past this magnitude mean the
    /// probabilities have saturated to 0/1; the fit is flagged separated.
    pub predictor_saturation: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 200,
            grad_tol: 1e-8,
            param_tol: 1e-10,
            separation_cap: 1e4,
            predictor_saturation: 30.0,
        }
    }
}

/// A fitted restricted maximizer.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub loglik: f64,
    pub gradient: DVector<f64>,
    /// Observed negative Hessian `F_{n,S}(beta_hat)`.
    pub observed_info: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub boundary_hit: bool,
    pub separated: bool,
    /// Accepted log-likelihood values, nondecreasing by construction.
    pub loglik_trace: Vec<f64>,
}

/// Ellipsoid trust region `{beta : ||F^(1/2)(beta - center)||_2 <= radius}`.
#[derive(Debug, Clone)]
pub struct Ellipsoid {
    pub center: DVector<f64>,
    sqrt: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    pub radius: f64,
}

impl Ellipsoid {
    /// Build from the metric matrix (symmetric p.d.) and radius.
    pub fn new(center: DVector<f64>, metric: &DMatrix<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::invalid("ellipsoid radius must be positive"));
        }
        let (sqrt, inv_sqrt) = sym_sqrt_and_inv_sqrt(metric)?;
        Ok(Ellipsoid {
            center,
            sqrt,
            inv_sqrt,
            radius,
        })
    }

    /// Radial clip in the whitened coordinates `h = F^(1/2)(beta - center)`.
    pub fn project(&self, beta: &DVector<f64>) -> (DVector<f64>, bool) {
        let h = &self.sqrt * (beta - &self.center);
        let norm = h.norm();
        if norm <= self.radius {
            (beta.clone(), false)
        } else {
            let clipped = &self.center + &self.inv_sqrt * (h * (self.radius / norm));
            (clipped, true)
        }
    }

    pub fn contains(&self, beta: &DVector<f64>) -> bool {
        (&self.sqrt * (beta - &self.center)).norm() <= self.radius * (1.0 + 1e-12)
    }
}

/// Population pseudo-true center and its Fisher matrix on a support.
#[derive(Debug, Clone)]
pub struct PopulationCenter {
    pub support: Support,
    pub beta_circ: DVector<f64>,
    pub fisher_circ: DMatrix<f64>,
}

/// Maximize the expected restricted log-likelihood under the truth.
///
/// The expected objective differs from the data objective only through the
/// linear-in-`y` term, so it is the same code run on the true mean vector.
/// For supersets of the truth support the center equals the restricted truth.
pub fn pseudo_true_center(
    family: GlmFamily,
    design: &GroupedDesign,
    dispersion: &Dispersion,
    support: &Support,
    truth: &PaddedVector,
    trust_radius: Option<f64>,
) -> Result<PopulationCenter> {
    if support.is_empty() {
        return Err(Error::invalid("pseudo-true center needs a nonempty support"));
    }
    let beta0 = design.embed(truth)?;
    let eta0 = design.matrix() * &beta0;
    let mean0 = DVector::from_iterator(eta0.len(), eta0.iter().map(|&e| family.mean(e)));
    let model = RestrictedModel::new_population(
        family,
        design,
        dispersion,
        support.clone(),
        mean0,
    )?;
    // Start from the truth restricted to S: exact for supersets, a sensible
    // warm start otherwise.
    let init = design.restrict(&beta0, support)?.values;
    let trust = match trust_radius {
        Some(r) => {
            let (_, _, h) = model.loglik_grad_hess(&init)?;
            Some(Ellipsoid::new(init.clone(), &h, r)?)
        }
        None => None,
    };
    let fit = model.restricted_mle(&init, trust.as_ref(), &FitOptions::default())?;
    if !fit.converged {
        return Err(Error::NonConvergence(format!(
            "pseudo-true center on support {support}"
        )));
    }
    // Population negative Hessian at the center is F_S^o; demand p.d.
    crate::num::linalg::cholesky(&fit.observed_info).map_err(|_| Error::NotPositiveDefinite {
        support: Some(support.clone()),
    })?;
    Ok(PopulationCenter {
        support: support.clone(),
        beta_circ: fit.beta_hat,
        fisher_circ: fit.observed_info,
    })
}

/// Fisher-whitened restricted score at the pseudo-true center:
/// `Z_S = (F_S^o)^(-1/2) grad l_{n,S}(beta_S^o)` with the symmetric root.
pub fn normalized_score(model: &RestrictedModel, center: &PopulationCenter) -> Result<DVector<f64>> {
    if center.support.is_empty() || model.support != center.support {
        return Err(Error::invalid(
            "normalized score needs a nonempty support matching the center",
        ));
    }
    let (_, grad, _) = model.loglik_grad_hess(&center.beta_circ)?;
    let (_, inv_sqrt) = sym_sqrt_and_inv_sqrt(&center.fisher_circ)?;
    Ok(inv_sqrt * grad)
}

/// Absolute LAN remainder at `beta = beta^o + (F^o)^(-1/2) h`:
/// `|l(beta) - l(beta^o) - (beta-beta^o)' grad + (beta-beta^o)' F^o (beta-beta^o)/2|`.
pub fn lan_remainder(
    model: &RestrictedModel,
    center: &PopulationCenter,
    h: &DVector<f64>,
) -> Result<f64> {
    let (_, inv_sqrt) = sym_sqrt_and_inv_sqrt(&center.fisher_circ)?;
    let delta = inv_sqrt * h;
    let beta = &center.beta_circ + &delta;
    let l = model.loglik(&beta)?;
    let (l0, g0, _) = model.loglik_grad_hess(&center.beta_circ)?;
    let quad = 0.5 * delta.dot(&(&center.fisher_circ * &delta));
    Ok((l - l0 - delta.dot(&g0) + quad).abs())
}

/// Ingredients of the Schur-complement identity for strict supersets: with
/// `F` partitioned at `p_s0` and `G = (G_0, G_-)`,
/// `G' F^{-1} G - G_0' F_00^{-1} G_0 = Gbar' Fbar^{-1} Gbar` where
/// `Gbar = G_- - F_-0 F_00^{-1} G_0` and `Fbar = F_-- - F_-0 F_00^{-1} F_0-`.
#[derive(Debug, Clone)]
pub struct SchurProjection {
    pub excess: f64,
    pub gbar: DVector<f64>,
    pub fbar: DMatrix<f64>,
}

pub fn schur_projection(
    f_s: &DMatrix<f64>,
    g_s: &DVector<f64>,
    p_s0: usize,
) -> Result<SchurProjection> {
    let p = f_s.nrows();
    if f_s.ncols() != p || g_s.len() != p || p_s0 > p {
        return Err(Error::invalid("schur projection dimensions are inconsistent"));
    }
    let d = p - p_s0;
    if d == 0 {
        return Ok(SchurProjection {
            excess: 0.0,
            gbar: DVector::zeros(0),
            fbar: DMatrix::zeros(0, 0),
        });
    }
    let f00 = f_s.view((0, 0), (p_s0, p_s0)).into_owned();
    let f0m = f_s.view((0, p_s0), (p_s0, d)).into_owned();
    let fm0 = f_s.view((p_s0, 0), (d, p_s0)).into_owned();
    let fmm = f_s.view((p_s0, p_s0), (d, d)).into_owned();
    let g0 = g_s.rows(0, p_s0).into_owned();
    let gm = g_s.rows(p_s0, d).into_owned();
    let (gbar, fbar) = if p_s0 == 0 {
        (gm, fmm)
    } else {
        let chol00 = crate::num::linalg::cholesky(&f00)?;
        let f00_inv_g0 = chol00.solve(&g0);
        let f00_inv_f0m = chol00.solve(&f0m);
        (&gm - &fm0 * f00_inv_g0, &fmm - &fm0 * f00_inv_f0m)
    };
    let fbar_inv_gbar = solve_pd(&fbar, &gbar)?;
    let excess = gbar.dot(&fbar_inv_gbar);
    Ok(SchurProjection { excess, gbar, fbar })
}

/// Ambient score `grad l_n(beta)` of the full model at an ambient vector.
pub fn ambient_score(
    family: GlmFamily,
    design: &GroupedDesign,
    dispersion: &Dispersion,
    y: &DVector<f64>,
    beta: &DVector<f64>,
) -> Result<DVector<f64>> {
    let eta = design.matrix() * beta;
    let mut coef = DVector::zeros(design.n());
    for i in 0..design.n() {
        let (theta, xi1, _) = family.link(eta[i]);
        let (_, b1, _) = family.cumulant(theta)?;
        coef[i] = xi1 * (y[i] - b1) / dispersion[i];
    }
    Ok(design.matrix().transpose() * coef)
}

/// Truth-Fisher weights `w_i^0 = b''(xi(eta_i)) xi'(eta_i)^2 / tau_i`.
pub fn truth_fisher_weights(
    family: GlmFamily,
    dispersion: &Dispersion,
    eta0: &DVector<f64>,
) -> Vec<f64> {
    (0..eta0.len())
        .map(|i| family.fisher_weight(eta0[i], dispersion[i]))
        .collect()
}

/// Serializable fit summary used in artifacts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub support: Vec<usize>,
    pub beta_hat: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub boundary_hit: bool,
    pub separated: bool,
}

impl FitSummary {
    pub fn from_fit(support: &Support, fit: &FitResult) -> Self {
        FitSummary {
            support: support.groups().to_vec(),
            beta_hat: fit.beta_hat.iter().copied().collect(),
            loglik: fit.loglik,
            converged: fit.converged,
            iterations: fit.iterations,
            boundary_hit: fit.boundary_hit,
            separated: fit.separated,
        }
    }
}
