//! Renyi separation of underfitted supports: per-support minimization of the
//! design-level tempered divergence
//! `R(S) = n^-1 inf_b sum_i J_alpha(x_{i,S}' b, eta_i^0)` over all supports
//! that miss part of the truth, plus the summability report that feeds the
//! underfitted-exclusion condition.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{GroupedDesign, PaddedVector, Support};
use crate::error::Result;
use crate::family::{Dispersion, GlmFamily};
use crate::num::optim::bfgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenyiMethod {
    /// Multi-start BFGS minimization.
    Bfgs,
    /// Dense grid fallback (1-d supports that failed to converge).
    Grid,
    /// No free parameters (the empty support).
    Degenerate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenyiRow {
    pub support: Vec<usize>,
    pub p_s: usize,
    pub r_value: f64,
    pub method: RenyiMethod,
    pub converged: bool,
}

/// The table of separation gaps together with the summability statistic
/// `sum_S exp{-n R(S) + C_R p_S + C_R (s_0 + |S|) log G}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RenyiTable {
    pub alpha: f64,
    pub n: usize,
    pub c_r: f64,
    pub rows: Vec<RenyiRow>,
    pub summability: f64,
}

struct GapObjective<'a> {
    family: GlmFamily,
    xs: &'a DMatrix<f64>,
    eta0: &'a DVector<f64>,
    tau: &'a Dispersion,
    alpha: f64,
}

impl GapObjective<'_> {
    /// Sum of one-observation gaps and its gradient in `beta_S`.
    fn value_grad(&self, beta: &DVector<f64>) -> (f64, DVector<f64>) {
        let n = self.xs.nrows();
        let d = beta.len();
        let eta = self.xs * beta;
        let mut total = 0.0;
        let mut coef = DVector::zeros(n);
        for i in 0..n {
            let t = self.tau[i];
            let (theta, xi1, _) = self.family.link(eta[i]);
            let (theta0, _, _) = self.family.link(self.eta0[i]);
            let theta_mix = self.alpha * theta + (1.0 - self.alpha) * theta0;
            let (b, b1, _) = match self.family.cumulant(theta) {
                Ok(v) => v,
                Err(_) => return (f64::INFINITY, DVector::zeros(d)),
            };
            let (b0, _, _) = self.family.cumulant(theta0).expect("truth in domain");
            let (bm, bm1, _) = match self.family.cumulant(theta_mix) {
                Ok(v) => v,
                Err(_) => return (f64::INFINITY, DVector::zeros(d)),
            };
            total += (self.alpha * b + (1.0 - self.alpha) * b0 - bm) / t;
            coef[i] = self.alpha * xi1 * (b1 - bm1) / t;
        }
        (total, self.xs.transpose() * coef)
    }
}

/// Dense 1-d grid minimization with golden-section refinement, used as the
/// oracle and fallback for single-coordinate supports.
pub fn grid_min_1d(
    family: GlmFamily,
    xs: &DMatrix<f64>,
    eta0: &DVector<f64>,
    tau: &Dispersion,
    alpha: f64,
    lo: f64,
    hi: f64,
    points: usize,
) -> (f64, f64) {
    let obj = GapObjective {
        family,
        xs,
        eta0,
        tau,
        alpha,
    };
    let f = |b: f64| obj.value_grad(&DVector::from_vec(vec![b])).0;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=points {
        let b = lo + (hi - lo) * k as f64 / points as f64;
        let v = f(b);
        if v < best.0 {
            best = (v, b);
        }
    }
    // Golden-section refinement around the grid minimizer.
    let step = (hi - lo) / points as f64;
    let (mut a, mut b) = (best.1 - step, best.1 + step);
    let phi = 0.618_033_988_749_894_9;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
        if (b - a).abs() < 1e-12 {
            break;
        }
    }
    let arg = 0.5 * (a + b);
    (f(arg), arg)
}

/// Separation table over all `S` with `|S| <= s_max` not containing the full
/// truth support.
#[allow(clippy::too_many_arguments)]
pub fn renyi_separation(
    family: GlmFamily,
    design: &GroupedDesign,
    dispersion: &Dispersion,
    truth: &PaddedVector,
    alpha: f64,
    s_max: usize,
    restarts: usize,
    c_r: f64,
    enum_cap: u128,
    seed: u64,
) -> Result<RenyiTable> {
    let beta0 = design.embed(truth)?;
    let eta0 = design.matrix() * &beta0;
    let s0 = truth.support.len();
    let n = design.n();
    let log_g = (design.num_groups() as f64).ln();

    let supports: Vec<Support> = design
        .supports_up_to(s_max, enum_cap)?
        .into_iter()
        .filter(|s| !s.is_superset_of(&truth.support))
        .collect();

    let rows: Result<Vec<RenyiRow>> = supports
        .into_par_iter()
        .map(|support| -> Result<RenyiRow> {
            let xs = design.submatrix(&support);
            let d = xs.ncols();
            let obj = GapObjective {
                family,
                xs: &xs,
                eta0: &eta0,
                tau: dispersion,
                alpha,
            };
            if d == 0 {
                let total = obj.value_grad(&DVector::zeros(0)).0;
                return Ok(RenyiRow {
                    support: support.groups().to_vec(),
                    p_s: 0,
                    r_value: total / n as f64,
                    method: RenyiMethod::Degenerate,
                    converged: true,
                });
            }
            // Multi-start BFGS: zero, the least-squares interpolation of the
            // true predictors, and seeded random points.
            let mut stream: u64 = 0x9e3779b97f4a7c15;
            for &g in support.groups() {
                stream = stream.wrapping_mul(31).wrapping_add(g as u64 + 1);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            let mut inits: Vec<DVector<f64>> = vec![DVector::zeros(d)];
            let gram = xs.transpose() * &xs;
            if let Some(inv) = gram.clone().try_inverse() {
                inits.push(inv * (xs.transpose() * &eta0));
            }
            while inits.len() < restarts {
                inits.push(DVector::from_fn(d, |_, _| rng.gen_range(-1.5..1.5)));
            }
            let mut best_val = f64::INFINITY;
            let mut any_converged = false;
            for init in inits {
                let res = bfgs(|b| obj.value_grad(b), init, 300, 1e-10);
                if res.value < best_val {
                    best_val = res.value;
                }
                any_converged |= res.converged;
            }
            let mut method = RenyiMethod::Bfgs;
            if !any_converged && d == 1 {
                let (grid_val, _) =
                    grid_min_1d(family, &xs, &eta0, dispersion, alpha, -6.0, 6.0, 20_000);
                if grid_val < best_val {
                    best_val = grid_val;
                }
                method = RenyiMethod::Grid;
            }
            Ok(RenyiRow {
                support: support.groups().to_vec(),
                p_s: d,
                r_value: (best_val / n as f64).max(0.0),
                method,
                converged: any_converged || method == RenyiMethod::Grid,
            })
        })
        .collect();
    let rows = rows?;
    let summability = rows
        .iter()
        .map(|r| {
            (-(n as f64) * r.r_value
                + c_r * r.p_s as f64
                + c_r * (s0 + r.support.len()) as f64 * log_g)
                .exp()
        })
        .sum();
    Ok(RenyiTable {
        alpha,
        n,
        c_r,
        rows,
        summability,
    })
}
