//! Small dense BFGS minimizer with Armijo backtracking, used for the
//! per-support Renyi-gap minimizations.

use nalgebra::{DMatrix, DVector};

/// Outcome of a BFGS run.
#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimize a smooth function given by `f_and_grad` starting at `x0`.
///
/// Convergence: gradient sup-norm below `tol * (1 + |f|)` or step below
/// machine-scale. The inverse-Hessian estimate resets to the identity when
/// curvature turns nonpositive.
pub fn bfgs(
    f_and_grad: impl Fn(&DVector<f64>) -> (f64, DVector<f64>),
    x0: DVector<f64>,
    max_iter: usize,
    tol: f64,
) -> OptimResult {
    let n = x0.len();
    let mut x = x0;
    let (mut fx, mut gx) = f_and_grad(&x);
    let mut h_inv = DMatrix::<f64>::identity(n, n);

    for iter in 0..max_iter {
        let gnorm = gx.amax();
        if gnorm <= tol * (1.0 + fx.abs()) {
            return OptimResult {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations: iter,
                converged: true,
            };
        }
        let mut dir = -(&h_inv * &gx);
        if dir.dot(&gx) >= 0.0 {
            // Not a descent direction; reset to steepest descent.
            h_inv = DMatrix::identity(n, n);
            dir = -gx.clone();
        }
        // Armijo backtracking with halving.
        let slope = dir.dot(&gx);
        let mut step = 1.0;
        let mut accepted = false;
        let mut x_new = x.clone();
        for _ in 0..60 {
            x_new = &x + &dir * step;
            let f_new = f_and_grad(&x_new).0;
            if f_new.is_finite() && f_new <= fx + 1e-4 * step * slope {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return OptimResult {
                x,
                value: fx,
                grad_norm: gnorm,
                iterations: iter,
                converged: gnorm <= 1e-6 * (1.0 + fx.abs()),
            };
        }
        let (f_acc, g_new) = f_and_grad(&x_new);
        let s = &x_new - &x;
        let y = &g_new - &gx;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            // Standard BFGS inverse update.
            let rho = 1.0 / sy;
            let iden = DMatrix::<f64>::identity(n, n);
            let left = &iden - &s * y.transpose() * rho;
            let right = &iden - &y * s.transpose() * rho;
            h_inv = &left * &h_inv * &right + &s * s.transpose() * rho;
        } else {
            h_inv = DMatrix::identity(n, n);
        }
        x = x_new;
        fx = f_acc;
        gx = g_new;
    }
    let gnorm = gx.amax();
    OptimResult {
        x,
        value: fx,
        grad_norm: gnorm,
        iterations: max_iter,
        converged: gnorm <= tol * (1.0 + fx.abs()),
    }
}
