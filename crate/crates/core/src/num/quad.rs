//! Gauss-Hermite and Gauss-Laguerre rules via the Golub-Welsch
//! eigendecomposition of the Jacobi matrix, cached per node count.

use std::collections::HashMap;
use std::sync::{LazyLock, Mutex};

use nalgebra::DMatrix;

/// A one-dimensional quadrature rule: paired nodes and weights.
#[derive(Debug, Clone)]
pub struct QuadRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(diag: &[f64], offdiag: &[f64], mu0: f64) -> QuadRule {
    let n = diag.len();
    let mut jacobi = DMatrix::zeros(n, n);
    for (i, &d) in diag.iter().enumerate() {
        jacobi[(i, i)] = d;
    }
    for (i, &b) in offdiag.iter().enumerate() {
        jacobi[(i, i + 1)] = b;
        jacobi[(i + 1, i)] = b;
    }
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let node = eig.eigenvalues[k];
            let w = mu0 * eig.eigenvectors[(0, k)].powi(2);
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    QuadRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    }
}

static HERMITE_CACHE: LazyLock<Mutex<HashMap<usize, QuadRule>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));
static LAGUERRE_CACHE: LazyLock<Mutex<HashMap<(usize, u64), QuadRule>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Gauss-Hermite rule for the weight `exp(-x^2)` on the real line.
pub fn gauss_hermite(n: usize) -> QuadRule {
    assert!(n >= 1, "need at least one node");
    let mut cache = HERMITE_CACHE.lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let diag = vec![0.0; n];
            let offdiag: Vec<f64> = (1..n).map(|k| (k as f64 / 2.0).sqrt()).collect();
            golub_welsch(&diag, &offdiag, std::f64::consts::PI.sqrt())
        })
        .clone()
}

/// Generalized Gauss-Laguerre rule for the weight `x^a exp(-x)` on
/// `[0, inf)` with `a > -1`; the total weight is `Gamma(a + 1)`.
pub fn gauss_laguerre_generalized(n: usize, a: f64) -> QuadRule {
    use statrs::function::gamma::ln_gamma;
    assert!(n >= 1, "need at least one node");
    assert!(a > -1.0, "laguerre exponent must exceed -1");
    let mut cache = LAGUERRE_CACHE.lock().unwrap();
    cache
        .entry((n, a.to_bits()))
        .or_insert_with(|| {
            let diag: Vec<f64> = (0..n).map(|k| 2.0 * k as f64 + a + 1.0).collect();
            let offdiag: Vec<f64> = (1..n).map(|k| (k as f64 * (k as f64 + a)).sqrt()).collect();
            golub_welsch(&diag, &offdiag, ln_gamma(a + 1.0).exp())
        })
        .clone()
}

/// Gauss-Laguerre rule for the weight `exp(-x)` on `[0, inf)`.
pub fn gauss_laguerre(n: usize) -> QuadRule {
    gauss_laguerre_generalized(n, 0.0)
}

/// Integral of `f` against the standard normal density, doubling the
/// Gauss-Hermite level from `start` until two successive levels agree to
/// `tol` or `max_nodes` is reached. Returns the value and the last delta.
pub fn gauss_hermite_normal_adaptive(
    f: impl Fn(f64) -> f64,
    start: usize,
    max_nodes: usize,
    tol: f64,
) -> (f64, f64) {
    let sqrt2 = std::f64::consts::SQRT_2;
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    let eval = |n: usize| {
        let rule = gauss_hermite(n);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&z, &w)| w * f(sqrt2 * z))
            .sum::<f64>()
            * inv_sqrt_pi
    };
    let mut n = start.max(2);
    let mut prev = eval(n);
    let mut delta = f64::INFINITY;
    while n < max_nodes {
        n *= 2;
        let next = eval(n);
        delta = (next - prev).abs();
        prev = next;
        if delta <= tol * (1.0 + prev.abs()) {
            break;
        }
    }
    (prev, delta)
}

/// Integral of `f(y)` over `(0, inf)` against a Gamma(shape, rate) density,
/// doubling the generalized Gauss-Laguerre level until stable. The density's
/// power factor sits inside the quadrature weight, so only `f` needs to be
/// smooth.
pub fn gauss_laguerre_gamma_adaptive(
    f: impl Fn(f64) -> f64,
    shape: f64,
    rate: f64,
    start: usize,
    max_nodes: usize,
    tol: f64,
) -> (f64, f64) {
    use statrs::function::gamma::ln_gamma;
    let log_norm = ln_gamma(shape);
    let eval = |n: usize| {
        let rule = gauss_laguerre_generalized(n, shape - 1.0);
        rule.nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&t, &w)| {
                // Underflowed far-tail weights contribute nothing; skipping
                // them avoids 0 * inf against growing integrands.
                let m = w.ln() - log_norm;
                if m <= -745.0 {
                    0.0
                } else {
                    m.exp() * f(t / rate)
                }
            })
            .sum::<f64>()
    };
    let mut n = start.max(2);
    let mut prev = eval(n);
    let mut delta = f64::INFINITY;
    while n < max_nodes {
        n *= 2;
        let next = eval(n);
        delta = (next - prev).abs();
        prev = next;
        if delta <= tol * (1.0 + prev.abs()) {
            break;
        }
    }
    (prev, delta)
}
