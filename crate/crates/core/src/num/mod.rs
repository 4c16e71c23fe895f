//! Shared numerical kernels: stable reductions, special functions, Gaussian
//! quadrature, dense symmetric linear algebra helpers, and a small BFGS
//! minimizer.

pub mod linalg;
pub mod optim;
pub mod quad;
pub mod special;

/// Log-sum-exp with the shift-by-max trick.
///
/// Returns `-inf` on an empty slice or when every entry is `-inf`.
pub fn logsumexp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max; // empty, all -inf, or contains +inf
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean and standard error of a slice.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Standard error of a binomial proportion estimated from `hits` out of `n`.
pub fn binomial_se(hits: usize, n: usize) -> f64 {
    let p = hits as f64 / n as f64;
    (p * (1.0 - p) / n as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logsumexp_matches_direct_sum() {
        let v = [-1.0f64, -2.0, -3.0];
        let direct = v.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(logsumexp(&v), direct, max_relative = 1e-14);
    }

    #[test]
    fn logsumexp_is_shift_invariant() {
        let v = [-1001.0, -1000.0, -999.5];
        let shifted: Vec<f64> = v.iter().map(|x| x + 1000.0).collect();
        assert_relative_eq!(logsumexp(&v) + 1000.0, logsumexp(&shifted), epsilon = 1e-10);
    }

    #[test]
    fn logsumexp_empty_and_neg_inf() {
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert_relative_eq!(logsumexp(&[f64::NEG_INFINITY, 0.0]), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn mean_se_of_constant_is_zero_se() {
        let (m, se) = mean_se(&[2.0, 2.0, 2.0]);
        assert_relative_eq!(m, 2.0);
        assert_relative_eq!(se, 0.0);
    }
}
