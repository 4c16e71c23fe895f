//! Grouped design matrices, supports, zero-padded embeddings, and the
//! design-side constants entering the recovery and model-entry conditions:
//! the sparse row envelope, the compatibility numbers, sparse influence and
//! leverage, and sparse Gram eigenvalue extremes.
//!
//! Everything that quantifies over supports enumerates them exactly in
//! lexicographic order, up to a hard budget; past the budget the operations
//! fail loudly rather than silently sampling.

use std::fmt;
use std::io::{BufRead, Write as IoWrite};
use std::path::Path;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::linalg::{cholesky, eig_extremes};

/// Default cap on the number of enumerated supports per operation.
pub const DEFAULT_ENUM_CAP: u128 = 2_000_000;

/// A set of active groups, kept strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Support {
    groups: Vec<usize>,
}

impl Support {
    /// Build a support from 0-based group indices; sorts and rejects
    /// duplicates.
    pub fn new(mut groups: Vec<usize>) -> Result<Self> {
        groups.sort_unstable();
        if groups.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("support contains duplicate groups"));
        }
        Ok(Support { groups })
    }

    pub fn empty() -> Self {
        Support { groups: Vec::new() }
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    /// Number of active groups `s = |S|`.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn contains(&self, group: usize) -> bool {
        self.groups.binary_search(&group).is_ok()
    }

    pub fn is_superset_of(&self, other: &Support) -> bool {
        other.groups.iter().all(|g| self.contains(*g))
    }

    /// Union of two supports.
    pub fn union(&self, other: &Support) -> Support {
        let mut groups = self.groups.clone();
        groups.extend(other.groups.iter().copied());
        groups.sort_unstable();
        groups.dedup();
        Support { groups }
    }
}

impl fmt::Display for Support {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.groups.iter().join(","))
    }
}

/// A coefficient vector living on a support, with its ambient embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct PaddedVector {
    pub support: Support,
    pub values: DVector<f64>,
}

impl PaddedVector {
    pub fn new(support: Support, values: DVector<f64>) -> Self {
        PaddedVector { support, values }
    }

    pub fn zero_ambient() -> Self {
        PaddedVector {
            support: Support::empty(),
            values: DVector::zeros(0),
        }
    }
}

/// An `n x p` design matrix with a contiguous group partition of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedDesign {
    x: DMatrix<f64>,
    group_sizes: Vec<usize>,
    /// Column offset of each group, plus the trailing total `p`.
    offsets: Vec<usize>,
}

impl GroupedDesign {
    pub fn new(x: DMatrix<f64>, group_sizes: Vec<usize>) -> Result<Self> {
        if x.nrows() == 0 || group_sizes.is_empty() {
            return Err(Error::invalid("design needs n >= 1 and G >= 1"));
        }
        if group_sizes.iter().any(|&m| m == 0) {
            return Err(Error::invalid("group sizes must be positive"));
        }
        let p: usize = group_sizes.iter().sum();
        if p != x.ncols() {
            return Err(Error::invalid(format!(
                "group sizes sum to {p} but design has {} columns",
                x.ncols()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("design entries must be finite"));
        }
        let mut offsets = Vec::with_capacity(group_sizes.len() + 1);
        let mut acc = 0;
        for &m in &group_sizes {
            offsets.push(acc);
            acc += m;
        }
        offsets.push(acc);
        Ok(GroupedDesign {
            x,
            group_sizes,
            offsets,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Number of groups `G`.
    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// Ambient column range of a group.
    pub fn group_columns(&self, g: usize) -> std::ops::Range<usize> {
        self.offsets[g]..self.offsets[g + 1]
    }

    fn check_support(&self, support: &Support) -> Result<()> {
        if let Some(&last) = support.groups().last() {
            if last >= self.num_groups() {
                return Err(Error::invalid(format!(
                    "support {support} references group >= G = {}",
                    self.num_groups()
                )));
            }
        }
        Ok(())
    }

    /// Total coordinates `p_S` covered by a support.
    pub fn support_dim(&self, support: &Support) -> usize {
        support.groups().iter().map(|&g| self.group_sizes[g]).sum()
    }

    /// Ambient column indices of a support, in order.
    pub fn support_columns(&self, support: &Support) -> Vec<usize> {
        support
            .groups()
            .iter()
            .flat_map(|&g| self.group_columns(g))
            .collect()
    }

    /// The `n x p_S` submatrix of the support's columns.
    pub fn submatrix(&self, support: &Support) -> DMatrix<f64> {
        let cols = self.support_columns(support);
        let mut out = DMatrix::zeros(self.n(), cols.len());
        for (j, &c) in cols.iter().enumerate() {
            out.set_column(j, &self.x.column(c));
        }
        out
    }

    /// Zero-padded ambient embedding of a supported vector.
    pub fn embed(&self, v: &PaddedVector) -> Result<DVector<f64>> {
        self.check_support(&v.support)?;
        if v.values.len() != self.support_dim(&v.support) {
            return Err(Error::invalid(format!(
                "padded vector has {} entries but support {} covers {} coordinates",
                v.values.len(),
                v.support,
                self.support_dim(&v.support)
            )));
        }
        let mut beta = DVector::zeros(self.p());
        for (j, &c) in self.support_columns(&v.support).iter().enumerate() {
            beta[c] = v.values[j];
        }
        Ok(beta)
    }

    /// Extract the blocks of an ambient vector on a support.
    pub fn restrict(&self, beta: &DVector<f64>, support: &Support) -> Result<PaddedVector> {
        self.check_support(support)?;
        if beta.len() != self.p() {
            return Err(Error::invalid("ambient vector has wrong length"));
        }
        let cols = self.support_columns(support);
        let values = DVector::from_iterator(cols.len(), cols.iter().map(|&c| beta[c]));
        Ok(PaddedVector::new(support.clone(), values))
    }

    /// Group support of an ambient vector: groups with a nonzero block.
    pub fn group_support_of(&self, beta: &DVector<f64>) -> Support {
        let groups = (0..self.num_groups())
            .filter(|&g| self.group_columns(g).any(|c| beta[c] != 0.0))
            .collect();
        Support { groups }
    }

    /// Squared norms of each group block of row `i`.
    fn row_block_sq_norms(&self, i: usize) -> Vec<f64> {
        (0..self.num_groups())
            .map(|g| self.group_columns(g).map(|c| self.x[(i, c)].powi(2)).sum())
            .collect()
    }

    /// Sparse row envelope `max_i sup_{|T| <= s} ||X_{i,T}||_2`: per row, the
    /// square root of the sum of the `s` largest squared group-block norms.
    pub fn sparse_row_envelope(&self, s: usize) -> Result<f64> {
        if s == 0 || s > self.num_groups() {
            return Err(Error::invalid(format!(
                "envelope order s = {s} must be in 1..=G = {}",
                self.num_groups()
            )));
        }
        let mut best: f64 = 0.0;
        for i in 0..self.n() {
            let mut sq = self.row_block_sq_norms(i);
            sq.sort_by(|a, b| b.total_cmp(a));
            let top: f64 = sq.iter().take(s).sum();
            best = best.max(top);
        }
        Ok(best.sqrt())
    }

    /// Number of supports of size exactly `s` out of `G` groups.
    fn n_choose(&self, s: usize) -> u128 {
        let g = self.num_groups() as u128;
        let s = s as u128;
        let mut out: u128 = 1;
        for k in 0..s {
            out = out * (g - k) / (k + 1);
        }
        out
    }

    fn check_budget(&self, s: usize, cap: u128) -> Result<()> {
        let count = self.n_choose(s);
        if count > cap {
            return Err(Error::BudgetExceeded { count, cap });
        }
        Ok(())
    }

    /// Lexicographically ordered supports of size exactly `s`.
    pub fn supports_of_size(&self, s: usize) -> impl Iterator<Item = Support> + '_ {
        (0..self.num_groups())
            .combinations(s)
            .map(|groups| Support { groups })
    }

    /// All supports with `|S| <= s_max`, including the empty one,
    /// lexicographically ordered within each size.
    pub fn supports_up_to(&self, s_max: usize, cap: u128) -> Result<Vec<Support>> {
        let total: u128 = (0..=s_max.min(self.num_groups()))
            .map(|s| self.n_choose(s))
            .sum();
        if total > cap {
            return Err(Error::BudgetExceeded { count: total, cap });
        }
        let mut out = Vec::new();
        for s in 0..=s_max.min(self.num_groups()) {
            out.extend(self.supports_of_size(s));
        }
        Ok(out)
    }

    /// All supersets of `base` with `|S| <= s_max`, lexicographic per size.
    pub fn supersets_up_to(
        &self,
        base: &Support,
        s_max: usize,
        cap: u128,
    ) -> Result<Vec<Support>> {
        self.check_support(base)?;
        if base.len() > s_max {
            return Ok(Vec::new());
        }
        let others: Vec<usize> = (0..self.num_groups())
            .filter(|g| !base.contains(*g))
            .collect();
        let extra_max = s_max - base.len();
        let mut total: u128 = 0;
        for k in 0..=extra_max.min(others.len()) {
            let mut c: u128 = 1;
            for j in 0..k {
                c = c * (others.len() as u128 - j as u128) / (j as u128 + 1);
            }
            total += c;
        }
        if total > cap {
            return Err(Error::BudgetExceeded { count: total, cap });
        }
        let mut out = Vec::new();
        for k in 0..=extra_max.min(others.len()) {
            for extra in others.iter().copied().combinations(k) {
                let mut groups = base.groups.clone();
                groups.extend(extra);
                groups.sort_unstable();
                out.push(Support { groups });
            }
        }
        out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        Ok(out)
    }

    /// Weighted Gram block `F_T = X_T' diag(w) X_T` for a support.
    pub fn fisher_block(&self, weights: &[f64], support: &Support) -> DMatrix<f64> {
        let cols = self.support_columns(support);
        let d = cols.len();
        let mut f = DMatrix::zeros(d, d);
        for (a, &ca) in cols.iter().enumerate() {
            for (b, &cb) in cols.iter().enumerate().skip(a) {
                let mut acc = 0.0;
                for i in 0..self.n() {
                    acc += weights[i] * self.x[(i, ca)] * self.x[(i, cb)];
                }
                f[(a, b)] = acc;
                f[(b, a)] = acc;
            }
        }
        f
    }

    fn check_weights(&self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.n() {
            return Err(Error::invalid("weight vector length must equal n"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return Err(Error::invalid("weights must be positive"));
        }
        Ok(())
    }

    /// Sparse Euclidean compatibility
    /// `phi_2(s) = min_{|T| <= s} sqrt(lambda_min(F_T / n))`, exact by
    /// enumeration and eigendecomposition.
    pub fn compatibility_phi2(&self, weights: &[f64], s: usize, cap: u128) -> Result<f64> {
        self.check_weights(weights)?;
        if s == 0 || s > self.num_groups() {
            return Err(Error::invalid("s must be in 1..=G"));
        }
        self.check_budget(s, cap)?;
        // Eigenvalue interlacing: the minimum over |T| <= s is attained at
        // size exactly s.
        let n = self.n() as f64;
        let mut lo = f64::INFINITY;
        for support in self.supports_of_size(s) {
            let f = self.fisher_block(weights, &support) / n;
            let (lmin, _) = eig_extremes(&f);
            lo = lo.min(lmin);
        }
        Ok(lo.max(0.0).sqrt())
    }

    /// Sampled variant of `phi_2` for budgets past the cap. Sampling over
    /// supports can only miss the minimizer, so the estimate upper-bounds the
    /// exact `phi_2`; it is flagged non-exhaustive.
    pub fn compatibility_phi2_sampled(
        &self,
        weights: &[f64],
        s: usize,
        samples: usize,
        rng: &mut impl Rng,
    ) -> Result<(f64, bool)> {
        self.check_weights(weights)?;
        let n = self.n() as f64;
        let g = self.num_groups();
        let mut lo = f64::INFINITY;
        for _ in 0..samples {
            let mut groups: Vec<usize> = (0..g).collect();
            for k in 0..s {
                let j = rng.gen_range(k..g);
                groups.swap(k, j);
            }
            let support = Support::new(groups[..s].to_vec())?;
            let f = self.fisher_block(weights, &support) / n;
            lo = lo.min(eig_extremes(&f).0);
        }
        Ok((lo.max(0.0).sqrt(), true))
    }

    /// Group `l_{2,1}` compatibility
    /// `phi_1(s) = inf sqrt(s) ||F^{1/2} d||_2 / (sqrt(n) ||d||_{2,1})`.
    ///
    /// Per support, the boundary problem `min d' (F_T/n) d` over the
    /// `l_{2,1}` sphere is solved by projected gradient with random restarts;
    /// the result carries a heuristic flag (the sphere is nonconvex).
    pub fn compatibility_phi1(
        &self,
        weights: &[f64],
        s: usize,
        restarts: usize,
        cap: u128,
        rng: &mut impl Rng,
    ) -> Result<Phi1Estimate> {
        self.check_weights(weights)?;
        if s == 0 || s > self.num_groups() {
            return Err(Error::invalid("s must be in 1..=G"));
        }
        self.check_budget(s, cap)?;
        if s == 1 {
            // On one group the two norms coincide, so phi_1(1) = phi_2(1).
            return Ok(Phi1Estimate {
                value: self.compatibility_phi2(weights, 1, cap)?,
                heuristic: false,
            });
        }
        let n = self.n() as f64;
        let mut best = f64::INFINITY;
        for support in self.supports_of_size(s) {
            let a = self.fisher_block(weights, &support) / n;
            let sizes: Vec<usize> = support
                .groups()
                .iter()
                .map(|&g| self.group_sizes[g])
                .collect();
            let min_quad = min_quadratic_on_group_sphere(&a, &sizes, restarts, rng);
            best = best.min(min_quad);
        }
        Ok(Phi1Estimate {
            value: (s as f64 * best.max(0.0)).sqrt(),
            heuristic: true,
        })
    }

    /// Sparse influence norm `q_star(s)` and weighted sparse leverage
    /// `l_star(s)`, exact by enumeration. Also reports the empirical ratio
    /// `l_star / q_star^2`.
    pub fn sparse_influence_leverage(
        &self,
        weights: &[f64],
        s: usize,
        cap: u128,
    ) -> Result<InfluenceLeverage> {
        self.check_weights(weights)?;
        if s == 0 || s > self.num_groups() {
            return Err(Error::invalid("s must be in 1..=G"));
        }
        self.check_budget(s, cap)?;
        let mut q_star_sq: f64 = 0.0;
        let mut l_star: f64 = 0.0;
        for support in self.supports_of_size(s) {
            let f = self.fisher_block(weights, &support);
            let chol = cholesky(&f).map_err(|_| Error::NotPositiveDefinite {
                support: Some(support.clone()),
            })?;
            let xs = self.submatrix(&support);
            for i in 0..self.n() {
                let xi = xs.row(i).transpose();
                let solved = chol.solve(&xi);
                let lev = xi.dot(&solved);
                q_star_sq = q_star_sq.max(lev);
                l_star = l_star.max(weights[i] * lev);
            }
        }
        let q_star = q_star_sq.sqrt();
        Ok(InfluenceLeverage {
            q_star,
            l_star,
            ratio: l_star / q_star_sq,
        })
    }

    /// Extreme eigenvalues of `F_T / n` over `|T| <= s`.
    pub fn sparse_gram_extremes(&self, weights: &[f64], s: usize, cap: u128) -> Result<(f64, f64)> {
        self.check_weights(weights)?;
        if s == 0 || s > self.num_groups() {
            return Err(Error::invalid("s must be in 1..=G"));
        }
        self.check_budget(s, cap)?;
        // Interlacing again: both extremes are attained at |T| = s.
        let n = self.n() as f64;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for support in self.supports_of_size(s) {
            let f = self.fisher_block(weights, &support) / n;
            let (lmin, lmax) = eig_extremes(&f);
            lo = lo.min(lmin);
            hi = hi.max(lmax);
        }
        Ok((lo, hi))
    }

    /// Write the design in the CSV interchange format: a header line
    /// `group_sizes: m1,m2,...` followed by `n` rows of `p` reals.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "group_sizes: {}", self.group_sizes.iter().join(","))?;
        for i in 0..self.n() {
            let row = (0..self.p())
                .map(|j| format!("{:.16e}", self.x[(i, j)]))
                .join(",");
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    /// Load a design from the CSV interchange format.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty design file".into()))??;
        let sizes_str = header
            .strip_prefix("group_sizes:")
            .ok_or_else(|| Error::Parse("first line must start with 'group_sizes:'".into()))?;
        let group_sizes: Vec<usize> = sizes_str
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad group size '{t}': {e}")))
            })
            .collect::<Result<_>>()?;
        let p: usize = group_sizes.iter().sum();
        let mut rows: Vec<f64> = Vec::new();
        let mut n = 0;
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("bad entry '{t}': {e}")))
                })
                .collect::<Result<_>>()?;
            if vals.len() != p {
                return Err(Error::Parse(format!(
                    "row {n} has {} entries, expected {p}",
                    vals.len()
                )));
            }
            rows.extend(vals);
            n += 1;
        }
        if n == 0 {
            return Err(Error::Parse("design file has no data rows".into()));
        }
        GroupedDesign::new(DMatrix::from_row_slice(n, p, &rows), group_sizes)
    }
}

/// Result of the heuristic `phi_1` minimization.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Phi1Estimate {
    pub value: f64,
    /// True when the nonconvex boundary problem was solved by restarts
    /// rather than exactly.
    pub heuristic: bool,
}

/// Sparse influence and leverage constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct InfluenceLeverage {
    pub q_star: f64,
    pub l_star: f64,
    /// `l_star / q_star^2`; stays in the weight range when weights are bounded.
    pub ratio: f64,
}

/// Minimize `d' A d` over the group sphere `sum_g ||d_g||_2 = 1` by projected
/// gradient with radial renormalization (the objective is 2-homogeneous, so
/// minimizing the Rayleigh-type quotient and renormalizing are equivalent).
fn min_quadratic_on_group_sphere(
    a: &DMatrix<f64>,
    group_sizes: &[usize],
    restarts: usize,
    rng: &mut impl Rng,
) -> f64 {
    let d = a.nrows();
    let (_, lmax) = eig_extremes(a);
    let step = if lmax > 0.0 { 1.0 / lmax } else { 1.0 };

    let norm21 = |v: &DVector<f64>| -> f64 {
        let mut acc = 0.0;
        let mut off = 0;
        for &m in group_sizes {
            acc += v.rows(off, m).norm();
            off += m;
        }
        acc
    };

    let mut inits: Vec<DVector<f64>> = Vec::new();
    // Deterministic starts: the global minimal eigenvector plus each
    // single-group minimal direction.
    let eig = a.clone().symmetric_eigen();
    let mut min_idx = 0;
    for k in 1..d {
        if eig.eigenvalues[k] < eig.eigenvalues[min_idx] {
            min_idx = k;
        }
    }
    inits.push(eig.eigenvectors.column(min_idx).into_owned());
    let mut off = 0;
    for &m in group_sizes {
        let block = a.view((off, off), (m, m)).into_owned();
        let beig = block.symmetric_eigen();
        let mut bmin = 0;
        for k in 1..m {
            if beig.eigenvalues[k] < beig.eigenvalues[bmin] {
                bmin = k;
            }
        }
        let mut v = DVector::zeros(d);
        v.rows_mut(off, m).copy_from(&beig.eigenvectors.column(bmin));
        inits.push(v);
        off += m;
    }
    while inits.len() < restarts.max(inits.len()) {
        inits.push(DVector::from_fn(d, |_, _| rng.gen_range(-1.0..1.0)));
    }

    let mut best = f64::INFINITY;
    for init in inits {
        let nz = norm21(&init);
        if nz == 0.0 {
            continue;
        }
        let mut v = init / nz;
        let mut obj = v.dot(&(a * &v));
        let mut prev_v = v.clone();
        let mut prev_grad = a * &v * 2.0;
        let mut stall = 0usize;
        for iter in 0..5000 {
            let grad = a * &v * 2.0;
            // Barzilai-Borwein step after the first iteration; plain 1/L
            // step otherwise. Track the best renormalized point, since BB
            // steps are nonmonotone.
            let bb = if iter == 0 {
                step
            } else {
                let s = &v - &prev_v;
                let yv = &grad - &prev_grad;
                let sy = s.dot(&yv);
                if sy > 1e-18 {
                    (s.dot(&s) / sy).clamp(0.05 * step, 50.0 * step)
                } else {
                    step
                }
            };
            prev_v = v.clone();
            prev_grad = grad.clone();
            let mut next = &v - grad * bb;
            let nn = norm21(&next);
            if nn == 0.0 {
                break;
            }
            next /= nn;
            let next_obj = next.dot(&(a * &next));
            if (obj - next_obj).abs() <= 1e-14 * (1.0 + obj.abs()) {
                stall += 1;
            } else {
                stall = 0;
            }
            v = next;
            if next_obj < obj {
                obj = next_obj;
            }
            if stall >= 10 {
                break;
            }
        }
        best = best.min(obj);
    }
    best
}
