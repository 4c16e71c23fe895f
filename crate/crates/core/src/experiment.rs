//! Experiment configuration, dataset generation, and provenance hashing.
//!
//! A config fully determines every random quantity through its seed: the
//! design uses stream 0 of the seeded generator, the response for replicate
//! `r` uses stream `r + 1`, and downstream Monte Carlo audits derive their
//! own streams. Rerunning any experiment with the same config is
//! bit-identical.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design::{GroupedDesign, PaddedVector, Support, DEFAULT_ENUM_CAP};
use crate::error::{Error, Result};
use crate::family::{Dispersion, GlmFamily};
use crate::posterior::MarginalMode;
use crate::prior::{SasPrior, SizePrior, SizePriorKind, Slab};

/// How the design matrix is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum DesignGenerator {
    /// iid standard normal entries, columns rescaled to l2 norm sqrt(n).
    IidGaussianNormalized,
    /// Random orthonormal columns scaled by sqrt(n), so X'X/n = I (needs
    /// n >= p).
    Orthonormal,
    /// Like the iid generator but the second group duplicates the first.
    DuplicatedPair,
    /// Load from the CSV interchange format.
    FromFile { file: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignConfig {
    pub n: usize,
    pub num_groups: usize,
    /// Defaults to all singleton groups when omitted.
    #[serde(default)]
    pub group_sizes: Option<Vec<usize>>,
    #[serde(flatten)]
    pub generator: DesignGenerator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyConfig {
    #[serde(flatten)]
    pub kind: GlmFamily,
    /// Constant dispersion; binary/count families require 1.
    #[serde(default = "default_tau")]
    pub tau: f64,
}

fn default_tau() -> f64 {
    1.0
}

/// Truth specification: explicit coefficient blocks or a beta-min preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthConfig {
    /// Active groups (0-based).
    pub groups: Vec<usize>,
    /// Explicit coefficients over the active coordinates, in group order.
    #[serde(default)]
    pub values: Option<Vec<f64>>,
    /// Group beta-min as a multiple of `eps_n / phi_2(s_0)` with unit
    /// weights; signs alternate across groups. Exactly one of `values` /
    /// `signal_multiple` must be set.
    #[serde(default)]
    pub signal_multiple: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub size: SizePriorKind,
    pub slab: Slab,
}

/// Numerical knobs; defaults match the module-level ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToleranceConfig {
    /// Support-enumeration cap (TOML integers are at most 64-bit).
    #[serde(default = "default_enum_cap")]
    pub enum_cap: u64,
    #[serde(default = "default_gh_tol")]
    pub gh_tol: f64,
    #[serde(default = "default_importance_draws")]
    pub importance_draws: usize,
    /// Monte Carlo draws for set-mass and TV estimates.
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
}

fn default_enum_cap() -> u64 {
    DEFAULT_ENUM_CAP as u64
}
fn default_gh_tol() -> f64 {
    1e-8
}
fn default_importance_draws() -> usize {
    200_000
}
fn default_mc_draws() -> usize {
    20_000
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            enum_cap: default_enum_cap(),
            gh_tol: default_gh_tol(),
            importance_draws: default_importance_draws(),
            mc_draws: default_mc_draws(),
        }
    }
}

/// The complete, schema-validated experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: FamilyConfig,
    pub design: DesignConfig,
    pub truth: TruthConfig,
    pub prior: PriorConfig,
    pub alpha: f64,
    /// Support-size cap of the enumerated posterior.
    pub s_max: usize,
    /// Mixture truncation: supersets of the truth up to `k_dim * s_0` groups.
    #[serde(default = "default_k_dim")]
    pub k_dim: usize,
    pub seed: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Credible level `1 - gamma`.
    #[serde(default = "default_level")]
    pub level: f64,
    /// Sample sizes for trend experiments; defaults to `[design.n]`.
    #[serde(default)]
    pub n_grid: Vec<usize>,
    #[serde(default = "default_marginal_mode")]
    pub marginal_mode: MarginalMode,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

fn default_k_dim() -> usize {
    3
}
fn default_replications() -> usize {
    200
}
fn default_level() -> f64 {
    0.95
}
fn default_marginal_mode() -> MarginalMode {
    MarginalMode::Laplace
}

impl ExperimentConfig {
    /// Parse and validate a TOML config.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.design.num_groups;
        if self.design.n == 0 || g == 0 {
            return Err(Error::Config("design needs n >= 1 and G >= 1".into()));
        }
        if let Some(sizes) = &self.design.group_sizes {
            if sizes.len() != g {
                return Err(Error::Config(format!(
                    "group_sizes has {} entries, num_groups is {g}",
                    sizes.len()
                )));
            }
            if sizes.iter().any(|&m| m == 0) {
                return Err(Error::Config("group sizes must be positive".into()));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!(
                "alpha {} must lie in (0, 1]",
                self.alpha
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config("level must lie in (0, 1)".into()));
        }
        if self.truth.groups.is_empty() {
            return Err(Error::Config(
                "truth support must be nonempty (s_0 >= 1)".into(),
            ));
        }
        let mut sorted = self.truth.groups.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.truth.groups.len() || *sorted.last().unwrap() >= g {
            return Err(Error::Config("truth groups must be distinct and < G".into()));
        }
        match (&self.truth.values, &self.truth.signal_multiple) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Config(
                    "exactly one of truth.values / truth.signal_multiple must be set".into(),
                ));
            }
            (Some(v), None) => {
                let sizes = self.group_sizes();
                let dim: usize = sorted.iter().map(|&gi| sizes[gi]).sum();
                if v.len() != dim {
                    return Err(Error::Config(format!(
                        "truth.values has {} entries, active groups cover {dim} coordinates",
                        v.len()
                    )));
                }
            }
            (None, Some(m)) => {
                if !(*m > 0.0) {
                    return Err(Error::Config("signal_multiple must be positive".into()));
                }
            }
        }
        if self.family.tau <= 0.0 {
            return Err(Error::Config("tau must be positive".into()));
        }
        if self.family.kind.requires_unit_dispersion() && self.family.tau != 1.0 {
            return Err(Error::Config(format!(
                "{} requires tau = 1",
                self.family.kind.name()
            )));
        }
        if let GlmFamily::NegBinLog { size_r } = self.family.kind {
            if !(size_r > 0.0) {
                return Err(Error::Config("negbin size_r must be positive".into()));
            }
        }
        if self.s_max == 0 || self.k_dim == 0 {
            return Err(Error::Config("s_max and k_dim must be >= 1".into()));
        }
        if matches!(self.design.generator, DesignGenerator::Orthonormal)
            && self.design.n < self.total_p()
        {
            return Err(Error::Config("orthonormal generator needs n >= p".into()));
        }
        Ok(())
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.design
            .group_sizes
            .clone()
            .unwrap_or_else(|| vec![1; self.design.num_groups])
    }

    pub fn total_p(&self) -> usize {
        self.group_sizes().iter().sum()
    }

    /// Effective sample sizes for trend experiments.
    pub fn n_values(&self) -> Vec<usize> {
        if self.n_grid.is_empty() {
            vec![self.design.n]
        } else {
            self.n_grid.clone()
        }
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(canonical.as_bytes());
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn prior(&self) -> Result<SasPrior> {
        SasPrior::new(
            SizePrior::new(self.prior.size, self.design.num_groups)?,
            self.prior.slab,
        )
    }

    pub fn dispersion(&self, n: usize) -> Result<Dispersion> {
        Dispersion::constant(self.family.tau, n)
    }
}

/// A generated dataset with its provenance.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub design: GroupedDesign,
    pub dispersion: Dispersion,
    pub truth: PaddedVector,
    pub y: DVector<f64>,
    pub config_hash: String,
    pub seed: u64,
    pub replicate: u64,
}

/// Build the design for a given sample size (stream 0 of the config seed).
pub fn build_design(config: &ExperimentConfig, n: usize) -> Result<GroupedDesign> {
    let sizes = config.group_sizes();
    let p: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(0);
    let x = match &config.design.generator {
        DesignGenerator::FromFile { file } => {
            let design = GroupedDesign::read_csv(std::path::Path::new(file))?;
            if design.group_sizes() != sizes.as_slice() {
                return Err(Error::Config(
                    "design file group sizes disagree with the config".into(),
                ));
            }
            return Ok(design);
        }
        DesignGenerator::IidGaussianNormalized => {
            let mut x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            normalize_columns(&mut x);
            x
        }
        DesignGenerator::DuplicatedPair => {
            if config.design.num_groups < 2 || sizes[0] != sizes[1] {
                return Err(Error::Config(
                    "duplicated_pair needs G >= 2 with equal first two group sizes".into(),
                ));
            }
            let mut x = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            for j in 0..sizes[0] {
                let src: Vec<f64> = (0..n).map(|i| x[(i, j)]).collect();
                for i in 0..n {
                    x[(i, sizes[0] + j)] = src[i];
                }
            }
            normalize_columns(&mut x);
            x
        }
        DesignGenerator::Orthonormal => {
            if n < p {
                return Err(Error::Config("orthonormal generator needs n >= p".into()));
            }
            let raw = DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = raw.qr();
            let q = qr.q();
            q * (n as f64).sqrt()
        }
    };
    GroupedDesign::new(x, sizes)
}

fn normalize_columns(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for j in 0..x.ncols() {
        let norm = x.column(j).norm();
        if norm > 0.0 {
            let scale = n.sqrt() / norm;
            for i in 0..x.nrows() {
                x[(i, j)] *= scale;
            }
        }
    }
}

/// Materialize the truth vector on the configured support.
///
/// For the beta-min preset the group block norm is
/// `signal_multiple * eps_n / phi_2(s_0)` with unit (Gram) weights, signs
/// alternating across active groups, mass split evenly inside each block.
pub fn build_truth(config: &ExperimentConfig, design: &GroupedDesign) -> Result<PaddedVector> {
    let support = Support::new(config.truth.groups.clone())?;
    let sizes = design.group_sizes();
    let values = match (&config.truth.values, &config.truth.signal_multiple) {
        (Some(v), None) => DVector::from_vec(v.clone()),
        (None, Some(mult)) => {
            let n = design.n() as f64;
            let g = design.num_groups() as f64;
            let s0 = support.len();
            let eps_n = (s0 as f64 * g.ln() / n).sqrt();
            let phi2 = design.compatibility_phi2(
                &vec![1.0; design.n()],
                s0,
                config.tolerances.enum_cap as u128,
            )?;
            let beta_min = mult * eps_n / phi2;
            let mut vals = Vec::new();
            for (k, &gi) in support.groups().iter().enumerate() {
                let m = sizes[gi];
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let coord = sign * beta_min / (m as f64).sqrt();
                vals.extend(std::iter::repeat(coord).take(m));
            }
            DVector::from_vec(vals)
        }
        _ => return Err(Error::Config("invalid truth specification".into())),
    };
    Ok(PaddedVector::new(support, values))
}

/// Draw the response vector for one replicate (stream `replicate + 1`).
pub fn sample_response(
    config: &ExperimentConfig,
    design: &GroupedDesign,
    truth: &PaddedVector,
    replicate: u64,
) -> Result<DVector<f64>> {
    let beta0 = design.embed(truth)?;
    let eta = design.matrix() * beta0;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(replicate + 1);
    let tau = config.family.tau;
    let mut y = DVector::zeros(design.n());
    for i in 0..design.n() {
        y[i] = config.family.kind.sample(eta[i], tau, &mut rng)?;
    }
    Ok(y)
}

/// Generate the full dataset for one replicate at the config's sample size.
pub fn generate_dataset(config: &ExperimentConfig, replicate: u64) -> Result<Dataset> {
    generate_dataset_at(config, config.design.n, replicate)
}

/// Generate a dataset at an explicit sample size (trend experiments).
pub fn generate_dataset_at(
    config: &ExperimentConfig,
    n: usize,
    replicate: u64,
) -> Result<Dataset> {
    let design = build_design(config, n)?;
    let truth = build_truth(config, &design)?;
    let y = sample_response(config, &design, &truth, replicate)?;
    let dispersion = config.dispersion(design.n())?;
    Ok(Dataset {
        dispersion,
        truth,
        y,
        design,
        config_hash: config.hash(),
        seed: config.seed,
        replicate,
    })
}
