//! Numerical laboratory for spike-and-slab fractional posteriors in grouped
//! sparse generalized linear models.
//!
//! The crate enumerates sparse supports exactly (no MCMC), computes per-support
//! tempered marginal likelihoods both by Laplace proxies and by deterministic
//! quadrature / importance sampling, and assembles the supportwise Gaussian
//! mixture and oracle Gaussian approximations together with the diagnostics
//! (total variation distances, credible sets, support recovery, score
//! envelopes, Renyi separation, assumption audits) needed to probe their
//! finite-sample accuracy.
//!
//! Modules mirror the pipeline:
//!
//! - [`family`]: the six exponential-family/link bundles (cumulants, links,
//!   densities, samplers, Hellinger and Renyi divergences).
//! - [`design`]: grouped design matrices, supports, zero-padded embeddings,
//!   and design-side constants (row envelopes, compatibility numbers, sparse
//!   influence/leverage, sparse Gram extremes).
//! - [`prior`]: Dirac spike-and-slab priors (complexity / Beta-Binomial size
//!   priors, group Gaussian / group Laplace slabs) and prior-constant audits.
//! - [`fit`]: restricted log-likelihoods, Newton fits on ellipsoid trust
//!   regions, pseudo-true centers, normalized scores, LAN remainders, and
//!   Schur-complement projection algebra.
//! - [`posterior`]: per-support marginals, the enumerated support posterior,
//!   quadratic-score mixture weights, the oracle law, and posterior samplers.
//! - [`diagnostics`]: TV distances, credible sets, coverage / recovery /
//!   score-envelope / Renyi / contraction experiments, and the assumption
//!   audit table.
//! - [`experiment`]: experiment configuration, dataset generation, and the
//!   artifact-producing runner behind the CLI.

pub mod design;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod family;
pub mod fit;
pub mod num;
pub mod posterior;
pub mod prior;

pub use design::{GroupedDesign, PaddedVector, Support};
pub use error::{Error, Result};
pub use family::{Dispersion, GlmFamily};
pub use fit::{FitResult, PopulationCenter, RestrictedModel};
pub use posterior::{MarginalEstimate, OracleLaw, SupportPosterior};
pub use prior::{SasPrior, SizePrior, Slab};
