//! Minimum bridge density power divergence (BDPD) estimation.
//!
//! The BDPD family indexes a set of robust M-estimators by a robustness
//! parameter `alpha` and a bridge parameter `lambda`. `lambda = 1` gives the
//! density power divergence (DPD) and `lambda = 0` the logarithmic density
//! power divergence (LDPD); `alpha = 0` gives maximum likelihood for every
//! `lambda`.
//!
//! Module map:
//!
//! * [`families`] parametric models, their scores and closed-form model integrals
//! * [`divergence`] sample and population objectives, estimating equations,
//!   cross entropies and the Pythagorean defect
//! * [`optimize`] local and multistart minimization, the chain algorithm,
//!   landscape profiles and spurious-minimum diagnostics
//! * [`asymptotics`] sandwich variance, determinant closeness and tuning
//! * [`simulate`] contaminated-sample Monte Carlo studies
//! * [`io`] data ingestion and result serialization
//! * [`cli`] the `bdpd` command-line front end

pub mod asymptotics;
pub mod cli;
pub mod divergence;
mod error;
pub mod families;
pub mod fixtures;
pub mod io;
pub mod optimize;
pub mod simulate;

pub use divergence::BridgeConfig;
pub use error::{Error, Result};
pub use families::{Family, Theta};
