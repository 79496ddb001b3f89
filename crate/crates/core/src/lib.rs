//! False discovery proportion control for target-decoy and knockoff
//! competition.
//!
//! The crate covers the whole pipeline: pairing target and decoy scores into
//! labeled hypotheses ([`competition`]), fair-coin distribution kernels
//! ([`distributions`]), the FDP-SD stepdown procedure ([`stepdown`]), TDC and
//! the prediction-band procedures built on the uniform, standardized and KR
//! bands ([`bands`]), Monte-Carlo quantile tables for those bands
//! ([`mc_quantiles`]), seeded data generators with ground truth ([`simgen`]) and
//! a replicate evaluation engine ([`harness`]).

pub mod bands;
pub mod cli;
pub mod competition;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod mc_quantiles;
pub mod seed;
pub mod simgen;
pub mod stepdown;

pub use competition::{
    build_sequence, compete, true_fdp, CompetitionSequence, DiscoveryReport, LabeledHypothesis,
    ProcedureId, ScorePair, SimulationTruth, TiePolicy,
};
pub use error::{Error, Result};
