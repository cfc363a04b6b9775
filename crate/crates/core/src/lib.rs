//! Nevanlinna analytic continuation for bosonic and fermionic Matsubara data.
//!
//! Bosonic input is fermionized into an auxiliary problem whose density ρ̃
//! relates to the bosonic one by ρ(ω) = ρ̃(ω)·tanh(βω/2). The auxiliary data
//! is screened for causality, interpolated with the Schur algorithm, and the
//! remaining free function is fitted on a Hardy basis.

pub mod config;
pub mod domain;
pub mod error;
pub mod fermionize;
pub mod io;
pub mod hardy;
pub mod nevanlinna;
pub mod optimize;
pub mod oracle;
pub mod pipeline;
pub mod precision;
mod quadrature;

pub use domain::{
    frequency_of, validate, ImaginaryTimeData, MatsubaraData, RealFrequencyGrid, SpectralFunction,
    Statistics, SumRule, SumRuleSource,
};
pub use error::{Error, Result};
pub use precision::BigComplex;
