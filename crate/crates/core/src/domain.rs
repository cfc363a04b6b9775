//! Data types shared across the continuation pipeline: Matsubara and
//! imaginary-time samples, real-frequency grids and spectral functions.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rug::Float;

use crate::error::{Error, Result};
use crate::precision::{pi, BigComplex};

/// Default tolerance on negative values of an auxiliary spectral density.
pub const DEFAULT_TOL_NEG: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Statistics {
    Bosonic,
    Fermionic,
}

impl Statistics {
    /// 0 for bosons, 1 for fermions: frequency = (2n + offset)π/β.
    pub fn offset(self) -> i64 {
        match self {
            Statistics::Bosonic => 0,
            Statistics::Fermionic => 1,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Statistics::Bosonic => "bosonic",
            Statistics::Fermionic => "fermionic",
        }
    }
}

impl fmt::Display for Statistics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Matsubara frequency (2n + offset)π/β.
pub fn frequency_of(index: i64, beta: f64, statistics: Statistics) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::arg(format!("beta must be positive, got {beta}")));
    }
    Ok((2 * index + statistics.offset()) as f64 * PI / beta)
}

/// Matsubara frequency evaluated at extended precision.
pub fn frequency_big(index: i64, beta: f64, statistics: Statistics, prec: u32) -> Float {
    let m = Float::with_val(prec, 2 * index + statistics.offset());
    m * pi(prec) / Float::with_val(prec, beta)
}

#[derive(Clone, Debug)]
pub struct MatsubaraData {
    pub beta: f64,
    pub statistics: Statistics,
    pub indices: Vec<i64>,
    pub values: Vec<BigComplex>,
    pub precision_bits: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    NonPositiveBeta(f64),
    DuplicateIndex { position: usize, index: i64 },
    NotIncreasing { position: usize },
    LengthMismatch { indices: usize, values: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NonPositiveBeta(b) => write!(f, "beta must be positive (got {b})"),
            Diagnostic::DuplicateIndex { position, index } => {
                write!(f, "duplicate index {index} at position {position}")
            }
            Diagnostic::NotIncreasing { position } => {
                write!(f, "indices not increasing at position {position}")
            }
            Diagnostic::LengthMismatch { indices, values } => {
                write!(f, "{indices} indices but {values} values")
            }
        }
    }
}

/// Collects every invariant violation of `data`.
pub fn validate(data: &MatsubaraData) -> std::result::Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    if !(data.beta > 0.0) {
        diags.push(Diagnostic::NonPositiveBeta(data.beta));
    }
    for (pos, w) in data.indices.windows(2).enumerate() {
        if w[1] == w[0] {
            diags.push(Diagnostic::DuplicateIndex {
                position: pos + 1,
                index: w[1],
            });
        } else if w[1] < w[0] {
            diags.push(Diagnostic::NotIncreasing { position: pos + 1 });
        }
    }
    if data.indices.len() != data.values.len() {
        diags.push(Diagnostic::LengthMismatch {
            indices: data.indices.len(),
            values: data.values.len(),
        });
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

impl MatsubaraData {
    /// Builds a dataset and rejects it if any invariant fails.
    pub fn new(
        beta: f64,
        statistics: Statistics,
        indices: Vec<i64>,
        values: Vec<BigComplex>,
        precision_bits: u32,
    ) -> Result<Self> {
        let data = Self {
            beta,
            statistics,
            indices,
            values,
            precision_bits,
        };
        validate(&data).map_err(|d| {
            Error::arg(
                d.iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            )
        })?;
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&n| (2 * n + self.statistics.offset()) as f64 * PI / self.beta)
            .collect()
    }

    pub fn values_c64(&self) -> Vec<Complex64> {
        self.values.iter().map(BigComplex::to_c64).collect()
    }
}

#[derive(Clone, Debug)]
pub struct ImaginaryTimeData {
    pub beta: f64,
    pub taus: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl ImaginaryTimeData {
    pub fn new(beta: f64, taus: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let data = Self { beta, taus, values };
        data.check()?;
        Ok(data)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::arg("beta must be positive"));
        }
        if self.taus.is_empty() {
            return Err(Error::arg("empty tau grid"));
        }
        if self.taus.len() != self.values.len() {
            return Err(Error::arg(format!(
                "{} taus but {} values",
                self.taus.len(),
                self.values.len()
            )));
        }
        if self.taus.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("tau grid must be strictly increasing"));
        }
        let (first, last) = (self.taus[0], self.taus[self.taus.len() - 1]);
        if !(first > 0.0 && last < self.beta) {
            return Err(Error::arg(format!(
                "tau grid must lie inside (0, {}), got [{first}, {last}]",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Uniform real-frequency grid including both end points.
#[derive(Clone, Debug, PartialEq)]
pub struct RealFrequencyGrid {
    pub omega_min: f64,
    pub omega_max: f64,
    pub count: usize,
}

impl RealFrequencyGrid {
    pub fn new(omega_min: f64, omega_max: f64, count: usize) -> Result<Self> {
        if !(omega_min < omega_max) || count < 2 {
            return Err(Error::arg(format!(
                "grid needs omega_min < omega_max and count >= 2, got [{omega_min}, {omega_max}] x {count}"
            )));
        }
        Ok(Self {
            omega_min,
            omega_max,
            count,
        })
    }

    pub fn spacing(&self) -> f64 {
        (self.omega_max - self.omega_min) / (self.count - 1) as f64
    }

    /// Node i as a weighted average of the end points, so a grid symmetric
    /// about zero has exactly antisymmetric nodes.
    pub fn node(&self, i: usize) -> f64 {
        let m = (self.count - 1) as f64;
        let (lo, hi) = ((self.count - 1 - i) as f64, i as f64);
        (self.omega_min * lo + self.omega_max * hi) / m
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.count).map(|i| self.node(i)).collect()
    }
}

#[derive(Clone, Debug)]
pub struct SpectralFunction {
    pub grid: RealFrequencyGrid,
    pub values: Vec<f64>,
    pub statistics: Statistics,
}

impl SpectralFunction {
    pub fn new(grid: RealFrequencyGrid, values: Vec<f64>, statistics: Statistics) -> Result<Self> {
        if values.len() != grid.count {
            return Err(Error::arg(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.count
            )));
        }
        Ok(Self {
            grid,
            values,
            statistics,
        })
    }

    /// Indices of an auxiliary density falling below `-tol_neg`.
    pub fn negative_nodes(&self, tol_neg: f64) -> Vec<usize> {
        if self.statistics != Statistics::Fermionic {
            return Vec::new();
        }
        self.values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < -tol_neg)
            .map(|(i, _)| i)
            .collect()
    }

    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.spacing())
    }
}

pub(crate) fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..n - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[n - 1]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumRuleSource {
    TauEndpoints,
    TailFit,
    UserSupplied,
}

impl SumRuleSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SumRuleSource::TauEndpoints => "tau-endpoints",
            SumRuleSource::TailFit => "tail-fit",
            SumRuleSource::UserSupplied => "user",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SumRule {
    pub value: f64,
    pub source: SumRuleSource,
    /// Fit residual (tail fit) or 0.
    pub residual: f64,
}

impl SumRule {
    pub fn user(value: f64) -> Self {
        Self {
            value,
            source: SumRuleSource::UserSupplied,
            residual: 0.0,
        }
    }
}
