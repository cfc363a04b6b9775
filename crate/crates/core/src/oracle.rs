//! Synthetic spectral models, a high-accuracy Lehmann-integral oracle for
//! exact Matsubara and imaginary-time data, and reconstruction metrics.
//!
//! The oracle integrates in extended precision and is deliberately
//! independent of the fermionization and interpolation code it is used to
//! check.

use num_complex::Complex64;
use rug::Float;

use crate::domain::{
    frequency_big, trapezoid, ImaginaryTimeData, MatsubaraData, SpectralFunction, Statistics,
};
use crate::error::{Error, Result};
use crate::precision::{pi, BigComplex};
use crate::quadrature::integrate;

/// Relative tolerance of the oracle quadrature. Far tighter than the 1e-13
/// floor required of it, so exact data also passes causality screening.
pub const DEFAULT_ORACLE_TOL: f64 = 1e-30;

/// Half-width of the per-component integration window, in units of sigma.
const WINDOW_SIGMAS: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    GaussianMixture,
    DeltaPoles,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Component {
    pub weight: f64,
    pub center: f64,
    pub width: f64,
}

/// A spectral model defining the auxiliary density ρ̃ directly.
///
/// For `DeltaPoles` the closed-form Lehmann sums use the weights as the
/// density of whichever statistics is requested, i.e. a bosonic evaluation
/// treats the poles as ρ and a fermionic one as ρ̃.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralModel {
    pub kind: ModelKind,
    pub components: Vec<Component>,
    pub normalize_aux: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Density {
    Aux,
    Bosonic,
}

impl SpectralModel {
    pub fn gaussians(components: Vec<Component>, normalize_aux: bool) -> Result<Self> {
        let m = Self {
            kind: ModelKind::GaussianMixture,
            components,
            normalize_aux,
        };
        m.check()?;
        Ok(m)
    }

    pub fn poles(poles: &[(f64, f64)]) -> Result<Self> {
        let m = Self {
            kind: ModelKind::DeltaPoles,
            components: poles
                .iter()
                .map(|&(weight, center)| Component {
                    weight,
                    center,
                    width: 0.0,
                })
                .collect(),
            normalize_aux: false,
        };
        m.check()?;
        Ok(m)
    }

    /// Two equal Gaussians at ±center with common width, ∫ρ̃ = 1.
    pub fn symmetric_double_peak(center: f64, width: f64) -> Self {
        Self::gaussians(
            vec![
                Component {
                    weight: 0.5,
                    center: -center,
                    width,
                },
                Component {
                    weight: 0.5,
                    center,
                    width,
                },
            ],
            true,
        )
        .expect("valid double peak")
    }

    /// The default benchmark model: peaks at ±2 with width 0.5.
    pub fn default_double_peak() -> Self {
        Self::symmetric_double_peak(2.0, 0.5)
    }

    pub fn check(&self) -> Result<()> {
        for c in &self.components {
            if !(c.weight > 0.0) {
                return Err(Error::arg("component weights must be positive"));
            }
            match self.kind {
                ModelKind::GaussianMixture if !(c.width > 0.0) => {
                    return Err(Error::arg("Gaussian widths must be positive"))
                }
                ModelKind::DeltaPoles if c.width != 0.0 => {
                    return Err(Error::arg("pole widths must be zero"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn weight_scale(&self) -> f64 {
        if self.normalize_aux {
            let total: f64 = self.components.iter().map(|c| c.weight).sum();
            if total > 0.0 {
                return 1.0 / total;
            }
        }
        1.0
    }

    /// ∫ρ̃ dω of the model.
    pub fn aux_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum::<f64>() * self.weight_scale()
    }

    fn aux_density_big(&self, omega: &Float) -> Float {
        let prec = omega.prec();
        let scale = Float::with_val(prec, self.weight_scale());
        let sqrt_2pi = (Float::with_val(prec, 2u32) * pi(prec)).sqrt();
        let mut acc = Float::new(prec);
        for c in &self.components {
            let sigma = Float::with_val(prec, c.width);
            let d = Float::with_val(prec, omega - c.center) / &sigma;
            let g = (Float::with_val(prec, d.square_ref()) / -2i32).exp();
            acc += g * c.weight / (Float::with_val(prec, &sqrt_2pi * &sigma));
        }
        acc * scale
    }

    /// Integration windows: union of component windows, each split at zero.
    fn windows(&self, prec: u32) -> Vec<Vec<Float>> {
        let mut spans: Vec<(f64, f64)> = self
            .components
            .iter()
            .map(|c| {
                (
                    c.center - WINDOW_SIGMAS * c.width,
                    c.center + WINDOW_SIGMAS * c.width,
                )
            })
            .collect();
        spans.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for w in spans {
            match merged.last_mut() {
                Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
                _ => merged.push(w),
            }
        }
        merged
            .into_iter()
            .map(|(a, b)| {
                let mut pts = vec![a];
                if a < 0.0 && b > 0.0 {
                    pts.push(0.0);
                }
                pts.push(b);
                pts.into_iter().map(|x| Float::with_val(prec, x)).collect()
            })
            .collect()
    }

    fn integrate_windows<F>(&self, prec: u32, rel_tol: f64, f: F) -> Result<BigComplex>
    where
        F: Fn(&Float) -> Result<BigComplex>,
    {
        let mut total = BigComplex::zero(prec);
        for breaks in self.windows(prec) {
            total = &total + &integrate(&f, &breaks, rel_tol)?;
        }
        Ok(total)
    }
}

/// ρ̃(ω) (Aux) or ρ(ω) = ρ̃(ω)·tanh(βω/2) (Bosonic) of a Gaussian mixture.
pub fn model_density(model: &SpectralModel, omega: f64, beta: f64, which: Density) -> Result<f64> {
    if model.kind == ModelKind::DeltaPoles {
        return Err(Error::arg(
            "delta poles have no pointwise density; integrate them instead",
        ));
    }
    let aux = model.aux_density_big(&Float::with_val(128, omega)).to_f64();
    Ok(match which {
        Density::Aux => aux,
        Density::Bosonic => aux * (0.5 * beta * omega).tanh(),
    })
}

/// Exact Lehmann-representation values at the requested Matsubara indices.
pub fn oracle_matsubara(
    model: &SpectralModel,
    beta: f64,
    indices: &[i64],
    statistics: Statistics,
    prec: u32,
) -> Result<MatsubaraData> {
    oracle_matsubara_tol(model, beta, indices, statistics, prec, DEFAULT_ORACLE_TOL)
}

pub fn oracle_matsubara_tol(
    model: &SpectralModel,
    beta: f64,
    indices: &[i64],
    statistics: Statistics,
    prec: u32,
    rel_tol: f64,
) -> Result<MatsubaraData> {
    model.check()?;
    if !(beta > 0.0) {
        return Err(Error::arg("beta must be positive"));
    }
    let values = indices
        .iter()
        .map(|&n| lehmann_value(model, beta, n, statistics, prec, rel_tol))
        .collect::<Result<Vec<_>>>()?;
    MatsubaraData::new(beta, statistics, indices.to_vec(), values, prec)
}

fn lehmann_value(
    model: &SpectralModel,
    beta: f64,
    n: i64,
    statistics: Statistics,
    prec: u32,
    rel_tol: f64,
) -> Result<BigComplex> {
    let freq = frequency_big(n, beta, statistics, prec);
    let iw = BigComplex::new(Float::new(prec), freq.clone());
    let half_beta = Float::with_val(prec, beta) / 2u32;
    match model.kind {
        ModelKind::DeltaPoles => {
            let mut acc = BigComplex::zero(prec);
            for c in &model.components {
                let w = Float::with_val(prec, c.weight);
                let center = BigComplex::from_f64(prec, c.center, 0.0);
                let den = &iw - &center;
                if den.re.is_zero() && den.im.is_zero() {
                    return Err(Error::arg("bosonic pole at zero frequency diverges at n = 0"));
                }
                acc = &acc + &(BigComplex::from_real(w) / den);
            }
            Ok(acc)
        }
        ModelKind::GaussianMixture => {
            let f = |omega: &Float| -> Result<BigComplex> {
                let rho = model.aux_density_big(omega);
                match statistics {
                    Statistics::Fermionic => {
                        let den = &iw - &BigComplex::from_real(omega.clone());
                        Ok(BigComplex::from_real(rho) / den)
                    }
                    Statistics::Bosonic => {
                        if freq.is_zero() {
                            // tanh(βω/2)/(0 - ω), finite at ω = 0
                            let k = if omega.is_zero() {
                                -half_beta.clone()
                            } else {
                                -Float::with_val(prec, omega * &half_beta).tanh() / omega
                            };
                            Ok(BigComplex::from_real(rho * k))
                        } else {
                            let t = Float::with_val(prec, omega * &half_beta).tanh();
                            let den = &iw - &BigComplex::from_real(omega.clone());
                            Ok(BigComplex::from_real(rho * t) / den)
                        }
                    }
                }
            };
            model.integrate_windows(prec, rel_tol, f)
        }
    }
}

/// χ̃(z) = ∫ρ̃(ω)/(z − ω) dω at an arbitrary point off the real axis.
pub fn oracle_green(model: &SpectralModel, z: &BigComplex, rel_tol: f64) -> Result<BigComplex> {
    model.check()?;
    let prec = z.prec();
    match model.kind {
        ModelKind::DeltaPoles => {
            let mut acc = BigComplex::zero(prec);
            for c in &model.components {
                let den = z - &BigComplex::from_f64(prec, c.center, 0.0);
                acc = &acc + &(BigComplex::from_f64(prec, c.weight, 0.0) / den);
            }
            Ok(acc)
        }
        ModelKind::GaussianMixture => {
            if z.im.is_zero() {
                return Err(Error::arg("z must lie off the real axis"));
            }
            let mut breaks = Vec::new();
            for mut w in model.windows(prec) {
                // resolve the near-pole at Re z
                let x = Float::with_val(prec, &z.re);
                if w.first().map_or(false, |a| *a < x) && w.last().map_or(false, |b| *b > x) {
                    w.push(x);
                    w.sort_by(|a, b| a.partial_cmp(b).unwrap());
                }
                breaks.push(w);
            }
            let f = |omega: &Float| -> Result<BigComplex> {
                let den = z - &BigComplex::from_real(omega.clone());
                Ok(BigComplex::from_real(model.aux_density_big(omega)) / den)
            };
            let mut total = BigComplex::zero(prec);
            for b in breaks {
                total = &total + &integrate(&f, &b, rel_tol)?;
            }
            Ok(total)
        }
    }
}

/// Fermionic Lehmann kernel for τ ∈ (−β, β): −e^{−τω}/(1 + e^{−βω}) for τ > 0
/// and e^{−τω}/(1 + e^{βω}) for τ < 0.
pub fn fermionic_kernel_tau(tau: &Float, omega: &Float, beta: &Float) -> Float {
    let prec = tau.prec();
    let x = Float::with_val(prec, tau * omega);
    if tau.is_sign_positive() {
        let bw = Float::with_val(prec, beta * omega);
        // -exp(-τω) / (1 + exp(-βω)), arranged to avoid overflow
        if omega.is_sign_negative() {
            let num = (Float::with_val(prec, &bw - &x)).exp();
            -(num / (bw.exp() + 1u32))
        } else {
            -((-x).exp() / ((-bw).exp() + 1u32))
        }
    } else {
        let bw = Float::with_val(prec, beta * omega);
        (-x).exp() / (bw.exp() + 1u32)
    }
}

fn bosonic_kernel_tau(tau: &Float, omega: &Float, beta: &Float) -> Float {
    let prec = tau.prec();
    let x = Float::with_val(prec, tau * omega);
    let bw = Float::with_val(prec, beta * omega);
    -((-x).exp() / (Float::with_val(prec, 1u32) - (-bw).exp()))
}

/// Exact χ(τ) on the given imaginary times.
///
/// On (0, β) the bosonic correlator of ρ = ρ̃·tanh(βω/2) coincides with the
/// fermionic-kernel transform of ρ̃, so Gaussian models are always integrated
/// in that form (smooth at ω = 0). Delta poles use the closed form of the
/// requested statistics.
pub fn oracle_tau(
    model: &SpectralModel,
    beta: f64,
    taus: &[f64],
    statistics: Statistics,
    prec: u32,
) -> Result<ImaginaryTimeData> {
    model.check()?;
    if !(beta > 0.0) {
        return Err(Error::arg("beta must be positive"));
    }
    if let Some(t) = taus.iter().find(|&&t| !(t > 0.0 && t < beta)) {
        return Err(Error::arg(format!("tau {t} outside (0, {beta})")));
    }
    let beta_big = Float::with_val(prec, beta);
    let mut values = Vec::with_capacity(taus.len());
    for &t in taus {
        let tau = Float::with_val(prec, t);
        let v = match model.kind {
            ModelKind::DeltaPoles => {
                let mut acc = Float::new(prec);
                for c in &model.components {
                    let omega = Float::with_val(prec, c.center);
                    let k = match statistics {
                        Statistics::Fermionic => fermionic_kernel_tau(&tau, &omega, &beta_big),
                        Statistics::Bosonic => {
                            if omega.is_zero() {
                                return Err(Error::arg("bosonic pole at zero frequency"));
                            }
                            bosonic_kernel_tau(&tau, &omega, &beta_big)
                        }
                    };
                    acc += k * c.weight;
                }
                acc
            }
            ModelKind::GaussianMixture => {
                let f = |omega: &Float| -> Result<BigComplex> {
                    let k = fermionic_kernel_tau(&tau, omega, &beta_big);
                    Ok(BigComplex::from_real(k * model.aux_density_big(omega)))
                };
                model.integrate_windows(prec, 1e-20, f)?.re
            }
        };
        values.push(Complex64::new(v.to_f64(), 0.0));
    }
    ImaginaryTimeData::new(beta, taus.to_vec(), values)
}

/// Chebyshev-distributed points strictly inside (0, β), increasing.
pub fn chebyshev_taus(beta: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let theta = std::f64::consts::PI * (k as f64 + 0.5) / count as f64;
            0.5 * beta * (1.0 - theta.cos())
        })
        .collect()
}

/// Bosonic indices for frequency-space fermionization: every n below 100,
/// then a geometric ladder (ratio 1.2) up to n ≈ 3000 to pin the tail.
pub fn bosonic_fit_indices() -> Vec<i64> {
    let mut idx: Vec<i64> = (0..100).collect();
    let mut x = 100.0f64;
    while x < 3000.0 {
        x *= 1.2;
        idx.push(x as i64);
    }
    idx.dedup();
    idx
}

/// Log-spaced fermionic indices n = ⌊10^{k/8}⌋ up to ~7.5·10⁴, for tail fits
/// free of the finite-frequency bias of a low-lying window.
pub fn tail_fit_indices() -> Vec<i64> {
    let mut idx: Vec<i64> = (0..40).map(|k| 10f64.powf(k as f64 / 8.0) as i64).collect();
    idx.dedup();
    idx
}

/// Samples the model density on a grid.
pub fn model_spectral(
    model: &SpectralModel,
    grid: &crate::domain::RealFrequencyGrid,
    beta: f64,
    which: Density,
) -> Result<SpectralFunction> {
    let values = grid
        .nodes()
        .into_iter()
        .map(|w| model_density(model, w, beta, which))
        .collect::<Result<Vec<_>>>()?;
    let stats = match which {
        Density::Aux => Statistics::Fermionic,
        Density::Bosonic => Statistics::Bosonic,
    };
    SpectralFunction::new(grid.clone(), values, stats)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub l2: f64,
    pub linf: f64,
    pub sum_rule_violation: f64,
    pub peak_position_error: f64,
}

/// Error metrics of `reconstructed` against `exact` on an identical grid.
///
/// The peak position is searched over ω > 0 when the grid has positive
/// nodes, which picks one peak of a symmetric model deterministically.
pub fn compare(exact: &SpectralFunction, reconstructed: &SpectralFunction) -> Result<Metrics> {
    if exact.grid != reconstructed.grid || exact.values.len() != reconstructed.values.len() {
        return Err(Error::arg("spectral functions live on different grids"));
    }
    let h = exact.grid.spacing();
    let diff: Vec<f64> = exact
        .values
        .iter()
        .zip(&reconstructed.values)
        .map(|(a, b)| b - a)
        .collect();
    let l2 = (diff.iter().map(|d| d * d).sum::<f64>() * h).sqrt();
    let linf = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let sum_rule_violation = (trapezoid(&exact.values, h) - trapezoid(&reconstructed.values, h)).abs();
    let nodes = exact.grid.nodes();
    let positive: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i] > 0.0).collect();
    let range: Vec<usize> = if positive.is_empty() {
        (0..nodes.len()).collect()
    } else {
        positive
    };
    let argmax = |v: &[f64]| {
        range
            .iter()
            .copied()
            .max_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap())
            .unwrap()
    };
    let peak_position_error = (nodes[argmax(&exact.values)] - nodes[argmax(&reconstructed.values)]).abs();
    Ok(Metrics {
        l2,
        linf,
        sum_rule_violation,
        peak_position_error,
    })
}

/// ‖f‖₂ = √(Σ f² Δω) on the grid.
pub fn l2_norm(f: &SpectralFunction) -> f64 {
    (f.values.iter().map(|v| v * v).sum::<f64>() * f.grid.spacing()).sqrt()
}
