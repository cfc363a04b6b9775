//! Bosonic → auxiliary fermionic transforms.
//!
//! A bosonic correlator χ(τ) on (0, β), read as a fermionic (antiperiodic)
//! function, has the fermionic Lehmann representation with density
//! ρ̃(ω) = ρ(ω)/tanh(βω/2). Its Matsubara transform is therefore an ordinary
//! fermionic continuation problem.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::domain::{
    frequency_of, ImaginaryTimeData, MatsubaraData, RealFrequencyGrid, SpectralFunction, Statistics, SumRule,
    SumRuleSource,
};
use crate::error::{Error, Result};
use crate::precision::{default_precision, BigComplex};

/// Roughly logarithmic set of 36 non-negative fermionic indices.
pub const DEFAULT_TARGET_INDICES: [i64; 36] = [
    0, 1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 18, 22, 27, 33, 40, 49, 60, 73, 89, 109, 133, 162, 198, 242, 296, 361, 441,
    539, 658, 804, 982, 1200, 1466, 1791, 2188,
];

/// Endpoint coverage required by [`sum_rule_from_tau`], as a fraction of β.
pub const ENDPOINT_COVERAGE: f64 = 0.05;

#[derive(Clone, Debug)]
pub struct FermionizeConfig {
    pub target_indices: Vec<i64>,
    pub fit_grid: RealFrequencyGrid,
    pub tikhonov_alpha: f64,
    pub svd_cutoff_rel: f64,
    /// Significand width of the returned values.
    pub precision_bits: u32,
}

impl Default for FermionizeConfig {
    fn default() -> Self {
        Self {
            target_indices: DEFAULT_TARGET_INDICES.to_vec(),
            fit_grid: RealFrequencyGrid {
                omega_min: -8.0,
                omega_max: 8.0,
                count: 801,
            },
            tikhonov_alpha: 1e-12,
            svd_cutoff_rel: 1e-12,
            precision_bits: default_precision(),
        }
    }
}

impl FermionizeConfig {
    pub fn check(&self) -> Result<()> {
        if self.target_indices.iter().any(|&n| n < 0) {
            return Err(Error::arg("target indices must be non-negative"));
        }
        if self.target_indices.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::arg("target indices must be strictly increasing"));
        }
        if !(self.tikhonov_alpha >= 0.0) {
            return Err(Error::arg("tikhonov_alpha must be non-negative"));
        }
        if !(self.svd_cutoff_rel >= 0.0) {
            return Err(Error::arg("svd_cutoff_rel must be non-negative"));
        }
        RealFrequencyGrid::new(self.fit_grid.omega_min, self.fit_grid.omega_max, self.fit_grid.count)?;
        Ok(())
    }

    fn output(&self, beta: f64, values: Vec<Complex64>) -> Result<MatsubaraData> {
        let prec = self.precision_bits;
        MatsubaraData::new(
            beta,
            Statistics::Fermionic,
            self.target_indices.clone(),
            values.into_iter().map(|v| BigComplex::from_c64(prec, v)).collect(),
            prec,
        )
    }
}

/// ∫₀¹ s^k e^{iθs} ds for k = 0..=3.
fn moments(theta: f64) -> [Complex64; 4] {
    let mut m = [Complex64::new(0.0, 0.0); 4];
    if theta.abs() < 1.0 {
        // Σ_j (iθ)^j / (j! (k + j + 1))
        let it = Complex64::new(0.0, theta);
        let mut term = Complex64::new(1.0, 0.0);
        for j in 0..30 {
            for (k, mk) in m.iter_mut().enumerate() {
                *mk += term / (k + j + 1) as f64;
            }
            term = term * it / (j + 1) as f64;
        }
    } else {
        let it = Complex64::new(0.0, theta);
        let e = it.exp();
        m[0] = (e - 1.0) / it;
        for k in 1..4 {
            m[k] = (e - k as f64 * m[k - 1]) / it;
        }
    }
    m
}

/// Monomial coefficients (in s) of the cubic through (s_i, y_i), i = 0..4.
fn cubic_through(s: [f64; 4], y: [Complex64; 4]) -> [Complex64; 4] {
    let mut out = [Complex64::new(0.0, 0.0); 4];
    for i in 0..4 {
        // Lagrange basis ℓ_i as a monomial polynomial.
        let mut poly = [1.0, 0.0, 0.0, 0.0];
        let mut denom = 1.0;
        let mut deg = 0;
        for j in 0..4 {
            if j == i {
                continue;
            }
            // poly *= (x - s_j)
            for d in (0..=deg).rev() {
                poly[d + 1] += poly[d];
                poly[d] *= -s[j];
            }
            deg += 1;
            denom *= s[i] - s[j];
        }
        for (o, p) in out.iter_mut().zip(poly) {
            *o += y[i] * (p / denom);
        }
    }
    out
}

/// Value of the cubic with monomial coefficients `c` at `s`.
fn horner(c: &[Complex64; 4], s: f64) -> Complex64 {
    ((c[3] * s + c[2]) * s + c[1]) * s + c[0]
}

/// Clamped cubic spline through (τ_i, χ_i) with end slopes taken from the
/// cubic through the four outermost nodes. Returns, for every knot interval
/// [0, τ_0], [τ_0, τ_1], …, [τ_{n−1}, β], its start, width and monomial
/// coefficients in the local variable s ∈ [0, 1]; the two outer intervals
/// continue the neighbouring spline piece.
fn spline_pieces(data: &ImaginaryTimeData) -> Vec<(f64, f64, [Complex64; 4])> {
    let t = &data.taus;
    let y = &data.values;
    let n = t.len();
    let end_slope = |k: usize, at: f64| {
        let mut s = [0.0; 4];
        let mut v = [Complex64::new(0.0, 0.0); 4];
        for j in 0..4 {
            s[j] = t[k + j] - at;
            v[j] = y[k + j];
        }
        cubic_through(s, v)[1]
    };
    let d0 = end_slope(0, t[0]);
    let dn = end_slope(n - 4, t[n - 1]);
    let h: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    let slope = |i: usize| (y[i + 1] - y[i]) / h[i];

    // Tridiagonal system for the second derivatives M_i (Thomas algorithm).
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut lower = vec![0.0; n];
    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    diag[0] = 2.0 * h[0];
    upper[0] = h[0];
    rhs[0] = (slope(0) - d0) * 6.0;
    for i in 1..n - 1 {
        lower[i] = h[i - 1];
        diag[i] = 2.0 * (h[i - 1] + h[i]);
        upper[i] = h[i];
        rhs[i] = (slope(i) - slope(i - 1)) * 6.0;
    }
    lower[n - 1] = h[n - 2];
    diag[n - 1] = 2.0 * h[n - 2];
    rhs[n - 1] = (dn - slope(n - 2)) * 6.0;
    for i in 1..n {
        let m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] = rhs[i] - rhs[i - 1] * m;
    }
    let mut m2 = vec![Complex64::new(0.0, 0.0); n];
    m2[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        m2[i] = (rhs[i] - m2[i + 1] * upper[i]) / diag[i];
    }

    let piece = |i: usize| {
        let hh = h[i] * h[i];
        [
            y[i],
            y[i + 1] - y[i] - (m2[i] * 2.0 + m2[i + 1]) * (hh / 6.0),
            m2[i] * (hh / 2.0),
            (m2[i + 1] - m2[i]) * (hh / 6.0),
        ]
    };
    // Re-expands piece `i` on [a, a + w].
    let extend = |i: usize, a: f64, w: f64| {
        let c = piece(i);
        let mut s = [0.0; 4];
        let mut v = [Complex64::new(0.0, 0.0); 4];
        for j in 0..4 {
            let x = a + w * j as f64 / 3.0;
            s[j] = j as f64 / 3.0;
            v[j] = horner(&c, (x - t[i]) / h[i]);
        }
        cubic_through(s, v)
    };

    let mut out = Vec::with_capacity(n + 1);
    if t[0] > 0.0 {
        out.push((0.0, t[0], extend(0, 0.0, t[0])));
    }
    for i in 0..n - 1 {
        out.push((t[i], h[i], piece(i)));
    }
    if data.beta > t[n - 1] {
        out.push((t[n - 1], data.beta - t[n - 1], extend(n - 2, t[n - 1], data.beta - t[n - 1])));
    }
    out
}

/// ∫₀^β e^{iωτ} χ(τ) dτ with χ represented piecewise by cubics.
fn transform_pieces(pieces: &[(f64, f64, [Complex64; 4])], omega: f64) -> Complex64 {
    pieces
        .iter()
        .map(|(a, h, c)| {
            let m = moments(omega * h);
            let local: Complex64 = c.iter().zip(&m).map(|(ck, mk)| ck * mk).sum();
            local * *h * Complex64::new(0.0, omega * a).exp()
        })
        .sum()
}

/// χ̃(iω_n) = ∫₀^β e^{iω_n τ} χ(τ) dτ at the configured fermionic indices.
pub fn fermionize_tau(data: &ImaginaryTimeData, cfg: &FermionizeConfig) -> Result<MatsubaraData> {
    data.check()?;
    cfg.check()?;
    if data.taus.len() < 4 {
        return Err(Error::arg("at least 4 tau nodes are needed for cubic interpolation"));
    }
    let pieces = spline_pieces(data);
    let values = cfg
        .target_indices
        .iter()
        .map(|&n| Ok(transform_pieces(&pieces, frequency_of(n, data.beta, Statistics::Fermionic)?)))
        .collect::<Result<Vec<_>>>()?;
    cfg.output(data.beta, values)
}

/// tanh(βω/2)/(iν − ω), with the ν = ω = 0 limit −β/2.
fn bosonic_kernel(nu: f64, omega: f64, beta: f64) -> Complex64 {
    if omega == 0.0 {
        return if nu == 0.0 {
            Complex64::new(-beta / 2.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
    }
    (0.5 * beta * omega).tanh() / Complex64::new(-omega, nu)
}

/// Result of [`fermionize_freq`].
#[derive(Clone, Debug)]
pub struct FrequencyFit {
    pub data: MatsubaraData,
    /// Fitted auxiliary density on the fit grid.
    pub density: SpectralFunction,
    /// Singular values kept by the cutoff.
    pub rank: usize,
}

/// Fits ρ̃ on the fit grid to bosonic Matsubara data and evaluates its
/// fermionic transform at the target indices.
pub fn fermionize_freq(data: &MatsubaraData, cfg: &FermionizeConfig) -> Result<FrequencyFit> {
    if data.statistics != Statistics::Bosonic {
        return Err(Error::arg("fermionize_freq expects bosonic data"));
    }
    cfg.check()?;
    if data.is_empty() {
        return Err(Error::arg("empty Matsubara data"));
    }
    let grid = &cfg.fit_grid;
    let dw = grid.spacing();
    let omegas = grid.nodes();
    let nus = data.frequencies();
    let rows = nus.len();
    let cols = omegas.len();

    // Real stacking of the complex system: [Re K; Im K] c ≈ [Re χ; Im χ].
    let mut k = DMatrix::<f64>::zeros(2 * rows, cols);
    let mut rhs = DVector::<f64>::zeros(2 * rows);
    for (r, (&nu, v)) in nus.iter().zip(data.values_c64()).enumerate() {
        for (c, &w) in omegas.iter().enumerate() {
            let kv = bosonic_kernel(nu, w, data.beta) * dw;
            k[(r, c)] = kv.re;
            k[(rows + r, c)] = kv.im;
        }
        rhs[r] = v.re;
        rhs[rows + r] = v.im;
    }

    let svd = k.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = cfg.svd_cutoff_rel * smax;
    let mut coeffs = DVector::<f64>::zeros(cols);
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if !(s > cutoff) || s == 0.0 {
            continue;
        }
        rank += 1;
        let proj = u.column(i).dot(&rhs);
        let filt = s / (s * s + cfg.tikhonov_alpha);
        coeffs += vt.row(i).transpose() * (proj * filt);
    }
    if rank == 0 {
        return Err(Error::Degenerate("all singular values fall below the cutoff".into()));
    }

    let values = cfg
        .target_indices
        .iter()
        .map(|&n| {
            let wn = frequency_of(n, data.beta, Statistics::Fermionic)?;
            Ok(omegas
                .iter()
                .zip(coeffs.iter())
                .map(|(&w, &c)| c * dw / Complex64::new(-w, wn))
                .sum())
        })
        .collect::<Result<Vec<Complex64>>>()?;
    Ok(FrequencyFit {
        data: cfg.output(data.beta, values)?,
        density: SpectralFunction::new(grid.clone(), coeffs.iter().copied().collect(), Statistics::Fermionic)?,
        rank,
    })
}

/// Value at `x` of the cubic through four (t, v) points.
fn cubic_at(t: &[f64], v: &[Complex64], x: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        let mut l = 1.0;
        for j in 0..4 {
            if j != i {
                l *= (x - t[j]) / (t[i] - t[j]);
            }
        }
        acc += v[i] * l;
    }
    acc
}

/// S = −(χ(0⁺) + χ(β⁻)) from cubic extrapolation of the four outermost nodes
/// at each end.
pub fn sum_rule_from_tau(data: &ImaginaryTimeData) -> Result<SumRule> {
    data.check()?;
    let n = data.taus.len();
    let beta = data.beta;
    let lo = data.taus[0] / beta;
    let hi = (beta - data.taus[n - 1]) / beta;
    let worst = lo.max(hi);
    if worst > ENDPOINT_COVERAGE {
        return Err(Error::Precondition {
            message: format!(
                "tau nodes must reach within {ENDPOINT_COVERAGE}·beta of both endpoints"
            ),
            coverage: worst,
        });
    }
    if n < 4 {
        return Err(Error::Precondition {
            message: "at least 4 tau nodes are needed for cubic extrapolation".into(),
            coverage: worst,
        });
    }
    let left = cubic_at(&data.taus[..4], &data.values[..4], 0.0);
    let right = cubic_at(&data.taus[n - 4..], &data.values[n - 4..], beta);
    Ok(SumRule {
        value: -(left + right).re,
        source: SumRuleSource::TauEndpoints,
        residual: 0.0,
    })
}

/// Least-squares fit of Im χ̃(iω_n) ≈ −S/ω_n over the top quartile of
/// frequencies; the residual is the RMS misfit relative to the RMS data.
pub fn sum_rule_from_tail(data: &MatsubaraData) -> Result<SumRule> {
    if data.len() < 4 {
        return Err(Error::arg("tail fit needs at least 4 points"));
    }
    if data.statistics != Statistics::Fermionic {
        return Err(Error::arg("tail fit expects fermionic data"));
    }
    let freqs = data.frequencies();
    let vals = data.values_c64();
    let take = (data.len() / 4).max(4);
    let mut pts: Vec<(f64, f64)> = freqs.iter().zip(&vals).map(|(&w, v)| (w, v.im)).collect();
    pts.sort_by(|a, b| a.0.abs().partial_cmp(&b.0.abs()).unwrap());
    let tail = &pts[pts.len() - take..];
    // minimize Σ (y + S x)², x = 1/ω
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(w, y) in tail {
        let x = 1.0 / w;
        sxy += x * y;
        sxx += x * x;
        syy += y * y;
    }
    let s = -sxy / sxx;
    let misfit: f64 = tail.iter().map(|&(w, y)| (y + s / w).powi(2)).sum();
    let residual = if syy > 0.0 { (misfit / syy).sqrt() } else { 0.0 };
    Ok(SumRule {
        value: s,
        source: SumRuleSource::TailFit,
        residual,
    })
}

/// ρ(ω) = ρ̃(ω)·tanh(βω/2) on the same grid.
pub fn tanh_convert(rho_aux: &SpectralFunction, beta: f64) -> SpectralFunction {
    let values = rho_aux
        .grid
        .nodes()
        .iter()
        .zip(&rho_aux.values)
        .map(|(&w, &r)| r * (0.5 * beta * w).tanh())
        .collect();
    SpectralFunction {
        grid: rho_aux.grid.clone(),
        values,
        statistics: Statistics::Bosonic,
    }
}
