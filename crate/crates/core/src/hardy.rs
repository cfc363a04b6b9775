//! Hardy-basis parametrization of the free Schur function and its
//! optimization.
//!
//! θ_{M+1}(z) = Σ_k (a_k + i b_k) f_k(z), f_k(z) = ((z − i)/(z + i))^k / (√π (z + i)).
//!
//! The cost is F = (S − ∫ρ̃)² + λ ∫(ρ̃″)² with ρ̃ the spectral function of the
//! resulting interpolant. Coefficients whose free function leaves the unit
//! disk on the check set get F = +∞.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rug::Float;

use crate::domain::{trapezoid, RealFrequencyGrid, SpectralFunction, Statistics, SumRule};
use crate::error::{Error, Result};
use crate::nevanlinna::{EvaluationConfig, SchurState, Transfer};
use crate::optimize::{lbfgs, LbfgsOptions, Objective};
use crate::precision::{pi, BigComplex};

pub use crate::optimize::{OptimizeStatus, TraceEntry};

pub const DEFAULT_HARDY_ORDER: usize = 100;
pub const DEFAULT_LAMBDA: f64 = 1e-4;

/// Expansion coefficients stored as interleaved pairs (a_0, b_0, a_1, b_1, …).
#[derive(Clone, Debug, PartialEq)]
pub struct HardyCoefficients {
    pub order: usize,
    pub coeffs: Vec<f64>,
}

impl HardyCoefficients {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            coeffs: vec![0.0; 2 * order],
        }
    }

    pub fn from_vec(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() % 2 != 0 {
            return Err(Error::arg("hardy coefficients come in (re, im) pairs"));
        }
        Ok(Self {
            order: coeffs.len() / 2,
            coeffs,
        })
    }

    pub fn complex(&self, k: usize) -> Complex64 {
        Complex64::new(self.coeffs[2 * k], self.coeffs[2 * k + 1])
    }
}

/// f_0(z), …, f_{order−1}(z).
pub fn hardy_basis(order: usize, z: &BigComplex) -> Vec<BigComplex> {
    let prec = z.prec();
    let i = BigComplex::i(prec);
    let zp = z + &i;
    let ratio = &(z - &i) / &zp;
    let sqrt_pi = pi(prec).sqrt();
    let mut f = zp.scale(&sqrt_pi).recip();
    let mut out = Vec::with_capacity(order);
    for _ in 0..order {
        let next = &f * &ratio;
        out.push(f);
        f = next;
    }
    out
}

fn combine(coeffs: &[f64], basis: &[BigComplex]) -> BigComplex {
    let prec = basis.first().map_or(64, BigComplex::prec);
    let mut acc = BigComplex::zero(prec);
    for (k, f) in basis.iter().enumerate() {
        let (a, b) = (coeffs[2 * k], coeffs[2 * k + 1]);
        if a == 0.0 && b == 0.0 {
            continue;
        }
        acc = &acc + &(f * &BigComplex::from_f64(prec, a, b));
    }
    acc
}

fn combine_f64(coeffs: &[f64], basis: &[Complex64]) -> Complex64 {
    basis
        .iter()
        .enumerate()
        .map(|(k, f)| f * Complex64::new(coeffs[2 * k], coeffs[2 * k + 1]))
        .sum()
}

/// θ_{M+1}(z) for the given coefficients.
pub fn hardy_eval(coeffs: &HardyCoefficients, z: &BigComplex) -> BigComplex {
    combine(&coeffs.coeffs, &hardy_basis(coeffs.order, z))
}

#[derive(Clone, Debug)]
pub struct CostConfig {
    pub lambda: f64,
    pub sum_rule: SumRule,
    pub grid: RealFrequencyGrid,
    pub eta: f64,
}

impl CostConfig {
    pub fn new(sum_rule: SumRule, eval: &EvaluationConfig) -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            sum_rule,
            grid: eval.grid.clone(),
            eta: eval.eta,
        }
    }

    pub fn evaluation(&self) -> EvaluationConfig {
        EvaluationConfig {
            eta: self.eta,
            grid: self.grid.clone(),
        }
    }
}

/// Upper-half-plane lattice of the admissibility check: 21 points uniformly
/// over [−10, 10] times 11 points log-spaced over [10⁻², 10].
pub fn check_lattice() -> Vec<Complex64> {
    let mut pts = Vec::with_capacity(21 * 11);
    for ix in 0..21 {
        let x = -10.0 + ix as f64;
        for iy in 0..11 {
            let y = 10f64.powf(-2.0 + 3.0 * iy as f64 / 10.0);
            pts.push(Complex64::new(x, y));
        }
    }
    pts
}

/// Cost landscape for one interpolant, with everything that does not depend
/// on the Hardy coefficients precomputed.
pub struct CostModel {
    cfg: CostConfig,
    order: usize,
    prec: u32,
    transfers: Vec<Transfer>,
    /// Basis values at the lifted grid nodes. The coefficients are doubles,
    /// so the free function itself is summed in double precision; only the
    /// linear-fractional map and the cost run in extended precision.
    basis: Vec<Vec<Complex64>>,
    /// Basis values at the lattice points, for admissibility only.
    lattice_basis: Vec<Vec<Complex64>>,
}

/// Spectral values and the pieces needed to differentiate them.
struct Evaluation {
    rho: Vec<Float>,
    /// dNG/dθ_{M+1} at each grid node.
    dng: Vec<BigComplex>,
}

impl CostModel {
    pub fn new(state: &SchurState, cfg: &CostConfig, order: usize) -> Result<Self> {
        if !(cfg.lambda >= 0.0) {
            return Err(Error::arg("lambda must be non-negative"));
        }
        if order == 0 {
            return Err(Error::arg("hardy order must be at least 1"));
        }
        let eval = cfg.evaluation();
        eval.check()?;
        let prec = state.precision_bits;
        let lifted = eval.lifted_nodes(prec);
        let transfers = lifted
            .iter()
            .map(|z| state.transfer(z))
            .collect::<Result<Vec<_>>>()?;
        let basis = lifted
            .iter()
            .map(|z| hardy_basis(order, z).iter().map(BigComplex::to_c64).collect())
            .collect();
        let lattice_basis = check_lattice()
            .into_iter()
            .map(|z| {
                hardy_basis(order, &BigComplex::from_c64(64, z))
                    .iter()
                    .map(BigComplex::to_c64)
                    .collect()
            })
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            order,
            prec,
            transfers,
            basis,
            lattice_basis,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Adds points at which |θ_{M+1}| ≤ 1 is also enforced.
    pub fn extend_check_set(&mut self, points: &[BigComplex]) {
        self.lattice_basis.extend(
            points
                .iter()
                .map(|z| hardy_basis(self.order, &z.with_prec(64)).iter().map(BigComplex::to_c64).collect()),
        );
    }

    pub fn config(&self) -> &CostConfig {
        &self.cfg
    }

    fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != 2 * self.order {
            return Err(Error::arg(format!(
                "expected {} coefficients, got {}",
                2 * self.order,
                coeffs.len()
            )));
        }
        Ok(())
    }

    /// max |θ_{M+1}| over the check set (lifted grid and lattice).
    pub fn max_free_modulus(&self, coeffs: &[f64]) -> f64 {
        let c: Vec<Complex64> = (0..self.order)
            .map(|k| Complex64::new(coeffs[2 * k], coeffs[2 * k + 1]))
            .collect();
        let lattice = self
            .lattice_basis
            .iter()
            .map(|fs| fs.iter().zip(&c).map(|(f, c)| f * c).sum::<Complex64>().norm());
        let grid = self
            .basis
            .iter()
            .map(|fs| fs.iter().zip(&c).map(|(f, c)| f * c).sum::<Complex64>().norm());
        lattice.chain(grid).fold(0.0, f64::max)
    }

    pub fn is_admissible(&self, coeffs: &[f64]) -> bool {
        self.max_free_modulus(coeffs) <= 1.0
    }

    fn evaluate(&self, coeffs: &[f64], with_derivative: bool) -> Result<Evaluation> {
        let prec = self.prec;
        self.evaluate_free(
            |i| BigComplex::from_c64(prec, combine_f64(coeffs, &self.basis[i])),
            with_derivative,
        )
    }

    fn evaluate_free<G>(&self, free_at: G, with_derivative: bool) -> Result<Evaluation>
    where
        G: Fn(usize) -> BigComplex,
    {
        let prec = self.prec;
        let one = BigComplex::one(prec);
        let two_i = BigComplex::from_f64(prec, 0.0, 2.0);
        let inv_pi = Float::with_val(prec, pi(prec).recip_ref());
        let mut rho = Vec::with_capacity(self.transfers.len());
        let mut dng = Vec::new();
        for (i, t) in self.transfers.iter().enumerate() {
            let free = free_at(i);
            let den = &(&t.c * &free) + &t.d;
            if den.re.is_zero() && den.im.is_zero() {
                return Err(Error::EvaluationPole {
                    omega: self.cfg.grid.node(i),
                    message: "linear-fractional denominator vanishes".into(),
                });
            }
            let theta = &(&(&t.a * &free) + &t.b) / &den;
            let one_m = &one - &theta;
            if one_m.re.is_zero() && one_m.im.is_zero() {
                return Err(Error::EvaluationPole {
                    omega: self.cfg.grid.node(i),
                    message: "theta reaches 1".into(),
                });
            }
            let ng = (&(&one + &theta) / &one_m).mul_i();
            rho.push(Float::with_val(prec, &ng.im * &inv_pi));
            if with_derivative {
                // dNG/dθ = 2i/(1 − θ)², dθ/dt = (ad − bc)/(ct + d)²
                let det = &(&t.a * &t.d) - &(&t.b * &t.c);
                let d_theta = &det / &(&den * &den);
                let d_ng = &two_i / &(&one_m * &one_m);
                dng.push(&d_ng * &d_theta);
            }
        }
        Ok(Evaluation { rho, dng })
    }

    /// Value of the cost terms from spectral values: (F, ∂F/∂ρ).
    fn cost_terms(&self, rho: &[Float], with_weights: bool) -> (Float, Vec<Float>) {
        let prec = self.prec;
        let n = rho.len();
        let h = Float::with_val(prec, self.cfg.grid.spacing());
        let half = Float::with_val(prec, 0.5);
        let mut integral = Float::new(prec);
        for (i, r) in rho.iter().enumerate() {
            if i == 0 || i == n - 1 {
                integral += Float::with_val(prec, r * &half);
            } else {
                integral += r;
            }
        }
        integral *= &h;
        let s = Float::with_val(prec, self.cfg.sum_rule.value);
        let gap = Float::with_val(prec, &s - &integral);
        let lambda = Float::with_val(prec, self.cfg.lambda);
        let h2 = Float::with_val(prec, h.square_ref());
        let mut smooth = Float::new(prec);
        let mut second: Vec<Float> = Vec::with_capacity(n);
        for i in 1..n.saturating_sub(1) {
            let d = (Float::with_val(prec, &rho[i + 1] + &rho[i - 1]) - Float::with_val(prec, &rho[i] * 2u32)) / &h2;
            smooth += Float::with_val(prec, d.square_ref());
            second.push(d);
        }
        smooth *= &h;
        let f = Float::with_val(prec, gap.square_ref()) + Float::with_val(prec, &lambda * &smooth);
        if !with_weights {
            return (f, Vec::new());
        }
        // ∂F/∂ρ_j
        let mut w = vec![Float::new(prec); n];
        let gap_term = Float::with_val(prec, &gap * &h) * -2i32;
        for (j, wj) in w.iter_mut().enumerate() {
            *wj = if j == 0 || j == n - 1 {
                Float::with_val(prec, &gap_term * &half)
            } else {
                gap_term.clone()
            };
        }
        // λ h Σ D_i², D_i = (ρ_{i+1} − 2ρ_i + ρ_{i−1})/h²
        let scale = Float::with_val(prec, &lambda * &h) * 2u32 / &h2;
        for (m, d) in second.iter().enumerate() {
            let i = m + 1;
            let g = Float::with_val(prec, &scale * d);
            w[i - 1] += &g;
            w[i + 1] += &g;
            w[i] -= Float::with_val(prec, &g * 2u32);
        }
        (f, w)
    }

    /// F at the coefficients, +∞ when they are inadmissible.
    pub fn cost(&self, coeffs: &[f64]) -> Result<f64> {
        self.check_len(coeffs)?;
        if !self.is_admissible(coeffs) {
            return Ok(f64::INFINITY);
        }
        let ev = match self.evaluate(coeffs, false) {
            Ok(ev) => ev,
            Err(Error::EvaluationPole { .. }) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        Ok(self.cost_terms(&ev.rho, false).0.to_f64())
    }

    /// F and ∂F/∂(a_k, b_k).
    pub fn cost_and_gradient(&self, coeffs: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_len(coeffs)?;
        let domain = || Error::Domain("cost is infinite at these coefficients".into());
        if !self.is_admissible(coeffs) {
            return Err(domain());
        }
        let ev = match self.evaluate(coeffs, true) {
            Ok(ev) => ev,
            Err(Error::EvaluationPole { .. }) => return Err(domain()),
            Err(e) => return Err(e),
        };
        let (f, w) = self.cost_terms(&ev.rho, true);
        let prec = self.prec;
        let inv_pi = Float::with_val(prec, pi(prec).recip_ref());
        let mut grad = vec![0.0f64; 2 * self.order];
        for ((wj, g), fs) in w.iter().zip(&ev.dng).zip(&self.basis) {
            // ∂ρ/∂a_k = Im(g f_k)/π, ∂ρ/∂b_k = Re(g f_k)/π
            let gw = g.scale(&Float::with_val(prec, wj * &inv_pi)).to_c64();
            for (k, fk) in fs.iter().enumerate() {
                let p = gw * fk;
                grad[2 * k] += p.im;
                grad[2 * k + 1] += p.re;
            }
        }
        Ok((f.to_f64(), grad))
    }

    pub fn gradient(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        self.cost_and_gradient(coeffs).map(|(_, g)| g)
    }

    /// ρ̃ on the grid for the given coefficients.
    pub fn spectral(&self, coeffs: &[f64]) -> Result<SpectralFunction> {
        self.check_len(coeffs)?;
        let ev = self.evaluate(coeffs, false)?;
        SpectralFunction::new(
            self.cfg.grid.clone(),
            ev.rho.iter().map(Float::to_f64).collect(),
            Statistics::Fermionic,
        )
    }

    /// F for a free function given directly by its values at the lifted
    /// grid nodes; no admissibility check.
    pub fn cost_of_free(&self, free: &[BigComplex]) -> Result<f64> {
        if free.len() != self.transfers.len() {
            return Err(Error::arg("one free value per grid node is required"));
        }
        let ev = self.evaluate_free(|i| free[i].clone(), false)?;
        Ok(self.cost_terms(&ev.rho, false).0.to_f64())
    }

    /// ∫ρ̃ by the trapezoid rule for the given coefficients.
    pub fn integral(&self, coeffs: &[f64]) -> Result<f64> {
        let s = self.spectral(coeffs)?;
        Ok(trapezoid(&s.values, self.cfg.grid.spacing()))
    }
}

impl Objective for CostModel {
    fn value(&self, x: &[f64]) -> f64 {
        self.cost(x).unwrap_or(f64::INFINITY)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.cost_and_gradient(x).ok()
    }
}

/// F for the coefficients.
pub fn cost(coeffs: &HardyCoefficients, state: &SchurState, cfg: &CostConfig) -> Result<f64> {
    CostModel::new(state, cfg, coeffs.order)?.cost(&coeffs.coeffs)
}

/// ∂F/∂(a_k, b_k) by reverse accumulation through ρ̃.
pub fn gradient(coeffs: &HardyCoefficients, state: &SchurState, cfg: &CostConfig) -> Result<Vec<f64>> {
    CostModel::new(state, cfg, coeffs.order)?.gradient(&coeffs.coeffs)
}

#[derive(Clone, Debug)]
pub struct OptimizeResult {
    pub coeffs: HardyCoefficients,
    pub cost: f64,
    pub status: OptimizeStatus,
    pub trace: Vec<TraceEntry>,
}

/// Quasi-Newton minimization of F starting from `init`.
pub fn optimize(state: &SchurState, cfg: &CostConfig, init: &HardyCoefficients) -> Result<OptimizeResult> {
    let model = CostModel::new(state, cfg, init.order)?;
    optimize_model(&model, init, &LbfgsOptions::default())
}

pub fn optimize_model(model: &CostModel, init: &HardyCoefficients, opts: &LbfgsOptions) -> Result<OptimizeResult> {
    if init.order != model.order() {
        return Err(Error::arg("initial coefficients have the wrong order"));
    }
    if !model.cost(&init.coeffs)?.is_finite() {
        return Err(Error::Domain("initial coefficients are not admissible".into()));
    }
    let run = lbfgs(model, &init.coeffs, opts);
    Ok(OptimizeResult {
        coeffs: HardyCoefficients {
            order: init.order,
            coeffs: run.x,
        },
        cost: run.value,
        status: run.status,
        trace: run.trace,
    })
}

/// Constant free function with the lowest cost: a scan of the disk (or of
/// the real diameter when `real_only`) followed by a compass search.
/// Returns the constant and its cost.
pub fn best_constant(model: &CostModel, real_only: bool) -> (Complex64, f64) {
    let n = model.transfers.len();
    let f = |c: Complex64| {
        if c.norm() >= 1.0 {
            return f64::INFINITY;
        }
        let v = BigComplex::from_c64(model.prec, c);
        model.cost_of_free(&vec![v; n]).unwrap_or(f64::INFINITY)
    };
    let mut candidates = Vec::new();
    if real_only {
        candidates.extend((-100..=100).map(|i| Complex64::new(0.999 * i as f64 / 100.0, 0.0)));
    } else {
        candidates.push(Complex64::new(0.0, 0.0));
        for ir in 1..=20 {
            let r = 0.999 * ir as f64 / 20.0;
            candidates.extend((0..32).map(|ia| Complex64::from_polar(r, std::f64::consts::TAU * ia as f64 / 32.0)));
        }
    }
    let mut best = (Complex64::new(0.0, 0.0), f64::INFINITY);
    for c in candidates {
        let v = f(c);
        if v < best.1 {
            best = (c, v);
        }
    }
    let dirs: &[Complex64] = if real_only {
        &[Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]
    } else {
        &[
            Complex64::new(1.0, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
        ]
    };
    let mut step = 0.05;
    while step > 1e-6 {
        let mut moved = false;
        for &d in dirs {
            let c = best.0 + d * step;
            let v = f(c);
            if v < best.1 {
                best = (c, v);
                moved = true;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    best
}

/// Coefficients whose free function best matches the constant `c` over the
/// check set in the least-squares sense, scaled back inside the unit disk if
/// the fit overshoots anywhere. With `symmetric` the real parts are zeroed
/// (see [`optimize_symmetric`]).
pub fn project_constant(model: &CostModel, c: Complex64, symmetric: bool) -> Result<HardyCoefficients> {
    let rows: Vec<&Vec<Complex64>> = model.basis.iter().chain(&model.lattice_basis).collect();
    let a = DMatrix::from_fn(rows.len(), model.order, |i, k| rows[i][k]);
    let rhs = DVector::from_element(rows.len(), c);
    let sol = a
        .svd(true, true)
        .solve(&rhs, 1e-10)
        .map_err(|e| Error::Degenerate(format!("projection failed: {e}")))?;
    let mut x: Vec<f64> = sol.iter().flat_map(|z| [z.re, z.im]).collect();
    if symmetric {
        x.iter_mut().step_by(2).for_each(|v| *v = 0.0);
    }
    let m = model.max_free_modulus(&x);
    if m >= 1.0 {
        let s = (1.0 - 1e-6) / m;
        x.iter_mut().for_each(|v| *v *= s);
    }
    HardyCoefficients::from_vec(x)
}

/// Starting point for the optimizer: the projected best constant. Starting
/// from zero leaves the free function far from the boundary, where the
/// exact one lives, and the descent stalls against |θ| ≤ 1.
pub fn constant_start(model: &CostModel, symmetric: bool) -> Result<HardyCoefficients> {
    let (c, _) = best_constant(model, symmetric);
    project_constant(model, c, symmetric)
}

/// F restricted to purely imaginary coefficients (a_k = 0).
///
/// Since f_k(−z̄) = −conj f_k(z), these are exactly the free functions with
/// θ(−z̄) = conj θ(z), which for data of an even ρ̃ (purely imaginary χ̃(iω_n))
/// keeps the reconstruction even. Without the restriction the a_k drift off
/// zero and break the symmetry at the level of the optimizer's tolerance.
struct SymmetricCost<'a>(&'a CostModel);

impl SymmetricCost<'_> {
    fn full(&self, b: &[f64]) -> Vec<f64> {
        b.iter().flat_map(|&v| [0.0, v]).collect()
    }
}

impl Objective for SymmetricCost<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(&self.full(x))
    }

    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let (f, g) = self.0.value_and_gradient(&self.full(x))?;
        Some((f, g.into_iter().skip(1).step_by(2).collect()))
    }
}

/// Like [`optimize_model`], but over purely imaginary coefficients only.
pub fn optimize_symmetric(
    model: &CostModel,
    init: &HardyCoefficients,
    opts: &LbfgsOptions,
) -> Result<OptimizeResult> {
    if init.order != model.order() {
        return Err(Error::arg("initial coefficients have the wrong order"));
    }
    let b0: Vec<f64> = init.coeffs.iter().skip(1).step_by(2).copied().collect();
    let obj = SymmetricCost(model);
    if !obj.value(&b0).is_finite() {
        return Err(Error::Domain("initial coefficients are not admissible".into()));
    }
    let run = lbfgs(&obj, &b0, opts);
    Ok(OptimizeResult {
        coeffs: HardyCoefficients {
            order: init.order,
            coeffs: obj.full(&run.x),
        },
        cost: run.value,
        status: run.status,
        trace: run.trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hardy_eval_examples() {
        let z = BigComplex::from_f64(128, 0.3, 0.7);
        assert!(hardy_eval(&HardyCoefficients::zeros(4), &z).abs() < 1e-30);

        let mut c = HardyCoefficients::zeros(3);
        c.coeffs[0] = 2.0 * std::f64::consts::PI.sqrt();
        let v = hardy_eval(&c, &BigComplex::i(128)).to_c64();
        assert!((v - Complex64::new(0.0, -1.0)).norm() < 1e-15);

        let c = HardyCoefficients::from_vec(vec![0.1, -0.2, 0.3, 0.05]).unwrap();
        let scaled = HardyCoefficients::from_vec(c.coeffs.iter().map(|x| 3.0 * x).collect()).unwrap();
        let (a, b) = (hardy_eval(&c, &z).to_c64(), hardy_eval(&scaled, &z).to_c64());
        assert!((b - 3.0 * a).norm() < 1e-15);
    }

    #[test]
    fn basis_vanishes_at_i_beyond_first() {
        let fs = hardy_basis(5, &BigComplex::i(128));
        assert!(fs[1..].iter().all(|f| f.abs() < 1e-35));
    }

    #[test]
    fn odd_coefficient_count_rejected() {
        assert!(HardyCoefficients::from_vec(vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn lattice_covers_the_declared_box() {
        let pts = check_lattice();
        assert_eq!(pts.len(), 231);
        assert!(pts.iter().all(|z| z.re >= -10.0 && z.re <= 10.0 && z.im >= 0.01 - 1e-15 && z.im <= 10.0 + 1e-12));
    }

    use crate::nevanlinna::{disk_values, pick_select, schur_coefficients, DEFAULT_PICK_SHIFT};
    use crate::oracle::{oracle_matsubara, SpectralModel};
    use rand::{Rng, SeedableRng};

    fn small_model(lambda: f64, sum_rule: f64, order: usize) -> CostModel {
        let model = SpectralModel::poles(&[(0.5, -1.5), (0.5, 1.0)]).unwrap();
        let idx: Vec<i64> = (0..8).collect();
        let data = oracle_matsubara(&model, 10.0, &idx, Statistics::Fermionic, 128).unwrap();
        let st = disk_values(&data).unwrap();
        let rep = pick_select(&st, DEFAULT_PICK_SHIFT);
        let st = schur_coefficients(&st.select(&rep.selected)).unwrap();
        let eval = EvaluationConfig {
            eta: 0.05,
            grid: RealFrequencyGrid::new(-4.0, 4.0, 161).unwrap(),
        };
        let mut cfg = CostConfig::new(SumRule::user(sum_rule), &eval);
        cfg.lambda = lambda;
        CostModel::new(&st, &cfg, order).unwrap()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = small_model(1e-3, 1.0, 5);
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..3 {
            let mut x: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = 0.5 / m.max_free_modulus(&x);
            x.iter_mut().for_each(|v| *v *= s);
            let g = m.gradient(&x).unwrap();
            let v: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let at = |t: f64| m.cost(&x.iter().zip(&v).map(|(a, b)| a + t * b).collect::<Vec<_>>()).unwrap();
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let an: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-8), "{fd} vs {an}");
        }
    }

    #[test]
    fn inadmissible_coefficients_cost_infinity() {
        let m = small_model(1e-4, 1.0, 3);
        let x = vec![50.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        assert!(!m.is_admissible(&x));
        assert_eq!(m.cost(&x).unwrap(), f64::INFINITY);
        assert!(m.gradient(&x).is_err());
    }

    #[test]
    fn zero_lambda_consistency() {
        let probe = small_model(0.0, 1.0, 4);
        let s0 = probe.integral(&[0.0; 8]).unwrap();
        let m = small_model(0.0, s0, 4);
        let r = optimize_model(&m, &HardyCoefficients::zeros(4), &LbfgsOptions::default()).unwrap();
        assert!(r.cost < 1e-20);
        assert!(r.coeffs.coeffs.iter().all(|c| c.abs() <= 1e-3));
    }

    #[test]
    fn constant_start_is_admissible_and_descends() {
        let m = small_model(1e-4, 1.0, 6);
        let zero = m.cost(&[0.0; 12]).unwrap();
        let (c, fc) = best_constant(&m, false);
        assert!(c.norm() < 1.0 && fc <= zero);
        let init = constant_start(&m, false).unwrap();
        assert!(m.is_admissible(&init.coeffs));
        let opts = LbfgsOptions {
            max_iterations: 40,
            ..LbfgsOptions::default()
        };
        let r = optimize_model(&m, &init, &opts).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1].value <= w[0].value));
        assert!(m.is_admissible(&r.coeffs.coeffs));
        assert!(r.cost <= m.cost(&init.coeffs).unwrap());
    }

    #[test]
    fn symmetric_optimization_keeps_even_density() {
        let model = SpectralModel::poles(&[(0.5, -1.0), (0.5, 1.0)]).unwrap();
        let idx: Vec<i64> = (0..8).collect();
        let data = oracle_matsubara(&model, 10.0, &idx, Statistics::Fermionic, 128).unwrap();
        let st = disk_values(&data).unwrap();
        let rep = pick_select(&st, DEFAULT_PICK_SHIFT);
        let st = schur_coefficients(&st.select(&rep.selected)).unwrap();
        let eval = EvaluationConfig {
            eta: 0.05,
            grid: RealFrequencyGrid::new(-4.0, 4.0, 161).unwrap(),
        };
        let m = CostModel::new(&st, &CostConfig::new(SumRule::user(1.0), &eval), 6).unwrap();
        let init = constant_start(&m, true).unwrap();
        assert!(init.coeffs.iter().step_by(2).all(|&a| a == 0.0));
        let opts = LbfgsOptions {
            max_iterations: 30,
            ..LbfgsOptions::default()
        };
        let r = optimize_symmetric(&m, &init, &opts).unwrap();
        assert!(r.coeffs.coeffs.iter().step_by(2).all(|&a| a == 0.0));
        let v = m.spectral(&r.coeffs.coeffs).unwrap().values;
        let n = v.len();
        let asym = (0..n).map(|i| (v[i] - v[n - 1 - i]).abs()).fold(0.0, f64::max);
        assert!(asym < 1e-10, "{asym}");
        assert!(r.cost <= m.cost(&init.coeffs).unwrap());
    }
}
