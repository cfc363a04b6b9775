//! Nevanlinna interpolation of fermionic Matsubara data.
//!
//! The continued function is NG(z) = −χ̃(z), which maps the upper half plane
//! into its closure. The Cayley transform h(w) = (w − i)/(w + i) sends its
//! values into the unit disk, where the Schur algorithm builds every
//! interpolant as a linear-fractional map of one free function θ_{M+1}(z):
//!
//! θ(z) = (a θ_{M+1}(z) + b) / (c θ_{M+1}(z) + d),
//! [[a, b], [c, d]] = Π_j [[B_j(z), φ_j], [conj(φ_j) B_j(z), 1]],
//! B_j(z) = (z − Y_j)/(z − conj(Y_j)).

use std::fmt;

use rug::Float;

use crate::domain::{frequency_big, MatsubaraData, RealFrequencyGrid, SpectralFunction, Statistics};
use crate::error::{Error, Result};
use crate::precision::{pi, ulp, BigComplex};


pub const DEFAULT_PICK_SHIFT: f64 = 1e-20;
pub const DEFAULT_ETA: f64 = 1e-3;

/// h(w) = (w − i)/(w + i).
pub fn mobius(w: &BigComplex) -> Result<BigComplex> {
    let i = BigComplex::i(w.prec());
    let den = w + &i;
    if den.re.is_zero() && den.im.is_zero() {
        return Err(Error::Pole("mobius is singular at w = -i".into()));
    }
    Ok(&(w - &i) / &den)
}

/// h⁻¹(u) = i(1 + u)/(1 − u).
pub fn inverse_mobius(u: &BigComplex) -> Result<BigComplex> {
    let one = BigComplex::one(u.prec());
    let den = &one - u;
    if den.re.is_zero() && den.im.is_zero() {
        return Err(Error::Pole("inverse mobius is singular at u = 1".into()));
    }
    Ok((&(&one + u) / &den).mul_i())
}

/// Interpolation nodes Y_j = iω_j, their disk values λ_j = h(−χ̃(iω_j)) and,
/// once computed, the Schur coefficients φ_j.
#[derive(Clone, Debug)]
pub struct SchurState {
    pub indices: Vec<i64>,
    pub nodes: Vec<BigComplex>,
    pub disk_values: Vec<BigComplex>,
    pub phis: Vec<BigComplex>,
    pub precision_bits: u32,
}

/// Maps fermionic data with non-negative indices to disk values.
pub fn disk_values(data: &MatsubaraData) -> Result<SchurState> {
    if data.statistics != Statistics::Fermionic {
        return Err(Error::arg(
            "disk values need fermionic data; fermionize bosonic input first",
        ));
    }
    if let Some(n) = data.indices.iter().find(|&&n| n < 0) {
        return Err(Error::arg(format!(
            "only positive Matsubara frequencies are interpolated, got index {n}"
        )));
    }
    let prec = data.precision_bits;
    let nodes = data
        .indices
        .iter()
        .map(|&n| {
            BigComplex::new(
                Float::new(prec),
                frequency_big(n, data.beta, Statistics::Fermionic, prec),
            )
        })
        .collect();
    let disk_values = data
        .values
        .iter()
        .map(|v| mobius(&-v.with_prec(prec)))
        .collect::<Result<Vec<_>>>()?;
    Ok(SchurState {
        indices: data.indices.clone(),
        nodes,
        disk_values,
        phis: Vec::new(),
        precision_bits: prec,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum DropReason {
    /// |λ| > 1: the value is not the image of an upper-half-plane point.
    DiskViolation,
    /// The leading Pick matrix including the node has no Cholesky factor.
    NotPositive { pivot: f64 },
    /// The node's Schur coefficient leaves the open disk.
    SchurOutsideDisk { modulus_excess: f64 },
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DropReason::DiskViolation => f.write_str("disk violation"),
            DropReason::NotPositive { pivot } => {
                write!(f, "pick matrix not positive (pivot {pivot:e})")
            }
            DropReason::SchurOutsideDisk { modulus_excess } => {
                write!(f, "schur coefficient outside disk (|phi| - 1 = {modulus_excess:e})")
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct PickReport {
    /// Positions into the state's node list.
    pub selected: Vec<usize>,
    /// Matsubara indices of the selected nodes.
    pub selected_indices: Vec<i64>,
    /// Smallest accepted Cholesky pivot squared, a proxy for the smallest
    /// eigenvalue of the selected Pick matrix.
    pub min_eigen_estimate: f64,
    pub dropped: Vec<(i64, DropReason)>,
}

impl PickReport {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }
}

struct Mat2 {
    a: BigComplex,
    b: BigComplex,
    c: BigComplex,
    d: BigComplex,
}

impl Mat2 {
    fn identity(prec: u32) -> Self {
        Self {
            a: BigComplex::one(prec),
            b: BigComplex::zero(prec),
            c: BigComplex::zero(prec),
            d: BigComplex::one(prec),
        }
    }

    /// self · [[B, φ], [conj(φ) B, 1]]
    fn mul_step(&self, blaschke: &BigComplex, phi: &BigComplex) -> Self {
        let phib = &phi.conj() * blaschke;
        Self {
            a: &(&self.a * blaschke) + &(&self.b * &phib),
            b: &(&self.a * phi) + &self.b,
            c: &(&self.c * blaschke) + &(&self.d * &phib),
            d: &(&self.c * phi) + &self.d,
        }
    }
}

fn blaschke(z: &BigComplex, node: &BigComplex) -> BigComplex {
    &(z - node) / &(z - &node.conj())
}

/// Coefficients (a, b, c, d) of the linear-fractional map θ_{M+1} ↦ θ at z.
#[derive(Clone, Debug)]
pub struct Transfer {
    pub a: BigComplex,
    pub b: BigComplex,
    pub c: BigComplex,
    pub d: BigComplex,
}

impl Transfer {
    /// θ = (a t + b)/(c t + d).
    pub fn apply(&self, t: &BigComplex) -> Result<BigComplex> {
        let den = &(&self.c * t) + &self.d;
        let tiny = ulp(den.prec()) * 10u32;
        if den.abs() < tiny {
            return Err(Error::Pole("linear-fractional denominator vanishes".into()));
        }
        Ok(&(&(&self.a * t) + &self.b) / &den)
    }
}

fn transfer_upto(nodes: &[BigComplex], phis: &[BigComplex], z: &BigComplex) -> Mat2 {
    let mut t = Mat2::identity(z.prec());
    for (y, phi) in nodes.iter().zip(phis) {
        t = t.mul_step(&blaschke(z, y), phi);
    }
    t
}

/// Width of the band around |φ| = 1 treated as the boundary of the disk:
/// 2^(−prec/2), far above rounding noise and far below any genuine interior
/// coefficient of data accurate to working precision.
fn boundary_tol(prec: u32) -> Float {
    Float::with_val(prec, 1u32) >> (prec / 2)
}

/// Outcome of appending one node to a Schur recursion.
enum Step {
    /// |φ| < 1: the node adds information.
    Interior(BigComplex),
    /// |φ| = 1 within tolerance: the interpolant is now fully determined.
    Boundary(BigComplex),
    /// The interpolant was already determined and reproduces the node.
    Determined,
    /// |φ| beyond the disk by the given amount.
    Outside(f64),
    /// The determined interpolant misses the node by the given amount.
    Inconsistent(f64),
}

/// Incremental Schur recursion shared by causality screening and the full
/// coefficient computation.
struct SchurBuilder {
    nodes: Vec<BigComplex>,
    phis: Vec<BigComplex>,
    determined: bool,
    tol: Float,
}

impl SchurBuilder {
    fn new(prec: u32) -> Self {
        Self {
            nodes: Vec::new(),
            phis: Vec::new(),
            determined: false,
            tol: boundary_tol(prec),
        }
    }

    /// φ_k = (λ_k d − b)/(a − λ_k c) with [[a, b], [c, d]] the product over
    /// the nodes so far evaluated at Y_k.
    fn step(&self, y: &BigComplex, lambda: &BigComplex) -> Step {
        let t = transfer_upto(&self.nodes, &self.phis, y);
        if self.determined {
            // Rank-one transfer: θ is the same for every free function.
            let theta = if t.d.abs() >= t.c.abs() {
                &t.b / &t.d
            } else {
                &t.a / &t.c
            };
            let miss = (&theta - lambda).abs();
            return if miss <= self.tol {
                Step::Determined
            } else {
                Step::Inconsistent(miss.to_f64())
            };
        }
        let num = &(lambda * &t.d) - &t.b;
        let den = &t.a - &(lambda * &t.c);
        if den.re.is_zero() && den.im.is_zero() {
            return Step::Outside(f64::INFINITY);
        }
        let phi = &num / &den;
        let excess = phi.abs() - 1u32;
        if excess > self.tol {
            Step::Outside(excess.to_f64())
        } else if excess.clone().abs() <= self.tol {
            let modulus = phi.abs();
            Step::Boundary(phi.scale(&modulus.recip()))
        } else {
            Step::Interior(phi)
        }
    }

    fn push(&mut self, y: &BigComplex, step: Step) {
        let phi = match step {
            Step::Interior(phi) => phi,
            Step::Boundary(phi) => {
                self.determined = true;
                phi
            }
            // Later coefficients cannot influence a rank-one map.
            Step::Determined => BigComplex::zero(y.prec()),
            Step::Outside(_) | Step::Inconsistent(_) => return,
        };
        self.nodes.push(y.clone());
        self.phis.push(phi);
    }
}

impl SchurState {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Restriction to the given node positions (phis are dropped).
    pub fn select(&self, positions: &[usize]) -> SchurState {
        SchurState {
            indices: positions.iter().map(|&p| self.indices[p]).collect(),
            nodes: positions.iter().map(|&p| self.nodes[p].clone()).collect(),
            disk_values: positions.iter().map(|&p| self.disk_values[p].clone()).collect(),
            phis: Vec::new(),
            precision_bits: self.precision_bits,
        }
    }

    fn check_filled(&self) -> Result<()> {
        if self.phis.len() != self.nodes.len() {
            return Err(Error::arg("schur coefficients have not been computed"));
        }
        Ok(())
    }

    /// The full transfer map at z (product over all nodes).
    pub fn transfer(&self, z: &BigComplex) -> Result<Transfer> {
        self.check_filled()?;
        let z = z.with_prec(self.precision_bits);
        let t = transfer_upto(&self.nodes, &self.phis, &z);
        Ok(Transfer {
            a: t.a,
            b: t.b,
            c: t.c,
            d: t.d,
        })
    }
}

/// Greedy causal subset: nodes are visited in ascending frequency and kept
/// when the Pick matrix of the kept nodes plus the candidate still admits a
/// Cholesky factor after adding `shift` to its diagonal, and the candidate's
/// Schur coefficient stays inside the unit disk.
pub fn pick_select(state: &SchurState, shift: f64) -> PickReport {
    let prec = state.precision_bits;
    let one = Float::with_val(prec, 1u32);
    let shift = Float::with_val(prec, shift);
    let hy: Vec<BigComplex> = state
        .nodes
        .iter()
        .map(|y| mobius(y).expect("nodes lie in the upper half plane"))
        .collect();

    let mut order: Vec<usize> = (0..state.len()).collect();
    order.sort_by(|&a, &b| state.nodes[a].im.partial_cmp(&state.nodes[b].im).unwrap());

    let pick = |j: usize, k: usize| -> BigComplex {
        let lam = &state.disk_values[j] * &state.disk_values[k].conj();
        let hh = &hy[j] * &hy[k].conj();
        let one_c = BigComplex::one(prec);
        &(&one_c - &lam) / &(&one_c - &hh)
    };

    let mut selected: Vec<usize> = Vec::new();
    // Rows of the Cholesky factor of the accepted Pick matrix.
    let mut chol: Vec<Vec<BigComplex>> = Vec::new();
    let mut diag: Vec<Float> = Vec::new();
    let mut schur = SchurBuilder::new(prec);
    let mut dropped = Vec::new();
    let mut min_pivot: Option<Float> = None;

    for &k in &order {
        if state.disk_values[k].abs() > one {
            dropped.push((state.indices[k], DropReason::DiskViolation));
            continue;
        }
        let mut row: Vec<BigComplex> = Vec::with_capacity(selected.len());
        for (i, &j) in selected.iter().enumerate() {
            let mut acc = pick(k, j);
            for t in 0..i {
                acc = &acc - &(&row[t] * &chol[i][t].conj());
            }
            row.push(acc.scale(&Float::with_val(prec, diag[i].recip_ref())));
        }
        let mut pivot = Float::with_val(prec, &pick(k, k).re + &shift);
        for l in &row {
            pivot -= l.norm_sqr();
        }
        if !(pivot > 0) {
            dropped.push((
                state.indices[k],
                DropReason::NotPositive {
                    pivot: pivot.to_f64(),
                },
            ));
            continue;
        }
        let step = schur.step(&state.nodes[k], &state.disk_values[k]);
        match step {
            Step::Outside(excess) | Step::Inconsistent(excess) => {
                dropped.push((
                    state.indices[k],
                    DropReason::SchurOutsideDisk {
                        modulus_excess: excess,
                    },
                ));
                continue;
            }
            _ => schur.push(&state.nodes[k], step),
        }
        if min_pivot.as_ref().map_or(true, |m| pivot < *m) {
            min_pivot = Some(pivot.clone());
        }
        diag.push(pivot.sqrt());
        chol.push(row);
        selected.push(k);
    }

    PickReport {
        selected_indices: selected.iter().map(|&p| state.indices[p]).collect(),
        selected,
        min_eigen_estimate: min_pivot.map_or(0.0, |m| m.to_f64()),
        dropped,
    }
}

/// Runs the Schur recursion over all nodes of `state`.
///
/// A coefficient on the unit circle (degenerate Pick matrix, e.g. data from a
/// finite sum of poles) fixes the interpolant; the remaining nodes are then
/// only checked for consistency and get φ = 0.
pub fn schur_coefficients(state: &SchurState) -> Result<SchurState> {
    let mut schur = SchurBuilder::new(state.precision_bits);
    for k in 0..state.len() {
        let step = schur.step(&state.nodes[k], &state.disk_values[k]);
        match step {
            Step::Outside(excess) | Step::Inconsistent(excess) => {
                return Err(Error::CausalityBreakdown { step: k + 1, excess });
            }
            _ => schur.push(&state.nodes[k], step),
        }
    }
    Ok(SchurState {
        phis: schur.phis,
        ..state.clone()
    })
}

/// θ(z) for the free function `theta_free`.
pub fn evaluate_theta<F>(state: &SchurState, theta_free: F, z: &BigComplex) -> Result<BigComplex>
where
    F: Fn(&BigComplex) -> BigComplex,
{
    let z = z.with_prec(state.precision_bits);
    let t = state.transfer(&z)?;
    t.apply(&theta_free(&z))
}

/// NG(z) = h⁻¹(θ(z)).
pub fn evaluate_ng<F>(state: &SchurState, theta_free: F, z: &BigComplex) -> Result<BigComplex>
where
    F: Fn(&BigComplex) -> BigComplex,
{
    let theta = evaluate_theta(state, theta_free, z)?;
    inverse_mobius(&theta)
}

#[derive(Clone, Debug)]
pub struct EvaluationConfig {
    pub eta: f64,
    pub grid: RealFrequencyGrid,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            grid: RealFrequencyGrid::new(-8.0, 8.0, 2001).unwrap(),
        }
    }
}

impl EvaluationConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::arg("eta must be positive"));
        }
        Ok(())
    }

    /// Grid nodes lifted to ω + iη.
    pub fn lifted_nodes(&self, prec: u32) -> Vec<BigComplex> {
        self.grid
            .nodes()
            .into_iter()
            .map(|w| BigComplex::from_f64(prec, w, self.eta))
            .collect()
    }
}

/// ρ̃(ω) = Im NG(ω + iη)/π on the configured grid.
pub fn extract_spectral<F>(state: &SchurState, theta_free: F, cfg: &EvaluationConfig) -> Result<SpectralFunction>
where
    F: Fn(&BigComplex) -> BigComplex,
{
    cfg.check()?;
    state.check_filled()?;
    let prec = state.precision_bits;
    let inv_pi = Float::with_val(prec, pi(prec).recip_ref());
    let mut values = Vec::with_capacity(cfg.grid.count);
    for (omega, z) in cfg.grid.nodes().into_iter().zip(cfg.lifted_nodes(prec)) {
        let ng = evaluate_ng(state, &theta_free, &z).map_err(|e| Error::EvaluationPole {
            omega,
            message: e.to_string(),
        })?;
        values.push(Float::with_val(prec, &ng.im * &inv_pi).to_f64());
    }
    SpectralFunction::new(cfg.grid.clone(), values, Statistics::Fermionic)
}

/// Constant free function.
pub fn constant_theta(value: BigComplex) -> impl Fn(&BigComplex) -> BigComplex {
    move |z: &BigComplex| value.with_prec(z.prec())
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: u32 = 256;

    fn c(re: f64, im: f64) -> BigComplex {
        BigComplex::from_f64(P, re, im)
    }

    fn close(a: &BigComplex, b: &BigComplex, tol: f64) -> bool {
        (a - b).abs() < tol
    }

    #[test]
    fn mobius_examples() {
        assert!(close(&mobius(&c(0.0, 1.0)).unwrap(), &c(0.0, 0.0), 1e-70));
        assert!(close(&mobius(&c(0.0, 0.0)).unwrap(), &c(-1.0, 0.0), 1e-70));
        let third = BigComplex::from_real(Float::with_val(P, 1) / 3u32);
        assert!(close(&mobius(&c(0.0, 2.0)).unwrap(), &third, 1e-70));
        assert!(matches!(mobius(&c(0.0, -1.0)), Err(Error::Pole(_))));
    }

    #[test]
    fn inverse_mobius_examples() {
        assert!(close(&inverse_mobius(&c(0.0, 0.0)).unwrap(), &c(0.0, 1.0), 1e-70));
        assert!(close(&inverse_mobius(&c(-1.0, 0.0)).unwrap(), &c(0.0, 0.0), 1e-70));
        let u = c(0.3, 0.4);
        let back = mobius(&inverse_mobius(&u).unwrap()).unwrap();
        assert!((&back - &u).abs() < ulp(P) * 10u32);
        assert!(matches!(inverse_mobius(&c(1.0, 0.0)), Err(Error::Pole(_))));
    }

    fn state(lambdas: Vec<BigComplex>, freqs: &[f64]) -> SchurState {
        SchurState {
            indices: (0..freqs.len() as i64).collect(),
            nodes: freqs.iter().map(|&w| c(0.0, w)).collect(),
            disk_values: lambdas,
            phis: Vec::new(),
            precision_bits: P,
        }
    }

    #[test]
    fn single_node_pick_and_schur() {
        let s = state(vec![c(0.0, 0.0)], &[1.0]);
        let rep = pick_select(&s, DEFAULT_PICK_SHIFT);
        assert_eq!(rep.selected, vec![0]);
        assert!((rep.min_eigen_estimate - 1.0).abs() < 1e-15);
        let s = schur_coefficients(&s).unwrap();
        assert!(close(&s.phis[0], &c(0.0, 0.0), 1e-70));
    }

    #[test]
    fn two_zero_values_give_zero_phi() {
        let s = schur_coefficients(&state(vec![c(0.0, 0.0), c(0.0, 0.0)], &[1.0, 3.0])).unwrap();
        assert!(s.phis[1].abs() < 1e-70);
    }

    #[test]
    fn disk_violation_is_dropped() {
        let s = state(vec![c(0.1, 0.0), c(1.5, 0.0)], &[1.0, 3.0]);
        let rep = pick_select(&s, DEFAULT_PICK_SHIFT);
        assert_eq!(rep.selected, vec![0]);
        assert_eq!(rep.dropped, vec![(1, DropReason::DiskViolation)]);
        assert_eq!(rep.dropped[0].1.to_string(), "disk violation");
    }

    #[test]
    fn empty_state_evaluates_free_function() {
        let s = schur_coefficients(&state(vec![], &[])).unwrap();
        let z = c(0.7, 0.2);
        let th = evaluate_theta(&s, constant_theta(c(0.25, -0.5)), &z).unwrap();
        assert!(close(&th, &c(0.25, -0.5), 1e-70));
        let ng = evaluate_ng(&s, constant_theta(c(0.0, 0.0)), &z).unwrap();
        assert!(close(&ng, &c(0.0, 1.0), 1e-70));
        let rho = extract_spectral(&s, constant_theta(c(0.0, 0.0)), &EvaluationConfig::default()).unwrap();
        for v in rho.values {
            assert!((v - std::f64::consts::FRAC_1_PI).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_disk_value_and_zero_free_function_vanish() {
        let s = schur_coefficients(&state(vec![c(0.0, 0.0)], &[1.0])).unwrap();
        for z in [c(0.3, 0.1), c(-2.0, 5.0)] {
            let th = evaluate_theta(&s, constant_theta(c(0.0, 0.0)), &z).unwrap();
            assert!(th.abs() < 1e-70);
        }
    }

    #[test]
    fn theta_matches_data_at_nodes_for_any_free_function() {
        // NG(z) = 1/(1 - z), the negative of a single pole at 1
        let freqs = [1.0, 2.5, 4.0];
        let lambdas = freqs
            .iter()
            .map(|&w| mobius(&(&c(1.0, 0.0) / &c(1.0, -w))).unwrap())
            .collect();
        let s = schur_coefficients(&state(lambdas, &freqs)).unwrap();
        for k in 0..3 {
            for free in [c(0.0, 0.0), c(0.5, 0.5), c(-0.9, 0.0)] {
                let th = evaluate_theta(&s, constant_theta(free), &s.nodes[k]).unwrap();
                assert!(close(&th, &s.disk_values[k], 1e-70));
            }
        }
    }

    #[test]
    fn missing_phis_is_an_error() {
        let s = state(vec![c(0.0, 0.0)], &[1.0]);
        assert!(evaluate_theta(&s, constant_theta(c(0.0, 0.0)), &c(0.0, 1.0)).is_err());
    }

    #[test]
    fn eta_must_be_positive() {
        let cfg = EvaluationConfig {
            eta: 0.0,
            ..Default::default()
        };
        assert!(cfg.check().is_err());
    }
}
