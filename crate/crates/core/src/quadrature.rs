//! Adaptive Gauss–Legendre quadrature in extended precision.
//!
//! Each panel is integrated with a low and a high order Gauss–Legendre rule;
//! their difference is the panel's error estimate and the high-order value is
//! kept. The panel with the largest estimate is bisected until the summed
//! estimate drops below the requested relative tolerance.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use rug::Float;

use crate::error::{Error, Result};
use crate::precision::{pi, BigComplex};

const LOW_ORDER: usize = 20;
const HIGH_ORDER: usize = 30;
const MAX_PANELS: usize = 20_000;

pub(crate) struct Rule {
    nodes: Vec<Float>,
    weights: Vec<Float>,
}

type RuleCache = Mutex<HashMap<(usize, u32), Arc<Rule>>>;
static RULES: Lazy<RuleCache> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Gauss–Legendre rule of order `n` on [-1, 1] at precision `prec`.
pub(crate) fn gauss_legendre(n: usize, prec: u32) -> Arc<Rule> {
    let mut cache = RULES.lock().unwrap();
    cache
        .entry((n, prec))
        .or_insert_with(|| Arc::new(build_rule(n, prec)))
        .clone()
}

/// Returns (P_n(x), P_{n-1}(x)).
fn legendre_pair(n: usize, x: &Float) -> (Float, Float) {
    let p = x.prec();
    let mut p0 = Float::with_val(p, 1);
    let mut p1 = x.clone();
    for k in 2..=n {
        let kf = k as u32;
        // k P_k = (2k-1) x P_{k-1} - (k-1) P_{k-2}
        let a = Float::with_val(p, x * &p1) * (2 * kf - 1);
        let b = Float::with_val(p, &p0 * (kf - 1));
        let pk = (a - b) / kf;
        p0 = std::mem::replace(&mut p1, pk);
    }
    (p1, p0)
}

fn build_rule(n: usize, prec: u32) -> Rule {
    let work = prec + 32;
    let pi_w = pi(work);
    let tol = Float::with_val(work, 1u32) >> (prec + 8);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        let guess = Float::with_val(work, &pi_w * (i as f64 + 0.75)) / (n as f64 + 0.5);
        let mut x = guess.cos();
        for _ in 0..100 {
            let (pn, pm) = legendre_pair(n, &x);
            // P'_n = n (x P_n - P_{n-1}) / (x^2 - 1)
            let x2m1 = Float::with_val(work, x.square_ref()) - 1u32;
            let deriv = (Float::with_val(work, &x * &pn) - &pm) * (n as u32) / x2m1;
            let dx = Float::with_val(work, &pn / &deriv);
            x -= &dx;
            if dx.abs() < tol {
                break;
            }
        }
        let (pn, pm) = legendre_pair(n, &x);
        let x2m1 = Float::with_val(work, x.square_ref()) - 1u32;
        let deriv = (Float::with_val(work, &x * &pn) - &pm) * (n as u32) / x2m1;
        let one_m_x2 = Float::with_val(work, 1u32) - Float::with_val(work, x.square_ref());
        let w = Float::with_val(work, 2u32) / (one_m_x2 * Float::with_val(work, deriv.square_ref()));
        nodes.push(Float::with_val(prec, &x));
        weights.push(Float::with_val(prec, &w));
    }
    Rule { nodes, weights }
}

impl Rule {
    fn apply<F>(&self, f: &F, a: &Float, b: &Float) -> Result<BigComplex>
    where
        F: Fn(&Float) -> Result<BigComplex>,
    {
        let prec = a.prec();
        let half = Float::with_val(prec, b - a) / 2u32;
        let mid = Float::with_val(prec, a + b) / 2u32;
        let mut acc = BigComplex::zero(prec);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let t = Float::with_val(prec, &half * x) + &mid;
            let v = f(&t)?;
            acc = &acc + &v.scale(w);
        }
        Ok(acc.scale(&half))
    }
}

struct Panel {
    a: Float,
    b: Float,
    value: BigComplex,
    error: Float,
}

fn panel<F>(f: &F, a: Float, b: Float, lo: &Rule, hi: &Rule) -> Result<Panel>
where
    F: Fn(&Float) -> Result<BigComplex>,
{
    let coarse = lo.apply(f, &a, &b)?;
    let value = hi.apply(f, &a, &b)?;
    let error = (&value - &coarse).abs();
    Ok(Panel { a, b, value, error })
}

/// Integrates `f` over consecutive intervals given by `breaks` (sorted) to
/// relative tolerance `rel_tol` of the total.
pub(crate) fn integrate<F>(f: F, breaks: &[Float], rel_tol: f64) -> Result<BigComplex>
where
    F: Fn(&Float) -> Result<BigComplex>,
{
    let prec = breaks[0].prec();
    let lo = gauss_legendre(LOW_ORDER, prec);
    let hi = gauss_legendre(HIGH_ORDER, prec);
    let mut panels = Vec::new();
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            panels.push(panel(&f, w[0].clone(), w[1].clone(), &lo, &hi)?);
        }
    }
    if panels.is_empty() {
        return Ok(BigComplex::zero(prec));
    }
    loop {
        let total = panels
            .iter()
            .fold(BigComplex::zero(prec), |acc, p| &acc + &p.value);
        let err = panels
            .iter()
            .fold(Float::new(prec), |acc, p| acc + &p.error);
        let scale = total.abs();
        let target = Float::with_val(prec, &scale * rel_tol);
        if err <= target || err.is_zero() {
            return Ok(total);
        }
        if panels.len() >= MAX_PANELS {
            let achieved = if scale.is_zero() {
                f64::INFINITY
            } else {
                Float::with_val(prec, &err / &scale).to_f64()
            };
            return Err(Error::Oracle { achieved });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.partial_cmp(&y.1.error).unwrap())
            .unwrap();
        let p = panels.swap_remove(worst);
        let mid = Float::with_val(prec, &p.a + &p.b) / 2u32;
        panels.push(panel(&f, p.a, mid.clone(), &lo, &hi)?);
        panels.push(panel(&f, mid, p.b, &lo, &hi)?);
    }
}
