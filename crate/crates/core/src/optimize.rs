//! Limited-memory BFGS with a backtracking (Armijo) line search.
//!
//! Objectives may return +∞ (or no gradient) outside their domain; the line
//! search then keeps shrinking the step, so iterates never leave it.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizeStatus {
    /// ‖g‖∞ ≤ grad_tol · max(1, F).
    Converged,
    /// The line search shrank the step below `min_step`.
    StepCollapse,
    MaxIterations,
}

impl OptimizeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizeStatus::Converged => "converged",
            OptimizeStatus::StepCollapse => "step-collapse",
            OptimizeStatus::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    pub value: f64,
    pub grad_norm: f64,
    /// ∞-norm of the accepted step (0 for the starting point).
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub min_step: f64,
    pub armijo: f64,
    pub shrink: f64,
    /// Cap on the ∞-norm of the very first trial step.
    pub first_step: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 10,
            max_iterations: 500,
            grad_tol: 1e-6,
            min_step: 1e-14,
            armijo: 1e-4,
            shrink: 0.5,
            first_step: 1e-2,
        }
    }
}

pub trait Objective {
    /// Objective value, +∞ outside the domain.
    fn value(&self, x: &[f64]) -> f64;
    /// Value and gradient, `None` outside the domain.
    fn value_and_gradient(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Clone, Debug)]
pub struct LbfgsRun {
    pub x: Vec<f64>,
    pub value: f64,
    pub status: OptimizeStatus,
    pub trace: Vec<TraceEntry>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Two-loop recursion: returns −H·g for the stored curvature pairs.
fn direction(g: &[f64], pairs: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.last() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

/// Minimizes `f` from `x0`, which must lie in the objective's domain.
pub fn lbfgs<F: Objective + ?Sized>(f: &F, x0: &[f64], opts: &LbfgsOptions) -> LbfgsRun {
    let mut x = x0.to_vec();
    let (mut fx, mut g) = match f.value_and_gradient(&x) {
        Some(v) => v,
        None => {
            return LbfgsRun {
                x,
                value: f64::INFINITY,
                status: OptimizeStatus::StepCollapse,
                trace: Vec::new(),
            }
        }
    };
    let mut trace = vec![TraceEntry {
        iteration: 0,
        value: fx,
        grad_norm: inf_norm(&g),
        step: 0.0,
    }];
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();

    for iteration in 1..=opts.max_iterations + 1 {
        if inf_norm(&g) <= opts.grad_tol * fx.abs().max(1.0) {
            return LbfgsRun {
                x,
                value: fx,
                status: OptimizeStatus::Converged,
                trace,
            };
        }
        if iteration > opts.max_iterations {
            break;
        }
        let mut d = direction(&g, &pairs);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let dn = inf_norm(&d);
        let mut alpha = if pairs.is_empty() {
            (opts.first_step / dn).min(1.0)
        } else {
            1.0
        };
        let accepted = loop {
            if alpha * dn < opts.min_step {
                break None;
            }
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            if f.value(&trial) <= fx + opts.armijo * alpha * slope {
                if let Some((ft, gt)) = f.value_and_gradient(&trial) {
                    break Some((trial, ft, gt));
                }
            }
            alpha *= opts.shrink;
        };
        let Some((xn, fxn, gn)) = accepted else {
            return LbfgsRun {
                x,
                value: fx,
                status: OptimizeStatus::StepCollapse,
                trace,
            };
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if pairs.len() == opts.memory {
                pairs.remove(0);
            }
            pairs.push((s.clone(), y, 1.0 / sy));
        }
        trace.push(TraceEntry {
            iteration,
            value: fxn,
            grad_norm: inf_norm(&gn),
            step: inf_norm(&s),
        });
        x = xn;
        fx = fxn;
        g = gn;
    }
    LbfgsRun {
        x,
        value: fx,
        status: OptimizeStatus::MaxIterations,
        trace,
    }
}
