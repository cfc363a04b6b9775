//! Acceptance criteria 1–8. Each test writes one `PASS`/`FAIL` line straight
//! to stdout (bypassing the harness capture) and then asserts.

use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};

use nevac::config::PipelineConfig;
use nevac::fermionize::{
    fermionize_freq, fermionize_tau, sum_rule_from_tail, sum_rule_from_tau, tanh_convert, FermionizeConfig,
    DEFAULT_TARGET_INDICES,
};
use nevac::hardy::CostModel;
use nevac::io::{self, DataFile};
use nevac::nevanlinna::{
    constant_theta, disk_values, evaluate_ng, extract_spectral, pick_select, schur_coefficients, DEFAULT_PICK_SHIFT,
};
use nevac::optimize::Objective;
use nevac::oracle::{
    bosonic_fit_indices, chebyshev_taus, compare, l2_norm, model_spectral, oracle_matsubara, oracle_tau,
    tail_fit_indices, Density, SpectralModel,
};
use nevac::pipeline::{self, Outcome};
use nevac::precision::{rel_err, BigComplex};
use nevac::{MatsubaraData, RealFrequencyGrid, SpectralFunction, Statistics};

const BETA: f64 = 100.0;
const PREC: u32 = 256;

fn verdict(n: u32, name: &str, pass: bool, elapsed: Duration, detail: String) {
    let line = format!(
        "criterion {n} {}: {name} [{:.1} s] {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(pass, "{}", line.trim_end());
}

fn model() -> SpectralModel {
    SpectralModel::default_double_peak()
}

fn fermionic_data() -> MatsubaraData {
    oracle_matsubara(&model(), BETA, &DEFAULT_TARGET_INDICES, Statistics::Fermionic, PREC).unwrap()
}

/// The default-configuration continuation of exact fermionic data, shared by
/// the criteria that judge the optimized reconstruction.
struct Reference {
    outcome: Outcome,
    baseline: SpectralFunction,
    exact_aux: SpectralFunction,
    exact_bosonic: SpectralFunction,
    elapsed: Duration,
}

static REFERENCE: Lazy<Reference> = Lazy::new(|| {
    let cfg = PipelineConfig::default();
    let t = Instant::now();
    let outcome = pipeline::continue_data(&cfg, DataFile::Matsubara(fermionic_data())).unwrap();
    let elapsed = t.elapsed();
    let (_, state) = pipeline::interpolate(&cfg, &outcome.prepared.data).unwrap();
    let baseline = extract_spectral(&state, constant_theta(BigComplex::zero(PREC)), &cfg.evaluation()).unwrap();
    let grid = cfg.evaluation().grid;
    Reference {
        exact_aux: model_spectral(&model(), &grid, BETA, Density::Aux).unwrap(),
        exact_bosonic: model_spectral(&model(), &grid, BETA, Density::Bosonic).unwrap(),
        outcome,
        baseline,
        elapsed,
    }
});

#[test]
fn criterion_1_interpolation_exactness() {
    let t = Instant::now();
    let data = fermionic_data();
    let st = disk_values(&data).unwrap();
    let rep = pick_select(&st, DEFAULT_PICK_SHIFT);
    let st = schur_coefficients(&st.select(&rep.selected)).unwrap();
    let mut worst: f64 = 0.0;
    for free in [Complex64::new(0.0, 0.0), Complex64::new(-0.9, 0.0), Complex64::new(0.3, -0.4)] {
        for &pos in &rep.selected {
            let z = BigComplex::new(
                rug::Float::new(PREC),
                nevac::domain::frequency_big(data.indices[pos], BETA, Statistics::Fermionic, PREC),
            );
            let ng = evaluate_ng(&st, constant_theta(BigComplex::from_c64(PREC, free)), &z).unwrap();
            let target = &BigComplex::zero(PREC) - &data.values[pos];
            worst = worst.max(rel_err(&ng, &target).to_f64());
        }
    }
    let el = t.elapsed();
    verdict(
        1,
        "interpolation exactness",
        worst <= 1e-20 && rep.selected.len() == 36 && el <= Duration::from_secs(10),
        el,
        format!("max relative error {worst:.2e} over {} nodes", rep.selected.len()),
    );
}

#[test]
fn criterion_2_causality_screening() {
    let t = Instant::now();
    let data = fermionic_data();
    let rep = pick_select(&disk_values(&data).unwrap(), DEFAULT_PICK_SHIFT);
    let all = rep.selected.len() == 36 && rep.dropped.is_empty();

    // Im χ̃ > 0 puts −χ̃ in the lower half plane, i.e. |λ| > 1.
    let mut bad = data.clone();
    let k = 17;
    bad.values[k] = bad.values[k].conj();
    let bad_state = disk_values(&bad).unwrap();
    let lambda = bad_state_modulus(&bad_state, k);
    let rep_bad = pick_select(&bad_state, DEFAULT_PICK_SHIFT);
    let dropped = rep_bad.dropped.iter().any(|(n, _)| *n == data.indices[k]);
    let el = t.elapsed();
    verdict(
        2,
        "causality screening",
        all && lambda > 1.0 && dropped && el <= Duration::from_secs(5),
        el,
        format!(
            "exact: {} accepted; perturbed n={} (|lambda|={lambda:.3}) dropped={dropped}",
            rep.selected.len(),
            data.indices[k]
        ),
    );
}

fn bad_state_modulus(state: &nevac::nevanlinna::SchurState, k: usize) -> f64 {
    state.disk_values[k].abs().to_f64()
}

#[test]
fn criterion_3_hardy_optimization_removes_oscillations() {
    let r = &*REFERENCE;
    let hardy = compare(&r.exact_aux, &r.outcome.auxiliary).unwrap();
    let constant = compare(&r.exact_aux, &r.baseline).unwrap();
    let rel_l2 = hardy.l2 / l2_norm(&r.exact_aux);
    let ratio = constant.linf / hardy.linf;
    verdict(
        3,
        "Hardy optimization vs constant free function",
        ratio >= 2.0 && rel_l2 <= 0.10 && r.elapsed <= Duration::from_secs(600),
        r.elapsed,
        format!(
            "Linf constant {:.3e} / Hardy {:.3e} = {ratio:.1}; Hardy relative L2 {rel_l2:.4} ({} iterations, {:?})",
            constant.linf, hardy.linf, r.outcome.iterations, r.outcome.status
        ),
    );
}

#[test]
fn criterion_4_bosonic_reconstruction() {
    let r = &*REFERENCE;
    let t = Instant::now();
    let rho = tanh_convert(&r.outcome.auxiliary, BETA);
    let n = rho.values.len();
    let odd = (0..n).map(|i| (rho.values[i] + rho.values[n - 1 - i]).abs()).fold(0.0, f64::max);
    let mid = rho.grid.nodes().iter().position(|&w| w == 0.0);
    let zero_at_origin = mid.map_or(false, |i| rho.values[i] == 0.0);
    let rel_l2 = compare(&r.exact_bosonic, &rho).unwrap().l2 / l2_norm(&r.exact_bosonic);
    verdict(
        4,
        "bosonic reconstruction",
        odd <= 1e-6 && zero_at_origin && rel_l2 <= 0.10,
        t.elapsed() + r.elapsed,
        format!("max |rho(w)+rho(-w)| {odd:.1e}; rho(0)=0: {zero_at_origin}; relative L2 {rel_l2:.4}"),
    );
}

fn max_rel(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm() / y.norm()).fold(0.0, f64::max)
}

#[test]
fn criterion_5_fermionization_matches_oracle() {
    let t = Instant::now();
    let m = model();
    let exact = fermionic_data().values_c64();
    let cfg = FermionizeConfig::default();

    let tau = oracle_tau(&m, BETA, &chebyshev_taus(BETA, 512), Statistics::Bosonic, PREC).unwrap();
    let from_tau = fermionize_tau(&tau, &cfg).unwrap();
    let err_tau = max_rel(&from_tau.values_c64(), &exact);

    let bos = oracle_matsubara(&m, BETA, &bosonic_fit_indices(), Statistics::Bosonic, PREC).unwrap();
    let err_freq = max_rel(&fermionize_freq(&bos, &cfg).unwrap().data.values_c64(), &exact);

    // single pole at ω₀ = 1, β = 2: χ̃(iω_n) = 1/(tanh(βω₀/2)(iω_n − ω₀))
    let (beta, w0) = (2.0, 1.0);
    let pole = SpectralModel::poles(&[(1.0, w0)]).unwrap();
    let pole_cfg = FermionizeConfig {
        target_indices: (0..10).collect(),
        ..FermionizeConfig::default()
    };
    let closed: Vec<Complex64> = (0..10)
        .map(|n| {
            let wn = (2 * n + 1) as f64 * std::f64::consts::PI / beta;
            1.0 / ((0.5 * beta * w0).tanh() * Complex64::new(-w0, wn))
        })
        .collect();
    let taus: Vec<f64> = (1..=400).map(|k| beta * k as f64 / 401.0).collect();
    let pole_tau = oracle_tau(&pole, beta, &taus, Statistics::Bosonic, PREC).unwrap();
    let err_pole_tau = max_rel(&fermionize_tau(&pole_tau, &pole_cfg).unwrap().values_c64(), &closed);
    let pole_bos = oracle_matsubara(&pole, beta, &(0..64).collect::<Vec<_>>(), Statistics::Bosonic, PREC).unwrap();
    let pole_err = |count: usize| {
        let c = FermionizeConfig {
            fit_grid: RealFrequencyGrid::new(-8.0, 8.0, count).unwrap(),
            ..pole_cfg.clone()
        };
        max_rel(&fermionize_freq(&pole_bos, &c).unwrap().data.values_c64(), &closed)
    };
    let (coarse, fine) = (pole_err(801), pole_err(1601));
    // A δ-peak is resolved only to the fit-grid spacing: the error must be
    // small on the default grid and shrink when the grid is refined.
    let pole_ok = err_pole_tau <= 1e-6 && coarse <= 5e-5 && fine < coarse / 2.0;

    let el = t.elapsed();
    verdict(
        5,
        "fermionization oracle equivalence",
        err_tau <= 1e-6 && err_freq <= 1e-6 && pole_ok && el <= Duration::from_secs(60),
        el,
        format!(
            "tau {err_tau:.2e}, freq {err_freq:.2e}; single pole: tau {err_pole_tau:.2e}, freq {coarse:.2e} (801 nodes) -> {fine:.2e} (1601 nodes)"
        ),
    );
}

#[test]
fn criterion_6_sum_rule() {
    let r = &*REFERENCE;
    let t = Instant::now();
    let m = model();
    let tau = oracle_tau(&m, BETA, &chebyshev_taus(BETA, 512), Statistics::Bosonic, PREC).unwrap();
    let s_tau = sum_rule_from_tau(&tau).unwrap().value;
    let tail = oracle_matsubara(&m, BETA, &tail_fit_indices(), Statistics::Fermionic, PREC).unwrap();
    let s_tail = sum_rule_from_tail(&tail).unwrap().value;
    let agree = (s_tau - s_tail).abs() / s_tau.abs();
    let s = r.outcome.prepared.sum_rule.value;
    let violation = (r.outcome.auxiliary.integral() - s).abs();
    verdict(
        6,
        "sum rule",
        agree <= 1e-3 && violation <= 1e-2 * s,
        t.elapsed() + r.elapsed,
        format!(
            "S_tau {s_tau:.8} vs S_tail {s_tail:.8} (rel {agree:.1e}); |int rho~ - S| = {violation:.2e} (S = {s:.6})"
        ),
    );
}

#[test]
fn criterion_7_gradient_matches_finite_differences() {
    let t = Instant::now();
    let cfg = PipelineConfig::default();
    let (_, state) = pipeline::interpolate(&cfg, &fermionic_data()).unwrap();
    let prepared_s = nevac::SumRule::user(1.0);
    let cost_cfg = nevac::hardy::CostConfig::new(prepared_s, &cfg.evaluation());
    let model = CostModel::new(&state, &cost_cfg, cfg.hardy_order).unwrap();
    let dim = 2 * cfg.hardy_order;
    let mut rng = rand::rngs::StdRng::seed_from_u64(cfg.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let scale = rng.gen_range(0.05..0.95) / model.max_free_modulus(&x);
        x.iter_mut().for_each(|v| *v *= scale);
        let (_, g) = model.value_and_gradient(&x).unwrap();
        for _ in 0..10 {
            let d: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let h = 1e-6;
            let shifted = |s: f64| x.iter().zip(&d).map(|(a, b)| a + s * h * b / norm).collect::<Vec<_>>();
            let fd = (model.value(&shifted(1.0)) - model.value(&shifted(-1.0))) / (2.0 * h);
            let an: f64 = g.iter().zip(&d).map(|(a, b)| a * b / norm).sum();
            worst = worst.max((fd - an).abs() / an.abs().max(f64::MIN_POSITIVE));
        }
    }
    let el = t.elapsed();
    verdict(
        7,
        "gradient vs central differences",
        worst <= 1e-5 && el <= Duration::from_secs(120),
        el,
        format!("20 points x 10 directions at H = {}, worst relative error {worst:.2e}", cfg.hardy_order),
    );
}

#[test]
fn criterion_8_determinism() {
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("input.dat");
    io::write_matsubara(&input, &fermionic_data()).unwrap();
    let config = dir.path().join("light.conf");
    std::fs::write(&config, "hardy_order = 20\nmax_iterations = 40\nomega_count = 401\n").unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_nevac"))
            .arg("continue")
            .arg("--config")
            .arg(&config)
            .arg(&input)
            .arg(&out)
            .output()
            .unwrap()
            .status;
        (status.code(), std::fs::read(out).unwrap_or_default())
    };
    let (c1, a) = run("a.dat");
    let (c2, b) = run("b.dat");
    let identical = !a.is_empty() && a == b && c1 == c2 && matches!(c1, Some(0) | Some(4));
    verdict(
        8,
        "determinism",
        identical,
        t.elapsed(),
        format!("exit codes {c1:?}/{c2:?}, {} bytes, identical: {}", a.len(), a == b),
    );
}

/// Not a gating criterion: the complete bosonic chain, where the fermionized
/// data is only as accurate as the frequency fit.
#[test]
fn end_to_end_bosonic_report() {
    let t = Instant::now();
    let cfg = PipelineConfig::default();
    let bos = oracle_matsubara(&model(), BETA, &bosonic_fit_indices(), Statistics::Bosonic, PREC).unwrap();
    let out = pipeline::continue_data(&cfg, DataFile::Matsubara(bos)).unwrap();
    let exact = model_spectral(&model(), &cfg.evaluation().grid, BETA, Density::Bosonic).unwrap();
    let rel = compare(&exact, &out.spectral).unwrap().l2 / l2_norm(&exact);
    let n = out.spectral.values.len();
    let odd = (0..n)
        .map(|i| (out.spectral.values[i] + out.spectral.values[n - 1 - i]).abs())
        .fold(0.0, f64::max);
    let line = format!(
        "info: bosonic input through frequency fermionization: {} of 36 nodes pass screening, relative L2 {rel:.3}, max |rho(w)+rho(-w)| {odd:.1e} [{:.1} s]\n",
        out.pick.selected.len(),
        t.elapsed().as_secs_f64()
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(out.symmetric && odd <= 1e-6);
}
