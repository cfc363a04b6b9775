//! The end-to-end chain: data → fermionic data → screening → Schur
//! interpolation → Hardy optimization → spectral function.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::config::{PipelineConfig, SumRuleChoice};
use crate::domain::{ImaginaryTimeData, MatsubaraData, SpectralFunction, Statistics, SumRule};
use crate::error::{Error, Result};
use crate::fermionize::{fermionize_freq, fermionize_tau, sum_rule_from_tail, sum_rule_from_tau, tanh_convert};
use crate::hardy::{
    constant_start, optimize_model, optimize_symmetric, CostConfig, CostModel, HardyCoefficients, OptimizeStatus,
};
use crate::io::{self, DataFile};
use crate::nevanlinna::{disk_values, pick_select, schur_coefficients, PickReport, SchurState};
use crate::oracle::{self, Density, SpectralModel};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const CAUSALITY: i32 = 2;
    pub const PARSE: i32 = 3;
    pub const NOT_CONVERGED: i32 = 4;
}

/// Exit code for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoCausalNodes { .. } | Error::CausalityBreakdown { .. } => exit::CAUSALITY,
        Error::Parse { .. } => exit::PARSE,
        _ => exit::FAILURE,
    }
}

/// Fermionic data ready for continuation.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub data: MatsubaraData,
    /// Whether the original problem was bosonic (ρ = ρ̃·tanh(βω/2) at the end).
    pub bosonic: bool,
    pub sum_rule: SumRule,
    /// Rank of the frequency-space fit, when one was made.
    pub fit_rank: Option<usize>,
}

fn chosen_sum_rule(cfg: &PipelineConfig, auto: impl FnOnce() -> Result<SumRule>) -> Result<SumRule> {
    match cfg.sum_rule {
        SumRuleChoice::Value(v) => Ok(SumRule::user(v)),
        SumRuleChoice::Auto => auto(),
    }
}

/// Fermionizes bosonic input and settles the sum rule.
pub fn prepare(cfg: &PipelineConfig, input: DataFile) -> Result<Prepared> {
    let fcfg = cfg.fermionize();
    match input {
        DataFile::Tau(tau) => prepare_tau(cfg, &tau),
        DataFile::Matsubara(data) => match data.statistics {
            Statistics::Fermionic => {
                let sum_rule = chosen_sum_rule(cfg, || sum_rule_from_tail(&data))?;
                Ok(Prepared {
                    data,
                    bosonic: false,
                    sum_rule,
                    fit_rank: None,
                })
            }
            Statistics::Bosonic => {
                let fit = fermionize_freq(&data, &fcfg)?;
                let sum_rule = chosen_sum_rule(cfg, || sum_rule_from_tail(&fit.data))?;
                Ok(Prepared {
                    data: fit.data,
                    bosonic: true,
                    sum_rule,
                    fit_rank: Some(fit.rank),
                })
            }
        },
    }
}

fn prepare_tau(cfg: &PipelineConfig, tau: &ImaginaryTimeData) -> Result<Prepared> {
    let data = fermionize_tau(tau, &cfg.fermionize())?;
    let sum_rule = chosen_sum_rule(cfg, || sum_rule_from_tau(tau))?;
    Ok(Prepared {
        data,
        bosonic: true,
        sum_rule,
        fit_rank: None,
    })
}

/// Screens the data and builds the Schur coefficients of the accepted nodes.
pub fn interpolate(cfg: &PipelineConfig, data: &MatsubaraData) -> Result<(PickReport, SchurState)> {
    let state = disk_values(data)?;
    let report = pick_select(&state, cfg.pick_shift);
    if report.is_empty() {
        return Err(Error::NoCausalNodes {
            dropped: report.dropped.len(),
        });
    }
    let state = schur_coefficients(&state.select(&report.selected))?;
    Ok((report, state))
}

/// Relative size of Re χ̃ below which data counts as coming from an even ρ̃.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Whether fermionic data is purely imaginary, as the transform of an even
/// density is.
pub fn is_symmetric(data: &MatsubaraData) -> bool {
    let v = data.values_c64();
    let scale = v.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    v.iter().all(|z| z.re.abs() <= SYMMETRY_TOL * scale)
}

/// Everything a continuation run produced.
#[derive(Clone, Debug)]
pub struct Outcome {
    /// ρ for bosonic problems, ρ̃ otherwise.
    pub spectral: SpectralFunction,
    /// ρ̃ before any tanh conversion.
    pub auxiliary: SpectralFunction,
    pub prepared: Prepared,
    pub pick: PickReport,
    pub coeffs: HardyCoefficients,
    /// Whether the free function was restricted to the symmetric subspace.
    pub symmetric: bool,
    pub cost: f64,
    pub iterations: usize,
    pub status: OptimizeStatus,
    pub timings: Vec<(&'static str, Duration)>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            OptimizeStatus::MaxIterations => exit::NOT_CONVERGED,
            OptimizeStatus::Converged | OptimizeStatus::StepCollapse => exit::OK,
        }
    }

    /// Deterministic `key=value` summary for the output metadata.
    pub fn metadata(&self) -> Vec<(&'static str, String)> {
        let p = &self.prepared;
        let mut out = vec![
            ("input_beta", format!("{:e}", p.data.beta)),
            ("problem", if p.bosonic { "bosonic" } else { "fermionic" }.to_string()),
            ("sum_rule_used", format!("{:.16e}", p.sum_rule.value)),
            ("sum_rule_source", p.sum_rule.source.as_str().to_string()),
            ("sum_rule_residual", format!("{:e}", p.sum_rule.residual)),
            ("symmetric_used", self.symmetric.to_string()),
            ("nodes_selected", self.pick.selected.len().to_string()),
            ("nodes_dropped", self.pick.dropped.len().to_string()),
            ("final_cost", format!("{:.16e}", self.cost)),
            ("iterations", self.iterations.to_string()),
            ("status", format!("{:?}", self.status)),
            ("converged", (self.exit_code() == exit::OK).to_string()),
        ];
        if let Some(r) = p.fit_rank {
            out.push(("fit_rank", r.to_string()));
        }
        out
    }

    /// Human-readable report, including wall-clock timings.
    pub fn report(&self) -> String {
        let mut s = String::new();
        let p = &self.prepared;
        let _ = writeln!(
            s,
            "nodes: {} selected, {} dropped",
            self.pick.selected.len(),
            self.pick.dropped.len()
        );
        for (n, why) in &self.pick.dropped {
            let _ = writeln!(s, "  dropped n={n}: {why}");
        }
        let _ = writeln!(
            s,
            "sum rule: S = {:.10} ({}, residual {:.2e})",
            p.sum_rule.value,
            p.sum_rule.source.as_str(),
            p.sum_rule.residual
        );
        let _ = writeln!(s, "integral of rho~: {:.10}", self.auxiliary.integral());
        let _ = writeln!(s, "symmetric free function: {}", self.symmetric);
        let _ = writeln!(s, "final cost: {:.6e}", self.cost);
        let _ = writeln!(s, "iterations: {} ({:?})", self.iterations, self.status);
        for (stage, t) in &self.timings {
            let _ = writeln!(s, "time {stage}: {:.3} s", t.as_secs_f64());
        }
        s
    }
}

/// Continuation of prepared data.
pub fn continue_prepared(cfg: &PipelineConfig, prepared: Prepared) -> Result<Outcome> {
    let mut timings = Vec::new();
    let t = Instant::now();
    let (pick, state) = interpolate(cfg, &prepared.data)?;
    timings.push(("interpolation", t.elapsed()));

    let t = Instant::now();
    let eval = cfg.evaluation();
    let cost_cfg = CostConfig {
        lambda: cfg.lambda,
        ..CostConfig::new(prepared.sum_rule, &eval)
    };
    let model = CostModel::new(&state, &cost_cfg, cfg.hardy_order)?;
    let symmetric = cfg.symmetric.unwrap_or_else(|| is_symmetric(&prepared.data));
    let init = constant_start(&model, symmetric)?;
    timings.push(("initialization", t.elapsed()));

    let t = Instant::now();
    let run = if symmetric {
        optimize_symmetric(&model, &init, &cfg.lbfgs())?
    } else {
        optimize_model(&model, &init, &cfg.lbfgs())?
    };
    timings.push(("optimization", t.elapsed()));

    let auxiliary = model.spectral(&run.coeffs.coeffs)?;
    let spectral = if prepared.bosonic {
        tanh_convert(&auxiliary, prepared.data.beta)
    } else {
        auxiliary.clone()
    };
    Ok(Outcome {
        spectral,
        auxiliary,
        prepared,
        pick,
        iterations: run.trace.len().saturating_sub(1),
        coeffs: run.coeffs,
        symmetric,
        cost: run.cost,
        status: run.status,
        timings,
    })
}

/// Full run from parsed input.
pub fn continue_data(cfg: &PipelineConfig, input: DataFile) -> Result<Outcome> {
    cfg.check()?;
    let t = Instant::now();
    let prepared = prepare(cfg, input)?;
    let elapsed = t.elapsed();
    let mut out = continue_prepared(cfg, prepared)?;
    out.timings.insert(0, ("fermionization", elapsed));
    Ok(out)
}

/// `continue`: reads `input`, writes the spectral function to `output`.
/// The output is written even when the optimizer did not converge; the exit
/// code flags it.
pub fn run_pipeline(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<Outcome> {
    cfg.check()?;
    let data = io::parse_data_file(input, cfg.precision_bits)?;
    let out = continue_data(cfg, data)?;
    io::emit_spectral(output, &out.spectral, cfg, &out.metadata())?;
    Ok(out)
}

/// `fermionize`: transforms bosonic input into a fermionic Matsubara file.
pub fn run_fermionize(cfg: &PipelineConfig, input: &Path, output: &Path) -> Result<Prepared> {
    cfg.check()?;
    let data = io::parse_data_file(input, cfg.precision_bits)?;
    if let DataFile::Matsubara(d) = &data {
        if d.statistics == Statistics::Fermionic {
            return Err(Error::arg("input is already fermionic"));
        }
    }
    let prepared = prepare(cfg, data)?;
    io::write_matsubara(output, &prepared.data)?;
    Ok(prepared)
}

/// `check`: validation and causality screening only.
pub fn run_check(cfg: &PipelineConfig, input: &Path) -> Result<String> {
    cfg.check()?;
    let data = io::parse_data_file(input, cfg.precision_bits)?;
    let mut s = String::new();
    let fermionic = match data {
        DataFile::Matsubara(d) if d.statistics == Statistics::Fermionic => d,
        other => {
            let p = prepare(cfg, other)?;
            let _ = writeln!(s, "fermionized to {} points", p.data.len());
            p.data
        }
    };
    if let Err(diags) = crate::domain::validate(&fermionic) {
        for d in diags {
            let _ = writeln!(s, "warning: {d:?}");
        }
    }
    let state = disk_values(&fermionic)?;
    let pick = pick_select(&state, cfg.pick_shift);
    let _ = writeln!(
        s,
        "pick: {} of {} nodes accepted, min eigenvalue estimate {:.3e}",
        pick.selected.len(),
        fermionic.len(),
        pick.min_eigen_estimate
    );
    for (n, why) in &pick.dropped {
        let _ = writeln!(s, "  dropped n={n}: {why}");
    }
    if pick.is_empty() {
        return Err(Error::NoCausalNodes {
            dropped: pick.dropped.len(),
        });
    }
    Ok(s)
}

/// Oracle data for the configured benchmark model.
pub fn bench_data(cfg: &PipelineConfig) -> Result<(SpectralModel, DataFile)> {
    let model = SpectralModel::gaussians(
        vec![
            oracle::Component {
                weight: 0.5,
                center: -cfg.model_center,
                width: cfg.model_width,
            },
            oracle::Component {
                weight: 0.5,
                center: cfg.model_center,
                width: cfg.model_width,
            },
        ],
        true,
    )?;
    let data = match cfg.statistics.as_str() {
        "fermionic" => oracle::oracle_matsubara(
            &model,
            cfg.beta,
            &cfg.target_indices,
            Statistics::Fermionic,
            cfg.precision_bits,
        )?,
        _ => oracle::oracle_matsubara(
            &model,
            cfg.beta,
            &oracle::bosonic_fit_indices(),
            Statistics::Bosonic,
            cfg.precision_bits,
        )?,
    };
    Ok((model, DataFile::Matsubara(data)))
}

/// Result of `bench`.
pub struct Bench {
    pub outcome: Outcome,
    pub exact: SpectralFunction,
    pub metrics: oracle::Metrics,
    pub relative_l2: f64,
}

impl Bench {
    pub fn table(&self) -> String {
        let m = &self.metrics;
        let mut s = String::new();
        let _ = writeln!(s, "{:<24}{:>14}", "metric", "value");
        for (k, v) in [
            ("l2 error", m.l2),
            ("relative l2 error", self.relative_l2),
            ("linf error", m.linf),
            ("sum rule violation", m.sum_rule_violation),
            ("peak position error", m.peak_position_error),
        ] {
            let _ = writeln!(s, "{k:<24}{v:>14.4e}");
        }
        s
    }
}

/// `bench`: oracle data through the full chain, compared with the exact
/// density. The generated data is saved to `data_out` when given.
pub fn run_bench(cfg: &PipelineConfig, data_out: Option<&Path>, output: &Path) -> Result<Bench> {
    cfg.check()?;
    let (model, data) = bench_data(cfg)?;
    if let (Some(path), DataFile::Matsubara(d)) = (data_out, &data) {
        io::write_matsubara(path, d)?;
    }
    let outcome = continue_data(cfg, data)?;
    let which = if outcome.prepared.bosonic {
        Density::Bosonic
    } else {
        Density::Aux
    };
    let exact = oracle::model_spectral(&model, &cfg.evaluation().grid, cfg.beta, which)?;
    let metrics = oracle::compare(&exact, &outcome.spectral)?;
    let relative_l2 = metrics.l2 / oracle::l2_norm(&exact);
    let mut meta = outcome.metadata();
    meta.push(("bench_relative_l2", format!("{relative_l2:e}")));
    meta.push(("bench_linf", format!("{:e}", metrics.linf)));
    io::emit_spectral(output, &outcome.spectral, cfg, &meta)?;
    Ok(Bench {
        outcome,
        exact,
        metrics,
        relative_l2,
    })
}
