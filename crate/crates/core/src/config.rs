//! Pipeline configuration: defaults, `key = value` files and overrides.

use std::fmt::Write as _;
use std::path::Path;

use crate::domain::RealFrequencyGrid;
use crate::error::{Error, Result};
use crate::fermionize::{FermionizeConfig, DEFAULT_TARGET_INDICES};
use crate::hardy::{DEFAULT_HARDY_ORDER, DEFAULT_LAMBDA};
use crate::nevanlinna::{EvaluationConfig, DEFAULT_ETA, DEFAULT_PICK_SHIFT};
use crate::optimize::LbfgsOptions;
use crate::precision::default_precision;

/// Sum rule source requested by the user.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SumRuleChoice {
    /// τ endpoints for τ input, tail fit otherwise.
    Auto,
    Value(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Inverse temperature for generated data; data files carry their own.
    pub beta: f64,
    /// Statistics of generated data (`bench`).
    pub statistics: String,
    pub precision_bits: u32,
    pub eta: f64,
    pub omega_min: f64,
    pub omega_max: f64,
    pub omega_count: usize,
    pub lambda: f64,
    pub hardy_order: usize,
    pub pick_shift: f64,
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub target_indices: Vec<i64>,
    pub fit_omega_min: f64,
    pub fit_omega_max: f64,
    pub fit_omega_count: usize,
    pub tikhonov_alpha: f64,
    pub svd_cutoff_rel: f64,
    pub sum_rule: SumRuleChoice,
    /// Restrict the free function to the reflection-symmetric subspace;
    /// `None` decides from the data.
    pub symmetric: Option<bool>,
    pub seed: u64,
    /// Model used by `bench`: symmetric Gaussian double peak.
    pub model_center: f64,
    pub model_width: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lbfgs = LbfgsOptions::default();
        Self {
            beta: 100.0,
            statistics: "bosonic".into(),
            precision_bits: default_precision(),
            eta: DEFAULT_ETA,
            omega_min: -8.0,
            omega_max: 8.0,
            omega_count: 2001,
            lambda: DEFAULT_LAMBDA,
            hardy_order: DEFAULT_HARDY_ORDER,
            pick_shift: DEFAULT_PICK_SHIFT,
            max_iterations: lbfgs.max_iterations,
            grad_tol: lbfgs.grad_tol,
            target_indices: DEFAULT_TARGET_INDICES.to_vec(),
            fit_omega_min: -8.0,
            fit_omega_max: 8.0,
            fit_omega_count: 801,
            tikhonov_alpha: 1e-12,
            svd_cutoff_rel: 1e-12,
            sum_rule: SumRuleChoice::Auto,
            symmetric: None,
            seed: 0,
            model_center: 2.0,
            model_width: 0.5,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::arg(format!("invalid value for {key}: {value:?}")))
}

impl PipelineConfig {
    /// Sets one knob from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "beta" => self.beta = parse_num(key, v)?,
            "statistics" => match v {
                "bosonic" | "fermionic" => self.statistics = v.into(),
                _ => return Err(Error::arg(format!("statistics must be bosonic or fermionic, got {v:?}"))),
            },
            "precision_bits" => self.precision_bits = parse_num(key, v)?,
            "eta" => self.eta = parse_num(key, v)?,
            "omega_min" => self.omega_min = parse_num(key, v)?,
            "omega_max" => self.omega_max = parse_num(key, v)?,
            "omega_count" => self.omega_count = parse_num(key, v)?,
            "lambda" => self.lambda = parse_num(key, v)?,
            "hardy_order" => self.hardy_order = parse_num(key, v)?,
            "pick_shift" => self.pick_shift = parse_num(key, v)?,
            "max_iterations" => self.max_iterations = parse_num(key, v)?,
            "grad_tol" => self.grad_tol = parse_num(key, v)?,
            "target_indices" => {
                self.target_indices = v
                    .split(',')
                    .map(|t| parse_num(key, t.trim()))
                    .collect::<Result<_>>()?
            }
            "fit_omega_min" => self.fit_omega_min = parse_num(key, v)?,
            "fit_omega_max" => self.fit_omega_max = parse_num(key, v)?,
            "fit_omega_count" => self.fit_omega_count = parse_num(key, v)?,
            "tikhonov_alpha" => self.tikhonov_alpha = parse_num(key, v)?,
            "svd_cutoff_rel" => self.svd_cutoff_rel = parse_num(key, v)?,
            "sum_rule" => {
                self.sum_rule = if v == "auto" {
                    SumRuleChoice::Auto
                } else {
                    SumRuleChoice::Value(parse_num(key, v)?)
                }
            }
            "symmetric" => {
                self.symmetric = match v {
                    "auto" => None,
                    "true" => Some(true),
                    "false" => Some(false),
                    _ => return Err(Error::arg(format!("symmetric must be auto, true or false, got {v:?}"))),
                }
            }
            "seed" => self.seed = parse_num(key, v)?,
            "model_center" => self.model_center = parse_num(key, v)?,
            "model_width" => self.model_width = parse_num(key, v)?,
            other => return Err(Error::arg(format!("unknown configuration key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: no + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(k, v).map_err(|e| Error::Parse {
                line: no + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        self.apply_text(&text)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::arg("beta must be positive"));
        }
        if self.precision_bits < 53 {
            return Err(Error::arg("precision_bits must be at least 53"));
        }
        if self.hardy_order == 0 {
            return Err(Error::arg("hardy_order must be at least 1"));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::arg("lambda must be non-negative"));
        }
        self.evaluation().check()?;
        self.fermionize().check()
    }

    pub fn evaluation(&self) -> EvaluationConfig {
        EvaluationConfig {
            eta: self.eta,
            grid: RealFrequencyGrid {
                omega_min: self.omega_min,
                omega_max: self.omega_max,
                count: self.omega_count,
            },
        }
    }

    pub fn fermionize(&self) -> FermionizeConfig {
        FermionizeConfig {
            target_indices: self.target_indices.clone(),
            fit_grid: RealFrequencyGrid {
                omega_min: self.fit_omega_min,
                omega_max: self.fit_omega_max,
                count: self.fit_omega_count,
            },
            tikhonov_alpha: self.tikhonov_alpha,
            svd_cutoff_rel: self.svd_cutoff_rel,
            precision_bits: self.precision_bits,
        }
    }

    pub fn lbfgs(&self) -> LbfgsOptions {
        LbfgsOptions {
            max_iterations: self.max_iterations,
            grad_tol: self.grad_tol,
            ..LbfgsOptions::default()
        }
    }

    /// Every knob as `key=value`, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let idx = self
            .target_indices
            .iter()
            .map(i64::to_string)
            .collect::<Vec<_>>()
            .join(",");
        vec![
            ("beta", format!("{:e}", self.beta)),
            ("statistics", self.statistics.clone()),
            ("precision_bits", self.precision_bits.to_string()),
            ("eta", format!("{:e}", self.eta)),
            ("omega_min", format!("{:e}", self.omega_min)),
            ("omega_max", format!("{:e}", self.omega_max)),
            ("omega_count", self.omega_count.to_string()),
            ("lambda", format!("{:e}", self.lambda)),
            ("hardy_order", self.hardy_order.to_string()),
            ("pick_shift", format!("{:e}", self.pick_shift)),
            ("max_iterations", self.max_iterations.to_string()),
            ("grad_tol", format!("{:e}", self.grad_tol)),
            ("target_indices", idx),
            ("fit_omega_min", format!("{:e}", self.fit_omega_min)),
            ("fit_omega_max", format!("{:e}", self.fit_omega_max)),
            ("fit_omega_count", self.fit_omega_count.to_string()),
            ("tikhonov_alpha", format!("{:e}", self.tikhonov_alpha)),
            ("svd_cutoff_rel", format!("{:e}", self.svd_cutoff_rel)),
            (
                "sum_rule",
                match self.sum_rule {
                    SumRuleChoice::Auto => "auto".into(),
                    SumRuleChoice::Value(v) => format!("{v:e}"),
                },
            ),
            (
                "symmetric",
                match self.symmetric {
                    None => "auto".into(),
                    Some(b) => b.to_string(),
                },
            ),
            ("seed", self.seed.to_string()),
            ("model_center", format!("{:e}", self.model_center)),
            ("model_width", format!("{:e}", self.model_width)),
        ]
    }

    /// The configuration as a loadable `key = value` text.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_echo_lambda() {
        let cfg = PipelineConfig::default();
        assert!(cfg.entries().contains(&("lambda", "1e-4".to_string())));
        assert!(cfg.check().is_ok());
    }

    #[test]
    fn file_then_override() {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text("# comment\nlambda = 1e-3\n\nhardy_order=10 # trailing\n").unwrap();
        cfg.set("lambda", "2e-3").unwrap();
        assert_eq!(cfg.lambda, 2e-3);
        assert_eq!(cfg.hardy_order, 10);
        assert_eq!(cfg.eta, DEFAULT_ETA);
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.set("sum_rule", "0.75").unwrap();
        cfg.set("target_indices", "0,3,9").unwrap();
        cfg.set("symmetric", "false").unwrap();
        let mut back = PipelineConfig::default();
        back.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn bad_lines_report_position() {
        let mut cfg = PipelineConfig::default();
        match cfg.apply_text("eta = 1e-3\nnonsense\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(cfg.apply_text("colour = blue").is_err());
        assert!(cfg.apply_text("eta = fast").is_err());
    }
}
