//! Text formats for Matsubara, imaginary-time and spectral data.
//!
//! Data files are whitespace-separated columns with `#` comments and two
//! required directives:
//!
//! ```text
//! #! beta=100
//! #! statistics=bosonic        # or fermionic, or tau
//! 0  -1.25  0.0                # Matsubara rows: n  Re  Im
//! ```
//!
//! τ files (`statistics=tau`) hold `tau value [imag]` rows.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rug::Float;

use crate::config::PipelineConfig;
use crate::domain::{ImaginaryTimeData, MatsubaraData, SpectralFunction, Statistics};
use crate::error::{Error, Result};
use crate::precision::{format_real, parse_real, BigComplex};

/// Significant digits of emitted spectral values.
pub const SPECTRAL_DIGITS: usize = 17;

#[derive(Clone, Debug)]
pub enum DataFile {
    Matsubara(MatsubaraData),
    Tau(ImaginaryTimeData),
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

/// Parses data text; decimal values are read at `precision_bits`.
pub fn parse_data_text(text: &str, precision_bits: u32) -> Result<DataFile> {
    let mut beta: Option<(f64, usize)> = None;
    let mut kind: Option<String> = None;
    let mut rows: Vec<(usize, Vec<&str>)> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = no + 1;
        let trimmed = raw.trim();
        if let Some(directive) = trimmed.strip_prefix("#!") {
            let directive = directive.split('#').next().unwrap_or("").trim();
            let (k, v) = directive
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("malformed directive {directive:?}")))?;
            match k.trim() {
                "beta" => {
                    let b: f64 = v
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(line, format!("invalid beta {:?}", v.trim())))?;
                    if !(b > 0.0) {
                        return Err(parse_err(line, "beta must be positive"));
                    }
                    beta = Some((b, line));
                }
                "statistics" => match v.trim() {
                    s @ ("bosonic" | "fermionic" | "tau") => kind = Some(s.to_string()),
                    s => return Err(parse_err(line, format!("unknown statistics {s:?}"))),
                },
                other => return Err(parse_err(line, format!("unknown directive {other:?}"))),
            }
            continue;
        }
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        rows.push((line, body.split_whitespace().collect()));
    }
    let (beta, _) = beta.ok_or_else(|| parse_err(0, "missing directive `#! beta=<value>`"))?;
    let kind = kind.ok_or_else(|| parse_err(0, "missing directive `#! statistics=<bosonic|fermionic|tau>`"))?;

    if kind == "tau" {
        let mut taus = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        for (line, cols) in &rows {
            if cols.len() != 2 && cols.len() != 3 {
                return Err(parse_err(*line, format!("expected `tau value [imag]`, got {} columns", cols.len())));
            }
            let num = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| parse_err(*line, format!("invalid number {s:?}")))
            };
            let tau = num(cols[0])?;
            if let Some(&prev) = taus.last() {
                if tau <= prev {
                    return Err(parse_err(*line, "tau column must be strictly increasing"));
                }
            }
            if !(tau > 0.0 && tau < beta) {
                return Err(parse_err(*line, format!("tau {tau} lies outside (0, {beta})")));
            }
            let im = if cols.len() == 3 { num(cols[2])? } else { 0.0 };
            taus.push(tau);
            values.push(Complex64::new(num(cols[1])?, im));
        }
        if taus.is_empty() {
            return Err(parse_err(0, "no data rows"));
        }
        return Ok(DataFile::Tau(ImaginaryTimeData::new(beta, taus, values)?));
    }

    let statistics = if kind == "bosonic" {
        Statistics::Bosonic
    } else {
        Statistics::Fermionic
    };
    let mut indices = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len());
    for (line, cols) in &rows {
        if cols.len() != 3 {
            return Err(parse_err(*line, format!("expected `n re im`, got {} columns", cols.len())));
        }
        let n: i64 = cols[0]
            .parse()
            .map_err(|_| parse_err(*line, format!("invalid index {:?}", cols[0])))?;
        if let Some(&prev) = indices.last() {
            if n <= prev {
                return Err(parse_err(*line, "index column must be strictly increasing"));
            }
        }
        let big = |s: &str| -> Result<Float> {
            parse_real(precision_bits, s).map_err(|_| parse_err(*line, format!("invalid number {s:?}")))
        };
        indices.push(n);
        values.push(BigComplex::new(big(cols[1])?, big(cols[2])?));
    }
    if indices.is_empty() {
        return Err(parse_err(0, "no data rows"));
    }
    Ok(DataFile::Matsubara(MatsubaraData::new(
        beta,
        statistics,
        indices,
        values,
        precision_bits,
    )?))
}

pub fn parse_data_file(path: &Path, precision_bits: u32) -> Result<DataFile> {
    let text = fs::read_to_string(path)?;
    parse_data_text(&text, precision_bits)
}

/// Decimal digits that represent `bits` of significand.
fn digits_for(bits: u32) -> usize {
    (bits as f64 * std::f64::consts::LOG10_2).ceil() as usize + 2
}

pub fn matsubara_text(data: &MatsubaraData) -> String {
    let digits = digits_for(data.precision_bits);
    let mut out = String::new();
    let _ = writeln!(out, "#! beta={}", data.beta);
    let _ = writeln!(out, "#! statistics={}", data.statistics.as_str());
    for (n, v) in data.indices.iter().zip(&data.values) {
        let _ = writeln!(out, "{n} {} {}", format_real(&v.re, digits), format_real(&v.im, digits));
    }
    out
}

pub fn write_matsubara(path: &Path, data: &MatsubaraData) -> Result<()> {
    fs::write(path, matsubara_text(data))?;
    Ok(())
}

pub fn tau_text(data: &ImaginaryTimeData) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "#! beta={}", data.beta);
    let _ = writeln!(out, "#! statistics=tau");
    for (t, v) in data.taus.iter().zip(&data.values) {
        let _ = writeln!(out, "{t:.17e} {:.17e} {:.17e}", v.re, v.im);
    }
    out
}

/// Spectral file text: a `#` metadata block with every configuration value
/// and any extra `key=value` pairs, then `omega rho` rows.
pub fn spectral_text(rho: &SpectralFunction, cfg: &PipelineConfig, extra: &[(&str, String)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# nevac spectral function");
    let _ = writeln!(out, "# density={}", rho.statistics.as_str());
    for (k, v) in cfg.entries() {
        let _ = writeln!(out, "# {k}={v}");
    }
    for (k, v) in extra {
        let _ = writeln!(out, "# {k}={v}");
    }
    let p = SPECTRAL_DIGITS - 1;
    for (w, r) in rho.grid.nodes().iter().zip(&rho.values) {
        let _ = writeln!(out, "{w:.p$e} {r:.p$e}");
    }
    out
}

pub fn emit_spectral(
    path: &Path,
    rho: &SpectralFunction,
    cfg: &PipelineConfig,
    extra: &[(&str, String)],
) -> Result<()> {
    fs::write(path, spectral_text(rho, cfg, extra))?;
    Ok(())
}

/// Reads the `omega rho` columns of a spectral file.
pub fn parse_spectral_text(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut rows = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let cols: Vec<&str> = body.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(parse_err(no + 1, "expected `omega rho`"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(no + 1, format!("invalid number {s:?}")));
        rows.push((num(cols[0])?, num(cols[1])?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RealFrequencyGrid;

    #[test]
    fn bosonic_file_parses() {
        let text = "# sample\n#! beta=100\n#! statistics=bosonic\n0 -1.25 0.0\n1 -0.5 0.1 # row\n";
        match parse_data_text(text, 128).unwrap() {
            DataFile::Matsubara(d) => {
                assert_eq!(d.indices, vec![0, 1]);
                assert_eq!(d.statistics, Statistics::Bosonic);
                assert_eq!(d.beta, 100.0);
                assert_eq!(d.values[0].re.to_f64(), -1.25);
                assert_eq!(d.precision_bits, 128);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_beta_is_named() {
        let err = parse_data_text("#! statistics=bosonic\n0 1 0\n", 64).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
    }

    #[test]
    fn short_row_reports_line() {
        let text = "#! beta=10\n#! statistics=fermionic\n0 1 0\n2 0.1\n";
        match parse_data_text(text, 64) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_monotone_rows_rejected() {
        let text = "#! beta=10\n#! statistics=fermionic\n3 1 0\n2 1 0\n";
        assert!(matches!(parse_data_text(text, 64), Err(Error::Parse { line: 4, .. })));
        let text = "#! beta=10\n#! statistics=tau\n1 1\n0.5 1\n";
        assert!(matches!(parse_data_text(text, 64), Err(Error::Parse { line: 4, .. })));
    }

    #[test]
    fn tau_file_with_optional_imaginary_column() {
        let text = "#! beta=2\n#! statistics=tau\n0.5 -1\n1.0 -0.5 0.25\n";
        match parse_data_text(text, 64).unwrap() {
            DataFile::Tau(d) => {
                assert_eq!(d.taus, vec![0.5, 1.0]);
                assert_eq!(d.values[1], Complex64::new(-0.5, 0.25));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn matsubara_round_trip_keeps_precision() {
        let text = "#! beta=100\n#! statistics=fermionic\n0 0.1234567890123456789012345678901 -2\n";
        let DataFile::Matsubara(d) = parse_data_text(text, 256).unwrap() else {
            panic!()
        };
        let DataFile::Matsubara(back) = parse_data_text(&matsubara_text(&d), 256).unwrap() else {
            panic!()
        };
        assert_eq!(back.values, d.values);
    }

    #[test]
    fn spectral_round_trip_and_metadata() {
        let grid = RealFrequencyGrid::new(-1.0, 1.0, 5).unwrap();
        let vals = vec![0.0, 0.1, 1.0 / 3.0, std::f64::consts::PI, 0.0];
        let rho = SpectralFunction::new(grid, vals.clone(), Statistics::Bosonic).unwrap();
        let text = spectral_text(&rho, &PipelineConfig::default(), &[("status", "ok".into())]);
        assert!(text.contains("# lambda=1e-4"));
        assert!(text.contains("# status=ok"));
        let rows = parse_spectral_text(&text).unwrap();
        assert_eq!(rows.iter().map(|r| r.1).collect::<Vec<_>>(), vals);
        assert_eq!(rows[0].0, -1.0);
    }

    #[test]
    fn zero_spectral_function_emits_zero_column() {
        let grid = RealFrequencyGrid::new(0.0, 1.0, 3).unwrap();
        let rho = SpectralFunction::new(grid, vec![0.0; 3], Statistics::Fermionic).unwrap();
        let rows = parse_spectral_text(&spectral_text(&rho, &PipelineConfig::default(), &[])).unwrap();
        assert!(rows.iter().all(|r| r.1 == 0.0));
    }
}
