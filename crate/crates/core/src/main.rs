use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use nevac::config::PipelineConfig;
use nevac::pipeline::{self, exit};

fn cli() -> Command {
    let path = |name: &'static str, help: &'static str| {
        Arg::new(name)
            .help(help)
            .required(true)
            .value_parser(clap::value_parser!(PathBuf))
    };
    let mut cmd = Command::new("nevac")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Nevanlinna analytic continuation of bosonic and fermionic Matsubara data")
        .subcommand_required(true)
        .arg(
            Arg::new("config")
                .long("config")
                .value_name("PATH")
                .help("key = value configuration file; repeatable, applied in order")
                .action(ArgAction::Append)
                .value_parser(clap::value_parser!(PathBuf))
                .global(true),
        )
        .subcommand(
            Command::new("continue")
                .about("continue input data to a spectral function")
                .arg(path("input", "Matsubara or imaginary-time data file"))
                .arg(path("output", "spectral function file to write")),
        )
        .subcommand(
            Command::new("fermionize")
                .about("write the fermionic Matsubara data of bosonic input")
                .arg(path("input", "bosonic Matsubara or imaginary-time data file"))
                .arg(path("output", "fermionic Matsubara file to write")),
        )
        .subcommand(
            Command::new("check")
                .about("validate input and report causality screening")
                .arg(path("input", "data file")),
        )
        .subcommand(
            Command::new("bench")
                .about("run oracle data end to end and print error metrics")
                .arg(
                    Arg::new("paths")
                        .value_name("[DATA] OUTPUT")
                        .help("optional file for the generated data, then the spectral output")
                        .num_args(1..=2)
                        .required(true)
                        .value_parser(clap::value_parser!(PathBuf)),
                ),
        );
    // every configuration knob doubles as a --key value override
    for (key, default) in PipelineConfig::default().entries() {
        cmd = cmd.arg(
            Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .help(format!("configuration override (default {default})"))
                .global(true)
                .help_heading("Configuration"),
        );
    }
    cmd
}

fn config(m: &ArgMatches) -> nevac::Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    for f in m.get_many::<PathBuf>("config").into_iter().flatten() {
        cfg.apply_file(f)?;
    }
    for (key, _) in PipelineConfig::default().entries() {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn fail(e: nevac::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(pipeline::exit_code(&e) as u8)
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { code(exit::FAILURE) } else { ExitCode::SUCCESS };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let cfg = match config(sub) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return code(exit::FAILURE);
        }
    };
    let p = |k: &str| sub.get_one::<PathBuf>(k).expect("required").as_path();
    match name {
        "continue" => match pipeline::run_pipeline(&cfg, p("input"), p("output")) {
            Ok(out) => {
                print!("{}", out.report());
                if out.exit_code() != exit::OK {
                    eprintln!("warning: optimizer did not converge; output written and flagged");
                }
                code(out.exit_code())
            }
            Err(e) => fail(e),
        },
        "fermionize" => match pipeline::run_fermionize(&cfg, p("input"), p("output")) {
            Ok(prep) => {
                println!(
                    "{} fermionic points written; S = {:.10} ({})",
                    prep.data.len(),
                    prep.sum_rule.value,
                    prep.sum_rule.source.as_str()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        "check" => match pipeline::run_check(&cfg, p("input")) {
            Ok(report) => {
                print!("{report}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        "bench" => {
            let paths: Vec<&Path> = sub.get_many::<PathBuf>("paths").expect("required").map(PathBuf::as_path).collect();
            let (data, out) = match paths.as_slice() {
                [out] => (None, *out),
                [data, out] => (Some(*data), *out),
                _ => unreachable!("clap bounds the count"),
            };
            match pipeline::run_bench(&cfg, data, out) {
                Ok(b) => {
                    print!("{}", b.outcome.report());
                    print!("{}", b.table());
                    code(b.outcome.exit_code())
                }
                Err(e) => fail(e),
            }
        }
        _ => unreachable!("clap rejects unknown subcommands"),
    }
}
