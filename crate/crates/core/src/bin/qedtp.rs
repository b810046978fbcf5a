use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qedtp::config::parse_config;
use qedtp::run::{run, Command};
use qedtp::Error;

#[derive(Parser)]
#[command(name = "qedtp", version, about = "Electrons on a real-space grid coupled to a quantized cavity mode")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Paths {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.dir; default ./out)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Ground state; writes scf.chk and scf_energy.txt
    Scf(Paths),
    /// Real-time propagation from scf.chk; writes timeseries.tsv
    Propagate(Paths),
    /// Absorption spectrum of timeseries.tsv
    Spectrum(Paths),
    /// Harmonic spectrum of a laser-driven timeseries.tsv
    Hhg(Paths),
    /// Classical-photon comparison propagation from scf.chk
    Qedft(Paths),
    /// Exact reference ground state (and optional propagation)
    Oracle(Paths),
    /// Invariant checks on the configured system
    Validate(Paths),
}

fn error_line(e: &Error) -> String {
    let msg = e.to_string().replace(['\n', '\t'], " ");
    format!("error\tkind={}\tmessage={msg}", e.kind())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, paths) = match cli.command {
        Cmd::Scf(p) => (Command::Scf, p),
        Cmd::Propagate(p) => (Command::Propagate, p),
        Cmd::Spectrum(p) => (Command::Spectrum, p),
        Cmd::Hhg(p) => (Command::Hhg, p),
        Cmd::Qedft(p) => (Command::Qedft, p),
        Cmd::Oracle(p) => (Command::Oracle, p),
        Cmd::Validate(p) => (Command::Validate, p),
    };
    let result = parse_config(&paths.config).and_then(|cfg| {
        let out = paths
            .out
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        run(cmd, &cfg, &out)
    });
    match result {
        Ok(report) => {
            for line in &report.lines {
                println!("{line}");
            }
            for a in &report.artifacts {
                println!("wrote {}", a.display());
            }
            if report.failed > 0 {
                eprintln!("error\tkind=validation\tmessage={} of {} checks failed", report.failed, report.failed + report.passed);
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(match e {
                Error::Config(_) | Error::Usage(_) => 2,
                _ => 1,
            })
        }
    }
}
