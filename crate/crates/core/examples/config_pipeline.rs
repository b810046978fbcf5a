//! Drives the library the way the command-line tool does: parse a TOML run
//! configuration, then run scf, propagate and spectrum into a directory.
//! Arguments: config path (default configs/atom.toml), output directory.

use std::path::PathBuf;

use qedtp::config::parse_config;
use qedtp::run::{run, Command};

fn main() -> qedtp::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = PathBuf::from(args.next().unwrap_or_else(|| "configs/atom.toml".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/example".into()));
    let cfg = parse_config(&config)?;
    for cmd in [Command::Scf, Command::Propagate, Command::Spectrum] {
        let report = run(cmd, &cfg, &out)?;
        for line in &report.lines {
            println!("{cmd}: {line}");
        }
        for path in &report.artifacts {
            println!("{cmd}: wrote {}", path.display());
        }
    }
    Ok(())
}
