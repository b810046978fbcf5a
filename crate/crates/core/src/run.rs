//! Subcommand orchestration: each command reads the configuration, the
//! artifacts of earlier commands from the output directory, and writes its
//! own tab-separated tables and checkpoints there.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_complex::Complex64 as C64;

use crate::checkpoint::Checkpoint;
use crate::config::{RunConfig, Units};
use crate::error::{Error, Result};
use crate::fock::{truncated_commutator, CavityHamiltonian, FockSpace, TpOrbital};
use crate::grid::{dot_raw, laplacian_accumulate};
use crate::oracle;
use crate::qedft::qedft_propagate;
use crate::scf::{init_orbitals, orthonormality_error, scf_solve_from, IterationRecord};
use crate::spectra::absorption_spectrum;
use crate::spectra::hhg_spectrum;
use crate::system::System;
use crate::tdprop::{mean_norm, propagate, Propagator, TimeSeries};

pub const HARTREE_EV: f64 = 27.211386245988;

pub const SCF_CHECKPOINT: &str = "scf.chk";
pub const PROP_CHECKPOINT: &str = "prop.chk";
pub const TIMESERIES: &str = "timeseries.tsv";
pub const QEDFT_TIMESERIES: &str = "qedft_timeseries.tsv";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Scf,
    Propagate,
    Spectrum,
    Hhg,
    Qedft,
    Oracle,
    Validate,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Scf,
        Command::Propagate,
        Command::Spectrum,
        Command::Hhg,
        Command::Qedft,
        Command::Oracle,
        Command::Validate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Scf => "scf",
            Command::Propagate => "propagate",
            Command::Spectrum => "spectrum",
            Command::Hhg => "hhg",
            Command::Qedft => "qedft",
            Command::Oracle => "oracle",
            Command::Validate => "validate",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown subcommand `{s}`")))
    }
}

/// What a command produced.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub artifacts: Vec<PathBuf>,
    pub lines: Vec<String>,
    pub passed: usize,
    pub failed: usize,
}

/// `#|`-prefixed copy of the configuration for output headers.
pub fn provenance(cfg: &RunConfig) -> String {
    cfg.source.lines().map(|l| format!("#| {l}\n")).collect()
}

fn write_artifact(report: &mut Report, cfg: &RunConfig, path: PathBuf, body: &[u8]) -> Result<()> {
    let mut bytes = provenance(cfg).into_bytes();
    bytes.extend_from_slice(body);
    std::fs::write(&path, bytes)?;
    report.artifacts.push(path);
    Ok(())
}

pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Report> {
    std::fs::create_dir_all(out)?;
    let mut report = Report::default();
    match cmd {
        Command::Scf => run_scf(cfg, out, &mut report)?,
        Command::Propagate => run_propagate(cfg, out, &mut report)?,
        Command::Qedft => run_qedft(cfg, out, &mut report)?,
        Command::Spectrum => run_spectrum(cfg, out, &mut report)?,
        Command::Hhg => run_hhg(cfg, out, &mut report)?,
        Command::Oracle => run_oracle(cfg, out, &mut report)?,
        Command::Validate => run_validate(cfg, out, &mut report)?,
    }
    Ok(report)
}

fn setup(cfg: &RunConfig) -> Result<(System, FockSpace)> {
    Ok((cfg.system.build()?, cfg.cavity.fock()?))
}

fn energy_scale(cfg: &RunConfig) -> (f64, &'static str) {
    match cfg.output.units {
        Units::Atomic => (1.0, "hartree"),
        Units::EvFs => (HARTREE_EV, "eV"),
    }
}

fn run_scf(cfg: &RunConfig, out: &Path, report: &mut Report) -> Result<()> {
    let (system, fock) = setup(cfg)?;
    let mut log = String::new();
    log.push_str(&IterationRecord::tsv_header(fock.sectors()));
    log.push('\n');
    let result = scf_solve_from(&system, &fock, &cfg.scf, None, &mut |r: &IterationRecord| {
        log.push_str(&r.to_tsv());
        log.push('\n');
    });
    write_artifact(report, cfg, out.join("scf_log.tsv"), log.as_bytes())?;
    let state = result?;
    let chk = Checkpoint::new(fock, state.orbitals.clone(), state.iterations as u64, 0.0)?;
    let path = out.join(SCF_CHECKPOINT);
    chk.save(&path)?;
    report.artifacts.push(path);

    let energy = crate::scf::total_energy(&state.orbitals, &system, &fock)?;
    let (scale, unit) = energy_scale(cfg);
    let mut text = String::new();
    writeln!(text, "# units = {unit}").expect("string write");
    writeln!(text, "# iterations = {}", state.iterations).expect("string write");
    for (name, v) in energy.parts() {
        writeln!(text, "{name}\t{:.12e}", v * scale).expect("string write");
    }
    writeln!(text, "total\t{:.12e}", energy.total * scale).expect("string write");
    for (m, e) in state.eigenvalues(&system)?.iter().enumerate() {
        writeln!(text, "eps_{m}\t{:.12e}", e * scale).expect("string write");
    }
    for (n, p) in state.photon_occupations.iter().enumerate() {
        writeln!(text, "P{n}\t{p:.12e}").expect("string write");
    }
    writeln!(text, "q\t{:.12e}", state.q_expectation()).expect("string write");
    writeln!(text, "mu\t{:.12e}", state.mu).expect("string write");
    write_artifact(report, cfg, out.join("scf_energy.txt"), text.as_bytes())?;
    report.lines.push(format!(
        "scf converged in {} iterations, E = {:.10} {unit}",
        state.iterations,
        energy.total * scale
    ));
    if !state.truncation_converged() {
        report
            .lines
            .push(format!("warning: P_Nmax = {:.3e}; consider a larger cavity.n_max", state.photon_occupations.last().unwrap_or(&0.0)));
    }
    Ok(())
}

fn load_ground_state(cfg: &RunConfig, out: &Path, fock: &FockSpace) -> Result<Vec<TpOrbital>> {
    let path = out.join(SCF_CHECKPOINT);
    if !path.exists() {
        return Err(Error::Usage(format!(
            "no SCF checkpoint at {}; run the scf subcommand first",
            path.display()
        )));
    }
    let chk = Checkpoint::load(&path)?;
    let grid = cfg.system.grid()?;
    if chk.grid != grid || chk.fock != *fock || chk.orbitals.len() != cfg.system.occupations.len() {
        return Err(Error::config(format!(
            "checkpoint {} was written for a different grid, cavity or orbital count; rerun scf",
            path.display()
        )));
    }
    Ok(chk.orbitals)
}

fn series_bytes(ts: &TimeSeries) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    ts.write_tsv(&mut buf)?;
    Ok(buf)
}

fn run_propagate(cfg: &RunConfig, out: &Path, report: &mut Report) -> Result<()> {
    let (system, fock) = setup(cfg)?;
    let orbitals = load_ground_state(cfg, out, &fock)?;
    let (ts, last) = propagate(&system, &fock, orbitals, &cfg.prop, &mut |_, _, _| Ok(()))?;
    write_artifact(report, cfg, out.join(TIMESERIES), &series_bytes(&ts)?)?;
    let time = *ts.t.last().unwrap_or(&0.0);
    let path = out.join(PROP_CHECKPOINT);
    Checkpoint::new(fock, last, cfg.prop.steps as u64, time)?.save(&path)?;
    report.artifacts.push(path);
    report.lines.push(format!(
        "propagated {} steps to t = {time:.4}; norm drift {:.3e}",
        cfg.prop.steps,
        ts.norm.last().unwrap_or(&1.0) - ts.norm[0]
    ));
    Ok(())
}

fn run_qedft(cfg: &RunConfig, out: &Path, report: &mut Report) -> Result<()> {
    let (system, fock) = setup(cfg)?;
    let orbitals = load_ground_state(cfg, out, &fock)?;
    let ts = qedft_propagate(&system, &fock, orbitals, &cfg.prop)?;
    write_artifact(report, cfg, out.join(QEDFT_TIMESERIES), &series_bytes(&ts)?)?;
    report.lines.push(format!("qedft propagated {} steps", cfg.prop.steps));
    Ok(())
}

fn load_series(path: &Path) -> Result<TimeSeries> {
    if !path.exists() {
        return Err(Error::Usage(format!(
            "no time series at {}; run propagate (or qedft) first",
            path.display()
        )));
    }
    TimeSeries::read_tsv(std::io::BufReader::new(std::fs::File::open(path)?))
}

fn run_spectrum(cfg: &RunConfig, out: &Path, report: &mut Report) -> Result<()> {
    let mut any = false;
    for (input, output) in [(TIMESERIES, "spectrum.tsv"), (QEDFT_TIMESERIES, "qedft_spectrum.tsv")] {
        let path = out.join(input);
        if !path.exists() {
            continue;
        }
        any = true;
        let ts = load_series(&path)?;
        let mut spec = absorption_spectrum(&ts, &cfg.spectrum)?;
        let mut meta = ts.meta.clone();
        if cfg.output.units == Units::EvFs {
            spec.omega.iter_mut().for_each(|w| *w *= HARTREE_EV);
            spec.peaks.iter_mut().for_each(|p| {
                p.omega *= HARTREE_EV;
                p.width *= HARTREE_EV;
            });
            meta.insert("units".into(), "omega in eV".into());
        }
        let mut buf = Vec::new();
        spec.write_tsv(&meta, &mut buf)?;
        write_artifact(report, cfg, out.join(output), &buf)?;
        let peaks: Vec<String> = spec.peaks.iter().map(|p| format!("{:.5}", p.omega)).collect();
        report.lines.push(format!("{output}: peaks at [{}]", peaks.join(", ")));
    }
    if !any {
        load_series(&out.join(TIMESERIES))?;
    }
    Ok(())
}

fn run_hhg(cfg: &RunConfig, out: &Path, report: &mut Report) -> Result<()> {
    let ts = load_series(&out.join(TIMESERIES))?;
    let laser = ts
        .meta
        .get("laser_omega")
        .and_then(|v| v.parse::<f64>().ok())
        .ok_or_else(|| Error::Analysis("time series was not produced by a laser run".into()))?;
    let h = &cfg.hhg;
    let mut spec = hhg_spectrum(&ts, h.axis, laser, h.max_order, h.d_order, h.window)?;
    let mut meta = ts.meta.clone();
    if cfg.output.units == Units::EvFs {
        spec.omega.iter_mut().for_each(|w| *w *= HARTREE_EV);
        meta.insert("units".into(), "omega in eV".into());
    }
    let mut buf = Vec::new();
    spec.write_tsv(&meta, &mut buf)?;
    write_artifact(report, cfg, out.join("hhg.tsv"), &buf)?;
    report.lines.push(format!("hhg spectrum up to order {}", h.max_order));
    Ok(())
}

fn run_oracle(cfg: &RunConfig, out: &Path, report: &mut Report) -> Result<()> {
    let (system, fock) = setup(cfg)?;
    let gs = oracle::ground_state(&system, &fock, cfg.oracle.flavor)?;
    let mut values = vec![("energy".to_string(), gs.energy.total)];
    values.extend(gs.eigenvalues.iter().enumerate().map(|(m, e)| (format!("eps_{m}"), *e)));
    values.extend(gs.photon_occupations.iter().enumerate().map(|(n, p)| (format!("P{n}"), *p)));
    values.push(("q".into(), gs.q));
    values.push(("mu".into(), gs.mu));
    values.push(("residual".into(), gs.residual));
    let mut meta = BTreeMap::new();
    meta.insert("flavor".to_string(), format!("{:?}", cfg.oracle.flavor));
    meta.insert("iterations".to_string(), gs.iterations.to_string());
    let mut buf = Vec::new();
    oracle::write_golden(&meta, &values, &mut buf)?;
    write_artifact(report, cfg, out.join("oracle_golden.txt"), &buf)?;
    report.lines.push(format!("oracle ground state E = {:.12}", gs.energy.total));
    if cfg.oracle.propagate {
        let ts = oracle::exact_propagate(&system, &fock, gs.orbitals, &cfg.prop, cfg.oracle.tolerance)?;
        write_artifact(report, cfg, out.join("oracle_timeseries.tsv"), &series_bytes(&ts)?)?;
    }
    Ok(())
}

fn pseudo_random(seed: u64, len: usize) -> Vec<C64> {
    let mut s = seed;
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
    };
    (0..len).map(|_| C64::new(next(), next())).collect()
}

/// Invariant checks on the configured system: each entry is (name, passed, detail).
/// Norm conservation is checked on `ground` when given, else on a fresh SCF ground state.
pub fn invariant_suite(
    system: &System,
    fock: &FockSpace,
    cfg: &RunConfig,
    ground: Option<Vec<TpOrbital>>,
) -> Result<Vec<(String, bool, String)>> {
    let mut checks = Vec::new();
    let grid = system.grid;
    let p = grid.len();

    let x = pseudo_random(1, p);
    let y = pseudo_random(2, p);
    let mut lx = vec![C64::new(0.0, 0.0); p];
    let mut ly = lx.clone();
    laplacian_accumulate(&grid, system.stencil(), &x, &mut lx, 1.0);
    laplacian_accumulate(&grid, system.stencil(), &y, &mut ly, 1.0);
    let (a, b) = (dot_raw(&x, &ly), dot_raw(&lx, &y));
    let dev = (a - b).norm() / a.norm().max(1e-300);
    checks.push(("laplacian symmetric".to_string(), dev < 1e-12, format!("relative deviation {dev:.2e}")));

    let seeds = init_orbitals(system, fock, &cfg.scf)?;
    let ortho = orthonormality_error(&seeds)?;
    checks.push(("seed orbitals orthonormal".to_string(), ortho < 1e-10, format!("max error {ortho:.2e}")));

    let rho = crate::fock::total_density(&seeds)?;
    let ks = system.potentials().build(&rho)?;
    let h = CavityHamiltonian::from_ks(system.stencil(), &ks, crate::fock::mean_dipole_mu(&rho, fock), *fock, [0.0; 3])?;
    let n = p * fock.sectors();
    let x = pseudo_random(3, n);
    let y = pseudo_random(4, n);
    let mut hx = vec![C64::new(0.0, 0.0); n];
    let mut hy = hx.clone();
    h.apply_raw(&x, &mut hx);
    h.apply_raw(&y, &mut hy);
    let (a, b) = (dot_raw(&x, &hy), dot_raw(&hx, &y));
    let dev = (a - b).norm() / a.norm().max(1e-300);
    checks.push(("hamiltonian hermitian".to_string(), dev < 1e-12, format!("relative deviation {dev:.2e}")));

    let c = truncated_commutator(fock.n_max());
    let nm = fock.n_max();
    let exact = (0..=nm).all(|i| {
        (0..=nm).all(|j| {
            let want = match (i == j, i == nm) {
                (false, _) => 0.0,
                (true, false) => 1.0,
                (true, true) => -(nm as f64),
            };
            c[(i, j)] == want
        })
    });
    checks.push(("truncated commutator".to_string(), exact, format!("N_F = {nm}")));

    if n <= oracle::MAX_DIMENSION {
        let m = oracle::assemble(&grid, system.stencil(), ks.total(), h.mu(), fock, [0.0; 3])?;
        let mut mx = vec![C64::new(0.0, 0.0); n];
        m.matvec_complex(&x, &mut mx);
        let dev = hx.iter().zip(&mx).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        checks.push((
            "assembled matrix matches operator".to_string(),
            dev < 1e-12 * m.norm_bound().max(1.0),
            format!("max deviation {dev:.2e}"),
        ));
    }

    let ground = match ground {
        Some(g) => g,
        None => crate::scf::scf_solve(system, fock, &cfg.scf)?.orbitals,
    };
    let norm_check = match Propagator::new(system, *fock, ground, cfg.prop.dt, cfg.prop.order) {
        Ok(mut prop) => {
            let n0 = mean_norm(&prop.orbitals);
            let mut res = Ok(());
            for _ in 0..20 {
                res = prop.advance(cfg.prop.dt, [0.0; 3]);
                if res.is_err() {
                    break;
                }
            }
            match res {
                Ok(()) => {
                    let drift = (mean_norm(&prop.orbitals) - n0).abs();
                    (drift < 1e-8, format!("norm drift {drift:.2e} over 20 steps"))
                }
                Err(e) => (false, e.to_string()),
            }
        }
        Err(e) => (false, e.to_string()),
    };
    checks.push(("propagation conserves norm".to_string(), norm_check.0, norm_check.1));
    Ok(checks)
}

fn run_validate(cfg: &RunConfig, out: &Path, report: &mut Report) -> Result<()> {
    let (system, fock) = setup(cfg)?;
    let ground = if out.join(SCF_CHECKPOINT).exists() {
        Some(load_ground_state(cfg, out, &fock)?)
    } else {
        None
    };
    let checks = invariant_suite(&system, &fock, cfg, ground)?;
    let mut text = String::new();
    for (name, ok, detail) in &checks {
        let line = format!("{}\t{name}\t{detail}", if *ok { "PASS" } else { "FAIL" });
        writeln!(text, "{line}").expect("string write");
        report.lines.push(line);
        if *ok {
            report.passed += 1;
        } else {
            report.failed += 1;
        }
    }
    writeln!(text, "# passed = {}, failed = {}", report.passed, report.failed).expect("string write");
    write_artifact(report, cfg, out.join("validate.txt"), text.as_bytes())?;
    report
        .lines
        .push(format!("{} passed, {} failed", report.passed, report.failed));
    Ok(())
}
