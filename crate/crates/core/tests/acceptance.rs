//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails. Pass criterion numbers as arguments
//! to run a subset, e.g. `cargo test --test acceptance -- 1 9 11`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64 as C64;
use qedtp::fock::{truncated_commutator, CavityHamiltonian, FockSpace, TpOrbital};
use qedtp::grid::{Field, Grid, Stencil};
use qedtp::oracle::{self, Flavor};
use qedtp::potentials::{Density, Ion, IonSet, PotentialModel, XcKind};
use qedtp::qedft::{qedft_propagate, PhotonOscillator};
use qedtp::scf::{scf_solve, ScfConfig, ScfState};
use qedtp::spectra::{absorption_spectrum, charge_transfer_profile, hhg_spectrum, rabi_splitting, Spectrum, SpectrumConfig, Window};
use qedtp::system::System;
use qedtp::tdprop::{delta_kick, mean_norm, propagate, FieldProtocol, LaserPulse, PropConfig, Propagator, TimeSeries};
use qedtp::Result;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn along_x(n_max: usize, omega: f64, lambda: f64) -> FockSpace {
    FockSpace::along(n_max, omega, lambda, [1.0, 0.0, 0.0]).expect("valid cavity")
}

fn pseudo_random(seed: u64, len: usize) -> Vec<f64> {
    let mut s = seed;
    (0..len)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
        .collect()
}

fn tight() -> ScfConfig {
    ScfConfig {
        tol_energy: 1e-12,
        tol_residual: Some(1e-9),
        max_iter: 2000,
        ..Default::default()
    }
}

/// One-electron soft-Coulomb atom, Z = 1, a = 1.
fn atom() -> System {
    let grid = Grid::new_1d(161, 0.3).expect("grid");
    let ions = IonSet::new(vec![Ion { position: [0.0; 3], charge: 1.0, softening: 1.0 }]);
    System::new(grid, ions, PotentialModel::non_interacting(), vec![1.0]).expect("atom")
}

fn operator_equivalence() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (n, n_max, seed) in [(257, 3, 1), (101, 1, 5), (64, 0, 9)] {
        let grid = Grid::new_1d(n, 0.25)?;
        let fock = FockSpace::new(n_max, 0.13, [0.07, 0.0, 0.0])?;
        let v = pseudo_random(seed, n);
        let stencil = Stencil::default();
        let linear = [0.011, 0.0, 0.0];
        let h = CavityHamiltonian::new(grid, stencil, &v, -0.21, fock, linear)?;
        let m = oracle::assemble(&grid, stencil, &v, -0.21, &fock, linear)?;
        let len = n * fock.sectors();
        let (re, im) = (pseudo_random(seed + 1, len), pseudo_random(seed + 2, len));
        let x: Vec<C64> = re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect();
        let mut y1 = vec![C64::new(0.0, 0.0); len];
        let mut y2 = y1.clone();
        h.apply_raw(&x, &mut y1);
        m.matvec_complex(&x, &mut y2);
        let dev = y1.iter().zip(&y2).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        worst = worst.max(dev);
    }
    Ok(outcome(worst < 1e-12, format!("max |H x - M x| = {worst:.2e} (N_x <= 257, N_F <= 3)")))
}

fn decoupling_limit() -> Result<Outcome> {
    let sys = atom();
    let omega = 0.08;
    // Bare KS level from a dense diagonalization of the single-sector matrix; with ω = 1 its
    // lowest eigenvalue is ε₀ + 1/2.
    let unit = along_x(0, 1.0, 0.0);
    let m = oracle::assemble(&sys.grid, sys.stencil(), sys.external_potential().values(), 0.0, &unit, [0.0; 3])?;
    let (e, _) = oracle::dense_lowest(&m, 1);
    let bare = e[0] - 0.5;
    let st = scf_solve(&sys, &along_x(2, omega, 0.0), &tight())?;
    let de = (st.energy.total - (bare + 0.5 * omega)).abs();
    let dp = (st.photon_occupations[0] - 1.0).abs();
    Ok(outcome(
        de < 1e-8 && dp < 1e-10,
        format!("|E - (E_bare + ω/2)| = {de:.2e}, |P_0 - 1| = {dp:.2e}"),
    ))
}

fn coupled_atom() -> (System, FockSpace) {
    (atom(), along_x(2, 0.08, 0.05))
}

fn oracle_match() -> Result<Outcome> {
    let (sys, fock) = coupled_atom();
    let st = scf_solve(&sys, &fock, &tight())?;
    let gs = oracle::ground_state(&sys, &fock, Flavor::MeanFieldMu)?;
    let de = (st.energy.total - gs.energy.total).abs();
    let dp = st
        .photon_occupations
        .iter()
        .zip(&gs.photon_occupations)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(outcome(
        de < 1e-5 && dp < 1e-5,
        format!("E = {:.10}, |ΔE| = {de:.2e}, max |ΔP_n| = {dp:.2e}", st.energy.total),
    ))
}

fn analytic_polariton() -> Result<Outcome> {
    let (w0, lam) = (0.2, 0.05);
    let grid = Grid::new_1d(101, 0.3)?;
    let sys = System::harmonic_well(grid, w0, PotentialModel::non_interacting())?;
    let fock = along_x(3, w0, lam);
    let gs = scf_solve(&sys, &fock, &tight())?;
    let t_max = 2000.0;
    let cfg = PropConfig {
        dt: 0.05,
        steps: (t_max / 0.05) as usize,
        stride: 4,
        protocol: FieldProtocol::DeltaKick { strength: 1e-3, axis: 0 },
        ..Default::default()
    };
    let (ts, _) = propagate(&sys, &fock, gs.orbitals, &cfg, &mut |_, _, _| Ok(()))?;
    let spec = absorption_spectrum(&ts, &SpectrumConfig { omega_min: 0.01, omega_max: 1.0, d_omega: 1e-4, ..Default::default() })?;
    let (lo, hi) = oracle::quadratic_normal_modes(w0, w0, lam);
    let resolution = 2.0 * PI / t_max;
    let found: Vec<f64> = spec.peaks.iter().map(|p| p.omega).collect();
    let pass = found.len() == 2 && (found[0] - lo).abs() < resolution && (found[1] - hi).abs() < resolution;
    Ok(outcome(
        pass,
        format!("peaks {found:.5?}, closed form ({lo:.5}, {hi:.5}), resolution {resolution:.5}"),
    ))
}

/// Two-electron soft-Coulomb dimer, d = 5.8, Hartree only.
fn dimer() -> System {
    let grid = Grid::new_1d(201, 0.3).expect("grid");
    let ions = IonSet::new(vec![
        Ion { position: [-2.9, 0.0, 0.0], charge: 1.0, softening: 1.0 },
        Ion { position: [2.9, 0.0, 0.0], charge: 1.0, softening: 1.0 },
    ]);
    let model = PotentialModel { xc: XcKind::None, softening_ee: 4.7, ..PotentialModel::default() };
    System::new(grid, ions, model, vec![2.0]).expect("dimer")
}

const DIMER_OMEGA: f64 = 0.07;
const DIMER_LAMBDAS: [f64; 4] = [0.01, 0.02, 0.03, 0.05];
const BAND: (f64, f64) = (0.03, 0.12);

struct DimerRun {
    lambda: f64,
    tp: Spectrum,
    dsi_only: Spectrum,
    qedft: Spectrum,
}

fn dimer_kick() -> PropConfig {
    PropConfig {
        dt: 0.05,
        steps: 100_000,
        stride: 4,
        protocol: FieldProtocol::DeltaKick { strength: 1e-3, axis: 0 },
        ..Default::default()
    }
}

fn dimer_spectrum(ts: &TimeSeries) -> Result<Spectrum> {
    absorption_spectrum(ts, &SpectrumConfig { omega_min: BAND.0, omega_max: BAND.1, d_omega: 1e-5, ..Default::default() })
}

fn dimer_runs() -> Result<Vec<DimerRun>> {
    let sys = dimer();
    let cfg = dimer_kick();
    let scf = ScfConfig { tol_energy: 1e-10, ..Default::default() };
    let kicked = |fock: &FockSpace| -> Result<Spectrum> {
        let gs: ScfState = scf_solve(&sys, fock, &scf)?;
        let (ts, _) = propagate(&sys, fock, gs.orbitals, &cfg, &mut |_, _, _| Ok(()))?;
        dimer_spectrum(&ts)
    };
    let free = scf_solve(&sys, &along_x(0, DIMER_OMEGA, 0.0), &scf)?;
    DIMER_LAMBDAS
        .iter()
        .map(|&lambda| {
            let ts = qedft_propagate(&sys, &along_x(0, DIMER_OMEGA, lambda), free.orbitals.clone(), &cfg)?;
            Ok(DimerRun {
                lambda,
                tp: kicked(&along_x(3, DIMER_OMEGA, lambda))?,
                dsi_only: kicked(&along_x(0, DIMER_OMEGA, lambda))?,
                qedft: dimer_spectrum(&ts)?,
            })
        })
        .collect()
}

fn rabi_trend(runs: &[DimerRun]) -> Result<Outcome> {
    let mut splits = Vec::new();
    let mut flanked = true;
    let mut notes = Vec::new();
    for r in runs {
        let split = rabi_splitting(&r.tp, BAND.0, BAND.1)?;
        let peaks = r.tp.dominant_peaks(BAND.0, BAND.1, 0.1);
        let single = r.dsi_only.dominant_peaks(BAND.0, BAND.1, 0.1);
        let ok = single.len() == 1 && peaks[0].omega < single[0].omega && single[0].omega < peaks[1].omega;
        flanked &= ok;
        notes.push(format!(
            "λ={}: {:.5} | {} | {:.5}",
            r.lambda,
            peaks[0].omega,
            single.first().map_or("none".to_string(), |p| format!("{:.5}", p.omega)),
            peaks[1].omega
        ));
        splits.push(split);
    }
    let increasing = splits.windows(2).all(|w| w[1] > w[0]);
    Ok(outcome(
        increasing && flanked,
        format!("splittings {splits:.5?}; lower | DSI-only | upper: {}", notes.join("; ")),
    ))
}

fn sector_decomposition(runs: &[DimerRun]) -> Result<Outcome> {
    let mut dev: f64 = 0.0;
    for r in runs {
        for i in 0..r.tp.sigma.len() {
            let sum: f64 = r.tp.sector_sigma.iter().map(|s| s[i]).sum();
            dev = dev.max((sum - r.tp.sigma[i]).abs());
        }
    }
    let weakest = &runs[0];
    let shares: Vec<f64> = weakest
        .tp
        .dominant_peaks(BAND.0, BAND.1, 0.1)
        .iter()
        .map(|p| {
            let areas: Vec<f64> = (0..weakest.tp.sector_sigma.len())
                .map(|n| weakest.tp.sector_area(n, p).unwrap_or(0.0))
                .collect();
            areas[0].abs() / areas.iter().map(|a| a.abs()).sum::<f64>()
        })
        .collect();
    let pass = dev < 1e-10 && shares.len() == 2 && shares.iter().all(|s| *s > 0.9);
    Ok(outcome(
        pass,
        format!("max |Σσ_n - σ| = {dev:.2e}; |0⟩ share of peak areas at λ={}: {shares:.3?}", weakest.lambda),
    ))
}

fn qedft_comparison(runs: &[DimerRun]) -> Result<Outcome> {
    let mut larger = true;
    let mut notes = Vec::new();
    for r in runs {
        let tp = rabi_splitting(&r.tp, BAND.0, BAND.1)?;
        let qe = rabi_splitting(&r.qedft, BAND.0, BAND.1)?;
        larger &= qe > tp;
        notes.push(format!("λ={}: {qe:.5} vs {tp:.5}", r.lambda));
    }
    // Constant drive λ·R: q(t) = c + (q₀ - c) cos ωt + (p₀/ω) sin ωt with c = λ·R/ω.
    let (omega, drive) = (DIMER_OMEGA, 0.37);
    let mut osc = PhotonOscillator::new(omega, [0.05, 0.0, 0.0])?;
    osc.q = -0.4;
    osc.p = 0.02;
    let (q0, p0, c) = (osc.q, osc.p, drive / omega);
    let dt = 0.05;
    let mut dev: f64 = 0.0;
    for k in 1..=20_000 {
        osc.advance(dt, drive, drive);
        let t = k as f64 * dt;
        let q = c + (q0 - c) * (omega * t).cos() + p0 / omega * (omega * t).sin();
        let p = -(q0 - c) * omega * (omega * t).sin() + p0 * (omega * t).cos();
        dev = dev.max((osc.q - q).abs()).max((osc.p - p).abs());
    }
    Ok(outcome(
        larger && dev < 1e-8,
        format!("QEDFT vs TP splitting: {}; frozen-drive oscillator deviation {dev:.2e}", notes.join(", ")),
    ))
}

/// One electron on two soft-Coulomb sites of unequal charge.
fn asymmetric_site_model() -> System {
    let grid = Grid::new_1d(201, 0.3).expect("grid");
    let ions = IonSet::new(vec![
        Ion { position: [-1.0, 0.0, 0.0], charge: 1.0, softening: 1.0 },
        Ion { position: [1.0, 0.0, 0.0], charge: 0.5, softening: 1.0 },
    ]);
    System::new(grid, ions, PotentialModel::non_interacting(), vec![1.0]).expect("two-site model")
}

fn hhg_cavity_peaks() -> Result<Outcome> {
    let sys = asymmetric_site_model();
    let laser_omega = 0.057;
    let pulse = LaserPulse::with_period_envelope(0.005, laser_omega)?;
    let cycles = 30.0;
    let cfg = PropConfig {
        dt: 0.05,
        steps: (cycles * 2.0 * PI / laser_omega / 0.05) as usize,
        stride: 2,
        protocol: FieldProtocol::Laser(pulse),
        ..Default::default()
    };
    let harmonics = |fock: FockSpace| -> Result<_> {
        let gs = scf_solve(&sys, &fock, &tight())?;
        let (ts, _) = propagate(&sys, &fock, gs.orbitals, &cfg, &mut |_, _, _| Ok(()))?;
        hhg_spectrum(&ts, 0, laser_omega, 4.0, 0.005, Window::Blackman)
    };
    let cav_omega = 0.5 * laser_omega;
    let none = harmonics(along_x(0, cav_omega, 0.0))?;
    let vacuum_only = harmonics(along_x(0, cav_omega, 0.05))?;
    let cavity = harmonics(along_x(1, cav_omega, 0.05))?;
    let mut new_peaks = true;
    let mut notes = Vec::new();
    for order in [0.5, 1.5, 2.5] {
        let (c, n, v) = (
            cavity.intensity_near(order, 0.05),
            none.intensity_near(order, 0.05),
            vacuum_only.intensity_near(order, 0.05),
        );
        new_peaks &= c > 10.0 * n.max(v);
        notes.push(format!("{order}: {c:.2e} / {n:.2e} / {v:.2e}"));
    }
    let gain = cavity.intensity_near(1.5, 0.05) / none.intensity_near(1.5, 0.05);
    Ok(outcome(
        new_peaks && gain >= 100.0,
        format!(
            "I(1.5ω_L) cavity / no cavity = {gain:.2}; cavity / none / |0⟩-only at orders {}",
            notes.join(", ")
        ),
    ))
}

fn conservation() -> Result<Outcome> {
    let (sys, fock) = coupled_atom();
    let gs = scf_solve(&sys, &fock, &tight())?;
    let cfg = PropConfig {
        dt: 0.05,
        steps: 10_000,
        stride: 10,
        protocol: FieldProtocol::DeltaKick { strength: 1e-3, axis: 0 },
        ..Default::default()
    };
    let (ts, _) = propagate(&sys, &fock, gs.orbitals.clone(), &cfg, &mut |_, _, _| Ok(()))?;
    let norm = ts.norm.iter().map(|n| (n - ts.norm[0]).abs()).fold(0.0, f64::max);
    let energy = ts.energy.iter().map(|e| (e - ts.energy[0]).abs()).fold(0.0, f64::max);

    let mut orbitals = gs.orbitals;
    delta_kick(&mut orbitals, 1e-3, 0);
    let mut prop = Propagator::new(&sys, fock, orbitals, cfg.dt, cfg.order)?;
    let mut round_trip: f64 = 0.0;
    for _ in 0..50 {
        let before: Vec<TpOrbital> = prop.orbitals.clone();
        prop.advance(cfg.dt, [0.0; 3])?;
        prop.advance(-cfg.dt, [0.0; 3])?;
        for (a, b) in prop.orbitals.iter().zip(&before) {
            let err = a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
            round_trip = round_trip.max(err * sys.grid.volume_element().sqrt());
        }
        prop.advance(cfg.dt, [0.0; 3])?;
    }
    let n_end = mean_norm(&prop.orbitals);
    Ok(outcome(
        norm < 1e-8 && energy < 1e-6 && round_trip < 1e-9,
        format!(
            "norm drift {norm:.2e}, energy drift {energy:.2e} over 1e4 steps; round-trip error {round_trip:.2e} per step pair (norm {n_end:.12})"
        ),
    ))
}

fn ladder_algebra() -> Result<Outcome> {
    let c = truncated_commutator(4);
    let mut expected = nalgebra::DMatrix::<f64>::identity(5, 5);
    expected[(4, 4)] = -4.0;
    Ok(outcome(c == expected, format!("[a, a⁺] on N_F = 4: diagonal {:?}", c.diagonal().as_slice())))
}

fn gaussian(grid: Grid, centre: f64, width: f64) -> Vec<f64> {
    let norm = 1.0 / (width * (2.0 * PI).sqrt());
    Field::from_fn(grid, |r| norm * (-(r[0] - centre).powi(2) / (2.0 * width * width)).exp()).into_vec()
}

fn charge_transfer() -> Result<Outcome> {
    let grid = Grid::new_1d(401, 0.1)?;
    let (a, b) = (gaussian(grid, -6.0, 0.8), gaussian(grid, 7.0, 0.6));
    let mut worst: f64 = 0.0;
    let mut tail: f64 = 0.0;
    for moved in [0.0, 1e-3, 0.137, 0.5] {
        let free: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 1.2 * x + 0.8 * y).collect();
        let cavity: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (1.2 - moved) * x + (0.8 + moved) * y).collect();
        let ct = charge_transfer_profile(
            &Density::new(Field::from_vec(grid, cavity)?, 2.0)?,
            &Density::new(Field::from_vec(grid, free)?, 2.0)?,
        )?;
        let mid = ct.x.iter().position(|&x| x >= 0.5).expect("midpoint");
        worst = worst.max((ct.transferred() - moved).abs()).max((ct.dq[mid] + moved).abs());
        tail = tail.max(ct.dq.last().copied().unwrap_or(f64::NAN).abs());
    }
    Ok(outcome(
        worst < 1e-8 && tail < 1e-8,
        format!("max |Δq - analytic| = {worst:.2e}, |Δq(+∞)| = {tail:.2e}"),
    ))
}

type Criterion = (usize, &'static str, Duration);

fn report(id: usize, name: &str, limit: Duration, started: Instant, result: Result<Outcome>) -> bool {
    let elapsed = started.elapsed();
    let (pass, detail) = match result {
        Ok(o) => (o.pass, o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let in_time = elapsed <= limit;
    let pass = pass && in_time;
    let timing = if in_time {
        format!("{:.1} s", elapsed.as_secs_f64())
    } else {
        format!("{:.1} s, over the {} s limit", elapsed.as_secs_f64(), limit.as_secs())
    };
    println!("{} {id:>2} {name}: {detail} [{timing}]", if pass { "PASS" } else { "FAIL" });
    pass
}

fn main() -> ExitCode {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let wanted = |id: usize| selected.is_empty() || selected.contains(&id);
    let min = |m: u64| Duration::from_secs(60 * m);
    let singles: [(Criterion, fn() -> Result<Outcome>); 8] = [
        ((1, "operator equivalence", Duration::from_secs(1)), operator_equivalence),
        ((2, "decoupling limit", Duration::from_secs(10)), decoupling_limit),
        ((3, "oracle ground-state match", Duration::from_secs(60)), oracle_match),
        ((4, "analytic polariton", min(5)), analytic_polariton),
        ((7, "HHG cavity peaks", min(30)), hhg_cavity_peaks),
        ((8, "conservation", min(10)), conservation),
        ((9, "truncated ladder algebra", Duration::from_secs(1)), ladder_algebra),
        ((11, "charge-transfer machinery", Duration::from_secs(1)), charge_transfer),
    ];
    let mut results = Vec::new();
    for ((id, name, limit), f) in singles.iter().filter(|((id, _, _), _)| *id < 5) {
        if wanted(*id) {
            results.push(report(*id, name, *limit, Instant::now(), f()));
        }
    }
    if [5, 6, 10].iter().any(|&id| wanted(id)) {
        let started = Instant::now();
        let runs = dimer_runs();
        let shared = started.elapsed();
        let checks: [(Criterion, fn(&[DimerRun]) -> Result<Outcome>); 3] = [
            ((5, "Rabi trend", min(15)), rabi_trend),
            ((6, "sector-resolved decomposition", min(15)), sector_decomposition),
            ((10, "QEDFT comparison", min(15)), qedft_comparison),
        ];
        for ((id, name, limit), f) in checks {
            if wanted(id) {
                let result = match &runs {
                    Ok(r) => f(r),
                    Err(e) => Err(qedtp::Error::Analysis(format!("dimer runs failed: {e}"))),
                };
                // The dimer runs are shared, so each criterion is charged their full time.
                let t0 = Instant::now().checked_sub(shared).unwrap_or_else(Instant::now);
                results.push(report(id, name, limit, t0, result));
            }
        }
    }
    for ((id, name, limit), f) in singles.iter().filter(|((id, _, _), _)| *id >= 5) {
        if wanted(*id) {
            results.push(report(*id, name, *limit, Instant::now(), f()));
        }
    }
    let failed = results.iter().filter(|p| !**p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
