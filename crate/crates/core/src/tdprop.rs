//! Real-time propagation with a truncated Taylor expansion of e^{-iHΔt}.
//!
//! V_KS and μ are frozen for one step and rebuilt from the new density
//! afterwards. Each orbital is advanced with H - ε_m, where ε_m is its
//! energy at t = 0, and the phase e^{-iε_m Δt} is restored exactly.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{
    mean_dipole_mu, photon_occupations, q_expectation, sector_dipoles, total_density, CavityHamiltonian, FockSpace,
    TpOrbital,
};
use crate::grid::dipole_raw;
use crate::scf::total_energy;
use crate::system::System;

/// Largest tolerated change of Σ c_m (Φ_m|Φ_m) / N in one step.
pub const STEP_NORM_TOLERANCE: f64 = 1e-10;

/// Continuous drive E(t) = E_x sin²(πt / 6T_L) sin(ω_L t) for t ≥ 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LaserPulse {
    pub amplitude: f64,
    pub omega: f64,
    pub envelope_time: f64,
    pub axis: usize,
}

impl LaserPulse {
    /// Envelope time T_L = 2/ω_L.
    pub fn new(amplitude: f64, omega: f64) -> Result<Self> {
        LaserPulse::with_envelope(amplitude, omega, 2.0 / omega)
    }

    /// Envelope time T_L = 2π/ω_L, one optical period.
    pub fn with_period_envelope(amplitude: f64, omega: f64) -> Result<Self> {
        LaserPulse::with_envelope(amplitude, omega, 2.0 * std::f64::consts::PI / omega)
    }

    pub fn with_envelope(amplitude: f64, omega: f64, envelope_time: f64) -> Result<Self> {
        let mut errs = Vec::new();
        if !amplitude.is_finite() {
            errs.push("laser amplitude must be finite".to_string());
        }
        if !(omega > 0.0 && omega.is_finite()) {
            errs.push("laser frequency must be > 0".to_string());
        }
        if !(envelope_time > 0.0 && envelope_time.is_finite()) {
            errs.push("laser envelope time must be > 0".to_string());
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(LaserPulse {
            amplitude,
            omega,
            envelope_time,
            axis: 0,
        })
    }

    /// Period of the sin² envelope, 6T_L.
    pub fn envelope_period(&self) -> f64 {
        6.0 * self.envelope_time
    }

    pub fn field(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let env = (std::f64::consts::PI * t / self.envelope_period()).sin();
        self.amplitude * env * env * (self.omega * t).sin()
    }

    pub fn vector(&self, t: f64) -> [f64; 3] {
        let mut e = [0.0; 3];
        e[self.axis] = self.field(t);
        e
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldProtocol {
    None,
    DeltaKick { strength: f64, axis: usize },
    Laser(LaserPulse),
}

impl FieldProtocol {
    pub fn field(&self, t: f64) -> [f64; 3] {
        match self {
            FieldProtocol::Laser(p) => p.vector(t),
            _ => [0.0; 3],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropConfig {
    pub dt: f64,
    pub steps: usize,
    pub order: usize,
    pub protocol: FieldProtocol,
    /// Record observables every `stride` steps.
    pub stride: usize,
}

impl Default for PropConfig {
    fn default() -> Self {
        PropConfig {
            dt: 0.05,
            steps: 1000,
            order: 4,
            protocol: FieldProtocol::None,
            stride: 1,
        }
    }
}

impl PropConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("prop.dt must be > 0, got {}", self.dt));
        }
        if !(2..=5).contains(&self.order) {
            errs.push(format!("prop.order must be 2, 3, 4 or 5, got {}", self.order));
        }
        if self.stride == 0 {
            errs.push("prop.stride must be at least 1".to_string());
        }
        match self.protocol {
            FieldProtocol::DeltaKick { strength, axis } => {
                if !strength.is_finite() {
                    errs.push("kick strength must be finite".to_string());
                }
                if axis > 2 {
                    errs.push(format!("kick axis must be 0, 1 or 2, got {axis}"));
                }
            }
            FieldProtocol::Laser(p) if p.axis > 2 => errs.push(format!("laser axis must be 0, 1 or 2, got {}", p.axis)),
            _ => {}
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Multiplies every sector of every orbital by e^{i k r_axis}.
pub fn delta_kick(orbitals: &mut [TpOrbital], k: f64, axis: usize) {
    if k == 0.0 {
        return;
    }
    for o in orbitals.iter_mut() {
        let grid = *o.grid();
        let phase: Vec<C64> = (0..grid.len())
            .map(|i| C64::from_polar(1.0, k * grid.position(i)[axis]))
            .collect();
        for n in 0..o.sectors() {
            for (v, p) in o.sector_mut(n).iter_mut().zip(&phase) {
                *v *= p;
            }
        }
    }
}

/// Σ_{j≤order} (-iΔt)^j/j! (H - shift)^j Φ, times e^{-i shift Δt}.
pub fn taylor_step(h: &CavityHamiltonian, phi: &TpOrbital, dt: f64, order: usize, shift: f64) -> Result<TpOrbital> {
    h.check(phi)?;
    let len = phi.as_slice().len();
    let mut acc = phi.as_slice().to_vec();
    let mut term = acc.clone();
    let mut hterm = vec![C64::new(0.0, 0.0); len];
    for j in 1..=order {
        h.apply_raw(&term, &mut hterm);
        let c = C64::new(0.0, -dt / j as f64);
        for ((t, ht), a) in term.iter_mut().zip(&hterm).zip(acc.iter_mut()) {
            *t = c * (ht - shift * *t);
            *a += *t;
        }
    }
    let phase = C64::from_polar(1.0, -shift * dt);
    acc.iter_mut().for_each(|v| *v *= phase);
    TpOrbital::from_flat(*phi.grid(), phi.sectors(), acc, phi.occupation)
}

/// max |p(ix)| - 1 over 0 ≤ x ≤ x_max for the order-`order` Taylor polynomial of e^{-ix}.
pub fn taylor_amplification(order: usize, x_max: f64) -> f64 {
    let samples = 2000;
    (0..=samples)
        .map(|s| {
            let x = x_max * s as f64 / samples as f64;
            let mut term = C64::new(1.0, 0.0);
            let mut acc = term;
            for j in 1..=order {
                term *= C64::new(0.0, -x / j as f64);
                acc += term;
            }
            acc.norm() - 1.0
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Observables sampled along a trajectory.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TimeSeries {
    /// Written as `# key = value` header lines.
    pub meta: BTreeMap<String, String>,
    pub t: Vec<f64>,
    pub dipole: Vec<[f64; 3]>,
    pub q: Vec<f64>,
    pub photon: Vec<Vec<f64>>,
    pub energy: Vec<f64>,
    pub norm: Vec<f64>,
    /// D_n(t) = ∫ r p_n dr per sector.
    pub sector_dipoles: Vec<Vec<[f64; 3]>>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn sectors(&self) -> usize {
        self.photon.first().map_or(0, |p| p.len())
    }

    pub fn dt(&self) -> Option<f64> {
        (self.t.len() >= 2).then(|| self.t[1] - self.t[0])
    }

    /// Kick strength and axis, when the run started with a delta kick.
    pub fn kick(&self) -> Option<(f64, usize)> {
        let k = self.meta.get("kick_strength")?.parse().ok()?;
        let a = self.meta.get("kick_axis")?.parse().ok()?;
        Some((k, a))
    }

    pub fn dipole_axis(&self, axis: usize) -> Vec<f64> {
        self.dipole.iter().map(|d| d[axis]).collect()
    }

    pub fn sector_dipole_axis(&self, n: usize, axis: usize) -> Vec<f64> {
        self.sector_dipoles.iter().map(|d| d[n][axis]).collect()
    }

    pub fn push(&mut self, s: Sample) {
        self.t.push(s.t);
        self.dipole.push(s.dipole);
        self.q.push(s.q);
        self.photon.push(s.photon);
        self.energy.push(s.energy);
        self.norm.push(s.norm);
        self.sector_dipoles.push(s.sector_dipoles);
    }

    pub fn columns(sectors: usize) -> Vec<String> {
        let mut c: Vec<String> = ["t", "Dx", "Dy", "Dz", "q"].iter().map(|s| s.to_string()).collect();
        c.extend((0..sectors).map(|n| format!("P{n}")));
        c.push("E".into());
        c.push("norm".into());
        for n in 0..sectors {
            for ax in ["x", "y", "z"] {
                c.push(format!("D{ax}_{n}"));
            }
        }
        c
    }

    pub fn write_tsv(&self, mut w: impl Write) -> Result<()> {
        let sectors = self.sectors();
        let mut out = String::new();
        for (k, v) in &self.meta {
            writeln!(out, "# {k} = {v}").expect("string write");
        }
        out.push_str(&TimeSeries::columns(sectors).join("\t"));
        out.push('\n');
        for i in 0..self.len() {
            let mut row = vec![self.t[i], self.dipole[i][0], self.dipole[i][1], self.dipole[i][2], self.q[i]];
            row.extend(&self.photon[i]);
            row.push(self.energy[i]);
            row.push(self.norm[i]);
            for d in &self.sector_dipoles[i] {
                row.extend(d);
            }
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.17e}")).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        w.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn read_tsv(r: impl Read) -> Result<Self> {
        let mut ts = TimeSeries::default();
        let mut sectors = None;
        for (lineno, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if rest.starts_with('|') {
                    continue;
                }
                if let Some((k, v)) = rest.split_once('=') {
                    ts.meta.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            let Some(ns) = sectors else {
                let cols: Vec<&str> = line.split('\t').collect();
                let ns = cols.iter().filter(|c| c.starts_with('P') && c[1..].parse::<usize>().is_ok()).count();
                if cols != TimeSeries::columns(ns) {
                    return Err(Error::Format(format!("unexpected time-series header `{line}`")));
                }
                sectors = Some(ns);
                continue;
            };
            let vals: Vec<f64> = line
                .split('\t')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
            if vals.len() != 7 + 4 * ns {
                return Err(Error::Format(format!(
                    "line {}: expected {} columns, found {}",
                    lineno + 1,
                    7 + 4 * ns,
                    vals.len()
                )));
            }
            ts.push(Sample {
                t: vals[0],
                dipole: [vals[1], vals[2], vals[3]],
                q: vals[4],
                photon: vals[5..5 + ns].to_vec(),
                energy: vals[5 + ns],
                norm: vals[6 + ns],
                sector_dipoles: vals[7 + ns..].chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
            });
        }
        if sectors.is_none() {
            return Err(Error::Format("time series has no column header".into()));
        }
        Ok(ts)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub dipole: [f64; 3],
    pub q: f64,
    pub photon: Vec<f64>,
    pub energy: f64,
    pub norm: f64,
    pub sector_dipoles: Vec<[f64; 3]>,
}

/// Σ c_m (Φ_m|Φ_m) / N
pub fn mean_norm(orbitals: &[TpOrbital]) -> f64 {
    let n: f64 = orbitals.iter().map(|o| o.occupation).sum();
    orbitals.iter().map(|o| o.occupation * o.norm_sqr()).sum::<f64>() / n
}

pub fn sample(t: f64, orbitals: &[TpOrbital], system: &System, fock: &FockSpace) -> Result<Sample> {
    let rho = total_density(orbitals)?;
    let grid = rho.grid();
    Ok(Sample {
        t,
        dipole: [0, 1, 2].map(|a| dipole_raw(grid, rho.values(), a)),
        q: q_expectation(orbitals, fock),
        photon: photon_occupations(orbitals)?,
        energy: total_energy(orbitals, system, fock)?.total,
        norm: mean_norm(orbitals),
        sector_dipoles: sector_dipoles(orbitals)?,
    })
}

/// Advances a set of orbitals step by step.
pub struct Propagator<'a> {
    system: &'a System,
    fock: FockSpace,
    h: CavityHamiltonian,
    shifts: Vec<f64>,
    /// (t, V_KS, μ) at the start of the previous step.
    history: Option<(f64, Vec<f64>, f64)>,
    /// (t, dt, V, μ) of the previous step with the potential it was frozen at.
    last_step: Option<(f64, f64, Vec<f64>, f64)>,
    pub orbitals: Vec<TpOrbital>,
    pub time: f64,
    pub step: usize,
    dt: f64,
    order: usize,
}

impl<'a> Propagator<'a> {
    pub fn new(system: &'a System, fock: FockSpace, orbitals: Vec<TpOrbital>, dt: f64, order: usize) -> Result<Self> {
        if orbitals.is_empty() {
            return Err(Error::Usage("no orbitals to propagate".into()));
        }
        let rho = total_density(&orbitals)?;
        let ks = system.potentials().build(&rho)?;
        let h = CavityHamiltonian::from_ks(system.stencil(), &ks, mean_dipole_mu(&rho, &fock), fock, [0.0; 3])?;
        let shifts = orbitals
            .iter()
            .map(|o| h.rayleigh_quotient(o))
            .collect::<Result<Vec<_>>>()?;
        let spread = shifts
            .iter()
            .map(|s| h.spectral_bound() + s.abs())
            .fold(0.0, f64::max);
        let growth = taylor_amplification(order, dt * spread);
        if growth > 1e-6 {
            return Err(Error::StepSize(format!(
                "order-{order} Taylor step with dt = {dt} amplifies modes up to |H| ≈ {spread:.3} by {growth:.3e} per step; reduce dt below {:.4}",
                stable_dt(order, spread)
            )));
        }
        Ok(Propagator {
            system,
            fock,
            h,
            shifts,
            history: None,
            last_step: None,
            orbitals,
            time: 0.0,
            step: 0,
            dt,
            order,
        })
    }

    pub fn hamiltonian(&self) -> &CavityHamiltonian {
        &self.h
    }

    /// Rebuilds V_KS and μ from the current density and sets the linear field.
    pub fn refresh(&mut self, linear: [f64; 3]) -> Result<()> {
        let (v, mu) = self.current_potential()?;
        self.h.update(&v, mu, linear);
        Ok(())
    }

    fn current_potential(&self) -> Result<(Vec<f64>, f64)> {
        let rho = total_density(&self.orbitals)?;
        let ks = self.system.potentials().build(&rho)?;
        Ok((ks.total().to_vec(), mean_dipole_mu(&rho, &self.fock)))
    }

    /// One step with the given dt sign and linear field E·r held fixed.
    /// V_KS and μ are frozen over the step at their value linearly
    /// extrapolated to the step midpoint from the last two step starts.
    /// A step that exactly reverses the previous one reuses its frozen
    /// potential, so the pair returns to the start up to the Taylor error.
    pub fn advance(&mut self, dt: f64, linear: [f64; 3]) -> Result<()> {
        let (v, mu) = self.current_potential()?;
        let reverse = match &self.last_step {
            Some((t0, dt0, v0, mu0)) if *dt0 == -dt && *t0 + *dt0 == self.time => Some((v0.clone(), *mu0)),
            _ => None,
        };
        let (v_mid, mu_mid) = match (&self.history, reverse) {
            (_, Some(frozen)) => frozen,
            (Some((t_prev, v_prev, mu_prev)), None) if *t_prev != self.time => {
                let s = 0.5 * dt / (self.time - t_prev);
                let vm: Vec<f64> = v.iter().zip(v_prev).map(|(a, b)| a + s * (a - b)).collect();
                (vm, mu + s * (mu - mu_prev))
            }
            _ => (v.clone(), mu),
        };
        self.h.update(&v_mid, mu_mid, linear);
        let before = mean_norm(&self.orbitals);
        let h = &self.h;
        let order = self.order;
        let new: Vec<TpOrbital> = self
            .orbitals
            .par_iter()
            .zip(self.shifts.par_iter())
            .map(|(o, &s)| taylor_step(h, o, dt, order, s))
            .collect::<Result<_>>()?;
        if new.iter().any(|o| !o.is_finite()) {
            return Err(Error::NonFinite {
                step: self.step + 1,
                time: self.time + dt,
                last_good: Box::new(self.orbitals.clone()),
            });
        }
        let after = mean_norm(&new);
        if (after - before).abs() > STEP_NORM_TOLERANCE {
            return Err(Error::StepSize(format!(
                "norm changed by {:.3e} in step {} (t = {:.4}); reduce dt below {}",
                after - before,
                self.step + 1,
                self.time,
                self.dt
            )));
        }
        self.orbitals = new;
        self.last_step = Some((self.time, dt, v_mid, mu_mid));
        self.history = Some((self.time, v, mu));
        self.time += dt;
        self.step += 1;
        Ok(())
    }

    pub fn step_forward(&mut self, protocol: &FieldProtocol) -> Result<()> {
        let e = protocol.field(self.time + 0.5 * self.dt);
        self.advance(self.dt, e)
    }

    pub fn sample(&self) -> Result<Sample> {
        sample(self.time, &self.orbitals, self.system, &self.fock)
    }
}

/// Largest dt keeping the Taylor polynomial non-amplifying up to |H| = spread.
pub fn stable_dt(order: usize, spread: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if taylor_amplification(order, mid) > 1e-6 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    lo / spread
}

pub fn run_metadata(cfg: &PropConfig, fock: &FockSpace, method: &str) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("method".into(), method.into());
    m.insert("dt".into(), format!("{}", cfg.dt));
    m.insert("steps".into(), format!("{}", cfg.steps));
    m.insert("order".into(), format!("{}", cfg.order));
    m.insert("omega".into(), format!("{}", fock.omega()));
    let l = fock.lambda();
    m.insert("lambda".into(), format!("{} {} {}", l[0], l[1], l[2]));
    m.insert("n_max".into(), format!("{}", fock.n_max()));
    match cfg.protocol {
        FieldProtocol::None => {
            m.insert("protocol".into(), "none".into());
        }
        FieldProtocol::DeltaKick { strength, axis } => {
            m.insert("protocol".into(), "kick".into());
            m.insert("kick_strength".into(), format!("{strength}"));
            m.insert("kick_axis".into(), format!("{axis}"));
        }
        FieldProtocol::Laser(p) => {
            m.insert("protocol".into(), "laser".into());
            m.insert("laser_amplitude".into(), format!("{}", p.amplitude));
            m.insert("laser_omega".into(), format!("{}", p.omega));
            m.insert("laser_envelope_time".into(), format!("{}", p.envelope_time));
            m.insert("laser_axis".into(), format!("{}", p.axis));
        }
    }
    m
}

/// Propagates from `orbitals` (normally an SCF ground state) and records
/// observables. `on_step` sees the orbitals after every step, e.g. to write checkpoints.
pub fn propagate(
    system: &System,
    fock: &FockSpace,
    mut orbitals: Vec<TpOrbital>,
    cfg: &PropConfig,
    on_step: &mut dyn FnMut(usize, f64, &[TpOrbital]) -> Result<()>,
) -> Result<(TimeSeries, Vec<TpOrbital>)> {
    cfg.validate()?;
    if let FieldProtocol::DeltaKick { strength, axis } = cfg.protocol {
        if system.grid.dim() == 1 && axis != 0 {
            return Err(Error::config("a 1D system can only be kicked along x (axis 0)"));
        }
        delta_kick(&mut orbitals, strength, axis);
    }
    let mut prop = Propagator::new(system, *fock, orbitals, cfg.dt, cfg.order)?;
    let mut ts = TimeSeries {
        meta: run_metadata(cfg, fock, "tensor-product"),
        ..Default::default()
    };
    ts.push(prop.sample()?);
    for _ in 0..cfg.steps {
        prop.step_forward(&cfg.protocol)?;
        on_step(prop.step, prop.time, &prop.orbitals)?;
        if prop.step % cfg.stride == 0 {
            ts.push(prop.sample()?);
        }
    }
    Ok((ts, prop.orbitals))
}
