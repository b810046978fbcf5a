//! Mean-field QEDFT comparison solver: Kohn-Sham orbitals in the spatial
//! grid only, coupled to a classical photon displacement q(t) through the
//! photon exchange potential V_P = (λ·R − ωq)(λ·r), with
//! q'' + ω²q = ωλ·R.

use crate::error::{Error, Result};
use crate::fock::{total_density, FockSpace, TpOrbital};
use crate::grid::{dipole_raw, Field, RealField};
use crate::potentials::Density;
use crate::scf::total_energy;
use crate::system::System;
use crate::tdprop::{delta_kick, mean_norm, run_metadata, FieldProtocol, PropConfig, Propagator, Sample, TimeSeries};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhotonOscillator {
    pub q: f64,
    /// q̇
    pub p: f64,
    pub omega: f64,
    pub lambda: [f64; 3],
}

impl PhotonOscillator {
    pub fn new(omega: f64, lambda: [f64; 3]) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) || lambda.iter().any(|l| !l.is_finite()) {
            return Err(Error::config("photon oscillator needs ω > 0 and finite λ"));
        }
        Ok(PhotonOscillator { q: 0.0, p: 0.0, omega, lambda })
    }

    /// At rest at the static minimum q₀ = λ·R/ω.
    pub fn at_rest(omega: f64, lambda: [f64; 3], dipole: [f64; 3]) -> Result<Self> {
        let mut o = Self::new(omega, lambda)?;
        o.q = o.project(dipole) / omega;
        Ok(o)
    }

    /// λ·R
    pub fn project(&self, dipole: [f64; 3]) -> f64 {
        self.lambda[0] * dipole[0] + self.lambda[1] * dipole[1] + self.lambda[2] * dipole[2]
    }

    /// ½q̇² + ½(ωq − λ·R)²
    pub fn energy(&self, dipole: [f64; 3]) -> f64 {
        let d = self.omega * self.q - self.project(dipole);
        0.5 * self.p * self.p + 0.5 * d * d
    }

    /// Advances over dt with the drive λ·R replaced by the trapezoid average
    /// of its end values; the constant-drive motion is integrated exactly.
    pub fn advance(&mut self, dt: f64, drive_start: f64, drive_end: f64) {
        let centre = 0.5 * (drive_start + drive_end) / self.omega;
        let (s, c) = (self.omega * dt).sin_cos();
        let x = self.q - centre;
        let v = self.p;
        self.q = centre + x * c + v / self.omega * s;
        self.p = -x * self.omega * s + v * c;
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }
}

/// V_P(r) = (λ·∫r′ρ − ωq)(λ·r)
pub fn photon_exchange_potential(rho: &Density, osc: &PhotonOscillator) -> RealField {
    let grid = *rho.grid();
    let dipole = [0, 1, 2].map(|a| dipole_raw(&grid, rho.values(), a));
    let amp = osc.project(dipole) - osc.omega * osc.q;
    let l = osc.lambda;
    Field::from_fn(grid, |r| amp * (l[0] * r[0] + l[1] * r[1] + l[2] * r[2]))
}

fn dipole_of(orbitals: &[TpOrbital]) -> Result<[f64; 3]> {
    let rho = total_density(orbitals)?;
    Ok([0, 1, 2].map(|a| dipole_raw(rho.grid(), rho.values(), a)))
}

/// Drops all photon sectors but the vacuum, renormalizing each orbital.
pub fn electronic_part(orbitals: &[TpOrbital]) -> Result<Vec<TpOrbital>> {
    orbitals
        .iter()
        .map(|o| {
            let mut e = TpOrbital::from_sectors(*o.grid(), vec![o.sector(0).to_vec()], o.occupation)?;
            e.normalize()?;
            Ok(e)
        })
        .collect()
}

/// Same orbital driver as the tensor-product propagation with a single
/// photon sector, so the μ(λ·r) mean field is shared and −ωq(λ·r) enters as
/// an extra linear field.
pub struct QedftPropagator<'a> {
    system: &'a System,
    inner: Propagator<'a>,
    bare: FockSpace,
    pub oscillator: PhotonOscillator,
    dt: f64,
}

impl<'a> QedftPropagator<'a> {
    pub fn new(system: &'a System, cavity: &FockSpace, orbitals: Vec<TpOrbital>, dt: f64, order: usize) -> Result<Self> {
        let orbitals = if orbitals.iter().any(|o| o.sectors() != 1) {
            electronic_part(&orbitals)?
        } else {
            orbitals
        };
        let fock = cavity.with_n_max(0);
        let oscillator = PhotonOscillator::at_rest(fock.omega(), fock.lambda(), dipole_of(&orbitals)?)?;
        let bare = fock.with_lambda([0.0; 3]);
        Ok(QedftPropagator {
            system,
            inner: Propagator::new(system, fock, orbitals, dt, order)?,
            bare,
            oscillator,
            dt,
        })
    }

    pub fn orbitals(&self) -> &[TpOrbital] {
        &self.inner.orbitals
    }

    pub fn time(&self) -> f64 {
        self.inner.time
    }

    pub fn step_count(&self) -> usize {
        self.inner.step
    }

    pub fn step_forward(&mut self, protocol: &FieldProtocol) -> Result<()> {
        let osc = &self.oscillator;
        let d0 = osc.project(dipole_of(&self.inner.orbitals)?);
        let mut mid = *osc;
        mid.advance(0.5 * self.dt, d0, d0);
        let e = protocol.field(self.inner.time + 0.5 * self.dt);
        let wq = mid.omega * mid.q;
        let l = mid.lambda;
        let linear = [e[0] - wq * l[0], e[1] - wq * l[1], e[2] - wq * l[2]];
        self.inner.advance(self.dt, linear)?;
        let d1 = osc.project(dipole_of(&self.inner.orbitals)?);
        self.oscillator.advance(self.dt, d0, d1);
        if !self.oscillator.is_finite() {
            return Err(Error::NonFinite {
                step: self.inner.step,
                time: self.inner.time,
                last_good: Box::new(self.inner.orbitals.clone()),
            });
        }
        Ok(())
    }

    /// E_KS + ½q̇² + ½(ωq − λ·R)², with E_KS the cavity-free functional.
    pub fn energy(&self) -> Result<f64> {
        let ks = total_energy(&self.inner.orbitals, self.system, &self.bare)?;
        let dipole = dipole_of(&self.inner.orbitals)?;
        Ok(ks.total - ks.photon + self.oscillator.energy(dipole))
    }

    pub fn sample(&self) -> Result<Sample> {
        let orbitals = &self.inner.orbitals;
        let dipole = dipole_of(orbitals)?;
        Ok(Sample {
            t: self.inner.time,
            dipole,
            q: self.oscillator.q,
            photon: vec![1.0],
            energy: self.energy()?,
            norm: mean_norm(orbitals),
            sector_dipoles: vec![dipole],
        })
    }
}

/// Runs the comparison scheme from a ground state; any photon sectors
/// beyond the vacuum in `orbitals` are discarded.
pub fn qedft_propagate(
    system: &System,
    cavity: &FockSpace,
    orbitals: Vec<TpOrbital>,
    cfg: &PropConfig,
) -> Result<TimeSeries> {
    cfg.validate()?;
    let mut orbitals = electronic_part(&orbitals)?;
    let mut prop = {
        // q₀ is set at the unkicked ground-state dipole.
        let mut p = QedftPropagator::new(system, cavity, orbitals.clone(), cfg.dt, cfg.order)?;
        if let FieldProtocol::DeltaKick { strength, axis } = cfg.protocol {
            if system.grid.dim() == 1 && axis != 0 {
                return Err(Error::config("a 1D system can only be kicked along x (axis 0)"));
            }
            delta_kick(&mut orbitals, strength, axis);
            let osc = p.oscillator;
            p = QedftPropagator::new(system, cavity, orbitals, cfg.dt, cfg.order)?;
            p.oscillator = osc;
        }
        p
    };
    let mut ts = TimeSeries {
        meta: run_metadata(cfg, &cavity.with_n_max(0), "qedft"),
        ..Default::default()
    };
    ts.push(prop.sample()?);
    for _ in 0..cfg.steps {
        prop.step_forward(&cfg.protocol)?;
        if prop.step_count() % cfg.stride == 0 {
            ts.push(prop.sample()?);
        }
    }
    Ok(ts)
}
