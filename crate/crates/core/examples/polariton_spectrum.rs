//! Kick spectrum of a harmonic well in a resonant cavity. The two polariton
//! peaks are compared with the normal modes of the coupled oscillators.

use qedtp::fock::FockSpace;
use qedtp::grid::Grid;
use qedtp::oracle::quadratic_normal_modes;
use qedtp::potentials::PotentialModel;
use qedtp::scf::{scf_solve, ScfConfig};
use qedtp::spectra::{absorption_spectrum, rabi_splitting, SpectrumConfig};
use qedtp::system::System;
use qedtp::tdprop::{propagate, FieldProtocol, PropConfig};

fn main() -> qedtp::Result<()> {
    let (omega0, omega, strength) = (0.2, 0.2, 0.05);
    let well = System::harmonic_well(Grid::new_1d(101, 0.3)?, omega0, PotentialModel::non_interacting())?;
    let fock = FockSpace::along(3, omega, strength, [1.0, 0.0, 0.0])?;
    let gs = scf_solve(&well, &fock, &ScfConfig { tol_energy: 1e-12, ..Default::default() })?;

    let cfg = PropConfig {
        dt: 0.05,
        steps: 40_000,
        stride: 4,
        protocol: FieldProtocol::DeltaKick { strength: 1e-3, axis: 0 },
        ..Default::default()
    };
    let (ts, _) = propagate(&well, &fock, gs.orbitals, &cfg, &mut |_, _, _| Ok(()))?;
    let spec = absorption_spectrum(&ts, &SpectrumConfig { omega_min: 0.01, omega_max: 1.0, d_omega: 1e-4, ..Default::default() })?;

    let (lower, upper) = quadratic_normal_modes(omega0, omega, strength);
    println!("normal modes  {lower:.5} {upper:.5}");
    for p in &spec.peaks {
        println!("peak {:.5}  height {:.3e}", p.omega, p.height);
    }
    println!("splitting {:.5} (exact {:.5})", rabi_splitting(&spec, 0.01, 1.0)?, upper - lower);
    Ok(())
}
