//! Laser-driven asymmetric two-site model with and without a cavity at half
//! the laser frequency. Prints the harmonic spectrum near half-integer orders.
//! Optional argument: number of optical cycles (default 10).

use std::f64::consts::PI;

use qedtp::fock::FockSpace;
use qedtp::grid::Grid;
use qedtp::potentials::{Ion, IonSet, PotentialModel};
use qedtp::scf::{scf_solve, ScfConfig};
use qedtp::spectra::{hhg_spectrum, Window};
use qedtp::system::System;
use qedtp::tdprop::{propagate, FieldProtocol, LaserPulse, PropConfig};

fn main() -> qedtp::Result<()> {
    let cycles: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(10.0);
    let ions = IonSet::new(vec![
        Ion { position: [-1.0, 0.0, 0.0], charge: 1.0, softening: 1.0 },
        Ion { position: [1.0, 0.0, 0.0], charge: 0.5, softening: 1.0 },
    ]);
    let model = System::new(Grid::new_1d(201, 0.3)?, ions, PotentialModel::non_interacting(), vec![1.0])?;
    let omega_l = 0.057;
    let laser = LaserPulse::with_period_envelope(0.005, omega_l)?;
    let dt = 0.05;
    let cfg = PropConfig {
        dt,
        steps: (cycles * 2.0 * PI / omega_l / dt) as usize,
        stride: 2,
        protocol: FieldProtocol::Laser(laser),
        ..Default::default()
    };

    let orders = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    println!("run\t{}", orders.map(|o| format!("{o}")).join("\t"));
    for (label, n_max, strength) in [("free", 0, 0.0), ("cavity", 1, 0.05)] {
        let fock = FockSpace::along(n_max, 0.5 * omega_l, strength, [1.0, 0.0, 0.0])?;
        let gs = scf_solve(&model, &fock, &ScfConfig { tol_energy: 1e-12, ..Default::default() })?;
        let (ts, _) = propagate(&model, &fock, gs.orbitals, &cfg, &mut |_, _, _| Ok(()))?;
        let hhg = hhg_spectrum(&ts, 0, omega_l, 4.0, 0.005, Window::Blackman)?;
        let row: Vec<String> = orders.iter().map(|&o| format!("{:.2e}", hhg.intensity_near(o, 0.05))).collect();
        println!("{label}\t{}", row.join("\t"));
    }
    Ok(())
}
