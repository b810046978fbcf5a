//! Rabi splitting of a two-electron dimer against coupling strength.
//! Optional argument: propagation time in a.u. (default 2500).

use qedtp::fock::FockSpace;
use qedtp::grid::Grid;
use qedtp::potentials::{Ion, IonSet, PotentialModel, XcKind};
use qedtp::scf::{scf_solve, ScfConfig};
use qedtp::spectra::{absorption_spectrum, rabi_splitting, SpectrumConfig};
use qedtp::system::System;
use qedtp::tdprop::{propagate, FieldProtocol, PropConfig};

fn main() -> qedtp::Result<()> {
    let duration: f64 = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(2500.0);
    let ions = IonSet::new(vec![
        Ion { position: [-2.9, 0.0, 0.0], charge: 1.0, softening: 1.0 },
        Ion { position: [2.9, 0.0, 0.0], charge: 1.0, softening: 1.0 },
    ]);
    let model = PotentialModel { xc: XcKind::None, softening_ee: 4.7, ..PotentialModel::default() };
    let dimer = System::new(Grid::new_1d(201, 0.3)?, ions, model, vec![2.0])?;
    let cfg = PropConfig {
        dt: 0.05,
        steps: (duration / 0.05) as usize,
        stride: 4,
        protocol: FieldProtocol::DeltaKick { strength: 1e-3, axis: 0 },
        ..Default::default()
    };
    let band = SpectrumConfig { omega_min: 0.03, omega_max: 0.12, d_omega: 1e-5, ..Default::default() };

    println!("λ\tsplitting\tpeaks");
    for strength in [0.01, 0.02, 0.03, 0.05] {
        let fock = FockSpace::along(3, 0.07, strength, [1.0, 0.0, 0.0])?;
        let gs = scf_solve(&dimer, &fock, &ScfConfig { tol_energy: 1e-10, ..Default::default() })?;
        let (ts, _) = propagate(&dimer, &fock, gs.orbitals, &cfg, &mut |_, _, _| Ok(()))?;
        let spec = absorption_spectrum(&ts, &band)?;
        let peaks: Vec<String> = spec.dominant_peaks(band.omega_min, band.omega_max, 0.1).iter().map(|p| format!("{:.5}", p.omega)).collect();
        match rabi_splitting(&spec, band.omega_min, band.omega_max) {
            Ok(split) => println!("{strength}\t{split:.5}\t{}", peaks.join(" ")),
            Err(e) => println!("{strength}\t-\t{e}"),
        }
    }
    Ok(())
}
