//! Same dimer and kick propagated two ways: photon sectors on the grid, and a
//! classical photon displacement driving the electrons through a mean field.
//! Optional argument: propagation time in a.u. (default 2500).

use qedtp::fock::FockSpace;
use qedtp::grid::Grid;
use qedtp::potentials::{Ion, IonSet, PotentialModel, XcKind};
use qedtp::qedft::qedft_propagate;
use qedtp::scf::{scf_solve, ScfConfig};
use qedtp::spectra::{absorption_spectrum, SpectrumConfig};
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
    let scf = ScfConfig { tol_energy: 1e-10, ..Default::default() };
    let strength = 0.03;

    let tp_fock = FockSpace::along(3, 0.07, strength, [1.0, 0.0, 0.0])?;
    let gs = scf_solve(&dimer, &tp_fock, &scf)?;
    let (tp, _) = propagate(&dimer, &tp_fock, gs.orbitals, &cfg, &mut |_, _, _| Ok(()))?;

    let free = scf_solve(&dimer, &FockSpace::along(0, 0.07, 0.0, [1.0, 0.0, 0.0])?, &scf)?;
    let classical = qedft_propagate(&dimer, &FockSpace::along(0, 0.07, strength, [1.0, 0.0, 0.0])?, free.orbitals, &cfg)?;

    for (label, ts) in [("tensor product", &tp), ("classical photon", &classical)] {
        let spec = absorption_spectrum(ts, &band)?;
        let peaks: Vec<String> = spec
            .dominant_peaks(band.omega_min, band.omega_max, 0.1)
            .iter()
            .map(|p| format!("{:.5} ({:.2e})", p.omega, p.height))
            .collect();
        println!("{label}: {}", peaks.join(", "));
    }
    Ok(())
}
