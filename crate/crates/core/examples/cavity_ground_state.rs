//! Ground state of a soft-Coulomb atom in a cavity: energy parts and photon
//! populations from the SCF, checked against the exact-diagonalization oracle.

use qedtp::fock::FockSpace;
use qedtp::grid::Grid;
use qedtp::oracle::{ground_state, Flavor};
use qedtp::potentials::{Ion, IonSet, PotentialModel};
use qedtp::scf::{scf_solve, ScfConfig};
use qedtp::system::System;

fn main() -> qedtp::Result<()> {
    let grid = Grid::new_1d(161, 0.3)?;
    let ions = IonSet::new(vec![Ion { position: [0.0; 3], charge: 1.0, softening: 1.0 }]);
    let atom = System::new(grid, ions, PotentialModel::non_interacting(), vec![1.0])?;
    let cfg = ScfConfig { tol_energy: 1e-12, tol_residual: Some(1e-9), max_iter: 2000, ..Default::default() };

    for strength in [0.0, 0.02, 0.05] {
        let fock = FockSpace::along(3, 0.08, strength, [1.0, 0.0, 0.0])?;
        let scf = scf_solve(&atom, &fock, &cfg)?;
        let exact = ground_state(&atom, &fock, Flavor::MeanFieldMu)?;
        println!("λ = {strength}: {} iterations, E = {:.10} (oracle {:.10})", scf.iterations, scf.energy.total, exact.energy.total);
        for (name, value) in scf.energy.parts() {
            println!("  {name:<12} {value:+.8}");
        }
        let pops: Vec<String> = scf.photon_occupations.iter().map(|p| format!("{p:.3e}")).collect();
        println!("  P_n = [{}], ⟨q⟩ = {:.4e}", pops.join(", "), scf.q_expectation());
    }
    Ok(())
}
