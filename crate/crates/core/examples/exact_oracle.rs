//! Oracle ground states of a harmonic well in a cavity. The mean-field and
//! exact dipole self-interaction flavors are compared with the closed form
//! for two coupled oscillators.

use qedtp::fock::FockSpace;
use qedtp::grid::Grid;
use qedtp::oracle::{ground_state, quadratic_ground_energy, Flavor};
use qedtp::potentials::PotentialModel;
use qedtp::system::System;

fn main() -> qedtp::Result<()> {
    let (omega0, omega) = (0.3, 0.3);
    let well = System::harmonic_well(Grid::new_1d(121, 0.2)?, omega0, PotentialModel::non_interacting())?;
    println!("λ\tmean field\texact DSI\tclosed form");
    for strength in [0.0, 0.05, 0.1, 0.2] {
        let fock = FockSpace::along(8, omega, strength, [1.0, 0.0, 0.0])?;
        let mean = ground_state(&well, &fock, Flavor::MeanFieldMu)?;
        let exact = ground_state(&well, &fock, Flavor::ExactSelfInteraction)?;
        println!(
            "{strength}\t{:.10}\t{:.10}\t{:.10}",
            mean.energy.total,
            exact.eigenvalues[0],
            quadratic_ground_energy(omega0, omega, strength)
        );
    }
    Ok(())
}
