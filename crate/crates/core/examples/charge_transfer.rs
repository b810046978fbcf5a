//! Ground-state charge redistribution of an asymmetric two-site model when
//! it is placed in a cavity: cumulative Δq(x) between the two densities.

use qedtp::fock::FockSpace;
use qedtp::grid::Grid;
use qedtp::potentials::{Ion, IonSet, PotentialModel};
use qedtp::scf::{scf_solve, ScfConfig};
use qedtp::spectra::charge_transfer_profile;
use qedtp::system::System;

fn main() -> qedtp::Result<()> {
    let ions = IonSet::new(vec![
        Ion { position: [-2.0, 0.0, 0.0], charge: 1.0, softening: 1.0 },
        Ion { position: [2.0, 0.0, 0.0], charge: 0.8, softening: 1.0 },
    ]);
    let model = System::new(Grid::new_1d(161, 0.3)?, ions, PotentialModel::non_interacting(), vec![1.0])?;
    let cfg = ScfConfig { tol_energy: 1e-12, tol_residual: Some(1e-8), max_iter: 2000, ..Default::default() };
    let free = scf_solve(&model, &FockSpace::along(0, 0.1, 0.0, [1.0, 0.0, 0.0])?, &cfg)?;

    for strength in [0.02, 0.05, 0.1] {
        let cavity = scf_solve(&model, &FockSpace::along(2, 0.1, strength, [1.0, 0.0, 0.0])?, &cfg)?;
        let ct = charge_transfer_profile(&cavity.density, &free.density)?;
        let mid = ct.x.iter().position(|x| *x >= 0.0).unwrap_or(0);
        println!(
            "λ = {strength}: moved {:.4e}, Δq(0) = {:+.4e}, Δq(end) = {:+.1e}",
            ct.transferred(),
            ct.dq[mid],
            ct.dq.last().copied().unwrap_or(0.0)
        );
    }
    Ok(())
}
