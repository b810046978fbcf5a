use crate::error::{Error, Result};
use crate::grid::{Field, Grid, RealField, Stencil};
use crate::potentials::{IonSet, PotentialBuilder, PotentialModel};

/// Everything about the electronic problem that is fixed during a run:
/// mesh, external potential, interaction model and orbital occupations.
#[derive(Clone, Debug)]
pub struct System {
    pub grid: Grid,
    pub ions: IonSet,
    pub model: PotentialModel,
    /// c_m for each orbital.
    pub occupations: Vec<f64>,
    builder: PotentialBuilder,
}

impl System {
    pub fn new(grid: Grid, ions: IonSet, model: PotentialModel, occupations: Vec<f64>) -> Result<Self> {
        ions.validate(&grid)?;
        model.stencil.check_grid(&grid)?;
        check_occupations(&grid, &occupations)?;
        let builder = PotentialBuilder::new(grid, &ions, model);
        Ok(System {
            grid,
            ions,
            model,
            occupations,
            builder,
        })
    }

    /// A system bound by an arbitrary fixed potential instead of ions.
    pub fn with_external(external: RealField, model: PotentialModel, occupations: Vec<f64>) -> Result<Self> {
        let grid = *external.grid();
        model.stencil.check_grid(&grid)?;
        check_occupations(&grid, &occupations)?;
        Ok(System {
            grid,
            ions: IonSet::default(),
            model,
            occupations,
            builder: PotentialBuilder::with_external(external, model),
        })
    }

    /// One electron in V = ½ ω₀² |r|².
    pub fn harmonic_well(grid: Grid, omega0: f64, model: PotentialModel) -> Result<Self> {
        let v = Field::from_fn(grid, |r| 0.5 * omega0 * omega0 * (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]));
        System::with_external(v, model, vec![1.0])
    }

    pub fn with_occupations(mut self, occupations: Vec<f64>) -> Result<Self> {
        check_occupations(&self.grid, &occupations)?;
        self.occupations = occupations;
        Ok(self)
    }

    pub fn electrons(&self) -> f64 {
        self.occupations.iter().sum()
    }

    pub fn stencil(&self) -> Stencil {
        self.model.stencil
    }

    pub fn potentials(&self) -> &PotentialBuilder {
        &self.builder
    }

    pub fn external_potential(&self) -> &RealField {
        self.builder.ionic()
    }
}

fn check_occupations(grid: &Grid, occupations: &[f64]) -> Result<()> {
    let mut errs = Vec::new();
    if occupations.is_empty() {
        errs.push("at least one occupied orbital is required".to_string());
    }
    if occupations.len() > grid.len() {
        errs.push(format!(
            "{} orbitals requested on a grid of {} points",
            occupations.len(),
            grid.len()
        ));
    }
    if occupations.iter().any(|&c| !(c > 0.0 && c <= 2.0)) {
        errs.push("orbital occupations must lie in (0, 2]".to_string());
    }
    if errs.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(errs))
    }
}

/// Doubly occupied orbitals for an even electron count, one singly occupied last orbital otherwise.
pub fn aufbau_occupations(electrons: usize) -> Vec<f64> {
    let mut occ = vec![2.0; electrons / 2];
    if electrons % 2 == 1 {
        occ.push(1.0);
    }
    occ
}
