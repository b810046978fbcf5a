//! Kohn-Sham potential V_KS = V_H[ρ] + V_XC[ρ] + V_ion.
//!
//! Ions are local soft-Coulomb centres. The Hartree term is a soft-Coulomb
//! convolution in 1D and a conjugate-gradient Poisson solve with multipole
//! boundary values in 3D. Exchange-correlation is spin-unpolarized LDA
//! (Slater exchange, Perdew-Zunger 1981 correlation).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::{laplacian_accumulate, Field, Grid, RealField, Stencil};

/// Densities below this are treated as vacuum by the XC functional.
const RHO_FLOOR: f64 = 1e-30;

#[derive(Clone, Debug, PartialEq)]
pub struct Density {
    field: RealField,
    electrons: f64,
}

impl Density {
    /// Wraps a density; `electrons` is the nominal count from the occupations.
    pub fn new(field: RealField, electrons: f64) -> Result<Self> {
        if let Some(v) = field.values().iter().find(|&&v| v < -1e-12) {
            return Err(Error::Numerical(format!("negative density value {v}")));
        }
        Ok(Density { field, electrons })
    }

    pub fn zeros(grid: Grid) -> Self {
        Density {
            field: RealField::zeros(grid),
            electrons: 0.0,
        }
    }

    pub fn field(&self) -> &RealField {
        &self.field
    }

    pub fn values(&self) -> &[f64] {
        self.field.values()
    }

    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    pub fn electrons(&self) -> f64 {
        self.electrons
    }

    pub fn integral(&self) -> f64 {
        self.field.integral()
    }

    /// Rescale so that ∫ρ = N.
    pub fn normalize(&mut self) {
        let total = self.integral();
        if total > 0.0 {
            let s = self.electrons / total;
            self.field.values_mut().iter_mut().for_each(|v| *v *= s);
        }
    }

    /// ∫ |ρ - other| dr
    pub fn l1_distance(&self, other: &Density) -> f64 {
        self.values()
            .iter()
            .zip(other.values())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            * self.grid().volume_element()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ion {
    pub position: [f64; 3],
    pub charge: f64,
    pub softening: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IonSet {
    pub ions: Vec<Ion>,
}

impl IonSet {
    pub fn new(ions: Vec<Ion>) -> Self {
        IonSet { ions }
    }

    pub fn total_charge(&self) -> f64 {
        self.ions.iter().map(|i| i.charge).sum()
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let mut errs = Vec::new();
        for (k, ion) in self.ions.iter().enumerate() {
            if !(ion.softening > 0.0) {
                errs.push(format!("ion {k}: softening length must be positive"));
            }
            if !grid.contains(ion.position) {
                errs.push(format!("ion {k} at {:?} lies outside the box", ion.position));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

/// Valence charge used when an ion is given by element symbol.
pub fn valence_charge(symbol: &str) -> Option<f64> {
    let z = match symbol {
        "H" | "Li" | "Na" | "K" => 1.0,
        "He" | "Be" | "Mg" => 2.0,
        "B" | "Al" => 3.0,
        "C" | "Si" => 4.0,
        "N" | "P" => 5.0,
        "O" | "S" => 6.0,
        "F" | "Cl" => 7.0,
        "Ne" | "Ar" => 8.0,
        _ => return None,
    };
    Some(z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum XcKind {
    None,
    Lda,
}

/// Which interaction terms enter V_KS, plus solver knobs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialModel {
    pub hartree: bool,
    pub xc: XcKind,
    /// Electron-electron softening of the 1D soft-Coulomb kernel.
    pub softening_ee: f64,
    /// Relative residual tolerance of the 3D Poisson solve.
    pub poisson_tol: f64,
    pub stencil: Stencil,
}

impl Default for PotentialModel {
    fn default() -> Self {
        PotentialModel {
            hartree: true,
            xc: XcKind::Lda,
            softening_ee: 1.0,
            poisson_tol: 1e-8,
            stencil: Stencil::default(),
        }
    }
}

impl PotentialModel {
    pub fn non_interacting() -> Self {
        PotentialModel {
            hartree: false,
            xc: XcKind::None,
            ..Default::default()
        }
    }
}

/// V_ion(r) = -Σ_A Z_A / sqrt(|r - R_A|² + a_A²)
pub fn ionic_potential(ions: &IonSet, grid: &Grid) -> RealField {
    Field::from_fn(*grid, |r| {
        ions.ions
            .iter()
            .map(|ion| {
                let d2: f64 = (0..3).map(|a| (r[a] - ion.position[a]).powi(2)).sum();
                -ion.charge / (d2 + ion.softening * ion.softening).sqrt()
            })
            .sum()
    })
}

pub fn hartree_potential(rho: &Density, model: &PotentialModel) -> Result<RealField> {
    let grid = *rho.grid();
    if rho.values().iter().all(|&v| v == 0.0) {
        return Ok(RealField::zeros(grid));
    }
    match grid.dim() {
        1 => Ok(hartree_soft_coulomb_1d(rho, model.softening_ee)),
        _ => hartree_poisson_3d(rho, model),
    }
}

/// V_H(x) = ∫ ρ(x') / sqrt((x-x')² + a²) dx'
fn hartree_soft_coulomb_1d(rho: &Density, a: f64) -> RealField {
    let grid = *rho.grid();
    let n = grid.len();
    let h = grid.spacing();
    let kernel: Vec<f64> = (0..n)
        .map(|d| 1.0 / ((d as f64 * h).powi(2) + a * a).sqrt())
        .collect();
    let r = rho.values();
    let v = (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (j, &rj) in r.iter().enumerate() {
                acc += rj * kernel[i.abs_diff(j)];
            }
            acc * h
        })
        .collect();
    Field::from_vec(grid, v).expect("finite convolution")
}

/// Monopole + dipole far field of ρ about the origin.
fn multipole_boundary(rho: &Density) -> impl Fn([f64; 3]) -> f64 {
    let grid = *rho.grid();
    let dv = grid.volume_element();
    let mut q = 0.0;
    let mut p = [0.0; 3];
    for (idx, &v) in rho.values().iter().enumerate() {
        let r = grid.position(idx);
        q += v * dv;
        for a in 0..3 {
            p[a] += r[a] * v * dv;
        }
    }
    move |r: [f64; 3]| {
        let d2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        let d = d2.sqrt();
        q / d + (p[0] * r[0] + p[1] * r[1] + p[2] * r[2]) / (d2 * d)
    }
}

/// Solves ∇²V = -4πρ inside the box with V outside the box taken from the
/// multipole expansion of ρ. The hard-wall Laplacian is negative definite,
/// so CG runs on A = -∇²_D.
fn hartree_poisson_3d(rho: &Density, model: &PotentialModel) -> Result<RealField> {
    let grid = *rho.grid();
    let stencil = model.stencil;
    stencil.check_grid(&grid)?;
    let n = grid.len();
    let boundary = multipole_boundary(rho);
    let ghost = ghost_contribution(&grid, stencil, &boundary);

    // A V = b with A = -∇²_D, b = 4πρ + (∇² contributions of the ghost values)
    let b: Vec<f64> = rho
        .values()
        .iter()
        .zip(&ghost)
        .map(|(r, g)| 4.0 * PI * r + g)
        .collect();
    let apply = |x: &[f64], out: &mut [f64]| {
        out.iter_mut().for_each(|o| *o = 0.0);
        laplacian_accumulate(&grid, stencil, x, out, -1.0);
    };

    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    let max_iter = 20 * n.max(100);
    let mut iter = 0;
    while rr.sqrt() > model.poisson_tol * bnorm {
        if iter >= max_iter {
            return Err(Error::Numerical(format!(
                "Poisson CG did not converge in {max_iter} iterations, relative residual {:.3e}",
                rr.sqrt() / bnorm
            )));
        }
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rr_new / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iter += 1;
    }
    Field::from_vec(grid, x)
}

/// Σ over stencil arms that leave the box of c_j V_b(ghost) / h², per interior point.
fn ghost_contribution(grid: &Grid, stencil: Stencil, boundary: &impl Fn([f64; 3]) -> f64) -> Vec<f64> {
    let coef = stencil.coefficients();
    let h = grid.spacing();
    let shape = grid.shape();
    let mut out = vec![0.0; grid.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let p = grid.unravel(idx);
        let base = grid.position(idx);
        for axis in 0..grid.active_axes() {
            let n = shape[axis] as isize;
            for (j, &cj) in coef.iter().enumerate().skip(1) {
                for sign in [-1isize, 1] {
                    let k = p[axis] as isize + sign * j as isize;
                    if k < 0 || k >= n {
                        let mut r = base;
                        r[axis] += (sign * j as isize) as f64 * h;
                        *o += cj * boundary(r) / (h * h);
                    }
                }
            }
        }
    }
    out
}

/// Perdew-Zunger 1981 correlation (unpolarized): returns (ε_c, v_c) at r_s.
fn pz81_correlation(rs: f64) -> (f64, f64) {
    if rs >= 1.0 {
        const GAMMA: f64 = -0.1423;
        const BETA1: f64 = 1.0529;
        const BETA2: f64 = 0.3334;
        let sq = rs.sqrt();
        let den = 1.0 + BETA1 * sq + BETA2 * rs;
        let ec = GAMMA / den;
        let vc = ec * (1.0 + 7.0 / 6.0 * BETA1 * sq + 4.0 / 3.0 * BETA2 * rs) / den;
        (ec, vc)
    } else {
        const A: f64 = 0.0311;
        const B: f64 = -0.048;
        const C: f64 = 0.0020;
        const D: f64 = -0.0116;
        let ln = rs.ln();
        let ec = A * ln + B + C * rs * ln + D * rs;
        let vc = A * ln + (B - A / 3.0) + 2.0 / 3.0 * C * rs * ln + (2.0 * D - C) / 3.0 * rs;
        (ec, vc)
    }
}

/// Slater exchange energy per electron at r_s: -(3/4π)(9π/4)^{1/3} / r_s.
pub fn slater_exchange_per_electron(rs: f64) -> f64 {
    -(3.0 / (4.0 * PI)) * (9.0 * PI / 4.0).powf(1.0 / 3.0) / rs
}

/// (ε_xc, v_xc) at density ρ; zero in vacuum.
pub fn lda_point(rho: f64) -> (f64, f64) {
    if rho <= RHO_FLOOR {
        return (0.0, 0.0);
    }
    let rs = (3.0 / (4.0 * PI * rho)).powf(1.0 / 3.0);
    let ex = slater_exchange_per_electron(rs);
    let (ec, vc) = pz81_correlation(rs);
    (ex + ec, 4.0 / 3.0 * ex + vc)
}

/// LDA potential and energy E_XC = ∫ ρ ε_xc(ρ) dr. Negative round-off densities are clipped to 0.
pub fn lda_xc(rho: &Density) -> (RealField, f64) {
    let grid = *rho.grid();
    let mut energy = 0.0;
    let v: Vec<f64> = rho
        .values()
        .iter()
        .map(|&r| {
            let r = r.max(0.0);
            let (e, v) = lda_point(r);
            energy += r * e;
            v
        })
        .collect();
    (
        Field::from_vec(grid, v).expect("finite xc potential"),
        energy * grid.volume_element(),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct KsPotential {
    pub hartree: RealField,
    pub xc: RealField,
    pub ionic: RealField,
    pub e_xc: f64,
    total: Vec<f64>,
}

impl KsPotential {
    pub fn new(hartree: RealField, xc: RealField, ionic: RealField, e_xc: f64) -> Result<Self> {
        hartree.same_grid(&xc)?;
        hartree.same_grid(&ionic)?;
        let total = hartree
            .values()
            .iter()
            .zip(xc.values())
            .zip(ionic.values())
            .map(|((a, b), c)| a + b + c)
            .collect();
        Ok(KsPotential {
            hartree,
            xc,
            ionic,
            e_xc,
            total,
        })
    }

    /// A fixed external potential with no density dependence.
    pub fn external(ionic: RealField) -> Self {
        let grid = *ionic.grid();
        KsPotential::new(RealField::zeros(grid), RealField::zeros(grid), ionic, 0.0)
            .expect("same grid")
    }

    pub fn total(&self) -> &[f64] {
        &self.total
    }

    pub fn grid(&self) -> &Grid {
        self.ionic.grid()
    }

    /// E_H = ½ ∫ ρ V_H dr
    pub fn hartree_energy(&self, rho: &Density) -> f64 {
        0.5 * integrate_product(rho.values(), self.hartree.values(), self.grid())
    }
}

pub(crate) fn integrate_product(a: &[f64], b: &[f64], grid: &Grid) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * grid.volume_element()
}

pub fn assemble_ks(rho: &Density, ions: &IonSet, model: &PotentialModel) -> Result<KsPotential> {
    PotentialBuilder::new(*rho.grid(), ions, *model).build(rho)
}

/// Caches V_ion so repeated rebuilds (SCF iterations, time steps) only
/// recompute the density-dependent parts.
#[derive(Clone, Debug)]
pub struct PotentialBuilder {
    grid: Grid,
    ionic: RealField,
    model: PotentialModel,
}

impl PotentialBuilder {
    pub fn new(grid: Grid, ions: &IonSet, model: PotentialModel) -> Self {
        PotentialBuilder {
            grid,
            ionic: ionic_potential(ions, &grid),
            model,
        }
    }

    /// Builder around an arbitrary external potential (e.g. a harmonic well).
    pub fn with_external(ionic: RealField, model: PotentialModel) -> Self {
        PotentialBuilder {
            grid: *ionic.grid(),
            ionic,
            model,
        }
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn ionic(&self) -> &RealField {
        &self.ionic
    }

    pub fn build(&self, rho: &Density) -> Result<KsPotential> {
        if *rho.grid() != self.grid {
            return Err(Error::Usage("density and potential grids differ".into()));
        }
        let hartree = if self.model.hartree {
            hartree_potential(rho, &self.model)?
        } else {
            RealField::zeros(self.grid)
        };
        let (xc, e_xc) = match self.model.xc {
            XcKind::Lda => lda_xc(rho),
            XcKind::None => (RealField::zeros(self.grid), 0.0),
        };
        KsPotential::new(hartree, xc, self.ionic.clone(), e_xc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_density(grid: Grid, center: [f64; 3], width: f64, charge: f64) -> Density {
        let d = grid.dim() as i32;
        let norm = charge / (2.0 * PI * width * width).powf(d as f64 / 2.0);
        let f = Field::from_fn(grid, |r| {
            let d2: f64 = (0..3).map(|a| (r[a] - center[a]).powi(2)).sum();
            norm * (-d2 / (2.0 * width * width)).exp()
        });
        Density::new(f, charge).unwrap()
    }

    #[test]
    fn zero_density_gives_zero_hartree() {
        let g = Grid::new_3d([9, 9, 9], 0.5).unwrap();
        let v = hartree_potential(&Density::zeros(g), &PotentialModel::default()).unwrap();
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn hartree_3d_far_field_is_coulombic() {
        let g = Grid::new_3d([41, 41, 41], 0.4).unwrap();
        let rho = gaussian_density(g, [0.0; 3], 0.6, 1.0);
        let v = hartree_potential(&rho, &PotentialModel::default()).unwrap();
        for ix in [30usize, 34, 38] {
            let idx = g.index(ix, 20, 20);
            let r = g.coord(0, ix);
            let rel = (v.values()[idx] * r - 1.0).abs();
            assert!(rel < 0.01, "r = {r}: V r = {}", v.values()[idx] * r);
        }
    }

    #[test]
    fn hartree_3d_self_energy_matches_gaussian_closed_form() {
        // E_H = 1 / (2 σ sqrt(π)) for a unit Gaussian of width σ
        let g = Grid::new_3d([33, 33, 33], 0.3).unwrap();
        let sigma = 0.9;
        let rho = gaussian_density(g, [0.0; 3], sigma, 1.0);
        let v = hartree_potential(&rho, &PotentialModel::default()).unwrap();
        let eh = 0.5 * integrate_product(rho.values(), v.values(), &g);
        let exact = 1.0 / (2.0 * sigma * PI.sqrt());
        assert!((eh - exact).abs() / exact < 2e-3, "{eh} vs {exact}");
        assert!(v.values().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn hartree_1d_of_narrow_peak_is_the_kernel() {
        // discrete delta: the quadrature reproduces the kernel exactly
        let g = Grid::new_1d(401, 0.05).unwrap();
        let mut spike = vec![0.0; 401];
        spike[200] = 1.0 / g.spacing();
        let rho = Density::new(Field::from_vec(g, spike).unwrap(), 1.0).unwrap();
        let v = hartree_potential(&rho, &PotentialModel::default()).unwrap();
        for i in 0..401 {
            let x = g.coord(0, i);
            let exact = 1.0 / (x * x + 1.0).sqrt();
            assert!((v.values()[i] - exact).abs() < 1e-13, "x = {x}");
        }
        // narrow Gaussian: error is O(σ²)
        let g = Grid::new_1d(2001, 0.01).unwrap();
        let rho = gaussian_density(g, [0.0; 3], 0.03, 1.0);
        let v = hartree_potential(&rho, &PotentialModel::default()).unwrap();
        for i in (0..2001).step_by(100) {
            let x = g.coord(0, i);
            let exact = 1.0 / (x * x + 1.0).sqrt();
            assert!((v.values()[i] - exact).abs() < 1e-3, "x = {x}");
        }
    }

    #[test]
    fn hartree_1d_energy_matches_double_sum() {
        let g = Grid::new_1d(17, 0.5).unwrap();
        let rho = gaussian_density(g, [0.3, 0.0, 0.0], 1.0, 2.0);
        let v = hartree_potential(&rho, &PotentialModel::default()).unwrap();
        let eh = 0.5 * integrate_product(rho.values(), v.values(), &g);
        let h = g.spacing();
        let mut direct = 0.0;
        for i in 0..17 {
            for j in 0..17 {
                let dx = g.coord(0, i) - g.coord(0, j);
                direct += rho.values()[i] * rho.values()[j] / (dx * dx + 1.0).sqrt();
            }
        }
        direct *= 0.5 * h * h;
        assert!(eh > 0.0);
        assert!((eh - direct).abs() / direct < 1e-6);
    }

    #[test]
    fn lda_vanishes_on_empty_density() {
        let g = Grid::new_1d(11, 0.5).unwrap();
        let (v, e) = lda_xc(&Density::zeros(g));
        assert_eq!(e, 0.0);
        assert!(v.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn slater_exchange_at_rs_one() {
        let rho = 3.0 / (4.0 * PI);
        let ex_direct = -0.75 * (3.0 / PI).powf(1.0 / 3.0) * rho.powf(1.0 / 3.0);
        assert!((slater_exchange_per_electron(1.0) - ex_direct).abs() < 1e-14);
        assert!((slater_exchange_per_electron(1.0) + 0.458_165_293_283_142_9).abs() < 1e-12);
    }

    #[test]
    fn pz81_is_continuous_at_rs_one() {
        let below = pz81_correlation(1.0 - 1e-9);
        let above = pz81_correlation(1.0);
        assert!((below.0 - above.0).abs() < 1e-4);
        assert!((below.1 - above.1).abs() < 2e-3);
    }

    #[test]
    fn lda_potential_is_functional_derivative() {
        let g = Grid::new_3d([13, 13, 13], 0.4).unwrap();
        let rho = gaussian_density(g, [0.1, -0.2, 0.0], 1.0, 2.0);
        let drho = Field::from_fn(g, |r| (-(r[0] * r[0] + r[1] * r[1] + r[2] * r[2]) / 3.0).exp() * (1.0 + 0.3 * r[0]));
        let eps = 1e-6;
        let (v, e0) = lda_xc(&rho);
        let shifted: Vec<f64> = rho.values().iter().zip(drho.values()).map(|(a, b)| a + eps * b).collect();
        let (_, e1) = lda_xc(&Density::new(Field::from_vec(g, shifted).unwrap(), 2.0).unwrap());
        let predicted = eps * integrate_product(v.values(), drho.values(), &g);
        assert!(((e1 - e0) - predicted).abs() / predicted.abs() < 1e-5);
    }

    #[test]
    fn ionic_potential_formula_and_symmetry() {
        let g = Grid::new_1d(101, 0.2).unwrap();
        let single = IonSet::new(vec![Ion { position: [0.0; 3], charge: 1.0, softening: 1.0 }]);
        let v = ionic_potential(&single, &g);
        assert!((v.values()[50] + 1.0).abs() < 1e-15);

        let pair = IonSet::new(vec![
            Ion { position: [-1.5, 0.0, 0.0], charge: 1.0, softening: 1.0 },
            Ion { position: [1.5, 0.0, 0.0], charge: 1.0, softening: 1.0 },
        ]);
        let v = ionic_potential(&pair, &g);
        for i in 0..50 {
            assert!((v.values()[i] - v.values()[100 - i]).abs() < 1e-14);
        }

        let g3 = Grid::new_3d([5, 5, 5], 20.0).unwrap();
        let far = ionic_potential(&single, &g3);
        let idx = g3.index(4, 2, 2);
        assert!((far.values()[idx] * 40.0 + 1.0).abs() < 0.01);
    }

    #[test]
    fn assemble_is_additive_and_deterministic() {
        let g = Grid::new_1d(41, 0.3).unwrap();
        let ions = IonSet::new(vec![Ion { position: [0.0; 3], charge: 2.0, softening: 0.8 }]);
        let rho = gaussian_density(g, [0.0; 3], 1.0, 2.0);
        let model = PotentialModel::default();
        let ks = assemble_ks(&rho, &ions, &model).unwrap();
        for i in 0..g.len() {
            let sum = ks.hartree.values()[i] + ks.xc.values()[i] + ks.ionic.values()[i];
            assert_eq!(ks.total()[i], sum);
        }
        assert_eq!(ks, assemble_ks(&rho, &ions, &model).unwrap());

        let empty = assemble_ks(&Density::zeros(g), &IonSet::default(), &model).unwrap();
        assert!(empty.total().iter().all(|&v| v == 0.0));
    }
}
