//! Truncated single-mode photon Fock space, tensor-product orbitals
//! Φ_m = Σ_n φ_mn(r)|n⟩, and the action of the cavity-coupled Kohn-Sham
//! Hamiltonian
//!
//! ```text
//! (HΦ)_n = -½∇²φ_n + [V_KS + μ(λ·r) + (n+½)ω + E·r] φ_n
//!          - sqrt(ω/2) (λ·r) [sqrt(n) φ_{n-1} + sqrt(n+1) φ_{n+1}]
//! ```
//!
//! with μ = ∫ (λ·r) ρ dr. Couplings leaving the retained space 0..=N_F are
//! dropped, which keeps the truncated operator Hermitian.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{dot_raw, laplacian_accumulate, norm_sqr_raw, Field, Grid, RealField, Stencil};
use crate::potentials::{Density, KsPotential};

/// Work per application above which sectors are processed in parallel.
const PAR_THRESHOLD: usize = 1 << 15;

/// One cavity mode: frequency ω, coupling vector λ (polarization times
/// strength) and the highest photon number N_F kept.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FockSpace {
    n_max: usize,
    omega: f64,
    lambda: [f64; 3],
}

impl FockSpace {
    pub fn new(n_max: usize, omega: f64, lambda: [f64; 3]) -> Result<Self> {
        let mut errs = Vec::new();
        if !(omega > 0.0 && omega.is_finite()) {
            errs.push(format!("photon frequency must be positive, got {omega}"));
        }
        if lambda.iter().any(|l| !l.is_finite()) {
            errs.push("coupling vector must be finite".to_string());
        }
        if !errs.is_empty() {
            return Err(Error::Config(errs));
        }
        Ok(FockSpace { n_max, omega, lambda })
    }

    /// Coupling λ·u for a unit polarization `u`.
    pub fn along(n_max: usize, omega: f64, strength: f64, polarization: [f64; 3]) -> Result<Self> {
        let norm = polarization.iter().map(|p| p * p).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::config("polarization vector is zero"));
        }
        FockSpace::new(
            n_max,
            omega,
            polarization.map(|p| strength * p / norm),
        )
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn sectors(&self) -> usize {
        self.n_max + 1
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn lambda(&self) -> [f64; 3] {
        self.lambda
    }

    pub fn coupling_strength(&self) -> f64 {
        self.lambda.iter().map(|l| l * l).sum::<f64>().sqrt()
    }

    pub fn with_n_max(&self, n_max: usize) -> Self {
        FockSpace { n_max, ..*self }
    }

    pub fn with_lambda(&self, lambda: [f64; 3]) -> Self {
        FockSpace { lambda, ..*self }
    }
}

/// √n and √(n+1) for n = 0..=N_F.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderTable {
    pub sqrt_n: Vec<f64>,
    pub sqrt_n_plus_1: Vec<f64>,
}

impl LadderTable {
    pub fn new(n_max: usize) -> Self {
        LadderTable {
            sqrt_n: (0..=n_max).map(|n| (n as f64).sqrt()).collect(),
            sqrt_n_plus_1: (0..=n_max).map(|n| ((n + 1) as f64).sqrt()).collect(),
        }
    }
}

/// Matrix of â on the truncated space, ⟨n-1|â|n⟩ = √n.
pub fn annihilation_matrix(n_max: usize) -> DMatrix<f64> {
    let d = n_max + 1;
    DMatrix::from_fn(d, d, |i, j| if j == i + 1 { (j as f64).sqrt() } else { 0.0 })
}

pub fn creation_matrix(n_max: usize) -> DMatrix<f64> {
    annihilation_matrix(n_max).transpose()
}

/// Squared entries of â: ⟨i|â|j⟩² = j when j = i + 1.
fn annihilation_squared(n_max: usize) -> Vec<Vec<u64>> {
    let d = n_max + 1;
    (0..d)
        .map(|i| (0..d).map(|j| if j == i + 1 { j as u64 } else { 0 }).collect())
        .collect()
}

/// Product of two matrices with non-negative entries √a_ij and √b_ij, formed
/// as Σ_k √(a_ik b_kj) so that products of equal square roots stay exact.
fn sqrt_entry_product(a: &[Vec<u64>], b: &[Vec<u64>]) -> DMatrix<f64> {
    let d = a.len();
    DMatrix::from_fn(d, d, |i, j| {
        (0..d)
            .map(|k| ((a[i][k] * b[k][j]) as f64).sqrt())
            .sum()
    })
}

/// [â, â⁺] on the truncated space: identity except the last diagonal entry, -N_F.
pub fn truncated_commutator(n_max: usize) -> DMatrix<f64> {
    let a = annihilation_squared(n_max);
    let ad: Vec<Vec<u64>> = (0..a.len())
        .map(|i| (0..a.len()).map(|j| a[j][i]).collect())
        .collect();
    sqrt_entry_product(&a, &ad) - sqrt_entry_product(&ad, &a)
}

/// Kohn-Sham orbital on the grid ⊗ Fock product space. Sector n occupies
/// `data[n * npts .. (n + 1) * npts]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TpOrbital {
    grid: Grid,
    sectors: usize,
    data: Vec<C64>,
    /// Electrons on this orbital (c_m).
    pub occupation: f64,
}

impl TpOrbital {
    pub fn zeros(grid: Grid, sectors: usize, occupation: f64) -> Self {
        TpOrbital {
            grid,
            sectors,
            data: vec![C64::new(0.0, 0.0); grid.len() * sectors],
            occupation,
        }
    }

    pub fn from_sectors(grid: Grid, sectors: Vec<Vec<C64>>, occupation: f64) -> Result<Self> {
        if sectors.is_empty() {
            return Err(Error::Usage("orbital needs at least one Fock sector".into()));
        }
        for s in &sectors {
            grid.check_len(s.len())?;
        }
        let n = sectors.len();
        Ok(TpOrbital {
            grid,
            sectors: n,
            data: sectors.into_iter().flatten().collect(),
            occupation,
        })
    }

    pub fn from_flat(grid: Grid, sectors: usize, data: Vec<C64>, occupation: f64) -> Result<Self> {
        if data.len() != grid.len() * sectors || sectors == 0 {
            return Err(Error::Usage(format!(
                "flat orbital has {} values, expected {} x {}",
                data.len(),
                sectors,
                grid.len()
            )));
        }
        Ok(TpOrbital { grid, sectors, data, occupation })
    }

    /// Spatial field placed entirely in sector `n`.
    pub fn in_sector(field: &crate::grid::SpatialField, sectors: usize, n: usize, occupation: f64) -> Self {
        let grid = *field.grid();
        let mut orb = TpOrbital::zeros(grid, sectors, occupation);
        orb.sector_mut(n).copy_from_slice(field.values());
        orb
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sectors(&self) -> usize {
        self.sectors
    }

    pub fn npts(&self) -> usize {
        self.grid.len()
    }

    pub fn sector(&self, n: usize) -> &[C64] {
        let p = self.npts();
        &self.data[n * p..(n + 1) * p]
    }

    pub fn sector_mut(&mut self, n: usize) -> &mut [C64] {
        let p = self.npts();
        &mut self.data[n * p..(n + 1) * p]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn sector_field(&self, n: usize) -> crate::grid::SpatialField {
        Field::from_vec(self.grid, self.sector(n).to_vec()).expect("sector matches grid")
    }

    /// ⟨φ_n|φ_n⟩
    pub fn sector_norm_sqr(&self, n: usize) -> f64 {
        norm_sqr_raw(self.sector(n)) * self.grid.volume_element()
    }

    /// (Φ|Φ) = Σ_n ⟨φ_n|φ_n⟩
    pub fn norm_sqr(&self) -> f64 {
        norm_sqr_raw(&self.data) * self.grid.volume_element()
    }

    /// (Φ|Ψ) over grid and Fock space.
    pub fn overlap(&self, other: &TpOrbital) -> Result<C64> {
        self.check_compatible(other)?;
        Ok(dot_raw(&self.data, &other.data) * self.grid.volume_element())
    }

    pub fn sector_overlap(&self, other: &TpOrbital, n: usize) -> C64 {
        dot_raw(self.sector(n), other.sector(n)) * self.grid.volume_element()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Numerical(format!("cannot normalize orbital with norm² {n}")));
        }
        let s = 1.0 / n.sqrt();
        self.data.iter_mut().for_each(|v| *v *= s);
        Ok(())
    }

    pub fn scale(&mut self, s: C64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    /// self += a * other
    pub fn axpy(&mut self, a: C64, other: &TpOrbital) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    pub fn check_compatible(&self, other: &TpOrbital) -> Result<()> {
        if self.grid != other.grid || self.sectors != other.sectors {
            return Err(Error::Usage("orbitals differ in grid or Fock truncation".into()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
}

/// The Hamiltonian of one iteration or time step: V_KS, μ and the external
/// field are frozen into a local potential shared by every sector.
#[derive(Clone, Debug)]
pub struct CavityHamiltonian {
    grid: Grid,
    stencil: Stencil,
    fock: FockSpace,
    ladder: LadderTable,
    v_ks: Vec<f64>,
    lambda_r: Vec<f64>,
    mu: f64,
    /// Any further potential linear in r: external field E, QEDFT exchange term.
    linear: [f64; 3],
    v_local: Vec<f64>,
    coupling: Vec<f64>,
}

impl CavityHamiltonian {
    pub fn new(
        grid: Grid,
        stencil: Stencil,
        v_ks: &[f64],
        mu: f64,
        fock: FockSpace,
        linear: [f64; 3],
    ) -> Result<Self> {
        grid.check_len(v_ks.len())?;
        stencil.check_grid(&grid)?;
        let lambda_r = grid.linear_field(fock.lambda());
        let scale = -(0.5 * fock.omega()).sqrt();
        let coupling = lambda_r.iter().map(|v| scale * v).collect();
        let mut h = CavityHamiltonian {
            grid,
            stencil,
            fock,
            ladder: LadderTable::new(fock.n_max()),
            v_ks: v_ks.to_vec(),
            lambda_r,
            mu,
            linear,
            v_local: Vec::new(),
            coupling,
        };
        h.rebuild_local();
        Ok(h)
    }

    pub fn from_ks(stencil: Stencil, ks: &KsPotential, mu: f64, fock: FockSpace, e_ext: [f64; 3]) -> Result<Self> {
        CavityHamiltonian::new(*ks.grid(), stencil, ks.total(), mu, fock, e_ext)
    }

    fn rebuild_local(&mut self) {
        let lin = self.grid.linear_field(self.linear);
        self.v_local = self
            .v_ks
            .iter()
            .zip(&self.lambda_r)
            .zip(&lin)
            .map(|((v, lr), l)| v + self.mu * lr + l)
            .collect();
    }

    /// Swap in a new V_KS, μ and linear field without reallocating the coupling.
    pub fn update(&mut self, v_ks: &[f64], mu: f64, linear: [f64; 3]) {
        self.v_ks.copy_from_slice(v_ks);
        self.mu = mu;
        self.linear = linear;
        self.rebuild_local();
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    pub fn fock(&self) -> &FockSpace {
        &self.fock
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn linear_field(&self) -> [f64; 3] {
        self.linear
    }

    pub fn v_ks(&self) -> &[f64] {
        &self.v_ks
    }

    /// V_KS + μ(λ·r) + E·r, without the photon diagonal.
    pub fn local_potential(&self) -> &[f64] {
        &self.v_local
    }

    /// -sqrt(ω/2) (λ·r)
    pub fn coupling_field(&self) -> &[f64] {
        &self.coupling
    }

    /// Upper bound on the spectral radius, for time-step and step-length checks.
    pub fn spectral_bound(&self) -> f64 {
        let vmax = self.v_local.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cmax = self.coupling.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        0.5 * self.stencil.max_symbol(&self.grid)
            + vmax
            + (self.fock.n_max() as f64 + 0.5) * self.fock.omega()
            + 2.0 * cmax * ((self.fock.n_max() + 1) as f64).sqrt()
    }

    fn apply_sector(&self, input: &[C64], n: usize, out: &mut [C64]) {
        let p = self.grid.len();
        let sectors = self.fock.sectors();
        let phi = &input[n * p..(n + 1) * p];
        let diag = (n as f64 + 0.5) * self.fock.omega();
        for ((o, &v), &f) in out.iter_mut().zip(&self.v_local).zip(phi) {
            *o = f * (v + diag);
        }
        laplacian_accumulate(&self.grid, self.stencil, phi, out, -0.5);
        if n > 0 {
            let s = self.ladder.sqrt_n[n];
            let lower = &input[(n - 1) * p..n * p];
            for ((o, &c), &f) in out.iter_mut().zip(&self.coupling).zip(lower) {
                *o += f * (c * s);
            }
        }
        if n + 1 < sectors {
            let s = self.ladder.sqrt_n_plus_1[n];
            let upper = &input[(n + 1) * p..(n + 2) * p];
            for ((o, &c), &f) in out.iter_mut().zip(&self.coupling).zip(upper) {
                *o += f * (c * s);
            }
        }
    }

    /// out = H input on flat sector-major arrays.
    pub fn apply_raw(&self, input: &[C64], out: &mut [C64]) {
        let p = self.grid.len();
        if input.len() * self.stencil.points() >= PAR_THRESHOLD && self.fock.sectors() > 1 {
            out.par_chunks_mut(p)
                .enumerate()
                .for_each(|(n, o)| self.apply_sector(input, n, o));
        } else {
            for (n, o) in out.chunks_mut(p).enumerate() {
                self.apply_sector(input, n, o);
            }
        }
    }

    pub fn apply(&self, phi: &TpOrbital) -> Result<TpOrbital> {
        self.check(phi)?;
        let mut out = TpOrbital::zeros(self.grid, phi.sectors(), phi.occupation);
        self.apply_raw(phi.as_slice(), out.as_mut_slice());
        Ok(out)
    }

    pub fn check(&self, phi: &TpOrbital) -> Result<()> {
        if *phi.grid() != self.grid {
            return Err(Error::Usage("orbital grid differs from Hamiltonian grid".into()));
        }
        if phi.sectors() != self.fock.sectors() {
            return Err(Error::Usage(format!(
                "orbital has {} Fock sectors, Hamiltonian has {}",
                phi.sectors(),
                self.fock.sectors()
            )));
        }
        Ok(())
    }

    /// Re (Φ|H|Φ) / (Φ|Φ)
    pub fn rayleigh_quotient(&self, phi: &TpOrbital) -> Result<f64> {
        let hphi = self.apply(phi)?;
        Ok(phi.overlap(&hphi)?.re / phi.norm_sqr())
    }
}

/// HΦ for the given KS potential, μ, cavity and external field.
pub fn apply_hamiltonian(
    phi: &TpOrbital,
    v: &KsPotential,
    mu: f64,
    cav: &FockSpace,
    e_ext: [f64; 3],
    stencil: Stencil,
) -> Result<TpOrbital> {
    if v.grid() != phi.grid() {
        return Err(Error::Usage("potential and orbital grids differ".into()));
    }
    CavityHamiltonian::from_ks(stencil, v, mu, *cav, e_ext)?.apply(phi)
}

/// μ = ∫ (λ·r) ρ dr
pub fn mean_dipole_mu(rho: &Density, cav: &FockSpace) -> f64 {
    let grid = rho.grid();
    let lam = cav.lambda();
    (0..3)
        .filter(|&a| lam[a] != 0.0)
        .map(|a| lam[a] * crate::grid::dipole_raw(grid, rho.values(), a))
        .sum()
}

fn check_set(orbitals: &[TpOrbital]) -> Result<(&TpOrbital, f64)> {
    let first = orbitals
        .first()
        .ok_or_else(|| Error::Usage("empty orbital set".into()))?;
    for o in &orbitals[1..] {
        first.check_compatible(o)?;
    }
    let electrons: f64 = orbitals.iter().map(|o| o.occupation).sum();
    Ok((first, electrons))
}

/// p_n(r) = Σ_m c_m |φ_mn(r)|²
pub fn sector_density(orbitals: &[TpOrbital], n: usize) -> Result<RealField> {
    let (first, _) = check_set(orbitals)?;
    if n >= first.sectors() {
        return Err(Error::Usage(format!(
            "sector {n} out of range 0..{}",
            first.sectors()
        )));
    }
    let mut p = vec![0.0; first.npts()];
    for o in orbitals {
        for (pi, v) in p.iter_mut().zip(o.sector(n)) {
            *pi += o.occupation * v.norm_sqr();
        }
    }
    Field::from_vec(*first.grid(), p)
}

/// ρ(r) = Σ_n p_n(r)
pub fn total_density(orbitals: &[TpOrbital]) -> Result<Density> {
    let (first, electrons) = check_set(orbitals)?;
    let mut rho = vec![0.0; first.npts()];
    for o in orbitals {
        for n in 0..o.sectors() {
            for (r, v) in rho.iter_mut().zip(o.sector(n)) {
                *r += o.occupation * v.norm_sqr();
            }
        }
    }
    Density::new(Field::from_vec(*first.grid(), rho)?, electrons)
}

/// P_n = (1/N) ∫ p_n dr
pub fn photon_occupations(orbitals: &[TpOrbital]) -> Result<Vec<f64>> {
    let (first, electrons) = check_set(orbitals)?;
    if electrons <= 0.0 {
        return Err(Error::Usage("orbital set carries no electrons".into()));
    }
    Ok((0..first.sectors())
        .map(|n| {
            orbitals
                .iter()
                .map(|o| o.occupation * o.sector_norm_sqr(n))
                .sum::<f64>()
                / electrons
        })
        .collect())
}

/// ⟨q⟩ = (1/sqrt(2ω)) Σ_m c_m Σ_n 2 sqrt(n+1) Re⟨φ_mn|φ_m,n+1⟩
pub fn q_expectation(orbitals: &[TpOrbital], cav: &FockSpace) -> f64 {
    let mut acc = 0.0;
    for o in orbitals {
        for n in 0..o.sectors().saturating_sub(1) {
            let c = dot_raw(o.sector(n), o.sector(n + 1)).re * o.grid().volume_element();
            acc += o.occupation * 2.0 * ((n + 1) as f64).sqrt() * c;
        }
    }
    acc / (2.0 * cav.omega()).sqrt()
}

/// Dipole of each sector density, D_n = ∫ r p_n dr.
pub fn sector_dipoles(orbitals: &[TpOrbital]) -> Result<Vec<[f64; 3]>> {
    let (first, _) = check_set(orbitals)?;
    (0..first.sectors())
        .map(|n| {
            let p = sector_density(orbitals, n)?;
            Ok([0, 1, 2].map(|a| crate::grid::dipole_raw(p.grid(), p.values(), a)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{laplacian_apply, SpatialField};

    fn grid() -> Grid {
        Grid::new_1d(33, 0.3).unwrap()
    }

    fn pseudo_random(seed: u64, len: usize) -> Vec<f64> {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (0..len)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect()
    }

    fn random_orbital(g: Grid, sectors: usize, seed: u64) -> TpOrbital {
        let re = pseudo_random(seed, g.len() * sectors);
        let im = pseudo_random(seed + 99, g.len() * sectors);
        TpOrbital::from_flat(
            g,
            sectors,
            re.iter().zip(&im).map(|(a, b)| C64::new(*a, *b)).collect(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn ladder_commutator_structure() {
        for n_max in 0..6 {
            let c = truncated_commutator(n_max);
            for i in 0..=n_max {
                for j in 0..=n_max {
                    let expected = if i != j {
                        0.0
                    } else if i == n_max {
                        -(n_max as f64)
                    } else {
                        1.0
                    };
                    assert_eq!(c[(i, j)], expected, "N_F={n_max} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn commutator_agrees_with_float_matrices() {
        let a = annihilation_matrix(4);
        let ad = creation_matrix(4);
        let float = &a * &ad - &ad * &a;
        assert!((float - truncated_commutator(4)).abs().max() < 1e-14);
    }

    #[test]
    fn ladder_table_values() {
        let t = LadderTable::new(4);
        assert_eq!(t.sqrt_n[4], 2.0);
        assert_eq!(t.sqrt_n_plus_1[3], 2.0);
        assert_eq!(t.sqrt_n[2], 2f64.sqrt());
    }

    #[test]
    fn decoupled_vacuum_action() {
        let g = grid();
        let fock = FockSpace::new(2, 0.3, [0.0; 3]).unwrap();
        let phi0 = SpatialField::from_fn(g, |r| C64::new((-r[0] * r[0]).exp(), 0.2 * r[0]));
        let orb = TpOrbital::in_sector(&phi0, 3, 0, 1.0);
        let ks = KsPotential::external(RealField::zeros(g));
        let out = apply_hamiltonian(&orb, &ks, 0.0, &fock, [0.0; 3], Stencil::default()).unwrap();
        let lap = laplacian_apply(&phi0, Stencil::default()).unwrap();
        for i in 0..g.len() {
            let expected = lap.values()[i] * -0.5 + phi0.values()[i] * 0.15;
            assert!((out.sector(0)[i] - expected).norm() < 1e-14);
        }
        assert!(out.sector(1).iter().chain(out.sector(2)).all(|v| v.norm() == 0.0));
    }

    #[test]
    fn zero_coupling_is_block_diagonal() {
        let g = grid();
        let fock = FockSpace::new(3, 0.2, [0.0; 3]).unwrap();
        let v = RealField::from_vec(g, pseudo_random(3, g.len())).unwrap();
        let h = CavityHamiltonian::new(g, Stencil::default(), v.values(), 0.1, fock, [0.0; 3]).unwrap();
        let base = random_orbital(g, 4, 11);
        let hbase = h.apply(&base).unwrap();
        let mut changed = base.clone();
        for x in changed.sector_mut(2) {
            *x *= 3.0;
        }
        let hchanged = h.apply(&changed).unwrap();
        for n in [0, 1, 3] {
            assert_eq!(hbase.sector(n), hchanged.sector(n));
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_linear() {
        let g = grid();
        let fock = FockSpace::new(3, 0.08, [0.05, 0.0, 0.0]).unwrap();
        let v = RealField::from_vec(g, pseudo_random(5, g.len())).unwrap();
        let h = CavityHamiltonian::new(g, Stencil::default(), v.values(), 0.02, fock, [0.01, 0.0, 0.0]).unwrap();
        let a = random_orbital(g, 4, 1);
        let b = random_orbital(g, 4, 2);
        let ab = a.overlap(&h.apply(&b).unwrap()).unwrap();
        let ba = b.overlap(&h.apply(&a).unwrap()).unwrap();
        assert!((ab - ba.conj()).norm() / ab.norm() < 1e-12);

        let mut comb = a.clone();
        comb.scale(C64::new(0.3, -1.2));
        comb.axpy(C64::new(2.0, 0.5), &b);
        let lhs = h.apply(&comb).unwrap();
        let mut rhs = h.apply(&a).unwrap();
        rhs.scale(C64::new(0.3, -1.2));
        rhs.axpy(C64::new(2.0, 0.5), &h.apply(&b).unwrap());
        for (x, y) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn mismatched_orbital_is_rejected() {
        let g = grid();
        let fock = FockSpace::new(1, 0.2, [0.0; 3]).unwrap();
        let h = CavityHamiltonian::new(g, Stencil::default(), &vec![0.0; g.len()], 0.0, fock, [0.0; 3]).unwrap();
        assert!(h.apply(&random_orbital(g, 3, 0)).is_err());
        let other = Grid::new_1d(35, 0.3).unwrap();
        assert!(h.apply(&random_orbital(other, 2, 0)).is_err());
    }

    fn gaussian(g: Grid, center: f64) -> SpatialField {
        SpatialField::from_fn(g, |r| C64::new((-(r[0] - center).powi(2) / 2.0).exp(), 0.0))
    }

    #[test]
    fn mu_of_symmetric_and_shifted_densities() {
        let g = Grid::new_1d(201, 0.1).unwrap();
        let fock = FockSpace::new(1, 0.1, [0.05, 0.0, 0.0]).unwrap();
        let mut sym = TpOrbital::in_sector(&gaussian(g, 0.0), 2, 0, 2.0);
        sym.normalize().unwrap();
        let rho = total_density(std::slice::from_ref(&sym)).unwrap();
        assert!(mean_dipole_mu(&rho, &fock).abs() < 1e-12);

        let mut shifted = TpOrbital::in_sector(&gaussian(g, 1.0), 2, 0, 2.0);
        shifted.normalize().unwrap();
        let rho = total_density(std::slice::from_ref(&shifted)).unwrap();
        assert!((mean_dipole_mu(&rho, &fock) - 0.05 * 2.0 * 1.0).abs() < 1e-8);
        assert_eq!(mean_dipole_mu(&rho, &fock.with_lambda([0.0; 3])), 0.0);
    }

    #[test]
    fn occupations_and_q_for_constructed_states() {
        let g = Grid::new_1d(101, 0.2).unwrap();
        let fock = FockSpace::new(1, 0.3, [0.05, 0.0, 0.0]).unwrap();
        let mut vac = TpOrbital::in_sector(&gaussian(g, 0.0), 2, 0, 2.0);
        vac.normalize().unwrap();
        let set = vec![vac.clone(), vac.clone()];
        let p = photon_occupations(&set).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-14 && p[1] == 0.0);
        assert_eq!(q_expectation(&set, &fock), 0.0);

        let mut half = vac.clone();
        half.occupation = 1.0;
        let s0 = half.sector(0).to_vec();
        half.sector_mut(1).copy_from_slice(&s0);
        half.normalize().unwrap();
        let p = photon_occupations(std::slice::from_ref(&half)).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
        let q = q_expectation(std::slice::from_ref(&half), &fock);
        assert!((q - 1.0 / (2.0 * 0.3f64).sqrt()).abs() < 1e-12);

        let mut empty = vac;
        empty.occupation = 0.0;
        assert!(photon_occupations(&[empty]).is_err());
    }

    #[test]
    fn sector_densities_sum_to_total() {
        let g = grid();
        let mut a = random_orbital(g, 3, 7);
        a.occupation = 2.0;
        a.normalize().unwrap();
        let mut b = random_orbital(g, 3, 8);
        b.normalize().unwrap();
        let set = vec![a.clone(), b];
        let rho = total_density(&set).unwrap();
        let mut sum = vec![0.0; g.len()];
        for n in 0..3 {
            let p = sector_density(&set, n).unwrap();
            assert!(p.values().iter().all(|&v| v >= 0.0));
            sum.iter_mut().zip(p.values()).for_each(|(s, v)| *s += v);
        }
        for (s, r) in sum.iter().zip(rho.values()) {
            assert!((s - r).abs() < 1e-14);
        }
        assert!(sector_density(&set, 3).is_err());

        let single = TpOrbital::in_sector(&a.sector_field(0), 3, 0, 2.0);
        let p0 = sector_density(std::slice::from_ref(&single), 0).unwrap();
        for (p, v) in p0.values().iter().zip(single.sector(0)) {
            assert_eq!(*p, 2.0 * v.norm_sqr());
        }
    }
}
