//! Ground state of the tensor-product Kohn-Sham problem.
//!
//! Each iteration freezes V_KS and μ from the mixed input density, improves
//! every orbital by a few Rayleigh-Ritz steps in a Krylov-like subspace,
//! restores orthogonality sector by sector and mixes the output density
//! back in.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{
    mean_dipole_mu, photon_occupations, q_expectation, total_density, CavityHamiltonian, FockSpace, TpOrbital,
};
use crate::grid::{dot_raw, laplacian_accumulate, Field, Grid};
use crate::potentials::{integrate_product, Density, KsPotential};
use crate::system::System;

/// Sector norm² ratio after/before projection below which orbitals count as dependent.
const DEPENDENCE_TOL: f64 = 1e-20;
const PERTURBATION: f64 = 1e-6;
const MAX_PERTURB_ATTEMPTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Minimizer {
    SteepestDescent,
    ConjugateGradient,
    ImaginaryTime,
}

impl FromStr for Minimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "steepest-descent" => Ok(Minimizer::SteepestDescent),
            "conjugate-gradient" => Ok(Minimizer::ConjugateGradient),
            "imaginary-time" => Ok(Minimizer::ImaginaryTime),
            other => Err(Error::config(format!(
                "unknown minimizer `{other}` (expected steepest-descent, conjugate-gradient or imaginary-time)"
            ))),
        }
    }
}

impl fmt::Display for Minimizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Minimizer::SteepestDescent => "steepest-descent",
            Minimizer::ConjugateGradient => "conjugate-gradient",
            Minimizer::ImaginaryTime => "imaginary-time",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScfConfig {
    pub max_iter: usize,
    pub tol_energy: f64,
    /// L1 norm of the change between input and output density.
    pub tol_density: f64,
    /// Optional bound on the largest orbital residual ‖HΦ - εΦ‖.
    pub tol_residual: Option<f64>,
    pub mixing: f64,
    pub minimizer: Minimizer,
    /// Minimum minimizer steps per density update.
    pub inner_steps: usize,
    /// Initial sector weights w_n; `None` means 10^-n.
    pub weights: Option<Vec<f64>>,
    /// Gaussian width of the orbital seeds; `None` picks one from the ion spread.
    pub seed_width: Option<f64>,
}

impl Default for ScfConfig {
    fn default() -> Self {
        ScfConfig {
            max_iter: 300,
            tol_energy: 1e-8,
            tol_density: 1e-6,
            tol_residual: None,
            mixing: 0.3,
            minimizer: Minimizer::ConjugateGradient,
            inner_steps: 3,
            weights: None,
            seed_width: None,
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.max_iter == 0 {
            errs.push("scf.max_iter must be at least 1".to_string());
        }
        if !(self.tol_energy > 0.0) {
            errs.push("scf.tol_energy must be > 0".to_string());
        }
        if !(self.tol_density > 0.0) {
            errs.push("scf.tol_density must be > 0".to_string());
        }
        if let Some(t) = self.tol_residual {
            if !(t > 0.0) {
                errs.push("scf.tol_residual must be > 0".to_string());
            }
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            errs.push("scf.mixing must lie in (0, 1]".to_string());
        }
        if self.inner_steps == 0 {
            errs.push("scf.inner_steps must be at least 1".to_string());
        }
        if let Some(w) = &self.weights {
            if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                errs.push("scf.weights must be finite and non-negative".to_string());
            }
            if w.iter().all(|&x| x == 0.0) {
                errs.push("scf.weights must not all be zero".to_string());
            }
        }
        if let Some(s) = self.seed_width {
            if !(s > 0.0) {
                errs.push("scf.seed_width must be > 0".to_string());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    /// w_n for n = 0..sectors; missing entries continue the 10^-n decay.
    pub fn sector_weights(&self, sectors: usize) -> Vec<f64> {
        (0..sectors)
            .map(|n| match &self.weights {
                Some(w) if n < w.len() => w[n],
                Some(_) => 0.0,
                None => 10f64.powi(-(n as i32)),
            })
            .collect()
    }
}

/// Energy split into contributions; `total` is their sum in field order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyDecomposition {
    pub kinetic: f64,
    pub external: f64,
    pub hartree: f64,
    pub xc: f64,
    /// Σ_m c_m Σ_n (n+½) ω ⟨φ_mn|φ_mn⟩
    pub photon: f64,
    /// Bilinear -sqrt(ω/2)(λ·r)(a + a⁺) term.
    pub coupling: f64,
    /// ½μ²
    pub dipole_self: f64,
    pub total: f64,
}

impl EnergyDecomposition {
    pub fn parts(&self) -> [(&'static str, f64); 7] {
        [
            ("kinetic", self.kinetic),
            ("external", self.external),
            ("hartree", self.hartree),
            ("xc", self.xc),
            ("photon", self.photon),
            ("coupling", self.coupling),
            ("dipole_self", self.dipole_self),
        ]
    }

    fn sum_parts(&self) -> f64 {
        self.kinetic + self.external + self.hartree + self.xc + self.photon + self.coupling + self.dipole_self
    }
}

/// Total energy of an orbital set, with potentials rebuilt from its own density.
pub fn total_energy(orbitals: &[TpOrbital], system: &System, fock: &FockSpace) -> Result<EnergyDecomposition> {
    let rho = total_density(orbitals)?;
    let ks = system.potentials().build(&rho)?;
    energy_with(orbitals, &rho, &ks, system, fock)
}

fn energy_with(
    orbitals: &[TpOrbital],
    rho: &Density,
    ks: &KsPotential,
    system: &System,
    fock: &FockSpace,
) -> Result<EnergyDecomposition> {
    let grid = *rho.grid();
    let dv = grid.volume_element();
    let stencil = system.stencil();
    let omega = fock.omega();
    let lambda_r = grid.linear_field(fock.lambda());
    let g = -(0.5 * omega).sqrt();

    let mut kinetic = 0.0;
    let mut photon = 0.0;
    let mut coupling = 0.0;
    let mut lap = vec![C64::new(0.0, 0.0); grid.len()];
    for o in orbitals {
        if o.sectors() != fock.sectors() {
            return Err(Error::Usage("orbital Fock truncation differs from the cavity".into()));
        }
        for n in 0..o.sectors() {
            let phi = o.sector(n);
            lap.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
            laplacian_accumulate(&grid, stencil, phi, &mut lap, -0.5);
            kinetic += o.occupation * dot_raw(phi, &lap).re * dv;
            photon += o.occupation * (n as f64 + 0.5) * omega * o.sector_norm_sqr(n);
            if n + 1 < o.sectors() {
                let upper = o.sector(n + 1);
                let c: f64 = phi
                    .iter()
                    .zip(upper)
                    .zip(&lambda_r)
                    .map(|((a, b), l)| (a.conj() * b).re * l)
                    .sum();
                coupling += o.occupation * 2.0 * g * ((n + 1) as f64).sqrt() * c * dv;
            }
        }
    }
    let mu = mean_dipole_mu(rho, fock);
    let mut e = EnergyDecomposition {
        kinetic,
        external: integrate_product(rho.values(), ks.ionic.values(), &grid),
        hartree: ks.hartree_energy(rho),
        xc: ks.e_xc,
        photon,
        coupling,
        dipole_self: 0.5 * mu * mu,
        total: 0.0,
    };
    e.total = e.sum_parts();
    Ok(e)
}

/// Orbital-independent checkerboard with an orbital- and attempt-dependent modulation.
fn perturbation_pattern(grid: &Grid, m: usize, attempt: usize, idx: usize) -> f64 {
    let [ix, iy, iz] = grid.unravel(idx);
    let sign = if (ix + iy + iz) % 2 == 0 { 1.0 } else { -1.0 };
    sign * (1.0 + ((idx * (2 * m + 1) + attempt) % 5) as f64 / 5.0)
}

/// Per-sector modified Gram-Schmidt projection followed by global
/// normalization, which makes the full overlaps (Φ_m|Φ_m') = δ_mm'.
pub fn gram_schmidt_sectorwise(orbitals: &mut [TpOrbital]) -> Result<()> {
    let Some(first) = orbitals.first() else {
        return Ok(());
    };
    for o in orbitals.iter() {
        first.check_compatible(o)?;
    }
    let grid = *first.grid();
    let sectors = first.sectors();
    let dv = grid.volume_element();
    for m in 0..orbitals.len() {
        let (done, rest) = orbitals.split_at_mut(m);
        let current = &mut rest[0];
        for n in 0..sectors {
            let mut attempt = 0;
            loop {
                let before = current.sector_norm_sqr(n);
                let target = current.sector_mut(n);
                for prev in done.iter() {
                    let p = prev.sector(n);
                    let pn = crate::grid::norm_sqr_raw(p);
                    if pn == 0.0 {
                        continue;
                    }
                    let c = dot_raw(p, target) / pn;
                    for (t, v) in target.iter_mut().zip(p) {
                        *t -= c * v;
                    }
                }
                let after = crate::grid::norm_sqr_raw(target) * dv;
                if before == 0.0 || after > DEPENDENCE_TOL * before {
                    break;
                }
                if attempt == MAX_PERTURB_ATTEMPTS {
                    return Err(Error::Numerical(format!(
                        "orbital {m} stays linearly dependent on earlier orbitals in photon sector {n}"
                    )));
                }
                let amp = PERTURBATION * (before / (grid.len() as f64 * dv)).sqrt();
                for (i, t) in target.iter_mut().enumerate() {
                    *t += amp * perturbation_pattern(&grid, m, attempt, i);
                }
                attempt += 1;
            }
        }
        current.normalize()?;
    }
    Ok(())
}

/// Largest |(Φ_m|Φ_m') - δ_mm'|.
pub fn orthonormality_error(orbitals: &[TpOrbital]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, a) in orbitals.iter().enumerate() {
        for (j, b) in orbitals.iter().enumerate().skip(i) {
            let s = a.overlap(b)?;
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((s - target).norm());
        }
    }
    Ok(worst)
}

/// Hermite function multi-indices (nx, ny, nz) in order of total degree.
fn hermite_indices(grid: &Grid, count: usize) -> Vec<[usize; 3]> {
    let active: Vec<usize> = (0..3).filter(|&a| grid.shape()[a] > 1).collect();
    let mut out = Vec::with_capacity(count);
    let mut degree = 0;
    while out.len() < count {
        let mut level = Vec::new();
        let mut push = |idx: [usize; 3]| {
            if idx.iter().sum::<usize>() == degree {
                level.push(idx);
            }
        };
        match active.len() {
            0 => push([0, 0, 0]),
            1 => {
                let mut idx = [0; 3];
                idx[active[0]] = degree;
                push(idx);
            }
            _ => {
                for a in (0..=degree).rev() {
                    for b in (0..=degree - a).rev() {
                        let c = degree - a - b;
                        let mut idx = [0; 3];
                        idx[active[0]] = a;
                        idx[active[1]] = b;
                        if active.len() == 3 {
                            idx[active[2]] = c;
                        } else if c != 0 {
                            continue;
                        }
                        push(idx);
                    }
                }
            }
        }
        if level.is_empty() {
            break;
        }
        out.extend(level);
        degree += 1;
    }
    out.truncate(count);
    out
}

fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Seed orbitals: Hermite-Gaussians about the ion centroid, sector n scaled by w_n.
pub fn init_orbitals(system: &System, fock: &FockSpace, cfg: &ScfConfig) -> Result<Vec<TpOrbital>> {
    cfg.validate()?;
    let grid = system.grid;
    let count = system.occupations.len();
    if count > grid.len() {
        return Err(Error::config(format!(
            "{count} orbitals requested on a grid of {} points",
            grid.len()
        )));
    }
    let ions = &system.ions.ions;
    let mut center = [0.0; 3];
    let mut spread = 0.0;
    if !ions.is_empty() {
        for ion in ions {
            for a in 0..3 {
                center[a] += ion.position[a] / ions.len() as f64;
            }
        }
        spread = (ions
            .iter()
            .map(|ion| (0..3).map(|a| (ion.position[a] - center[a]).powi(2)).sum::<f64>())
            .sum::<f64>()
            / ions.len() as f64)
            .sqrt();
    }
    let width = cfg.seed_width.unwrap_or(1.0 + spread);
    let weights = cfg.sector_weights(fock.sectors());
    let indices = hermite_indices(&grid, count);
    if indices.len() < count {
        return Err(Error::config("not enough independent seed functions for the orbital count"));
    }
    // Each photon raises the Hermite index along the dominant coupling axis,
    // matching the parity the λ·r coupling imposes on sector n.
    let lam = fock.lambda();
    let axis = (0..3).fold(0, |best, a| if lam[a].abs() > lam[best].abs() { a } else { best });
    let mut orbitals = Vec::with_capacity(count);
    for (idx, &occ) in indices.iter().zip(&system.occupations) {
        let mut orb = TpOrbital::zeros(grid, fock.sectors(), occ);
        for (n, w) in weights.iter().enumerate() {
            let mut k = *idx;
            if grid.shape()[axis] > 1 {
                k[axis] += n;
            }
            let seed = Field::from_fn(grid, |r| {
                let mut v = 1.0;
                for a in 0..3 {
                    let x = (r[a] - center[a]) / width;
                    v *= hermite(k[a], x) * (-0.5 * x * x).exp();
                }
                C64::new(v, 0.0)
            });
            for (d, s) in orb.sector_mut(n).iter_mut().zip(seed.values()) {
                *d = s * *w;
            }
        }
        orbitals.push(orb);
    }
    gram_schmidt_sectorwise(&mut orbitals)?;
    Ok(orbitals)
}

/// Lowest Ritz vector of H in span{phi, dirs}; also returns its component outside phi.
fn ritz_update(
    h: &CavityHamiltonian,
    phi: &TpOrbital,
    hphi: &TpOrbital,
    dirs: &[&TpOrbital],
) -> Result<(TpOrbital, Option<TpOrbital>)> {
    let mut basis: Vec<TpOrbital> = vec![phi.clone()];
    let mut hbasis: Vec<TpOrbital> = vec![hphi.clone()];
    for d in dirs {
        let mut v = (*d).clone();
        let start = v.norm_sqr();
        if start == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = b.overlap(&v)?;
                v.axpy(-c, b);
            }
        }
        if v.norm_sqr() <= 1e-24 * start || v.norm_sqr() < 1e-300 {
            continue;
        }
        v.normalize()?;
        hbasis.push(h.apply(&v)?);
        basis.push(v);
    }
    let k = basis.len();
    if k == 1 {
        return Ok((phi.clone(), None));
    }
    // Near-dependent directions leave the projected basis only approximately
    // orthogonal, so the Rayleigh-Ritz problem is solved in the Löwdin basis
    // of the explicit overlap matrix with its null space dropped.
    let mut hm = DMatrix::<C64>::zeros(k, k);
    let mut sm = DMatrix::<C64>::zeros(k, k);
    for i in 0..k {
        for j in i..k {
            let v = basis[i].overlap(&hbasis[j])?;
            let w = basis[j].overlap(&hbasis[i])?.conj();
            let a = 0.5 * (v + w);
            hm[(i, j)] = a;
            hm[(j, i)] = a.conj();
            let o = basis[i].overlap(&basis[j])?;
            sm[(i, j)] = o;
            sm[(j, i)] = o.conj();
        }
        hm[(i, i)] = C64::new(hm[(i, i)].re, 0.0);
        sm[(i, i)] = C64::new(sm[(i, i)].re, 0.0);
    }
    let se = sm.symmetric_eigen();
    let smax = se.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..k).filter(|&i| se.eigenvalues[i] > 1e-10 * smax).collect();
    let mut x = DMatrix::<C64>::zeros(k, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let f = 1.0 / se.eigenvalues[i].sqrt();
        for r in 0..k {
            x[(r, col)] = se.eigenvectors[(r, i)] * f;
        }
    }
    let mut reduced = x.adjoint() * &hm * &x;
    for i in 0..reduced.nrows() {
        for j in i + 1..reduced.ncols() {
            let a = 0.5 * (reduced[(i, j)] + reduced[(j, i)].conj());
            reduced[(i, j)] = a;
            reduced[(j, i)] = a.conj();
        }
        reduced[(i, i)] = C64::new(reduced[(i, i)].re, 0.0);
    }
    let eig = reduced.symmetric_eigen();
    let (imin, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &e)| if e < acc.1 { (i, e) } else { acc });
    let y = eig.eigenvectors.column(imin).into_owned();
    let mut c: Vec<C64> = (&x * y).iter().copied().collect();
    if c[0].norm() > 0.0 {
        let phase = c[0].conj() / c[0].norm();
        c.iter_mut().for_each(|x| *x *= phase);
    }
    let mut dir = TpOrbital::zeros(*phi.grid(), phi.sectors(), phi.occupation);
    for (ci, b) in c.iter().zip(&basis).skip(1) {
        dir.axpy(*ci, b);
    }
    let mut new = phi.clone();
    new.scale(c[0]);
    new.axpy(C64::new(1.0, 0.0), &dir);
    new.normalize()?;
    Ok((new, Some(dir)))
}

/// One minimizer step for every orbital; returns the largest residual norm before the step.
fn minimizer_sweep(
    h: &CavityHamiltonian,
    orbitals: &mut [TpOrbital],
    directions: &mut [Option<TpOrbital>],
    kind: Minimizer,
) -> Result<f64> {
    let snapshot: Vec<TpOrbital> = orbitals.to_vec();
    let tau = 1.0 / h.spectral_bound();
    let results: Vec<Result<(TpOrbital, Option<TpOrbital>, f64)>> = snapshot
        .par_iter()
        .zip(directions.par_iter())
        .map(|(phi, prev)| {
            let hphi = h.apply(phi)?;
            let eps = phi.overlap(&hphi)?.re;
            let mut r = hphi.clone();
            r.axpy(C64::new(-eps, 0.0), phi);
            for other in &snapshot {
                let c = other.overlap(&r)?;
                r.axpy(-c, other);
            }
            let res = r.norm_sqr().sqrt();
            match kind {
                Minimizer::SteepestDescent => {
                    let mut new = phi.clone();
                    new.axpy(C64::new(-tau, 0.0), &r);
                    new.normalize()?;
                    Ok((new, None, res))
                }
                Minimizer::ImaginaryTime => {
                    let (new, _) = ritz_update(h, phi, &hphi, &[&r])?;
                    Ok((new, None, res))
                }
                Minimizer::ConjugateGradient => {
                    let dirs: Vec<&TpOrbital> = std::iter::once(&r).chain(prev.as_ref()).collect();
                    let (new, dir) = ritz_update(h, phi, &hphi, &dirs)?;
                    Ok((new, dir, res))
                }
            }
        })
        .collect();
    let mut worst = 0.0f64;
    for (m, r) in results.into_iter().enumerate() {
        let (new, dir, res) = r?;
        orbitals[m] = new;
        directions[m] = dir;
        worst = worst.max(res);
    }
    gram_schmidt_sectorwise(orbitals)?;
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub delta_energy: f64,
    pub density_change: f64,
    pub residual: f64,
    pub mixing: f64,
    pub photon_occupations: Vec<f64>,
}

impl IterationRecord {
    pub fn tsv_header(sectors: usize) -> String {
        let mut s = String::from("iter\tenergy\tdelta_e\tdelta_rho_l1\tresidual\tmixing");
        for n in 0..sectors {
            s.push_str(&format!("\tP{n}"));
        }
        s
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!(
            "{}\t{:.12e}\t{:.6e}\t{:.6e}\t{:.6e}\t{:.4}",
            self.iteration, self.energy, self.delta_energy, self.density_change, self.residual, self.mixing
        );
        for p in &self.photon_occupations {
            s.push_str(&format!("\t{p:.12e}"));
        }
        s
    }
}

/// What the solver saw when it ran out of iterations.
#[derive(Clone, Debug, PartialEq)]
pub struct NonConvergenceReport {
    pub iterations: usize,
    pub energy_history: Vec<f64>,
    pub last_delta_energy: f64,
    pub last_density_change: f64,
    pub last_residual: f64,
    pub final_mixing: f64,
    pub mixing_halvings: usize,
    /// Sign flips of ΔE over the last (up to) 20 iterations.
    pub recent_sign_changes: usize,
    pub oscillating: bool,
}

impl fmt::Display for NonConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SCF not converged after {} iterations: |dE| = {:.3e}, L1(drho) = {:.3e}, residual = {:.3e}, mixing = {:.4} after {} halvings, {} sign changes of dE in the last iterations{}",
            self.iterations,
            self.last_delta_energy.abs(),
            self.last_density_change,
            self.last_residual,
            self.final_mixing,
            self.mixing_halvings,
            self.recent_sign_changes,
            if self.oscillating { " (oscillating)" } else { "" }
        )
    }
}

#[derive(Clone, Debug)]
pub struct ScfState {
    pub orbitals: Vec<TpOrbital>,
    pub density: Density,
    pub ks: KsPotential,
    pub mu: f64,
    pub fock: FockSpace,
    pub iterations: usize,
    pub energy_history: Vec<f64>,
    pub energy: EnergyDecomposition,
    pub photon_occupations: Vec<f64>,
    pub log: Vec<IterationRecord>,
    pub final_mixing: f64,
}

impl ScfState {
    pub fn q_expectation(&self) -> f64 {
        q_expectation(&self.orbitals, &self.fock)
    }

    /// True when P_n decreases with n; otherwise N_F is too small.
    pub fn truncation_converged(&self) -> bool {
        self.photon_occupations.windows(2).all(|w| w[1] < w[0])
    }

    /// Hamiltonian at the final density, as used to start a propagation.
    pub fn hamiltonian(&self, system: &System) -> Result<CavityHamiltonian> {
        CavityHamiltonian::from_ks(system.stencil(), &self.ks, self.mu, self.fock, [0.0; 3])
    }

    /// Orbital energies ε_m = (Φ_m|H|Φ_m).
    pub fn eigenvalues(&self, system: &System) -> Result<Vec<f64>> {
        let h = self.hamiltonian(system)?;
        self.orbitals.iter().map(|o| h.rayleigh_quotient(o)).collect()
    }
}

fn count_sign_changes(deltas: &[f64]) -> usize {
    deltas.windows(2).filter(|w| w[0] * w[1] < 0.0).count()
}

const DIVERGENCE_RESIDUAL: f64 = 1e-3;
const STALL_WINDOW: usize = 10;
const MAX_INNER_STEPS: usize = 25;
const INNER_RATIO: f64 = 0.1;

fn min_of(xs: &[f64]) -> f64 {
    xs.iter().cloned().fold(f64::INFINITY, f64::min)
}

pub fn scf_solve(system: &System, fock: &FockSpace, cfg: &ScfConfig) -> Result<ScfState> {
    scf_solve_from(system, fock, cfg, None, &mut |_| {})
}

/// Full SCF loop, optionally restarted from given orbitals, reporting each iteration.
pub fn scf_solve_from(
    system: &System,
    fock: &FockSpace,
    cfg: &ScfConfig,
    initial: Option<Vec<TpOrbital>>,
    observer: &mut dyn FnMut(&IterationRecord),
) -> Result<ScfState> {
    cfg.validate()?;
    let stencil = system.stencil();
    let mut orbitals = match initial {
        Some(mut o) => {
            if o.len() != system.occupations.len() {
                return Err(Error::Usage("initial orbital count differs from the occupations".into()));
            }
            for (orb, &c) in o.iter_mut().zip(&system.occupations) {
                if *orb.grid() != system.grid || orb.sectors() != fock.sectors() {
                    return Err(Error::Usage("initial orbitals do not match grid or Fock space".into()));
                }
                orb.occupation = c;
            }
            gram_schmidt_sectorwise(&mut o)?;
            o
        }
        None => init_orbitals(system, fock, cfg)?,
    };
    let mut directions: Vec<Option<TpOrbital>> = vec![None; orbitals.len()];
    let mut rho_in = total_density(&orbitals)?;
    let mut alpha = cfg.mixing;
    let mut halvings = 0;
    let mut last_halving = 0;
    let mut energies: Vec<f64> = Vec::new();
    let mut deltas: Vec<f64> = Vec::new();
    let mut drhos: Vec<f64> = Vec::new();
    let mut log = Vec::new();
    let mut streak = 0;
    let mut h = {
        let ks = system.potentials().build(&rho_in)?;
        CavityHamiltonian::from_ks(stencil, &ks, mean_dipole_mu(&rho_in, fock), *fock, [0.0; 3])?
    };
    let (mut last_de, mut last_drho, mut last_res) = (f64::NAN, f64::NAN, f64::NAN);

    for iter in 1..=cfg.max_iter {
        let ks = system.potentials().build(&rho_in)?;
        h.update(ks.total(), mean_dipole_mu(&rho_in, fock), [0.0; 3]);
        // At least `inner_steps` sweeps, more while the orbitals are still far
        // from solving this potential compared with the last density change.
        let mut residual = 0.0;
        let target = INNER_RATIO * last_drho;
        for step in 0..cfg.inner_steps.max(MAX_INNER_STEPS) {
            let r = minimizer_sweep(&h, &mut orbitals, &mut directions, cfg.minimizer)?;
            if step == 0 {
                residual = r;
            }
            if step + 1 >= cfg.inner_steps && !(r > target) {
                break;
            }
        }
        let ortho = orthonormality_error(&orbitals)?;
        if ortho > 1e-9 {
            return Err(Error::Numerical(format!(
                "orthonormality lost at iteration {iter}: max deviation {ortho:.3e}"
            )));
        }
        let rho_out = total_density(&orbitals)?;
        let ks_out = system.potentials().build(&rho_out)?;
        let energy = energy_with(&orbitals, &rho_out, &ks_out, system, fock)?;
        let e = energy.total;
        let de = energies.last().map_or(f64::INFINITY, |prev| e - prev);
        let drho = rho_in.l1_distance(&rho_out);
        drhos.push(drho);
        energies.push(e);
        if de.is_finite() {
            deltas.push(de);
        }
        if !e.is_finite() {
            return Err(Error::Numerical(format!("energy became non-finite at iteration {iter}")));
        }

        let record = IterationRecord {
            iteration: iter,
            energy: e,
            delta_energy: de,
            density_change: drho,
            residual,
            mixing: alpha,
            photon_occupations: photon_occupations(&orbitals)?,
        };
        observer(&record);
        log.push(record);
        (last_de, last_drho, last_res) = (de, drho, residual);

        let res_ok = cfg.tol_residual.is_none_or(|t| residual < t);
        if de.abs() < cfg.tol_energy && drho < cfg.tol_density && res_ok {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= 2 {
            let mu = mean_dipole_mu(&rho_out, fock);
            let photon_occupations = photon_occupations(&orbitals)?;
            return Ok(ScfState {
                orbitals,
                density: rho_out,
                ks: ks_out,
                mu,
                fock: *fock,
                iterations: iter,
                energy_history: energies,
                energy,
                photon_occupations,
                log,
                final_mixing: alpha,
            });
        }

        // Halve on an alternating energy that is not dying out, on a density
        // change that grew five times in a row while the orbitals already
        // solve the current potential, or on a density change that wandered
        // without progress over a whole window (unstable modes of the mixing
        // map).
        let oscillating = deltas.len() >= 4 && {
            let tail = &deltas[deltas.len() - 4..];
            count_sign_changes(tail) == 3
                && tail.iter().all(|d| d.abs() > cfg.tol_energy)
                && tail[3].abs() > 0.5 * tail[1].abs()
        };
        let diverging = drhos.len() >= 6 && {
            let tail = &drhos[drhos.len() - 6..];
            tail.windows(2).all(|w| w[1] > w[0]) && drho > cfg.tol_density && residual < DIVERGENCE_RESIDUAL
        };
        let stalled = drhos.len() >= 2 * STALL_WINDOW && iter - last_halving >= STALL_WINDOW && {
            let recent = min_of(&drhos[drhos.len() - STALL_WINDOW..]);
            let before = min_of(&drhos[drhos.len() - 2 * STALL_WINDOW..drhos.len() - STALL_WINDOW]);
            let window = &drhos[drhos.len() - STALL_WINDOW..];
            let steady = window.windows(2).all(|w| w[1] < w[0]);
            recent > 0.9 * before && drho > cfg.tol_density && !steady
        };
        if ((oscillating || diverging) && iter - last_halving >= 4) || stalled {
            alpha *= 0.5;
            halvings += 1;
            last_halving = iter;
        }
        let mixed: Vec<f64> = rho_in
            .values()
            .iter()
            .zip(rho_out.values())
            .map(|(a, b)| (1.0 - alpha) * a + alpha * b)
            .collect();
        rho_in = Density::new(Field::from_vec(system.grid, mixed)?, rho_out.electrons())?;
    }

    let tail = &deltas[deltas.len().saturating_sub(20)..];
    let sign_changes = count_sign_changes(tail);
    Err(Error::NonConvergence(Box::new(NonConvergenceReport {
        iterations: cfg.max_iter,
        energy_history: energies,
        last_delta_energy: last_de,
        last_density_change: last_drho,
        last_residual: last_res,
        final_mixing: alpha,
        mixing_halvings: halvings,
        recent_sign_changes: sign_changes,
        oscillating: tail.len() >= 4 && 2 * sign_changes >= tail.len(),
    })))
}
