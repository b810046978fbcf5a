//! Brute-force reference solutions for small systems: the cavity Hamiltonian
//! assembled as an explicit sparse matrix, Lanczos ground states with the
//! same mean-field flavor as the main solver, exact-exponential propagation
//! with step halving, and the closed-form harmonic-atom-in-cavity model.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::{mean_dipole_mu, photon_occupations, q_expectation, total_density, FockSpace, TpOrbital};
use crate::grid::{Field, Grid, Stencil};
use crate::potentials::Density;
use crate::scf::{total_energy, EnergyDecomposition};
use crate::system::System;
use crate::tdprop::{delta_kick, run_metadata, sample, FieldProtocol, PropConfig, TimeSeries};

/// Largest matrix dimension the oracle accepts.
pub const MAX_DIMENSION: usize = 20_000;

/// Real symmetric matrix in compressed sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry present") += v;
                continue;
            }
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[row.clone()].binary_search(&c) {
            Ok(k) => self.vals[row.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn matvec_complex(&self, x: &[C64], y: &mut [C64]) {
        for r in 0..self.n {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            y[r] = acc;
        }
    }

    /// Exact equality of every entry with its transpose partner.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).all(|k| self.get(self.cols[k], r) == self.vals[k])
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                m[(r, self.cols[k])] = self.vals[k];
            }
        }
        m
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.n)
            .map(|r| self.vals[self.row_ptr[r]..self.row_ptr[r + 1]].iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// How the dipole self-interaction enters the oracle Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Flavor {
    /// μ(λ·r) with μ = ∫(λ·r)ρ, iterated to self-consistency.
    MeanFieldMu,
    /// μ held at the given value.
    FrozenMu(f64),
    /// One-electron ½(λ·r)² term instead of the mean field (exact Pauli-Fierz).
    ExactSelfInteraction,
}

/// Explicit matrix of the cavity Hamiltonian on grid ⊗ {|0⟩..|N_F⟩},
/// index n·N_grid + i, for local potential `v_ks`, dipole mean field `mu`
/// and external linear field E·r.
pub fn assemble(
    grid: &Grid,
    stencil: Stencil,
    v_ks: &[f64],
    mu: f64,
    fock: &FockSpace,
    linear: [f64; 3],
) -> Result<CsrMatrix> {
    grid.check_len(v_ks.len())?;
    stencil.check_grid(grid)?;
    let p = grid.len();
    let sectors = fock.sectors();
    let dim = p * sectors;
    if dim > MAX_DIMENSION {
        return Err(Error::config(format!(
            "oracle dimension {dim} exceeds the cap of {MAX_DIMENSION}"
        )));
    }
    let coeffs = stencil.coefficients();
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let shape = grid.shape();
    let active: Vec<usize> = (0..3).filter(|&a| shape[a] > 1).collect();
    let lam = fock.lambda();
    let omega = fock.omega();
    let g = (0.5 * omega).sqrt();
    let mut entries = Vec::with_capacity(dim * (1 + active.len() * 2 * (coeffs.len() - 1) + 2));
    for i in 0..p {
        let r = grid.position(i);
        let lr = lam[0] * r[0] + lam[1] * r[1] + lam[2] * r[2];
        let er = linear[0] * r[0] + linear[1] * r[1] + linear[2] * r[2];
        let idx = grid.unravel(i);
        let kinetic_diag = -0.5 * coeffs[0] * inv_h2 * active.len() as f64;
        for n in 0..sectors {
            let row = n * p + i;
            entries.push((row, row, kinetic_diag + v_ks[i] + mu * lr + er + (n as f64 + 0.5) * omega));
            for &a in &active {
                for (s, &c) in coeffs.iter().enumerate().skip(1) {
                    for dir in [-1i64, 1] {
                        let j = idx[a] as i64 + dir * s as i64;
                        if j < 0 || j >= shape[a] as i64 {
                            continue;
                        }
                        let mut nb = idx;
                        nb[a] = j as usize;
                        let col = n * p + grid.index(nb[0], nb[1], nb[2]);
                        entries.push((row, col, -0.5 * c * inv_h2));
                    }
                }
            }
            if n + 1 < sectors {
                let v = -g * ((n + 1) as f64).sqrt() * lr;
                entries.push((row, row + p, v));
                entries.push((row + p, row, v));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(dim, entries))
}

/// Lowest `k` eigenpairs by Lanczos with full reorthogonalization and
/// explicit restarts from the current Ritz vectors.
pub fn lanczos_lowest(a: &CsrMatrix, k: usize, tol: f64, start: Option<&[f64]>) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = a.dim();
    if k == 0 || k > n {
        return Err(Error::Usage(format!("cannot compute {k} eigenpairs of a {n}x{n} matrix")));
    }
    let m = n.min(k + 400);
    let mut v0: Vec<f64> = match start {
        Some(s) if s.len() == n => s.to_vec(),
        _ => (0..n).map(|i| 1.0 + 0.1 * ((i * 7919 % 97) as f64 / 97.0)).collect(),
    };
    let scale = a.norm_bound().max(1e-300);
    let mut w = vec![0.0; n];
    for _restart in 0..200 {
        let norm = dot(&v0, &v0).sqrt();
        if norm == 0.0 {
            return Err(Error::Numerical("Lanczos start vector vanished".into()));
        }
        v0.iter_mut().for_each(|x| *x /= norm);
        let mut basis: Vec<Vec<f64>> = vec![v0.clone()];
        let mut alpha = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for j in 0..m {
            a.matvec(&basis[j], &mut w);
            let aj = dot(&w, &basis[j]);
            alpha.push(aj);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    axpy(-c, b, &mut w);
                }
            }
            let bj = dot(&w, &w).sqrt();
            if j + 1 == m || bj < 1e-14 * scale {
                break;
            }
            // Residual estimate β_j |y_last| of the wanted Ritz pairs.
            if j + 1 >= k && (j + 1) % 10 == 0 && ritz_estimate(&alpha, &beta, bj, k) < 0.1 * tol {
                break;
            }
            beta.push(bj);
            basis.push(w.iter().map(|x| x / bj).collect());
        }
        let size = alpha.len();
        let eig = SymmetricEigen::new(tridiagonal(&alpha, &beta[..size - 1]));
        let mut order: Vec<usize> = (0..size).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        let want = k.min(size);
        let mut values = Vec::with_capacity(want);
        let mut vectors = Vec::with_capacity(want);
        let mut worst = 0.0f64;
        for &c in order.iter().take(want) {
            let mut x = vec![0.0; n];
            for (i, b) in basis.iter().enumerate() {
                axpy(eig.eigenvectors[(i, c)], b, &mut x);
            }
            let nx = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            a.matvec(&x, &mut w);
            let lam = dot(&x, &w);
            axpy(-lam, &x, &mut w);
            worst = worst.max(dot(&w, &w).sqrt());
            values.push(lam);
            vectors.push(x);
        }
        if want == k && worst < tol {
            return Ok((values, vectors));
        }
        v0 = vec![0.0; n];
        for (i, x) in vectors.iter().enumerate() {
            axpy(1.0 / (i + 1) as f64, x, &mut v0);
        }
    }
    Err(Error::Numerical(format!("Lanczos did not reach residual {tol:e}")))
}

fn tridiagonal(alpha: &[f64], beta: &[f64]) -> DMatrix<f64> {
    let size = alpha.len();
    let mut t = DMatrix::<f64>::zeros(size, size);
    for i in 0..size {
        t[(i, i)] = alpha[i];
        if i + 1 < size {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t
}

fn ritz_estimate(alpha: &[f64], beta: &[f64], next: f64, k: usize) -> f64 {
    let eig = SymmetricEigen::new(tridiagonal(alpha, beta));
    let size = alpha.len();
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    order
        .iter()
        .take(k)
        .map(|&c| (next * eig.eigenvectors[(size - 1, c)]).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Lowest eigenpairs of a dense copy, for validating Lanczos on small matrices.
pub fn dense_lowest(a: &CsrMatrix, k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let eig = SymmetricEigen::new(a.to_dense());
    let mut order: Vec<usize> = (0..a.dim()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let vals = order.iter().take(k).map(|&i| eig.eigenvalues[i]).collect();
    let vecs = order
        .iter()
        .take(k)
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (vals, vecs)
}

#[derive(Clone, Debug)]
pub struct OracleGroundState {
    pub orbitals: Vec<TpOrbital>,
    pub eigenvalues: Vec<f64>,
    pub energy: EnergyDecomposition,
    pub photon_occupations: Vec<f64>,
    pub q: f64,
    pub mu: f64,
    pub iterations: usize,
    pub residual: f64,
}

fn vector_to_orbital(grid: Grid, sectors: usize, v: &[f64], occupation: f64) -> Result<TpOrbital> {
    let norm = (dot(v, v) * grid.volume_element()).sqrt();
    let mut data: Vec<C64> = v.iter().map(|&x| C64::new(x / norm, 0.0)).collect();
    // Fix the sign so the largest sector-0 amplitude is positive.
    let p = grid.len();
    let imax = (0..p).max_by(|&i, &j| data[i].re.abs().total_cmp(&data[j].re.abs())).unwrap_or(0);
    if data[imax].re < 0.0 {
        data.iter_mut().for_each(|x| *x = -*x);
    }
    TpOrbital::from_flat(grid, sectors, data, occupation)
}

/// Gaussian at the ion centroid in the vacuum sector, plus odd Hermite
/// components along x when more than one orbital is wanted.
fn start_vector(system: &System, fock: &FockSpace, count: usize) -> Vec<f64> {
    let grid = system.grid;
    let ions = &system.ions.ions;
    let mut c = [0.0; 3];
    for ion in ions {
        for (a, ca) in c.iter_mut().enumerate() {
            *ca += ion.position[a] / ions.len() as f64;
        }
    }
    let mut v = vec![0.0; grid.len() * fock.sectors()];
    for (i, vi) in v.iter_mut().take(grid.len()).enumerate() {
        let r = grid.position(i);
        let d2: f64 = (0..3).map(|a| (r[a] - c[a]).powi(2)).sum();
        let x = (r[0] - c[0]) / 2.0;
        let poly: f64 = (0..count).map(|j| x.powi(j as i32)).sum();
        *vi = poly * (-d2 / 8.0).exp();
    }
    v
}

fn dsi_potential(grid: &Grid, fock: &FockSpace) -> Vec<f64> {
    grid.linear_field(fock.lambda()).iter().map(|l| 0.5 * l * l).collect()
}

/// Self-consistent lowest-eigenvector solution of the same mean-field
/// problem the SCF solves, one eigenvector per occupied orbital.
pub fn ground_state(system: &System, fock: &FockSpace, flavor: Flavor) -> Result<OracleGroundState> {
    let grid = system.grid;
    let count = system.occupations.len();
    let electrons = system.electrons();
    let mut rho = Density::new(
        Field::from_vec(grid, vec![electrons / (grid.len() as f64 * grid.volume_element()); grid.len()])?,
        electrons,
    )?;
    let linear_density = !system.model.hartree
        && system.model.xc == crate::potentials::XcKind::None
        && !matches!(flavor, Flavor::MeanFieldMu);
    let mut start: Option<Vec<f64>> = Some(start_vector(system, fock, count));
    let mut prev_e = f64::INFINITY;
    let mut mixing = 0.5;
    let mut drhos: Vec<f64> = Vec::new();
    let mut last_halving = 0;
    let max_iter = 3000;
    for iter in 1..=max_iter {
        let ks = system.potentials().build(&rho)?;
        let (mu, v) = match flavor {
            Flavor::MeanFieldMu => (mean_dipole_mu(&rho, fock), ks.total().to_vec()),
            Flavor::FrozenMu(m) => (m, ks.total().to_vec()),
            Flavor::ExactSelfInteraction => {
                let dsi = dsi_potential(&grid, fock);
                (0.0, ks.total().iter().zip(&dsi).map(|(a, b)| a + b).collect())
            }
        };
        let h = assemble(&grid, system.stencil(), &v, mu, fock, [0.0; 3])?;
        let (vals, vecs) = lanczos_lowest(&h, count, 1e-11, start.as_deref())?;
        start = Some(vecs[0].clone());
        let orbitals: Vec<TpOrbital> = vecs
            .iter()
            .zip(&system.occupations)
            .map(|(v, &c)| vector_to_orbital(grid, fock.sectors(), v, c))
            .collect::<Result<_>>()?;
        let rho_out = total_density(&orbitals)?;
        let drho = rho.l1_distance(&rho_out);
        let band: f64 = vals.iter().zip(&system.occupations).map(|(e, c)| e * c).sum();
        let converged = linear_density || (drho < 1e-9 && (band - prev_e).abs() < 1e-12);
        drhos.push(drho);
        if converged || iter == max_iter {
            if !converged {
                return Err(Error::Numerical(format!(
                    "oracle mean-field iteration stalled with L1(drho) = {drho:.3e}"
                )));
            }
            let mut energy = total_energy(&orbitals, system, fock)?;
            if let Flavor::ExactSelfInteraction = flavor {
                let dsi = dsi_potential(&grid, fock);
                let e_dsi: f64 =
                    rho_out.values().iter().zip(&dsi).map(|(r, d)| r * d).sum::<f64>() * grid.volume_element();
                energy.total += e_dsi - energy.dipole_self;
                energy.dipole_self = e_dsi;
            }
            let mut residual = 0.0f64;
            let mut w = vec![0.0; h.dim()];
            for (v, e) in vecs.iter().zip(&vals) {
                h.matvec(v, &mut w);
                axpy(-e, v, &mut w);
                residual = residual.max(dot(&w, &w).sqrt());
            }
            return Ok(OracleGroundState {
                photon_occupations: photon_occupations(&orbitals)?,
                q: q_expectation(&orbitals, fock),
                mu,
                orbitals,
                eigenvalues: vals,
                energy,
                iterations: iter,
                residual,
            });
        }
        prev_e = band;
        if drhos.len() >= 4 && iter - last_halving >= 4 && drhos[drhos.len() - 4..].windows(2).all(|w| w[1] > w[0]) {
            mixing *= 0.5;
            last_halving = iter;
        }
        let mixed: Vec<f64> = rho
            .values()
            .iter()
            .zip(rho_out.values())
            .map(|(a, b)| (1.0 - mixing) * a + mixing * b)
            .collect();
        rho = Density::new(Field::from_vec(grid, mixed)?, electrons)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// Normal-mode frequencies (ω₋, ω₊) of x'' = -(ω₀² + λ²)x + ωλq, q'' = -ω²q + ωλx,
/// the one-electron harmonic atom in a single-mode cavity with dipole self-interaction.
pub fn quadratic_normal_modes(omega0: f64, omega: f64, lambda: f64) -> (f64, f64) {
    let a = omega0 * omega0 + lambda * lambda;
    let d = omega * omega;
    let off = omega * lambda;
    let mean = 0.5 * (a + d);
    let disc = (0.25 * (a - d) * (a - d) + off * off).sqrt();
    ((mean - disc).sqrt(), (mean + disc).sqrt())
}

/// Ground energy (ω₋ + ω₊)/2 of the quadratic model.
pub fn quadratic_ground_energy(omega0: f64, omega: f64, lambda: f64) -> f64 {
    let (a, b) = quadratic_normal_modes(omega0, omega, lambda);
    0.5 * (a + b)
}

fn exp_apply(h: &CsrMatrix, x: &[C64], dt: f64) -> Vec<C64> {
    let bound = h.norm_bound();
    let sub = ((bound * dt.abs()).ceil() as usize).max(1);
    let tau = dt / sub as f64;
    let mut cur = x.to_vec();
    let mut term = vec![C64::new(0.0, 0.0); x.len()];
    let mut hterm = term.clone();
    for _ in 0..sub {
        term.copy_from_slice(&cur);
        let mut acc = cur.clone();
        for j in 1..200 {
            h.matvec_complex(&term, &mut hterm);
            let c = C64::new(0.0, -tau / j as f64);
            let mut size = 0.0f64;
            for ((t, ht), a) in term.iter_mut().zip(&hterm).zip(acc.iter_mut()) {
                *t = c * ht;
                *a += *t;
                size = size.max(t.norm());
            }
            if size < 1e-17 {
                break;
            }
        }
        cur = acc;
    }
    cur
}

fn flat(orbitals: &[TpOrbital]) -> Vec<Vec<C64>> {
    orbitals.iter().map(|o| o.as_slice().to_vec()).collect()
}

fn rebuild(template: &[TpOrbital], data: Vec<Vec<C64>>) -> Result<Vec<TpOrbital>> {
    template
        .iter()
        .zip(data)
        .map(|(o, d)| TpOrbital::from_flat(*o.grid(), o.sectors(), d, o.occupation))
        .collect()
}

fn hamiltonian_at(system: &System, fock: &FockSpace, orbitals: &[TpOrbital], linear: [f64; 3]) -> Result<CsrMatrix> {
    let rho = total_density(orbitals)?;
    let ks = system.potentials().build(&rho)?;
    assemble(&system.grid, system.stencil(), ks.total(), mean_dipole_mu(&rho, fock), fock, linear)
}

/// One step with the Hamiltonian taken at the predicted midpoint density.
fn midpoint_step(
    system: &System,
    fock: &FockSpace,
    orbitals: &[TpOrbital],
    t: f64,
    dt: f64,
    protocol: &FieldProtocol,
) -> Result<Vec<TpOrbital>> {
    let h0 = hamiltonian_at(system, fock, orbitals, protocol.field(t))?;
    let half = rebuild(orbitals, flat(orbitals).iter().map(|x| exp_apply(&h0, x, 0.5 * dt)).collect())?;
    let hm = hamiltonian_at(system, fock, &half, protocol.field(t + 0.5 * dt))?;
    rebuild(orbitals, flat(orbitals).iter().map(|x| exp_apply(&hm, x, dt)).collect())
}

fn observables(orbitals: &[TpOrbital], fock: &FockSpace) -> Result<Vec<f64>> {
    let rho = total_density(orbitals)?;
    let mut v: Vec<f64> = [0, 1, 2]
        .iter()
        .map(|&a| crate::grid::dipole_raw(rho.grid(), rho.values(), a))
        .collect();
    v.push(q_expectation(orbitals, fock));
    v.extend(photon_occupations(orbitals)?);
    Ok(v)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn adaptive_step(
    system: &System,
    fock: &FockSpace,
    orbitals: &[TpOrbital],
    t: f64,
    dt: f64,
    protocol: &FieldProtocol,
    tol: f64,
    depth: usize,
) -> Result<Vec<TpOrbital>> {
    let full = midpoint_step(system, fock, orbitals, t, dt, protocol)?;
    let h1 = midpoint_step(system, fock, orbitals, t, 0.5 * dt, protocol)?;
    let h2 = midpoint_step(system, fock, &h1, t + 0.5 * dt, 0.5 * dt, protocol)?;
    if max_diff(&observables(&full, fock)?, &observables(&h2, fock)?) < tol {
        return Ok(h2);
    }
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "exact propagation step halving did not converge at t = {t}"
        )));
    }
    let a = adaptive_step(system, fock, orbitals, t, 0.5 * dt, protocol, tol, depth - 1)?;
    adaptive_step(system, fock, &a, t + 0.5 * dt, 0.5 * dt, protocol, tol, depth - 1)
}

/// Reference trajectory: exact exponentials of the midpoint Hamiltonian,
/// halving each step until observables change by less than `tol`.
pub fn exact_propagate(
    system: &System,
    fock: &FockSpace,
    mut orbitals: Vec<TpOrbital>,
    cfg: &PropConfig,
    tol: f64,
) -> Result<TimeSeries> {
    cfg.validate()?;
    if let FieldProtocol::DeltaKick { strength, axis } = cfg.protocol {
        delta_kick(&mut orbitals, strength, axis);
    }
    let mut ts = TimeSeries {
        meta: run_metadata(cfg, fock, "oracle"),
        ..Default::default()
    };
    ts.push(sample(0.0, &orbitals, system, fock)?);
    for step in 1..=cfg.steps {
        let t = (step - 1) as f64 * cfg.dt;
        orbitals = adaptive_step(system, fock, &orbitals, t, cfg.dt, &cfg.protocol, tol, 8)?;
        if step % cfg.stride == 0 {
            ts.push(sample(step as f64 * cfg.dt, &orbitals, system, fock)?);
        }
    }
    Ok(ts)
}

/// Writes `name<TAB>value` lines after `# key = value` metadata.
pub fn write_golden(meta: &BTreeMap<String, String>, values: &[(String, f64)], mut w: impl Write) -> Result<()> {
    let mut out = String::new();
    for (k, v) in meta {
        writeln!(out, "# {k} = {v}").expect("string write");
    }
    for (k, v) in values {
        writeln!(out, "{k}\t{v:.17e}").expect("string write");
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_golden(r: impl Read) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("golden line {} has no tab", i + 1)))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|e| Error::Format(format!("golden line {}: {e}", i + 1)))?;
        out.insert(k.to_string(), v);
    }
    Ok(out)
}
