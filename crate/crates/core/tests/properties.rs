use num_complex::Complex64 as C64;
use proptest::prelude::*;
use qedtp::checkpoint::Checkpoint;
use qedtp::fock::{sector_density, total_density, truncated_commutator, CavityHamiltonian, FockSpace, TpOrbital};
use qedtp::grid::{dot_raw, laplacian_accumulate, Field, Grid, Stencil};
use qedtp::oracle;
use qedtp::potentials::{hartree_potential, Density, PotentialModel};
use qedtp::qedft::PhotonOscillator;
use qedtp::spectra::{charge_transfer_profile, response};

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len).prop_map(|v| v.into_iter().map(|(a, b)| C64::new(a, b)).collect())
}

fn stencil() -> impl Strategy<Value = Stencil> {
    prop::sample::select(vec![3usize, 5, 7, 9]).prop_map(|p| Stencil::new(p).unwrap())
}

/// 1D grid, random cavity, random potential and a pair of random vectors on grid ⊗ Fock.
fn cavity_case() -> impl Strategy<Value = (Grid, Stencil, FockSpace, Vec<f64>, f64, Vec<C64>, Vec<C64>)> {
    (11usize..60, 0.1..0.6f64, 0usize..4, 0.01..1.0f64, -0.2..0.2f64, stencil())
        .prop_flat_map(|(n, h, n_max, omega, lam, st)| {
            let grid = Grid::new_1d(n, h).unwrap();
            let fock = FockSpace::new(n_max, omega, [lam, 0.0, 0.0]).unwrap();
            let len = n * fock.sectors();
            (
                Just(grid),
                Just(st),
                Just(fock),
                prop::collection::vec(-2.0..1.0f64, n),
                -0.5..0.5f64,
                complex_vec(len),
                complex_vec(len),
            )
        })
        .prop_filter("stencil fits grid", |(g, st, ..)| st.check_grid(g).is_ok())
}

fn apply(h: &CavityHamiltonian, x: &[C64]) -> Vec<C64> {
    let mut y = vec![C64::new(0.0, 0.0); x.len()];
    h.apply_raw(x, &mut y);
    y
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn laplacian_is_symmetric(n in 12usize..80, h in 0.05..0.5f64, st in stencil(), seed in complex_vec(160)) {
        let grid = Grid::new_1d(n, h).unwrap();
        prop_assume!(st.check_grid(&grid).is_ok());
        let (x, y) = (&seed[..n], &seed[80..80 + n]);
        let mut lx = vec![C64::new(0.0, 0.0); n];
        let mut ly = lx.clone();
        laplacian_accumulate(&grid, st, x, &mut lx, 1.0);
        laplacian_accumulate(&grid, st, y, &mut ly, 1.0);
        let (a, b) = (dot_raw(x, &ly), dot_raw(&lx, y));
        prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
    }

    #[test]
    fn cavity_hamiltonian_is_hermitian((grid, st, fock, v, mu, x, y) in cavity_case()) {
        let h = CavityHamiltonian::new(grid, st, &v, mu, fock, [0.01, 0.0, 0.0]).unwrap();
        let (hx, hy) = (apply(&h, &x), apply(&h, &y));
        let (a, b) = (dot_raw(&x, &hy), dot_raw(&hx, &y));
        prop_assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn cavity_hamiltonian_is_linear((grid, st, fock, v, mu, x, y) in cavity_case(), a in -2.0..2.0f64, b in -2.0..2.0f64) {
        let h = CavityHamiltonian::new(grid, st, &v, mu, fock, [0.0; 3]).unwrap();
        let (za, zb) = (C64::new(a, 0.3), C64::new(-0.7, b));
        let mix: Vec<C64> = x.iter().zip(&y).map(|(p, q)| za * p + zb * q).collect();
        let lhs = apply(&h, &mix);
        let (hx, hy) = (apply(&h, &x), apply(&h, &y));
        let scale = lhs.iter().map(|z| z.norm()).fold(1.0, f64::max);
        for i in 0..lhs.len() {
            prop_assert!((lhs[i] - (za * hx[i] + zb * hy[i])).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn operator_matches_assembled_matrix((grid, st, fock, v, mu, x, _y) in cavity_case()) {
        let linear = [-0.02, 0.0, 0.0];
        let h = CavityHamiltonian::new(grid, st, &v, mu, fock, linear).unwrap();
        let m = oracle::assemble(&grid, st, &v, mu, &fock, linear).unwrap();
        prop_assert!(m.is_symmetric());
        let mut mx = vec![C64::new(0.0, 0.0); x.len()];
        m.matvec_complex(&x, &mut mx);
        let hx = apply(&h, &x);
        let dev = hx.iter().zip(&mx).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-12 * m.norm_bound().max(1.0), "{}", dev);
    }

    #[test]
    fn truncated_commutator_structure(n_max in 0usize..12) {
        let c = truncated_commutator(n_max);
        for i in 0..=n_max {
            for j in 0..=n_max {
                let want = if i != j { 0.0 } else if i == n_max { -(n_max as f64) } else { 1.0 };
                prop_assert_eq!(c[(i, j)], want);
            }
        }
    }

    #[test]
    fn sector_densities_sum_to_total(n in 8usize..40, sectors in 1usize..4, data in complex_vec(160), occ in 0.5..2.0f64) {
        let grid = Grid::new_1d(n, 0.3).unwrap();
        let orb = TpOrbital::from_flat(grid, sectors, data[..n * sectors].to_vec(), occ).unwrap();
        let mut other = orb.clone();
        other.occupation = 2.0 - 0.5 * occ;
        let orbitals = vec![orb, other];
        let total = total_density(&orbitals).unwrap();
        let parts: Vec<_> = (0..sectors).map(|s| sector_density(&orbitals, s).unwrap()).collect();
        for i in 0..n {
            let sum: f64 = parts.iter().map(|p| p.values()[i]).sum();
            prop_assert!((sum - total.values()[i]).abs() <= 1e-12 * total.values()[i].max(1.0));
        }
    }

    #[test]
    fn hartree_potential_is_positive(weights in prop::collection::vec(0.0..1.0f64, 41), a_ee in 0.5..3.0f64) {
        let grid = Grid::new_1d(41, 0.4).unwrap();
        let rho = Density::new(Field::from_vec(grid, weights).unwrap(), 2.0).unwrap();
        let model = PotentialModel { softening_ee: a_ee, ..PotentialModel::default() };
        let vh = hartree_potential(&rho, &model).unwrap();
        prop_assert!(vh.values().iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn charge_transfer_vanishes_past_the_box(a in prop::collection::vec(0.0..1.0f64, 60), b in prop::collection::vec(0.0..1.0f64, 60)) {
        let grid = Grid::new_1d(60, 0.25).unwrap();
        let normalized = |v: Vec<f64>| {
            let mut d = Density::new(Field::from_vec(grid, v).unwrap(), 3.0).unwrap();
            d.normalize();
            d
        };
        let (ra, rb) = (normalized(a), normalized(b));
        prop_assume!(ra.integral() > 0.0 && rb.integral() > 0.0);
        let ct = charge_transfer_profile(&ra, &rb).unwrap();
        prop_assert!(ct.dq.last().unwrap().abs() < 1e-12);
        let back = charge_transfer_profile(&rb, &ra).unwrap();
        for (x, y) in ct.dq.iter().zip(&back.dq) {
            prop_assert!((x + y).abs() < 1e-14);
        }
    }

    #[test]
    fn response_is_linear_in_the_dipole(
        d1 in prop::collection::vec(-1.0..1.0f64, 64),
        d2 in prop::collection::vec(-1.0..1.0f64, 64),
        c in -3.0..3.0f64,
    ) {
        let t: Vec<f64> = (0..64).map(|i| 0.1 * i as f64).collect();
        let omegas = [0.1, 0.7, 2.3];
        let sum: Vec<f64> = d1.iter().zip(&d2).map(|(a, b)| a + c * b).collect();
        let r1 = response(&t, &d1, 0.01, &omegas, 0.2).unwrap();
        let r2 = response(&t, &d2, 0.01, &omegas, 0.2).unwrap();
        let rs = response(&t, &sum, 0.01, &omegas, 0.2).unwrap();
        for i in 0..omegas.len() {
            let want = r1[i] + c * r2[i];
            prop_assert!((rs[i] - want).norm() <= 1e-9 * want.norm().max(1.0));
        }
    }

    #[test]
    fn undriven_oscillator_keeps_its_energy(q in -1.0..1.0f64, p in -1.0..1.0f64, omega in 0.02..1.0f64, dt in 0.01..0.2f64) {
        let mut osc = PhotonOscillator::new(omega, [0.05, 0.0, 0.0]).unwrap();
        osc.q = q;
        osc.p = p;
        let dipole = [0.4, 0.0, 0.0];
        let drive = osc.project(dipole);
        let e0 = osc.energy(dipole);
        for _ in 0..500 {
            osc.advance(dt, drive, drive);
        }
        prop_assert!((osc.energy(dipole) - e0).abs() <= 1e-12 * e0.max(1.0));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact(n in 5usize..30, n_max in 0usize..3, data in complex_vec(120), it in any::<u64>(), t in -1e3..1e3f64) {
        let grid = Grid::new_1d(n, 0.2).unwrap();
        let fock = FockSpace::along(n_max, 0.3, 0.05, [1.0, 0.0, 0.0]).unwrap();
        let len = n * fock.sectors();
        let orb = TpOrbital::from_flat(grid, fock.sectors(), data[..len].to_vec(), 1.0).unwrap();
        let chk = Checkpoint::new(fock, vec![orb], it, t).unwrap();
        let mut buf = Vec::new();
        chk.write(&mut buf).unwrap();
        let back = Checkpoint::read(buf.as_slice()).unwrap();
        prop_assert_eq!(&back, &chk);
        let mut again = Vec::new();
        back.write(&mut again).unwrap();
        prop_assert_eq!(again, buf);
    }
}
