mod common;

use common::*;
use nalgebra::DMatrix;
use qframes::dynamics::{evolve_exact, fidelity_deficit, Center, HamiltonianSpec, Interaction, Profile};
use qframes::frames::{branch_ensemble, mixed_density_matrix, reduced_density_matrix, trace_distance, DensityMatrix};
use qframes::linalg::eigh;
use qframes::scenarios::partition::{detect_partition, PartitionGeometry};
use qframes::schmidt::{schmidt_decompose, Bipartition};
use qframes::{make_gaussian, tensor_product, CMatrix, Factor, GaussianParams, Grid, Space, StateVector, C64};

fn sigma_x() -> CMatrix {
    CMatrix::from_fn(2, 2, |i, j| C64::new(if i != j { 1.0 } else { 0.0 }, 0.0))
}

fn diag(values: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(values.len(), values.len(), |i, j| C64::new(if i == j { values[i] } else { 0.0 }, 0.0))
}

#[test]
fn propagator_matches_dense_exponential_on_particle_and_levels() {
    let hbar = 0.7;
    let mass = 1.3;
    let grid = Grid::new(8, -4.0, 4.0).unwrap();
    let profile = Profile::Gaussian { strength: 0.8, width: 1.2 };
    let potential: Vec<f64> = grid.points().iter().map(|x| 0.3 * x * x).collect();
    let space = Space::new(vec![Factor::coordinate("x", grid.clone()), Factor::level("q", 2)]).unwrap();
    let h = HamiltonianSpec::new(hbar)
        .with_kinetic("x", mass)
        .with_potential("x", potential.clone())
        .with_internal("q", CMatrix::from_real_diagonal(&[0.0, 1.1]))
        .with_interaction(Interaction {
            particle: "x".into(),
            center: Center::Fixed(0.5),
            profile: profile.clone(),
            operator: Some(sigma_x()),
        });

    let id2 = DMatrix::<C64>::identity(2, 2);
    let sx = to_dense(&sigma_x());
    let f: Vec<f64> = grid.points().iter().map(|x| profile_value(&profile, x - 0.5)).collect();
    let dense = dense_kinetic(&grid, mass, hbar).kronecker(&id2)
        + diag(&potential).kronecker(&id2)
        + DMatrix::<C64>::identity(8, 8).kronecker(&diag(&[0.0, 1.1]))
        + diag(&f).kronecker(&sx);

    let psi0 = random_state(space.clone(), 11);
    let got = evolve_exact(&psi0, &h, 1e-3, 1000, 0).unwrap().final_state;
    let want = from_coefficients(space, &dense_evolve(&dense, &coefficients(&psi0), 1.0, hbar));
    let deficit = fidelity_deficit(&got, &want).unwrap();
    assert!(deficit <= 1e-6, "deficit {deficit}");
}

#[test]
fn propagator_matches_dense_exponential_with_moving_center() {
    let hbar = 1.0;
    let g_r = Grid::new(8, -2.0, 2.0).unwrap();
    let g_x = Grid::new(8, -4.0, 4.0).unwrap();
    let profile = Profile::SmoothBox { strength: -0.6, half_width: 1.5, edge: 0.7 };
    let space = Space::new(vec![
        Factor::coordinate("R", g_r.clone()),
        Factor::level("q", 2),
        Factor::coordinate("x", g_x.clone()),
    ])
    .unwrap();
    let h = HamiltonianSpec::new(hbar)
        .with_kinetic("R", 20.0)
        .with_kinetic("x", 1.0)
        .with_internal("q", CMatrix::from_real_diagonal(&[0.0, 0.5]))
        .with_interaction(Interaction {
            particle: "x".into(),
            center: Center::Factor("R".into()),
            profile: profile.clone(),
            operator: Some(sigma_x()),
        });

    let i2 = DMatrix::<C64>::identity(2, 2);
    let i8 = DMatrix::<C64>::identity(8, 8);
    let mut coupling = DMatrix::<C64>::zeros(128, 128);
    for (a, r) in g_r.points().iter().enumerate() {
        for l in 0..2 {
            for m in 0..2 {
                if l == m {
                    continue;
                }
                for (b, x) in g_x.points().iter().enumerate() {
                    coupling[(a * 16 + l * 8 + b, a * 16 + m * 8 + b)] = C64::new(profile_value(&profile, x - r), 0.0);
                }
            }
        }
    }
    let dense = dense_kinetic(&g_r, 20.0, hbar).kronecker(&i2).kronecker(&i8)
        + i8.kronecker(&i2).kronecker(&dense_kinetic(&g_x, 1.0, hbar))
        + i8.kronecker(&diag(&[0.0, 0.5])).kronecker(&i8)
        + coupling;

    let psi0 = random_state(space.clone(), 5);
    let got = evolve_exact(&psi0, &h, 1e-3, 1000, 0).unwrap().final_state;
    let want = from_coefficients(space, &dense_evolve(&dense, &coefficients(&psi0), 1.0, hbar));
    let deficit = fidelity_deficit(&got, &want).unwrap();
    assert!(deficit <= 1e-6, "deficit {deficit}");
}

fn three_factor_space() -> Space {
    Space::new(vec![
        Factor::coordinate("a", Grid::new(8, -2.0, 2.0).unwrap()),
        Factor::level("q", 3),
        Factor::coordinate("b", Grid::new(8, 0.0, 1.0).unwrap()),
    ])
    .unwrap()
}

#[test]
fn reduced_density_matches_index_summation() {
    let psi = random_state(three_factor_space(), 3);
    for keep in [vec!["a"], vec!["q"], vec!["b"], vec!["a", "q"], vec!["a", "b"], vec!["q", "b"]] {
        let rho = reduced_density_matrix(&psi, &keep).unwrap();
        let want = brute_partial_trace(&psi, &keep);
        let err = max_abs_diff(&to_dense(rho.matrix()), &want);
        assert!(err < 1e-12, "{keep:?}: {err}");
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn schmidt_coefficients_are_reduced_eigenvalue_roots() {
    let space = Space::new(vec![Factor::level("u", 4), Factor::level("v", 3)]).unwrap();
    for seed in 0..5 {
        let psi = random_state(space.clone(), seed);
        let r = schmidt_decompose(&psi, &Bipartition::new(["u"], ["v"]), 0.0).unwrap();
        let eig = hermitian_eigenvalues(&brute_partial_trace(&psi, &["u"]));
        for (j, c) in r.coefficients.iter().enumerate() {
            assert!((c - eig[j].max(0.0).sqrt()).abs() < 1e-10, "seed {seed} j {j}");
        }
        assert!(eig[r.rank()..].iter().all(|e| e.abs() < 1e-12));
    }
}

#[test]
fn schmidt_on_grid_factors_matches_oracle() {
    let psi = random_state(three_factor_space(), 8);
    let cut = Bipartition::new(["q"], ["a", "b"]);
    let r = schmidt_decompose(&psi, &cut, 0.0).unwrap();
    let eig = hermitian_eigenvalues(&brute_partial_trace(&psi, &["q"]));
    for (c, e) in r.coefficients.iter().zip(&eig) {
        assert!((c * c - e).abs() < 1e-12);
    }
}

#[test]
fn mixed_density_matches_direct_summation() {
    let psi = random_state(three_factor_space(), 21);
    let ens = branch_ensemble(&psi, &Bipartition::new(["a"], ["q", "b"])).unwrap();
    for keep in [vec!["a"], vec!["q"], vec!["q", "b"]] {
        let got = mixed_density_matrix(&ens, &keep).unwrap();
        let mut want = DMatrix::<C64>::zeros(got.dim(), got.dim());
        for br in &ens.branches {
            want += brute_partial_trace(&br.state, &keep) * C64::new(br.probability, 0.0);
        }
        let err = max_abs_diff(&to_dense(got.matrix()), &want);
        assert!(err < 1e-12, "{keep:?}: {err}");
    }
}

#[test]
fn trace_distance_matches_dense_oracle() {
    let space = Space::new(vec![Factor::level("u", 3), Factor::level("v", 4)]).unwrap();
    let a = reduced_density_matrix(&random_state(space.clone(), 1), &["v"]).unwrap();
    let b = reduced_density_matrix(&random_state(space, 2), &["v"]).unwrap();
    let want = dense_trace_distance(&to_dense(a.matrix()), &to_dense(b.matrix()));
    assert!((trace_distance(&a, &b).unwrap() - want).abs() < 1e-12);

    let single = Space::new(vec![Factor::level("v", 4)]).unwrap();
    let p = DensityMatrix::pure(&random_state(single.clone(), 3));
    let q = DensityMatrix::pure(&random_state(single, 4));
    assert!((trace_distance(&p, &q).unwrap() - dense_trace_distance(&to_dense(p.matrix()), &to_dense(q.matrix()))).abs() < 1e-12);
}

#[test]
fn jacobi_eigenvalues_match_nalgebra() {
    let mut u = Uniform::new(99);
    for n in [1, 2, 5, 12] {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(u.next(), 0.0);
            for j in i + 1..n {
                let z = C64::new(u.next(), u.next());
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
            }
        }
        let got = eigh(&m, false).values;
        let want = hermitian_eigenvalues(&to_dense(&m));
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12, "n {n}: {g} vs {w}");
        }
    }
}

#[test]
fn partition_leakage_matches_quadrature() {
    let grid = Grid::new(128, -32.0, 32.0).unwrap();
    let packet = |label: &str, x0: f64, sigma: f64| {
        make_gaussian(label, &grid, &GaussianParams::new(x0, 0.0, sigma, 1.0, 1.0).unwrap()).unwrap()
    };
    let q0 = StateVector::basis_level("q", 2, 0).unwrap();
    let q1 = StateVector::basis_level("q", 2, 1).unwrap();
    // Mostly a-inside/b-outside, with wide tails that leak across the edge.
    let main = tensor_product(&[&q0, &packet("a", 2.0, 4.0), &packet("b", 16.0, 2.5)]).unwrap();
    let tail = tensor_product(&[&q1, &packet("a", -4.0, 1.5), &packet("b", -20.0, 2.0)]).unwrap();
    let amps: Vec<C64> =
        main.amplitudes().iter().zip(tail.amplitudes()).map(|(x, y)| x * 0.9 + y * 0.4359).collect();
    let psi = StateVector::normalized(main.space().clone(), amps).unwrap();

    let geometry = PartitionGeometry { a_side: vec!["q".into()], center: 0.0, radius: 10.0, eps: 0.5 };
    let report = detect_partition(&psi, &geometry).unwrap();

    let pts = grid.points();
    let c = psi.amplitudes();
    let dx = grid.dx();
    let inside = |x: f64| x.abs() <= 10.0;
    for cand in &report.candidates {
        let a_absorbed = cand.absorbed.contains(&"a".to_string());
        let b_absorbed = cand.absorbed.contains(&"b".to_string());
        let mut allowed = 0.0;
        for l in 0..2 {
            for (i, xa) in pts.iter().enumerate() {
                for (j, xb) in pts.iter().enumerate() {
                    if inside(*xa) == a_absorbed && inside(*xb) == b_absorbed {
                        allowed += c[l * 128 * 128 + i * 128 + j].norm_sqr() * dx * dx;
                    }
                }
            }
        }
        assert!((cand.leakage - (1.0 - allowed)).abs() < 1e-10, "{:?}", cand.absorbed);
    }
    assert!(report.partition.is_some());
}
