use mpxa::assembly::{boundary_data, integrate_source};
use mpxa::linsolve::{assemble, solve_direct, solve_with_nullspace, CsrMatrix};
use mpxa::mesh::{build_subgrid, generate_mesh, MeshKind, MeshSpec, Quadrature};
use mpxa::mpfa::discretize_darcy;
use mpxa::physics::{BoundarySpec, IDENTITY};
use mpxa::{MpxaError, SparseMatrix, Triplets};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn poisson_1d(n: usize) -> SparseMatrix {
    let h = 1.0 / (n + 1) as f64;
    let mut t = Triplets::new(n, n);
    for i in 0..n {
        t.push(i, i, 2.0 / (h * h));
        if i > 0 {
            t.push(i, i - 1, -1.0 / (h * h));
        }
        if i + 1 < n {
            t.push(i, i + 1, -1.0 / (h * h));
        }
    }
    t.finalize().unwrap()
}

#[test]
fn duplicate_triplets_sum() {
    let m = assemble(vec![(0, 0, 1.0), (0, 0, 2.0)], 2, 2).unwrap();
    assert_eq!(m.nnz(), 1);
    assert_eq!(m.get(0, 0), 3.0);
    assert_eq!(m.get(1, 1), 0.0);
}

#[test]
fn empty_stream() {
    let m: SparseMatrix = Triplets::new(4, 3).finalize().unwrap();
    assert_eq!((m.rows(), m.cols(), m.nnz()), (4, 3, 0));
}

#[test]
fn permuted_stream_is_bitwise_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut entries: Vec<(usize, usize, f64)> = (0..1000)
        .map(|_| (rng.random_range(0..20), rng.random_range(0..20), rng.random_range(-1.0..1.0) * 10f64.powi(rng.random_range(-8..8))))
        .collect();
    let mut sorted = entries.clone();
    sorted.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
    let reference = assemble(sorted, 20, 20).unwrap();
    for _ in 0..5 {
        entries.shuffle(&mut rng);
        let m = assemble(entries.clone(), 20, 20).unwrap();
        let a: Vec<u64> = m.iter().map(|(_, _, v)| v.to_bits()).collect();
        let b: Vec<u64> = reference.iter().map(|(_, _, v)| v.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(m.to_coordinate_string(), reference.to_coordinate_string());
    }
}

#[test]
fn out_of_range_index() {
    let mut t = Triplets::new(2, 2);
    t.push(0, 5, 1.0);
    assert!(matches!(t.finalize(), Err(MpxaError::IndexOutOfRange { col: 5, .. })));
}

#[test]
fn unit_vector_through_identity() {
    let a = CsrMatrix::<f64>::identity(5);
    let mut e1 = vec![0.0; 5];
    e1[0] = 1.0;
    assert_eq!(solve_direct(&a, &e1).unwrap().x, e1);
}

#[test]
fn poisson_closed_form() {
    let n = 10;
    let h = 1.0 / (n + 1) as f64;
    let sol = solve_direct(&poisson_1d(n), &vec![1.0; n]).unwrap();
    for (i, x) in sol.x.iter().enumerate() {
        let k = (i + 1) as f64;
        let exact = k * ((n + 1) as f64 - k) * h * h / 2.0;
        assert!((x - exact).abs() < 1e-12, "{i}: {x} vs {exact}");
    }
}

#[test]
fn single_precision_solve() {
    let mut t = mpxa::linsolve::Triplets::<f32>::new(3, 3);
    for i in 0..3 {
        t.push(i, i, 4.0);
        if i > 0 {
            t.push(i, i - 1, -1.0);
            t.push(i - 1, i, -1.0);
        }
    }
    let a = t.finalize().unwrap();
    let x = solve_direct(&a, &[1.0f32, 2.0, 3.0]).unwrap().x;
    let r = a.mul_vec(&x).unwrap();
    for (ri, bi) in r.iter().zip([1.0f32, 2.0, 3.0]) {
        assert!((ri - bi).abs() < 1e-5);
    }
}

#[test]
fn singular_matrix_is_reported() {
    let a = assemble(vec![(0, 0, 1.0), (1, 0, 1.0)], 2, 2).unwrap();
    assert!(solve_direct(&a, &[1.0, 1.0]).is_err());
    assert!(solve_direct(&CsrMatrix::identity(2), &[1.0]).is_err());
}

#[test]
fn nullspace_constrained_solve() {
    // pure Neumann 1D Laplacian, constants in the kernel
    let n = 6;
    let mut t = Triplets::new(n, n);
    for i in 0..n - 1 {
        t.push(i, i, 1.0);
        t.push(i + 1, i + 1, 1.0);
        t.push(i, i + 1, -1.0);
        t.push(i + 1, i, -1.0);
    }
    let a = t.finalize().unwrap();
    let b = vec![1.0, 0.0, 0.0, 0.0, 0.0, -1.0];
    let s = solve_with_nullspace(&a, &b, &[vec![1.0; n]]).unwrap();
    assert!(s.x.iter().sum::<f64>().abs() < 1e-12);
    let r = a.mul_vec(&s.x).unwrap();
    assert!(r.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
}

#[test]
fn darcy_system_residual() {
    let mesh = generate_mesh(&MeshSpec::new(MeshKind::Cartesian, 8)).unwrap();
    let sg = build_subgrid(&mesh, 0.0, Quadrature::SinglePoint).unwrap();
    let bc = BoundarySpec::dirichlet(&mesh);
    let st = discretize_darcy(&mesh, &sg, &vec![IDENTITY; mesh.num_cells()], &bc).unwrap();
    let pi = std::f64::consts::PI;
    let f = integrate_source(&mesh, 1, |x| vec![2.0 * pi * pi * (pi * x[0]).sin() * (pi * x[1]).sin()]);
    let g = vec![0.0; 2 * mesh.num_cells()];
    let data = boundary_data(&mesh, &sg, &bc, 1, |_| vec![0.0], |_, _| vec![0.0]);
    let rhs = st.rhs(&f, &g, &data).unwrap();
    let sol = solve_direct(&st.system_matrix(), &rhs).unwrap();
    assert!(sol.residual <= 1e-9);
}

#[test]
fn coordinate_format_round_trip() {
    let a = poisson_1d(7);
    let text = a.to_coordinate_string();
    assert!(text.starts_with("% 7 7 "));
    let b = CsrMatrix::<f64>::read_coordinate(text.as_bytes()).unwrap();
    assert_eq!(a.to_dense(), b.to_dense());
}

proptest! {
    #[test]
    fn matvec_matches_dense(entries in prop::collection::vec((0usize..6, 0usize..5, -5.0f64..5.0), 0..40),
                            x in prop::collection::vec(-3.0f64..3.0, 5)) {
        let m = assemble(entries.clone(), 6, 5).unwrap();
        let mut dense = vec![0.0; 30];
        for &(i, j, v) in &entries {
            dense[i * 5 + j] += v;
        }
        let y = m.mul_vec(&x).unwrap();
        for i in 0..6 {
            let yi: f64 = (0..5).map(|j| dense[i * 5 + j] * x[j]).sum();
            prop_assert!((y[i] - yi).abs() < 1e-10);
        }
        let t = m.transpose().transpose();
        prop_assert_eq!(t.to_dense(), m.to_dense());
    }
}
