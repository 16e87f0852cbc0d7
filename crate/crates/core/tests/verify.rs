use std::f64::consts::PI;

use mpxa::assembly::boundary_data;
use mpxa::linsolve::Triplets;
use mpxa::mesh::{build_subgrid, generate_mesh, skewed_quads, Mesh, MeshKind, MeshSpec, Quadrature};
use mpxa::mpfa::discretize_darcy;
use mpxa::physics::{BoundarySpec, Tensor2, IDENTITY};
use mpxa::verify::*;
use mpxa::{MpxaError, SparseMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD: f64 = 1e-4;

fn fd_grad(f: impl Fn([f64; 2]) -> f64, x: [f64; 2]) -> [f64; 2] {
    [
        (f([x[0] + FD, x[1]]) - f([x[0] - FD, x[1]])) / (2.0 * FD),
        (f([x[0], x[1] + FD]) - f([x[0], x[1] - FD])) / (2.0 * FD),
    ]
}

fn fd_div(f: impl Fn([f64; 2]) -> [f64; 2], x: [f64; 2]) -> f64 {
    (f([x[0] + FD, x[1]])[0] - f([x[0] - FD, x[1]])[0]) / (2.0 * FD)
        + (f([x[0], x[1] + FD])[1] - f([x[0], x[1] - FD])[1]) / (2.0 * FD)
}

/// Total stress rebuilt from differenced displacements.
fn fd_stress(case: &AnalyticCase, x: [f64; 2]) -> Tensor2 {
    let gx = fd_grad(|y| case.u_at(y)[0], x);
    let gy = fd_grad(|y| case.u_at(y)[1], x);
    let (mu, lambda) = (case.params.lame.mu, case.params.lame.lambda);
    let coupled = matches!(case.physics, Physics::Biot | Physics::Thermo);
    let pressure = if coupled { case.params.alpha * (case.p_at(x) + case.phi_at(x)) } else { 0.0 };
    let iso = lambda * (gx[0] + gy[1]) - pressure;
    let s = mu * (gx[1] + gy[0]);
    [[2.0 * mu * gx[0] + iso, s], [s, 2.0 * mu * gy[1] + iso]]
}

fn fd_darcy(case: &AnalyticCase, x: [f64; 2]) -> [f64; 2] {
    let g = fd_grad(|y| case.p_at(y), x);
    let k = case.kappa_at(x);
    [case.g[0] - k[0][0] * g[0] - k[0][1] * g[1], case.g[1] - k[1][0] * g[0] - k[1][1] * g[1]]
}

fn sample_points(n: usize) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    (0..n).map(|_| [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)]).collect()
}

fn assert_close(a: f64, b: f64, scale: f64, what: &str) {
    assert!((a - b).abs() <= 1e-5 * scale.max(1.0), "{what}: {a} vs {b}");
}

#[test]
fn sources_match_differenced_fields() {
    let cases = [
        make_case(CaseName::SmoothDarcy, CaseParams { kappa: [[2.0, 0.5], [0.5, 1.0]], ..Default::default() }).unwrap(),
        make_case(CaseName::SmoothBiot, CaseParams { theta: 0.3, c: 0.7, alpha: 0.8, ..Default::default() }).unwrap(),
        make_case(CaseName::Thermo443, CaseParams::default()).unwrap(),
        make_case(CaseName::Thermo443, CaseParams { advection: false, ..Default::default() }).unwrap(),
        make_case(CaseName::RobustnessLayer, CaseParams::default()).unwrap(),
        make_case(CaseName::Hydrostatic, CaseParams::default()).unwrap(),
    ];
    for case in &cases {
        let theta = case.params.theta;
        for x in sample_points(100) {
            if case.has_u() {
                let fu = case.source_u(x);
                let d0 = fd_div(|y| fd_stress(case, y)[0], x);
                let d1 = fd_div(|y| fd_stress(case, y)[1], x);
                assert_close(fu[0], d0, 50.0, "momentum x");
                assert_close(fu[1], d1, 50.0, "momentum y");
            }
            let div_q = fd_div(|y| fd_darcy(case, y), x);
            let mass = match case.physics {
                Physics::Darcy => div_q,
                Physics::Elasticity => 0.0,
                Physics::Biot | Physics::Thermo => {
                    let div_u = fd_div(|y| case.u_at(y), x);
                    let mut m = case.params.alpha * div_u + case.params.c * case.p_at(x) + theta * div_q;
                    if case.physics == Physics::Thermo {
                        m += case.phi_at(x);
                    }
                    m
                }
            };
            assert_close(case.source_p(x), mass, 50.0, "mass");
            if case.has_phi() {
                let heat = |y: [f64; 2]| {
                    let g = fd_grad(|z| case.phi_at(z), y);
                    let mut t = [-g[0], -g[1]];
                    if case.params.advection {
                        let q = fd_darcy(case, y);
                        t[0] += case.phi_at(y) * q[0];
                        t[1] += case.phi_at(y) * q[1];
                    }
                    t
                };
                let div_u = fd_div(|y| case.u_at(y), x);
                let e = div_u + case.p_at(x) + case.phi_at(x) + theta * fd_div(heat, x);
                assert_close(case.source_phi(x), e, 50.0, "energy");
            }
        }
    }
}

#[test]
fn hydrostatic_state_has_no_flux() {
    let case = make_case(CaseName::Hydrostatic, CaseParams::default()).unwrap();
    for x in sample_points(20) {
        let q = case.darcy_flux(x);
        assert!(q[0].abs() < 1e-15 && q[1].abs() < 1e-15);
    }
    let mesh = generate_mesh(&MeshSpec::perturbed(MeshKind::PerturbedQuad, 8, 0.3, 4)).unwrap();
    let sol = solve_case(&case, &mesh, &DiscOptions::default()).unwrap();
    assert!(sol.q.unwrap().iter().all(|v| v.abs() < 1e-10));
}

#[test]
fn thermo_pressure_sample() {
    let case = make_case(CaseName::Thermo443, CaseParams::default()).unwrap();
    assert!((case.p_at([0.25, 0.5]) - 0.25).abs() < 1e-15);
}

#[test]
fn singular_exponent_for_contrast_hundred() {
    let sector = 2.0 * PI / 3.0;
    let a = singular_exponent(sector, 100.0, 1.0).unwrap();
    assert!((a - 0.75).abs() <= 0.02, "{a}");
    let scale = matching_determinant(0.5, sector, 100.0, 1.0).abs();
    assert!(matching_determinant(a, sector, 100.0, 1.0).abs() < 1e-10 * scale.max(1.0));
    assert_eq!(singular_exponent(sector, 1.0, 1.0).unwrap(), 1.0);
}

#[test]
fn singular_field_matches_across_interfaces() {
    let case = make_case(CaseName::SingularEigestad, CaseParams::default()).unwrap();
    let Some(ScalarField::Singular(s)) = &case.p else { panic!("singular field expected") };
    let c = s.center;
    for r in [0.05, 0.2, 0.4] {
        for ray in [s.sector, 2.0 * PI] {
            let at = |phi: f64| [c[0] + r * phi.cos(), c[1] + r * phi.sin()];
            let (a, b) = (at(ray - 1e-9), at(ray + 1e-9));
            assert!((s.value(a) - s.value(b)).abs() < 1e-6);
            // normal flux on the ray
            let n = [-ray.sin(), ray.cos()];
            let fa = s.permeability(a) * (s.grad(a)[0] * n[0] + s.grad(a)[1] * n[1]);
            let fb = s.permeability(b) * (s.grad(b)[0] * n[0] + s.grad(b)[1] * n[1]);
            assert!((fa - fb).abs() < 1e-5 * fa.abs().max(1.0), "{fa} vs {fb}");
        }
    }
    // harmonic inside each region
    for phi in [0.5, 1.5, 3.0, 5.0] {
        let x = [c[0] + 0.3 * f64::cos(phi), c[1] + 0.3 * f64::sin(phi)];
        let lap = fd_div(|y| fd_grad(|z| s.value(z), y), x);
        assert!(lap.abs() < 1e-4, "{lap}");
    }
    let smooth = make_case(CaseName::SingularEigestad, CaseParams { contrast: 1.0, ..Default::default() }).unwrap();
    let Some(ScalarField::Singular(s1)) = &smooth.p else { panic!() };
    assert_eq!(s1.alpha, 1.0);
}

#[test]
fn case_names_round_trip() {
    for name in CaseName::ALL {
        let parsed: CaseName = name.to_string().parse().unwrap();
        assert_eq!(parsed, name);
    }
    assert!("nope".parse::<CaseName>().is_err());
}

fn exact_solution(case: &AnalyticCase, mesh: &Mesh) -> NumericalSolution {
    let nf = mesh.num_faces();
    let c = &mesh.cell_centers;
    let integrate = |f: &dyn Fn([f64; 2]) -> [f64; 2]| -> Vec<f64> {
        (0..nf)
            .map(|i| {
                let (t, n) = (f(mesh.face_centers[i]), mesh.face_normals[i]);
                mesh.face_areas[i] * (t[0] * n[0] + t[1] * n[1])
            })
            .collect()
    };
    let w: Vec<f64> = (0..nf)
        .flat_map(|i| {
            let s = case.stress(mesh.face_centers[i]);
            let n = mesh.face_normals[i];
            let m = mesh.face_areas[i];
            [m * (s[0][0] * n[0] + s[0][1] * n[1]), m * (s[1][0] * n[0] + s[1][1] * n[1])]
        })
        .collect();
    NumericalSolution {
        u: Some(c.iter().flat_map(|&x| case.u_at(x)).collect()),
        p: Some(c.iter().map(|&x| case.p_at(x)).collect()),
        phi: Some(c.iter().map(|&x| case.phi_at(x)).collect()),
        q: Some(integrate(&|x| case.darcy_flux(x))),
        w: Some(w),
        q_phi: Some(integrate(&|x| case.heat_flux(x))),
        dofs: 4 * mesh.num_cells(),
        picard_iterations: 1,
    }
}

#[test]
fn exact_samples_have_zero_error() {
    let case = make_case(CaseName::Thermo443, CaseParams::default()).unwrap();
    let mesh = generate_mesh(&MeshSpec::perturbed(MeshKind::VoronoiPolygon, 6, 0.3, 2)).unwrap();
    let r = error_metrics(&case, &mesh, &exact_solution(&case, &mesh), 1.0 / 6.0).unwrap();
    for (name, v) in ErrorReport::COLUMNS.iter().zip(r.values()) {
        assert!(v.abs() < 1e-14, "{name}: {v}");
    }
}

#[test]
fn constant_shift_only_moves_the_plain_norm() {
    let case = make_case(CaseName::SmoothDarcy, CaseParams::default()).unwrap();
    let mesh = generate_mesh(&MeshSpec::perturbed(MeshKind::Triangle, 6, 0.2, 2)).unwrap();
    let mut sol = exact_solution(&case, &mesh);
    sol.p.as_mut().unwrap().iter_mut().for_each(|v| *v += 3.0);
    let r = error_metrics(&case, &mesh, &sol, 1.0 / 6.0).unwrap();
    assert!(r.eps_p > 0.1);
    assert!(r.eps_p_semi < 1e-13, "{}", r.eps_p_semi);
}

/// Straightforward re-evaluation of the norms on perturbed samples.
#[test]
fn metrics_agree_with_direct_evaluation() {
    let case = make_case(CaseName::SmoothBiot, CaseParams { theta: 0.5, c: 2.0, ..Default::default() }).unwrap();
    let mesh = generate_mesh(&MeshSpec::perturbed(MeshKind::PerturbedQuad, 7, 0.3, 8)).unwrap();
    let exact = exact_solution(&case, &mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut noisy = exact.clone();
    for v in [&mut noisy.u, &mut noisy.p, &mut noisy.q, &mut noisy.w] {
        v.as_mut().unwrap().iter_mut().for_each(|x| *x += 0.01 * rng.random_range(-1.0..1.0));
    }
    noisy.phi = None;
    noisy.q_phi = None;
    let r = error_metrics(&case, &mesh, &noisy, 0.1).unwrap();

    let vol = &mesh.cell_volumes;
    let rel = |num: &[f64], ex: &[f64], wt: &dyn Fn(usize) -> f64| {
        let mut e = 0.0;
        let mut n = 0.0;
        for i in 0..num.len() {
            e += wt(i) * (num[i] - ex[i]) * (num[i] - ex[i]);
            n += wt(i) * ex[i] * ex[i];
        }
        (e / n).sqrt()
    };
    let (ue, pe, qe, we) = (
        exact.u.as_ref().unwrap(),
        exact.p.as_ref().unwrap(),
        exact.q.as_ref().unwrap(),
        exact.w.as_ref().unwrap(),
    );
    let eps_u = rel(noisy.u.as_ref().unwrap(), ue, &|i| vol[i / 2]);
    let eps_p = rel(noisy.p.as_ref().unwrap(), pe, &|i| vol[i]);
    // integrated face values compare directly with m² weights on densities
    let eps_q = rel(noisy.q.as_ref().unwrap(), qe, &|_| 1.0);
    let eps_pi = rel(noisy.w.as_ref().unwrap(), we, &|_| 1.0);
    let p = noisy.p.as_ref().unwrap();
    let total: f64 = vol.iter().sum();
    let mean = (0..p.len()).map(|k| vol[k] * (p[k] - pe[k])).sum::<f64>() / total;
    let shifted: Vec<f64> = p.iter().map(|v| v - mean).collect();
    let eps_semi = rel(&shifted, pe, &|i| vol[i]);
    let (theta, c) = (0.5, 2.0);
    let checks = [
        (r.eps_u, eps_u),
        (r.eps_p, eps_p),
        (r.eps_q, eps_q),
        (r.eps_pi, eps_pi),
        (r.eps_p_semi, eps_semi),
        (r.eps_up, eps_u + c * eps_p),
        (r.eps_sigma, eps_u + eps_pi + (theta + c) * eps_p + theta * eps_q + eps_semi),
    ];
    for (a, b) in checks {
        assert!((a - b).abs() <= 1e-14 * b.max(1e-300), "{a} vs {b}");
    }
}

#[test]
fn rate_fit_on_exact_power_law() {
    let h = [0.25, 0.125, 0.0625];
    let e: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
    assert!((fit_rate(&h, &e) - 1.5).abs() < 1e-12);
    assert!(fit_rate(&h, &[1.0, 0.0, 1.0]).is_nan());
}

fn cartesian(n: usize) -> Mesh {
    generate_mesh(&MeshSpec::new(MeshKind::Cartesian, n)).unwrap()
}

#[test]
fn two_point_matches_multipoint_on_cartesian() {
    let mesh = cartesian(6);
    let sg = build_subgrid(&mesh, 0.0, Quadrature::SinglePoint).unwrap();
    let k = vec![IDENTITY; mesh.num_cells()];
    let bc = BoundarySpec::by_face(&mesh, |_, x| {
        if x[0] > 1.0 - 1e-12 {
            mpxa::mesh::BoundaryTag::Neumann
        } else {
            mpxa::mesh::BoundaryTag::Dirichlet
        }
    });
    let t = tpfa_reference(&mesh, &k, &bc).unwrap();
    let m = discretize_darcy(&mesh, &sg, &k, &bc).unwrap();
    let diff = |a: &SparseMatrix, b: &SparseMatrix| a.add_scaled(b, -1.0).unwrap().max_abs();
    assert!(diff(&t.q_p, &m.q_p) < 1e-12);
    assert!(diff(&t.q_bc, &m.q_bc) < 1e-12);
    assert!(diff(&t.system_matrix(), &m.system_matrix()) < 1e-12);
}

#[test]
fn two_point_is_exact_for_diagonal_anisotropy() {
    let mesh = cartesian(8);
    let sg = build_subgrid(&mesh, 0.0, Quadrature::SinglePoint).unwrap();
    let kappa = [[1.0, 0.0], [0.0, 1000.0]];
    let bc = BoundarySpec::dirichlet(&mesh);
    let st = tpfa_reference(&mesh, &vec![kappa; mesh.num_cells()], &bc).unwrap();
    let p = |x: [f64; 2]| 0.3 + 2.0 * x[0] - 0.5 * x[1];
    let data = boundary_data(&mesh, &sg, &bc, 1, |x| vec![p(x)], |_, _| vec![0.0]);
    let pc: Vec<f64> = mesh.cell_centers.iter().map(|&x| p(x)).collect();
    let q = st.compute_fluxes(&pc, &vec![0.0; 2 * mesh.num_cells()], &data).unwrap();
    for f in 0..mesh.num_faces() {
        let n = mesh.face_normals[f];
        let exact = mesh.face_areas[f] * (-2.0 * n[0] + 500.0 * n[1]);
        assert!((q[f] - exact).abs() < 1e-9 * 500.0, "face {f}: {} vs {exact}", q[f]);
    }
}

#[test]
fn two_point_stalls_on_skewed_grids() {
    let case = make_case(CaseName::SmoothDarcy, CaseParams::default()).unwrap();
    let grid = GridFamily::Skewed { skew: 1.0 };
    let mp = convergence_study(&case, &grid, &[3, 4, 5], &DiscOptions::default()).unwrap();
    let tp = convergence_study(&case, &grid, &[3, 4, 5], &DiscOptions { tpfa: true, ..Default::default() }).unwrap();
    assert!(mp.rates.eps_q > 1.0, "{}", mp.rates.eps_q);
    assert!(tp.rates.eps_q < 0.5, "{}", tp.rates.eps_q);
}

fn poisson_1d(n: usize) -> SparseMatrix {
    let mut t = Triplets::new(n, n);
    for i in 0..n {
        t.push(i, i, 2.0);
        if i > 0 {
            t.push(i, i - 1, -1.0);
            t.push(i - 1, i, -1.0);
        }
    }
    t.finalize().unwrap()
}

#[test]
fn monotone_examples() {
    let r = monotonicity_check(&poisson_1d(20), MonotonicityMode::InversePositivity).unwrap();
    assert!(r.m_matrix);
    assert_eq!(r.class, Some(MonotoneClass::MMatrix));
    assert!(r.min_inverse.unwrap() > 0.0);

    let mesh = cartesian(8);
    let sg = build_subgrid(&mesh, 0.0, Quadrature::SinglePoint).unwrap();
    let st = discretize_darcy(&mesh, &sg, &vec![IDENTITY; 64], &BoundarySpec::dirichlet(&mesh)).unwrap();
    let r = monotonicity_check(&st.system_matrix(), MonotonicityMode::MMatrix).unwrap();
    assert!(r.m_matrix);

    let mesh = skewed_quads(40, 4, 3.0).unwrap();
    let sg = build_subgrid(&mesh, 0.0, Quadrature::SinglePoint).unwrap();
    let k = vec![[[1.0, 0.0], [0.0, 100.0]]; mesh.num_cells()];
    let st = discretize_darcy(&mesh, &sg, &k, &BoundarySpec::dirichlet(&mesh)).unwrap();
    let r = monotonicity_check(&st.system_matrix(), MonotonicityMode::InversePositivity).unwrap();
    assert_eq!(r.class, Some(MonotoneClass::NonMonotone));
    assert!(r.min_inverse.unwrap() < 0.0);
}

#[test]
fn dense_inverse_is_capped() {
    let e = monotonicity_check(&poisson_1d(DENSE_INVERSE_CAP + 1), MonotonicityMode::InversePositivity).unwrap_err();
    assert!(matches!(e, MpxaError::SizeCap { .. }));
}

#[test]
fn rate_table_csv_layout() {
    let case = make_case(CaseName::SmoothDarcy, CaseParams::default()).unwrap();
    let t = convergence_study(&case, &GridFamily::generated(MeshKind::Cartesian, 0.0), &[2, 3, 4], &DiscOptions::default())
        .unwrap();
    let csv = t.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("level,h,dofs,"));
    assert!(lines[4].starts_with("rate,,"));
    let cols = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == cols));
    assert!(convergence_study(&case, &GridFamily::generated(MeshKind::Cartesian, 0.0), &[2, 3], &DiscOptions::default())
        .is_err());
}
