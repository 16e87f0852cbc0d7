use mpxa::assembly::boundary_data;
use mpxa::mesh::{build_subgrid, generate_mesh, Mesh, MeshKind, MeshSpec, Quadrature};
use mpxa::mpfa::discretize_darcy;
use mpxa::physics::{BoundarySpec, Tensor2, IDENTITY};

fn families(n: usize) -> Vec<(&'static str, Mesh)> {
    vec![
        ("cartesian", generate_mesh(&MeshSpec::new(MeshKind::Cartesian, n)).unwrap()),
        ("perturbed_quad", generate_mesh(&MeshSpec::perturbed(MeshKind::PerturbedQuad, n, 0.3, 7)).unwrap()),
        ("triangle", generate_mesh(&MeshSpec::perturbed(MeshKind::Triangle, n, 0.2, 3)).unwrap()),
        ("voronoi", generate_mesh(&MeshSpec::perturbed(MeshKind::VoronoiPolygon, n, 0.3, 5)).unwrap()),
    ]
}

fn linear_flux_error(mesh: &Mesh, quad: Quadrature, eta: f64, kappa: Tensor2, bc: &BoundarySpec) -> f64 {
    let sg = build_subgrid(mesh, eta, quad).unwrap();
    let k = vec![kappa; mesh.num_cells()];
    let st = discretize_darcy(mesh, &sg, &k, bc).unwrap();
    let grad = [0.7, -1.3];
    let p_exact = |x: [f64; 2]| 0.4 + grad[0] * x[0] + grad[1] * x[1];
    let flux_density = [
        -(kappa[0][0] * grad[0] + kappa[0][1] * grad[1]),
        -(kappa[1][0] * grad[0] + kappa[1][1] * grad[1]),
    ];
    let p: Vec<f64> = mesh.cell_centers.iter().map(|&x| p_exact(x)).collect();
    let g = vec![0.0; 2 * mesh.num_cells()];
    let data = boundary_data(mesh, &sg, bc, 1, |x| vec![p_exact(x)], |_, n| {
        vec![flux_density[0] * n[0] + flux_density[1] * n[1]]
    });
    let q = st.compute_fluxes(&p, &g, &data).unwrap();
    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for f in 0..mesh.num_faces() {
        let n = mesh.face_normals[f];
        let exact = mesh.face_areas[f] * (flux_density[0] * n[0] + flux_density[1] * n[1]);
        err = err.max((q[f] - exact).abs());
        scale = scale.max(exact.abs());
    }
    err / scale
}

#[test]
fn linear_fields_are_exact_on_all_families() {
    let kappa = [[2.0, 0.3], [0.3, 1.0]];
    for (name, mesh) in families(6) {
        let mixed = BoundarySpec::by_face(&mesh, |_, x| {
            if x[0] < 1e-12 { mpxa::mesh::BoundaryTag::Neumann } else { mpxa::mesh::BoundaryTag::Dirichlet }
        });
        for quad in [Quadrature::SinglePoint, Quadrature::FullQuadratic] {
            for bc in [BoundarySpec::dirichlet(&mesh), mixed.clone()] {
                let e = linear_flux_error(&mesh, quad, 0.0, kappa, &bc);
                assert!(e < 1e-10, "{name} {quad:?}: {e}");
            }
        }
    }
}

#[test]
fn triangle_eta_third_symmetry() {
    for (eta, label) in [(1.0 / 3.0, "third")] {
        let mesh = generate_mesh(&MeshSpec::perturbed(MeshKind::Triangle, 6, 0.2, 3)).unwrap();
        let sg = build_subgrid(&mesh, eta, Quadrature::SinglePoint).unwrap();
        let st = discretize_darcy(&mesh, &sg, &vec![IDENTITY; mesh.num_cells()], &BoundarySpec::dirichlet(&mesh)).unwrap();
        let a = st.system_matrix();
        let rel = a.asymmetry() / a.frobenius_norm();
        println!("{label}: {rel:e}");
        assert!(rel < 1e-9);
    }
}
