use mpxa::mesh::{
    build_subgrid, generate_mesh, layered_strip, load_mesh, mesh_from_json, mesh_to_json, save_mesh, skewed_quads,
    warped_triangles, Mesh, MeshKind, MeshSpec, Quadrature, SubGrid,
};
use proptest::prelude::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn cartesian_two_by_two() {
    let m = generate_mesh(&MeshSpec::new(MeshKind::Cartesian, 2)).unwrap();
    assert_eq!(m.num_cells(), 4);
    assert_eq!(m.num_faces(), 12);
    assert_eq!(m.num_vertices(), 9);
    assert!(m.cell_volumes.iter().all(|&v| close(v, 0.25, 1e-15)));
}

#[test]
fn triangle_two_by_two() {
    let m = generate_mesh(&MeshSpec::new(MeshKind::Triangle, 2)).unwrap();
    assert_eq!(m.num_cells(), 8);
    assert!(m.cell_volumes.iter().all(|&v| close(v, 0.125, 1e-15)));
}

#[test]
fn perturbed_quads_fine() {
    let m = generate_mesh(&MeshSpec::perturbed(MeshKind::PerturbedQuad, 64, 0.3, 1)).unwrap();
    assert!(close(m.total_volume(), 1.0, 1e-12));
    for k in 0..m.num_cells() {
        let g = m.gauss_residual(k);
        assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12, "cell {k}: {g:?}");
    }
    m.validate().unwrap();
}

#[test]
fn save_load_round_trip() {
    let m = generate_mesh(&MeshSpec::new(MeshKind::Cartesian, 2)).unwrap();
    let dir = std::env::temp_dir().join(format!("mpxa-mesh-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("m.json");
    save_mesh(&m, &path).unwrap();
    let back = load_mesh(&path).unwrap();
    std::fs::remove_dir_all(&dir).ok();
    assert_eq!(back, m);
}

#[test]
fn dangling_vertex_in_file() {
    let json = r#"{"vertices": [[0,0],[1,0],[0,1]], "cells": [[0,1,3]]}"#;
    let e = mesh_from_json(json).unwrap_err();
    assert!(e.to_string().contains("dangling vertex index"), "{e}");
}

#[test]
fn face_shared_by_three_cells() {
    // three triangles hanging off the edge (0, 1)
    let json = r#"{
        "vertices": [[0,0],[1,0],[0.5,1],[0.5,-1],[0.5,2]],
        "cells": [[0,1,2],[1,0,3],[0,1,4]]
    }"#;
    let e = mesh_from_json(json).unwrap_err();
    assert!(e.to_string().contains("non-manifold face"), "{e}");
}

#[test]
fn malformed_json_is_a_file_error() {
    assert!(mesh_from_json("{\"vertices\": 3}").is_err());
}

#[test]
fn eta_zero_uses_face_centers() {
    let m = generate_mesh(&MeshSpec::perturbed(MeshKind::VoronoiPolygon, 6, 0.3, 2)).unwrap();
    let sg = build_subgrid(&m, 0.0, Quadrature::SinglePoint).unwrap();
    for s in &sg.subfaces {
        assert_eq!(s.continuity_point, m.face_centers[s.face]);
    }
}

#[test]
fn eta_third_on_unit_face() {
    // x_σ + η (x_s - x_σ) with x_σ = (1/2, 0), x_s = (0, 0)
    let p = SubGrid::continuity_point([0.5, 0.0], [0.0, 0.0], 1.0 / 3.0);
    assert!(close(p[0], 1.0 / 3.0, 1e-15) && p[1] == 0.0);

    let m = generate_mesh(&MeshSpec::new(MeshKind::Cartesian, 2)).unwrap();
    let sg = build_subgrid(&m, 1.0 / 3.0, Quadrature::SinglePoint).unwrap();
    let f = m
        .faces
        .iter()
        .position(|f| {
            let a = m.vertices[f.vertices[0]];
            let b = m.vertices[f.vertices[1]];
            a[1] == 0.0 && b[1] == 0.0 && a[0].min(b[0]) == 0.0
        })
        .unwrap();
    let origin = m.vertices.iter().position(|v| *v == [0.0, 0.0]).unwrap();
    let s = &sg.subfaces[sg.subface_of(f, origin)];
    assert!(close(s.continuity_point[0], 1.0 / 6.0, 1e-15), "{:?}", s.continuity_point);
}

#[test]
fn eta_outside_range_rejected() {
    let m = generate_mesh(&MeshSpec::new(MeshKind::Cartesian, 2)).unwrap();
    assert!(build_subgrid(&m, 1.0, Quadrature::SinglePoint).is_err());
    assert!(build_subgrid(&m, -0.1, Quadrature::SinglePoint).is_err());
}

#[test]
fn center_vertex_has_four_of_each() {
    let m = generate_mesh(&MeshSpec::new(MeshKind::Cartesian, 2)).unwrap();
    let sg = build_subgrid(&m, 0.0, Quadrature::SinglePoint).unwrap();
    let v = m.vertices.iter().position(|v| *v == [0.5, 0.5]).unwrap();
    assert_eq!(sg.dual_cells[v].subcells.len(), 4);
    assert_eq!(sg.dual_cells[v].subfaces.len(), 4);
}

#[test]
fn quadratic_rule_weights() {
    let m = generate_mesh(&MeshSpec::perturbed(MeshKind::Triangle, 4, 0.2, 9)).unwrap();
    let sg = build_subgrid(&m, 0.0, Quadrature::FullQuadratic).unwrap();
    for s in &sg.subfaces {
        assert_eq!(s.quad.len(), 2);
        let w: f64 = s.quad.iter().map(|q| q.1).sum();
        assert!(close(w, s.area, 1e-15));
    }
}

#[test]
fn special_families_are_valid() {
    let meshes: Vec<Mesh> = vec![
        skewed_quads(8, 4, 1.5).unwrap(),
        warped_triangles(8, 2.0 * std::f64::consts::PI / 3.0).unwrap(),
        layered_strip(8, 10).unwrap(),
    ];
    for m in meshes {
        m.validate().unwrap();
        assert!(close(m.total_volume(), 1.0, 1e-12));
    }
}

fn kind_strategy() -> impl Strategy<Value = MeshKind> {
    prop_oneof![
        Just(MeshKind::Cartesian),
        Just(MeshKind::PerturbedQuad),
        Just(MeshKind::Triangle),
        Just(MeshKind::VoronoiPolygon),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_meshes_satisfy_invariants(
        kind in kind_strategy(),
        n in 2usize..10,
        pert in 0.0f64..0.35,
        seed in 0u64..1000,
        eta in 0.0f64..0.9,
    ) {
        let m = generate_mesh(&MeshSpec::perturbed(kind, n, pert, seed)).unwrap();
        prop_assert!(m.validate().is_ok());
        prop_assert!(close(m.total_volume(), 1.0, 1e-12));
        for k in 0..m.num_cells() {
            let g = m.gauss_residual(k);
            prop_assert!(g[0].abs() < 1e-12 && g[1].abs() < 1e-12);
        }
        for f in &m.faces {
            if let Some(hi) = f.cell_hi {
                prop_assert!(f.cell_lo < hi);
            }
        }

        let sg = build_subgrid(&m, eta, Quadrature::SinglePoint).unwrap();
        // subfaces halve their face
        for f in 0..m.num_faces() {
            let a = sg.subfaces[2 * f].area + sg.subfaces[2 * f + 1].area;
            prop_assert!(close(a, m.face_areas[f], 1e-14));
        }
        // subcells partition their cell
        for k in 0..m.num_cells() {
            let v: f64 = sg.cell_subcells[k].iter().map(|&s| sg.subcells[s].volume).sum();
            prop_assert!(close(v, m.cell_volumes[k], 1e-14));
            prop_assert!(sg.cell_subcells[k].iter().all(|&s| sg.subcells[s].volume > 0.0));
        }
        // dual cells cover every subcell and subface exactly once
        let mut seen_c = vec![0usize; sg.num_subcells()];
        let mut seen_f = vec![0usize; sg.num_subfaces()];
        for dc in &sg.dual_cells {
            dc.subcells.iter().for_each(|&s| seen_c[s] += 1);
            dc.subfaces.iter().for_each(|&s| seen_f[s] += 1);
        }
        prop_assert!(seen_c.iter().all(|&c| c == 1));
        prop_assert!(seen_f.iter().all(|&c| c == 1));
    }

    #[test]
    fn generation_is_deterministic(kind in kind_strategy(), n in 2usize..8, seed in 0u64..100) {
        let spec = MeshSpec::perturbed(kind, n, 0.25, seed);
        let a = generate_mesh(&spec).unwrap();
        let b = generate_mesh(&spec).unwrap();
        prop_assert_eq!(mesh_to_json(&a), mesh_to_json(&b));
        let back = mesh_from_json(&mesh_to_json(&a)).unwrap();
        prop_assert_eq!(back, a);
    }
}
