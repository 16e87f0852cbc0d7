//! Interaction-region overlay: subfaces, subcells and dual cells.

use super::{tri_area, Mesh, Point};
use crate::error::{MpxaError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrature {
    /// One point at the continuity point, weight = subface area.
    #[default]
    SinglePoint,
    /// Two Gauss points on the segment from the face center to the vertex.
    FullQuadratic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subface {
    pub face: usize,
    pub vertex: usize,
    pub area: f64,
    pub continuity_point: Point,
    /// Quadrature points and weights; weights sum to `area`.
    pub quad: Vec<(Point, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Subcell {
    pub cell: usize,
    pub vertex: usize,
    pub volume: f64,
    /// Subfaces of the two cell faces meeting at `vertex`: the one before the
    /// vertex in the cell loop, then the one after.
    pub subfaces: [usize; 2],
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct DualCell {
    /// Subcells around the vertex, sorted by cell index.
    pub subcells: Vec<usize>,
    /// Subfaces touching the vertex, sorted by face index.
    pub subfaces: Vec<usize>,
}

/// Subface `2f` holds the first vertex of face `f`, `2f + 1` the second.
/// Subcell `cell_subcells[k][i]` is the part of cell `k` at its `i`-th loop vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct SubGrid {
    pub eta: f64,
    pub quadrature: Quadrature,
    pub subfaces: Vec<Subface>,
    pub subcells: Vec<Subcell>,
    pub cell_subcells: Vec<Vec<usize>>,
    pub dual_cells: Vec<DualCell>,
}

impl SubGrid {
    pub fn num_subfaces(&self) -> usize {
        self.subfaces.len()
    }

    pub fn num_subcells(&self) -> usize {
        self.subcells.len()
    }

    pub fn subface_of(&self, face: usize, vertex: usize) -> usize {
        if self.subfaces[2 * face].vertex == vertex {
            2 * face
        } else {
            2 * face + 1
        }
    }

    /// Continuity point `x_σ + η (x_s - x_σ)`.
    pub fn continuity_point(face_center: Point, vertex: Point, eta: f64) -> Point {
        [
            face_center[0] + eta * (vertex[0] - face_center[0]),
            face_center[1] + eta * (vertex[1] - face_center[1]),
        ]
    }
}

pub fn build_subgrid(mesh: &Mesh, eta: f64, quadrature: Quadrature) -> Result<SubGrid> {
    if !(0.0..1.0).contains(&eta) {
        return Err(MpxaError::InvalidParameter(format!("eta = {eta} outside [0, 1)")));
    }
    let mut subfaces = Vec::with_capacity(2 * mesh.num_faces());
    let g = 0.5 / 3f64.sqrt();
    for (f, face) in mesh.faces.iter().enumerate() {
        let xf = mesh.face_centers[f];
        let half = 0.5 * mesh.face_areas[f];
        for &v in &face.vertices {
            let xs = mesh.vertices[v];
            let continuity_point = SubGrid::continuity_point(xf, xs, eta);
            let quad = match quadrature {
                Quadrature::SinglePoint => vec![(continuity_point, half)],
                Quadrature::FullQuadratic => [0.5 - g, 0.5 + g]
                    .iter()
                    .map(|&t| (SubGrid::continuity_point(xf, xs, t), 0.5 * half))
                    .collect(),
            };
            subfaces.push(Subface { face: f, vertex: v, area: half, continuity_point, quad });
        }
    }

    let mut subcells = Vec::new();
    let mut cell_subcells = Vec::with_capacity(mesh.num_cells());
    let mut dual_cells = vec![DualCell::default(); mesh.num_vertices()];
    for (k, cell) in mesh.cells.iter().enumerate() {
        let n = cell.len();
        let xk = mesh.cell_centers[k];
        let mut ids = Vec::with_capacity(n);
        for i in 0..n {
            let prev = cell[(i + n - 1) % n];
            let s = cell[i];
            let next = cell[(i + 1) % n];
            let p: Point = mesh.vertices[prev];
            let c = mesh.vertices[s];
            let q = mesh.vertices[next];
            let volume = 0.5 * (tri_area(xk, p, c) + tri_area(xk, c, q));
            let f_before = mesh.cell_faces[k][(i + n - 1) % n];
            let f_after = mesh.cell_faces[k][i];
            let sf = |f: usize| if mesh.faces[f].vertices[0] == s { 2 * f } else { 2 * f + 1 };
            ids.push(subcells.len());
            dual_cells[s].subcells.push(subcells.len());
            subcells.push(Subcell {
                cell: k,
                vertex: s,
                volume,
                subfaces: [sf(f_before), sf(f_after)],
            });
        }
        cell_subcells.push(ids);
    }
    for (id, sf) in subfaces.iter().enumerate() {
        dual_cells[sf.vertex].subfaces.push(id);
    }
    // subcells were pushed in cell order and subfaces in face order already
    Ok(SubGrid { eta, quadrature, subfaces, subcells, cell_subcells, dual_cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_mesh, MeshKind, MeshSpec};

    #[test]
    fn interior_cartesian_vertex_has_four_of_each() {
        let m = generate_mesh(&MeshSpec::new(MeshKind::Cartesian, 2)).unwrap();
        let sg = build_subgrid(&m, 0.0, Quadrature::SinglePoint).unwrap();
        let center = m.vertices.iter().position(|p| *p == [0.5, 0.5]).unwrap();
        assert_eq!(sg.dual_cells[center].subcells.len(), 4);
        assert_eq!(sg.dual_cells[center].subfaces.len(), 4);
    }

    #[test]
    fn gauss_points_integrate_quadratics() {
        let m = generate_mesh(&MeshSpec::new(MeshKind::Cartesian, 2)).unwrap();
        let sg = build_subgrid(&m, 0.0, Quadrature::FullQuadratic).unwrap();
        // bottom face of cell 0 runs (0,0)-(0.5,0); subface toward (0,0) is [0, 0.25]
        let s = &sg.subfaces[0];
        let integral: f64 = s.quad.iter().map(|(p, w)| w * p[0] * p[0]).sum();
        assert!((integral - 0.25f64.powi(3) / 3.0).abs() < 1e-15);
    }
}
