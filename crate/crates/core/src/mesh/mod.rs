//! Polygonal primal grids in 2D and the interaction-region overlay.
//!
//! Conventions:
//! - cells are counter-clockwise vertex loops; `cell_faces[k][i]` is the face
//!   between `cells[k][i]` and `cells[k][i + 1]`;
//! - every face is stored once, with `cell_lo < cell_hi`, its vertex pair in
//!   the order of `cell_lo`'s loop, and its unit normal pointing out of
//!   `cell_lo`;
//! - boundary faces have `cell_hi == None` and carry a [`BoundaryTag`].

mod generate;
mod io;
mod subgrid;

pub use generate::{generate_mesh, layered_strip, skewed_quads, warped_triangles, MeshKind, MeshSpec};
pub use io::{load_mesh, mesh_from_json, mesh_to_json, save_mesh, MeshFile};
pub use subgrid::{build_subgrid, DualCell, Quadrature, SubGrid, Subcell, Subface};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{MpxaError, Result};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
}

/// How the cell center `x_k` is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CenterRule {
    /// Vertex average, falling back to the area centroid when the cell is not
    /// star-shaped with respect to the average.
    #[default]
    VertexAverage,
    AreaCentroid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub cell_lo: usize,
    pub cell_hi: Option<usize>,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.cell_hi.is_none()
    }

    /// +1 if the face normal points out of `cell`, -1 if into it.
    pub fn sign_for(&self, cell: usize) -> f64 {
        if cell == self.cell_lo {
            1.0
        } else {
            -1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub faces: Vec<Face>,
    pub cell_faces: Vec<Vec<usize>>,
    pub cell_centers: Vec<Point>,
    pub face_centers: Vec<Point>,
    pub face_normals: Vec<Point>,
    pub face_areas: Vec<f64>,
    pub cell_volumes: Vec<f64>,
    /// One entry per face; `None` for interior faces.
    pub boundary_tags: Vec<Option<BoundaryTag>>,
    pub center_rule: CenterRule,
}

pub(crate) fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

pub(crate) fn cross(a: Point, b: Point) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

pub(crate) fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

pub(crate) fn tri_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * cross(sub(b, a), sub(c, a))
}

fn polygon_area(pts: &[Point]) -> f64 {
    let n = pts.len();
    (0..n).map(|i| cross(pts[i], pts[(i + 1) % n])).sum::<f64>() * 0.5
}

fn polygon_centroid(pts: &[Point]) -> Point {
    let n = pts.len();
    let (mut cx, mut cy, mut a) = (0.0, 0.0, 0.0);
    // shift for round-off
    let o = pts[0];
    for i in 0..n {
        let p = sub(pts[i], o);
        let q = sub(pts[(i + 1) % n], o);
        let c = cross(p, q);
        a += c;
        cx += (p[0] + q[0]) * c;
        cy += (p[1] + q[1]) * c;
    }
    [o[0] + cx / (3.0 * a), o[1] + cy / (3.0 * a)]
}

/// True when every fan triangle `(center, v_i, v_{i+1})` has positive area.
pub(crate) fn is_star_shaped(pts: &[Point], center: Point) -> bool {
    let n = pts.len();
    let scale = polygon_area(pts).abs().max(f64::MIN_POSITIVE);
    (0..n).all(|i| tri_area(center, pts[i], pts[(i + 1) % n]) > 1e-14 * scale)
}

fn vertex_average(pts: &[Point]) -> Point {
    let n = pts.len() as f64;
    let s = pts.iter().fold([0.0, 0.0], |acc, p| [acc[0] + p[0], acc[1] + p[1]]);
    [s[0] / n, s[1] / n]
}

impl Mesh {
    /// Build a mesh from vertex coordinates and counter-clockwise cell loops.
    ///
    /// `boundary` assigns tags to boundary faces given by their vertex pair;
    /// untagged boundary faces default to Dirichlet.
    pub fn from_polygons(
        vertices: Vec<Point>,
        cells: Vec<Vec<usize>>,
        boundary: &[([usize; 2], BoundaryTag)],
        center_rule: CenterRule,
    ) -> Result<Self> {
        let nv = vertices.len();
        let mut used = vec![false; nv];
        for (k, cell) in cells.iter().enumerate() {
            if cell.len() < 3 {
                return Err(MpxaError::InvalidMesh(format!("cell {k} has fewer than 3 vertices")));
            }
            for &v in cell {
                if v >= nv {
                    return Err(MpxaError::InvalidMesh(format!(
                        "dangling vertex index {v} in cell {k}"
                    )));
                }
                used[v] = true;
            }
            let mut sorted = cell.clone();
            sorted.sort_unstable();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(MpxaError::InvalidMesh(format!("cell {k} repeats a vertex")));
            }
            let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            if polygon_area(&pts) <= 0.0 {
                return Err(MpxaError::InvalidMesh(format!(
                    "cell {k} is clockwise or degenerate"
                )));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(MpxaError::InvalidMesh(format!("vertex {v} is not used by any cell")));
        }

        let mut faces: Vec<Face> = Vec::new();
        let mut cell_faces: Vec<Vec<usize>> = Vec::with_capacity(cells.len());
        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, cell) in cells.iter().enumerate() {
            let n = cell.len();
            let mut cf = Vec::with_capacity(n);
            for i in 0..n {
                let (a, b) = (cell[i], cell[(i + 1) % n]);
                let key = (a.min(b), a.max(b));
                match edge_map.get(&key) {
                    None => {
                        edge_map.insert(key, faces.len());
                        cf.push(faces.len());
                        faces.push(Face { vertices: [a, b], cell_lo: k, cell_hi: None });
                    }
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.cell_hi.is_some() {
                            return Err(MpxaError::InvalidMesh(format!(
                                "non-manifold face ({}, {}) shared by more than two cells",
                                key.0, key.1
                            )));
                        }
                        if face.vertices == [a, b] {
                            return Err(MpxaError::InvalidMesh(format!(
                                "inconsistent orientation on face ({}, {})",
                                key.0, key.1
                            )));
                        }
                        if face.cell_lo == k {
                            return Err(MpxaError::InvalidMesh(format!("cell {k} repeats an edge")));
                        }
                        face.cell_hi = Some(k);
                        cf.push(f);
                    }
                }
            }
            cell_faces.push(cf);
        }

        let mut boundary_tags: Vec<Option<BoundaryTag>> = faces
            .iter()
            .map(|f| if f.is_boundary() { Some(BoundaryTag::Dirichlet) } else { None })
            .collect();
        for &(pair, tag) in boundary {
            let key = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            match edge_map.get(&key) {
                Some(&f) if faces[f].is_boundary() => boundary_tags[f] = Some(tag),
                _ => {
                    return Err(MpxaError::InvalidMesh(format!(
                        "boundary entry ({}, {}) is not a boundary face",
                        pair[0], pair[1]
                    )))
                }
            }
        }

        let mut mesh = Mesh {
            vertices,
            cells,
            faces,
            cell_faces,
            cell_centers: Vec::new(),
            face_centers: Vec::new(),
            face_normals: Vec::new(),
            face_areas: Vec::new(),
            cell_volumes: Vec::new(),
            boundary_tags,
            center_rule,
        };
        mesh.compute_geometry()?;
        Ok(mesh)
    }

    fn compute_geometry(&mut self) -> Result<()> {
        self.cell_volumes.clear();
        self.cell_centers.clear();
        for (k, cell) in self.cells.iter().enumerate() {
            let pts: Vec<Point> = cell.iter().map(|&v| self.vertices[v]).collect();
            self.cell_volumes.push(polygon_area(&pts));
            let center = match self.center_rule {
                CenterRule::VertexAverage => {
                    let avg = vertex_average(&pts);
                    if is_star_shaped(&pts, avg) {
                        avg
                    } else {
                        polygon_centroid(&pts)
                    }
                }
                CenterRule::AreaCentroid => polygon_centroid(&pts),
            };
            if !is_star_shaped(&pts, center) {
                return Err(MpxaError::InvalidMesh(format!(
                    "cell {k} is not star-shaped with respect to its center"
                )));
            }
            self.cell_centers.push(center);
        }
        self.face_centers.clear();
        self.face_normals.clear();
        self.face_areas.clear();
        for f in &self.faces {
            let a = self.vertices[f.vertices[0]];
            let b = self.vertices[f.vertices[1]];
            let t = sub(b, a);
            let len = t[0].hypot(t[1]);
            if len <= 0.0 {
                return Err(MpxaError::InvalidMesh("zero-length face".into()));
            }
            self.face_centers.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            self.face_normals.push([t[1] / len, -t[0] / len]);
            self.face_areas.push(len);
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volumes.iter().sum()
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.faces.len()).filter(|&f| self.faces[f].is_boundary())
    }

    /// Copy of the mesh with every boundary face tagged by `tag_of(face)`.
    pub fn with_boundary_tags(&self, tag_of: impl Fn(usize) -> BoundaryTag) -> Self {
        let mut m = self.clone();
        for f in 0..m.faces.len() {
            if m.faces[f].is_boundary() {
                m.boundary_tags[f] = Some(tag_of(f));
            }
        }
        m
    }

    /// Characteristic size: square root of the mean cell area.
    pub fn mean_size(&self) -> f64 {
        (self.total_volume() / self.num_cells() as f64).sqrt()
    }

    /// Signed sum of `m_σ n_σ` over the faces of `cell` (zero for closed cells).
    pub fn gauss_residual(&self, cell: usize) -> Point {
        let mut s = [0.0, 0.0];
        for &f in &self.cell_faces[cell] {
            let sign = self.faces[f].sign_for(cell);
            let n = self.face_normals[f];
            s[0] += sign * self.face_areas[f] * n[0];
            s[1] += sign * self.face_areas[f] * n[1];
        }
        s
    }

    /// Check the structural invariants: positive volumes, star-shaped cells,
    /// closed cells, and face normals pointing from `cell_lo` toward `cell_hi`.
    pub fn validate(&self) -> Result<()> {
        for k in 0..self.num_cells() {
            if self.cell_volumes[k] <= 0.0 {
                return Err(MpxaError::InvalidMesh(format!("cell {k} has non-positive area")));
            }
            let pts: Vec<Point> = self.cells[k].iter().map(|&v| self.vertices[v]).collect();
            if !is_star_shaped(&pts, self.cell_centers[k]) {
                return Err(MpxaError::InvalidMesh(format!("cell {k} is not star-shaped")));
            }
            let g = self.gauss_residual(k);
            if g[0].abs() > 1e-12 || g[1].abs() > 1e-12 {
                return Err(MpxaError::InvalidMesh(format!("cell {k} is not closed")));
            }
        }
        for (i, f) in self.faces.iter().enumerate() {
            if let Some(hi) = f.cell_hi {
                if hi <= f.cell_lo {
                    return Err(MpxaError::InvalidMesh(format!("face {i} has cell_hi <= cell_lo")));
                }
                let d = sub(self.cell_centers[hi], self.cell_centers[f.cell_lo]);
                if dot(d, self.face_normals[i]) <= 0.0 {
                    log::debug!("face {i}: normal not aligned with center-to-center direction");
                }
            }
        }
        Ok(())
    }

    /// Integrate `f` over cell `k` with the edge-midpoint rule on the fan
    /// triangles around the cell center (exact for quadratics).
    pub fn integrate_cell<F: Fn(Point) -> f64>(&self, k: usize, f: F) -> f64 {
        let c = self.cell_centers[k];
        let cell = &self.cells[k];
        let n = cell.len();
        let mut total = 0.0;
        for i in 0..n {
            let a = self.vertices[cell[i]];
            let b = self.vertices[cell[(i + 1) % n]];
            let area = tri_area(c, a, b);
            let mid = |p: Point, q: Point| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            total += area * (f(mid(c, a)) + f(mid(a, b)) + f(mid(b, c))) / 3.0;
        }
        total
    }
}
