//! Structured and unstructured mesh families on the unit square.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{is_star_shaped, polygon_area, polygon_centroid, vertex_average, CenterRule, Mesh, Point};
use crate::error::{MpxaError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshKind {
    Cartesian,
    PerturbedQuad,
    Triangle,
    VoronoiPolygon,
}

impl std::str::FromStr for MeshKind {
    type Err = MpxaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cartesian" => Ok(MeshKind::Cartesian),
            "perturbed_quad" => Ok(MeshKind::PerturbedQuad),
            "triangle" => Ok(MeshKind::Triangle),
            "voronoi_polygon" | "voronoi" => Ok(MeshKind::VoronoiPolygon),
            other => Err(MpxaError::InvalidParameter(format!("unknown mesh kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSpec {
    pub kind: MeshKind,
    pub n: usize,
    #[serde(default)]
    pub perturbation: f64,
    #[serde(default)]
    pub seed: u64,
}

impl MeshSpec {
    pub fn new(kind: MeshKind, n: usize) -> Self {
        MeshSpec { kind, n, perturbation: 0.0, seed: 0 }
    }

    pub fn perturbed(kind: MeshKind, n: usize, perturbation: f64, seed: u64) -> Self {
        MeshSpec { kind, n, perturbation, seed }
    }
}

const MAX_RESAMPLES: usize = 100;

/// Generate a mesh of the unit square.
///
/// For `perturbed_quad` and `triangle`, every interior lattice vertex moves by
/// `perturbation * h * U[-1, 1]^2`, resampled until the adjacent cells stay
/// star-shaped. For `voronoi_polygon` the same displacement jitters the
/// generators of a lattice Voronoi diagram. `cartesian` ignores the
/// perturbation.
pub fn generate_mesh(spec: &MeshSpec) -> Result<Mesh> {
    let n = spec.n;
    if n < 2 {
        return Err(MpxaError::InvalidParameter(format!("mesh resolution n = {n} < 2")));
    }
    if !(0.0..0.5).contains(&spec.perturbation) {
        return Err(MpxaError::InvalidParameter(format!(
            "perturbation {} outside [0, 0.5)",
            spec.perturbation
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.kind {
        MeshKind::Cartesian => {
            let (v, c) = lattice_quads(n, n, |i, j| [i as f64 / n as f64, j as f64 / n as f64]);
            Mesh::from_polygons(v, c, &[], CenterRule::VertexAverage)
        }
        MeshKind::PerturbedQuad => {
            let (mut v, c) = lattice_quads(n, n, |i, j| [i as f64 / n as f64, j as f64 / n as f64]);
            perturb_interior(&mut v, &c, n, spec.perturbation, &mut rng)?;
            Mesh::from_polygons(v, c, &[], CenterRule::VertexAverage)
        }
        MeshKind::Triangle => {
            let (mut v, quads) =
                lattice_quads(n, n, |i, j| [i as f64 / n as f64, j as f64 / n as f64]);
            let cells = split_quads(&quads);
            perturb_interior(&mut v, &cells, n, spec.perturbation, &mut rng)?;
            Mesh::from_polygons(v, cells, &[], CenterRule::VertexAverage)
        }
        MeshKind::VoronoiPolygon => voronoi(n, spec.perturbation, &mut rng),
    }
}

/// Lattice of `nx * ny` quadrilaterals; vertex `(i, j)` has index
/// `j * (nx + 1) + i` and cell `(i, j)` index `j * nx + i`.
fn lattice_quads(
    nx: usize,
    ny: usize,
    coord: impl Fn(usize, usize) -> Point,
) -> (Vec<Point>, Vec<Vec<usize>>) {
    let vid = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(coord(i, j));
        }
    }
    let mut cells = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push(vec![vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)]);
        }
    }
    (vertices, cells)
}

/// Split every quad `(v00, v10, v11, v01)` along the `v00`-`v11` diagonal.
fn split_quads(quads: &[Vec<usize>]) -> Vec<Vec<usize>> {
    quads
        .iter()
        .flat_map(|q| [vec![q[0], q[1], q[2]], vec![q[0], q[2], q[3]]])
        .collect()
}

fn cell_is_valid(pts: &[Point]) -> bool {
    if polygon_area(pts) <= 0.0 {
        return false;
    }
    let avg = vertex_average(pts);
    is_star_shaped(pts, avg) || is_star_shaped(pts, polygon_centroid(pts))
}

fn perturb_interior(
    vertices: &mut [Point],
    cells: &[Vec<usize>],
    n: usize,
    perturbation: f64,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if perturbation == 0.0 {
        return Ok(());
    }
    let h = 1.0 / n as f64;
    let mut adjacent: Vec<Vec<usize>> = vec![Vec::new(); vertices.len()];
    for (k, c) in cells.iter().enumerate() {
        for &v in c {
            adjacent[v].push(k);
        }
    }
    let on_boundary = |p: Point| {
        let tol = 1e-12;
        p[0] < tol || p[0] > 1.0 - tol || p[1] < tol || p[1] > 1.0 - tol
    };
    for v in 0..vertices.len() {
        let origin = vertices[v];
        if on_boundary(origin) {
            continue;
        }
        let mut accepted = false;
        for _ in 0..MAX_RESAMPLES {
            let dx = perturbation * h * rng.random_range(-1.0..=1.0);
            let dy = perturbation * h * rng.random_range(-1.0..=1.0);
            vertices[v] = [origin[0] + dx, origin[1] + dy];
            let ok = adjacent[v].iter().all(|&k| {
                let pts: Vec<Point> = cells[k].iter().map(|&i| vertices[i]).collect();
                cell_is_valid(&pts)
            });
            if ok {
                accepted = true;
                break;
            }
        }
        if !accepted {
            return Err(MpxaError::InvalidMesh(format!(
                "perturbation {perturbation} inverts the cells around vertex {v}"
            )));
        }
    }
    Ok(())
}

/// Clip a convex polygon against the half-plane `{x : (x - m) . d <= 0}`.
fn clip(poly: &[Point], m: Point, d: Point) -> Vec<Point> {
    let side = |p: Point| (p[0] - m[0]) * d[0] + (p[1] - m[1]) * d[1];
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (sa, sb) = (side(a), side(b));
        if sa <= 0.0 {
            out.push(a);
        }
        if (sa < 0.0 && sb > 0.0) || (sa > 0.0 && sb < 0.0) {
            let t = sa / (sa - sb);
            out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

/// Vertex registry that merges points closer than `tol`.
struct Snapper {
    tol: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point>,
}

impl Snapper {
    fn new(tol: f64) -> Self {
        Snapper { tol, buckets: HashMap::new(), points: Vec::new() }
    }

    fn key(&self, p: Point) -> (i64, i64) {
        ((p[0] / self.tol).floor() as i64, (p[1] / self.tol).floor() as i64)
    }

    fn insert(&mut self, p: Point) -> usize {
        let (kx, ky) = self.key(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.buckets.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        let q = self.points[id];
                        if (q[0] - p[0]).abs() <= self.tol && (q[1] - p[1]).abs() <= self.tol {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.buckets.entry((kx, ky)).or_default().push(id);
        id
    }
}

fn voronoi(n: usize, perturbation: f64, rng: &mut ChaCha8Rng) -> Result<Mesh> {
    let h = 1.0 / n as f64;
    let mut gens = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let dx = perturbation * h * rng.random_range(-1.0..=1.0);
            let dy = perturbation * h * rng.random_range(-1.0..=1.0);
            gens.push([(i as f64 + 0.5) * h + dx, (j as f64 + 0.5) * h + dy]);
        }
    }
    let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
    let reach = 3i64;
    let mut snap = Snapper::new(1e-10);
    let mut cells = Vec::with_capacity(n * n);
    for j in 0..n as i64 {
        for i in 0..n as i64 {
            let g = gens[(j as usize) * n + i as usize];
            let mut poly = square.to_vec();
            for jj in (j - reach).max(0)..(j + reach + 1).min(n as i64) {
                for ii in (i - reach).max(0)..(i + reach + 1).min(n as i64) {
                    if ii == i && jj == j {
                        continue;
                    }
                    let o = gens[(jj as usize) * n + ii as usize];
                    let m = [0.5 * (g[0] + o[0]), 0.5 * (g[1] + o[1])];
                    poly = clip(&poly, m, [o[0] - g[0], o[1] - g[1]]);
                }
            }
            let mut loop_ids: Vec<usize> = poly.iter().map(|&p| snap.insert(p)).collect();
            loop_ids.dedup();
            while loop_ids.len() > 1 && loop_ids.first() == loop_ids.last() {
                loop_ids.pop();
            }
            cells.push(loop_ids);
        }
    }
    Mesh::from_polygons(snap.points, cells, &[], CenterRule::VertexAverage)
}

/// Parallelogram lattice `nx * ny` on the unit square sheared by
/// `x += skew * y`; cell aspect ratio is `ny / nx`.
pub fn skewed_quads(nx: usize, ny: usize, skew: f64) -> Result<Mesh> {
    if nx < 1 || ny < 1 {
        return Err(MpxaError::InvalidParameter("empty lattice".into()));
    }
    let (v, c) = lattice_quads(nx, ny, |i, j| {
        let y = j as f64 / ny as f64;
        [i as f64 / nx as f64 + skew * y, y]
    });
    Mesh::from_polygons(v, c, &[], CenterRule::VertexAverage)
}

/// Triangle mesh of the unit square whose edges contain the horizontal ray
/// `y = 1/2, x >= 1/2` and the ray leaving `(1/2, 1/2)` at angle
/// `sector_angle` in the upper half plane. `n` must be even.
pub fn warped_triangles(n: usize, sector_angle: f64) -> Result<Mesh> {
    if n < 2 || n % 2 != 0 {
        return Err(MpxaError::InvalidParameter(format!("n = {n} must be even and >= 2")));
    }
    if !(0.0..std::f64::consts::PI).contains(&sector_angle) || sector_angle <= 0.0 {
        return Err(MpxaError::InvalidParameter("sector angle must lie in (0, pi)".into()));
    }
    let cot = sector_angle.cos() / sector_angle.sin();
    let (v, quads) = lattice_quads(n, n, |i, j| {
        let x = i as f64 / n as f64;
        let y = j as f64 / n as f64;
        if y <= 0.5 {
            return [x, y];
        }
        let xr = 0.5 + (y - 0.5) * cot;
        let xw = if x <= 0.5 { x / 0.5 * xr } else { xr + (x - 0.5) / 0.5 * (1.0 - xr) };
        [xw, y]
    });
    Mesh::from_polygons(v, split_quads(&quads), &[], CenterRule::VertexAverage)
}

/// Unit square with a vertical strip of square cells of side `h / ratio`
/// through its middle, `h = 1 / n`. Coarse cells next to the strip carry the
/// strip's hanging nodes as extra collinear vertices.
pub fn layered_strip(n: usize, ratio: usize) -> Result<Mesh> {
    if n < 2 || n % 2 != 0 || ratio < 1 {
        return Err(MpxaError::InvalidParameter(format!(
            "layered strip needs even n >= 2 and ratio >= 1 (got n = {n}, ratio = {ratio})"
        )));
    }
    let h = 1.0 / n as f64;
    let t = h / ratio as f64;
    let half = n / 2;
    let fine_rows = n * ratio;
    // x breakpoints: coarse columns on each side, one fine column in the middle
    let left_w = (0.5 - 0.5 * t) / half as f64;
    let mut xs: Vec<f64> = (0..=half).map(|i| i as f64 * left_w).collect();
    xs[half] = 0.5 - 0.5 * t;
    xs.push(0.5 + 0.5 * t);
    for i in 1..=half {
        xs.push(0.5 + 0.5 * t + i as f64 * left_w);
    }
    *xs.last_mut().unwrap() = 1.0;
    let fine_y: Vec<f64> = (0..=fine_rows).map(|r| r as f64 / fine_rows as f64).collect();

    let mut vertices: Vec<Point> = Vec::new();
    let mut index: HashMap<(usize, usize), usize> = HashMap::new();
    // column c in 0..xs.len(); fine row index r on strip-adjacent columns
    let mut vid = |c: usize, r: usize, fine: bool, vertices: &mut Vec<Point>| -> usize {
        let key = (c, if fine { r } else { r * ratio });
        *index.entry(key).or_insert_with(|| {
            vertices.push([xs[c], fine_y[key.1]]);
            vertices.len() - 1
        })
    };
    let left_edge = half;
    let right_edge = half + 1;
    let mut cells = Vec::new();
    for j in 0..n {
        for c in 0..xs.len() - 1 {
            if c == left_edge {
                for r in j * ratio..(j + 1) * ratio {
                    cells.push(vec![
                        vid(c, r, true, &mut vertices),
                        vid(c + 1, r, true, &mut vertices),
                        vid(c + 1, r + 1, true, &mut vertices),
                        vid(c, r + 1, true, &mut vertices),
                    ]);
                }
                continue;
            }
            let mut cell = vec![vid(c, j, false, &mut vertices), vid(c + 1, j, false, &mut vertices)];
            if c + 1 == left_edge {
                for r in j * ratio + 1..(j + 1) * ratio {
                    cell.push(vid(c + 1, r, true, &mut vertices));
                }
            }
            cell.push(vid(c + 1, j + 1, false, &mut vertices));
            cell.push(vid(c, j + 1, false, &mut vertices));
            if c == right_edge {
                for r in (j * ratio + 1..(j + 1) * ratio).rev() {
                    cell.push(vid(c, r, true, &mut vertices));
                }
            }
            cells.push(cell);
        }
    }
    Mesh::from_polygons(vertices, cells, &[], CenterRule::AreaCentroid)
}
