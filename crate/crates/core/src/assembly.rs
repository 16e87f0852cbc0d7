//! Global operators from per-vertex condensation maps.

use rayon::prelude::*;

use crate::error::Result;
use crate::Triplets;
use crate::local::{
    build_local, condense, condense_direct, condense_minimize, CondensationMaps, CondensationMethod,
    LocalPhysics, LocalProblem,
};
use crate::mesh::{BoundaryTag, Mesh, Point, SubGrid};
use crate::physics::BoundarySpec;
use crate::SparseMatrix;

/// Condensed discretization of one field.
///
/// Column layouts: cell unknowns `cell * d + c`; external field
/// `cell * n_ext + e`; boundary data `subface * d + c` over all subfaces
/// (entries of interior subfaces are ignored).
#[derive(Clone, Debug)]
pub struct Condensed {
    pub d: usize,
    pub n_ext: usize,
    /// Face fluxes, rows `face * d + c`, oriented along the face normal.
    pub flux_u: SparseMatrix,
    pub flux_ext: SparseMatrix,
    pub flux_bc: SparseMatrix,
    /// Subcell gradients, rows `subcell * 2d + entry`.
    pub grad_u: SparseMatrix,
    pub grad_ext: SparseMatrix,
    pub grad_bc: SparseMatrix,
    /// Per-vertex rotation unknown (weak elasticity; otherwise no entries).
    pub rot_u: SparseMatrix,
    pub rot_ext: SparseMatrix,
    pub rot_bc: SparseMatrix,
    /// Largest local penalty residual norm.
    pub max_residual: f64,
    /// Vertices where the direct solve fell back to minimization.
    pub fallbacks: Vec<usize>,
}

/// Which local elimination to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CondensePolicy {
    /// Direct solve for single-point quadrature, minimization otherwise or on failure.
    #[default]
    Auto,
    /// Direct solve only; singular local systems are errors.
    Direct,
    Minimize,
}

/// Build and condense every local problem, in parallel, in vertex order.
pub fn condense_all(
    mesh: &Mesh,
    subgrid: &SubGrid,
    physics: &LocalPhysics,
    bc: &BoundarySpec,
    policy: CondensePolicy,
) -> Result<Vec<(LocalProblem, CondensationMaps)>> {
    bc.validate(mesh)?;
    (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| {
            let lp = build_local(mesh, subgrid, v, physics, bc)?;
            let maps = match policy {
                CondensePolicy::Auto => condense(&lp)?,
                CondensePolicy::Direct => condense_direct(&lp)?,
                CondensePolicy::Minimize => condense_minimize(&lp)?,
            };
            Ok((lp, maps))
        })
        .collect()
}

pub fn assemble_condensed(
    mesh: &Mesh,
    subgrid: &SubGrid,
    physics: &LocalPhysics,
    bc: &BoundarySpec,
    policy: CondensePolicy,
) -> Result<Condensed> {
    let locals = condense_all(mesh, subgrid, physics, bc, policy)?;
    let d = physics.d();
    let n_ext = physics.n_ext();
    let (nc, nf, nsf, nsc, nv) = (
        mesh.num_cells(),
        mesh.num_faces(),
        subgrid.num_subfaces(),
        subgrid.num_subcells(),
        mesh.num_vertices(),
    );
    let mut fu = Triplets::new(nf * d, nc * d);
    let mut fe = Triplets::new(nf * d, nc * n_ext);
    let mut fb = Triplets::new(nf * d, nsf * d);
    let mut gu = Triplets::new(nsc * 2 * d, nc * d);
    let mut ge = Triplets::new(nsc * 2 * d, nc * n_ext);
    let mut gb = Triplets::new(nsc * 2 * d, nsf * d);
    let mut ru = Triplets::new(nv, nc * d);
    let mut re = Triplets::new(nv, nc * n_ext);
    let mut rb = Triplets::new(nv, nsf * d);
    let mut max_residual = 0.0f64;
    let mut fallbacks = Vec::new();

    for (lp, maps) in &locals {
        max_residual = max_residual.max(maps.residual);
        if lp.single_point && maps.method == CondensationMethod::Minimize {
            fallbacks.push(lp.vertex);
        }
        let ucol = |j: usize| lp.cells[j / d] * d + j % d;
        let ecol = |j: usize| lp.cells[j / n_ext] * n_ext + j % n_ext;
        let bcol = |j: usize| lp.boundary[j / d] * d + j % d;
        let emit = |t: &mut Triplets, row: usize, m: &nalgebra::DMatrix<f64>, r: usize, col: &dyn Fn(usize) -> usize| {
            for j in 0..m.ncols() {
                let v = m[(r, j)];
                if v != 0.0 {
                    t.push(row, col(j), v);
                }
            }
        };
        for (i, &sf) in lp.subfaces.iter().enumerate() {
            let f = subgrid.subfaces[sf].face;
            for c in 0..d {
                let r = i * d + c;
                emit(&mut fu, f * d + c, &maps.flux_u, r, &ucol);
                emit(&mut fe, f * d + c, &maps.flux_ext, r, &ecol);
                emit(&mut fb, f * d + c, &maps.flux_bc, r, &bcol);
            }
        }
        for (l, &sc) in lp.subcells.iter().enumerate() {
            for a in 0..2 * d {
                let r = l * 2 * d + a;
                let row = sc * 2 * d + a;
                emit(&mut gu, row, &maps.s_u, r, &ucol);
                emit(&mut ge, row, &maps.s_g, r, &ecol);
                emit(&mut gb, row, &maps.s_bc, r, &bcol);
            }
        }
        if lp.n_unknowns > lp.n_grad {
            let r = lp.n_grad;
            emit(&mut ru, lp.vertex, &maps.s_u, r, &ucol);
            emit(&mut re, lp.vertex, &maps.s_g, r, &ecol);
            emit(&mut rb, lp.vertex, &maps.s_bc, r, &bcol);
        }
    }
    if !fallbacks.is_empty() {
        log::info!("{} vertices used the minimization fallback", fallbacks.len());
    }
    Ok(Condensed {
        d,
        n_ext,
        flux_u: fu.finalize()?,
        flux_ext: fe.finalize()?,
        flux_bc: fb.finalize()?,
        grad_u: gu.finalize()?,
        grad_ext: ge.finalize()?,
        grad_bc: gb.finalize()?,
        rot_u: ru.finalize()?,
        rot_ext: re.finalize()?,
        rot_bc: rb.finalize()?,
        max_residual,
        fallbacks,
    })
}

/// Signed cell-face incidence: `+1` for `cell_lo`, `-1` for `cell_hi`,
/// expanded to `d` components per cell and face.
pub fn divergence(mesh: &Mesh, d: usize) -> SparseMatrix {
    let mut t = Triplets::new(mesh.num_cells() * d, mesh.num_faces() * d);
    for (f, face) in mesh.faces.iter().enumerate() {
        for c in 0..d {
            t.push(face.cell_lo * d + c, f * d + c, 1.0);
            if let Some(hi) = face.cell_hi {
                t.push(hi * d + c, f * d + c, -1.0);
            }
        }
    }
    t.finalize().expect("indices in range")
}

/// Boundary data vector (`subface * d + c`) from closures evaluated at the
/// continuity point of each boundary subface: `dirichlet(x)` gives the value,
/// `neumann(x, n)` the flux density along the outward normal `n`.
pub fn boundary_data(
    mesh: &Mesh,
    subgrid: &SubGrid,
    bc: &BoundarySpec,
    d: usize,
    dirichlet: impl Fn(Point) -> Vec<f64>,
    neumann: impl Fn(Point, Point) -> Vec<f64>,
) -> Vec<f64> {
    let mut data = vec![0.0; subgrid.num_subfaces() * d];
    for (i, sf) in subgrid.subfaces.iter().enumerate() {
        let f = sf.face;
        let vals = match bc.tag(f) {
            None => continue,
            Some(BoundaryTag::Dirichlet) => dirichlet(sf.continuity_point),
            Some(BoundaryTag::Neumann) => neumann(sf.continuity_point, mesh.face_normals[f]),
        };
        data[i * d..(i + 1) * d].copy_from_slice(&vals[..d]);
    }
    data
}

/// Integrate a source density over every cell (`cell * d + c`).
pub fn integrate_source(mesh: &Mesh, d: usize, f: impl Fn(Point) -> Vec<f64>) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_cells() * d];
    for k in 0..mesh.num_cells() {
        for c in 0..d {
            out[k * d + c] = mesh.integrate_cell(k, |x| f(x)[c]);
        }
    }
    out
}
