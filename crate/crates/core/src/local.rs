//! Per-vertex local problems and their static condensation.
//!
//! Around a vertex `s`, each subcell carries a constant gradient `H` (a
//! `d x 2` block, entry `2i + j` is `du_i/dx_j`) and the potential
//! `u_k + H (x - x_k)`. In weak-symmetry elasticity one extra unknown `b`
//! adds the rotation `b [[0, 1], [-1, 0]]` inside the constitutive law.
//!
//! Every equation is a row of `Z z + U u + X e + Bc d = 0`, with `z` the local
//! unknowns, `u` the cell potentials of the vertex's cells, `e` the per-cell
//! external field (`g` for scalar physics, the symmetric stress `chi` stored
//! as `(xx, yy, xy)` for elasticity) and `d` the boundary data of the
//! vertex's boundary subfaces (Dirichlet value at the continuity point or
//! Neumann flux density).

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{MpxaError, Result};
use crate::mesh::{sub, BoundaryTag, Mesh, SubGrid};
use crate::physics::{BoundarySpec, Lame, SymmetryMode, Tensor2};

/// Constitutive description handed to the local problems.
#[derive(Clone, Copy, Debug)]
pub enum LocalPhysics<'a> {
    /// `tau = -kappa grad p + g`.
    Diffusion { kappa: &'a [Tensor2] },
    /// `pi = C(grad u) + chi`.
    Elasticity { lame: &'a [Lame], mode: SymmetryMode },
}

impl LocalPhysics<'_> {
    /// Components of the potential.
    pub fn d(&self) -> usize {
        match self {
            LocalPhysics::Diffusion { .. } => 1,
            LocalPhysics::Elasticity { .. } => 2,
        }
    }

    /// Components of the per-cell external field.
    pub fn n_ext(&self) -> usize {
        match self {
            LocalPhysics::Diffusion { .. } => 2,
            LocalPhysics::Elasticity { .. } => 3,
        }
    }

    pub fn has_rotation(&self) -> bool {
        matches!(self, LocalPhysics::Elasticity { mode: SymmetryMode::Weak, .. })
    }

    /// Stress entries `S[2i + j]` of cell `k` as
    /// `B * grad + rot * b + X * ext`.
    fn constitutive(&self, k: usize) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
        match *self {
            LocalPhysics::Diffusion { kappa } => {
                let kp = kappa[k];
                let b = DMatrix::from_fn(2, 2, |j, c| -kp[j][c]);
                (b, vec![0.0; 2], DMatrix::identity(2, 2))
            }
            LocalPhysics::Elasticity { lame, mode } => {
                let Lame { mu, lambda } = lame[k];
                let mut b = DMatrix::zeros(4, 4);
                let mut rot = vec![0.0; 4];
                for i in 0..2 {
                    for j in 0..2 {
                        let r = 2 * i + j;
                        match mode {
                            SymmetryMode::Strong => {
                                b[(r, 2 * i + j)] += mu;
                                b[(r, 2 * j + i)] += mu;
                            }
                            SymmetryMode::Weak => b[(r, 2 * i + j)] += 2.0 * mu,
                        }
                        if i == j {
                            b[(r, 0)] += lambda;
                            b[(r, 3)] += lambda;
                        }
                    }
                }
                if mode == SymmetryMode::Weak {
                    rot[1] = 2.0 * mu;
                    rot[2] = -2.0 * mu;
                }
                let mut x = DMatrix::zeros(4, 3);
                x[(0, 0)] = 1.0;
                x[(3, 1)] = 1.0;
                x[(1, 2)] = 1.0;
                x[(2, 2)] = 1.0;
                (b, rot, x)
            }
        }
    }
}

/// A group of local equations `z * Z + u * U + ext * X + bc * Bc = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowBlock {
    pub z: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub ext: DMatrix<f64>,
    pub bc: DMatrix<f64>,
}

impl RowBlock {
    fn zeros(rows: usize, dims: [usize; 4]) -> Self {
        RowBlock {
            z: DMatrix::zeros(rows, dims[0]),
            u: DMatrix::zeros(rows, dims[1]),
            ext: DMatrix::zeros(rows, dims[2]),
            bc: DMatrix::zeros(rows, dims[3]),
        }
    }

    pub fn rows(&self) -> usize {
        self.z.nrows()
    }

    /// `[U | X | Bc]`, the coefficients of all given data.
    pub fn inputs(&self) -> DMatrix<f64> {
        let n = self.u.ncols() + self.ext.ncols() + self.bc.ncols();
        let mut m = DMatrix::zeros(self.rows(), n);
        m.columns_mut(0, self.u.ncols()).copy_from(&self.u);
        m.columns_mut(self.u.ncols(), self.ext.ncols()).copy_from(&self.ext);
        m.columns_mut(self.u.ncols() + self.ext.ncols(), self.bc.ncols()).copy_from(&self.bc);
        m
    }

    fn stack(blocks: &[&RowBlock]) -> RowBlock {
        let rows: usize = blocks.iter().map(|b| b.rows()).sum();
        let b0 = blocks[0];
        let mut out = RowBlock::zeros(
            rows,
            [b0.z.ncols(), b0.u.ncols(), b0.ext.ncols(), b0.bc.ncols()],
        );
        let mut r = 0;
        for b in blocks {
            let n = b.rows();
            out.z.rows_mut(r, n).copy_from(&b.z);
            out.u.rows_mut(r, n).copy_from(&b.u);
            out.ext.rows_mut(r, n).copy_from(&b.ext);
            out.bc.rows_mut(r, n).copy_from(&b.bc);
            r += n;
        }
        out
    }
}

/// The local problem of one vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalProblem {
    pub vertex: usize,
    pub d: usize,
    /// Cells around the vertex in ascending order; local cell `i` owns subcell `subcells[i]`.
    pub cells: Vec<usize>,
    pub subcells: Vec<usize>,
    /// All subfaces at the vertex, ascending; flux rows follow this order.
    pub subfaces: Vec<usize>,
    pub internal: Vec<usize>,
    pub neumann: Vec<usize>,
    pub dirichlet: Vec<usize>,
    /// Neumann and Dirichlet subfaces, ascending; data column `d * i + c`.
    pub boundary: Vec<usize>,
    /// Gradient unknowns `n_c * d * 2`.
    pub n_grad: usize,
    /// Gradient unknowns plus the rotation unknown in weak mode.
    pub n_unknowns: usize,
    pub n_ext: usize,
    /// Potential-jump rows at the quadrature points of internal subfaces.
    pub jump: RowBlock,
    pub jump_weights: Vec<f64>,
    pub single_point: bool,
    /// Normal-flux continuity over internal subfaces.
    pub flux_balance: RowBlock,
    pub neumann_rows: RowBlock,
    pub dirichlet_rows: RowBlock,
    /// Dual-cell average stress symmetry (weak mode only; otherwise empty).
    pub symmetry: RowBlock,
    /// Subface fluxes `m * (tau_lo . n)`, `d` rows per entry of `subfaces`;
    /// only the `z` and `ext` parts are populated.
    pub flux_out: RowBlock,
}

impl LocalProblem {
    pub fn constraints(&self) -> RowBlock {
        RowBlock::stack(&[&self.flux_balance, &self.neumann_rows, &self.dirichlet_rows, &self.symmetry])
    }

    pub fn n_inputs(&self) -> usize {
        self.jump.u.ncols() + self.jump.ext.ncols() + self.jump.bc.ncols()
    }

    /// Plain-text dump of all blocks, for inspection.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertex {} d {} cells {:?}", self.vertex, self.d, self.cells);
        let _ = writeln!(
            s,
            "subfaces internal {:?} neumann {:?} dirichlet {:?}",
            self.internal, self.neumann, self.dirichlet
        );
        for (name, b) in [
            ("jump", &self.jump),
            ("flux_balance", &self.flux_balance),
            ("neumann", &self.neumann_rows),
            ("dirichlet", &self.dirichlet_rows),
            ("symmetry", &self.symmetry),
            ("flux_out", &self.flux_out),
        ] {
            let _ = writeln!(s, "[{name}] z{}u{}ext{}bc{}", b.z, b.u, b.ext, b.bc);
        }
        let _ = writeln!(s, "weights {:?}", self.jump_weights);
        s
    }
}

/// Assemble the local problem of `vertex`.
pub fn build_local(
    mesh: &Mesh,
    subgrid: &SubGrid,
    vertex: usize,
    physics: &LocalPhysics,
    bc: &BoundarySpec,
) -> Result<LocalProblem> {
    let d = physics.d();
    let n_ext = physics.n_ext();
    let dual = &subgrid.dual_cells[vertex];
    let subcells = dual.subcells.clone();
    let cells: Vec<usize> = subcells.iter().map(|&sc| subgrid.subcells[sc].cell).collect();
    let nc = cells.len();
    match physics {
        LocalPhysics::Diffusion { kappa } if kappa.len() != mesh.num_cells() => {
            return Err(MpxaError::DimensionMismatch(format!(
                "{} permeability tensors for {} cells",
                kappa.len(),
                mesh.num_cells()
            )))
        }
        LocalPhysics::Elasticity { lame, .. } if lame.len() != mesh.num_cells() => {
            return Err(MpxaError::DimensionMismatch(format!(
                "{} Lamé pairs for {} cells",
                lame.len(),
                mesh.num_cells()
            )))
        }
        _ => {}
    }
    let local = |k: usize| cells.binary_search(&k).expect("cell adjacent to vertex");

    let subfaces = dual.subfaces.clone();
    let (mut internal, mut neumann, mut dirichlet) = (Vec::new(), Vec::new(), Vec::new());
    for &sf in &subfaces {
        let f = subgrid.subfaces[sf].face;
        if !mesh.faces[f].is_boundary() {
            internal.push(sf);
            continue;
        }
        match bc.tag(f) {
            Some(BoundaryTag::Neumann) => neumann.push(sf),
            Some(BoundaryTag::Dirichlet) => dirichlet.push(sf),
            None => {
                return Err(MpxaError::InvalidParameter(format!(
                    "boundary face {f} at vertex {vertex} has no boundary tag"
                )))
            }
        }
    }
    let boundary: Vec<usize> = subfaces.iter().copied().filter(|sf| !internal.contains(sf)).collect();
    let bcol = |sf: usize| boundary.iter().position(|&b| b == sf).expect("boundary subface");

    let n_grad = nc * d * 2;
    let rot_col = n_grad;
    let n_unknowns = n_grad + usize::from(physics.has_rotation());
    let dims = [n_unknowns, nc * d, nc * n_ext, boundary.len() * d];
    let zcol = |lc: usize, i: usize, j: usize| lc * 2 * d + 2 * i + j;

    let laws: Vec<_> = cells.iter().map(|&k| physics.constitutive(k)).collect();
    // adds scale * (S_lc n)_i to `row` of `blk`
    let add_traction = |blk: &mut RowBlock, row: usize, lc: usize, n: [f64; 2], i: usize, scale: f64| {
        let (b, rot, x) = &laws[lc];
        for j in 0..2 {
            let r = 2 * i + j;
            let c = scale * n[j];
            for a in 0..2 * d {
                blk.z[(row, lc * 2 * d + a)] += c * b[(r, a)];
            }
            if physics.has_rotation() {
                blk.z[(row, rot_col)] += c * rot[r];
            }
            for e in 0..n_ext {
                blk.ext[(row, lc * n_ext + e)] += c * x[(r, e)];
            }
        }
    };

    // potential jumps
    let n_jump: usize = internal.iter().map(|&sf| subgrid.subfaces[sf].quad.len()).sum::<usize>() * d;
    let mut jump = RowBlock::zeros(n_jump, dims);
    let mut jump_weights = Vec::with_capacity(n_jump);
    let mut row = 0;
    for &sf in &internal {
        let s = &subgrid.subfaces[sf];
        let face = &mesh.faces[s.face];
        let (lo, hi) = (face.cell_lo, face.cell_hi.expect("internal face"));
        let (llo, lhi) = (local(lo), local(hi));
        for &(xq, w) in &s.quad {
            let dlo = sub(xq, mesh.cell_centers[lo]);
            let dhi = sub(xq, mesh.cell_centers[hi]);
            for i in 0..d {
                for j in 0..2 {
                    jump.z[(row, zcol(llo, i, j))] += dlo[j];
                    jump.z[(row, zcol(lhi, i, j))] -= dhi[j];
                }
                jump.u[(row, llo * d + i)] += 1.0;
                jump.u[(row, lhi * d + i)] -= 1.0;
                jump_weights.push(w);
                row += 1;
            }
        }
    }

    let mut flux_balance = RowBlock::zeros(internal.len() * d, dims);
    for (r, &sf) in internal.iter().enumerate() {
        let f = subgrid.subfaces[sf].face;
        let face = &mesh.faces[f];
        let n = mesh.face_normals[f];
        for i in 0..d {
            add_traction(&mut flux_balance, r * d + i, local(face.cell_lo), n, i, 1.0);
            add_traction(&mut flux_balance, r * d + i, local(face.cell_hi.unwrap()), n, i, -1.0);
        }
    }

    let mut neumann_rows = RowBlock::zeros(neumann.len() * d, dims);
    for (r, &sf) in neumann.iter().enumerate() {
        let f = subgrid.subfaces[sf].face;
        let n = mesh.face_normals[f];
        for i in 0..d {
            add_traction(&mut neumann_rows, r * d + i, local(mesh.faces[f].cell_lo), n, i, 1.0);
            neumann_rows.bc[(r * d + i, bcol(sf) * d + i)] = -1.0;
        }
    }

    let mut dirichlet_rows = RowBlock::zeros(dirichlet.len() * d, dims);
    for (r, &sf) in dirichlet.iter().enumerate() {
        let s = &subgrid.subfaces[sf];
        let lo = mesh.faces[s.face].cell_lo;
        let l = local(lo);
        let dx = sub(s.continuity_point, mesh.cell_centers[lo]);
        for i in 0..d {
            for j in 0..2 {
                dirichlet_rows.z[(r * d + i, zcol(l, i, j))] = dx[j];
            }
            dirichlet_rows.u[(r * d + i, l * d + i)] = 1.0;
            dirichlet_rows.bc[(r * d + i, bcol(sf) * d + i)] = -1.0;
        }
    }

    let mut symmetry = RowBlock::zeros(usize::from(physics.has_rotation()), dims);
    if physics.has_rotation() {
        for (l, &sc) in subcells.iter().enumerate() {
            let v = subgrid.subcells[sc].volume;
            // S_01 - S_10 written as tractions with unit normals
            add_traction(&mut symmetry, 0, l, [0.0, v], 0, 1.0);
            add_traction(&mut symmetry, 0, l, [v, 0.0], 1, -1.0);
        }
    }

    let mut flux_out = RowBlock::zeros(subfaces.len() * d, dims);
    for (r, &sf) in subfaces.iter().enumerate() {
        let s = &subgrid.subfaces[sf];
        let n = mesh.face_normals[s.face];
        for i in 0..d {
            add_traction(&mut flux_out, r * d + i, local(mesh.faces[s.face].cell_lo), n, i, s.area);
        }
    }

    let single_point = internal.iter().all(|&sf| subgrid.subfaces[sf].quad.len() == 1);
    Ok(LocalProblem {
        vertex,
        d,
        cells,
        subcells,
        subfaces,
        internal,
        neumann,
        dirichlet,
        boundary,
        n_grad,
        n_unknowns,
        n_ext,
        jump,
        jump_weights,
        single_point,
        flux_balance,
        neumann_rows,
        dirichlet_rows,
        symmetry,
        flux_out,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CondensationMethod {
    Direct,
    Minimize,
}

/// Local unknowns and subface fluxes as linear maps of the given data.
#[derive(Clone, Debug, PartialEq)]
pub struct CondensationMaps {
    /// `z = s_u u + s_g ext + s_bc bc`.
    pub s_u: DMatrix<f64>,
    pub s_g: DMatrix<f64>,
    pub s_bc: DMatrix<f64>,
    /// Subface fluxes, rows as `LocalProblem::flux_out`.
    pub flux_u: DMatrix<f64>,
    pub flux_ext: DMatrix<f64>,
    pub flux_bc: DMatrix<f64>,
    /// Weighted potential jumps at the solution as a map of `[u | ext | bc]`.
    pub jump_map: DMatrix<f64>,
    /// Frobenius norm of `jump_map`; zero when every penalty value vanishes.
    pub residual: f64,
    /// Pivot-ratio (direct) or singular-value-ratio (minimize) estimate.
    pub condition: f64,
    pub method: CondensationMethod,
}

impl CondensationMaps {
    /// Columns of `s_bc` belonging to the Neumann subfaces of `lp`.
    pub fn s_n(&self, lp: &LocalProblem) -> DMatrix<f64> {
        self.bc_columns(lp, &lp.neumann)
    }

    /// Columns of `s_bc` belonging to the Dirichlet subfaces of `lp`.
    pub fn s_d(&self, lp: &LocalProblem) -> DMatrix<f64> {
        self.bc_columns(lp, &lp.dirichlet)
    }

    fn bc_columns(&self, lp: &LocalProblem, which: &[usize]) -> DMatrix<f64> {
        let cols: Vec<usize> = which
            .iter()
            .flat_map(|sf| {
                let p = lp.boundary.iter().position(|b| b == sf).unwrap();
                (0..lp.d).map(move |c| p * lp.d + c)
            })
            .collect();
        self.s_bc.select_columns(cols.iter())
    }

    /// Penalty value `M_s` for the given data.
    pub fn penalty(&self, u: &[f64], ext: &[f64], bc: &[f64]) -> f64 {
        let input: Vec<f64> = u.iter().chain(ext).chain(bc).copied().collect();
        let r = &self.jump_map * nalgebra::DVector::from_vec(input);
        r.norm_squared()
    }

    /// Local unknowns for the given data.
    pub fn unknowns(&self, u: &[f64], ext: &[f64], bc: &[f64]) -> Vec<f64> {
        let z = &self.s_u * nalgebra::DVector::from_column_slice(u)
            + &self.s_g * nalgebra::DVector::from_column_slice(ext)
            + &self.s_bc * nalgebra::DVector::from_column_slice(bc);
        z.as_slice().to_vec()
    }
}

const PIVOT_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

fn row_scale(a: &mut DMatrix<f64>, rhs: &mut DMatrix<f64>) {
    for r in 0..a.nrows() {
        let m = a.row(r).amax();
        if m > 0.0 {
            a.row_mut(r).scale_mut(1.0 / m);
            rhs.row_mut(r).scale_mut(1.0 / m);
        }
    }
}

fn finish(
    lp: &LocalProblem,
    z: DMatrix<f64>,
    condition: f64,
    method: CondensationMethod,
) -> CondensationMaps {
    let (nu, ne) = (lp.jump.u.ncols(), lp.jump.ext.ncols());
    let nb = lp.jump.bc.ncols();
    let s_u = z.columns(0, nu).into_owned();
    let s_g = z.columns(nu, ne).into_owned();
    let s_bc = z.columns(nu + ne, nb).into_owned();
    let flux_u = &lp.flux_out.z * &s_u;
    let flux_ext = &lp.flux_out.z * &s_g + &lp.flux_out.ext;
    let flux_bc = &lp.flux_out.z * &s_bc;
    let mut jump_map = &lp.jump.z * &z + lp.jump.inputs();
    for (r, w) in lp.jump_weights.iter().enumerate() {
        jump_map.row_mut(r).scale_mut(w.sqrt());
    }
    let residual = jump_map.norm();
    CondensationMaps { s_u, s_g, s_bc, flux_u, flux_ext, flux_bc, jump_map, residual, condition, method }
}

/// Solve the square system of jump, flux, boundary (and symmetry) rows.
pub fn condense_direct(lp: &LocalProblem) -> Result<CondensationMaps> {
    let all = RowBlock::stack(&[&lp.jump, &lp.constraints()]);
    if all.rows() != lp.n_unknowns {
        return Err(MpxaError::InvalidParameter(format!(
            "direct condensation at vertex {} needs a square system ({} rows, {} unknowns)",
            lp.vertex,
            all.rows(),
            lp.n_unknowns
        )));
    }
    let mut a = all.z.clone();
    let mut rhs = -all.inputs();
    row_scale(&mut a, &mut rhs);
    let lu = a.lu();
    let u = lu.u();
    let mut pmax = 0.0f64;
    let mut pmin = f64::INFINITY;
    for i in 0..u.nrows() {
        let p = u[(i, i)].abs();
        if p < PIVOT_TOL || !p.is_finite() {
            return Err(MpxaError::SingularLocalSystem { vertex: lp.vertex, row: i, pivot: p });
        }
        pmax = pmax.max(p);
        pmin = pmin.min(p);
    }
    let condition = pmax / pmin;
    if condition > 1e12 {
        log::warn!("vertex {}: local condition estimate {condition:.2e}", lp.vertex);
    }
    let z = lu.solve(&rhs).ok_or(MpxaError::SingularLocalSystem {
        vertex: lp.vertex,
        row: 0,
        pivot: 0.0,
    })?;
    Ok(finish(lp, z, condition, CondensationMethod::Direct))
}

/// Thin SVD factors of `m` with rank cut at `RANK_TOL * sigma_max`:
/// returns (pseudo-inverse, null-space basis, sigma_max / sigma_min kept).
fn pinv_and_null(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, f64) {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return (DMatrix::zeros(0, rows), DMatrix::zeros(0, 0), 1.0);
    }
    // pad to at least square so that V spans the full column space
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        if rows > 0 {
            p.rows_mut(0, rows).copy_from(m);
        }
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    let tol = RANK_TOL * smax;
    let mut pinv = DMatrix::zeros(cols, rows);
    let mut null_cols = Vec::new();
    let mut smin = f64::INFINITY;
    for (i, &s) in sv.iter().enumerate() {
        if s > tol && smax > 0.0 {
            smin = smin.min(s);
            let v = vt.row(i).transpose();
            let ut = u.column(i).rows(0, rows).transpose();
            pinv += (v * ut) / s;
        } else {
            null_cols.push(i);
        }
    }
    // rows of vt beyond the returned singular values are also null
    for i in sv.len()..cols {
        null_cols.push(i);
    }
    let mut null = DMatrix::zeros(cols, null_cols.len());
    for (c, &i) in null_cols.iter().enumerate() {
        null.column_mut(c).copy_from(&vt.row(i).transpose());
    }
    let cond = if smin.is_finite() { smax / smin } else { f64::INFINITY };
    (pinv, null, cond)
}

/// Minimize the weighted jump penalty subject to the hard constraints.
pub fn condense_minimize(lp: &LocalProblem) -> Result<CondensationMaps> {
    let cons = lp.constraints();
    let mut c = cons.z.clone();
    let mut rc = -cons.inputs();
    row_scale(&mut c, &mut rc);
    let (c_pinv, null, cond) = pinv_and_null(&c);
    let rank = lp.n_unknowns - null.ncols();
    if rank < c.nrows() {
        log::debug!(
            "vertex {}: {} redundant constraint rows removed",
            lp.vertex,
            c.nrows() - rank
        );
    }
    let z0 = &c_pinv * &rc;
    if null.ncols() == 0 {
        return Ok(finish(lp, z0, cond, CondensationMethod::Minimize));
    }
    let mut wj = lp.jump.z.clone();
    let mut rj = -lp.jump.inputs();
    for (r, w) in lp.jump_weights.iter().enumerate() {
        let s = w.sqrt();
        wj.row_mut(r).scale_mut(s);
        rj.row_mut(r).scale_mut(s);
    }
    let k = &wj * &null;
    let (k_pinv, k_null, _) = pinv_and_null(&k);
    if k_null.ncols() > 0 {
        // directions invisible to the penalty are harmless only if they carry no flux
        let dir = &null * &k_null;
        let effect = (&lp.flux_out.z * &dir).amax();
        let scale = lp.flux_out.z.amax().max(f64::MIN_POSITIVE);
        if effect > 1e-8 * scale {
            return Err(MpxaError::RankDeficientKkt {
                vertex: lp.vertex,
                detail: format!(
                    "{} undetermined gradient directions change the fluxes (effect {effect:.2e})",
                    k_null.ncols()
                ),
            });
        }
    }
    let y = &k_pinv * (rj - &wj * &z0);
    let z = z0 + &null * y;
    Ok(finish(lp, z, cond, CondensationMethod::Minimize))
}

/// Direct condensation when the quadrature is single-point, falling back to
/// the minimization on a singular system.
pub fn condense(lp: &LocalProblem) -> Result<CondensationMaps> {
    if lp.single_point && lp.jump.rows() + lp.constraints().rows() == lp.n_unknowns {
        match condense_direct(lp) {
            Ok(m) => return Ok(m),
            Err(MpxaError::SingularLocalSystem { vertex, row, pivot }) => {
                log::info!(
                    "vertex {vertex}: singular direct system (row {row}, pivot {pivot:.2e}); minimizing"
                );
                let m = condense_minimize(lp)?;
                log::info!("vertex {vertex}: fallback penalty residual {:.3e}", m.residual);
                return Ok(m);
            }
            Err(e) => return Err(e),
        }
    }
    condense_minimize(lp)
}
