//! Multi-point stress approximation for `div(C eps(u) + chi) = r`.

use crate::assembly::{assemble_condensed, divergence, CondensePolicy};
use crate::error::{MpxaError, Result};
use crate::linsolve::{solve_direct, solve_with_nullspace};
use crate::local::LocalPhysics;
use crate::mesh::{BoundaryTag, Mesh, Quadrature, SubGrid};
use crate::mpfa::check_len;
use crate::physics::{is_symmetric, BoundarySpec, Lame, SymmetryMode, Tensor2};
use crate::SparseMatrix;

/// Face tractions `w = W_u u + W_chi chi + W_bc d`; rows `face * 2 + c`.
#[derive(Clone, Debug)]
pub struct StressStencil {
    pub w_u: SparseMatrix,
    /// Columns `cell * 3 + (xx, yy, xy)`.
    pub w_chi: SparseMatrix,
    /// Columns `subface * 2 + c`.
    pub w_bc: SparseMatrix,
    /// Vector divergence, `(cells * 2) x (faces * 2)`.
    pub div: SparseMatrix,
    /// Subcell displacement gradients, rows `subcell * 4 + 2i + j`.
    pub grad_map: SparseMatrix,
    pub grad_chi: SparseMatrix,
    pub grad_bc: SparseMatrix,
    /// Per-vertex rotation unknown (weak mode).
    pub rot_u: SparseMatrix,
    pub rot_chi: SparseMatrix,
    pub rot_bc: SparseMatrix,
    pub mode: SymmetryMode,
    pub lame: Vec<Lame>,
    pub bc: BoundarySpec,
    pub max_residual: f64,
}

/// Store symmetric tensors as `(xx, yy, xy)` per cell.
pub fn pack_symmetric(chi: &[Tensor2]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(3 * chi.len());
    for (k, t) in chi.iter().enumerate() {
        if !is_symmetric(t) {
            return Err(MpxaError::InvalidParameter(format!(
                "external stress of cell {k} is not symmetric"
            )));
        }
        out.extend_from_slice(&[t[0][0], t[1][1], t[0][1]]);
    }
    Ok(out)
}

pub fn discretize_elasticity(
    mesh: &Mesh,
    subgrid: &SubGrid,
    lame: &[Lame],
    mode: SymmetryMode,
    bc: &BoundarySpec,
) -> Result<StressStencil> {
    if lame.len() != mesh.num_cells() {
        return Err(MpxaError::DimensionMismatch(format!(
            "{} Lamé pairs for {} cells",
            lame.len(),
            mesh.num_cells()
        )));
    }
    for l in lame {
        l.validate()?;
    }
    let policy = match (mode, subgrid.quadrature) {
        (SymmetryMode::Strong, Quadrature::SinglePoint) => CondensePolicy::Direct,
        (SymmetryMode::Strong, Quadrature::FullQuadratic) => CondensePolicy::Minimize,
        (SymmetryMode::Weak, _) => CondensePolicy::Auto,
    };
    let c = assemble_condensed(mesh, subgrid, &LocalPhysics::Elasticity { lame, mode }, bc, policy)?;
    Ok(StressStencil {
        w_u: c.flux_u,
        w_chi: c.flux_ext,
        w_bc: c.flux_bc,
        div: divergence(mesh, 2),
        grad_map: c.grad_u,
        grad_chi: c.grad_ext,
        grad_bc: c.grad_bc,
        rot_u: c.rot_u,
        rot_chi: c.rot_ext,
        rot_bc: c.rot_bc,
        mode,
        lame: lame.to_vec(),
        bc: bc.clone(),
        max_residual: c.max_residual,
    })
}

fn add3(a: Vec<f64>, b: Vec<f64>, c: Vec<f64>) -> Vec<f64> {
    a.iter().zip(&b).zip(&c).map(|((x, y), z)| x + y + z).collect()
}

impl StressStencil {
    pub fn num_cells(&self) -> usize {
        self.w_u.cols() / 2
    }

    /// Tractions from cell displacements (`cell * 2 + c`), per-cell symmetric
    /// external stresses and boundary data.
    pub fn compute_tractions(&self, u: &[f64], chi: &[Tensor2], bc_data: &[f64]) -> Result<Vec<f64>> {
        let packed = pack_symmetric(chi)?;
        self.tractions_packed(u, &packed, bc_data)
    }

    pub fn tractions_packed(&self, u: &[f64], chi: &[f64], bc_data: &[f64]) -> Result<Vec<f64>> {
        check_len("displacement", u.len(), self.w_u.cols())?;
        check_len("external stress", chi.len(), self.w_chi.cols())?;
        check_len("boundary data", bc_data.len(), self.w_bc.cols())?;
        Ok(add3(self.w_u.mul_vec(u)?, self.w_chi.mul_vec(chi)?, self.w_bc.mul_vec(bc_data)?))
    }

    /// `D_u W_u`.
    pub fn system_matrix(&self) -> SparseMatrix {
        self.div.matmul(&self.w_u).expect("conforming shapes")
    }

    /// `r - D_u (W_chi chi + W_bc d)`.
    pub fn rhs(&self, source: &[f64], chi: &[f64], bc_data: &[f64]) -> Result<Vec<f64>> {
        check_len("source", source.len(), self.w_u.cols())?;
        let zero = vec![0.0; self.w_u.cols()];
        let w0 = self.tractions_packed(&zero, chi, bc_data)?;
        let dw = self.div.mul_vec(&w0)?;
        Ok(source.iter().zip(&dw).map(|(r, d)| r - d).collect())
    }

    /// Rigid-body modes at the cell centers: two translations and a rotation.
    pub fn rigid_modes(mesh: &Mesh) -> Vec<Vec<f64>> {
        let n = mesh.num_cells();
        let mut tx = vec![0.0; 2 * n];
        let mut ty = vec![0.0; 2 * n];
        let mut rot = vec![0.0; 2 * n];
        for (k, x) in mesh.cell_centers.iter().enumerate() {
            tx[2 * k] = 1.0;
            ty[2 * k + 1] = 1.0;
            rot[2 * k] = -(x[1] - 0.5);
            rot[2 * k + 1] = x[0] - 0.5;
        }
        vec![tx, ty, rot]
    }

    /// Solve for cell displacements. Without any Dirichlet face the rigid-body
    /// modes are removed by orthogonality constraints.
    pub fn solve(&self, mesh: &Mesh, source: &[f64], chi: &[f64], bc_data: &[f64]) -> Result<Vec<f64>> {
        let a = self.system_matrix();
        let b = self.rhs(source, chi, bc_data)?;
        let sol = if self.bc.has_dirichlet() {
            solve_direct(&a, &b)?
        } else {
            solve_with_nullspace(&a, &b, &Self::rigid_modes(mesh))?
        };
        Ok(sol.x)
    }

    /// Subcell stresses `[xx, xy, yx, yy]` (row-major) for the given state.
    pub fn subcell_stresses(
        &self,
        subgrid: &SubGrid,
        u: &[f64],
        chi: &[f64],
        bc_data: &[f64],
    ) -> Result<Vec<[f64; 4]>> {
        let grads = add3(
            self.grad_map.mul_vec(u)?,
            self.grad_chi.mul_vec(chi)?,
            self.grad_bc.mul_vec(bc_data)?,
        );
        let rots = add3(self.rot_u.mul_vec(u)?, self.rot_chi.mul_vec(chi)?, self.rot_bc.mul_vec(bc_data)?);
        let mut out = Vec::with_capacity(subgrid.num_subcells());
        for (id, sc) in subgrid.subcells.iter().enumerate() {
            let g = &grads[4 * id..4 * id + 4];
            let Lame { mu, lambda } = self.lame[sc.cell];
            let tr = g[0] + g[3];
            let c = &chi[3 * sc.cell..3 * sc.cell + 3];
            let s = match self.mode {
                SymmetryMode::Strong => [
                    2.0 * mu * g[0] + lambda * tr,
                    mu * (g[1] + g[2]),
                    mu * (g[1] + g[2]),
                    2.0 * mu * g[3] + lambda * tr,
                ],
                SymmetryMode::Weak => {
                    let b = rots[sc.vertex];
                    [
                        2.0 * mu * g[0] + lambda * tr,
                        2.0 * mu * (g[1] + b),
                        2.0 * mu * (g[2] - b),
                        2.0 * mu * g[3] + lambda * tr,
                    ]
                }
            };
            out.push([s[0] + c[0], s[1] + c[2], s[2] + c[2], s[3] + c[1]]);
        }
        Ok(out)
    }

    /// Per vertex: `|sum_j V_j (pi_xy - pi_yx)|` over the dual cell, divided by
    /// the largest subcell stress norm in the mesh.
    pub fn symmetry_residuals(
        &self,
        subgrid: &SubGrid,
        u: &[f64],
        chi: &[f64],
        bc_data: &[f64],
    ) -> Result<Vec<f64>> {
        let s = self.subcell_stresses(subgrid, u, chi, bc_data)?;
        let norm = s
            .iter()
            .map(|p| p.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        Ok(subgrid
            .dual_cells
            .iter()
            .map(|dc| {
                let mut vol = 0.0;
                let mut acc = 0.0;
                for &sc in &dc.subcells {
                    let v = subgrid.subcells[sc].volume;
                    vol += v;
                    acc += v * (s[sc][1] - s[sc][2]);
                }
                if vol > 0.0 {
                    (acc / vol).abs() / norm
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// Boundary-data columns of the given tag.
    pub fn w_tagged(&self, tag: BoundaryTag) -> SparseMatrix {
        let mut t = crate::Triplets::new(self.w_bc.rows(), self.w_bc.cols());
        for (i, j, v) in self.w_bc.iter() {
            if self.bc.tag(j / 4) == Some(tag) {
                t.push(i, j, v);
            }
        }
        t.finalize().expect("same shape")
    }
}
