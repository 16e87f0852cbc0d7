//! Multi-point flux approximation for `-div(kappa grad p - g) = r`.

use crate::assembly::{assemble_condensed, divergence, CondensePolicy, Condensed};
use crate::error::{MpxaError, Result};
use crate::linsolve::{solve_direct, solve_with_nullspace};
use crate::local::LocalPhysics;
use crate::mesh::{BoundaryTag, Mesh, Quadrature, SubGrid};
use crate::physics::{is_spd, BoundarySpec, Tensor2};
use crate::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FluxVariant {
    /// Single-point continuity at `x_σ + η (x_s - x_σ)`.
    O { eta: f64 },
    /// Full quadratic penalty.
    Generalized,
    /// Two-point reference scheme.
    Tpfa,
}

/// Face fluxes `q = Q_p p + Q_g g + Q_bc d`, oriented along the face normals.
#[derive(Clone, Debug)]
pub struct FluxStencil {
    pub q_p: SparseMatrix,
    /// Columns `cell * 2 + component` of the per-cell vector `g`.
    pub q_g: SparseMatrix,
    /// Columns `subface` of the boundary data.
    pub q_bc: SparseMatrix,
    /// Cells x faces, `+1` on `cell_lo`, `-1` on `cell_hi`.
    pub div: SparseMatrix,
    pub bc: BoundarySpec,
    pub variant: FluxVariant,
    /// Subcell gradient maps (`subcell * 2 + j`), kept for post-processing.
    pub grad_p: SparseMatrix,
    pub grad_g: SparseMatrix,
    pub grad_bc: SparseMatrix,
    pub max_residual: f64,
}

pub fn validate_kappa(mesh: &Mesh, kappa: &[Tensor2]) -> Result<()> {
    if kappa.len() != mesh.num_cells() {
        return Err(MpxaError::DimensionMismatch(format!(
            "{} permeability tensors for {} cells",
            kappa.len(),
            mesh.num_cells()
        )));
    }
    if let Some(k) = kappa.iter().position(|t| !is_spd(t)) {
        return Err(MpxaError::InvalidParameter(format!(
            "permeability of cell {k} is not symmetric positive definite"
        )));
    }
    Ok(())
}

pub fn discretize_darcy(
    mesh: &Mesh,
    subgrid: &SubGrid,
    kappa: &[Tensor2],
    bc: &BoundarySpec,
) -> Result<FluxStencil> {
    validate_kappa(mesh, kappa)?;
    let c: Condensed = assemble_condensed(mesh, subgrid, &LocalPhysics::Diffusion { kappa }, bc, CondensePolicy::Auto)?;
    let variant = match subgrid.quadrature {
        Quadrature::SinglePoint => FluxVariant::O { eta: subgrid.eta },
        Quadrature::FullQuadratic => FluxVariant::Generalized,
    };
    Ok(FluxStencil {
        q_p: c.flux_u,
        q_g: c.flux_ext,
        q_bc: c.flux_bc,
        div: divergence(mesh, 1),
        bc: bc.clone(),
        variant,
        grad_p: c.grad_u,
        grad_g: c.grad_ext,
        grad_bc: c.grad_bc,
        max_residual: c.max_residual,
    })
}

impl FluxStencil {
    pub fn num_cells(&self) -> usize {
        self.q_p.cols()
    }

    pub fn num_faces(&self) -> usize {
        self.q_p.rows()
    }

    /// Boundary-data columns restricted to subfaces with the given tag.
    fn bc_columns(&self, tag: BoundaryTag) -> SparseMatrix {
        let mut t = crate::Triplets::new(self.q_bc.rows(), self.q_bc.cols());
        for (i, j, v) in self.q_bc.iter() {
            if self.bc.tag(j / 2) == Some(tag) {
                t.push(i, j, v);
            }
        }
        t.finalize().expect("same shape")
    }

    /// Flux map of Neumann data.
    pub fn q_n(&self) -> SparseMatrix {
        self.bc_columns(BoundaryTag::Neumann)
    }

    /// Flux map of Dirichlet data.
    pub fn q_d(&self) -> SparseMatrix {
        self.bc_columns(BoundaryTag::Dirichlet)
    }

    pub fn compute_fluxes(&self, p: &[f64], g: &[f64], bc_data: &[f64]) -> Result<Vec<f64>> {
        check_len("pressure", p.len(), self.q_p.cols())?;
        check_len("external field", g.len(), self.q_g.cols())?;
        check_len("boundary data", bc_data.len(), self.q_bc.cols())?;
        let a = self.q_p.mul_vec(p)?;
        let b = self.q_g.mul_vec(g)?;
        let c = self.q_bc.mul_vec(bc_data)?;
        Ok((0..a.len()).map(|i| a[i] + b[i] + c[i]).collect())
    }

    /// `D Q_p`.
    pub fn system_matrix(&self) -> SparseMatrix {
        self.div.matmul(&self.q_p).expect("conforming shapes")
    }

    /// `r - D (Q_g g + Q_bc d)`.
    pub fn rhs(&self, source: &[f64], g: &[f64], bc_data: &[f64]) -> Result<Vec<f64>> {
        check_len("source", source.len(), self.num_cells())?;
        let zero = vec![0.0; self.num_cells()];
        let q0 = self.compute_fluxes(&zero, g, bc_data)?;
        let dq = self.div.mul_vec(&q0)?;
        Ok(source.iter().zip(&dq).map(|(r, d)| r - d).collect())
    }

    /// Solve for cell pressures. Without Dirichlet faces the pressure is
    /// fixed by `sum_k m_k p_k = 0`.
    pub fn solve(&self, mesh: &Mesh, source: &[f64], g: &[f64], bc_data: &[f64]) -> Result<Vec<f64>> {
        let a = self.system_matrix();
        let b = self.rhs(source, g, bc_data)?;
        let sol = if self.bc.has_dirichlet() {
            solve_direct(&a, &b)?
        } else {
            solve_with_nullspace(&a, &b, &[mesh.cell_volumes.clone()])?
        };
        Ok(sol.x)
    }
}

pub(crate) fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(MpxaError::DimensionMismatch(format!("{what}: {got} entries, expected {want}")));
    }
    Ok(())
}
