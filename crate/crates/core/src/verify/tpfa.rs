//! Two-point flux reference scheme.

use crate::assembly::divergence;
use crate::error::{MpxaError, Result};
use crate::mesh::{BoundaryTag, Mesh, Point};
use crate::mpfa::{validate_kappa, FluxStencil, FluxVariant};
use crate::physics::{BoundarySpec, Tensor2};
use crate::{SparseMatrix, Triplets};

fn half_transmissibility(m: f64, n: Point, kappa: &Tensor2, xc: Point, xf: Point) -> Result<f64> {
    let d = [xf[0] - xc[0], xf[1] - xc[1]];
    let d2 = d[0] * d[0] + d[1] * d[1];
    if !(d2 > 0.0) {
        return Err(MpxaError::InvalidMesh("cell center coincides with a face center".into()));
    }
    let kn = [kappa[0][0] * n[0] + kappa[0][1] * n[1], kappa[1][0] * n[0] + kappa[1][1] * n[1]];
    Ok(m * (kn[0] * d[0] + kn[1] * d[1]).abs() / d2)
}

/// Harmonic two-point transmissibilities from the half-transmissibilities
/// `m n . kappa (x_σ - x_k) / |x_σ - x_k|^2`. Dirichlet faces use the mean of
/// their two subface values; Neumann faces pass the prescribed flux density.
pub fn tpfa_reference(mesh: &Mesh, kappa: &[Tensor2], bc: &BoundarySpec) -> Result<FluxStencil> {
    validate_kappa(mesh, kappa)?;
    bc.validate(mesh)?;
    let nf = mesh.num_faces();
    let nc = mesh.num_cells();
    let mut qp = Triplets::new(nf, nc);
    let mut qg = Triplets::new(nf, 2 * nc);
    let mut qb = Triplets::new(nf, 2 * nf);
    for (f, face) in mesh.faces.iter().enumerate() {
        let m = mesh.face_areas[f];
        let n = mesh.face_normals[f];
        let xf = mesh.face_centers[f];
        let lo = face.cell_lo;
        let t_lo = half_transmissibility(m, n, &kappa[lo], mesh.cell_centers[lo], xf)?;
        match face.cell_hi {
            Some(hi) => {
                let t_hi = half_transmissibility(m, n, &kappa[hi], mesh.cell_centers[hi], xf)?;
                let t = t_lo * t_hi / (t_lo + t_hi);
                qp.push(f, lo, t);
                qp.push(f, hi, -t);
                for c in 0..2 {
                    qg.push(f, 2 * lo + c, 0.5 * m * n[c]);
                    qg.push(f, 2 * hi + c, 0.5 * m * n[c]);
                }
            }
            None => match bc.tag(f) {
                Some(BoundaryTag::Dirichlet) => {
                    qp.push(f, lo, t_lo);
                    qb.push(f, 2 * f, -0.5 * t_lo);
                    qb.push(f, 2 * f + 1, -0.5 * t_lo);
                    for c in 0..2 {
                        qg.push(f, 2 * lo + c, m * n[c]);
                    }
                }
                _ => {
                    qb.push(f, 2 * f, 0.5 * m);
                    qb.push(f, 2 * f + 1, 0.5 * m);
                }
            },
        }
    }
    Ok(FluxStencil {
        q_p: qp.finalize()?,
        q_g: qg.finalize()?,
        q_bc: qb.finalize()?,
        div: divergence(mesh, 1),
        bc: bc.clone(),
        variant: FluxVariant::Tpfa,
        grad_p: SparseMatrix::zeros(0, nc),
        grad_g: SparseMatrix::zeros(0, 2 * nc),
        grad_bc: SparseMatrix::zeros(0, 2 * nf),
        max_residual: 0.0,
    })
}
