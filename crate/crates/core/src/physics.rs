//! Material coefficients and boundary condition descriptions.

use serde::{Deserialize, Serialize};

use crate::error::{MpxaError, Result};
use crate::mesh::{BoundaryTag, Mesh, Point};

/// 2x2 tensor, row-major.
pub type Tensor2 = [[f64; 2]; 2];

pub const IDENTITY: Tensor2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn scaled(t: Tensor2, s: f64) -> Tensor2 {
    [[t[0][0] * s, t[0][1] * s], [t[1][0] * s, t[1][1] * s]]
}

pub fn is_symmetric(t: &Tensor2) -> bool {
    let scale = t.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    (t[0][1] - t[1][0]).abs() <= 1e-12 * scale
}

pub fn is_spd(t: &Tensor2) -> bool {
    is_symmetric(t) && t[0][0] > 0.0 && t[0][0] * t[1][1] - t[0][1] * t[1][0] > 0.0
}

/// Isotropic Lamé pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lame {
    pub mu: f64,
    pub lambda: f64,
}

impl Lame {
    pub fn new(mu: f64, lambda: f64) -> Self {
        Lame { mu, lambda }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu > 0.0 && self.lambda >= 0.0 && self.mu.is_finite() && self.lambda.is_finite() {
            Ok(())
        } else {
            Err(MpxaError::InvalidParameter(format!(
                "Lamé parameters need mu > 0, lambda >= 0 (got {}, {})",
                self.mu, self.lambda
            )))
        }
    }
}

/// How stress symmetry is imposed in the elasticity discretization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryMode {
    /// Pointwise, through the symmetric strain.
    Strong,
    /// In dual-cell average, with one rotation unknown per vertex.
    Weak,
}

/// Boundary tags for one field, one entry per face (`None` on interior faces).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec {
    pub tags: Vec<Option<BoundaryTag>>,
}

impl BoundarySpec {
    /// The tags stored on the mesh.
    pub fn from_mesh(mesh: &Mesh) -> Self {
        BoundarySpec { tags: mesh.boundary_tags.clone() }
    }

    pub fn uniform(mesh: &Mesh, tag: BoundaryTag) -> Self {
        Self::by_face(mesh, |_, _| tag)
    }

    pub fn dirichlet(mesh: &Mesh) -> Self {
        Self::uniform(mesh, BoundaryTag::Dirichlet)
    }

    pub fn neumann(mesh: &Mesh) -> Self {
        Self::uniform(mesh, BoundaryTag::Neumann)
    }

    /// Tag each boundary face from its index and center.
    pub fn by_face(mesh: &Mesh, tag: impl Fn(usize, Point) -> BoundaryTag) -> Self {
        let tags = (0..mesh.num_faces())
            .map(|f| mesh.faces[f].is_boundary().then(|| tag(f, mesh.face_centers[f])))
            .collect();
        BoundarySpec { tags }
    }

    pub fn tag(&self, face: usize) -> Option<BoundaryTag> {
        self.tags[face]
    }

    pub fn has_dirichlet(&self) -> bool {
        self.tags.iter().any(|t| *t == Some(BoundaryTag::Dirichlet))
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if self.tags.len() != mesh.num_faces() {
            return Err(MpxaError::DimensionMismatch(format!(
                "{} boundary tags for {} faces",
                self.tags.len(),
                mesh.num_faces()
            )));
        }
        for (f, face) in mesh.faces.iter().enumerate() {
            if face.is_boundary() && self.tags[f].is_none() {
                return Err(MpxaError::InvalidParameter(format!(
                    "boundary face {f} has no boundary tag"
                )));
            }
        }
        Ok(())
    }
}
