//! JSON mesh files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BoundaryTag, CenterRule, Mesh, Point};
use crate::error::{MpxaError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryEntry {
    pub face: [usize; 2],
    pub tag: BoundaryTag,
}

/// On-disk layout; unknown keys are ignored on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub vertices: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    #[serde(default)]
    pub boundary: Vec<BoundaryEntry>,
}

impl From<&Mesh> for MeshFile {
    fn from(m: &Mesh) -> Self {
        let boundary = m
            .boundary_faces()
            .map(|f| BoundaryEntry {
                face: m.faces[f].vertices,
                tag: m.boundary_tags[f].unwrap_or(BoundaryTag::Dirichlet),
            })
            .collect();
        MeshFile { vertices: m.vertices.clone(), cells: m.cells.clone(), boundary }
    }
}

impl MeshFile {
    pub fn into_mesh(self) -> Result<Mesh> {
        let tags: Vec<([usize; 2], BoundaryTag)> =
            self.boundary.iter().map(|b| (b.face, b.tag)).collect();
        Mesh::from_polygons(self.vertices, self.cells, &tags, CenterRule::VertexAverage)
    }
}

pub fn mesh_to_json(m: &Mesh) -> String {
    serde_json::to_string_pretty(&MeshFile::from(m)).expect("mesh serializes")
}

pub fn mesh_from_json(s: &str) -> Result<Mesh> {
    let file: MeshFile =
        serde_json::from_str(s).map_err(|e| MpxaError::MeshFile(e.to_string()))?;
    file.into_mesh()
}

pub fn save_mesh(m: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, mesh_to_json(m) + "\n")?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    mesh_from_json(&fs::read_to_string(path)?)
}
