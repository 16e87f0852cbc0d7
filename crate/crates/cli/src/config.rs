use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use mpxa::mesh::{generate_mesh, load_mesh, Mesh, MeshSpec};
use mpxa::verify::{CaseName, CaseParams, DiscOptions, GridFamily};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PhysicsKind {
    Darcy,
    Elasticity,
    Biot,
    Thermo,
}

/// Everything a `run` or `discretize` depends on.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub physics: PhysicsKind,
    #[serde(default)]
    pub mesh: Option<MeshSpec>,
    #[serde(default)]
    pub mesh_path: Option<PathBuf>,
    /// Analytic case providing sources and boundary data.
    #[serde(default)]
    pub case: Option<CaseName>,
    #[serde(default)]
    pub params: CaseParams,
    #[serde(default)]
    pub options: DiscOptions,
    /// `p = c0 + cx x + cy y` on Dirichlet faces (Darcy without a case).
    #[serde(default)]
    pub dirichlet_linear: Option<[f64; 3]>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn mesh(&self) -> Result<Mesh> {
        match (&self.mesh, &self.mesh_path) {
            (Some(spec), None) => Ok(generate_mesh(spec)?),
            (None, Some(path)) => Ok(load_mesh(path)?),
            (Some(_), Some(_)) => bail!("config gives both 'mesh' and 'mesh_path'"),
            (None, None) => bail!("config needs 'mesh' or 'mesh_path'"),
        }
    }

    /// Hash of everything that affects the numbers; the output path does not.
    pub fn hash(&self) -> String {
        config_hash(&RunConfig { out: None, ..self.clone() })
    }
}

/// Settings of a refinement study.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceConfig {
    pub case: CaseName,
    pub grid: GridFamily,
    pub levels: Vec<u32>,
    pub params: CaseParams,
    pub options: DiscOptions,
}

pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    format!("{:x}", Sha256::digest(json.as_bytes()))
}

/// `3..6` (inclusive) or a comma list.
pub fn parse_levels(s: &str) -> Result<Vec<u32>> {
    let levels: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let a: u32 = a.trim().parse().with_context(|| format!("bad level range '{s}'"))?;
        let b: u32 = b.trim().trim_start_matches('=').parse().with_context(|| format!("bad level range '{s}'"))?;
        (a..=b).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().parse().with_context(|| format!("bad level list '{s}'")))
            .collect::<Result<_>>()?
    };
    if levels.iter().any(|&l| !(1..=12).contains(&l)) {
        bail!("levels must lie in 1..=12");
    }
    Ok(levels)
}

pub fn parse_triple(s: &str) -> Result<[f64; 3]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad number in '{s}'")))
        .collect::<Result<_>>()?;
    match v.as_slice() {
        [a, b, c] => Ok([*a, *b, *c]),
        _ => bail!("expected three comma-separated numbers, got '{s}'"),
    }
}
