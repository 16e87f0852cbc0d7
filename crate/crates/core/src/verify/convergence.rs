//! Refinement studies and rate fits.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cases::{AnalyticCase, CaseName};
use super::metrics::{error_metrics, ErrorReport};
use super::solve::{solve_case, DiscOptions};
use crate::error::{MpxaError, Result};
use crate::mesh::{generate_mesh, layered_strip, skewed_quads, warped_triangles, Mesh, MeshKind, MeshSpec};

/// Mesh sequence indexed by level, `n = 2^level` cells per side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GridFamily {
    Generated { kind: MeshKind, perturbation: f64, seed: u64 },
    /// Triangles fitted to the material interfaces of the singular case.
    Fitted { sector_angle: f64 },
    Skewed { skew: f64 },
    Layered { ratio: usize },
}

impl GridFamily {
    pub fn generated(kind: MeshKind, perturbation: f64) -> Self {
        GridFamily::Generated { kind, perturbation, seed: 1 }
    }

    /// Grid family a case is usually run on when only a mesh kind is given.
    pub fn for_case(case: &AnalyticCase, kind: MeshKind, perturbation: f64, seed: u64) -> Self {
        match case.name {
            CaseName::SingularEigestad => GridFamily::Fitted { sector_angle: case.params.sector_angle },
            _ => GridFamily::Generated { kind, perturbation, seed },
        }
    }

    pub fn mesh(&self, level: u32) -> Result<Mesh> {
        let n = 1usize << level;
        match *self {
            GridFamily::Generated { kind, perturbation, seed } => {
                let seed = seed.wrapping_mul(1000).wrapping_add(level as u64);
                generate_mesh(&MeshSpec::perturbed(kind, n, perturbation, seed))
            }
            GridFamily::Fitted { sector_angle } => warped_triangles(n, sector_angle),
            GridFamily::Skewed { skew } => skewed_quads(n, n, skew),
            GridFamily::Layered { ratio } => layered_strip(n, ratio),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RateTable {
    pub levels: Vec<u32>,
    pub reports: Vec<ErrorReport>,
    /// Fitted rates, one per metric (`h` and `dofs` unused).
    pub rates: ErrorReport,
    pub picard_iterations: Vec<usize>,
}

/// Least-squares slope of `log e` against `log h`; NaN if any error vanishes.
pub fn fit_rate(h: &[f64], e: &[f64]) -> f64 {
    if h.len() < 2 || e.iter().any(|&v| !(v > 0.0)) {
        return f64::NAN;
    }
    let x: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Rates over the last `k` reports.
pub fn fit_rates(reports: &[ErrorReport], k: usize) -> ErrorReport {
    let tail = &reports[reports.len().saturating_sub(k)..];
    let h: Vec<f64> = tail.iter().map(|r| r.h).collect();
    let mut v = [0.0; 10];
    for (i, slot) in v.iter_mut().enumerate() {
        let e: Vec<f64> = tail.iter().map(|r| r.values()[i]).collect();
        *slot = fit_rate(&h, &e);
    }
    ErrorReport::from_values(f64::NAN, 0, v)
}

pub fn convergence_study(
    case: &AnalyticCase,
    grid: &GridFamily,
    levels: &[u32],
    opts: &DiscOptions,
) -> Result<RateTable> {
    if levels.len() < 3 {
        return Err(MpxaError::InvalidParameter(format!("{} levels given, at least 3 needed", levels.len())));
    }
    let results: Vec<(ErrorReport, usize)> = levels
        .par_iter()
        .map(|&level| {
            let mesh = grid.mesh(level)?;
            let sol = solve_case(case, &mesh, opts)?;
            let h = 1.0 / (1u64 << level) as f64;
            Ok((error_metrics(case, &mesh, &sol, h)?, sol.picard_iterations))
        })
        .collect::<Result<_>>()?;
    let (reports, picard_iterations): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let rates = fit_rates(&reports, 3);
    Ok(RateTable { levels: levels.to_vec(), reports, rates, picard_iterations })
}

impl RateTable {
    /// Per-level rows followed by a `rate` row with the fitted slopes.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,h,dofs");
        for c in ErrorReport::COLUMNS {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for (l, r) in self.levels.iter().zip(&self.reports) {
            let _ = write!(s, "{l},{:.16e},{}", r.h, r.dofs);
            for v in r.values() {
                let _ = write!(s, ",{v:.16e}");
            }
            s.push('\n');
        }
        s.push_str("rate,,");
        for v in self.rates.values() {
            let _ = write!(s, ",{v:.16e}");
        }
        s.push('\n');
        s
    }
}
