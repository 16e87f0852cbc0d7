//! Relative error norms of cell and face quantities.

use serde::Serialize;

use super::cases::AnalyticCase;
use super::solve::NumericalSolution;
use crate::error::Result;
use crate::mesh::Mesh;
use crate::mpfa::check_len;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ErrorReport {
    pub h: f64,
    pub dofs: usize,
    pub eps_u: f64,
    pub eps_p: f64,
    pub eps_pi: f64,
    pub eps_q: f64,
    pub eps_p_semi: f64,
    pub eps_up: f64,
    #[serde(rename = "eps_Sigma")]
    pub eps_sigma: f64,
    pub eps_phi: f64,
    pub eps_q_phi: f64,
    /// Relative max-norm displacement error.
    pub eps_u_max: f64,
}

impl ErrorReport {
    pub const COLUMNS: [&'static str; 10] = [
        "eps_u",
        "eps_p",
        "eps_pi",
        "eps_q",
        "eps_p_semi",
        "eps_up",
        "eps_Sigma",
        "eps_phi",
        "eps_q_phi",
        "eps_u_max",
    ];

    pub fn values(&self) -> [f64; 10] {
        [
            self.eps_u,
            self.eps_p,
            self.eps_pi,
            self.eps_q,
            self.eps_p_semi,
            self.eps_up,
            self.eps_sigma,
            self.eps_phi,
            self.eps_q_phi,
            self.eps_u_max,
        ]
    }

    pub fn from_values(h: f64, dofs: usize, v: [f64; 10]) -> Self {
        ErrorReport {
            h,
            dofs,
            eps_u: v[0],
            eps_p: v[1],
            eps_pi: v[2],
            eps_q: v[3],
            eps_p_semi: v[4],
            eps_up: v[5],
            eps_sigma: v[6],
            eps_phi: v[7],
            eps_q_phi: v[8],
            eps_u_max: v[9],
        }
    }

    pub fn get(&self, column: &str) -> Option<f64> {
        Self::COLUMNS.iter().position(|c| *c == column).map(|i| self.values()[i])
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// `‖x - y‖ / ‖y‖` with `‖v‖² = Σ_k m_k |v_k|²` over `d` components per cell.
pub fn cell_error(mesh: &Mesh, d: usize, num: &[f64], exact: &[f64]) -> f64 {
    let (mut e, mut n) = (0.0, 0.0);
    for (k, m) in mesh.cell_volumes.iter().enumerate() {
        for c in 0..d {
            let i = k * d + c;
            e += m * (num[i] - exact[i]).powi(2);
            n += m * exact[i].powi(2);
        }
    }
    ratio(e.sqrt(), n.sqrt())
}

/// Cell error with the best constant shift removed (scalar fields).
pub fn cell_seminorm_error(mesh: &Mesh, num: &[f64], exact: &[f64]) -> f64 {
    let vol: f64 = mesh.cell_volumes.iter().sum();
    let shift: f64 = mesh.cell_volumes.iter().enumerate().map(|(k, m)| m * (num[k] - exact[k])).sum::<f64>() / vol;
    let shifted: Vec<f64> = num.iter().map(|v| v - shift).collect();
    cell_error(mesh, 1, &shifted, exact)
}

/// Relative face error for integrated face quantities `num` against flux
/// densities `exact` (`face * d + c`); `‖v‖² = Σ_σ m_σ² |v_σ|²` on densities.
pub fn face_error(mesh: &Mesh, d: usize, num: &[f64], exact: &[f64]) -> f64 {
    let (mut e, mut n) = (0.0, 0.0);
    for (f, m) in mesh.face_areas.iter().enumerate() {
        for c in 0..d {
            let i = f * d + c;
            e += m * m * (num[i] / m - exact[i]).powi(2);
            n += m * m * exact[i].powi(2);
        }
    }
    ratio(e.sqrt(), n.sqrt())
}

fn max_error(num: &[f64], exact: &[f64]) -> f64 {
    let e = num.iter().zip(exact).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    let n = exact.iter().fold(0.0f64, |a, y| a.max(y.abs()));
    ratio(e, n)
}

fn normal(t: [f64; 2], n: [f64; 2]) -> f64 {
    t[0] * n[0] + t[1] * n[1]
}

/// Error metrics of `sol` against the cell-center and face-center samples of
/// the exact solution. `h` is recorded as given.
pub fn error_metrics(case: &AnalyticCase, mesh: &Mesh, sol: &NumericalSolution, h: f64) -> Result<ErrorReport> {
    let nc = mesh.num_cells();
    let nf = mesh.num_faces();
    let centers = &mesh.cell_centers;
    let mut r = ErrorReport { h, dofs: sol.dofs, ..Default::default() };
    if let (Some(u), true) = (&sol.u, case.has_u()) {
        check_len("displacement", u.len(), 2 * nc)?;
        let ex: Vec<f64> = centers.iter().flat_map(|&x| case.u_at(x)).collect();
        r.eps_u = cell_error(mesh, 2, u, &ex);
        r.eps_u_max = max_error(u, &ex);
    }
    if let (Some(p), true) = (&sol.p, case.has_p()) {
        check_len("pressure", p.len(), nc)?;
        let ex: Vec<f64> = centers.iter().map(|&x| case.p_at(x)).collect();
        r.eps_p = cell_error(mesh, 1, p, &ex);
        r.eps_p_semi = cell_seminorm_error(mesh, p, &ex);
    }
    if let (Some(phi), true) = (&sol.phi, case.has_phi()) {
        check_len("temperature", phi.len(), nc)?;
        let ex: Vec<f64> = centers.iter().map(|&x| case.phi_at(x)).collect();
        r.eps_phi = cell_error(mesh, 1, phi, &ex);
    }
    if let Some(q) = &sol.q {
        check_len("flux", q.len(), nf)?;
        let ex: Vec<f64> = (0..nf)
            .map(|f| normal(case.darcy_flux(mesh.face_centers[f]), mesh.face_normals[f]))
            .collect();
        r.eps_q = face_error(mesh, 1, q, &ex);
    }
    if let Some(q) = &sol.q_phi {
        check_len("heat flux", q.len(), nf)?;
        let ex: Vec<f64> = (0..nf)
            .map(|f| normal(case.heat_flux(mesh.face_centers[f]), mesh.face_normals[f]))
            .collect();
        r.eps_q_phi = face_error(mesh, 1, q, &ex);
    }
    if let Some(w) = &sol.w {
        check_len("traction", w.len(), 2 * nf)?;
        let ex: Vec<f64> = (0..nf)
            .flat_map(|f| {
                let s = case.stress(mesh.face_centers[f]);
                let n = mesh.face_normals[f];
                [normal(s[0], n), normal(s[1], n)]
            })
            .collect();
        r.eps_pi = face_error(mesh, 2, w, &ex);
    }
    let (theta, c) = (case.params.theta, case.params.c);
    r.eps_up = r.eps_u + c * r.eps_p;
    r.eps_sigma = r.eps_u + r.eps_pi + (theta + c) * r.eps_p + theta * r.eps_q + r.eps_p_semi;
    Ok(r)
}
