//! Solve an analytic case numerically on a given mesh.

use serde::{Deserialize, Serialize};

use super::cases::{AnalyticCase, Physics};
use super::tpfa::tpfa_reference;
use crate::assembly::{boundary_data, integrate_source};
use crate::coupled::{discretize_biot, discretize_thermo, BiotParams, CoupledData, Field, ThermoParams};
use crate::error::{MpxaError, Result};
use crate::mesh::{build_subgrid, Mesh, Quadrature, SubGrid};
use crate::mpfa::discretize_darcy;
use crate::mpsa::discretize_elasticity;
use crate::physics::{scaled, BoundarySpec, IDENTITY};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DiscOptions {
    pub eta: f64,
    pub quadrature: Quadrature,
    pub mode: crate::physics::SymmetryMode,
    /// Replace MPFA by the two-point scheme (Darcy cases only).
    pub tpfa: bool,
    pub picard_tol: f64,
    pub max_picard: usize,
}

impl Default for DiscOptions {
    fn default() -> Self {
        DiscOptions {
            eta: 0.0,
            quadrature: Quadrature::SinglePoint,
            mode: crate::physics::SymmetryMode::Weak,
            tpfa: false,
            picard_tol: 1e-10,
            max_picard: 50,
        }
    }
}

/// Cell values and integrated face quantities of a numerical solution.
#[derive(Clone, Debug, Default)]
pub struct NumericalSolution {
    /// `cell * 2 + c`.
    pub u: Option<Vec<f64>>,
    pub p: Option<Vec<f64>>,
    pub phi: Option<Vec<f64>>,
    /// Darcy face fluxes.
    pub q: Option<Vec<f64>>,
    /// Face tractions, `face * 2 + c`.
    pub w: Option<Vec<f64>>,
    /// Total heat face fluxes.
    pub q_phi: Option<Vec<f64>>,
    pub dofs: usize,
    pub picard_iterations: usize,
}

fn scalar_data(mesh: &Mesh, sg: &SubGrid, bc: &BoundarySpec, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    boundary_data(mesh, sg, bc, 1, |x| vec![f(x)], |_, _| vec![0.0])
}

pub fn solve_case(case: &AnalyticCase, mesh: &Mesh, opts: &DiscOptions) -> Result<NumericalSolution> {
    let sg = build_subgrid(mesh, opts.eta, opts.quadrature)?;
    let nc = mesh.num_cells();
    let bc = BoundarySpec::dirichlet(mesh);
    let kappa: Vec<_> = mesh.cell_centers.iter().map(|&x| case.kappa_at(x)).collect();
    let lame = vec![case.params.lame; nc];
    let g: Vec<f64> = (0..nc).flat_map(|_| case.g).collect();
    let bc_p = scalar_data(mesh, &sg, &bc, |x| case.p_at(x));
    let bc_u = boundary_data(mesh, &sg, &bc, 2, |x| case.u_at(x).to_vec(), |_, _| vec![0.0; 2]);
    let mut out = NumericalSolution::default();
    match case.physics {
        Physics::Darcy => {
            let r = integrate_source(mesh, 1, |x| vec![case.source_p(x)]);
            let st = if opts.tpfa {
                tpfa_reference(mesh, &kappa, &bc)?
            } else {
                discretize_darcy(mesh, &sg, &kappa, &bc)?
            };
            let p = st.solve(mesh, &r, &g, &bc_p)?;
            out.q = Some(st.compute_fluxes(&p, &g, &bc_p)?);
            out.p = Some(p);
            out.dofs = nc;
        }
        Physics::Elasticity => {
            let r = integrate_source(mesh, 2, |x| case.source_u(x).to_vec());
            let st = discretize_elasticity(mesh, &sg, &lame, opts.mode, &bc)?;
            let chi = vec![0.0; 3 * nc];
            let u = st.solve(mesh, &r, &chi, &bc_u)?;
            out.w = Some(st.tractions_packed(&u, &chi, &bc_u)?);
            out.u = Some(u);
            out.dofs = 2 * nc;
        }
        Physics::Biot => {
            let a = case.params.alpha;
            let mut params =
                BiotParams::uniform(nc, scaled(IDENTITY, a), case.params.c, case.params.theta, case.params.kappa, case.params.lame);
            params.kappa = kappa;
            params.mode = opts.mode;
            let disc = discretize_biot(mesh, &sg, &params, &bc, &bc)?;
            let data = CoupledData {
                r_u: integrate_source(mesh, 2, |x| case.source_u(x).to_vec()),
                r_p: integrate_source(mesh, 1, |x| vec![case.source_p(x)]),
                g: g.clone(),
                bc_u: bc_u.clone(),
                bc_p: bc_p.clone(),
                ..Default::default()
            };
            let (x, _) = disc.system(&data)?.solve()?;
            let (u, p) = (x[&Field::U].clone(), x[&Field::P].clone());
            out.q = Some(disc.fluxes(&p, &g, &bc_p)?);
            out.w = Some(disc.tractions(&u, &p, &bc_u)?);
            out.u = Some(u);
            out.p = Some(p);
            out.dofs = 3 * nc;
        }
        Physics::Thermo => {
            let mut params = ThermoParams::unit(nc, case.params.advection);
            params.mode = opts.mode;
            let disc = discretize_thermo(mesh, &sg, &params, &bc, &bc, &bc)?;
            let data = CoupledData {
                r_u: integrate_source(mesh, 2, |x| case.source_u(x).to_vec()),
                r_p: integrate_source(mesh, 1, |x| vec![case.source_p(x)]),
                r_phi: integrate_source(mesh, 1, |x| vec![case.source_phi(x)]),
                g: g.clone(),
                bc_u: bc_u.clone(),
                bc_p: bc_p.clone(),
                bc_phi: scalar_data(mesh, &sg, &bc, |x| case.phi_at(x)),
            };
            let (state, report) =
                disc.picard_solve(mesh, &data, opts.picard_tol, opts.max_picard).map_err(|(e, _)| e)?;
            if report.linear_residual > 1e-9 {
                return Err(MpxaError::ResidualTooLarge { achieved: report.linear_residual, bound: 1e-9 });
            }
            out.q_phi = Some(disc.heat_fluxes(mesh, &data, &state)?);
            out.w = Some(disc.tractions(&state, &bc_u)?);
            out.q = Some(state.q_p.clone());
            out.picard_iterations = report.iterations;
            out.u = Some(state.u);
            out.p = Some(state.p);
            out.phi = Some(state.phi);
            out.dofs = 4 * nc;
        }
    }
    Ok(out)
}
