//! Biot poroelasticity and thermo-poroelasticity built from the MPFA and
//! MPSA stencils.
//!
//! Unknown ordering is field-major: all displacements (`cell * 2 + c`), then
//! pressures, then temperatures.

use std::collections::BTreeMap;

use crate::error::{MpxaError, Result};
use crate::linsolve::{solve_direct, Solution};
use crate::mesh::{BoundaryTag, Mesh, SubGrid};
use crate::mpfa::{check_len, discretize_darcy, FluxStencil};
use crate::mpsa::{discretize_elasticity, StressStencil};
use crate::physics::{is_symmetric, BoundarySpec, Lame, SymmetryMode, Tensor2};
use crate::{SparseMatrix, Triplets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    U,
    P,
    Phi,
}

/// Named sparse blocks keyed by (row field, column field).
#[derive(Clone, Debug, Default)]
pub struct BlockSystem {
    pub sizes: BTreeMap<Field, usize>,
    pub blocks: BTreeMap<(Field, Field), SparseMatrix>,
    pub rhs: BTreeMap<Field, Vec<f64>>,
}

impl BlockSystem {
    pub fn fields(&self) -> Vec<Field> {
        self.sizes.keys().copied().collect()
    }

    pub fn offset(&self, field: Field) -> usize {
        self.sizes.range(..field).map(|(_, n)| n).sum()
    }

    pub fn len(&self) -> usize {
        self.sizes.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block(&self, r: Field, c: Field) -> Option<&SparseMatrix> {
        self.blocks.get(&(r, c))
    }

    pub fn set_block(&mut self, r: Field, c: Field, m: SparseMatrix) {
        debug_assert_eq!(m.rows(), self.sizes[&r]);
        debug_assert_eq!(m.cols(), self.sizes[&c]);
        self.blocks.insert((r, c), m);
    }

    /// Add `m` to block `(r, c)`.
    pub fn add_to_block(&mut self, r: Field, c: Field, m: &SparseMatrix) -> Result<()> {
        let sum = match self.blocks.get(&(r, c)) {
            Some(b) => b.add(m)?,
            None => m.clone(),
        };
        self.blocks.insert((r, c), sum);
        Ok(())
    }

    pub fn matrix(&self) -> SparseMatrix {
        let n = self.len();
        let nnz = self.blocks.values().map(|b| b.nnz()).sum();
        let mut t = Triplets::with_capacity(n, n, nnz);
        for (&(r, c), b) in &self.blocks {
            t.push_block(self.offset(r), self.offset(c), b, 1.0);
        }
        t.finalize().expect("blocks fit")
    }

    pub fn rhs_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        for (f, &n) in &self.sizes {
            match self.rhs.get(f) {
                Some(r) => out.extend_from_slice(r),
                None => out.extend(std::iter::repeat_n(0.0, n)),
            }
        }
        out
    }

    pub fn split(&self, x: &[f64]) -> BTreeMap<Field, Vec<f64>> {
        self.sizes
            .keys()
            .map(|&f| {
                let o = self.offset(f);
                (f, x[o..o + self.sizes[&f]].to_vec())
            })
            .collect()
    }

    pub fn solve(&self) -> Result<(BTreeMap<Field, Vec<f64>>, Solution<f64>)> {
        let sol = solve_direct(&self.matrix(), &self.rhs_vector())?;
        Ok((self.split(&sol.x), sol))
    }
}

#[derive(Clone, Debug)]
pub struct BiotParams {
    pub alpha: Vec<Tensor2>,
    pub c: Vec<f64>,
    pub theta: f64,
    pub kappa: Vec<Tensor2>,
    pub lame: Vec<Lame>,
    pub mode: SymmetryMode,
}

impl BiotParams {
    /// Same coefficients in every cell.
    pub fn uniform(n: usize, alpha: Tensor2, c: f64, theta: f64, kappa: Tensor2, lame: Lame) -> Self {
        BiotParams {
            alpha: vec![alpha; n],
            c: vec![c; n],
            theta,
            kappa: vec![kappa; n],
            lame: vec![lame; n],
            mode: SymmetryMode::Weak,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.alpha.len() != n || self.c.len() != n || self.kappa.len() != n || self.lame.len() != n {
            return Err(MpxaError::DimensionMismatch("Biot parameters per cell".into()));
        }
        if !(self.theta >= 0.0) {
            return Err(MpxaError::InvalidParameter(format!("theta = {} < 0", self.theta)));
        }
        if self.c.iter().any(|&c| !(c >= 0.0)) {
            return Err(MpxaError::InvalidParameter("negative compressibility".into()));
        }
        if self.alpha.iter().any(|a| !is_symmetric(a)) {
            return Err(MpxaError::InvalidParameter("Biot tensor is not symmetric".into()));
        }
        Ok(())
    }
}

/// `chi = -alpha p` as a map from cell scalars to packed cell tensors.
pub fn stress_from_scalar(alpha: &[Tensor2]) -> SparseMatrix {
    let n = alpha.len();
    let mut t = Triplets::new(3 * n, n);
    for (k, a) in alpha.iter().enumerate() {
        for (e, v) in [a[0][0], a[1][1], a[0][1]].into_iter().enumerate() {
            if v != 0.0 {
                t.push(3 * k + e, k, -v);
            }
        }
    }
    t.finalize().expect("in range")
}

/// Cell sums of `V_j alpha_k : grad_j` over the subcells of each cell.
pub fn volumetric_coupling(subgrid: &SubGrid, n_cells: usize, alpha: &[Tensor2]) -> SparseMatrix {
    let mut t = Triplets::new(n_cells, 4 * subgrid.num_subcells());
    for (j, sc) in subgrid.subcells.iter().enumerate() {
        let a = alpha[sc.cell];
        for i in 0..2 {
            for l in 0..2 {
                if a[i][l] != 0.0 {
                    t.push(sc.cell, 4 * j + 2 * i + l, sc.volume * a[i][l]);
                }
            }
        }
    }
    t.finalize().expect("in range")
}

fn cell_diagonal(mesh: &Mesh, coef: &[f64]) -> SparseMatrix {
    let d: Vec<f64> = coef.iter().zip(&mesh.cell_volumes).map(|(c, m)| c * m).collect();
    SparseMatrix::from_diagonal(&d)
}

fn mm(a: &SparseMatrix, b: &SparseMatrix) -> SparseMatrix {
    a.matmul(b).expect("conforming shapes")
}

/// Coupling operators derived from the mechanics stencil for one Biot tensor.
#[derive(Clone, Debug)]
pub struct Coupling {
    /// `chi = a_chi * s` for a cell scalar `s`.
    pub a_chi: SparseMatrix,
    /// `W_s = W_chi a_chi`.
    pub w: SparseMatrix,
    /// `V alpha :` summed per cell.
    pub a1: SparseMatrix,
    /// `J_u = a1 grad_u`.
    pub j_u: SparseMatrix,
    /// `J_bc = a1 grad_bc`.
    pub j_bc: SparseMatrix,
}

impl Coupling {
    pub fn new(subgrid: &SubGrid, stress: &StressStencil, alpha: &[Tensor2]) -> Self {
        let n = alpha.len();
        let a_chi = stress_from_scalar(alpha);
        let w = mm(&stress.w_chi, &a_chi);
        let a1 = volumetric_coupling(subgrid, n, alpha);
        let j_u = mm(&a1, &stress.grad_map);
        let j_bc = mm(&a1, &stress.grad_bc);
        Coupling { a_chi, w, a1, j_u, j_bc }
    }

    /// `J` from a scalar whose stress is `other.a_chi`.
    pub fn j_scalar(&self, stress: &StressStencil, other: &Coupling) -> SparseMatrix {
        mm(&mm(&self.a1, &stress.grad_chi), &other.a_chi)
    }
}

/// Assembled Biot discretization: operators plus the block matrix.
#[derive(Clone, Debug)]
pub struct BiotDiscretization {
    pub flow: FluxStencil,
    pub stress: StressStencil,
    pub coupling: Coupling,
    pub j_p: SparseMatrix,
    pub c_mat: SparseMatrix,
    pub theta: f64,
    /// Matrix blocks; right-hand sides are filled by [`BiotDiscretization::system`].
    pub blocks: BlockSystem,
}

pub fn discretize_biot(
    mesh: &Mesh,
    subgrid: &SubGrid,
    params: &BiotParams,
    bc_flow: &BoundarySpec,
    bc_mech: &BoundarySpec,
) -> Result<BiotDiscretization> {
    params.validate(mesh.num_cells())?;
    let flow = discretize_darcy(mesh, subgrid, &params.kappa, bc_flow)?;
    let stress = discretize_elasticity(mesh, subgrid, &params.lame, params.mode, bc_mech)?;
    Ok(biot_from_parts(mesh, subgrid, flow, stress, &params.alpha, &params.c, params.theta))
}

fn biot_from_parts(
    mesh: &Mesh,
    subgrid: &SubGrid,
    flow: FluxStencil,
    stress: StressStencil,
    alpha: &[Tensor2],
    c: &[f64],
    theta: f64,
) -> BiotDiscretization {
    let nc = mesh.num_cells();
    let coupling = Coupling::new(subgrid, &stress, alpha);
    let j_p = coupling.j_scalar(&stress, &coupling);
    let c_mat = cell_diagonal(mesh, c);
    let mut blocks = BlockSystem::default();
    blocks.sizes.insert(Field::U, 2 * nc);
    blocks.sizes.insert(Field::P, nc);
    blocks.set_block(Field::U, Field::U, stress.system_matrix());
    blocks.set_block(Field::U, Field::P, mm(&stress.div, &coupling.w));
    blocks.set_block(Field::P, Field::U, coupling.j_u.clone());
    let pp = c_mat
        .add(&flow.system_matrix().scale(theta))
        .and_then(|m| m.add(&j_p))
        .expect("square blocks");
    blocks.set_block(Field::P, Field::P, pp);
    BiotDiscretization { flow, stress, coupling, j_p, c_mat, theta, blocks }
}

/// Data entering the right-hand side of a coupled solve.
#[derive(Clone, Debug, Default)]
pub struct CoupledData {
    /// Integrated momentum source (`cell * 2 + c`).
    pub r_u: Vec<f64>,
    /// Integrated mass source.
    pub r_p: Vec<f64>,
    /// Integrated energy source (thermo only).
    pub r_phi: Vec<f64>,
    /// External Darcy field `g` (`cell * 2 + c`).
    pub g: Vec<f64>,
    pub bc_u: Vec<f64>,
    pub bc_p: Vec<f64>,
    pub bc_phi: Vec<f64>,
}

fn sub_into(target: &mut [f64], m: &SparseMatrix, x: &[f64], scale: f64) -> Result<()> {
    let y = m.mul_vec(x)?;
    target.iter_mut().zip(&y).for_each(|(t, v)| *t -= scale * v);
    Ok(())
}

impl BiotDiscretization {
    /// Block system with right-hand sides
    /// `r_u - D_u W_bc d_u` and `r_p - theta D (Q_g g + Q_bc d_p) - J_bc d_u`.
    pub fn system(&self, data: &CoupledData) -> Result<BlockSystem> {
        let nc = self.flow.num_cells();
        check_len("r_u", data.r_u.len(), 2 * nc)?;
        check_len("r_p", data.r_p.len(), nc)?;
        let mut sys = self.blocks.clone();
        let mut ru = data.r_u.clone();
        sub_into(&mut ru, &mm(&self.stress.div, &self.stress.w_bc), &data.bc_u, 1.0)?;
        let mut rp = data.r_p.clone();
        let zero = vec![0.0; nc];
        let q0 = self.flow.compute_fluxes(&zero, &data.g, &data.bc_p)?;
        sub_into(&mut rp, &self.flow.div, &q0, self.theta)?;
        sub_into(&mut rp, &self.coupling.j_bc, &data.bc_u, 1.0)?;
        sys.rhs.insert(Field::U, ru);
        sys.rhs.insert(Field::P, rp);
        Ok(sys)
    }

    /// Face tractions for the solved state.
    pub fn tractions(&self, u: &[f64], p: &[f64], bc_u: &[f64]) -> Result<Vec<f64>> {
        let a = self.stress.w_u.mul_vec(u)?;
        let b = self.coupling.w.mul_vec(p)?;
        let c = self.stress.w_bc.mul_vec(bc_u)?;
        Ok((0..a.len()).map(|i| a[i] + b[i] + c[i]).collect())
    }

    pub fn fluxes(&self, p: &[f64], g: &[f64], bc_p: &[f64]) -> Result<Vec<f64>> {
        self.flow.compute_fluxes(p, g, bc_p)
    }
}

#[derive(Clone, Debug)]
pub struct ThermoParams {
    pub alpha_p: Vec<Tensor2>,
    pub alpha_phi: Vec<Tensor2>,
    pub c_pp: Vec<f64>,
    pub c_pphi: Vec<f64>,
    pub c_phip: Vec<f64>,
    pub c_phiphi: Vec<f64>,
    pub kappa_p: Vec<Tensor2>,
    pub kappa_phi: Vec<Tensor2>,
    pub lame: Vec<Lame>,
    pub theta: f64,
    pub mode: SymmetryMode,
    /// Include the advective heat flux `phi * q_p`.
    pub advection: bool,
}

impl ThermoParams {
    /// Every coefficient equal to one (isotropic tensors), weak symmetry.
    pub fn unit(n: usize, advection: bool) -> Self {
        let i = crate::physics::IDENTITY;
        ThermoParams {
            alpha_p: vec![i; n],
            alpha_phi: vec![i; n],
            c_pp: vec![1.0; n],
            c_pphi: vec![1.0; n],
            c_phip: vec![1.0; n],
            c_phiphi: vec![1.0; n],
            kappa_p: vec![i; n],
            kappa_phi: vec![i; n],
            lame: vec![Lame::new(1.0, 1.0); n],
            theta: 1.0,
            mode: SymmetryMode::Weak,
            advection,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let lens = [
            self.alpha_p.len(),
            self.alpha_phi.len(),
            self.c_pp.len(),
            self.c_pphi.len(),
            self.c_phip.len(),
            self.c_phiphi.len(),
            self.kappa_p.len(),
            self.kappa_phi.len(),
            self.lame.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(MpxaError::DimensionMismatch("thermo parameters per cell".into()));
        }
        if !(self.theta >= 0.0) {
            return Err(MpxaError::InvalidParameter(format!("theta = {} < 0", self.theta)));
        }
        if self.alpha_p.iter().chain(&self.alpha_phi).any(|a| !is_symmetric(a)) {
            return Err(MpxaError::InvalidParameter("coupling tensor is not symmetric".into()));
        }
        Ok(())
    }
}

/// Upstream selection of face temperatures from Darcy fluxes.
///
/// Row `σ` has a single `1` in column `cell_lo` when `q_σ >= 0` and in
/// `cell_hi` otherwise. Boundary inflow faces (`q_σ < 0`) have an empty row;
/// their temperature comes from boundary data.
pub fn upstream_selector(mesh: &Mesh, q: &[f64]) -> SparseMatrix {
    let mut t = Triplets::new(mesh.num_faces(), mesh.num_cells());
    for (f, face) in mesh.faces.iter().enumerate() {
        if q[f] >= 0.0 {
            t.push(f, face.cell_lo, 1.0);
        } else if let Some(hi) = face.cell_hi {
            t.push(f, hi, 1.0);
        }
    }
    t.finalize().expect("in range")
}

/// Re-evaluates the advective heat-flux contribution for a frozen upstream state.
#[derive(Clone, Debug)]
pub struct AdvectionHook {
    pub theta: f64,
    pub enabled: bool,
    pub q_pp: SparseMatrix,
    pub div: SparseMatrix,
    /// Face values of Dirichlet temperature data (mean over the face's subfaces).
    pub boundary_phi: Vec<Option<f64>>,
}

impl AdvectionHook {
    /// Face temperatures `phi*` for cell temperatures `phi` and fluxes `q`.
    pub fn face_values(&self, mesh: &Mesh, phi: &[f64], q: &[f64]) -> Vec<f64> {
        let sel = upstream_selector(mesh, q);
        let mut v = sel.mul_vec(phi).expect("sizes");
        for (f, face) in mesh.faces.iter().enumerate() {
            if face.is_boundary() && q[f] < 0.0 {
                v[f] = self.boundary_phi[f].unwrap_or(phi[face.cell_lo]);
            }
        }
        v
    }

    /// `(theta D diag(phi*) Q_pp, theta D diag(phi*) q0)` where `q0` is the
    /// pressure-independent part of the Darcy flux.
    pub fn linearize(&self, face_phi: &[f64], q0: &[f64]) -> (SparseMatrix, Vec<f64>) {
        let scaled = SparseMatrix::from_diagonal(face_phi);
        let block = mm(&self.div, &mm(&scaled, &self.q_pp)).scale(self.theta);
        let f: Vec<f64> = face_phi.iter().zip(q0).map(|(a, b)| a * b).collect();
        let r = self.div.mul_vec(&f).expect("sizes").iter().map(|v| self.theta * v).collect();
        (block, r)
    }
}

#[derive(Clone, Debug)]
pub struct ThermoDiscretization {
    pub biot: BiotDiscretization,
    pub heat: FluxStencil,
    pub coupling_phi: Coupling,
    pub blocks: BlockSystem,
    pub hook: AdvectionHook,
    pub bc_phi: BoundarySpec,
}

pub fn discretize_thermo(
    mesh: &Mesh,
    subgrid: &SubGrid,
    params: &ThermoParams,
    bc_flow: &BoundarySpec,
    bc_mech: &BoundarySpec,
    bc_heat: &BoundarySpec,
) -> Result<ThermoDiscretization> {
    let nc = mesh.num_cells();
    params.validate(nc)?;
    let flow = discretize_darcy(mesh, subgrid, &params.kappa_p, bc_flow)?;
    let stress = discretize_elasticity(mesh, subgrid, &params.lame, params.mode, bc_mech)?;
    let heat = discretize_darcy(mesh, subgrid, &params.kappa_phi, bc_heat)?;
    let biot = biot_from_parts(mesh, subgrid, flow, stress, &params.alpha_p, &params.c_pp, params.theta);
    let cp = &biot.coupling;
    let cphi = Coupling::new(subgrid, &biot.stress, &params.alpha_phi);
    let st = &biot.stress;

    let mut blocks = biot.blocks.clone();
    blocks.sizes.insert(Field::Phi, nc);
    blocks.set_block(Field::U, Field::Phi, mm(&st.div, &cphi.w));
    let p_phi = cell_diagonal(mesh, &params.c_pphi).add(&cp.j_scalar(st, &cphi))?;
    blocks.set_block(Field::P, Field::Phi, p_phi);
    blocks.set_block(Field::Phi, Field::U, cphi.j_u.clone());
    let phi_p = cell_diagonal(mesh, &params.c_phip).add(&cphi.j_scalar(st, cp))?;
    blocks.set_block(Field::Phi, Field::P, phi_p);
    let phi_phi = cell_diagonal(mesh, &params.c_phiphi)
        .add(&heat.system_matrix().scale(params.theta))?
        .add(&cphi.j_scalar(st, &cphi))?;
    blocks.set_block(Field::Phi, Field::Phi, phi_phi);

    let hook = AdvectionHook {
        theta: params.theta,
        enabled: params.advection,
        q_pp: biot.flow.q_p.clone(),
        div: biot.flow.div.clone(),
        boundary_phi: vec![None; mesh.num_faces()],
    };
    Ok(ThermoDiscretization { biot, heat, coupling_phi: cphi, blocks, hook, bc_phi: bc_heat.clone() })
}

/// Outcome of [`ThermoDiscretization::picard_solve`].
#[derive(Clone, Debug)]
pub struct PicardReport {
    pub iterations: usize,
    /// Relative change per iteration (max over fields).
    pub history: Vec<f64>,
    /// Relative residual of the final linear solve.
    pub linear_residual: f64,
    /// Relative residual of the final state in the nonlinear system.
    pub nonlinear_residual: f64,
}

#[derive(Clone, Debug)]
pub struct ThermoState {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub phi: Vec<f64>,
    pub q_p: Vec<f64>,
}

fn rel_change(new: &[f64], old: &[f64]) -> f64 {
    let d: f64 = new.iter().zip(old).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let n: f64 = new.iter().map(|a| a * a).sum::<f64>().sqrt();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

impl ThermoDiscretization {
    /// Linear part of the right-hand sides (everything except advection).
    fn base_system(&self, data: &CoupledData) -> Result<BlockSystem> {
        let nc = self.heat.num_cells();
        check_len("r_phi", data.r_phi.len(), nc)?;
        let mut sys = self.biot.system(data)?;
        for (k, v) in &self.blocks.blocks {
            sys.blocks.insert(*k, v.clone());
        }
        sys.sizes = self.blocks.sizes.clone();
        let mut rphi = data.r_phi.clone();
        let zero = vec![0.0; nc];
        let qh = self.heat.compute_fluxes(&zero, &vec![0.0; 2 * nc], &data.bc_phi)?;
        sub_into(&mut rphi, &self.heat.div, &qh, self.hook.theta)?;
        sub_into(&mut rphi, &self.coupling_phi.j_bc, &data.bc_u, 1.0)?;
        sys.rhs.insert(Field::Phi, rphi);
        Ok(sys)
    }

    fn face_boundary_phi(&self, mesh: &Mesh, bc_phi: &[f64]) -> Vec<Option<f64>> {
        (0..mesh.num_faces())
            .map(|f| match self.bc_phi.tag(f) {
                Some(BoundaryTag::Dirichlet) => Some(0.5 * (bc_phi[2 * f] + bc_phi[2 * f + 1])),
                _ => None,
            })
            .collect()
    }

    /// Linearized system with the advective term frozen at `(phi, q_p)`.
    pub fn linearized_system(
        &self,
        mesh: &Mesh,
        data: &CoupledData,
        phi: &[f64],
        q_p: &[f64],
    ) -> Result<BlockSystem> {
        let mut sys = self.base_system(data)?;
        if self.hook.enabled {
            let mut hook = self.hook.clone();
            hook.boundary_phi = self.face_boundary_phi(mesh, &data.bc_phi);
            let face_phi = hook.face_values(mesh, phi, q_p);
            let nc = mesh.num_cells();
            let q0 = self.biot.flow.compute_fluxes(&vec![0.0; nc], &data.g, &data.bc_p)?;
            let (block, r) = hook.linearize(&face_phi, &q0);
            sys.add_to_block(Field::Phi, Field::P, &block)?;
            let rphi = sys.rhs.get_mut(&Field::Phi).expect("set");
            rphi.iter_mut().zip(&r).for_each(|(a, b)| *a -= b);
        }
        Ok(sys)
    }

    /// Frozen-coefficient iteration on the advective term. Starts from the
    /// solution without advection; stops when every field changes by less
    /// than `tol` (relative) between iterates.
    pub fn picard_solve(
        &self,
        mesh: &Mesh,
        data: &CoupledData,
        tol: f64,
        max_iter: usize,
    ) -> std::result::Result<(ThermoState, PicardReport), (MpxaError, Option<ThermoState>)> {
        if !(tol > 0.0) {
            return Err((MpxaError::InvalidParameter("tolerance must be positive".into()), None));
        }
        let solve_state = |sys: &BlockSystem| -> Result<(ThermoState, f64)> {
            let (x, sol) = sys.solve()?;
            let p = x[&Field::P].clone();
            let q_p = self.biot.flow.compute_fluxes(&p, &data.g, &data.bc_p)?;
            Ok((ThermoState { u: x[&Field::U].clone(), p, phi: x[&Field::Phi].clone(), q_p }, sol.residual))
        };
        let base = self.base_system(data).map_err(|e| (e, None))?;
        let (mut state, mut lin_res) = solve_state(&base).map_err(|e| (e, None))?;
        let mut history = Vec::new();
        let mut iterations = 1;
        if self.hook.enabled {
            loop {
                if iterations >= max_iter {
                    let last = history.last().copied().unwrap_or(f64::INFINITY);
                    return Err((
                        MpxaError::NonConvergence { iterations, last_change: last },
                        Some(state),
                    ));
                }
                let sys = self
                    .linearized_system(mesh, data, &state.phi, &state.q_p)
                    .map_err(|e| (e, Some(state.clone())))?;
                let (next, res) = solve_state(&sys).map_err(|e| (e, Some(state.clone())))?;
                iterations += 1;
                let change = rel_change(&next.u, &state.u)
                    .max(rel_change(&next.p, &state.p))
                    .max(rel_change(&next.phi, &state.phi));
                history.push(change);
                state = next;
                lin_res = res;
                if change < tol {
                    break;
                }
            }
        }
        let nonlinear_residual = self.nonlinear_residual(mesh, data, &state).map_err(|e| (e, Some(state.clone())))?;
        Ok((state, PicardReport { iterations, history, linear_residual: lin_res, nonlinear_residual }))
    }

    /// `‖F(x)‖ / ‖b‖` of the nonlinear system at `state`.
    pub fn nonlinear_residual(&self, mesh: &Mesh, data: &CoupledData, state: &ThermoState) -> Result<f64> {
        let sys = self.linearized_system(mesh, data, &state.phi, &state.q_p)?;
        let a = sys.matrix();
        let x: Vec<f64> = state.u.iter().chain(&state.p).chain(&state.phi).copied().collect();
        let b = sys.rhs_vector();
        let ax = a.mul_vec(&x)?;
        let r: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok(if bn > 0.0 { r / bn } else { r })
    }

    /// Conductive plus advective heat fluxes.
    pub fn heat_fluxes(&self, mesh: &Mesh, data: &CoupledData, state: &ThermoState) -> Result<Vec<f64>> {
        let nc = mesh.num_cells();
        let mut q = self.heat.compute_fluxes(&state.phi, &vec![0.0; 2 * nc], &data.bc_phi)?;
        if self.hook.enabled {
            let mut hook = self.hook.clone();
            hook.boundary_phi = self.face_boundary_phi(mesh, &data.bc_phi);
            let fp = hook.face_values(mesh, &state.phi, &state.q_p);
            q.iter_mut().zip(fp.iter().zip(&state.q_p)).for_each(|(a, (f, qp))| *a += f * qp);
        }
        Ok(q)
    }

    pub fn tractions(&self, state: &ThermoState, bc_u: &[f64]) -> Result<Vec<f64>> {
        let mut w = self.biot.tractions(&state.u, &state.p, bc_u)?;
        let extra = self.coupling_phi.w.mul_vec(&state.phi)?;
        w.iter_mut().zip(&extra).for_each(|(a, b)| *a += b);
        Ok(w)
    }
}
