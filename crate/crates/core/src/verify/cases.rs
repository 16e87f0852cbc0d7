//! Analytic test cases with consistent source terms.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::fields::{Factor, ScalarField, Separable, SingularField};
use crate::error::{MpxaError, Result};
use crate::mesh::Point;
use crate::physics::{Lame, Tensor2, IDENTITY};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseName {
    SmoothDarcy,
    SmoothBiot,
    #[serde(rename = "thermo_443")]
    Thermo443,
    SingularEigestad,
    Hydrostatic,
    RobustnessLayer,
}

impl CaseName {
    pub const ALL: [CaseName; 6] = [
        CaseName::SmoothDarcy,
        CaseName::SmoothBiot,
        CaseName::Thermo443,
        CaseName::SingularEigestad,
        CaseName::Hydrostatic,
        CaseName::RobustnessLayer,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::SmoothDarcy => "smooth_darcy",
            CaseName::SmoothBiot => "smooth_biot",
            CaseName::Thermo443 => "thermo_443",
            CaseName::SingularEigestad => "singular_eigestad",
            CaseName::Hydrostatic => "hydrostatic",
            CaseName::RobustnessLayer => "robustness_layer",
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = MpxaError;
    fn from_str(s: &str) -> Result<Self> {
        CaseName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| MpxaError::InvalidParameter(format!("unknown case '{s}'")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Physics {
    Darcy,
    Elasticity,
    Biot,
    Thermo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseParams {
    pub theta: f64,
    pub c: f64,
    pub kappa: Tensor2,
    pub lame: Lame,
    /// Isotropic Biot coefficient(s).
    pub alpha: f64,
    /// `k1 / k2` for the singular case.
    pub contrast: f64,
    pub sector_angle: f64,
    pub advection: bool,
}

impl Default for CaseParams {
    fn default() -> Self {
        CaseParams {
            theta: 1.0,
            c: 1.0,
            kappa: IDENTITY,
            lame: Lame::new(1.0, 1.0),
            alpha: 1.0,
            contrast: 100.0,
            sector_angle: 2.0 * PI / 3.0,
            advection: true,
        }
    }
}

/// Exact fields, fluxes and sources of one test problem on the unit square.
#[derive(Clone, Debug)]
pub struct AnalyticCase {
    pub name: CaseName,
    pub physics: Physics,
    pub params: CaseParams,
    pub u: Option<[Separable; 2]>,
    pub p: Option<ScalarField>,
    pub phi: Option<Separable>,
    /// Constant external Darcy field.
    pub g: [f64; 2],
}

fn thermo_fields() -> ([Separable; 2], Separable, Separable) {
    use Factor::*;
    let u = [Separable::term(1.0, Sin2Pi, Bubble), Separable::term(1.0, Sin2Pi, Sin2Pi)];
    let p = Separable::term(1.0, Sin2Pi, Bubble);
    let phi = Separable::term(1.0, Bubble, Bubble);
    (u, p, phi)
}

pub fn make_case(name: CaseName, params: CaseParams) -> Result<AnalyticCase> {
    if !(params.theta >= 0.0) || !(params.c >= 0.0) {
        return Err(MpxaError::InvalidParameter("theta and c must be nonnegative".into()));
    }
    let (u, p, phi) = thermo_fields();
    let mut case = AnalyticCase { name, physics: Physics::Darcy, params, u: None, p: None, phi: None, g: [0.0; 2] };
    match name {
        CaseName::SmoothDarcy => {
            case.p = Some(ScalarField::Separable(p));
        }
        CaseName::SmoothBiot => {
            case.physics = Physics::Biot;
            case.u = Some(u);
            case.p = Some(ScalarField::Separable(p));
        }
        CaseName::Thermo443 => {
            case.physics = Physics::Thermo;
            case.params.c = 1.0;
            case.params.theta = 1.0;
            case.params.kappa = IDENTITY;
            case.params.lame = Lame::new(1.0, 1.0);
            case.params.alpha = 1.0;
            case.u = Some(u);
            case.p = Some(ScalarField::Separable(p));
            case.phi = Some(phi);
        }
        CaseName::SingularEigestad => {
            if !(case.params.contrast > 0.0) {
                return Err(MpxaError::InvalidParameter("contrast must be positive".into()));
            }
            let field = SingularField::new([0.5, 0.5], case.params.sector_angle, case.params.contrast, 1.0)?;
            case.p = Some(ScalarField::Singular(field));
        }
        CaseName::Hydrostatic => {
            case.params.kappa = IDENTITY;
            case.p = Some(ScalarField::Separable(Separable::term(-1.0, Factor::One, Factor::Linear)));
            case.g = [0.0, -1.0];
        }
        CaseName::RobustnessLayer => {
            case.physics = Physics::Elasticity;
            case.u = Some(u);
        }
    }
    Ok(case)
}

fn contract(a: &Tensor2, b: &Tensor2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

fn mat_vec(a: &Tensor2, v: [f64; 2]) -> [f64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

impl AnalyticCase {
    pub fn has_u(&self) -> bool {
        self.u.is_some()
    }

    pub fn has_p(&self) -> bool {
        self.p.is_some()
    }

    pub fn has_phi(&self) -> bool {
        self.phi.is_some()
    }

    /// Permeability at `x` (region dependent for the singular case).
    pub fn kappa_at(&self, x: Point) -> Tensor2 {
        match &self.p {
            Some(ScalarField::Singular(s)) => {
                let k = s.permeability(x);
                [[k, 0.0], [0.0, k]]
            }
            _ => self.params.kappa,
        }
    }

    pub fn u_at(&self, x: Point) -> [f64; 2] {
        self.u.as_ref().map_or([0.0; 2], |u| [u[0].value(x), u[1].value(x)])
    }

    pub fn p_at(&self, x: Point) -> f64 {
        self.p.as_ref().map_or(0.0, |p| p.value(x))
    }

    pub fn phi_at(&self, x: Point) -> f64 {
        self.phi.as_ref().map_or(0.0, |f| f.value(x))
    }

    /// `grad u`, entry `[i][j] = d u_i / d x_j`.
    pub fn grad_u(&self, x: Point) -> Tensor2 {
        self.u.as_ref().map_or([[0.0; 2]; 2], |u| [u[0].grad(x), u[1].grad(x)])
    }

    fn coupling(&self) -> f64 {
        match self.physics {
            Physics::Biot | Physics::Thermo => self.params.alpha,
            _ => 0.0,
        }
    }

    /// Total stress `C eps(u) - alpha p I - alpha phi I`.
    pub fn stress(&self, x: Point) -> Tensor2 {
        let g = self.grad_u(x);
        let Lame { mu, lambda } = self.params.lame;
        let tr = g[0][0] + g[1][1];
        let iso = lambda * tr - self.coupling() * (self.p_at(x) + self.phi_at(x));
        [
            [2.0 * mu * g[0][0] + iso, mu * (g[0][1] + g[1][0])],
            [mu * (g[0][1] + g[1][0]), 2.0 * mu * g[1][1] + iso],
        ]
    }

    /// Darcy flux density `-kappa grad p + g`.
    pub fn darcy_flux(&self, x: Point) -> [f64; 2] {
        let gp = self.p.as_ref().map_or([0.0; 2], |p| p.grad(x));
        let k = mat_vec(&self.kappa_at(x), gp);
        [self.g[0] - k[0], self.g[1] - k[1]]
    }

    /// Heat flux density `-grad phi + phi tau_p` (advective part only when enabled).
    pub fn heat_flux(&self, x: Point) -> [f64; 2] {
        let Some(phi) = &self.phi else { return [0.0; 2] };
        let (v, g, _) = phi.jet(x);
        let mut t = [-g[0], -g[1]];
        if self.params.advection {
            let q = self.darcy_flux(x);
            t[0] += v * q[0];
            t[1] += v * q[1];
        }
        t
    }

    /// Divergence of the Darcy flux.
    fn div_darcy(&self, x: Point) -> f64 {
        self.p.as_ref().map_or(0.0, |p| -contract(&self.kappa_at(x), &p.hessian(x)))
    }

    /// Momentum source `div pi`.
    pub fn source_u(&self, x: Point) -> [f64; 2] {
        let Some(u) = &self.u else { return [0.0; 2] };
        let Lame { mu, lambda } = self.params.lame;
        let h = [u[0].jet(x).2, u[1].jet(x).2];
        let mut r = [0.0; 2];
        for i in 0..2 {
            let lap = h[i][0][0] + h[i][1][1];
            let grad_div = h[0][i][0] + h[1][i][1];
            r[i] = mu * lap + (mu + lambda) * grad_div;
        }
        let a = self.coupling();
        if a != 0.0 {
            let gp = self.p.as_ref().map_or([0.0; 2], |p| p.grad(x));
            let gf = self.phi.as_ref().map_or([0.0; 2], |f| f.grad(x));
            for i in 0..2 {
                r[i] -= a * (gp[i] + gf[i]);
            }
        }
        r
    }

    /// Mass source.
    pub fn source_p(&self, x: Point) -> f64 {
        let theta = self.params.theta;
        match self.physics {
            Physics::Darcy => self.div_darcy(x),
            Physics::Elasticity => 0.0,
            Physics::Biot | Physics::Thermo => {
                let g = self.grad_u(x);
                let mut r = self.params.alpha * (g[0][0] + g[1][1]) + self.params.c * self.p_at(x);
                if self.physics == Physics::Thermo {
                    r += self.phi_at(x);
                }
                r + theta * self.div_darcy(x)
            }
        }
    }

    /// Energy source (thermo only).
    pub fn source_phi(&self, x: Point) -> f64 {
        let Some(phi) = &self.phi else { return 0.0 };
        let g = self.grad_u(x);
        let (v, gphi, h) = phi.jet(x);
        let mut div = -(h[0][0] + h[1][1]);
        if self.params.advection {
            let q = self.darcy_flux(x);
            div += gphi[0] * q[0] + gphi[1] * q[1] + v * self.div_darcy(x);
        }
        self.params.alpha * (g[0][0] + g[1][1]) + self.p_at(x) + v + self.params.theta * div
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thermo_pressure_value() {
        let c = make_case(CaseName::Thermo443, CaseParams::default()).unwrap();
        assert!((c.p_at([0.25, 0.5]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn hydrostatic_has_zero_flux() {
        let c = make_case(CaseName::Hydrostatic, CaseParams::default()).unwrap();
        assert_eq!(c.darcy_flux([0.3, 0.7]), [0.0, 0.0]);
    }

    #[test]
    fn names_round_trip() {
        for n in CaseName::ALL {
            assert_eq!(n.as_str().parse::<CaseName>().unwrap(), n);
        }
    }
}
