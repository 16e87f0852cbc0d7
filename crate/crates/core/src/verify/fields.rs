//! Closed-form scalar fields with derivatives.

use std::f64::consts::PI;

use nalgebra::Matrix4;

use crate::error::{MpxaError, Result};
use crate::mesh::Point;
use crate::physics::Tensor2;

/// One-dimensional factor of a separable term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Factor {
    One,
    /// `t`
    Linear,
    /// `t (1 - t)`
    Bubble,
    /// `sin(2 pi t)`
    Sin2Pi,
}

impl Factor {
    /// Value, first and second derivative at `t`.
    pub fn eval(self, t: f64) -> [f64; 3] {
        match self {
            Factor::One => [1.0, 0.0, 0.0],
            Factor::Linear => [t, 1.0, 0.0],
            Factor::Bubble => [t * (1.0 - t), 1.0 - 2.0 * t, -2.0],
            Factor::Sin2Pi => {
                let w = 2.0 * PI;
                [(w * t).sin(), w * (w * t).cos(), -w * w * (w * t).sin()]
            }
        }
    }
}

/// `sum_i c_i f_i(x) g_i(y)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Separable {
    pub terms: Vec<(f64, Factor, Factor)>,
}

impl Separable {
    pub fn term(c: f64, fx: Factor, fy: Factor) -> Self {
        Separable { terms: vec![(c, fx, fy)] }
    }

    pub fn plus(mut self, c: f64, fx: Factor, fy: Factor) -> Self {
        self.terms.push((c, fx, fy));
        self
    }

    pub fn zero() -> Self {
        Separable::default()
    }

    /// `(value, gradient, Hessian)`.
    pub fn jet(&self, x: Point) -> (f64, [f64; 2], Tensor2) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        let mut h = [[0.0; 2]; 2];
        for &(c, fx, fy) in &self.terms {
            let a = fx.eval(x[0]);
            let b = fy.eval(x[1]);
            v += c * a[0] * b[0];
            g[0] += c * a[1] * b[0];
            g[1] += c * a[0] * b[1];
            h[0][0] += c * a[2] * b[0];
            h[0][1] += c * a[1] * b[1];
            h[1][1] += c * a[0] * b[2];
        }
        h[1][0] = h[0][1];
        (v, g, h)
    }

    pub fn value(&self, x: Point) -> f64 {
        self.jet(x).0
    }

    pub fn grad(&self, x: Point) -> [f64; 2] {
        self.jet(x).1
    }
}

/// Piecewise harmonic solution `r^a (a_i cos(a phi) + b_i sin(a phi))` around
/// `center` for permeability `k1` on `0 <= phi <= sector` and `k2` elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularField {
    pub center: Point,
    pub sector: f64,
    pub k: [f64; 2],
    pub alpha: f64,
    /// `(a_i, b_i)` per region.
    pub coef: [[f64; 2]; 2],
}

fn matching_matrix(alpha: f64, sector: f64, k1: f64, k2: f64) -> Matrix4<f64> {
    let (s2, c2) = (2.0 * PI * alpha).sin_cos();
    let (st, ct) = (alpha * sector).sin_cos();
    Matrix4::new(
        1.0, 0.0, -c2, -s2, //
        0.0, k1, k2 * s2, -k2 * c2, //
        ct, st, -ct, -st, //
        -k1 * st, k1 * ct, k2 * st, -k2 * ct,
    )
}

/// Determinant of the interface matching conditions (continuity of value and
/// normal flux on both rays) as a function of the exponent.
pub fn matching_determinant(alpha: f64, sector: f64, k1: f64, k2: f64) -> f64 {
    matching_matrix(alpha, sector, k1, k2).determinant()
}

/// Smallest exponent in `(0, 1]` with a nontrivial matching solution.
///
/// Equal permeabilities give the smooth limit `alpha = 1`.
pub fn singular_exponent(sector: f64, k1: f64, k2: f64) -> Result<f64> {
    if !(k1 > 0.0 && k2 > 0.0) || !(sector > 0.0 && sector < 2.0 * PI) {
        return Err(MpxaError::InvalidParameter("singular case needs k > 0 and a sector in (0, 2 pi)".into()));
    }
    if k1 == k2 {
        return Ok(1.0);
    }
    let f = |a: f64| matching_determinant(a, sector, k1, k2);
    let steps = 2000;
    let lo = 1e-3;
    let mut a0 = lo;
    let mut f0 = f(a0);
    for i in 1..=steps {
        let a1 = lo + (1.0 - lo) * i as f64 / steps as f64;
        let f1 = f(a1);
        if f0 == 0.0 {
            return Ok(a0);
        }
        if f0 * f1 < 0.0 {
            let (mut a, mut b, mut fa) = (a0, a1, f0);
            for _ in 0..200 {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
                if b - a < 1e-15 {
                    break;
                }
            }
            return Ok(0.5 * (a + b));
        }
        a0 = a1;
        f0 = f1;
    }
    Err(MpxaError::RootFinding(format!(
        "no matching exponent in (0, 1] for contrast {} and sector {sector}",
        k1 / k2
    )))
}

impl SingularField {
    pub fn new(center: Point, sector: f64, k1: f64, k2: f64) -> Result<Self> {
        let alpha = singular_exponent(sector, k1, k2)?;
        let m = matching_matrix(alpha, sector, k1, k2);
        let svd = m.svd(false, true);
        let v_t = svd.v_t.expect("requested");
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
        let mut v: Vec<f64> = v_t.row(imin).iter().copied().collect();
        let big = v.iter().copied().fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
        v.iter_mut().for_each(|x| *x /= big);
        Ok(SingularField { center, sector, k: [k1, k2], alpha, coef: [[v[0], v[1]], [v[2], v[3]]] })
    }

    /// `(r, phi in [0, 2 pi), region)`.
    pub fn polar(&self, x: Point) -> (f64, f64, usize) {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let mut phi = dy.atan2(dx);
        if phi < 0.0 {
            phi += 2.0 * PI;
        }
        let region = if phi <= self.sector + 1e-13 { 0 } else { 1 };
        ((dx * dx + dy * dy).sqrt(), phi, region)
    }

    pub fn permeability(&self, x: Point) -> f64 {
        self.k[self.polar(x).2]
    }

    pub fn value(&self, x: Point) -> f64 {
        let (r, phi, i) = self.polar(x);
        let [a, b] = self.coef[i];
        let (s, c) = (self.alpha * phi).sin_cos();
        r.powf(self.alpha) * (a * c + b * s)
    }

    pub fn grad(&self, x: Point) -> [f64; 2] {
        let (r, phi, i) = self.polar(x);
        if r == 0.0 {
            return [f64::NAN; 2];
        }
        let [a, b] = self.coef[i];
        let (s, c) = (self.alpha * phi).sin_cos();
        let scale = self.alpha * r.powf(self.alpha - 1.0);
        let dr = scale * (a * c + b * s);
        let dphi = scale * (-a * s + b * c);
        let (sp, cp) = phi.sin_cos();
        [dr * cp - dphi * sp, dr * sp + dphi * cp]
    }
}

/// Scalar fields used by the analytic cases.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarField {
    Separable(Separable),
    Singular(SingularField),
}

impl ScalarField {
    pub fn value(&self, x: Point) -> f64 {
        match self {
            ScalarField::Separable(s) => s.value(x),
            ScalarField::Singular(s) => s.value(x),
        }
    }

    pub fn grad(&self, x: Point) -> [f64; 2] {
        match self {
            ScalarField::Separable(s) => s.grad(x),
            ScalarField::Singular(s) => s.grad(x),
        }
    }

    /// Hessian; zero for the piecewise harmonic field away from its center.
    pub fn hessian(&self, x: Point) -> Tensor2 {
        match self {
            ScalarField::Separable(s) => s.jet(x).2,
            ScalarField::Singular(_) => [[0.0; 2]; 2],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_one_is_smooth() {
        assert_eq!(singular_exponent(2.0 * PI / 3.0, 1.0, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn exponent_for_contrast_hundred() {
        let a = singular_exponent(2.0 * PI / 3.0, 100.0, 1.0).unwrap();
        assert!((a - 0.7547).abs() < 1e-3, "{a}");
        assert!(matching_determinant(a, 2.0 * PI / 3.0, 100.0, 1.0).abs() < 1e-8);
    }
}
