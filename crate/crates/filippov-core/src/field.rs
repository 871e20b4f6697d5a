//! Planar polynomial vector fields and the Lie-derivative engine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::{Box2, Vec2};
use crate::poly::Poly2;

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("contact order exceeds {max_order}: possible infinite-order contact")]
    MaxOrderExceeded { max_order: u32 },
    #[error("field components are both identically zero")]
    ZeroField,
    #[error("non-isolated equilibria detected (common zero curve)")]
    NonIsolatedEquilibria,
    #[error("degenerate switching: C = 0")]
    DegenerateSwitching,
}

/// A planar vector field with exact bivariate-polynomial components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyField {
    pub u: Poly2,
    pub v: Poly2,
}

impl PolyField {
    pub fn new(u: Poly2, v: Poly2) -> Self {
        Self { u, v }
    }

    pub fn eval(&self, p: Vec2) -> Vec2 {
        Vec2::new(self.u.eval(p.x, p.y), self.v.eval(p.x, p.y))
    }

    pub fn is_zero(&self) -> bool {
        self.u.is_zero() && self.v.is_zero()
    }
}

/// `X^order.f` computed by exact polynomial algebra:
/// `X^1.f = <X, grad f>` and `X^i.f = <grad(X^{i-1}.f), X>`.
pub fn lie_derivative(field: &PolyField, f: &Poly2, order: u32) -> Poly2 {
    assert!(order >= 1, "lie_derivative: order must be >= 1");
    let mut acc = f.clone();
    for _ in 0..order {
        acc = &(&acc.partial_x() * &field.u) + &(&acc.partial_y() * &field.v);
    }
    acc
}

/// Result of a contact-order query at a point of the switching curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    /// Smallest `n` with `X^n.f(p)` non-vanishing; 1 means transversal.
    pub order: u32,
    /// Sign of that Lie derivative.
    pub sign: i8,
    /// The non-vanishing value itself.
    pub value: f64,
}

/// Smallest `n <= max_order` with `|X^n.f(p)| > tan_tol`, with its sign.
pub fn contact_order_at(
    field: &PolyField,
    f: &Poly2,
    p: Vec2,
    max_order: u32,
    tan_tol: f64,
) -> Result<Contact, FieldError> {
    let mut lie = f.clone();
    for n in 1..=max_order {
        lie = &(&lie.partial_x() * &field.u) + &(&lie.partial_y() * &field.v);
        let val = lie.eval(p.x, p.y);
        if val.abs() > tan_tol {
            return Ok(Contact {
                order: n,
                sign: if val > 0.0 { 1 } else { -1 },
                value: val,
            });
        }
    }
    Err(FieldError::MaxOrderExceeded { max_order })
}

const EQ_GRID_MIN_CELL: f64 = 2e-5;
const EQ_CANDIDATE_CAP: usize = 40_000;
const EQ_NEWTON_ITERS: usize = 60;

/// All common zeros of `(u, v)` in `k`, isolated to `root_tol`.
///
/// A quadtree subdivision prunes cells where a first-order bound certifies
/// a component cannot vanish; surviving cells are polished by Newton and
/// deduplicated. A cell explosion signals a common zero curve.
pub fn equilibria(field: &PolyField, k: &Box2, root_tol: f64) -> Result<Vec<Vec2>, FieldError> {
    if field.is_zero() {
        return Err(FieldError::ZeroField);
    }
    let ux = field.u.partial_x();
    let uy = field.u.partial_y();
    let vx = field.v.partial_x();
    let vy = field.v.partial_y();

    let mut stack = vec![*k];
    let mut candidates: Vec<Box2> = Vec::new();
    while let Some(b) = stack.pop() {
        let c = b.center();
        let hx = 0.5 * b.width();
        let hy = 0.5 * b.height();
        let lip_u = bound_on_box(&ux, &b) * hx + bound_on_box(&uy, &b) * hy;
        let lip_v = bound_on_box(&vx, &b) * hx + bound_on_box(&vy, &b) * hy;
        let ucv = field.u.eval(c.x, c.y).abs();
        let vcv = field.v.eval(c.x, c.y).abs();
        if ucv > lip_u || vcv > lip_v {
            continue; // certified: no common zero in this cell
        }
        if hx.max(hy) < EQ_GRID_MIN_CELL {
            candidates.push(b);
            if candidates.len() > EQ_CANDIDATE_CAP {
                return Err(FieldError::NonIsolatedEquilibria);
            }
            continue;
        }
        let (mx, my) = (c.x, c.y);
        stack.push(Box2::new(b.xmin, mx, b.ymin, my));
        stack.push(Box2::new(mx, b.xmax, b.ymin, my));
        stack.push(Box2::new(b.xmin, mx, my, b.ymax));
        stack.push(Box2::new(mx, b.xmax, my, b.ymax));
    }

    let mut roots: Vec<Vec2> = Vec::new();
    for b in candidates {
        if let Some(r) = newton_polish(field, &ux, &uy, &vx, &vy, b.center(), root_tol) {
            if k.contains_with_margin(r, root_tol)
                && !roots.iter().any(|q| q.dist(r) < 1e3 * root_tol)
            {
                roots.push(r);
            }
        }
    }
    roots.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    Ok(roots)
}

/// Crude but safe sup bound of |p| over a box: sum of |c| * max|x|^i * max|y|^j.
fn bound_on_box(p: &Poly2, b: &Box2) -> f64 {
    let mx = b.xmin.abs().max(b.xmax.abs());
    let my = b.ymin.abs().max(b.ymax.abs());
    p.terms()
        .map(|(i, j, c)| c.abs() * mx.powi(i as i32) * my.powi(j as i32))
        .sum()
}

fn newton_polish(
    field: &PolyField,
    ux: &Poly2,
    uy: &Poly2,
    vx: &Poly2,
    vy: &Poly2,
    start: Vec2,
    tol: f64,
) -> Option<Vec2> {
    let mut p = start;
    for _ in 0..EQ_NEWTON_ITERS {
        let fu = field.u.eval(p.x, p.y);
        let fv = field.v.eval(p.x, p.y);
        if fu.abs().max(fv.abs()) < tol * 1e-2 {
            return Some(p);
        }
        let a = ux.eval(p.x, p.y);
        let b = uy.eval(p.x, p.y);
        let c = vx.eval(p.x, p.y);
        let d = vy.eval(p.x, p.y);
        let det = a * d - b * c;
        if det.abs() < 1e-14 {
            return None;
        }
        let dx = (fu * d - b * fv) / det;
        let dy = (a * fv - fu * c) / det;
        p = Vec2::new(p.x - dx, p.y - dy);
        if !p.x.is_finite() || !p.y.is_finite() {
            return None;
        }
    }
    let fu = field.u.eval(p.x, p.y);
    let fv = field.v.eval(p.x, p.y);
    (fu.abs().max(fv.abs()) < tol).then_some(p)
}

/// A discontinuous linear system split by the line `x = 0`:
/// `X(p) = A+ p + b+` on `x >= 0`, `Y(p) = A- p + b-` on `x <= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearSpec {
    pub a_plus: [[f64; 2]; 2],
    pub b_plus: [f64; 2],
    pub a_minus: [[f64; 2]; 2],
    pub b_minus: [f64; 2],
}

impl LinearSpec {
    pub fn field_plus(&self) -> PolyField {
        linear_field(&self.a_plus, &self.b_plus)
    }

    pub fn field_minus(&self) -> PolyField {
        linear_field(&self.a_minus, &self.b_minus)
    }

    /// Predicted tangency `(0, -b1/a12)` of the `+` side field, when defined.
    pub fn tangency_plus(&self) -> Option<Vec2> {
        predicted_tangency(&self.a_plus, &self.b_plus)
    }

    pub fn tangency_minus(&self) -> Option<Vec2> {
        predicted_tangency(&self.a_minus, &self.b_minus)
    }
}

fn predicted_tangency(a: &[[f64; 2]; 2], b: &[f64; 2]) -> Option<Vec2> {
    let a12 = a[0][1];
    (a12 != 0.0).then(|| Vec2::new(0.0, -b[0] / a12))
}

pub fn linear_field(a: &[[f64; 2]; 2], b: &[f64; 2]) -> PolyField {
    PolyField::new(
        Poly2::from_terms([(1, 0, a[0][0]), (0, 1, a[0][1]), (0, 0, b[0])]),
        Poly2::from_terms([(1, 0, a[1][0]), (0, 1, a[1][1]), (0, 0, b[1])]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The worked center-center pair used throughout the tests:
    /// two linear centers at (-2, 0) and (-1, 0).
    pub(crate) fn center_a() -> PolyField {
        PolyField::new(
            Poly2::from_terms([(1, 0, -0.5), (0, 1, -1.0), (0, 0, -1.0)]),
            Poly2::from_terms([(1, 0, 1.0), (0, 1, 0.5), (0, 0, 2.0)]),
        )
    }

    pub(crate) fn center_b() -> PolyField {
        PolyField::new(
            Poly2::from_terms([(1, 0, 1.0), (0, 1, 1.0), (0, 0, 1.0)]),
            Poly2::from_terms([(1, 0, -2.0), (0, 1, -1.0), (0, 0, -2.0)]),
        )
    }

    #[test]
    fn lie_of_f_x_is_first_component() {
        let f = Poly2::x();
        let lie = lie_derivative(&center_a(), &f, 1);
        assert_eq!(lie, center_a().u);
        // At (0, y) this is -y - 1.
        assert_eq!(lie.eval(0.0, 3.0), -4.0);
    }

    #[test]
    fn lie_of_zero_field_is_zero() {
        let zero = PolyField::new(Poly2::zero(), Poly2::zero());
        let f = Poly2::from_terms([(2, 0, 1.0), (0, 1, -3.0)]);
        assert!(lie_derivative(&zero, &f, 1).is_zero());
    }

    #[test]
    fn lie_hand_expansion_cross_check() {
        // field = (-y - 1, x), f = x^2 - 1: <X, grad f> = 2x(-y - 1).
        let field = PolyField::new(
            Poly2::from_terms([(0, 1, -1.0), (0, 0, -1.0)]),
            Poly2::x(),
        );
        let f = Poly2::from_terms([(2, 0, 1.0), (0, 0, -1.0)]);
        let lie = lie_derivative(&field, &f, 1);
        let expect = Poly2::from_terms([(1, 1, -2.0), (1, 0, -2.0)]);
        assert_eq!(lie, expect);
        // Evaluate both sides at a spread of points.
        for k in 0..20 {
            let x = -2.0 + 0.21 * k as f64;
            let y = 1.7 - 0.17 * k as f64;
            let direct = 2.0 * x * (-y - 1.0);
            assert!((lie.eval(x, y) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn contact_order_second_order_tangency() {
        // X^2.f(0, -1) = -3/2 for the first center field.
        let c = contact_order_at(&center_a(), &Poly2::x(), Vec2::new(0.0, -1.0), 8, 1e-9).unwrap();
        assert_eq!(c.order, 2);
        assert_eq!(c.sign, -1);
        assert!((c.value + 1.5).abs() < 1e-12);
    }

    #[test]
    fn contact_order_transversal() {
        let field = PolyField::new(Poly2::constant(1.0), Poly2::zero());
        let c = contact_order_at(&field, &Poly2::x(), Vec2::new(0.0, 0.3), 8, 1e-9).unwrap();
        assert_eq!((c.order, c.sign), (1, 1));
    }

    #[test]
    fn contact_order_three_zone_inner_field() {
        // Y = (-2y, x), f = x^2 - 1 at (1, 0): Y.f = -4xy vanishes, Y^2.f = 8y^2 - 4x^2 = -4.
        let field = PolyField::new(Poly2::from_terms([(0, 1, -2.0)]), Poly2::x());
        let f = Poly2::from_terms([(2, 0, 1.0), (0, 0, -1.0)]);
        let c = contact_order_at(&field, &f, Vec2::new(1.0, 0.0), 8, 1e-9).unwrap();
        assert_eq!(c.order, 2);
        assert_eq!(c.sign, -1);
        assert!((c.value + 4.0).abs() < 1e-12);
    }

    #[test]
    fn contact_order_infinite_contact_errors() {
        // Field parallel to Sigma: every Lie derivative of f = x vanishes.
        let field = PolyField::new(Poly2::zero(), Poly2::constant(1.0));
        let err = contact_order_at(&field, &Poly2::x(), Vec2::new(0.0, 0.0), 8, 1e-9).unwrap_err();
        assert_eq!(err, FieldError::MaxOrderExceeded { max_order: 8 });
    }

    #[test]
    fn equilibria_of_the_center_pair() {
        let k = Box2::new(-4.0, 4.0, -4.0, 4.0);
        let ra = equilibria(&center_a(), &k, 1e-10).unwrap();
        assert_eq!(ra.len(), 1);
        assert!(ra[0].dist(Vec2::new(-2.0, 0.0)) < 1e-8);
        let rb = equilibria(&center_b(), &k, 1e-10).unwrap();
        assert_eq!(rb.len(), 1);
        assert!(rb[0].dist(Vec2::new(-1.0, 0.0)) < 1e-8);
    }

    #[test]
    fn equilibria_linear_node() {
        let field = PolyField::new(Poly2::x(), Poly2::y());
        let k = Box2::new(-1.0, 1.0, -1.0, 1.0);
        let r = equilibria(&field, &k, 1e-10).unwrap();
        assert_eq!(r.len(), 1);
        assert!(r[0].dist(Vec2::new(0.0, 0.0)) < 1e-9);
    }

    #[test]
    fn equilibria_detects_zero_curve() {
        // u = v = x vanish on the whole y-axis.
        let field = PolyField::new(Poly2::x(), Poly2::x());
        let k = Box2::new(-1.0, 1.0, -1.0, 1.0);
        assert_eq!(
            equilibria(&field, &k, 1e-10).unwrap_err(),
            FieldError::NonIsolatedEquilibria
        );
    }

    #[test]
    fn linear_spec_tangency_formula() {
        let spec = LinearSpec {
            a_plus: [[-0.5, -1.0], [1.0, 0.5]],
            b_plus: [-1.0, 2.0],
            a_minus: [[1.0, 1.0], [-2.0, -1.0]],
            b_minus: [1.0, -2.0],
        };
        assert_eq!(spec.tangency_plus().unwrap(), Vec2::new(0.0, -1.0));
        assert_eq!(spec.tangency_minus().unwrap(), Vec2::new(0.0, -1.0));
        // a12 = 0 has no predicted tangency.
        let diag = LinearSpec {
            a_plus: [[1.0, 0.0], [0.0, 1.0]],
            b_plus: [0.0, 0.0],
            a_minus: [[1.0, 0.0], [0.0, 1.0]],
            b_minus: [0.0, 0.0],
        };
        assert!(diag.tangency_plus().is_none());
    }
}
