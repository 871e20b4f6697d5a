//! The piecewise-smooth system: two polynomial fields split by a switching
//! curve inside a compact box.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{CurveError, SigmaChart, SwitchingCurve};
use crate::field::{equilibria, linear_field, lie_derivative, FieldError, LinearSpec, PolyField};
use crate::geom::{Box2, Vec2};
use crate::poly::Poly2;
use crate::tol::Tolerances;

#[derive(Debug, Error)]
pub enum SystemError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Which side field is meant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    /// Field active on `f >= 0`.
    X,
    /// Field active on `f <= 0`.
    Y,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::X => Side::Y,
            Side::Y => Side::X,
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::X => write!(f, "X"),
            Side::Y => write!(f, "Y"),
        }
    }
}

/// Warnings from the hypothesis checks. Violations do not abort construction
/// so that violating systems can still be explored; analyses that depend on a
/// hypothesis fail with a hard error instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HypothesisWarning {
    /// (Z1) a side field has a curve of equilibria or too many zeros in `K`.
    NonFiniteEquilibria { side: Side },
    /// (Z3) a side field has more than one tangency point on a chart.
    MultipleTangencies { side: Side, chart: usize, count: usize },
    /// A side field is tangent to the whole chart (its Lie derivative
    /// restriction vanishes identically).
    IdenticallyTangent { side: Side, chart: usize },
}

impl std::fmt::Display for HypothesisWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::NonFiniteEquilibria { side } => {
                write!(f, "(Z1) field {side} has non-finite equilibria in K")
            }
            Self::MultipleTangencies { side, chart, count } => write!(
                f,
                "(Z3) field {side} has {count} tangency points on chart {chart}"
            ),
            Self::IdenticallyTangent { side, chart } => {
                write!(f, "field {side} is identically tangent to chart {chart}")
            }
        }
    }
}

/// A planar discontinuous vector field `Z = (X, Y)` with `X` active on
/// `f >= 0`, `Y` on `f <= 0`, restricted to the box `K`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PiecewiseSystem {
    pub curve: SwitchingCurve,
    pub x_field: PolyField,
    pub y_field: PolyField,
    pub k: Box2,
    pub tol: Tolerances,
    /// Cached first Lie derivatives of `f` along each side field.
    lie1_x: Poly2,
    lie1_y: Poly2,
}

impl PiecewiseSystem {
    pub fn new(
        curve: SwitchingCurve,
        x_field: PolyField,
        y_field: PolyField,
        k: Box2,
        tol: Tolerances,
    ) -> Result<Self, SystemError> {
        curve.validate(tol.on_sigma)?;
        let lie1_x = lie_derivative(&x_field, &curve.f, 1);
        let lie1_y = lie_derivative(&y_field, &curve.f, 1);
        Ok(Self {
            curve,
            x_field,
            y_field,
            k,
            tol,
            lie1_x,
            lie1_y,
        })
    }

    pub fn f(&self) -> &Poly2 {
        &self.curve.f
    }

    pub fn field(&self, side: Side) -> &PolyField {
        match side {
            Side::X => &self.x_field,
            Side::Y => &self.y_field,
        }
    }

    /// Cached `X.f` / `Y.f`.
    pub fn lie1(&self, side: Side) -> &Poly2 {
        match side {
            Side::X => &self.lie1_x,
            Side::Y => &self.lie1_y,
        }
    }

    pub fn lie1_at(&self, side: Side, p: Vec2) -> f64 {
        self.lie1(side).eval(p.x, p.y)
    }

    pub fn chart(&self, idx: usize) -> &SigmaChart {
        &self.curve.charts[idx]
    }

    /// Run the (Z1)/(Z3) hypothesis checks, returning warnings.
    pub fn check_hypotheses(&self) -> Vec<HypothesisWarning> {
        let mut warnings = Vec::new();
        for side in [Side::X, Side::Y] {
            match equilibria(self.field(side), &self.k, self.tol.root) {
                Ok(_) => {}
                Err(FieldError::ZeroField) => {}
                Err(_) => warnings.push(HypothesisWarning::NonFiniteEquilibria { side }),
            }
            for (ci, chart) in self.curve.charts.iter().enumerate() {
                match chart.roots_along(self.lie1(side), self.tol.root) {
                    None => warnings.push(HypothesisWarning::IdenticallyTangent { side, chart: ci }),
                    Some(roots) if roots.len() > 1 => {
                        warnings.push(HypothesisWarning::MultipleTangencies {
                            side,
                            chart: ci,
                            count: roots.len(),
                        })
                    }
                    Some(_) => {}
                }
            }
        }
        warnings
    }
}

/// Construction report for linear systems: predicted tangencies and any
/// equilibria sitting on the switching line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBuildReport {
    pub tangency_x: Option<Vec2>,
    pub tangency_y: Option<Vec2>,
    pub equilibria_on_sigma: Vec<Vec2>,
}

/// Build the piecewise system `X = A+ p + b+` on `x >= 0`, `Y = A- p + b-`
/// on `x <= 0` with `f(x, y) = x`, on the box `k`.
pub fn from_linear(
    spec: &LinearSpec,
    k: Box2,
    tol: Tolerances,
) -> Result<(PiecewiseSystem, LinearBuildReport), SystemError> {
    let f = Poly2::x();
    let chart = SigmaChart::vertical_line(0.0, k.ymin, k.ymax);
    let sys = PiecewiseSystem::new(
        SwitchingCurve::new(f, vec![chart]),
        spec.field_plus(),
        spec.field_minus(),
        k,
        tol,
    )?;
    let mut equilibria_on_sigma = Vec::new();
    for (a, b) in [(spec.a_plus, spec.b_plus), (spec.a_minus, spec.b_minus)] {
        if let Some(eq) = linear_equilibrium(&a, &b) {
            if eq.x.abs() <= tol.on_sigma
                && k.contains(eq)
                && !equilibria_on_sigma
                    .iter()
                    .any(|q: &Vec2| q.dist(eq) < tol.on_sigma)
            {
                equilibria_on_sigma.push(eq);
            }
        }
    }
    let report = LinearBuildReport {
        tangency_x: spec.tangency_plus().filter(|p| k.contains(*p)),
        tangency_y: spec.tangency_minus().filter(|p| k.contains(*p)),
        equilibria_on_sigma,
    };
    Ok((sys, report))
}

fn linear_equilibrium(a: &[[f64; 2]; 2], b: &[f64; 2]) -> Option<Vec2> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-14 {
        return None;
    }
    // Solve A p = -b.
    let x = (-b[0] * a[1][1] + a[0][1] * b[1]) / det;
    let y = (-a[0][0] * b[1] + b[0] * a[1][0]) / det;
    Some(Vec2::new(x, y))
}

/// Build a relay system `f(p) = <C, p>`, `X = A p + B` on `f >= 0`,
/// `Y = A p - B` on `f <= 0`, with a unit-speed parametrization of the
/// switching line clipped to `k`.
pub fn from_relay(
    a: [[f64; 2]; 2],
    b: [f64; 2],
    c: [f64; 2],
    k: Box2,
    tol: Tolerances,
) -> Result<PiecewiseSystem, SystemError> {
    let cnorm = (c[0] * c[0] + c[1] * c[1]).sqrt();
    if cnorm == 0.0 {
        return Err(SystemError::Field(FieldError::DegenerateSwitching));
    }
    let f = Poly2::from_terms([(1, 0, c[0]), (0, 1, c[1])]);
    let x_field = linear_field(&a, &b);
    let y_field = linear_field(&a, &[-b[0], -b[1]]);
    let dir = Vec2::new(-c[1] / cnorm, c[0] / cnorm);
    let (alpha, beta) = clip_line_to_box(Vec2::new(0.0, 0.0), dir, &k)
        .unwrap_or((-1.0, 1.0));
    let chart = SigmaChart::line(Vec2::new(0.0, 0.0), dir, alpha, beta);
    PiecewiseSystem::new(SwitchingCurve::new(f, vec![chart]), x_field, y_field, k, tol)
}

/// Parameter range of `p0 + s d` inside the box, if it meets it.
pub fn clip_line_to_box(p0: Vec2, d: Vec2, k: &Box2) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (p, delta, min, max) in [
        (p0.x, d.x, k.xmin, k.xmax),
        (p0.y, d.y, k.ymin, k.ymax),
    ] {
        if delta.abs() < 1e-15 {
            if p < min || p > max {
                return None;
            }
        } else {
            let (a, b) = ((min - p) / delta, (max - p) / delta);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    (lo < hi).then_some((lo, hi))
}
