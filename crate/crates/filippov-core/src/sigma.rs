//! Classification of the switching curve: region kinds, tangency orders and
//! visibility, the Filippov sliding field, its extension across tangency
//! points, and pseudo-equilibria.
//!
//! Sign conventions, fixed once: `grad f` points toward the region where the
//! `X` field is active (`f > 0`). A trajectory of `X` reaches a point of
//! `Sigma` in finite forward time iff `X.f < 0` there; a trajectory of `Y`
//! does iff `Y.f > 0`. Hence
//!
//! * sliding:  `X.f < 0 < Y.f` (both sides arrive),
//! * escaping: `Y.f < 0 < X.f` (both sides leave),
//! * sewing:   `X.f * Y.f > 0`.
//!
//! A tangency of `X` with even contact order `r` is invisible when
//! `X^r.f < 0` and visible when `X^r.f > 0`; for `Y` the signs swap; odd
//! contact is always visible.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{contact_order_at, FieldError};
use crate::geom::Vec2;
use crate::poly::Poly1;
use crate::system::{PiecewiseSystem, Side};

#[derive(Debug, Error)]
pub enum SigmaError {
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),
    #[error("point is not in a sliding or escaping region (chart {chart}, s = {s})")]
    NotSlidingOrEscaping { chart: usize, s: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Kind of a point of `Sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionKind {
    Sewing,
    Sliding,
    Escaping,
    TangencyX,
    TangencyY,
    DoubleTangency,
}

impl RegionKind {
    pub fn is_tangency(self) -> bool {
        matches!(
            self,
            RegionKind::TangencyX | RegionKind::TangencyY | RegionKind::DoubleTangency
        )
    }
}

/// Contact of one side field with `Sigma` at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ContactReport {
    /// First Lie derivative non-vanishing.
    Transversal { sign: i8 },
    /// Contact of order `n >= 2`.
    Tangent { order: u32, sign: i8 },
    /// All probed Lie derivatives vanish.
    PossiblyInfinite,
}

impl ContactReport {
    pub fn order(&self) -> Option<u32> {
        match self {
            ContactReport::Transversal { .. } => Some(1),
            ContactReport::Tangent { order, .. } => Some(*order),
            ContactReport::PossiblyInfinite => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Visibility {
    Visible,
    Invisible,
    NotTangent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoubleKind {
    None,
    Elliptic,
    Parabolic,
    Hyperbolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpecialTangency {
    None,
    TypeI,
    TypeII,
}

/// Full classification of one point of `Sigma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPointReport {
    pub chart: usize,
    pub s: f64,
    pub point: Vec2,
    pub region: RegionKind,
    pub contact_x: ContactReport,
    pub contact_y: ContactReport,
    pub visibility_x: Visibility,
    pub visibility_y: Visibility,
    pub double_kind: DoubleKind,
    pub special: SpecialTangency,
}

/// Visibility per the fixed sign conventions.
fn visibility(side: Side, contact: ContactReport) -> Visibility {
    match contact {
        ContactReport::Transversal { .. } => Visibility::NotTangent,
        ContactReport::PossiblyInfinite => Visibility::Invisible,
        ContactReport::Tangent { order, sign } => {
            if order % 2 == 1 {
                return Visibility::Visible;
            }
            let invisible = match side {
                Side::X => sign < 0,
                Side::Y => sign > 0,
            };
            if invisible {
                Visibility::Invisible
            } else {
                Visibility::Visible
            }
        }
    }
}

fn region_from_signs(a: f64, b: f64, tan_tol: f64) -> RegionKind {
    let tx = a.abs() <= tan_tol;
    let ty = b.abs() <= tan_tol;
    match (tx, ty) {
        (true, true) => RegionKind::DoubleTangency,
        (true, false) => RegionKind::TangencyX,
        (false, true) => RegionKind::TangencyY,
        (false, false) => {
            if a < 0.0 && b > 0.0 {
                RegionKind::Sliding
            } else if a > 0.0 && b < 0.0 {
                RegionKind::Escaping
            } else {
                RegionKind::Sewing
            }
        }
    }
}

/// Region kind at a raw point (no tangency-order analysis).
pub fn region_at(sys: &PiecewiseSystem, p: Vec2) -> RegionKind {
    region_from_signs(
        sys.lie1_at(Side::X, p),
        sys.lie1_at(Side::Y, p),
        sys.tol.tan,
    )
}

fn contact_report(sys: &PiecewiseSystem, side: Side, p: Vec2) -> ContactReport {
    match contact_order_at(sys.field(side), sys.f(), p, sys.tol.max_order, sys.tol.tan) {
        Ok(c) if c.order == 1 => ContactReport::Transversal { sign: c.sign },
        Ok(c) => ContactReport::Tangent {
            order: c.order,
            sign: c.sign,
        },
        Err(_) => ContactReport::PossiblyInfinite,
    }
}

/// Classify the point `sigma(s)` of the given chart.
pub fn classify_point(sys: &PiecewiseSystem, chart: usize, s: f64) -> SigmaPointReport {
    let ch = sys.chart(chart);
    let p = ch.point(s);
    let region = region_at(sys, p);

    let contact_x = contact_report(sys, Side::X, p);
    let contact_y = contact_report(sys, Side::Y, p);
    let visibility_x = visibility(Side::X, contact_x);
    let visibility_y = visibility(Side::Y, contact_y);

    let mut double_kind = DoubleKind::None;
    let mut special = SpecialTangency::None;

    if region == RegionKind::DoubleTangency {
        let even =
            |c: ContactReport| matches!(c, ContactReport::Tangent { order, .. } if order % 2 == 0);
        let odd =
            |c: ContactReport| matches!(c, ContactReport::Tangent { order, .. } if order % 2 == 1);
        let vx = visibility_x == Visibility::Visible;
        let vy = visibility_y == Visibility::Visible;
        if even(contact_x) && even(contact_y) {
            double_kind = match (vx, vy) {
                (false, false) => DoubleKind::Elliptic,
                (true, true) => DoubleKind::Hyperbolic,
                _ => DoubleKind::Parabolic,
            };
        }

        // Probe the neighbouring intervals for the special-point taxonomy.
        let below = probe_region_adaptive(sys, chart, s, -1.0);
        let above = probe_region_adaptive(sys, chart, s, 1.0);

        if double_kind == DoubleKind::Elliptic
            && below.map(|b| b.1) == Some(RegionKind::Sewing)
            && above.map(|a| a.1) == Some(RegionKind::Sewing)
        {
            special = SpecialTangency::TypeI;
        }
        let invis_even_x = even(contact_x) && visibility_x == Visibility::Invisible;
        let invis_even_y = even(contact_y) && visibility_y == Visibility::Invisible;
        if (invis_even_x && odd(contact_y)) || (invis_even_y && odd(contact_x)) {
            // Type II: on the boundary of a sliding region, attracting its orbits.
            for probe in [below, above] {
                if let Some((side_s, RegionKind::Sliding)) = probe {
                    if let Ok(g) = sliding_speed(sys, chart, side_s) {
                        let toward = if side_s < s { g > 0.0 } else { g < 0.0 };
                        if toward {
                            special = SpecialTangency::TypeII;
                        }
                    }
                }
            }
        }
    }

    SigmaPointReport {
        chart,
        s,
        point: p,
        region,
        contact_x,
        contact_y,
        visibility_x,
        visibility_y,
        double_kind,
        special,
    }
}

fn probe_delta(alpha: f64, beta: f64) -> f64 {
    ((beta - alpha) * 1e-6).max(1e-9)
}

fn probe_region(sys: &PiecewiseSystem, chart: usize, s: f64) -> Option<RegionKind> {
    let ch = sys.chart(chart);
    ch.contains_param(s).then(|| region_at(sys, ch.point(s)))
}

/// Region kind just to one side of `s`, growing the offset geometrically so
/// high-order contacts do not blur the probe into a spurious tangency read.
fn probe_region_adaptive(
    sys: &PiecewiseSystem,
    chart: usize,
    s: f64,
    dir: f64,
) -> Option<(f64, RegionKind)> {
    let ch = sys.chart(chart);
    let mut delta = probe_delta(ch.alpha, ch.beta);
    let cap = (ch.beta - ch.alpha) * 1e-2;
    while delta <= cap {
        let probe = s + dir * delta;
        match probe_region(sys, chart, probe) {
            Some(kind) if !kind.is_tangency() => return Some((probe, kind)),
            None => return None,
            _ => delta *= 4.0,
        }
    }
    None
}

/// Contact order along a chart (the operation-level wrapper).
pub fn contact_order(
    sys: &PiecewiseSystem,
    side: Side,
    chart: usize,
    s: f64,
) -> Result<crate::field::Contact, FieldError> {
    contact_order_at(
        sys.field(side),
        sys.f(),
        sys.chart(chart).point(s),
        sys.tol.max_order,
        sys.tol.tan,
    )
}

/// The Filippov sliding vector at `sigma(s)`:
/// `(X.f * Y - Y.f * X) / (X.f - Y.f)`, defined strictly on sliding and
/// escaping points.
pub fn filippov_field(sys: &PiecewiseSystem, chart: usize, s: f64) -> Result<Vec2, SigmaError> {
    let p = sys.chart(chart).point(s);
    filippov_field_at(sys, p).ok_or(SigmaError::NotSlidingOrEscaping { chart, s })
}

/// Point-based Filippov field; `None` off the sliding/escaping set.
pub fn filippov_field_at(sys: &PiecewiseSystem, p: Vec2) -> Option<Vec2> {
    let a = sys.lie1_at(Side::X, p);
    let b = sys.lie1_at(Side::Y, p);
    if !(a < 0.0 && b > 0.0 || a > 0.0 && b < 0.0) {
        return None;
    }
    let xv = sys.x_field.eval(p);
    let yv = sys.y_field.eval(p);
    Some((yv.scale(a) - xv.scale(b)).scale(1.0 / (a - b)))
}

/// Convex weight `lambda = Y.f / (Y.f - X.f)` so that
/// `Z_Sigma = lambda X + (1 - lambda) Y`.
pub fn convex_weight(sys: &PiecewiseSystem, p: Vec2) -> Option<f64> {
    let a = sys.lie1_at(Side::X, p);
    let b = sys.lie1_at(Side::Y, p);
    if !(a < 0.0 && b > 0.0 || a > 0.0 && b < 0.0) {
        return None;
    }
    Some(b / (b - a))
}

/// Scalar sliding speed `ds/dt` of the reduced dynamics on the chart.
pub fn sliding_speed(sys: &PiecewiseSystem, chart: usize, s: f64) -> Result<f64, SigmaError> {
    let ch = sys.chart(chart);
    let z = filippov_field(sys, chart, s)?;
    let t = ch.tangent(s);
    Ok(z.dot(t) / t.dot(t))
}

/// Numerator, denominator and metric polynomials of the sliding speed on a
/// polynomial chart: `g(s) = num(s) / (den(s) * w(s))` with `w = |sigma'|^2`.
pub fn speed_fraction(sys: &PiecewiseSystem, chart: usize) -> Option<(Poly1, Poly1, Poly1)> {
    let ch = sys.chart(chart);
    let (xs, ys, dxs, dys) = match &ch.kind {
        crate::curve::ChartKind::VerticalLine { x } => (
            Poly1::constant(*x),
            Poly1::s(),
            Poly1::zero(),
            Poly1::constant(1.0),
        ),
        crate::curve::ChartKind::Circle { .. } => return None,
        crate::curve::ChartKind::Parametric { x, y } => {
            (x.clone(), y.clone(), x.derivative(), y.derivative())
        }
    };
    let lie_x = sys.lie1(Side::X).compose1(&xs, &ys);
    let lie_y = sys.lie1(Side::Y).compose1(&xs, &ys);
    let xu = sys.x_field.u.compose1(&xs, &ys);
    let xv = sys.x_field.v.compose1(&xs, &ys);
    let yu = sys.y_field.u.compose1(&xs, &ys);
    let yv = sys.y_field.v.compose1(&xs, &ys);
    let y_dot = (&yu * &dxs) + (&yv * &dys);
    let x_dot = (&xu * &dxs) + (&xv * &dys);
    let num = (&lie_x * &y_dot) - (&lie_y * &x_dot);
    let den = lie_x - lie_y;
    let w = (&dxs * &dxs) + (&dys * &dys);
    Some((num, den, w))
}

/// Verdict of extending the Filippov field to a boundary point of the
/// sliding/escaping set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ExtensionVerdict {
    /// One-sided limits agree in direction and are non-zero: the reduced flow
    /// passes through. `direction` is the sign of `ds/dt`.
    RegularFlowThrough { direction: i8, speed: f64 },
    /// Common limit zero: equilibrium of the extended Filippov field.
    ExtendedPseudoEquilibrium,
    /// One-sided dynamics disagree (attractor/repulsor of the reduced flow).
    NotExtendable,
}

/// Extend the sliding dynamics across the boundary point `sigma(s0)`.
pub fn extend_filippov(sys: &PiecewiseSystem, chart: usize, s0: f64) -> ExtensionVerdict {
    if let Some((num, den, w)) = speed_fraction(sys, chart) {
        let ztol_n = num.coeff_norm().max(1.0) * 1e-11;
        let ztol_d = den.coeff_norm().max(1.0) * 1e-11;
        let m = vanish_order(&num, s0, ztol_n);
        let n = vanish_order(&den, s0, ztol_d);
        let wv = w.eval(s0);
        return match (m, n) {
            (Some(m), Some(n)) if m > n => ExtensionVerdict::ExtendedPseudoEquilibrium,
            (Some(m), Some(n)) if m == n => {
                let l = deriv_value(&num, s0, m) / deriv_value(&den, s0, n) / wv;
                if l == 0.0 {
                    ExtensionVerdict::ExtendedPseudoEquilibrium
                } else {
                    ExtensionVerdict::RegularFlowThrough {
                        direction: if l > 0.0 { 1 } else { -1 },
                        speed: l,
                    }
                }
            }
            // Pole: unbounded one-sided dynamics (attractor or repulsor).
            (Some(_), Some(_)) => ExtensionVerdict::NotExtendable,
            // num identically zero on the chart: extended field vanishes.
            (None, _) => ExtensionVerdict::ExtendedPseudoEquilibrium,
            (_, None) => ExtensionVerdict::NotExtendable,
        };
    }
    extend_by_richardson(sys, chart, s0)
}

/// Order of the zero of `p` at `s0` (0 = no zero), or `None` if `p == 0`.
fn vanish_order(p: &Poly1, s0: f64, ztol: f64) -> Option<usize> {
    if p.is_zero() {
        return None;
    }
    let mut q = p.clone();
    let deg = p.degree().unwrap_or(0);
    for k in 0..=deg {
        if q.eval(s0).abs() > ztol {
            return Some(k);
        }
        q = q.derivative();
    }
    Some(deg + 1)
}

fn deriv_value(p: &Poly1, s0: f64, k: usize) -> f64 {
    let mut q = p.clone();
    for _ in 0..k {
        q = q.derivative();
    }
    q.eval(s0)
}

fn extend_by_richardson(sys: &PiecewiseSystem, chart: usize, s0: f64) -> ExtensionVerdict {
    let limit = |side: f64| -> f64 {
        let mut est = f64::NAN;
        for k in 3..=7 {
            let d = side * 10f64.powi(-k);
            if let Ok(g) = sliding_speed(sys, chart, s0 + d) {
                est = g;
            }
        }
        est
    };
    let (lm, lp) = (limit(-1.0), limit(1.0));
    let tol = sys.tol.speed;
    match (lm.is_nan(), lp.is_nan()) {
        (true, true) => ExtensionVerdict::NotExtendable,
        (true, false) | (false, true) => {
            let l = if lm.is_nan() { lp } else { lm };
            if l.abs() <= tol {
                ExtensionVerdict::ExtendedPseudoEquilibrium
            } else {
                ExtensionVerdict::RegularFlowThrough {
                    direction: if l > 0.0 { 1 } else { -1 },
                    speed: l,
                }
            }
        }
        (false, false) => {
            if lm.abs() <= tol && lp.abs() <= tol {
                ExtensionVerdict::ExtendedPseudoEquilibrium
            } else if lm.abs() <= tol || lp.abs() <= tol || lm.signum() != lp.signum() {
                ExtensionVerdict::NotExtendable
            } else {
                let l = 0.5 * (lm + lp);
                ExtensionVerdict::RegularFlowThrough {
                    direction: if l > 0.0 { 1 } else { -1 },
                    speed: l,
                }
            }
        }
    }
}

/// 1-d stability of a pseudo-equilibrium for the sliding dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stability1d {
    Attracting,
    Repelling,
    SemiStable,
}

/// A zero of the sliding field inside a sliding or escaping interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoEquilibrium {
    pub chart: usize,
    pub s: f64,
    pub point: Vec2,
    pub stability: Stability1d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BreakpointKind {
    TangencyX,
    TangencyY,
    DoubleTangency,
    PseudoEquilibrium,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub s: f64,
    pub kind: BreakpointKind,
}

/// One labelled open interval of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaInterval {
    pub lo: f64,
    pub hi: f64,
    pub kind: RegionKind,
}

impl SigmaInterval {
    pub fn contains(&self, s: f64) -> bool {
        s > self.lo && s < self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Partition of one chart into uniformly-classified intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPartition {
    pub chart: usize,
    pub breakpoints: Vec<Breakpoint>,
    pub intervals: Vec<SigmaInterval>,
    pub pseudo_equilibria: Vec<PseudoEquilibrium>,
}

impl ChartPartition {
    pub fn interval_of(&self, s: f64) -> Option<&SigmaInterval> {
        self.intervals.iter().find(|iv| iv.contains(s))
    }

    /// Tangency breakpoint nearest to `s`, with its distance.
    pub fn nearest_tangency(&self, s: f64) -> Option<(Breakpoint, f64)> {
        self.breakpoints
            .iter()
            .filter(|b| {
                matches!(
                    b.kind,
                    BreakpointKind::TangencyX
                        | BreakpointKind::TangencyY
                        | BreakpointKind::DoubleTangency
                )
            })
            .map(|b| (*b, (b.s - s).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Partition of the whole switching curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaPartition {
    pub charts: Vec<ChartPartition>,
}

/// Partition every chart. Errors when the hypotheses the partition rests on
/// fail: a field identically tangent to a chart, more than one tangency per
/// field per chart, or non-isolated pseudo-equilibria.
pub fn partition_sigma(sys: &PiecewiseSystem) -> Result<SigmaPartition, SigmaError> {
    let charts = (0..sys.curve.charts.len())
        .map(|ci| partition_chart(sys, ci))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SigmaPartition { charts })
}

fn partition_chart(sys: &PiecewiseSystem, chart: usize) -> Result<ChartPartition, SigmaError> {
    let ch = sys.chart(chart);
    let mut breakpoints: Vec<Breakpoint> = Vec::new();

    for side in [Side::X, Side::Y] {
        let roots = ch.roots_along(sys.lie1(side), sys.tol.root).ok_or_else(|| {
            SigmaError::HypothesisViolation(format!(
                "field {side} is identically tangent to chart {chart}"
            ))
        })?;
        if roots.len() > 1 {
            return Err(SigmaError::HypothesisViolation(format!(
                "(Z3) field {side} has {} tangency points on chart {chart}",
                roots.len()
            )));
        }
        for r in roots {
            let kind = match side {
                Side::X => BreakpointKind::TangencyX,
                Side::Y => BreakpointKind::TangencyY,
            };
            merge_breakpoint(&mut breakpoints, r.value, kind, sys.tol.snap);
        }
    }

    breakpoints.sort_by(|a, b| a.s.total_cmp(&b.s));

    let mut knots = vec![ch.alpha];
    knots.extend(
        breakpoints
            .iter()
            .filter(|b| b.s > ch.alpha + sys.tol.snap && b.s < ch.beta - sys.tol.snap)
            .map(|b| b.s),
    );
    knots.push(ch.beta);

    let mut intervals = Vec::new();
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 2.0 * sys.tol.snap {
            continue;
        }
        intervals.push(classify_interval(sys, chart, lo, hi)?);
    }

    let mut pseudo_equilibria = Vec::new();
    for iv in &intervals {
        if !matches!(iv.kind, RegionKind::Sliding | RegionKind::Escaping) {
            continue;
        }
        for pe in pseudo_eq_on_interval(sys, chart, iv)? {
            merge_breakpoint(
                &mut breakpoints,
                pe.s,
                BreakpointKind::PseudoEquilibrium,
                sys.tol.snap,
            );
            pseudo_equilibria.push(pe);
        }
    }
    merge_breakpoint(&mut breakpoints, ch.alpha, BreakpointKind::Boundary, sys.tol.snap);
    merge_breakpoint(&mut breakpoints, ch.beta, BreakpointKind::Boundary, sys.tol.snap);
    breakpoints.sort_by(|a, b| a.s.total_cmp(&b.s));

    Ok(ChartPartition {
        chart,
        breakpoints,
        intervals,
        pseudo_equilibria,
    })
}

fn merge_breakpoint(list: &mut Vec<Breakpoint>, s: f64, kind: BreakpointKind, snap: f64) {
    if let Some(existing) = list.iter_mut().find(|b| (b.s - s).abs() <= snap) {
        let promote = matches!(
            (existing.kind, kind),
            (BreakpointKind::TangencyX, BreakpointKind::TangencyY)
                | (BreakpointKind::TangencyY, BreakpointKind::TangencyX)
        );
        if promote {
            existing.kind = BreakpointKind::DoubleTangency;
        }
        return;
    }
    list.push(Breakpoint { s, kind });
}

fn classify_interval(
    sys: &PiecewiseSystem,
    chart: usize,
    lo: f64,
    hi: f64,
) -> Result<SigmaInterval, SigmaError> {
    let ch = sys.chart(chart);
    let mid = 0.5 * (lo + hi);
    let kind = region_at(sys, ch.point(mid));
    // The midpoint and two fixed interior samples must agree, otherwise a
    // breakpoint was missed.
    for frac in [0.31739, 0.71263] {
        let s = lo + frac * (hi - lo);
        let k2 = region_at(sys, ch.point(s));
        if k2 != kind {
            return Err(SigmaError::HypothesisViolation(format!(
                "region kind not constant on ({lo}, {hi}) of chart {chart}: {kind:?} vs {k2:?}"
            )));
        }
    }
    if kind.is_tangency() {
        return Err(SigmaError::HypothesisViolation(format!(
            "tangency condition holds on an open interval of chart {chart} around s = {mid}"
        )));
    }
    Ok(SigmaInterval { lo, hi, kind })
}

fn pseudo_eq_on_interval(
    sys: &PiecewiseSystem,
    chart: usize,
    iv: &SigmaInterval,
) -> Result<Vec<PseudoEquilibrium>, SigmaError> {
    let ch = sys.chart(chart);
    let margin = 8.0 * sys.tol.snap;
    let (lo, hi) = (iv.lo + margin, iv.hi - margin);
    if lo >= hi {
        return Ok(Vec::new());
    }

    let roots: Vec<f64> = if let Some((num, _den, _w)) = speed_fraction(sys, chart) {
        if num.is_zero() {
            return Err(SigmaError::HypothesisViolation(format!(
                "(Z2) sliding speed vanishes identically on chart {chart}"
            )));
        }
        crate::poly::isolate_roots(&num, lo, hi, sys.tol.root)
            .into_iter()
            .map(|r| r.value)
            .collect()
    } else {
        let g = |s: f64| sliding_speed(sys, chart, s).unwrap_or(f64::NAN);
        sampled_roots(&g, lo, hi, sys.tol.root)
    };

    let delta = probe_delta(ch.alpha, ch.beta).max(16.0 * sys.tol.root);
    let mut out = Vec::new();
    for s in roots {
        let gl = sliding_speed(sys, chart, (s - delta).max(iv.lo + sys.tol.snap));
        let gr = sliding_speed(sys, chart, (s + delta).min(iv.hi - sys.tol.snap));
        let (gl, gr) = match (gl, gr) {
            (Ok(a), Ok(b)) => (a, b),
            _ => continue,
        };
        let stability = if gl > 0.0 && gr < 0.0 {
            Stability1d::Attracting
        } else if gl < 0.0 && gr > 0.0 {
            Stability1d::Repelling
        } else {
            Stability1d::SemiStable
        };
        out.push(PseudoEquilibrium {
            chart,
            s,
            point: ch.point(s),
            stability,
        });
    }
    Ok(out)
}

fn sampled_roots(g: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> Vec<f64> {
    let n = 2048;
    let h = (hi - lo) / n as f64;
    let mut out = Vec::new();
    let mut prev = g(lo);
    for i in 1..=n {
        let s = lo + i as f64 * h;
        let cur = g(s);
        if prev.is_finite() && cur.is_finite() && prev * cur < 0.0 {
            let (mut a, mut b, mut fa) = (s - h, s, prev);
            for _ in 0..100 {
                if b - a <= tol {
                    break;
                }
                let m = 0.5 * (a + b);
                let fm = g(m);
                if fa * fm <= 0.0 {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = cur;
    }
    out
}

/// All pseudo-equilibria of the system (union over charts).
pub fn pseudo_equilibria(sys: &PiecewiseSystem) -> Result<Vec<PseudoEquilibrium>, SigmaError> {
    Ok(partition_sigma(sys)?
        .charts
        .into_iter()
        .flat_map(|c| c.pseudo_equilibria)
        .collect())
}
