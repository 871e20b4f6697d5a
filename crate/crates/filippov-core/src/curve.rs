//! Switching-curve charts: explicit parametrizations of components of
//! `Sigma = f^{-1}(0)` inside the region of interest.
//!
//! The parameter ordering of a chart is the ordering of the corresponding
//! piece of `Sigma`; all interval bookkeeping (tangency breakpoints, sliding
//! segments, pseudo-equilibria) happens in chart parameters.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec2;
use crate::poly::{isolate_roots, Poly1, Poly2, Root};

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("parametrization leaves the zero set of f: |f(sigma({s}))| = {residual:.3e}")]
    OffCurve { s: f64, residual: f64 },
    #[error("grad f vanishes on the curve at s = {s}: 0 is not a regular value there")]
    SingularGradient { s: f64 },
    #[error("chart interval must satisfy alpha < beta")]
    EmptyInterval,
}

/// Geometric shape of one chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChartKind {
    /// `sigma(s) = (x, s)`.
    VerticalLine { x: f64 },
    /// `sigma(s) = (cx + r cos s, cy + r sin s)`.
    Circle { cx: f64, cy: f64, r: f64 },
    /// `sigma(s) = (x(s), y(s))` with polynomial components.
    Parametric { x: Poly1, y: Poly1 },
}

/// One parametrized component of `Sigma` inside `K`, ordered by `s` on
/// `[alpha, beta]` with `alpha < 0 < beta` by convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaChart {
    pub kind: ChartKind,
    pub alpha: f64,
    pub beta: f64,
}

impl SigmaChart {
    pub fn vertical_line(x: f64, alpha: f64, beta: f64) -> Self {
        Self {
            kind: ChartKind::VerticalLine { x },
            alpha,
            beta,
        }
    }

    /// Affine chart through `p0` with direction `d` (unit speed when |d| = 1).
    pub fn line(p0: Vec2, d: Vec2, alpha: f64, beta: f64) -> Self {
        Self {
            kind: ChartKind::Parametric {
                x: Poly1::from_coeffs(vec![p0.x, d.x]),
                y: Poly1::from_coeffs(vec![p0.y, d.y]),
            },
            alpha,
            beta,
        }
    }

    pub fn point(&self, s: f64) -> Vec2 {
        match &self.kind {
            ChartKind::VerticalLine { x } => Vec2::new(*x, s),
            ChartKind::Circle { cx, cy, r } => Vec2::new(cx + r * s.cos(), cy + r * s.sin()),
            ChartKind::Parametric { x, y } => Vec2::new(x.eval(s), y.eval(s)),
        }
    }

    pub fn tangent(&self, s: f64) -> Vec2 {
        match &self.kind {
            ChartKind::VerticalLine { .. } => Vec2::new(0.0, 1.0),
            ChartKind::Circle { r, .. } => Vec2::new(-r * s.sin(), r * s.cos()),
            ChartKind::Parametric { x, y } => {
                Vec2::new(x.derivative().eval(s), y.derivative().eval(s))
            }
        }
    }

    pub fn contains_param(&self, s: f64) -> bool {
        s >= self.alpha && s <= self.beta
    }

    pub fn clamp(&self, s: f64) -> f64 {
        s.clamp(self.alpha, self.beta)
    }

    /// Restriction `p(sigma(s))` as an exact univariate polynomial, when the
    /// chart is polynomial in `s`.
    pub fn restrict_exact(&self, p: &Poly2) -> Option<Poly1> {
        match &self.kind {
            ChartKind::VerticalLine { x } => Some(p.compose1(&Poly1::constant(*x), &Poly1::s())),
            ChartKind::Circle { .. } => None,
            ChartKind::Parametric { x, y } => Some(p.compose1(x, y)),
        }
    }

    /// Roots of `p(sigma(s))` on `[alpha, beta]`.
    ///
    /// Polynomial charts get certified isolation; the circle chart falls back
    /// to dense scanning plus bisection. A `None` means the restriction is
    /// identically zero (caller must treat that as a degenerate configuration).
    pub fn roots_along(&self, p: &Poly2, tol: f64) -> Option<Vec<Root>> {
        if let Some(restr) = self.restrict_exact(p) {
            if restr.is_zero() {
                return None;
            }
            return Some(isolate_roots(&restr, self.alpha, self.beta, tol));
        }
        // Sampled path (circle chart).
        let g = |s: f64| {
            let q = self.point(s);
            p.eval(q.x, q.y)
        };
        let n = 4096;
        let h = (self.beta - self.alpha) / n as f64;
        let mut out: Vec<Root> = Vec::new();
        let mut prev = g(self.alpha);
        let mut max_abs: f64 = prev.abs();
        for i in 1..=n {
            let s = self.alpha + i as f64 * h;
            let cur = g(s);
            max_abs = max_abs.max(cur.abs());
            if prev == 0.0 {
                push_unique(&mut out, Root { value: s - h, sign_change: true }, tol);
            } else if prev * cur < 0.0 {
                let r = bisect_fn(&g, s - h, s, tol);
                push_unique(&mut out, Root { value: r, sign_change: true }, tol);
            }
            prev = cur;
        }
        if max_abs < 1e-12 {
            return None;
        }
        // Grazing zeros: minima of |g| below tolerance.
        let gp = |s: f64| {
            let q = self.point(s);
            let t = self.tangent(s);
            p.partial_x().eval(q.x, q.y) * t.x + p.partial_y().eval(q.x, q.y) * t.y
        };
        let mut prev_d = gp(self.alpha);
        for i in 1..=n {
            let s = self.alpha + i as f64 * h;
            let cur_d = gp(s);
            if prev_d * cur_d < 0.0 {
                let r = bisect_fn(&gp, s - h, s, tol);
                if g(r).abs() <= 1e-9 * (1.0 + max_abs) {
                    push_unique(&mut out, Root { value: r, sign_change: false }, tol);
                }
            }
            prev_d = cur_d;
        }
        out.sort_by(|a, b| a.value.total_cmp(&b.value));
        Some(out)
    }

    /// Chart parameter of a point on (or near) the curve, with its distance.
    pub fn param_of_point(&self, p: Vec2) -> (f64, f64) {
        match &self.kind {
            ChartKind::VerticalLine { x } => (p.y, (p.x - x).abs()),
            ChartKind::Circle { cx, cy, r: _ } => {
                let s = (p.y - cy).atan2(p.x - cx);
                let s = wrap_into(s, self.alpha, self.beta);
                (s, self.point(s).dist(p))
            }
            ChartKind::Parametric { .. } => {
                // Dense scan then Newton on (sigma(s) - p) . sigma'(s) = 0.
                let n = 512;
                let h = (self.beta - self.alpha) / n as f64;
                let mut best = (self.alpha, self.point(self.alpha).dist(p));
                for i in 1..=n {
                    let s = self.alpha + i as f64 * h;
                    let d = self.point(s).dist(p);
                    if d < best.1 {
                        best = (s, d);
                    }
                }
                let mut s = best.0;
                for _ in 0..40 {
                    let q = self.point(s);
                    let t = self.tangent(s);
                    let tt = t.dot(t);
                    if tt < 1e-18 {
                        break;
                    }
                    let step = (q - p).dot(t) / tt;
                    s -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                let s = s.clamp(self.alpha, self.beta);
                (s, self.point(s).dist(p))
            }
        }
    }

    /// Validate the chart against `f`: the image stays on the zero set and
    /// the gradient of `f` does not vanish along it.
    pub fn validate(&self, f: &Poly2, on_sigma_tol: f64) -> Result<(), CurveError> {
        if !(self.alpha < self.beta) {
            return Err(CurveError::EmptyInterval);
        }
        let fx = f.partial_x();
        let fy = f.partial_y();
        let n = 257;
        for i in 0..n {
            let s = self.alpha + (self.beta - self.alpha) * i as f64 / (n - 1) as f64;
            let q = self.point(s);
            let residual = f.eval(q.x, q.y).abs();
            if residual > on_sigma_tol {
                return Err(CurveError::OffCurve { s, residual });
            }
            let g = Vec2::new(fx.eval(q.x, q.y), fy.eval(q.x, q.y));
            if g.norm() < 1e-12 {
                return Err(CurveError::SingularGradient { s });
            }
        }
        Ok(())
    }
}

fn push_unique(out: &mut Vec<Root>, r: Root, tol: f64) {
    if !out.iter().any(|q| (q.value - r.value).abs() <= 4.0 * tol.max(1e-14)) {
        out.push(r);
    }
}

fn wrap_into(s: f64, alpha: f64, beta: f64) -> f64 {
    let tau = std::f64::consts::TAU;
    let mut v = s;
    while v < alpha {
        v += tau;
    }
    while v > beta {
        v -= tau;
    }
    v
}

fn bisect_fn(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = g(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = g(mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}

/// The switching curve: `f` together with the charts covering `Sigma` inside `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingCurve {
    pub f: Poly2,
    pub charts: Vec<SigmaChart>,
}

impl SwitchingCurve {
    pub fn new(f: Poly2, charts: Vec<SigmaChart>) -> Self {
        Self { f, charts }
    }

    pub fn validate(&self, on_sigma_tol: f64) -> Result<(), CurveError> {
        for chart in &self.charts {
            chart.validate(&self.f, on_sigma_tol)?;
        }
        Ok(())
    }

    /// Chart index and parameter of the chart closest to `p`.
    pub fn locate(&self, p: Vec2) -> Option<(usize, f64, f64)> {
        self.charts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let (s, d) = c.param_of_point(p);
                (i, s, d)
            })
            .min_by(|a, b| a.2.total_cmp(&b.2))
    }
}
