//! Smooth-flow substrate: adaptive Dormand-Prince 5(4) integration with
//! dense output and event location.
//!
//! Three event families are monitored along an arc of one side field:
//!
//! * transversal switching-curve crossings (sign change of `f`), refined on
//!   the dense interpolant and Newton-projected onto `Sigma`;
//! * grazing contacts, located as zero crossings of `df/dt = F.f` along the
//!   flow (sharp even where `|f|` has a flat quadratic minimum) and accepted
//!   only when `|f|` at the critical point is below the graze tolerance;
//! * exits from the box `K`.
//!
//! The earliest event in the step wins.

use thiserror::Error;

use crate::field::PolyField;
use crate::geom::{Box2, Vec2};
use crate::poly::Poly2;
use crate::tol::Tolerances;

#[derive(Debug, Error, PartialEq)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t} (stiffness failure)")]
    StiffnessFailure { t: f64 },
    #[error("step budget exhausted at t = {t}")]
    BudgetExceeded { t: f64 },
}

/// Why a flow arc stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowStop {
    /// Transversal crossing of `Sigma`; `from_positive` is the sign of `f`
    /// before the event.
    SigmaCross { from_positive: bool },
    /// Tangential contact with `Sigma` (`F.f = 0` with `|f|` below tolerance).
    SigmaGraze,
    ExitK,
    TimeBudget,
}

/// A raw integrated arc of a single smooth field.
#[derive(Debug, Clone)]
pub struct FlowArc {
    /// Accepted-step samples `(t, point)`, including both endpoints.
    pub samples: Vec<(f64, Vec2)>,
    pub stop: FlowStop,
}

impl FlowArc {
    pub fn start(&self) -> (f64, Vec2) {
        self.samples[0]
    }

    pub fn end(&self) -> (f64, Vec2) {
        *self.samples.last().expect("arc has samples")
    }

    pub fn duration(&self) -> f64 {
        self.end().0 - self.start().0
    }
}

const MAX_STEPS: usize = 4_000_000;
const H_FLOOR: f64 = 1e-12;
const H_INIT: f64 = 1e-4;
const SUBSAMPLES: usize = 8;

/// Dormand-Prince 5(4) tableau.
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
/// Dense-output weights for the order-4 continuous extension.
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// One accepted step with its dense interpolant.
struct DenseStep {
    t0: f64,
    h: f64,
    r1: Vec2,
    r2: Vec2,
    r3: Vec2,
    r4: Vec2,
    r5: Vec2,
}

impl DenseStep {
    fn eval(&self, theta: f64) -> Vec2 {
        let th1 = 1.0 - theta;
        let inner2 = self.r4 + self.r5.scale(th1);
        let inner1 = self.r3 + inner2.scale(theta);
        self.r1 + (self.r2 + inner1.scale(th1)).scale(theta)
    }

    fn t_of(&self, theta: f64) -> f64 {
        self.t0 + theta * self.h
    }
}

struct Stepper<'a> {
    field: &'a PolyField,
    rtol: f64,
    atol: f64,
}

impl Stepper<'_> {
    fn deriv(&self, p: Vec2) -> Vec2 {
        self.field.eval(p)
    }

    /// One candidate step from `y0` with slope `k1`; returns the new state,
    /// the scaled error norm, the dense interpolant, and the last stage.
    fn step(&self, y0: Vec2, k1: Vec2, h: f64) -> (Vec2, f64, DenseStep, Vec2) {
        let mut k = [Vec2::default(); 7];
        k[0] = k1;
        for i in 1..7 {
            let mut acc = Vec2::default();
            for (j, kj) in k.iter().enumerate().take(i) {
                acc = acc + kj.scale(A[i][j]);
            }
            k[i] = self.deriv(y0 + acc.scale(h));
        }
        let mut y5 = Vec2::default();
        let mut y4 = Vec2::default();
        let mut rd = Vec2::default();
        for i in 0..7 {
            y5 = y5 + k[i].scale(B5[i]);
            y4 = y4 + k[i].scale(B4[i]);
            rd = rd + k[i].scale(D[i]);
        }
        let y1 = y0 + y5.scale(h);
        let ye = y0 + y4.scale(h);
        let sc_x = self.atol + self.rtol * y0.x.abs().max(y1.x.abs());
        let sc_y = self.atol + self.rtol * y0.y.abs().max(y1.y.abs());
        let ex = (y1.x - ye.x) / sc_x;
        let ey = (y1.y - ye.y) / sc_y;
        let err = (0.5 * (ex * ex + ey * ey)).sqrt();

        let dy = y1 - y0;
        let bspl = k[0].scale(h) - dy;
        let dense = DenseStep {
            t0: 0.0,
            h,
            r1: y0,
            r2: dy,
            r3: bspl,
            r4: dy - k[6].scale(h) - bspl,
            r5: rd.scale(h),
        };
        (y1, err, dense, k[6])
    }
}

/// Integrate `field` from `start` until a switching event, a box exit, or the
/// time budget. `stop_on_sigma = false` disables the `f` events entirely.
#[allow(clippy::too_many_arguments)]
pub fn integrate_arc(
    field: &PolyField,
    f: &Poly2,
    k_box: &Box2,
    start: Vec2,
    t0: f64,
    t_budget: f64,
    stop_on_sigma: bool,
    tol: &Tolerances,
) -> Result<FlowArc, IntegrateError> {
    let lie1 = &(&f.partial_x() * &field.u) + &(&f.partial_y() * &field.v);
    let fx = f.partial_x();
    let fy = f.partial_y();
    let stepper = Stepper {
        field,
        rtol: tol.flow,
        atol: tol.flow,
    };

    let mut samples = vec![(t0, start)];
    let mut y = start;
    let mut t = t0;
    let t_end = t0 + t_budget;
    let mut h = H_INIT.min(t_budget);
    let mut k1 = stepper.deriv(y);

    // Event arming: ignore f / graze events until the trajectory has left the
    // immediate neighbourhood of Sigma it may have started on.
    let arm_f = (100.0 * tol.event).max(10.0 * tol.on_sigma);
    let mut f_armed = f.eval(y.x, y.y).abs() > arm_f;
    let arm_g = 100.0 * tol.event;
    let mut g_armed = lie1.eval(y.x, y.y).abs() > arm_g;

    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(IntegrateError::BudgetExceeded { t });
        }
        if t_end - t <= H_FLOOR {
            return Ok(FlowArc {
                samples,
                stop: FlowStop::TimeBudget,
            });
        }
        h = h.min(t_end - t);
        if h < H_FLOOR {
            return Err(IntegrateError::StiffnessFailure { t });
        }

        let (y1, err, mut dense, k_last) = stepper.step(y, k1, h);
        if err > 1.0 {
            h *= (0.9 * err.powf(-0.2)).max(0.2);
            continue;
        }
        dense.t0 = t;

        let fval = |theta: f64| {
            let p = dense.eval(theta);
            f.eval(p.x, p.y)
        };
        let gval = |theta: f64| {
            let p = dense.eval(theta);
            lie1.eval(p.x, p.y)
        };

        // Scan the dense grid for the earliest event in this step.
        let mut best: Option<(f64, EventHit)> = None;
        let mut prev_theta = 0.0;
        let mut prev_f = fval(0.0);
        let mut prev_g = gval(0.0);
        let mut prev_p = dense.eval(0.0);
        for i in 1..=SUBSAMPLES {
            let theta = i as f64 / SUBSAMPLES as f64;
            let p = dense.eval(theta);
            let fv = fval(theta);
            let gv = gval(theta);

            if stop_on_sigma {
                if f_armed && prev_f * fv < 0.0 {
                    let th = bisect_theta(&fval, prev_theta, theta);
                    consider(
                        &mut best,
                        th,
                        EventHit::Cross {
                            from_positive: prev_f > 0.0,
                        },
                    );
                }
                if g_armed && prev_g * gv < 0.0 {
                    let th = bisect_theta(&gval, prev_theta, theta);
                    if fval(th).abs() <= tol.graze {
                        consider(&mut best, th, EventHit::Graze);
                    }
                }
                if !f_armed && fv.abs() > arm_f {
                    f_armed = true;
                }
                if !g_armed && gv.abs() > arm_g {
                    g_armed = true;
                }
            }

            for (idx, lo, hi) in [(0u8, k_box.xmin, k_box.xmax), (1u8, k_box.ymin, k_box.ymax)] {
                let (cp, cc) = if idx == 0 {
                    (prev_p.x, p.x)
                } else {
                    (prev_p.y, p.y)
                };
                for bound in [lo, hi] {
                    if (cp - bound) * (cc - bound) < 0.0 {
                        let th = bisect_theta(
                            &|s| {
                                let q = dense.eval(s);
                                (if idx == 0 { q.x } else { q.y }) - bound
                            },
                            prev_theta,
                            theta,
                        );
                        consider(&mut best, th, EventHit::Exit);
                    }
                }
            }
            prev_theta = theta;
            prev_f = fv;
            prev_g = gv;
            prev_p = p;
        }

        if let Some((theta, hit)) = best {
            let te = dense.t_of(theta);
            let mut pe = dense.eval(theta);
            let stop = match hit {
                EventHit::Cross { from_positive } => {
                    pe = project_onto_sigma(pe, f, &fx, &fy);
                    FlowStop::SigmaCross { from_positive }
                }
                EventHit::Graze => {
                    pe = project_onto_sigma(pe, f, &fx, &fy);
                    FlowStop::SigmaGraze
                }
                EventHit::Exit => FlowStop::ExitK,
            };
            samples.push((te, pe));
            return Ok(FlowArc { samples, stop });
        }

        t += h;
        y = y1;
        k1 = k_last;
        samples.push((t, y));
        h *= (0.9 * err.max(1e-10).powf(-0.2)).min(5.0);
    }
}

#[derive(Debug, Clone, Copy)]
enum EventHit {
    Cross { from_positive: bool },
    Graze,
    Exit,
}

fn consider(best: &mut Option<(f64, EventHit)>, theta: f64, hit: EventHit) {
    if best.map_or(true, |(t, _)| theta < t) {
        *best = Some((theta, hit));
    }
}

fn bisect_theta(g: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = g(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..60 {
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

/// Newton corrections along `grad f` drive the located event point onto
/// `Sigma` to machine-level residual.
fn project_onto_sigma(p: Vec2, f: &Poly2, fx: &Poly2, fy: &Poly2) -> Vec2 {
    let mut q = p;
    for _ in 0..3 {
        let fv = f.eval(q.x, q.y);
        if fv == 0.0 {
            break;
        }
        let g = Vec2::new(fx.eval(q.x, q.y), fy.eval(q.x, q.y));
        let gg = g.dot(g);
        if gg < 1e-18 {
            break;
        }
        q = q - g.scale(fv / gg);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly2;

    fn tolerances() -> Tolerances {
        Tolerances::default()
    }

    fn center_field() -> PolyField {
        PolyField::new(
            Poly2::from_terms([(1, 0, -0.5), (0, 1, -1.0), (0, 0, -1.0)]),
            Poly2::from_terms([(1, 0, 1.0), (0, 1, 0.5), (0, 0, 2.0)]),
        )
    }

    #[test]
    fn constant_field_parallel_to_sigma_runs_out_the_budget() {
        let field = PolyField::new(Poly2::zero(), Poly2::constant(1.0));
        let k = Box2::new(-5.0, 5.0, -5.0, 5.0);
        let arc = integrate_arc(
            &field,
            &Poly2::x(),
            &k,
            Vec2::new(1.0, 0.0),
            0.0,
            1.0,
            true,
            &tolerances(),
        )
        .unwrap();
        assert_eq!(arc.stop, FlowStop::TimeBudget);
        let (t, p) = arc.end();
        assert!((t - 1.0).abs() < 1e-9);
        assert!(p.dist(Vec2::new(1.0, 1.0)) < 1e-9);
    }

    #[test]
    fn unit_speed_approach_hits_sigma_at_t_one() {
        let field = PolyField::new(Poly2::constant(-1.0), Poly2::zero());
        let k = Box2::new(-5.0, 5.0, -5.0, 5.0);
        let arc = integrate_arc(
            &field,
            &Poly2::x(),
            &k,
            Vec2::new(1.0, 0.0),
            0.0,
            3.0,
            true,
            &tolerances(),
        )
        .unwrap();
        assert!(matches!(
            arc.stop,
            FlowStop::SigmaCross {
                from_positive: true
            }
        ));
        let (t, p) = arc.end();
        assert!((t - 1.0).abs() < 1e-9);
        assert!(p.x.abs() < 1e-11);
        assert!(p.y.abs() < 1e-9);
    }

    #[test]
    fn linear_center_matches_closed_form_rotation() {
        // p' = A (p - c), A = [[-1/2, -1], [1, 1/2]], c = (-2, 0): a center
        // with angular frequency sqrt(3)/2.
        let field = center_field();
        let k = Box2::new(-7.0, 7.0, -7.0, 7.0);
        let start = Vec2::new(0.0, 0.0);
        let arc =
            integrate_arc(&field, &Poly2::x(), &k, start, 0.0, 50.0, true, &tolerances()).unwrap();
        assert!(matches!(arc.stop, FlowStop::SigmaCross { .. }));

        let w = (3.0f64).sqrt() / 2.0;
        let c = Vec2::new(-2.0, 0.0);
        let a = [[-0.5, -1.0], [1.0, 0.5]];
        for &(t, p) in &arc.samples {
            let d0 = start - c;
            let (cw, sw) = ((w * t).cos(), (w * t).sin() / w);
            let expect = Vec2::new(
                c.x + cw * d0.x + sw * (a[0][0] * d0.x + a[0][1] * d0.y),
                c.y + cw * d0.y + sw * (a[1][0] * d0.x + a[1][1] * d0.y),
            );
            assert!(p.dist(expect) < 1e-7, "drift {} at t = {t}", p.dist(expect));
        }
        // The orbit through (0,0) re-crosses Sigma at (0,-2).
        let (_, end) = arc.end();
        assert!(end.dist(Vec2::new(0.0, -2.0)) < 1e-7);
    }

    #[test]
    fn grazing_return_to_a_tangency_is_detected() {
        // The center orbit through (0, -1) is tangent to x = 0 from the left
        // and returns to the same point after one period.
        let field = center_field();
        let k = Box2::new(-7.0, 7.0, -7.0, 7.0);
        let start = Vec2::new(0.0, -1.0);
        let arc =
            integrate_arc(&field, &Poly2::x(), &k, start, 0.0, 50.0, true, &tolerances()).unwrap();
        assert_eq!(arc.stop, FlowStop::SigmaGraze);
        let (t, p) = arc.end();
        let period = 2.0 * std::f64::consts::PI / ((3.0f64).sqrt() / 2.0);
        assert!((t - period).abs() < 1e-6, "period {t} vs {period}");
        assert!(p.dist(start) < 1e-6);
    }

    #[test]
    fn box_exit_is_located() {
        let field = PolyField::new(Poly2::constant(1.0), Poly2::constant(0.5));
        let k = Box2::new(-1.0, 2.0, -1.0, 2.0);
        let arc = integrate_arc(
            &field,
            &Poly2::x(),
            &k,
            Vec2::new(0.5, 0.0),
            0.0,
            10.0,
            false,
            &tolerances(),
        )
        .unwrap();
        assert_eq!(arc.stop, FlowStop::ExitK);
        let (t, p) = arc.end();
        assert!((t - 1.5).abs() < 1e-9);
        assert!((p.x - 2.0).abs() < 1e-9);
    }

    #[test]
    fn departing_from_sigma_does_not_immediately_retrigger() {
        let field = PolyField::new(Poly2::constant(1.0), Poly2::zero());
        let k = Box2::new(-5.0, 5.0, -5.0, 5.0);
        let arc = integrate_arc(
            &field,
            &Poly2::x(),
            &k,
            Vec2::new(0.0, 0.0),
            0.0,
            1.0,
            true,
            &tolerances(),
        )
        .unwrap();
        assert_eq!(arc.stop, FlowStop::TimeBudget);
    }

    #[test]
    fn reversibility_of_a_flow_arc() {
        let field = center_field();
        let back = PolyField::new(field.u.scale(-1.0), field.v.scale(-1.0));
        let k = Box2::new(-7.0, 7.0, -7.0, 7.0);
        let start = Vec2::new(0.5, 0.5);
        let arc =
            integrate_arc(&field, &Poly2::x(), &k, start, 0.0, 3.0, false, &tolerances()).unwrap();
        let (_, end) = arc.end();
        let ret =
            integrate_arc(&back, &Poly2::x(), &k, end, 0.0, 3.0, false, &tolerances()).unwrap();
        assert!(ret.end().1.dist(start) < 1e-6);
    }
}
