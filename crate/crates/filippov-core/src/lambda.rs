//! Construction of the invariant region backing a chaotic verdict, the
//! chaos-condition checks (geometric and coefficient-level), and the probe
//! suites witnessing recurrence and minimality.
//!
//! The region is assembled around a parabolic or hyperbolic double tangency
//! sitting between a sliding and an escaping interval with no sewing nearby.
//! Escape orbits of each side field launched from the escaping interval
//! return to the sliding interval; the extremal returning orbits bound the
//! region, and a closed tangent orbit of the visible field (when it exists)
//! bounds an excluded hole of points that never reach the switching curve.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::LinearSpec;
use crate::geom::{point_in_polygon, polygon_area, Vec2};
use crate::hybrid::{EventKind, HybridError, Policy, Simulator, StepOutcome};
use crate::integrate::{integrate_arc, FlowStop, IntegrateError};
use crate::sigma::{
    classify_point, partition_sigma, DoubleKind, RegionKind, SigmaError, SigmaInterval,
};
use crate::system::{PiecewiseSystem, Side};

#[derive(Debug, Error)]
pub enum LambdaError {
    #[error("not a chaotic configuration: {0}")]
    NotChaoticConfiguration(String),
    #[error("a12 vanishes on a side: tangency formula undefined")]
    DegenerateA12,
    #[error("probe budget exceeded: {0}")]
    ProbeBudgetExceeded(String),
    #[error(transparent)]
    Sigma(#[from] SigmaError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Hybrid(#[from] HybridError),
}

/// One piece of the region boundary: an arc of a side field or a segment of
/// the switching curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundaryArc {
    pub side: Option<Side>,
    pub pts: Vec<Vec2>,
}

/// The invariant region with non-empty interior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaRegion {
    pub chart: usize,
    pub tangency_s: f64,
    pub kind: DoubleKind,
    /// Sliding-side bound (nearest pseudo-equilibrium or chart end).
    pub p_s: f64,
    /// Escaping-side bound.
    pub p_e: f64,
    /// Extremal escaping parameters whose X / Y exit orbits still return.
    pub q_e_minus: Option<f64>,
    pub q_e_plus: Option<f64>,
    /// Parameter range of the switching-curve segment inside the region.
    pub sigma_segment: (f64, f64),
    pub boundary: Vec<BoundaryArc>,
    /// Closed outer ring.
    pub outer: Vec<Vec2>,
    /// Closed rings of excluded holes (tangent periodic orbits).
    pub holes: Vec<Vec<Vec2>>,
    pub closure_gap: f64,
    pub area: f64,
}

impl LambdaRegion {
    /// Even-odd membership: inside the outer ring and outside every hole.
    pub fn contains(&self, p: Vec2) -> bool {
        point_in_polygon(p, &self.outer) && !self.holes.iter().any(|h| point_in_polygon(p, h))
    }

    /// Minimum distance from `p` to any boundary ring.
    pub fn boundary_distance(&self, p: Vec2) -> f64 {
        let mut d = f64::INFINITY;
        for ring in std::iter::once(&self.outer).chain(self.holes.iter()) {
            for q in ring {
                d = d.min(q.dist(p));
            }
        }
        d
    }

    pub fn bbox(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in &self.outer {
            lo.x = lo.x.min(p.x);
            lo.y = lo.y.min(p.y);
            hi.x = hi.x.max(p.x);
            hi.y = hi.y.max(p.y);
        }
        (lo, hi)
    }
}

/// Construct the invariant region around the double tangency at
/// `sigma(tangency_s)` of the given chart.
pub fn construct_lambda(
    sys: &PiecewiseSystem,
    chart: usize,
    tangency_s: f64,
) -> Result<LambdaRegion, LambdaError> {
    let report = classify_point(sys, chart, tangency_s);
    if report.region != RegionKind::DoubleTangency {
        return Err(LambdaError::NotChaoticConfiguration(format!(
            "no double tangency at s = {tangency_s} (found {:?})",
            report.region
        )));
    }
    if !matches!(report.double_kind, DoubleKind::Parabolic | DoubleKind::Hyperbolic) {
        return Err(LambdaError::NotChaoticConfiguration(format!(
            "double tangency is {:?}, need parabolic or hyperbolic",
            report.double_kind
        )));
    }
    let part = partition_sigma(sys)?;
    let cp = &part.charts[chart];
    if cp.intervals.iter().any(|iv| iv.kind == RegionKind::Sewing) {
        return Err(LambdaError::NotChaoticConfiguration(
            "sewing region present on the chart".into(),
        ));
    }

    // Adjacent intervals: one sliding, one escaping.
    let below = cp.intervals.iter().find(|iv| close(iv.hi, tangency_s));
    let above = cp.intervals.iter().find(|iv| close(iv.lo, tangency_s));
    let (slide_iv, escape_iv, dir_e) = match (below, above) {
        (Some(b), Some(a)) if b.kind == RegionKind::Sliding && a.kind == RegionKind::Escaping => {
            (b, a, 1.0)
        }
        (Some(b), Some(a)) if b.kind == RegionKind::Escaping && a.kind == RegionKind::Sliding => {
            (a, b, -1.0)
        }
        _ => {
            return Err(LambdaError::NotChaoticConfiguration(
                "tangency is not the common boundary of a sliding and an escaping interval".into(),
            ))
        }
    };

    // Bounds: nearest pseudo-equilibrium in each direction, else chart end.
    let p_e = nearest_pe(cp, escape_iv, tangency_s, dir_e)
        .unwrap_or(if dir_e > 0.0 { escape_iv.hi } else { escape_iv.lo });
    let p_s = nearest_pe(cp, slide_iv, tangency_s, -dir_e)
        .unwrap_or(if dir_e > 0.0 { slide_iv.lo } else { slide_iv.hi });

    let span = sys.chart(chart).beta - sys.chart(chart).alpha;
    let delta = (span * 1e-6).max(1e-9);
    let snap = sys.tol.snap;

    // Extremal returning exit orbits per side field. Landings are accepted on
    // the closed sliding range: orbits launched next to the tangency graze
    // back at the tangency itself.
    let mut arms: Vec<(Side, Option<f64>, Vec<Vec2>, f64)> = Vec::new();
    for side in [Side::X, Side::Y] {
        let hit = |q: f64| -> Option<f64> {
            exit_arc(sys, chart, side, q)
                .ok()
                .and_then(|(land, _)| land)
                .filter(|&s_land| {
                    let (lo_b, hi_b) = if p_s < tangency_s {
                        (p_s, tangency_s)
                    } else {
                        (tangency_s, p_s)
                    };
                    s_land > lo_b - snap && s_land < hi_b + snap
                })
        };
        // Probe a macroscopic way into the escaping interval: launches too
        // close to the fold degenerate into grazes.
        let lo = tangency_s + 0.05 * (p_e - tangency_s);
        let hi = p_e - dir_e * delta;
        if hit(lo).is_none() {
            arms.push((side, None, Vec::new(), f64::NAN));
            continue;
        }
        let q_e = if hit(hi).is_some() {
            p_e
        } else {
            // Bisect the hit predicate, 30 iterations.
            let (mut a, mut b) = (lo, hi);
            for _ in 0..30 {
                let mid = 0.5 * (a + b);
                if hit(mid).is_some() {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            a
        };
        let (land, pts) = exit_arc(sys, chart, side, q_e)?;
        arms.push((side, Some(q_e), pts, land.unwrap_or(f64::NAN)));
    }

    // Tangent-orbit holes of the visible field(s).
    let mut holes: Vec<Vec<Vec2>> = Vec::new();
    let mut hole_arcs: Vec<BoundaryArc> = Vec::new();
    for side in [Side::X, Side::Y] {
        let legal = match side {
            Side::X => matches!(report.contact_x, crate::sigma::ContactReport::Tangent { sign, .. } if sign > 0),
            Side::Y => matches!(report.contact_y, crate::sigma::ContactReport::Tangent { sign, .. } if sign < 0),
        };
        if !legal {
            continue;
        }
        let start = sys.chart(chart).point(tangency_s);
        let arc = integrate_arc(
            sys.field(side),
            sys.f(),
            &sys.k,
            start,
            0.0,
            1e4,
            true,
            &sys.tol,
        )?;
        if arc.stop == FlowStop::SigmaGraze && arc.end().1.dist(start) < 1e-6 {
            let ring: Vec<Vec2> = arc.samples.iter().map(|&(_, p)| p).collect();
            holes.push(ring.clone());
            hole_arcs.push(BoundaryArc {
                side: Some(side),
                pts: ring,
            });
        }
    }

    // Assemble the outer ring from the returning arms.
    let returning: Vec<&(Side, Option<f64>, Vec<Vec2>, f64)> =
        arms.iter().filter(|(_, q, _, _)| q.is_some()).collect();
    if returning.is_empty() {
        return Err(LambdaError::NotChaoticConfiguration(
            "no side-field orbit returns from the escaping to the sliding interval".into(),
        ));
    }

    let ch = sys.chart(chart);
    let sigma_path = |a: f64, b: f64| -> Vec<Vec2> {
        let n = 64;
        (0..=n)
            .map(|i| ch.point(a + (b - a) * i as f64 / n as f64))
            .collect()
    };

    let mut outer: Vec<Vec2> = Vec::new();
    let mut boundary: Vec<BoundaryArc> = Vec::new();
    let mut closure_gap: f64 = 0.0;
    let push_ring = |outer: &mut Vec<Vec2>, pts: &[Vec2], gap: &mut f64| {
        if let (Some(last), Some(first)) = (outer.last(), pts.first()) {
            *gap = gap.max(last.dist(*first));
        }
        outer.extend_from_slice(pts);
    };

    let (q_e_minus, q_e_plus);
    let sigma_lo;
    let sigma_hi;
    if returning.len() == 2 {
        let (sx, qx, ax, landx) = returning[0];
        let (sy, qy, ay, landy) = returning[1];
        debug_assert_eq!((*sx, *sy), (Side::X, Side::Y));
        q_e_minus = *qx;
        q_e_plus = *qy;
        // Ring: X-arm forward, sigma from its landing to the Y landing,
        // Y-arm reversed, sigma back from the Y start to the X start.
        push_ring(&mut outer, ax, &mut closure_gap);
        push_ring(&mut outer, &sigma_path(*landx, *landy), &mut closure_gap);
        let mut ay_rev = ay.clone();
        ay_rev.reverse();
        push_ring(&mut outer, &ay_rev, &mut closure_gap);
        push_ring(
            &mut outer,
            &sigma_path(qy.unwrap(), qx.unwrap()),
            &mut closure_gap,
        );
        closure_gap = closure_gap.max(outer.last().unwrap().dist(outer[0]));
        boundary.push(BoundaryArc {
            side: Some(Side::X),
            pts: ax.clone(),
        });
        boundary.push(BoundaryArc {
            side: Some(Side::Y),
            pts: ay.clone(),
        });
        sigma_lo = landx.min(*landy).min(qx.unwrap().min(qy.unwrap()));
        sigma_hi = landx.max(*landy).max(qx.unwrap().max(qy.unwrap()));
    } else {
        let (side, q, arm, land) = returning[0];
        q_e_minus = (*side == Side::X).then(|| q.unwrap());
        q_e_plus = (*side == Side::Y).then(|| q.unwrap());
        push_ring(&mut outer, arm, &mut closure_gap);
        push_ring(&mut outer, &sigma_path(*land, q.unwrap()), &mut closure_gap);
        closure_gap = closure_gap.max(outer.last().unwrap().dist(outer[0]));
        boundary.push(BoundaryArc {
            side: Some(*side),
            pts: arm.clone(),
        });
        sigma_lo = land.min(q.unwrap());
        sigma_hi = land.max(q.unwrap());
    }
    boundary.push(BoundaryArc {
        side: None,
        pts: sigma_path(sigma_lo, sigma_hi),
    });
    boundary.extend(hole_arcs);

    let area = polygon_area(&outer).abs() - holes.iter().map(|h| polygon_area(h).abs()).sum::<f64>();
    if area < sys.tol.area {
        return Err(LambdaError::NotChaoticConfiguration(format!(
            "constructed region has no interior (area {area:.3e})"
        )));
    }

    Ok(LambdaRegion {
        chart,
        tangency_s,
        kind: report.double_kind,
        p_s,
        p_e,
        q_e_minus,
        q_e_plus,
        sigma_segment: (sigma_lo, sigma_hi),
        boundary,
        outer,
        holes,
        closure_gap,
        area,
    })
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-7
}

fn nearest_pe(
    cp: &crate::sigma::ChartPartition,
    iv: &SigmaInterval,
    from: f64,
    dir: f64,
) -> Option<f64> {
    cp.pseudo_equilibria
        .iter()
        .filter(|pe| pe.s > iv.lo && pe.s < iv.hi && (pe.s - from) * dir > 0.0)
        .map(|pe| pe.s)
        .min_by(|a, b| (a - from).abs().total_cmp(&(b - from).abs()))
}

/// Minimum distance from `target` to an integrated arc, refined by a
/// golden-section search in time around the nearest sample (raw samples can
/// be several tenths apart, far coarser than witness tolerances).
fn closest_approach(
    sys: &PiecewiseSystem,
    side: Side,
    arc: &crate::integrate::FlowArc,
    target: Vec2,
) -> f64 {
    let n = arc.samples.len();
    if n == 0 {
        return f64::INFINITY;
    }
    let (i_best, d_best) = arc
        .samples
        .iter()
        .enumerate()
        .map(|(i, &(_, p))| (i, p.dist(target)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let i_lo = i_best.saturating_sub(1);
    let (t_a, p_a) = arc.samples[i_lo];
    let (t_b, _) = arc.samples[(i_best + 1).min(n - 1)];
    if t_b - t_a < 1e-14 {
        return d_best;
    }
    let eval = |t: f64| -> f64 {
        if t <= t_a + 1e-15 {
            return p_a.dist(target);
        }
        match crate::integrate::integrate_arc(
            sys.field(side),
            sys.f(),
            &sys.k,
            p_a,
            t_a,
            t - t_a,
            false,
            &sys.tol,
        ) {
            Ok(seg) => seg.end().1.dist(target),
            Err(_) => f64::INFINITY,
        }
    };
    let (mut lo, mut hi) = (t_a, t_b);
    let phi = 0.5 * (3.0 - 5.0f64.sqrt());
    let mut m1 = lo + phi * (hi - lo);
    let mut m2 = hi - phi * (hi - lo);
    let (mut f1, mut f2) = (eval(m1), eval(m2));
    for _ in 0..48 {
        if f1 < f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = lo + phi * (hi - lo);
            f1 = eval(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = hi - phi * (hi - lo);
            f2 = eval(m2);
        }
    }
    d_best.min(f1.min(f2))
}

/// Integrate the exit orbit of `side` from `sigma(q)`; returns the landing
/// parameter on the same chart (when it hits transversally) and the sampled
/// polyline.
fn exit_arc(
    sys: &PiecewiseSystem,
    chart: usize,
    side: Side,
    q: f64,
) -> Result<(Option<f64>, Vec<Vec2>), LambdaError> {
    let start = sys.chart(chart).point(q);
    let arc = integrate_arc(
        sys.field(side),
        sys.f(),
        &sys.k,
        start,
        0.0,
        1e4,
        true,
        &sys.tol,
    )?;
    let pts: Vec<Vec2> = arc.samples.iter().map(|&(_, p)| p).collect();
    let land = match arc.stop {
        FlowStop::SigmaCross { .. } | FlowStop::SigmaGraze => {
            sys.curve.locate(arc.end().1).and_then(|(c, s, d)| {
                (c == chart && d < 1e-6).then_some(s)
            })
        }
        _ => None,
    };
    Ok((land, pts))
}

/// Geometric chaos conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosConditions {
    pub double_tangency: bool,
    pub parabolic_or_hyperbolic: bool,
    pub no_crossing_in_k: bool,
    pub two_sided_visits_witness: bool,
    /// Location of the double tangency, when present.
    pub tangency: Option<(usize, f64)>,
}

impl ChaosConditions {
    pub fn all(&self) -> bool {
        self.double_tangency
            && self.parabolic_or_hyperbolic
            && self.no_crossing_in_k
            && self.two_sided_visits_witness
    }
}

/// Evaluate the geometric chaos conditions and search (seeded) for a
/// trajectory visiting both sliding and escaping regions.
pub fn chaos_conditions(sys: &PiecewiseSystem, seed: u64) -> ChaosConditions {
    let mut out = ChaosConditions {
        double_tangency: false,
        parabolic_or_hyperbolic: false,
        no_crossing_in_k: false,
        two_sided_visits_witness: false,
        tangency: None,
    };
    let part = match partition_sigma(sys) {
        Ok(p) => p,
        Err(_) => return out,
    };
    out.no_crossing_in_k = part
        .charts
        .iter()
        .all(|cp| cp.intervals.iter().all(|iv| iv.kind != RegionKind::Sewing));
    let continuous = sys.x_field == sys.y_field;
    for cp in &part.charts {
        for bp in &cp.breakpoints {
            if bp.kind == crate::sigma::BreakpointKind::DoubleTangency && !continuous {
                out.double_tangency = true;
                let rep = classify_point(sys, cp.chart, bp.s);
                if matches!(rep.double_kind, DoubleKind::Parabolic | DoubleKind::Hyperbolic) {
                    out.parabolic_or_hyperbolic = true;
                    out.tangency = Some((cp.chart, bp.s));
                }
            }
        }
    }
    // Witness search: start on an escaping interval midpoint with a seeded
    // policy and count region visits.
    'outer: for (ci, cp) in part.charts.iter().enumerate() {
        for iv in &cp.intervals {
            if iv.kind != RegionKind::Escaping {
                continue;
            }
            let p0 = sys.chart(ci).point(iv.mid());
            for k in 0..3u64 {
                if let Ok(traj) =
                    crate::hybrid::simulate(sys, p0, 120.0, Policy::SeededRandom(seed + k))
                {
                    let seq = crate::classify::return_sequence(sys, &traj);
                    let slid = seq
                        .events
                        .iter()
                        .filter(|e| e.region == RegionKind::Sliding)
                        .count();
                    let esc = seq
                        .events
                        .iter()
                        .filter(|e| e.region == RegionKind::Escaping)
                        .count();
                    if slid >= 2 && esc >= 2 {
                        out.two_sided_visits_witness = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    out
}

/// Coefficient-level chaos conditions for a linear system split by `x = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearChaosReport {
    /// (i) coincident tangency points: `a12- b1+ - a12+ b1- = 0`.
    pub coincident_tangencies: bool,
    pub coincidence_residual: f64,
    /// (ii) the double tangency is parabolic or hyperbolic.
    pub parabolic_or_hyperbolic: bool,
    /// (iii) no sewing region: `a12+ a12- < 0`.
    pub no_crossing: bool,
    /// Geometric cross-check of (i) via the predicted tangency points.
    pub geometric_check_agrees: bool,
}

impl LinearChaosReport {
    pub fn all(&self) -> bool {
        self.coincident_tangencies && self.parabolic_or_hyperbolic && self.no_crossing
    }
}

pub fn linear_chaos_conditions(spec: &LinearSpec) -> Result<LinearChaosReport, LambdaError> {
    let a12p = spec.a_plus[0][1];
    let a12m = spec.a_minus[0][1];
    if a12p == 0.0 || a12m == 0.0 {
        return Err(LambdaError::DegenerateA12);
    }
    let residual = a12m * spec.b_plus[0] - a12p * spec.b_minus[0];
    let coincident = residual == 0.0;
    let cond_ii = a12m * spec.b_minus[1] - spec.a_minus[1][1] * spec.b_minus[0] < 0.0
        || a12p * spec.b_plus[1] - spec.a_plus[1][1] * spec.b_plus[0] > 0.0;
    let cond_iii = a12p * a12m < 0.0;
    let geo = match (spec.tangency_plus(), spec.tangency_minus()) {
        (Some(p), Some(q)) => (p.dist(q) <= 1e-9) == coincident,
        _ => false,
    };
    Ok(LinearChaosReport {
        coincident_tangencies: coincident,
        coincidence_residual: residual,
        parabolic_or_hyperbolic: cond_ii,
        no_crossing: cond_iii,
        geometric_check_agrees: geo,
    })
}

/// Rasterized interior of a region for density estimates.
pub struct RasterGrid {
    x0: f64,
    y0: f64,
    nx: usize,
    ny: usize,
    cell: f64,
    interior: Vec<bool>,
    marked: Vec<bool>,
}

impl RasterGrid {
    /// Scanline rasterization of the region interior at the given cell size.
    pub fn new(region: &LambdaRegion, cell: f64) -> RasterGrid {
        let (lo, hi) = region.bbox();
        let x0 = lo.x - 2.0 * cell;
        let y0 = lo.y - 2.0 * cell;
        let nx = ((hi.x - lo.x) / cell).ceil() as usize + 4;
        let ny = ((hi.y - lo.y) / cell).ceil() as usize + 4;
        let mut interior = vec![false; nx * ny];

        // Gather all ring edges.
        let mut edges: Vec<(Vec2, Vec2)> = Vec::new();
        for ring in std::iter::once(&region.outer).chain(region.holes.iter()) {
            for i in 0..ring.len() {
                let a = ring[i];
                let b = ring[(i + 1) % ring.len()];
                if a.y != b.y {
                    edges.push((a, b));
                }
            }
        }
        for iy in 0..ny {
            let y = y0 + (iy as f64 + 0.5) * cell;
            let mut xs: Vec<f64> = edges
                .iter()
                .filter(|(a, b)| (a.y > y) != (b.y > y))
                .map(|(a, b)| a.x + (y - a.y) / (b.y - a.y) * (b.x - a.x))
                .collect();
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks(2) {
                if pair.len() < 2 {
                    break;
                }
                let ix_lo = (((pair[0] - x0) / cell).ceil() as isize).max(0) as usize;
                let ix_hi = (((pair[1] - x0) / cell).floor() as isize).max(-1) as usize;
                for ix in ix_lo..=ix_hi.min(nx.saturating_sub(1)) {
                    let cx = x0 + (ix as f64 + 0.5) * cell;
                    if cx > pair[0] && cx < pair[1] {
                        interior[iy * nx + ix] = true;
                    }
                }
            }
        }
        let marked = vec![false; nx * ny];
        RasterGrid {
            x0,
            y0,
            nx,
            ny,
            cell,
            interior,
            marked,
        }
    }

    fn index(&self, p: Vec2) -> Option<usize> {
        let ix = ((p.x - self.x0) / self.cell).floor();
        let iy = ((p.y - self.y0) / self.cell).floor();
        if ix < 0.0 || iy < 0.0 {
            return None;
        }
        let (ix, iy) = (ix as usize, iy as usize);
        (ix < self.nx && iy < self.ny).then_some(iy * self.nx + ix)
    }

    pub fn mark_point(&mut self, p: Vec2) {
        if let Some(i) = self.index(p) {
            self.marked[i] = true;
        }
    }

    /// Mark every cell a polyline passes through (dense walking).
    pub fn mark_polyline(&mut self, pts: &[Vec2]) {
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1]);
            let steps = (a.dist(b) / (0.5 * self.cell)).ceil().max(1.0) as usize;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                self.mark_point(Vec2::new(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)));
            }
        }
    }

    /// (covered interior cells, interior cells).
    pub fn coverage(&self) -> (usize, usize) {
        let mut cov = 0;
        let mut tot = 0;
        for i in 0..self.interior.len() {
            if self.interior[i] {
                tot += 1;
                if self.marked[i] {
                    cov += 1;
                }
            }
        }
        (cov, tot)
    }
}

/// Witness record for one sampled interior point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeWitness {
    pub q: Vec2,
    /// Gap of the closed orbit constructed through `q`.
    pub closure_gap: f64,
    /// Distance of the forward return to `q`.
    pub recurrence_gap: f64,
    pub visited_sliding: bool,
    pub visited_escaping: bool,
    pub ok: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Theorem2Report {
    pub witnesses: Vec<ProbeWitness>,
    /// Fraction of interior grid cells reached by the forward sweep.
    pub coverage: f64,
    pub periodic_witnesses_pass: bool,
    pub density_pass: bool,
    pub recurrence_pass: bool,
    pub nonwandering_pass: bool,
}

impl Theorem2Report {
    pub fn all(&self) -> bool {
        self.periodic_witnesses_pass && self.density_pass && self.recurrence_pass && self.nonwandering_pass
    }
}

const COVERAGE_CELL: f64 = 1e-2;
const SWEEP_EXITS: usize = 1400;

/// Probe the recurrence structure of the region: periodic witnesses through
/// sampled interior points, forward-sweep density, and recurrence flags.
pub fn theorem2_probes(
    sys: &PiecewiseSystem,
    region: &LambdaRegion,
    n_samples: usize,
    seed: u64,
) -> Result<Theorem2Report, LambdaError> {
    let mut sim = Simulator::new(sys, Policy::StaySliding)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_interior(region, n_samples, &mut rng)?;

    let mut witnesses = Vec::new();
    for q in samples {
        let w = periodic_witness(sys, &mut sim, region, q)?;
        witnesses.push(w);
    }

    // Forward sweep density from the hub tangency.
    let mut grid = RasterGrid::new(region, COVERAGE_CELL);
    sweep_from_tangency(sys, region, &mut grid)?;
    let (cov, tot) = grid.coverage();
    let coverage = if tot == 0 { 0.0 } else { cov as f64 / tot as f64 };

    let periodic = witnesses.iter().all(|w| w.closure_gap <= 1e-6);
    let recur = witnesses
        .iter()
        .all(|w| w.recurrence_gap <= sys.tol.rec && w.visited_sliding && w.visited_escaping);
    Ok(Theorem2Report {
        witnesses,
        coverage,
        periodic_witnesses_pass: periodic,
        density_pass: coverage >= 0.99,
        recurrence_pass: recur,
        nonwandering_pass: recur,
    })
}

fn sample_interior(
    region: &LambdaRegion,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec2>, LambdaError> {
    let (lo, hi) = region.bbox();
    let mut out = Vec::new();
    for _ in 0..200_000 {
        if out.len() >= n {
            return Ok(out);
        }
        let p = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
        if region.contains(p) && region.boundary_distance(p) > 3.0 * COVERAGE_CELL {
            out.push(p);
        }
    }
    Err(LambdaError::ProbeBudgetExceeded(
        "interior sampling failed".into(),
    ))
}

/// Construct the closed concatenation `q -> sliding -> tangency -> escaping
/// -> q` and measure its gaps.
fn periodic_witness(
    sys: &PiecewiseSystem,
    sim: &mut Simulator,
    region: &LambdaRegion,
    q: Vec2,
) -> Result<ProbeWitness, LambdaError> {
    let chart = region.chart;
    let s0 = region.tangency_s;
    let fv = sys.f().eval(q.x, q.y);
    let side = if fv > 0.0 { Side::X } else { Side::Y };
    let fail = |gap: f64| ProbeWitness {
        q,
        closure_gap: gap,
        recurrence_gap: gap,
        visited_sliding: false,
        visited_escaping: false,
        ok: false,
    };

    // Backward orbit of q to its Sigma entry.
    let back_field = crate::field::PolyField::new(
        sys.field(side).u.scale(-1.0),
        sys.field(side).v.scale(-1.0),
    );
    let back = integrate_arc(&back_field, sys.f(), &sys.k, q, 0.0, 1e4, true, &sys.tol)?;
    if !matches!(back.stop, FlowStop::SigmaCross { .. } | FlowStop::SigmaGraze) {
        return Ok(fail(f64::INFINITY));
    }
    let entry_pt = back.end().1;
    let (c_e, s_e, d_e) = sys.curve.locate(entry_pt).unwrap();
    if c_e != chart || d_e > 1e-6 {
        return Ok(fail(f64::INFINITY));
    }

    // Tangent-orbit case: q's own orbit is the closed boundary loop.
    if (s_e - s0).abs() <= 1e-6 && back.stop == FlowStop::SigmaGraze {
        let fwd = integrate_arc(
            sys.field(side),
            sys.f(),
            &sys.k,
            sys.chart(chart).point(s0),
            0.0,
            1e4,
            true,
            &sys.tol,
        )?;
        let gap = fwd.end().1.dist(sys.chart(chart).point(s0));
        let min_d = closest_approach(sys, side, &fwd, q);
        return Ok(ProbeWitness {
            q,
            closure_gap: gap.max(min_d),
            recurrence_gap: gap.max(min_d),
            visited_sliding: true,
            visited_escaping: true,
            ok: gap.max(min_d) <= 1e-6,
        });
    }

    // Forward orbit of q to its sliding landing.
    let fwd = integrate_arc(sys.field(side), sys.f(), &sys.k, q, 0.0, 1e4, true, &sys.tol)?;
    if !matches!(fwd.stop, FlowStop::SigmaCross { .. }) {
        return Ok(fail(f64::INFINITY));
    }
    let (c_l, s_l, d_l) = sys.curve.locate(fwd.end().1).unwrap();
    if c_l != chart || d_l > 1e-6 {
        return Ok(fail(f64::INFINITY));
    }

    // Slide from the landing to the tangency.
    let visited_sliding = true;
    if !slide_reaches(sim, chart, s_l, s0)? {
        return Ok(fail(f64::INFINITY));
    }
    // Slide through into the escaping side up to the entry parameter.
    if !slide_reaches(sim, chart, s0, s_e)? {
        return Ok(fail(f64::INFINITY));
    }
    let visited_escaping = true;

    // Exit orbit from the entry parameter: it is q's orbit again.
    let exit = integrate_arc(
        sys.field(side),
        sys.f(),
        &sys.k,
        sys.chart(chart).point(s_e),
        0.0,
        1e4,
        true,
        &sys.tol,
    )?;
    let gap = closest_approach(sys, side, &exit, q);

    Ok(ProbeWitness {
        q,
        closure_gap: gap,
        recurrence_gap: gap,
        visited_sliding,
        visited_escaping,
        ok: gap <= 1e-6,
    })
}

/// Slide from `s_from` toward `s_to` (both on the same chart) and confirm the
/// reduced flow arrives there.
fn slide_reaches(
    sim: &mut Simulator,
    chart: usize,
    s_from: f64,
    s_to: f64,
) -> Result<bool, LambdaError> {
    if (s_from - s_to).abs() <= 1e-9 {
        return Ok(true);
    }
    let mut s = s_from;
    for _ in 0..8 {
        match sim.slide_step_opts(chart, s, 0.0, 1e6, 0, false, Some(s_to))? {
            StepOutcome::Next { arc, state } => {
                let _ = arc;
                match state {
                    crate::hybrid::State::Slide { s: s_new, .. } => {
                        if (s_new - s_to).abs() <= 1e-9 {
                            return Ok(true);
                        }
                        if (s_new - s).abs() < 1e-12 {
                            return Ok(false);
                        }
                        s = s_new;
                    }
                    _ => return Ok(false),
                }
            }
            StepOutcome::Terminal { event, .. } => {
                return Ok(match event.kind {
                    EventKind::ReachPseudoEq { s: spe, .. } => (spe - s_to).abs() <= 1e-6,
                    _ => false,
                });
            }
        }
    }
    Ok(false)
}

/// Mark every cell reachable from the tangency hub: the sliding corridor,
/// both families of exit orbits, and the tangent loops.
fn sweep_from_tangency(
    sys: &PiecewiseSystem,
    region: &LambdaRegion,
    grid: &mut RasterGrid,
) -> Result<(), LambdaError> {
    let chart = region.chart;
    let ch = sys.chart(chart);
    let s0 = region.tangency_s;
    let (sig_lo, sig_hi) = region.sigma_segment;

    // The switching-curve corridor itself.
    let n = 512;
    let sigma_pts: Vec<Vec2> = (0..=n)
        .map(|i| ch.point(sig_lo + (sig_hi - sig_lo) * i as f64 / n as f64))
        .collect();
    grid.mark_polyline(&sigma_pts);

    // Exit orbits from the escaping range swept densely.
    let dir_e = if region.p_e > s0 { 1.0 } else { -1.0 };
    let q_max = match (region.q_e_minus, region.q_e_plus) {
        (Some(a), Some(b)) => {
            if dir_e > 0.0 {
                a.max(b)
            } else {
                a.min(b)
            }
        }
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => region.p_e,
    };
    for side in [Side::X, Side::Y] {
        let q_side = match side {
            Side::X => region.q_e_minus,
            Side::Y => region.q_e_plus,
        };
        let Some(q_ext) = q_side else { continue };
        let _ = q_max;
        for i in 1..=SWEEP_EXITS {
            let frac = i as f64 / SWEEP_EXITS as f64;
            let q = s0 + (q_ext - s0) * frac;
            let (land, pts) = exit_arc(sys, chart, side, q)?;
            let _ = land;
            grid.mark_polyline(&pts);
        }
    }
    for hole in &region.holes {
        grid.mark_polyline(hole);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub hub: Vec2,
    pub to_hub_ok: usize,
    pub from_hub_ok: usize,
    pub total: usize,
    pub failures: Vec<Vec2>,
    pub pass: bool,
}

const HUB_EPS: f64 = 1e-6;
const SEARCH_DEPTH: usize = 12;
const SEARCH_NODES: usize = 600;

/// Verify pairwise forward connectivity through the hub: every sample reaches
/// the hub forward, and the hub reaches every sample forward.
pub fn minimality_probe(
    sys: &PiecewiseSystem,
    region: &LambdaRegion,
    hub: Vec2,
    n_samples: usize,
    seed: u64,
) -> Result<MinimalityReport, LambdaError> {
    let mut sim = Simulator::new(sys, Policy::StaySliding)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = sample_interior(region, n_samples, &mut rng)?;

    let mut to_hub_ok = 0;
    let mut from_hub_ok = 0;
    let mut failures = Vec::new();
    for &q in &samples {
        let to_hub = reaches_point(sys, &mut sim, q, hub)?;
        let from_hub = hub_reaches(sys, &mut sim, hub, q)?;
        if to_hub {
            to_hub_ok += 1;
        }
        if from_hub {
            from_hub_ok += 1;
        }
        if !(to_hub && from_hub) {
            failures.push(q);
        }
    }
    Ok(MinimalityReport {
        hub,
        to_hub_ok,
        from_hub_ok,
        total: samples.len(),
        failures,
        pass: to_hub_ok == samples.len() && from_hub_ok == samples.len(),
    })
}

/// Depth-first search over branch choices: does some legal forward
/// continuation from `start` pass within `HUB_EPS` of `goal`?
fn reaches_point(
    sys: &PiecewiseSystem,
    sim: &mut Simulator,
    start: Vec2,
    goal: Vec2,
) -> Result<bool, LambdaError> {
    let mut budget = SEARCH_NODES;
    let state = match sim.initial_state(start, 0.0)? {
        crate::hybrid::StateOrTerminal::State(s) => s,
        crate::hybrid::StateOrTerminal::Terminal(e) => return Ok(e.point.dist(goal) <= HUB_EPS),
    };
    search(sys, sim, state, goal, SEARCH_DEPTH, &mut budget)
}

fn search(
    sys: &PiecewiseSystem,
    sim: &mut Simulator,
    state: crate::hybrid::State,
    goal: Vec2,
    depth: usize,
    budget: &mut usize,
) -> Result<bool, LambdaError> {
    if *budget == 0 {
        return Ok(false);
    }
    *budget -= 1;

    use crate::hybrid::State;
    match state {
        State::Flow { side, p } => {
            if p.dist(goal) <= HUB_EPS {
                return Ok(true);
            }
            let arc = integrate_arc(sys.field(side), sys.f(), &sys.k, p, 0.0, 1e4, true, &sys.tol)?;
            if arc
                .samples
                .iter()
                .any(|&(_, pt)| pt.dist(goal) <= 1e-4)
            {
                // Near pass on a flow arc: refine by minimum distance.
                let best = arc
                    .samples
                    .iter()
                    .map(|&(_, pt)| pt.dist(goal))
                    .fold(f64::INFINITY, f64::min);
                if best <= HUB_EPS * 10.0 {
                    return Ok(true);
                }
            }
            match arc.stop {
                FlowStop::SigmaCross { .. } | FlowStop::SigmaGraze => {
                    let (chart, s_raw, d) = sys.curve.locate(arc.end().1).unwrap();
                    if d > 1e-6 {
                        return Ok(false);
                    }
                    let s = snap(sim, chart, s_raw);
                    if sys.chart(chart).point(s).dist(goal) <= HUB_EPS {
                        return Ok(true);
                    }
                    if depth == 0 {
                        return Ok(false);
                    }
                    branch_search(sys, sim, chart, s, goal, depth - 1, budget)
                }
                _ => Ok(false),
            }
        }
        State::Slide { chart, s } => branch_search(sys, sim, chart, s, goal, depth, budget),
    }
}

fn snap(sim: &Simulator, chart: usize, s: f64) -> f64 {
    if let Some((bp, d)) = sim.partition.charts[chart].nearest_tangency(s) {
        if d <= sim.sys.tol.snap {
            return bp.s;
        }
    }
    s
}

fn branch_search(
    sys: &PiecewiseSystem,
    sim: &mut Simulator,
    chart: usize,
    s: f64,
    goal: Vec2,
    depth: usize,
    budget: &mut usize,
) -> Result<bool, LambdaError> {
    use crate::hybrid::{ChoiceTag, State};
    let p = sys.chart(chart).point(s);
    if p.dist(goal) <= HUB_EPS {
        return Ok(true);
    }
    if depth == 0 || *budget == 0 {
        return Ok(false);
    }
    let options = sim.options_at(chart, s);
    for opt in options {
        let found = match opt {
            ChoiceTag::Stay => {
                match sim.slide_step_opts(chart, s, 0.0, 1e6, 0, false, None)? {
                    StepOutcome::Next { arc, state } => {
                        if arc
                            .samples
                            .iter()
                            .any(|&(_, pt)| pt.dist(goal) <= HUB_EPS)
                        {
                            true
                        } else {
                            search(sys, sim, state, goal, depth - 1, budget)?
                        }
                    }
                    StepOutcome::Terminal { arc, event } => {
                        let on_arc = arc
                            .map(|a| a.samples.iter().any(|&(_, pt)| pt.dist(goal) <= HUB_EPS))
                            .unwrap_or(false);
                        on_arc || event.point.dist(goal) <= HUB_EPS
                    }
                }
            }
            ChoiceTag::ViaX => search(
                sys,
                sim,
                State::Flow { side: Side::X, p },
                goal,
                depth - 1,
                budget,
            )?,
            ChoiceTag::ViaY => search(
                sys,
                sim,
                State::Flow { side: Side::Y, p },
                goal,
                depth - 1,
                budget,
            )?,
        };
        if found {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Does the hub reach `q` forward? Backward-chain `q` to an escaping entry
/// the hub can slide to, then verify the forward exit orbit passes `q`.
fn hub_reaches(
    sys: &PiecewiseSystem,
    sim: &mut Simulator,
    hub: Vec2,
    q: Vec2,
) -> Result<bool, LambdaError> {
    // Hub sits on (or at the boundary of) an escaping interval; compute the
    // parameter range the hub's escape-slide covers.
    let (hub_chart, hub_s_raw, hub_d) = sys.curve.locate(hub).unwrap();
    if hub_d > 1e-6 {
        return Ok(false);
    }
    let hub_s = snap(sim, hub_chart, hub_s_raw);

    backchain(sys, sim, hub_chart, hub_s, q, 5)
}

/// Recursive backward chaining: find the forward route hub -> ... -> q.
fn backchain(
    sys: &PiecewiseSystem,
    sim: &mut Simulator,
    hub_chart: usize,
    hub_s: f64,
    q: Vec2,
    depth: usize,
) -> Result<bool, LambdaError> {
    if depth == 0 {
        return Ok(false);
    }
    let fv = sys.f().eval(q.x, q.y);
    let side = if fv.abs() <= sys.tol.on_sigma {
        // On the curve (a chained sewing entry): the forward-arriving field
        // is the one whose orbit crosses into the other domain here.
        if sys.lie1_at(Side::X, q) > 0.0 {
            Side::Y
        } else {
            Side::X
        }
    } else if fv > 0.0 {
        Side::X
    } else {
        Side::Y
    };
    let back_field = crate::field::PolyField::new(
        sys.field(side).u.scale(-1.0),
        sys.field(side).v.scale(-1.0),
    );
    let back = integrate_arc(&back_field, sys.f(), &sys.k, q, 0.0, 1e4, true, &sys.tol)?;
    if !matches!(back.stop, FlowStop::SigmaCross { .. } | FlowStop::SigmaGraze) {
        return Ok(false);
    }
    let (c_e, s_e_raw, d_e) = sys.curve.locate(back.end().1).unwrap();
    if d_e > 1e-6 {
        return Ok(false);
    }
    let s_e = snap(sim, c_e, s_e_raw);

    // Direct coverage: the entry point is the hub itself (grazing orbit), or
    // it lies in an escaping stretch the hub's escape-slide can reach.
    let covered = (c_e == hub_chart && (s_e - hub_s).abs() <= 1e-6)
        || escape_reach(sim, hub_chart, hub_s, c_e, s_e)?;
    if covered {
        // Verify forward: the exit orbit from the entry passes through q.
        let exit = integrate_arc(
            sys.field(side),
            sys.f(),
            &sys.k,
            sys.chart(c_e).point(s_e),
            0.0,
            1e4,
            true,
            &sys.tol,
        )?;
        let gap = closest_approach(sys, side, &exit, q);
        return Ok(gap <= 1e-4);
    }

    // Sewing entry: the arriving field there is the other one; chain again
    // from the entry point nudged into the arriving field's domain.
    let kind = sim.partition.charts[c_e]
        .interval_of(s_e)
        .map(|iv| iv.kind);
    if kind == Some(RegionKind::Sewing) {
        return backchain(sys, sim, hub_chart, hub_s, back.end().1, depth - 1);
    }
    Ok(false)
}

/// Can the hub's escape-slide cover the parameter `s_e` on `c_e`?
fn escape_reach(
    sim: &mut Simulator,
    hub_chart: usize,
    hub_s: f64,
    c_e: usize,
    s_e: f64,
) -> Result<bool, LambdaError> {
    if c_e != hub_chart {
        return Ok(false);
    }
    let part = &sim.partition.charts[hub_chart];
    let Some(iv) = part.interval_of(s_e) else {
        return Ok(false);
    };
    if iv.kind != RegionKind::Escaping {
        return Ok(false);
    }
    // The hub must sit on the boundary of (or inside) this interval and the
    // reduced flow must run from the hub toward s_e.
    let touches = (hub_s >= iv.lo - 1e-7 && hub_s <= iv.hi + 1e-7)
        || (hub_s - iv.lo).abs() <= 1e-7
        || (hub_s - iv.hi).abs() <= 1e-7;
    if !touches {
        return Ok(false);
    }
    slide_reaches(sim, hub_chart, hub_s, s_e)
}
