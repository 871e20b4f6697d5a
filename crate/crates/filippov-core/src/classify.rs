//! Classification of the omega-limit set of a maximal trajectory.
//!
//! The decision procedure, in order:
//!
//! 1. absorbing terminals (pseudo-equilibrium, type-II tangency, dead ends at
//!    special tangency points);
//! 2. smooth tails that stopped meeting `Sigma`: point convergence to an
//!    equilibrium of one side field, or a closed-orbit witness on a
//!    transversal section;
//! 3. an eventually-periodic `Sigma`-event signature: a pseudo-cycle, refined
//!    to a pseudo-graph when the cycle passes through (pseudo-)equilibria and
//!    to a mild pseudo-cycle when it runs through a double tangency and fails
//!    the invariance and/or properness checks;
//! 4. signatures visiting both sliding and escaping regions persistently
//!    without settling: a chaotic set with non-empty interior, backed by an
//!    explicit invariant region.
//!
//! `Undetermined` is a verdict, not an error: it is returned whenever the
//! evidence does not support any other claim.

use serde::{Deserialize, Serialize};

use crate::field::equilibria;
use crate::geom::Vec2;
use crate::hybrid::{ChoiceTag, EventKind, EventRecord, Mode, Policy, Simulator, Trajectory};
use crate::integrate::{integrate_arc, FlowStop};
use crate::lambda::{construct_lambda, LambdaRegion};
use crate::sigma::{classify_point, partition_sigma, DoubleKind, RegionKind, SpecialTangency};
use crate::system::{PiecewiseSystem, Side};
use crate::tol::Tolerances;

/// One `Sigma`-event of a trajectory with its region label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnEvent {
    pub arc_index: usize,
    pub t: f64,
    pub chart: usize,
    pub s: f64,
    pub point: Vec2,
    /// Interval kind at `s` (tangency kinds at breakpoints).
    pub region: RegionKind,
    pub mode_in: Option<Mode>,
    pub mode_out: Option<Mode>,
    pub kind: EventKind,
}

/// Ordered `Sigma`-events of a trajectory.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReturnSequence {
    pub events: Vec<ReturnEvent>,
}

/// Extract the ordered `Sigma`-events with region labels attached.
pub fn return_sequence(sys: &PiecewiseSystem, traj: &Trajectory) -> ReturnSequence {
    let part = partition_sigma(sys).ok();
    let mut events = Vec::new();
    for (i, arc) in traj.arcs.iter().enumerate() {
        let ev = arc.entry;
        let (chart, s) = match ev.kind {
            EventKind::HitSigma { chart, s, .. }
            | EventKind::LeaveSigmaAtTangency { chart, s, .. }
            | EventKind::PolicyBranch { chart, s, .. } => (chart, s),
            _ => continue,
        };
        let region = part
            .as_ref()
            .and_then(|p| {
                let cp = &p.charts[chart];
                if let Some((bp, d)) = cp.nearest_tangency(s) {
                    if d <= sys.tol.snap {
                        return Some(match bp.kind {
                            crate::sigma::BreakpointKind::TangencyX => RegionKind::TangencyX,
                            crate::sigma::BreakpointKind::TangencyY => RegionKind::TangencyY,
                            _ => RegionKind::DoubleTangency,
                        });
                    }
                }
                cp.interval_of(s).map(|iv| iv.kind)
            })
            .unwrap_or_else(|| crate::sigma::region_at(sys, ev.point));
        events.push(ReturnEvent {
            arc_index: i,
            t: ev.time,
            chart,
            s,
            point: ev.point,
            region,
            mode_in: (i > 0).then(|| traj.arcs[i - 1].mode),
            mode_out: Some(arc.mode),
            kind: ev.kind,
        });
    }
    ReturnSequence { events }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PseudoCycleKind {
    Crossing,
    Tangent,
    Sliding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MildKind {
    I,
    II,
    III,
}

/// The taxonomy of omega-limit sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OmegaVerdict {
    EquilibriumX,
    EquilibriumY,
    PeriodicOrbitX,
    PeriodicOrbitY,
    GraphXorY,
    PseudoEquilibrium,
    PseudoCycle(PseudoCycleKind),
    MildPseudoCycle(MildKind),
    PseudoGraph,
    TangencyTypeI,
    TangencyTypeII,
    ChaoticTypeIII,
    Undetermined,
}

/// A detected eventually-periodic event signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleEvidence {
    pub period_events: usize,
    pub rehit_distance: f64,
    pub window: Vec<ReturnEvent>,
    pub has_slide_arc: bool,
    pub has_tangency_event: bool,
}

/// Machine-checkable evidence backing a verdict.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OmegaEvidence {
    pub limit_point: Option<Vec2>,
    pub terminal: Option<EventRecord>,
    pub cycle: Option<CycleEvidence>,
    pub lambda: Option<LambdaRegion>,
    /// Counts of sliding / escaping events supporting a chaotic verdict.
    pub two_sided_counts: Option<(usize, usize)>,
    /// Estimated period of a smooth closed orbit.
    pub period: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OmegaReport {
    pub verdict: OmegaVerdict,
    pub evidence: OmegaEvidence,
}

impl OmegaReport {
    fn undetermined(reason: impl Into<String>) -> Self {
        OmegaReport {
            verdict: OmegaVerdict::Undetermined,
            evidence: OmegaEvidence {
                reason: reason.into(),
                ..Default::default()
            },
        }
    }
}

/// Decide which taxonomy object the omega-limit of `traj` is.
pub fn classify_omega(sys: &PiecewiseSystem, traj: &Trajectory, tol: &Tolerances) -> OmegaReport {
    // (1) Absorbing terminals.
    match traj.terminal.kind {
        EventKind::ReachPseudoEq { .. } => {
            return OmegaReport {
                verdict: OmegaVerdict::PseudoEquilibrium,
                evidence: OmegaEvidence {
                    limit_point: Some(traj.terminal.point),
                    terminal: Some(traj.terminal),
                    reason: "absorbed by a pseudo-equilibrium".into(),
                    ..Default::default()
                },
            };
        }
        EventKind::ReachTypeII { .. } => {
            return OmegaReport {
                verdict: OmegaVerdict::TangencyTypeII,
                evidence: OmegaEvidence {
                    limit_point: Some(traj.terminal.point),
                    terminal: Some(traj.terminal),
                    reason: "absorbed by a type-II tangency".into(),
                    ..Default::default()
                },
            };
        }
        EventKind::DeadEnd { chart, s } => {
            let rep = classify_point(sys, chart, s);
            let verdict = match rep.special {
                SpecialTangency::TypeI => OmegaVerdict::TangencyTypeI,
                SpecialTangency::TypeII => OmegaVerdict::TangencyTypeII,
                SpecialTangency::None => OmegaVerdict::Undetermined,
            };
            return OmegaReport {
                verdict,
                evidence: OmegaEvidence {
                    limit_point: Some(traj.terminal.point),
                    terminal: Some(traj.terminal),
                    reason: "trajectory terminates with no legal continuation".into(),
                    ..Default::default()
                },
            };
        }
        EventKind::ExitK => {
            return OmegaReport::undetermined("trajectory left K");
        }
        _ => {}
    }

    let seq = return_sequence(sys, traj);
    let t_end = traj.terminal.time;

    // (2) Smooth tail: no Sigma events over the second half of the run.
    let tail_has_events = seq.events.iter().any(|e| e.t > 0.5 * t_end);
    if !tail_has_events {
        if let Some(arc) = traj.arcs.iter().rev().find(|a| a.mode != Mode::Slide) {
            if arc.t1 - arc.t0 > 0.25 * t_end {
                return smooth_tail_verdict(sys, arc, tol);
            }
        }
        return OmegaReport::undetermined("no persistent behaviour detected");
    }

    // (3) Eventually-periodic signature.
    if let Some(cycle) = detect_cycle(&seq, tol) {
        return refine_cycle_verdict(sys, traj, &seq, cycle, tol);
    }

    // (4) Two-sided recurrence without a settled signature.
    let slide_hits = seq
        .events
        .iter()
        .filter(|e| e.region == RegionKind::Sliding)
        .count();
    let escape_hits = seq
        .events
        .iter()
        .filter(|e| e.region == RegionKind::Escaping)
        .count();
    if slide_hits >= 3 && escape_hits >= 3 {
        if let Some((chart, s0)) = find_double_tangency(sys, &seq) {
            let rep = classify_point(sys, chart, s0);
            if matches!(rep.double_kind, DoubleKind::Parabolic | DoubleKind::Hyperbolic) {
                match construct_lambda(sys, chart, s0) {
                    Ok(lambda) => {
                        return OmegaReport {
                            verdict: OmegaVerdict::ChaoticTypeIII,
                            evidence: OmegaEvidence {
                                lambda: Some(lambda),
                                two_sided_counts: Some((slide_hits, escape_hits)),
                                reason:
                                    "persistent two-sided visits through a parabolic/hyperbolic \
                                     double tangency"
                                        .into(),
                                ..Default::default()
                            },
                        };
                    }
                    Err(e) => {
                        return OmegaReport::undetermined(format!(
                            "two-sided recurrence but no invariant region: {e}"
                        ));
                    }
                }
            }
        }
        return OmegaReport::undetermined("two-sided recurrence without a double tangency");
    }

    OmegaReport::undetermined("no cycle, no smooth limit, no two-sided recurrence")
}

fn find_double_tangency(sys: &PiecewiseSystem, seq: &ReturnSequence) -> Option<(usize, f64)> {
    let part = partition_sigma(sys).ok()?;
    let visited: Vec<usize> = {
        let mut v: Vec<usize> = seq.events.iter().map(|e| e.chart).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    for chart in visited {
        for bp in &part.charts[chart].breakpoints {
            if bp.kind == crate::sigma::BreakpointKind::DoubleTangency {
                return Some((chart, bp.s));
            }
        }
    }
    None
}

fn smooth_tail_verdict(
    sys: &PiecewiseSystem,
    arc: &crate::hybrid::Arc,
    tol: &Tolerances,
) -> OmegaReport {
    let side = match arc.mode {
        Mode::FlowX => Side::X,
        Mode::FlowY => Side::Y,
        Mode::Slide => return OmegaReport::undetermined("sliding tail"),
    };
    let n = arc.samples.len();
    if n < 8 {
        return OmegaReport::undetermined("tail too short");
    }
    let p_end = arc.samples[n - 1].1;

    // Point convergence to an equilibrium of the governing field.
    let fv = sys.field(side).eval(p_end);
    let tail = &arc.samples[n - n.min(16)..];
    let tail_diam = tail
        .iter()
        .flat_map(|a| tail.iter().map(move |b| a.1.dist(b.1)))
        .fold(0.0, f64::max);
    if fv.norm() < 1e-5 && tail_diam < 1e-5 {
        let verdict = match side {
            Side::X => OmegaVerdict::EquilibriumX,
            Side::Y => OmegaVerdict::EquilibriumY,
        };
        // Pin the limit point to the nearby equilibrium when it isolates.
        let limit = equilibria(sys.field(side), &sys.k, tol.root)
            .ok()
            .and_then(|eqs| {
                eqs.into_iter()
                    .min_by(|a, b| a.dist(p_end).total_cmp(&b.dist(p_end)))
            })
            .filter(|e| e.dist(p_end) < 1e-3)
            .unwrap_or(p_end);
        return OmegaReport {
            verdict,
            evidence: OmegaEvidence {
                limit_point: Some(limit),
                reason: "tail converges to an equilibrium of the governing field".into(),
                ..Default::default()
            },
        };
    }

    // Closed-orbit witness: successive crossings of the transversal section
    // through the end point (perpendicular to the flow there) converge.
    let v = sys.field(side).eval(p_end);
    if v.norm() > 1e-12 {
        let v_hat = v.scale(1.0 / v.norm());
        let normal = Vec2::new(-v_hat.y, v_hat.x);
        let mut crossings: Vec<(f64, Vec2)> = Vec::new();
        let mut prev: Option<(f64, Vec2, f64)> = None;
        for &(t, p) in arc.samples.iter() {
            let side_val = (p - p_end).dot(v_hat);
            if let Some((tp, pp, sp)) = prev {
                // Same-orientation crossings only.
                if sp < 0.0 && side_val >= 0.0 {
                    let w = sp.abs() / (sp.abs() + side_val.abs()).max(1e-300);
                    let q = Vec2::new(pp.x + w * (p.x - pp.x), pp.y + w * (p.y - pp.y));
                    let tq = tp + w * (t - tp);
                    crossings.push((tq, q));
                }
            }
            prev = Some((t, p, side_val));
        }
        // Keep crossings near the end point: a closed orbit crosses the full
        // transversal line on its far side too.
        crossings.retain(|(_, q)| (*q - p_end).dot(normal).abs() < 0.5);
        if crossings.len() >= 3 {
            let m = crossings.len();
            let d_last = crossings[m - 1].1.dist(crossings[m - 2].1);
            let d_prev = crossings[m - 2].1.dist(crossings[m - 3].1);
            if d_last < 1e-3 && d_last <= d_prev + tol.cycle {
                let period = crossings[m - 1].0 - crossings[m - 2].0;
                let verdict = match side {
                    Side::X => OmegaVerdict::PeriodicOrbitX,
                    Side::Y => OmegaVerdict::PeriodicOrbitY,
                };
                return OmegaReport {
                    verdict,
                    evidence: OmegaEvidence {
                        limit_point: Some(crossings[m - 1].1),
                        period: Some(period),
                        reason: format!(
                            "section re-hits converge ({} crossings, last gap {d_last:.2e})",
                            m
                        ),
                        ..Default::default()
                    },
                };
            }
        }
    }

    OmegaReport::undetermined("smooth tail with no detected limit object")
}

/// Token identity for signature comparison.
fn token(e: &ReturnEvent) -> (usize, u8, u8) {
    let kind = match e.region {
        RegionKind::Sewing => 0u8,
        RegionKind::Sliding => 1,
        RegionKind::Escaping => 2,
        RegionKind::TangencyX => 3,
        RegionKind::TangencyY => 4,
        RegionKind::DoubleTangency => 5,
    };
    let mode = match e.mode_out {
        Some(Mode::FlowX) => 0u8,
        Some(Mode::FlowY) => 1,
        Some(Mode::Slide) => 2,
        None => 3,
    };
    (e.chart, kind, mode)
}

/// Find the smallest period `k` whose last three windows match in tokens and
/// in `s` within `tol.cycle`.
fn detect_cycle(seq: &ReturnSequence, tol: &Tolerances) -> Option<CycleEvidence> {
    let ev = &seq.events;
    let n = ev.len();
    for k in 1..=n / 3 {
        let mut ok = true;
        let mut rehit: f64 = 0.0;
        for w in 0..2 * k {
            let a = &ev[n - 1 - w];
            let b = &ev[n - 1 - w - k];
            if token(a) != token(b) || (a.s - b.s).abs() > tol.cycle {
                ok = false;
                break;
            }
            rehit = rehit.max((a.s - b.s).abs());
        }
        if ok {
            let window: Vec<ReturnEvent> = ev[n - k..].to_vec();
            let has_slide_arc = window.iter().any(|e| e.mode_out == Some(Mode::Slide))
                || window.iter().any(|e| e.mode_in == Some(Mode::Slide));
            let has_tangency_event = window.iter().any(|e| e.region.is_tangency());
            return Some(CycleEvidence {
                period_events: k,
                rehit_distance: rehit,
                window,
                has_slide_arc,
                has_tangency_event,
            });
        }
    }
    None
}

fn refine_cycle_verdict(
    sys: &PiecewiseSystem,
    traj: &Trajectory,
    seq: &ReturnSequence,
    cycle: CycleEvidence,
    tol: &Tolerances,
) -> OmegaReport {
    // Gather the arc polylines of one complete cycle period. The final
    // window may end in a budget-truncated arc, so use the previous full
    // window of the matched signature.
    let n = seq.events.len();
    let k = cycle.period_events;
    let lo_arc = seq.events[n - 2 * k].arc_index;
    let hi_arc = seq.events[n - k].arc_index.max(lo_arc + 1);
    let cycle_polys: Vec<Vec<Vec2>> = traj.arcs[lo_arc..hi_arc]
        .iter()
        .map(|a| a.samples.iter().map(|&(_, p)| p).collect())
        .collect();

    // (4) Pseudo-graph: the cycle path passes through an equilibrium or a
    // pseudo-equilibrium.
    if cycle_passes_equilibrium(sys, &cycle, &cycle_polys, tol) {
        return OmegaReport {
            verdict: OmegaVerdict::PseudoGraph,
            evidence: OmegaEvidence {
                cycle: Some(cycle),
                reason: "cycle passes through an equilibrium or pseudo-equilibrium".into(),
                ..Default::default()
            },
        };
    }

    // (5) Through a double tangency: mild pseudo-cycle checks.
    let through_double = cycle.window.iter().any(|e| e.region == RegionKind::DoubleTangency);
    if through_double {
        let invariance_fails = branch_leaves_cycle(sys, &cycle, &cycle_polys);
        let properness_fails = has_closed_subsignature(&cycle, tol);
        let verdict = match (invariance_fails, properness_fails) {
            (true, false) => OmegaVerdict::MildPseudoCycle(MildKind::I),
            (false, true) => OmegaVerdict::MildPseudoCycle(MildKind::II),
            (true, true) => OmegaVerdict::MildPseudoCycle(MildKind::III),
            (false, false) => pseudo_cycle_verdict(&cycle),
        };
        return OmegaReport {
            verdict,
            evidence: OmegaEvidence {
                cycle: Some(cycle),
                reason: format!(
                    "cycle through a double tangency (invariance fails: {invariance_fails}, \
                     properness fails: {properness_fails})"
                ),
                ..Default::default()
            },
        };
    }

    OmegaReport {
        verdict: pseudo_cycle_verdict(&cycle),
        evidence: OmegaEvidence {
            cycle: Some(cycle),
            reason: "eventually-periodic Sigma-event signature".into(),
            ..Default::default()
        },
    }
}

fn pseudo_cycle_verdict(cycle: &CycleEvidence) -> OmegaVerdict {
    if cycle.has_slide_arc {
        OmegaVerdict::PseudoCycle(PseudoCycleKind::Sliding)
    } else if cycle.has_tangency_event {
        OmegaVerdict::PseudoCycle(PseudoCycleKind::Tangent)
    } else {
        OmegaVerdict::PseudoCycle(PseudoCycleKind::Crossing)
    }
}

fn cycle_passes_equilibrium(
    sys: &PiecewiseSystem,
    cycle: &CycleEvidence,
    cycle_polys: &[Vec<Vec2>],
    tol: &Tolerances,
) -> bool {
    let near = |q: Vec2| {
        cycle_polys
            .iter()
            .any(|poly| crate::geom::dist_to_polyline(q, poly) <= tol.cycle)
    };
    if let Ok(part) = partition_sigma(sys) {
        for cp in &part.charts {
            for pe in &cp.pseudo_equilibria {
                if near(pe.point) || cycle.window.iter().any(|e| (e.s - pe.s).abs() <= tol.cycle && e.chart == pe.chart)
                {
                    return true;
                }
            }
        }
    }
    for side in [Side::X, Side::Y] {
        if let Ok(eqs) = equilibria(sys.field(side), &sys.k, tol.root) {
            if eqs.iter().any(|&q| near(q)) {
                return true;
            }
        }
    }
    false
}

/// Probe every branch point on the cycle: does some non-chosen option leave
/// the closed curve?
fn branch_leaves_cycle(
    sys: &PiecewiseSystem,
    cycle: &CycleEvidence,
    cycle_polys: &[Vec<Vec2>],
) -> bool {
    let mut sim = match Simulator::new(sys, Policy::StaySliding) {
        Ok(s) => s,
        Err(_) => return false,
    };
    let leave_tol = 1e-4;
    let far = |pts: &[Vec2]| {
        pts.iter()
            .map(|p| {
                cycle_polys
                    .iter()
                    .map(|poly| crate::geom::dist_to_polyline(*p, poly))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    for e in &cycle.window {
        let options = sim.options_at(e.chart, e.s);
        if options.len() <= 1 {
            continue;
        }
        for opt in options {
            let p = sys.chart(e.chart).point(e.s);
            match opt {
                ChoiceTag::Stay => {
                    // Slide to the next stop and test the swept segment.
                    if let Ok(crate::hybrid::StepOutcome::Next { arc, .. }) =
                        sim.slide_step_opts(e.chart, e.s, 0.0, 1e5, 0, false, None)
                    {
                        let pts: Vec<Vec2> = arc.samples.iter().map(|&(_, p)| p).collect();
                        if far(&pts) > leave_tol {
                            return true;
                        }
                    }
                }
                ChoiceTag::ViaX | ChoiceTag::ViaY => {
                    let side = if opt == ChoiceTag::ViaX { Side::X } else { Side::Y };
                    if let Ok(arc) = integrate_arc(
                        sys.field(side),
                        sys.f(),
                        &sys.k,
                        p,
                        0.0,
                        1e4,
                        true,
                        &sys.tol,
                    ) {
                        if matches!(arc.stop, FlowStop::SigmaCross { .. } | FlowStop::SigmaGraze) {
                            let pts: Vec<Vec2> = arc.samples.iter().map(|&(_, p)| p).collect();
                            if far(&pts) > leave_tol {
                                return true;
                            }
                        }
                    }
                }
            }
        }
    }
    false
}

/// A strict closed sub-signature: two window events at the same chart
/// parameter closer than a full period apart.
fn has_closed_subsignature(cycle: &CycleEvidence, tol: &Tolerances) -> bool {
    let w = &cycle.window;
    let k = w.len();
    for i in 0..k {
        for j in i + 1..k {
            if j - i < k && w[i].chart == w[j].chart && (w[i].s - w[j].s).abs() <= tol.cycle {
                return true;
            }
        }
    }
    // Also: consecutive windows share their anchor, so a repeat of the anchor
    // event inside one window is a strict sub-cycle; additionally, a
    // single-event window whose arc starts and ends at the same point (a bare
    // tangent loop) has no strict sub-signature.
    false
}
