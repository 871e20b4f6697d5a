//! Event-driven construction of maximal trajectories.
//!
//! A trajectory is a concatenation of `X`-arcs, `Y`-arcs and sliding arcs.
//! Transitions happen at switching-curve events and obey the legality table:
//!
//! * a transversal hit on a sewing point switches fields;
//! * a transversal hit inside a sliding (or escaping) interval enters the
//!   sliding mode;
//! * a sliding arc leaves `Sigma` through a tangent orbit whose forward half
//!   lies in its own field's domain, or through a transversal departure, or
//!   continues across a flow-through tangency;
//! * on escaping intervals the forward continuation is not unique: the
//!   policy picks the branch (and may pick where along the interval to
//!   leave), and every choice is logged.
//!
//! Departures at a tangency of a field `F` are legal exactly when the sign
//! of the first non-vanishing Lie derivative `F^n.f` matches the sign of
//! `F`'s domain, i.e. the forward orbit enters that domain.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::SigmaChart;
use crate::field::contact_order_at;
use crate::geom::Vec2;
use crate::integrate::{integrate_arc as flow_integrate, FlowStop, IntegrateError};
use crate::poly::Poly1;
use crate::sigma::{
    classify_point, partition_sigma, region_at, sliding_speed, speed_fraction, ChartPartition,
    RegionKind, SigmaError, SigmaPartition, SpecialTangency,
};
use crate::system::{PiecewiseSystem, Side};

#[derive(Debug, Error)]
pub enum HybridError {
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Sigma(#[from] SigmaError),
    #[error("start point is outside K")]
    StartOutsideK,
    #[error("arc budget exhausted ({0} arcs)")]
    ArcBudget(usize),
    #[error("branch enumeration budget exhausted")]
    BranchBudget,
}

/// Governing dynamics of one arc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    FlowX,
    FlowY,
    Slide,
}

impl Mode {
    pub fn of(side: Side) -> Mode {
        match side {
            Side::X => Mode::FlowX,
            Side::Y => Mode::FlowY,
        }
    }
}

/// What happened at an arc boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EventKind {
    /// Start of the trajectory.
    Start,
    /// Reached `Sigma`; `transversal` is false for grazing contacts and
    /// slide-internal breakpoint passages.
    HitSigma {
        chart: usize,
        s: f64,
        transversal: bool,
    },
    /// Left `Sigma` through a tangent orbit of the given side.
    LeaveSigmaAtTangency { chart: usize, s: f64, side: Side },
    /// Left `Sigma` by a policy decision on an escaping interval.
    PolicyBranch { chart: usize, s: f64, side: Side },
    /// Absorbed by a pseudo-equilibrium (asymptotically or in finite time).
    ReachPseudoEq {
        chart: usize,
        s: f64,
        asymptotic: bool,
    },
    /// Absorbed by a type-II tangency point.
    ReachTypeII { chart: usize, s: f64 },
    /// No legal continuation (maximal trajectory terminates).
    DeadEnd { chart: usize, s: f64 },
    ExitK,
    TimeBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub time: f64,
    pub point: Vec2,
}

/// One mode-tagged arc of a trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Arc {
    pub mode: Mode,
    pub t0: f64,
    pub t1: f64,
    pub samples: Vec<(f64, Vec2)>,
    pub entry: EventRecord,
    pub exit: EventRecord,
}

impl Arc {
    pub fn start_point(&self) -> Vec2 {
        self.samples.first().expect("arc samples").1
    }

    pub fn end_point(&self) -> Vec2 {
        self.samples.last().expect("arc samples").1
    }
}

/// A continuation option at a point of `Sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChoiceTag {
    /// Slide (or slide through) along `Sigma`.
    Stay,
    /// Leave via the `X` field.
    ViaX,
    /// Leave via the `Y` field.
    ViaY,
}

impl ChoiceTag {
    fn side(self) -> Option<Side> {
        match self {
            ChoiceTag::Stay => None,
            ChoiceTag::ViaX => Some(Side::X),
            ChoiceTag::ViaY => Some(Side::Y),
        }
    }
}

/// A logged nondeterministic decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyBranchRecord {
    pub arc_index: usize,
    pub time: f64,
    pub chart: usize,
    pub s: f64,
    pub options: Vec<ChoiceTag>,
    pub chosen: ChoiceTag,
    /// For escaping-interval exits: fraction of the run to the next stop at
    /// which the exit happens.
    pub exit_fraction: Option<f64>,
}

/// One scripted decision: a choice plus an optional exit fraction
/// (`X@0.25` leaves via `X` a quarter of the way along the current
/// escaping run).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptTok {
    pub choice: ChoiceTag,
    pub frac: Option<f64>,
}

/// Branch-resolution policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Policy {
    AlwaysX,
    AlwaysY,
    StaySliding,
    Scripted(Vec<ScriptTok>),
    SeededRandom(u64),
}

impl Policy {
    /// Parse a script string such as `"XSYX"` or `"X@0.3 S Y@0.7"`.
    pub fn parse_script(s: &str) -> Option<Policy> {
        let mut toks = Vec::new();
        for raw in s
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
        {
            // Each chunk is one or more single-letter choices; the last may
            // carry an @fraction.
            let (letters, frac) = match raw.split_once('@') {
                Some((l, f)) => (l, Some(f.parse::<f64>().ok()?)),
                None => (raw, None),
            };
            let n = letters.chars().count();
            for (i, c) in letters.chars().enumerate() {
                let choice = match c.to_ascii_uppercase() {
                    'X' => ChoiceTag::ViaX,
                    'Y' => ChoiceTag::ViaY,
                    'S' => ChoiceTag::Stay,
                    _ => return None,
                };
                let f = if i + 1 == n { frac } else { None };
                toks.push(ScriptTok { choice, frac: f });
            }
        }
        (!toks.is_empty()).then_some(Policy::Scripted(toks))
    }
}

/// A maximal trajectory: arcs, branch log and terminal event.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub arcs: Vec<Arc>,
    pub policy_log: Vec<PolicyBranchRecord>,
    pub terminal: EventRecord,
}

impl Trajectory {
    /// Largest junction gap between consecutive arcs.
    pub fn max_junction_gap(&self) -> f64 {
        self.arcs
            .windows(2)
            .map(|w| w[0].end_point().dist(w[1].start_point()))
            .fold(0.0, f64::max)
    }

    /// All `Sigma` events in order (arc entries that sit on the curve).
    pub fn sigma_events(&self) -> Vec<(usize, EventRecord)> {
        let mut out = Vec::new();
        for (i, arc) in self.arcs.iter().enumerate() {
            if matches!(
                arc.entry.kind,
                EventKind::HitSigma { .. }
                    | EventKind::LeaveSigmaAtTangency { .. }
                    | EventKind::PolicyBranch { .. }
            ) {
                out.push((i, arc.entry));
            }
        }
        out
    }
}

const DEFAULT_MAX_ARCS: usize = 10_000;

/// Cached per-chart sliding dynamics.
struct SlideDyn {
    num: Option<Poly1>,
    den: Option<Poly1>,
    w: Option<Poly1>,
}

impl SlideDyn {
    fn build(sys: &PiecewiseSystem, chart: usize) -> SlideDyn {
        match speed_fraction(sys, chart) {
            Some((num, den, w)) => SlideDyn {
                num: Some(num),
                den: Some(den),
                w: Some(w),
            },
            None => SlideDyn {
                num: None,
                den: None,
                w: None,
            },
        }
    }

    /// Sliding speed; on polynomial charts this is the smooth rational
    /// extension, valid through tangency points (removable zeros of the
    /// denominator are resolved by derivative descent).
    fn speed(&self, sys: &PiecewiseSystem, chart: usize, s: f64) -> f64 {
        match (&self.num, &self.den, &self.w) {
            (Some(n), Some(d), Some(w)) => {
                let wv = w.eval(s);
                let scale = d.coeff_norm().max(1.0);
                let mut nq = n.clone();
                let mut dq = d.clone();
                for _ in 0..4 {
                    let dv = dq.eval(s);
                    if dv.abs() > scale * 1e-14 {
                        return nq.eval(s) / (dv * wv);
                    }
                    let nv = nq.eval(s);
                    if nv.abs() > n.coeff_norm().max(1.0) * 1e-10 {
                        return f64::NAN; // genuine pole
                    }
                    nq = nq.derivative();
                    dq = dq.derivative();
                }
                f64::NAN
            }
            _ => sliding_speed(sys, chart, s).unwrap_or(f64::NAN),
        }
    }
}

/// The simulation engine: system + partition + policy state.
pub struct Simulator<'a> {
    pub sys: &'a PiecewiseSystem,
    pub partition: SigmaPartition,
    slide_dyn: Vec<SlideDyn>,
    policy: Policy,
    rng: Option<ChaCha8Rng>,
    script_pos: usize,
    pub policy_log: Vec<PolicyBranchRecord>,
    arc_count: usize,
}

/// Continuation state between arcs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum State {
    Flow { side: Side, p: Vec2 },
    Slide { chart: usize, s: f64 },
}

/// Result of one engine step (public so probes and the classifier can drive
/// the engine directly).
pub enum StepOutcome {
    Next { arc: Arc, state: State },
    Terminal { arc: Option<Arc>, event: EventRecord },
}

impl<'a> Simulator<'a> {
    pub fn new(sys: &'a PiecewiseSystem, policy: Policy) -> Result<Self, HybridError> {
        let partition = partition_sigma(sys)?;
        let slide_dyn = (0..sys.curve.charts.len())
            .map(|ci| SlideDyn::build(sys, ci))
            .collect();
        let rng = match &policy {
            Policy::SeededRandom(seed) => Some(ChaCha8Rng::seed_from_u64(*seed)),
            _ => None,
        };
        Ok(Self {
            sys,
            partition,
            slide_dyn,
            policy,
            rng,
            script_pos: 0,
            policy_log: Vec::new(),
            arc_count: 0,
        })
    }

    fn chart_part(&self, chart: usize) -> &ChartPartition {
        &self.partition.charts[chart]
    }

    /// Initial state for a start point (on or off `Sigma`).
    pub fn initial_state(&mut self, p0: Vec2, t: f64) -> Result<StateOrTerminal, HybridError> {
        if !self.sys.k.contains(p0) {
            return Err(HybridError::StartOutsideK);
        }
        let fv = self.sys.f().eval(p0.x, p0.y);
        if fv.abs() > self.sys.tol.on_sigma {
            let side = if fv > 0.0 { Side::X } else { Side::Y };
            return Ok(StateOrTerminal::State(State::Flow { side, p: p0 }));
        }
        let (chart, s, _) = self
            .sys
            .curve
            .locate(p0)
            .expect("system has at least one chart");
        let s = self.snap_param(chart, s);
        match self.continue_from_sigma(chart, s, t, 0)? {
            StepOutcome::Next { state, .. } => Ok(StateOrTerminal::State(state)),
            StepOutcome::Terminal { event, .. } => Ok(StateOrTerminal::Terminal(event)),
        }
    }

    fn snap_param(&self, chart: usize, s: f64) -> f64 {
        if let Some((bp, d)) = self.chart_part(chart).nearest_tangency(s) {
            if d <= self.sys.tol.snap {
                return bp.s;
            }
        }
        s
    }

    /// Legal continuation options at a point of `Sigma`, in canonical order
    /// `[Stay, ViaX, ViaY]`.
    pub fn options_at(&self, chart: usize, s: f64) -> Vec<ChoiceTag> {
        let sys = self.sys;
        let ch = sys.chart(chart);
        let p = ch.point(s);
        let mut out = Vec::new();

        // Slide option: an adjacent sliding/escaping interval into which the
        // reduced flow moves away from s.
        let dyn_ = &self.slide_dyn[chart];
        for dir in [-1.0, 1.0] {
            let probe = s + dir * slide_probe(ch);
            if !ch.contains_param(probe) {
                continue;
            }
            let kind = self
                .chart_part(chart)
                .interval_of(probe)
                .map(|iv| iv.kind)
                .unwrap_or_else(|| region_at(sys, ch.point(probe)));
            if !matches!(kind, RegionKind::Sliding | RegionKind::Escaping) {
                continue;
            }
            let g = dyn_.speed(sys, chart, probe);
            if g.is_finite() && g * dir > 0.0 {
                out.push(ChoiceTag::Stay);
                break;
            }
        }

        for side in [Side::X, Side::Y] {
            let a = sys.lie1_at(side, p);
            let legal = if a.abs() > sys.tol.tan {
                match side {
                    Side::X => a > 0.0,
                    Side::Y => a < 0.0,
                }
            } else {
                match contact_order_at(sys.field(side), sys.f(), p, sys.tol.max_order, sys.tol.tan)
                {
                    Ok(c) => match side {
                        Side::X => c.sign > 0,
                        Side::Y => c.sign < 0,
                    },
                    Err(_) => false,
                }
            };
            if legal {
                out.push(match side {
                    Side::X => ChoiceTag::ViaX,
                    Side::Y => ChoiceTag::ViaY,
                });
            }
        }
        out
    }

    /// Whether `s` sits on a pseudo-equilibrium (within snap distance).
    fn at_pseudo_eq(&self, chart: usize, s: f64) -> Option<f64> {
        self.chart_part(chart)
            .pseudo_equilibria
            .iter()
            .find(|pe| (pe.s - s).abs() <= self.sys.tol.snap.max(1e3 * self.sys.tol.root))
            .map(|pe| pe.s)
    }

    /// Resolve the continuation at a `Sigma` point, consulting the policy if
    /// more than one branch is legal.
    pub fn continue_from_sigma(
        &mut self,
        chart: usize,
        s: f64,
        t: f64,
        arc_index: usize,
    ) -> Result<StepOutcome, HybridError> {
        let p = self.sys.chart(chart).point(s);

        if let Some(spe) = self.at_pseudo_eq(chart, s) {
            return Ok(StepOutcome::Terminal {
                arc: None,
                event: EventRecord {
                    kind: EventKind::ReachPseudoEq {
                        chart,
                        s: spe,
                        asymptotic: false,
                    },
                    time: t,
                    point: self.sys.chart(chart).point(spe),
                },
            });
        }

        let options = self.options_at(chart, s);
        if options.is_empty() {
            let report = classify_point(self.sys, chart, s);
            let kind = if report.special == SpecialTangency::TypeII {
                EventKind::ReachTypeII { chart, s }
            } else {
                EventKind::DeadEnd { chart, s }
            };
            return Ok(StepOutcome::Terminal {
                arc: None,
                event: EventRecord {
                    kind,
                    time: t,
                    point: p,
                },
            });
        }

        let (chosen, _frac) = if options.len() == 1 {
            (options[0], None)
        } else {
            self.decide(&options, chart, s, t, arc_index, false)
        };

        Ok(StepOutcome::Next {
            arc: Arc {
                // Zero-length marker arcs are never emitted; the caller uses
                // the state only.
                mode: Mode::Slide,
                t0: t,
                t1: t,
                samples: vec![(t, p)],
                entry: EventRecord {
                    kind: EventKind::Start,
                    time: t,
                    point: p,
                },
                exit: EventRecord {
                    kind: EventKind::Start,
                    time: t,
                    point: p,
                },
            },
            state: match chosen {
                ChoiceTag::Stay => State::Slide { chart, s },
                ChoiceTag::ViaX => State::Flow { side: Side::X, p },
                ChoiceTag::ViaY => State::Flow { side: Side::Y, p },
            },
        })
    }

    /// Policy decision among legal options. `escaping_run` marks decisions at
    /// the entry of an escaping slide, where an exit fraction applies.
    fn decide(
        &mut self,
        options: &[ChoiceTag],
        chart: usize,
        s: f64,
        t: f64,
        arc_index: usize,
        escaping_run: bool,
    ) -> (ChoiceTag, Option<f64>) {
        let preference = |prefs: &[ChoiceTag]| -> ChoiceTag {
            *prefs
                .iter()
                .find(|p| options.contains(p))
                .unwrap_or(&options[0])
        };
        let (chosen, frac) = match &self.policy {
            Policy::AlwaysX => (
                preference(&[ChoiceTag::ViaX, ChoiceTag::Stay, ChoiceTag::ViaY]),
                Some(0.0),
            ),
            Policy::AlwaysY => (
                preference(&[ChoiceTag::ViaY, ChoiceTag::Stay, ChoiceTag::ViaX]),
                Some(0.0),
            ),
            Policy::StaySliding => (
                preference(&[ChoiceTag::Stay, ChoiceTag::ViaX, ChoiceTag::ViaY]),
                None,
            ),
            Policy::Scripted(toks) => {
                let tok = toks.get(self.script_pos).copied();
                self.script_pos += 1;
                match tok {
                    Some(tok) if options.contains(&tok.choice) => (tok.choice, tok.frac),
                    _ => (
                        preference(&[ChoiceTag::Stay, ChoiceTag::ViaX, ChoiceTag::ViaY]),
                        None,
                    ),
                }
            }
            Policy::SeededRandom(_) => {
                let rng = self.rng.as_mut().expect("seeded policy has rng");
                if escaping_run {
                    // Alternate escape exits: always leave, at a random spot.
                    let side = if rng.gen_bool(0.5) {
                        ChoiceTag::ViaX
                    } else {
                        ChoiceTag::ViaY
                    };
                    let side = if options.contains(&side) {
                        side
                    } else {
                        preference(&[ChoiceTag::ViaX, ChoiceTag::ViaY, ChoiceTag::Stay])
                    };
                    (side, Some(rng.gen_range(0.1..0.9)))
                } else {
                    // Prefer to keep sliding through tangencies.
                    let stay = options.contains(&ChoiceTag::Stay) && rng.gen_bool(0.8);
                    if stay {
                        (ChoiceTag::Stay, None)
                    } else {
                        let flows: Vec<ChoiceTag> = options
                            .iter()
                            .copied()
                            .filter(|c| *c != ChoiceTag::Stay)
                            .collect();
                        if flows.is_empty() {
                            (ChoiceTag::Stay, None)
                        } else {
                            (flows[rng.gen_range(0..flows.len())], None)
                        }
                    }
                }
            }
        };
        self.policy_log.push(PolicyBranchRecord {
            arc_index,
            time: t,
            chart,
            s,
            options: options.to_vec(),
            chosen,
            exit_fraction: if chosen == ChoiceTag::Stay { None } else { frac },
        });
        (chosen, frac)
    }

    /// One flow arc from state `Flow`.
    pub fn flow_step(&mut self, side: Side, p: Vec2, t: f64, t_end: f64) -> Result<StepOutcome, HybridError> {
        let raw = flow_integrate(
            self.sys.field(side),
            self.sys.f(),
            &self.sys.k,
            p,
            t,
            t_end - t,
            true,
            &self.sys.tol,
        )?;
        let entry = EventRecord {
            kind: EventKind::Start,
            time: t,
            point: p,
        };
        let (te, pe) = raw.end();
        let mk_arc = |exit: EventRecord| Arc {
            mode: Mode::of(side),
            t0: t,
            t1: te,
            samples: raw.samples.clone(),
            entry,
            exit,
        };
        match raw.stop {
            FlowStop::TimeBudget => {
                let ev = EventRecord {
                    kind: EventKind::TimeBudget,
                    time: te,
                    point: pe,
                };
                Ok(StepOutcome::Terminal {
                    arc: Some(mk_arc(ev)),
                    event: ev,
                })
            }
            FlowStop::ExitK => {
                let ev = EventRecord {
                    kind: EventKind::ExitK,
                    time: te,
                    point: pe,
                };
                Ok(StepOutcome::Terminal {
                    arc: Some(mk_arc(ev)),
                    event: ev,
                })
            }
            FlowStop::SigmaCross { .. } | FlowStop::SigmaGraze => {
                let transversal = matches!(raw.stop, FlowStop::SigmaCross { .. });
                let (chart, s_raw, _) = self
                    .sys
                    .curve
                    .locate(pe)
                    .expect("event point is on the curve");
                let s = self.snap_param(chart, s_raw);
                let ev = EventRecord {
                    kind: EventKind::HitSigma {
                        chart,
                        s,
                        transversal,
                    },
                    time: te,
                    point: pe,
                };
                Ok(StepOutcome::Next {
                    arc: mk_arc(ev),
                    state: State::Slide { chart, s }, // placeholder; resolved by caller
                })
            }
        }
    }

    /// One sliding arc from `Slide { chart, s }` until a breakpoint, an
    /// asymptotic absorption, a policy exit, a chart end or the budget.
    pub fn slide_step(
        &mut self,
        chart: usize,
        s0: f64,
        t: f64,
        t_end: f64,
        arc_index: usize,
    ) -> Result<StepOutcome, HybridError> {
        self.slide_step_opts(chart, s0, t, t_end, arc_index, true, None)
    }

    /// Sliding step with explicit control: `policy_exits` enables the policy
    /// consultation on escaping runs; `stop_at` requests an exact landing.
    #[allow(clippy::too_many_arguments)]
    pub fn slide_step_opts(
        &mut self,
        chart: usize,
        s0: f64,
        t: f64,
        t_end: f64,
        arc_index: usize,
        policy_exits: bool,
        stop_at: Option<f64>,
    ) -> Result<StepOutcome, HybridError> {
        let sys = self.sys;
        let ch = sys.chart(chart);
        let part = self.chart_part(chart);
        let tol = sys.tol;

        let g0 = self.slide_dyn[chart].speed(sys, chart, s0);
        if !g0.is_finite() {
            return Ok(StepOutcome::Terminal {
                arc: None,
                event: EventRecord {
                    kind: EventKind::DeadEnd { chart, s: s0 },
                    time: t,
                    point: ch.point(s0),
                },
            });
        }
        let dir = if g0 >= 0.0 { 1.0 } else { -1.0 };

        // Stops in the travel direction: tangency breakpoints, pseudo-equilibria,
        // chart ends.
        let mut s_stop = if dir > 0.0 { ch.beta } else { ch.alpha };
        let mut stop_kind = SlideStop::ChartEnd;
        for bp in &part.breakpoints {
            let ahead = (bp.s - s0) * dir > tol.snap;
            if !ahead {
                continue;
            }
            if (bp.s - s_stop) * dir < 0.0 {
                match bp.kind {
                    crate::sigma::BreakpointKind::PseudoEquilibrium => {
                        s_stop = bp.s;
                        stop_kind = SlideStop::PseudoEq;
                    }
                    crate::sigma::BreakpointKind::Boundary => {
                        s_stop = bp.s;
                        stop_kind = SlideStop::ChartEnd;
                    }
                    _ => {
                        s_stop = bp.s;
                        stop_kind = SlideStop::Tangency;
                    }
                }
            }
        }

        // Requested exact landing (probe use) overrides everything ahead of it.
        if let Some(target) = stop_at {
            if (target - s0) * dir > 0.0 && (target - s_stop) * dir < 0.0 {
                s_stop = target;
                stop_kind = SlideStop::Requested;
            }
        }

        // Policy exit on an escaping run.
        let kind_here = part
            .interval_of(s0 + dir * slide_probe(ch))
            .map(|iv| iv.kind)
            .unwrap_or(RegionKind::Sliding);
        let mut exit: Option<(Side, f64)> = None;
        if policy_exits && kind_here == RegionKind::Escaping {
            let options = [ChoiceTag::Stay, ChoiceTag::ViaX, ChoiceTag::ViaY];
            let (chosen, frac) = self.decide(&options, chart, s0, t, arc_index, true);
            if let Some(side) = chosen.side() {
                let frac = frac.unwrap_or(0.0).clamp(0.0, 1.0 - 1e-9);
                let s_exit = s0 + frac * (s_stop - s0);
                exit = Some((side, s_exit));
            }
        }
        if let Some((_, s_exit)) = exit {
            if (s_exit - s0).abs() <= tol.snap {
                // Immediate exit at the entry point: no slide arc needed.
                let (side, _) = exit.unwrap();
                let p = ch.point(s0);
                return Ok(StepOutcome::Next {
                    arc: Arc {
                        mode: Mode::Slide,
                        t0: t,
                        t1: t,
                        samples: vec![(t, p)],
                        entry: EventRecord {
                            kind: EventKind::PolicyBranch { chart, s: s0, side },
                            time: t,
                            point: p,
                        },
                        exit: EventRecord {
                            kind: EventKind::PolicyBranch { chart, s: s0, side },
                            time: t,
                            point: p,
                        },
                    },
                    state: State::Flow { side, p },
                });
            }
            s_stop = exit.unwrap().1;
            stop_kind = SlideStop::PolicyExit;
        }

        // Integrate the reduced scalar dynamics toward s_stop.
        let mut s = s0;
        let mut tt = t;
        let mut samples = vec![(tt, ch.point(s))];
        let mut h: f64 = 1e-4;
        let mut outcome = SlideOutcome::Budget;
        let pe_target = self.nearest_absorber(chart, s0, dir);
        for _ in 0..2_000_000 {
            if tt >= t_end {
                outcome = SlideOutcome::Budget;
                break;
            }
            let g = self.slide_dyn[chart].speed(sys, chart, s);
            if !g.is_finite() {
                outcome = SlideOutcome::Stuck;
                break;
            }
            // Asymptotic absorption at a pseudo-equilibrium target.
            if let Some(spe) = pe_target {
                if g.abs() < tol.speed && (spe - s) * dir >= -tol.snap {
                    outcome = SlideOutcome::Asymptotic { s_pe: spe };
                    break;
                }
            }
            if g.abs() < tol.speed {
                outcome = SlideOutcome::Stalled;
                break;
            }
            // Exact landing on the stop parameter.
            let remaining = (s_stop - s) * dir;
            if remaining <= 1e-13 {
                outcome = SlideOutcome::Landed;
                break;
            }
            let dt_land = remaining / (g * dir);
            if dt_land.is_finite() && dt_land > 0.0 && dt_land <= 4.0 * h {
                // Close to the stop: take controlled Newton-style sub-steps.
                let dt = dt_land.min(t_end - tt);
                if dt < 1e-15 {
                    outcome = SlideOutcome::Landed;
                    break;
                }
                let s_mid = s + 0.5 * dt * g;
                let g_mid = self.slide_dyn[chart].speed(sys, chart, s_mid);
                let g_use = if g_mid.is_finite() { g_mid } else { g };
                s += dt * g_use;
                tt += dt;
                samples.push((tt, ch.point(s)));
                if (s_stop - s) * dir <= 1e-12 {
                    s = s_stop;
                    outcome = SlideOutcome::Landed;
                    break;
                }
                continue;
            }
            // Adaptive RK step (midpoint-corrected trapezoid with error estimate).
            let (s_new, err) = rk_scalar(
                |sv| self.slide_dyn[chart].speed(sys, chart, sv),
                s,
                h.min(t_end - tt),
            );
            let tol_step = tol.flow.max(1e-12) * (1.0 + s.abs());
            if err > tol_step && h > 1e-10 {
                h *= 0.5;
                continue;
            }
            s = s_new;
            tt += h.min(t_end - tt);
            samples.push((tt, ch.point(s)));
            if err < 0.1 * tol_step {
                h = (h * 2.0).min(0.25);
            }
            if (s_stop - s) * dir <= 0.0 {
                s = s_stop;
                outcome = SlideOutcome::Landed;
                break;
            }
        }

        let entry = EventRecord {
            kind: EventKind::Start,
            time: t,
            point: ch.point(s0),
        };
        let mk_arc = |samples: Vec<(f64, Vec2)>, exit_ev: EventRecord| Arc {
            mode: Mode::Slide,
            t0: t,
            t1: exit_ev.time,
            samples,
            entry,
            exit: exit_ev,
        };

        match outcome {
            SlideOutcome::Landed => {
                let pe = ch.point(s_stop);
                if samples.last().map(|&(_, q)| q.dist(pe) > 0.0).unwrap_or(true) {
                    samples.push((tt, pe));
                }
                match stop_kind {
                    SlideStop::PseudoEq => {
                        let ev = EventRecord {
                            kind: EventKind::ReachPseudoEq {
                                chart,
                                s: s_stop,
                                asymptotic: false,
                            },
                            time: tt,
                            point: pe,
                        };
                        Ok(StepOutcome::Terminal {
                            arc: Some(mk_arc(samples, ev)),
                            event: ev,
                        })
                    }
                    SlideStop::ChartEnd => {
                        let ev = EventRecord {
                            kind: EventKind::ExitK,
                            time: tt,
                            point: pe,
                        };
                        Ok(StepOutcome::Terminal {
                            arc: Some(mk_arc(samples, ev)),
                            event: ev,
                        })
                    }
                    SlideStop::PolicyExit => {
                        let (side, _) = exit.unwrap();
                        let ev = EventRecord {
                            kind: EventKind::PolicyBranch {
                                chart,
                                s: s_stop,
                                side,
                            },
                            time: tt,
                            point: pe,
                        };
                        Ok(StepOutcome::Next {
                            arc: mk_arc(samples, ev),
                            state: State::Flow { side, p: pe },
                        })
                    }
                    SlideStop::Tangency | SlideStop::Requested => {
                        let ev = EventRecord {
                            kind: EventKind::HitSigma {
                                chart,
                                s: s_stop,
                                transversal: false,
                            },
                            time: tt,
                            point: pe,
                        };
                        Ok(StepOutcome::Next {
                            arc: mk_arc(samples, ev),
                            state: State::Slide { chart, s: s_stop },
                        })
                    }
                }
            }
            SlideOutcome::Asymptotic { s_pe } => {
                let pe = ch.point(s_pe);
                samples.push((tt, pe));
                let ev = EventRecord {
                    kind: EventKind::ReachPseudoEq {
                        chart,
                        s: s_pe,
                        asymptotic: true,
                    },
                    time: tt,
                    point: pe,
                };
                Ok(StepOutcome::Terminal {
                    arc: Some(mk_arc(samples, ev)),
                    event: ev,
                })
            }
            SlideOutcome::Stalled | SlideOutcome::Stuck => {
                let p = ch.point(s);
                let ev = EventRecord {
                    kind: EventKind::DeadEnd { chart, s },
                    time: tt,
                    point: p,
                };
                Ok(StepOutcome::Terminal {
                    arc: Some(mk_arc(samples, ev)),
                    event: ev,
                })
            }
            SlideOutcome::Budget => {
                let p = ch.point(s);
                let ev = EventRecord {
                    kind: EventKind::TimeBudget,
                    time: tt,
                    point: p,
                };
                Ok(StepOutcome::Terminal {
                    arc: Some(mk_arc(samples, ev)),
                    event: ev,
                })
            }
        }
    }

    /// Nearest absorber ahead: a pseudo-equilibrium breakpoint, or a tangency
    /// whose extension is an extended pseudo-equilibrium.
    fn nearest_absorber(&self, chart: usize, s0: f64, dir: f64) -> Option<f64> {
        let part = self.chart_part(chart);
        let mut best: Option<f64> = None;
        for bp in &part.breakpoints {
            if (bp.s - s0) * dir <= 0.0 {
                continue;
            }
            let absorbing = match bp.kind {
                crate::sigma::BreakpointKind::PseudoEquilibrium => true,
                crate::sigma::BreakpointKind::TangencyX
                | crate::sigma::BreakpointKind::TangencyY
                | crate::sigma::BreakpointKind::DoubleTangency => matches!(
                    crate::sigma::extend_filippov(self.sys, chart, bp.s),
                    crate::sigma::ExtensionVerdict::ExtendedPseudoEquilibrium
                ),
                _ => false,
            };
            if absorbing && best.map_or(true, |b| (bp.s - b) * dir < 0.0) {
                best = Some(bp.s);
            }
        }
        best
    }
}

fn slide_probe(ch: &SigmaChart) -> f64 {
    ((ch.beta - ch.alpha) * 1e-7).max(1e-10)
}

enum SlideStop {
    Tangency,
    PseudoEq,
    ChartEnd,
    PolicyExit,
    Requested,
}

enum SlideOutcome {
    Landed,
    Asymptotic { s_pe: f64 },
    Stalled,
    Stuck,
    Budget,
}

/// Heun step with embedded Euler error estimate for the scalar slide.
fn rk_scalar(g: impl Fn(f64) -> f64, s: f64, h: f64) -> (f64, f64) {
    let k1 = g(s);
    let k2 = g(s + h * k1);
    let k3 = g(s + 0.25 * h * (k1 + k2));
    let s_new = s + h / 6.0 * (k1 + k2 + 4.0 * k3);
    let s_low = s + 0.5 * h * (k1 + k2);
    (s_new, (s_new - s_low).abs())
}

pub enum StateOrTerminal {
    State(State),
    Terminal(EventRecord),
}

/// Simulate a maximal trajectory from `p0` with the given policy.
pub fn simulate(
    sys: &PiecewiseSystem,
    p0: Vec2,
    t_budget: f64,
    policy: Policy,
) -> Result<Trajectory, HybridError> {
    simulate_with(sys, p0, t_budget, policy, DEFAULT_MAX_ARCS)
}

pub fn simulate_with(
    sys: &PiecewiseSystem,
    p0: Vec2,
    t_budget: f64,
    policy: Policy,
    max_arcs: usize,
) -> Result<Trajectory, HybridError> {
    let mut sim = Simulator::new(sys, policy)?;
    let mut arcs: Vec<Arc> = Vec::new();
    let mut t = 0.0;

    let mut state = match sim.initial_state(p0, t)? {
        StateOrTerminal::State(s) => s,
        StateOrTerminal::Terminal(event) => {
            return Ok(Trajectory {
                arcs,
                policy_log: sim.policy_log,
                terminal: event,
            })
        }
    };
    let mut entry_event = EventRecord {
        kind: EventKind::Start,
        time: 0.0,
        point: p0,
    };

    loop {
        if arcs.len() >= max_arcs {
            return Err(HybridError::ArcBudget(max_arcs));
        }
        sim.arc_count = arcs.len();
        let step = match state {
            State::Flow { side, p } => sim.flow_step(side, p, t, t_budget)?,
            State::Slide { chart, s } => sim.slide_step(chart, s, t, t_budget, arcs.len())?,
        };
        match step {
            StepOutcome::Terminal { arc, event } => {
                if let Some(mut a) = arc {
                    a.entry = entry_event;
                    arcs.push(a);
                }
                return Ok(Trajectory {
                    arcs,
                    policy_log: sim.policy_log,
                    terminal: event,
                });
            }
            StepOutcome::Next { mut arc, state: next } => {
                arc.entry = entry_event;
                let exit = arc.exit;
                t = arc.t1;
                // Zero-length marker arcs from continue_from_sigma are dropped.
                let keep = arc.t1 > arc.t0 || arc.samples.len() > 1;
                if keep {
                    arcs.push(arc);
                }
                entry_event = exit;

                // A flow arc that hit Sigma still needs its continuation
                // resolved (the flow_step state is a placeholder).
                state = match (exit.kind, next) {
                    (EventKind::HitSigma { chart, s, .. }, _) => {
                        match sim.continue_from_sigma(chart, s, t, arcs.len())? {
                            StepOutcome::Next { state, .. } => state,
                            StepOutcome::Terminal { event, .. } => {
                                return Ok(Trajectory {
                                    arcs,
                                    policy_log: sim.policy_log,
                                    terminal: event,
                                });
                            }
                        }
                    }
                    (_, next) => next,
                };
            }
        }
    }
}

/// Check the mode-transition legality table on a finished trajectory.
/// Returns a description of the first violation, if any.
pub fn validate_transitions(sys: &PiecewiseSystem, traj: &Trajectory) -> Result<(), String> {
    for w in traj.arcs.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let gap = a.end_point().dist(b.start_point());
        if gap > 1e-8 {
            return Err(format!("junction gap {gap:.3e} between arcs"));
        }
        let p = b.start_point();
        let kind = region_at(sys, p);
        match (a.mode, b.mode) {
            (Mode::FlowX, Mode::FlowY) | (Mode::FlowY, Mode::FlowX) => {
                if !matches!(
                    kind,
                    RegionKind::Sewing
                        | RegionKind::TangencyX
                        | RegionKind::TangencyY
                        | RegionKind::DoubleTangency
                ) {
                    return Err(format!("field switch at non-sewing point {p:?} ({kind:?})"));
                }
            }
            (Mode::FlowX, Mode::Slide) | (Mode::FlowY, Mode::Slide) => {
                if matches!(kind, RegionKind::Sewing) {
                    return Err(format!("slide entry at sewing point {p:?}"));
                }
            }
            (Mode::Slide, Mode::FlowX) | (Mode::Slide, Mode::FlowY) => {
                // Legal at tangency exits and policy exits on escaping
                // intervals; illegal from the interior of a sliding interval.
                let exited_by_policy =
                    matches!(a.exit.kind, EventKind::PolicyBranch { .. });
                if kind == RegionKind::Sliding && !exited_by_policy {
                    return Err(format!("flow exit from sliding interior {p:?}"));
                }
                if exited_by_policy && kind == RegionKind::Sliding {
                    return Err(format!("policy exit from sliding (not escaping) {p:?}"));
                }
            }
            (Mode::FlowX, Mode::FlowX) | (Mode::FlowY, Mode::FlowY) => {
                // Re-entry through a tangency (grazing) only.
                if !kind.is_tangency() {
                    return Err(format!("same-field junction off tangency {p:?} ({kind:?})"));
                }
            }
            (Mode::Slide, Mode::Slide) => {
                // Breakpoint passage (flow-through).
            }
        }
    }
    Ok(())
}

/// A node of the branch-enumeration tree.
#[derive(Debug)]
pub struct BranchNode {
    /// Choice taken to get here (None at the root).
    pub choice: Option<ChoiceTag>,
    /// Sigma events along this segment.
    pub events: Vec<EventRecord>,
    /// Terminal event if this segment ended the trajectory.
    pub terminal: Option<EventRecord>,
    /// Whether this node was pruned as a revisited state.
    pub deduped: bool,
    pub children: Vec<BranchNode>,
}

impl BranchNode {
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(BranchNode::count).sum::<usize>()
    }
}

const BRANCH_NODE_CAP: usize = 4096;

/// Breadth-bounded enumeration of the legal continuations from `p0` up to
/// `depth` policy decisions. At escaping-interval entries the continuum of
/// exits is abstracted to the entry event point.
pub fn branch_tree(
    sys: &PiecewiseSystem,
    p0: Vec2,
    depth: usize,
) -> Result<BranchNode, HybridError> {
    let mut sim = Simulator::new(sys, Policy::StaySliding)?;
    let mut visited: Vec<(usize, f64)> = Vec::new();
    let mut budget = BRANCH_NODE_CAP;
    let state = match sim.initial_state(p0, 0.0)? {
        StateOrTerminal::State(s) => s,
        StateOrTerminal::Terminal(event) => {
            return Ok(BranchNode {
                choice: None,
                events: vec![event],
                terminal: Some(event),
                deduped: false,
                children: Vec::new(),
            })
        }
    };
    expand(&mut sim, state, None, depth, &mut visited, &mut budget)
}

fn expand(
    sim: &mut Simulator,
    state: State,
    choice: Option<ChoiceTag>,
    depth: usize,
    visited: &mut Vec<(usize, f64)>,
    budget: &mut usize,
) -> Result<BranchNode, HybridError> {
    if *budget == 0 {
        return Err(HybridError::BranchBudget);
    }
    *budget -= 1;

    let mut node = BranchNode {
        choice,
        events: Vec::new(),
        terminal: None,
        deduped: false,
        children: Vec::new(),
    };

    // Run forward (without consuming policy decisions) until a branch point
    // or a terminal event.
    let cur = state;
    let t_budget = 1e6;
    let mut t = 0.0;
    for _ in 0..256 {
        match cur {
            State::Flow { side, p } => {
                let step = sim.flow_step(side, p, t, t_budget)?;
                match step {
                    StepOutcome::Terminal { event, .. } => {
                        node.events.push(event);
                        node.terminal = Some(event);
                        return Ok(node);
                    }
                    StepOutcome::Next { arc, .. } => {
                        t = arc.t1;
                        if let EventKind::HitSigma { chart, s, .. } = arc.exit.kind {
                            node.events.push(arc.exit);
                            let key = (chart, s);
                            if visited
                                .iter()
                                .any(|(c, sv)| *c == key.0 && (sv - key.1).abs() <= sim.sys.tol.dedup)
                            {
                                node.deduped = true;
                                return Ok(node);
                            }
                            visited.push(key);
                            // Fall through to the branch decision below.
                            let outcome =
                                branch_at(sim, chart, s, depth, t, visited, budget, &mut node)?;
                            if let Some(n) = outcome {
                                return Ok(n);
                            }
                            return Ok(node);
                        } else {
                            return Ok(node);
                        }
                    }
                }
            }
            State::Slide { chart, s } => {
                let outcome = branch_at(sim, chart, s, depth, t, visited, budget, &mut node)?;
                if let Some(n) = outcome {
                    return Ok(n);
                }
                return Ok(node);
            }
        }
    }
    Ok(node)
}

/// Handle the decision point at `sigma(chart, s)`: either a unique forced
/// continuation (recurse in place) or children per legal option.
#[allow(clippy::too_many_arguments)]
fn branch_at(
    sim: &mut Simulator,
    chart: usize,
    s: f64,
    depth: usize,
    t: f64,
    visited: &mut Vec<(usize, f64)>,
    budget: &mut usize,
    node: &mut BranchNode,
) -> Result<Option<BranchNode>, HybridError> {
    let p = sim.sys.chart(chart).point(s);
    if sim.at_pseudo_eq(chart, s).is_some() {
        let ev = EventRecord {
            kind: EventKind::ReachPseudoEq {
                chart,
                s,
                asymptotic: false,
            },
            time: t,
            point: p,
        };
        node.events.push(ev);
        node.terminal = Some(ev);
        return Ok(None);
    }
    let options = sim.options_at(chart, s);
    if options.is_empty() {
        let ev = EventRecord {
            kind: EventKind::DeadEnd { chart, s },
            time: t,
            point: p,
        };
        node.events.push(ev);
        node.terminal = Some(ev);
        return Ok(None);
    }
    // Escaping interior: sliding onward is itself an option set at this
    // abstraction (exit here via X, via Y, or keep sliding).
    if depth == 0 {
        return Ok(None);
    }
    for opt in options {
        let child_state = match opt {
            ChoiceTag::Stay => {
                // Slide on to the next stop, then continue expanding there.
                match sim.slide_step(chart, s, t, t + 1e6, 0)? {
                    StepOutcome::Terminal { event, .. } => {
                        node.children.push(BranchNode {
                            choice: Some(ChoiceTag::Stay),
                            events: vec![event],
                            terminal: Some(event),
                            deduped: false,
                            children: Vec::new(),
                        });
                        continue;
                    }
                    StepOutcome::Next { arc, state } => {
                        let mut child =
                            expand(sim, state, Some(ChoiceTag::Stay), depth - 1, visited, budget)?;
                        child.events.insert(0, arc.exit);
                        node.children.push(child);
                        continue;
                    }
                }
            }
            ChoiceTag::ViaX => State::Flow { side: Side::X, p },
            ChoiceTag::ViaY => State::Flow { side: Side::Y, p },
        };
        let child = expand(sim, child_state, Some(opt), depth - 1, visited, budget)?;
        node.children.push(child);
    }
    Ok(None)
}
