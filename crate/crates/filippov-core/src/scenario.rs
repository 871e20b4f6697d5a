//! Registry of ready-made systems with default run parameters and expected
//! verdict skeletons for self-tests.

use serde::{Deserialize, Serialize};

use crate::classify::{OmegaVerdict, PseudoCycleKind};
use crate::curve::{SigmaChart, SwitchingCurve};
use crate::field::PolyField;
use crate::geom::{Box2, Vec2};
use crate::hybrid::Policy;
use crate::integrate::{integrate_arc, FlowStop};
use crate::lambda::{BoundaryArc, LambdaRegion};
use crate::poly::Poly2;
use crate::sigma::DoubleKind;
use crate::system::{PiecewiseSystem, Side};
use crate::tol::Tolerances;

/// Expected outcome of a scenario run: the verdict tag plus key locations
/// (not full trajectories, so integrator refinements do not break it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedSkeleton {
    pub verdict: OmegaVerdict,
    /// `(label, location, tolerance)` triples checked against the analysis.
    pub key_points: Vec<(String, Vec2, f64)>,
}

/// A registered example system with suggested run parameters.
pub struct ScenarioSpec {
    pub name: &'static str,
    pub system: PiecewiseSystem,
    pub suggested_p0: Vec2,
    pub suggested_budget: f64,
    pub suggested_policy: Policy,
    pub expected: Option<ExpectedSkeleton>,
    /// Hub point for the minimality probe, when meaningful.
    pub hub: Option<Vec2>,
    /// Double tangency anchoring the invariant-region construction.
    pub lambda_tangency: Option<(usize, f64)>,
}

pub const SCENARIO_NAMES: [&str; 4] = [
    "linear-center-center",
    "three-zone",
    "relay-template",
    "fold-fold-connection",
];

/// Build a registered scenario by name.
pub fn scenario(name: &str) -> Option<ScenarioSpec> {
    match name {
        "linear-center-center" => Some(linear_center_center()),
        "three-zone" => Some(three_zone()),
        "relay-template" => Some(relay_template()),
        "fold-fold-connection" => Some(fold_fold_connection()),
        _ => None,
    }
}

/// Two linear centers split by `x = 0`, oriented so that the forward
/// dynamics slides (y < -1) into the parabolic double tangency at (0, -1),
/// flows through into the escaping side, and recurs via escape exits. The
/// unique pseudo-equilibrium sits at the origin.
pub fn linear_center_center() -> ScenarioSpec {
    let x_field = PolyField::new(
        Poly2::from_terms([(1, 0, 1.0), (0, 1, 1.0), (0, 0, 1.0)]),
        Poly2::from_terms([(1, 0, -2.0), (0, 1, -1.0), (0, 0, -2.0)]),
    );
    let y_field = PolyField::new(
        Poly2::from_terms([(1, 0, -0.5), (0, 1, -1.0), (0, 0, -1.0)]),
        Poly2::from_terms([(1, 0, 1.0), (0, 1, 0.5), (0, 0, 2.0)]),
    );
    let k = Box2::new(-6.0, 4.0, -7.0, 4.0);
    let system = PiecewiseSystem::new(
        SwitchingCurve::new(Poly2::x(), vec![SigmaChart::vertical_line(0.0, -7.0, 4.0)]),
        x_field,
        y_field,
        k,
        Tolerances::default(),
    )
    .expect("valid system");
    ScenarioSpec {
        name: "linear-center-center",
        system,
        suggested_p0: Vec2::new(2.0, 0.0),
        suggested_budget: 240.0,
        suggested_policy: Policy::SeededRandom(1721),
        expected: Some(ExpectedSkeleton {
            verdict: OmegaVerdict::ChaoticTypeIII,
            key_points: vec![
                ("double-tangency".into(), Vec2::new(0.0, -1.0), 1e-8),
                ("pseudo-equilibrium".into(), Vec2::new(0.0, 0.0), 1e-8),
            ],
        }),
        hub: Some(Vec2::new(0.0, -1.0)),
        lambda_tangency: Some((0, -1.0)),
    }
}

/// Three linearity zones split by `f = x^2 - 1`: the outer center field
/// circles (0, -1), the inner one circles the origin. Escaping on
/// `{-1} x (-1, 0)`, sliding on `{1} x (-1, 0)`, sliding speed +-1.
pub fn three_zone() -> ScenarioSpec {
    let system = three_zone_system();
    ScenarioSpec {
        name: "three-zone",
        system,
        suggested_p0: Vec2::new(-1.0, 0.0),
        suggested_budget: 80.0,
        suggested_policy: Policy::AlwaysX,
        expected: Some(ExpectedSkeleton {
            verdict: OmegaVerdict::PseudoCycle(PseudoCycleKind::Tangent),
            key_points: vec![
                ("tangency-Y-sigma1".into(), Vec2::new(-1.0, 0.0), 1e-8),
                ("tangency-X-sigma1".into(), Vec2::new(-1.0, -1.0), 1e-8),
                ("tangency-Y-sigma2".into(), Vec2::new(1.0, 0.0), 1e-8),
                ("tangency-X-sigma2".into(), Vec2::new(1.0, -1.0), 1e-8),
            ],
        }),
        hub: Some(Vec2::new(-1.0, 0.0)),
        lambda_tangency: None,
    }
}

pub fn three_zone_system() -> PiecewiseSystem {
    let outer = PolyField::new(
        Poly2::from_terms([(0, 1, -1.0), (0, 0, -1.0)]),
        Poly2::x(),
    );
    let inner = PolyField::new(Poly2::from_terms([(0, 1, -2.0)]), Poly2::x());
    let f = Poly2::from_terms([(2, 0, 1.0), (0, 0, -1.0)]);
    PiecewiseSystem::new(
        SwitchingCurve::new(
            f,
            vec![
                SigmaChart::vertical_line(-1.0, -3.2, 3.2),
                SigmaChart::vertical_line(1.0, -3.2, 3.2),
            ],
        ),
        outer,
        inner,
        Box2::new(-3.2, 3.2, -3.2, 3.2),
        Tolerances::default(),
    )
    .expect("valid system")
}

/// The invariant region of the three-zone system, bounded by the five arcs
/// joining (-1,0) -> (-1,-2) -> (1,-2) -> (1,0) -> (-1,0) outside and the
/// inner tangent orbit through (+-1, 0) as an excluded hole.
pub fn three_zone_lambda(sys: &PiecewiseSystem) -> LambdaRegion {
    // Junctions are snapped onto the exact tangency/crossing corners so the
    // next arc launches from the tangency itself (as the simulator does).
    let corners = [
        Vec2::new(-1.0, -2.0),
        Vec2::new(1.0, -2.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(-1.0, 0.0),
    ];
    let arc = |side: Side, from: Vec2| -> Vec<Vec2> {
        let a = integrate_arc(
            sys.field(side),
            sys.f(),
            &sys.k,
            from,
            0.0,
            1e3,
            true,
            &sys.tol,
        )
        .expect("boundary arc integrates");
        debug_assert!(matches!(
            a.stop,
            FlowStop::SigmaCross { .. } | FlowStop::SigmaGraze
        ));
        let mut pts: Vec<Vec2> = a.samples.iter().map(|&(_, p)| p).collect();
        if let Some(c) = corners.iter().find(|c| c.dist(*pts.last().unwrap()) < 1e-6) {
            *pts.last_mut().unwrap() = *c;
        }
        pts
    };
    // Outer: X-arc to (-1,-2), Y-arc to (1,-2), X-arc to (1,0), Y-arc
    // (tangent, upper half of the inner ellipse) back to (-1,0).
    let g2 = arc(Side::X, Vec2::new(-1.0, 0.0));
    let g3 = arc(Side::Y, *g2.last().unwrap());
    let g4 = arc(Side::X, *g3.last().unwrap());
    let g5 = arc(Side::Y, *g4.last().unwrap());
    let mut outer = Vec::new();
    for ring in [&g2, &g3, &g4, &g5] {
        outer.extend_from_slice(ring);
    }
    let closure_gap = outer.last().unwrap().dist(outer[0]);

    // Hole: the tangent orbit through (1, 0) (upper and lower halves).
    let h1 = arc(Side::Y, Vec2::new(1.0, 0.0));
    let h2 = arc(Side::Y, *h1.last().unwrap());
    let mut hole = h1.clone();
    hole.extend_from_slice(&h2);

    let area = crate::geom::polygon_area(&outer).abs() - crate::geom::polygon_area(&hole).abs();
    LambdaRegion {
        chart: 0,
        tangency_s: 0.0,
        kind: DoubleKind::None,
        p_s: -1.0,
        p_e: 0.0,
        q_e_minus: None,
        q_e_plus: None,
        sigma_segment: (-2.0, 0.0),
        boundary: vec![
            BoundaryArc {
                side: Some(Side::X),
                pts: g2,
            },
            BoundaryArc {
                side: Some(Side::Y),
                pts: g3,
            },
            BoundaryArc {
                side: Some(Side::X),
                pts: g4,
            },
            BoundaryArc {
                side: Some(Side::Y),
                pts: g5,
            },
        ],
        outer,
        holes: vec![hole],
        closure_gap,
        area,
    }
}

/// Relay template `f = <C, p>`, `X = Ap + B`, `Y = Ap - B` with
/// `A = [[0, 1], [-1, 0]]`, `B = (0, 1)`, `C = (1, 0)`: two tangent circles
/// meeting at a hyperbolic double tangency at the origin, sewing elsewhere.
pub fn relay_template() -> ScenarioSpec {
    let system = crate::system::from_relay(
        [[0.0, 1.0], [-1.0, 0.0]],
        [0.0, 1.0],
        [1.0, 0.0],
        Box2::new(-4.0, 4.0, -4.0, 4.0),
        Tolerances::default(),
    )
    .expect("valid relay system");
    ScenarioSpec {
        name: "relay-template",
        system,
        suggested_p0: Vec2::new(0.0, 2.0),
        suggested_budget: 120.0,
        suggested_policy: Policy::StaySliding,
        expected: Some(ExpectedSkeleton {
            verdict: OmegaVerdict::PseudoCycle(PseudoCycleKind::Crossing),
            key_points: vec![("double-tangency".into(), Vec2::new(0.0, 0.0), 1e-8)],
        }),
        hub: None,
        lambda_tangency: None,
    }
}

/// Two visible folds joined by a symmetric pair of expanding spirals, with a
/// repelling (saddle-type) pseudo-equilibrium between them: the connection
/// orbit is a tangent pseudo-cycle through both folds.
///
/// `X = A (p - c)` with `A = [[lambda, -1], [1, lambda]]`, `c = (1/2,
/// lambda/2 - 1)`; `Y(p) = -X(-p)`. The fold of `X` sits at (0, -1) for every
/// `lambda`; the spiral gain `lambda` is shot so that the forward orbit of
/// the fold first returns to the switching line exactly at the fold of `Y`
/// at (0, 1).
pub fn fold_fold_connection() -> ScenarioSpec {
    let lambda = shoot_fold_connection();
    let system = fold_fold_system(lambda);
    ScenarioSpec {
        name: "fold-fold-connection",
        system,
        suggested_p0: Vec2::new(0.0, -1.0),
        suggested_budget: 200.0,
        suggested_policy: Policy::AlwaysX,
        expected: Some(ExpectedSkeleton {
            verdict: OmegaVerdict::PseudoCycle(PseudoCycleKind::Tangent),
            key_points: vec![
                ("fold-X".into(), Vec2::new(0.0, -1.0), 1e-8),
                ("fold-Y".into(), Vec2::new(0.0, 1.0), 1e-8),
                ("saddle-pseudo-equilibrium".into(), Vec2::new(0.0, 0.0), 1e-8),
            ],
        }),
        hub: None,
        lambda_tangency: None,
    }
}

pub fn fold_fold_system(lambda: f64) -> PiecewiseSystem {
    let c = lambda - lambda * lambda / 2.0 - 0.5;
    // X = (lambda x - y - 1, x + lambda y + c) active on x >= 0.
    let x_field = PolyField::new(
        Poly2::from_terms([(1, 0, lambda), (0, 1, -1.0), (0, 0, -1.0)]),
        Poly2::from_terms([(1, 0, 1.0), (0, 1, lambda), (0, 0, c)]),
    );
    // Y(p) = -X(-p).
    let y_field = PolyField::new(
        Poly2::from_terms([(1, 0, lambda), (0, 1, -1.0), (0, 0, 1.0)]),
        Poly2::from_terms([(1, 0, 1.0), (0, 1, lambda), (0, 0, -c)]),
    );
    let k = Box2::new(-4.0, 4.0, -4.0, 4.0);
    PiecewiseSystem::new(
        SwitchingCurve::new(Poly2::x(), vec![SigmaChart::vertical_line(0.0, -4.0, 4.0)]),
        x_field,
        y_field,
        k,
        Tolerances::default(),
    )
    .expect("valid system")
}

/// First-return height of the `X`-spiral launched from the fold (0, -1).
fn first_return_height(lambda: f64) -> Option<f64> {
    let sys = fold_fold_system(lambda);
    let arc = integrate_arc(
        &sys.x_field,
        sys.f(),
        &sys.k,
        Vec2::new(0.0, -1.0),
        0.0,
        100.0,
        true,
        &sys.tol,
    )
    .ok()?;
    matches!(arc.stop, FlowStop::SigmaCross { .. } | FlowStop::SigmaGraze)
        .then(|| arc.end().1.y)
}

/// Bisection on the spiral gain: find lambda with first return at y = +1.
fn shoot_fold_connection() -> f64 {
    let target = 1.0;
    let mut lo = 0.05;
    let mut hi = 0.4;
    let h = |l: f64| first_return_height(l).unwrap_or(f64::NEG_INFINITY) - target;
    debug_assert!(h(lo) < 0.0 && h(hi) > 0.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_scenarios_build() {
        for name in SCENARIO_NAMES {
            let sc = scenario(name).unwrap();
            assert_eq!(sc.name, name);
            sc.system.curve.validate(1e-9).unwrap();
        }
        assert!(scenario("bogus").is_none());
    }

    #[test]
    fn fold_fold_shot_connects_the_folds() {
        let sc = fold_fold_connection();
        let arc = integrate_arc(
            &sc.system.x_field,
            sc.system.f(),
            &sc.system.k,
            Vec2::new(0.0, -1.0),
            0.0,
            100.0,
            true,
            &sc.system.tol,
        )
        .unwrap();
        let end = arc.end().1;
        assert!(
            end.dist(Vec2::new(0.0, 1.0)) < 1e-9,
            "spiral returns at {end:?}"
        );
    }

    #[test]
    fn three_zone_lambda_region_closes() {
        let sys = three_zone_system();
        let region = three_zone_lambda(&sys);
        assert!(region.closure_gap < 1e-6, "gap {}", region.closure_gap);
        assert!(region.area > 0.5, "area {}", region.area);
        // The escaping segment midpoint is inside; the origin (inside the
        // tangent-orbit hole) is not; far outside is not.
        assert!(region.contains(Vec2::new(-1.0, -0.5)));
        assert!(!region.contains(Vec2::new(0.0, 0.0)));
        assert!(!region.contains(Vec2::new(3.0, 3.0)));
    }
}
