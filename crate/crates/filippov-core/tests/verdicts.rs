//! Golden verdict tests: one constructed fixture per omega-limit taxonomy
//! item, classified end to end through simulation.

use filippov_core::classify::{classify_omega, MildKind, OmegaVerdict, PseudoCycleKind};
use filippov_core::curve::{SigmaChart, SwitchingCurve};
use filippov_core::field::PolyField;
use filippov_core::hybrid::{simulate, validate_transitions, EventKind, Policy};
use filippov_core::poly::Poly2;
use filippov_core::scenario;
use filippov_core::system::PiecewiseSystem;
use filippov_core::{Box2, Tolerances, Vec2};

fn sys(
    f: Poly2,
    x: PolyField,
    y: PolyField,
    chart: SigmaChart,
    k: Box2,
) -> PiecewiseSystem {
    PiecewiseSystem::new(
        SwitchingCurve::new(f, vec![chart]),
        x,
        y,
        k,
        Tolerances::default(),
    )
    .unwrap()
}

/// (i) A stable focus away from the switching line absorbs its side.
#[test]
fn verdict_equilibrium_x() {
    // X: focus at (2, 0): p' = [[-0.4, -1], [1, -0.4]] (p - (2,0)).
    let x = PolyField::new(
        Poly2::from_terms([(1, 0, -0.4), (0, 1, -1.0), (0, 0, 0.8)]),
        Poly2::from_terms([(1, 0, 1.0), (0, 1, -0.4), (0, 0, -2.0)]),
    );
    let y = PolyField::new(Poly2::constant(1.0), Poly2::zero());
    let s = sys(
        Poly2::x(),
        x,
        y,
        SigmaChart::vertical_line(0.0, -5.0, 5.0),
        Box2::new(-5.0, 5.0, -5.0, 5.0),
    );
    let traj = simulate(&s, Vec2::new(2.5, 1.0), 60.0, Policy::StaySliding).unwrap();
    let rep = classify_omega(&s, &traj, &s.tol);
    assert_eq!(rep.verdict, OmegaVerdict::EquilibriumX);
    assert!(rep.evidence.limit_point.unwrap().dist(Vec2::new(2.0, 0.0)) < 1e-3);
}

/// (ii) A planar limit cycle on one side.
#[test]
fn verdict_periodic_orbit_x() {
    // Van der Pol style cycle centred at (3, 0) with radius 1:
    // p' = (-(y), (x-3)) + (1 - r^2) * (x-3, y), r^2 = (x-3)^2 + y^2.
    let cx = 3.0;
    let xs = Poly2::from_terms([(1, 0, 1.0), (0, 0, -cx)]);
    let ys = Poly2::y();
    let r2 = &(&xs * &xs) + &(&ys * &ys);
    let gain = &Poly2::constant(1.0) - &r2;
    let u = &ys.scale(-1.0) + &(&gain * &xs);
    let v = &xs + &(&gain * &ys);
    let x = PolyField::new(u, v);
    let y = PolyField::new(Poly2::constant(1.0), Poly2::zero());
    let s = sys(
        Poly2::x(),
        x,
        y,
        SigmaChart::vertical_line(0.0, -6.0, 6.0),
        Box2::new(-6.0, 6.0, -6.0, 6.0),
    );
    let traj = simulate(&s, Vec2::new(3.2, 0.1), 80.0, Policy::StaySliding).unwrap();
    let rep = classify_omega(&s, &traj, &s.tol);
    assert_eq!(rep.verdict, OmegaVerdict::PeriodicOrbitX);
    let period = rep.evidence.period.unwrap();
    // The circular limit cycle of this normal form has period 2 pi.
    assert!((period - std::f64::consts::TAU).abs() < 1e-2, "period {period}");
}

/// (iv) Absorption by the attracting pseudo-equilibrium.
#[test]
fn verdict_pseudo_equilibrium() {
    let sc = scenario::scenario("linear-center-center").unwrap();
    let traj = simulate(&sc.system, Vec2::new(2.0, 0.0), 240.0, Policy::StaySliding).unwrap();
    validate_transitions(&sc.system, &traj).unwrap();
    let rep = classify_omega(&sc.system, &traj, &sc.system.tol);
    assert_eq!(rep.verdict, OmegaVerdict::PseudoEquilibrium);
    assert!(rep.evidence.limit_point.unwrap().dist(Vec2::new(0.0, 0.0)) < 1e-6);
}

/// (v) Crossing pseudo-cycle on the relay template.
#[test]
fn verdict_crossing_pseudo_cycle() {
    let sc = scenario::scenario("relay-template").unwrap();
    let traj = simulate(&sc.system, Vec2::new(0.0, 2.0), 120.0, Policy::StaySliding).unwrap();
    validate_transitions(&sc.system, &traj).unwrap();
    let rep = classify_omega(&sc.system, &traj, &sc.system.tol);
    assert_eq!(
        rep.verdict,
        OmegaVerdict::PseudoCycle(PseudoCycleKind::Crossing)
    );
    let cyc = rep.evidence.cycle.unwrap();
    assert!(cyc.rehit_distance <= 1e-6);
    assert_eq!(cyc.period_events, 2);
}

/// (v) Tangent pseudo-cycle: the three-zone circuit through two tangencies.
#[test]
fn verdict_tangent_pseudo_cycle_three_zone() {
    let sc = scenario::scenario("three-zone").unwrap();
    let traj = simulate(&sc.system, sc.suggested_p0, sc.suggested_budget, Policy::AlwaysX).unwrap();
    validate_transitions(&sc.system, &traj).unwrap();
    let rep = classify_omega(&sc.system, &traj, &sc.system.tol);
    assert_eq!(
        rep.verdict,
        OmegaVerdict::PseudoCycle(PseudoCycleKind::Tangent)
    );
}

/// (v) Tangent pseudo-cycle: the shot fold-fold connection.
#[test]
fn verdict_tangent_pseudo_cycle_fold_fold() {
    let sc = scenario::scenario("fold-fold-connection").unwrap();
    let traj = simulate(&sc.system, sc.suggested_p0, sc.suggested_budget, Policy::AlwaysX).unwrap();
    validate_transitions(&sc.system, &traj).unwrap();
    let rep = classify_omega(&sc.system, &traj, &sc.system.tol);
    assert_eq!(
        rep.verdict,
        OmegaVerdict::PseudoCycle(PseudoCycleKind::Tangent)
    );
    let cyc = rep.evidence.cycle.unwrap();
    assert!(cyc.rehit_distance <= 1e-6);
}

/// (vi) Mild pseudo-cycles of all three kinds.
#[test]
fn verdict_mild_pseudo_cycles() {
    // Kind I: one lobe of the relay figure-eight (invariance fails at the
    // hyperbolic double tangency; no strict closed sub-signature).
    let sc = scenario::scenario("relay-template").unwrap();
    let traj = simulate(&sc.system, Vec2::new(0.0, 0.0), 120.0, Policy::AlwaysX).unwrap();
    let rep = classify_omega(&sc.system, &traj, &sc.system.tol);
    assert_eq!(rep.verdict, OmegaVerdict::MildPseudoCycle(MildKind::I));

    // Kind II: alternating lobes cover the whole eight (invariant as a set),
    // while each single lobe is a strict closed sub-signature.
    let script = Policy::parse_script(&"XY".repeat(40)).unwrap();
    let traj = simulate(&sc.system, Vec2::new(0.0, 0.0), 200.0, script).unwrap();
    let rep = classify_omega(&sc.system, &traj, &sc.system.tol);
    assert_eq!(rep.verdict, OmegaVerdict::MildPseudoCycle(MildKind::II));

    // Kind III: on the center-center system, alternate the grazing tangent
    // loop with one escape excursion: branches leave the curve (invariance
    // fails) and the bare loop is a strict closed sub-signature.
    let cc = scenario::scenario("linear-center-center").unwrap();
    let script = Policy::parse_script(&"Y S X@0.5 ".repeat(25)).unwrap();
    let traj = simulate(&cc.system, Vec2::new(0.0, -1.0), 260.0, script).unwrap();
    let rep = classify_omega(&cc.system, &traj, &cc.system.tol);
    assert_eq!(rep.verdict, OmegaVerdict::MildPseudoCycle(MildKind::III));
}

/// (vii) Pseudo-graph: escape exits pushed to the pseudo-equilibrium corner
/// trace out the closed curve through it.
#[test]
fn verdict_pseudo_graph() {
    let cc = scenario::scenario("linear-center-center").unwrap();
    // Exit via X at a fraction approaching 1 of the escaping run: the loop
    // closes through the pseudo-equilibrium at the origin.
    let toks = "S X@0.9999999 ".repeat(16);
    let policy = Policy::parse_script(&toks).unwrap();
    let traj = simulate(&cc.system, Vec2::new(0.0, -1.0), 500.0, policy).unwrap();
    let rep = classify_omega(&cc.system, &traj, &cc.system.tol);
    assert_eq!(rep.verdict, OmegaVerdict::PseudoGraph);
}

/// (viii) Type-I tangency: an elliptic double tangency between sewing
/// regions absorbs the trajectory started on it.
#[test]
fn verdict_tangency_type_one() {
    let x = PolyField::new(Poly2::y(), Poly2::from_terms([(1, 0, 1.0), (0, 0, -1.0)]));
    let y = PolyField::new(Poly2::y(), Poly2::from_terms([(1, 0, 1.0), (0, 0, 1.0)]));
    let s = sys(
        Poly2::x(),
        x,
        y,
        SigmaChart::vertical_line(0.0, -1.0, 1.0),
        Box2::new(-1.0, 1.0, -1.0, 1.0),
    );
    let traj = simulate(&s, Vec2::new(0.0, 0.0), 10.0, Policy::StaySliding).unwrap();
    assert!(matches!(traj.terminal.kind, EventKind::DeadEnd { .. }));
    let rep = classify_omega(&s, &traj, &s.tol);
    assert_eq!(rep.verdict, OmegaVerdict::TangencyTypeI);
}

/// (viii) Type-II tangency: an invisible fold against an odd-order contact
/// absorbs the sliding segment in finite time.
#[test]
fn verdict_tangency_type_two() {
    let x = PolyField::new(Poly2::from_terms([(0, 1, -1.0)]), Poly2::constant(1.0));
    let y = PolyField::new(Poly2::from_terms([(0, 2, 1.0)]), Poly2::constant(-1.0));
    let s = sys(
        Poly2::x(),
        x,
        y,
        SigmaChart::vertical_line(0.0, -1.0, 1.0),
        Box2::new(-1.0, 1.0, -1.0, 1.0),
    );
    let traj = simulate(&s, Vec2::new(0.0, 0.5), 20.0, Policy::StaySliding).unwrap();
    assert!(matches!(traj.terminal.kind, EventKind::ReachTypeII { .. }));
    let rep = classify_omega(&s, &traj, &s.tol);
    assert_eq!(rep.verdict, OmegaVerdict::TangencyTypeII);
    assert!(rep.evidence.limit_point.unwrap().dist(Vec2::new(0.0, 0.0)) < 1e-6);
}

/// (ix) Chaotic set with non-empty interior under the seeded policy.
#[test]
fn verdict_chaotic_type_three() {
    let sc = scenario::scenario("linear-center-center").unwrap();
    let traj = simulate(
        &sc.system,
        sc.suggested_p0,
        sc.suggested_budget,
        sc.suggested_policy.clone(),
    )
    .unwrap();
    validate_transitions(&sc.system, &traj).unwrap();
    let rep = classify_omega(&sc.system, &traj, &sc.system.tol);
    assert_eq!(rep.verdict, OmegaVerdict::ChaoticTypeIII);
    let lam = rep.evidence.lambda.unwrap();
    assert!(lam.closure_gap <= 1e-6, "gap {}", lam.closure_gap);
    assert!(lam.area > 0.1, "area {}", lam.area);
    let (slid, esc) = rep.evidence.two_sided_counts.unwrap();
    assert!(slid >= 3 && esc >= 3);
}

/// Undetermined on leaving K.
#[test]
fn verdict_undetermined_on_exit() {
    let x = PolyField::new(Poly2::constant(1.0), Poly2::zero());
    let y = PolyField::new(Poly2::constant(1.0), Poly2::zero());
    let s = sys(
        Poly2::x(),
        x,
        y,
        SigmaChart::vertical_line(0.0, -1.0, 1.0),
        Box2::new(-1.0, 1.0, -1.0, 1.0),
    );
    let traj = simulate(&s, Vec2::new(-0.5, 0.0), 10.0, Policy::StaySliding).unwrap();
    assert!(matches!(traj.terminal.kind, EventKind::ExitK));
    let rep = classify_omega(&s, &traj, &s.tol);
    assert_eq!(rep.verdict, OmegaVerdict::Undetermined);
}
