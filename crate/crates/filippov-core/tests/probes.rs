//! Probe suites over the invariant regions: recurrence witnesses, sweep
//! density, and minimality through the hub points.

use filippov_core::lambda::{
    chaos_conditions, construct_lambda, linear_chaos_conditions, minimality_probe,
    theorem2_probes, LambdaError,
};
use filippov_core::field::LinearSpec;
use filippov_core::scenario;
use filippov_core::sigma::DoubleKind;
use filippov_core::Vec2;

#[test]
fn lambda_construction_center_center() {
    let sc = scenario::scenario("linear-center-center").unwrap();
    let region = construct_lambda(&sc.system, 0, -1.0).unwrap();
    assert_eq!(region.kind, DoubleKind::Parabolic);
    assert!(region.closure_gap <= 1e-6, "gap {}", region.closure_gap);
    assert!(region.area > 0.1, "area {}", region.area);
    assert_eq!(region.holes.len(), 1);
    // Arms launch from the pseudo-equilibrium and land at (0, -2).
    assert!((region.p_e - 0.0).abs() < 1e-6);
    assert!((region.sigma_segment.0 + 2.0).abs() < 1e-6);
    // Membership: annulus between the tangent orbit and the outer arms.
    assert!(region.contains(Vec2::new(-3.87, 0.0)));
    assert!(!region.contains(Vec2::new(-2.0, 0.0))); // inside the hole
    assert!(region.contains(Vec2::new(0.2, -1.0))); // right lobe
    assert!(!region.contains(Vec2::new(1.0, 1.0)));
}

#[test]
fn lambda_rejects_non_chaotic_configurations() {
    // Elliptic double tangency.
    use filippov_core::curve::{SigmaChart, SwitchingCurve};
    use filippov_core::field::PolyField;
    use filippov_core::poly::Poly2;
    use filippov_core::system::PiecewiseSystem;
    use filippov_core::{Box2, Tolerances};
    let x = PolyField::new(Poly2::y(), Poly2::from_terms([(1, 0, 1.0), (0, 0, -1.0)]));
    let y = PolyField::new(Poly2::y(), Poly2::from_terms([(1, 0, 1.0), (0, 0, 1.0)]));
    let s = PiecewiseSystem::new(
        SwitchingCurve::new(Poly2::x(), vec![SigmaChart::vertical_line(0.0, -1.0, 1.0)]),
        x,
        y,
        Box2::new(-1.0, 1.0, -1.0, 1.0),
        Tolerances::default(),
    )
    .unwrap();
    assert!(matches!(
        construct_lambda(&s, 0, 0.0),
        Err(LambdaError::NotChaoticConfiguration(_))
    ));

    // Three-zone: no double tangency on either line.
    let tz = scenario::three_zone_system();
    assert!(matches!(
        construct_lambda(&tz, 0, 0.0),
        Err(LambdaError::NotChaoticConfiguration(_))
    ));
}

#[test]
fn theorem2_probes_center_center() {
    let sc = scenario::scenario("linear-center-center").unwrap();
    let region = construct_lambda(&sc.system, 0, -1.0).unwrap();
    let report = theorem2_probes(&sc.system, &region, 20, 99).unwrap();
    assert!(
        report.periodic_witnesses_pass,
        "worst gap {:?}",
        report
            .witnesses
            .iter()
            .map(|w| w.closure_gap)
            .fold(0.0f64, f64::max)
    );
    assert!(report.recurrence_pass);
    assert!(report.nonwandering_pass);
    assert!(report.coverage >= 0.99, "coverage {}", report.coverage);
}

#[test]
fn minimality_center_center_hub_tangency() {
    let sc = scenario::scenario("linear-center-center").unwrap();
    let region = construct_lambda(&sc.system, 0, -1.0).unwrap();
    let report = minimality_probe(&sc.system, &region, Vec2::new(0.0, -1.0), 20, 7).unwrap();
    assert!(
        report.pass,
        "to_hub {}/{} from_hub {}/{} failures {:?}",
        report.to_hub_ok, report.total, report.from_hub_ok, report.total, report.failures
    );
}

#[test]
fn minimality_three_zone_hub() {
    let sc = scenario::scenario("three-zone").unwrap();
    let region = scenario::three_zone_lambda(&sc.system);
    let report = minimality_probe(&sc.system, &region, Vec2::new(-1.0, 0.0), 20, 11).unwrap();
    assert!(
        report.pass,
        "to_hub {}/{} from_hub {}/{} failures {:?}",
        report.to_hub_ok, report.total, report.from_hub_ok, report.total, report.failures
    );
}

#[test]
fn chaos_conditions_reports() {
    let cc = scenario::scenario("linear-center-center").unwrap();
    let rep = chaos_conditions(&cc.system, 5);
    assert!(rep.all(), "{rep:?}");

    // Sewing present: three-zone fails the crossing-free condition.
    let tz = scenario::three_zone_system();
    let rep = chaos_conditions(&tz, 5);
    assert!(!rep.no_crossing_in_k);

    // Continuous relay (B = 0): no double tangency.
    use filippov_core::system::from_relay;
    use filippov_core::{Box2, Tolerances};
    let sys = from_relay(
        [[0.0, 1.0], [-1.0, 0.0]],
        [0.0, 0.0],
        [1.0, 0.0],
        Box2::new(-2.0, 2.0, -2.0, 2.0),
        Tolerances::default(),
    )
    .unwrap();
    let rep = chaos_conditions(&sys, 5);
    assert!(!rep.double_tangency);
}

#[test]
fn linear_chaos_coefficient_conditions() {
    // The worked center-center coefficients.
    let spec = LinearSpec {
        a_plus: [[-0.5, -1.0], [1.0, 0.5]],
        b_plus: [-1.0, 2.0],
        a_minus: [[1.0, 1.0], [-2.0, -1.0]],
        b_minus: [1.0, -2.0],
    };
    let rep = linear_chaos_conditions(&spec).unwrap();
    assert!(rep.coincident_tangencies);
    assert_eq!(rep.coincidence_residual, 0.0);
    assert!(rep.no_crossing);
    assert!(rep.parabolic_or_hyperbolic);
    assert!(rep.geometric_check_agrees);

    // Perturbing b1+ breaks the coincidence.
    let mut p = spec;
    p.b_plus[0] += 1e-3;
    let rep = linear_chaos_conditions(&p).unwrap();
    assert!(!rep.coincident_tangencies);

    // (i) false with distinct tangencies.
    let p2 = LinearSpec {
        a_plus: [[0.0, 1.0], [0.0, 0.0]],
        b_plus: [1.0, 0.0],
        a_minus: [[0.0, 1.0], [0.0, 0.0]],
        b_minus: [0.0, 0.0],
    };
    assert!(!linear_chaos_conditions(&p2).unwrap().coincident_tangencies);

    // (iii) false with equal-sign a12.
    let p3 = LinearSpec {
        a_plus: [[0.0, 1.0], [0.0, 0.0]],
        b_plus: [0.0, 0.0],
        a_minus: [[0.0, 1.0], [0.0, 0.0]],
        b_minus: [0.0, 0.0],
    };
    assert!(!linear_chaos_conditions(&p3).unwrap().no_crossing);

    // Degenerate a12.
    let p4 = LinearSpec {
        a_plus: [[1.0, 0.0], [0.0, 1.0]],
        b_plus: [0.0, 0.0],
        a_minus: [[1.0, 1.0], [0.0, 1.0]],
        b_minus: [0.0, 0.0],
    };
    assert!(matches!(
        linear_chaos_conditions(&p4),
        Err(LambdaError::DegenerateA12)
    ));
}

#[test]
fn probe_rejects_outside_point() {
    let sc = scenario::scenario("linear-center-center").unwrap();
    let region = construct_lambda(&sc.system, 0, -1.0).unwrap();
    assert!(!region.contains(Vec2::new(3.0, 3.0)));
}
