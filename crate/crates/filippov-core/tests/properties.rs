//! Property-based invariants: Lie-derivative exactness against independent
//! oracles, convexity and tangency of the sliding combination, visibility
//! against local orbit behaviour, and serialization round-trips.

use proptest::prelude::*;

use filippov_core::curve::{SigmaChart, SwitchingCurve};
use filippov_core::exact::RatPoly2;
use filippov_core::field::{contact_order_at, equilibria, lie_derivative, LinearSpec, PolyField};
use filippov_core::hybrid::{simulate, Policy};
use filippov_core::integrate::integrate_arc;
use filippov_core::io::{load_system_str, save_system};
use filippov_core::poly::Poly2;
use filippov_core::scenario;
use filippov_core::sigma::{classify_point, convex_weight, filippov_field_at, DoubleKind, Visibility};
use filippov_core::system::PiecewiseSystem;
use filippov_core::{Box2, Tolerances, Vec2};

/// Sparse bivariate polynomial with small integer coefficients (exact in
/// f64 arithmetic).
fn int_poly(max_deg: u32) -> impl Strategy<Value = Poly2> {
    prop::collection::vec(
        (0..=max_deg, 0..=max_deg, -4i32..=4),
        1..6,
    )
    .prop_map(move |terms| {
        Poly2::from_terms(
            terms
                .into_iter()
                .filter(|(i, j, _)| i + j <= max_deg)
                .map(|(i, j, c)| (i, j, c as f64)),
        )
    })
}

fn rat_of(p: &Poly2) -> RatPoly2 {
    RatPoly2::from_terms(
        p.terms()
            .map(|(i, j, c)| (i, j, filippov_core::exact::Rat::from_integer(c as i128))),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Leibniz rule with exact coefficient equality after canonicalization,
    /// cross-checked against the exact-rational mirror.
    #[test]
    fn leibniz_rule_exact(f in int_poly(3), g in int_poly(3), u in int_poly(2), v in int_poly(2)) {
        let field = PolyField::new(u.clone(), v.clone());
        let fg = &f * &g;
        let lhs = lie_derivative(&field, &fg, 1);
        let rhs = &(&f * &lie_derivative(&field, &g, 1)) + &(&g * &lie_derivative(&field, &f, 1));
        prop_assert_eq!(&lhs, &rhs);

        // Exact-rational cross-check of the product-rule expansion.
        let rf = rat_of(&f);
        let rg = rat_of(&g);
        let ru = rat_of(&u);
        let rv = rat_of(&v);
        let rlhs = rf.mul(&rg).lie(&ru, &rv);
        prop_assert!(rlhs.matches_f64(&lhs, 1e-12));
    }

    /// The Lie derivative evaluated at a point equals the time derivative of
    /// f along the integrated orbit (central finite difference, 1e-6
    /// relative).
    #[test]
    fn lie_matches_orbit_derivative(
        u in int_poly(2),
        v in int_poly(2),
        f in int_poly(2),
        px in -1.0f64..1.0,
        py in -1.0f64..1.0,
    ) {
        let field = PolyField::new(u, v);
        prop_assume!(!field.is_zero());
        prop_assume!(!f.is_zero());
        let p = Vec2::new(px, py);
        let speed = field.eval(p).norm();
        prop_assume!(speed > 1e-3 && speed < 50.0);

        let lie = lie_derivative(&field, &f, 1).eval(p.x, p.y);
        let h = 1e-4 / speed.max(1.0);
        let k = Box2::new(-100.0, 100.0, -100.0, 100.0);
        let tol = Tolerances::default();
        let fwd = integrate_arc(&field, &f, &k, p, 0.0, h, false, &tol).unwrap();
        let back_field = PolyField::new(field.u.scale(-1.0), field.v.scale(-1.0));
        let bwd = integrate_arc(&back_field, &f, &k, p, 0.0, h, false, &tol).unwrap();
        let fp = fwd.end().1;
        let fm = bwd.end().1;
        let fd = (f.eval(fp.x, fp.y) - f.eval(fm.x, fm.y)) / (2.0 * h);
        let scale = lie.abs().max(fd.abs()).max(1e-6);
        prop_assert!(
            (lie - fd).abs() <= 1e-6 * scale + 1e-9,
            "lie {lie} vs finite difference {fd}"
        );
    }

    /// Predicted linear tangency points: at (0, -b1/a12) the first Lie
    /// derivative vanishes and the contact order is at least 2.
    #[test]
    fn linear_tangency_formula(
        a11 in -2.0f64..2.0, a12 in 0.1f64..2.0, a21 in -2.0f64..2.0, a22 in -2.0f64..2.0,
        b1 in -1.0f64..1.0, b2 in -1.0f64..1.0, flip in proptest::bool::ANY,
    ) {
        let a12 = if flip { -a12 } else { a12 };
        let spec = LinearSpec {
            a_plus: [[a11, a12], [a21, a22]],
            b_plus: [b1, b2],
            a_minus: [[1.0, 1.0], [0.0, 1.0]],
            b_minus: [0.0, 0.0],
        };
        let field = spec.field_plus();
        let p = spec.tangency_plus().unwrap();
        let f = Poly2::x();
        let lie1 = lie_derivative(&field, &f, 1).eval(p.x, p.y);
        prop_assert!(lie1.abs() <= 1e-9, "X.f = {lie1} at the predicted tangency");
        match contact_order_at(&field, &f, p, 8, 1e-9) {
            Ok(c) => prop_assert!(c.order >= 2),
            Err(_) => {} // infinite-order contact is an acceptable degenerate
        }
    }

    /// Equilibria of random nondegenerate linear fields: exactly -A^{-1} b
    /// when it lies in K.
    #[test]
    fn equilibria_certification_linear(
        a11 in -2.0f64..2.0, a12 in -2.0f64..2.0, a21 in -2.0f64..2.0, a22 in -2.0f64..2.0,
        b1 in -1.0f64..1.0, b2 in -1.0f64..1.0,
    ) {
        let det = a11 * a22 - a12 * a21;
        prop_assume!(det.abs() > 0.05);
        let field = filippov_core::field::linear_field(&[[a11, a12], [a21, a22]], &[b1, b2]);
        let ex = (-b1 * a22 + a12 * b2) / det;
        let ey = (-a11 * b2 + b1 * a21) / det;
        let k = Box2::new(-3.0, 3.0, -3.0, 3.0);
        let roots = equilibria(&field, &k, 1e-10).unwrap();
        if k.contains(Vec2::new(ex, ey)) && ex.abs() < 2.9 && ey.abs() < 2.9 {
            prop_assert_eq!(roots.len(), 1);
            prop_assert!(roots[0].dist(Vec2::new(ex, ey)) < 1e-8);
        } else {
            prop_assert!(roots.len() <= 1);
        }
    }

    /// System files survive a save/load/save round trip byte-identically.
    #[test]
    fn system_file_round_trip(
        u in int_poly(2), v in int_poly(2), w in int_poly(2), z in int_poly(2),
    ) {
        prop_assume!(!(u.is_zero() && v.is_zero()));
        prop_assume!(!(w.is_zero() && z.is_zero()));
        let sys = PiecewiseSystem::new(
            SwitchingCurve::new(Poly2::x(), vec![SigmaChart::vertical_line(0.0, -1.0, 1.0)]),
            PolyField::new(u, v),
            PolyField::new(w, z),
            Box2::new(-1.0, 1.0, -1.0, 1.0),
            Tolerances::default(),
        ).unwrap();
        let text = save_system(&sys);
        let (sys2, _) = load_system_str(&text, Tolerances::default()).unwrap();
        prop_assert_eq!(save_system(&sys2), text);
    }
}

/// Sliding-field structure on the shipped scenarios: tangency to the curve
/// and strict convexity of the combination.
#[test]
fn sliding_field_tangent_and_convex() {
    for name in ["linear-center-center", "three-zone"] {
        let sc = scenario::scenario(name).unwrap();
        let sys = &sc.system;
        let fx = sys.f().partial_x();
        let fy = sys.f().partial_y();
        for chart in 0..sys.curve.charts.len() {
            let ch = sys.chart(chart);
            for i in 0..200 {
                let s = ch.alpha + (ch.beta - ch.alpha) * (i as f64 + 0.5) / 200.0;
                let p = ch.point(s);
                let Some(z) = filippov_field_at(sys, p) else {
                    continue;
                };
                let grad = Vec2::new(fx.eval(p.x, p.y), fy.eval(p.x, p.y));
                assert!(
                    z.dot(grad).abs() <= 1e-9 * (1.0 + z.norm() * grad.norm()),
                    "sliding field not tangent at {p:?}"
                );
                let lambda = convex_weight(sys, p).unwrap();
                assert!(lambda > 0.0 && lambda < 1.0, "lambda = {lambda} at {p:?}");
            }
        }
    }
}

/// Visibility against local orbit behaviour: at a visible even tangency the
/// orbit stays on its own side; at an invisible one it stays on the other.
#[test]
fn visibility_orbit_consistency() {
    // Center-center double tangency at (0, -1): invisible for X, visible
    // for Y.
    let sc = scenario::scenario("linear-center-center").unwrap();
    let sys = &sc.system;
    let p = Vec2::new(0.0, -1.0);
    let rep = classify_point(sys, 0, -1.0);
    assert_eq!(rep.visibility_x, Visibility::Invisible);
    assert_eq!(rep.visibility_y, Visibility::Visible);
    let tol = Tolerances::default();
    let kbig = Box2::new(-10.0, 10.0, -10.0, 10.0);
    // Local X orbit through the point stays in f <= 0 on both time sides.
    for dir in [1.0, -1.0] {
        let field = PolyField::new(sys.x_field.u.scale(dir), sys.x_field.v.scale(dir));
        let arc = integrate_arc(&field, sys.f(), &kbig, p, 0.0, 0.3, false, &tol).unwrap();
        for &(_, q) in &arc.samples {
            assert!(sys.f().eval(q.x, q.y) <= 1e-9, "invisible-X orbit crossed into f > 0");
        }
    }
    // Local Y orbit stays in f <= 0 too (its own side: visible for Y).
    for dir in [1.0, -1.0] {
        let field = PolyField::new(sys.y_field.u.scale(dir), sys.y_field.v.scale(dir));
        let arc = integrate_arc(&field, sys.f(), &kbig, p, 0.0, 0.3, false, &tol).unwrap();
        for &(_, q) in &arc.samples {
            assert!(sys.f().eval(q.x, q.y) <= 1e-9, "visible-Y orbit left its domain");
        }
    }
}

/// The double-tangency taxonomy is a function of the two visibilities:
/// exhaustively checked over constructed linear fold-fold pairs.
#[test]
fn double_tangency_taxonomy_exhaustive() {
    // Fold of the upper field at the origin with controllable second Lie
    // derivative sign: X = (-y, sx), so X.f = -y, X^2.f = -sx.
    let make = |sx: f64, sy: f64| {
        let x_field = PolyField::new(Poly2::from_terms([(0, 1, -1.0)]), Poly2::constant(sx));
        let y_field = PolyField::new(Poly2::from_terms([(0, 1, 1.0)]), Poly2::constant(sy));
        PiecewiseSystem::new(
            SwitchingCurve::new(Poly2::x(), vec![SigmaChart::vertical_line(0.0, -1.0, 1.0)]),
            x_field,
            y_field,
            Box2::new(-1.0, 1.0, -1.0, 1.0),
            Tolerances::default(),
        )
        .unwrap()
    };
    // X^2.f(0,0) = -sx (visible for X iff positive, i.e. sx < 0);
    // Y^2.f(0,0) = +sy (visible for Y iff negative, i.e. sy < 0).
    for (sx, sy, expect) in [
        (-1.0, -1.0, DoubleKind::Hyperbolic), // visible-visible
        (1.0, 1.0, DoubleKind::Elliptic),     // invisible-invisible
        (-1.0, 1.0, DoubleKind::Parabolic),
        (1.0, -1.0, DoubleKind::Parabolic),
    ] {
        let sys = make(sx, sy);
        let rep = classify_point(&sys, 0, 0.0);
        assert_eq!(rep.contact_x.order(), Some(2));
        assert_eq!(rep.contact_y.order(), Some(2));
        assert_eq!(rep.double_kind, expect, "sx={sx}, sy={sy}");
    }
}

/// A crossing pseudo-cycle verdict does not depend on the policy: no branch
/// points occur on it.
#[test]
fn crossing_cycle_policy_invariance() {
    let sc = scenario::scenario("relay-template").unwrap();
    let mut verdicts = Vec::new();
    for policy in [
        Policy::AlwaysX,
        Policy::AlwaysY,
        Policy::StaySliding,
        Policy::SeededRandom(3),
    ] {
        let traj = simulate(&sc.system, Vec2::new(0.0, 2.0), 120.0, policy).unwrap();
        let rep = filippov_core::classify::classify_omega(&sc.system, &traj, &sc.system.tol);
        assert!(traj.policy_log.is_empty(), "crossing cycle must not branch");
        verdicts.push(format!("{:?}", rep.verdict));
    }
    assert!(verdicts.windows(2).all(|w| w[0] == w[1]), "{verdicts:?}");
}

/// Chaotic verdicts must carry a two-sided witness (events in both the
/// sliding and the escaping regions).
#[test]
fn chaotic_verdict_two_sidedness() {
    let sc = scenario::scenario("linear-center-center").unwrap();
    let traj = simulate(
        &sc.system,
        sc.suggested_p0,
        sc.suggested_budget,
        sc.suggested_policy.clone(),
    )
    .unwrap();
    let rep = filippov_core::classify::classify_omega(&sc.system, &traj, &sc.system.tol);
    let (slid, esc) = rep.evidence.two_sided_counts.unwrap();
    assert!(slid >= 3 && esc >= 3, "sliding {slid}, escaping {esc}");
}
