use filippov_core::integrate::{integrate_arc, FlowStop};
use filippov_core::field::PolyField;
use filippov_core::scenario;
use filippov_core::{Vec2, Side};

#[test]
fn dbg4() {
    let sc = scenario::scenario("linear-center-center").unwrap();
    let sys = &sc.system;
    let q = Vec2::new(-2.0378, -1.8646);
    let side = Side::Y;
    let back = PolyField::new(sys.field(side).u.scale(-1.0), sys.field(side).v.scale(-1.0));
    let b = integrate_arc(&back, sys.f(), &sys.k, q, 0.0, 1e4, true, &sys.tol).unwrap();
    println!("back stop {:?} end {:?}", b.stop, b.end().1);
    let (c, s_e, d) = sys.curve.locate(b.end().1).unwrap();
    println!("entry chart {c} s_e {s_e} d {d:.2e}");
    let exit = integrate_arc(sys.field(side), sys.f(), &sys.k, sys.chart(0).point(s_e), 0.0, 1e4, true, &sys.tol).unwrap();
    println!("exit stop {:?} end {:?}", exit.stop, exit.end().1);
    let gap = exit.samples.iter().map(|&(_, p)| p.dist(q)).fold(f64::INFINITY, f64::min);
    println!("gap {gap:.3e}  nsamples {}", exit.samples.len());
    // Q-invariant check
    let qq = |p: Vec2| (p.x + 2.0).powi(2) + (p.x + 2.0) * p.y + p.y * p.y;
    println!("Q(q) {} Q(entry) {} ", qq(q), qq(b.end().1));
    let _ = FlowStop::ExitK;
}
