//! Analysis and simulation of planar discontinuous (Filippov) vector fields.
//!
//! A system `Z = (X, Y)` of two polynomial fields is split by a switching
//! curve `Sigma = f^{-1}(0)` inside a compact box `K`. This crate provides:
//!
//! * exact polynomial Lie-derivative algebra over the two side fields;
//! * classification of every point of `Sigma` (sewing / sliding / escaping,
//!   tangency orders and visibility, double-tangency taxonomy);
//! * the Filippov sliding field, its extension across tangency points, and
//!   pseudo-equilibria;
//! * event-driven construction of maximal trajectories, with explicit
//!   policies at nondeterministic points;
//! * classification of omega-limit sets (equilibria, periodic orbits,
//!   pseudo-equilibria, pseudo-cycles, mild pseudo-cycles, pseudo-graphs,
//!   absorbing tangencies, chaotic sets with non-empty interior) together
//!   with construction of the invariant region backing the chaotic verdict
//!   and probe-style witnesses for its recurrence and minimality properties.
//!
//! The `scenario` module registers ready-made systems; the companion CLI
//! crate exposes `analyze`, `simulate`, `classify-omega`, `chaos-check` and
//! `scenario` subcommands over the same machinery.

pub mod classify;
pub mod curve;
pub mod exact;
pub mod field;
pub mod geom;
pub mod hybrid;
pub mod integrate;
pub mod io;
pub mod lambda;
pub mod poly;
pub mod scenario;
pub mod sigma;
pub mod svg;
pub mod system;
pub mod tol;

pub use curve::{ChartKind, SigmaChart, SwitchingCurve};
pub use field::{contact_order_at, equilibria, lie_derivative, Contact, LinearSpec, PolyField};
pub use geom::{Box2, Vec2};
pub use poly::{Poly1, Poly2};
pub use system::{from_linear, from_relay, PiecewiseSystem, Side};
pub use tol::Tolerances;
