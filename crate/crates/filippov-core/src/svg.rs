//! Deterministic SVG phase portraits.
//!
//! The box `K` maps to a fixed 800x800 viewport with a 5% margin. The
//! switching curve is drawn as a thick polyline coloured by region kind,
//! flow arcs are coloured by mode, tangency and pseudo-equilibrium points get
//! labelled markers, and an invariant region renders as a translucent
//! even-odd fill. Identical inputs produce byte-identical output.

use std::fmt::Write as _;

use crate::geom::Vec2;
use crate::hybrid::{Mode, Trajectory};
use crate::lambda::LambdaRegion;
use crate::sigma::{RegionKind, SigmaPartition};
use crate::system::PiecewiseSystem;

const VIEW: f64 = 800.0;
const MARGIN: f64 = 0.05;

pub struct Portrait<'a> {
    pub sys: &'a PiecewiseSystem,
    pub partition: Option<&'a SigmaPartition>,
    pub trajectory: Option<&'a Trajectory>,
    pub lambda: Option<&'a LambdaRegion>,
}

struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
}

impl Frame {
    fn of(sys: &PiecewiseSystem) -> Frame {
        let k = &sys.k;
        let inner = VIEW * (1.0 - 2.0 * MARGIN);
        Frame {
            x0: k.xmin,
            y0: k.ymin,
            sx: inner / k.width(),
            sy: inner / k.height(),
        }
    }

    fn map(&self, p: Vec2) -> (f64, f64) {
        let px = VIEW * MARGIN + (p.x - self.x0) * self.sx;
        // SVG y grows downward.
        let py = VIEW * (1.0 - MARGIN) - (p.y - self.y0) * self.sy;
        (px, py)
    }
}

fn fmt_pt(out: &mut String, frame: &Frame, p: Vec2) {
    let (x, y) = frame.map(p);
    let _ = write!(out, "{x:.3},{y:.3} ");
}

fn polyline(frame: &Frame, pts: &[Vec2], style: &str) -> String {
    let mut d = String::new();
    for &p in pts {
        fmt_pt(&mut d, frame, p);
    }
    format!("  <polyline fill=\"none\" {style} points=\"{}\"/>\n", d.trim_end())
}

fn region_color(kind: RegionKind) -> &'static str {
    match kind {
        RegionKind::Sewing => "#9aa0a6",
        RegionKind::Sliding => "#1a6feb",
        RegionKind::Escaping => "#d93025",
        _ => "#444444",
    }
}

fn mode_color(mode: Mode) -> &'static str {
    match mode {
        Mode::FlowX => "#3f51b5",
        Mode::FlowY => "#e8710a",
        Mode::Slide => "#188038",
    }
}

impl Portrait<'_> {
    pub fn render(&self) -> String {
        let frame = Frame::of(self.sys);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{v}\" height=\"{v}\" viewBox=\"0 0 {v} {v}\">",
            v = VIEW as u32
        );
        out.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");

        // Invariant region under everything else.
        if let Some(region) = self.lambda {
            let mut d = String::new();
            for ring in std::iter::once(&region.outer).chain(region.holes.iter()) {
                let mut first = true;
                for &p in ring {
                    let (x, y) = frame.map(p);
                    let _ = write!(d, "{}{x:.3},{y:.3} ", if first { "M " } else { "L " });
                    first = false;
                }
                d.push_str("Z ");
            }
            let _ = writeln!(
                out,
                "  <path d=\"{}\" fill=\"#fbbc04\" fill-opacity=\"0.35\" fill-rule=\"evenodd\" stroke=\"#f29900\" stroke-width=\"1\"/>",
                d.trim_end()
            );
        }

        // Switching curve coloured by region.
        for (ci, chart) in self.sys.curve.charts.iter().enumerate() {
            let segments: Vec<(f64, f64, RegionKind)> = match self.partition {
                Some(part) => part.charts[ci]
                    .intervals
                    .iter()
                    .map(|iv| (iv.lo, iv.hi, iv.kind))
                    .collect(),
                None => vec![(chart.alpha, chart.beta, RegionKind::Sewing)],
            };
            for (lo, hi, kind) in segments {
                let n = 64;
                let pts: Vec<Vec2> = (0..=n)
                    .map(|i| chart.point(lo + (hi - lo) * i as f64 / n as f64))
                    .collect();
                let style = format!(
                    "stroke=\"{}\" stroke-width=\"4\" stroke-linecap=\"round\"",
                    region_color(kind)
                );
                out.push_str(&polyline(&frame, &pts, &style));
            }
        }

        // Trajectory arcs by mode.
        if let Some(traj) = self.trajectory {
            for arc in &traj.arcs {
                let pts: Vec<Vec2> = arc.samples.iter().map(|&(_, p)| p).collect();
                let style = format!(
                    "stroke=\"{}\" stroke-width=\"1.5\"",
                    mode_color(arc.mode)
                );
                out.push_str(&polyline(&frame, &pts, &style));
            }
        }

        // Markers: tangencies (diamonds) and pseudo-equilibria (dots).
        if let Some(part) = self.partition {
            for cp in &part.charts {
                for bp in &cp.breakpoints {
                    let p = self.sys.curve.charts[cp.chart].point(bp.s);
                    let (x, y) = frame.map(p);
                    match bp.kind {
                        crate::sigma::BreakpointKind::TangencyX
                        | crate::sigma::BreakpointKind::TangencyY
                        | crate::sigma::BreakpointKind::DoubleTangency => {
                            let _ = writeln!(
                                out,
                                "  <rect x=\"{:.3}\" y=\"{:.3}\" width=\"8\" height=\"8\" transform=\"rotate(45 {x:.3} {y:.3})\" fill=\"#202124\"><title>tangency s={:.6}</title></rect>",
                                x - 4.0,
                                y - 4.0,
                                bp.s
                            );
                        }
                        crate::sigma::BreakpointKind::PseudoEquilibrium => {
                            let _ = writeln!(
                                out,
                                "  <circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"5\" fill=\"#d93025\" stroke=\"#202124\"><title>pseudo-equilibrium s={:.6}</title></circle>",
                                bp.s
                            );
                        }
                        crate::sigma::BreakpointKind::Boundary => {}
                    }
                }
            }
        }

        out.push_str("</svg>\n");
        out
    }
}
