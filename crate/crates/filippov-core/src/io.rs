//! System description files: a documented JSON schema for piecewise systems.
//!
//! ```json
//! {
//!   "f": [[1, 0, 1.0]],
//!   "X": [[[0, 1, 1.0]], [[1, 0, -1.0]]],
//!   "Y": [[[0, 0, 1.0]], []],
//!   "K": [-2.0, 2.0, -2.0, 2.0],
//!   "sigma": { "kind": "vertical-line", "x": 0.0, "alpha": -2.0, "beta": 2.0 }
//! }
//! ```
//!
//! Polynomials are lists of `[i, j, coeff]` triples for `coeff * x^i y^j`.
//! `sigma` is one chart object or a list of them; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{ChartKind, SigmaChart, SwitchingCurve};
use crate::field::PolyField;
use crate::geom::Box2;
use crate::poly::{Poly1, Poly2};
use crate::system::{HypothesisWarning, PiecewiseSystem, SystemError};
use crate::tol::Tolerances;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    System(#[from] SystemError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub f: Vec<(u32, u32, f64)>,
    #[serde(rename = "X")]
    pub x: [Vec<(u32, u32, f64)>; 2],
    #[serde(rename = "Y")]
    pub y: [Vec<(u32, u32, f64)>; 2],
    #[serde(rename = "K")]
    pub k: [f64; 4],
    pub sigma: SigmaSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigmaSpec {
    One(ChartSpec),
    Many(Vec<ChartSpec>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ChartSpec {
    #[serde(rename = "vertical-line")]
    VerticalLine { x: f64, alpha: f64, beta: f64 },
    #[serde(rename = "circle")]
    Circle {
        cx: f64,
        cy: f64,
        r: f64,
        alpha: f64,
        beta: f64,
    },
    #[serde(rename = "explicit-parametric")]
    Parametric {
        /// 1-variable polynomial as `[power, coeff]` pairs.
        x: Vec<(u32, f64)>,
        y: Vec<(u32, f64)>,
        alpha: f64,
        beta: f64,
    },
}

impl ChartSpec {
    fn to_chart(&self) -> SigmaChart {
        match self {
            ChartSpec::VerticalLine { x, alpha, beta } => SigmaChart {
                kind: ChartKind::VerticalLine { x: *x },
                alpha: *alpha,
                beta: *beta,
            },
            ChartSpec::Circle {
                cx,
                cy,
                r,
                alpha,
                beta,
            } => SigmaChart {
                kind: ChartKind::Circle {
                    cx: *cx,
                    cy: *cy,
                    r: *r,
                },
                alpha: *alpha,
                beta: *beta,
            },
            ChartSpec::Parametric { x, y, alpha, beta } => SigmaChart {
                kind: ChartKind::Parametric {
                    x: poly1_from_pairs(x),
                    y: poly1_from_pairs(y),
                },
                alpha: *alpha,
                beta: *beta,
            },
        }
    }

    fn from_chart(chart: &SigmaChart) -> ChartSpec {
        match &chart.kind {
            ChartKind::VerticalLine { x } => ChartSpec::VerticalLine {
                x: *x,
                alpha: chart.alpha,
                beta: chart.beta,
            },
            ChartKind::Circle { cx, cy, r } => ChartSpec::Circle {
                cx: *cx,
                cy: *cy,
                r: *r,
                alpha: chart.alpha,
                beta: chart.beta,
            },
            ChartKind::Parametric { x, y } => ChartSpec::Parametric {
                x: poly1_to_pairs(x),
                y: poly1_to_pairs(y),
                alpha: chart.alpha,
                beta: chart.beta,
            },
        }
    }
}

fn poly1_from_pairs(pairs: &[(u32, f64)]) -> Poly1 {
    let deg = pairs.iter().map(|&(k, _)| k).max().unwrap_or(0) as usize;
    let mut coeffs = vec![0.0; deg + 1];
    for &(k, c) in pairs {
        coeffs[k as usize] += c;
    }
    Poly1::from_coeffs(coeffs)
}

fn poly1_to_pairs(p: &Poly1) -> Vec<(u32, f64)> {
    p.coeffs()
        .iter()
        .enumerate()
        .filter(|(_, &c)| c != 0.0)
        .map(|(k, &c)| (k as u32, c))
        .collect()
}

impl SystemFile {
    pub fn from_system(sys: &PiecewiseSystem) -> SystemFile {
        let charts: Vec<ChartSpec> = sys.curve.charts.iter().map(ChartSpec::from_chart).collect();
        let sigma = if charts.len() == 1 {
            SigmaSpec::One(charts.into_iter().next().unwrap())
        } else {
            SigmaSpec::Many(charts)
        };
        SystemFile {
            f: sys.f().to_triples(),
            x: [sys.x_field.u.to_triples(), sys.x_field.v.to_triples()],
            y: [sys.y_field.u.to_triples(), sys.y_field.v.to_triples()],
            k: [sys.k.xmin, sys.k.xmax, sys.k.ymin, sys.k.ymax],
            sigma,
        }
    }

    pub fn into_system(self, tol: Tolerances) -> Result<PiecewiseSystem, IoError> {
        let f = Poly2::from_terms(self.f);
        if f.is_zero() {
            return Err(IoError::Schema("switching function f is zero".into()));
        }
        if !(self.k[0] < self.k[1] && self.k[2] < self.k[3]) {
            return Err(IoError::Schema(
                "K must satisfy xmin < xmax and ymin < ymax".into(),
            ));
        }
        let charts: Vec<SigmaChart> = match &self.sigma {
            SigmaSpec::One(c) => vec![c.to_chart()],
            SigmaSpec::Many(cs) => cs.iter().map(ChartSpec::to_chart).collect(),
        };
        if charts.is_empty() {
            return Err(IoError::Schema("sigma needs at least one chart".into()));
        }
        for c in &charts {
            if !(c.alpha < c.beta) {
                return Err(IoError::Schema("chart interval must satisfy alpha < beta".into()));
            }
        }
        let x_field = PolyField::new(
            Poly2::from_terms(self.x[0].clone()),
            Poly2::from_terms(self.x[1].clone()),
        );
        let y_field = PolyField::new(
            Poly2::from_terms(self.y[0].clone()),
            Poly2::from_terms(self.y[1].clone()),
        );
        let k = Box2::new(self.k[0], self.k[1], self.k[2], self.k[3]);
        Ok(PiecewiseSystem::new(
            SwitchingCurve::new(f, charts),
            x_field,
            y_field,
            k,
            tol,
        )?)
    }
}

/// Load and validate a system file; hypothesis violations are returned as
/// warnings so borderline systems can still be explored.
pub fn load_system(
    path: &Path,
    tol: Tolerances,
) -> Result<(PiecewiseSystem, Vec<HypothesisWarning>), IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    load_system_str(&text, tol)
}

pub fn load_system_str(
    text: &str,
    tol: Tolerances,
) -> Result<(PiecewiseSystem, Vec<HypothesisWarning>), IoError> {
    let file: SystemFile = serde_json::from_str(text)?;
    let sys = file.into_system(tol)?;
    let warnings = sys.check_hypotheses();
    Ok((sys, warnings))
}

/// Canonical serialization: pretty JSON with a trailing newline. Identical
/// systems serialize to identical bytes.
pub fn save_system(sys: &PiecewiseSystem) -> String {
    let file = SystemFile::from_system(sys);
    let mut s = serde_json::to_string_pretty(&file).expect("serializable");
    s.push('\n');
    s
}
