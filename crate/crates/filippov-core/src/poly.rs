//! Bivariate and univariate polynomials with exact coefficient algebra.
//!
//! Region classification rests on signs of iterated Lie derivatives, so the
//! fields and the switching function are kept as explicit polynomials and all
//! derivatives are computed by coefficient manipulation, never by numerical
//! differentiation. Coefficients are `f64`; inputs with small integer or
//! dyadic coefficients therefore stay exact.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Bivariate polynomial `p(x, y) = sum c_ij x^i y^j` in canonical form:
/// zero coefficients are never stored and term order is fixed.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly2 {
    coeffs: BTreeMap<(u32, u32), f64>,
}

impl Poly2 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([(0, 0, c)])
    }

    /// The coordinate polynomial `x`.
    pub fn x() -> Self {
        Self::from_terms([(1, 0, 1.0)])
    }

    /// The coordinate polynomial `y`.
    pub fn y() -> Self {
        Self::from_terms([(0, 1, 1.0)])
    }

    pub fn monomial(i: u32, j: u32, c: f64) -> Self {
        Self::from_terms([(i, j, c)])
    }

    pub fn from_terms<I: IntoIterator<Item = (u32, u32, f64)>>(terms: I) -> Self {
        let mut coeffs = BTreeMap::new();
        for (i, j, c) in terms {
            if c != 0.0 {
                let e = coeffs.entry((i, j)).or_insert(0.0);
                *e += c;
                if *e == 0.0 {
                    coeffs.remove(&(i, j));
                }
            }
        }
        Self { coeffs }
    }

    /// Terms in canonical (graded-free BTreeMap) order.
    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, f64)> + '_ {
        self.coeffs.iter().map(|(&(i, j), &c)| (i, j, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.coeffs.keys().map(|&(i, j)| i + j).max()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        // Horner in y within Horner in x would need a dense layout; with the
        // sparse map a power-cached sum is simpler and exact enough.
        let mut acc = 0.0;
        for (&(i, j), &c) in &self.coeffs {
            acc += c * powi(x, i) * powi(y, j);
        }
        acc
    }

    pub fn partial_x(&self) -> Poly2 {
        Self::from_terms(
            self.coeffs
                .iter()
                .filter(|(&(i, _), _)| i > 0)
                .map(|(&(i, j), &c)| (i - 1, j, c * i as f64)),
        )
    }

    pub fn partial_y(&self) -> Poly2 {
        Self::from_terms(
            self.coeffs
                .iter()
                .filter(|(&(_, j), _)| j > 0)
                .map(|(&(i, j), &c)| (i, j - 1, c * j as f64)),
        )
    }

    pub fn scale(&self, k: f64) -> Poly2 {
        Self::from_terms(self.terms().map(|(i, j, c)| (i, j, c * k)))
    }

    /// Substitute `x = xs(s)`, `y = ys(s)` and return the univariate result.
    pub fn compose1(&self, xs: &Poly1, ys: &Poly1) -> Poly1 {
        let mut acc = Poly1::zero();
        // Cache powers up to the needed degree.
        let max_i = self.coeffs.keys().map(|&(i, _)| i).max().unwrap_or(0);
        let max_j = self.coeffs.keys().map(|&(_, j)| j).max().unwrap_or(0);
        let xp = Poly1::powers(xs, max_i);
        let yp = Poly1::powers(ys, max_j);
        for (&(i, j), &c) in &self.coeffs {
            acc = acc + (&xp[i as usize] * &yp[j as usize]).scale(c);
        }
        acc
    }

    /// Largest absolute coefficient; 0 for the zero polynomial.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Serialize to the `[i, j, c]` triple list used by the system file format.
    pub fn to_triples(&self) -> Vec<(u32, u32, f64)> {
        self.terms().collect()
    }
}

fn powi(base: f64, exp: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

impl Add for &Poly2 {
    type Output = Poly2;
    fn add(self, rhs: &Poly2) -> Poly2 {
        Poly2::from_terms(self.terms().chain(rhs.terms()))
    }
}

impl Sub for &Poly2 {
    type Output = Poly2;
    fn sub(self, rhs: &Poly2) -> Poly2 {
        Poly2::from_terms(self.terms().chain(rhs.terms().map(|(i, j, c)| (i, j, -c))))
    }
}

impl Neg for &Poly2 {
    type Output = Poly2;
    fn neg(self) -> Poly2 {
        self.scale(-1.0)
    }
}

impl Mul for &Poly2 {
    type Output = Poly2;
    fn mul(self, rhs: &Poly2) -> Poly2 {
        let mut terms = Vec::with_capacity(self.coeffs.len() * rhs.coeffs.len());
        for (i1, j1, c1) in self.terms() {
            for (i2, j2, c2) in rhs.terms() {
                terms.push((i1 + i2, j1 + j2, c1 * c2));
            }
        }
        Poly2::from_terms(terms)
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (i, j, c) in self.terms() {
            if first {
                write!(f, "{c}")?;
                first = false;
            } else if c >= 0.0 {
                write!(f, " + {c}")?;
            } else {
                write!(f, " - {}", -c)?;
            }
            if i > 0 {
                write!(f, "*x^{i}")?;
            }
            if j > 0 {
                write!(f, "*y^{j}")?;
            }
        }
        Ok(())
    }
}

/// Dense univariate polynomial, lowest degree first.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Poly1 {
    coeffs: Vec<f64>,
}

impl Poly1 {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_coeffs(vec![c])
    }

    /// Identity polynomial `s`.
    pub fn s() -> Self {
        Self::from_coeffs(vec![0.0, 1.0])
    }

    pub fn from_coeffs(coeffs: Vec<f64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    fn trim(&mut self) {
        while matches!(self.coeffs.last(), Some(&c) if c == 0.0) {
            self.coeffs.pop();
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        if self.coeffs.is_empty() {
            None
        } else {
            Some(self.coeffs.len() - 1)
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    pub fn derivative(&self) -> Poly1 {
        if self.coeffs.len() <= 1 {
            return Poly1::zero();
        }
        Poly1::from_coeffs(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(k, &c)| c * (k + 1) as f64)
                .collect(),
        )
    }

    pub fn scale(&self, k: f64) -> Poly1 {
        Poly1::from_coeffs(self.coeffs.iter().map(|&c| c * k).collect())
    }

    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn powers(p: &Poly1, up_to: u32) -> Vec<Poly1> {
        let mut out = Vec::with_capacity(up_to as usize + 1);
        out.push(Poly1::constant(1.0));
        for k in 1..=up_to as usize {
            let next = &out[k - 1] * p;
            out.push(next);
        }
        out
    }
}

impl Add for Poly1 {
    type Output = Poly1;
    fn add(self, rhs: Poly1) -> Poly1 {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let mut out = vec![0.0; n];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k] += c;
        }
        for (k, &c) in rhs.coeffs.iter().enumerate() {
            out[k] += c;
        }
        Poly1::from_coeffs(out)
    }
}

impl Sub for Poly1 {
    type Output = Poly1;
    fn sub(self, rhs: Poly1) -> Poly1 {
        self + rhs.scale(-1.0)
    }
}

impl Mul for &Poly1 {
    type Output = Poly1;
    fn mul(self, rhs: &Poly1) -> Poly1 {
        if self.is_zero() || rhs.is_zero() {
            return Poly1::zero();
        }
        let mut out = vec![0.0; self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly1::from_coeffs(out)
    }
}

/// A located real root of a univariate polynomial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: f64,
    /// Whether the polynomial changes sign across the root.
    pub sign_change: bool,
}

/// Isolate the real roots of `p` on `[a, b]`, refined to width `tol`.
///
/// Strategy: recursively isolate the roots of `p'`; the critical points split
/// `[a, b]` into monotone pieces, each holding at most one sign-change root
/// (found by bisection). Critical points where `|p|` itself is tiny are
/// reported as even-multiplicity roots. This certifies that no root is missed
/// beyond the floating-point resolution of the coefficients.
pub fn isolate_roots(p: &Poly1, a: f64, b: f64, tol: f64) -> Vec<Root> {
    assert!(a <= b, "isolate_roots: empty interval");
    let mut out = Vec::new();
    if p.is_zero() {
        return out; // caller must treat the zero polynomial separately
    }
    let zero_tol = effective_zero_tol(p, a, b);
    match p.degree() {
        None | Some(0) => return out,
        Some(1) => {
            let r = -p.coeffs()[0] / p.coeffs()[1];
            if r >= a - tol && r <= b + tol {
                out.push(Root {
                    value: r.clamp(a, b),
                    sign_change: true,
                });
            }
            return out;
        }
        _ => {}
    }

    let crits = isolate_roots(&p.derivative(), a, b, tol);
    let mut knots = vec![a];
    for c in &crits {
        if c.value > a + tol && c.value < b - tol {
            knots.push(c.value);
        }
    }
    knots.push(b);
    knots.dedup_by(|x, y| (*x - *y).abs() <= tol);

    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (flo, fhi) = (p.eval(lo), p.eval(hi));
        if flo == 0.0 || flo.abs() <= zero_tol {
            push_root(&mut out, lo, sign_changes_at(p, lo, a, b, tol), tol);
        }
        if flo * fhi < 0.0 && flo.abs() > zero_tol && fhi.abs() > zero_tol {
            let r = bisect(p, lo, hi, tol);
            push_root(&mut out, r, true, tol);
        }
    }
    let fb = p.eval(b);
    if fb == 0.0 || fb.abs() <= zero_tol {
        push_root(&mut out, b, sign_changes_at(p, b, a, b, tol), tol);
    }
    out.sort_by(|r, s| r.value.total_cmp(&s.value));
    out
}

fn effective_zero_tol(p: &Poly1, a: f64, b: f64) -> f64 {
    let scale = p.coeff_norm() * (1.0 + a.abs().max(b.abs())).powi(p.degree().unwrap_or(0) as i32);
    (scale * 1e-12).max(1e-300)
}

fn push_root(out: &mut Vec<Root>, value: f64, sign_change: bool, tol: f64) {
    if out
        .iter()
        .any(|r| (r.value - value).abs() <= 4.0 * tol.max(1e-14))
    {
        return;
    }
    out.push(Root { value, sign_change });
}

fn sign_changes_at(p: &Poly1, r: f64, a: f64, b: f64, tol: f64) -> bool {
    let h = (8.0 * tol).max(1e-9);
    let lo = (r - h).max(a - h);
    let hi = (r + h).min(b + h);
    p.eval(lo) * p.eval(hi) < 0.0
}

/// Plain bisection on a bracketed sign change.
pub fn bisect(p: &Poly1, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = p.eval(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = p.eval(mid);
        if fm == 0.0 {
            return mid;
        }
        if flo * fm < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    0.5 * (lo + hi)
}
