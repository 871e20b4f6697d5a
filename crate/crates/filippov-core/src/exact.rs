//! Exact-rational polynomial arithmetic.
//!
//! A minimal mirror of [`crate::poly::Poly2`] over `Ratio<i128>`, kept for
//! oracle cross-checks where coefficient arithmetic must be certified rather
//! than merely accurate. Only the operations the oracles need are provided.

use std::collections::BTreeMap;

use num_rational::Ratio;
use num_traits::{Signed, Zero};

pub type Rat = Ratio<i128>;

/// Bivariate polynomial with exact rational coefficients.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RatPoly2 {
    coeffs: BTreeMap<(u32, u32), Rat>,
}

impl RatPoly2 {
    pub fn from_terms<I: IntoIterator<Item = (u32, u32, Rat)>>(terms: I) -> Self {
        let mut coeffs: BTreeMap<(u32, u32), Rat> = BTreeMap::new();
        for (i, j, c) in terms {
            if !c.is_zero() {
                let e = coeffs.entry((i, j)).or_insert_with(Rat::zero);
                *e += c;
                if e.is_zero() {
                    coeffs.remove(&(i, j));
                }
            }
        }
        Self { coeffs }
    }

    /// Build from integer triples `(i, j, num, den)`.
    pub fn from_int_terms<I: IntoIterator<Item = (u32, u32, i128, i128)>>(terms: I) -> Self {
        Self::from_terms(
            terms
                .into_iter()
                .map(|(i, j, n, d)| (i, j, Rat::new(n, d))),
        )
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (u32, u32, Rat)> + '_ {
        self.coeffs.iter().map(|(&(i, j), c)| (i, j, *c))
    }

    pub fn add(&self, o: &RatPoly2) -> RatPoly2 {
        RatPoly2::from_terms(self.terms().chain(o.terms()))
    }

    pub fn mul(&self, o: &RatPoly2) -> RatPoly2 {
        let mut terms = Vec::new();
        for (i1, j1, c1) in self.terms() {
            for (i2, j2, c2) in o.terms() {
                terms.push((i1 + i2, j1 + j2, c1 * c2));
            }
        }
        RatPoly2::from_terms(terms)
    }

    pub fn partial_x(&self) -> RatPoly2 {
        RatPoly2::from_terms(
            self.terms()
                .filter(|&(i, _, _)| i > 0)
                .map(|(i, j, c)| (i - 1, j, c * Rat::from_integer(i as i128))),
        )
    }

    pub fn partial_y(&self) -> RatPoly2 {
        RatPoly2::from_terms(
            self.terms()
                .filter(|&(_, j, _)| j > 0)
                .map(|(i, j, c)| (i, j - 1, c * Rat::from_integer(j as i128))),
        )
    }

    pub fn eval(&self, x: Rat, y: Rat) -> Rat {
        let mut acc = Rat::zero();
        for (i, j, c) in self.terms() {
            let mut t = c;
            for _ in 0..i {
                t *= x;
            }
            for _ in 0..j {
                t *= y;
            }
            acc += t;
        }
        acc
    }

    /// Exact Lie derivative `<(u, v), grad p>`.
    pub fn lie(&self, u: &RatPoly2, v: &RatPoly2) -> RatPoly2 {
        u.mul(&self.partial_x()).add(&v.mul(&self.partial_y()))
    }

    /// Compare against a float polynomial coefficient-by-coefficient.
    pub fn matches_f64(&self, p: &crate::poly::Poly2, tol: f64) -> bool {
        let theirs: BTreeMap<(u32, u32), f64> = p.terms().map(|(i, j, c)| ((i, j), c)).collect();
        let mut keys: Vec<(u32, u32)> = self.coeffs.keys().copied().collect();
        keys.extend(theirs.keys().copied());
        keys.sort_unstable();
        keys.dedup();
        for k in keys {
            let a = self
                .coeffs
                .get(&k)
                .map(rat_to_f64)
                .unwrap_or(0.0);
            let b = theirs.get(&k).copied().unwrap_or(0.0);
            if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                return false;
            }
        }
        true
    }
}

pub fn rat_to_f64(r: &Rat) -> f64 {
    let n = *r.numer() as f64;
    let d = *r.denom() as f64;
    n / d
}

pub fn rat_abs(r: Rat) -> Rat {
    r.abs()
}
