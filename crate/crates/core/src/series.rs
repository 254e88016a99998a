//! Truncated power series with complex coefficients.
//!
//! A [`SeriesMap`] stores `c_0, ..., c_K`; every operation truncates at the
//! order of its (shorter) input. Maps vanishing at the origin (`c_0 = 0`)
//! can be composed into and reverted.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMap {
    coeffs: Vec<Complex64>,
}

impl SeriesMap {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a series needs at least a constant term");
        Self { coeffs }
    }

    pub fn zero(order: usize) -> Self {
        Self::new(vec![ZERO; order + 1])
    }

    pub fn constant(c: Complex64, order: usize) -> Self {
        let mut s = Self::zero(order);
        s.coeffs[0] = c;
        s
    }

    /// The identity map `z`.
    pub fn identity(order: usize) -> Self {
        let mut s = Self::zero(order);
        if order >= 1 {
            s.coeffs[1] = ONE;
        }
        s
    }

    pub fn from_fn(order: usize, f: impl Fn(usize) -> Complex64) -> Self {
        Self::new((0..=order).map(f).collect())
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> Complex64 {
        self.coeffs.get(n).copied().unwrap_or(ZERO)
    }

    pub fn truncate(&self, order: usize) -> Self {
        Self::from_fn(order, |n| self.coeff(n))
    }

    pub fn scale(&self, a: Complex64) -> Self {
        Self::new(self.coeffs.iter().map(|c| c * a).collect())
    }

    pub fn conj(&self) -> Self {
        Self::new(self.coeffs.iter().map(|c| c.conj()).collect())
    }

    /// Horner evaluation of the truncated polynomial.
    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(0);
        }
        Self::from_fn(self.order() - 1, |n| self.coeffs[n + 1] * (n as f64 + 1.0))
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn recip(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0.norm() == 0.0 {
            return Err(Error::InvalidInput(
                "series reciprocal needs a nonzero constant term".into(),
            ));
        }
        let k = self.order();
        let mut b = vec![ZERO; k + 1];
        b[0] = ONE / a0;
        for n in 1..=k {
            let s: Complex64 = (1..=n).map(|j| self.coeffs[j] * b[n - j]).sum();
            b[n] = -s / a0;
        }
        Ok(Self::new(b))
    }

    /// Divides by `z`, dropping the constant term (which must vanish).
    pub fn shift_down(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(0);
        }
        Self::from_fn(self.order() - 1, |n| self.coeffs[n + 1])
    }

    /// Multiplies by `z`, keeping the order.
    pub fn shift_up(&self) -> Self {
        Self::from_fn(self.order(), |n| if n == 0 { ZERO } else { self.coeffs[n - 1] })
    }

    /// `exp` of a series with arbitrary constant term.
    pub fn exp(&self) -> Self {
        let k = self.order();
        let mut b = vec![ZERO; k + 1];
        b[0] = self.coeffs[0].exp();
        for n in 1..=k {
            let s: Complex64 = (1..=n)
                .map(|j| self.coeffs[j] * b[n - j] * j as f64)
                .sum();
            b[n] = s / n as f64;
        }
        Self::new(b)
    }

    /// Principal logarithm anchored at the constant term.
    pub fn ln(&self) -> Result<Self> {
        let a0 = self.coeffs[0];
        if a0.norm() == 0.0 {
            return Err(Error::InvalidInput(
                "series logarithm needs a nonzero constant term".into(),
            ));
        }
        let k = self.order();
        let mut b = vec![ZERO; k + 1];
        b[0] = a0.ln();
        for n in 1..=k {
            let s: Complex64 = (1..n).map(|j| b[j] * self.coeffs[n - j] * j as f64).sum();
            b[n] = (self.coeffs[n] * n as f64 - s) / (a0 * n as f64);
        }
        Ok(Self::new(b))
    }

    /// `self ∘ inner`; `inner` must vanish at the origin.
    pub fn compose(&self, inner: &SeriesMap) -> Result<Self> {
        if inner.coeffs[0].norm() != 0.0 {
            return Err(Error::InvalidInput(
                "inner series of a composition must vanish at 0".into(),
            ));
        }
        let k = self.order().min(inner.order());
        let inner = inner.truncate(k);
        let mut acc = Self::zero(k);
        for c in self.coeffs[..=k].iter().rev() {
            acc = &acc * &inner;
            acc.coeffs[0] += c;
        }
        Ok(acc)
    }

    /// Compositional inverse of a map with `c_0 = 0`, `c_1 != 0`.
    pub fn revert(&self) -> Result<Self> {
        let k = self.order();
        if k == 0 || self.coeffs[0].norm() != 0.0 || self.coeffs[1].norm() == 0.0 {
            return Err(Error::InvalidInput(
                "reversion needs c0 = 0 and c1 != 0".into(),
            ));
        }
        let c1 = self.coeffs[1];
        let mut g = Self::zero(k);
        g.coeffs[1] = ONE / c1;
        // order-by-order: [z^n] f(g) = c1 g_n + (terms in g_1..g_{n-1})
        for n in 2..=k {
            let partial = self.truncate(n).compose(&g.truncate(n))?;
            g.coeffs[n] = -partial.coeffs[n] / c1;
        }
        Ok(g)
    }

    /// Largest coefficient modulus times `r^n` over the top order, a cheap
    /// estimate of the truncation tail at radius `r`.
    pub fn tail_bound(&self, r: f64) -> f64 {
        let k = self.order();
        self.coeffs[k].norm() * r.powi(k as i32)
    }
}

impl<'a> Add<&'a SeriesMap> for &'a SeriesMap {
    type Output = SeriesMap;
    fn add(self, rhs: &SeriesMap) -> SeriesMap {
        let k = self.order().min(rhs.order());
        SeriesMap::from_fn(k, |n| self.coeffs[n] + rhs.coeffs[n])
    }
}

impl<'a> Sub<&'a SeriesMap> for &'a SeriesMap {
    type Output = SeriesMap;
    fn sub(self, rhs: &SeriesMap) -> SeriesMap {
        let k = self.order().min(rhs.order());
        SeriesMap::from_fn(k, |n| self.coeffs[n] - rhs.coeffs[n])
    }
}

impl<'a> Mul<&'a SeriesMap> for &'a SeriesMap {
    type Output = SeriesMap;
    fn mul(self, rhs: &SeriesMap) -> SeriesMap {
        let k = self.order().min(rhs.order());
        SeriesMap::from_fn(k, |n| (0..=n).map(|j| self.coeffs[j] * rhs.coeffs[n - j]).sum())
    }
}

impl Neg for &SeriesMap {
    type Output = SeriesMap;
    fn neg(self) -> SeriesMap {
        self.scale(-ONE)
    }
}

/// Möbius map `(1 + s) / (1 - s)` applied to a series vanishing at 0.
pub fn cayley(s: &SeriesMap) -> Result<SeriesMap> {
    let one = SeriesMap::constant(ONE, s.order());
    let num = &one + s;
    let den = (&one - s).recip()?;
    Ok(&num * &den)
}

/// Inverse Möbius map `(m - 1) / (m + 1)`; requires `m_0 != -1`.
pub fn inverse_cayley(m: &SeriesMap) -> Result<SeriesMap> {
    let one = SeriesMap::constant(ONE, m.order());
    let num = m - &one;
    let den = (m + &one).recip()?;
    Ok(&num * &den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn close(a: &SeriesMap, b: &SeriesMap, tol: f64) -> bool {
        a.coeffs
            .iter()
            .zip(&b.coeffs)
            .all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn geometric_recip() {
        let one_minus_z = SeriesMap::new(vec![ONE, -ONE, ZERO, ZERO, ZERO]);
        let g = one_minus_z.recip().unwrap();
        assert!(g.coeffs().iter().all(|x| (x - ONE).norm() < 1e-15));
    }

    #[test]
    fn exp_ln_roundtrip() {
        let s = SeriesMap::new(vec![c(0.3, 0.2), c(1.0, -0.5), c(0.25, 0.0), c(0.0, 0.1), c(-0.2, 0.0)]);
        let back = s.exp().ln().unwrap();
        assert!(close(&s, &back, 1e-14));
    }

    #[test]
    fn reversion_of_koebe_like_map() {
        // f(z) = z / (1 - z) has inverse z / (1 + z)
        let k = 12;
        let f = SeriesMap::from_fn(k, |n| if n == 0 { ZERO } else { ONE });
        let g = f.revert().unwrap();
        let expected = SeriesMap::from_fn(k, |n| {
            if n == 0 {
                ZERO
            } else {
                c(if n % 2 == 1 { 1.0 } else { -1.0 }, 0.0)
            }
        });
        assert!(close(&g, &expected, 1e-12));
        let id = f.compose(&g).unwrap();
        assert!(close(&id, &SeriesMap::identity(k), 1e-12));
    }

    #[test]
    fn composition_requires_vanishing_inner() {
        let f = SeriesMap::identity(3);
        assert!(f.compose(&SeriesMap::constant(ONE, 3)).is_err());
    }

    #[test]
    fn cayley_pair_inverts() {
        let s = SeriesMap::new(vec![ZERO, c(0.5, 0.1), c(0.2, -0.3), c(0.05, 0.0)]);
        let m = cayley(&s).unwrap();
        assert!((m.coeff(0) - ONE).norm() < 1e-15);
        let back = inverse_cayley(&m).unwrap();
        assert!(close(&s, &back, 1e-14));
    }
}
