//! The deterministic limit: the Burgers–Loewner equation
//! `∂_t M_t = -z S(M_t) ∂_z M_t` solved by characteristics and by series,
//! plus the Σ/η transform algebra of free multiplicative and monotone
//! convolution on the circle.
//!
//! A generator `S` maps the right half-plane into itself. Its Herglotz data
//! `(α, ρ)` describe `u(z) = S((1+z)/(1-z)) = -iα + ∫ (1+zζ)/(1-zζ) dρ(ζ)`,
//! so `S(w) = u((w-1)/(w+1))`.

mod characteristic;
mod hierarchy;
mod transforms;

pub use characteristic::{
    characteristic_solve, eta_semigroup, pde_residual, taylor_coefficients, LimitField,
    CONTINUATION_MIN_STEP, CONTINUATION_STEP,
};
pub use hierarchy::{
    coefficient_ode, long_time_limit_check, moment_hierarchy, moments_via_characteristics,
    moments_via_coefficients,
};
pub use transforms::{
    free_mult_convolve, free_mult_convolve_moments, is_free_infdiv, is_free_infdiv_moments,
    monotone_convolve, monotone_convolve_moments, nu_moments, sigma_from_moments,
    sigma_transform, InfDivResult, DEFAULT_ORDER,
};

use crate::error::{Error, Result};
use crate::measure::CircleMeasure;
use crate::series::SeriesMap;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeneratorS {
    /// `S(w) = 2w`.
    Burgers,
    /// `S ≡ -iα`.
    Rotation { alpha: f64 },
    /// `S ≡ a` with `Re a ≥ 0`.
    Constant { a: Complex64 },
    Herglotz { alpha: f64, rho: CircleMeasure },
}

impl GeneratorS {
    pub fn burgers() -> Self {
        Self::Burgers
    }

    pub fn rotation(alpha: f64) -> Self {
        Self::Rotation { alpha }
    }

    pub fn constant(a: Complex64) -> Result<Self> {
        if !(a.re >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "constant generator needs Re a >= 0, got {a}"
            )));
        }
        Ok(Self::Constant { a })
    }

    pub fn herglotz(alpha: f64, rho: CircleMeasure) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::InvalidInput("alpha must be finite".into()));
        }
        Ok(Self::Herglotz { alpha, rho })
    }

    /// `u(z)` and `u'(z)` for the Herglotz form.
    fn u_with_derivative(alpha: f64, rho: &CircleMeasure, z: Complex64) -> (Complex64, Complex64) {
        let mut u = -I * alpha;
        let mut du = Complex64::new(0.0, 0.0);
        for (a, w) in rho.nodes() {
            let zeta = Complex64::from_polar(1.0, a);
            let inv = ONE / (ONE - z * zeta);
            u += (ONE + z * zeta) * inv * w;
            du += zeta * inv * inv * (2.0 * w);
        }
        (u, du)
    }

    pub fn eval(&self, w: Complex64) -> Result<Complex64> {
        Ok(self.eval_with_derivative(w)?.0)
    }

    /// `S(w)` and `S'(w)`; fails for `Re w ≤ 0` in the Herglotz form.
    pub fn eval_with_derivative(&self, w: Complex64) -> Result<(Complex64, Complex64)> {
        let zero = Complex64::new(0.0, 0.0);
        match self {
            Self::Burgers => Ok((w * 2.0, Complex64::new(2.0, 0.0))),
            Self::Rotation { alpha } => Ok((-I * *alpha, zero)),
            Self::Constant { a } => Ok((*a, zero)),
            Self::Herglotz { alpha, rho } => {
                let den = w + ONE;
                let z = (w - ONE) / den;
                if !(z.norm() < 1.0) {
                    return Err(Error::Domain { re: w.re, im: w.im });
                }
                let (u, du) = Self::u_with_derivative(*alpha, rho, z);
                Ok((u, du * 2.0 / (den * den)))
            }
        }
    }

    /// Taylor coefficients `b_0..b_K` of `u(z) = S((1+z)/(1-z))`.
    pub fn u_series(&self, k: usize) -> SeriesMap {
        match self {
            Self::Burgers => SeriesMap::from_fn(k, |n| {
                Complex64::new(if n == 0 { 2.0 } else { 4.0 }, 0.0)
            }),
            Self::Rotation { alpha } => SeriesMap::constant(-I * *alpha, k),
            Self::Constant { a } => SeriesMap::constant(*a, k),
            Self::Herglotz { alpha, rho } => {
                let m = rho.moments(k);
                SeriesMap::from_fn(k, |n| {
                    if n == 0 {
                        -I * *alpha + rho.total_mass()
                    } else {
                        m.get(n) * 2.0
                    }
                })
            }
        }
    }

    /// `b_0 = S(1)`.
    pub fn b0(&self) -> Complex64 {
        self.u_series(0).coeff(0)
    }

    /// True when `S` is purely imaginary and constant.
    pub fn is_rotation(&self) -> bool {
        match self {
            Self::Rotation { .. } => true,
            Self::Constant { a } => a.re == 0.0,
            Self::Herglotz { rho, .. } => rho.total_mass() == 0.0,
            Self::Burgers => false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn burgers_basics() {
        let s = GeneratorS::burgers();
        assert_eq!(s.eval(ONE).unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(s.b0(), Complex64::new(2.0, 0.0));
        let u = s.u_series(4);
        assert_eq!(u.coeff(3), Complex64::new(4.0, 0.0));
    }

    #[test]
    fn herglotz_form_of_burgers() {
        // ρ = 2δ_1, α = 0 reproduces S(w) = 2w
        let s = GeneratorS::herglotz(0.0, CircleMeasure::atoms(&[0.0], &[2.0]).unwrap()).unwrap();
        for w in [Complex64::new(1.0, 0.0), Complex64::new(0.3, -2.0), Complex64::new(5.0, 1.0)] {
            let (v, dv) = s.eval_with_derivative(w).unwrap();
            assert!((v - w * 2.0).norm() < 1e-12 * (1.0 + w.norm()));
            assert!((dv - Complex64::new(2.0, 0.0)).norm() < 1e-10);
        }
        let a = s.u_series(6);
        let b = GeneratorS::burgers().u_series(6);
        for n in 0..=6 {
            assert!((a.coeff(n) - b.coeff(n)).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_generator_requires_right_half_plane() {
        assert!(GeneratorS::constant(Complex64::new(-1.0, 0.0)).is_err());
        assert!(GeneratorS::rotation(0.3).is_rotation());
    }

    #[test]
    fn json_roundtrip() {
        let s = GeneratorS::herglotz(0.5, CircleMeasure::two_atoms(1.0)).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: GeneratorS = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        let b: GeneratorS = serde_json::from_str(r#"{"type":"burgers"}"#).unwrap();
        assert_eq!(b, GeneratorS::Burgers);
    }

    proptest! {
        #[test]
        fn generators_preserve_right_half_plane(
            re in 1e-3f64..20.0,
            im in -20.0f64..20.0,
            alpha in -3.0f64..3.0,
            angles in prop::collection::vec(0.0f64..std::f64::consts::TAU, 1..5),
        ) {
            let w = Complex64::new(re, im);
            let rho = CircleMeasure::atoms(&angles, &vec![0.7; angles.len()]).unwrap();
            for s in [
                GeneratorS::burgers(),
                GeneratorS::rotation(alpha),
                GeneratorS::herglotz(alpha, rho.clone()).unwrap(),
            ] {
                prop_assert!(s.eval(w).unwrap().re >= -1e-12);
            }
        }
    }
}
