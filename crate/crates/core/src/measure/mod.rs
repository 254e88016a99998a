//! Probability measures on the unit circle and their analytic transforms.
//!
//! A [`CircleMeasure`] is either a finite list of atoms or a density sampled
//! on a uniform angular grid. Atomic measures come out of the particle
//! simulations; densities come out of boundary inversion of the limit field.
//!
//! Conventions: moments are `m_n = ∫ x^n dμ(x)` and the moment generating
//! function is `ψ_μ(z) = ∫ xz / (1 - xz) dμ = Σ m_n z^n`. The Herglotz
//! integral `M_μ(z) = ∫ (x + z)/(x - z) dμ` has Taylor coefficients
//! `2 conj(m_n)`, so `M_μ = 1 + 2 ψ_{μ̄}` with `μ̄` the reflection of `μ`
//! across the real axis; the two agree whenever `μ` is reflection symmetric.

mod distance;
mod herglotz;

pub use distance::circle_distance;
pub use herglotz::{
    eta_eval, herglotz_eval, invert_density, invert_density_with, psi_eval, smoothed_density,
    DISC_LIMIT,
    FnField, HerglotzField, InversionOptions, SeriesField,
};

use crate::error::{Error, Result};
use crate::series::SeriesMap;
use crate::TAU;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default grid size for density representations.
pub const DEFAULT_GRID: usize = 2048;

/// Tolerance on the total mass of a probability measure.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Representation {
    /// Point masses at canonical angles in `[0, 2π)`, strictly increasing.
    Atoms { angles: Vec<f64>, weights: Vec<f64> },
    /// Density with respect to arc length at `2πj/G`, `j = 0..G`.
    Density { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureJson", into = "MeasureJson")]
pub struct CircleMeasure {
    repr: Representation,
    total_mass: f64,
}

/// Wraps an angle into `[0, 2π)`.
pub fn canonical_angle(theta: f64) -> f64 {
    let a = theta.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Angles of a uniform grid of size `g`.
pub fn grid_angles(g: usize) -> Vec<f64> {
    (0..g).map(|j| TAU * j as f64 / g as f64).collect()
}

impl CircleMeasure {
    /// Builds an atomic measure, canonicalising angles, merging coincident
    /// atoms and dropping zero weights.
    pub fn atoms(angles: &[f64], weights: &[f64]) -> Result<Self> {
        if angles.len() != weights.len() {
            return Err(Error::InvalidMeasure(format!(
                "{} angles but {} weights",
                angles.len(),
                weights.len()
            )));
        }
        let mut pairs = Vec::with_capacity(angles.len());
        for (&a, &w) in angles.iter().zip(weights) {
            if !a.is_finite() || !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidMeasure(format!("bad atom ({a}, {w})")));
            }
            if w > 0.0 {
                pairs.push((canonical_angle(a), w));
            }
        }
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut out_a: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut out_w: Vec<f64> = Vec::with_capacity(pairs.len());
        for (a, w) in pairs {
            match out_a.last() {
                Some(&last) if last == a => *out_w.last_mut().unwrap() += w,
                _ => {
                    out_a.push(a);
                    out_w.push(w);
                }
            }
        }
        let total_mass = out_w.iter().sum();
        Ok(Self {
            repr: Representation::Atoms {
                angles: out_a,
                weights: out_w,
            },
            total_mass,
        })
    }

    /// Builds a density measure from grid values; the mass is the
    /// (periodic) trapezoid sum.
    pub fn density(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidMeasure("empty density grid".into()));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidMeasure(
                "density values must be finite and nonnegative".into(),
            ));
        }
        let h = TAU / values.len() as f64;
        let total_mass = values.iter().sum::<f64>() * h;
        Ok(Self {
            repr: Representation::Density { values },
            total_mass,
        })
    }

    pub fn delta(angle: f64) -> Self {
        Self::atoms(&[angle], &[1.0]).expect("valid point mass")
    }

    /// Point mass at 1.
    pub fn delta_one() -> Self {
        Self::delta(0.0)
    }

    /// `(δ_1 + δ_{e^{iθ}}) / 2`.
    pub fn two_atoms(angle: f64) -> Self {
        Self::atoms(&[0.0, angle], &[0.5, 0.5]).expect("valid atoms")
    }

    pub fn uniform(grid: usize) -> Self {
        Self::density(vec![1.0 / TAU; grid]).expect("valid density")
    }

    pub fn representation(&self) -> &Representation {
        &self.repr
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn is_probability(&self) -> bool {
        (self.total_mass - 1.0).abs() <= MASS_TOL
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.repr, Representation::Atoms { .. })
    }

    pub fn require_probability(&self) -> Result<()> {
        if self.is_probability() {
            Ok(())
        } else {
            Err(Error::InvalidMeasure(format!(
                "expected a probability measure, total mass is {}",
                self.total_mass
            )))
        }
    }

    /// Rescales to unit mass.
    pub fn normalized(&self) -> Result<Self> {
        if !(self.total_mass > 0.0) {
            return Err(Error::InvalidMeasure("cannot normalise a zero measure".into()));
        }
        let s = 1.0 / self.total_mass;
        Ok(match &self.repr {
            Representation::Atoms { angles, weights } => Self {
                repr: Representation::Atoms {
                    angles: angles.clone(),
                    weights: weights.iter().map(|w| w * s).collect(),
                },
                total_mass: 1.0,
            },
            Representation::Density { values } => Self {
                repr: Representation::Density {
                    values: values.iter().map(|v| v * s).collect(),
                },
                total_mass: 1.0,
            },
        })
    }

    /// Pushforward under rotation by `phi`. Densities are rotated by whole
    /// grid cells only, so `phi` is rounded to the nearest cell there.
    pub fn rotate(&self, phi: f64) -> Self {
        match &self.repr {
            Representation::Atoms { angles, weights } => {
                let shifted: Vec<f64> = angles.iter().map(|a| a + phi).collect();
                Self::atoms(&shifted, weights).expect("rotation keeps atoms valid")
            }
            Representation::Density { values } => {
                let g = values.len();
                let shift = (canonical_angle(phi) / TAU * g as f64).round() as usize % g;
                let mut v = vec![0.0; g];
                for (j, val) in values.iter().enumerate() {
                    v[(j + shift) % g] = *val;
                }
                Self::density(v).expect("rotation keeps density valid")
            }
        }
    }

    /// Reflection `x ↦ x̄` (angle negation).
    pub fn conjugate(&self) -> Self {
        match &self.repr {
            Representation::Atoms { angles, weights } => {
                let neg: Vec<f64> = angles.iter().map(|a| -a).collect();
                Self::atoms(&neg, weights).expect("reflection keeps atoms valid")
            }
            Representation::Density { values } => {
                let g = values.len();
                let v = (0..g).map(|j| values[(g - j) % g]).collect();
                Self::density(v).expect("reflection keeps density valid")
            }
        }
    }

    /// Quadrature nodes `(angle, weight)`: atoms exactly, densities by the
    /// periodic trapezoid rule.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        match &self.repr {
            Representation::Atoms { angles, weights } => {
                angles.iter().copied().zip(weights.iter().copied()).collect()
            }
            Representation::Density { values } => {
                let h = TAU / values.len() as f64;
                values
                    .iter()
                    .enumerate()
                    .map(|(j, v)| (h * j as f64, v * h))
                    .collect()
            }
        }
    }

    pub fn moments(&self, k: usize) -> MomentSequence {
        let mut m = vec![Complex64::new(0.0, 0.0); k + 1];
        for (a, w) in self.nodes() {
            let x = Complex64::from_polar(1.0, a);
            let mut p = Complex64::new(w, 0.0);
            for slot in m.iter_mut() {
                *slot += p;
                p *= x;
            }
        }
        MomentSequence::new(m)
    }

    pub fn herglotz(&self, z: Complex64) -> Result<Complex64> {
        herglotz_eval(self, z)
    }

    /// Writes a density as CSV with header `angle,value`; atomic measures
    /// are written with their atom weights.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("angle,value\n");
        match &self.repr {
            Representation::Atoms { angles, weights } => {
                for (a, w) in angles.iter().zip(weights) {
                    out.push_str(&format!("{a},{w}\n"));
                }
            }
            Representation::Density { values } => {
                for (a, v) in grid_angles(values.len()).iter().zip(values) {
                    out.push_str(&format!("{a},{v}\n"));
                }
            }
        }
        out
    }

    /// Smallest arc that leaves the support: for atoms the largest gap
    /// between consecutive atoms, for densities the longest run of zero
    /// cells times the spacing.
    pub fn largest_gap(&self) -> f64 {
        match &self.repr {
            Representation::Atoms { angles, .. } => {
                if angles.is_empty() {
                    return TAU;
                }
                let n = angles.len();
                (0..n)
                    .map(|i| {
                        if i + 1 < n {
                            angles[i + 1] - angles[i]
                        } else {
                            angles[0] + TAU - angles[n - 1]
                        }
                    })
                    .fold(0.0, f64::max)
            }
            Representation::Density { values } => {
                let g = values.len();
                let h = TAU / g as f64;
                if values.iter().all(|v| *v == 0.0) {
                    return TAU;
                }
                let mut best = 0usize;
                let mut run = 0usize;
                for j in 0..2 * g {
                    if values[j % g] == 0.0 {
                        run += 1;
                        best = best.max(run.min(g));
                    } else {
                        run = 0;
                    }
                }
                // a run of r zero nodes spans r+1 cells between positive nodes
                if best == 0 {
                    0.0
                } else {
                    (best + 1) as f64 * h
                }
            }
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MeasureJson {
    #[serde(rename = "type")]
    kind: String,
    angles: Vec<f64>,
    weights: Vec<f64>,
}

impl From<CircleMeasure> for MeasureJson {
    fn from(m: CircleMeasure) -> Self {
        match m.repr {
            Representation::Atoms { angles, weights } => MeasureJson {
                kind: "atoms".into(),
                angles,
                weights,
            },
            Representation::Density { values } => MeasureJson {
                kind: "density".into(),
                angles: grid_angles(values.len()),
                weights: values,
            },
        }
    }
}

impl TryFrom<MeasureJson> for CircleMeasure {
    type Error = Error;
    fn try_from(j: MeasureJson) -> Result<Self> {
        match j.kind.as_str() {
            "atoms" => CircleMeasure::atoms(&j.angles, &j.weights),
            "density" => {
                if !j.angles.is_empty() && j.angles.len() != j.weights.len() {
                    return Err(Error::InvalidMeasure(
                        "density angles and values differ in length".into(),
                    ));
                }
                let expected = grid_angles(j.weights.len());
                if !j.angles.is_empty()
                    && j.angles.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-9)
                {
                    return Err(Error::InvalidMeasure(
                        "density angles must form the uniform grid 2πj/G".into(),
                    ));
                }
                CircleMeasure::density(j.weights)
            }
            other => Err(Error::InvalidMeasure(format!(
                "unknown measure type `{other}` (expected `atoms` or `density`)"
            ))),
        }
    }
}

/// Moments `m_0, ..., m_K` of a measure on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSequence {
    m: Vec<Complex64>,
}

impl MomentSequence {
    pub fn new(m: Vec<Complex64>) -> Self {
        assert!(!m.is_empty(), "moment sequence needs m_0");
        Self { m }
    }

    pub fn order(&self) -> usize {
        self.m.len() - 1
    }

    pub fn values(&self) -> &[Complex64] {
        &self.m
    }

    pub fn get(&self, n: usize) -> Complex64 {
        self.m[n]
    }

    pub fn conj(&self) -> Self {
        Self::new(self.m.iter().map(|c| c.conj()).collect())
    }

    /// Checks `m_0 = 1` and `|m_n| <= 1`.
    pub fn is_probability(&self, tol: f64) -> bool {
        (self.m[0] - Complex64::new(1.0, 0.0)).norm() <= tol
            && self.m.iter().all(|c| c.norm() <= 1.0 + tol)
    }

    /// `ψ(z) = Σ_{n≥1} m_n z^n`.
    pub fn psi_series(&self) -> SeriesMap {
        SeriesMap::from_fn(self.order(), |n| {
            if n == 0 {
                Complex64::new(0.0, 0.0)
            } else {
                self.m[n]
            }
        })
    }

    /// `η = ψ / (1 + ψ)`.
    pub fn eta_series(&self) -> SeriesMap {
        let psi = self.psi_series();
        let one_plus = &SeriesMap::constant(Complex64::new(1.0, 0.0), psi.order()) + &psi;
        &psi * &one_plus.recip().expect("1 + ψ has unit constant term")
    }

    /// Taylor series of the Herglotz integral, `1 + 2 Σ conj(m_n) z^n`.
    pub fn herglotz_series(&self) -> SeriesMap {
        SeriesMap::from_fn(self.order(), |n| {
            if n == 0 {
                self.m[0]
            } else {
                self.m[n].conj() * 2.0
            }
        })
    }

    pub fn from_psi_series(psi: &SeriesMap) -> Self {
        Self::new(
            (0..=psi.order())
                .map(|n| {
                    if n == 0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        psi.coeff(n)
                    }
                })
                .collect(),
        )
    }

    /// Inverts `η = ψ/(1+ψ)`, i.e. `ψ = η / (1 - η)`.
    pub fn from_eta_series(eta: &SeriesMap) -> Self {
        let one_minus = &SeriesMap::constant(Complex64::new(1.0, 0.0), eta.order()) - eta;
        let psi = eta * &one_minus.recip().expect("η vanishes at 0");
        Self::from_psi_series(&psi)
    }

    /// Reads moments from the Taylor series of a Herglotz field.
    pub fn from_herglotz_series(m: &SeriesMap) -> Self {
        Self::new(
            (0..=m.order())
                .map(|n| {
                    if n == 0 {
                        m.coeff(0).conj()
                    } else {
                        m.coeff(n).conj() * 0.5
                    }
                })
                .collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.m
            .iter()
            .zip(&other.m)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Moments `m_0..m_K` of `mu`.
pub fn moments(mu: &CircleMeasure, k: usize) -> MomentSequence {
    mu.moments(k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn atoms_are_canonicalised() {
        let m = CircleMeasure::atoms(&[7.0, -0.5, 0.5, 0.5 + TAU], &[0.25, 0.25, 0.25, 0.25]).unwrap();
        match m.representation() {
            Representation::Atoms { angles, weights } => {
                assert_eq!(angles.len(), 3);
                assert!(angles.windows(2).all(|w| w[0] < w[1]));
                assert!(angles.iter().all(|a| (0.0..TAU).contains(a)));
                assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
            }
            _ => unreachable!(),
        }
        assert!(m.is_probability());
    }

    #[test]
    fn negative_weights_rejected() {
        assert!(CircleMeasure::atoms(&[0.0], &[-1.0]).is_err());
        assert!(CircleMeasure::density(vec![1.0, -0.1]).is_err());
    }

    #[test]
    fn moments_of_basic_measures() {
        let d = CircleMeasure::delta_one().moments(6);
        assert!(d.values().iter().all(|m| (m - Complex64::new(1.0, 0.0)).norm() < 1e-15));

        let u = CircleMeasure::uniform(DEFAULT_GRID).moments(6);
        assert!((u.get(0).re - 1.0).abs() < 1e-12);
        assert!(u.values()[1..].iter().all(|m| m.norm() < 1e-12));

        let two = CircleMeasure::two_atoms(PI).moments(7);
        for n in 0..=7 {
            let expected = if n % 2 == 0 { 1.0 } else { 0.0 };
            assert!((two.get(n) - Complex64::new(expected, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn json_roundtrip_and_schema() {
        let m = CircleMeasure::atoms(&[0.1, 2.0], &[0.3, 0.7]).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"type\":\"atoms\""));
        let back: CircleMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);

        let d = CircleMeasure::uniform(8);
        let s = serde_json::to_string(&d).unwrap();
        let back: CircleMeasure = serde_json::from_str(&s).unwrap();
        assert_eq!(d, back);

        let bad = r#"{"type":"blob","angles":[],"weights":[]}"#;
        assert!(serde_json::from_str::<CircleMeasure>(bad).is_err());
    }

    #[test]
    fn density_csv_has_header() {
        let csv = CircleMeasure::uniform(4).to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "angle,value");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn largest_gap_for_atoms_and_density() {
        assert!((CircleMeasure::delta_one().largest_gap() - TAU).abs() < 1e-15);
        assert!((CircleMeasure::two_atoms(PI).largest_gap() - PI).abs() < 1e-15);
        assert_eq!(CircleMeasure::uniform(16).largest_gap(), 0.0);
    }

    proptest! {
        #[test]
        fn rotation_multiplies_moments(
            angles in prop::collection::vec(0.0f64..TAU, 1..6),
            phi in -10.0f64..10.0,
        ) {
            let w = vec![1.0 / angles.len() as f64; angles.len()];
            let mu = CircleMeasure::atoms(&angles, &w).unwrap();
            let rot = mu.rotate(phi);
            let (a, b) = (mu.moments(8), rot.moments(8));
            for n in 0..=8 {
                let expected = a.get(n) * Complex64::from_polar(1.0, n as f64 * phi);
                prop_assert!((b.get(n) - expected).norm() < 1e-12);
            }
        }

        #[test]
        fn eta_psi_series_roundtrip(
            angles in prop::collection::vec(0.0f64..TAU, 1..6),
        ) {
            let w = vec![1.0 / angles.len() as f64; angles.len()];
            let m = CircleMeasure::atoms(&angles, &w).unwrap().moments(10);
            let back = MomentSequence::from_eta_series(&m.eta_series());
            prop_assert!(m.max_abs_diff(&back) < 1e-10);
        }
    }
}
