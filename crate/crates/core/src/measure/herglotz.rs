use super::{grid_angles, CircleMeasure, MASS_TOL};
use crate::error::{Error, Result};
use crate::series::SeriesMap;
use crate::TAU;
use num_complex::Complex64;
use std::sync::Arc;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest admissible modulus for evaluation points.
pub const DISC_LIMIT: f64 = 1.0 - 1e-12;

pub(crate) fn check_disc(z: Complex64) -> Result<()> {
    if !(z.norm() < DISC_LIMIT) {
        return Err(Error::Domain { re: z.re, im: z.im });
    }
    Ok(())
}

/// A holomorphic map of the disc with nonnegative real part.
pub trait HerglotzField: Send + Sync {
    fn eval(&self, z: Complex64) -> Result<Complex64>;

    /// Value and complex derivative.
    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)>;
}

impl<T: HerglotzField + ?Sized> HerglotzField for &T {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        (**self).eval(z)
    }
    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        (**self).eval_with_derivative(z)
    }
}

impl<T: HerglotzField + ?Sized> HerglotzField for Arc<T> {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        (**self).eval(z)
    }
    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        (**self).eval_with_derivative(z)
    }
}

impl<T: HerglotzField + ?Sized> HerglotzField for Box<T> {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        (**self).eval(z)
    }
    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        (**self).eval_with_derivative(z)
    }
}

impl HerglotzField for CircleMeasure {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_disc(z)?;
        Ok(self
            .nodes()
            .into_iter()
            .map(|(a, w)| {
                let x = Complex64::from_polar(1.0, a);
                (x + z) / (x - z) * w
            })
            .sum())
    }

    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        check_disc(z)?;
        let mut m = Complex64::new(0.0, 0.0);
        let mut dm = Complex64::new(0.0, 0.0);
        for (a, w) in self.nodes() {
            let x = Complex64::from_polar(1.0, a);
            let inv = ONE / (x - z);
            m += (x + z) * inv * w;
            dm += x * inv * inv * (2.0 * w);
        }
        Ok((m, dm))
    }
}

/// Field given by a truncated Taylor series.
#[derive(Debug, Clone)]
pub struct SeriesField {
    series: SeriesMap,
    derivative: SeriesMap,
}

impl SeriesField {
    pub fn new(series: SeriesMap) -> Self {
        let derivative = series.derivative();
        Self { series, derivative }
    }

    pub fn series(&self) -> &SeriesMap {
        &self.series
    }
}

impl HerglotzField for SeriesField {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_disc(z)?;
        Ok(self.series.eval(z))
    }

    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        check_disc(z)?;
        Ok((self.series.eval(z), self.derivative.eval(z)))
    }
}

/// Field backed by a closure returning value and derivative.
pub struct FnField<F> {
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(Complex64) -> Result<(Complex64, Complex64)> + Send + Sync,
{
    pub fn new(f: F) -> Self {
        Self { f }
    }
}

impl<F> HerglotzField for FnField<F>
where
    F: Fn(Complex64) -> Result<(Complex64, Complex64)> + Send + Sync,
{
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        check_disc(z)?;
        Ok((self.f)(z)?.0)
    }

    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        check_disc(z)?;
        (self.f)(z)
    }
}

/// `∫ (x + z)/(x - z) dμ(x)`.
pub fn herglotz_eval(mu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    mu.eval(z)
}

/// `ψ_μ(z) = ∫ xz/(1 - xz) dμ(x)`.
pub fn psi_eval(mu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    check_disc(z)?;
    Ok(mu
        .nodes()
        .into_iter()
        .map(|(a, w)| {
            let xz = Complex64::from_polar(1.0, a) * z;
            xz / (ONE - xz) * w
        })
        .sum())
}

/// `η_μ = ψ_μ / (1 + ψ_μ)`.
pub fn eta_eval(mu: &CircleMeasure, z: Complex64) -> Result<Complex64> {
    let psi = psi_eval(mu, z)?;
    let den = ONE + psi;
    if den.norm() < 1e-14 {
        return Err(Error::Internal(format!(
            "1 + ψ vanished numerically at z = {z}"
        )));
    }
    Ok(psi / den)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InversionOptions {
    /// Innermost radius is `1 - delta`.
    pub delta: f64,
    /// Allowed disagreement between extrapolated densities.
    pub tolerance: f64,
    /// Allowed distance of the recovered mass from 1.
    pub mass_tolerance: f64,
}

impl Default for InversionOptions {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            tolerance: 1e-4,
            mass_tolerance: 1e-3,
        }
    }
}

/// Boundary density `lim_{r→1} Re M(r e^{ix}) / 2π` on a uniform grid.
pub fn invert_density(m: &dyn HerglotzField, grid_size: usize) -> Result<CircleMeasure> {
    invert_density_with(m, grid_size, InversionOptions::default())
}

/// Samples `Re M / 2π` at radii `1-δ`, `1-δ/2`, `1-δ/4`, forms the two
/// linear Richardson extrapolants and requires them to agree.
pub fn invert_density_with(
    m: &dyn HerglotzField,
    grid_size: usize,
    opts: InversionOptions,
) -> Result<CircleMeasure> {
    if grid_size == 0 {
        return Err(Error::InvalidInput("grid size must be positive".into()));
    }
    let radii = [1.0 - opts.delta, 1.0 - opts.delta / 2.0, 1.0 - opts.delta / 4.0];
    let mut values = Vec::with_capacity(grid_size);
    for x in grid_angles(grid_size) {
        let mut d = [0.0; 3];
        for (slot, r) in d.iter_mut().zip(radii) {
            *slot = m.eval(Complex64::from_polar(r, x))?.re / TAU;
        }
        let e_outer = 2.0 * d[1] - d[0];
        let e_inner = 2.0 * d[2] - d[1];
        let disagreement = (e_inner - e_outer).abs();
        if !(disagreement <= opts.tolerance) {
            return Err(Error::NotBoundaryRegular {
                angle: x,
                disagreement,
            });
        }
        values.push(e_inner.max(0.0));
    }
    let raw = CircleMeasure::density(values)?;
    let mass = raw.total_mass();
    if (mass - 1.0).abs() > opts.mass_tolerance {
        return Err(Error::NotNormalizable { mass });
    }
    if (mass - 1.0).abs() <= MASS_TOL {
        Ok(raw)
    } else {
        raw.normalized()
    }
}

/// Poisson-regularised density `Re M(r e^{ix}) / 2π` at a fixed radius,
/// normalised to unit mass. Works for any field, including those without
/// a boundary extension.
pub fn smoothed_density(m: &dyn HerglotzField, grid_size: usize, r: f64) -> Result<CircleMeasure> {
    if grid_size == 0 {
        return Err(Error::InvalidInput("grid size must be positive".into()));
    }
    let mut values = Vec::with_capacity(grid_size);
    for x in grid_angles(grid_size) {
        values.push((m.eval(Complex64::from_polar(r, x))?.re / TAU).max(0.0));
    }
    CircleMeasure::density(values)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{circle_distance, MomentSequence, DEFAULT_GRID};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn point_mass_at_one() {
        let d = CircleMeasure::delta_one();
        assert!((herglotz_eval(&d, c(0.3, 0.0)).unwrap() - c(13.0 / 7.0, 0.0)).norm() < 1e-15);
        assert!((psi_eval(&d, c(0.5, 0.0)).unwrap() - ONE).norm() < 1e-15);
        assert!((eta_eval(&d, c(0.5, 0.0)).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn origin_values() {
        let mu = CircleMeasure::atoms(&[0.3, 1.7, 4.0], &[0.2, 0.5, 0.3]).unwrap();
        let z = c(0.0, 0.0);
        assert!((herglotz_eval(&mu, z).unwrap() - ONE).norm() < 1e-12);
        assert_eq!(psi_eval(&mu, z).unwrap(), z);
        assert_eq!(eta_eval(&mu, z).unwrap(), z);
    }

    #[test]
    fn uniform_field_is_one() {
        let u = CircleMeasure::uniform(DEFAULT_GRID);
        for z in [c(0.5, 0.2), c(-0.9, 0.1), c(0.0, 0.95)] {
            assert!((herglotz_eval(&u, z).unwrap() - ONE).norm() < 1e-12);
            assert!(psi_eval(&u, z).unwrap().norm() < 1e-12);
            assert!(eta_eval(&u, z).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        let d = CircleMeasure::delta_one();
        assert!(matches!(herglotz_eval(&d, c(1.0, 0.0)), Err(Error::Domain { .. })));
        assert!(matches!(psi_eval(&d, c(0.0, -1.5)), Err(Error::Domain { .. })));
        let s = SeriesField::new(SeriesMap::constant(ONE, 3));
        assert!(s.eval(c(0.0, 1.0)).is_err());
    }

    #[test]
    fn constant_field_inverts_to_uniform() {
        let s = SeriesField::new(SeriesMap::constant(ONE, 2));
        let d = invert_density(&s, 64).unwrap();
        assert!(d.is_probability());
        let u = CircleMeasure::uniform(64);
        assert!(circle_distance(&d, &u).unwrap() < 1e-12);
    }

    #[test]
    fn point_mass_is_not_boundary_regular() {
        let d = CircleMeasure::delta_one();
        match invert_density(&d, 64) {
            Err(Error::NotBoundaryRegular { angle, .. }) => assert!(angle.abs() < 1e-12),
            other => panic!("expected NotBoundaryRegular, got {other:?}"),
        }
    }

    #[test]
    fn smooth_density_is_recovered() {
        // f(x) = (1 + 0.5 cos x + 0.3 sin 2x) / 2π
        let g = 512;
        let vals: Vec<f64> = grid_angles(g)
            .iter()
            .map(|x| (1.0 + 0.5 * x.cos() + 0.3 * (2.0 * x).sin()) / TAU)
            .collect();
        let mu = CircleMeasure::density(vals).unwrap();
        let field = SeriesField::new(mu.moments(32).herglotz_series());
        let back = invert_density(&field, 256).unwrap();
        let reference = CircleMeasure::density(
            grid_angles(256)
                .iter()
                .map(|x| (1.0 + 0.5 * x.cos() + 0.3 * (2.0 * x).sin()) / TAU)
                .collect(),
        )
        .unwrap();
        assert!(circle_distance(&back, &reference).unwrap() <= TAU / 256.0);
    }

    #[test]
    fn series_field_matches_measure_field() {
        let mu = CircleMeasure::atoms(&[0.4, 2.5], &[0.5, 0.5]).unwrap();
        let series = SeriesField::new(mu.moments(80).herglotz_series());
        let z = c(0.3, -0.2);
        let (a, da) = mu.eval_with_derivative(z).unwrap();
        let (b, db) = series.eval_with_derivative(z).unwrap();
        assert!((a - b).norm() < 1e-12);
        assert!((da - db).norm() < 1e-10);
    }

    proptest! {
        #[test]
        fn herglotz_psi_eta_identities(
            angles in prop::collection::vec(0.0f64..TAU, 1..8),
            raw_w in prop::collection::vec(0.01f64..1.0, 8),
            r in 0.0f64..0.95,
            phi in 0.0f64..TAU,
        ) {
            let w: Vec<f64> = raw_w[..angles.len()].to_vec();
            let s: f64 = w.iter().sum();
            let w: Vec<f64> = w.iter().map(|x| x / s).collect();
            let mu = CircleMeasure::atoms(&angles, &w).unwrap();
            let z = Complex64::from_polar(r, phi);
            let m = herglotz_eval(&mu, z).unwrap();
            prop_assert!(m.re >= -1e-10);
            prop_assert!((herglotz_eval(&mu, c(0.0, 0.0)).unwrap() - ONE).norm() <= 1e-12);
            // the Herglotz integral of μ equals 1 + 2ψ of the reflected measure
            let psi_bar = psi_eval(&mu.conjugate(), z).unwrap();
            prop_assert!((m - (ONE + psi_bar * 2.0)).norm() <= 1e-12 * (1.0 + m.norm()));
            let psi = psi_eval(&mu, z).unwrap();
            let eta = eta_eval(&mu, z).unwrap();
            prop_assert!((eta * (ONE + psi) - psi).norm() <= 1e-12 * (1.0 + psi.norm()));
            // series backing agrees with the integral
            let series = MomentSequence::from_herglotz_series(&mu.moments(4).herglotz_series());
            prop_assert!(series.max_abs_diff(&mu.moments(4)) < 1e-14);
        }
    }
}
