use super::GeneratorS;
use crate::error::{Error, Result};
use crate::measure::HerglotzField;
use crate::series::SeriesMap;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;
use std::sync::Arc;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest continuation step in `t`.
pub const CONTINUATION_STEP: f64 = 0.05;
/// Continuation gives up once the step has been halved below this.
pub const CONTINUATION_MIN_STEP: f64 = 1e-5;
/// Beyond this modulus the root is continued radially at fixed `t`.
const RAY_START: f64 = 0.9;
const NEWTON_MAX_ITER: usize = 12;
const NEWTON_TOL: f64 = 1e-13;

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

struct Root {
    w: Complex64,
    m0: Complex64,
    dm0: Complex64,
    /// `1/w + t S'(M0(w)) M0'(w)`
    jac: Complex64,
    s: Complex64,
}

struct Problem<'a> {
    m0: &'a dyn HerglotzField,
    s: &'a GeneratorS,
}

impl Problem<'_> {
    /// `ln w - ln z + t S(M0(w))` with the imaginary part reduced mod 2π.
    fn residual(&self, t: f64, z: Complex64, w: Complex64) -> Result<(Complex64, Root)> {
        let (m0, dm0) = self.m0.eval_with_derivative(w)?;
        let (s, ds) = self.s.eval_with_derivative(m0)?;
        let ts = s * t;
        let r = Complex64::new(
            w.norm().ln() - z.norm().ln() + ts.re,
            wrap(w.arg() - z.arg() + ts.im),
        );
        let jac = ONE / w + ds * dm0 * t;
        Ok((
            r,
            Root {
                w,
                m0,
                dm0,
                jac,
                s,
            },
        ))
    }

    fn newton(&self, t: f64, z: Complex64, guess: Complex64) -> Option<Root> {
        let mut w = guess;
        for _ in 0..NEWTON_MAX_ITER {
            if !(w.norm() < 1.0) || w.norm() == 0.0 {
                return None;
            }
            let (r, root) = self.residual(t, z, w).ok()?;
            let delta = r / root.jac;
            if !delta.is_finite() {
                return None;
            }
            w -= delta;
            if delta.norm() <= NEWTON_TOL * w.norm() {
                // one polishing iteration
                if !(w.norm() < 1.0) {
                    return None;
                }
                let (r, root) = self.residual(t, z, w).ok()?;
                let w2 = w - r / root.jac;
                if !(w2.norm() < 1.0) {
                    return None;
                }
                return self.residual(t, z, w2).ok().map(|(_, root)| root);
            }
        }
        None
    }

    /// Continuation in `t` (either sign) from `w = z` at `t = 0`.
    fn continue_in_t(&self, t: f64, z: Complex64) -> Result<Root> {
        let fail = |tc: f64| Error::ContinuationFailed {
            t: tc,
            re: z.re,
            im: z.im,
        };
        let (_, mut root) = self.residual(0.0, z, z)?;
        let dir = t.signum();
        let total = t.abs();
        let mut done = 0.0;
        let mut h = CONTINUATION_STEP.min(total);
        while done < total {
            h = h.min(total - done);
            let t_cur = dir * done;
            let t_next = dir * (done + h);
            // tangent: (1/w + t S' M0') dw/dt = -S
            let pred = root.w - root.s / root.jac * (dir * h);
            let guess = if pred.norm() < 1.0 && pred.is_finite() {
                pred
            } else {
                root.w
            };
            match self.newton(t_next, z, guess) {
                Some(r) => {
                    root = r;
                    done += h;
                    h = (2.0 * h).min(CONTINUATION_STEP);
                }
                None => {
                    h *= 0.5;
                    if h < CONTINUATION_MIN_STEP {
                        return Err(fail(t_cur));
                    }
                }
            }
        }
        Ok(root)
    }

    /// Radial continuation at fixed `t` from `RAY_START` out to `|z|`.
    fn continue_along_ray(&self, t: f64, z: Complex64) -> Result<Root> {
        let target = z.norm();
        let phi = z.arg();
        let fail = || Error::ContinuationFailed {
            t,
            re: z.re,
            im: z.im,
        };
        let mut rho = RAY_START;
        let mut root = self.continue_in_t(t, Complex64::from_polar(rho, phi))?;
        let mut h: f64 = 0.05;
        while rho < target {
            h = h.min(target - rho).min(0.5 * (1.0 - rho));
            // (1/w + t S' M0') dw/dρ = 1/ρ
            let pred = root.w + ONE / (root.jac * rho) * h;
            let guess = if pred.norm() < 1.0 && pred.is_finite() {
                pred
            } else {
                root.w
            };
            let next = if rho + h >= target { target } else { rho + h };
            match self.newton(t, Complex64::from_polar(next, phi), guess) {
                Some(r) => {
                    root = r;
                    rho = next;
                    h *= 2.0;
                }
                None => {
                    h *= 0.5;
                    if h < 1e-12 {
                        return Err(fail());
                    }
                }
            }
        }
        // land exactly on z rather than on its polar reconstruction
        self.newton(t, z, root.w).ok_or_else(fail)
    }

    fn solve(&self, t: f64, z: Complex64) -> Result<Root> {
        if !(z.norm() < crate::measure::DISC_LIMIT) {
            return Err(Error::Domain { re: z.re, im: z.im });
        }
        if z.norm() == 0.0 {
            let (m0, dm0) = self.m0.eval_with_derivative(z)?;
            let (s, _) = self.s.eval_with_derivative(m0)?;
            return Ok(Root {
                w: z,
                m0,
                dm0,
                jac: Complex64::new(f64::INFINITY, 0.0),
                s,
            });
        }
        if z.norm() <= RAY_START {
            self.continue_in_t(t, z)
        } else {
            self.continue_along_ray(t, z)
        }
    }
}

/// `M_t(z) = M0(w)` where `w·exp(t S(M0(w))) = z`.
pub fn characteristic_solve(
    m0: &dyn HerglotzField,
    s: &GeneratorS,
    t: f64,
    z: Complex64,
) -> Result<Complex64> {
    check_time(t)?;
    Ok(Problem { m0, s }.solve(t, z)?.m0)
}

/// The characteristic root `w = η_{ν_t}(z)`.
pub fn eta_semigroup(
    m0: &dyn HerglotzField,
    s: &GeneratorS,
    t: f64,
    z: Complex64,
) -> Result<Complex64> {
    check_time(t)?;
    Ok(Problem { m0, s }.solve(t, z)?.w)
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite and >= 0, got {t}")));
    }
    Ok(())
}

/// The solution `M_t` as an evaluable field.
#[derive(Clone)]
pub struct LimitField {
    m0: Arc<dyn HerglotzField>,
    s: GeneratorS,
    t: f64,
}

impl std::fmt::Debug for LimitField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LimitField")
            .field("s", &self.s)
            .field("t", &self.t)
            .finish_non_exhaustive()
    }
}

impl LimitField {
    pub fn new(m0: Arc<dyn HerglotzField>, s: GeneratorS, t: f64) -> Result<Self> {
        check_time(t)?;
        Ok(Self { m0, s, t })
    }

    /// Same initial data at another time.
    pub fn at_time(&self, t: f64) -> Result<Self> {
        Self::new(self.m0.clone(), self.s.clone(), t)
    }

    /// Unchecked variant allowing slightly negative times for stencils.
    fn at_signed_time(&self, t: f64) -> Self {
        Self {
            m0: self.m0.clone(),
            s: self.s.clone(),
            t,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn initial(&self) -> &Arc<dyn HerglotzField> {
        &self.m0
    }

    pub fn generator(&self) -> &GeneratorS {
        &self.s
    }

    pub fn eta(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.problem().solve(self.t, z)?.w)
    }

    fn problem(&self) -> Problem<'_> {
        Problem {
            m0: self.m0.as_ref(),
            s: &self.s,
        }
    }
}

impl HerglotzField for LimitField {
    fn eval(&self, z: Complex64) -> Result<Complex64> {
        Ok(self.problem().solve(self.t, z)?.m0)
    }

    fn eval_with_derivative(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let root = self.problem().solve(self.t, z)?;
        let dw = if z.norm() == 0.0 {
            (-root.s * self.t).exp()
        } else {
            ONE / (z * root.jac)
        };
        Ok((root.m0, root.dm0 * dw))
    }
}

/// Central difference weights for a sixth-order first derivative.
const D6: [(f64, f64); 6] = [
    (-3.0, -1.0 / 60.0),
    (-2.0, 9.0 / 60.0),
    (-1.0, -45.0 / 60.0),
    (1.0, 45.0 / 60.0),
    (2.0, -9.0 / 60.0),
    (3.0, 1.0 / 60.0),
];

/// `|∂_t M + z S(M) ∂_z M|` at `(t, z)` using sixth-order central
/// differences with spacings `hz` (in z) and `ht` (in t).
pub fn pde_residual(field: &LimitField, z: Complex64, hz: f64, ht: f64) -> Result<f64> {
    let t = field.time();
    let m = field.eval(z)?;
    let mut dz = Complex64::new(0.0, 0.0);
    for (k, c) in D6 {
        dz += field.eval(z + k * hz)? * c;
    }
    dz /= hz;
    let mut dt = Complex64::new(0.0, 0.0);
    for (k, c) in D6 {
        dt += field.at_signed_time(t + k * ht).eval(z)? * c;
    }
    dt /= ht;
    let s = field.generator().eval(m)?;
    Ok((dt + z * s * dz).norm())
}

/// Taylor coefficients `c_0..c_K` of a field by the trapezoid rule on the
/// circle of radius `r` with `g` nodes.
pub fn taylor_coefficients(
    field: &dyn HerglotzField,
    k: usize,
    r: f64,
    g: usize,
) -> Result<SeriesMap> {
    if g <= 2 * k {
        return Err(Error::InvalidInput(format!(
            "{g} nodes cannot resolve order {k}"
        )));
    }
    let values: Vec<Complex64> = (0..g)
        .into_par_iter()
        .map(|j| field.eval(Complex64::from_polar(r, 2.0 * PI * j as f64 / g as f64)))
        .collect::<Result<_>>()?;
    Ok(SeriesMap::from_fn(k, |n| {
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, v) in values.iter().enumerate() {
            let phase = -2.0 * PI * ((j * n) % g) as f64 / g as f64;
            acc += v * Complex64::from_polar(1.0, phase);
        }
        acc / (g as f64 * r.powi(n as i32))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{CircleMeasure, SeriesField};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn delta_field() -> Arc<dyn HerglotzField> {
        Arc::new(CircleMeasure::delta_one())
    }

    #[test]
    fn uniform_start_is_stationary() {
        let m0 = SeriesField::new(SeriesMap::constant(ONE, 0));
        let s = GeneratorS::burgers();
        for t in [0.0, 0.5, 2.0] {
            for z in [c(0.3, 0.4), c(-0.85, 0.1), c(0.0, 0.0)] {
                let m = characteristic_solve(&m0, &s, t, z).unwrap();
                assert!((m - ONE).norm() < 1e-10);
                let w = eta_semigroup(&m0, &s, t, z).unwrap();
                assert!((w - z * (-2.0 * t).exp()).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn time_zero_is_initial_field() {
        let m0 = CircleMeasure::delta_one();
        let s = GeneratorS::burgers();
        let z = c(0.4, -0.3);
        let got = characteristic_solve(&m0, &s, 0.0, z).unwrap();
        assert!((got - (ONE + z) / (ONE - z)).norm() < 1e-14);
    }

    #[test]
    fn semigroup_property() {
        let s = GeneratorS::burgers();
        let ms = LimitField::new(delta_field(), s.clone(), 0.3).unwrap();
        let direct = LimitField::new(delta_field(), s.clone(), 0.8).unwrap();
        let restarted = LimitField::new(Arc::new(ms), s, 0.5).unwrap();
        for z in [c(0.2, 0.1), c(-0.5, 0.5), c(0.7, -0.2)] {
            let a = direct.eval(z).unwrap();
            let b = restarted.eval(z).unwrap();
            assert!((a - b).norm() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let f = LimitField::new(delta_field(), GeneratorS::burgers(), 0.6).unwrap();
        for z in [c(0.0, 0.0), c(0.3, 0.2), c(0.93, 0.1)] {
            let (_, d) = f.eval_with_derivative(z).unwrap();
            let h = 1e-5;
            let fd = (f.eval(z + h).unwrap() - f.eval(z - h).unwrap()) / (2.0 * h);
            assert!((d - fd).norm() < 1e-6 * (1.0 + d.norm()), "{d} vs {fd}");
        }
    }

    #[test]
    fn ray_continuation_reaches_near_boundary() {
        let f = LimitField::new(delta_field(), GeneratorS::burgers(), 1.5).unwrap();
        let m = f.eval(Complex64::from_polar(0.9995, 2.0)).unwrap();
        assert!(m.re > 0.0);
    }

    #[test]
    fn taylor_of_point_mass_field() {
        let m0 = CircleMeasure::delta_one();
        let coeffs = taylor_coefficients(&m0, 8, 0.7, 128).unwrap();
        assert!((coeffs.coeff(0) - ONE).norm() < 1e-13);
        for n in 1..=8 {
            assert!((coeffs.coeff(n) - c(2.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn residual_is_small_inside() {
        let f = LimitField::new(delta_field(), GeneratorS::burgers(), 0.0).unwrap();
        assert!(pde_residual(&f, c(0.5, 0.5), 1e-4, 2e-5).unwrap() < 1e-6);
        let f = f.at_time(1.3).unwrap();
        assert!(pde_residual(&f, c(-0.2, 0.7), 1e-4, 2e-5).unwrap() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn herglotz_preservation_and_schwarz(
            r in 0.0f64..0.9,
            phi in 0.0f64..std::f64::consts::TAU,
            t in 0.0f64..2.0,
        ) {
            let m0 = CircleMeasure::atoms(&[0.0, 2.0], &[0.6, 0.4]).unwrap();
            let s = GeneratorS::burgers();
            let z = Complex64::from_polar(r, phi);
            let m = characteristic_solve(&m0, &s, t, z).unwrap();
            let w = eta_semigroup(&m0, &s, t, z).unwrap();
            prop_assert!(m.re >= -1e-10);
            prop_assert!(w.norm() <= r + 1e-12);
            prop_assert!((m - m0.eval(w).unwrap()).norm() <= 1e-10 * (1.0 + m.norm()));
            let at0 = characteristic_solve(&m0, &s, t, c(0.0, 0.0)).unwrap();
            prop_assert!((at0 - ONE).norm() < 1e-12);
        }
    }
}
