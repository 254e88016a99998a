use super::GeneratorS;
use crate::error::{Error, Result};
use crate::measure::{grid_angles, CircleMeasure, MomentSequence};
use crate::series::{inverse_cayley, SeriesMap};
use crate::TAU;
use num_complex::Complex64;

/// Default truncation order for series computations.
pub const DEFAULT_ORDER: usize = 24;

const R_TEST: f64 = 0.5;
const TAIL_TOL: f64 = 1e-6;
const RE_TOL: f64 = 1e-8;

/// `Σ(z) = η^{-1}(z) / z`, truncated one order below the moments.
pub fn sigma_from_moments(m: &MomentSequence) -> Result<SeriesMap> {
    if m.order() < 1 || m.get(1).norm() < 1e-12 {
        return Err(Error::ZeroMeanMeasure {
            m1_abs: if m.order() >= 1 { m.get(1).norm() } else { 0.0 },
        });
    }
    Ok(m.eta_series().revert()?.shift_down())
}

pub fn sigma_transform(mu: &CircleMeasure, k: usize) -> Result<SeriesMap> {
    sigma_from_moments(&mu.moments(k + 1))
}

fn moments_from_sigma(sigma: &SeriesMap) -> Result<MomentSequence> {
    let inv = SeriesMap::from_fn(sigma.order() + 1, |n| {
        if n == 0 {
            Complex64::new(0.0, 0.0)
        } else {
            sigma.coeff(n - 1)
        }
    });
    Ok(MomentSequence::from_eta_series(&inv.revert()?))
}

/// `μ ⊠ ν` through `Σ_{μ⊠ν} = Σ_μ Σ_ν`.
pub fn free_mult_convolve_moments(a: &MomentSequence, b: &MomentSequence) -> Result<MomentSequence> {
    let s = &sigma_from_moments(a)? * &sigma_from_moments(b)?;
    moments_from_sigma(&s)
}

pub fn free_mult_convolve(mu: &CircleMeasure, nu: &CircleMeasure, k: usize) -> Result<MomentSequence> {
    free_mult_convolve_moments(&mu.moments(k), &nu.moments(k))
}

/// `μ ▷ ν` through `η_{μ▷ν} = η_μ ∘ η_ν`.
pub fn monotone_convolve_moments(a: &MomentSequence, b: &MomentSequence) -> Result<MomentSequence> {
    let eta = a.eta_series().compose(&b.eta_series())?;
    Ok(MomentSequence::from_eta_series(&eta))
}

pub fn monotone_convolve(mu: &CircleMeasure, nu: &CircleMeasure, k: usize) -> Result<MomentSequence> {
    monotone_convolve_moments(&mu.moments(k), &nu.moments(k))
}

/// Moments of the semigroup element `ν_t` with
/// `η_{ν_t}^{-1}(z) = z exp(t S(M0(z)))`, given the Taylor series of `M0`.
pub fn nu_moments(m0_series: &SeriesMap, s: &GeneratorS, t: f64) -> Result<MomentSequence> {
    let k = m0_series.order();
    let eta0 = inverse_cayley(m0_series)?;
    let s_of_m0 = s.u_series(k).compose(&eta0)?;
    let sigma = s_of_m0.scale(Complex64::new(t, 0.0)).exp().truncate(k.saturating_sub(1));
    moments_from_sigma(&sigma)
}

#[derive(Debug, Clone)]
pub struct InfDivResult {
    pub infinitely_divisible: bool,
    /// Herglotz data fitted to `u = log Σ` when divisible.
    pub generator: Option<GeneratorS>,
    /// Smallest `Re log Σ` found on the test grid.
    pub min_re: f64,
    pub log_sigma: SeriesMap,
}

/// Tests whether `log Σ_μ` has nonnegative real part on `|z| ≤ 0.5`.
pub fn is_free_infdiv(mu: &CircleMeasure, k: usize, grid: usize) -> Result<InfDivResult> {
    is_free_infdiv_moments(&mu.moments(k + 2), grid)
}

pub fn is_free_infdiv_moments(m: &MomentSequence, grid: usize) -> Result<InfDivResult> {
    let log_sigma = sigma_from_moments(m)?.ln()?;
    let tail = log_sigma.tail_bound(R_TEST);
    if !(tail <= TAIL_TOL) {
        return Err(Error::InconclusiveTruncation { tail });
    }
    let mut min_re = log_sigma.coeff(0).re;
    let angles = grid_angles(grid.max(8));
    for j in 1..=4 {
        let r = R_TEST * j as f64 / 4.0;
        for &a in &angles {
            min_re = min_re.min(log_sigma.eval(Complex64::from_polar(r, a)).re);
        }
    }
    let infinitely_divisible = min_re >= -RE_TOL;
    let generator = if infinitely_divisible {
        Some(fit_generator(&log_sigma, grid.max(8))?)
    } else {
        None
    };
    Ok(InfDivResult {
        infinitely_divisible,
        generator,
        min_re,
        log_sigma,
    })
}

/// `u_0 = -iα + ρ(T)`, `u_n = 2 ∫ ζ^n dρ`; the density of `ρ` is rebuilt
/// from its Fourier coefficients with Fejér weights.
fn fit_generator(u: &SeriesMap, grid: usize) -> Result<GeneratorS> {
    let alpha = 0.0 - u.coeff(0).im;
    let mass = u.coeff(0).re.max(0.0);
    let k = u.order();
    let rest = (1..=k).map(|n| u.coeff(n).norm()).fold(0.0, f64::max);
    if mass <= 1e-12 && rest <= 1e-12 {
        return Ok(GeneratorS::rotation(alpha));
    }
    let values: Vec<f64> = grid_angles(grid)
        .iter()
        .map(|&x| {
            let mut acc = mass;
            for n in 1..=k {
                let fejer = 1.0 - n as f64 / (k as f64 + 1.0);
                let coeff = u.coeff(n) * 0.5;
                acc += 2.0 * fejer * (coeff * Complex64::from_polar(1.0, -(n as f64) * x)).re;
            }
            (acc / TAU).max(0.0)
        })
        .collect();
    GeneratorS::herglotz(alpha, CircleMeasure::density(values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::HerglotzField;
    use crate::semigroup::{characteristic_solve, moments_via_characteristics};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn point_masses_multiply() {
        let (a, b) = (0.7, -2.1);
        let m = free_mult_convolve(&CircleMeasure::delta(a), &CircleMeasure::delta(b), 10).unwrap();
        for n in 0..=10 {
            let expected = Complex64::from_polar(1.0, n as f64 * (a + b));
            assert!((m.get(n) - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn point_mass_at_one_is_neutral() {
        let mu = CircleMeasure::atoms(&[0.3, 0.9, -0.4], &[0.5, 0.3, 0.2]).unwrap();
        let d = CircleMeasure::delta_one();
        let k = 10;
        let free = free_mult_convolve(&mu, &d, k).unwrap();
        assert!(free.max_abs_diff(&mu.moments(k)) < 1e-12, "{}", free.max_abs_diff(&mu.moments(k)));
        let mono_right = monotone_convolve(&mu, &d, k).unwrap();
        assert!(mono_right.max_abs_diff(&mu.moments(k)) < 1e-12);
        let mono_left = monotone_convolve(&d, &mu, k).unwrap();
        assert!(mono_left.max_abs_diff(&mu.moments(k)) < 1e-12);
    }

    #[test]
    fn zero_mean_rejected() {
        let mu = CircleMeasure::two_atoms(std::f64::consts::PI);
        assert!(matches!(sigma_transform(&mu, 6), Err(Error::ZeroMeanMeasure { .. })));
    }

    #[test]
    fn rotation_is_divisible() {
        let a = 0.8;
        let r = is_free_infdiv(&CircleMeasure::delta(a), DEFAULT_ORDER, 64).unwrap();
        assert!(r.infinitely_divisible);
        match r.generator.unwrap() {
            GeneratorS::Rotation { alpha } => assert!((alpha - a).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semigroup_marginal_is_divisible() {
        let m0 = CircleMeasure::delta_one().moments(DEFAULT_ORDER + 2).herglotz_series();
        let nu = nu_moments(&m0, &GeneratorS::burgers(), 0.4).unwrap();
        let r = is_free_infdiv_moments(&nu, 64).unwrap();
        assert!(r.infinitely_divisible);
        // log Σ = 0.8 (1+z)/(1-z)
        assert!((r.log_sigma.coeff(0) - c(0.8, 0.0)).norm() < 1e-9);
        assert!((r.log_sigma.coeff(5) - c(1.6, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn semigroup_marginal_matches_characteristic_root() {
        let mu0 = CircleMeasure::atoms(&[0.5, 2.0], &[0.7, 0.3]).unwrap();
        let s = GeneratorS::burgers();
        let t = 0.3;
        let m0 = mu0.moments(30).herglotz_series();
        let eta = nu_moments(&m0, &s, t).unwrap().eta_series();
        let z = c(0.2, -0.15);
        let w = crate::semigroup::eta_semigroup(&mu0, &s, t, z).unwrap();
        assert!((eta.eval(z) - w).norm() < 1e-10);
        let m = characteristic_solve(&mu0, &s, t, z).unwrap();
        assert!((mu0.eval(eta.eval(z)).unwrap() - m).norm() < 1e-9);
    }

    #[test]
    fn subordination_with_reflection() {
        // M_t = M_0 ∘ η_{ν_t} and M_0 = 1 + 2ψ of the reflected measure, so
        // reflected μ_t = reflected μ_0 ▷ ν_t
        let mu0 = CircleMeasure::atoms(&[0.5, 2.0], &[0.7, 0.3]).unwrap();
        let s = GeneratorS::burgers();
        let (t, k) = (0.4, 10);
        let nu = nu_moments(&mu0.moments(k).herglotz_series(), &s, t).unwrap();
        let mono = monotone_convolve_moments(&mu0.moments(k).conj(), &nu).unwrap().conj();
        let direct = moments_via_characteristics(Arc::new(mu0), &s, t, k).unwrap();
        assert!(mono.max_abs_diff(&direct) < 1e-9);
    }

    #[test]
    fn koebe_example() {
        // Σ = 4/(1-z)², so η^{-1}(z) = 4z/(1-z)²
        let k = DEFAULT_ORDER + 2;
        let koebe = SeriesMap::from_fn(k, |n| c(4.0 * n as f64, 0.0));
        let m = MomentSequence::from_eta_series(&koebe.revert().unwrap());
        let r = is_free_infdiv_moments(&m, 64).unwrap();
        assert!(r.infinitely_divisible, "{}", r.min_re);
        // u = log 4 - 2 log(1-z)
        assert!((r.log_sigma.coeff(0) - c(4f64.ln(), 0.0)).norm() < 1e-12);
        for n in 1..=8 {
            assert!((r.log_sigma.coeff(n) - c(2.0 / n as f64, 0.0)).norm() < 1e-8);
        }
        let z = c(0.5, 0.0);
        let u = r.log_sigma.eval(z);
        let f = |t: f64| z * (u * t).exp() / 4f64.powf(t - 1.0);
        assert!((f(1.0) - c(8.0, 0.0)).norm() < 1e-7);
        assert!((f(1.5) - c(16.0, 0.0)).norm() < 1e-7);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn free_convolution_commutes(
            a in prop::collection::vec(-0.6f64..0.6, 1..4),
            b in prop::collection::vec(-0.6f64..0.6, 1..4),
        ) {
            let mu = CircleMeasure::atoms(&a, &vec![1.0 / a.len() as f64; a.len()]).unwrap();
            let nu = CircleMeasure::atoms(&b, &vec![1.0 / b.len() as f64; b.len()]).unwrap();
            let x = free_mult_convolve(&mu, &nu, 10).unwrap();
            let y = free_mult_convolve(&nu, &mu, 10).unwrap();
            prop_assert!(x.max_abs_diff(&y) < 1e-10);
        }
    }
}
