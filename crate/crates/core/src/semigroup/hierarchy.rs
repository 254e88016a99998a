use super::characteristic::{taylor_coefficients, LimitField};
use super::GeneratorS;
use crate::error::{Error, Result};
use crate::measure::{HerglotzField, MomentSequence};
use crate::ode::{integrate, OdeOptions, Outcome};
use crate::series::{cayley, inverse_cayley, SeriesMap};
use num_complex::Complex64;
use std::sync::Arc;

type Poly = Vec<Complex64>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Complex64::new(0.0, 0.0); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add_scaled(acc: &mut Poly, p: &Poly, s: Complex64) {
    if acc.len() < p.len() {
        acc.resize(p.len(), Complex64::new(0.0, 0.0));
    }
    for (a, x) in acc.iter_mut().zip(p) {
        *a += x * s;
    }
}

fn poly_eval(p: &Poly, t: f64) -> Complex64 {
    p.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * t + c)
}

/// Coefficients of `η_t = (M_t - 1)/(M_t + 1)` from those of `η_0` and of
/// `u(z) = Σ b_m z^m`.
///
/// Writing `a_n(t) = e^{-n b_0 t} P_n(t)`, the triangular system
/// `ȧ_n = -Σ_m b_m n/(m+1) [z^n] η^{m+1}` becomes
/// `P_n' = -Σ_{m≥1} b_m n/(m+1) [z^n] P^{m+1}`, whose right-hand side only
/// involves `P_1..P_{n-1}`. Each `P_n` is a polynomial in `t` and is
/// integrated exactly.
pub fn coefficient_ode(eta0: &SeriesMap, u: &SeriesMap, k: usize, t: f64) -> SeriesMap {
    let k = k.min(eta0.order());
    let zero = Complex64::new(0.0, 0.0);
    let b = |m: usize| u.coeff(m);
    // pow[m][n] = [z^n] P^m as a polynomial in t
    let mut pow: Vec<Vec<Poly>> = vec![vec![Vec::new(); k + 1]; k + 1];
    let mut p: Vec<Poly> = vec![Vec::new(); k + 1];
    for n in 1..=k {
        for m in 2..=n {
            let mut acc = Poly::new();
            for j in 1..n {
                let rest = &pow[m - 1][n - j];
                if !rest.is_empty() && !p[j].is_empty() {
                    let prod = poly_mul(&p[j], rest);
                    poly_add_scaled(&mut acc, &prod, Complex64::new(1.0, 0.0));
                }
            }
            pow[m][n] = acc;
        }
        let mut rhs = Poly::new();
        for m in 1..n {
            let coeff = b(m) * (n as f64 / (m as f64 + 1.0));
            poly_add_scaled(&mut rhs, &pow[m + 1][n], -coeff);
        }
        let mut pn = vec![eta0.coeff(n)];
        for (i, c) in rhs.iter().enumerate() {
            pn.push(c / (i as f64 + 1.0));
        }
        while pn.len() > 1 && pn.last() == Some(&zero) {
            pn.pop();
        }
        pow[1][n] = pn.clone();
        p[n] = pn;
    }
    let b0 = b(0);
    SeriesMap::from_fn(k, |n| {
        if n == 0 {
            zero
        } else {
            (-b0 * (n as f64 * t)).exp() * poly_eval(&p[n], t)
        }
    })
}

/// Moments of `μ_t` under `S(w) = 2w`, from
/// `dm_n/dt = -2n m_n - 2n Σ_{j=1}^{n-1} m_j m_{n-j}`.
///
/// With `f(x) = x^n`, `(x f'(x) - y f'(y))(x + y)/(x - y)` equals
/// `n (x^n + y^n + 2 Σ_{j=1}^{n-1} x^j y^{n-j})`; integrating against
/// `μ_t ⊗ μ_t` gives the system.
pub fn moment_hierarchy(m0: &MomentSequence, t: f64, k: usize) -> Result<MomentSequence> {
    if k > m0.order() {
        return Err(Error::InvalidInput(format!(
            "need moments up to order {k}, got {}",
            m0.order()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("time must be >= 0, got {t}")));
    }
    let y0: Vec<Complex64> = m0.values()[1..=k].to_vec();
    let opts = OdeOptions {
        rtol: 1e-13,
        atol: 1e-22,
        h_init: 1e-3,
        ..OdeOptions::default()
    };
    let rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
        for n in 1..=y.len() {
            let mut conv = Complex64::new(0.0, 0.0);
            for j in 1..n {
                conv += y[j - 1] * y[n - j - 1];
            }
            dy[n - 1] = -(y[n - 1] + conv) * (2.0 * n as f64);
        }
        Ok(())
    };
    let y = match integrate(rhs, 0.0, t, &y0, &opts, |_, _| false)? {
        Outcome::Completed(y) => y,
        Outcome::Stopped { t, .. } | Outcome::Underflow { t, .. } => {
            return Err(Error::Solver {
                t,
                reason: "moment hierarchy integration stalled".into(),
            })
        }
    };
    let mut m = vec![m0.get(0)];
    m.extend(y);
    Ok(MomentSequence::new(m))
}

/// Moments of `μ_t` read off the Taylor series of the characteristics
/// solution on the circle `|z| = 0.7`.
pub fn moments_via_characteristics(
    m0: Arc<dyn HerglotzField>,
    s: &GeneratorS,
    t: f64,
    k: usize,
) -> Result<MomentSequence> {
    let field = LimitField::new(m0, s.clone(), t)?;
    let g = 128.max(4 * k + 4);
    let series = taylor_coefficients(&field, k, 0.7, g)?;
    Ok(MomentSequence::from_herglotz_series(&series))
}

/// Moments of `μ_t` via the exact coefficient recursion.
pub fn moments_via_coefficients(
    m0: &MomentSequence,
    s: &GeneratorS,
    t: f64,
    k: usize,
) -> Result<MomentSequence> {
    let k = k.min(m0.order());
    let herglotz = m0.herglotz_series().truncate(k);
    let eta0 = inverse_cayley(&herglotz)?;
    let eta_t = coefficient_ode(&eta0, &s.u_series(k), k, t);
    let mt = cayley(&eta_t)?;
    Ok(MomentSequence::from_herglotz_series(&mt))
}

/// `sup_{|z| = radius} |M_t(z) - 1|` for each `t`, which by the maximum
/// principle bounds the deviation on the closed disc of that radius.
pub fn long_time_limit_check(
    m0: Arc<dyn HerglotzField>,
    s: &GeneratorS,
    t_list: &[f64],
    radius: f64,
) -> Result<Vec<f64>> {
    if s.is_rotation() {
        return Err(Error::InvalidInput(
            "a pure rotation generator has no long-time limit".into(),
        ));
    }
    const POINTS: usize = 256;
    let mut out = Vec::with_capacity(t_list.len());
    for &t in t_list {
        let field = LimitField::new(m0.clone(), s.clone(), t)?;
        let mut sup: f64 = 0.0;
        for j in 0..POINTS {
            let z = Complex64::from_polar(radius, std::f64::consts::TAU * j as f64 / POINTS as f64);
            sup = sup.max((field.eval(z)? - Complex64::new(1.0, 0.0)).norm());
        }
        out.push(sup);
    }
    Ok(out)
}
