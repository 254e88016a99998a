//! Adaptive Dormand–Prince 5(4) integration for complex systems.
//!
//! The right-hand side may refuse a stage by returning an error (for
//! example when a stage point leaves the disc); the step is then rejected
//! and retried with a quarter of the step size.

use crate::error::{Error, Result};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-3,
            h_min: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed(Vec<Complex64>),
    /// The guard requested a stop after an accepted step.
    Stopped { t: f64, state: Vec<Complex64> },
    /// Step size fell below `h_min`; `state` is the last accepted state.
    Underflow { t: f64, state: Vec<Complex64> },
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `y' = f(t, y)` from `t0` to `t1` (either direction).
/// `guard(t, y)` is called after every accepted step; returning `true`
/// stops the integration.
pub fn integrate<F, G>(
    mut f: F,
    t0: f64,
    t1: f64,
    y0: &[Complex64],
    opts: &OdeOptions,
    mut guard: G,
) -> Result<Outcome>
where
    F: FnMut(f64, &[Complex64], &mut [Complex64]) -> Result<()>,
    G: FnMut(f64, &[Complex64]) -> bool,
{
    let n = y0.len();
    let mut y = y0.to_vec();
    if t1 == t0 {
        return Ok(Outcome::Completed(y));
    }
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let zero = Complex64::new(0.0, 0.0);
    let mut k: [Vec<Complex64>; 7] = std::array::from_fn(|_| vec![zero; n]);
    let mut tmp = vec![zero; n];
    let mut y_new = vec![zero; n];

    let mut t = t0;
    let mut h = opts.h_init.min(span);
    let mut have_k1 = false;
    let mut steps = 0usize;

    loop {
        let remaining = (t1 - t).abs();
        if remaining <= 1e-15 * span.max(1.0) {
            return Ok(Outcome::Completed(y));
        }
        if steps >= opts.max_steps {
            return Err(Error::Solver {
                t,
                reason: format!("exceeded {} steps", opts.max_steps),
            });
        }
        steps += 1;
        let last = h >= remaining;
        let hs = if last { remaining } else { h } * dir;

        if !have_k1 {
            if let Err(e) = f(t, &y, &mut k[0]) {
                return Err(Error::Solver {
                    t,
                    reason: format!("right-hand side failed at an accepted state: {e}"),
                });
            }
            have_k1 = true;
        }

        let attempt = (|| -> Result<f64> {
            let (k0, rest) = k.split_at_mut(1);
            let k1 = &k0[0];
            let [k2, k3, k4, k5, k6, k7] = rest else {
                unreachable!()
            };
            for i in 0..n {
                tmp[i] = y[i] + k1[i] * (hs * A21);
            }
            f(t + C2 * hs, &tmp, k2)?;
            for i in 0..n {
                tmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * hs;
            }
            f(t + C3 * hs, &tmp, k3)?;
            for i in 0..n {
                tmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * hs;
            }
            f(t + C4 * hs, &tmp, k4)?;
            for i in 0..n {
                tmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * hs;
            }
            f(t + C5 * hs, &tmp, k5)?;
            for i in 0..n {
                tmp[i] = y[i]
                    + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * hs;
            }
            f(t + hs, &tmp, k6)?;
            for i in 0..n {
                y_new[i] = y[i]
                    + (k1[i] * B1 + k3[i] * B3 + k4[i] * B4 + k5[i] * B5 + k6[i] * B6) * hs;
            }
            f(t + hs, &y_new, k7)?;
            let mut err: f64 = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7)
                    * hs;
                let scale = opts.atol + opts.rtol * y[i].norm().max(y_new[i].norm());
                err = err.max(e.norm() / scale);
            }
            if err.is_finite() {
                Ok(err)
            } else {
                Err(Error::Solver {
                    t,
                    reason: "non-finite error estimate".into(),
                })
            }
        })();

        match attempt {
            Ok(err) if err <= 1.0 => {
                t = if last { t1 } else { t + hs };
                std::mem::swap(&mut y, &mut y_new);
                k.swap(0, 6);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    h *= factor;
                } else {
                    h = h.max(remaining * factor);
                }
                if guard(t, &y) {
                    return Ok(Outcome::Stopped { t, state: y });
                }
            }
            Ok(err) => {
                h = hs.abs() * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
            }
            Err(_) => {
                h = hs.abs() * 0.25;
            }
        }
        if h < opts.h_min {
            return Ok(Outcome::Underflow { t, state: y });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn exponential_growth() {
        let out = integrate(
            |_, y, dy| {
                dy[0] = y[0] * c(0.0, 1.0);
                Ok(())
            },
            0.0,
            3.0,
            &[c(1.0, 0.0)],
            &OdeOptions::default(),
            |_, _| false,
        )
        .unwrap();
        let Outcome::Completed(y) = out else { panic!() };
        assert!((y[0] - Complex64::from_polar(1.0, 3.0)).norm() < 1e-9);
    }

    #[test]
    fn backward_direction() {
        let out = integrate(
            |_, y, dy| {
                dy[0] = y[0];
                Ok(())
            },
            1.0,
            0.0,
            &[c(std::f64::consts::E, 0.0)],
            &OdeOptions::default(),
            |_, _| false,
        )
        .unwrap();
        let Outcome::Completed(y) = out else { panic!() };
        assert!((y[0] - c(1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn guard_stops() {
        let out = integrate(
            |_, _, dy| {
                dy[0] = c(1.0, 0.0);
                Ok(())
            },
            0.0,
            10.0,
            &[c(0.0, 0.0)],
            &OdeOptions::default(),
            |_, y| y[0].re > 2.0,
        )
        .unwrap();
        match out {
            Outcome::Stopped { t, state } => {
                assert!(t > 2.0 && t < 10.0);
                assert!((state[0].re - t).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn blowup_underflows() {
        // y' = y², y(0) = 1 blows up at t = 1
        let out = integrate(
            |_, y, dy| {
                dy[0] = y[0] * y[0];
                if dy[0].norm() > 1e200 {
                    return Err(Error::Internal("overflow".into()));
                }
                Ok(())
            },
            0.0,
            2.0,
            &[c(1.0, 0.0)],
            &OdeOptions::default(),
            |_, _| false,
        )
        .unwrap();
        match out {
            Outcome::Underflow { t, .. } => assert!((t - 1.0).abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }
}
