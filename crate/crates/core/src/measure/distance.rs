use super::{CircleMeasure, Representation};
use crate::error::{Error, Result};
use crate::TAU;

/// Right- and left-limits of a CDF on `[0, 2π)` at sorted breakpoints.
fn cdf_at(mu: &CircleMeasure, points: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let inv = 1.0 / mu.total_mass();
    let mut right = vec![0.0; points.len()];
    let mut left = vec![0.0; points.len()];
    match mu.representation() {
        Representation::Atoms { angles, weights } => {
            let mut acc = 0.0;
            let mut j = 0;
            for (i, &p) in points.iter().enumerate() {
                left[i] = acc;
                while j < angles.len() && angles[j] <= p {
                    acc += weights[j] * inv;
                    j += 1;
                }
                right[i] = acc;
            }
        }
        Representation::Density { values } => {
            let g = values.len();
            let h = TAU / g as f64;
            let mut cum = vec![0.0; g + 1];
            for k in 0..g {
                cum[k + 1] = cum[k] + 0.5 * h * (values[k] + values[(k + 1) % g]) * inv;
            }
            for (i, &p) in points.iter().enumerate() {
                let k = ((p / h).floor() as usize).min(g - 1);
                let frac = (p - k as f64 * h) / h;
                let v = cum[k] + frac * (cum[k + 1] - cum[k]);
                left[i] = v;
                right[i] = v;
            }
        }
    }
    (right, left)
}

fn breakpoints(mu: &CircleMeasure, out: &mut Vec<f64>) {
    match mu.representation() {
        Representation::Atoms { angles, .. } => out.extend_from_slice(angles),
        Representation::Density { values } => {
            out.extend(super::grid_angles(values.len()));
        }
    }
}

struct Piece {
    len: f64,
    d0: f64,
    d1: f64,
}

impl Piece {
    fn below(&self, c: f64) -> f64 {
        // length of {D < c} minus length of {D > c}
        let (lo, hi) = if self.d0 <= self.d1 {
            (self.d0, self.d1)
        } else {
            (self.d1, self.d0)
        };
        if c <= lo {
            -self.len
        } else if c >= hi {
            self.len
        } else {
            let f = (c - lo) / (hi - lo);
            self.len * (2.0 * f - 1.0)
        }
    }

    fn abs_integral(&self, c: f64) -> f64 {
        let a = self.d0 - c;
        let b = self.d1 - c;
        if a * b >= 0.0 {
            self.len * 0.5 * (a + b).abs()
        } else {
            self.len * 0.5 * (a * a + b * b) / (b - a).abs()
        }
    }
}

/// Order-1 Wasserstein distance on the circle with arc-length cost,
/// `W₁ = min_c ∫_0^{2π} |F_μ - F_ν - c| dx`. Both measures are normalised
/// by their total mass.
pub fn circle_distance(mu: &CircleMeasure, nu: &CircleMeasure) -> Result<f64> {
    for m in [mu, nu] {
        if !(m.total_mass() > 0.0) {
            return Err(Error::InvalidMeasure(
                "distance needs measures of positive mass".into(),
            ));
        }
    }
    let mut pts = vec![0.0];
    breakpoints(mu, &mut pts);
    breakpoints(nu, &mut pts);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let (fr, fl) = cdf_at(mu, &pts);
    let (gr, gl) = cdf_at(nu, &pts);
    let mut pieces = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        let (end, d1) = if i + 1 < pts.len() {
            (pts[i + 1], fl[i + 1] - gl[i + 1])
        } else {
            (TAU, 0.0)
        };
        let len = end - pts[i];
        if len > 0.0 {
            pieces.push(Piece {
                len,
                d0: fr[i] - gr[i],
                d1,
            });
        }
    }
    let mut lo = pieces.iter().map(|p| p.d0.min(p.d1)).fold(f64::INFINITY, f64::min);
    let mut hi = pieces.iter().map(|p| p.d0.max(p.d1)).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let slope: f64 = pieces.iter().map(|p| p.below(mid)).sum();
        if slope < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    Ok(pieces.iter().map(|p| p.abs_integral(c)).sum())
}
