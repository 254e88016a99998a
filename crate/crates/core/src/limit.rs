//! Diagnostics linking particle systems to their deterministic limit.

use crate::error::{Error, Result};
use crate::measure::{
    canonical_angle, circle_distance, invert_density, smoothed_density, CircleMeasure,
    HerglotzField, Representation,
};
use crate::sde::{build_l, simulate, ParticleState, SimulationConfig, WeightProfile, WeightSpec};
use crate::semigroup::{GeneratorS, LimitField};
use crate::{Complex64, TAU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Points scanned before golden-section refinement.
pub const SCAN_POINTS: usize = 4096;
/// Radius of the Poisson-smoothed limit density used for distances.
pub const LIMIT_RADIUS: f64 = 1.0 - 1e-4;
/// Density level counted as strictly positive.
pub const POSITIVE_DENSITY: f64 = 1e-6;
const SUPPORT_EPS: f64 = 1e-9;
const GOLDEN_TOL: f64 = 1e-12;

fn arc_distance(a: f64, b: f64) -> f64 {
    let d = canonical_angle(a - b);
    d.min(TAU - d)
}

/// Atoms in counter-clockwise order from angle 0, with their cumulative
/// masses (inclusive).
fn cdf_at_atoms(m: &CircleMeasure) -> Result<(Vec<f64>, Vec<f64>)> {
    match m.representation() {
        Representation::Atoms { angles, weights } => {
            let total = m.total_mass();
            let mut acc = 0.0;
            let cdf = weights
                .iter()
                .map(|w| {
                    acc += w;
                    acc / total
                })
                .collect();
            Ok((angles.clone(), cdf))
        }
        Representation::Density { .. } => Err(Error::MismatchedSupports(
            "cdf relation needs atomic measures".into(),
        )),
    }
}

/// `max |F(x) - L(G(x))|` over the atoms, with both distribution functions
/// taken on the arc from 1 counter-clockwise to `x`.
pub fn cdf_relation_check(mu: &CircleMeasure, alpha: &CircleMeasure, l: &WeightProfile) -> Result<f64> {
    let (xa, f) = cdf_at_atoms(mu)?;
    let (xb, g) = cdf_at_atoms(alpha)?;
    if xa.len() != xb.len() {
        return Err(Error::MismatchedSupports(format!(
            "{} atoms against {}",
            xa.len(),
            xb.len()
        )));
    }
    if let Some((a, b)) = xa.iter().zip(&xb).find(|(a, b)| arc_distance(**a, **b) > 1e-12) {
        return Err(Error::MismatchedSupports(format!("atom at {a} against {b}")));
    }
    Ok(f.iter()
        .zip(&g)
        .map(|(f, g)| (f - l.eval(*g)).abs())
        .fold(0.0, f64::max))
}

/// `L_N` for particles relabelled counter-clockwise from angle 0.
///
/// Labels in the definition of `L_N` start at the first particle after 1;
/// as the cloud rotates the labelling shifts cyclically.
pub fn reference_profile(state: &ParticleState) -> WeightProfile {
    let mut idx: Vec<usize> = (0..state.n()).collect();
    idx.sort_by(|&a, &b| canonical_angle(state.theta[a]).total_cmp(&canonical_angle(state.theta[b])));
    let lambda: Vec<f64> = idx.iter().map(|&k| state.lambda[k]).collect();
    build_l(&lambda)
}

/// `V_0'(x) = ∫ 1/(cos(s - x) - 1) μ'(ds)`.
pub fn v0_derivative(mu: &CircleMeasure, x: f64) -> Result<f64> {
    let mut acc = 0.0;
    for (s, w) in mu.nodes() {
        if w <= 0.0 {
            continue;
        }
        let d = arc_distance(s, x);
        if d < SUPPORT_EPS {
            return Err(Error::InsideSupport { x });
        }
        // cos(d) - 1 = -2 sin²(d/2), exact near the support
        let h = (0.5 * d).sin();
        acc -= w / (2.0 * h * h);
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportTimeResult {
    #[serde(rename = "T")]
    pub t: f64,
    pub argmin_x: f64,
    pub m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SupportTime {
    At(SupportTimeResult),
    AlreadyFull,
}

/// Distance from `x` to the nearest node carrying mass.
fn support_distance(nodes: &[(f64, f64)], x: f64) -> f64 {
    nodes
        .iter()
        .filter(|(_, w)| *w > 0.0)
        .map(|(s, _)| arc_distance(*s, x))
        .fold(f64::INFINITY, f64::min)
}

/// First time the support of `μ_t` is the whole circle under `S(w) = 2w`:
/// `T = 1/(2m)` with `m = min |V_0'|` off the support.
pub fn support_time(mu0: &CircleMeasure) -> Result<SupportTime> {
    mu0.require_probability()?;
    let resolution = TAU / SCAN_POINTS as f64;
    // a density cell counts as support out to half a cell
    let (full, exclusion) = match mu0.representation() {
        Representation::Atoms { .. } => (mu0.largest_gap() < resolution, SUPPORT_EPS),
        Representation::Density { values } => (
            mu0.largest_gap() <= 0.0,
            0.5 * TAU / values.len() as f64 + SUPPORT_EPS,
        ),
    };
    if full {
        return Ok(SupportTime::AlreadyFull);
    }
    let nodes = mu0.nodes();
    let objective = |x: f64| -> Option<f64> {
        if support_distance(&nodes, x) <= exclusion {
            return None;
        }
        v0_derivative(mu0, x).ok().map(f64::abs)
    };
    let xs: Vec<f64> = (0..SCAN_POINTS)
        .map(|j| (j as f64 + 0.5) * resolution)
        .collect();
    let vals: Vec<Option<f64>> = xs.par_iter().map(|&x| objective(x)).collect();
    let (best, _) = vals
        .iter()
        .enumerate()
        .filter_map(|(j, v)| v.map(|v| (j, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::Internal(
            "no scan point lies outside the support".into(),
        ))?;
    let mut a = xs[best] - resolution;
    let mut b = xs[best] + resolution;
    let f = |x: f64| objective(x).unwrap_or(f64::INFINITY);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > GOLDEN_TOL {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    let (x, m) = if f(x) <= vals[best].unwrap() {
        (x, f(x))
    } else {
        (xs[best], vals[best].unwrap())
    };
    Ok(SupportTime::At(SupportTimeResult {
        t: 1.0 / (2.0 * m),
        argmin_x: canonical_angle(x),
        m,
    }))
}

/// First `t` in `t_grid` at which the boundary density of `μ_t` exists and
/// exceeds `1e-6` everywhere on a grid of `grid_size` points; `+∞` when
/// no grid time qualifies.
pub fn full_support_detect(
    m0: Arc<dyn HerglotzField>,
    s: &GeneratorS,
    t_grid: &[f64],
    grid_size: usize,
) -> Result<f64> {
    Ok(full_support_density(m0, s, t_grid, grid_size)?
        .map(|(t, _)| t)
        .unwrap_or(f64::INFINITY))
}

/// Like [`full_support_detect`], also returning the density found.
pub fn full_support_density(
    m0: Arc<dyn HerglotzField>,
    s: &GeneratorS,
    t_grid: &[f64],
    grid_size: usize,
) -> Result<Option<(f64, CircleMeasure)>> {
    for &t in t_grid {
        let field = LimitField::new(m0.clone(), s.clone(), t)?;
        match invert_density(&field, grid_size) {
            Ok(density) => {
                if let Representation::Density { values } = density.representation() {
                    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
                    log::debug!("t = {t}: min boundary density {min:e}");
                    if min > POSITIVE_DENSITY {
                        return Ok(Some((t, density)));
                    }
                }
            }
            Err(e) => log::debug!("t = {t}: no boundary density ({e})"),
        }
    }
    Ok(None)
}

/// Largest jump between neighbouring grid values of a density.
pub fn density_oscillation(mu: &CircleMeasure) -> f64 {
    match mu.representation() {
        Representation::Density { values } => {
            let g = values.len();
            (0..g)
                .map(|k| (values[(k + 1) % g] - values[k]).abs())
                .fold(0.0, f64::max)
        }
        Representation::Atoms { .. } => f64::INFINITY,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEntry {
    pub n: usize,
    pub t: f64,
    /// `W₁` between the run-averaged `α_{N,t}` and `μ_t`.
    pub w1: f64,
    /// Jackknife standard error of `w1` over runs.
    pub w1_se: f64,
    pub m1_re: f64,
    pub m1_im: f64,
    pub m1_se_re: f64,
    pub m1_se_im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub n_list: Vec<usize>,
    pub record_times: Vec<f64>,
    pub n_runs: usize,
    pub entries: Vec<ConvergenceEntry>,
}

impl ConvergenceReport {
    pub fn entry(&self, n: usize, t: f64) -> Option<&ConvergenceEntry> {
        self.entries
            .iter()
            .find(|e| e.n == n && (e.t - t).abs() < 1e-12)
    }

    /// Whether `w1` does not increase along `n_list` at time `t`, allowing
    /// `k` standard errors of each difference.
    pub fn nonincreasing(&self, t: f64, k: f64) -> bool {
        let row: Vec<&ConvergenceEntry> = self
            .n_list
            .iter()
            .filter_map(|&n| self.entry(n, t))
            .collect();
        row.windows(2).all(|w| {
            let se = (w[0].w1_se.powi(2) + w[1].w1_se.powi(2)).sqrt();
            w[1].w1 <= w[0].w1 + k * se
        })
    }
}

fn mixture(parts: &[&CircleMeasure]) -> Result<CircleMeasure> {
    let mut angles = Vec::new();
    let mut weights = Vec::new();
    let scale = 1.0 / parts.len() as f64;
    for m in parts {
        for (a, w) in m.nodes() {
            angles.push(a);
            weights.push(w * scale);
        }
    }
    CircleMeasure::atoms(&angles, &weights)
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `base` at every `N` of `n_list` (equal weights only) and compares
/// the run-averaged empirical measure with `μ_t` of the limit started at
/// `m0` under `s`.
pub fn convergence_study(
    base: &SimulationConfig,
    n_list: &[usize],
    m0: Arc<dyn HerglotzField>,
    s: &GeneratorS,
    grid: usize,
) -> Result<ConvergenceReport> {
    if base.weights != WeightSpec::Equal {
        return Err(Error::InvalidInput(
            "convergence study needs equal weights".into(),
        ));
    }
    if base.record_times.is_empty() {
        return Err(Error::InvalidInput("no record times".into()));
    }
    let mut times = base.record_times.clone();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let limits: Vec<CircleMeasure> = times
        .iter()
        .map(|&t| {
            let field = LimitField::new(m0.clone(), s.clone(), t)?;
            smoothed_density(&field, grid, LIMIT_RADIUS)
        })
        .collect::<Result<_>>()?;
    let mut entries = Vec::new();
    for &n in n_list {
        let cfg = SimulationConfig {
            n,
            record_times: times.clone(),
            keep_path: false,
            ..base.clone()
        };
        let runs = simulate(&cfg)?;
        let r = runs.len();
        for (i, &t) in times.iter().enumerate() {
            let alphas: Vec<&CircleMeasure> = runs.iter().map(|run| &run.snapshots[i].alpha).collect();
            let w1 = circle_distance(&mixture(&alphas)?, &limits[i])?;
            let w1_se = if r < 2 {
                0.0
            } else {
                let loo: Vec<f64> = (0..r)
                    .into_par_iter()
                    .map(|skip| {
                        let rest: Vec<&CircleMeasure> = alphas
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != skip)
                            .map(|(_, a)| *a)
                            .collect();
                        circle_distance(&mixture(&rest)?, &limits[i])
                    })
                    .collect::<Result<_>>()?;
                let mean = loo.iter().sum::<f64>() / r as f64;
                let ss: f64 = loo.iter().map(|x| (x - mean).powi(2)).sum();
                ((r as f64 - 1.0) / r as f64 * ss).sqrt()
            };
            let m1: Vec<Complex64> = alphas.iter().map(|a| a.moments(1).get(1)).collect();
            let (m1_re, m1_se_re) = mean_se(&m1.iter().map(|z| z.re).collect::<Vec<_>>());
            let (m1_im, m1_se_im) = mean_se(&m1.iter().map(|z| z.im).collect::<Vec<_>>());
            entries.push(ConvergenceEntry {
                n,
                t,
                w1,
                w1_se,
                m1_re,
                m1_im,
                m1_se_re,
                m1_se_im,
            });
        }
    }
    Ok(ConvergenceReport {
        n_list: n_list.to_vec(),
        record_times: times,
        n_runs: base.n_runs,
        entries,
    })
}
