//! Forward and reverse radial Loewner flows driven by measures.
//!
//! The forward map solves `dg/dt = g H(g, t)` with
//! `H(w, t) = ∫ (x + w)/(x - w) dβ_t(x)`; the reverse flow solves
//! `dh/ds = -h H(h, t - s)` and returns `g_t^{-1}`.

use crate::error::{Error, Result};
use crate::measure::{CircleMeasure, HerglotzField, SeriesField};
use crate::series::SeriesMap;
use crate::ode::{integrate, OdeOptions, Outcome};
use crate::semigroup::{GeneratorS, LimitField};
use crate::TAU;
use num_complex::Complex64;
use rayon::prelude::*;
use std::sync::Arc;

pub const SWALLOW_EPS: f64 = 1e-6;
pub const TIP_OFFSET: f64 = 1e-4;
pub const BOUNDARY_DELTA: f64 = 1e-3;
pub const FLOW_TOL: f64 = 1e-10;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Driving data on one time interval.
#[derive(Clone)]
pub enum Driver {
    /// Atoms with particle identity; angles may be unwrapped.
    Particles { angles: Vec<f64>, weights: Vec<f64> },
    Measure(CircleMeasure),
    /// A driving measure given only through its Herglotz integral.
    Field(Arc<dyn HerglotzField>),
}

impl std::fmt::Debug for Driver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Particles { angles, weights } => f
                .debug_struct("Particles")
                .field("angles", angles)
                .field("weights", weights)
                .finish(),
            Self::Measure(m) => f.debug_tuple("Measure").field(m).finish(),
            Self::Field(_) => f.write_str("Field(..)"),
        }
    }
}

impl Driver {
    /// The uniform measure, with its exact field `H ≡ 1`.
    pub fn uniform() -> Self {
        Self::Field(Arc::new(SeriesField::new(SeriesMap::constant(ONE, 0))))
    }

    pub fn measure(&self) -> Result<CircleMeasure> {
        match self {
            Self::Particles { angles, weights } => CircleMeasure::atoms(angles, weights),
            Self::Measure(m) => Ok(m.clone()),
            Self::Field(_) => Err(Error::InvalidInput(
                "a field driver carries no explicit measure".into(),
            )),
        }
    }

    pub fn total_mass(&self) -> f64 {
        match self {
            Self::Particles { weights, .. } => weights.iter().sum(),
            Self::Measure(m) => m.total_mass(),
            Self::Field(f) => f.eval(Complex64::new(0.0, 0.0)).map(|v| v.re).unwrap_or(f64::NAN),
        }
    }
}

/// Precomputed kernel for one driver.
enum Kernel {
    Nodes {
        nodes: Vec<(Complex64, f64)>,
        atoms: bool,
    },
    Field(Arc<dyn HerglotzField>),
}

impl Kernel {
    fn new(d: &Driver) -> Self {
        match d {
            Driver::Particles { angles, weights } => Self::Nodes {
                nodes: angles
                    .iter()
                    .zip(weights)
                    .map(|(a, w)| (Complex64::from_polar(1.0, *a), *w))
                    .collect(),
                atoms: true,
            },
            Driver::Measure(m) => Self::Nodes {
                nodes: m
                    .nodes()
                    .into_iter()
                    .map(|(a, w)| (Complex64::from_polar(1.0, a), w))
                    .collect(),
                atoms: m.is_atomic(),
            },
            Driver::Field(f) => Self::Field(f.clone()),
        }
    }

    fn field(&self, w: Complex64) -> Result<Complex64> {
        match self {
            Self::Nodes { nodes, .. } => {
                let v: Complex64 = nodes.iter().map(|(x, m)| (x + w) / (x - w) * *m).sum();
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Internal("non-finite driving field".into()))
                }
            }
            Self::Field(f) => f.eval(w),
        }
    }

    fn field_and_derivative(&self, w: Complex64) -> Result<(Complex64, Complex64)> {
        match self {
            Self::Nodes { nodes, .. } => {
                let mut h = Complex64::new(0.0, 0.0);
                let mut dh = Complex64::new(0.0, 0.0);
                for (x, m) in nodes {
                    let inv = ONE / (x - w);
                    h += (x + w) * inv * *m;
                    dh += x * inv * inv * (2.0 * m);
                }
                Ok((h, dh))
            }
            Self::Field(f) => f.eval_with_derivative(w),
        }
    }

    fn atom_distance(&self, w: Complex64) -> f64 {
        match self {
            Self::Nodes { nodes, atoms: true } => nodes
                .iter()
                .map(|(x, _)| (x - w).norm())
                .fold(f64::INFINITY, f64::min),
            _ => f64::INFINITY,
        }
    }
}

/// Time-indexed driving measures.
#[derive(Clone)]
pub enum DrivingPath {
    /// `drivers[i]` is frozen on `[times[i], times[i+1])`.
    Piecewise { times: Vec<f64>, drivers: Vec<Driver> },
    /// The deterministic limit `μ_t` of the Burgers–Loewner equation.
    Limit {
        m0: Arc<dyn HerglotzField>,
        s: GeneratorS,
        t_end: f64,
    },
}

impl std::fmt::Debug for DrivingPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Piecewise { times, drivers } => f
                .debug_struct("Piecewise")
                .field("times", times)
                .field("drivers", drivers)
                .finish(),
            Self::Limit { s, t_end, .. } => f
                .debug_struct("Limit")
                .field("s", s)
                .field("t_end", t_end)
                .finish_non_exhaustive(),
        }
    }
}

impl DrivingPath {
    pub fn piecewise(times: Vec<f64>, drivers: Vec<Driver>) -> Result<Self> {
        if times.len() != drivers.len() + 1 || drivers.is_empty() {
            return Err(Error::InvalidInput(
                "a piecewise path needs one more time than drivers".into(),
            ));
        }
        if times[0] != 0.0 || times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput(
                "path times must start at 0 and increase strictly".into(),
            ));
        }
        for d in &drivers {
            if (d.total_mass() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidMeasure(format!(
                    "driving measures must be probability measures, got mass {}",
                    d.total_mass()
                )));
            }
        }
        Ok(Self::Piecewise { times, drivers })
    }

    pub fn uniform(t_end: f64) -> Result<Self> {
        Self::piecewise(vec![0.0, t_end], vec![Driver::uniform()])
    }

    /// A single measure used for all times up to `t_end`.
    pub fn constant(m: CircleMeasure, t_end: f64) -> Result<Self> {
        Self::piecewise(vec![0.0, t_end], vec![Driver::Measure(m)])
    }

    pub fn limit(m0: Arc<dyn HerglotzField>, s: GeneratorS, t_end: f64) -> Self {
        Self::Limit { m0, s, t_end }
    }

    pub fn end_time(&self) -> f64 {
        match self {
            Self::Piecewise { times, .. } => *times.last().unwrap(),
            Self::Limit { t_end, .. } => *t_end,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) || t > self.end_time() * (1.0 + 1e-12) {
            return Err(Error::InvalidInput(format!(
                "time {t} outside the path range [0, {}]",
                self.end_time()
            )));
        }
        Ok(())
    }

    /// Index of the segment active just before `t` (the first one for `t = 0`).
    pub fn segment_before(&self, t: f64) -> Option<usize> {
        match self {
            Self::Piecewise { times, .. } => {
                let idx = times.partition_point(|&s| s < t);
                Some(idx.saturating_sub(1).min(times.len() - 2))
            }
            Self::Limit { .. } => None,
        }
    }

    pub fn driver(&self, i: usize) -> Option<&Driver> {
        match self {
            Self::Piecewise { drivers, .. } => drivers.get(i),
            Self::Limit { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FlowOutcome {
    Value(Complex64),
    Swallowed(f64),
}

fn opts() -> OdeOptions {
    OdeOptions {
        rtol: FLOW_TOL,
        atol: 1e-13,
        h_init: 1e-4,
        h_min: 1e-15,
        ..OdeOptions::default()
    }
}

fn near_boundary(w: Complex64, k: &Kernel) -> bool {
    1.0 - w.norm() < SWALLOW_EPS || k.atom_distance(w) < SWALLOW_EPS
}

/// `g_{t_end}(z0)`, or the time at which `z0` is swallowed.
pub fn forward_flow(path: &DrivingPath, z0: Complex64, t_end: f64) -> Result<FlowOutcome> {
    if !(z0.norm() < 1.0) {
        return Err(Error::Domain { re: z0.re, im: z0.im });
    }
    path.check_time(t_end)?;
    if t_end == 0.0 {
        return Ok(FlowOutcome::Value(z0));
    }
    match path {
        DrivingPath::Piecewise { times, drivers } => {
            let mut g = z0;
            for (i, d) in drivers.iter().enumerate() {
                let (a, b) = (times[i], times[i + 1].min(t_end));
                if a >= t_end {
                    break;
                }
                let k = Kernel::new(d);
                let rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
                    if !(y[0].norm() < 1.0) {
                        return Err(Error::Domain { re: y[0].re, im: y[0].im });
                    }
                    dy[0] = y[0] * k.field(y[0])?;
                    Ok(())
                };
                match integrate(rhs, a, b, &[g], &opts(), |_, y| near_boundary(y[0], &k))? {
                    Outcome::Completed(y) => g = y[0],
                    Outcome::Stopped { t, .. } => return Ok(FlowOutcome::Swallowed(t)),
                    Outcome::Underflow { t, state } => {
                        if 1.0 - state[0].norm() < 1e-3 || k.atom_distance(state[0]) < 1e-3 {
                            return Ok(FlowOutcome::Swallowed(t));
                        }
                        return Err(Error::Solver {
                            t,
                            reason: "step size underflow away from the boundary".into(),
                        });
                    }
                }
            }
            Ok(FlowOutcome::Value(g))
        }
        DrivingPath::Limit { m0, s, .. } => {
            let base = LimitField::new(m0.clone(), s.clone(), 0.0)?;
            let rhs = |t: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
                dy[0] = y[0] * base.at_time(t.max(0.0))?.eval(y[0])?;
                Ok(())
            };
            let far = Kernel::Nodes {
                nodes: Vec::new(),
                atoms: false,
            };
            match integrate(rhs, 0.0, t_end, &[z0], &opts(), |_, y| near_boundary(y[0], &far))? {
                Outcome::Completed(y) => Ok(FlowOutcome::Value(y[0])),
                Outcome::Stopped { t, .. } => Ok(FlowOutcome::Swallowed(t)),
                Outcome::Underflow { t, state } => {
                    if 1.0 - state[0].norm() < 1e-3 {
                        Ok(FlowOutcome::Swallowed(t))
                    } else {
                        Err(Error::Solver {
                            t,
                            reason: "step size underflow away from the boundary".into(),
                        })
                    }
                }
            }
        }
    }
}

/// `g_t'(0)` from the variational equation along the fixed point `g = 0`.
pub fn derivative_at_zero(path: &DrivingPath, t: f64) -> Result<Complex64> {
    path.check_time(t)?;
    let zero = Complex64::new(0.0, 0.0);
    let mut state = [zero, ONE];
    let mut step = |a: f64, b: f64, field: &dyn Fn(f64, Complex64) -> Result<(Complex64, Complex64)>| -> Result<()> {
        let rhs = |tt: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
            let (h, dh) = field(tt, y[0])?;
            dy[0] = y[0] * h;
            dy[1] = y[1] * (h + y[0] * dh);
            Ok(())
        };
        match integrate(rhs, a, b, &state, &opts(), |_, _| false)? {
            Outcome::Completed(y) => {
                state = [y[0], y[1]];
                Ok(())
            }
            Outcome::Stopped { t, .. } | Outcome::Underflow { t, .. } => Err(Error::Solver {
                t,
                reason: "variational equation stalled".into(),
            }),
        }
    };
    match path {
        DrivingPath::Piecewise { times, drivers } => {
            for (i, d) in drivers.iter().enumerate() {
                let (a, b) = (times[i], times[i + 1].min(t));
                if a >= t {
                    break;
                }
                let k = Kernel::new(d);
                step(a, b, &|_, w| k.field_and_derivative(w))?;
            }
        }
        DrivingPath::Limit { m0, s, .. } => {
            let base = LimitField::new(m0.clone(), s.clone(), 0.0)?;
            step(0.0, t, &|tt, w| base.at_time(tt.max(0.0))?.eval_with_derivative(w))?;
        }
    }
    Ok(state[1])
}

/// `h_t(w0) = g_t^{-1}(w0)` via the reverse flow.
pub fn reverse_flow(path: &DrivingPath, t: f64, w0: Complex64) -> Result<Complex64> {
    if !(w0.norm() <= 1.0) {
        return Err(Error::Domain { re: w0.re, im: w0.im });
    }
    path.check_time(t)?;
    if t == 0.0 {
        return Ok(w0);
    }
    let singular = |s: f64, d: f64| Error::Singularity { s, distance: d };
    match path {
        DrivingPath::Piecewise { times, drivers } => {
            let mut h = w0;
            let last = path.segment_before(t).unwrap();
            for i in (0..=last).rev() {
                // u = t - s runs from min(times[i+1], t) down to times[i]
                let (s0, s1) = (t - times[i + 1].min(t), t - times[i]);
                let k = Kernel::new(&drivers[i]);
                let d0 = k.atom_distance(h);
                if d0 < SWALLOW_EPS {
                    return Err(singular(s0, d0));
                }
                let rhs = |_s: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
                    dy[0] = -y[0] * k.field(y[0])?;
                    Ok(())
                };
                let guard = |_s: f64, y: &[Complex64]| k.atom_distance(y[0]) < SWALLOW_EPS;
                match integrate(rhs, s0, s1, &[h], &opts(), guard)? {
                    Outcome::Completed(y) => h = y[0],
                    Outcome::Stopped { t: s, state } | Outcome::Underflow { t: s, state } => {
                        return Err(singular(s, k.atom_distance(state[0])))
                    }
                }
            }
            Ok(h)
        }
        DrivingPath::Limit { m0, s, .. } => {
            let base = LimitField::new(m0.clone(), s.clone(), 0.0)?;
            let rhs = |ss: f64, y: &[Complex64], dy: &mut [Complex64]| -> Result<()> {
                let u = (t - ss).max(0.0);
                dy[0] = -y[0] * base.at_time(u)?.eval(y[0])?;
                Ok(())
            };
            match integrate(rhs, 0.0, t, &[w0], &opts(), |_, _| false)? {
                Outcome::Completed(y) => Ok(y[0]),
                Outcome::Stopped { t: s, state } | Outcome::Underflow { t: s, state } => {
                    Err(singular(s, 1.0 - state[0].norm()))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    pub curve_id: usize,
    /// `(t, point)` pairs in sample order.
    pub points: Vec<(f64, Complex64)>,
}

/// Curve tips `γ_k(t) ≈ g_t^{-1}((1 - tip_offset) e^{iθ_k})`, using the
/// particle positions of the segment active just before `t`. Points whose
/// reverse flow hits a singularity are skipped.
pub fn trace_curves(path: &DrivingPath, sample_times: &[f64]) -> Result<Vec<Polyline>> {
    let DrivingPath::Piecewise { drivers, .. } = path else {
        return Err(Error::InvalidInput(
            "curve tracing needs a particle-driven path".into(),
        ));
    };
    let n = match &drivers[0] {
        Driver::Particles { angles, .. } => angles.len(),
        Driver::Measure(_) | Driver::Field(_) => {
            return Err(Error::InvalidInput(
                "curve tracing needs particle identities".into(),
            ))
        }
    };
    let jobs: Vec<(usize, usize)> = (0..sample_times.len())
        .flat_map(|i| (0..n).map(move |k| (i, k)))
        .collect();
    let results: Vec<Option<(usize, f64, Complex64)>> = jobs
        .par_iter()
        .map(|&(i, k)| {
            let t = sample_times[i];
            let seg = path.segment_before(t)?;
            let Some(Driver::Particles { angles, .. }) = path.driver(seg) else {
                return None;
            };
            let w0 = Complex64::from_polar(1.0 - TIP_OFFSET, angles[k]);
            match reverse_flow(path, t, w0) {
                Ok(p) => Some((k, t, p)),
                Err(e) => {
                    log::warn!("curve {k} at t = {t}: {e}");
                    None
                }
            }
        })
        .collect();
    let mut lines: Vec<Polyline> = (0..n)
        .map(|k| Polyline {
            curve_id: k,
            points: Vec::new(),
        })
        .collect();
    for (k, t, p) in results.into_iter().flatten() {
        lines[k].points.push((t, p));
    }
    Ok(lines)
}

/// Image of the circle of radius `1 - boundary_delta` under `g_t^{-1}`,
/// as `(vertex_index, point)` pairs; singular vertices are skipped.
pub fn hull_boundary(path: &DrivingPath, t: f64, grid: usize) -> Result<Vec<(usize, Complex64)>> {
    path.check_time(t)?;
    let pts: Vec<Option<(usize, Complex64)>> = (0..grid)
        .into_par_iter()
        .map(|j| {
            let w0 = Complex64::from_polar(1.0 - BOUNDARY_DELTA, TAU * j as f64 / grid as f64);
            match reverse_flow(path, t, w0) {
                Ok(p) => Some((j, p)),
                Err(e) => {
                    log::warn!("hull vertex {j} at t = {t}: {e}");
                    None
                }
            }
        })
        .collect();
    Ok(pts.into_iter().flatten().collect())
}

pub fn polylines_csv(lines: &[Polyline]) -> String {
    let mut out = String::from("curve_id,t,re,im\n");
    for l in lines {
        for (t, p) in &l.points {
            out.push_str(&format!("{},{},{},{}\n", l.curve_id, t, p.re, p.im));
        }
    }
    out
}

pub fn hull_csv(rows: &[(f64, Vec<(usize, Complex64)>)]) -> String {
    let mut out = String::from("t,vertex_index,re,im\n");
    for (t, pts) in rows {
        for (j, p) in pts {
            out.push_str(&format!("{},{},{},{}\n", t, j, p.re, p.im));
        }
    }
    out
}
