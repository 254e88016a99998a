//! The N-particle driving system of radial multiple SLE in angular form.
//!
//! With `V_k = e^{iθ_k}`, Itô's formula turns the circle SDE into
//! `dθ_k = Σ_{j≠k} (λ_k + λ_j) cot((θ_k - θ_j)/2) dt + √(κ λ_k) dB_k`;
//! the `-κλ_k/2` drift and the Itô correction cancel.

use crate::error::{Error, Result};
use crate::loewner::{Driver, DrivingPath};
use crate::measure::CircleMeasure;
use crate::TAU;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Smallest admissible angular gap after a step.
pub const GAP_FLOOR: f64 = 1e-9;
/// Recursive halvings allowed per step.
pub const MAX_HALVINGS: u32 = 40;
/// A step may at most double any gap.
const MAX_GAP_GROWTH: f64 = 2.0;
/// Absolute growth always tolerated.
const GAP_SLACK: f64 = 1e-2;
/// Below this `|sin|` the pair term uses the angle difference directly.
const DIRECT_SIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleState {
    /// Unwrapped angles, strictly increasing within one turn.
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
    pub kappa: f64,
    pub t: f64,
}

impl ParticleState {
    pub fn new(theta: Vec<f64>, lambda: Vec<f64>, kappa: f64) -> Result<Self> {
        if theta.is_empty() || theta.len() != lambda.len() {
            return Err(Error::InvalidInput(format!(
                "{} angles and {} weights",
                theta.len(),
                lambda.len()
            )));
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidInput(format!("kappa must be >= 0, got {kappa}")));
        }
        if kappa > 4.0 {
            log::warn!("kappa = {kappa} lies outside [0, 4]; curves need not be simple");
        }
        if lambda.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidInput("weights must be positive".into()));
        }
        let sum: f64 = lambda.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {sum}, not 1")));
        }
        let s = Self {
            theta,
            lambda,
            kappa,
            t: 0.0,
        };
        if let Some((k, gap)) = s.first_bad_gap(0.0) {
            return Err(Error::InvalidInput(format!(
                "angles must be strictly increasing within one turn (gap {gap} after particle {k})"
            )));
        }
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    /// Gap after particle `k`, the last one wrapping around.
    pub fn gap(&self, k: usize) -> f64 {
        let n = self.n();
        if k + 1 < n {
            self.theta[k + 1] - self.theta[k]
        } else {
            self.theta[0] + TAU - self.theta[n - 1]
        }
    }

    pub fn min_gap(&self) -> f64 {
        if self.n() == 1 {
            return TAU;
        }
        (0..self.n()).map(|k| self.gap(k)).fold(f64::INFINITY, f64::min)
    }

    fn first_bad_gap(&self, floor: f64) -> Option<(usize, f64)> {
        if self.n() == 1 {
            return None;
        }
        (0..self.n())
            .map(|k| (k, self.gap(k)))
            .find(|(_, g)| !(*g > floor))
    }

    /// `μ = Σ λ_k δ_{e^{iθ_k}}`.
    pub fn mu(&self) -> CircleMeasure {
        CircleMeasure::atoms(&self.theta, &self.lambda).expect("valid particle state")
    }

    /// `α = Σ (1/N) δ_{e^{iθ_k}}`.
    pub fn alpha(&self) -> CircleMeasure {
        let w = vec![1.0 / self.n() as f64; self.n()];
        CircleMeasure::atoms(&self.theta, &w).expect("valid particle state")
    }

    pub fn driver(&self) -> Driver {
        Driver::Particles {
            angles: self.theta.clone(),
            weights: self.lambda.clone(),
        }
    }
}

/// `b_k = Σ_{j≠k} (λ_k + λ_j) cot((θ_k - θ_j)/2)`.
pub fn angular_drift(state: &ParticleState) -> Result<Vec<f64>> {
    let n = state.n();
    if let Some((k, gap)) = state.first_bad_gap(GAP_FLOOR) {
        return Err(Error::GapUnderflow {
            k,
            next: (k + 1) % n,
            gap,
        });
    }
    let mut b = vec![0.0; n];
    let half: Vec<(f64, f64)> = state.theta.iter().map(|t| (0.5 * t).sin_cos()).collect();
    for k in 0..n {
        let (sk, ck) = half[k];
        let lk = state.lambda[k];
        for j in (k + 1)..n {
            let (sj, cj) = half[j];
            // sin and cos of (θ_k - θ_j)/2
            let mut s = sk * cj - ck * sj;
            let mut c = ck * cj + sk * sj;
            if s.abs() < DIRECT_SIN {
                (s, c) = (0.5 * (state.theta[k] - state.theta[j])).sin_cos();
            }
            let term = (lk + state.lambda[j]) * c / s;
            b[k] += term;
            b[j] -= term;
        }
    }
    Ok(b)
}

fn acceptable(old: &ParticleState, new: &ParticleState) -> bool {
    if new.n() == 1 {
        return new.theta[0].is_finite();
    }
    (0..new.n()).all(|k| {
        let (g, g0) = (new.gap(k), old.gap(k));
        g.is_finite() && g > GAP_FLOOR && (g <= MAX_GAP_GROWTH * g0 || g <= g0 + GAP_SLACK)
    })
}

fn advance(state: &ParticleState, dt: f64, dw: &[f64], depth: u32) -> Result<ParticleState> {
    let b = angular_drift(state)?;
    let mut next = state.clone();
    for k in 0..state.n() {
        next.theta[k] += b[k] * dt + (state.kappa * state.lambda[k]).sqrt() * dw[k];
    }
    next.t += dt;
    if acceptable(state, &next) {
        return Ok(next);
    }
    if depth >= MAX_HALVINGS {
        return Err(Error::OrderingViolated { t: state.t });
    }
    // split the Brownian increment evenly between the two halves
    let half: Vec<f64> = dw.iter().map(|x| 0.5 * x).collect();
    let mid = advance(state, 0.5 * dt, &half, depth + 1)?;
    let mut end = advance(&mid, 0.5 * dt, &half, depth + 1)?;
    end.t = state.t + dt;
    Ok(end)
}

/// One Euler–Maruyama step with caller-supplied standard normals.
pub fn step(state: &ParticleState, dt: f64, gaussians: &[f64]) -> Result<ParticleState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
    }
    if gaussians.len() != state.n() {
        return Err(Error::InvalidInput(format!(
            "{} gaussians for {} particles",
            gaussians.len(),
            state.n()
        )));
    }
    let sq = dt.sqrt();
    let dw: Vec<f64> = gaussians.iter().map(|g| g * sq).collect();
    advance(state, dt, &dw, 0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSpec {
    Equal,
    /// `λ_k ∝ 1/k`.
    Harmonic,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    /// Equally spaced in `[center - spread/2, center + spread/2]`.
    Cluster { center: f64, spread: f64 },
    EquallySpaced,
    Explicit(Vec<f64>),
}

fn default_runs() -> usize {
    1
}

fn default_keep_path() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub n: usize,
    pub kappa: f64,
    pub weights: WeightSpec,
    pub init: InitSpec,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default)]
    pub record_times: Vec<f64>,
    /// Keep the full driving path of every run.
    #[serde(default = "default_keep_path")]
    pub keep_path: bool,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::InvalidInput("t_end must be >= 0".into()));
        }
        if self.record_times.iter().any(|t| !(*t >= 0.0) || *t > self.t_end) {
            return Err(Error::InvalidInput(
                "record times must lie in [0, t_end]".into(),
            ));
        }
        if self.n_runs == 0 {
            return Err(Error::InvalidInput("n_runs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn weight_vector(&self) -> Result<Vec<f64>> {
        let n = self.n;
        let raw: Vec<f64> = match &self.weights {
            WeightSpec::Equal => vec![1.0; n],
            WeightSpec::Harmonic => (1..=n).map(|k| 1.0 / k as f64).collect(),
            WeightSpec::Explicit(w) => {
                if w.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "{} explicit weights for n = {n}",
                        w.len()
                    )));
                }
                w.clone()
            }
        };
        let s: f64 = raw.iter().sum();
        Ok(raw.iter().map(|w| w / s).collect())
    }

    pub fn initial_angles(&self) -> Result<Vec<f64>> {
        let n = self.n;
        Ok(match &self.init {
            InitSpec::Cluster { center, spread } => {
                if n == 1 {
                    vec![*center]
                } else {
                    (0..n)
                        .map(|k| center - spread / 2.0 + spread * k as f64 / (n - 1) as f64)
                        .collect()
                }
            }
            InitSpec::EquallySpaced => (0..n).map(|k| TAU * k as f64 / n as f64).collect(),
            InitSpec::Explicit(a) => {
                if a.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "{} explicit angles for n = {n}",
                        a.len()
                    )));
                }
                a.clone()
            }
        })
    }

    pub fn initial_state(&self) -> Result<ParticleState> {
        ParticleState::new(self.initial_angles()?, self.weight_vector()?, self.kappa)
    }

    /// Grid points `k·dt` merged with the record times and `t_end`.
    fn time_grid(&self) -> Vec<f64> {
        let steps = (self.t_end / self.dt).floor() as usize;
        let mut grid: Vec<f64> = (0..=steps).map(|k| k as f64 * self.dt).collect();
        grid.extend(self.record_times.iter().copied());
        grid.push(self.t_end);
        grid.sort_by(f64::total_cmp);
        let tol = 1e-9 * self.dt;
        let mut out: Vec<f64> = Vec::with_capacity(grid.len());
        for t in grid {
            match out.last() {
                Some(&last) if t - last <= tol => {
                    // keep exact record times over grid approximations
                    if self.record_times.contains(&t) || t == self.t_end {
                        *out.last_mut().unwrap() = t;
                    }
                }
                _ => out.push(t),
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub state: ParticleState,
    pub mu: CircleMeasure,
    pub alpha: CircleMeasure,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: usize,
    pub snapshots: Vec<Snapshot>,
    pub path: Option<DrivingPath>,
}

fn simulate_run(cfg: &SimulationConfig, run: usize) -> Result<RunResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ run as u64);
    let mut state = cfg.initial_state()?;
    let grid = cfg.time_grid();
    let mut records: Vec<f64> = cfg.record_times.clone();
    records.sort_by(f64::total_cmp);
    let mut next_record = 0;
    let mut snapshots = Vec::with_capacity(records.len());
    let mut drivers = Vec::new();
    let n = state.n();
    let mut gauss = vec![0.0; n];
    let take = |state: &ParticleState, t: f64| Snapshot {
        t,
        state: state.clone(),
        mu: state.mu(),
        alpha: state.alpha(),
    };
    let tol = 1e-9 * cfg.dt;
    while next_record < records.len() && (records[next_record] - 0.0).abs() <= tol {
        snapshots.push(take(&state, records[next_record]));
        next_record += 1;
    }
    for w in grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        if cfg.keep_path {
            drivers.push(state.driver());
        }
        for g in gauss.iter_mut() {
            *g = rng.sample(StandardNormal);
        }
        state = step(&state, b - a, &gauss).map_err(|e| Error::Run {
            run,
            t: a,
            source: Box::new(e),
        })?;
        state.t = b;
        while next_record < records.len() && (records[next_record] - b).abs() <= tol {
            snapshots.push(take(&state, records[next_record]));
            next_record += 1;
        }
    }
    let path = if cfg.keep_path && grid.len() >= 2 {
        Some(DrivingPath::piecewise(grid, drivers)?)
    } else {
        None
    };
    Ok(RunResult {
        run,
        snapshots,
        path,
    })
}

/// Runs all seeds in parallel; run `r` uses the stream seeded by
/// `seed ^ r`, so results do not depend on the thread count.
pub fn simulate(cfg: &SimulationConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| simulate_run(cfg, r))
        .collect()
}

/// `max_k λ_k ≤ C/N`.
pub fn weight_profile_check(lambda: &[f64], c: f64) -> bool {
    let n = lambda.len() as f64;
    lambda.iter().all(|l| *l <= c / n * (1.0 + 1e-12))
}

/// Piecewise-linear `L_N` with `L_N(k/N) = Σ_{j≤k} λ_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightProfile {
    knots: Vec<f64>,
}

impl WeightProfile {
    pub fn identity(n: usize) -> Self {
        Self {
            knots: (0..=n).map(|k| k as f64 / n as f64).collect(),
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.knots.len() - 1;
        let y = (x.clamp(0.0, 1.0)) * n as f64;
        let k = (y.floor() as usize).min(n - 1);
        let f = y - k as f64;
        if f == 0.0 {
            return self.knots[k];
        }
        self.knots[k] + f * (self.knots[k + 1] - self.knots[k])
    }
}

pub fn build_l(lambda: &[f64]) -> WeightProfile {
    let mut knots = Vec::with_capacity(lambda.len() + 1);
    let mut acc = 0.0;
    knots.push(0.0);
    for l in lambda {
        acc += l;
        knots.push(acc);
    }
    WeightProfile { knots }
}

/// CSV `run,t,k,theta,weight` over all snapshots.
pub fn trajectories_csv(runs: &[RunResult]) -> String {
    let mut out = String::from("run,t,k,theta,weight\n");
    for r in runs {
        for s in &r.snapshots {
            for (k, (th, w)) in s.state.theta.iter().zip(&s.state.lambda).enumerate() {
                out.push_str(&format!("{},{},{},{},{}\n", r.run, s.t, k, th, w));
            }
        }
    }
    out
}
