use crate::args::*;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sle_lab_core::limit::{convergence_study, support_time, SupportTime};
use sle_lab_core::loewner::{hull_boundary, hull_csv, polylines_csv, trace_curves, DrivingPath};
use sle_lab_core::measure::SeriesField;
use sle_lab_core::sde::{simulate, trajectories_csv, SimulationConfig};
use sle_lab_core::semigroup::{
    free_mult_convolve, is_free_infdiv, monotone_convolve, moment_hierarchy,
    moments_via_characteristics, moments_via_coefficients, GeneratorS, LimitField,
};
use sle_lab_core::series::SeriesMap;
use sle_lab_core::{CircleMeasure, Error, HerglotzField, MomentSequence, TAU};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(m) | Error::InvalidMeasure(m) => CliError::Config(m),
            other => CliError::Numeric(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn missing(name: &str) -> CliError {
    CliError::Config(format!("missing --{name}"))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &str) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))
}

fn parse_angle(s: &str, what: &str) -> CliResult<f64> {
    s.parse::<f64>()
        .map_err(|e| CliError::Config(format!("{what}: bad angle '{s}': {e}")))
}

/// `delta1 | uniform | delta:<a> | two-atoms:<a> | atoms:<file>`.
pub fn parse_measure(spec: &str) -> CliResult<CircleMeasure> {
    match spec {
        "delta1" => Ok(CircleMeasure::delta_one()),
        "uniform" => Ok(CircleMeasure::uniform(sle_lab_core::measure::DEFAULT_GRID)),
        _ => {
            if let Some(a) = spec.strip_prefix("delta:") {
                Ok(CircleMeasure::delta(parse_angle(a, "delta")?))
            } else if let Some(a) = spec.strip_prefix("two-atoms:") {
                Ok(CircleMeasure::two_atoms(parse_angle(a, "two-atoms")?))
            } else if let Some(path) = spec.strip_prefix("atoms:") {
                let m: CircleMeasure = read_json(path)?;
                Ok(m.normalized()?)
            } else {
                Err(CliError::Config(format!(
                    "unknown measure '{spec}' (delta1, uniform, delta:<a>, two-atoms:<a>, atoms:<file>)"
                )))
            }
        }
    }
}

/// The initial field; `uniform` is the exact constant 1.
pub fn parse_field(spec: &str) -> CliResult<Arc<dyn HerglotzField>> {
    if spec == "uniform" {
        return Ok(Arc::new(SeriesField::new(SeriesMap::constant(
            Complex64::new(1.0, 0.0),
            4,
        ))));
    }
    Ok(Arc::new(parse_measure(spec)?))
}

#[derive(Deserialize)]
struct HerglotzData {
    alpha: f64,
    rho: CircleMeasure,
}

/// `burgers | rotation:<alpha> | herglotz:<file>`.
pub fn parse_generator(spec: &str) -> CliResult<GeneratorS> {
    if spec == "burgers" {
        return Ok(GeneratorS::burgers());
    }
    if let Some(a) = spec.strip_prefix("rotation:") {
        return Ok(GeneratorS::rotation(parse_angle(a, "rotation")?));
    }
    if let Some(path) = spec.strip_prefix("herglotz:") {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
        if let Ok(g) = serde_json::from_str::<GeneratorS>(&text) {
            return Ok(g);
        }
        let d: HerglotzData =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))?;
        return Ok(GeneratorS::herglotz(d.alpha, d.rho)?);
    }
    Err(CliError::Config(format!(
        "unknown generator '{spec}' (burgers, rotation:<alpha>, herglotz:<file>)"
    )))
}

pub struct Output {
    pub dir: PathBuf,
    pub command: String,
    pub config: serde_json::Value,
    pub hash: String,
}

#[derive(Serialize)]
struct Meta<'a> {
    tool: &'a str,
    version: &'a str,
    command: &'a str,
    config_hash: &'a str,
    config: &'a serde_json::Value,
}

impl Output {
    pub fn write(&self, name: &str, contents: &str) -> CliResult<PathBuf> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::Io(format!("{}: {e}", self.dir.display())))?;
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let meta = Meta {
            tool: "sle-lab",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            config_hash: &self.hash,
            config: &self.config,
        };
        let side = self.dir.join(format!("{name}.meta.json"));
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        std::fs::write(&side, text + "\n")
            .map_err(|e| CliError::Io(format!("{}: {e}", side.display())))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let text = serde_json::to_string_pretty(value).expect("output serializes");
        self.write(name, &(text + "\n"))
    }
}

fn sim_config(a: &SimArgs) -> CliResult<SimulationConfig> {
    let n = a.n.ok_or_else(|| missing("n"))?;
    let kappa = a.kappa.ok_or_else(|| missing("kappa"))?;
    let t_end = a.t_end.ok_or_else(|| missing("t-end"))?;
    let weights = match &a.weights {
        Some(w) => w.resolve().map_err(CliError::Config)?,
        None => sle_lab_core::sde::WeightSpec::Equal,
    };
    let init = match &a.init {
        Some(i) => i.resolve().map_err(CliError::Config)?,
        None => sle_lab_core::sde::InitSpec::EquallySpaced,
    };
    let record = a
        .record
        .clone()
        .unwrap_or_else(|| (1..=10).map(|j| t_end * j as f64 / 10.0).collect());
    let cfg = SimulationConfig {
        n,
        kappa,
        weights,
        init,
        dt: a.dt.unwrap_or(1e-3),
        t_end,
        seed: a.seed.unwrap_or(0),
        n_runs: a.runs.unwrap_or(1),
        record_times: record,
        keep_path: false,
    };
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct MeasureRecord<'a> {
    run: usize,
    t: f64,
    mu: &'a CircleMeasure,
    alpha: &'a CircleMeasure,
}

pub fn simulate_cmd(a: &SimArgs, out: &Output) -> CliResult<String> {
    let cfg = sim_config(a)?;
    let runs = simulate(&cfg)?;
    out.write("trajectories.csv", &trajectories_csv(&runs))?;
    let records: Vec<MeasureRecord> = runs
        .iter()
        .flat_map(|r| {
            r.snapshots.iter().map(move |s| MeasureRecord {
                run: r.run,
                t: s.t,
                mu: &s.mu,
                alpha: &s.alpha,
            })
        })
        .collect();
    out.write_json("measures.json", &records)?;
    Ok(format!(
        "simulated {} run(s) of {} particles to t = {}; wrote trajectories.csv, measures.json",
        runs.len(),
        cfg.n,
        cfg.t_end
    ))
}

pub fn curves_cmd(a: &CurvesArgs, out: &Output) -> CliResult<String> {
    let mut cfg = sim_config(&a.sim)?;
    let run = a.run.unwrap_or(0);
    if run >= cfg.n_runs {
        cfg.n_runs = run + 1;
    }
    cfg.keep_path = true;
    cfg.record_times = vec![];
    let runs = simulate(&cfg)?;
    let path = runs[run]
        .path
        .as_ref()
        .ok_or_else(|| CliError::Config("t-end must be positive to trace curves".into()))?;
    let k = a.samples.unwrap_or(50).max(1);
    let times: Vec<f64> = (1..=k).map(|j| cfg.t_end * j as f64 / k as f64).collect();
    let lines = trace_curves(path, &times)?;
    out.write("curves.csv", &polylines_csv(&lines))?;
    Ok(format!("traced {} curve(s) of run {run}; wrote curves.csv", lines.len()))
}

fn times_of(t: &Option<Vec<f64>>) -> CliResult<Vec<f64>> {
    let t = t.clone().ok_or_else(|| missing("t"))?;
    if t.is_empty() || t.iter().any(|x| !(*x >= 0.0) || !x.is_finite()) {
        return Err(CliError::Config("times must be finite and >= 0".into()));
    }
    Ok(t)
}

pub fn limit_cmd(a: &LimitArgs, out: &Output) -> CliResult<String> {
    let m0 = parse_field(a.m0.as_deref().unwrap_or("delta1"))?;
    let s = parse_generator(a.s.as_deref().unwrap_or("burgers"))?;
    let times = times_of(&a.t)?;
    let grid = a.grid.unwrap_or(64).max(1);
    let r_max = a.r_max.unwrap_or(0.99);
    if !(r_max > 0.0 && r_max < 1.0) {
        return Err(CliError::Config("r-max must lie in (0, 1)".into()));
    }
    let radii = (grid / 4).max(1);
    let mut pts = vec![Complex64::new(0.0, 0.0)];
    for i in 1..=radii {
        let r = r_max * i as f64 / radii as f64;
        for j in 0..grid {
            pts.push(Complex64::from_polar(r, TAU * j as f64 / grid as f64));
        }
    }
    let mut csv = String::from("t,re_z,im_z,re_M,im_M\n");
    for &t in &times {
        let field = LimitField::new(m0.clone(), s.clone(), t)?;
        let vals: Vec<Complex64> = pts
            .par_iter()
            .map(|z| field.eval(*z))
            .collect::<sle_lab_core::Result<_>>()?;
        for (z, m) in pts.iter().zip(&vals) {
            let _ = writeln!(csv, "{},{},{},{},{}", t, z.re, z.im, m.re, m.im);
        }
    }
    out.write("field.csv", &csv)?;
    Ok(format!(
        "evaluated M_t at {} points for {} time(s); wrote field.csv",
        pts.len(),
        times.len()
    ))
}

pub fn hull_cmd(a: &HullArgs, out: &Output) -> CliResult<String> {
    let m0 = parse_field(a.m0.as_deref().unwrap_or("delta1"))?;
    let s = parse_generator(a.s.as_deref().unwrap_or("burgers"))?;
    let times = times_of(&a.t)?;
    let grid = a.grid.unwrap_or(128).max(3);
    let t_end = times.iter().copied().fold(0.0, f64::max);
    let path = DrivingPath::limit(m0, s, t_end);
    let rows: Vec<(f64, Vec<(usize, Complex64)>)> = times
        .iter()
        .map(|&t| Ok((t, hull_boundary(&path, t, grid)?)))
        .collect::<CliResult<_>>()?;
    out.write("hull.csv", &hull_csv(&rows))?;
    Ok(format!("traced {} hull boundary(ies); wrote hull.csv", rows.len()))
}

pub fn converge_cmd(a: &ConvergeArgs, out: &Output) -> CliResult<String> {
    let mut sim = a.sim.clone();
    let n_list = a.n_list.clone().ok_or_else(|| missing("n-list"))?;
    if n_list.is_empty() {
        return Err(missing("n-list"));
    }
    sim.n = Some(n_list[0]);
    let base = sim_config(&sim)?;
    let m0 = parse_field(a.m0.as_deref().unwrap_or("delta1"))?;
    let s = parse_generator(a.s.as_deref().unwrap_or("burgers"))?;
    let report = convergence_study(&base, &n_list, m0, &s, a.grid.unwrap_or(2048))?;
    out.write_json("convergence.json", &report)?;
    Ok(format!(
        "compared N = {:?} at {} time(s) over {} run(s); wrote convergence.json",
        n_list,
        report.record_times.len(),
        report.n_runs
    ))
}

fn moments_csv(rows: &[(f64, MomentSequence)]) -> String {
    let mut csv = String::from("t,n,re_m,im_m\n");
    for (t, m) in rows {
        for (n, v) in m.values().iter().enumerate() {
            let _ = writeln!(csv, "{},{},{},{}", t, n, v.re, v.im);
        }
    }
    csv
}

#[derive(Serialize)]
struct InfDivJson {
    infinitely_divisible: bool,
    min_re: f64,
    generator: Option<GeneratorS>,
}

pub fn freeconv_cmd(a: &FreeconvArgs, out: &Output) -> CliResult<String> {
    let mu = parse_measure(a.mu.as_deref().ok_or_else(|| missing("mu"))?)?;
    let k = a.order.unwrap_or(24);
    let op = a.op.as_deref().unwrap_or("free");
    if op == "infdiv" {
        let r = is_free_infdiv(&mu, k, 256)?;
        out.write_json(
            "infdiv.json",
            &InfDivJson {
                infinitely_divisible: r.infinitely_divisible,
                min_re: r.min_re,
                generator: r.generator,
            },
        )?;
        return Ok(format!(
            "freely infinitely divisible: {} (min Re log Σ = {:.3e}); wrote infdiv.json",
            r.infinitely_divisible, r.min_re
        ));
    }
    let nu = parse_measure(a.nu.as_deref().ok_or_else(|| missing("nu"))?)?;
    let m = match op {
        "free" => free_mult_convolve(&mu, &nu, k)?,
        "monotone" => monotone_convolve(&mu, &nu, k)?,
        other => {
            return Err(CliError::Config(format!(
                "unknown op '{other}' (free, monotone, infdiv)"
            )))
        }
    };
    out.write("freeconv.csv", &moments_csv(&[(0.0, m)]))?;
    Ok(format!("{op} convolution to order {k}; wrote freeconv.csv"))
}

#[derive(Serialize)]
struct AlreadyFull {
    already_full: bool,
}

pub fn support_time_cmd(a: &SupportTimeArgs, out: &Output) -> CliResult<String> {
    let mu = parse_measure(a.m0.as_deref().ok_or_else(|| missing("m0"))?)?;
    match support_time(&mu)? {
        SupportTime::At(r) => {
            out.write_json("support_time.json", &r)?;
            Ok(format!(
                "T = {} (m = {}, argmin x = {}); wrote support_time.json",
                r.t, r.m, r.argmin_x
            ))
        }
        SupportTime::AlreadyFull => {
            out.write_json("support_time.json", &AlreadyFull { already_full: true })?;
            Ok("support is already the whole circle; wrote support_time.json".into())
        }
    }
}

pub fn moments_cmd(a: &MomentsArgs, out: &Output) -> CliResult<String> {
    let spec = a.m0.as_deref().unwrap_or("delta1");
    let s = parse_generator(a.s.as_deref().unwrap_or("burgers"))?;
    let times = times_of(&a.t)?;
    let k = a.order.unwrap_or(12);
    let method = a.method.as_deref().unwrap_or("coefficients");
    let mut rows = Vec::new();
    for &t in &times {
        let m = match method {
            "characteristics" => moments_via_characteristics(parse_field(spec)?, &s, t, k)?,
            "coefficients" => moments_via_coefficients(&parse_measure(spec)?.moments(k), &s, t, k)?,
            "hierarchy" => {
                if s != GeneratorS::burgers() {
                    return Err(CliError::Config(
                        "the moment hierarchy is only available for burgers".into(),
                    ));
                }
                moment_hierarchy(&parse_measure(spec)?.moments(k), t, k)?
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown method '{other}' (characteristics, coefficients, hierarchy)"
                )))
            }
        };
        rows.push((t, m));
    }
    out.write("moments.csv", &moments_csv(&rows))?;
    Ok(format!(
        "moments to order {k} at {} time(s) via {method}; wrote moments.csv",
        times.len()
    ))
}

pub fn output(dir: &Path, command: &str, config: serde_json::Value, hash: String) -> Output {
    Output {
        dir: dir.to_path_buf(),
        command: command.to_string(),
        config,
        hash,
    }
}
