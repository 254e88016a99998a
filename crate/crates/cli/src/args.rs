use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sle_lab_core::sde::{InitSpec, WeightSpec};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser, Debug)]
#[command(name = "sle-lab", version, about = "Multiple SLE simulations and their deterministic infinite-slit limit")]
#[command(args_override_self = true)]
pub struct Cli {
    /// JSON file with defaults for the subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads (else SLE_LAB_THREADS, else all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "sle-lab-out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate the driving particle system.
    Simulate(SimArgs),
    /// Evaluate M_t on a polar grid.
    Limit(LimitArgs),
    /// Boundary of the limit hull.
    Hull(HullArgs),
    /// Trace the curves of one simulated run.
    Curves(CurvesArgs),
    /// Compare particle systems with the deterministic limit.
    Converge(ConvergeArgs),
    /// Free multiplicative or monotone convolution and divisibility.
    Freeconv(FreeconvArgs),
    /// First time the limit measure has full support.
    SupportTime(SupportTimeArgs),
    /// Moments of the limit measure.
    Moments(MomentsArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Limit(_) => "limit",
            Command::Hull(_) => "hull",
            Command::Curves(_) => "curves",
            Command::Converge(_) => "converge",
            Command::Freeconv(_) => "freeconv",
            Command::SupportTime(_) => "support-time",
            Command::Moments(_) => "moments",
        }
    }
}

/// `equal`, `harmonic`, `explicit:w1,w2,...`, or the JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightsArg {
    Text(String),
    Spec(WeightSpec),
}

impl FromStr for WeightsArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(WeightsArg::Text(s.to_string()))
    }
}

/// `cluster:<center>:<spread>`, `equally-spaced`, `explicit:a1,a2,...`, or
/// the JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitArg {
    Text(String),
    Spec(InitSpec),
}

impl FromStr for InitArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(InitArg::Text(s.to_string()))
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad number '{x}': {e}")))
        .collect()
}

impl WeightsArg {
    pub fn resolve(&self) -> Result<WeightSpec, String> {
        match self {
            WeightsArg::Spec(s) => Ok(s.clone()),
            WeightsArg::Text(t) => match t.as_str() {
                "equal" => Ok(WeightSpec::Equal),
                "harmonic" => Ok(WeightSpec::Harmonic),
                other => match other.strip_prefix("explicit:") {
                    Some(list) => Ok(WeightSpec::Explicit(parse_list(list)?)),
                    None => Err(format!(
                        "weights: expected equal, harmonic or explicit:<list>, got '{other}'"
                    )),
                },
            },
        }
    }
}

impl InitArg {
    pub fn resolve(&self) -> Result<InitSpec, String> {
        match self {
            InitArg::Spec(s) => Ok(s.clone()),
            InitArg::Text(t) => {
                if t == "equally-spaced" {
                    return Ok(InitSpec::EquallySpaced);
                }
                if let Some(list) = t.strip_prefix("explicit:") {
                    return Ok(InitSpec::Explicit(parse_list(list)?));
                }
                if let Some(rest) = t.strip_prefix("cluster:") {
                    let parts: Vec<&str> = rest.split(':').collect();
                    let num = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|e| format!("init: bad number '{s}': {e}"))
                    };
                    return match parts.as_slice() {
                        [c] => Ok(InitSpec::Cluster {
                            center: num(c)?,
                            spread: 1e-3,
                        }),
                        [c, s] => Ok(InitSpec::Cluster {
                            center: num(c)?,
                            spread: num(s)?,
                        }),
                        _ => Err(format!("init: expected cluster:<center>:<spread>, got '{t}'")),
                    };
                }
                Err(format!(
                    "init: expected cluster:<c>:<spread>, equally-spaced or explicit:<list>, got '{t}'"
                ))
            }
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimArgs {
    /// Number of particles.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub kappa: Option<f64>,
    /// equal | harmonic | explicit:<w1,w2,...>
    #[arg(long)]
    pub weights: Option<WeightsArg>,
    /// cluster:<center>:<spread> | equally-spaced | explicit:<a1,a2,...>
    #[arg(long)]
    pub init: Option<InitArg>,
    /// Time step [default: 1e-3].
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Base seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent runs [default: 1].
    #[arg(long)]
    #[serde(alias = "n_runs")]
    pub runs: Option<usize>,
    /// Record times [default: ten equally spaced up to t_end].
    #[arg(long, value_delimiter = ',')]
    #[serde(alias = "record_times")]
    pub record: Option<Vec<f64>>,
    #[arg(skip)]
    #[serde(skip_serializing)]
    pub keep_path: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LimitArgs {
    /// Initial measure: delta1 | uniform | delta:<a> | two-atoms:<a> | atoms:<file>
    #[arg(long)]
    pub m0: Option<String>,
    /// Generator: burgers | rotation:<alpha> | herglotz:<file>
    #[arg(long)]
    pub s: Option<String>,
    /// Times, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    /// Angles on the polar grid; a quarter as many radii [default: 64].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Outermost radius [default: 0.99].
    #[arg(long)]
    pub r_max: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HullArgs {
    #[arg(long)]
    pub m0: Option<String>,
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    /// Boundary vertices [default: 128].
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurvesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    /// Points per curve [default: 50].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Which run to trace [default: 0].
    #[arg(long)]
    pub run: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sim: SimArgs,
    /// Particle numbers, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<usize>>,
    /// Initial measure of the limit [default: delta1].
    #[arg(long)]
    pub m0: Option<String>,
    #[arg(long)]
    pub s: Option<String>,
    /// Angular grid of the limit density [default: 2048].
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreeconvArgs {
    #[arg(long)]
    pub mu: Option<String>,
    #[arg(long)]
    pub nu: Option<String>,
    /// free | monotone | infdiv [default: free].
    #[arg(long)]
    pub op: Option<String>,
    /// Truncation order [default: 24].
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupportTimeArgs {
    #[arg(long)]
    pub m0: Option<String>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MomentsArgs {
    #[arg(long)]
    pub m0: Option<String>,
    #[arg(long)]
    pub s: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
    /// Highest moment [default: 12].
    #[arg(long)]
    pub order: Option<usize>,
    /// characteristics | coefficients | hierarchy [default: coefficients].
    #[arg(long)]
    pub method: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_forms() {
        assert_eq!(
            InitArg::Text("cluster:0:1e-3".into()).resolve().unwrap(),
            InitSpec::Cluster {
                center: 0.0,
                spread: 1e-3
            }
        );
        assert_eq!(
            InitArg::Text("equally-spaced".into()).resolve().unwrap(),
            InitSpec::EquallySpaced
        );
        assert!(InitArg::Text("cluster:x".into()).resolve().is_err());
        let json: InitArg = serde_json::from_str(r#"{"cluster":{"center":1.0,"spread":0.1}}"#).unwrap();
        assert_eq!(
            json.resolve().unwrap(),
            InitSpec::Cluster {
                center: 1.0,
                spread: 0.1
            }
        );
    }

    #[test]
    fn weight_forms() {
        assert_eq!(WeightsArg::Text("harmonic".into()).resolve().unwrap(), WeightSpec::Harmonic);
        assert_eq!(
            WeightsArg::Text("explicit:1,2".into()).resolve().unwrap(),
            WeightSpec::Explicit(vec![1.0, 2.0])
        );
        let json: WeightsArg = serde_json::from_str(r#""equal""#).unwrap();
        assert_eq!(json.resolve().unwrap(), WeightSpec::Equal);
    }

    #[test]
    fn simulation_config_json_is_accepted() {
        let text = r#"{"n": 4, "kappa": 2.0, "weights": "equal",
            "init": {"cluster": {"center": 0.0, "spread": 0.001}},
            "dt": 0.001, "t_end": 0.5, "seed": 1, "n_runs": 2,
            "record_times": [0.5], "keep_path": true}"#;
        let a: SimArgs = serde_json::from_str(text).unwrap();
        assert_eq!(a.runs, Some(2));
        assert_eq!(a.record, Some(vec![0.5]));
    }
}
