use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use schiffer_lab::experiments::{exit_code, run_experiment, ExperimentId};
use schiffer_lab::Error;

#[derive(Parser)]
#[command(name = "schiffer-lab", version, about = "Overdetermined eigenvalue experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory
    #[arg(long, default_value = "schiffer-out")]
    out: PathBuf,
    /// extra config entries, KEY=JSON
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form disk spectrum
    DiskOracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bc: Option<String>,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Finite element eigenvalues of a curve
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bc: Option<String>,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Shape derivative formula against finite differences
    FdCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        quantity: Option<String>,
        /// comma-separated Fourier coefficients a0,a1,b1,...
        #[arg(long)]
        alpha: Option<String>,
        #[arg(long)]
        t: Option<f64>,
    },
    /// Constant-trace and constant-flux residuals
    SchifferCheck {
        #[command(flatten)]
        common: Common,
    },
    /// First Dirichlet eigenvalue over disks of several radii
    Monotonicity {
        #[command(flatten)]
        common: Common,
    },
    /// Area-preserving gradient flow
    Flow {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        functional: Option<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        metric: Option<String>,
        #[arg(long = "A")]
        a: Option<f64>,
        #[arg(long)]
        s0: Option<f64>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        area: Option<f64>,
    },
    /// Connection identity and Hessian positivity
    HessianCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        functional: Option<String>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long = "A")]
        a: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        convention: Option<String>,
    },
    /// Reflection predicate and symmetry defects
    SymmetryCheck {
        #[command(flatten)]
        common: Common,
    },
}

struct Overrides(Map<String, Value>);

impl Overrides {
    fn put<T: Into<Value>>(&mut self, key: &str, v: Option<T>) {
        if let Some(v) = v {
            self.0.insert(key.to_string(), v.into());
        }
    }
}

fn parse_alpha(s: &str) -> Result<Value, Error> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map(Value::from))
        .collect::<Result<Vec<_>, _>>()
        .map(Value::Array)
        .map_err(|e| Error::Config(format!("bad --alpha {s:?}: {e}")))
}

fn load_config(common: &Common, flags: Overrides) -> Result<Value, Error> {
    let mut map = match &common.config {
        None => Map::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            match serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))? {
                Value::Object(m) => m,
                _ => return Err(Error::Config(format!("{} is not a JSON object", path.display()))),
            }
        }
    };
    for entry in &common.set {
        let (key, raw) =
            entry.split_once('=').ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {entry:?}")))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        map.insert(key.to_string(), value);
    }
    map.extend(flags.0);
    Ok(Value::Object(map))
}

fn dispatch(cli: Cli) -> (ExperimentId, Common, Result<Overrides, Error>) {
    let mut o = Overrides(Map::new());
    let (id, common) = match cli.command {
        Command::DiskOracle { common, bc, radius, count } => {
            o.put("bc", bc);
            o.put("radius", radius);
            o.put("count", count);
            (ExperimentId::DiskOracle, common)
        }
        Command::Solve { common, bc, h, count } => {
            o.put("bc", bc);
            o.put("h", h);
            o.put("count", count);
            (ExperimentId::Solve, common)
        }
        Command::FdCheck { common, quantity, alpha, t } => {
            o.put("quantity", quantity);
            o.put("t", t);
            if let Some(a) = alpha {
                match parse_alpha(&a) {
                    Ok(v) => o.put("alpha", Some(v)),
                    Err(e) => return (ExperimentId::FdCheck, common, Err(e)),
                }
            }
            (ExperimentId::FdCheck, common)
        }
        Command::SchifferCheck { common } => (ExperimentId::SchifferCheck, common),
        Command::Monotonicity { common } => (ExperimentId::Monotonicity, common),
        Command::Flow { common, functional, gamma, metric, a, s0, max_iter, tol, area } => {
            o.put("functional", functional);
            o.put("gamma", gamma);
            o.put("metric", metric);
            o.put("A", a);
            o.put("s0", s0);
            o.put("max_iter", max_iter);
            o.put("tol", tol);
            o.put("area", area);
            (ExperimentId::Flow, common)
        }
        Command::HessianCheck { common, functional, gamma, a, convention } => {
            o.put("functional", functional);
            o.put("gamma", gamma);
            o.put("A", a);
            o.put("convention", convention);
            (ExperimentId::HessianCheck, common)
        }
        Command::SymmetryCheck { common } => (ExperimentId::SymmetryCheck, common),
    };
    (id, common, Ok(o))
}

fn main() -> ExitCode {
    let (id, common, flags) = dispatch(Cli::parse());
    let result = flags
        .and_then(|f| load_config(&common, f))
        .and_then(|config| run_experiment(id, config, &common.out));
    match &result {
        Ok(outcome) => {
            for check in &outcome.checks {
                println!("{} {}: {}", if check.passed { "PASS" } else { "FAIL" }, check.name, check.detail);
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
        }
        Err(e) => eprintln!("schiffer-lab {}: {e}", id.label()),
    }
    ExitCode::from(exit_code(&result) as u8)
}
