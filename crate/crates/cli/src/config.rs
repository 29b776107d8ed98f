use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
    pub delta: f64,
    pub c: f64,
    pub tol: f64,
    pub grid_size: usize,
    pub s_values: Vec<f64>,
    pub output_dir: PathBuf,
    /// Single-peakon amplitude; replaces the case profile when set.
    pub single: Option<f64>,
    /// End time of `simulate`; defaults to four times the collision bound, or one
    /// revolution in single-peakon mode.
    pub t_max: Option<f64>,
    /// Probe time of `nonunique`; defaults to half the collision time.
    pub t_probe: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            alpha: 1.0,
            delta: 0.5,
            c: abpeakon::geometry::DEFAULT_C,
            tol: 1e-10,
            grid_size: 4096,
            s_values: vec![0.5, 1.0, 1.4],
            output_dir: PathBuf::from("out"),
            single: None,
            t_max: None,
            t_probe: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        if !self.a.is_finite() || self.a == 0.0 {
            return bad(format!("a must be finite and nonzero, got {}", self.a));
        }
        if !self.b.is_finite() {
            return bad(format!("b must be finite, got {}", self.b));
        }
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !self.grid_size.is_power_of_two() || self.grid_size < abpeakon::residual::SAMPLE_GRID {
            return bad(format!("grid size must be a power of two >= 256, got {}", self.grid_size));
        }
        if self.s_values.is_empty() {
            return bad("at least one s value is required".into());
        }
        if let Some(s) = self.s_values.iter().find(|s| !(**s < 2.0) || !s.is_finite()) {
            return bad(format!("s values must be finite and below 2, got {s}"));
        }
        if let Some(p) = self.single {
            if !p.is_finite() {
                return bad(format!("single-peakon amplitude must be finite, got {p}"));
            }
        }
        for (name, v) in [("t_max", self.t_max), ("t_probe", self.t_probe)] {
            if let Some(t) = v {
                if !(t > 0.0) || !t.is_finite() {
                    return bad(format!("{name} must be positive, got {t}"));
                }
            }
        }
        Ok(())
    }
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON file with any subset of the run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub b: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Target ratio for the initial separation, in (1, 2).
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Finest residual grid (power of two).
    #[arg(long)]
    pub grid: Option<usize>,
    /// Comma-separated Sobolev exponents.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub s: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run a single peakon of this amplitude instead of a colliding pair.
    #[arg(long, allow_negative_numbers = true)]
    pub single: Option<f64>,
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long)]
    pub t_probe: Option<f64>,
    /// JSON array of config overrides, each run in its own subdirectory.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Worker threads for --sweep.
    #[arg(long)]
    pub jobs: Option<usize>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = &self.$flag { cfg.$field = v.clone(); })*
            };
        }
        take!(a => a, b => b, alpha => alpha, delta => delta, c => c, tol => tol, grid => grid_size,
              s => s_values, out => output_dir);
        if self.single.is_some() {
            cfg.single = self.single;
        }
        if self.t_max.is_some() {
            cfg.t_max = self.t_max;
        }
        if self.t_probe.is_some() {
            cfg.t_probe = self.t_probe;
        }
        Ok(cfg)
    }
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

/// Applies each override object of the sweep file on top of `base`.
pub fn sweep_configs(base: &RunConfig, path: &Path) -> Result<Vec<RunConfig>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let items: Vec<serde_json::Map<String, serde_json::Value>> =
        serde_json::from_str(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let base_value = serde_json::to_value(base).expect("config serializes");
    items
        .into_iter()
        .enumerate()
        .map(|(i, over)| {
            let mut v = base_value.clone();
            let obj = v.as_object_mut().expect("config is an object");
            for (k, val) in over {
                obj.insert(k, val);
            }
            let mut cfg: RunConfig =
                serde_json::from_value(v).map_err(|e| CliError::Validation(format!("sweep entry {i}: {e}")))?;
            cfg.output_dir = base.output_dir.join(format!("run_{i:03}"));
            Ok(cfg)
        })
        .collect()
}
