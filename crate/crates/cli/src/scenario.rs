//! Scenario files and command-line overrides.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use sdtdg_core::{GameConfig, Vec2};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
    Json,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub nu: f64,
    pub r: f64,
    pub xd: [f64; 2],
    pub xa: Option<[f64; 2]>,
    pub dt: f64,
    pub t_max: Option<f64>,
    pub defender_strategy: String,
    pub attacker_strategy: String,
    pub out: PathBuf,
    pub formats: Vec<Format>,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            nu: 0.5,
            r: 1.0,
            xd: [4.0, 0.0],
            xa: None,
            dt: 1e-3,
            t_max: None,
            defender_strategy: "proposed".into(),
            attacker_strategy: "proposed".into(),
            out: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Svg, Format::Json],
            seed: 0,
        }
    }
}

impl Scenario {
    pub fn config(&self) -> Result<GameConfig, CliError> {
        let cfg = GameConfig::new(self.nu, self.r).map_err(|e| CliError::Config(e.to_string()))?;
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(CliError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if let Some(t) = self.t_max {
            if !(t.is_finite() && t > 0.0) {
                return Err(CliError::Config(format!("tmax must be positive, got {t}")));
            }
        }
        Ok(cfg.with_dt(self.dt))
    }

    pub fn defender(&self) -> Vec2 {
        Vec2::new(self.xd[0], self.xd[1])
    }

    pub fn attacker(&self) -> Result<Vec2, CliError> {
        self.xa
            .map(|a| Vec2::new(a[0], a[1]))
            .ok_or_else(|| CliError::Config("this command needs an attacker position (--xa X,Y)".into()))
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read scenario {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("invalid scenario {}: {e}", path.display())))
    }
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let mut it = s.split(',').map(|p| p.trim().parse::<f64>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(x)), Some(Ok(y)), None) if x.is_finite() && y.is_finite() => Ok([x, y]),
        _ => Err(format!("expected X,Y but got '{s}'")),
    }
}

/// Scenario flags shared by every command; each overrides the scenario file.
#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file; flags given on the command line take precedence.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Defender speed ratio, in (0, 1).
    #[arg(long)]
    pub nu: Option<f64>,
    /// Capture radius.
    #[arg(long)]
    pub r: Option<f64>,
    /// Defender position.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub xd: Option<[f64; 2]>,
    /// Attacker position.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub xa: Option<[f64; 2]>,
    /// Simulation time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Simulation time limit.
    #[arg(long)]
    pub tmax: Option<f64>,
    /// proposed, straight-line, pure-pursuit or external:<path>.
    #[arg(long)]
    pub defender: Option<String>,
    /// proposed, straight-line or external:<path>.
    #[arg(long)]
    pub attacker: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats to write.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    /// Recorded with the scenario; the built-in strategies are deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<Scenario, CliError> {
        let mut sc = match &self.scenario {
            Some(p) => Scenario::load(p)?,
            None => Scenario::default(),
        };
        if let Some(v) = self.nu {
            sc.nu = v;
        }
        if let Some(v) = self.r {
            sc.r = v;
        }
        if let Some(v) = self.xd {
            sc.xd = v;
        }
        if let Some(v) = self.xa {
            sc.xa = Some(v);
        }
        if let Some(v) = self.dt {
            sc.dt = v;
        }
        if let Some(v) = self.tmax {
            sc.t_max = Some(v);
        }
        if let Some(v) = &self.defender {
            sc.defender_strategy = v.clone();
        }
        if let Some(v) = &self.attacker {
            sc.attacker_strategy = v.clone();
        }
        if let Some(v) = &self.out {
            sc.out = v.clone();
        }
        if let Some(v) = &self.format {
            sc.formats = v.clone();
        }
        if let Some(v) = self.seed {
            sc.seed = v;
        }
        Ok(sc)
    }
}
