use std::path::{Path, PathBuf};

use bifree::probes::{self, Preset};
use bifree::{ComplexPoint2, TruncatedCone};
use serde::Deserialize;

use crate::error::CliError;
use crate::io;

/// Run settings assembled from defaults, an optional TOML file and flags (in that order).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub epsilon: f64,
    pub cone_theta: f64,
    pub cone_m: Option<f64>,
    pub grid: String,
    pub probes: String,
    pub seed: u64,
    pub out: PathBuf,
    /// Residual below which a stability check or a fullness test counts as exact.
    pub tolerance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            epsilon: 0.05,
            cone_theta: 1.0,
            cone_m: None,
            grid: "-4:4:161,-4:4:161".into(),
            probes: "tensor".into(),
            seed: 0,
            out: PathBuf::from("."),
            tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
}

fn parse_axis(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Usage(format!("axis '{spec}' is not of the form min:max:n"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(CliError::Usage(format!("axis '{spec}' needs min < max")));
    }
    if n < 8 {
        return Err(CliError::Usage(format!("axis '{spec}' needs at least 8 nodes")));
    }
    Ok(bifree::transforms::linspace(lo, hi, n))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = io::read_text(path)?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(CliError::Usage(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(CliError::Usage(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        self.grid()?;
        self.cone_override(TruncatedCone::default())?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let (s, t) = self
            .grid
            .split_once(',')
            .ok_or_else(|| CliError::Usage(format!("grid '{}' needs two comma-separated axes", self.grid)))?;
        Ok(Grid {
            s: parse_axis(s)?,
            t: parse_axis(t)?,
        })
    }

    /// `base` with the configured aperture and, when given, height.
    pub fn cone_override(&self, base: TruncatedCone) -> Result<TruncatedCone, CliError> {
        Ok(TruncatedCone::new(self.cone_theta, self.cone_m.unwrap_or(base.m))?)
    }

    /// The configured probe set; presets are scaled by `scale`, files are used verbatim.
    pub fn probe_set(&self, scale: f64) -> Result<Vec<ComplexPoint2>, CliError> {
        if let Ok(preset) = self.probes.parse::<Preset>() {
            return Ok(probes::preset(preset, scale));
        }
        let path = Path::new(&self.probes);
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "probe set '{}' is neither a preset (tensor, cone) nor a file",
                self.probes
            )));
        }
        let pts: Vec<ComplexPoint2> = io::read_json(path)?;
        for p in &pts {
            p.check_nonreal()?;
        }
        Ok(pts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grid_and_rejects_bad_axes() {
        let g = RunConfig::default().grid().unwrap();
        assert_eq!(g.s.len(), 161);
        assert_eq!(g.t[0], -4.0);
        for bad in ["0:1:10", "0:1:4,0:1:10", "1:0:10,0:1:10", "a:1:10,0:1:10"] {
            let cfg = RunConfig {
                grid: bad.into(),
                ..RunConfig::default()
            };
            assert!(cfg.grid().is_err(), "{bad}");
        }
    }

    #[test]
    fn toml_overrides_defaults() {
        let cfg: RunConfig = toml::from_str("epsilon = 0.1\ncone_m = 4.0\n").unwrap();
        assert_eq!(cfg.epsilon, 0.1);
        assert_eq!(cfg.cone_m, Some(4.0));
        assert_eq!(cfg.seed, 0);
        assert!(toml::from_str::<RunConfig>("nope = 1").is_err());
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let cfg = RunConfig {
            epsilon: 0.0,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
