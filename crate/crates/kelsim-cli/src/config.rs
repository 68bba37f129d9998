//! Experiment configuration: JSON with a version field; unknown keys are
//! rejected so a typo in an exponent name cannot silently invalidate an
//! experiment.

use kelsim::density::{CflConfig, ModelParams};
use kelsim::error::{Error, Result};
use kelsim::grid::{GridSpec, ScalarField};
use kelsim::oracles::BarenblattSpec;
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub params: ParamsSection,
    #[serde(default)]
    pub cfl: Option<CflSection>,
    pub initial: ProfileSection,
    #[serde(default)]
    pub initial_v: Option<ProfileSection>,
    #[serde(default)]
    pub run: Option<RunSection>,
    #[serde(default)]
    pub weak_form: Option<WeakFormSection>,
    #[serde(default)]
    pub contraction: Option<ContractionSection>,
    #[serde(default)]
    pub holder: Option<HolderSection>,
    #[serde(default)]
    pub energy: Option<EnergySection>,
    #[serde(default)]
    pub sobolev: Option<SobolevSection>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n: usize,
    pub l: f64,
    pub cells: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub m: f64,
    pub q: f64,
    pub gamma: f64,
    pub delta: u8,
    pub chi: u8,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CflSection {
    pub safety: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSection {
    Zero,
    Uniform {
        value: f64,
    },
    Gaussian {
        amplitude: f64,
        sigma: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// C-infinity mollifier bump with compact support.
    Bump {
        amplitude: f64,
        radius: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// Source-type self-similar profile at its initial slice; the exponent m
    /// comes from the params section.
    Barenblatt {
        mass: f64,
        #[serde(default = "default_t0")]
        t0: f64,
    },
    /// Read the field from a dump file.
    Dump {
        path: String,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    #[serde(default)]
    pub snapshot_times: Option<Vec<f64>>,
    /// Evenly spaced snapshots including t = 0 and t_end.
    #[serde(default)]
    pub snapshot_count: Option<usize>,
    /// Step-count cap; the run errors out when it is exceeded.
    #[serde(default)]
    pub max_steps: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakFormSection {
    #[serde(default = "default_bank_size")]
    pub functions: usize,
}

fn default_bank_size() -> usize {
    8
}

fn default_t0() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractionSection {
    pub initial_hat: ProfileSection,
    pub t_end: f64,
    #[serde(default)]
    pub sample_times: Option<Vec<f64>>,
    #[serde(default)]
    pub sample_count: Option<usize>,
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default = "one")]
    pub c: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolderSection {
    pub center: Vec<f64>,
    /// Anchor time; defaults to the end of the run.
    #[serde(default)]
    pub t0: Option<f64>,
    pub radius: f64,
    pub amplitude_divisor: f64,
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_parent_epsilon")]
    pub parent_epsilon: f64,
}

fn default_levels() -> usize {
    5
}

fn default_parent_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub center: Vec<f64>,
    pub radius: f64,
    pub t1: f64,
    pub t2: f64,
    pub level: f64,
    pub sign: kelsim::diagnostics::LevelSign,
    #[serde(default = "default_ramp")]
    pub ramp_fraction: f64,
    #[serde(default)]
    pub a1: Option<f64>,
    #[serde(default)]
    pub a2: Option<f64>,
    #[serde(default = "default_xi_tol")]
    pub xi_tol: f64,
}

fn default_ramp() -> f64 {
    0.25
}

fn default_xi_tol() -> f64 {
    1e-10
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevSection {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Snapshot times to include; defaults to all recorded snapshots.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidInput(format!("config parse error: {e}")))?;
        if cfg.version != 1 {
            return Err(Error::InvalidInput(format!(
                "unsupported config version {} (expected 1)",
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.n, self.grid.l, self.grid.cells)
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.params.m,
            self.params.q,
            self.params.gamma,
            self.params.delta,
            self.params.chi,
        )
    }

    pub fn cfl_config(&self) -> Result<CflConfig> {
        match self.cfl {
            Some(c) => CflConfig::new(c.safety),
            None => Ok(CflConfig::default()),
        }
    }

    pub fn snapshot_times(&self) -> Result<Vec<f64>> {
        let run = self
            .run
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("config is missing the run section".into()))?;
        match (&run.snapshot_times, run.snapshot_count) {
            (Some(times), None) => Ok(times.clone()),
            (None, Some(count)) => {
                if count < 2 {
                    return Err(Error::InvalidInput("snapshot_count must be >= 2".into()));
                }
                Ok((0..count)
                    .map(|i| run.t_end * i as f64 / (count - 1) as f64)
                    .collect())
            }
            (None, None) => Ok(vec![]),
            (Some(_), Some(_)) => Err(Error::InvalidInput(
                "give snapshot_times or snapshot_count, not both".into(),
            )),
        }
    }

    pub fn build_field(&self, profile: &ProfileSection, grid: GridSpec) -> Result<ScalarField> {
        build_profile(profile, grid, self.params.m)
    }
}

fn center_of(center: &[f64], n: usize) -> Result<[f64; 3]> {
    let mut c = [0.0; 3];
    if center.is_empty() {
        return Ok(c);
    }
    if center.len() != n {
        return Err(Error::InvalidInput(format!(
            "center has {} components for an n = {n} grid",
            center.len()
        )));
    }
    c[..n].copy_from_slice(center);
    Ok(c)
}

pub fn build_profile(profile: &ProfileSection, grid: GridSpec, m: f64) -> Result<ScalarField> {
    match profile {
        ProfileSection::Zero => Ok(ScalarField::zeros(grid)),
        ProfileSection::Uniform { value } => {
            if *value < 0.0 {
                return Err(Error::InvalidInput("uniform profile must be nonnegative".into()));
            }
            Ok(ScalarField::constant(grid, *value))
        }
        ProfileSection::Gaussian {
            amplitude,
            sigma,
            center,
        } => {
            if !(*sigma > 0.0) {
                return Err(Error::InvalidInput("gaussian sigma must be positive".into()));
            }
            let c = center_of(center, grid.n)?;
            let (a, s) = (*amplitude, *sigma);
            Ok(ScalarField::from_fn(grid, move |x| {
                let mut r2 = 0.0;
                for (d, &xd) in x.iter().enumerate() {
                    r2 += (xd - c[d]) * (xd - c[d]);
                }
                a * (-r2 / (2.0 * s * s)).exp()
            }))
        }
        ProfileSection::Bump {
            amplitude,
            radius,
            center,
        } => {
            if !(*radius > 0.0) {
                return Err(Error::InvalidInput("bump radius must be positive".into()));
            }
            let c = center_of(center, grid.n)?;
            let (a, r) = (*amplitude, *radius);
            Ok(ScalarField::from_fn(grid, move |x| {
                let mut r2 = 0.0;
                for (d, &xd) in x.iter().enumerate() {
                    r2 += (xd - c[d]) * (xd - c[d]);
                }
                let s2 = r2 / (r * r);
                if s2 < 1.0 {
                    a * (1.0 - 1.0 / (1.0 - s2)).exp()
                } else {
                    0.0
                }
            }))
        }
        ProfileSection::Barenblatt { mass, t0 } => {
            let spec = BarenblattSpec::new(m, grid.n, *mass, *t0)?;
            Ok(ScalarField::from_fn(grid, move |x| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                spec.eval(r, 0.0)
            }))
        }
        ProfileSection::Dump { path } => {
            let f = kelsim::io::read_field_dump(Path::new(path))?;
            if f.grid != grid {
                return Err(Error::InvalidInput(format!(
                    "dump {} is bound to a different grid",
                    path
                )));
            }
            Ok(f)
        }
    }
}
