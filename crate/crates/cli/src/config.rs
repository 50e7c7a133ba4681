use std::path::{Path, PathBuf};

use motionlab_core::cycles::CycleOptions;
use motionlab_core::metrics::W1Options;
use motionlab_core::motion::{ContinuationOptions, Family, ParamGrid};
use motionlab_core::thermo::EquilibriumOptions;
use motionlab_core::{Complex64, Weight};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Output directory override, next to the cache override.
pub const OUT_ENV: &str = "MOTIONLAB_OUT";

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    /// `"quadratic"` for `z^2 + lambda`; otherwise `num` and `den` are required.
    #[serde(default)]
    pub preset: Option<String>,
    /// `num[k]` lists the coefficients of `z^k` as a polynomial in `lambda`,
    /// constant term first, each as `[re, im]`.
    #[serde(default)]
    pub num: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub den: Option<Vec<Vec<[f64; 2]>>>,
    /// Base parameter.
    pub base: [f64; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskConfig {
    /// Defaults to the base parameter.
    #[serde(default)]
    pub center: Option<[f64; 2]>,
    pub radius: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub sphere_resolution: usize,
    pub param_mesh: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            sphere_resolution: 4096,
            param_mesh: 0.01,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Periods to tabulate; defaults to the run's period range.
    pub ns: Option<Vec<usize>>,
    /// Number of grid nodes besides the base checked against transported targets.
    pub other_nodes: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { ns: None, other_nodes: 4 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityConfig {
    pub n_backward: usize,
    pub samples: usize,
    /// Center of a second disk of the same radius and mesh for the contrast statistic.
    pub contrast_center: Option<[f64; 2]>,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            n_backward: 12,
            samples: 4096,
            contrast_center: None,
        }
    }
}

fn default_q() -> f64 {
    3.0
}

fn default_step() -> usize {
    1
}

/// Everything a run needs, read from one TOML file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilyConfig,
    pub disk: DiskConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// Kernel terms `{center = [re, im] | "inf", a, b}`; empty means `phi = 0`.
    #[serde(default)]
    pub weight: Weight,
    /// Exponent of the `log^q` modulus in condition (B).
    #[serde(default = "default_q")]
    pub q: f64,
    /// Inclusive period range `[first, last]`; empty when `first > last`.
    pub n_range: [usize; 2],
    /// Stride through `n_range`.
    #[serde(default = "default_step")]
    pub n_step: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub equilibrium: EquilibriumOptions,
    #[serde(default)]
    pub cycles: CycleOptions,
    #[serde(default)]
    pub continuation: ContinuationOptions,
    #[serde(default)]
    pub w1: W1Options,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

fn cx(v: [f64; 2]) -> Complex64 {
    Complex64::new(v[0], v[1])
}

fn poly_list(raw: &[Vec<[f64; 2]>]) -> Vec<Vec<Complex64>> {
    raw.iter().map(|p| p.iter().map(|c| cx(*c)).collect()).collect()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// Applies the command-line seed to every seeded stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.equilibrium.seed = seed;
        self.cycles.seed = seed;
        self
    }

    pub fn base(&self) -> Complex64 {
        cx(self.family.base)
    }

    pub fn family(&self) -> Result<Family, CliError> {
        let f = &self.family;
        match (f.preset.as_deref(), &f.num, &f.den) {
            (Some("quadratic"), None, None) => Ok(Family::quadratic()),
            (Some(other), None, None) => Err(CliError::Config(format!("unknown family preset `{other}`"))),
            (None, Some(num), Some(den)) => Ok(Family::new(poly_list(num), poly_list(den))?),
            _ => Err(CliError::Config("family needs either `preset` or both `num` and `den`".into())),
        }
    }

    pub fn param_grid(&self) -> Result<ParamGrid, CliError> {
        self.param_grid_at(self.disk.center.map(cx).unwrap_or(self.base()), self.base())
    }

    /// A grid of the configured radius and mesh centred at `center`.
    pub fn param_grid_at(&self, center: Complex64, base: Complex64) -> Result<ParamGrid, CliError> {
        Ok(ParamGrid::new(center, self.disk.radius, self.grid.param_mesh, base)?)
    }

    pub fn periods(&self) -> Vec<usize> {
        let [a, b] = self.n_range;
        (a.max(1)..=b).step_by(self.n_step.max(1)).collect()
    }

    pub fn verify_periods(&self) -> Vec<usize> {
        self.verify.ns.clone().unwrap_or_else(|| self.periods())
    }

    /// `--out`, then `$MOTIONLAB_OUT`, then the config, then `./motionlab-out`.
    pub fn resolve_out_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        match std::env::var_os(OUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.out_dir.clone().unwrap_or_else(|| PathBuf::from("motionlab-out")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
n_range = [1, 3]
seed = 5

[family]
preset = "quadratic"
base = [-0.2, 0.1]

[disk]
radius = 0.05

[[weight]]
center = [0.0, 0.0]
a = 0.2
b = 0.5

[equilibrium]
depth = 9
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = RunConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.periods(), vec![1, 2, 3]);
        assert_eq!(c.equilibrium.depth, 9);
        assert_eq!(c.equilibrium.base_points, EquilibriumOptions::default().base_points);
        assert_eq!(c.weight.terms().len(), 1);
        assert_eq!(c.base(), Complex64::new(-0.2, 0.1));
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back.to_toml(), c.to_toml());
        let g = c.param_grid().unwrap();
        assert_eq!(g.node(g.base_index()), Some(c.base()));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_families() {
        assert!(RunConfig::from_toml(&format!("{SAMPLE}\n[extra]\nx = 1\n")).is_err());
        let c = RunConfig::from_toml(&SAMPLE.replace("quadratic", "cubic")).unwrap();
        assert!(c.family().is_err());
    }

    #[test]
    fn empty_range_has_no_periods() {
        let c = RunConfig::from_toml(&SAMPLE.replace("[1, 3]", "[4, 2]")).unwrap();
        assert!(c.periods().is_empty());
    }
}
