//! The five subcommands. Each computes everything first and then writes its
//! files in a fixed order from a single thread.

pub mod cycles;
pub mod equilibrium;
pub mod motion;
pub mod stability;
pub mod verify;

use std::path::PathBuf;
use std::sync::Arc;

use motionlab_core::cache::PreimageCache;
use motionlab_core::motion::{Family, ParamGrid};
use motionlab_core::thermo::{choose_base_points, BackwardTree, EquilibriumData};
use motionlab_core::weights::ConditionBReport;
use motionlab_core::RationalMap;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{read_artifact, write_json};
use crate::Cli;

pub const EQUILIBRIUM_FILE: &str = "equilibrium.json";
pub const CONDITION_B_FILE: &str = "condition_b.json";

/// Validated configuration plus the objects every command needs.
pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub cache: PreimageCache,
    pub family: Family,
    pub grid: Arc<ParamGrid>,
    /// `f` at the base parameter.
    pub base_map: RationalMap,
    pub degree: usize,
    pub condition_b: ConditionBReport,
}

#[derive(Serialize)]
struct ConditionBFile<'a> {
    degree: usize,
    q: f64,
    #[serde(flatten)]
    report: &'a ConditionBReport,
    margin: f64,
}

/// Where the pressure used for cycle masses came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PressureSource {
    /// The backward-tree estimate stored by `equilibrium`.
    Equilibrium,
    /// A fresh backward-tree estimate, used when no equilibrium file exists.
    BackwardTree,
}

impl Context {
    /// Loads the configuration, checks the family on the parameter grid and
    /// condition (B), and records the margin report.
    pub fn prepare(cli: &Cli) -> Result<Self, CliError> {
        let config = RunConfig::load(&cli.config)?;
        let seed = cli.seed.unwrap_or(config.seed);
        Self::from_config(config.with_seed(seed), cli.out.as_deref())
    }

    pub fn from_config(config: RunConfig, out: Option<&std::path::Path>) -> Result<Self, CliError> {
        let out = config.resolve_out_dir(out);
        let cache = PreimageCache::from_env_or(config.cache_dir.clone());
        if config.q.is_nan() || config.q <= 2.0 {
            return Err(CliError::Config(format!("q must exceed 2, got {}", config.q)));
        }
        if config.grid.sphere_resolution < 2 {
            return Err(CliError::Config("grid.sphere_resolution must be at least 2".into()));
        }
        let family = config.family()?;
        let grid = Arc::new(config.param_grid()?);
        let degree = family.validate_on(&grid)?;
        let base_map = family.at(config.base())?;
        let condition_b = config.weight.check_condition_b(degree, config.q)?;
        write_json(
            &out,
            CONDITION_B_FILE,
            &ConditionBFile {
                degree,
                q: config.q,
                report: &condition_b,
                margin: condition_b.margin(),
            },
        )?;
        if !condition_b.passes {
            return Err(CliError::ConditionB(format!(
                "oscillation bound {} is not below log {} = {} (margin {}); see {}",
                condition_b.omega,
                degree,
                condition_b.bound,
                condition_b.margin(),
                CONDITION_B_FILE
            )));
        }
        Ok(Context {
            config,
            out,
            cache,
            family,
            grid,
            base_map,
            degree,
            condition_b,
        })
    }

    /// The stored equilibrium state, if `equilibrium` has been run.
    pub fn load_equilibrium(&self) -> Result<EquilibriumData, CliError> {
        let text = read_artifact(&self.out, EQUILIBRIUM_FILE)?;
        Ok(EquilibriumData::from_json(&text)?)
    }

    /// Pressure used for `e^{-nP}`: the cross-checked estimate from the
    /// equilibrium file when present, otherwise a backward-tree estimate.
    pub fn pressure(&self) -> Result<(f64, PressureSource), CliError> {
        if self.out.join(EQUILIBRIUM_FILE).is_file() {
            return Ok((self.load_equilibrium()?.cross_checked_pressure(), PressureSource::Equilibrium));
        }
        let opts = &self.config.equilibrium;
        let x = choose_base_points(&self.base_map, 1, opts.seed, opts.min_critical_distance, opts.critical_depth)?[0];
        let tree = BackwardTree::build(&self.base_map, &self.config.weight, &x, opts.pressure_depth, &self.cache)?;
        Ok((tree.pressure_ratio(), PressureSource::BackwardTree))
    }

    /// Rejects periods whose fixed-point count exceeds the cycle budget.
    pub fn check_budget(&self, periods: &[usize]) -> Result<(), CliError> {
        for &n in periods {
            let count = (self.degree as f64).powi(n as i32) + 1.0;
            if count > self.config.cycles.budget as f64 {
                return Err(CliError::Budget(format!(
                    "period {n} has {count} fixed points, above the budget of {}",
                    self.config.cycles.budget
                )));
            }
        }
        Ok(())
    }
}
