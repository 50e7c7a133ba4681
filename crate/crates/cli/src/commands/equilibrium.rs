use motionlab_core::motion::weight_id;
use motionlab_core::thermo::{equilibrium_state, EquilibriumData, SphereGrid};
use motionlab_core::SpherePoint;
use serde::Serialize;

use super::{Context, EQUILIBRIUM_FILE};
use crate::error::CliError;
use crate::output::{csv_float, write_file, write_json};

pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const REPORT_FILE: &str = "equilibrium_report.json";

/// The pressure cross-check and run facts written next to the state.
#[derive(Clone, Debug, Serialize)]
pub struct EquilibriumReport {
    pub pressure: f64,
    pub pressure_tree: f64,
    pub pressure_gap: f64,
    pub iterations: usize,
    pub final_residual: f64,
    pub resolution: usize,
    pub nodes: usize,
    pub mu_atoms: usize,
    pub mu_mass: f64,
    pub critical_hits: usize,
    pub weight_id: String,
    pub condition_b_margin: f64,
    /// Critical points found periodic within `critical_depth` steps, with their periods.
    pub periodic_critical_points: Vec<(SpherePoint, usize)>,
}

/// `iteration,residual,pressure` per power-iteration step.
pub fn convergence_csv(data: &EquilibriumData) -> String {
    let mut out = String::from("iteration,residual,pressure\n");
    for (k, (r, p)) in data.residuals.iter().zip(&data.pressures).enumerate() {
        out.push_str(&format!("{},{},{}\n", k + 1, csv_float(*r), csv_float(*p)));
    }
    out
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let grid = SphereGrid::new(cfg.grid.sphere_resolution);
    let nodes = grid.len();
    let data = equilibrium_state(&ctx.base_map, &cfg.weight, grid, &cfg.equilibrium, &ctx.cache)?;
    let report = EquilibriumReport {
        pressure: data.pressure,
        pressure_tree: data.pressure_tree,
        pressure_gap: data.pressure_gap(),
        iterations: data.residuals.len(),
        final_residual: data.residuals.last().copied().unwrap_or(f64::NAN),
        resolution: cfg.grid.sphere_resolution,
        nodes,
        mu_atoms: data.mu.len(),
        mu_mass: data.mu.total_mass(),
        critical_hits: data.critical_hits,
        weight_id: weight_id(&cfg.weight),
        condition_b_margin: ctx.condition_b.margin(),
        periodic_critical_points: ctx.base_map.periodic_critical_points(cfg.equilibrium.critical_depth)?,
    };
    write_file(&ctx.out, EQUILIBRIUM_FILE, &data.to_json())?;
    write_file(&ctx.out, CONVERGENCE_FILE, &convergence_csv(&data))?;
    write_json(&ctx.out, REPORT_FILE, &report)?;
    println!(
        "pressure {} (tree {}, gap {:e}) after {} iterations",
        report.pressure, report.pressure_tree, report.pressure_gap, report.iterations
    );
    Ok(())
}
