use motionlab_core::cycles::periodic_points;
use motionlab_core::motion::{build_web_measure, WebMeasure};
use serde::Serialize;

use super::{Context, PressureSource};
use crate::error::CliError;
use crate::output::{csv_float, csv_opt, write_file, write_json};

pub const SUMMARY_JSON: &str = "motion_summary.json";
pub const SUMMARY_CSV: &str = "motion_summary.csv";

pub fn web_name(n: usize) -> String {
    format!("web_n{n}.json")
}

/// Persistence and disjointness of one period's web.
#[derive(Clone, Debug, Serialize)]
pub struct MotionRow {
    pub n: usize,
    pub persistent: usize,
    pub non_persistent: usize,
    pub broken: usize,
    pub below_margin: usize,
    pub total_mass: f64,
    pub lost_mass: f64,
    /// Smallest pointwise distance between two graphs over the grid; absent
    /// with fewer than two graphs.
    pub min_pairwise: Option<f64>,
    pub collisions: usize,
    /// Smallest `|multiplier|` over all kept graphs and nodes.
    pub min_abs_multiplier: Option<f64>,
    pub residual_max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MotionSummary {
    pub pressure: f64,
    pub pressure_source: PressureSource,
    pub grid_nodes: usize,
    pub rows: Vec<MotionRow>,
}

pub fn motion_row(web: &WebMeasure) -> Result<MotionRow, CliError> {
    let s = web.summary();
    let d = web.disjointness()?;
    Ok(MotionRow {
        n: s.n,
        persistent: s.persistent,
        non_persistent: s.non_persistent,
        broken: s.broken,
        below_margin: s.below_margin,
        total_mass: s.total_mass,
        lost_mass: s.lost_mass,
        min_pairwise: d.min_pairwise.is_finite().then_some(d.min_pairwise),
        collisions: d.collisions.len(),
        min_abs_multiplier: web.atoms.iter().map(|a| a.graph.min_abs_multiplier()).reduce(f64::min),
        residual_max: web.atoms.iter().map(|a| a.graph.residual_max()).fold(0.0, f64::max),
    })
}

pub fn summary_csv(rows: &[MotionRow]) -> String {
    let mut out = String::from(
        "n,persistent,non_persistent,broken,below_margin,total_mass,lost_mass,min_pairwise,collisions,min_abs_multiplier,residual_max\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.persistent,
            r.non_persistent,
            r.broken,
            r.below_margin,
            csv_float(r.total_mass),
            csv_float(r.lost_mass),
            csv_opt(r.min_pairwise),
            r.collisions,
            csv_opt(r.min_abs_multiplier),
            csv_float(r.residual_max)
        ));
    }
    out
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let periods = ctx.config.periods();
    if periods.is_empty() {
        return Ok(());
    }
    ctx.check_budget(&periods)?;
    let (pressure, source) = ctx.pressure()?;
    let cfg = &ctx.config;
    let mut rows = Vec::with_capacity(periods.len());
    for n in periods {
        let set = periodic_points(&ctx.base_map, &cfg.weight, n, &cfg.cycles)?;
        let web = build_web_measure(&ctx.family, &ctx.grid, &cfg.weight, n, &set.points, pressure, &cfg.continuation)?;
        let row = motion_row(&web)?;
        write_file(&ctx.out, &web_name(n), &web.to_json())?;
        println!(
            "n = {n}: {} persistent, {} non-persistent, {} broken, lost mass {:e}, min pairwise {}",
            row.persistent,
            row.non_persistent,
            row.broken,
            row.lost_mass,
            csv_opt(row.min_pairwise)
        );
        rows.push(row);
    }
    write_file(&ctx.out, SUMMARY_CSV, &summary_csv(&rows))?;
    write_json(
        &ctx.out,
        SUMMARY_JSON,
        &MotionSummary {
            pressure,
            pressure_source: source,
            grid_nodes: ctx.grid.node_count(),
            rows,
        },
    )?;
    Ok(())
}
