use motionlab_core::cycles::{cycles_csv, periodic_points, weighted_cycle_measure, PeriodicSet};
use motionlab_core::thermo::AtomTriple;
use serde::Serialize;

use super::{Context, PressureSource};
use crate::error::CliError;
use crate::output::{write_file, write_json};

pub const AUDIT_FILE: &str = "cycles_audit.csv";

pub fn csv_name(n: usize) -> String {
    format!("cycles_n{n}.csv")
}

pub fn measure_name(n: usize) -> String {
    format!("cycle_measure_n{n}.json")
}

/// The repelling weighted cycle measure at the base parameter.
#[derive(Clone, Debug, Serialize)]
pub struct CycleMeasureFile {
    pub n: usize,
    pub pressure: f64,
    pub pressure_source: PressureSource,
    pub found: usize,
    pub expected: usize,
    pub total_mass: f64,
    pub atoms: Vec<AtomTriple>,
}

pub fn measure_file(set: &PeriodicSet, pressure: f64, source: PressureSource) -> CycleMeasureFile {
    let nu = weighted_cycle_measure(&set.points, pressure, true);
    CycleMeasureFile {
        n: set.n,
        pressure,
        pressure_source: source,
        found: set.found,
        expected: set.expected,
        total_mass: nu.total_mass(),
        atoms: nu.to_triples(),
    }
}

pub fn run(ctx: &Context, single: Option<usize>) -> Result<(), CliError> {
    let periods = match single {
        Some(0) => return Err(CliError::Config("period must be positive".into())),
        Some(n) => vec![n],
        None => ctx.config.periods(),
    };
    if periods.is_empty() {
        return Ok(());
    }
    ctx.check_budget(&periods)?;
    let (pressure, source) = ctx.pressure()?;
    let mut audit = String::from("n,found,expected\n");
    for n in periods {
        let set = periodic_points(&ctx.base_map, &ctx.config.weight, n, &ctx.config.cycles)?;
        write_file(&ctx.out, &csv_name(n), &cycles_csv(&set.points, pressure))?;
        write_json(&ctx.out, &measure_name(n), &measure_file(&set, pressure, source))?;
        audit.push_str(&format!("{n},{},{}\n", set.found, set.expected));
        println!("n = {n}: {}", set.audit());
    }
    write_file(&ctx.out, AUDIT_FILE, &audit)?;
    Ok(())
}
