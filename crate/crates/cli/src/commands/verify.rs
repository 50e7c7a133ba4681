use motionlab_core::metrics::{wasserstein1_with, W1Options};
use motionlab_core::motion::{slice, slice_invariance_defect, weight_id, ParamGrid, WebMeasure};
use motionlab_core::thermo::DiscreteMeasure;
use rayon::prelude::*;
use serde::Serialize;

use super::motion::web_name;
use super::Context;
use crate::error::CliError;
use crate::output::{csv_float, csv_opt, read_artifact, write_file, write_json};

pub const VERIFY_JSON: &str = "verify.json";
pub const VERIFY_CSV: &str = "verify.csv";

#[derive(Clone, Debug, Serialize)]
pub struct VerifyRow {
    pub n: usize,
    pub total_mass: f64,
    pub lost_mass: f64,
    /// `W1` between the normalised base slice and the equilibrium state.
    pub w1_base: Option<f64>,
    /// `W1` at each checked node against the slice of the largest period there;
    /// empty for the largest period itself.
    pub w1_nodes: Vec<Option<f64>>,
    pub invariance_defect: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub base: [f64; 2],
    /// Parameters of the checked nodes besides the base.
    pub nodes: Vec<[f64; 2]>,
    /// Period whose slices serve as targets away from the base.
    pub reference_n: usize,
    pub rows: Vec<VerifyRow>,
}

/// `count` in-disk nodes other than the base, evenly spread in row-major order.
pub fn spread_nodes(grid: &ParamGrid, count: usize) -> Vec<usize> {
    let others: Vec<usize> = (0..grid.len())
        .filter(|&k| k != grid.base_index() && grid.node(k).is_some())
        .collect();
    if others.len() <= count {
        return others;
    }
    (0..count).map(|j| others[(2 * j + 1) * others.len() / (2 * count)]).collect()
}

fn normalized_w1(a: &DiscreteMeasure, b: &DiscreteMeasure, opts: &W1Options) -> Result<Option<f64>, CliError> {
    if a.total_mass() <= 0.0 || b.total_mass() <= 0.0 {
        return Ok(None);
    }
    Ok(Some(wasserstein1_with(&a.normalized(), &b.normalized(), opts)?.distance))
}

pub fn verify_csv(report: &VerifyReport) -> String {
    let k = report.nodes.len();
    let mut out = String::from("n,total_mass,lost_mass,w1_base");
    for j in 0..k {
        out.push_str(&format!(",w1_node{j}"));
    }
    out.push_str(",invariance_defect\n");
    for r in &report.rows {
        out.push_str(&format!(
            "{},{},{},{}",
            r.n,
            csv_float(r.total_mass),
            csv_float(r.lost_mass),
            csv_opt(r.w1_base)
        ));
        for v in &r.w1_nodes {
            out.push(',');
            out.push_str(&csv_opt(*v));
        }
        out.push_str(&format!(",{}\n", csv_float(r.invariance_defect)));
    }
    out
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let mut periods = cfg.verify_periods();
    periods.sort_unstable();
    periods.dedup();
    let eq = ctx.load_equilibrium()?;
    let expected_id = weight_id(&cfg.weight);
    let mut webs = Vec::with_capacity(periods.len());
    for &n in &periods {
        let web = WebMeasure::from_json(&read_artifact(&ctx.out, &web_name(n))?)?;
        if web.weight_id != expected_id || *web.grid != *ctx.grid {
            return Err(CliError::Config(format!(
                "{} was made with another weight or grid; rerun motion",
                web_name(n)
            )));
        }
        webs.push(web);
    }
    let Some(reference) = webs.last() else {
        return Ok(());
    };
    let grid = ctx.grid.clone();
    let nodes = spread_nodes(&grid, cfg.verify.other_nodes);
    let targets: Vec<DiscreteMeasure> = nodes.iter().map(|&k| slice(reference, k)).collect::<Result<_, _>>()?;
    let live: Vec<usize> = (0..grid.len()).filter(|&k| grid.node(k).is_some()).collect();
    let mut rows = Vec::with_capacity(webs.len());
    for web in &webs {
        let base = slice(web, grid.base_index())?;
        let w1_base = normalized_w1(&base, &eq.mu, &cfg.w1)?;
        let w1_nodes = if web.n == reference.n {
            vec![None; nodes.len()]
        } else {
            nodes
                .iter()
                .zip(&targets)
                .map(|(&k, t)| normalized_w1(&slice(web, k)?, t, &cfg.w1))
                .collect::<Result<_, CliError>>()?
        };
        let invariance_defect = live
            .par_iter()
            .map(|&k| slice_invariance_defect(&ctx.family, web, k))
            .collect::<Result<Vec<f64>, _>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!(
            "n = {}: mass {}, W1 at base {}, invariance defect {:e}",
            web.n,
            web.total_mass(),
            csv_opt(w1_base),
            invariance_defect
        );
        rows.push(VerifyRow {
            n: web.n,
            total_mass: web.total_mass(),
            lost_mass: web.lost_mass(),
            w1_base,
            w1_nodes,
            invariance_defect,
        });
    }
    let c = |l: motionlab_core::Complex64| [l.re, l.im];
    let report = VerifyReport {
        base: c(grid.base()),
        nodes: nodes.iter().map(|&k| c(grid.node(k).expect("in-disk node"))).collect(),
        reference_n: reference.n,
        rows,
    };
    write_file(&ctx.out, VERIFY_CSV, &verify_csv(&report))?;
    write_json(&ctx.out, VERIFY_JSON, &report)?;
    Ok(())
}
