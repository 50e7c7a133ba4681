use std::sync::Arc;

use motionlab_core::motion::{lyapunov_map, HarmonicityReport, LyapunovMap, ParamGrid};
use motionlab_core::{Complex64, SpherePoint};
use serde::Serialize;

use super::Context;
use crate::error::CliError;
use crate::output::{csv_float, csv_opt, write_file, write_json};

pub const LYAPUNOV_CSV: &str = "lyapunov.csv";
pub const CONTRAST_CSV: &str = "lyapunov_contrast.csv";
pub const STABILITY_JSON: &str = "stability.json";

#[derive(Clone, Debug, Serialize)]
pub struct DiskStatistic {
    pub center: [f64; 2],
    pub radius: f64,
    pub mesh: f64,
    pub nodes: usize,
    pub interior_nodes: usize,
    pub flagged: usize,
    pub max_abs_laplacian: f64,
    pub mean_abs_laplacian: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub n_backward: usize,
    pub samples: usize,
    pub base_point: SpherePoint,
    pub disk: DiskStatistic,
    pub contrast: Option<DiskStatistic>,
    /// `max |Laplacian|` on the disk over the same on the contrast disk.
    pub contrast_ratio: Option<f64>,
}

/// `index,re,im,lyapunov,flagged,laplacian` for every in-disk node.
pub fn lyapunov_csv(map: &LyapunovMap, h: &HarmonicityReport) -> String {
    let mut out = String::from("index,re,im,lyapunov,flagged,laplacian\n");
    for (k, l) in map.grid.nodes().iter().enumerate() {
        let Some(l) = l else { continue };
        out.push_str(&format!(
            "{k},{},{},{},{},{}\n",
            csv_float(l.re),
            csv_float(l.im),
            csv_opt(map.values[k]),
            u8::from(map.flagged[k]),
            csv_opt(h.defect[k])
        ));
    }
    out
}

fn statistic(grid: &ParamGrid, map: &LyapunovMap, h: &HarmonicityReport) -> DiskStatistic {
    DiskStatistic {
        center: [grid.center().re, grid.center().im],
        radius: grid.radius(),
        mesh: grid.mesh(),
        nodes: grid.node_count(),
        interior_nodes: h.interior_nodes,
        flagged: map.flagged.iter().filter(|f| **f).count(),
        max_abs_laplacian: h.max_abs,
        mean_abs_laplacian: h.mean_abs,
    }
}

pub fn run(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let st = &cfg.stability;
    let contrast_grid = match st.contrast_center {
        Some([re, im]) => {
            let c = Complex64::new(re, im);
            let g = Arc::new(cfg.param_grid_at(c, c)?);
            let d = ctx.family.validate_on(&g)?;
            if d != ctx.degree {
                return Err(CliError::Config(format!(
                    "degree {d} on the contrast disk differs from {}",
                    ctx.degree
                )));
            }
            Some(g)
        }
        None => None,
    };
    let map = lyapunov_map(&ctx.family, &ctx.grid, st.n_backward, st.samples, cfg.seed)?;
    let h = map.harmonicity()?;
    let disk = statistic(&ctx.grid, &map, &h);
    let contrast = match &contrast_grid {
        Some(g) => {
            let m = lyapunov_map(&ctx.family, g, st.n_backward, st.samples, cfg.seed)?;
            let hc = m.harmonicity()?;
            Some((statistic(g, &m, &hc), lyapunov_csv(&m, &hc)))
        }
        None => None,
    };
    let contrast_ratio = contrast
        .as_ref()
        .and_then(|(s, _)| (s.max_abs_laplacian > 0.0).then(|| disk.max_abs_laplacian / s.max_abs_laplacian));
    write_file(&ctx.out, LYAPUNOV_CSV, &lyapunov_csv(&map, &h))?;
    if let Some((_, csv)) = &contrast {
        write_file(&ctx.out, CONTRAST_CSV, csv)?;
    }
    println!(
        "max |Laplacian L| = {:e} over {} interior nodes{}",
        disk.max_abs_laplacian,
        disk.interior_nodes,
        contrast_ratio.map(|r| format!(", contrast ratio {r:e}")).unwrap_or_default()
    );
    write_json(
        &ctx.out,
        STABILITY_JSON,
        &StabilityReport {
            n_backward: st.n_backward,
            samples: st.samples,
            base_point: map.base_point,
            disk,
            contrast: contrast.map(|(s, _)| s),
            contrast_ratio,
        },
    )?;
    Ok(())
}
