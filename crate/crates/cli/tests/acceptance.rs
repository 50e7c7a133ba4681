//! One PASS/FAIL line per acceptance criterion; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use motionlab_core::cycles::{periodic_points, weighted_cycle_measure, CycleOptions};
use motionlab_core::metrics::{circle_measure, wasserstein1_normalized};
use motionlab_core::motion::{contraction_report, distortion_curve, Family, MotionGraph, ParamGrid, Tube, WebMeasure};
use motionlab_core::{Complex64, RationalMap, SpherePoint, Weight};
use serde_json::Value;

const LOG2: f64 = std::f64::consts::LN_2;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn cli(config: &Path, out: &Path, threads: usize, command: &str) -> (i32, Duration) {
    let t = Instant::now();
    let code = motionlab::run([
        "motionlab",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        &threads.to_string(),
        command,
    ]);
    (code, t.elapsed())
}

fn pipeline(config: &Path, out: &Path, threads: usize, commands: &[&str]) -> Result<Duration, String> {
    let mut total = Duration::ZERO;
    for c in commands {
        let (code, dt) = cli(config, out, threads, c);
        if code != 0 {
            return Err(format!("`{c}` exited with {code}"));
        }
        total += dt;
    }
    Ok(total)
}

fn json(out: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join(name)).unwrap()).unwrap()
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

const SQUARE: &str = r#"
n_range = [1, 8]
seed = 11

[family]
preset = "quadratic"
base = [0.0, 0.0]

[disk]
radius = 0.05

[grid]
sphere_resolution = 4096
param_mesh = 0.01

[stability]
n_backward = 12
samples = 4096
contrast_center = [0.25, 0.5]
"#;

const WEIGHTED: &str = r#"
n_range = [6, 12]
n_step = 2
seed = 3

[family]
preset = "quadratic"
base = [-0.2, 0.1]

[disk]
radius = 0.01

[grid]
sphere_resolution = 4096
param_mesh = 0.01

[[weight]]
center = [0.0, 0.0]
a = 0.2
b = 0.5
"#;

fn criterion_1(work: &Path) -> Outcome {
    let cfg = write_config(work, "c1.toml", &SQUARE.replace("n_range = [1, 8]", "n_range = [1, 1]"));
    let out = work.join("c1");
    let (code, dt) = cli(&cfg, &out, 1, "equilibrium");
    if code != 0 {
        return outcome(false, format!("exit {code}"));
    }
    let p = f(&json(&out, "equilibrium_report.json")["pressure"]);
    let err = (p - LOG2).abs();
    outcome(
        err <= 1e-9 && dt < Duration::from_secs(10),
        format!("|P - log 2| = {err:e}, {:.1} s", dt.as_secs_f64()),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let f = RationalMap::quadratic(c(0.0, 0.0));
    let mut parts = Vec::new();
    let mut pass = true;
    for n in [6usize, 8, 10] {
        let set = periodic_points(&f, &Weight::zero(), n, &CycleOptions::default()).unwrap();
        let nu = weighted_cycle_measure(&set.points, LOG2, true);
        // a circle sampled 4x finer than the roots; its own distance to the
        // continuous circle is below pi / (4 * 4 * 2^n)
        let circle = circle_measure(4 << n, 1.0, 0.0);
        let d = wasserstein1_normalized(&nu, &circle).unwrap().distance;
        let bound = 4.0 * 2f64.powi(-(n as i32));
        pass &= d <= bound;
        parts.push(format!("n={n}: {d:.3e} <= {bound:.3e}"));
    }
    let dt = t.elapsed();
    pass &= dt < Duration::from_secs(30);
    outcome(pass, format!("{}, {:.1} s", parts.join(", "), dt.as_secs_f64()))
}

struct Weighted {
    verify: Value,
    condition_b: Value,
    elapsed: Duration,
}

fn run_weighted(work: &Path) -> Result<Weighted, String> {
    let cfg = write_config(work, "weighted.toml", WEIGHTED);
    let out = work.join("weighted");
    let elapsed = pipeline(&cfg, &out, 1, &["equilibrium", "motion", "verify"])?;
    Ok(Weighted {
        verify: json(&out, "verify.json"),
        condition_b: json(&out, "condition_b.json"),
        elapsed,
    })
}

fn criterion_3(w: &Result<Weighted, String>) -> Outcome {
    let w = match w {
        Ok(w) => w,
        Err(e) => return outcome(false, e.clone()),
    };
    let rows = w.verify["rows"].as_array().unwrap();
    let d: Vec<f64> = rows.iter().map(|r| f(&r["w1_base"])).collect();
    let ns: Vec<u64> = rows.iter().map(|r| r["n"].as_u64().unwrap()).collect();
    let certified = w.condition_b["passes"].as_bool() == Some(true);
    let decreasing = d.windows(2).all(|p| p[1] < p[0]);
    let last = *d.last().unwrap_or(&f64::NAN);
    let pass = certified && ns == [6, 8, 10, 12] && decreasing && last <= 0.05 && w.elapsed < Duration::from_secs(600);
    outcome(
        pass,
        format!(
            "omega margin {:.3}, W1 {:?}, {:.0} s",
            f(&w.condition_b["margin"]),
            d.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            w.elapsed.as_secs_f64()
        ),
    )
}

struct Square {
    out: PathBuf,
    motion: Value,
    verify: Value,
    stability: Value,
    grid: ParamGrid,
}

fn run_square(work: &Path, name: &str, threads: usize) -> Result<Square, String> {
    let cfg = write_config(
        work,
        &format!("{name}.toml"),
        &format!("cache_dir = {:?}\n{SQUARE}", work.join("cache")),
    );
    let out = work.join(name);
    pipeline(&cfg, &out, threads, &["equilibrium", "cycles", "motion", "verify", "stability"])?;
    Ok(Square {
        motion: json(&out, "motion_summary.json"),
        verify: json(&out, "verify.json"),
        stability: json(&out, "stability.json"),
        grid: ParamGrid::new(c(0.0, 0.0), 0.05, 0.01, c(0.0, 0.0)).unwrap(),
        out,
    })
}

fn criterion_4(w: &Result<Weighted, String>, s: &Result<Square, String>) -> Outcome {
    let (w, s) = match (w, s) {
        (Ok(w), Ok(s)) => (w, s),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e.clone()),
    };
    let row12 = w.verify["rows"].as_array().unwrap().iter().find(|r| r["n"] == 12);
    let m12 = row12.map(|r| f(&r["total_mass"])).unwrap_or(f64::NAN);
    let mut worst = 0.0f64;
    for r in s.verify["rows"].as_array().unwrap() {
        let n = r["n"].as_u64().unwrap() as i32;
        let exact = 1.0 - 2f64.powi(-n);
        worst = worst.max((f(&r["total_mass"]) - exact).abs());
    }
    // the masses are sums of e^{-nP} in floating point
    let pass = (m12 - 1.0).abs() <= 0.05 && worst <= 1e-14;
    outcome(pass, format!("mass at n=12: {m12:.5}; max |mass - (2^n-1)/2^n| for z^2: {worst:e}"))
}

fn criterion_5(s: &Result<Square, String>) -> Outcome {
    let s = match s {
        Ok(s) => s,
        Err(e) => return outcome(false, e.clone()),
    };
    let rows = s.motion["rows"].as_array().unwrap();
    let mut pass = rows.len() == 8;
    let mut min_pair = f64::INFINITY;
    let mut min_mult = f64::INFINITY;
    for r in rows {
        let n = r["n"].as_u64().unwrap() as u32;
        pass &= r["broken"] == 0 && r["non_persistent"] == 0 && r["below_margin"] == 0 && r["collisions"] == 0;
        pass &= r["persistent"].as_u64() == Some(2u64.pow(n) - 1);
        let m = f(&r["min_abs_multiplier"]);
        pass &= m > 1.0;
        min_mult = min_mult.min(m);
        if let Some(p) = r["min_pairwise"].as_f64() {
            pass &= p > 1e-8;
            min_pair = min_pair.min(p);
        }
    }
    let web = WebMeasure::from_json(&fs::read_to_string(s.out.join("web_n1.json")).unwrap()).unwrap();
    let mut closed_err = f64::INFINITY;
    if let [atom] = web.atoms.as_slice() {
        closed_err = 0.0;
        for (k, l) in s.grid.nodes().iter().enumerate() {
            let Some(l) = l else { continue };
            let exact = (1.0 + (1.0 - 4.0 * l).sqrt()) / 2.0;
            let got = atom.graph.value(k).and_then(|p| p.finite()).unwrap_or(c(f64::NAN, 0.0));
            closed_err = closed_err.max((got - exact).norm());
        }
    }
    pass &= closed_err <= 1e-8;
    outcome(
        pass,
        format!("min pairwise {min_pair:.3e}, min |multiplier| {min_mult:.4}, fixed-point error {closed_err:.1e}"),
    )
}

fn criterion_6(w: &Result<Weighted, String>, s: &Result<Square, String>) -> Outcome {
    let mut worst = 0.0f64;
    for v in [w.as_ref().map(|w| &w.verify), s.as_ref().map(|s| &s.verify)] {
        match v {
            Ok(v) => {
                for r in v["rows"].as_array().unwrap() {
                    worst = worst.max(f(&r["invariance_defect"]));
                }
            }
            Err(e) => return outcome(false, e.clone()),
        }
    }
    outcome(worst <= 1e-10, format!("max atom-mass discrepancy {worst:e}"))
}

fn criterion_7() -> Outcome {
    let fam = Family::quadratic();
    let grid = Arc::new(ParamGrid::new(c(0.0, 0.0), 0.05, 0.01, c(0.0, 0.0)).unwrap());
    let mut fractions = Vec::new();
    for r in [0.1, 0.05, 0.025] {
        let tube = Tube::new(MotionGraph::constant(grid.clone(), SpherePoint::ONE), r).unwrap();
        fractions.push(contraction_report(&fam, &tube, 8, 200, 1, 0.6).unwrap().good_fraction);
    }
    let pass = fractions[0] >= 0.95 && fractions.windows(2).all(|p| p[1] >= p[0]);
    outcome(pass, format!("good fractions at radii 0.1, 0.05, 0.025: {fractions:?}"))
}

fn criterion_8() -> Outcome {
    let f = RationalMap::quadratic(c(0.0, 0.0));
    let w = Weight::bump(SpherePoint::ZERO, 0.2, 0.5).unwrap();
    let mut pass = true;
    let mut sup = 0.0f64;
    let mut rows = BTreeMap::new();
    for depth in 1..=10 {
        let curve = distortion_curve(&f, &w, &SpherePoint::ONE, &[2, 3, 4, 5], depth, 64, 1).unwrap();
        let sums: Vec<f64> = curve.iter().map(|p| p.max_sum).collect();
        pass &= sums.iter().all(|v| v.is_finite()) && sums.windows(2).all(|p| p[1] <= p[0]);
        sup = sup.max(sums[0]);
        rows.insert(depth, sums);
    }
    // a convergent series: the deepest curve stays within twice the depth-4 one
    pass &= rows[&10][0] <= 2.0 * rows[&4][0];
    outcome(
        pass,
        format!(
            "sup over depth <= 10 at m=2: {sup:.4e}; depth 10 curve {:?}",
            rows[&10].iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>()
        ),
    )
}

fn criterion_9(s: &Result<Square, String>) -> Outcome {
    let s = match s {
        Ok(s) => s,
        Err(e) => return outcome(false, e.clone()),
    };
    let ratio = f(&s.stability["contrast_ratio"]);
    let inside = f(&s.stability["disk"]["max_abs_laplacian"]);
    let outside = f(&s.stability["contrast"]["max_abs_laplacian"]);
    outcome(
        ratio <= 0.1,
        format!("inside {inside:.3e}, straddling {outside:.3e}, ratio {ratio:.3e}"),
    )
}

fn criterion_10(work: &Path, s: &Result<Square, String>) -> Outcome {
    let first = match s {
        Ok(s) => s,
        Err(e) => return outcome(false, e.clone()),
    };
    // warm cache and a different pool size
    let second = match run_square(work, "square_again", 3) {
        Ok(s) => s,
        Err(e) => return outcome(false, e),
    };
    let list = |d: &Path| {
        let mut v: Vec<String> = fs::read_dir(d)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .collect();
        v.sort();
        v
    };
    let names = list(&first.out);
    let mut pass = names == list(&second.out);
    let mut differing = Vec::new();
    for n in &names {
        if fs::read(first.out.join(n)).ok() != fs::read(second.out.join(n)).ok() {
            differing.push(n.clone());
        }
    }
    pass &= differing.is_empty();
    outcome(pass, format!("{} files compared, differing: {differing:?}", names.len()))
}

fn main() {
    let work = tempfile::tempdir().unwrap();
    let work = work.path();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |k: usize, o: Outcome| {
        println!("criterion {k}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((k, o));
    };
    report(1, criterion_1(work));
    report(2, criterion_2());
    let weighted = run_weighted(work);
    report(3, criterion_3(&weighted));
    let square = run_square(work, "square", 1);
    report(4, criterion_4(&weighted, &square));
    report(5, criterion_5(&square));
    report(6, criterion_6(&weighted, &square));
    report(7, criterion_7());
    report(8, criterion_8());
    report(9, criterion_9(&square));
    report(10, criterion_10(work, &square));
    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(k, _)| *k).collect();
    if failed.is_empty() {
        println!("acceptance: all 10 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
