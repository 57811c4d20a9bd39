use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use afmdw::acceptance;
use afmdw::config::{validate_config, RunConfig, StepperKind};
use afmdw::diagnostics::Trace;
use afmdw::disim::{brute_force_stationary, integrate_di_sgd, integrate_di_st, SearchBox, StParams};
use afmdw::engine::{initial_state, oracle_bounds, run_problem};
use afmdw::oracle::Problem;
use anyhow::anyhow;

use crate::svg::{line_chart, Axes, Series};
use crate::Common;

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_VIOLATION: u8 = 3;
pub const EXIT_IO: u8 = 4;

pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

type Outcome = Result<u8, Failure>;

fn fail(code: u8, error: impl Into<anyhow::Error>) -> Failure {
    Failure { code, error: error.into() }
}

fn core_failure(e: afmdw::Error) -> Failure {
    let code = match e {
        afmdw::Error::ConfigViolation(_) | afmdw::Error::NonFinite(_) => EXIT_VIOLATION,
        _ => EXIT_CONFIG,
    };
    fail(code, e)
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    fail(EXIT_IO, anyhow!("{}: {e}", path.display()))
}

fn overrides(common: &Common, extra: &[String]) -> Vec<String> {
    let mut out = common.set.clone();
    if let Some(seed) = common.seed {
        out.push(format!("optimizer.seed={seed}"));
    }
    out.extend_from_slice(extra);
    if common.force {
        out.push("optimizer.strict=false".into());
    }
    out
}

fn config_text(common: &Common) -> Result<String, Failure> {
    match &common.config {
        Some(path) => fs::read_to_string(path).map_err(|e| io_failure(path, e)),
        None => Ok(String::new()),
    }
}

fn load(common: &Common, extra: &[String]) -> Result<(RunConfig, Problem), Failure> {
    let text = config_text(common)?;
    let cfg = RunConfig::parse_with_overrides(&text, &overrides(common, extra)).map_err(core_failure)?;
    let problem = Problem::from_spec(&cfg.problem, cfg.seed).map_err(core_failure)?;
    Ok((cfg, problem))
}

/// Creates `dir` and refuses to replace any of `files` unless forced.
fn prepare_out(dir: &Path, files: &[&str], force: bool) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    if !force {
        if let Some(f) = files.iter().map(|f| dir.join(f)).find(|p| p.exists()) {
            return Err(fail(EXIT_IO, anyhow!("{} exists; pass --force to overwrite", f.display())));
        }
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn residual_series(label: &str, trace: &Trace) -> Series {
    Series { label: label.into(), points: trace.rows.iter().map(|r| (r.k as f64, r.residual)).collect() }
}

const RUN_FILES: [&str; 5] = ["trace.csv", "summary.txt", "config.ini", "residual.svg", "objective.svg"];

fn write_run(dir: &Path, cfg: &RunConfig, report: &str, trace: &Trace) -> Result<(), Failure> {
    let path = dir.join("trace.csv");
    let file = File::create(&path).map_err(|e| io_failure(&path, e))?;
    let mut w = BufWriter::new(file);
    trace.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(&path, e))?;
    write_file(&dir.join("summary.txt"), &format!("{}\n{report}", trace.summary))?;
    write_file(&dir.join("config.ini"), &cfg.to_string())?;
    let log = Axes { log_x: true, log_y: true };
    write_file(
        &dir.join("residual.svg"),
        &line_chart("||m_k + sigma x_k||", "k", "residual", &[residual_series(&trace.mode, trace)], log),
    )?;
    let mut series = vec![Series {
        label: "objective".into(),
        points: trace.rows.iter().map(|r| (r.k as f64, r.objective)).collect(),
    }];
    if trace.rows.iter().any(|r| r.lyapunov.is_some()) {
        series.push(Series {
            label: "h".into(),
            points: trace.rows.iter().filter_map(|r| r.lyapunov.map(|h| (r.k as f64, h))).collect(),
        });
    }
    write_file(
        &dir.join("objective.svg"),
        &line_chart("f(x_k) + sigma/2 ||x_k||^2", "k", "value", &series, Axes { log_x: true, log_y: false }),
    )
}

fn check_failures(cfg: &RunConfig, trace: &Trace) -> Option<String> {
    let s = &trace.summary;
    let mut bad = Vec::new();
    if s.bound_violations > 0 {
        bad.push(format!("{} residual-bound violations", s.bound_violations));
    }
    if s.shadow_failures > 0 {
        bad.push(format!("{} shadow-identity failures", s.shadow_failures));
    }
    if s.q_violations > 0 {
        bad.push(format!("{} iterates above Q", s.q_violations));
    }
    (cfg.strict && !bad.is_empty()).then(|| bad.join(", "))
}

pub fn run(common: &Common) -> Outcome {
    let (cfg, problem) = load(common, &[])?;
    prepare_out(&common.out, &RUN_FILES, common.force)?;
    let out = run_problem(&cfg, &problem).map_err(core_failure)?;
    write_run(&common.out, &cfg, &out.report.to_string(), &out.trace)?;
    print!("{}", out.trace.summary);
    if let Some(msg) = check_failures(&cfg, &out.trace) {
        return Err(fail(EXIT_VIOLATION, anyhow!("{msg}")));
    }
    Ok(0)
}

struct Axis {
    key: String,
    values: Vec<String>,
}

fn parse_grid(grid: &[String]) -> Result<Vec<Axis>, Failure> {
    grid.iter()
        .map(|g| {
            let (key, values) =
                g.split_once('=').ok_or_else(|| fail(EXIT_CONFIG, anyhow!("grid axis `{g}` is not key=v1,v2,...")))?;
            Ok(Axis { key: key.trim().to_string(), values: split_top_level(values) })
        })
        .collect()
}

/// Splits on commas outside parentheses, so `power(0.1,0.6)` stays whole.
fn split_top_level(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut cur = String::new();
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(std::mem::take(&mut cur));
                continue;
            }
            _ => {}
        }
        cur.push(c);
    }
    out.push(cur);
    out.into_iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect()
}

/// Cells of the product grid, first axis varying slowest.
fn cells(axes: &[Axis]) -> Vec<Vec<String>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.values.iter().map(move |v| {
                    let mut c = prefix.clone();
                    c.push(format!("{}={v}", axis.key));
                    c
                })
            })
            .collect();
    }
    out
}

struct CellResult {
    label: String,
    outcome: Result<Trace, String>,
}

fn run_cell(common: &Common, dir: &Path, cell: &[String]) -> Result<Trace, String> {
    let (cfg, problem) = load(common, cell).map_err(|f| format!("{:#}", f.error))?;
    prepare_out(dir, &RUN_FILES, common.force).map_err(|f| format!("{:#}", f.error))?;
    let out = run_problem(&cfg, &problem).map_err(|e| e.to_string())?;
    write_run(dir, &cfg, &out.report.to_string(), &out.trace).map_err(|f| format!("{:#}", f.error))?;
    match check_failures(&cfg, &out.trace) {
        Some(msg) => Err(msg),
        None => Ok(out.trace),
    }
}

pub fn sweep(common: &Common, grid: &[String], jobs: usize) -> Outcome {
    let axes = parse_grid(grid)?;
    if axes.is_empty() || axes.iter().any(|a| a.values.is_empty()) {
        eprintln!("warning: empty grid, nothing to run");
        return Ok(0);
    }
    let cells = cells(&axes);
    prepare_out(&common.out, &["slopes.csv", "residuals.svg"], common.force)?;
    let results: Mutex<Vec<Option<CellResult>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, cells.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(cell) = cells.get(i) else { break };
                let dir = common.out.join(format!("cell-{i:03}"));
                let outcome = run_cell(common, &dir, cell);
                let label = cell.iter().map(|c| c.rsplit('.').next().unwrap_or(c)).collect::<Vec<_>>().join(" ");
                results.lock().expect("no poisoned workers")[i] = Some(CellResult { label, outcome });
            });
        }
    });
    let results: Vec<CellResult> =
        results.into_inner().expect("no poisoned workers").into_iter().map(|r| r.expect("every cell ran")).collect();

    let mut csv = String::from("cell,params,status,slope,final_residual,bound_violations\n");
    let mut series = Vec::new();
    let mut failed = 0;
    for (i, (cell, r)) in cells.iter().zip(&results).enumerate() {
        let params = cell.join(";");
        match &r.outcome {
            Ok(trace) => {
                let s = &trace.summary;
                let slope = s.residual_slope.map_or(String::new(), |v| format!("{v:.6}"));
                csv.push_str(&format!(
                    "cell-{i:03},{params},ok,{slope},{:.6e},{}\n",
                    s.final_residual, s.bound_violations
                ));
                series.push(residual_series(&r.label, trace));
            }
            Err(msg) => {
                failed += 1;
                eprintln!("cell-{i:03} ({params}) failed: {msg}");
                csv.push_str(&format!("cell-{i:03},{params},failed: {},,,\n", msg.replace(',', ";")));
            }
        }
    }
    write_file(&common.out.join("slopes.csv"), &csv)?;
    write_file(
        &common.out.join("residuals.svg"),
        &line_chart("||m_k + sigma x_k||", "k", "residual", &series, Axes { log_x: true, log_y: true }),
    )?;
    print!("{csv}");
    if failed > 0 {
        return Err(fail(EXIT_VIOLATION, anyhow!("{failed} of {} cells failed", cells.len())));
    }
    Ok(0)
}

fn stationary_box(problem: &Problem, cfg: &RunConfig) -> SearchBox {
    SearchBox::cube(problem.dim(), problem.lipschitz_bound().value / cfg.sigma + 1.0)
}

pub fn simulate(common: &Common, dt: f64, horizon: f64) -> Outcome {
    let (cfg, problem) = load(common, &[])?;
    let files = ["path.csv", "path.svg"];
    prepare_out(&common.out, &files, common.force)?;
    let start = initial_state(&cfg, &problem).map_err(core_failure)?;
    let path = if cfg.stepper == StepperKind::SingleTimescale {
        let params = StParams {
            sigma: cfg.sigma,
            tau1: cfg.tau1().unwrap_or(1.0),
            tau2: cfg.tau2().unwrap_or(4.0),
            epsilon: cfg.epsilon,
        };
        integrate_di_st(&problem, &start.x, &start.m, &start.v, params, dt, horizon)
    } else {
        integrate_di_sgd(&problem, &start.x, cfg.sigma, dt, horizon)
    }
    .map_err(core_failure)?;
    let csv_path = common.out.join("path.csv");
    let file = File::create(&csv_path).map_err(|e| io_failure(&csv_path, e))?;
    let mut w = BufWriter::new(file);
    path.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| io_failure(&csv_path, e))?;
    let series: Vec<Series> = (0..problem.dim())
        .map(|j| Series {
            label: format!("x_{}", j + 1),
            points: path.times.iter().zip(&path.x).map(|(t, x)| (*t, x[j])).collect(),
        })
        .collect();
    write_file(
        &common.out.join("path.svg"),
        &line_chart(path.mode, "t", "x(t)", &series, Axes { log_x: false, log_y: false }),
    )?;
    let last = path.x.last().expect("nonempty path");
    println!("mode = {}", path.mode);
    println!("final_point = {last:?}");
    if problem.piecewise().is_some() && problem.dim() <= 3 {
        let set =
            brute_force_stationary(&problem, &stationary_box(&problem, &cfg), cfg.sigma, 0.1).map_err(core_failure)?;
        println!("distance_to_stationary_set = {:.6e}", set.distance(last).map_err(core_failure)?);
    }
    Ok(0)
}

pub fn diagnose(common: &Common) -> Outcome {
    let (cfg, problem) = load(common, &[])?;
    prepare_out(&common.out, &["diagnose.txt"], common.force)?;
    let report = validate_config(&cfg, oracle_bounds(&problem, cfg.oracle));
    let mut text = format!("problem {} (dim {})\n{report}", problem.id(), problem.dim());
    if problem.piecewise().is_some() && problem.dim() <= 3 {
        let set =
            brute_force_stationary(&problem, &stationary_box(&problem, &cfg), cfg.sigma, 0.1).map_err(core_failure)?;
        text.push_str(&format!("stationary set for sigma = {}: {} convex pieces\n", cfg.sigma, set.pieces.len()));
        for (i, piece) in set.pieces.iter().enumerate() {
            text.push_str(&format!("  piece {i}: vertices {:?}\n", piece.vertices));
        }
    }
    write_file(&common.out.join("diagnose.txt"), &text)?;
    print!("{text}");
    Ok(if report.passed() { 0 } else { EXIT_VIOLATION })
}

pub fn accept() -> Outcome {
    let mut failed = 0;
    for (id, _, _) in acceptance::CRITERIA {
        let r = acceptance::run_criterion(id).expect("listed criterion");
        println!("{r}");
        failed += usize::from(!r.passed);
    }
    println!("{} of {} checks passed", acceptance::CRITERIA.len() - failed, acceptance::CRITERIA.len());
    Ok(if failed == 0 { 0 } else { EXIT_VIOLATION })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values_keep_schedule_arguments() {
        assert_eq!(split_top_level("power(0.1,0.6), constant(1)"), ["power(0.1,0.6)", "constant(1)"]);
        assert!(split_top_level(" , ").is_empty());
    }

    #[test]
    fn product_order_is_row_major() {
        let axes = vec![
            Axis { key: "a".into(), values: vec!["1".into(), "2".into()] },
            Axis { key: "b".into(), values: vec!["x".into(), "y".into()] },
        ];
        let c = cells(&axes);
        assert_eq!(c[1], ["a=1", "b=y"]);
        assert_eq!(c[2], ["a=2", "b=x"]);
    }
}
