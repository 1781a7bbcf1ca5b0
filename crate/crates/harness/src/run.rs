//! Single runs: solve, probe, and write artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nlsdp_core::alm::{alm_solve, AlmOutcome, Reference, TRACE_CSV_HEADER};
use nlsdp_core::analysis::{
    assumption1_probe, calmness_probe, error_bound_monitor, estimate_q_rate,
    quadratic_growth_probe, residual_bound_constant, CalmnessReport, ErrorBoundReport, RateReport,
    TauConstants,
};
use nlsdp_core::problem::{fixture, Fixture};
use nlsdp_core::{AlmStatus, KElement, KktPoint, SymMatrix};
use serde_json::{json, Value};

use crate::report::{matrix_rows, REPORT_SCHEMA};
use crate::spec::{policy_name, Probe, RunSpec};
use crate::HarnessError;

pub const TRACE_FILE: &str = "trace.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Everything a run produces, before it touches the disk.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: AlmStatus,
    pub outer_iterations: usize,
    pub final_r: f64,
    /// `None` when the rate probe was not requested or failed.
    pub q_hat: Option<f64>,
    pub rate_reliable: bool,
    pub trace_csv: String,
    pub report: Value,
    pub summary: String,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.status == AlmStatus::Converged
    }
}

fn start_point(spec: &RunSpec, fx: &Fixture) -> Result<KktPoint, HarnessError> {
    let d = &fx.default_start;
    let x = spec.start.x.clone().unwrap_or_else(|| d.x.clone());
    let y = spec.start.y.clone().unwrap_or_else(|| d.lambda.vec.clone());
    let gamma = match &spec.start.gamma {
        None => d.lambda.mat.clone(),
        Some(g) => {
            let n = d.lambda.mat.n();
            if g.len() != n * n {
                return Err(HarnessError::Spec(format!(
                    "start_gamma needs {} entries, got {}",
                    n * n,
                    g.len()
                )));
            }
            SymMatrix::from_fn(n, |i, j| 0.5 * (g[i * n + j] + g[j * n + i]))
        }
    };
    let pt = KktPoint::new(x, KElement::new(y, gamma));
    pt.check_dims(fx.problem.as_ref())
        .map_err(|e| HarnessError::Spec(format!("start point: {e}")))?;
    Ok(pt)
}

fn err_value(e: impl std::fmt::Display) -> Value {
    json!({ "error": e.to_string() })
}

macro_rules! to_json {
    ($v:expr) => {
        serde_json::to_value($v).expect("report types serialize")
    };
}

struct Probes {
    json: serde_json::Map<String, Value>,
    lines: Vec<String>,
    q_hat: Option<f64>,
    reliable: bool,
}

fn run_probes(spec: &RunSpec, fx: &Fixture, out: &AlmOutcome) -> Probes {
    let prob = fx.problem.as_ref();
    let model = fx.model.as_ref();
    let ps = &spec.probe_settings;
    let mut json = serde_json::Map::new();
    let mut lines = Vec::new();
    let (mut q_hat, mut reliable) = (None, false);

    let wants = |p: Probe| spec.probes.contains(&p);
    let eb: Option<Result<ErrorBoundReport, _>> = (wants(Probe::ErrorBound) || wants(Probe::Rate))
        .then(|| error_bound_monitor(prob, &out.trace, out.trace.len().max(1)));
    let calm: Option<Result<CalmnessReport, _>> = wants(Probe::Calmness).then(|| {
        calmness_probe(
            prob,
            &fx.solution,
            model,
            ps.calmness_radius,
            ps.calmness_samples,
            spec.seed,
        )
    });

    if wants(Probe::Rate) {
        match estimate_q_rate(&out.trace, Some(model)) {
            Ok(rep) => {
                let rep: RateReport = match tau_constants(&out.trace, eb.as_ref(), calm.as_ref()) {
                    Some(c) => rep.with_tau(&out.trace, &c),
                    None => rep,
                };
                q_hat = rep.q_hat;
                reliable = rep.reliable;
                lines.push(format!(
                    "rate: q_hat = {} over {} tail points ({}), target from {:?}",
                    fmt_opt(rep.q_hat),
                    rep.tail_points,
                    if rep.reliable {
                        "reliable"
                    } else {
                        "unreliable"
                    },
                    rep.target_source
                ));
                if rep.tau_bound_series.is_none() {
                    lines.push("rate: tau series needs the calmness probe".into());
                }
                json.insert("rate".into(), to_json!(&rep));
            }
            Err(e) => {
                lines.push(format!("rate: {e}"));
                json.insert("rate".into(), err_value(e));
            }
        }
    }
    if let Some(c) = &calm {
        match c {
            Ok(rep) => {
                lines.push(format!(
                    "calmness: kappa_hat = {} at radius {:e}, {} of {} perturbed solves failed",
                    fmt_opt(rep.kappa_hat),
                    rep.radius,
                    rep.failures,
                    rep.count
                ));
                json.insert("calmness".into(), to_json!(rep));
            }
            Err(e) => {
                lines.push(format!("calmness: {e}"));
                json.insert("calmness".into(), err_value(e));
            }
        }
    }
    if wants(Probe::Growth) {
        let rho = out.trace.last().map_or(spec.alm.rho0, |r| r.rho);
        match quadratic_growth_probe(
            prob,
            &fx.solution,
            model,
            rho,
            ps.growth_radius,
            ps.growth_samples,
            spec.seed,
        ) {
            Ok(rep) => {
                lines.push(format!(
                    "growth: l_hat = {:.6e} at rho = {:e}, success = {}",
                    rep.l_hat, rep.rho, rep.success
                ));
                json.insert("growth".into(), to_json!(&rep));
            }
            Err(e) => {
                lines.push(format!("growth: {e}"));
                json.insert("growth".into(), err_value(e));
            }
        }
    }
    if wants(Probe::Assumption1) {
        match assumption1_probe(
            prob,
            &fx.solution,
            model,
            ps.assumption1_radius,
            ps.assumption1_samples,
            spec.seed,
        ) {
            Ok(rep) => {
                lines.push(format!(
                    "assumption1: max ratio = {} over {} samples",
                    fmt_opt(rep.max_ratio),
                    rep.ratios.len()
                ));
                json.insert("assumption1".into(), to_json!(&rep));
            }
            Err(e) => {
                lines.push(format!("assumption1: {e}"));
                json.insert("assumption1".into(), err_value(e));
            }
        }
    }
    if wants(Probe::ErrorBound) {
        match eb.as_ref().expect("computed above") {
            Ok(rep) => {
                lines.push(format!(
                    "error-bound: kappa3 = {}, {} zero-residual rows skipped",
                    fmt_opt(rep.kappa3),
                    rep.skipped
                ));
                json.insert("error-bound".into(), to_json!(rep));
            }
            Err(e) => {
                lines.push(format!("error-bound: {e}"));
                json.insert("error-bound".into(), err_value(e));
            }
        }
    }
    Probes {
        json,
        lines,
        q_hat,
        reliable,
    }
}

/// Constants for the τ series, available when both the error bound and
/// the calmness modulus were estimated.
fn tau_constants<E>(
    trace: &nlsdp_core::AlmTrace,
    eb: Option<&Result<ErrorBoundReport, E>>,
    calm: Option<&Result<CalmnessReport, E>>,
) -> Option<TauConstants> {
    let zeta_bar = eb?.as_ref().ok()?.kappa3?;
    let kappa1 = calm?.as_ref().ok()?.kappa_hat?;
    let kappa2 = residual_bound_constant(trace)?;
    Some(TauConstants {
        zeta_bar,
        kappa1,
        kappa2,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), |x| format!("{x:.6e}"))
}

fn fmt_cell(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.3e}"))
}

fn summary_text(spec: &RunSpec, out: &AlmOutcome, probes: &[String]) -> String {
    let mut s = String::new();
    let a = &spec.alm;
    let _ = writeln!(s, "problem      {}", spec.problem);
    let _ = writeln!(s, "seed         {}", spec.seed);
    let _ = writeln!(
        s,
        "config       rho0={:e} varsigma={:e} xi={:e} eps0={:e} eps_exponent={:e} stop_tol={:e} policy={}",
        a.rho0,
        a.varsigma,
        a.xi,
        a.eps0,
        a.eps_exponent,
        a.stop_tol,
        policy_name(a.policy)
    );
    let _ = writeln!(s, "status       {}", out.status.as_str());
    let _ = writeln!(s, "outer steps  {}", out.trace.outer_steps());
    if let Some(last) = out.trace.last() {
        let _ = writeln!(s, "final R      {:.3e}", last.r);
        let _ = writeln!(s, "final f      {:.6e}", last.f);
        let _ = writeln!(s, "final rho    {:e}", last.rho);
    }
    if let Some(k) = out.trace.dual_termination {
        let _ = writeln!(s, "dual iterate entered the multiplier set at k = {k}");
    }
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "{:>4} {:>10} {:>10} {:>10} {:>10} {:>6}",
        "k", "rho", "R_k", "eps_k", "eps_k/R_k", "inner"
    );
    for row in &out.trace.iterations {
        let ratio = row.eps.filter(|_| row.r > 0.0).map(|e| e / row.r);
        let _ = writeln!(
            s,
            "{:>4} {:>10.3e} {:>10.3e} {:>10} {:>10} {:>6}",
            row.k,
            row.rho,
            row.r,
            fmt_cell(row.eps),
            fmt_cell(ratio),
            row.inner_iters.map_or("-".to_string(), |n| n.to_string())
        );
    }
    if !probes.is_empty() {
        let _ = writeln!(s);
        for l in probes {
            let _ = writeln!(s, "{l}");
        }
    }
    s
}

/// Solves and probes without writing anything.
pub fn execute(spec: &RunSpec) -> Result<RunOutcome, HarnessError> {
    spec.validate()?;
    let fx =
        fixture(&spec.problem).map_err(|_| HarnessError::UnknownProblem(spec.problem.clone()))?;
    let start = start_point(spec, &fx)?;
    let reference = Reference {
        x: &fx.solution.x,
        model: fx.model.as_ref(),
        contains_tol: 1e-10,
    };
    let out = alm_solve(fx.problem.as_ref(), &start, &spec.alm, Some(&reference))
        .map_err(|e| HarnessError::Solve(e.to_string()))?;
    let probes = run_probes(spec, &fx, &out);

    let last = out.trace.last();
    let final_r = last.map_or(f64::NAN, |r| r.r);
    let report = json!({
        "schema": REPORT_SCHEMA,
        "problem": spec.problem,
        "seed": spec.seed,
        "start": {
            "kind": if spec.start.is_default() { "fixture-default" } else { "explicit" },
            "x": start.x,
            "y": start.lambda.vec,
            "gamma": matrix_rows(&start.lambda.mat),
        },
        "config": to_json!(&spec.alm),
        "probe_settings": {
            "calmness_radius": spec.probe_settings.calmness_radius,
            "calmness_samples": spec.probe_settings.calmness_samples,
            "growth_radius": spec.probe_settings.growth_radius,
            "growth_samples": spec.probe_settings.growth_samples,
            "assumption1_radius": spec.probe_settings.assumption1_radius,
            "assumption1_samples": spec.probe_settings.assumption1_samples,
        },
        "status": out.status.as_str(),
        "outer_iterations": out.trace.outer_steps(),
        "dual_termination": out.trace.dual_termination,
        "final": {
            "x": out.point.x,
            "y": out.point.lambda.vec,
            "gamma": matrix_rows(&out.point.lambda.mat),
            "R": final_r,
            "f": last.map(|r| r.f),
            "rho": last.map(|r| r.rho),
        },
        "probes": Value::Object(probes.json),
    });
    Ok(RunOutcome {
        status: out.status,
        outer_iterations: out.trace.outer_steps(),
        final_r,
        q_hat: probes.q_hat,
        rate_reliable: probes.reliable,
        trace_csv: out.trace.to_csv(),
        summary: summary_text(spec, &out, &probes.lines),
        report,
    })
}

pub fn write_artifacts(dir: &Path, outcome: &RunOutcome) -> Result<(), HarnessError> {
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    debug_assert!(outcome.trace_csv.starts_with(TRACE_CSV_HEADER));
    fs::write(dir.join(TRACE_FILE), &outcome.trace_csv).map_err(io)?;
    let mut json = serde_json::to_string_pretty(&outcome.report).expect("report serializes");
    json.push('\n');
    fs::write(dir.join(REPORT_FILE), json).map_err(io)?;
    fs::write(dir.join(SUMMARY_FILE), &outcome.summary).map_err(io)?;
    Ok(())
}

/// Executes the run spec and writes its artifacts into `spec.out`. Nothing is
/// written when the run spec is rejected or the solver errors.
pub fn run(spec: &RunSpec) -> Result<RunOutcome, HarnessError> {
    let outcome = execute(spec)?;
    write_artifacts(&spec.out, &outcome)?;
    Ok(outcome)
}
