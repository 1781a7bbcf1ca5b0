//! Batches of runs executed concurrently, summarized as a rate table.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::run::{run, RunOutcome};
use crate::spec::{policy_name, Probe, RunSpec};
use crate::HarnessError;

pub const TABLE_FILE: &str = "sweep.txt";
pub const CSV_FILE: &str = "sweep.csv";
pub const SWEEP_CSV_HEADER: &str =
    "run,problem,policy,rho0,varsigma,eps_exponent,status,outer_iterations,final_R,q_hat,reliable";

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub index: usize,
    pub problem: String,
    pub policy: &'static str,
    pub rho0: f64,
    pub varsigma: f64,
    pub eps_exponent: f64,
    pub status: &'static str,
    pub outer_iterations: usize,
    pub final_r: f64,
    pub q_hat: Option<f64>,
    pub reliable: bool,
}

/// Absolute slack when comparing fitted rates across runs. Rates that
/// differ by less are treated as equal; superlinear traces give fits of
/// order 1e-10 whose ordering is set by how deep each trace goes.
pub const Q_HAT_TOL: f64 = 1e-3;

/// Whether `q̂` is nonincreasing in `ρ₀`, up to [`Q_HAT_TOL`], among runs
/// that differ only in `ρ₀`. A missing `q̂` fails the check.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneCheck {
    pub runs: Vec<usize>,
    pub rho0: Vec<f64>,
    pub q_hat: Vec<Option<f64>>,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub checks: Vec<MonotoneCheck>,
    pub table: String,
    pub csv: String,
}

impl SweepOutcome {
    pub fn monotone(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }
}

/// Name of the subdirectory holding run `i`.
pub fn run_dir_name(i: usize) -> String {
    format!("run-{i:02}")
}

/// Expands list-valued settings into the cartesian product of specs. Each
/// axis is a key with comma-separated values; `base` pairs apply first.
/// Every spec gets the rate probe and its own subdirectory of `out`.
pub fn expand(
    base: &[(String, String)],
    axes: &[(String, Vec<String>)],
    out: &Path,
) -> Result<Vec<RunSpec>, HarnessError> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in axes {
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.clone(), v.clone()));
                    c
                })
            })
            .collect();
    }
    combos
        .into_iter()
        .enumerate()
        .map(|(i, combo)| {
            let mut spec = RunSpec::from_pairs(base.iter().chain(&combo))?;
            if !spec.probes.contains(&Probe::Rate) {
                spec.probes.push(Probe::Rate);
                spec.probes.sort();
            }
            spec.out = out.join(run_dir_name(i));
            Ok(spec)
        })
        .collect()
}

fn row(index: usize, spec: &RunSpec, o: &RunOutcome) -> SweepRow {
    SweepRow {
        index,
        problem: spec.problem.clone(),
        policy: policy_name(spec.alm.policy),
        rho0: spec.alm.rho0,
        varsigma: spec.alm.varsigma,
        eps_exponent: spec.alm.eps_exponent,
        status: o.status.as_str(),
        outer_iterations: o.outer_iterations,
        final_r: o.final_r,
        q_hat: o.q_hat,
        reliable: o.rate_reliable,
    }
}

fn group_key(spec: &RunSpec) -> String {
    spec.to_config()
        .lines()
        .filter(|l| !l.starts_with("rho0 "))
        .collect::<Vec<_>>()
        .join("\n")
}

fn monotone_checks(specs: &[RunSpec], rows: &[SweepRow]) -> Vec<MonotoneCheck> {
    let mut groups: Vec<(String, Vec<usize>)> = Vec::new();
    for (i, s) in specs.iter().enumerate() {
        let key = group_key(s);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    groups
        .into_iter()
        .filter_map(|(_, mut idx)| {
            idx.sort_by(|&a, &b| rows[a].rho0.total_cmp(&rows[b].rho0));
            let rho0: Vec<f64> = idx.iter().map(|&i| rows[i].rho0).collect();
            if rho0.first() == rho0.last() {
                return None;
            }
            let q_hat: Vec<Option<f64>> = idx.iter().map(|&i| rows[i].q_hat).collect();
            let holds = q_hat
                .windows(2)
                .all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b <= a + Q_HAT_TOL))
                && q_hat.iter().all(Option::is_some);
            Some(MonotoneCheck {
                runs: idx,
                rho0,
                q_hat,
                holds,
            })
        })
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.4e}"))
}

fn render(rows: &[SweepRow], checks: &[MonotoneCheck]) -> (String, String) {
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{:<7} {:<12} {:<7} {:>8} {:>8} {:>7} {:<12} {:>5} {:>10} {:>11} {:<3}",
        "run",
        "problem",
        "policy",
        "rho0",
        "varsigma",
        "eps_exp",
        "status",
        "outer",
        "final_R",
        "q_hat",
        "rel"
    );
    let mut csv = String::from(SWEEP_CSV_HEADER);
    csv.push('\n');
    for r in rows {
        let _ = writeln!(
            t,
            "{:<7} {:<12} {:<7} {:>8.1e} {:>8.1e} {:>7.2} {:<12} {:>5} {:>10.3e} {:>11} {:<3}",
            run_dir_name(r.index),
            r.problem,
            r.policy,
            r.rho0,
            r.varsigma,
            r.eps_exponent,
            r.status,
            r.outer_iterations,
            r.final_r,
            cell(r.q_hat),
            if r.reliable { "yes" } else { "no" }
        );
        let _ = writeln!(
            csv,
            "{},{},{},{:e},{:e},{:e},{},{},{:e},{},{}",
            r.index,
            r.problem,
            r.policy,
            r.rho0,
            r.varsigma,
            r.eps_exponent,
            r.status,
            r.outer_iterations,
            r.final_r,
            r.q_hat.map_or(String::new(), |q| format!("{q:e}")),
            r.reliable
        );
    }
    for c in checks {
        let runs: Vec<String> = c.runs.iter().map(|&i| run_dir_name(i)).collect();
        let _ = writeln!(
            t,
            "q_hat nonincreasing in rho0 (tolerance {:e}) over {}: {}",
            Q_HAT_TOL,
            runs.join(", "),
            if c.holds { "yes" } else { "NO" }
        );
    }
    (t, csv)
}

/// Runs every spec with at most `workers` threads and writes the table
/// into `out`. The first failing run, by index, is returned as the error.
pub fn sweep(specs: &[RunSpec], out: &Path, workers: usize) -> Result<SweepOutcome, HarnessError> {
    if specs.len() < 2 {
        return Err(HarnessError::Precondition(format!(
            "a sweep needs at least 2 specs, got {}",
            specs.len()
        )));
    }
    for s in specs {
        s.validate()?;
    }
    let workers = workers.clamp(1, specs.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunOutcome, HarnessError>>>> =
        Mutex::new((0..specs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= specs.len() {
                    break;
                }
                let r = run(&specs[i]);
                results
                    .lock()
                    .expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    let mut rows = Vec::with_capacity(specs.len());
    for (i, r) in results
        .into_inner()
        .expect("workers joined")
        .into_iter()
        .enumerate()
    {
        let o = r.expect("every index is claimed")?;
        rows.push(row(i, &specs[i], &o));
    }
    let checks = monotone_checks(specs, &rows);
    let (table, csv) = render(&rows, &checks);
    let io = |e: std::io::Error| HarnessError::Io(format!("{}: {e}", out.display()));
    fs::create_dir_all(out).map_err(io)?;
    fs::write(out.join(TABLE_FILE), &table).map_err(io)?;
    fs::write(out.join(CSV_FILE), &csv).map_err(io)?;
    Ok(SweepOutcome {
        rows,
        checks,
        table,
        csv,
    })
}
