use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nlsdp_core::verify;
use nlsdp_harness::spec::DEFAULT_SEED;
use nlsdp_harness::{expand, read_config, run, sweep, HarnessError, RunSpec};

#[derive(Parser)]
#[command(
    name = "nlsdp",
    version,
    about = "Run the ALM fixtures, sweeps and property suites"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one fixture and write trace.csv, report.json and summary.txt.
    Run(Settings),
    /// Run the cartesian product of comma-separated settings concurrently.
    Sweep {
        #[command(flatten)]
        settings: Settings,
        /// Maximum number of concurrent runs.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Run the numerical property suites.
    Verify {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

/// Settings shared by `run` and `sweep`. Values given here override the
/// configuration file.
#[derive(Args)]
struct Settings {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    rho0: Option<String>,
    #[arg(long)]
    varsigma: Option<String>,
    #[arg(long)]
    xi: Option<String>,
    #[arg(long)]
    eps0: Option<String>,
    #[arg(long)]
    eps_exponent: Option<String>,
    #[arg(long)]
    eps_floor: Option<String>,
    #[arg(long)]
    stop_tol: Option<String>,
    #[arg(long)]
    max_outer: Option<String>,
    #[arg(long)]
    rho_cap: Option<String>,
    /// v-test, fixed or growth.
    #[arg(long)]
    policy: Option<String>,
    /// Comma-separated start x; omitted parts of the start use the fixture default.
    #[arg(long, allow_hyphen_values = true)]
    start_x: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    start_y: Option<String>,
    /// Row-major entries of the start Γ.
    #[arg(long, allow_hyphen_values = true)]
    start_gamma: Option<String>,
    /// rate, calmness, growth, assumption1 or error-bound. Repeatable.
    #[arg(long)]
    probe: Vec<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
}

/// Keys a sweep may vary.
const AXES: &[&str] = &[
    "problem",
    "rho0",
    "varsigma",
    "xi",
    "eps0",
    "eps_exponent",
    "eps_floor",
    "stop_tol",
    "max_outer",
    "policy",
    "seed",
];

impl Settings {
    fn pairs(&self) -> Result<Vec<(String, String)>, HarnessError> {
        let mut pairs = match &self.config {
            Some(p) => read_config(p)?,
            None => Vec::new(),
        };
        let flags = [
            ("problem", &self.problem),
            ("rho0", &self.rho0),
            ("varsigma", &self.varsigma),
            ("xi", &self.xi),
            ("eps0", &self.eps0),
            ("eps_exponent", &self.eps_exponent),
            ("eps_floor", &self.eps_floor),
            ("stop_tol", &self.stop_tol),
            ("max_outer", &self.max_outer),
            ("rho_cap", &self.rho_cap),
            ("policy", &self.policy),
            ("start_x", &self.start_x),
            ("start_y", &self.start_y),
            ("start_gamma", &self.start_gamma),
            ("out", &self.out),
            ("seed", &self.seed),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                pairs.push((k.to_string(), v.clone()));
            }
        }
        if !self.probe.is_empty() {
            pairs.push(("probe".into(), self.probe.join(",")));
        }
        Ok(pairs)
    }
}

fn cmd_run(s: &Settings) -> Result<ExitCode, HarnessError> {
    let spec = RunSpec::from_pairs(&s.pairs()?)?;
    let o = run(&spec)?;
    println!(
        "{}: {} after {} outer iterations, R = {:.3e}",
        spec.problem,
        o.status.as_str(),
        o.outer_iterations,
        o.final_r
    );
    if let Some(q) = o.q_hat {
        println!("q_hat = {q:.6e}");
    }
    println!("artifacts in {}", spec.out.display());
    Ok(if o.converged() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_sweep(s: &Settings, workers: Option<usize>) -> Result<ExitCode, HarnessError> {
    let mut base = Vec::new();
    let mut axes: Vec<(String, Vec<String>)> = Vec::new();
    for (k, v) in s.pairs()? {
        if AXES.contains(&k.as_str()) && v.contains(',') {
            let values = v.split(',').map(|x| x.trim().to_string()).collect();
            axes.retain(|(a, _)| *a != k);
            axes.push((k, values));
        } else {
            axes.retain(|(a, _)| *a != k);
            base.push((k, v));
        }
    }
    let out = RunSpec::from_pairs(&base)?.out;
    let specs = expand(&base, &axes, &out)?;
    let workers = workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get().min(4)));
    let o = sweep(&specs, &out, workers)?;
    print!("{}", o.table);
    Ok(if o.monotone() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_verify(seed: u64) -> Result<ExitCode, HarnessError> {
    let suites = verify::run_all(seed).map_err(|e| HarnessError::Solve(e.to_string()))?;
    let mut ok = true;
    for s in &suites {
        for c in &s.checks {
            println!(
                "{:<16} {:<32} {:>6} cases {:>4} failures worst {:.3e} {}",
                s.name,
                c.name,
                c.cases,
                c.failures,
                c.worst,
                if c.passed() { "ok" } else { "FAIL" }
            );
        }
        ok &= s.passed();
    }
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Run(s) => cmd_run(s),
        Cmd::Sweep { settings, workers } => cmd_sweep(settings, *workers),
        Cmd::Verify { seed } => cmd_verify(*seed),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
