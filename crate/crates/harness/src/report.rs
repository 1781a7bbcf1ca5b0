//! The report JSON layout and its validator.
//!
//! Top level of `report.json`:
//!
//! | key | type |
//! |---|---|
//! | `schema` | the string [`REPORT_SCHEMA`] |
//! | `problem` | string |
//! | `seed` | unsigned integer |
//! | `start` | `{kind: "fixture-default" \| "explicit", x, y, gamma}` |
//! | `config` | solver configuration, numeric fields plus `policy` and `inner` |
//! | `probe_settings` | radii and sample counts |
//! | `status` | `"converged"`, `"max-outer"` or `"inner-failed"` |
//! | `outer_iterations` | unsigned integer |
//! | `dual_termination` | unsigned integer or null |
//! | `final` | `{x, y, gamma, R, f, rho}` |
//! | `probes` | object keyed by probe name |
//!
//! Vectors are arrays of numbers and `gamma` is an array of rows. Each probe
//! entry is either `{error: string}` or the probe's report with the fields
//! listed in [`PROBE_FIELDS`]. Non-finite numbers appear as null.

use nlsdp_core::SymMatrix;
use serde_json::Value;

pub const REPORT_SCHEMA: &str = "nlsdp-report/1";

/// Fields every successful probe entry must carry.
pub const PROBE_FIELDS: &[(&str, &[&str])] = &[
    (
        "rate",
        &[
            "q_hat",
            "ratios",
            "distances",
            "tail_points",
            "reliable",
            "target_source",
            "tau_bound_series",
        ],
    ),
    (
        "calmness",
        &[
            "radius",
            "count",
            "samples",
            "failures",
            "kappa_hat",
            "unbounded",
        ],
    ),
    ("growth", &["rho", "radius", "count", "l_hat", "success"]),
    (
        "assumption1",
        &["radius", "requested", "ratios", "max_ratio"],
    ),
    (
        "error-bound",
        &["ratios", "running_max", "kappa3", "window"],
    ),
];

const CONFIG_NUMBERS: &[&str] = &[
    "rho0",
    "varsigma",
    "xi",
    "eps0",
    "eps_exponent",
    "eps_floor",
    "max_outer",
    "stop_tol",
];

pub fn matrix_rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    (0..m.n())
        .map(|i| (0..m.n()).map(|j| m.get(i, j)).collect())
        .collect()
}

fn field<'a>(obj: &'a Value, key: &str, at: &str) -> Result<&'a Value, String> {
    obj.get(key).ok_or_else(|| format!("{at}: missing `{key}`"))
}

fn object<'a>(v: &'a Value, at: &str) -> Result<&'a serde_json::Map<String, Value>, String> {
    v.as_object()
        .ok_or_else(|| format!("{at}: expected an object"))
}

fn number_or_null(v: &Value, at: &str) -> Result<(), String> {
    if v.is_number() || v.is_null() {
        Ok(())
    } else {
        Err(format!("{at}: expected a number or null"))
    }
}

fn vector(v: &Value, at: &str) -> Result<usize, String> {
    let a = v
        .as_array()
        .ok_or_else(|| format!("{at}: expected an array"))?;
    for (i, e) in a.iter().enumerate() {
        number_or_null(e, &format!("{at}[{i}]"))?;
    }
    Ok(a.len())
}

fn square(v: &Value, at: &str) -> Result<(), String> {
    let rows = v.as_array().ok_or_else(|| format!("{at}: expected rows"))?;
    for (i, r) in rows.iter().enumerate() {
        if vector(r, &format!("{at}[{i}]"))? != rows.len() {
            return Err(format!("{at}: not square"));
        }
    }
    Ok(())
}

fn point(v: &Value, at: &str) -> Result<(), String> {
    vector(field(v, "x", at)?, &format!("{at}.x"))?;
    vector(field(v, "y", at)?, &format!("{at}.y"))?;
    square(field(v, "gamma", at)?, &format!("{at}.gamma"))
}

fn unsigned(v: &Value, at: &str) -> Result<(), String> {
    v.as_u64()
        .map(|_| ())
        .ok_or_else(|| format!("{at}: expected an unsigned integer"))
}

/// Checks a parsed `report.json` against the layout above.
pub fn validate_report(v: &Value) -> Result<(), String> {
    object(v, "report")?;
    if field(v, "schema", "report")?.as_str() != Some(REPORT_SCHEMA) {
        return Err(format!("report: schema is not `{REPORT_SCHEMA}`"));
    }
    if !field(v, "problem", "report")?.is_string() {
        return Err("report.problem: expected a string".into());
    }
    unsigned(field(v, "seed", "report")?, "report.seed")?;

    let start = field(v, "start", "report")?;
    match field(start, "kind", "start")?.as_str() {
        Some("fixture-default" | "explicit") => {}
        _ => return Err("start.kind: expected `fixture-default` or `explicit`".into()),
    }
    point(start, "start")?;

    let config = field(v, "config", "report")?;
    object(config, "config")?;
    for k in CONFIG_NUMBERS {
        if !field(config, k, "config")?.is_number() {
            return Err(format!("config.{k}: expected a number"));
        }
    }
    object(field(v, "probe_settings", "report")?, "probe_settings")?;

    match field(v, "status", "report")?.as_str() {
        Some("converged" | "max-outer" | "inner-failed") => {}
        _ => return Err("report.status: unknown status".into()),
    }
    unsigned(
        field(v, "outer_iterations", "report")?,
        "report.outer_iterations",
    )?;
    let dt = field(v, "dual_termination", "report")?;
    if !dt.is_null() {
        unsigned(dt, "report.dual_termination")?;
    }

    let fin = field(v, "final", "report")?;
    point(fin, "final")?;
    for k in ["R", "f", "rho"] {
        number_or_null(field(fin, k, "final")?, &format!("final.{k}"))?;
    }

    for (name, entry) in object(field(v, "probes", "report")?, "probes")? {
        let Some((_, required)) = PROBE_FIELDS.iter().find(|(n, _)| n == name) else {
            return Err(format!("probes: unknown probe `{name}`"));
        };
        let at = format!("probes.{name}");
        let obj = object(entry, &at)?;
        if let Some(e) = obj.get("error") {
            if !e.is_string() {
                return Err(format!("{at}.error: expected a string"));
            }
            continue;
        }
        for k in *required {
            field(entry, k, &at)?;
        }
    }
    Ok(())
}
