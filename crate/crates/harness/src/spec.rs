//! Run specifications and the flat `key = value` configuration format.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nlsdp_core::problem::fixture_names;
use nlsdp_core::{AlmConfig, PenaltyPolicy};

use crate::HarnessError;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Probe {
    Rate,
    Calmness,
    Growth,
    Assumption1,
    ErrorBound,
}

impl Probe {
    pub const ALL: [Probe; 5] = [
        Probe::Rate,
        Probe::Calmness,
        Probe::Growth,
        Probe::Assumption1,
        Probe::ErrorBound,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Probe::Rate => "rate",
            Probe::Calmness => "calmness",
            Probe::Growth => "growth",
            Probe::Assumption1 => "assumption1",
            Probe::ErrorBound => "error-bound",
        }
    }
}

impl FromStr for Probe {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Probe::ALL
            .into_iter()
            .find(|p| p.as_str() == s || p.as_str().replace('-', "_") == s)
            .ok_or_else(|| HarnessError::Spec(format!("unknown probe `{s}`")))
    }
}

/// Start point of the outer loop. Omitted parts of an explicit start are
/// taken from the fixture's default start.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StartSpec {
    pub x: Option<Vec<f64>>,
    pub y: Option<Vec<f64>>,
    /// Row-major entries of Γ.
    pub gamma: Option<Vec<f64>>,
}

impl StartSpec {
    pub fn is_default(&self) -> bool {
        self.x.is_none() && self.y.is_none() && self.gamma.is_none()
    }
}

/// Sample sizes and radii for the probes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeSettings {
    pub calmness_radius: f64,
    pub calmness_samples: usize,
    pub growth_radius: f64,
    pub growth_samples: usize,
    pub assumption1_radius: f64,
    pub assumption1_samples: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            calmness_radius: 1e-3,
            calmness_samples: 100,
            growth_radius: 1e-2,
            growth_samples: 200,
            assumption1_radius: 1e-2,
            assumption1_samples: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub problem: String,
    pub start: StartSpec,
    pub alm: AlmConfig,
    /// Sorted and free of duplicates.
    pub probes: Vec<Probe>,
    pub probe_settings: ProbeSettings,
    pub out: PathBuf,
    pub seed: u64,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            problem: String::new(),
            start: StartSpec::default(),
            alm: AlmConfig::default(),
            probes: Vec::new(),
            probe_settings: ProbeSettings::default(),
            out: PathBuf::from("out"),
            seed: DEFAULT_SEED,
        }
    }
}

/// Keys accepted in configuration files and as command-line overrides.
pub const KEYS: &[&str] = &[
    "problem",
    "start",
    "start_x",
    "start_y",
    "start_gamma",
    "rho0",
    "varsigma",
    "xi",
    "eps0",
    "eps_exponent",
    "eps_floor",
    "stop_tol",
    "max_outer",
    "rho_cap",
    "policy",
    "probe",
    "out",
    "seed",
    "calmness_radius",
    "calmness_samples",
    "growth_radius",
    "growth_samples",
    "assumption1_radius",
    "assumption1_samples",
];

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError> {
    value
        .trim()
        .parse()
        .map_err(|_| HarnessError::Spec(format!("`{key}`: cannot parse `{value}`")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, HarnessError> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| num(key, v)).collect()
}

/// Parses a flat configuration text: one `key = value` per line, `#`
/// starts a comment, blank lines are ignored.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, HarnessError> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(HarnessError::Spec(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        pairs.push((normalize_key(k), v.trim().to_string()));
    }
    Ok(pairs)
}

pub fn read_config(path: &Path) -> Result<Vec<(String, String)>, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

impl RunSpec {
    /// Applies pairs in order, so later pairs override earlier ones.
    pub fn from_pairs<'a>(
        pairs: impl IntoIterator<Item = &'a (String, String)>,
    ) -> Result<Self, HarnessError> {
        let mut spec = RunSpec::default();
        for (k, v) in pairs {
            spec.set(k, v)?;
        }
        Ok(spec)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let key = normalize_key(key);
        let v = value.trim();
        let a = &mut self.alm;
        let p = &mut self.probe_settings;
        match key.as_str() {
            "problem" => self.problem = v.to_string(),
            "start" => {
                if v != "fixture-default" {
                    return Err(HarnessError::Spec(format!(
                        "`start` must be `fixture-default`, got `{v}`; use start_x, start_y, start_gamma for explicit values"
                    )));
                }
                self.start = StartSpec::default();
            }
            "start_x" => self.start.x = Some(list(&key, v)?),
            "start_y" => self.start.y = Some(list(&key, v)?),
            "start_gamma" => self.start.gamma = Some(list(&key, v)?),
            "rho0" => a.rho0 = num(&key, v)?,
            "varsigma" => a.varsigma = num(&key, v)?,
            "xi" => a.xi = num(&key, v)?,
            "eps0" => a.eps0 = num(&key, v)?,
            "eps_exponent" => a.eps_exponent = num(&key, v)?,
            "eps_floor" => a.eps_floor = num(&key, v)?,
            "stop_tol" => a.stop_tol = num(&key, v)?,
            "max_outer" => a.max_outer = num(&key, v)?,
            "rho_cap" => {
                a.rho_cap = match v {
                    "none" | "" => None,
                    _ => Some(num(&key, v)?),
                }
            }
            "policy" => {
                a.policy =
                    PenaltyPolicy::from_str(v).map_err(|e| HarnessError::Spec(e.to_string()))?
            }
            "probe" => {
                let mut probes = Vec::new();
                for name in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                    probes.push(name.parse()?);
                }
                self.probes = probes;
                self.probes.sort();
                self.probes.dedup();
            }
            "out" => self.out = PathBuf::from(v),
            "seed" => self.seed = num(&key, v)?,
            "calmness_radius" => p.calmness_radius = num(&key, v)?,
            "calmness_samples" => p.calmness_samples = num(&key, v)?,
            "growth_radius" => p.growth_radius = num(&key, v)?,
            "growth_samples" => p.growth_samples = num(&key, v)?,
            "assumption1_radius" => p.assumption1_radius = num(&key, v)?,
            "assumption1_samples" => p.assumption1_samples = num(&key, v)?,
            other => return Err(HarnessError::Spec(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Checks the problem name and the solver configuration.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.problem.is_empty() {
            return Err(HarnessError::Spec("no problem given".into()));
        }
        if !fixture_names().contains(&self.problem.as_str()) {
            return Err(HarnessError::UnknownProblem(self.problem.clone()));
        }
        self.alm
            .validate()
            .map_err(|e| HarnessError::Spec(e.to_string()))
    }

    /// The run spec as `key = value` lines that parse back to the same spec.
    /// The output directory is omitted.
    pub fn to_config(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:e}"))
                .collect::<Vec<_>>()
                .join(",")
        };
        let a = &self.alm;
        let p = &self.probe_settings;
        let mut lines = vec![format!("problem = {}", self.problem)];
        if self.start.is_default() {
            lines.push("start = fixture-default".into());
        }
        if let Some(x) = &self.start.x {
            lines.push(format!("start_x = {}", join(x)));
        }
        if let Some(y) = &self.start.y {
            lines.push(format!("start_y = {}", join(y)));
        }
        if let Some(g) = &self.start.gamma {
            lines.push(format!("start_gamma = {}", join(g)));
        }
        lines.extend([
            format!("rho0 = {:e}", a.rho0),
            format!("varsigma = {:e}", a.varsigma),
            format!("xi = {:e}", a.xi),
            format!("eps0 = {:e}", a.eps0),
            format!("eps_exponent = {:e}", a.eps_exponent),
            format!("eps_floor = {:e}", a.eps_floor),
            format!("stop_tol = {:e}", a.stop_tol),
            format!("max_outer = {}", a.max_outer),
            format!(
                "rho_cap = {}",
                a.rho_cap.map_or("none".to_string(), |r| format!("{r:e}"))
            ),
            format!("policy = {}", policy_name(a.policy)),
            format!(
                "probe = {}",
                self.probes
                    .iter()
                    .map(Probe::as_str)
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            format!("seed = {}", self.seed),
            format!("calmness_radius = {:e}", p.calmness_radius),
            format!("calmness_samples = {}", p.calmness_samples),
            format!("growth_radius = {:e}", p.growth_radius),
            format!("growth_samples = {}", p.growth_samples),
            format!("assumption1_radius = {:e}", p.assumption1_radius),
            format!("assumption1_samples = {}", p.assumption1_samples),
        ]);
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

pub fn policy_name(p: PenaltyPolicy) -> &'static str {
    match p {
        PenaltyPolicy::VTest => "v-test",
        PenaltyPolicy::Fixed => "fixed",
        PenaltyPolicy::Growth => "growth",
    }
}
