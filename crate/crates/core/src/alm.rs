//! Augmented Lagrangian method with an inexact quasi-Newton inner solver.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cone::{project_k, KElement};
use crate::error::{Error, Result};
use crate::problem::{
    constraint_adjoint, constraint_map, norm, residual_r, KktPoint, MultiplierSetModel,
    NlsdpProblem,
};
use crate::symmat::{frobenius_inner, EigenDecomposition};

/// How the penalty parameter evolves between outer iterations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyPolicy {
    /// Keep `ρ` while the auxiliary function `V` drops by the factor `ξ`,
    /// otherwise multiply by `ς`.
    VTest,
    Fixed,
    /// Multiply by `ς` every iteration.
    Growth,
}

impl std::str::FromStr for PenaltyPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "v-test" | "vtest" => Ok(Self::VTest),
            "fixed" => Ok(Self::Fixed),
            "growth" => Ok(Self::Growth),
            other => Err(Error::InvalidConfig(format!(
                "unknown penalty policy `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerConfig {
    pub max_iter: usize,
    /// Number of stored secant pairs.
    pub memory: usize,
    /// Armijo sufficient-decrease constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Iterates stay within this distance of the starting point.
    pub ball_radius: f64,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            memory: 6,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            ball_radius: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmConfig {
    pub rho0: f64,
    pub varsigma: f64,
    pub xi: f64,
    pub eps0: f64,
    pub eps_exponent: f64,
    /// Lower clamp on the inner tolerance, below which gradients are
    /// dominated by rounding.
    pub eps_floor: f64,
    pub max_outer: usize,
    pub stop_tol: f64,
    pub rho_cap: Option<f64>,
    pub policy: PenaltyPolicy,
    pub inner: InnerConfig,
}

impl Default for AlmConfig {
    fn default() -> Self {
        Self {
            rho0: 10.0,
            varsigma: 10.0,
            xi: 0.5,
            eps0: 0.1,
            eps_exponent: 1.5,
            eps_floor: 1e-14,
            max_outer: 60,
            stop_tol: 1e-10,
            rho_cap: None,
            policy: PenaltyPolicy::VTest,
            inner: InnerConfig::default(),
        }
    }
}

impl AlmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return bad(format!("rho0 must be positive, got {}", self.rho0));
        }
        if !(self.varsigma > 1.0 && self.varsigma.is_finite()) {
            return bad(format!("varsigma must exceed 1, got {}", self.varsigma));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return bad(format!("xi must lie in (0, 1), got {}", self.xi));
        }
        if !(self.eps0 > 0.0 && self.eps0.is_finite()) {
            return bad(format!("eps0 must be positive, got {}", self.eps0));
        }
        if !(self.eps_exponent > 1.0 && self.eps_exponent.is_finite()) {
            return bad(format!(
                "eps_exponent must exceed 1, got {}",
                self.eps_exponent
            ));
        }
        if !(self.eps_floor >= 0.0) {
            return bad(format!(
                "eps_floor must be nonnegative, got {}",
                self.eps_floor
            ));
        }
        if !(self.stop_tol >= 0.0) {
            return bad(format!(
                "stop_tol must be nonnegative, got {}",
                self.stop_tol
            ));
        }
        if let Some(cap) = self.rho_cap {
            if !(cap >= self.rho0) {
                return bad(format!("rho_cap {cap} is below rho0 {}", self.rho0));
            }
        }
        let inner = &self.inner;
        if inner.max_iter == 0 || inner.memory == 0 {
            return bad("inner max_iter and memory must be positive".into());
        }
        if !(inner.armijo > 0.0 && inner.armijo < 1.0)
            || !(inner.backtrack > 0.0 && inner.backtrack < 1.0)
        {
            return bad("line-search constants must lie in (0, 1)".into());
        }
        if !(inner.ball_radius > 0.0) {
            return bad(format!(
                "ball_radius must be positive, got {}",
                inner.ball_radius
            ));
        }
        Ok(())
    }

    /// `max(eps_floor, min(eps0·2⁻ᵏ, Rᵏ^eps_exponent))`.
    pub fn inner_tolerance(&self, k: usize, r: f64) -> f64 {
        let sched = self.eps0 * 0.5f64.powi(k.min(2000) as i32);
        sched.min(r.powf(self.eps_exponent)).max(self.eps_floor)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "penalty must be positive, got {rho}"
        )))
    }
}

/// Value, gradient and updated multiplier from one evaluation.
struct AugEval {
    value: f64,
    grad: Vec<f64>,
    /// Magnitude of the terms summed into `value`, for rounding estimates.
    scale: f64,
}

fn aug_eval(
    prob: &dyn NlsdpProblem,
    x: &[f64],
    lambda: &KElement,
    rho: f64,
    with_grad: bool,
) -> Result<AugEval> {
    let phi = constraint_map(prob, x);
    let w = phi.add_scaled(1.0 / rho, lambda);
    let e = EigenDecomposition::of(&w.mat)?;
    let neg = e.spectral(|l| l.min(0.0));
    let dist_sq = w.vec.iter().map(|v| v * v).sum::<f64>() + neg.frobenius_norm_sq();
    let fx = prob.f(x);
    let pen = 0.5 * rho * dist_sq;
    let shift = lambda.norm_sq() / (2.0 * rho);
    let value = fx + pen - shift;
    let scale = fx.abs() + pen + shift;
    let grad = if with_grad {
        let mult = KElement::new(w.vec.iter().map(|v| rho * v).collect(), neg.scaled(rho));
        let mut g = prob.grad_f(x);
        for (gi, ai) in g.iter_mut().zip(constraint_adjoint(prob, x, &mult)) {
            *gi += ai;
        }
        g
    } else {
        Vec::new()
    };
    Ok(AugEval { value, grad, scale })
}

/// `f(x) + (ρ/2)·dist²(Φ(x) + λ/ρ, K) − ‖λ‖²/(2ρ)`.
pub fn aug_lagrangian_value(
    prob: &dyn NlsdpProblem,
    x: &[f64],
    lambda: &KElement,
    rho: f64,
) -> Result<f64> {
    check_rho(rho)?;
    Ok(aug_eval(prob, x, lambda, rho, false)?.value)
}

/// `∇f(x) + ∇Φ(x)*[ρ(w − Π_K(w))]` with `w = Φ(x) + λ/ρ`.
pub fn aug_lagrangian_grad_x(
    prob: &dyn NlsdpProblem,
    x: &[f64],
    lambda: &KElement,
    rho: f64,
) -> Result<Vec<f64>> {
    check_rho(rho)?;
    Ok(aug_eval(prob, x, lambda, rho, true)?.grad)
}

/// `λ⁺ = ρ[w − Π_K(w)]` with `w = Φ(x) + λ/ρ`.
pub fn multiplier_update(
    prob: &dyn NlsdpProblem,
    x: &[f64],
    lambda: &KElement,
    rho: f64,
) -> Result<KElement> {
    check_rho(rho)?;
    let w = constraint_map(prob, x).add_scaled(1.0 / rho, lambda);
    Ok(w.sub(&project_k(&w)).scaled(rho))
}

/// `Π_K(Φ(x) + λ/ρ)`, the slack paired with the updated multiplier.
pub fn update_slack(
    prob: &dyn NlsdpProblem,
    x: &[f64],
    lambda: &KElement,
    rho: f64,
) -> Result<KElement> {
    check_rho(rho)?;
    let w = constraint_map(prob, x).add_scaled(1.0 / rho, lambda);
    Ok(project_k(&w))
}

/// `V = ‖∇ₓ𝓛(x, λ, ρ)‖ + ‖Φ(x) − Π_K(Φ(x) + λ/ρ)‖`.
pub fn v_function(
    prob: &dyn NlsdpProblem,
    x: &[f64],
    lambda_prev: &KElement,
    rho: f64,
) -> Result<f64> {
    let g = aug_lagrangian_grad_x(prob, x, lambda_prev, rho)?;
    let phi = constraint_map(prob, x);
    let s = project_k(&phi.add_scaled(1.0 / rho, lambda_prev));
    Ok(norm(&g) + phi.distance(&s))
}

/// Penalty for the next outer iteration. `v_prev` is `None` at `k = 0`.
pub fn penalty_update(v_now: f64, v_prev: Option<f64>, rho: f64, cfg: &AlmConfig) -> f64 {
    let grown = rho * cfg.varsigma;
    let next = match cfg.policy {
        PenaltyPolicy::Fixed => rho,
        PenaltyPolicy::Growth => grown,
        PenaltyPolicy::VTest => match v_prev {
            None => rho,
            Some(prev) if v_now <= cfg.xi * prev => rho,
            Some(_) => grown,
        },
    };
    match cfg.rho_cap {
        Some(cap) => next.min(cap.max(rho)),
        None => next,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerResult {
    pub x: Vec<f64>,
    pub grad_norm: f64,
    pub iterations: usize,
}

fn project_ball(x: &mut [f64], center: &[f64], radius: f64) {
    let d: f64 = x
        .iter()
        .zip(center)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    if d > radius {
        let s = radius / d;
        for (xi, ci) in x.iter_mut().zip(center) {
            *xi = ci + s * (*xi - ci);
        }
    }
}

fn two_loop(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let scale = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= scale;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Finds `x` with `‖∇ₓ𝓛(x, λ, ρ)‖ ≤ eps` inside the ball around `x_start`.
///
/// Limited-memory BFGS directions with Armijo backtracking; a failed line
/// search along the quasi-Newton direction is retried along the negative
/// gradient with the memory cleared.
pub fn inner_solve(
    prob: &dyn NlsdpProblem,
    x_start: &[f64],
    lambda: &KElement,
    rho: f64,
    eps: f64,
    cfg: &InnerConfig,
) -> Result<InnerResult> {
    check_rho(rho)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!(
            "inner tolerance must be positive, got {eps}"
        )));
    }
    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let mut x = x_start.to_vec();
    let AugEval {
        value: mut fx,
        grad: mut g,
        scale: mut fscale,
    } = aug_eval(prob, &x, lambda, rho, true)?;
    let mut gn = norm(&g);
    if gn <= eps {
        return Ok(InnerResult {
            x,
            grad_norm: gn,
            iterations: 0,
        });
    }
    let mut best = (gn, x.clone());
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);

    for it in 1..=cfg.max_iter {
        let mut steepest = pairs.is_empty();
        let mut d = if steepest {
            g.iter().map(|v| -v).collect()
        } else {
            two_loop(&g, &pairs)
        };
        if dot(&g, &d) >= 0.0 {
            pairs.clear();
            steepest = true;
            d = g.iter().map(|v| -v).collect();
        }
        let mut accepted = None;
        loop {
            let dn = norm(&d);
            let mut t = if steepest {
                (1.0f64).min(cfg.ball_radius / dn.max(f64::MIN_POSITIVE))
            } else {
                1.0
            };
            for _ in 0..cfg.max_backtracks {
                let mut xt: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
                project_ball(&mut xt, x_start, cfg.ball_radius);
                let step: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
                let ev = aug_eval(prob, &xt, lambda, rho, true)?;
                // Once value differences drown in rounding, a drop in the
                // gradient norm decides instead.
                let noise = 8.0 * f64::EPSILON * fscale.max(ev.scale);
                let armijo = ev.value <= fx + cfg.armijo * dot(&g, &step);
                let flat = (ev.value - fx).abs() <= noise && norm(&ev.grad) < gn;
                if ev.value.is_finite() && (armijo || flat) {
                    accepted = Some((xt, ev, step));
                    break;
                }
                t *= cfg.backtrack;
            }
            if accepted.is_some() || steepest {
                break;
            }
            pairs.clear();
            steepest = true;
            d = g.iter().map(|v| -v).collect();
        }
        let Some((xt, ev, s)) = accepted else {
            break;
        };
        let y: Vec<f64> = ev.grad.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * norm(&s) * norm(&y) && sy > 0.0 {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = xt;
        fx = ev.value;
        fscale = ev.scale;
        g = ev.grad;
        gn = norm(&g);
        if gn < best.0 {
            best = (gn, x.clone());
        }
        if gn <= eps {
            return Ok(InnerResult {
                x,
                grad_norm: gn,
                iterations: it,
            });
        }
    }
    Err(Error::InnerFailure {
        best_x: best.1,
        grad_norm: best.0,
        iterations: cfg.max_iter,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlmStatus {
    Converged,
    MaxOuter,
    InnerFailed,
}

impl AlmStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "converged",
            Self::MaxOuter => "max-outer",
            Self::InnerFailed => "inner-failed",
        }
    }
}

/// One row of the outer-loop record. The state `(xᵏ, λᵏ, ρᵏ, Rᵏ)` is
/// always present; the inner-solve fields are absent on the final row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmIteration {
    pub k: usize,
    pub x: Vec<f64>,
    pub lambda: KElement,
    pub rho: f64,
    pub r: f64,
    pub f: f64,
    pub eps: Option<f64>,
    pub inner_iters: Option<usize>,
    pub grad_norm: Option<f64>,
    /// `V(xᵏ⁺¹, λᵏ, ρᵏ)`.
    pub v: Option<f64>,
    pub dist_x: Option<f64>,
    pub dist_lambda: Option<f64>,
    /// `|⟨sᵏ⁺¹, Γᵏ⁺¹⟩|` for the slack and updated multiplier of this step.
    pub complementarity: Option<f64>,
    /// Largest eigenvalue of `Γᵏ⁺¹`.
    pub gamma_max_eig: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlmTrace {
    pub iterations: Vec<AlmIteration>,
    /// First outer index from which every dual iterate lies in the
    /// multiplier set (only with a model).
    pub dual_termination: Option<usize>,
}

pub const TRACE_CSV_HEADER: &str = "k,rho,R,eps,inner_iters,grad_norm,V,dist_x,dist_lambda,f";

impl AlmTrace {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    /// Number of completed outer steps.
    pub fn outer_steps(&self) -> usize {
        self.iterations.iter().filter(|r| r.eps.is_some()).count()
    }

    pub fn last(&self) -> Option<&AlmIteration> {
        self.iterations.last()
    }

    pub fn to_csv(&self) -> String {
        fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        let mut out = String::from(TRACE_CSV_HEADER);
        out.push('\n');
        for r in &self.iterations {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{},{},{},{},{},{},{:e}",
                r.k,
                r.rho,
                r.r,
                opt(r.eps.map(|v| format!("{v:e}"))),
                opt(r.inner_iters),
                opt(r.grad_norm.map(|v| format!("{v:e}"))),
                opt(r.v.map(|v| format!("{v:e}"))),
                opt(r.dist_x.map(|v| format!("{v:e}"))),
                opt(r.dist_lambda.map(|v| format!("{v:e}"))),
                r.f
            );
        }
        out
    }
}

/// Reference solution used to fill the distance columns of the trace.
pub struct Reference<'a> {
    pub x: &'a [f64],
    pub model: &'a dyn MultiplierSetModel,
    pub contains_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlmOutcome {
    pub point: KktPoint,
    pub trace: AlmTrace,
    pub status: AlmStatus,
}

/// Runs the outer loop from `start`.
pub fn alm_solve(
    prob: &dyn NlsdpProblem,
    start: &KktPoint,
    cfg: &AlmConfig,
    reference: Option<&Reference<'_>>,
) -> Result<AlmOutcome> {
    cfg.validate()?;
    start.check_dims(prob)?;
    if !start.is_finite() {
        return Err(Error::InvalidInput(
            "start point has non-finite entries".into(),
        ));
    }
    let mut x = start.x.clone();
    let mut lambda = start.lambda.clone();
    let mut rho = cfg.rho0;
    let mut v_prev: Option<f64> = None;
    let mut trace = AlmTrace::default();
    let mut in_set_since: Option<usize> = None;

    let dists = |x: &[f64], lambda: &KElement| -> (Option<f64>, Option<f64>, bool) {
        match reference {
            Some(r) => {
                let dx = x
                    .iter()
                    .zip(r.x)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let dl = r.model.distance(lambda);
                (Some(dx), Some(dl), r.model.contains(lambda, r.contains_tol))
            }
            None => (None, None, false),
        }
    };

    let mut k = 0;
    let status = loop {
        let pt = KktPoint::new(x.clone(), lambda.clone());
        let r = residual_r(prob, &pt);
        let (dx, dl, inside) = dists(&x, &lambda);
        if reference.is_some() {
            in_set_since = match (inside, in_set_since) {
                (true, None) => Some(k),
                (true, s) => s,
                (false, _) => None,
            };
        }
        let state_row = |eps, inner: Option<&InnerResult>, v, comp, gmax| AlmIteration {
            k,
            x: x.clone(),
            lambda: lambda.clone(),
            rho,
            r,
            f: prob.f(&x),
            eps,
            inner_iters: inner.map(|i| i.iterations),
            grad_norm: inner.map(|i| i.grad_norm),
            v,
            dist_x: dx,
            dist_lambda: dl,
            complementarity: comp,
            gamma_max_eig: gmax,
        };
        if r <= cfg.stop_tol || !r.is_finite() {
            trace
                .iterations
                .push(state_row(None, None, None, None, None));
            break if r.is_finite() {
                AlmStatus::Converged
            } else {
                AlmStatus::InnerFailed
            };
        }
        if k >= cfg.max_outer {
            trace
                .iterations
                .push(state_row(None, None, None, None, None));
            break AlmStatus::MaxOuter;
        }
        let eps = cfg.inner_tolerance(k, r);
        let inner = match inner_solve(prob, &x, &lambda, rho, eps, &cfg.inner) {
            Ok(i) => i,
            Err(Error::InnerFailure { .. }) => {
                trace
                    .iterations
                    .push(state_row(Some(eps), None, None, None, None));
                break AlmStatus::InnerFailed;
            }
            Err(e) => return Err(e),
        };
        let new_lambda = multiplier_update(prob, &inner.x, &lambda, rho)?;
        let slack = update_slack(prob, &inner.x, &lambda, rho)?;
        let v = v_function(prob, &inner.x, &lambda, rho)?;
        let comp = frobenius_inner(&slack.mat, &new_lambda.mat)?.abs();
        let gmax = EigenDecomposition::of(&new_lambda.mat)?.max_eigenvalue();
        trace.iterations.push(state_row(
            Some(eps),
            Some(&inner),
            Some(v),
            Some(comp),
            Some(gmax),
        ));

        rho = penalty_update(v, v_prev, rho, cfg);
        v_prev = Some(v);
        x = inner.x;
        lambda = new_lambda;
        k += 1;
    };
    if reference.is_some() {
        trace.dual_termination = in_set_since;
    }
    Ok(AlmOutcome {
        point: KktPoint::new(x, lambda),
        trace,
        status,
    })
}
