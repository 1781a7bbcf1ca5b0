//! Diagnostics computed from solver traces and from sampled probes around a
//! KKT point: contraction rates, the outer-step error bound, calmness of the
//! perturbed KKT map, quadratic growth of the augmented Lagrangian and the
//! restricted-projection bound on the multiplier set.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alm::{alm_solve, aug_lagrangian_value, AlmConfig, AlmStatus, AlmTrace};
use crate::cone::{project_nsd, KElement};
use crate::error::{Error, Result};
use crate::problem::{
    constraint_adjoint, lagrangian_grad_x, norm, perturbed_kkt_residual, residual_r, KktPoint,
    MultiplierSetModel, NlsdpProblem, Perturbation, PerturbedProblem,
};
use crate::symmat::SymMatrix;
use crate::varanalysis::{gaussian, normalize, random_unit_sym, sosc_certificate, SoscConfig};

/// Rows a trace needs before a rate is estimated.
pub const MIN_RATE_TRACE: usize = 6;

/// Points the tail fit needs to be marked reliable.
pub const MIN_TAIL_POINTS: usize = 4;

/// Where the limit point of a rate estimate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitSource {
    /// Final primal iterate with the model projection of the final dual iterate.
    ModelProjection,
    /// Final primal and dual iterates.
    FinalIterate,
    Explicit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContractionRatio {
    pub k: usize,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub target_x: Vec<f64>,
    pub target_lambda: KElement,
    pub target_source: LimitSource,
    /// `‖(xᵏ, λᵏ) − (x̂, λ̂)‖` for every row.
    pub distances: Vec<f64>,
    /// `dₖ₊₁ / dₖ` wherever both distances are positive.
    pub ratios: Vec<ContractionRatio>,
    /// `exp(slope)` of a least-squares line through `(k, ln dₖ)` over the tail.
    pub q_hat: Option<f64>,
    pub tail_points: usize,
    pub reliable: bool,
    pub tau_bound_series: Option<Vec<f64>>,
}

impl RateReport {
    /// Last `n` contraction ratios, oldest first.
    pub fn last_ratios(&self, n: usize) -> Vec<f64> {
        let start = self.ratios.len().saturating_sub(n);
        self.ratios[start..].iter().map(|r| r.ratio).collect()
    }

    pub fn with_tau(mut self, trace: &AlmTrace, c: &TauConstants) -> Self {
        self.tau_bound_series = Some(tau_bound_series(trace, c));
        self
    }
}

/// Rate estimate with the limit taken from the end of the trace. With a
/// model the dual limit is the projection of the last dual iterate onto
/// the multiplier set.
pub fn estimate_q_rate(
    trace: &AlmTrace,
    model: Option<&dyn MultiplierSetModel>,
) -> Result<RateReport> {
    check_trace_len(trace)?;
    let last = trace.last().expect("nonempty");
    let (lambda_hat, source) = match model {
        Some(m) => (m.project(&last.lambda), LimitSource::ModelProjection),
        None => (last.lambda.clone(), LimitSource::FinalIterate),
    };
    let x_hat = last.x.clone();
    rate_against(trace, x_hat, lambda_hat, source)
}

/// Rate estimate against a known limit point.
pub fn estimate_q_rate_to(
    trace: &AlmTrace,
    x_hat: &[f64],
    lambda_hat: &KElement,
) -> Result<RateReport> {
    check_trace_len(trace)?;
    rate_against(
        trace,
        x_hat.to_vec(),
        lambda_hat.clone(),
        LimitSource::Explicit,
    )
}

fn check_trace_len(trace: &AlmTrace) -> Result<()> {
    if trace.len() < MIN_RATE_TRACE {
        return Err(Error::TooShortTrace {
            len: trace.len(),
            required: MIN_RATE_TRACE,
        });
    }
    Ok(())
}

fn rate_against(
    trace: &AlmTrace,
    x_hat: Vec<f64>,
    lambda_hat: KElement,
    source: LimitSource,
) -> Result<RateReport> {
    let mut distances = Vec::with_capacity(trace.len());
    for row in &trace.iterations {
        if row.x.len() != x_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: x_hat.len(),
                found: row.x.len(),
            });
        }
        let dx = resolved(block_dist(&row.x, &x_hat), &x_hat);
        let dy = resolved(
            block_dist(&row.lambda.vec, &lambda_hat.vec),
            &lambda_hat.vec,
        );
        let dg = resolved(
            (&row.lambda.mat - &lambda_hat.mat).frobenius_norm(),
            &[lambda_hat.mat.frobenius_norm()],
        );
        distances.push((dx * dx + dy * dy + dg * dg).sqrt());
    }
    let ratios = distances
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] > 0.0 && w[1] > 0.0)
        .map(|(k, w)| ContractionRatio {
            k,
            ratio: w[1] / w[0],
        })
        .collect();

    let points: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > 0.0)
        .map(|(k, d)| (k as f64, d.ln()))
        .collect();
    let take = (points.len() / 2).max(MIN_TAIL_POINTS).min(points.len());
    let tail = &points[points.len() - take..];
    let q_hat = fit_slope(tail).map(f64::exp);
    Ok(RateReport {
        target_x: x_hat,
        target_lambda: lambda_hat,
        target_source: source,
        distances,
        ratios,
        q_hat,
        tail_points: tail.len(),
        reliable: tail.len() >= MIN_TAIL_POINTS,
        tau_bound_series: None,
    })
}

fn block_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Distance of one block of the iterate to its target, taken as zero when
/// it is within a few units of roundoff of the target's size. Such
/// distances carry no information and would otherwise end a
/// fast-converging trace with spurious ratios.
fn resolved(d: f64, target: &[f64]) -> f64 {
    let size = target.iter().map(|v| v * v).sum::<f64>().sqrt();
    if d <= 8.0 * f64::EPSILON * size {
        0.0
    } else {
        d
    }
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Empirical constants entering the per-step contraction bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TauConstants {
    /// Error-bound constant, from [`error_bound_monitor`].
    pub zeta_bar: f64,
    /// Calmness modulus, from [`calmness_probe`].
    pub kappa1: f64,
    /// Residual-versus-distance constant, from [`residual_bound_constant`].
    pub kappa2: f64,
}

/// `τᵏ = 2√2·ζ̄κ₁κ₂²(εₖ/Rₖ + ζ̄/ρᵏ)` for every row with an inner solve and
/// `Rₖ > 0`.
pub fn tau_bound_series(trace: &AlmTrace, c: &TauConstants) -> Vec<f64> {
    let lead = 2.0 * 2f64.sqrt() * c.zeta_bar * c.kappa1 * c.kappa2 * c.kappa2;
    trace
        .iterations
        .iter()
        .filter(|row| row.r > 0.0)
        .filter_map(|row| {
            row.eps
                .map(|eps| lead * (eps / row.r + c.zeta_bar / row.rho))
        })
        .collect()
}

/// `max Rₖ / (‖xᵏ − x̄‖ + dist(λᵏ, ℳ))` over rows carrying reference
/// distances.
pub fn residual_bound_constant(trace: &AlmTrace) -> Option<f64> {
    trace
        .iterations
        .iter()
        .filter_map(|row| match (row.dist_x, row.dist_lambda) {
            (Some(dx), Some(dl)) if dx + dl > 0.0 => Some(row.r / (dx + dl)),
            _ => None,
        })
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(v, |a| a.max(v)))
        })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundReport {
    /// `(‖xᵏ⁺¹ − xᵏ‖ + ‖λᵏ⁺¹ − λᵏ‖) / Rₖ`; `None` where `Rₖ = 0`.
    pub ratios: Vec<Option<f64>>,
    pub running_max: Vec<f64>,
    pub window: usize,
    /// Largest ratio over the last `window` steps.
    pub kappa3: Option<f64>,
    pub skipped: usize,
}

/// Outer-step displacement against the residual at the start of the step.
pub fn error_bound_monitor(
    prob: &dyn NlsdpProblem,
    trace: &AlmTrace,
    window: usize,
) -> Result<ErrorBoundReport> {
    if window == 0 {
        return Err(Error::InvalidInput(
            "error-bound window must be positive".into(),
        ));
    }
    let rows = &trace.iterations;
    let mut ratios = Vec::with_capacity(rows.len().saturating_sub(1));
    let mut running_max = Vec::with_capacity(ratios.capacity());
    let mut best = 0.0f64;
    let mut skipped = 0;
    for w in rows.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let pt = KktPoint::new(a.x.clone(), a.lambda.clone());
        pt.check_dims(prob)?;
        let r = residual_r(prob, &pt);
        let step: f64 =
            a.x.iter()
                .zip(&b.x)
                .map(|(u, v)| (u - v).powi(2))
                .sum::<f64>()
                .sqrt();
        let ratio = if r > 0.0 {
            Some((step + b.lambda.distance(&a.lambda)) / r)
        } else {
            skipped += 1;
            None
        };
        if let Some(v) = ratio {
            best = best.max(v);
        }
        ratios.push(ratio);
        running_max.push(best);
    }
    let start = ratios.len().saturating_sub(window);
    let kappa3 = ratios[start..]
        .iter()
        .flatten()
        .fold(None, |acc: Option<f64>, v| {
            Some(acc.map_or(*v, |a| a.max(*v)))
        });
    Ok(ErrorBoundReport {
        ratios,
        running_max,
        window,
        kappa3,
        skipped,
    })
}

/// Runs `f` over `items` on scoped worker threads, preserving order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .clamp(1, 8);
    if workers == 1 || items.len() < 2 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                s.spawn(move || part.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker panicked"))
            .collect()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbedSolver {
    /// The base point already solves the perturbed system.
    Base,
    Newton,
    Alm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalmnessSample {
    pub perturbation_norm: f64,
    /// `‖x − x̄‖ + dist(λ, ℳ(x̄))`.
    pub deviation: f64,
    pub ratio: Option<f64>,
    pub solver: PerturbedSolver,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalmnessReport {
    pub radius: f64,
    pub count: usize,
    pub samples: Vec<CalmnessSample>,
    pub failures: usize,
    pub kappa_hat: Option<f64>,
    pub unbounded: bool,
}

impl CalmnessReport {
    pub fn median_ratio(&self) -> Option<f64> {
        let mut r: Vec<f64> = self.samples.iter().filter_map(|s| s.ratio).collect();
        if r.is_empty() {
            return None;
        }
        r.sort_by(f64::total_cmp);
        let m = r.len() / 2;
        Some(if r.len() % 2 == 1 {
            r[m]
        } else {
            0.5 * (r[m - 1] + r[m])
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalmnessConfig {
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
    /// Initial smoothing of the complementarity product in the Newton system.
    pub smoothing: f64,
    pub newton_steps: usize,
    pub newton_tol: f64,
    /// Residual below which the base point is accepted unchanged.
    pub base_tol: f64,
    pub fallback: AlmConfig,
}

impl Default for CalmnessConfig {
    fn default() -> Self {
        Self {
            radius: 1e-3,
            count: 100,
            seed: 42,
            smoothing: 1e-8,
            newton_steps: 50,
            newton_tol: 1e-12,
            base_tol: 1e-12,
            fallback: AlmConfig {
                stop_tol: 1e-10,
                ..AlmConfig::default()
            },
        }
    }
}

/// Samples perturbations uniformly in a ball and records how far the
/// perturbed KKT points move from the base solution.
pub fn calmness_probe(
    prob: &dyn NlsdpProblem,
    base: &KktPoint,
    model: &dyn MultiplierSetModel,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<CalmnessReport> {
    let cfg = CalmnessConfig {
        radius,
        count,
        seed,
        ..CalmnessConfig::default()
    };
    calmness_probe_with(prob, base, model, &cfg)
}

pub fn calmness_probe_with(
    prob: &dyn NlsdpProblem,
    base: &KktPoint,
    model: &dyn MultiplierSetModel,
    cfg: &CalmnessConfig,
) -> Result<CalmnessReport> {
    base.check_dims(prob)?;
    if !(cfg.radius >= 0.0 && cfg.radius.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "radius must be nonnegative, got {}",
            cfg.radius
        )));
    }
    if !(cfg.smoothing > 0.0) {
        return Err(Error::InvalidInput("smoothing must be positive".into()));
    }
    cfg.fallback.validate()?;
    let r0 = residual_r(prob, base);
    if r0 > 1e-8 {
        return Err(Error::NotKkt { residual: r0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let perts: Vec<Perturbation> = (0..cfg.count)
        .map(|_| sample_perturbation(&mut rng, prob, cfg.radius))
        .collect();
    let solved = par_map(&perts, |p| solve_perturbed(prob, base, p, cfg));

    let mut samples = Vec::new();
    let mut failures = 0;
    for (p, s) in perts.iter().zip(solved) {
        let Some((pt, solver)) = s else {
            failures += 1;
            continue;
        };
        let dx: f64 =
            pt.x.iter()
                .zip(&base.x)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
        let deviation = dx + model.distance(&pt.lambda);
        let pn = p.norm();
        let ratio = (pn > 0.0).then(|| deviation / pn);
        samples.push(CalmnessSample {
            perturbation_norm: pn,
            deviation,
            ratio,
            solver,
        });
    }
    let ratios: Vec<f64> = samples.iter().filter_map(|s| s.ratio).collect();
    let unbounded = ratios.iter().any(|r| !r.is_finite());
    let kappa_hat = ratios
        .iter()
        .copied()
        .filter(|r| r.is_finite())
        .reduce(f64::max);
    Ok(CalmnessReport {
        radius: cfg.radius,
        count: cfg.count,
        samples,
        failures,
        kappa_hat,
        unbounded,
    })
}

/// Uniform sample from the ball of `radius` in `(a₁, a₂, svec b)` coordinates.
fn sample_perturbation(rng: &mut ChaCha8Rng, prob: &dyn NlsdpProblem, radius: f64) -> Perturbation {
    let (n, m, p) = (prob.dim_x(), prob.dim_h(), prob.dim_g());
    let dim = n + m + SymMatrix::svec_len(p);
    let mut v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
    normalize(&mut v);
    let u: f64 = rng.gen_range(0.0..1.0);
    let s = radius * u.powf(1.0 / dim as f64);
    for vi in v.iter_mut() {
        *vi *= s;
    }
    Perturbation {
        a1: v[..n].to_vec(),
        a2: v[n..n + m].to_vec(),
        b: SymMatrix::from_svec(p, &v[n + m..]).expect("length"),
    }
}

fn solve_perturbed(
    prob: &dyn NlsdpProblem,
    base: &KktPoint,
    pert: &Perturbation,
    cfg: &CalmnessConfig,
) -> Option<(KktPoint, PerturbedSolver)> {
    if perturbed_kkt_residual(prob, base, pert) <= cfg.base_tol {
        return Some((base.clone(), PerturbedSolver::Base));
    }
    if let Some(pt) = smoothed_newton(prob, base, pert, cfg) {
        return Some((pt, PerturbedSolver::Newton));
    }
    let pp = PerturbedProblem::new(prob, pert.clone());
    match alm_solve(&pp, base, &cfg.fallback, None) {
        Ok(out) if out.status == AlmStatus::Converged => Some((out.point, PerturbedSolver::Alm)),
        _ => None,
    }
}

/// Packs `(x, y, svec Γ)`.
fn pack(pt: &KktPoint) -> Vec<f64> {
    let mut z = pt.x.clone();
    z.extend_from_slice(&pt.lambda.vec);
    z.extend(pt.lambda.mat.svec());
    z
}

fn unpack(z: &[f64], n: usize, m: usize, p: usize) -> KktPoint {
    let gamma = SymMatrix::from_svec(p, &z[n + m..]).expect("length");
    KktPoint::new(z[..n].to_vec(), KElement::new(z[n..n + m].to_vec(), gamma))
}

/// `(AB + BA)/2`.
fn sym_product(a: &SymMatrix, b: &SymMatrix) -> SymMatrix {
    let ab = a.matmul(b);
    SymMatrix::from_fn(a.n(), |i, j| 0.5 * (ab.get(i, j) + ab.get(j, i)))
}

/// Perturbed KKT system with the complementarity written as the
/// symmetrized product `(SΓ + ΓS)/2 = −μI`, `S = G(x) − b`. Unlike the
/// projection form, this keeps a nonzero derivative in the multiplier
/// entries whose slack turns strictly positive under the perturbation.
struct SmoothedSystem<'a> {
    prob: &'a dyn NlsdpProblem,
    pert: &'a Perturbation,
    mu: f64,
    n: usize,
    m: usize,
    p: usize,
}

impl SmoothedSystem<'_> {
    fn residual(&self, z: &[f64]) -> Option<Vec<f64>> {
        let pt = unpack(z, self.n, self.m, self.p);
        let mut out: Vec<f64> = lagrangian_grad_x(self.prob, &pt)
            .iter()
            .zip(&self.pert.a1)
            .map(|(g, a)| g - a)
            .collect();
        out.extend(
            self.prob
                .h(&pt.x)
                .iter()
                .zip(&self.pert.a2)
                .map(|(h, a)| h - a),
        );
        let s = &self.prob.g(&pt.x) - &self.pert.b;
        let mut c = sym_product(&s, &pt.lambda.mat);
        for i in 0..self.p {
            c.set(i, i, c.get(i, i) + self.mu);
        }
        out.extend(c.svec());
        out.iter().all(|v| v.is_finite()).then_some(out)
    }

    fn jacobian(&self, z: &[f64]) -> DMatrix<f64> {
        let (n, m, p) = (self.n, self.m, self.p);
        let pt = unpack(z, n, m, p);
        let s = &self.prob.g(&pt.x) - &self.pert.b;
        let dim = z.len();
        let basis = SymMatrix::svec_basis(p);
        let mut jac = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let mut out;
            if col < n {
                let mut d = vec![0.0; n];
                d[col] = 1.0;
                out = self.prob.hess_lagrangian(&pt.x, &pt.lambda, &d);
                out.extend(self.prob.jac_h(&pt.x, &d));
                let ds = self.prob.dg(&pt.x, &d);
                out.extend(sym_product(&ds, &pt.lambda.mat).svec());
            } else if col < n + m {
                let mut y = vec![0.0; m];
                y[col - n] = 1.0;
                out = self.prob.jac_h_adj(&pt.x, &y);
                out.extend(std::iter::repeat_n(0.0, m + SymMatrix::svec_len(p)));
            } else {
                let dg = &basis[col - n - m];
                let lam = KElement::new(vec![0.0; m], dg.clone());
                out = constraint_adjoint(self.prob, &pt.x, &lam);
                out.extend(std::iter::repeat_n(0.0, m));
                out.extend(sym_product(&s, dg).svec());
            }
            for (row, v) in out.into_iter().enumerate() {
                jac[(row, col)] = v;
            }
        }
        jac
    }
}

/// Damped Newton on the smoothed system, warm-started at the base point.
/// The smoothing is reduced to zero in stages sharing the step budget; the
/// result is accepted only if it solves the unsmoothed system to
/// `fallback.stop_tol`.
fn smoothed_newton(
    prob: &dyn NlsdpProblem,
    base: &KktPoint,
    pert: &Perturbation,
    cfg: &CalmnessConfig,
) -> Option<KktPoint> {
    let mut sys = SmoothedSystem {
        prob,
        pert,
        mu: cfg.smoothing,
        n: prob.dim_x(),
        m: prob.dim_h(),
        p: prob.dim_g(),
    };
    let mut z = pack(base);
    let mut f = sys.residual(&z)?;
    let mut steps = 0;
    loop {
        let fnorm = norm(&f);
        let level_tol = (1e-2 * sys.mu).max(cfg.newton_tol);
        if fnorm <= level_tol {
            if sys.mu == 0.0 {
                break;
            }
            sys.mu = if sys.mu < 1e-20 { 0.0 } else { 1e-4 * sys.mu };
            f = sys.residual(&z)?;
            continue;
        }
        if steps == cfg.newton_steps {
            break;
        }
        steps += 1;
        let jac = sys.jacobian(&z);
        let fv = DVector::from_column_slice(&f);
        let grad = jac.transpose() * &fv;
        let mut lhs = jac.transpose() * &jac;
        for i in 0..z.len() {
            lhs[(i, i)] += fnorm * fnorm;
        }
        let step = lhs.cholesky()?.solve(&(-&grad));
        let slope = grad.dot(&step);
        let theta = 0.5 * fnorm * fnorm;
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = z.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if let Some(ft) = sys.residual(&trial) {
                if 0.5 * norm(&ft).powi(2) <= theta + 1e-4 * t * slope {
                    accepted = Some((trial, ft));
                    break;
                }
            }
            t *= 0.5;
        }
        (z, f) = accepted?;
    }
    let pt = unpack(&z, sys.n, sys.m, sys.p);
    (perturbed_kkt_residual(prob, &pt, pert) <= cfg.fallback.stop_tol).then_some(pt)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub rho: f64,
    pub radius: f64,
    pub count: usize,
    /// `min (𝓛(x, λ, ρ) − f(x̄)) / ‖x − x̄‖²` over the samples at `radius`.
    pub l_hat: f64,
    /// The same minimum over samples at `radius / 10`.
    pub l_hat_inner: f64,
    pub worst_x: Vec<f64>,
    pub sosc_min_value: f64,
    pub positive: bool,
    pub stable: bool,
    pub success: bool,
}

/// Sampled quadratic growth of `𝓛(·, λ, ρ)` around `x̄`, uniformly over
/// multipliers `λ ∈ ℳ(x̄)` near `λ̄`.
pub fn quadratic_growth_probe(
    prob: &dyn NlsdpProblem,
    base: &KktPoint,
    model: &dyn MultiplierSetModel,
    rho: f64,
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<GrowthReport> {
    base.check_dims(prob)?;
    if count == 0 || !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::DegenerateSampling(format!(
            "growth probe needs a positive radius and sample count, got radius {radius}, count {count}"
        )));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidInput(format!(
            "penalty must be positive, got {rho}"
        )));
    }
    let sosc = sosc_certificate(prob, base, &SoscConfig::default())?;
    if !sosc.holds {
        return Err(Error::InvalidInput(format!(
            "second-order sufficient condition not certified (min value {:e})",
            sosc.min_value
        )));
    }
    let fbar = prob.f(&base.x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut run = |r: f64| -> Result<(f64, Vec<f64>)> {
        let pts: Vec<(Vec<f64>, KElement)> = (0..count)
            .map(|_| {
                let x = sample_in_ball(&mut rng, &base.x, r);
                let lam = sample_multiplier(&mut rng, &base.lambda, r);
                (x, lam)
            })
            .collect();
        let vals = par_map(&pts, |(x, lam)| -> Result<f64> {
            let lam = model.project(lam);
            let d2: f64 = x.iter().zip(&base.x).map(|(a, b)| (a - b).powi(2)).sum();
            Ok((aug_lagrangian_value(prob, x, &lam, rho)? - fbar) / d2)
        });
        let mut best = (f64::INFINITY, Vec::new());
        for ((x, _), v) in pts.iter().zip(vals) {
            let v = v?;
            if v < best.0 {
                best = (v, x.clone());
            }
        }
        Ok(best)
    };
    let (l_hat, worst_x) = run(radius)?;
    let (l_hat_inner, _) = run(0.1 * radius)?;
    let positive = l_hat > 0.0 && l_hat_inner > 0.0;
    let stable = positive && l_hat_inner <= 10.0 * l_hat && l_hat <= 10.0 * l_hat_inner;
    Ok(GrowthReport {
        rho,
        radius,
        count,
        l_hat,
        l_hat_inner,
        worst_x,
        sosc_min_value: sosc.min_value,
        positive,
        stable,
        success: positive && stable,
    })
}

/// Uniform point of the ball around `center`, never the center itself.
fn sample_in_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let n = center.len();
    loop {
        let mut u: Vec<f64> = (0..n).map(|_| gaussian(rng)).collect();
        normalize(&mut u);
        let s = radius * rng.gen_range(0.0f64..1.0).powf(1.0 / n as f64);
        if s > 0.0 && u.iter().any(|v| *v != 0.0) {
            return center.iter().zip(&u).map(|(c, v)| c + s * v).collect();
        }
    }
}

/// `λ̄` plus a random negative semidefinite matrix of norm at most `radius`.
fn sample_multiplier(rng: &mut ChaCha8Rng, center: &KElement, radius: f64) -> KElement {
    let n = center.mat.n();
    let mut d = project_nsd(&random_unit_sym(rng, n));
    let dn = d.frobenius_norm();
    if dn > 0.0 {
        d = d.scaled(radius * rng.gen_range(0.0..1.0) / dn);
    }
    let vec = center
        .vec
        .iter()
        .map(|v| v + radius * rng.gen_range(-1.0..1.0))
        .collect();
    KElement::new(vec, &center.mat + &d)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assumption1Report {
    pub radius: f64,
    pub requested: usize,
    /// Ratios `‖Π_ℳ(λ) − λ̂‖ / R(x, λ)` for sampled `λ ∉ ℳ`.
    pub ratios: Vec<f64>,
    pub skipped_inside: usize,
    pub restricted_failures: usize,
    pub max_ratio: Option<f64>,
}

/// `‖Π_ℳ(λ) − λ̂‖ / R(x, λ)` with `λ̂` the model's restricted projection.
/// `None` when the restricted projection is undefined at `λ`.
pub fn assumption1_ratio(
    prob: &dyn NlsdpProblem,
    model: &dyn MultiplierSetModel,
    pt: &KktPoint,
) -> Result<Option<f64>> {
    pt.check_dims(prob)?;
    let Some(hat) = model.restricted_project(&pt.lambda) else {
        return Ok(None);
    };
    let num = model.project(&pt.lambda).distance(&hat);
    if num == 0.0 {
        return Ok(Some(0.0));
    }
    let r = residual_r(prob, pt);
    Ok(Some(if r > 0.0 { num / r } else { f64::INFINITY }))
}

pub fn assumption1_probe(
    prob: &dyn NlsdpProblem,
    base: &KktPoint,
    model: &dyn MultiplierSetModel,
    radius: f64,
    samples: usize,
    seed: u64,
) -> Result<Assumption1Report> {
    base.check_dims(prob)?;
    if model.restricted_project(&base.lambda).is_none() {
        return Err(Error::InvalidInput(
            "multiplier model has no restricted projection".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<KktPoint> = (0..samples)
        .map(|_| {
            let x = sample_in_ball(&mut rng, &base.x, radius);
            let s = radius * rng.gen_range(0.0..1.0);
            let mat = &base.lambda.mat + &random_unit_sym(&mut rng, base.lambda.mat.n()).scaled(s);
            let vec = base
                .lambda
                .vec
                .iter()
                .map(|v| v + radius * rng.gen_range(-1.0..1.0))
                .collect();
            KktPoint::new(x, KElement::new(vec, mat))
        })
        .collect();
    let tol = 1e-12;
    let results = par_map(&pts, |pt| -> Result<Option<Option<f64>>> {
        if model.contains(&pt.lambda, tol) {
            return Ok(None);
        }
        Ok(Some(assumption1_ratio(prob, model, pt)?))
    });
    let mut ratios = Vec::new();
    let mut skipped_inside = 0;
    let mut restricted_failures = 0;
    for r in results {
        match r? {
            None => skipped_inside += 1,
            Some(None) => restricted_failures += 1,
            Some(Some(v)) => ratios.push(v),
        }
    }
    let max_ratio = ratios.iter().copied().reduce(f64::max);
    Ok(Assumption1Report {
        radius,
        requested: samples,
        ratios,
        skipped_inside,
        restricted_failures,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alm::{AlmIteration, PenaltyPolicy, Reference};
    use crate::problem::fixture;

    fn row(k: usize, x: f64, gamma: SymMatrix) -> AlmIteration {
        AlmIteration {
            k,
            x: vec![x],
            lambda: KElement::new(vec![], gamma),
            rho: 10.0,
            r: x.abs(),
            f: 0.5 * x.powi(3),
            eps: Some(1e-3),
            inner_iters: Some(1),
            grad_norm: Some(0.0),
            v: Some(0.0),
            dist_x: Some(x.abs()),
            dist_lambda: Some(0.0),
            complementarity: Some(0.0),
            gamma_max_eig: Some(0.0),
        }
    }

    fn geometric(q: f64, len: usize) -> AlmTrace {
        let g = SymMatrix::from_diag(&[0.0, -1.0, -2.0]);
        let mut iterations: Vec<_> = (0..len - 1)
            .map(|k| row(k, q.powi(k as i32), g.clone()))
            .collect();
        iterations.push(row(len - 1, 0.0, g));
        AlmTrace {
            iterations,
            dual_termination: Some(0),
        }
    }

    #[test]
    fn geometric_trace_recovers_ratio() {
        let t = geometric(0.3, 25);
        let rep = estimate_q_rate(&t, None).unwrap();
        assert!((rep.q_hat.unwrap() - 0.3).abs() < 1e-3);
        assert!(rep.reliable);
        assert!(rep
            .ratios
            .iter()
            .all(|r| r.ratio > 0.0 && (r.ratio - 0.3).abs() < 1e-12));
        assert_eq!(rep.target_source, LimitSource::FinalIterate);
        let explicit = estimate_q_rate_to(&t, &[0.0], &t.iterations[0].lambda).unwrap();
        assert_eq!(explicit.target_source, LimitSource::Explicit);
        assert!((explicit.q_hat.unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn short_trace_is_rejected() {
        let t = geometric(0.3, 5);
        assert!(matches!(
            estimate_q_rate(&t, None),
            Err(Error::TooShortTrace {
                len: 5,
                required: 6
            })
        ));
    }

    #[test]
    fn stalled_error_bound_ratios_are_zero() {
        let fx = fixture("example-6.1").unwrap();
        let mut t = geometric(0.5, 8);
        for r in t.iterations.iter_mut() {
            r.x = vec![0.1];
        }
        let rep = error_bound_monitor(fx.problem.as_ref(), &t, 4).unwrap();
        assert!(rep.ratios.iter().all(|r| *r == Some(0.0)));
        assert_eq!(rep.kappa3, Some(0.0));
    }

    #[test]
    fn tau_series_has_one_entry_per_step() {
        let t = geometric(0.5, 8);
        let c = TauConstants {
            zeta_bar: 1.0,
            kappa1: 1.0,
            kappa2: 1.0,
        };
        let tau = tau_bound_series(&t, &c);
        assert_eq!(tau.len(), 7);
        let first = 2.0 * 2f64.sqrt() * (1e-3 / 1.0 + 0.1);
        assert!((tau[0] - first).abs() < 1e-12);
        assert_eq!(residual_bound_constant(&t), Some(1.0));
    }

    #[test]
    fn zero_perturbation_leaves_base_in_place() {
        let fx = fixture("example-6.1").unwrap();
        let rep = calmness_probe(
            fx.problem.as_ref(),
            &fx.solution,
            fx.model.as_ref(),
            0.0,
            3,
            1,
        )
        .unwrap();
        assert_eq!(rep.samples.len(), 3);
        assert!(rep
            .samples
            .iter()
            .all(|s| s.deviation == 0.0 && s.ratio.is_none()));
        assert_eq!(rep.kappa_hat, None);
    }

    #[test]
    fn smoothed_newton_solves_feasible_perturbation() {
        let fx = fixture("example-6.1").unwrap();
        let pert = Perturbation {
            a1: vec![1e-4],
            a2: vec![],
            b: SymMatrix::from_diag(&[-1e-4, -2e-4, -1e-4]),
        };
        let cfg = CalmnessConfig::default();
        let pt = smoothed_newton(fx.problem.as_ref(), &fx.solution, &pert, &cfg).expect("newton");
        assert!(perturbed_kkt_residual(fx.problem.as_ref(), &pt, &pert) < 1e-7);
    }

    #[test]
    fn restricted_ratio_vanishes_on_structured_multipliers() {
        let fx = fixture("example-6.1").unwrap();
        let lam = KElement::new(vec![], SymMatrix::from_diag(&[0.0, -0.9, -2.1]));
        let pt = KktPoint::new(vec![0.0], lam);
        let r = assumption1_ratio(fx.problem.as_ref(), fx.model.as_ref(), &pt).unwrap();
        assert_eq!(r, Some(0.0));
    }

    #[test]
    fn growth_requires_positive_radius() {
        let fx = fixture("example-6.1").unwrap();
        let r = quadratic_growth_probe(
            fx.problem.as_ref(),
            &fx.solution,
            fx.model.as_ref(),
            10.0,
            0.0,
            10,
            1,
        );
        assert!(matches!(r, Err(Error::DegenerateSampling(_))));
    }

    #[test]
    fn single_cubic_rate_with_fixed_penalty() {
        let fx = fixture("example-6.1").unwrap();
        let cfg = AlmConfig {
            policy: PenaltyPolicy::Fixed,
            rho0: 100.0,
            stop_tol: 1e-40,
            eps_floor: 0.0,
            ..AlmConfig::default()
        };
        let reference = Reference {
            x: &fx.solution.x,
            model: fx.model.as_ref(),
            contains_tol: 1e-10,
        };
        let out = alm_solve(
            fx.problem.as_ref(),
            &fx.default_start,
            &cfg,
            Some(&reference),
        )
        .unwrap();
        let rep = estimate_q_rate(&out.trace, Some(fx.model.as_ref())).unwrap();
        assert!(rep.q_hat.unwrap() < 1.0);
    }
}
