//! Per-scenario numerical optimization.
//!
//! Positive definiteness is decided by Sylvester's criterion on the leading
//! principal minors; the remaining classes (semidefinite, indefinite, negative)
//! need the spectrum and come from cyclic Jacobi eigenvalues. Stationary
//! points are found by damped Newton iterations on the gradient from a grid of
//! starts. Local minimality is certified by finding a radius on which the
//! Hessian stays positive definite and then sampling the ball.

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{jacobi_eigenvalues, Matrix};
use crate::probspace::{is_measurable_rv, same_space, RandomVariableRn, ScenarioId, Verdict};
use crate::randfunc::{BoxSet, RandFuncError, RandomFunction, RandomSet, SetDescription};

/// Default relative tolerance for definiteness decisions.
pub const DEFAULT_TOL_REL: f64 = 1e-9;
/// ‖g‖∞ at which a Newton iterate counts as stationary.
pub const STATIONARY_TOL: f64 = 1e-10;
/// Converged Newton points closer than this (sup norm) are merged.
pub const DEDUP_RADIUS: f64 = 1e-6;
/// Largest ‖g‖∞ accepted by [`verify_local_min`].
pub const VERIFY_GRAD_TOL: f64 = 1e-8;
/// Slack allowed in f(x + d) ≥ f(x) during ball sampling.
pub const DESCENT_SLACK: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-9;
const MAX_HALVINGS: usize = 40;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptimizeError {
    #[error("matrix is not symmetric (|h_ij - h_ji| up to {asymmetry})")]
    NotSymmetric { asymmetry: f64 },
    #[error(transparent)]
    Eval(#[from] RandFuncError),
    #[error("no radius with a positive definite Hessian after {halvings} halvings at {x:?}")]
    NoRadiusFound { x: Vec<f64>, halvings: usize },
    #[error("gradient norm {grad_norm} at {x:?} exceeds the stationarity tolerance")]
    NotStationary { x: Vec<f64>, grad_norm: f64 },
    #[error("feasible set of scenario {scenario} is empty")]
    EmptyFeasible { scenario: ScenarioId },
    #[error("scenario {scenario}: no grid point could be evaluated")]
    NoEvaluablePoint { scenario: ScenarioId },
    #[error("cannot minimize over a {kind} set by enumeration")]
    UnsupportedSet { kind: &'static str },
    #[error("random function and set are defined on different spaces")]
    DomainMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Definiteness {
    #[serde(rename = "PD")]
    PositiveDefinite,
    #[serde(rename = "PSD_degenerate")]
    PsdDegenerate,
    #[serde(rename = "indefinite")]
    Indefinite,
    #[serde(rename = "ND")]
    NegativeDefinite,
    #[serde(rename = "NSD_degenerate")]
    NsdDegenerate,
}

impl Definiteness {
    /// Positive semidefinite, definite or not.
    pub fn is_psd(self) -> bool {
        matches!(self, Definiteness::PositiveDefinite | Definiteness::PsdDegenerate)
    }

    pub fn label(self) -> &'static str {
        match self {
            Definiteness::PositiveDefinite => "PD",
            Definiteness::PsdDegenerate => "PSD_degenerate",
            Definiteness::Indefinite => "indefinite",
            Definiteness::NegativeDefinite => "ND",
            Definiteness::NsdDegenerate => "NSD_degenerate",
        }
    }
}

fn check_symmetric(h: &Matrix) -> Result<(), OptimizeError> {
    let asymmetry = h.asymmetry();
    if asymmetry > SYMMETRY_TOL || asymmetry.is_nan() {
        return Err(OptimizeError::NotSymmetric { asymmetry });
    }
    Ok(())
}

/// Determinants Δ_1..Δ_n of the top-left k×k blocks.
pub fn leading_principal_minors(h: &Matrix) -> Result<Vec<f64>, OptimizeError> {
    check_symmetric(h)?;
    Ok((1..=h.dim()).map(|k| h.leading(k).determinant()).collect())
}

/// Classification together with the quantities it was decided from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefinitenessReport {
    pub classification: Definiteness,
    pub minors: Vec<f64>,
    /// Present when Sylvester's test did not settle positive definiteness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
}

/// Classifies a symmetric matrix.
///
/// With `s = 1 + ‖H‖∞`, the matrix is PD when every leading minor satisfies
/// `Δ_k > tol_rel · s^k`. Otherwise the Jacobi eigenvalues decide with the
/// band `τ = tol_rel · s`: λ_min > τ is still PD (the scaled minor test is
/// conservative on ill-conditioned input), λ_max < −τ is ND, a spectrum
/// inside `[−τ, ∞)` is PSD_degenerate, inside `(−∞, τ]` NSD_degenerate, and
/// anything else is indefinite.
pub fn classify(h: &Matrix, tol_rel: f64) -> Result<DefinitenessReport, OptimizeError> {
    let minors = leading_principal_minors(h)?;
    let scale = 1.0 + h.norm_inf();
    let sylvester = minors
        .iter()
        .enumerate()
        .all(|(k, d)| *d > tol_rel * scale.powi(k as i32 + 1));
    if sylvester {
        return Ok(DefinitenessReport {
            classification: Definiteness::PositiveDefinite,
            minors,
            eigenvalues: None,
        });
    }
    let eig = jacobi_eigenvalues(h);
    let tau = tol_rel * scale;
    let (lmin, lmax) = (eig[0], eig[eig.len() - 1]);
    let classification = if lmin > tau {
        Definiteness::PositiveDefinite
    } else if lmax < -tau {
        Definiteness::NegativeDefinite
    } else if lmin >= -tau {
        Definiteness::PsdDegenerate
    } else if lmax <= tau {
        Definiteness::NsdDegenerate
    } else {
        Definiteness::Indefinite
    };
    Ok(DefinitenessReport {
        classification,
        minors,
        eigenvalues: Some(eig),
    })
}

pub fn classify_definiteness(h: &Matrix, tol_rel: f64) -> Result<Definiteness, OptimizeError> {
    classify(h, tol_rel).map(|r| r.classification)
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryOptions {
    /// Starts per dimension.
    pub grid: usize,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub tol_rel: f64,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self {
            grid: 9,
            newton_tol: STATIONARY_TOL,
            max_iter: 100,
            tol_rel: DEFAULT_TOL_REL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryPoint {
    pub scenario: ScenarioId,
    pub x: Vec<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub minors: Vec<f64>,
    pub classification: Definiteness,
    pub newton_iters: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NewtonDiagnostics {
    pub starts: usize,
    pub converged: usize,
    pub singular_hessian: usize,
    pub eval_failures: usize,
    pub stalled: usize,
    pub outside_region: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySearch {
    pub points: Vec<StationaryPoint>,
    pub diagnostics: NewtonDiagnostics,
}

enum NewtonEnd {
    Converged { x: Vec<f64>, grad_norm: f64, iters: usize },
    Singular,
    EvalFailure,
    Stalled,
}

fn newton(rf: &RandomFunction, scenario: usize, start: Vec<f64>, opts: &StationaryOptions) -> NewtonEnd {
    let mut x = start;
    let grad_norm = |x: &[f64]| rf.gradient(scenario, x).map(|g| sup_norm(&g));
    let mut iters = 0;
    while iters < opts.max_iter {
        let Ok(g) = rf.gradient(scenario, &x) else {
            return NewtonEnd::EvalFailure;
        };
        let gn = sup_norm(&g);
        if gn == 0.0 {
            break;
        }
        let Ok(h) = rf.hessian(scenario, &x) else {
            return NewtonEnd::EvalFailure;
        };
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let Some(step) = h.solve(&rhs) else {
            if gn <= opts.newton_tol {
                break;
            }
            return NewtonEnd::Singular;
        };
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=30 {
            let y: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            if matches!(grad_norm(&y), Ok(n) if n < gn) {
                accepted = Some(y);
                break;
            }
            t *= 0.5;
        }
        iters += 1;
        let Some(y) = accepted else { break };
        let moved = x.iter().zip(&y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        x = y;
        if moved <= 1e-15 * (1.0 + sup_norm(&x)) {
            break;
        }
    }
    match grad_norm(&x) {
        Ok(gn) if gn <= opts.newton_tol => NewtonEnd::Converged {
            x,
            grad_norm: gn,
            iters,
        },
        Ok(_) => NewtonEnd::Stalled,
        Err(_) => NewtonEnd::EvalFailure,
    }
}

/// Enumerates stationary points of f(ω, ·) in `region` by Newton's method on
/// g(ω, ·) = 0 from an `opts.grid`-per-dimension grid of starts.
pub fn find_stationary_points(
    rf: &RandomFunction,
    scenario: usize,
    region: &BoxSet,
    opts: &StationaryOptions,
) -> Result<StationarySearch, OptimizeError> {
    let starts = region.grid_len(opts.grid);
    let ends: Vec<NewtonEnd> = (0..starts)
        .into_par_iter()
        .map(|flat| newton(rf, scenario, region.grid_point(flat, opts.grid), opts))
        .collect();

    let mut diagnostics = NewtonDiagnostics {
        starts,
        ..Default::default()
    };
    let mut converged = Vec::new();
    for end in ends {
        match end {
            NewtonEnd::Converged { x, grad_norm, iters } => {
                diagnostics.converged += 1;
                if region.contains(&x) {
                    converged.push((x, grad_norm, iters));
                } else {
                    diagnostics.outside_region += 1;
                }
            }
            NewtonEnd::Singular => diagnostics.singular_hessian += 1,
            NewtonEnd::EvalFailure => diagnostics.eval_failures += 1,
            NewtonEnd::Stalled => diagnostics.stalled += 1,
        }
    }

    converged.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let mut clusters: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    for (x, gn, iters) in converged {
        let near = clusters
            .iter_mut()
            .find(|(c, _, _)| c.iter().zip(&x).all(|(a, b)| (a - b).abs() <= DEDUP_RADIUS));
        match near {
            Some(cluster) if gn < cluster.1 => *cluster = (x, gn, iters),
            Some(_) => {}
            None => clusters.push((x, gn, iters)),
        }
    }
    clusters.sort_by(|a, b| lex_cmp(&a.0, &b.0));

    let id = rf.space().scenario_id(scenario);
    let mut points = Vec::with_capacity(clusters.len());
    for (x, grad_norm, newton_iters) in clusters {
        let h = rf.hessian(scenario, &x)?;
        let report = classify(&h, opts.tol_rel)?;
        points.push(StationaryPoint {
            scenario: id,
            value: rf.eval_f(scenario, &x)?,
            x,
            grad_norm,
            minors: report.minors,
            classification: report.classification,
            newton_iters,
        });
    }
    Ok(StationarySearch { points, diagnostics })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalMinOptions {
    pub seed: u64,
    pub tol_rel: f64,
    pub initial_radius: f64,
}

impl Default for LocalMinOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            tol_rel: DEFAULT_TOL_REL,
            initial_radius: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalMinCertificate {
    pub scenario: ScenarioId,
    pub x: Vec<f64>,
    /// Radius on which the sampled Hessians were PD and no sample descended.
    pub delta: f64,
    pub samples_checked: usize,
    /// Smallest f(x + d) − f(x) over the samples.
    pub min_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum LocalMinOutcome {
    Certified(LocalMinCertificate),
    /// A sampled step `direction` with f(x + d) < f(x) − slack.
    Failure {
        direction: Vec<f64>,
        margin: f64,
    },
}

fn unit_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|a| a / norm).collect();
        }
    }
}

fn hessian_pd_on_ball(
    rf: &RandomFunction,
    scenario: usize,
    x: &[f64],
    delta: f64,
    opts: &LocalMinOptions,
) -> Result<bool, OptimizeError> {
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_ba11);
    let mut points = vec![x.to_vec()];
    for i in 0..n {
        for sign in [-1.0, 1.0] {
            let mut y = x.to_vec();
            y[i] += sign * delta;
            points.push(y);
        }
    }
    while points.len() < 8 * n + 1 {
        let dir = unit_direction(&mut rng, n);
        let r = delta * rng.gen::<f64>().powf(1.0 / n as f64);
        points.push(x.iter().zip(&dir).map(|(a, d)| a + r * d).collect());
    }
    for y in &points {
        let pd = match rf.hessian(scenario, y) {
            Ok(h) => classify_definiteness(&h, opts.tol_rel)? == Definiteness::PositiveDefinite,
            Err(_) => false,
        };
        if !pd {
            return Ok(false);
        }
    }
    Ok(true)
}

struct BallScan {
    samples: usize,
    min_margin: f64,
    worst: Option<(Vec<f64>, f64)>,
}

/// Samples `200 n` steps d with radii geometric from `delta` down to
/// `delta / 1024` and records the smallest-radius descent step, if any.
fn scan_ball(
    rf: &RandomFunction,
    scenario: usize,
    x: &[f64],
    delta: f64,
    seed: u64,
) -> Result<BallScan, OptimizeError> {
    let n = x.len();
    let total = 200 * n;
    let f0 = rf.eval_f(scenario, x)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_margin = f64::INFINITY;
    let mut worst: Option<(Vec<f64>, f64)> = None;
    for j in 0..total {
        let dir = unit_direction(&mut rng, n);
        let t = j as f64 / (total - 1).max(1) as f64;
        let r = delta * 1024f64.powf(-t);
        let d: Vec<f64> = dir.iter().map(|v| r * v).collect();
        let y: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        let margin = rf.eval_f(scenario, &y)? - f0;
        min_margin = min_margin.min(margin);
        if margin < -DESCENT_SLACK {
            // radii decrease with j, so later violations are closer to x
            worst = Some((d, margin));
        }
    }
    Ok(BallScan {
        samples: total,
        min_margin,
        worst,
    })
}

/// Certifies that `x` minimizes f(ω, ·) on a ball around it.
///
/// The radius starts at `opts.initial_radius` and is halved (at most 40
/// times) until the Hessian is PD at 8n sample points of the closed ball; the
/// ball is then probed with 200n steps. If no radius works, the ball of the
/// initial radius is probed instead so that a descent step can be reported;
/// when none is found the result is [`OptimizeError::NoRadiusFound`].
pub fn verify_local_min(
    rf: &RandomFunction,
    scenario: usize,
    x: &[f64],
    opts: &LocalMinOptions,
) -> Result<LocalMinOutcome, OptimizeError> {
    let grad_norm = sup_norm(&rf.gradient(scenario, x)?);
    if grad_norm.is_nan() || grad_norm > VERIFY_GRAD_TOL {
        return Err(OptimizeError::NotStationary {
            x: x.to_vec(),
            grad_norm,
        });
    }
    let mut delta = opts.initial_radius;
    let mut found = None;
    for _ in 0..=MAX_HALVINGS {
        if hessian_pd_on_ball(rf, scenario, x, delta, opts)? {
            found = Some(delta);
            break;
        }
        delta *= 0.5;
    }
    let Some(delta) = found else {
        let scan = scan_ball(rf, scenario, x, opts.initial_radius, opts.seed)?;
        return match scan.worst {
            Some((direction, margin)) => Ok(LocalMinOutcome::Failure { direction, margin }),
            None => Err(OptimizeError::NoRadiusFound {
                x: x.to_vec(),
                halvings: MAX_HALVINGS,
            }),
        };
    };
    let scan = scan_ball(rf, scenario, x, delta, opts.seed)?;
    if let Some((direction, margin)) = scan.worst {
        return Ok(LocalMinOutcome::Failure { direction, margin });
    }
    Ok(LocalMinOutcome::Certified(LocalMinCertificate {
        scenario: rf.space().scenario_id(scenario),
        x: x.to_vec(),
        delta,
        samples_checked: scan.samples,
        min_margin: scan.min_margin,
    }))
}

/// Descent polish inside `bounds`: Newton steps on a shifted Hessian with
/// backtracking on f, projected onto the box.
pub fn polish_local_min(
    rf: &RandomFunction,
    scenario: usize,
    start: &[f64],
    bounds: &BoxSet,
) -> Result<Vec<f64>, OptimizeError> {
    let mut x = start.to_vec();
    bounds.clamp(&mut x);
    let mut fx = rf.eval_f(scenario, &x)?;
    for _ in 0..200 {
        let g = rf.gradient(scenario, &x)?;
        if sup_norm(&g) <= 1e-13 {
            break;
        }
        let mut h = rf.hessian(scenario, &x)?;
        let eig = jacobi_eigenvalues(&h);
        let shift = (-eig[0]).max(0.0) + 1e-8 * (1.0 + h.norm_inf());
        if eig[0] <= 1e-8 * (1.0 + h.norm_inf()) {
            for i in 0..h.dim() {
                h[(i, i)] += shift;
            }
        }
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let step = h.solve(&rhs).unwrap_or(rhs);
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..60 {
            let mut y: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            bounds.clamp(&mut y);
            if let Ok(fy) = rf.eval_f(scenario, &y) {
                if fy < fx {
                    next = Some((y, fy));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((y, fy)) = next else { break };
        x = y;
        fx = fy;
    }
    Ok(x)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMinimum {
    pub scenario: ScenarioId,
    /// Reported minimizer (the polished point when polishing improved it).
    pub x: Vec<f64>,
    pub value: f64,
    /// Unpolished enumeration result; this is the oracle value.
    pub grid_x: Vec<f64>,
    pub grid_value: f64,
    pub evaluated: usize,
    pub excluded: usize,
}

#[derive(Clone, Copy)]
struct Best {
    value: f64,
    index: usize,
}

fn better(a: Option<Best>, b: Option<Best>, points_cmp: impl Fn(usize, usize) -> Ordering) -> Option<Best> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(p), Some(q)) => {
            let ord = p.value.total_cmp(&q.value).then_with(|| points_cmp(p.index, q.index));
            Some(if ord.is_le() { p } else { q })
        }
    }
}

/// Minimizes f(ω, ·) over a box grid or a finite point set by enumeration.
/// Ties go to the lexicographically smallest point; points where f fails to
/// evaluate are skipped and counted.
pub fn global_min_compact(
    rf: &RandomFunction,
    scenario: usize,
    set: &SetDescription,
    grid: usize,
    polish: bool,
) -> Result<GridMinimum, OptimizeError> {
    let id = rf.space().scenario_id(scenario);
    let (len, point): (usize, Box<dyn Fn(usize) -> Vec<f64> + Sync>) = match set {
        SetDescription::Box(b) => {
            let b = b.clone();
            (b.grid_len(grid), Box::new(move |i| b.grid_point(i, grid)))
        }
        SetDescription::PointCloud(points) => {
            let points = points.clone();
            (points.len(), Box::new(move |i| points[i].clone()))
        }
        SetDescription::Empty => return Err(OptimizeError::EmptyFeasible { scenario: id }),
        SetDescription::LevelSet { .. } => return Err(OptimizeError::UnsupportedSet { kind: set.kind() }),
    };
    // Box grids are enumerated in lexicographic order already; clouds are not.
    let lex_tiebreak = |a: usize, b: usize| match set {
        SetDescription::PointCloud(points) => lex_cmp(&points[a], &points[b]).then(a.cmp(&b)),
        _ => a.cmp(&b),
    };
    let (best, excluded) = (0..len)
        .into_par_iter()
        .map(|i| match rf.eval_f(scenario, &point(i)) {
            Ok(value) => (Some(Best { value, index: i }), 0usize),
            Err(_) => (None, 1),
        })
        .reduce(|| (None, 0), |(a, ea), (b, eb)| (better(a, b, lex_tiebreak), ea + eb));
    let best = best.ok_or(OptimizeError::NoEvaluablePoint { scenario: id })?;
    let grid_x = point(best.index);
    let mut result = GridMinimum {
        scenario: id,
        x: grid_x.clone(),
        value: best.value,
        grid_x,
        grid_value: best.value,
        evaluated: len - excluded,
        excluded,
    };
    if polish {
        if let SetDescription::Box(b) = set {
            let y = polish_local_min(rf, scenario, &result.grid_x, b)?;
            let fy = rf.eval_f(scenario, &y)?;
            if fy < result.value {
                result.x = y;
                result.value = fy;
            }
        }
    }
    Ok(result)
}

/// The optimal-value random variable η(ω) = min over C(ω) of f(ω, ·).
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalValue {
    pub eta: RandomVariableRn,
    pub minima: Vec<GridMinimum>,
    /// Measurability of η, checked with tolerance 1e-9.
    pub verdict: Verdict,
}

/// Grid value of every scenario's minimum, without polishing.
pub fn optimal_value(rf: &RandomFunction, set: &RandomSet, grid: usize) -> Result<OptimalValue, OptimizeError> {
    if !same_space(rf.space(), set.space()) {
        return Err(OptimizeError::DomainMismatch);
    }
    let space = rf.space().clone();
    let minima = (0..space.len())
        .map(|s| global_min_compact(rf, s, set.description(s), grid, false))
        .collect::<Result<Vec<_>, _>>()?;
    let eta = RandomVariableRn::from_scalars(space.clone(), minima.iter().map(|m| m.grid_value).collect())
        .expect("one value per scenario");
    let verdict = is_measurable_rv(&space, &eta, 1e-9).expect("same space");
    Ok(OptimalValue { eta, minima, verdict })
}
