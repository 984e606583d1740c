//! Measurable selections.
//!
//! Every solver here works on one representative scenario per atom and copies
//! the answer to the rest of the atom, so the returned selection is constant
//! on atoms. That shortcut is only sound when the problem data are themselves
//! measurable, which is why each solver checks them first and refuses with a
//! witness otherwise.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::optimize::{
    classify_definiteness, find_stationary_points, global_min_compact, lex_cmp, optimal_value, verify_local_min,
    Definiteness, LocalMinCertificate, LocalMinOptions, LocalMinOutcome, OptimalValue, OptimizeError,
    StationaryOptions, StationaryPoint, StationarySearch, DEFAULT_TOL_REL, VERIFY_GRAD_TOL,
};
use crate::probspace::{
    is_measurable_rv, is_measurable_setmap, same_space, ProbSpace, RandomVariableRn, ScenarioId, Verdict, Witness,
};
use crate::randfunc::{intersect_setmaps, BoxSet, RandFuncError, RandomFunction, RandomSet, SetDescription};

/// Residual accepted as a solution of f(ω, x) = η(ω).
pub const EQUATION_TOL: f64 = 1e-9;
/// Tolerance of the measurability check on η.
pub const ETA_TOL: f64 = 1e-9;
const BISECTION_STEPS: usize = 60;
const REFINE_STARTS: usize = 64;
const REFINE_STEPS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectionError {
    #[error("scenario {scenario} has an empty set")]
    EmptySet { scenario: ScenarioId },
    #[error("cannot select from a {kind} set")]
    UnsupportedSet { kind: &'static str },
    #[error("optimal value is not measurable: scenarios {} and {} of atom {:?} differ", .0.first, .0.second, .0.atom)]
    NonMeasurableEta(Witness),
    #[error("objective is not measurable: scenarios {} and {} of atom {:?} differ at {:?}", .0.first, .0.second, .0.atom, .0.probe)]
    NonMeasurableF(Witness),
    #[error("feasible set is not measurable: scenarios {} and {} of atom {:?} differ", .0.first, .0.second, .0.atom)]
    NonMeasurableSet(Witness),
    #[error("no deterministic solution in scenarios {scenarios:?}")]
    NoDeterministicSolution { scenarios: Vec<ScenarioId> },
    #[error("no stationary point found for atom {atom:?}")]
    NoStationaryPoints { atom: Vec<ScenarioId> },
    #[error("none of the stationary points of atom {atom:?} has a positive definite Hessian")]
    NoPDStationaryPoint {
        atom: Vec<ScenarioId>,
        points: Vec<StationaryPoint>,
    },
    #[error("local minimality of {x:?} failed for atom {atom:?}: step {direction:?} descends by {margin}")]
    VerificationFailed {
        atom: Vec<ScenarioId>,
        x: Vec<f64>,
        direction: Vec<f64>,
        margin: f64,
    },
    #[error("inputs are defined on different spaces")]
    DomainMismatch,
    #[error("expected dimension {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
    #[error(transparent)]
    RandFunc(#[from] RandFuncError),
}

/// Point chosen for an atom, with its certificate.
type AtomChoice = (Vec<f64>, Certificate);

/// Why a selected point is a solution.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// f(ω, ξ(ω)) attains the minimum `value` over the feasible set.
    Global {
        value: f64,
    },
    LocalMin(LocalMinCertificate),
    /// |f(ω, ξ(ω)) − η(ω)| = `residual`.
    Equation {
        residual: f64,
    },
    /// ξ(ω) is an element of the given set.
    Member,
}

/// A point per scenario, with its measurability verdict and certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub xi: RandomVariableRn,
    /// Exact (tolerance 0) constancy of `xi` on atoms.
    pub verdict: Verdict,
    pub certificates: Vec<Certificate>,
}

impl Selection {
    pub fn space(&self) -> &Arc<ProbSpace> {
        self.xi.space()
    }

    fn from_atoms(space: &Arc<ProbSpace>, per_atom: Vec<AtomChoice>) -> Self {
        let mut points = vec![Vec::new(); space.len()];
        let mut certificates = vec![Certificate::Member; space.len()];
        for (atom, (x, cert)) in space.atoms().iter().zip(per_atom) {
            for &s in atom {
                points[s] = x.clone();
                certificates[s] = match &cert {
                    Certificate::LocalMin(c) => Certificate::LocalMin(LocalMinCertificate {
                        scenario: space.scenario_id(s),
                        ..c.clone()
                    }),
                    other => other.clone(),
                };
            }
        }
        Self::from_points(space, points, certificates)
    }

    fn from_points(space: &Arc<ProbSpace>, points: Vec<Vec<f64>>, certificates: Vec<Certificate>) -> Self {
        let xi = RandomVariableRn::new(space.clone(), points).expect("one point per scenario");
        let verdict = is_measurable_rv(space, &xi, 0.0).expect("same space");
        Self {
            xi,
            verdict,
            certificates,
        }
    }
}

/// Result of [`canonical_select`]; `input` records whether the set map was
/// measurable. A non-measurable input still yields a selection.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalSelection {
    pub selection: Selection,
    pub input: Verdict,
}

/// Picks the lexicographically smallest point of every scenario's set. Boxes
/// contribute their lower corner.
pub fn canonical_select(set: &RandomSet) -> Result<CanonicalSelection, SelectionError> {
    let space = set.space().clone();
    let mut points = Vec::with_capacity(space.len());
    for (i, desc) in set.descriptions().iter().enumerate() {
        let x = match desc {
            SetDescription::Empty => {
                return Err(SelectionError::EmptySet {
                    scenario: space.scenario_id(i),
                })
            }
            SetDescription::Box(b) => b.lower().to_vec(),
            SetDescription::PointCloud(cloud) => {
                cloud
                    .iter()
                    .min_by(|a, b| lex_cmp(a, b))
                    .cloned()
                    .ok_or(SelectionError::EmptySet {
                        scenario: space.scenario_id(i),
                    })?
            }
            SetDescription::LevelSet { .. } => return Err(SelectionError::UnsupportedSet { kind: desc.kind() }),
        };
        points.push(x);
    }
    let input = is_measurable_setmap(&space, set, 0.0).map_err(|_| SelectionError::DomainMismatch)?;
    let certificates = vec![Certificate::Member; space.len()];
    Ok(CanonicalSelection {
        selection: Selection::from_points(&space, points, certificates),
        input,
    })
}

fn require_measurable_f(rf: &RandomFunction, probes: &[Vec<f64>]) -> Result<(), SelectionError> {
    match rf.check_joint_measurability(probes)? {
        Verdict::Measurable => Ok(()),
        Verdict::NonMeasurable(w) => Err(SelectionError::NonMeasurableF(w)),
    }
}

/// Probe points for a set map: box probe grids and cloud points, sorted and
/// deduplicated.
fn probes_of(set: &RandomSet) -> Vec<Vec<f64>> {
    let mut probes = Vec::new();
    for desc in set.descriptions() {
        match desc {
            SetDescription::Empty => {}
            SetDescription::Box(b) | SetDescription::LevelSet { bounds: b, .. } => probes.extend(b.probe_grid()),
            SetDescription::PointCloud(points) => probes.extend(points.iter().cloned()),
        }
    }
    probes.sort_by(|a, b| lex_cmp(a, b));
    probes.dedup();
    probes
}

/// Finds a solution of f(ω, x) = target in `set`, returning the
/// lexicographically smallest candidate found and its residual.
///
/// On a box, candidates come from grid points that already solve the
/// equation, bisection along grid edges where f − target changes sign, and
/// Gauss-Newton refinement started from the grid's local minima of
/// |f − target|.
fn solve_in_set(
    rf: &RandomFunction,
    scenario: usize,
    target: f64,
    set: &SetDescription,
    grid: usize,
) -> Result<Option<(Vec<f64>, f64)>, SelectionError> {
    let residual = |x: &[f64]| rf.eval_f(scenario, x).ok().map(|v| v - target);
    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    match set {
        SetDescription::Empty => {
            return Err(SelectionError::EmptySet {
                scenario: rf.space().scenario_id(scenario),
            })
        }
        SetDescription::LevelSet { .. } => return Err(SelectionError::UnsupportedSet { kind: set.kind() }),
        SetDescription::PointCloud(points) => {
            for p in points {
                if let Some(h) = residual(p) {
                    if h.abs() <= EQUATION_TOL {
                        found.push((p.clone(), h.abs()));
                    }
                }
            }
        }
        SetDescription::Box(b) => found = solve_in_box(rf, scenario, target, b, grid),
    }
    Ok(found
        .into_iter()
        .min_by(|a, b| lex_cmp(&a.0, &b.0).then(a.1.total_cmp(&b.1))))
}

fn solve_in_box(rf: &RandomFunction, scenario: usize, target: f64, b: &BoxSet, grid: usize) -> Vec<(Vec<f64>, f64)> {
    let residual = |x: &[f64]| rf.eval_f(scenario, x).ok().map(|v| v - target);
    let n = b.dim();
    let len = b.grid_len(grid);
    let values: Vec<Option<f64>> = (0..len)
        .into_par_iter()
        .map(|k| residual(&b.grid_point(k, grid)))
        .collect();
    let strides: Vec<usize> = (0..n).map(|a| grid.pow((n - 1 - a) as u32)).collect();
    let neighbours = |k: usize| {
        strides
            .iter()
            .filter(move |&&s| (k / s) % grid + 1 < grid)
            .map(move |&s| k + s)
    };

    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    for (k, h) in values.iter().enumerate() {
        if matches!(h, Some(h) if h.abs() <= EQUATION_TOL) {
            found.push((b.grid_point(k, grid), h.unwrap().abs()));
        }
    }

    let edges: Vec<(usize, usize)> = (0..len)
        .flat_map(|k| neighbours(k).map(move |j| (k, j)))
        .filter(|&(k, j)| matches!((values[k], values[j]), (Some(a), Some(c)) if a * c < 0.0))
        .collect();
    let bisected: Vec<Option<(Vec<f64>, f64)>> = edges
        .par_iter()
        .map(|&(k, j)| {
            let mut lo = b.grid_point(k, grid);
            let mut hi = b.grid_point(j, grid);
            let mut h_lo = values[k]?;
            for _ in 0..BISECTION_STEPS {
                let mid: Vec<f64> = lo.iter().zip(&hi).map(|(p, q)| 0.5 * (p + q)).collect();
                let h_mid = residual(&mid)?;
                if h_mid == 0.0 {
                    return Some((mid, 0.0));
                }
                if (h_mid < 0.0) == (h_lo < 0.0) {
                    lo = mid;
                    h_lo = h_mid;
                } else {
                    hi = mid;
                }
            }
            let h = residual(&lo)?;
            (h.abs() <= EQUATION_TOL).then_some((lo, h.abs()))
        })
        .collect();
    found.extend(bisected.into_iter().flatten());

    // grid points where |h| is no larger than at any axis neighbour
    let abs = |k: usize| values[k].map(f64::abs);
    let mut minima: Vec<(f64, usize)> = (0..len)
        .filter_map(|k| {
            let v = abs(k)?;
            let lower_ok = strides.iter().all(|&s| {
                let below = (k / s) % grid > 0;
                !below || abs(k - s).is_none_or(|w| v <= w)
            });
            let upper_ok = neighbours(k).all(|j| abs(j).is_none_or(|w| v <= w));
            (lower_ok && upper_ok && v > EQUATION_TOL).then_some((v, k))
        })
        .collect();
    minima.sort_by(|a, c| a.0.total_cmp(&c.0).then(a.1.cmp(&c.1)));
    minima.truncate(REFINE_STARTS);
    let refined: Vec<Option<(Vec<f64>, f64)>> = minima
        .par_iter()
        .map(|&(_, k)| gauss_newton(rf, scenario, target, b, b.grid_point(k, grid)))
        .collect();
    found.extend(refined.into_iter().flatten());
    found
}

fn gauss_newton(
    rf: &RandomFunction,
    scenario: usize,
    target: f64,
    b: &BoxSet,
    mut x: Vec<f64>,
) -> Option<(Vec<f64>, f64)> {
    let mut h = rf.eval_f(scenario, &x).ok()? - target;
    for _ in 0..REFINE_STEPS {
        if h.abs() <= 1e-14 * (1.0 + target.abs()) {
            break;
        }
        let g = rf.gradient(scenario, &x).ok()?;
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg == 0.0 || !gg.is_finite() {
            break;
        }
        let mut t = 1.0;
        let mut next = None;
        for _ in 0..30 {
            let mut y: Vec<f64> = x.iter().zip(&g).map(|(a, gi)| a - t * h * gi / gg).collect();
            b.clamp(&mut y);
            if let Ok(v) = rf.eval_f(scenario, &y) {
                if (v - target).abs() < h.abs() {
                    next = Some((y, v - target));
                    break;
                }
            }
            t *= 0.5;
        }
        let (y, hy) = next?;
        x = y;
        h = hy;
    }
    (h.abs() <= EQUATION_TOL).then_some((x, h.abs()))
}

/// Solves f(ω, x) = η(ω) on `region` with one representative scenario per
/// atom.
pub fn solve_random_equation(
    rf: &RandomFunction,
    eta: &RandomVariableRn,
    region: &BoxSet,
    grid: usize,
) -> Result<Selection, SelectionError> {
    let set = RandomSet::constant(rf.space().clone(), SetDescription::Box(region.clone()))?;
    if !same_space(eta.space(), rf.space()) {
        return Err(SelectionError::DomainMismatch);
    }
    require_measurable_eta(eta)?;
    require_measurable_f(rf, &region.probe_grid())?;
    solve_equation_on(rf, eta, &set, grid, |residual, _| Certificate::Equation { residual })
}

fn require_measurable_eta(eta: &RandomVariableRn) -> Result<(), SelectionError> {
    if eta.values().iter().any(|v| v.len() != 1) {
        return Err(SelectionError::Dimension {
            expected: 1,
            found: eta.values().iter().map(Vec::len).find(|&l| l != 1).unwrap_or(0),
        });
    }
    match is_measurable_rv(eta.space(), eta, ETA_TOL).map_err(|_| SelectionError::DomainMismatch)? {
        Verdict::Measurable => Ok(()),
        Verdict::NonMeasurable(w) => Err(SelectionError::NonMeasurableEta(w)),
    }
}

fn solve_equation_on(
    rf: &RandomFunction,
    eta: &RandomVariableRn,
    set: &RandomSet,
    grid: usize,
    certify: impl Fn(f64, f64) -> Certificate + Sync,
) -> Result<Selection, SelectionError> {
    let space = rf.space().clone();
    let outcomes: Vec<Result<Option<AtomChoice>, SelectionError>> = space
        .atoms()
        .par_iter()
        .map(|atom| {
            let rep = atom[0];
            let target = eta.value(rep)[0];
            Ok(solve_in_set(rf, rep, target, set.description(rep), grid)?
                .map(|(x, residual)| (x, certify(residual, target))))
        })
        .collect();
    let mut per_atom = Vec::with_capacity(outcomes.len());
    let mut missing = Vec::new();
    for (a, outcome) in outcomes.into_iter().enumerate() {
        match outcome? {
            Some(found) => per_atom.push(found),
            None => missing.extend(space.atom_ids(a)),
        }
    }
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(SelectionError::NoDeterministicSolution { scenarios: missing });
    }
    Ok(Selection::from_atoms(&space, per_atom))
}

/// A solution of the random optimization problem min over C(ω) of f(ω, ·).
#[derive(Debug, Clone, PartialEq)]
pub struct RopSolution {
    pub selection: Selection,
    pub optimal: OptimalValue,
}

/// Minimizes f(ω, ·) over C(ω): computes the optimal value η by grid
/// enumeration, then solves f(ω, x) = η(ω) inside C(ω).
pub fn solve_rop(rf: &RandomFunction, set: &RandomSet, grid: usize) -> Result<RopSolution, SelectionError> {
    if !same_space(rf.space(), set.space()) {
        return Err(SelectionError::DomainMismatch);
    }
    if set.dim() != rf.dim() {
        return Err(SelectionError::Dimension {
            expected: rf.dim(),
            found: set.dim(),
        });
    }
    if let Some(&scenario) = set.empty_scenarios().first() {
        return Err(OptimizeError::EmptyFeasible { scenario }.into());
    }
    if let Verdict::NonMeasurable(w) =
        is_measurable_setmap(rf.space(), set, 0.0).map_err(|_| SelectionError::DomainMismatch)?
    {
        return Err(SelectionError::NonMeasurableSet(w));
    }
    require_measurable_f(rf, &probes_of(set))?;
    let optimal = optimal_value(rf, set, grid)?;
    if let Verdict::NonMeasurable(w) = &optimal.verdict {
        return Err(SelectionError::NonMeasurableEta(w.clone()));
    }
    let selection = solve_equation_on(rf, &optimal.eta, set, grid, |_, value| Certificate::Global { value })?;
    Ok(RopSolution { selection, optimal })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RlopOptions {
    pub grid: usize,
    pub seed: u64,
    pub tol_rel: f64,
}

impl Default for RlopOptions {
    fn default() -> Self {
        Self {
            grid: 9,
            seed: 0,
            tol_rel: DEFAULT_TOL_REL,
        }
    }
}

/// What the local search saw in one atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AtomSearch {
    pub atom: Vec<ScenarioId>,
    pub search: StationarySearch,
    /// Hessian PSD at every probe point of the region.
    pub convex: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlopSolution {
    pub selection: Selection,
    pub atoms: Vec<AtomSearch>,
}

/// Local minimization of f(ω, ·) on `region`: per atom, the lexicographically
/// smallest stationary point with a positive definite Hessian, certified by
/// [`verify_local_min`]. When the Hessian is PSD on all probe points of the
/// region and a grid scan agrees, the certificate is global.
pub fn solve_rlop(rf: &RandomFunction, region: &BoxSet, opts: &RlopOptions) -> Result<RlopSolution, SelectionError> {
    if region.dim() != rf.dim() {
        return Err(SelectionError::Dimension {
            expected: rf.dim(),
            found: region.dim(),
        });
    }
    let probes = region.probe_grid();
    require_measurable_f(rf, &probes)?;
    let stationary_set = intersect_setmaps(&rf.gradient_level_sets(region)?)?;
    if let Verdict::NonMeasurable(w) =
        is_measurable_setmap(rf.space(), &stationary_set, 0.0).map_err(|_| SelectionError::DomainMismatch)?
    {
        return Err(SelectionError::NonMeasurableSet(w));
    }

    let space = rf.space().clone();
    let stationary_opts = StationaryOptions {
        grid: opts.grid,
        tol_rel: opts.tol_rel,
        ..Default::default()
    };
    let outcomes: Vec<Result<(AtomChoice, AtomSearch), SelectionError>> = (0..space.atoms().len())
        .into_par_iter()
        .map(|a| solve_atom(rf, region, &probes, opts, &stationary_opts, a))
        .collect();
    let mut per_atom = Vec::new();
    let mut atoms = Vec::new();
    for outcome in outcomes {
        let (choice, search) = outcome?;
        per_atom.push(choice);
        atoms.push(search);
    }
    Ok(RlopSolution {
        selection: Selection::from_atoms(&space, per_atom),
        atoms,
    })
}

fn solve_atom(
    rf: &RandomFunction,
    region: &BoxSet,
    probes: &[Vec<f64>],
    opts: &RlopOptions,
    stationary_opts: &StationaryOptions,
    a: usize,
) -> Result<(AtomChoice, AtomSearch), SelectionError> {
    let space = rf.space();
    let rep = space.atoms()[a][0];
    let ids = space.atom_ids(a);
    let search = find_stationary_points(rf, rep, region, stationary_opts)?;
    if search.points.is_empty() {
        return Err(SelectionError::NoStationaryPoints { atom: ids });
    }
    // points are sorted lexicographically, so the first PD one is canonical
    let Some(chosen) = search
        .points
        .iter()
        .find(|p| p.classification == Definiteness::PositiveDefinite && p.grad_norm <= VERIFY_GRAD_TOL)
    else {
        return Err(SelectionError::NoPDStationaryPoint {
            atom: ids,
            points: search.points,
        });
    };
    let local_opts = LocalMinOptions {
        seed: opts.seed,
        tol_rel: opts.tol_rel,
        ..Default::default()
    };
    let cert = match verify_local_min(rf, rep, &chosen.x, &local_opts)? {
        LocalMinOutcome::Certified(cert) => cert,
        LocalMinOutcome::Failure { direction, margin } => {
            return Err(SelectionError::VerificationFailed {
                atom: ids,
                x: chosen.x.clone(),
                direction,
                margin,
            })
        }
    };
    let convex = probes.iter().all(|x| {
        rf.hessian(rep, x)
            .ok()
            .and_then(|h| classify_definiteness(&h, opts.tol_rel).ok())
            .is_some_and(Definiteness::is_psd)
    });
    let mut certificate = Certificate::LocalMin(cert);
    if convex {
        let scan = global_min_compact(rf, rep, &SetDescription::Box(region.clone()), opts.grid, false)?;
        if scan.grid_value >= chosen.value - EQUATION_TOL * (1.0 + chosen.value.abs()) {
            certificate = Certificate::Global { value: chosen.value };
        }
    }
    let x = chosen.x.clone();
    Ok((
        (x, certificate),
        AtomSearch {
            atom: ids,
            search,
            convex,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryEntry {
    pub scenario: ScenarioId,
    pub x: Vec<f64>,
    pub grad_norm: f64,
    pub grad_ok: bool,
    pub classification: Definiteness,
    pub psd_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NecessaryReport {
    pub scenarios: Vec<NecessaryEntry>,
    /// Exact constancy of ξ on atoms.
    pub measurable: Verdict,
}

/// First- and second-order necessary conditions at ξ(ω), per scenario,
/// together with whether ξ is measurable at all.
pub fn check_necessary_conditions(
    rf: &RandomFunction,
    xi: &RandomVariableRn,
) -> Result<NecessaryReport, SelectionError> {
    if !same_space(xi.space(), rf.space()) {
        return Err(SelectionError::DomainMismatch);
    }
    let space = rf.space();
    let mut scenarios = Vec::with_capacity(space.len());
    for s in 0..space.len() {
        let x = xi.value(s);
        if x.len() != rf.dim() {
            return Err(SelectionError::Dimension {
                expected: rf.dim(),
                found: x.len(),
            });
        }
        let grad_norm = rf.gradient(s, x)?.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let classification = classify_definiteness(&rf.hessian(s, x)?, DEFAULT_TOL_REL)?;
        scenarios.push(NecessaryEntry {
            scenario: space.scenario_id(s),
            x: x.to_vec(),
            grad_norm,
            grad_ok: grad_norm <= VERIFY_GRAD_TOL,
            classification,
            psd_ok: classification.is_psd(),
        });
    }
    let measurable = is_measurable_rv(space, xi, 0.0).map_err(|_| SelectionError::DomainMismatch)?;
    Ok(NecessaryReport { scenarios, measurable })
}
