//! Command dispatch. Every path ends in a [`Report`]; errors are mapped to a
//! status rather than propagated.

use std::path::Path;

use randopt_core::optimize::{find_stationary_points, global_min_compact, optimal_value, StationaryOptions};
use randopt_core::probspace::{is_measurable_rv, is_measurable_setmap, Witness};
use randopt_core::randfunc::RandFuncError;
use randopt_core::selection::{
    check_necessary_conditions, solve_rlop, solve_rop, Certificate, RlopOptions, Selection, SelectionError,
};
use randopt_core::{BoxSet, OptimizeError, RandomFunction, RandomSet, SetDescription};
use serde::Serialize;
use serde_json::{json, Value};

use crate::document::{check_grid, load_problem, DocumentError, Problem};
use crate::report::{ErrorReport, Report, Status};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveRop,
    SolveRlop,
    CheckMeasurable,
    Stationary,
    Necessary,
    Oracle,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::SolveRop,
        Command::SolveRlop,
        Command::CheckMeasurable,
        Command::Stationary,
        Command::Necessary,
        Command::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::SolveRop => "solve-rop",
            Command::SolveRlop => "solve-rlop",
            Command::CheckMeasurable => "check-measurable",
            Command::Stationary => "stationary",
            Command::Necessary => "necessary",
            Command::Oracle => "oracle",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }
}

/// Command-line values that take precedence over the document's options.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub grid: Option<usize>,
    pub seed: Option<u64>,
    pub polish: bool,
}

struct Failure {
    status: Status,
    error: ErrorReport,
}

impl Failure {
    fn new(status: Status, kind: &str, message: impl Into<String>, details: Option<Value>) -> Self {
        Self {
            status,
            error: ErrorReport {
                kind: kind.to_string(),
                message: message.into(),
                details,
            },
        }
    }

    fn input(kind: &str, message: impl Into<String>) -> Self {
        Self::new(Status::InputError, kind, message, None)
    }
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("report values serialize")
}

impl From<DocumentError> for Failure {
    fn from(e: DocumentError) -> Self {
        let (kind, details) = match &e {
            DocumentError::Io { .. } => ("io_error", None),
            DocumentError::Schema { pointer, .. } => ("schema_error", Some(json!({ "pointer": pointer }))),
            DocumentError::Parse { pointer, offset, .. } => {
                ("parse_error", Some(json!({ "pointer": pointer, "offset": offset })))
            }
        };
        Failure::new(Status::InputError, kind, e.to_string(), details)
    }
}

fn refusal(kind: &str, what: &str, w: &Witness) -> Failure {
    let at = w.probe.as_ref().map(|p| format!(" at x = {p:?}")).unwrap_or_default();
    let values = w.values.map(|(a, b)| format!(" ({a} vs {b})")).unwrap_or_default();
    let message = format!(
        "{what} is not measurable: scenarios {} and {} of atom {:?} disagree{at}{values}. \
         A measurable solution is only guaranteed when the problem data are measurable, \
         so no selection was attempted",
        w.first, w.second, w.atom
    );
    Failure::new(Status::Refused, kind, message, Some(to_value(w)))
}

fn optimize_failure(e: OptimizeError) -> Failure {
    let message = e.to_string();
    match e {
        OptimizeError::EmptyFeasible { scenario } => Failure::new(
            Status::NoSolution,
            "empty_feasible_set",
            message,
            Some(json!({ "scenario": scenario })),
        ),
        OptimizeError::NoEvaluablePoint { scenario } => Failure::new(
            Status::NoSolution,
            "no_evaluable_point",
            message,
            Some(json!({ "scenario": scenario })),
        ),
        OptimizeError::NoRadiusFound { x, .. } => {
            Failure::new(Status::NoSolution, "no_radius_found", message, Some(json!({ "x": x })))
        }
        OptimizeError::UnsupportedSet { .. } => Failure::input("unsupported_set", message),
        OptimizeError::Eval(e) => randfunc_failure(e),
        _ => Failure::input("invalid_problem", message),
    }
}

fn randfunc_failure(e: RandFuncError) -> Failure {
    let kind = match e {
        RandFuncError::Eval { .. } => "evaluation_error",
        _ => "invalid_problem",
    };
    Failure::input(kind, e.to_string())
}

fn selection_failure(e: SelectionError) -> Failure {
    let message = e.to_string();
    match e {
        SelectionError::NonMeasurableF(w) => refusal("non_measurable_objective", "the objective", &w),
        SelectionError::NonMeasurableSet(w) => refusal("non_measurable_set", "the feasible set map", &w),
        SelectionError::NonMeasurableEta(w) => refusal("non_measurable_optimal_value", "the optimal value", &w),
        SelectionError::NoDeterministicSolution { scenarios } => Failure::new(
            Status::NoSolution,
            "no_deterministic_solution",
            message,
            Some(json!({ "scenarios": scenarios })),
        ),
        SelectionError::NoStationaryPoints { atom } => Failure::new(
            Status::NoSolution,
            "no_stationary_points",
            message,
            Some(json!({ "atom": atom })),
        ),
        SelectionError::NoPDStationaryPoint { atom, points } => Failure::new(
            Status::NoSolution,
            "no_pd_stationary_point",
            message,
            Some(json!({ "atom": atom, "points": to_value(&points) })),
        ),
        SelectionError::VerificationFailed {
            atom,
            x,
            direction,
            margin,
        } => Failure::new(
            Status::NoSolution,
            "verification_failed",
            message,
            Some(json!({ "atom": atom, "x": x, "direction": direction, "margin": margin })),
        ),
        SelectionError::EmptySet { scenario } => Failure::new(
            Status::NoSolution,
            "empty_feasible_set",
            message,
            Some(json!({ "scenario": scenario })),
        ),
        SelectionError::Optimize(e) => optimize_failure(e),
        SelectionError::RandFunc(e) => randfunc_failure(e),
        _ => Failure::input("invalid_problem", message),
    }
}

/// Loads `input`, runs `command` and returns the report. Never panics on
/// malformed input.
pub fn execute(command: Command, input: &Path, overrides: &Overrides) -> Report {
    let outcome = load_problem(input)
        .map_err(Failure::from)
        .and_then(|problem| apply_overrides(problem, overrides))
        .and_then(|problem| run(command, &problem));
    finish(command, outcome)
}

/// Runs `command` on an already validated problem.
pub fn run_problem(command: Command, problem: &Problem) -> Report {
    finish(command, run(command, problem))
}

fn finish(command: Command, outcome: Result<Value, Failure>) -> Report {
    match outcome {
        Ok(result) => Report::ok(command.name(), result),
        Err(f) => Report::failed(command.name(), f.status, f.error),
    }
}

fn apply_overrides(mut problem: Problem, overrides: &Overrides) -> Result<Problem, Failure> {
    if let Some(grid) = overrides.grid {
        problem.options.grid = grid;
        if let Err((_, message)) = check_grid(&problem.options, problem.objective.dim()) {
            return Err(Failure::input("invalid_argument", format!("--grid: {message}")));
        }
    }
    if let Some(seed) = overrides.seed {
        problem.options.seed = seed;
    }
    problem.options.polish |= overrides.polish;
    Ok(problem)
}

fn run(command: Command, problem: &Problem) -> Result<Value, Failure> {
    match command {
        Command::SolveRop => run_solve_rop(problem),
        Command::SolveRlop => run_solve_rlop(problem),
        Command::CheckMeasurable => run_check_measurable(problem),
        Command::Stationary => run_stationary(problem),
        Command::Necessary => run_necessary(problem),
        Command::Oracle => run_oracle(problem),
    }
}

fn feasible_set(problem: &Problem) -> Result<&RandomSet, Failure> {
    problem
        .feasible_set
        .as_ref()
        .ok_or_else(|| Failure::input("missing_field", "this command needs /feasible_set"))
}

/// The search box, or a feasible set that is the same box in every scenario.
fn region(problem: &Problem) -> Result<BoxSet, Failure> {
    if let Some(b) = &problem.search_box {
        return Ok(b.clone());
    }
    if let Some(set) = &problem.feasible_set {
        if let Some(SetDescription::Box(b)) = set.descriptions().first() {
            if set.descriptions().iter().all(|d| d == &SetDescription::Box(b.clone())) {
                return Ok(b.clone());
            }
        }
    }
    Err(Failure::input(
        "missing_field",
        "this command needs /search_box (or a feasible box shared by all scenarios)",
    ))
}

fn box_value(b: &BoxSet) -> Value {
    json!({ "lower": b.lower(), "upper": b.upper() })
}

#[derive(Serialize)]
struct SelectedPoint<'a> {
    scenario: u64,
    x: &'a [f64],
    value: f64,
    certificate: &'a Certificate,
}

fn selection_value(rf: &RandomFunction, selection: &Selection) -> Result<Value, Failure> {
    let space = selection.space();
    let mut entries = Vec::with_capacity(space.len());
    for s in 0..space.len() {
        let x = selection.xi.value(s);
        let value = rf.eval_f(s, x).map_err(randfunc_failure)?;
        entries.push(to_value(&SelectedPoint {
            scenario: space.scenario_id(s),
            x,
            value,
            certificate: &selection.certificates[s],
        }));
    }
    Ok(Value::Array(entries))
}

fn run_solve_rop(problem: &Problem) -> Result<Value, Failure> {
    let set = feasible_set(problem)?;
    let rf = &problem.objective;
    let grid = problem.options.grid;
    let solution = solve_rop(rf, set, grid).map_err(selection_failure)?;
    let space = &problem.space;
    let eta: Vec<Value> = solution
        .optimal
        .eta
        .scalars()
        .iter()
        .enumerate()
        .map(|(s, v)| json!({ "scenario": space.scenario_id(s), "value": v }))
        .collect();
    let mut result = json!({
        "grid": grid,
        "eta": eta,
        "eta_verdict": to_value(&solution.optimal.verdict),
        "selection": selection_value(rf, &solution.selection)?,
        "selection_verdict": to_value(&solution.selection.verdict),
        "grid_minima": to_value(&solution.optimal.minima),
    });
    if problem.options.polish {
        result["polished"] = polished_minima(rf, set, grid)?;
    }
    Ok(result)
}

fn polished_minima(rf: &RandomFunction, set: &RandomSet, grid: usize) -> Result<Value, Failure> {
    let mut out = Vec::new();
    for s in 0..rf.space().len() {
        let m = global_min_compact(rf, s, set.description(s), grid, true).map_err(optimize_failure)?;
        out.push(json!({ "scenario": m.scenario, "x": m.x, "value": m.value }));
    }
    Ok(Value::Array(out))
}

fn run_solve_rlop(problem: &Problem) -> Result<Value, Failure> {
    let region = region(problem)?;
    let rf = &problem.objective;
    let opts = RlopOptions {
        grid: problem.options.starts,
        seed: problem.options.seed,
        tol_rel: problem.options.tol_rel,
    };
    let solution = solve_rlop(rf, &region, &opts).map_err(selection_failure)?;
    Ok(json!({
        "region": box_value(&region),
        "starts": opts.grid,
        "seed": opts.seed,
        "selection": selection_value(rf, &solution.selection)?,
        "selection_verdict": to_value(&solution.selection.verdict),
        "atoms": to_value(&solution.atoms),
    }))
}

fn set_probes(set: &RandomSet) -> Vec<Vec<f64>> {
    let mut probes = Vec::new();
    for desc in set.descriptions() {
        match desc {
            SetDescription::Empty => {}
            SetDescription::Box(b) | SetDescription::LevelSet { bounds: b, .. } => probes.extend(b.probe_grid()),
            SetDescription::PointCloud(points) => probes.extend(points.iter().cloned()),
        }
    }
    probes
}

fn run_check_measurable(problem: &Problem) -> Result<Value, Failure> {
    let mut probes = Vec::new();
    if let Some(b) = &problem.search_box {
        probes.extend(b.probe_grid());
    }
    if let Some(set) = &problem.feasible_set {
        probes.extend(set_probes(set));
    }
    probes.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    probes.dedup();
    if probes.is_empty() {
        return Err(Failure::input(
            "missing_field",
            "check-measurable needs /search_box or a nonempty /feasible_set to probe the objective",
        ));
    }
    let objective = problem
        .objective
        .check_joint_measurability(&probes)
        .map_err(randfunc_failure)?;
    let mut result = json!({
        "objective": to_value(&objective),
        "probes": probes.len(),
    });
    if let Some(set) = &problem.feasible_set {
        let verdict = is_measurable_setmap(&problem.space, set, 0.0).expect("same space");
        result["feasible_set"] = to_value(&verdict);
    }
    if let Some(candidate) = &problem.candidate {
        let verdict = is_measurable_rv(&problem.space, candidate, 0.0).expect("same space");
        result["candidate"] = to_value(&verdict);
    }
    Ok(result)
}

fn run_stationary(problem: &Problem) -> Result<Value, Failure> {
    let region = region(problem)?;
    let rf = &problem.objective;
    let opts = StationaryOptions {
        grid: problem.options.starts,
        tol_rel: problem.options.tol_rel,
        ..Default::default()
    };
    let mut scenarios = Vec::new();
    for s in 0..problem.space.len() {
        let search = find_stationary_points(rf, s, &region, &opts).map_err(optimize_failure)?;
        scenarios.push(json!({
            "scenario": problem.space.scenario_id(s),
            "points": to_value(&search.points),
            "diagnostics": to_value(&search.diagnostics),
        }));
    }
    Ok(json!({
        "region": box_value(&region),
        "starts": opts.grid,
        "scenarios": scenarios,
    }))
}

fn run_necessary(problem: &Problem) -> Result<Value, Failure> {
    let candidate = problem
        .candidate
        .as_ref()
        .ok_or_else(|| Failure::input("missing_field", "necessary needs /candidate"))?;
    let report = check_necessary_conditions(&problem.objective, candidate).map_err(selection_failure)?;
    Ok(to_value(&report))
}

fn run_oracle(problem: &Problem) -> Result<Value, Failure> {
    let set = match &problem.feasible_set {
        Some(set) => set.clone(),
        None => RandomSet::constant(problem.space.clone(), SetDescription::Box(region(problem)?))
            .map_err(randfunc_failure)?,
    };
    let rf = &problem.objective;
    let grid = problem.options.grid;
    let optimal = optimal_value(rf, &set, grid).map_err(optimize_failure)?;
    let minima = if problem.options.polish {
        (0..problem.space.len())
            .map(|s| global_min_compact(rf, s, set.description(s), grid, true))
            .collect::<Result<Vec<_>, _>>()
            .map_err(optimize_failure)?
    } else {
        optimal.minima.clone()
    };
    let eta: Vec<Value> = minima
        .iter()
        .map(|m| json!({ "scenario": m.scenario, "value": m.grid_value }))
        .collect();
    Ok(json!({
        "grid": grid,
        "eta": eta,
        "eta_verdict": to_value(&optimal.verdict),
        "minima": to_value(&minima),
    }))
}
