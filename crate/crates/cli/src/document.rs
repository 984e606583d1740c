//! Problem documents: JSON in, validated core objects out.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use randopt_core::probspace::ProbSpaceError;
use randopt_core::{BoxSet, Expression, ProbSpace, RandomFunction, RandomSet, RandomVariableRn, SetDescription};
use serde::Deserialize;
use thiserror::Error;

pub const SCHEMA_VERSION: u32 = 1;
/// Upper bound on grid points per enumeration.
pub const MAX_GRID_POINTS: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum DocumentError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{pointer}: {message}")]
    Schema { pointer: String, message: String },
    #[error("{pointer}: {message}")]
    Parse {
        pointer: String,
        offset: usize,
        message: String,
    },
}

impl DocumentError {
    fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        DocumentError::Schema {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    /// JSON pointer of the offending value, if any.
    pub fn pointer(&self) -> Option<&str> {
        match self {
            DocumentError::Io { .. } => None,
            DocumentError::Schema { pointer, .. } | DocumentError::Parse { pointer, .. } => Some(pointer),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    schema_version: u32,
    space: RawSpace,
    dimension: usize,
    objective: RawObjective,
    #[serde(default)]
    feasible_set: Option<RawFeasible>,
    #[serde(default)]
    search_box: Option<RawBox>,
    #[serde(default)]
    candidate: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    options: RawOptions,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpace {
    scenarios: Vec<u64>,
    weights: Vec<f64>,
    atoms: Vec<Vec<u64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObjective {
    expression: String,
    #[serde(default)]
    parameters: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLevelSet {
    constraints: Vec<String>,
    bounds: RawBox,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawSet {
    Empty,
    Box(RawBox),
    Points(Vec<Vec<f64>>),
    LevelSet(RawLevelSet),
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
enum RawFeasible {
    Empty,
    Box(RawBox),
    Points(Vec<Vec<f64>>),
    LevelSet(RawLevelSet),
    PerScenario(Vec<RawSet>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptions {
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default = "default_starts")]
    starts: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    polish: bool,
    #[serde(default)]
    tolerances: RawTolerances,
}

impl Default for RawOptions {
    fn default() -> Self {
        Self {
            grid: default_grid(),
            starts: default_starts(),
            seed: 0,
            polish: false,
            tolerances: RawTolerances::default(),
        }
    }
}

fn default_grid() -> usize {
    101
}

fn default_starts() -> usize {
    9
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    #[serde(default = "default_tol_rel")]
    definiteness_rel: f64,
}

impl Default for RawTolerances {
    fn default() -> Self {
        Self {
            definiteness_rel: default_tol_rel(),
        }
    }
}

fn default_tol_rel() -> f64 {
    randopt_core::optimize::DEFAULT_TOL_REL
}

#[derive(Debug, Clone, PartialEq)]
pub struct Options {
    /// Points per axis for grid enumeration.
    pub grid: usize,
    /// Newton starts per axis.
    pub starts: usize,
    pub seed: u64,
    pub polish: bool,
    pub tol_rel: f64,
}

/// A validated problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub space: Arc<ProbSpace>,
    pub objective: RandomFunction,
    pub feasible_set: Option<RandomSet>,
    pub search_box: Option<BoxSet>,
    pub candidate: Option<RandomVariableRn>,
    pub options: Options,
}

pub fn load_problem(path: &Path) -> Result<Problem, DocumentError> {
    let text = fs::read_to_string(path).map_err(|source| DocumentError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problem(&text)
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for segment in path.iter() {
        let token = match segment {
            Segment::Seq { index } => index.to_string(),
            Segment::Map { key } => key.clone(),
            Segment::Enum { variant } => variant.clone(),
            Segment::Unknown => continue,
        };
        out.push('/');
        out.push_str(&token.replace('~', "~0").replace('/', "~1"));
    }
    out
}

pub fn parse_problem(text: &str) -> Result<Problem, DocumentError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawDocument = serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = pointer_of(e.path());
        DocumentError::schema(pointer, e.into_inner().to_string())
    })?;
    build(raw)
}

fn space_error(e: ProbSpaceError) -> DocumentError {
    let pointer = match e {
        ProbSpaceError::WeightSum { .. }
        | ProbSpaceError::InvalidWeight { .. }
        | ProbSpaceError::LengthMismatch { .. } => "/space/weights",
        ProbSpaceError::Partition(_) => "/space/atoms",
        _ => "/space",
    };
    DocumentError::schema(pointer, e.to_string())
}

fn parse_expr(text: &str, n: usize, k: usize, pointer: &str) -> Result<Expression, DocumentError> {
    Expression::parse(text, n, k).map_err(|e| DocumentError::Parse {
        pointer: pointer.to_string(),
        offset: e.offset(),
        message: e.to_string(),
    })
}

fn build_box(raw: &RawBox, n: usize, pointer: &str) -> Result<BoxSet, DocumentError> {
    if raw.lower.len() != n || raw.upper.len() != n {
        return Err(DocumentError::schema(pointer, format!("bounds must have {n} entries")));
    }
    BoxSet::new(raw.lower.clone(), raw.upper.clone()).map_err(|e| DocumentError::schema(pointer, e.to_string()))
}

fn check_points(points: &[Vec<f64>], n: usize, pointer: &str) -> Result<(), DocumentError> {
    for (i, p) in points.iter().enumerate() {
        if p.len() != n {
            return Err(DocumentError::schema(
                format!("{pointer}/{i}"),
                format!("point must have {n} coordinates"),
            ));
        }
    }
    Ok(())
}

struct SetContext<'a> {
    n: usize,
    k: usize,
    params: &'a [Vec<f64>],
}

impl SetContext<'_> {
    /// Descriptions for every scenario; level-set constraints get each
    /// scenario's parameters substituted.
    fn describe(&self, raw: &RawSet, scenarios: &[usize], pointer: &str) -> Result<Vec<SetDescription>, DocumentError> {
        Ok(match raw {
            RawSet::Empty => vec![SetDescription::Empty; scenarios.len()],
            RawSet::Box(b) => {
                let b = build_box(b, self.n, &format!("{pointer}/box"))?;
                vec![SetDescription::Box(b); scenarios.len()]
            }
            RawSet::Points(points) => {
                check_points(points, self.n, &format!("{pointer}/points"))?;
                let set = if points.is_empty() {
                    SetDescription::Empty
                } else {
                    SetDescription::PointCloud(points.clone())
                };
                vec![set; scenarios.len()]
            }
            RawSet::LevelSet(ls) => {
                let bounds = build_box(&ls.bounds, self.n, &format!("{pointer}/level_set/bounds"))?;
                let constraints = ls
                    .constraints
                    .iter()
                    .enumerate()
                    .map(|(j, c)| parse_expr(c, self.n, self.k, &format!("{pointer}/level_set/constraints/{j}")))
                    .collect::<Result<Vec<_>, _>>()?;
                scenarios
                    .iter()
                    .map(|&s| SetDescription::LevelSet {
                        constraints: constraints
                            .iter()
                            .map(|c| c.substitute_params(&self.params[s]))
                            .collect(),
                        bounds: bounds.clone(),
                    })
                    .collect()
            }
        })
    }
}

fn build(raw: RawDocument) -> Result<Problem, DocumentError> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(DocumentError::schema(
            "/schema_version",
            format!(
                "unsupported schema version {}, expected {SCHEMA_VERSION}",
                raw.schema_version
            ),
        ));
    }
    let space = Arc::new(
        ProbSpace::new(
            raw.space.scenarios.clone(),
            raw.space.weights.clone(),
            raw.space.atoms.clone(),
        )
        .map_err(space_error)?,
    );
    let count = space.len();
    let n = raw.dimension;
    if n == 0 {
        return Err(DocumentError::schema("/dimension", "dimension must be at least 1"));
    }

    let params = match raw.objective.parameters {
        None => vec![Vec::new(); count],
        Some(rows) => {
            if rows.len() != count {
                return Err(DocumentError::schema(
                    "/objective/parameters",
                    format!(
                        "expected one parameter vector per scenario ({count}), found {}",
                        rows.len()
                    ),
                ));
            }
            let k = rows.first().map_or(0, Vec::len);
            if let Some(i) = rows.iter().position(|r| r.len() != k) {
                return Err(DocumentError::schema(
                    format!("/objective/parameters/{i}"),
                    format!("expected {k} parameters like the first scenario"),
                ));
            }
            rows
        }
    };
    let k = params.first().map_or(0, Vec::len);
    let body = parse_expr(&raw.objective.expression, n, k, "/objective/expression")?;
    let objective = RandomFunction::new(space.clone(), body, params.clone())
        .map_err(|e| DocumentError::schema("/objective", e.to_string()))?;

    let ctx = SetContext { n, k, params: &params };
    let all: Vec<usize> = (0..count).collect();
    let feasible_set = match &raw.feasible_set {
        None => None,
        Some(feasible) => {
            let sets = match feasible {
                RawFeasible::PerScenario(list) => {
                    if list.len() != count {
                        return Err(DocumentError::schema(
                            "/feasible_set/per_scenario",
                            format!("expected {count} sets, found {}", list.len()),
                        ));
                    }
                    let mut sets = Vec::with_capacity(count);
                    for (i, raw_set) in list.iter().enumerate() {
                        sets.extend(ctx.describe(raw_set, &[i], &format!("/feasible_set/per_scenario/{i}"))?);
                    }
                    sets
                }
                RawFeasible::Empty => ctx.describe(&RawSet::Empty, &all, "/feasible_set")?,
                RawFeasible::Box(b) => ctx.describe(&RawSet::Box(b.clone()), &all, "/feasible_set")?,
                RawFeasible::Points(p) => ctx.describe(&RawSet::Points(p.clone()), &all, "/feasible_set")?,
                RawFeasible::LevelSet(l) => ctx.describe(&RawSet::LevelSet(l.clone()), &all, "/feasible_set")?,
            };
            Some(
                RandomSet::with_dim(space.clone(), n, sets)
                    .map_err(|e| DocumentError::schema("/feasible_set", e.to_string()))?,
            )
        }
    };
    let search_box = raw
        .search_box
        .as_ref()
        .map(|b| build_box(b, n, "/search_box"))
        .transpose()?;

    let candidate = match raw.candidate {
        None => None,
        Some(points) => {
            if points.len() != count {
                return Err(DocumentError::schema(
                    "/candidate",
                    format!("expected one point per scenario ({count}), found {}", points.len()),
                ));
            }
            check_points(&points, n, "/candidate")?;
            Some(
                RandomVariableRn::new(space.clone(), points)
                    .map_err(|e| DocumentError::schema("/candidate", e.to_string()))?,
            )
        }
    };

    let options = validate_options(raw.options, n)?;
    Ok(Problem {
        space,
        objective,
        feasible_set,
        search_box,
        candidate,
        options,
    })
}

fn grid_points(m: usize, n: usize) -> Option<usize> {
    (0..n).try_fold(1usize, |acc, _| acc.checked_mul(m))
}

fn validate_options(raw: RawOptions, n: usize) -> Result<Options, DocumentError> {
    let options = Options {
        grid: raw.grid,
        starts: raw.starts,
        seed: raw.seed,
        polish: raw.polish,
        tol_rel: raw.tolerances.definiteness_rel,
    };
    check_grid(&options, n).map_err(|(field, message)| DocumentError::schema(format!("/options/{field}"), message))?;
    if !(options.tol_rel > 0.0 && options.tol_rel.is_finite()) {
        return Err(DocumentError::schema(
            "/options/tolerances/definiteness_rel",
            "tolerance must be positive and finite",
        ));
    }
    Ok(options)
}

/// Checks grid densities; on failure returns the offending option name.
pub fn check_grid(options: &Options, n: usize) -> Result<(), (&'static str, String)> {
    for (field, m, least) in [("grid", options.grid, 2), ("starts", options.starts, 1)] {
        if m < least {
            return Err((field, format!("must be at least {least}")));
        }
        if grid_points(m, n).is_none_or(|total| total > MAX_GRID_POINTS) {
            return Err((field, format!("{m}^{n} points exceed the limit of {MAX_GRID_POINTS}")));
        }
    }
    Ok(())
}
