//! Random functions f(ω, x) and random sets ω ↦ C(ω) over a finite space.
//!
//! A [`RandomFunction`] is one expression body shared by all scenarios plus a
//! parameter vector per scenario. Its gradient and Hessian are derived
//! symbolically once at construction.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expression};
use crate::linalg::Matrix;
use crate::probspace::{constancy_verdict, same_space, ProbSpace, ScenarioId, Verdict};

/// Membership tolerance for level-set constraints.
pub const LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RandFuncError {
    #[error("evaluation failed in scenario {scenario} at {x:?}: {source}")]
    Eval {
        scenario: ScenarioId,
        x: Vec<f64>,
        source: EvalError,
    },
    #[error("scenario {scenario} has {found} parameters, expected {expected}")]
    ParamMismatch {
        scenario: ScenarioId,
        expected: usize,
        found: usize,
    },
    #[error("{found} parameter vectors for {expected} scenarios")]
    ParamCount { expected: usize, found: usize },
    #[error("point has dimension {found}, expected {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("random sets live on different probability spaces")]
    DomainMismatch,
    #[error("incompatible set representations: {0}")]
    IncompatibleRepresentation(String),
    #[error("invalid set: {0}")]
    InvalidSet(String),
    #[error("probe grid is empty")]
    EmptyProbeGrid,
}

/// Closed axis-aligned box `[lower, upper]`, nonempty and bounded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, RandFuncError> {
        if lower.len() != upper.len() {
            return Err(RandFuncError::InvalidSet(format!(
                "box corners have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(RandFuncError::InvalidSet("zero-dimensional box".into()));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(RandFuncError::InvalidSet(format!("box side {} is [{l}, {u}]", i + 1)));
            }
        }
        Ok(Self { lower, upper })
    }

    /// The cube `[lo, hi]^n`.
    pub fn cube(n: usize, lo: f64, hi: f64) -> Result<Self, RandFuncError> {
        Self::new(vec![lo; n], vec![hi; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (v, (l, u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn intersect(&self, other: &BoxSet) -> Option<BoxSet> {
        let lower: Vec<f64> = self.lower.iter().zip(&other.lower).map(|(a, b)| a.max(*b)).collect();
        let upper: Vec<f64> = self.upper.iter().zip(&other.upper).map(|(a, b)| a.min(*b)).collect();
        lower
            .iter()
            .zip(&upper)
            .all(|(l, u)| l <= u)
            .then_some(BoxSet { lower, upper })
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.5 * (l + u)).collect()
    }

    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| {
                        if mask >> i & 1 == 1 {
                            self.upper[i]
                        } else {
                            self.lower[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Coordinate `i` of an `m`-point-per-side grid, `0 <= i < m`.
    pub fn grid_coord(&self, axis: usize, i: usize, m: usize) -> f64 {
        let (l, u) = (self.lower[axis], self.upper[axis]);
        if m <= 1 {
            return 0.5 * (l + u);
        }
        if i + 1 == m {
            return u;
        }
        l + (u - l) * (i as f64) / ((m - 1) as f64)
    }

    /// Number of points of the `m`-per-side grid, saturating.
    pub fn grid_len(&self, m: usize) -> usize {
        (0..self.dim()).fold(1usize, |acc, _| acc.saturating_mul(m.max(1)))
    }

    /// Grid point with flat index `flat`; the first coordinate varies slowest,
    /// so increasing `flat` walks the grid in lexicographic order.
    pub fn grid_point(&self, flat: usize, m: usize) -> Vec<f64> {
        let m = m.max(1);
        let n = self.dim();
        let mut idx = vec![0usize; n];
        let mut rest = flat;
        for axis in (0..n).rev() {
            idx[axis] = rest % m;
            rest /= m;
        }
        idx.iter()
            .enumerate()
            .map(|(axis, &i)| self.grid_coord(axis, i, m))
            .collect()
    }

    /// Corners, center, and 32 Halton points of the box.
    pub fn probe_grid(&self) -> Vec<Vec<f64>> {
        const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
        let mut probes = self.corners();
        probes.push(self.center());
        for i in 1..=32u64 {
            probes.push(
                (0..self.dim())
                    .map(|axis| {
                        let u = radical_inverse(i, PRIMES[axis % PRIMES.len()]);
                        self.lower[axis] + u * (self.upper[axis] - self.lower[axis])
                    })
                    .collect(),
            );
        }
        probes
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut value = 0.0;
    while i > 0 {
        value += (i % base) as f64 * inv;
        i /= base;
        inv /= base as f64;
    }
    value
}

/// One scenario's feasible set.
#[derive(Debug, Clone, PartialEq)]
pub enum SetDescription {
    Empty,
    Box(BoxSet),
    PointCloud(Vec<Vec<f64>>),
    /// `{x ∈ bounds : e(x) = 0 for every constraint e}`, with scenario
    /// parameters already substituted into the constraints.
    LevelSet {
        constraints: Vec<Expression>,
        bounds: BoxSet,
    },
}

impl SetDescription {
    pub fn kind(&self) -> &'static str {
        match self {
            SetDescription::Empty => "empty",
            SetDescription::Box(_) => "box",
            SetDescription::PointCloud(_) => "point_cloud",
            SetDescription::LevelSet { .. } => "level_set",
        }
    }

    /// Whether `x` belongs to the set; level-set equations hold within
    /// [`LEVEL_TOL`], and points whose constraints fail to evaluate are out.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            SetDescription::Empty => false,
            SetDescription::Box(b) => b.contains(x),
            SetDescription::PointCloud(points) => points.iter().any(|p| p.as_slice() == x),
            SetDescription::LevelSet { constraints, bounds } => {
                bounds.contains(x)
                    && constraints
                        .iter()
                        .all(|c| matches!(c.eval_at(x, &[]), Ok(v) if v.abs() <= LEVEL_TOL))
            }
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            SetDescription::Empty => None,
            SetDescription::Box(b) => Some(b.dim()),
            SetDescription::PointCloud(p) => p.first().map(Vec::len),
            SetDescription::LevelSet { bounds, .. } => Some(bounds.dim()),
        }
    }

    fn intersect(&self, other: &SetDescription) -> SetDescription {
        use SetDescription::*;
        match (self, other) {
            (Empty, _) | (_, Empty) => Empty,
            (Box(a), Box(b)) => a.intersect(b).map_or(Empty, Box),
            (PointCloud(points), set) | (set, PointCloud(points)) => {
                let kept: Vec<Vec<f64>> = points.iter().filter(|p| set.contains(p)).cloned().collect();
                if kept.is_empty() {
                    Empty
                } else {
                    PointCloud(kept)
                }
            }
            (LevelSet { constraints, bounds }, Box(b)) | (Box(b), LevelSet { constraints, bounds }) => {
                match bounds.intersect(b) {
                    Some(bounds) => LevelSet {
                        constraints: constraints.clone(),
                        bounds,
                    },
                    None => Empty,
                }
            }
            (
                LevelSet {
                    constraints: c1,
                    bounds: b1,
                },
                LevelSet {
                    constraints: c2,
                    bounds: b2,
                },
            ) => match b1.intersect(b2) {
                Some(bounds) => {
                    let mut constraints = c1.clone();
                    constraints.extend(c2.iter().cloned());
                    LevelSet { constraints, bounds }
                }
                None => Empty,
            },
        }
    }
}

/// A set-valued map ω ↦ C(ω) ⊂ R^n, one description per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomSet {
    space: Arc<ProbSpace>,
    dim: usize,
    sets: Vec<SetDescription>,
}

impl RandomSet {
    pub fn new(space: Arc<ProbSpace>, sets: Vec<SetDescription>) -> Result<Self, RandFuncError> {
        if sets.len() != space.len() {
            return Err(RandFuncError::InvalidSet(format!(
                "{} set descriptions for {} scenarios",
                sets.len(),
                space.len()
            )));
        }
        let dim = sets
            .iter()
            .find_map(SetDescription::dim)
            .ok_or_else(|| RandFuncError::InvalidSet("cannot infer dimension from empty sets".into()))?;
        Self::with_dim(space, dim, sets)
    }

    /// Like [`RandomSet::new`] but with an explicit dimension, so that every
    /// scenario may be empty.
    pub fn with_dim(space: Arc<ProbSpace>, dim: usize, sets: Vec<SetDescription>) -> Result<Self, RandFuncError> {
        if sets.len() != space.len() {
            return Err(RandFuncError::InvalidSet(format!(
                "{} set descriptions for {} scenarios",
                sets.len(),
                space.len()
            )));
        }
        for (i, set) in sets.iter().enumerate() {
            let id = space.scenario_id(i);
            match set {
                SetDescription::PointCloud(points) => {
                    if points.is_empty() {
                        return Err(RandFuncError::InvalidSet(format!("scenario {id}: empty point cloud")));
                    }
                    if points
                        .iter()
                        .any(|p| p.len() != dim || p.iter().any(|v| !v.is_finite()))
                    {
                        return Err(RandFuncError::InvalidSet(format!(
                            "scenario {id}: point cloud entries must be finite {dim}-vectors"
                        )));
                    }
                }
                SetDescription::LevelSet { constraints, bounds } => {
                    if bounds.dim() != dim || constraints.iter().any(|c| c.dim() != dim || c.has_params()) {
                        return Err(RandFuncError::InvalidSet(format!(
                            "scenario {id}: level set constraints must be parameter-free in {dim} variables"
                        )));
                    }
                }
                SetDescription::Box(b) if b.dim() != dim => {
                    return Err(RandFuncError::InvalidSet(format!(
                        "scenario {id}: box of dimension {}, expected {dim}",
                        b.dim()
                    )));
                }
                _ => {}
            }
        }
        Ok(Self { space, dim, sets })
    }

    pub fn constant(space: Arc<ProbSpace>, set: SetDescription) -> Result<Self, RandFuncError> {
        let sets = vec![set; space.len()];
        Self::new(space, sets)
    }

    /// Level sets `{x ∈ bounds : e_j(ω, x) = 0}` where the constraints may use
    /// the scenario parameters `params[ω]`.
    pub fn level_sets(
        space: Arc<ProbSpace>,
        constraints: &[Expression],
        params: &[Vec<f64>],
        bounds: &BoxSet,
    ) -> Result<Self, RandFuncError> {
        if params.len() != space.len() {
            return Err(RandFuncError::ParamCount {
                expected: space.len(),
                found: params.len(),
            });
        }
        let sets = params
            .iter()
            .map(|p| SetDescription::LevelSet {
                constraints: constraints.iter().map(|c| c.substitute_params(p)).collect(),
                bounds: bounds.clone(),
            })
            .collect();
        Self::with_dim(space, bounds.dim(), sets)
    }

    pub fn space(&self) -> &Arc<ProbSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn description(&self, index: usize) -> &SetDescription {
        &self.sets[index]
    }

    pub fn descriptions(&self) -> &[SetDescription] {
        &self.sets
    }

    /// Scenario ids whose set is empty.
    pub fn empty_scenarios(&self) -> Vec<ScenarioId> {
        self.sets
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, SetDescription::Empty))
            .map(|(i, _)| self.space.scenario_id(i))
            .collect()
    }
}

/// Scenario-wise intersection `C(ω) = ∩_i C_i(ω)`.
pub fn intersect_setmaps(maps: &[RandomSet]) -> Result<RandomSet, RandFuncError> {
    let (first, rest) = maps
        .split_first()
        .ok_or_else(|| RandFuncError::IncompatibleRepresentation("no sets to intersect".into()))?;
    let mut sets = first.sets.clone();
    for map in rest {
        if !same_space(&map.space, &first.space) {
            return Err(RandFuncError::DomainMismatch);
        }
        if map.dim != first.dim {
            return Err(RandFuncError::IncompatibleRepresentation(format!(
                "dimensions {} and {}",
                first.dim, map.dim
            )));
        }
        for (acc, set) in sets.iter_mut().zip(&map.sets) {
            *acc = acc.intersect(set);
        }
    }
    RandomSet::with_dim(first.space.clone(), first.dim, sets)
}

/// Sample of the graph `{(ω, x) : x ∈ C(ω)}` on a probe grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphSample {
    pub pairs: Vec<(ScenarioId, Vec<f64>)>,
}

/// Samples `Gr(C)`: every cloud point, and the `m`-per-side grid points of
/// boxes and level-set bounds that belong to the set.
pub fn graph_sample(set: &RandomSet, m: usize) -> GraphSample {
    let mut pairs = Vec::new();
    for (i, desc) in set.sets.iter().enumerate() {
        let id = set.space.scenario_id(i);
        match desc {
            SetDescription::Empty => {}
            SetDescription::PointCloud(points) => {
                pairs.extend(points.iter().map(|p| (id, p.clone())));
            }
            SetDescription::Box(b) | SetDescription::LevelSet { bounds: b, .. } => {
                for flat in 0..b.grid_len(m) {
                    let x = b.grid_point(flat, m);
                    if desc.contains(&x) {
                        pairs.push((id, x));
                    }
                }
            }
        }
    }
    GraphSample { pairs }
}

/// Per-entry comparison of an analytic derivative with a central difference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdEntry {
    pub analytic: f64,
    pub numeric: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub ok: bool,
}

impl FdEntry {
    fn new(analytic: f64, numeric: f64) -> Self {
        let abs_error = (analytic - numeric).abs();
        let scale = analytic.abs().max(numeric.abs());
        let rel_error = if scale == 0.0 { 0.0 } else { abs_error / scale };
        Self {
            analytic,
            numeric,
            abs_error,
            rel_error,
            ok: abs_error <= FD_ABS_TOL || rel_error <= FD_REL_TOL,
        }
    }
}

pub const FD_REL_TOL: f64 = 1e-6;
pub const FD_ABS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub gradient: Vec<FdEntry>,
    pub hessian: Vec<Vec<FdEntry>>,
    pub max_gradient_rel_error: f64,
    pub max_hessian_rel_error: f64,
    pub pass: bool,
}

/// Scenario-indexed smooth objective f(ω, x).
#[derive(Debug, Clone)]
pub struct RandomFunction {
    space: Arc<ProbSpace>,
    body: Expression,
    params: Vec<Vec<f64>>,
    gradient: Vec<Expression>,
    hessian: Vec<Vec<Expression>>,
}

impl RandomFunction {
    pub fn new(space: Arc<ProbSpace>, body: Expression, params: Vec<Vec<f64>>) -> Result<Self, RandFuncError> {
        if params.len() != space.len() {
            return Err(RandFuncError::ParamCount {
                expected: space.len(),
                found: params.len(),
            });
        }
        for (i, p) in params.iter().enumerate() {
            if p.len() != body.param_dim() {
                return Err(RandFuncError::ParamMismatch {
                    scenario: space.scenario_id(i),
                    expected: body.param_dim(),
                    found: p.len(),
                });
            }
        }
        let n = body.dim();
        let gradient: Vec<Expression> = (0..n).map(|i| body.differentiate(i)).collect();
        let hessian = gradient
            .iter()
            .map(|g| (0..n).map(|j| g.differentiate(j)).collect())
            .collect();
        Ok(Self {
            space,
            body,
            params,
            gradient,
            hessian,
        })
    }

    /// Same body in every scenario, no parameters.
    pub fn deterministic(space: Arc<ProbSpace>, body: Expression) -> Result<Self, RandFuncError> {
        let params = vec![Vec::new(); space.len()];
        Self::new(space, body, params)
    }

    pub fn space(&self) -> &Arc<ProbSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.body.dim()
    }

    pub fn body(&self) -> &Expression {
        &self.body
    }

    pub fn params(&self, scenario: usize) -> &[f64] {
        &self.params[scenario]
    }

    pub fn all_params(&self) -> &[Vec<f64>] {
        &self.params
    }

    pub fn gradient_exprs(&self) -> &[Expression] {
        &self.gradient
    }

    /// Same body and space with a new parameter vector per scenario.
    pub fn with_params(&self, params: Vec<Vec<f64>>) -> Result<Self, RandFuncError> {
        Self::new(self.space.clone(), self.body.clone(), params)
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), RandFuncError> {
        if x.len() != self.dim() {
            return Err(RandFuncError::Dimension {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn eval_expr(&self, e: &Expression, scenario: usize, x: &[f64]) -> Result<f64, RandFuncError> {
        e.eval_at(x, &self.params[scenario])
            .map_err(|source| RandFuncError::Eval {
                scenario: self.space.scenario_id(scenario),
                x: x.to_vec(),
                source,
            })
    }

    pub fn eval_f(&self, scenario: usize, x: &[f64]) -> Result<f64, RandFuncError> {
        self.check_dim(x)?;
        self.eval_expr(&self.body, scenario, x)
    }

    pub fn gradient(&self, scenario: usize, x: &[f64]) -> Result<Vec<f64>, RandFuncError> {
        self.check_dim(x)?;
        self.gradient.iter().map(|g| self.eval_expr(g, scenario, x)).collect()
    }

    /// Hessian as evaluated from the symbolic second derivatives, before
    /// symmetrization.
    pub fn hessian_raw(&self, scenario: usize, x: &[f64]) -> Result<Matrix, RandFuncError> {
        self.check_dim(x)?;
        let n = self.dim();
        let mut h = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = self.eval_expr(&self.hessian[i][j], scenario, x)?;
            }
        }
        Ok(h)
    }

    pub fn hessian(&self, scenario: usize, x: &[f64]) -> Result<Matrix, RandFuncError> {
        let mut h = self.hessian_raw(scenario, x)?;
        h.symmetrize();
        Ok(h)
    }

    /// Compares the symbolic gradient with central differences of f, and the
    /// symbolic Hessian with central differences of the symbolic gradient.
    pub fn fd_check(&self, scenario: usize, x: &[f64], h: f64) -> Result<FdReport, RandFuncError> {
        assert!(h > 0.0, "finite-difference step must be positive");
        let n = self.dim();
        let grad = self.gradient(scenario, x)?;
        let hess = self.hessian(scenario, x)?;
        let shifted = |i: usize, delta: f64| {
            let mut y = x.to_vec();
            y[i] += delta;
            y
        };
        let mut gradient = Vec::with_capacity(n);
        let mut hessian = Vec::with_capacity(n);
        for (i, &g) in grad.iter().enumerate() {
            let fp = self.eval_f(scenario, &shifted(i, h))?;
            let fm = self.eval_f(scenario, &shifted(i, -h))?;
            gradient.push(FdEntry::new(g, (fp - fm) / (2.0 * h)));
        }
        let mut columns = Vec::with_capacity(n);
        for j in 0..n {
            let gp = self.gradient(scenario, &shifted(j, h))?;
            let gm = self.gradient(scenario, &shifted(j, -h))?;
            columns.push(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect::<Vec<_>>());
        }
        for i in 0..n {
            hessian.push((0..n).map(|j| FdEntry::new(hess[(i, j)], columns[j][i])).collect());
        }
        let max_rel = |it: &mut dyn Iterator<Item = &FdEntry>| it.map(|e| e.rel_error).fold(0.0, f64::max);
        let max_gradient_rel_error = max_rel(&mut gradient.iter());
        let max_hessian_rel_error = max_rel(&mut hessian.iter().flatten());
        let pass = gradient.iter().chain(hessian.iter().flatten()).all(|e| e.ok);
        Ok(FdReport {
            gradient,
            hessian,
            max_gradient_rel_error,
            max_hessian_rel_error,
            pass,
        })
    }

    /// Checks that f(·, x) is constant on every atom at each probe, comparing
    /// evaluated values exactly.
    pub fn check_joint_measurability(&self, probes: &[Vec<f64>]) -> Result<Verdict, RandFuncError> {
        if probes.is_empty() {
            return Err(RandFuncError::EmptyProbeGrid);
        }
        for x in probes {
            let values = (0..self.space.len())
                .map(|s| self.eval_f(s, x))
                .collect::<Result<Vec<_>, _>>()?;
            let verdict = constancy_verdict(&self.space, |i, j| {
                (values[i] == values[j], Some((values[i], values[j])))
            });
            if let Verdict::NonMeasurable(mut w) = verdict {
                w.probe = Some(x.clone());
                return Ok(Verdict::NonMeasurable(w));
            }
        }
        Ok(Verdict::Measurable)
    }

    /// The maps `C_i(ω) = {x ∈ region : ∂f/∂x_i(ω, x) = 0}`, one per
    /// coordinate.
    pub fn gradient_level_sets(&self, region: &BoxSet) -> Result<Vec<RandomSet>, RandFuncError> {
        self.gradient
            .iter()
            .map(|g| RandomSet::level_sets(self.space.clone(), std::slice::from_ref(g), &self.params, region))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probspace::is_measurable_setmap;

    fn space(atoms: Vec<Vec<u64>>) -> Arc<ProbSpace> {
        let n = atoms.iter().map(Vec::len).sum::<usize>();
        let ids: Vec<u64> = (1..=n as u64).collect();
        Arc::new(ProbSpace::new(ids, vec![1.0 / n as f64; n], atoms).unwrap())
    }

    fn rf(src: &str, n: usize, k: usize, s: &Arc<ProbSpace>, params: Vec<Vec<f64>>) -> RandomFunction {
        RandomFunction::new(s.clone(), Expression::parse(src, n, k).unwrap(), params).unwrap()
    }

    #[test]
    fn eval_examples() {
        let s = space(vec![vec![1, 2]]);
        let quartic = rf("x1^4 - 2*x1^2", 1, 0, &s, vec![vec![], vec![]]);
        assert_eq!(quartic.eval_f(0, &[1.0]).unwrap(), -1.0);
        let shift = rf("x1^2 + p1", 1, 1, &s, vec![vec![3.0], vec![3.0]]);
        assert_eq!(shift.eval_f(1, &[0.0]).unwrap(), 3.0);
        let vertex = rf("(x1 - p1)^2", 1, 1, &s, vec![vec![2.0], vec![2.0]]);
        assert_eq!(vertex.eval_f(0, &[2.0]).unwrap(), 0.0);
        assert!(matches!(
            vertex.eval_f(0, &[1.0, 2.0]),
            Err(RandFuncError::Dimension { .. })
        ));
    }

    #[test]
    fn gradient_and_hessian_examples() {
        let s = space(vec![vec![1]]);
        let quartic = rf("x1^4 - 2*x1^2", 1, 0, &s, vec![vec![]]);
        assert_eq!(quartic.gradient(0, &[1.0]).unwrap(), vec![0.0]);
        assert_eq!(quartic.gradient(0, &[-1.0]).unwrap(), vec![0.0]);
        assert_eq!(quartic.hessian(0, &[1.0]).unwrap()[(0, 0)], 8.0);
        assert_eq!(quartic.hessian(0, &[0.0]).unwrap()[(0, 0)], -4.0);

        let bowl = rf("x1^2 + x2^2", 2, 0, &s, vec![vec![]]);
        assert_eq!(bowl.gradient(0, &[1.0, 2.0]).unwrap(), vec![2.0, 4.0]);
        let h = bowl.hessian(0, &[0.3, -7.0]).unwrap();
        assert_eq!(h.rows(), vec![vec![2.0, 0.0], vec![0.0, 2.0]]);

        let vertex = rf("(x1 - p1)^2", 1, 1, &s, vec![vec![1.25]]);
        assert_eq!(vertex.gradient(0, &[1.25]).unwrap(), vec![0.0]);
    }

    #[test]
    fn hessian_is_symmetric() {
        let s = space(vec![vec![1]]);
        let f = rf("x1^3*x2 - 2*x1*x2^2 + x1^2*x2^2*x3 + x3^4", 3, 0, &s, vec![vec![]]);
        let raw = f.hessian_raw(0, &[0.7, -1.3, 2.1]).unwrap();
        assert!(raw.asymmetry() <= 1e-12);
        let h = f.hessian(0, &[0.7, -1.3, 2.1]).unwrap();
        assert_eq!(h.asymmetry(), 0.0);
    }

    #[test]
    fn fd_check_examples() {
        let s = space(vec![vec![1]]);
        let quartic = rf("x1^4 - 2*x1^2", 1, 0, &s, vec![vec![]]);
        assert!(quartic.fd_check(0, &[0.7], 1e-5).unwrap().pass);

        let square = rf("x1^2", 1, 0, &s, vec![vec![]]);
        let report = square.fd_check(0, &[3.0], 1e-5).unwrap();
        assert!(report.pass);
        assert!(report.gradient[0].abs_error <= 1e-9);

        let exp = rf("exp(x1)", 1, 0, &s, vec![vec![]]);
        let report = exp.fd_check(0, &[0.0], 1e-5).unwrap();
        assert!(report.pass);
        // truncation error of the central difference is h^2/6 f''' = 1.7e-11
        assert!(report.gradient[0].abs_error < 1e-10);
        assert!(report.hessian[0][0].abs_error < 1e-10);
    }

    #[test]
    fn fd_check_catches_wrong_derivatives() {
        // A mismatch between analytic and numeric values must fail the entry.
        let e = FdEntry::new(1.0, 1.001);
        assert!(!e.ok);
        let e = FdEntry::new(1e-9, 5e-9);
        assert!(e.ok);
    }

    #[test]
    fn joint_measurability_examples() {
        let s = space(vec![vec![1, 2], vec![3]]);
        let quartic =
            RandomFunction::deterministic(s.clone(), Expression::parse("x1^4 - 2*x1^2", 1, 0).unwrap()).unwrap();
        let probes = BoxSet::cube(1, -2.0, 2.0).unwrap().probe_grid();
        assert!(quartic.check_joint_measurability(&probes).unwrap().is_measurable());

        let one = space(vec![vec![1, 2]]);
        let f = rf("(x1 - p1)^2", 1, 1, &one, vec![vec![1.0], vec![2.0]]);
        let verdict = f.check_joint_measurability(&[vec![0.0]]).unwrap();
        let w = verdict.witness().unwrap();
        assert_eq!(w.values, Some((1.0, 4.0)));
        assert_eq!(w.probe, Some(vec![0.0]));

        let split = space(vec![vec![1], vec![2]]);
        let f = rf("(x1 - p1)^2", 1, 1, &split, vec![vec![1.0], vec![2.0]]);
        assert!(f.check_joint_measurability(&[vec![0.0]]).unwrap().is_measurable());
        assert_eq!(f.check_joint_measurability(&[]), Err(RandFuncError::EmptyProbeGrid));
    }

    #[test]
    fn probe_grid_shape() {
        let b = BoxSet::cube(3, -1.0, 1.0).unwrap();
        let probes = b.probe_grid();
        assert_eq!(probes.len(), 8 + 1 + 32);
        assert!(probes.iter().all(|p| b.contains(p)));
        assert_eq!(probes[8], vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn grid_walks_lexicographically() {
        let b = BoxSet::new(vec![-2.0, 0.0], vec![2.0, 1.0]).unwrap();
        let pts: Vec<Vec<f64>> = (0..b.grid_len(3)).map(|i| b.grid_point(i, 3)).collect();
        assert_eq!(pts[0], vec![-2.0, 0.0]);
        assert_eq!(pts[1], vec![-2.0, 0.5]);
        assert_eq!(pts[3], vec![0.0, 0.0]);
        assert_eq!(pts[8], vec![2.0, 1.0]);
        let fine = BoxSet::cube(1, -2.0, 2.0).unwrap();
        assert_eq!(fine.grid_coord(0, 100, 401), -1.0);
        assert_eq!(fine.grid_coord(0, 300, 401), 1.0);
    }

    #[test]
    fn intersection_examples() {
        let s = space(vec![vec![1, 2]]);
        let a = RandomSet::constant(s.clone(), SetDescription::Box(BoxSet::cube(1, 0.0, 2.0).unwrap())).unwrap();
        let b = RandomSet::constant(s.clone(), SetDescription::Box(BoxSet::cube(1, 1.0, 3.0).unwrap())).unwrap();
        let c = intersect_setmaps(&[a.clone(), b]).unwrap();
        assert_eq!(
            c.description(0),
            &SetDescription::Box(BoxSet::cube(1, 1.0, 2.0).unwrap())
        );

        let cloud = RandomSet::constant(
            s.clone(),
            SetDescription::PointCloud(vec![vec![-1.0], vec![0.0], vec![1.0]]),
        )
        .unwrap();
        let c = intersect_setmaps(&[cloud, a.clone()]).unwrap();
        assert_eq!(
            c.description(1),
            &SetDescription::PointCloud(vec![vec![0.0], vec![1.0]])
        );

        let far = RandomSet::constant(s.clone(), SetDescription::Box(BoxSet::cube(1, 5.0, 6.0).unwrap())).unwrap();
        let c = intersect_setmaps(&[a, far]).unwrap();
        assert_eq!(c.empty_scenarios(), vec![1, 2]);
    }

    #[test]
    fn gradient_level_sets_intersect_to_stationarity_set() {
        let s = space(vec![vec![1, 2]]);
        let f = rf("x1^2 + (x2 - p1)^2", 2, 1, &s, vec![vec![0.5], vec![0.5]]);
        let region = BoxSet::cube(2, -1.0, 1.0).unwrap();
        let parts = f.gradient_level_sets(&region).unwrap();
        assert_eq!(parts.len(), 2);
        let c = intersect_setmaps(&parts).unwrap();
        match c.description(0) {
            SetDescription::LevelSet { constraints, bounds } => {
                assert_eq!(constraints.len(), 2);
                assert_eq!(bounds, &region);
                assert!(c.description(0).contains(&[0.0, 0.5]));
                assert!(!c.description(0).contains(&[0.0, 0.4]));
            }
            other => panic!("expected level set, got {other:?}"),
        }
        assert!(is_measurable_setmap(&s, &c, 0.0).unwrap().is_measurable());

        let g = f.with_params(vec![vec![0.5], vec![0.25]]).unwrap();
        let c = intersect_setmaps(&g.gradient_level_sets(&region).unwrap()).unwrap();
        assert!(!is_measurable_setmap(&s, &c, 0.0).unwrap().is_measurable());
    }

    #[test]
    fn intersection_rejects_mismatched_inputs() {
        let s = space(vec![vec![1, 2]]);
        let other = space(vec![vec![1], vec![2]]);
        let a = RandomSet::constant(s.clone(), SetDescription::Box(BoxSet::cube(1, 0.0, 2.0).unwrap())).unwrap();
        let b = RandomSet::constant(other, SetDescription::Box(BoxSet::cube(1, 0.0, 2.0).unwrap())).unwrap();
        assert_eq!(intersect_setmaps(&[a.clone(), b]), Err(RandFuncError::DomainMismatch));
        let c = RandomSet::constant(s, SetDescription::Box(BoxSet::cube(2, 0.0, 2.0).unwrap())).unwrap();
        assert!(matches!(
            intersect_setmaps(&[a, c]),
            Err(RandFuncError::IncompatibleRepresentation(_))
        ));
    }

    #[test]
    fn graph_sample_lists_members() {
        let s = space(vec![vec![1], vec![2]]);
        let c = RandomSet::new(
            s,
            vec![
                SetDescription::PointCloud(vec![vec![0.0], vec![1.0]]),
                SetDescription::Box(BoxSet::cube(1, 0.0, 1.0).unwrap()),
            ],
        )
        .unwrap();
        let g = graph_sample(&c, 3);
        assert_eq!(g.pairs.len(), 5);
        assert_eq!(g.pairs[2], (2, vec![0.0]));
    }
}
