//! Finite probability spaces whose σ-algebra is given by an atom partition.
//!
//! On a finite space every event is a union of atoms, so a mapping out of
//! the space is measurable exactly when it is constant on each atom. All
//! checks in this module reduce to that constancy test.

use std::collections::HashSet;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::randfunc::{RandomSet, SetDescription};

/// Identifier of a single scenario ω.
pub type ScenarioId = u64;

const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProbSpaceError {
    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    WeightSum { sum: f64 },
    #[error("invalid weight {weight} for scenario {scenario}")]
    InvalidWeight { scenario: ScenarioId, weight: f64 },
    #[error("invalid atom partition: {0}")]
    Partition(String),
    #[error("{scenarios} scenarios but {weights} weights")]
    LengthMismatch { scenarios: usize, weights: usize },
    #[error("mapping is defined on a different probability space")]
    DomainMismatch,
    #[error("mapping has {found} values, space has {expected} scenarios")]
    MissingValues { expected: usize, found: usize },
}

/// A finite probability space (Ω, F, P) with F generated by `atoms`.
///
/// Atoms hold scenario indices (positions in `scenarios`), sorted inside each
/// atom, and the atom list is sorted by smallest contained scenario id.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbSpace {
    scenarios: Vec<ScenarioId>,
    weights: Vec<f64>,
    atoms: Vec<Vec<usize>>,
    #[serde(skip)]
    atom_of: Vec<usize>,
}

impl ProbSpace {
    pub fn new(
        scenarios: Vec<ScenarioId>,
        weights: Vec<f64>,
        atom_partition: Vec<Vec<ScenarioId>>,
    ) -> Result<Self, ProbSpaceError> {
        if scenarios.len() != weights.len() {
            return Err(ProbSpaceError::LengthMismatch {
                scenarios: scenarios.len(),
                weights: weights.len(),
            });
        }
        if scenarios.is_empty() {
            return Err(ProbSpaceError::Partition("no scenarios".into()));
        }
        let mut seen = HashSet::new();
        for &id in &scenarios {
            if !seen.insert(id) {
                return Err(ProbSpaceError::Partition(format!("duplicate scenario id {id}")));
            }
        }
        for (&id, &w) in scenarios.iter().zip(&weights) {
            if !w.is_finite() || w < 0.0 {
                return Err(ProbSpaceError::InvalidWeight {
                    scenario: id,
                    weight: w,
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(ProbSpaceError::WeightSum { sum });
        }

        let index_of = |id: ScenarioId| scenarios.iter().position(|&s| s == id);
        let mut atom_of = vec![usize::MAX; scenarios.len()];
        let mut atoms = Vec::with_capacity(atom_partition.len());
        for block in &atom_partition {
            if block.is_empty() {
                return Err(ProbSpaceError::Partition("empty atom".into()));
            }
            let mut members = Vec::with_capacity(block.len());
            for &id in block {
                let idx = index_of(id).ok_or_else(|| ProbSpaceError::Partition(format!("unknown scenario id {id}")))?;
                if atom_of[idx] != usize::MAX {
                    return Err(ProbSpaceError::Partition(format!(
                        "scenario {id} appears in more than one atom"
                    )));
                }
                atom_of[idx] = atoms.len();
                members.push(idx);
            }
            members.sort_unstable();
            atoms.push(members);
        }
        if let Some(idx) = atom_of.iter().position(|&a| a == usize::MAX) {
            return Err(ProbSpaceError::Partition(format!(
                "scenario {} is not covered by any atom",
                scenarios[idx]
            )));
        }

        let min_id = |atom: &Vec<usize>| atom.iter().map(|&i| scenarios[i]).min();
        atoms.sort_by_key(min_id);
        for (a, atom) in atoms.iter().enumerate() {
            for &i in atom {
                atom_of[i] = a;
            }
        }
        Ok(Self {
            scenarios,
            weights,
            atoms,
            atom_of,
        })
    }

    /// Space whose σ-algebra is the power set (every scenario its own atom).
    pub fn discrete(scenarios: Vec<ScenarioId>, weights: Vec<f64>) -> Result<Self, ProbSpaceError> {
        let atoms = scenarios.iter().map(|&s| vec![s]).collect();
        Self::new(scenarios, weights, atoms)
    }

    /// Single-atom space: only ∅ and Ω are events.
    pub fn trivial(scenarios: Vec<ScenarioId>, weights: Vec<f64>) -> Result<Self, ProbSpaceError> {
        let atoms = vec![scenarios.clone()];
        Self::new(scenarios, weights, atoms)
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }

    pub fn scenarios(&self) -> &[ScenarioId] {
        &self.scenarios
    }

    pub fn scenario_id(&self, index: usize) -> ScenarioId {
        self.scenarios[index]
    }

    pub fn index_of(&self, id: ScenarioId) -> Option<usize> {
        self.scenarios.iter().position(|&s| s == id)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Atoms as lists of scenario indices.
    pub fn atoms(&self) -> &[Vec<usize>] {
        &self.atoms
    }

    pub fn atom_of(&self, index: usize) -> usize {
        self.atom_of[index]
    }

    /// Atoms as lists of scenario ids.
    pub fn atom_ids(&self, atom: usize) -> Vec<ScenarioId> {
        self.atoms[atom].iter().map(|&i| self.scenarios[i]).collect()
    }

    /// P of a union of atoms, given by atom indices.
    pub fn probability(&self, atoms: &[usize]) -> f64 {
        atoms
            .iter()
            .flat_map(|&a| self.atoms[a].iter())
            .map(|&i| self.weights[i])
            .sum()
    }

    /// Whether a set of scenario indices is an event, i.e. a union of atoms.
    pub fn is_event(&self, members: &[usize]) -> bool {
        let set: HashSet<usize> = members.iter().copied().collect();
        self.atoms.iter().all(|atom| {
            let inside = atom.iter().filter(|i| set.contains(i)).count();
            inside == 0 || inside == atom.len()
        })
    }
}

/// Evidence that a mapping is not constant on some atom.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    /// Scenario ids of the offending atom.
    pub atom: Vec<ScenarioId>,
    pub first: ScenarioId,
    pub second: ScenarioId,
    /// Probe point in decision space, for random-function checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe: Option<Vec<f64>>,
    /// Values at `first` and `second`, when they are scalars.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Measurable,
    NonMeasurable(Witness),
}

impl Verdict {
    pub fn is_measurable(&self) -> bool {
        matches!(self, Verdict::Measurable)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Measurable => None,
            Verdict::NonMeasurable(w) => Some(w),
        }
    }
}

/// An R^n-valued mapping on the scenarios of a space, indexed like the space.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomVariableRn {
    space: Arc<ProbSpace>,
    values: Vec<Vec<f64>>,
}

impl RandomVariableRn {
    pub fn new(space: Arc<ProbSpace>, values: Vec<Vec<f64>>) -> Result<Self, ProbSpaceError> {
        if values.len() != space.len() {
            return Err(ProbSpaceError::MissingValues {
                expected: space.len(),
                found: values.len(),
            });
        }
        Ok(Self { space, values })
    }

    pub fn from_scalars(space: Arc<ProbSpace>, values: Vec<f64>) -> Result<Self, ProbSpaceError> {
        Self::new(space, values.into_iter().map(|v| vec![v]).collect())
    }

    pub fn space(&self) -> &Arc<ProbSpace> {
        &self.space
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn value(&self, index: usize) -> &[f64] {
        &self.values[index]
    }

    /// First coordinate of every value; meaningful for real-valued variables.
    pub fn scalars(&self) -> Vec<f64> {
        self.values.iter().map(|v| v[0]).collect()
    }
}

pub(crate) fn same_space(a: &Arc<ProbSpace>, b: &ProbSpace) -> bool {
    std::ptr::eq(Arc::as_ptr(a), b) || **a == *b
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() })
        .fold(0.0, |m, d| if d > m || d.is_nan() { d } else { m })
}

/// Checks that `xi` is constant on every atom, up to `tol` in the sup norm.
pub fn is_measurable_rv(space: &ProbSpace, xi: &RandomVariableRn, tol: f64) -> Result<Verdict, ProbSpaceError> {
    if !same_space(&xi.space, space) {
        return Err(ProbSpaceError::DomainMismatch);
    }
    Ok(constancy_verdict(space, |i, j| {
        let d = sup_distance(&xi.values[i], &xi.values[j]);
        // NaN never compares <= tol, so it counts as a difference.
        (d <= tol, None)
    }))
}

/// Scans every pair of scenarios inside each atom, in atom order, and
/// returns the first pair that `agree` rejects.
pub(crate) fn constancy_verdict<F>(space: &ProbSpace, mut agree: F) -> Verdict
where
    F: FnMut(usize, usize) -> (bool, Option<(f64, f64)>),
{
    for (a, atom) in space.atoms().iter().enumerate() {
        for (pos, &i) in atom.iter().enumerate() {
            for &j in &atom[pos + 1..] {
                let (ok, values) = agree(i, j);
                if !ok {
                    return Verdict::NonMeasurable(Witness {
                        atom: space.atom_ids(a),
                        first: space.scenario_id(i),
                        second: space.scenario_id(j),
                        probe: None,
                        values,
                    });
                }
            }
        }
    }
    Verdict::Measurable
}

/// Checks that the set description of `set` is the same on every atom.
///
/// Boxes are compared corner-wise, point clouds by Hausdorff distance and
/// level sets structurally (their constraints are stored with parameters
/// already substituted).
pub fn is_measurable_setmap(space: &ProbSpace, set: &RandomSet, tol: f64) -> Result<Verdict, ProbSpaceError> {
    if !same_space(set.space(), space) {
        return Err(ProbSpaceError::DomainMismatch);
    }
    Ok(constancy_verdict(space, |i, j| {
        (
            set_descriptions_agree(set.description(i), set.description(j), tol),
            None,
        )
    }))
}

fn set_descriptions_agree(a: &SetDescription, b: &SetDescription, tol: f64) -> bool {
    use SetDescription::*;
    match (a, b) {
        (Empty, Empty) => true,
        (Box(x), Box(y)) => sup_distance(x.lower(), y.lower()) <= tol && sup_distance(x.upper(), y.upper()) <= tol,
        (PointCloud(p), PointCloud(q)) => hausdorff(p, q) <= tol,
        (
            LevelSet {
                constraints: c1,
                bounds: b1,
            },
            LevelSet {
                constraints: c2,
                bounds: b2,
            },
        ) => c1 == c2 && sup_distance(b1.lower(), b2.lower()) <= tol && sup_distance(b1.upper(), b2.upper()) <= tol,
        _ => false,
    }
}

/// Hausdorff distance between finite point sets under the sup norm.
pub fn hausdorff(p: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
    fn directed(p: &[Vec<f64>], q: &[Vec<f64>]) -> f64 {
        p.iter()
            .map(|a| q.iter().map(|b| sup_distance(a, b)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    }
    directed(p, q).max(directed(q, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::randfunc::BoxSet;

    fn space_12_3() -> Arc<ProbSpace> {
        Arc::new(ProbSpace::new(vec![1, 2, 3], vec![0.25, 0.25, 0.5], vec![vec![1, 2], vec![3]]).unwrap())
    }

    #[test]
    fn make_space_examples() {
        let s = space_12_3();
        assert_eq!(s.atoms().len(), 2);
        let t = ProbSpace::new(vec![1], vec![1.0], vec![vec![1]]).unwrap();
        assert_eq!(t.atoms(), &[vec![0]]);
        assert!(matches!(
            ProbSpace::new(vec![1, 2], vec![0.6, 0.6], vec![vec![1], vec![2]]),
            Err(ProbSpaceError::WeightSum { .. })
        ));
    }

    #[test]
    fn partition_errors() {
        let bad = |atoms: Vec<Vec<u64>>| ProbSpace::new(vec![1, 2, 3], vec![0.2, 0.3, 0.5], atoms);
        assert!(matches!(bad(vec![vec![1, 2]]), Err(ProbSpaceError::Partition(_))));
        assert!(matches!(
            bad(vec![vec![1, 2], vec![2, 3]]),
            Err(ProbSpaceError::Partition(_))
        ));
        assert!(matches!(
            bad(vec![vec![1, 2, 3], vec![]]),
            Err(ProbSpaceError::Partition(_))
        ));
        assert!(matches!(bad(vec![vec![1, 2, 3, 4]]), Err(ProbSpaceError::Partition(_))));
        assert!(matches!(
            ProbSpace::new(vec![1, 2], vec![1.5, -0.5], vec![vec![1, 2]]),
            Err(ProbSpaceError::InvalidWeight { .. })
        ));
    }

    #[test]
    fn atoms_in_canonical_order() {
        let s = ProbSpace::new(vec![5, 3, 9], vec![0.2, 0.3, 0.5], vec![vec![9, 5], vec![3]]).unwrap();
        assert_eq!(s.atom_ids(0), vec![3]);
        assert_eq!(s.atom_ids(1), vec![5, 9]);
        assert_eq!(s.atom_of(0), 1);
        assert_eq!(s.atom_of(1), 0);
    }

    #[test]
    fn zero_weight_scenarios_still_count() {
        let s = Arc::new(ProbSpace::new(vec![1, 2], vec![1.0, 0.0], vec![vec![1, 2]]).unwrap());
        let xi = RandomVariableRn::from_scalars(s.clone(), vec![1.0, 2.0]).unwrap();
        assert!(!is_measurable_rv(&s, &xi, 0.0).unwrap().is_measurable());
    }

    #[test]
    fn rv_measurability_examples() {
        let s = space_12_3();
        let xi = RandomVariableRn::from_scalars(s.clone(), vec![5.0, 5.0, 7.0]).unwrap();
        assert_eq!(is_measurable_rv(&s, &xi, 0.0).unwrap(), Verdict::Measurable);

        let xi = RandomVariableRn::from_scalars(s.clone(), vec![5.0, 6.0, 7.0]).unwrap();
        let w = is_measurable_rv(&s, &xi, 0.0).unwrap();
        let w = w.witness().unwrap();
        assert_eq!(w.atom, vec![1, 2]);
        assert_eq!((w.first, w.second), (1, 2));

        let p = Arc::new(ProbSpace::discrete(vec![1, 2, 3], vec![0.25, 0.25, 0.5]).unwrap());
        let xi = RandomVariableRn::from_scalars(p.clone(), vec![5.0, 6.0, 7.0]).unwrap();
        assert!(is_measurable_rv(&p, &xi, 0.0).unwrap().is_measurable());
    }

    #[test]
    fn rv_tolerance_and_domain() {
        let s = space_12_3();
        let xi = RandomVariableRn::from_scalars(s.clone(), vec![1.0, 1.0 + 1e-10, 0.0]).unwrap();
        assert!(!is_measurable_rv(&s, &xi, 0.0).unwrap().is_measurable());
        assert!(is_measurable_rv(&s, &xi, 1e-9).unwrap().is_measurable());

        let other = ProbSpace::discrete(vec![1, 2, 3], vec![0.25, 0.25, 0.5]).unwrap();
        assert_eq!(is_measurable_rv(&other, &xi, 0.0), Err(ProbSpaceError::DomainMismatch));
    }

    #[test]
    fn setmap_measurability_examples() {
        let two = Arc::new(ProbSpace::trivial(vec![1, 2], vec![0.5, 0.5]).unwrap());
        let square = BoxSet::new(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let c = RandomSet::constant(two.clone(), SetDescription::Box(square)).unwrap();
        assert!(is_measurable_setmap(&two, &c, 0.0).unwrap().is_measurable());

        let unit = BoxSet::new(vec![0.0], vec![1.0]).unwrap();
        let wide = BoxSet::new(vec![0.0], vec![2.0]).unwrap();
        let c = RandomSet::new(
            two.clone(),
            vec![SetDescription::Box(unit.clone()), SetDescription::Box(wide.clone())],
        )
        .unwrap();
        assert!(!is_measurable_setmap(&two, &c, 0.0).unwrap().is_measurable());

        let disc = Arc::new(ProbSpace::discrete(vec![1, 2], vec![0.5, 0.5]).unwrap());
        let c = RandomSet::new(disc.clone(), vec![SetDescription::Box(unit), SetDescription::Box(wide)]).unwrap();
        assert!(is_measurable_setmap(&disc, &c, 0.0).unwrap().is_measurable());
    }

    #[test]
    fn point_clouds_compare_as_sets() {
        let p = vec![vec![0.0], vec![1.0]];
        let q = vec![vec![1.0], vec![0.0], vec![0.0]];
        assert_eq!(hausdorff(&p, &q), 0.0);
        assert_eq!(hausdorff(&p, &[vec![3.0]]), 3.0);
    }
}
