use std::collections::BTreeMap;
use std::fmt;

use super::{EvaluationError, RationalFunction};
use crate::checker::{unbounded_reachability, CheckSettings};
use crate::graph::{self, Graph};
use crate::model::{ChoiceStructure, Model, ModelKind, RewardModel, StateSet};
use crate::number::{format_rational, parse_rational, Field, Rational};
use crate::property::Direction;
use crate::solver::{state_elimination_solve, LinearSystem, SolverError};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParametricError {
    #[error("parametric analysis supports DTMCs only, found a {0}")]
    WrongKind(ModelKind),
    #[error("transition {state} -> {successor} is ill-defined at this point: {reason}")]
    IllDefinedTransition {
        state: usize,
        successor: usize,
        reason: String,
    },
    #[error("outgoing probabilities of state {state} sum to {sum} at this point")]
    IllDefinedRow { state: usize, sum: String },
    #[error("transition {state} -> {successor} is not multi-affine: {function}")]
    NotMultiAffine {
        state: usize,
        successor: usize,
        function: String,
    },
    #[error("parameter `{0}` is not covered")]
    Uncovered(String),
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("state {0} returns to itself with probability one but cannot reach the target")]
    Degenerate(usize),
    #[error("{0}")]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Parameters occurring anywhere in the transition functions.
pub fn parameters(model: &Model<RationalFunction>) -> Vec<String> {
    let mut vars = std::collections::BTreeSet::new();
    for f in model.transitions.values() {
        vars.extend(f.variables());
    }
    vars.into_iter().collect()
}

fn require_dtmc<N>(model: &Model<N>) -> Result<(), ParametricError> {
    if model.kind == ModelKind::Dtmc {
        Ok(())
    } else {
        Err(ParametricError::WrongKind(model.kind))
    }
}

/// Probability of `φ1 U φ2` as a function of the parameters, per state.
/// Qualitative sets are computed on the graph, where an entry counts as an
/// edge unless its function is identically zero.
pub fn solution_functions(
    model: &Model<RationalFunction>,
    phi1: &StateSet,
    phi2: &StateSet,
) -> Result<Vec<RationalFunction>, ParametricError> {
    require_dtmc(model)?;
    let n = model.state_count();
    let graph = Graph::of_model(model);
    let (p0, p1) = graph::prob01_deterministic(&graph, phi1, phi2);
    let maybe: Vec<usize> = p0.union(&p1).complement().iter().collect();
    let mut index = vec![usize::MAX; n];
    for (i, &s) in maybe.iter().enumerate() {
        index[s] = i;
    }
    let mut rows = Vec::with_capacity(maybe.len());
    let mut b = Vec::with_capacity(maybe.len());
    for &s in &maybe {
        let mut row = Vec::new();
        let mut to_target = RationalFunction::zero();
        for (t, f) in model.transitions.row(s) {
            if p1.contains(t) {
                to_target = to_target + f.clone();
            } else if index[t] != usize::MAX {
                row.push((index[t], f.clone()));
            }
        }
        rows.push(row);
        b.push(to_target);
    }
    let system = LinearSystem::new(SparseMatrix::from_rows(maybe.len(), rows), b);
    let last: Vec<usize> = model
        .initial_states
        .iter()
        .filter(|&s| index[s] != usize::MAX)
        .map(|s| index[s])
        .collect();
    let solved = state_elimination_solve(&system, &last).map_err(|e| match e {
        SolverError::Singular { column } => ParametricError::Degenerate(maybe[column]),
        other => other.into(),
    })?;
    Ok((0..n)
        .map(|s| {
            if p1.contains(s) {
                RationalFunction::one()
            } else if p0.contains(s) {
                RationalFunction::zero()
            } else {
                solved.values[index[s]].clone()
            }
        })
        .collect())
}

/// The solution function at the first initial state.
pub fn solution_function(
    model: &Model<RationalFunction>,
    phi1: &StateSet,
    phi2: &StateSet,
) -> Result<RationalFunction, ParametricError> {
    let init = model.initial_states.first().expect("an initial state");
    Ok(solution_functions(model, phi1, phi2)?.swap_remove(init))
}

/// Parses `p=1/2,q=0.3`.
pub fn parse_point(text: &str) -> Result<BTreeMap<String, Rational>, ParametricError> {
    let mut point = BTreeMap::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| ParametricError::InvalidPoint(format!("expected name=value, found `{item}`")))?;
        let value = parse_rational(value.trim()).map_err(|e| ParametricError::InvalidPoint(e.to_string()))?;
        point.insert(name.trim().to_string(), value);
    }
    Ok(point)
}

fn instantiate_row(
    model: &Model<RationalFunction>,
    state: usize,
    row: usize,
    point: &BTreeMap<String, Rational>,
) -> Result<Vec<(usize, Rational)>, ParametricError> {
    let zero = <Rational as Field>::zero();
    let one = <Rational as Field>::one();
    let mut out = Vec::new();
    let mut sum = zero.clone();
    for (t, f) in model.transitions.row(row) {
        let ill = |reason: String| ParametricError::IllDefinedTransition {
            state,
            successor: t,
            reason,
        };
        let v = f.evaluate(point).map_err(|e| ill(e.to_string()))?;
        if v < zero || v > one {
            return Err(ill(format!("{f} evaluates to {}", format_rational(&v))));
        }
        sum += v.clone();
        out.push((t, v));
    }
    if sum != one {
        return Err(ParametricError::IllDefinedRow {
            state,
            sum: format_rational(&sum),
        });
    }
    Ok(out)
}

/// Replaces every parameter by its value at `point`. Transitions that
/// evaluate to zero disappear.
pub fn instantiate(
    model: &Model<RationalFunction>,
    point: &BTreeMap<String, Rational>,
) -> Result<Model<Rational>, ParametricError> {
    require_dtmc(model)?;
    for p in parameters(model) {
        if !point.contains_key(&p) {
            return Err(ParametricError::Uncovered(p));
        }
    }
    let rows = (0..model.state_count())
        .map(|s| instantiate_row(model, s, s, point))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Model::deterministic(
        ModelKind::Dtmc,
        SparseMatrix::from_rows(model.state_count(), rows),
        model.labeling.clone(),
        model.initial_states.clone(),
    );
    out.valuations = model.valuations.clone();
    for (name, reward) in &model.rewards {
        let eval = |v: &Vec<RationalFunction>| -> Result<Vec<Rational>, ParametricError> {
            v.iter().map(|f| Ok(f.evaluate(point)?)).collect()
        };
        out.rewards.insert(
            name.clone(),
            RewardModel {
                state_rewards: reward.state_rewards.as_ref().map(eval).transpose()?,
                action_rewards: reward.action_rewards.as_ref().map(eval).transpose()?,
            },
        );
    }
    Ok(out)
}

/// A box of closed parameter intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    bounds: BTreeMap<String, (Rational, Rational)>,
}

impl Region {
    pub fn new(bounds: BTreeMap<String, (Rational, Rational)>) -> Result<Region, ParametricError> {
        for (name, (lo, hi)) in &bounds {
            if lo > hi {
                return Err(ParametricError::InvalidRegion(format!(
                    "empty interval for `{name}`: {} > {}",
                    format_rational(lo),
                    format_rational(hi)
                )));
            }
        }
        Ok(Region { bounds })
    }

    /// Parses `0.3<=p<=0.6,0.1<=q<=0.2`.
    pub fn parse(text: &str) -> Result<Region, ParametricError> {
        let mut bounds = BTreeMap::new();
        for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let parts: Vec<&str> = item.split("<=").map(str::trim).collect();
            let [lo, name, hi] = parts[..] else {
                return Err(ParametricError::InvalidRegion(format!("expected lo<=name<=hi, found `{item}`")));
            };
            let num = |t: &str| parse_rational(t).map_err(|e| ParametricError::InvalidRegion(e.to_string()));
            bounds.insert(name.to_string(), (num(lo)?, num(hi)?));
        }
        Region::new(bounds)
    }

    pub fn bounds(&self) -> &BTreeMap<String, (Rational, Rational)> {
        &self.bounds
    }

    pub fn contains(&self, point: &BTreeMap<String, Rational>) -> bool {
        self.bounds
            .iter()
            .all(|(name, (lo, hi))| point.get(name).is_some_and(|v| lo <= v && v <= hi))
    }

    /// Corner points over `vars`, remaining parameters at their lower bound.
    fn corners(&self, vars: &[String]) -> Vec<BTreeMap<String, Rational>> {
        let base: BTreeMap<String, Rational> = self.bounds.iter().map(|(k, (lo, _))| (k.clone(), lo.clone())).collect();
        let mut out = vec![base];
        for v in vars {
            let (lo, hi) = &self.bounds[v];
            if lo == hi {
                continue;
            }
            out = out
                .into_iter()
                .flat_map(|p| {
                    let mut q = p.clone();
                    q.insert(v.clone(), hi.clone());
                    [p, q]
                })
                .collect();
        }
        out
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .bounds
            .iter()
            .map(|(k, (lo, hi))| format!("{}<={k}<={}", format_rational(lo), format_rational(hi)))
            .collect();
        f.write_str(&parts.join(","))
    }
}

/// Lower and upper bound of `P(φ1 U φ2)` at the first initial state over
/// every point of `region`. Each state may pick any corner of the region
/// for its outgoing distribution, independently at every visit; the
/// minimum and maximum of the resulting MDP enclose the parametric values.
pub fn region_lifting(
    model: &Model<RationalFunction>,
    region: &Region,
    phi1: &StateSet,
    phi2: &StateSet,
) -> Result<(Rational, Rational), ParametricError> {
    require_dtmc(model)?;
    for p in parameters(model) {
        if !region.bounds.contains_key(&p) {
            return Err(ParametricError::Uncovered(p));
        }
    }
    let n = model.state_count();
    let mut rows = Vec::new();
    let mut counts = Vec::with_capacity(n);
    for s in 0..n {
        let mut vars = std::collections::BTreeSet::new();
        for (t, f) in model.transitions.row(s) {
            if !f.is_multi_affine() {
                return Err(ParametricError::NotMultiAffine {
                    state: s,
                    successor: t,
                    function: f.to_string(),
                });
            }
            vars.extend(f.variables());
        }
        let vars: Vec<String> = vars.into_iter().collect();
        let mut seen: Vec<Vec<(usize, Rational)>> = Vec::new();
        for corner in region.corners(&vars) {
            let row = instantiate_row(model, s, s, &corner)?;
            let row: Vec<_> = row.into_iter().filter(|(_, v)| !v.is_zero()).collect();
            if !seen.contains(&row) {
                seen.push(row);
            }
        }
        counts.push(seen.len());
        rows.extend(seen);
    }
    let mdp = Model::nondeterministic(
        SparseMatrix::from_rows(n, rows),
        ChoiceStructure::from_counts(&counts, None),
        model.labeling.clone(),
        model.initial_states.clone(),
    );
    let init = model.initial_states.first().expect("an initial state");
    let settings = CheckSettings::exact();
    let solve = |d| -> Result<Rational, ParametricError> {
        let (values, _) = unbounded_reachability(&mdp, phi1, phi2, Some(d), &settings).map_err(|e| match e {
            crate::checker::CheckError::Solver(s) => ParametricError::Solver(s),
            other => ParametricError::InvalidRegion(other.to_string()),
        })?;
        Ok(values[init].clone())
    };
    Ok((solve(Direction::Min)?, solve(Direction::Max)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Labeling;
    use crate::number::rational;
    use crate::parametric::Polynomial;

    fn p() -> RationalFunction {
        RationalFunction::parameter("p")
    }

    fn c(a: i64, b: i64) -> RationalFunction {
        RationalFunction::constant(rational(a, b))
    }

    fn chain(rows: Vec<Vec<(usize, RationalFunction)>>, target: usize) -> Model<RationalFunction> {
        let n = rows.len();
        let mut labels = Labeling::new(n);
        labels.add("t", StateSet::from_indices(n, [target]));
        Model::deterministic(ModelKind::Dtmc, SparseMatrix::from_rows(n, rows), labels, StateSet::from_indices(n, [0]))
    }

    /// s0 moves to t with p and to a sink otherwise.
    fn split() -> Model<RationalFunction> {
        chain(
            vec![vec![(1, p()), (2, c(1, 1) - p())], vec![(1, c(1, 1))], vec![(2, c(1, 1))]],
            1,
        )
    }

    fn point(v: Rational) -> BTreeMap<String, Rational> {
        BTreeMap::from([("p".to_string(), v)])
    }

    fn sets(m: &Model<RationalFunction>) -> (StateSet, StateSet) {
        (StateSet::full(m.state_count()), m.label("t").unwrap())
    }

    #[test]
    fn split_function_is_p() {
        let m = split();
        let (all, t) = sets(&m);
        assert_eq!(solution_function(&m, &all, &t).unwrap(), p());
    }

    #[test]
    fn geometric_retry_is_one() {
        let m = chain(vec![vec![(1, p()), (0, c(1, 1) - p())], vec![(1, c(1, 1))]], 1);
        let (all, t) = sets(&m);
        assert_eq!(solution_function(&m, &all, &t).unwrap(), c(1, 1));
    }

    #[test]
    fn instantiation() {
        let m = split();
        let half = instantiate(&m, &point(rational(1, 2))).unwrap();
        assert_eq!(half.transitions.row_sum(0), rational(1, 1));
        let zero = instantiate(&m, &point(rational(0, 1))).unwrap();
        assert_eq!(zero.transitions.row_len(0), 1);
        assert!(zero.validate().is_ok());
        assert!(matches!(
            instantiate(&m, &point(rational(2, 1))),
            Err(ParametricError::IllDefinedTransition { state: 0, successor: 1, .. })
        ));
        assert_eq!(instantiate(&m, &BTreeMap::new()), Err(ParametricError::Uncovered("p".to_string())));
    }

    #[test]
    fn lifting_split() {
        let m = split();
        let (all, t) = sets(&m);
        let region = Region::parse("0.3<=p<=0.6").unwrap();
        assert_eq!(region_lifting(&m, &region, &all, &t).unwrap(), (rational(3, 10), rational(3, 5)));
        let point_region = Region::parse("1/3<=p<=1/3").unwrap();
        assert_eq!(
            region_lifting(&m, &point_region, &all, &t).unwrap(),
            (rational(1, 3), rational(1, 3))
        );
        assert!(Region::parse("0.6<=p<=0.3").is_err());
        assert!(Region::parse("p<=0.3").is_err());
    }

    #[test]
    fn lifting_rejects_non_affine() {
        let p2 = RationalFunction::from_polynomial(&Polynomial::var("p") * &Polynomial::var("p"));
        let m = chain(vec![vec![(1, p2.clone()), (2, c(1, 1) - p2)], vec![(1, c(1, 1))], vec![(2, c(1, 1))]], 1);
        let (all, t) = sets(&m);
        assert!(matches!(
            region_lifting(&m, &Region::parse("0<=p<=1").unwrap(), &all, &t),
            Err(ParametricError::NotMultiAffine { .. })
        ));
    }

    #[test]
    fn points_parse() {
        let pt = parse_point("p=1/2, q=0.25").unwrap();
        assert_eq!(pt["q"], rational(1, 4));
        assert!(parse_point("p").is_err());
    }
}
