//! Model checking of reachability, next-state and expected-reward
//! properties.
//!
//! Unbounded properties go through qualitative precomputation first: states
//! with probability zero or one (or infinite expected reward) are fixed, and
//! only the remaining states enter the equation system. For maximal
//! probabilities and minimal rewards, end components that could trap the
//! iteration are collapsed into single states before solving.

use std::collections::BTreeMap;
use std::fmt;

use crate::graph::{self, attractor_rows, mec_decomposition, EndComponent, Graph};
use crate::model::{Model, ModelKind, RewardModel, StateSet};
use crate::number::{format_f64, format_rational, rational_from_f64, Field, OrderedField, Rational};
use crate::prism::{BinOp, Expr, Program, Value};
use crate::property::{desugar, Comparison, Direction, Operator, PathFormula, Property};
use crate::solver::{
    self, gaussian_elimination, interval_iteration, ovi, policy_iteration, reward_upper_bound, state_elimination_solve,
    vi, BellmanSystem, IterationSettings, LinearSystem, SolverError, SolverOutcome,
};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    ValueIteration,
    IntervalIteration,
    OptimisticValueIteration,
    GaussianElimination,
    StateElimination,
    PolicyIteration,
    RationalSearch,
}

impl SolverKind {
    pub const ALL: [SolverKind; 7] = [
        SolverKind::ValueIteration,
        SolverKind::IntervalIteration,
        SolverKind::OptimisticValueIteration,
        SolverKind::GaussianElimination,
        SolverKind::StateElimination,
        SolverKind::PolicyIteration,
        SolverKind::RationalSearch,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::ValueIteration => "vi",
            SolverKind::IntervalIteration => "ii",
            SolverKind::OptimisticValueIteration => "ovi",
            SolverKind::GaussianElimination => "exact",
            SolverKind::StateElimination => "elimination",
            SolverKind::PolicyIteration => "pi",
            SolverKind::RationalSearch => "rs",
        }
    }

    pub fn from_name(name: &str) -> Option<SolverKind> {
        SolverKind::ALL.into_iter().find(|k| k.name() == name)
    }

    /// Solvers that compute exact results in an exact domain.
    pub fn is_exact_method(self) -> bool {
        matches!(
            self,
            SolverKind::GaussianElimination
                | SolverKind::StateElimination
                | SolverKind::PolicyIteration
                | SolverKind::RationalSearch
        )
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSettings {
    pub solver: SolverKind,
    pub precision: Rational,
    pub relative: bool,
    /// Upgrade plain value iteration to interval iteration.
    pub sound: bool,
    /// The run uses exact rational arithmetic.
    pub exact: bool,
    pub gauss_seidel: bool,
    pub max_iterations: usize,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            solver: SolverKind::ValueIteration,
            precision: crate::number::rational(1, 1_000_000),
            relative: true,
            sound: false,
            exact: false,
            gauss_seidel: false,
            max_iterations: solver::default_max_iterations(),
        }
    }
}

impl CheckSettings {
    /// Exact-mode defaults: Gaussian elimination (policy iteration on
    /// nondeterministic models).
    pub fn exact() -> Self {
        CheckSettings {
            solver: SolverKind::GaussianElimination,
            exact: true,
            ..CheckSettings::default()
        }
    }

    pub fn with_solver(mut self, solver: SolverKind) -> Self {
        self.solver = solver;
        self
    }

    pub fn effective_solver(&self) -> SolverKind {
        if self.sound && self.solver == SolverKind::ValueIteration {
            SolverKind::IntervalIteration
        } else {
            self.solver
        }
    }

    pub fn validate(&self) -> Result<(), CheckError> {
        let solver = self.effective_solver();
        if self.exact && !solver.is_exact_method() {
            return Err(CheckError::Unsupported(format!(
                "solver `{solver}` cannot produce exact results; use exact, elimination, pi or rs"
            )));
        }
        if !self.exact && solver == SolverKind::RationalSearch {
            return Err(CheckError::Unsupported(
                "rational search requires exact mode".to_string(),
            ));
        }
        if self.precision <= <Rational as Field>::zero() {
            return Err(CheckError::Unsupported("precision must be positive".to_string()));
        }
        Ok(())
    }

    fn iteration(&self) -> IterationSettings {
        IterationSettings {
            epsilon: crate::number::rational_to_f64(&self.precision),
            relative: self.relative,
            max_iterations: self.max_iterations,
            gauss_seidel: self.gauss_seidel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CheckError {
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),
    #[error("unknown reward model \"{0}\"")]
    UnknownRewardModel(String),
    #[error("the model has no reward structure")]
    MissingRewardModel,
    #[error("the model has several reward structures; name one with R{{\"name\"}}")]
    AmbiguousRewardModel,
    #[error("nondeterministic models need min or max for this property")]
    MissingDirection,
    #[error("cannot evaluate `{formula}`: {message}")]
    StateFormula { formula: String, message: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl CheckError {
    pub fn is_unsupported(&self) -> bool {
        matches!(self, CheckError::Unsupported(_))
    }
}

/// A value that may be infinite (expected rewards).
#[derive(Debug, Clone, PartialEq)]
pub enum Extended<N> {
    Finite(N),
    Infinity,
}

impl<N: OrderedField> Extended<N> {
    pub fn finite(&self) -> Option<&N> {
        match self {
            Extended::Finite(v) => Some(v),
            Extended::Infinity => None,
        }
    }

    pub fn total_cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        match (self, other) {
            (Extended::Finite(a), Extended::Finite(b)) => a.total_cmp(b),
            (Extended::Infinity, Extended::Infinity) => Equal,
            (Extended::Infinity, _) => Greater,
            (_, Extended::Infinity) => Less,
        }
    }
}

/// Numbers the checker can run on.
pub trait CheckNumber: OrderedField {
    /// Report rendering: fractions for exact numbers, six significant digits
    /// for floats.
    fn render(&self) -> String;
    #[doc(hidden)]
    fn rational_search(
        system: &LinearSystem<Self>,
        settings: &IterationSettings,
    ) -> Result<SolverOutcome<Self>, CheckError>;
}

impl CheckNumber for f64 {
    fn render(&self) -> String {
        format_f64(*self)
    }

    fn rational_search(_: &LinearSystem<f64>, _: &IterationSettings) -> Result<SolverOutcome<f64>, CheckError> {
        Err(CheckError::Unsupported("rational search requires exact mode".to_string()))
    }
}

impl CheckNumber for Rational {
    fn render(&self) -> String {
        format_rational(self)
    }

    fn rational_search(
        system: &LinearSystem<Rational>,
        settings: &IterationSettings,
    ) -> Result<SolverOutcome<Rational>, CheckError> {
        Ok(solver::rational_search(system, settings)?)
    }
}

impl<N: CheckNumber> fmt::Display for Extended<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(v) => f.write_str(&v.render()),
            Extended::Infinity => f.write_str("inf"),
        }
    }
}

/// Per-state outcome of a property.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult<N> {
    pub values: Vec<Extended<N>>,
    /// Present for properties with a probability or reward bound.
    pub truth: Option<Vec<bool>>,
    pub initial_states: Vec<usize>,
    /// Local choice index per state for optimizing runs on nondeterministic
    /// models.
    pub scheduler: Option<Vec<usize>>,
}

/// Summary over the initial states.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialSummary<N> {
    Value(Extended<N>),
    Range(Extended<N>, Extended<N>),
    Truth(bool),
}

impl<N: CheckNumber> fmt::Display for InitialSummary<N> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSummary::Value(v) => write!(f, "{v}"),
            InitialSummary::Range(lo, hi) => write!(f, "[{lo}, {hi}]"),
            InitialSummary::Truth(b) => write!(f, "{b}"),
        }
    }
}

impl<N: CheckNumber> CheckResult<N> {
    pub fn at(&self, state: usize) -> &Extended<N> {
        &self.values[state]
    }

    /// Value at the first initial state.
    pub fn value_at_initial(&self) -> &Extended<N> {
        &self.values[self.initial_states[0]]
    }

    /// Bounded properties hold when they hold in every initial state; values
    /// over several initial states are reported as their range.
    pub fn summary(&self) -> InitialSummary<N> {
        if let Some(truth) = &self.truth {
            return InitialSummary::Truth(self.initial_states.iter().all(|&s| truth[s]));
        }
        let mut lo = self.value_at_initial().clone();
        let mut hi = lo.clone();
        for &s in &self.initial_states {
            let v = &self.values[s];
            if v.total_cmp(&lo).is_lt() {
                lo = v.clone();
            }
            if v.total_cmp(&hi).is_gt() {
                hi = v.clone();
            }
        }
        if lo == hi {
            InitialSummary::Value(lo)
        } else {
            InitialSummary::Range(lo, hi)
        }
    }
}

/// Replaces formula names and defined constants of `program` in the state
/// formulas of `property`.
pub fn inline_program_identifiers(property: &Property, program: &Program) -> Property {
    let formulas: BTreeMap<&str, &Expr> = program.formulas.iter().map(|f| (f.name.as_str(), &f.body)).collect();
    let constants: BTreeMap<&str, &Expr> = program
        .constants
        .iter()
        .filter_map(|c| c.value.as_ref().map(|v| (c.name.as_str(), v)))
        .collect();
    property.map_state_formulas(|e| {
        let mut resolve = |name: &str| -> Option<Expr> {
            formulas
                .get(name)
                .or_else(|| constants.get(name))
                .map(|e| (*e).clone())
        };
        let mut e = e.clone();
        // formulas may refer to other formulas and constants
        for _ in 0..=formulas.len() {
            let next = e.map_identifiers(&mut resolve);
            if next == e {
                break;
            }
            e = next;
        }
        e.fold()
    })
}

/// States satisfying a state formula. Labels resolve through the model's
/// labeling; variables through its state valuations.
pub fn state_set<N: Field>(model: &Model<N>, expr: &Expr) -> Result<StateSet, CheckError> {
    let n = model.state_count();
    let err = |message: String| CheckError::StateFormula {
        formula: expr.to_string(),
        message,
    };
    match expr {
        Expr::Bool(true) => Ok(StateSet::full(n)),
        Expr::Bool(false) => Ok(StateSet::empty(n)),
        Expr::Label(name) => model.label(name).ok_or_else(|| CheckError::UnknownLabel(name.clone())),
        Expr::Not(inner) => Ok(state_set(model, inner)?.complement()),
        Expr::Binary(op @ (BinOp::And | BinOp::Or | BinOp::Implies | BinOp::Iff), l, r) => {
            let (a, b) = (state_set(model, l)?, state_set(model, r)?);
            Ok(match op {
                BinOp::And => a.intersection(&b),
                BinOp::Or => a.union(&b),
                BinOp::Implies => a.complement().union(&b),
                _ => StateSet::from_fn(n, |s| a.contains(s) == b.contains(s)),
            })
        }
        _ => {
            let mut labels = Vec::new();
            expr.labels(&mut labels);
            if !labels.is_empty() {
                return Err(err("labels may only appear under boolean connectives".to_string()));
            }
            let valuations = model.valuations.as_ref();
            let mut out = StateSet::empty(n);
            for s in 0..n {
                let env = |name: &str| -> Option<Value> {
                    let v = valuations?;
                    let i = v.variables.iter().position(|x| x == name)?;
                    let raw = v.values[s][i];
                    Some(if v.boolean[i] { Value::Bool(raw != 0) } else { Value::Int(raw) })
                };
                let value = expr.evaluate(&env).map_err(|e| err(e.to_string()))?;
                if value.as_bool().map_err(|e| err(e.to_string()))? {
                    out.insert(s);
                }
            }
            Ok(out)
        }
    }
}

/// Checks `property` on `model`.
pub fn check<N: CheckNumber>(
    model: &Model<N>,
    property: &Property,
    settings: &CheckSettings,
) -> Result<CheckResult<N>, CheckError> {
    settings.validate()?;
    if settings.exact != N::is_exact() {
        return Err(CheckError::Unsupported(format!(
            "the model was built with {} numbers but the settings ask for {} mode",
            N::domain_name(),
            if settings.exact { "exact" } else { "floating-point" }
        )));
    }
    let property = desugar(property);
    let n = model.state_count();
    let untimed = model.untimed();
    let nondeterministic = untimed.is_nondeterministic();
    let direction = resolve_direction(nondeterministic, &property)?;
    let mut scheduler = None;

    let values: Vec<Extended<N>> = match (&property.operator, &property.path) {
        (Operator::Probability, PathFormula::Holds(e)) => indicator::<N>(&state_set(model, e)?),
        (Operator::Probability, PathFormula::Next(e)) => {
            let target = state_set(model, e)?;
            finite(next(&untimed, &target, direction))
        }
        (Operator::Probability, PathFormula::Until { left, right, bound }) => {
            let phi1 = state_set(model, left)?;
            let phi2 = state_set(model, right)?;
            match bound {
                None => {
                    let (values, sched) = unbounded_reachability(&untimed, &phi1, &phi2, direction, settings)?;
                    scheduler = sched;
                    finite(values)
                }
                Some(bound) => match model.kind {
                    ModelKind::Ctmc => {
                        if N::is_exact() {
                            return Err(CheckError::Unsupported(
                                "time-bounded properties of CTMCs are computed in floating point only".to_string(),
                            ));
                        }
                        let float = model.convert(|v| v.as_f64());
                        let t = crate::number::rational_to_f64(bound);
                        let epsilon = crate::number::rational_to_f64(&settings.precision);
                        let values = ctmc_timebounded(&float, &phi1, &phi2, t, epsilon)?;
                        values
                            .into_iter()
                            .map(|v| Extended::Finite(N::from_rational(&rational_from_f64(v).expect("finite"))))
                            .collect()
                    }
                    ModelKind::Ma => {
                        return Err(CheckError::Unsupported(
                            "time-bounded properties of Markov automata".to_string(),
                        ))
                    }
                    _ => {
                        let k = step_bound(bound)?;
                        finite(bounded_reachability(&untimed, &phi1, &phi2, k, direction))
                    }
                },
            }
        }
        (Operator::Reward(name), PathFormula::Eventually { target, bound: None }) => {
            let reward = select_reward(&untimed, name.as_deref())?;
            let goal = state_set(model, target)?;
            let (values, sched) = expected_reward(&untimed, reward, &goal, direction, settings)?;
            scheduler = sched;
            values
        }
        (Operator::Reward(_), _) => {
            return Err(CheckError::Unsupported(
                "reward properties other than unbounded reachability rewards".to_string(),
            ))
        }
        (Operator::Probability, PathFormula::Eventually { .. } | PathFormula::Globally { .. }) => {
            unreachable!("desugared")
        }
    };
    debug_assert_eq!(values.len(), n);

    let values: Vec<Extended<N>> = if property.complement {
        values
            .into_iter()
            .map(|v| match v {
                Extended::Finite(x) => Extended::Finite(N::one() - x),
                Extended::Infinity => Extended::Infinity,
            })
            .collect()
    } else {
        values
    };
    let values = if matches!(property.operator, Operator::Probability) && !N::is_exact() {
        values
            .into_iter()
            .map(|v| match v {
                Extended::Finite(x) => Extended::Finite(N::min_of(N::max_of(x, N::zero()), N::one())),
                inf => inf,
            })
            .collect()
    } else {
        values
    };
    let truth = property.bound.as_ref().map(|b| {
        let threshold = Extended::Finite(N::from_rational(&b.threshold));
        values
            .iter()
            .map(|v| {
                let ord = v.total_cmp(&threshold);
                match b.comparison {
                    Comparison::Less => ord.is_lt(),
                    Comparison::LessEqual => ord.is_le(),
                    Comparison::Greater => ord.is_gt(),
                    Comparison::GreaterEqual => ord.is_ge(),
                }
            })
            .collect()
    });
    Ok(CheckResult {
        values,
        truth,
        initial_states: model.initial_states.iter().collect(),
        scheduler,
    })
}

fn finite<N>(values: Vec<N>) -> Vec<Extended<N>> {
    values.into_iter().map(Extended::Finite).collect()
}

fn indicator<N: Field>(set: &StateSet) -> Vec<Extended<N>> {
    (0..set.width())
        .map(|s| Extended::Finite(if set.contains(s) { N::one() } else { N::zero() }))
        .collect()
}

fn step_bound(bound: &Rational) -> Result<usize, CheckError> {
    if !bound.is_integer() || *bound < <Rational as Field>::zero() {
        return Err(CheckError::Unsupported(format!(
            "step bound {} is not a non-negative integer",
            format_rational(bound)
        )));
    }
    bound
        .to_integer()
        .try_into()
        .map_err(|_| CheckError::Unsupported("step bound too large".to_string()))
}

/// The optimization direction of a property. Deterministic models ignore
/// any given direction; on nondeterministic models a missing direction is
/// derived from the bound (upper bounds check the maximum, lower bounds the
/// minimum).
fn resolve_direction(nondeterministic: bool, property: &Property) -> Result<Option<Direction>, CheckError> {
    if !nondeterministic {
        if property.direction.is_some() {
            log::warn!("min/max is ignored on deterministic models");
        }
        return Ok(None);
    }
    if let Some(d) = property.direction {
        return Ok(Some(d));
    }
    let bound = property.bound.as_ref().ok_or(CheckError::MissingDirection)?;
    let worst = match bound.comparison {
        Comparison::Less | Comparison::LessEqual => Direction::Max,
        Comparison::Greater | Comparison::GreaterEqual => Direction::Min,
    };
    Ok(Some(if property.complement { worst.flipped() } else { worst }))
}

fn select_reward<'a, N>(model: &'a Model<N>, name: Option<&str>) -> Result<&'a RewardModel<N>, CheckError> {
    match name {
        Some(name) => model
            .rewards
            .get(name)
            .ok_or_else(|| CheckError::UnknownRewardModel(name.to_string())),
        None => match model.rewards.len() {
            0 => Err(CheckError::MissingRewardModel),
            1 => Ok(model.rewards.values().next().expect("one reward model")),
            _ => model.rewards.get("").ok_or(CheckError::AmbiguousRewardModel),
        },
    }
}

fn optimum<N: OrderedField>(direction: Option<Direction>, values: impl Iterator<Item = N>) -> N {
    let mut best: Option<N> = None;
    for v in values {
        best = Some(match best {
            None => v,
            Some(b) => match direction {
                Some(Direction::Min) => N::min_of(b, v),
                _ => N::max_of(b, v),
            },
        });
    }
    best.unwrap_or_else(N::zero)
}

/// Probability of moving into `target` in one step.
pub fn next<N: OrderedField>(model: &Model<N>, target: &StateSet, direction: Option<Direction>) -> Vec<N> {
    (0..model.state_count())
        .map(|s| {
            optimum(
                direction,
                model.rows(s).map(|r| {
                    model
                        .transitions
                        .row(r)
                        .filter(|(t, _)| target.contains(*t))
                        .fold(N::zero(), |acc, (_, v)| acc + v.clone())
                }),
            )
        })
        .collect()
}

/// Probability of `φ1 U≤k φ2` by `k` matrix-vector products.
pub fn bounded_reachability<N: OrderedField>(
    model: &Model<N>,
    phi1: &StateSet,
    phi2: &StateSet,
    k: usize,
    direction: Option<Direction>,
) -> Vec<N> {
    let n = model.state_count();
    let active = phi1.difference(phi2);
    let mut x: Vec<N> = (0..n).map(|s| if phi2.contains(s) { N::one() } else { N::zero() }).collect();
    for _ in 0..k {
        let next: Vec<N> = (0..n)
            .map(|s| {
                if active.contains(s) {
                    optimum(direction, model.rows(s).map(|r| model.transitions.row_dot(r, &x)))
                } else {
                    x[s].clone()
                }
            })
            .collect();
        x = next;
    }
    x
}

/// Maybe-states grouped into classes: single states, or collapsed end
/// components.
struct Classes {
    class_of: Vec<usize>,
    members: Vec<Vec<usize>>,
    /// Rows kept inside a collapsed component.
    internal: Vec<bool>,
    collapsed: Vec<bool>,
}

impl Classes {
    fn new<N: Field>(model: &Model<N>, maybe: &StateSet, components: &[EndComponent]) -> Classes {
        let n = model.state_count();
        let mut class_of = vec![usize::MAX; n];
        let mut members = Vec::new();
        let mut collapsed = Vec::new();
        let mut internal = vec![false; model.row_count()];
        for c in components {
            for &s in &c.states {
                class_of[s] = members.len();
            }
            for &r in &c.rows {
                internal[r] = true;
            }
            members.push(c.states.clone());
            collapsed.push(true);
        }
        for s in maybe.iter() {
            if class_of[s] == usize::MAX {
                class_of[s] = members.len();
                members.push(vec![s]);
                collapsed.push(false);
            }
        }
        // order classes by their smallest member for a stable layout
        let mut order: Vec<usize> = (0..members.len()).collect();
        order.sort_by_key(|&c| members[c][0]);
        let mut rank = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        for c in class_of.iter_mut().filter(|c| **c != usize::MAX) {
            *c = rank[*c];
        }
        let members = order.iter().map(|&c| members[c].clone()).collect();
        let collapsed = order.iter().map(|&c| collapsed[c]).collect();
        Classes {
            class_of,
            members,
            internal,
            collapsed,
        }
    }

    fn len(&self) -> usize {
        self.members.len()
    }
}

/// Equation system over classes together with the model row of every
/// system row.
struct Assembled<N> {
    system: BellmanSystem<N>,
    origin: Vec<Option<usize>>,
}

fn assemble<N: Field>(
    model: &Model<N>,
    classes: &Classes,
    excluded: &dyn Fn(usize) -> bool,
    b_of: &dyn Fn(usize) -> N,
    direction: Direction,
) -> Assembled<N> {
    let mut rows = Vec::new();
    let mut b = Vec::new();
    let mut origin = Vec::new();
    let mut offsets = vec![0];
    for members in &classes.members {
        let before = rows.len();
        for &s in members {
            for r in model.rows(s) {
                if classes.internal[r] || excluded(r) {
                    continue;
                }
                let mut entries: BTreeMap<usize, N> = BTreeMap::new();
                for (t, v) in model.transitions.row(r) {
                    let c = classes.class_of[t];
                    if c != usize::MAX {
                        let e = entries.entry(c).or_insert_with(N::zero);
                        *e = e.clone() + v.clone();
                    }
                }
                rows.push(entries.into_iter().collect::<Vec<_>>());
                b.push(b_of(r));
                origin.push(Some(r));
            }
        }
        if rows.len() == before {
            rows.push(Vec::new());
            b.push(N::zero());
            origin.push(None);
        }
        offsets.push(rows.len());
    }
    Assembled {
        system: BellmanSystem::new(SparseMatrix::from_rows(classes.len(), rows), offsets, b, direction),
        origin,
    }
}

enum Quantity {
    Probability,
    Reward,
}

fn solve<N: CheckNumber>(
    assembled: &Assembled<N>,
    deterministic: bool,
    quantity: Quantity,
    keep_last: &[usize],
    settings: &CheckSettings,
) -> Result<SolverOutcome<N>, CheckError> {
    let outcome = dispatch(assembled, deterministic, quantity, keep_last, settings)?;
    log::info!(
        "{} solved {} unknowns in {} iterations",
        settings.effective_solver(),
        assembled.system.size(),
        outcome.iterations
    );
    Ok(outcome)
}

fn dispatch<N: CheckNumber>(
    assembled: &Assembled<N>,
    deterministic: bool,
    quantity: Quantity,
    keep_last: &[usize],
    settings: &CheckSettings,
) -> Result<SolverOutcome<N>, CheckError> {
    let iteration = settings.iteration();
    let sys = &assembled.system;
    let solver = settings.effective_solver();
    if deterministic {
        let lin = LinearSystem::new(sys.a.clone(), sys.b.clone());
        let upper = || -> Result<Vec<N>, CheckError> {
            Ok(match quantity {
                Quantity::Probability => vec![N::one(); lin.size()],
                Quantity::Reward => reward_upper_bound(&lin, &iteration)?,
            })
        };
        return Ok(match solver {
            SolverKind::ValueIteration => vi(&lin, &iteration)?,
            SolverKind::IntervalIteration => interval_iteration(&lin, upper()?, &iteration)?,
            SolverKind::OptimisticValueIteration => ovi(&lin, &iteration)?,
            SolverKind::GaussianElimination | SolverKind::PolicyIteration => gaussian_elimination(&lin)?,
            SolverKind::StateElimination => state_elimination_solve(&lin, keep_last)?,
            SolverKind::RationalSearch => N::rational_search(&lin, &iteration)?,
        });
    }
    let upper = || -> Result<Vec<N>, CheckError> {
        Ok(match quantity {
            Quantity::Probability => vec![N::one(); sys.size()],
            Quantity::Reward => reward_upper_bound(sys, &iteration)?,
        })
    };
    Ok(match solver {
        SolverKind::ValueIteration => vi(sys, &iteration)?,
        SolverKind::IntervalIteration => interval_iteration(sys, upper()?, &iteration)?,
        SolverKind::OptimisticValueIteration => ovi(sys, &iteration)?,
        SolverKind::GaussianElimination | SolverKind::PolicyIteration => policy_iteration(sys, settings.max_iterations)?,
        other => {
            return Err(CheckError::Unsupported(format!(
                "solver `{other}` applies to deterministic models only"
            )))
        }
    })
}

/// Lifts a class-level policy to per-state choices on maybe-states: the
/// exit row's owner takes it, other members of a collapsed component head
/// towards that owner inside the component.
fn lift_policy<N: Field>(
    model: &Model<N>,
    graph: &Graph<N>,
    classes: &Classes,
    assembled: &Assembled<N>,
    policy: &[usize],
    choice: &mut [usize],
) {
    for (c, members) in classes.members.iter().enumerate() {
        let row = assembled.origin[assembled.system.offsets[c] + policy[c]];
        let Some(row) = row else { continue };
        let exit = graph.owner(row);
        choice[exit] = row - model.rows(exit).start;
        if classes.collapsed[c] {
            let n = model.state_count();
            let target = StateSet::from_indices(n, [exit]);
            let within = StateSet::from_indices(n, members.iter().copied().filter(|&s| s != exit));
            let rows = attractor_rows(graph, &target, &within, &|r| classes.internal[r]);
            for &s in members {
                if let Some(r) = rows[s] {
                    choice[s] = r - model.rows(s).start;
                }
            }
        }
    }
}

/// For states of `within` that reach `target` with positive probability
/// under some choice, a row that moves one step closer to it.
fn escape_rows<N: Field>(graph: &Graph<N>, target: &StateSet, within: &StateSet) -> Vec<Option<usize>> {
    let mut choice = vec![None; graph.state_count()];
    let mut reached = target.clone();
    let mut queue: std::collections::VecDeque<usize> = target.iter().collect();
    while let Some(t) = queue.pop_front() {
        for &r in graph.rows_into(t) {
            let s = graph.owner(r);
            if within.contains(s) && reached.insert(s) {
                choice[s] = Some(r);
                queue.push_back(s);
            }
        }
    }
    choice
}

fn first_row_within<N: Field>(model: &Model<N>, s: usize, set: &StateSet) -> Option<usize> {
    model
        .rows(s)
        .find(|&r| model.transitions.row_columns(r).iter().all(|&t| set.contains(t)))
        .map(|r| r - model.rows(s).start)
}

/// The equation system `x = A x + b` behind an unbounded reachability or
/// reward property of a deterministic model; variable `i` stands for model
/// state `states[i]`.
#[derive(Debug, Clone)]
pub struct StateSystem<N> {
    pub system: LinearSystem<N>,
    pub states: Vec<usize>,
}

pub fn linear_system<N: CheckNumber>(model: &Model<N>, property: &Property) -> Result<StateSystem<N>, CheckError> {
    let property = desugar(property);
    let untimed = model.untimed();
    if untimed.is_nondeterministic() {
        return Err(CheckError::Unsupported(
            "nondeterministic models lead to Bellman systems".to_string(),
        ));
    }
    let n = untimed.state_count();
    let graph = Graph::of_model(&untimed);
    let (maybe, b): (StateSet, Box<dyn Fn(usize) -> N + '_>) = match (&property.operator, &property.path) {
        (Operator::Probability, PathFormula::Until { left, right, bound: None }) => {
            let phi1 = state_set(model, left)?;
            let phi2 = state_set(model, right)?;
            let (p0, p1) = graph::prob01_deterministic(&graph, &phi1, &phi2);
            let maybe = p0.union(&p1).complement();
            let transitions = &untimed.transitions;
            (
                maybe,
                Box::new(move |s| {
                    transitions
                        .row(s)
                        .filter(|(t, _)| p1.contains(*t))
                        .fold(N::zero(), |acc, (_, v)| acc + v.clone())
                }),
            )
        }
        (Operator::Reward(name), PathFormula::Eventually { target, bound: None }) => {
            let reward = select_reward(&untimed, name.as_deref())?.clone();
            let goal = state_set(model, target)?;
            let finite_set = graph::prob01_deterministic(&graph, &StateSet::full(n), &goal).1;
            (finite_set.difference(&goal), Box::new(move |s| reward.row_reward(s, s)))
        }
        _ => {
            return Err(CheckError::Unsupported(
                "equation systems exist for unbounded reachability and reward properties".to_string(),
            ))
        }
    };
    let states: Vec<usize> = maybe.iter().collect();
    let mut index = vec![usize::MAX; n];
    for (i, &s) in states.iter().enumerate() {
        index[s] = i;
    }
    let rows = states
        .iter()
        .map(|&s| {
            untimed
                .transitions
                .row(s)
                .filter(|(t, _)| index[*t] != usize::MAX)
                .map(|(t, v)| (index[t], v.clone()))
                .collect()
        })
        .collect();
    let b = states.iter().map(|&s| b(s)).collect();
    Ok(StateSystem {
        system: LinearSystem::new(SparseMatrix::from_rows(states.len(), rows), b),
        states,
    })
}

/// Probability of `φ1 U φ2`, optimized in `direction` on nondeterministic
/// models; returns the optimizing scheduler alongside.
pub fn unbounded_reachability<N: CheckNumber>(
    model: &Model<N>,
    phi1: &StateSet,
    phi2: &StateSet,
    direction: Option<Direction>,
    settings: &CheckSettings,
) -> Result<(Vec<N>, Option<Vec<usize>>), CheckError> {
    let n = model.state_count();
    let graph = Graph::of_model(model);
    let (p0, p1) = match direction {
        Some(d) => graph::prob01_nondeterministic(&graph, phi1, phi2, d),
        None => graph::prob01_deterministic(&graph, phi1, phi2),
    };
    let maybe = p0.union(&p1).complement();
    let components = match direction {
        Some(Direction::Max) => mec_decomposition(&graph, &maybe, &|_| true),
        _ => Vec::new(),
    };
    let classes = Classes::new(model, &maybe, &components);
    let b_of = |r: usize| {
        model
            .transitions
            .row(r)
            .filter(|(t, _)| p1.contains(*t))
            .fold(N::zero(), |acc, (_, v)| acc + v.clone())
    };
    let assembled = assemble(model, &classes, &|_| false, &b_of, direction.unwrap_or(Direction::Max));
    let keep_last: Vec<usize> = model
        .initial_states
        .iter()
        .filter(|&s| classes.class_of[s] != usize::MAX)
        .map(|s| classes.class_of[s])
        .collect();
    let outcome = if classes.len() == 0 {
        SolverOutcome {
            values: Vec::new(),
            lower: None,
            upper: None,
            iterations: 0,
            policy: Some(Vec::new()),
        }
    } else {
        solve(&assembled, direction.is_none(), Quantity::Probability, &keep_last, settings)?
    };
    let values: Vec<N> = (0..n)
        .map(|s| {
            if p1.contains(s) {
                N::one()
            } else if p0.contains(s) {
                N::zero()
            } else {
                outcome.values[classes.class_of[s]].clone()
            }
        })
        .collect();
    let scheduler = direction.map(|d| {
        let mut choice = vec![0usize; n];
        if let Some(policy) = &outcome.policy {
            lift_policy(model, &graph, &classes, &assembled, policy, &mut choice);
        }
        match d {
            Direction::Max => {
                let within = p1.difference(phi2);
                let rows = attractor_rows(&graph, &phi2.intersection(&p1), &within, &|_| true);
                for s in within.iter() {
                    if let Some(r) = rows[s] {
                        choice[s] = r - model.rows(s).start;
                    }
                }
            }
            Direction::Min => {
                for s in p0.iter() {
                    if let Some(c) = first_row_within(model, s, &p0) {
                        choice[s] = c;
                    }
                }
            }
        }
        choice
    });
    Ok((values, scheduler))
}

/// Expected reward accumulated until reaching `goal`; infinite where the
/// goal is missed with positive probability (under the optimizing
/// scheduler).
pub fn expected_reward<N: CheckNumber>(
    model: &Model<N>,
    reward: &RewardModel<N>,
    goal: &StateSet,
    direction: Option<Direction>,
    settings: &CheckSettings,
) -> Result<(Vec<Extended<N>>, Option<Vec<usize>>), CheckError> {
    let n = model.state_count();
    let graph = Graph::of_model(model);
    let all = StateSet::full(n);
    let finite_set = match direction {
        None => graph::prob01_deterministic(&graph, &all, goal).1,
        Some(Direction::Min) => graph::prob1_exists(&graph, &all, goal),
        Some(Direction::Max) => {
            let p0e = graph::prob0_exists(&graph, &all, goal);
            graph::prob1_all(&graph, &all, goal, &p0e)
        }
    };
    let infinite = finite_set.complement();
    let avoiders = match direction {
        Some(Direction::Max) => graph::prob0_exists(&graph, &all, goal),
        _ => StateSet::empty(n),
    };
    let maybe = finite_set.difference(goal);
    let owners = model.choices.row_owners();
    let row_reward = |r: usize| reward.row_reward(owners[r], r);
    let excluded = |r: usize| {
        model
            .transitions
            .row_columns(r)
            .iter()
            .any(|&t| infinite.contains(t))
    };
    let components = match direction {
        Some(Direction::Min) => mec_decomposition(&graph, &maybe, &|r| !excluded(r) && row_reward(r).is_zero()),
        _ => Vec::new(),
    };
    let classes = Classes::new(model, &maybe, &components);
    let assembled = assemble(model, &classes, &excluded, &row_reward, direction.unwrap_or(Direction::Max));
    let keep_last: Vec<usize> = model
        .initial_states
        .iter()
        .filter(|&s| classes.class_of[s] != usize::MAX)
        .map(|s| classes.class_of[s])
        .collect();
    let outcome = if classes.len() == 0 {
        SolverOutcome {
            values: Vec::new(),
            lower: None,
            upper: None,
            iterations: 0,
            policy: Some(Vec::new()),
        }
    } else {
        solve(&assembled, direction.is_none(), Quantity::Reward, &keep_last, settings)?
    };
    let values = (0..n)
        .map(|s| {
            if goal.contains(s) {
                Extended::Finite(N::zero())
            } else if infinite.contains(s) {
                Extended::Infinity
            } else {
                Extended::Finite(outcome.values[classes.class_of[s]].clone())
            }
        })
        .collect();
    let scheduler = direction.map(|_| {
        let mut choice = vec![0usize; n];
        if let Some(policy) = &outcome.policy {
            lift_policy(model, &graph, &classes, &assembled, policy, &mut choice);
        }
        let towards = escape_rows(&graph, &avoiders, &infinite);
        for s in infinite.iter() {
            let row = if avoiders.contains(s) {
                first_row_within(model, s, &avoiders)
            } else {
                towards[s].map(|r| r - model.rows(s).start)
            };
            if let Some(r) = row {
                choice[s] = r;
            }
        }
        choice
    });
    Ok((values, scheduler))
}

/// Probability of `φ1 U≤t φ2` in a CTMC by uniformization. States outside
/// `φ1 ∪ φ2` and states in `φ2` are made absorbing; the Poisson series is
/// truncated on both sides with at most `ε/2` neglected weight in total.
pub fn ctmc_timebounded(
    ctmc: &Model<f64>,
    phi1: &StateSet,
    phi2: &StateSet,
    t: f64,
    epsilon: f64,
) -> Result<Vec<f64>, CheckError> {
    use statrs::distribution::{Discrete, DiscreteCDF, Poisson};

    if ctmc.kind != ModelKind::Ctmc {
        return Err(CheckError::Unsupported("time bounds require a CTMC".to_string()));
    }
    if !(t >= 0.0) || !t.is_finite() {
        return Err(CheckError::Unsupported(format!("time bound {t} must be non-negative")));
    }
    let n = ctmc.state_count();
    let active = phi1.difference(phi2);
    let target: Vec<f64> = (0..n).map(|s| if phi2.contains(s) { 1.0 } else { 0.0 }).collect();
    let exit: Vec<f64> = (0..n)
        .map(|s| {
            if active.contains(s) {
                ctmc.transitions.row(s).filter(|(c, _)| *c != s).map(|(_, v)| *v).sum()
            } else {
                0.0
            }
        })
        .collect();
    let q = exit.iter().copied().fold(0.0, f64::max);
    if t == 0.0 || q == 0.0 {
        return Ok(target);
    }
    let q = q * 1.02;
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|s| {
            if !active.contains(s) {
                return vec![(s, 1.0)];
            }
            let mut row: Vec<(usize, f64)> = ctmc
                .transitions
                .row(s)
                .filter(|(c, _)| *c != s)
                .map(|(c, v)| (c, v / q))
                .collect();
            row.push((s, 1.0 - exit[s] / q));
            row
        })
        .collect();
    let p = SparseMatrix::from_rows(n, rows);
    let lambda = q * t;
    let poisson = Poisson::new(lambda).map_err(|e| CheckError::Unsupported(e.to_string()))?;
    let tail = epsilon / 4.0;
    let mode = lambda.floor() as u64;
    let mut right = mode;
    while poisson.sf(right) > tail {
        right += 1;
    }
    let mut left = mode;
    while left > 0 && poisson.cdf(left - 1) > tail {
        left -= 1;
    }
    let mut v = target;
    let mut result = vec![0.0; n];
    for k in 0..=right {
        if k >= left {
            let w = poisson.pmf(k);
            for (r, x) in result.iter_mut().zip(&v) {
                *r += w * x;
            }
        }
        if k < right {
            v = (0..n).map(|s| p.row_dot(s, &v)).collect();
        }
    }
    Ok(result)
}
