//! Reachable state-space exploration for PRISM programs, and assembly of
//! models from explicit tables.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use crate::model::{ChoiceStructure, Labeling, Model, ModelKind, RewardModel, StateSet, StateValuations, Violation};
use crate::number::{Field, Rational};
use crate::parametric::RationalFunction;
use crate::prism::{
    substitute_constants, CommandAction, ConstantError, EvalError, ExplicitError, ExplicitModel, Expr, Program,
    Value, ValueType, VariableType,
};
use crate::sparse::SparseMatrix;

/// Upper limit on the valuations scanned when enumerating an `init` block.
const INIT_SCAN_LIMIT: u128 = 10_000_000;

/// Number domains a model can be built in.
pub trait BuildNumber: Field {
    fn from_expression(
        expr: &Expr,
        env: &dyn Fn(&str) -> Option<Value>,
        parameters: &BTreeSet<String>,
    ) -> Result<Self, EvalError>;
}

impl BuildNumber for f64 {
    fn from_expression(expr: &Expr, env: &dyn Fn(&str) -> Option<Value>, _: &BTreeSet<String>) -> Result<Self, EvalError> {
        Ok(f64::from_rational(&expr.evaluate(env)?.as_rational()?))
    }
}

impl BuildNumber for Rational {
    fn from_expression(expr: &Expr, env: &dyn Fn(&str) -> Option<Value>, _: &BTreeSet<String>) -> Result<Self, EvalError> {
        expr.evaluate(env)?.as_rational()
    }
}

impl BuildNumber for RationalFunction {
    fn from_expression(
        expr: &Expr,
        env: &dyn Fn(&str) -> Option<Value>,
        parameters: &BTreeSet<String>,
    ) -> Result<Self, EvalError> {
        expr.evaluate_function(env, &|n| parameters.contains(n))
    }
}

#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Give deadlock states a self-loop and the label `deadlock` instead of
    /// failing.
    pub fix_deadlocks: bool,
    pub constants: BTreeMap<String, Value>,
    /// Undefined constants kept symbolic (parametric builds).
    pub parameters: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BuildError {
    #[error(transparent)]
    Constant(#[from] ConstantError),
    #[error(transparent)]
    Explicit(#[from] ExplicitError),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("{context}: {source}")]
    Evaluation { context: String, source: EvalError },
    #[error("update sets {variable} to {value}, outside its range, in state {state} by command `{command}`")]
    OutOfRange {
        variable: String,
        value: i64,
        state: String,
        command: String,
    },
    #[error("deadlock in state {0}; use --fix-deadlocks to add self-loops")]
    Deadlock(String),
    #[error("probability {value} outside [0, 1] in state {state} for command `{command}`")]
    ProbabilityRange {
        value: String,
        state: String,
        command: String,
    },
    #[error("negative rate {value} in state {state} for command `{command}`")]
    NegativeRate {
        value: String,
        state: String,
        command: String,
    },
    #[error("probabilities sum to {sum} instead of 1 in state {state} for command `{command}`")]
    RowSum {
        sum: String,
        state: String,
        command: String,
    },
    #[error("negative reward {value} in state {state}")]
    NegativeReward { value: String, state: String },
    #[error("the init predicate has no satisfying valuation")]
    NoInitialState,
    #[error("the init predicate ranges over more than {INIT_SCAN_LIMIT} valuations")]
    InitialScanTooLarge,
    #[error("built model is invalid: {0}")]
    Invalid(Violation),
}

/// One nondeterministic alternative of a state before kind-specific merging.
#[derive(Debug, Clone, PartialEq)]
pub struct Choice<N> {
    /// `None` for silent and Markovian commands.
    pub action: Option<String>,
    pub markovian: bool,
    pub branches: Vec<(N, Vec<i64>)>,
}

struct VarInfo {
    name: String,
    low: i64,
    high: i64,
    boolean: bool,
    init: Option<i64>,
}

struct CompiledUpdate {
    weight: Option<Expr>,
    assignments: Vec<(usize, Expr)>,
}

struct CompiledCommand {
    text: String,
    rate: bool,
    guard: Expr,
    updates: Vec<CompiledUpdate>,
}

struct Compiled {
    program: Program,
    parameters: BTreeSet<String>,
    vars: Vec<VarInfo>,
    var_index: HashMap<String, usize>,
    commands: Vec<CompiledCommand>,
    /// Silent and Markovian commands, in module and declaration order.
    local: Vec<usize>,
    /// Per action in order of first appearance: command ids grouped by owning module.
    actions: Vec<(String, Vec<Vec<usize>>)>,
}

type Distribution<N> = Vec<(N, Vec<(usize, i64)>)>;

impl Compiled {
    fn new(program: &Program, options: &BuildOptions) -> Result<Compiled, BuildError> {
        let program = substitute_constants(program, &options.constants, &options.parameters)?;
        let constant_int = |e: &Expr, what: &str| -> Result<i64, BuildError> {
            e.evaluate(&|_: &str| None)
                .and_then(|v| ValueType::Int.coerce(v))
                .and_then(|v| v.as_int())
                .map_err(|source| BuildError::Evaluation {
                    context: what.to_string(),
                    source,
                })
        };
        let mut vars = Vec::new();
        let mut var_index = HashMap::new();
        let mut owner = Vec::new();
        for (m, module) in program.modules.iter().enumerate() {
            for v in &module.variables {
                let (low, high, boolean) = match &v.ty {
                    VariableType::Bool => (0, 1, true),
                    VariableType::Range { low, high } => (
                        constant_int(low, &format!("lower bound of {}", v.name))?,
                        constant_int(high, &format!("upper bound of {}", v.name))?,
                        false,
                    ),
                };
                if low > high {
                    return Err(BuildError::InvalidProgram(format!(
                        "variable {} has empty range [{low}..{high}]",
                        v.name
                    )));
                }
                let init = match &v.init {
                    None => None,
                    Some(e) if boolean => Some(
                        e.evaluate(&|_: &str| None)
                            .and_then(|v| v.as_bool())
                            .map_err(|source| BuildError::Evaluation {
                                context: format!("initial value of {}", v.name),
                                source,
                            })? as i64,
                    ),
                    Some(e) => Some(constant_int(e, &format!("initial value of {}", v.name))?),
                };
                if let Some(i) = init {
                    if i < low || i > high {
                        return Err(BuildError::InvalidProgram(format!(
                            "initial value {i} of {} outside [{low}..{high}]",
                            v.name
                        )));
                    }
                }
                var_index.insert(v.name.clone(), vars.len());
                owner.push(m);
                vars.push(VarInfo {
                    name: v.name.clone(),
                    low,
                    high,
                    boolean,
                    init,
                });
            }
        }
        for l in &program.labels {
            if l.name == "init" || l.name == "deadlock" {
                return Err(BuildError::InvalidProgram(format!("label \"{}\" is reserved", l.name)));
            }
        }
        let mut commands = Vec::new();
        let mut local = Vec::new();
        let mut actions: Vec<(String, Vec<Vec<usize>>)> = Vec::new();
        let module_count = program.modules.len();
        for (m, module) in program.modules.iter().enumerate() {
            for c in &module.commands {
                let text = c.to_string();
                let rate = match (&c.action, program.model_kind) {
                    (CommandAction::Markovian, ModelKind::Ma) => true,
                    (CommandAction::Markovian, kind) => {
                        return Err(BuildError::InvalidProgram(format!(
                            "`<>` commands are only allowed in ma models, not {}",
                            kind.keyword()
                        )))
                    }
                    (_, ModelKind::Ctmc) => true,
                    _ => false,
                };
                let mut updates = Vec::new();
                for u in &c.updates {
                    let mut assignments = Vec::new();
                    for a in &u.assignments {
                        let Some(&v) = var_index.get(&a.variable) else {
                            return Err(BuildError::InvalidProgram(format!(
                                "assignment to unknown variable {} in `{text}`",
                                a.variable
                            )));
                        };
                        if owner[v] != m {
                            return Err(BuildError::InvalidProgram(format!(
                                "module {} assigns variable {} of another module in `{text}`",
                                module.name, a.variable
                            )));
                        }
                        assignments.push((v, a.value.clone()));
                    }
                    updates.push(CompiledUpdate {
                        weight: u.weight.clone(),
                        assignments,
                    });
                }
                let id = commands.len();
                commands.push(CompiledCommand {
                    text,
                    rate,
                    guard: c.guard.clone(),
                    updates,
                });
                match &c.action {
                    CommandAction::Named(a) => {
                        let entry = match actions.iter().position(|(n, _)| n == a) {
                            Some(i) => i,
                            None => {
                                actions.push((a.clone(), vec![Vec::new(); module_count]));
                                actions.len() - 1
                            }
                        };
                        actions[entry].1[m].push(id);
                    }
                    _ => local.push(id),
                }
            }
        }
        for (_, per_module) in &mut actions {
            per_module.retain(|cmds| !cmds.is_empty());
        }
        Ok(Compiled {
            program,
            parameters: options.parameters.clone(),
            vars,
            var_index,
            commands,
            local,
            actions,
        })
    }

    fn value_of(&self, state: &[i64], name: &str) -> Option<Value> {
        self.var_index.get(name).map(|&i| {
            if self.vars[i].boolean {
                Value::Bool(state[i] != 0)
            } else {
                Value::Int(state[i])
            }
        })
    }

    fn describe(&self, state: &[i64]) -> String {
        let parts: Vec<String> = self
            .vars
            .iter()
            .zip(state)
            .map(|(v, x)| {
                if v.boolean {
                    format!("{}={}", v.name, *x != 0)
                } else {
                    format!("{}={x}", v.name)
                }
            })
            .collect();
        format!("({})", parts.join(", "))
    }

    fn holds(&self, e: &Expr, state: &[i64], context: &str) -> Result<bool, BuildError> {
        e.evaluate(&|n| self.value_of(state, n))
            .and_then(|v| v.as_bool())
            .map_err(|source| BuildError::Evaluation {
                context: format!("{context} in state {}", self.describe(state)),
                source,
            })
    }

    fn initial_valuations(&self) -> Result<Vec<Vec<i64>>, BuildError> {
        let Some(init) = &self.program.init else {
            return Ok(vec![self
                .vars
                .iter()
                .map(|v| v.init.unwrap_or(v.low))
                .collect()]);
        };
        let total: u128 = self
            .vars
            .iter()
            .map(|v| (v.high - v.low + 1) as u128)
            .try_fold(1u128, |acc, n| acc.checked_mul(n))
            .unwrap_or(u128::MAX);
        if total > INIT_SCAN_LIMIT {
            return Err(BuildError::InitialScanTooLarge);
        }
        let mut out = Vec::new();
        let mut current: Vec<i64> = self.vars.iter().map(|v| v.low).collect();
        loop {
            if self.holds(init, &current, "init predicate")? {
                out.push(current.clone());
            }
            // odometer with the last variable fastest
            let mut i = self.vars.len();
            loop {
                if i == 0 {
                    if out.is_empty() {
                        return Err(BuildError::NoInitialState);
                    }
                    return Ok(out);
                }
                i -= 1;
                if current[i] < self.vars[i].high {
                    current[i] += 1;
                    break;
                }
                current[i] = self.vars[i].low;
            }
        }
    }

    fn distribution<N: BuildNumber>(&self, id: usize, state: &[i64]) -> Result<Distribution<N>, BuildError> {
        let cmd = &self.commands[id];
        let env = |n: &str| self.value_of(state, n);
        let context = |what: &str| format!("{what} of `{}` in state {}", cmd.text, self.describe(state));
        let mut out = Vec::with_capacity(cmd.updates.len());
        let mut sum = N::zero();
        for u in &cmd.updates {
            let w = match &u.weight {
                None => N::one(),
                Some(e) => N::from_expression(e, &env, &self.parameters).map_err(|source| BuildError::Evaluation {
                    context: context("weight"),
                    source,
                })?,
            };
            if cmd.rate {
                if w.sign() == Some(Ordering::Less) {
                    return Err(BuildError::NegativeRate {
                        value: w.to_string(),
                        state: self.describe(state),
                        command: cmd.text.clone(),
                    });
                }
            } else if w.sign() == Some(Ordering::Less) || (N::one() - w.clone()).sign() == Some(Ordering::Less) {
                return Err(BuildError::ProbabilityRange {
                    value: w.to_string(),
                    state: self.describe(state),
                    command: cmd.text.clone(),
                });
            }
            sum = sum + w.clone();
            if w.is_zero() {
                continue;
            }
            let mut assignments = Vec::with_capacity(u.assignments.len());
            for (v, e) in &u.assignments {
                let info = &self.vars[*v];
                let value = e
                    .evaluate(&env)
                    .and_then(|x| {
                        if info.boolean {
                            x.as_bool().map(|b| b as i64)
                        } else {
                            ValueType::Int.coerce(x).and_then(|x| x.as_int())
                        }
                    })
                    .map_err(|source| BuildError::Evaluation {
                        context: context(&format!("assignment to {}", info.name)),
                        source,
                    })?;
                if value < info.low || value > info.high {
                    return Err(BuildError::OutOfRange {
                        variable: info.name.clone(),
                        value,
                        state: self.describe(state),
                        command: cmd.text.clone(),
                    });
                }
                assignments.push((*v, value));
            }
            out.push((w, assignments));
        }
        if !cmd.rate && !(sum.is_one() || sum.stochastic_eq(&N::one())) {
            return Err(BuildError::RowSum {
                sum: sum.to_string(),
                state: self.describe(state),
                command: cmd.text.clone(),
            });
        }
        Ok(out)
    }

    fn enabled(&self, id: usize, state: &[i64]) -> Result<bool, BuildError> {
        self.holds(&self.commands[id].guard, state, &format!("guard of `{}`", self.commands[id].text))
    }

    fn expand<N: BuildNumber>(&self, state: &[i64]) -> Result<Vec<Choice<N>>, BuildError> {
        let mut choices = Vec::new();
        for &id in &self.local {
            if self.enabled(id, state)? {
                let dist = self.distribution::<N>(id, state)?;
                choices.push(Choice {
                    action: None,
                    markovian: self.commands[id].rate && self.program.model_kind == ModelKind::Ma,
                    branches: combine(state, &[dist]),
                });
            }
        }
        for (name, per_module) in &self.actions {
            let mut enabled_per_module = Vec::with_capacity(per_module.len());
            for cmds in per_module {
                let mut enabled = Vec::new();
                for &id in cmds {
                    if self.enabled(id, state)? {
                        enabled.push(self.distribution::<N>(id, state)?);
                    }
                }
                if enabled.is_empty() {
                    break;
                }
                enabled_per_module.push(enabled);
            }
            if enabled_per_module.len() < per_module.len() {
                continue;
            }
            let mut picks = vec![0usize; enabled_per_module.len()];
            loop {
                let dists: Vec<Distribution<N>> = picks
                    .iter()
                    .zip(&enabled_per_module)
                    .map(|(&i, options)| options[i].clone())
                    .collect();
                choices.push(Choice {
                    action: Some(name.clone()),
                    markovian: false,
                    branches: combine(state, &dists),
                });
                let mut k = picks.len();
                loop {
                    if k == 0 {
                        break;
                    }
                    k -= 1;
                    if picks[k] + 1 < enabled_per_module[k].len() {
                        picks[k] += 1;
                        break;
                    }
                    picks[k] = 0;
                }
                if picks.iter().all(|&p| p == 0) {
                    break;
                }
            }
        }
        Ok(choices)
    }
}

/// Product of independent per-module distributions, merging equal successors
/// in order of first occurrence.
fn combine<N: Field>(state: &[i64], dists: &[Distribution<N>]) -> Vec<(N, Vec<i64>)> {
    let mut acc: Vec<(N, Vec<i64>)> = vec![(N::one(), state.to_vec())];
    for dist in dists {
        let mut next = Vec::with_capacity(acc.len() * dist.len());
        for (w, s) in &acc {
            for (w2, assignments) in dist {
                let mut t = s.clone();
                for &(v, x) in assignments {
                    t[v] = x;
                }
                next.push((w.clone() * w2.clone(), t));
            }
        }
        acc = next;
    }
    let mut merged: Vec<(N, Vec<i64>)> = Vec::with_capacity(acc.len());
    let mut position: HashMap<Vec<i64>, usize> = HashMap::new();
    for (w, t) in acc {
        match position.get(&t) {
            Some(&i) => merged[i].0 = merged[i].0.clone() + w,
            None => {
                position.insert(t.clone(), merged.len());
                merged.push((w, t));
            }
        }
    }
    merged
}

/// Enumerates the initial valuations in ascending order (first declared
/// variable most significant).
pub fn enumerate_initial_states(program: &Program, options: &BuildOptions) -> Result<Vec<Vec<i64>>, BuildError> {
    Compiled::new(program, options)?.initial_valuations()
}

/// Enabled choices of a valuation, before kind-specific merging.
pub fn expand_state<N: BuildNumber>(
    program: &Program,
    options: &BuildOptions,
    valuation: &[i64],
) -> Result<Vec<Choice<N>>, BuildError> {
    Compiled::new(program, options)?.expand(valuation)
}

/// Row of a state together with the actions that contributed to it, weighted
/// by their share of the row.
struct Row<N> {
    entries: Vec<(usize, N)>,
    label: String,
    sources: Vec<(N, String)>,
}

/// Explores the reachable state space breadth-first. State indices follow
/// discovery order, initial states first.
pub fn build_model<N: BuildNumber>(program: &Program, options: &BuildOptions) -> Result<Model<N>, BuildError> {
    let compiled = Compiled::new(program, options)?;
    let kind = compiled.program.model_kind;
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut states: Vec<Vec<i64>> = Vec::new();
    for v in compiled.initial_valuations()? {
        index.insert(v.clone(), states.len());
        states.push(v);
    }
    let initial_count = states.len();
    let mut rows: Vec<Row<N>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut markovian: Vec<bool> = Vec::new();
    let mut deadlocks: Vec<usize> = Vec::new();
    let mut overlap_states = 0usize;

    let mut current = 0;
    while current < states.len() {
        let state = states[current].clone();
        let choices = compiled.expand::<N>(&state)?;
        let mut lookup = |valuation: Vec<i64>| -> usize {
            if let Some(&i) = index.get(&valuation) {
                return i;
            }
            let i = states.len();
            index.insert(valuation.clone(), i);
            states.push(valuation);
            i
        };
        let mut indexed: Vec<(Option<String>, bool, Vec<(usize, N)>)> = choices
            .into_iter()
            .map(|c| {
                let entries = c.branches.into_iter().map(|(w, v)| (lookup(v), w)).collect();
                (c.action, c.markovian, entries)
            })
            .collect();
        if kind == ModelKind::Ma && indexed.iter().any(|c| !c.1) {
            indexed.retain(|c| !c.1);
        }
        let is_markovian = kind == ModelKind::Ctmc || (kind == ModelKind::Ma && indexed.iter().any(|c| c.1));
        let label_of = |a: &Option<String>| a.clone().unwrap_or_default();
        let state_rows: Vec<Row<N>> = if indexed.is_empty() {
            if !options.fix_deadlocks {
                return Err(BuildError::Deadlock(compiled.describe(&state)));
            }
            deadlocks.push(current);
            let entries = if kind == ModelKind::Ctmc {
                Vec::new()
            } else {
                vec![(current, N::one())]
            };
            vec![Row {
                entries,
                label: String::new(),
                sources: Vec::new(),
            }]
        } else if kind == ModelKind::Mdp || (kind == ModelKind::Ma && !is_markovian) {
            indexed
                .into_iter()
                .map(|(a, _, entries)| Row {
                    label: label_of(&a),
                    sources: vec![(N::one(), label_of(&a))],
                    entries,
                })
                .collect()
        } else if kind == ModelKind::Dtmc {
            let k = indexed.len();
            if k > 1 {
                overlap_states += 1;
            }
            let share = N::one() / N::from_rational(&Rational::from_integer(k.into()));
            let mut entries = Vec::new();
            let mut sources = Vec::new();
            for (a, _, e) in indexed {
                sources.push((share.clone(), label_of(&a)));
                entries.extend(e.into_iter().map(|(t, w)| (t, w * share.clone())));
            }
            vec![Row {
                entries,
                label: String::new(),
                sources,
            }]
        } else {
            // rate rows: CTMC states and Markovian MA states
            let total = indexed
                .iter()
                .flat_map(|c| c.2.iter())
                .fold(N::zero(), |acc, (_, w)| acc + w.clone());
            let mut entries = Vec::new();
            let mut sources = Vec::new();
            for (a, _, e) in indexed {
                let exit = e.iter().fold(N::zero(), |acc, (_, w)| acc + w.clone());
                if !total.is_zero() {
                    sources.push((exit / total.clone(), label_of(&a)));
                }
                entries.extend(e);
            }
            vec![Row {
                entries,
                label: String::new(),
                sources,
            }]
        };
        counts.push(state_rows.len());
        markovian.push(is_markovian);
        rows.extend(state_rows);
        current += 1;
    }
    if overlap_states > 0 {
        log::warn!(
            "{overlap_states} state(s) of the dtmc enable several commands; each enabled command is chosen with equal probability"
        );
    }

    let n = states.len();
    let transitions = SparseMatrix::from_rows(n, rows.iter().map(|r| r.entries.clone()).collect());
    let action_labels = (kind == ModelKind::Mdp || kind == ModelKind::Ma)
        .then(|| rows.iter().map(|r| r.label.clone()).collect());
    let choices = ChoiceStructure::from_counts(&counts, action_labels);

    let mut labeling = Labeling::new(n);
    let initial_states = StateSet::from_indices(n, 0..initial_count);
    labeling.add("init", initial_states.clone());
    labeling.add("deadlock", StateSet::from_indices(n, deadlocks));
    for l in &compiled.program.labels {
        let mut set = StateSet::empty(n);
        for (s, v) in states.iter().enumerate() {
            if compiled.holds(&l.body, v, &format!("label \"{}\"", l.name))? {
                set.insert(s);
            }
        }
        labeling.add(l.name.clone(), set);
    }

    let mut model = match kind {
        ModelKind::Dtmc | ModelKind::Ctmc => Model::deterministic(kind, transitions, labeling, initial_states),
        ModelKind::Mdp => Model::nondeterministic(transitions, choices, labeling, initial_states),
        ModelKind::Ma => Model::markov_automaton(
            transitions,
            choices,
            StateSet::from_fn(n, |s| markovian[s]),
            labeling,
            initial_states,
        ),
    };

    let offsets = model.choices.state_offsets().to_vec();
    let mut seen_names = BTreeSet::new();
    for r in &compiled.program.reward_structs {
        let name = r.name.clone().unwrap_or_default();
        if !seen_names.insert(name.clone()) {
            return Err(BuildError::InvalidProgram(format!("reward structure \"{name}\" defined twice")));
        }
        let reward_value = |e: &Expr, v: &[i64]| -> Result<Rational, BuildError> {
            let value = e
                .evaluate(&|x| compiled.value_of(v, x))
                .and_then(|x| x.as_rational())
                .map_err(|source| BuildError::Evaluation {
                    context: format!("reward of \"{name}\" in state {}", compiled.describe(v)),
                    source,
                })?;
            if value.sign() == Some(Ordering::Less) {
                return Err(BuildError::NegativeReward {
                    value: value.to_string(),
                    state: compiled.describe(v),
                });
            }
            Ok(value)
        };
        let has_state_items = r.items.iter().any(|i| i.action.is_none());
        let has_action_items = r.items.iter().any(|i| i.action.is_some());
        let mut state_rewards = has_state_items.then(|| vec![N::zero(); n]);
        let mut action_rewards = has_action_items.then(|| vec![N::zero(); rows.len()]);
        for (s, v) in states.iter().enumerate() {
            let mut per_action: BTreeMap<&str, Rational> = BTreeMap::new();
            let mut state_total = Rational::zero();
            for item in &r.items {
                if !compiled.holds(&item.guard, v, &format!("reward guard of \"{name}\""))? {
                    continue;
                }
                let value = reward_value(&item.value, v)?;
                match &item.action {
                    None => state_total += value,
                    Some(a) => {
                        let slot = per_action.entry(a.as_str()).or_insert_with(Rational::zero);
                        *slot = slot.clone() + value;
                    }
                }
            }
            if let Some(sr) = &mut state_rewards {
                sr[s] = N::from_rational(&state_total);
            }
            if let Some(ar) = &mut action_rewards {
                for row in offsets[s]..offsets[s + 1] {
                    let mut total = N::zero();
                    for (share, action) in &rows[row].sources {
                        if let Some(value) = per_action.get(action.as_str()) {
                            total = total + share.clone() * N::from_rational(value);
                        }
                    }
                    ar[row] = total;
                }
            }
        }
        model.rewards.insert(
            name,
            RewardModel {
                state_rewards: state_rewards.or_else(|| (!has_action_items).then(|| vec![N::zero(); n])),
                action_rewards,
            },
        );
    }

    model.valuations = Some(Arc::new(StateValuations {
        variables: compiled.vars.iter().map(|v| v.name.clone()).collect(),
        values: states,
        boolean: compiled.vars.iter().map(|v| v.boolean).collect(),
    }));
    model.validate().map_err(BuildError::Invalid)?;
    Ok(model)
}

/// Assembles a model from parsed explicit files. Initial states come from the
/// label `init`, defaulting to state 0.
pub fn build_explicit<N: Field>(explicit: &ExplicitModel, fix_deadlocks: bool) -> Result<Model<N>, BuildError> {
    let n = explicit.state_count;
    let mut counts = explicit.choice_counts()?;
    let mut deadlocks = Vec::new();
    for (s, c) in counts.iter_mut().enumerate() {
        if *c == 0 {
            if !fix_deadlocks {
                return Err(BuildError::Deadlock(format!("{s}")));
            }
            deadlocks.push(s);
            *c = 1;
        }
    }
    let mut offsets = vec![0usize; n + 1];
    for s in 0..n {
        offsets[s + 1] = offsets[s] + counts[s];
    }
    let mut rows: Vec<Vec<(usize, N)>> = vec![Vec::new(); offsets[n]];
    for t in &explicit.transitions {
        rows[offsets[t.source] + t.choice].push((t.target, N::from_rational(&t.value)));
    }
    if explicit.kind != ModelKind::Ctmc {
        for &s in &deadlocks {
            rows[offsets[s]].push((s, N::one()));
        }
    }
    let transitions = SparseMatrix::from_rows(n, rows);
    let mut labeling = Labeling::new(n);
    for (name, states) in &explicit.labels {
        labeling.add(name.clone(), StateSet::from_indices(n, states.iter().copied()));
    }
    let initial_states = match explicit.labels.get("init") {
        Some(states) if !states.is_empty() => StateSet::from_indices(n, states.iter().copied()),
        _ => {
            log::warn!("no states carry the label \"init\"; using state 0 as initial state");
            StateSet::from_indices(n, [0])
        }
    };
    labeling.add("init", initial_states.clone());
    labeling.add("deadlock", StateSet::from_indices(n, deadlocks));
    let mut model = match explicit.kind {
        ModelKind::Mdp => Model::nondeterministic(
            transitions,
            ChoiceStructure::from_counts(&counts, None),
            labeling,
            initial_states,
        ),
        kind => Model::deterministic(kind, transitions, labeling, initial_states),
    };
    if let Some(r) = &explicit.state_rewards {
        model
            .rewards
            .insert(String::new(), RewardModel::state_only(r.iter().map(N::from_rational).collect()));
    }
    model.validate().map_err(BuildError::Invalid)?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;
    use crate::prism::{parse_explicit, parse_program};

    fn build<N: BuildNumber>(text: &str) -> Result<Model<N>, BuildError> {
        build_model(&parse_program(text).unwrap(), &BuildOptions::default())
    }

    #[test]
    fn minimal_program_needs_deadlock_fix() {
        let text = "dtmc module m x:[0..1] init 0; [] x=0 -> 1:(x'=1); endmodule";
        assert!(matches!(build::<f64>(text), Err(BuildError::Deadlock(_))));
        let options = BuildOptions {
            fix_deadlocks: true,
            ..Default::default()
        };
        let m: Model<f64> = build_model(&parse_program(text).unwrap(), &options).unwrap();
        assert_eq!(m.state_count(), 2);
        assert_eq!(m.transition_count(), 2);
        assert!(m.labeling.get("deadlock").unwrap().contains(1));
    }

    #[test]
    fn initial_predicate_enumeration() {
        let p = parse_program("dtmc module m x:[0..2]; [] true -> true; endmodule init x=0 | x=2 endinit").unwrap();
        assert_eq!(enumerate_initial_states(&p, &BuildOptions::default()).unwrap(), vec![vec![0], vec![2]]);
        let p = parse_program("dtmc module m x:[0..2] init 1; [] true -> true; endmodule").unwrap();
        assert_eq!(enumerate_initial_states(&p, &BuildOptions::default()).unwrap(), vec![vec![1]]);
        let p = parse_program("dtmc module m x:[0..2]; [] true -> true; endmodule init x>5 endinit").unwrap();
        assert_eq!(enumerate_initial_states(&p, &BuildOptions::default()), Err(BuildError::NoInitialState));
    }

    #[test]
    fn silent_command_branches() {
        let p = parse_program("dtmc module m x:[0..2] init 0; [] x=0 -> 0.5:(x'=1) + 0.5:(x'=2); endmodule").unwrap();
        let choices = expand_state::<Rational>(&p, &BuildOptions::default(), &[0]).unwrap();
        assert_eq!(choices.len(), 1);
        assert_eq!(choices[0].branches, vec![(rational(1, 2), vec![1]), (rational(1, 2), vec![2])]);
    }

    #[test]
    fn synchronization_multiplies() {
        let text = "mdp
            module a x:[0..2] init 0; [s] x=0 -> 0.5:(x'=1) + 0.5:(x'=2); endmodule
            module b y:[0..2] init 0; [s] y=0 -> 0.25:(y'=1) + 0.75:(y'=2); [t] y=1 -> true; endmodule";
        let p = parse_program(text).unwrap();
        let choices = expand_state::<Rational>(&p, &BuildOptions::default(), &[0, 0]).unwrap();
        assert_eq!(choices.len(), 1);
        assert_eq!(choices[0].action.as_deref(), Some("s"));
        let weights: Vec<_> = choices[0].branches.iter().map(|b| b.0.clone()).collect();
        assert_eq!(weights, vec![rational(1, 8), rational(3, 8), rational(1, 8), rational(3, 8)]);
        // action s owned by both modules but enabled only in b
        let choices = expand_state::<Rational>(&p, &BuildOptions::default(), &[1, 0]).unwrap();
        assert!(choices.is_empty());
    }

    #[test]
    fn range_and_probability_errors() {
        let out = build::<f64>("dtmc module m x:[0..1] init 0; [] true -> (x'=x+1); endmodule");
        assert!(matches!(out, Err(BuildError::OutOfRange { value: 2, .. })));
        let out = build::<f64>("dtmc module m x:[0..1] init 0; [] true -> 1.5:(x'=0) + -0.5:(x'=1); endmodule");
        assert!(matches!(out, Err(BuildError::ProbabilityRange { .. })));
        let out = build::<Rational>("dtmc module m x:[0..1] init 0; [] true -> 0.5:(x'=0) + 0.4:(x'=1); endmodule");
        assert!(matches!(out, Err(BuildError::RowSum { .. })));
        let out = build::<f64>("dtmc const int N; module m x:[0..N] init 0; [] true -> true; endmodule");
        assert!(matches!(out, Err(BuildError::Constant(ConstantError::Missing(_)))));
        let out = build::<f64>("dtmc module m x:[0..1] init 0; endmodule module n y:[0..1] init 0; [] true -> (x'=1); endmodule");
        assert!(matches!(out, Err(BuildError::InvalidProgram(_))));
        let out = build::<f64>("dtmc module m x:[2..1] init 0; [] true -> true; endmodule");
        assert!(matches!(out, Err(BuildError::InvalidProgram(_))));
    }

    #[test]
    fn overlapping_dtmc_commands_are_uniform() {
        let m: Model<Rational> =
            build("dtmc module m x:[0..2] init 0; [] x=0 -> (x'=1); [] x=0 -> (x'=2); [] x>0 -> true; endmodule").unwrap();
        assert_eq!(m.transitions.row_entries(0), vec![(1, rational(1, 2)), (2, rational(1, 2))]);
    }

    #[test]
    fn ctmc_rates_and_action_rewards() {
        let text = r#"ctmc
            module m s:[0..2] init 0;
                [a] s=0 -> 1:(s'=1);
                [b] s=0 -> 3:(s'=2);
                [] s>0 -> 1:(s'=s);
            endmodule
            rewards "r" [a] true : 4; [b] true : 8; endrewards"#;
        let m: Model<Rational> = build(text).unwrap();
        assert_eq!(m.exit_rates.as_ref().unwrap()[0], rational(4, 1));
        let r = &m.rewards["r"];
        // rate shares 1/4 and 3/4
        assert_eq!(r.action_rewards.as_ref().unwrap()[0], rational(7, 1));
    }

    #[test]
    fn ma_maximal_progress() {
        let text = "ma module m s:[0..2] init 0;
            <> s=0 -> 2:(s'=1);
            [go] s=0 -> (s'=2);
            <> s=1 -> 1:(s'=0) + 1:(s'=2);
            [] s=2 -> true;
        endmodule";
        let m: Model<Rational> = build(text).unwrap();
        let markovian = m.markovian_states.as_ref().unwrap();
        assert!(!markovian.contains(0));
        assert_eq!(m.rows(0).len(), 1);
        assert_eq!(m.choices.action_label(m.rows(0).start), "go");
        let s1 = (0..3).find(|&s| markovian.contains(s)).unwrap();
        assert_eq!(m.exit_rates.as_ref().unwrap()[s1], rational(2, 1));
    }

    #[test]
    fn build_is_deterministic_and_in_range() {
        let text = "dtmc module m x:[0..3] init 0; y:bool init false;
            [] x<3 -> 0.5:(x'=x+1) + 0.5:(y'=!y); [] x=3 -> true; endmodule
            label \"top\" = x=3;";
        let a: Model<f64> = build(text).unwrap();
        let b: Model<f64> = build(text).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.row_count(), a.state_count());
        let vals = a.valuations.as_ref().unwrap();
        assert!(vals.values.iter().all(|v| (0..=3).contains(&v[0]) && (0..=1).contains(&v[1])));
    }

    #[test]
    fn explicit_tables() {
        let e = parse_explicit("dtmc\n0 1 0.5\n0 2 0.5\n1 1 1\n2 2 1\n", "#DECLARATION\ninit t\n#END\n0 init\n1 t\n", None).unwrap();
        let m: Model<Rational> = build_explicit(&e, false).unwrap();
        assert_eq!(m.state_count(), 3);
        assert_eq!(m.transition_count(), 4);
        let bad = parse_explicit("dtmc\n0 1 0.5\n0 0 0.4\n1 1 1\n", "#DECLARATION\n#END\n", None).unwrap();
        match build_explicit::<Rational>(&bad, false) {
            Err(BuildError::Invalid(v)) => assert_eq!(v.state, Some(0)),
            other => panic!("{other:?}"),
        }
    }
}
