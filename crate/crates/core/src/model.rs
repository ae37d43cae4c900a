//! In-memory Markov models: DTMC, CTMC, MDP and (untimed) Markov automata.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::number::{Field, OrderedField};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Dtmc,
    Ctmc,
    Mdp,
    Ma,
}

impl ModelKind {
    pub fn is_nondeterministic(self) -> bool {
        matches!(self, ModelKind::Mdp | ModelKind::Ma)
    }

    pub fn keyword(self) -> &'static str {
        match self {
            ModelKind::Dtmc => "dtmc",
            ModelKind::Ctmc => "ctmc",
            ModelKind::Mdp => "mdp",
            ModelKind::Ma => "ma",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.keyword().to_uppercase())
    }
}

/// Fixed-width set of state indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct StateSet(Vec<bool>);

impl StateSet {
    pub fn empty(size: usize) -> Self {
        StateSet(vec![false; size])
    }

    pub fn full(size: usize) -> Self {
        StateSet(vec![true; size])
    }

    pub fn from_indices(size: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut set = Self::empty(size);
        for i in indices {
            set.insert(i);
        }
        set
    }

    pub fn from_fn(size: usize, f: impl FnMut(usize) -> bool) -> Self {
        StateSet((0..size).map(f).collect())
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, state: usize) -> bool {
        self.0[state]
    }

    pub fn insert(&mut self, state: usize) -> bool {
        !std::mem::replace(&mut self.0[state], true)
    }

    pub fn remove(&mut self, state: usize) {
        self.0[state] = false;
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|b| *b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }

    pub fn first(&self) -> Option<usize> {
        self.iter().next()
    }

    pub fn complement(&self) -> StateSet {
        StateSet(self.0.iter().map(|b| !b).collect())
    }

    pub fn union(&self, other: &StateSet) -> StateSet {
        StateSet(self.0.iter().zip(&other.0).map(|(a, b)| *a || *b).collect())
    }

    pub fn intersection(&self, other: &StateSet) -> StateSet {
        StateSet(self.0.iter().zip(&other.0).map(|(a, b)| *a && *b).collect())
    }

    pub fn difference(&self, other: &StateSet) -> StateSet {
        StateSet(self.0.iter().zip(&other.0).map(|(a, b)| *a && !*b).collect())
    }

    pub fn is_subset(&self, other: &StateSet) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| !*a || *b)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

/// Maps each state to the contiguous block of matrix rows it owns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChoiceStructure {
    state_offsets: Vec<usize>,
    action_labels: Option<Vec<String>>,
}

impl ChoiceStructure {
    pub fn identity(state_count: usize) -> Self {
        ChoiceStructure {
            state_offsets: (0..=state_count).collect(),
            action_labels: None,
        }
    }

    pub fn new(state_offsets: Vec<usize>, action_labels: Option<Vec<String>>) -> Self {
        assert!(!state_offsets.is_empty() && state_offsets[0] == 0);
        ChoiceStructure {
            state_offsets,
            action_labels,
        }
    }

    /// Builds offsets from the number of choices per state.
    pub fn from_counts(counts: &[usize], action_labels: Option<Vec<String>>) -> Self {
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        offsets.push(0);
        for c in counts {
            offsets.push(offsets.last().unwrap() + c);
        }
        Self::new(offsets, action_labels)
    }

    pub fn state_count(&self) -> usize {
        self.state_offsets.len() - 1
    }

    pub fn row_count(&self) -> usize {
        *self.state_offsets.last().unwrap()
    }

    pub fn rows(&self, state: usize) -> Range<usize> {
        self.state_offsets[state]..self.state_offsets[state + 1]
    }

    pub fn state_offsets(&self) -> &[usize] {
        &self.state_offsets
    }

    pub fn action_label(&self, row: usize) -> &str {
        self.action_labels
            .as_ref()
            .map(|labels| labels[row].as_str())
            .unwrap_or("")
    }

    pub fn action_labels(&self) -> Option<&[String]> {
        self.action_labels.as_deref()
    }

    pub fn is_identity(&self) -> bool {
        self.state_offsets.iter().enumerate().all(|(i, o)| i == *o)
    }

    /// State owning each row.
    pub fn row_owners(&self) -> Vec<usize> {
        let mut owners = Vec::with_capacity(self.row_count());
        for s in 0..self.state_count() {
            owners.extend(self.rows(s).map(|_| s));
        }
        owners
    }
}

/// Named sets of states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Labeling {
    state_count: usize,
    labels: BTreeMap<String, StateSet>,
}

impl Labeling {
    pub fn new(state_count: usize) -> Self {
        Labeling {
            state_count,
            labels: BTreeMap::new(),
        }
    }

    pub fn state_count(&self) -> usize {
        self.state_count
    }

    pub fn add(&mut self, name: impl Into<String>, states: StateSet) {
        assert_eq!(states.width(), self.state_count, "label width mismatch");
        self.labels.insert(name.into(), states);
    }

    pub fn add_to(&mut self, name: &str, state: usize) {
        let count = self.state_count;
        self.labels
            .entry(name.to_string())
            .or_insert_with(|| StateSet::empty(count))
            .insert(state);
    }

    pub fn get(&self, name: &str) -> Option<&StateSet> {
        self.labels.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.labels.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.labels.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &StateSet)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn labels_of(&self, state: usize) -> Vec<&str> {
        self.labels
            .iter()
            .filter(|(_, set)| set.contains(state))
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

/// Non-negative state and per-row (action) rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardModel<N> {
    pub state_rewards: Option<Vec<N>>,
    pub action_rewards: Option<Vec<N>>,
}

impl<N: Field> RewardModel<N> {
    pub fn state_only(rewards: Vec<N>) -> Self {
        RewardModel {
            state_rewards: Some(rewards),
            action_rewards: None,
        }
    }

    /// Reward collected when `row` (owned by `state`) is taken.
    pub fn row_reward(&self, state: usize, row: usize) -> N {
        let mut total = N::zero();
        if let Some(sr) = &self.state_rewards {
            total = total + sr[state].clone();
        }
        if let Some(ar) = &self.action_rewards {
            total = total + ar[row].clone();
        }
        total
    }

    pub fn map<M: Field>(&self, f: impl Fn(&N) -> M) -> RewardModel<M> {
        RewardModel {
            state_rewards: self.state_rewards.as_ref().map(|v| v.iter().map(&f).collect()),
            action_rewards: self.action_rewards.as_ref().map(|v| v.iter().map(&f).collect()),
        }
    }
}

/// Variable assignment of every state, kept from the PRISM builder so that
/// properties can refer to variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateValuations {
    pub variables: Vec<String>,
    pub values: Vec<Vec<i64>>,
    pub boolean: Vec<bool>,
}

impl StateValuations {
    pub fn describe(&self, state: usize) -> String {
        let parts: Vec<String> = self
            .variables
            .iter()
            .zip(&self.values[state])
            .zip(&self.boolean)
            .map(|((name, value), is_bool)| {
                if *is_bool {
                    format!("{name}={}", *value != 0)
                } else {
                    format!("{name}={value}")
                }
            })
            .collect();
        format!("({})", parts.join(", "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<N> {
    pub kind: ModelKind,
    pub transitions: SparseMatrix<N>,
    pub choices: ChoiceStructure,
    /// Exit rates of CTMC states and Markovian MA states (zero elsewhere).
    pub exit_rates: Option<Vec<N>>,
    pub markovian_states: Option<StateSet>,
    pub labeling: Labeling,
    pub rewards: BTreeMap<String, RewardModel<N>>,
    pub initial_states: StateSet,
    pub valuations: Option<Arc<StateValuations>>,
}

/// First invariant violation found by [`Model::validate`].
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message} (state {state:?}, row {row:?})")]
pub struct Violation {
    pub message: String,
    pub state: Option<usize>,
    pub row: Option<usize>,
}

impl Violation {
    fn at(message: impl Into<String>, state: Option<usize>, row: Option<usize>) -> Self {
        Violation {
            message: message.into(),
            state,
            row,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("operation requires a {expected} but the model is a {found}")]
    WrongKind { expected: ModelKind, found: ModelKind },
    #[error("uniformization rate is below the maximal exit rate {max_rate}")]
    RateTooSmall { max_rate: String },
}

impl<N: Field> Model<N> {
    /// A DTMC or CTMC with one row per state. Exit rates are derived for CTMCs.
    pub fn deterministic(
        kind: ModelKind,
        transitions: SparseMatrix<N>,
        labeling: Labeling,
        initial_states: StateSet,
    ) -> Self {
        assert!(matches!(kind, ModelKind::Dtmc | ModelKind::Ctmc));
        let n = transitions.row_count();
        let exit_rates =
            (kind == ModelKind::Ctmc).then(|| (0..n).map(|s| transitions.row_sum(s)).collect());
        Model {
            kind,
            transitions,
            choices: ChoiceStructure::identity(n),
            exit_rates,
            markovian_states: None,
            labeling,
            rewards: BTreeMap::new(),
            initial_states,
            valuations: None,
        }
    }

    pub fn nondeterministic(
        transitions: SparseMatrix<N>,
        choices: ChoiceStructure,
        labeling: Labeling,
        initial_states: StateSet,
    ) -> Self {
        Model {
            kind: ModelKind::Mdp,
            transitions,
            choices,
            exit_rates: None,
            markovian_states: None,
            labeling,
            rewards: BTreeMap::new(),
            initial_states,
            valuations: None,
        }
    }

    /// A Markov automaton; rows of `markovian` states hold rates.
    pub fn markov_automaton(
        transitions: SparseMatrix<N>,
        choices: ChoiceStructure,
        markovian: StateSet,
        labeling: Labeling,
        initial_states: StateSet,
    ) -> Self {
        let exit_rates = (0..choices.state_count())
            .map(|s| {
                if markovian.contains(s) {
                    choices
                        .rows(s)
                        .fold(N::zero(), |acc, r| acc + transitions.row_sum(r))
                } else {
                    N::zero()
                }
            })
            .collect();
        Model {
            kind: ModelKind::Ma,
            transitions,
            choices,
            exit_rates: Some(exit_rates),
            markovian_states: Some(markovian),
            labeling,
            rewards: BTreeMap::new(),
            initial_states,
            valuations: None,
        }
    }

    pub fn with_reward(mut self, name: impl Into<String>, reward: RewardModel<N>) -> Self {
        self.rewards.insert(name.into(), reward);
        self
    }

    pub fn state_count(&self) -> usize {
        self.choices.state_count()
    }

    pub fn row_count(&self) -> usize {
        self.transitions.row_count()
    }

    pub fn transition_count(&self) -> usize {
        self.transitions.entry_count()
    }

    pub fn rows(&self, state: usize) -> Range<usize> {
        self.choices.rows(state)
    }

    pub fn is_nondeterministic(&self) -> bool {
        self.kind.is_nondeterministic()
    }

    pub fn is_markovian(&self, state: usize) -> bool {
        match self.kind {
            ModelKind::Ctmc => true,
            ModelKind::Ma => self
                .markovian_states
                .as_ref()
                .map(|m| m.contains(state))
                .unwrap_or(false),
            _ => false,
        }
    }

    /// Looks up a label; `init` resolves to the initial states even when not
    /// stored explicitly.
    pub fn label(&self, name: &str) -> Option<StateSet> {
        match self.labeling.get(name) {
            Some(set) => Some(set.clone()),
            None if name == "init" => Some(self.initial_states.clone()),
            None => None,
        }
    }

    /// Checks every structural and stochastic invariant; reports the first
    /// violation.
    pub fn validate(&self) -> Result<(), Violation> {
        let n = self.state_count();
        let m = &self.transitions;
        if self.choices.row_count() != m.row_count() {
            return Err(Violation::at(
                format!(
                    "choice structure covers {} rows but matrix has {}",
                    self.choices.row_count(),
                    m.row_count()
                ),
                None,
                None,
            ));
        }
        if m.column_count() != n {
            return Err(Violation::at("matrix column count differs from state count", None, None));
        }
        let offsets = m.row_offsets();
        if offsets[0] != 0 || *offsets.last().unwrap() != m.values().len() {
            return Err(Violation::at("row offsets do not span the value array", None, None));
        }
        for row in 0..m.row_count() {
            if offsets[row] > offsets[row + 1] {
                return Err(Violation::at("row offsets decrease", None, Some(row)));
            }
            let cols = m.row_columns(row);
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Violation::at("columns not strictly ascending", None, Some(row)));
            }
            if cols.iter().any(|c| *c >= n) {
                return Err(Violation::at("column index out of range", None, Some(row)));
            }
            if m.row(row).any(|(_, v)| v.is_zero()) {
                return Err(Violation::at("explicit zero stored", None, Some(row)));
            }
        }
        if let Some(labels) = self.choices.action_labels() {
            if labels.len() != m.row_count() {
                return Err(Violation::at("action label count differs from row count", None, None));
            }
        }
        if self.initial_states.width() != n || self.initial_states.is_empty() {
            return Err(Violation::at("initial state set empty or of wrong width", None, None));
        }
        if self.labeling.state_count() != n {
            return Err(Violation::at("labeling width differs from state count", None, None));
        }
        if matches!(self.kind, ModelKind::Dtmc | ModelKind::Ctmc) && !self.choices.is_identity() {
            return Err(Violation::at("deterministic model with several rows per state", None, None));
        }
        for state in 0..n {
            let rows = self.rows(state);
            if rows.is_empty() {
                return Err(Violation::at("state owns no row", Some(state), None));
            }
            let markovian = self.is_markovian(state);
            if markovian && self.kind == ModelKind::Ma && rows.len() != 1 {
                return Err(Violation::at("Markovian state with several rows", Some(state), None));
            }
            for row in rows {
                for (_, v) in m.row(row) {
                    if v.sign() == Some(Ordering::Less) {
                        let what = if markovian { "negative rate" } else { "negative probability" };
                        return Err(Violation::at(what, Some(state), Some(row)));
                    }
                    if !markovian && (v.clone() - N::one()).sign() == Some(Ordering::Greater) {
                        return Err(Violation::at("probability above 1", Some(state), Some(row)));
                    }
                }
                let sum = m.row_sum(row);
                if markovian {
                    if let Some(rates) = &self.exit_rates {
                        if !rates[state].stochastic_eq(&sum) {
                            return Err(Violation::at(
                                format!("exit rate {} differs from row sum {}", rates[state], sum),
                                Some(state),
                                Some(row),
                            ));
                        }
                    }
                } else if !sum.stochastic_eq(&N::one()) {
                    return Err(Violation::at(
                        format!("row sum ≠ 1 at state {state} (sum {sum})"),
                        Some(state),
                        Some(row),
                    ));
                }
            }
        }
        if let Some(rates) = &self.exit_rates {
            if rates.len() != n {
                return Err(Violation::at("exit rate vector has wrong length", None, None));
            }
        }
        for (name, reward) in &self.rewards {
            let check = |values: &Option<Vec<N>>, len: usize, what: &str| -> Result<(), Violation> {
                if let Some(v) = values {
                    if v.len() != len {
                        return Err(Violation::at(
                            format!("{what} rewards of `{name}` have wrong length"),
                            None,
                            None,
                        ));
                    }
                    if let Some(i) = v.iter().position(|x| x.sign() == Some(Ordering::Less)) {
                        return Err(Violation::at(
                            format!("negative {what} reward in `{name}`"),
                            None,
                            Some(i),
                        ));
                    }
                }
                Ok(())
            };
            check(&reward.state_rewards, n, "state")?;
            check(&reward.action_rewards, m.row_count(), "action")?;
        }
        Ok(())
    }

    /// Embedded jump chain of a CTMC. Absorbing states get a probability-one
    /// self-loop. Reward structures are carried over unscaled.
    pub fn embedded_dtmc(&self) -> Result<Model<N>, ModelError> {
        if self.kind != ModelKind::Ctmc {
            return Err(ModelError::WrongKind {
                expected: ModelKind::Ctmc,
                found: self.kind,
            });
        }
        let rows = (0..self.state_count())
            .map(|s| normalized_row(&self.transitions, s, s))
            .collect();
        let transitions = SparseMatrix::from_rows(self.state_count(), rows);
        Ok(Model {
            kind: ModelKind::Dtmc,
            transitions,
            choices: ChoiceStructure::identity(self.state_count()),
            exit_rates: None,
            markovian_states: None,
            labeling: self.labeling.clone(),
            rewards: self.rewards.clone(),
            initial_states: self.initial_states.clone(),
            valuations: self.valuations.clone(),
        })
    }

    /// Untimed view of a Markov automaton: Markovian states keep a single
    /// choice holding their embedded distribution.
    pub fn induced_untimed_mdp(&self) -> Result<Model<N>, ModelError> {
        if self.kind != ModelKind::Ma {
            return Err(ModelError::WrongKind {
                expected: ModelKind::Ma,
                found: self.kind,
            });
        }
        let rows = (0..self.row_count())
            .map(|row| {
                let owner = self.owner_of_row(row);
                if self.is_markovian(owner) {
                    normalized_row(&self.transitions, row, owner)
                } else {
                    self.transitions.row_entries(row)
                }
            })
            .collect();
        Ok(Model {
            kind: ModelKind::Mdp,
            transitions: SparseMatrix::from_rows(self.state_count(), rows),
            choices: self.choices.clone(),
            exit_rates: None,
            markovian_states: None,
            labeling: self.labeling.clone(),
            rewards: self.rewards.clone(),
            initial_states: self.initial_states.clone(),
            valuations: self.valuations.clone(),
        })
    }

    fn owner_of_row(&self, row: usize) -> usize {
        let offsets = self.choices.state_offsets();
        offsets.partition_point(|o| *o <= row) - 1
    }

    /// Converts every number in the model into another domain.
    pub fn convert<M: Field>(&self, f: impl Fn(&N) -> M) -> Model<M> {
        Model {
            kind: self.kind,
            transitions: self.transitions.map_values(&f),
            choices: self.choices.clone(),
            exit_rates: self.exit_rates.as_ref().map(|r| r.iter().map(&f).collect()),
            markovian_states: self.markovian_states.clone(),
            labeling: self.labeling.clone(),
            rewards: self
                .rewards
                .iter()
                .map(|(k, v)| (k.clone(), v.map(&f)))
                .collect(),
            initial_states: self.initial_states.clone(),
            valuations: self.valuations.clone(),
        }
    }

    /// The deterministic or nondeterministic discrete-time model used for
    /// untimed analysis: embedded chain for CTMCs, induced MDP for MAs.
    pub fn untimed(&self) -> Model<N> {
        match self.kind {
            ModelKind::Ctmc => self.embedded_dtmc().expect("kind checked"),
            ModelKind::Ma => self.induced_untimed_mdp().expect("kind checked"),
            _ => self.clone(),
        }
    }
}

impl<N: OrderedField> Model<N> {
    pub fn max_exit_rate(&self) -> N {
        self.exit_rates
            .as_ref()
            .map(|rates| rates.iter().cloned().fold(N::zero(), N::max_of))
            .unwrap_or_else(N::zero)
    }

    /// Uniformized DTMC: `P = I + R/Λ − diag(E)/Λ`.
    pub fn uniformize(&self, rate: &N) -> Result<Model<N>, ModelError> {
        if self.kind != ModelKind::Ctmc {
            return Err(ModelError::WrongKind {
                expected: ModelKind::Ctmc,
                found: self.kind,
            });
        }
        let max_rate = self.max_exit_rate();
        if rate.total_cmp(&max_rate) == Ordering::Less || rate.is_zero() && !max_rate.is_zero() {
            return Err(ModelError::RateTooSmall {
                max_rate: max_rate.to_string(),
            });
        }
        let exit = self.exit_rates.as_ref().expect("CTMC has exit rates");
        let rows = (0..self.state_count())
            .map(|s| {
                if rate.is_zero() {
                    return vec![(s, N::one())];
                }
                let mut row: Vec<(usize, N)> = self
                    .transitions
                    .row(s)
                    .map(|(c, v)| (c, v.clone() / rate.clone()))
                    .collect();
                row.push((s, N::one() - exit[s].clone() / rate.clone()));
                row
            })
            .collect();
        Ok(Model {
            kind: ModelKind::Dtmc,
            transitions: SparseMatrix::from_rows(self.state_count(), rows),
            choices: ChoiceStructure::identity(self.state_count()),
            exit_rates: None,
            markovian_states: None,
            labeling: self.labeling.clone(),
            rewards: self.rewards.clone(),
            initial_states: self.initial_states.clone(),
            valuations: self.valuations.clone(),
        })
    }
}

fn normalized_row<N: Field>(matrix: &SparseMatrix<N>, row: usize, owner: usize) -> Vec<(usize, N)> {
    let sum = matrix.row_sum(row);
    if sum.is_zero() {
        vec![(owner, N::one())]
    } else {
        matrix
            .row(row)
            .map(|(c, v)| (c, v.clone() / sum.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{rational, Rational};

    fn labeling(n: usize) -> Labeling {
        Labeling::new(n)
    }

    fn ctmc(n: usize, entries: Vec<(usize, usize, Rational)>) -> Model<Rational> {
        let m = SparseMatrix::from_triplets(n, n, entries).unwrap();
        Model::deterministic(ModelKind::Ctmc, m, labeling(n), StateSet::from_indices(n, [0]))
    }

    fn dtmc(n: usize, entries: Vec<(usize, usize, f64)>) -> Model<f64> {
        let m = SparseMatrix::from_triplets(n, n, entries).unwrap();
        Model::deterministic(ModelKind::Dtmc, m, labeling(n), StateSet::from_indices(n, [0]))
    }

    #[test]
    fn valid_two_state_chain() {
        let m = dtmc(2, vec![(0, 1, 1.0), (1, 1, 1.0)]);
        assert_eq!(m.validate(), Ok(()));
    }

    #[test]
    fn substochastic_row_reported() {
        let m = dtmc(2, vec![(0, 1, 0.9), (1, 1, 1.0)]);
        let v = m.validate().unwrap_err();
        assert!(v.message.contains("row sum ≠ 1 at state 0"), "{v}");
        assert_eq!(v.state, Some(0));
        assert_eq!(v.row, Some(0));
    }

    #[test]
    fn negative_rate_reported() {
        let mut m = ctmc(2, vec![(0, 1, rational(1, 1)), (1, 0, rational(1, 1))]);
        m.transitions = SparseMatrix::from_triplets(2, 2, vec![(0, 1, rational(-1, 1)), (1, 0, rational(1, 1))])
            .unwrap();
        m.exit_rates = Some(vec![rational(-1, 1), rational(1, 1)]);
        let v = m.validate().unwrap_err();
        assert!(v.message.contains("negative rate"), "{v}");
    }

    #[test]
    fn stateless_choice_reported() {
        let m = SparseMatrix::from_triplets(1, 2, vec![(0, 1, 1.0)]).unwrap();
        let choices = ChoiceStructure::from_counts(&[1, 0], None);
        let model = Model::nondeterministic(m, choices, labeling(2), StateSet::from_indices(2, [0]));
        assert!(model.validate().unwrap_err().message.contains("no row"));
    }

    #[test]
    fn embedded_chain_normalizes_rates() {
        let c = ctmc(3, vec![(0, 1, rational(1, 1)), (0, 2, rational(3, 1)), (1, 2, rational(2, 1))]);
        let d = c.embedded_dtmc().unwrap();
        assert_eq!(d.transitions.get(0, 1), Some(&rational(1, 4)));
        assert_eq!(d.transitions.get(0, 2), Some(&rational(3, 4)));
        assert_eq!(d.transitions.get(1, 2), Some(&rational(1, 1)));
        assert_eq!(d.transitions.get(2, 2), Some(&rational(1, 1)));
        assert_eq!(d.validate(), Ok(()));
    }

    #[test]
    fn embedded_chain_of_dtmc_is_an_error() {
        let d = dtmc(1, vec![(0, 0, 1.0)]);
        assert!(matches!(d.embedded_dtmc(), Err(ModelError::WrongKind { .. })));
    }

    #[test]
    fn uniformization_examples() {
        let c = ctmc(2, vec![(0, 1, rational(1, 1))]);
        let u = c.uniformize(&rational(1, 1)).unwrap();
        assert_eq!(u.transitions.row_entries(0), vec![(1, rational(1, 1))]);
        assert_eq!(u.transitions.row_entries(1), vec![(1, rational(1, 1))]);
        let u = c.uniformize(&rational(2, 1)).unwrap();
        assert_eq!(
            u.transitions.row_entries(0),
            vec![(0, rational(1, 2)), (1, rational(1, 2))]
        );
        assert!(matches!(
            c.uniformize(&rational(1, 2)),
            Err(ModelError::RateTooSmall { .. })
        ));
    }

    #[test]
    fn uniformized_rows_sum_to_one_exactly() {
        let c = ctmc(
            3,
            vec![
                (0, 1, rational(3, 7)),
                (0, 2, rational(5, 3)),
                (1, 0, rational(2, 1)),
                (1, 1, rational(1, 9)),
            ],
        );
        for lambda in [c.max_exit_rate(), rational(7, 2), rational(10, 1)] {
            let u = c.uniformize(&lambda).unwrap();
            for s in 0..3 {
                assert_eq!(u.transitions.row_sum(s), rational(1, 1));
            }
            assert_eq!(u.validate(), Ok(()));
        }
    }

    #[test]
    fn max_rate_state_has_no_self_loop_after_uniformization() {
        let c = ctmc(3, vec![(0, 1, rational(2, 1)), (0, 2, rational(1, 1)), (1, 2, rational(1, 1))]);
        let u = c.uniformize(&c.max_exit_rate()).unwrap();
        assert_eq!(u.transitions.get(0, 0), None);
        assert_eq!(u.transitions.get(1, 1), Some(&rational(2, 3)));
    }

    fn mixed_ma() -> Model<Rational> {
        // s0: probabilistic, two choices; s1: Markovian rates 1 -> s0, 3 -> s2; s2: Markovian absorbing
        let m = SparseMatrix::from_triplets(
            4,
            3,
            vec![
                (0, 1, rational(1, 1)),
                (1, 2, rational(1, 1)),
                (2, 0, rational(1, 1)),
                (2, 2, rational(3, 1)),
            ],
        )
        .unwrap();
        let choices = ChoiceStructure::from_counts(&[2, 1, 1], None);
        Model::markov_automaton(
            m,
            choices,
            StateSet::from_indices(3, [1, 2]),
            labeling(3),
            StateSet::from_indices(3, [0]),
        )
    }

    #[test]
    fn induced_mdp_of_mixed_ma() {
        let ma = mixed_ma();
        assert_eq!(ma.validate(), Ok(()));
        let mdp = ma.induced_untimed_mdp().unwrap();
        assert_eq!(mdp.kind, ModelKind::Mdp);
        assert_eq!(mdp.state_count(), 3);
        assert_eq!(mdp.transitions.row_entries(0), vec![(1, rational(1, 1))]);
        assert_eq!(mdp.transitions.row_entries(1), vec![(2, rational(1, 1))]);
        assert_eq!(
            mdp.transitions.row_entries(2),
            vec![(0, rational(1, 4)), (2, rational(3, 4))]
        );
        assert_eq!(mdp.transitions.row_entries(3), vec![(2, rational(1, 1))]);
        assert_eq!(mdp.validate(), Ok(()));
    }

    #[test]
    fn purely_markovian_ma_matches_embedded_chain() {
        let rates = SparseMatrix::from_triplets(
            2,
            2,
            vec![(0, 1, rational(2, 1)), (0, 0, rational(2, 1)), (1, 0, rational(5, 1))],
        )
        .unwrap();
        let ma = Model::markov_automaton(
            rates.clone(),
            ChoiceStructure::identity(2),
            StateSet::full(2),
            labeling(2),
            StateSet::from_indices(2, [0]),
        );
        let c = Model::deterministic(ModelKind::Ctmc, rates, labeling(2), StateSet::from_indices(2, [0]));
        let mdp = ma.induced_untimed_mdp().unwrap();
        let emb = c.embedded_dtmc().unwrap();
        assert_eq!(mdp.transitions, emb.transitions);
    }

    #[test]
    fn purely_probabilistic_ma_is_unchanged() {
        let m = SparseMatrix::from_triplets(
            3,
            2,
            vec![(0, 1, rational(1, 2)), (0, 0, rational(1, 2)), (1, 1, rational(1, 1)), (2, 1, rational(1, 1))],
        )
        .unwrap();
        let choices = ChoiceStructure::from_counts(&[2, 1], None);
        let ma = Model::markov_automaton(
            m.clone(),
            choices,
            StateSet::empty(2),
            labeling(2),
            StateSet::from_indices(2, [0]),
        );
        assert_eq!(ma.induced_untimed_mdp().unwrap().transitions, m);
    }

    #[test]
    fn state_set_algebra() {
        let a = StateSet::from_indices(5, [0, 2, 4]);
        let b = StateSet::from_indices(5, [2, 3]);
        assert_eq!(a.union(&b).iter().collect::<Vec<_>>(), vec![0, 2, 3, 4]);
        assert_eq!(a.intersection(&b).iter().collect::<Vec<_>>(), vec![2]);
        assert_eq!(a.difference(&b).len(), 2);
        assert_eq!(a.complement().iter().collect::<Vec<_>>(), vec![1, 3]);
        assert!(StateSet::from_indices(5, [2]).is_subset(&a));
    }
}
