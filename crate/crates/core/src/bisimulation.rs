//! Strong bisimulation minimization by signature refinement.

use std::collections::BTreeMap;

use crate::checker::{check, state_set, CheckError, CheckNumber, CheckResult, CheckSettings};
use crate::model::{ChoiceStructure, Labeling, Model, ModelKind, RewardModel, StateSet};
use crate::number::Field;
use crate::prism::Expr;
use crate::property::Property;
use crate::sparse::SparseMatrix;

/// Assignment of states to blocks. Block ids are dense and numbered in order
/// of their smallest state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub block_of: Vec<usize>,
    pub block_count: usize,
    /// Reward structures whose action rewards enter choice signatures.
    pub rewards: Vec<String>,
}

impl Partition {
    /// Blocks from arbitrary keys, numbered by first appearance.
    fn from_keys<K: Ord>(keys: impl IntoIterator<Item = K>, rewards: Vec<String>) -> Partition {
        let mut ids = BTreeMap::new();
        let block_of: Vec<usize> = keys
            .into_iter()
            .map(|k| {
                let next = ids.len();
                *ids.entry(k).or_insert(next)
            })
            .collect();
        Partition {
            block_count: ids.len(),
            block_of,
            rewards,
        }
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut blocks = vec![Vec::new(); self.block_count];
        for (s, &b) in self.block_of.iter().enumerate() {
            blocks[b].push(s);
        }
        blocks
    }
}

/// Groups states by their membership in the given state sets, their state
/// rewards under `rewards`, and (for Markov automata) whether they are
/// Markovian.
pub fn initial_partition<N: Field>(model: &Model<N>, relevant: &[StateSet], rewards: &[&str]) -> Partition {
    let keys = (0..model.state_count()).map(|s| {
        let labels: Vec<bool> = relevant.iter().map(|set| set.contains(s)).collect();
        let values: Vec<String> = rewards
            .iter()
            .map(|name| match model.rewards.get(*name).and_then(|r| r.state_rewards.as_ref()) {
                Some(v) => v[s].to_string(),
                None => String::new(),
            })
            .collect();
        (labels, values, model.is_markovian(s))
    });
    Partition::from_keys(keys, rewards.iter().map(|r| r.to_string()).collect())
}

type ChoiceSignature = (String, Vec<String>, Vec<(usize, String)>);

fn choice_signature<N: Field>(model: &Model<N>, partition: &Partition, row: usize) -> ChoiceSignature {
    let mut mass: BTreeMap<usize, N> = BTreeMap::new();
    for (t, v) in model.transitions.row(row) {
        let e = mass.entry(partition.block_of[t]).or_insert_with(N::zero);
        *e = e.clone() + v.clone();
    }
    let action = if model.is_nondeterministic() {
        model.choices.action_label(row).to_string()
    } else {
        String::new()
    };
    let rewards = partition
        .rewards
        .iter()
        .map(|name| match model.rewards.get(name).and_then(|r| r.action_rewards.as_ref()) {
            Some(v) => v[row].to_string(),
            None => String::new(),
        })
        .collect();
    (
        action,
        rewards,
        mass.into_iter()
            .filter(|(_, v)| !v.is_zero())
            .map(|(b, v)| (b, v.to_string()))
            .collect(),
    )
}

/// Signature of a state: its block together with the set of its choices'
/// block distributions.
pub fn signature<N: Field>(model: &Model<N>, partition: &Partition, state: usize) -> (usize, Vec<ChoiceSignature>) {
    let mut choices: Vec<ChoiceSignature> = model
        .rows(state)
        .map(|r| choice_signature(model, partition, r))
        .collect();
    choices.sort();
    choices.dedup();
    (partition.block_of[state], choices)
}

/// Refines `partition` to the coarsest strong bisimulation it contains.
pub fn refine<N: Field>(model: &Model<N>, partition: &Partition) -> Partition {
    let mut current = partition.clone();
    loop {
        let signatures: Vec<_> = (0..model.state_count())
            .map(|s| signature(model, &current, s))
            .collect();
        let next = Partition::from_keys(signatures, current.rewards.clone());
        if next.block_count == current.block_count {
            return next;
        }
        current = next;
    }
}

/// One state per block. Transitions, rewards and labels come from the
/// block's smallest member; only labels shared by all members are kept.
pub fn quotient<N: Field>(model: &Model<N>, partition: &Partition) -> Model<N> {
    let blocks = partition.members();
    let k = partition.block_count;
    let mut rows = Vec::new();
    let mut counts = Vec::with_capacity(k);
    let mut actions = Vec::new();
    let mut origin = Vec::new();
    for members in &blocks {
        let rep = members[0];
        let mut seen = Vec::new();
        for r in model.rows(rep) {
            let sig = choice_signature(model, partition, r);
            if seen.contains(&sig) {
                continue;
            }
            seen.push(sig);
            let mut mass: BTreeMap<usize, N> = BTreeMap::new();
            for (t, v) in model.transitions.row(r) {
                let e = mass.entry(partition.block_of[t]).or_insert_with(N::zero);
                *e = e.clone() + v.clone();
            }
            rows.push(mass.into_iter().collect::<Vec<_>>());
            actions.push(model.choices.action_label(r).to_string());
            origin.push((rep, r));
        }
        counts.push(seen.len());
    }
    let matrix = SparseMatrix::from_rows(k, rows);
    let mut labeling = Labeling::new(k);
    for (name, set) in model.labeling.iter() {
        let lifted = StateSet::from_fn(k, |b| blocks[b].iter().all(|&s| set.contains(s)));
        let uniform = (0..k).all(|b| blocks[b].iter().all(|&s| set.contains(s) == lifted.contains(b)));
        if uniform {
            labeling.add(name, lifted);
        }
    }
    let initial = StateSet::from_fn(k, |b| blocks[b].iter().any(|&s| model.initial_states.contains(s)));
    let labels = model.choices.action_labels().map(|_| actions);
    let mut out = match model.kind {
        ModelKind::Dtmc | ModelKind::Ctmc => Model::deterministic(model.kind, matrix, labeling, initial),
        ModelKind::Mdp => Model::nondeterministic(matrix, ChoiceStructure::from_counts(&counts, labels), labeling, initial),
        ModelKind::Ma => {
            let markovian = StateSet::from_fn(k, |b| model.is_markovian(blocks[b][0]));
            Model::markov_automaton(matrix, ChoiceStructure::from_counts(&counts, labels), markovian, labeling, initial)
        }
    };
    for name in &partition.rewards {
        let Some(reward) = model.rewards.get(name) else { continue };
        out = out.with_reward(
            name.clone(),
            RewardModel {
                state_rewards: reward
                    .state_rewards
                    .as_ref()
                    .map(|v| blocks.iter().map(|m| v[m[0]].clone()).collect()),
                action_rewards: reward
                    .action_rewards
                    .as_ref()
                    .map(|v| origin.iter().map(|&(_, r)| v[r].clone()).collect()),
            },
        );
    }
    out
}

/// Name of the label standing for the `i`-th state formula of a property in
/// a quotient built by [`minimize_for`].
pub fn formula_label(i: usize) -> String {
    format!("bisim_formula_{i}")
}

/// A quotient together with the property rewritten for it.
#[derive(Debug, Clone)]
pub struct Minimized<N> {
    pub model: Model<N>,
    pub property: Property,
    pub partition: Partition,
}

/// Quotient of `model` preserving `property`. The returned property refers
/// to the quotient's state formulas through fresh labels.
pub fn minimize_for<N: Field>(model: &Model<N>, property: &Property) -> Result<Minimized<N>, CheckError> {
    let formulas: Vec<Expr> = property.state_formulas().into_iter().cloned().collect();
    let sets = formulas
        .iter()
        .map(|e| state_set(model, e))
        .collect::<Result<Vec<_>, _>>()?;
    let rewards: Vec<&str> = match &property.operator {
        crate::property::Operator::Reward(Some(name)) => vec![name.as_str()],
        crate::property::Operator::Reward(None) => model.rewards.keys().map(String::as_str).collect(),
        crate::property::Operator::Probability => Vec::new(),
    };
    let partition = refine(model, &initial_partition(model, &sets, &rewards));
    let mut reduced = quotient(model, &partition);
    let blocks = partition.members();
    for (i, set) in sets.iter().enumerate() {
        let lifted = StateSet::from_fn(partition.block_count, |b| set.contains(blocks[b][0]));
        reduced.labeling.add(formula_label(i), lifted);
    }
    let mut index = 0;
    let relabeled = property.map_state_formulas(|_| {
        let e = Expr::Label(formula_label(index));
        index += 1;
        e
    });
    Ok(Minimized {
        model: reduced,
        property: relabeled,
        partition,
    })
}

/// Checks `property` on the bisimulation quotient and reports values for
/// the states of the original model. Schedulers of the quotient are not
/// carried over.
pub fn check_minimized<N: CheckNumber>(
    model: &Model<N>,
    property: &Property,
    settings: &CheckSettings,
) -> Result<CheckResult<N>, CheckError> {
    let minimized = minimize_for(model, property)?;
    let reduced = check(&minimized.model, &minimized.property, settings)?;
    let block_of = &minimized.partition.block_of;
    Ok(CheckResult {
        values: block_of.iter().map(|&b| reduced.values[b].clone()).collect(),
        truth: reduced.truth.map(|t| block_of.iter().map(|&b| t[b]).collect()),
        initial_states: model.initial_states.iter().collect(),
        scheduler: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{rational, Rational};

    fn dtmc(n: usize, rows: Vec<Vec<(usize, Rational)>>, target: &[usize]) -> Model<Rational> {
        let mut labels = Labeling::new(n);
        labels.add("t", StateSet::from_indices(n, target.iter().copied()));
        Model::deterministic(ModelKind::Dtmc, SparseMatrix::from_rows(n, rows), labels, StateSet::from_indices(n, [0]))
    }

    fn symmetric() -> Model<Rational> {
        // 0 splits evenly to 1 and 2, both of which move to the target 3
        dtmc(
            4,
            vec![
                vec![(1, rational(1, 2)), (2, rational(1, 2))],
                vec![(3, rational(1, 1))],
                vec![(3, rational(1, 1))],
                vec![(3, rational(1, 1))],
            ],
            &[3],
        )
    }

    #[test]
    fn initial_partitions() {
        let m = symmetric();
        assert_eq!(initial_partition(&m, &[], &[]).block_count, 1);
        let t = m.label("t").unwrap();
        assert_eq!(initial_partition(&m, &[t], &[]).block_count, 2);
        let m = m.with_reward("r", RewardModel::state_only(vec![rational(0, 1), rational(1, 1), rational(0, 1), rational(0, 1)]));
        assert_eq!(initial_partition(&m, &[], &["r"]).block_count, 2);
    }

    #[test]
    fn symmetric_branches_merge() {
        let m = symmetric();
        let p = refine(&m, &initial_partition(&m, &[m.label("t").unwrap()], &[]));
        assert_eq!(p.block_of, vec![0, 1, 1, 2]);
        let q = quotient(&m, &p);
        assert_eq!(q.state_count(), 3);
        assert_eq!(q.transitions.get(0, 1), Some(&rational(1, 1)));
        assert!(q.label("t").unwrap().contains(2));
        assert!(q.initial_states.contains(0));
        assert_eq!(refine(&m, &p), p);
    }

    #[test]
    fn single_block_chain() {
        let m = dtmc(2, vec![vec![(1, rational(1, 1))], vec![(0, rational(1, 1))]], &[0, 1]);
        let p = refine(&m, &initial_partition(&m, &[m.label("t").unwrap()], &[]));
        let q = quotient(&m, &p);
        assert_eq!(q.state_count(), 1);
        assert_eq!(q.transitions.get(0, 0), Some(&rational(1, 1)));
    }

    #[test]
    fn minimal_chain_is_unchanged() {
        let m = dtmc(
            3,
            vec![vec![(1, rational(1, 1))], vec![(2, rational(1, 1))], vec![(2, rational(1, 1))]],
            &[2],
        );
        let p = refine(&m, &initial_partition(&m, &[m.label("t").unwrap()], &[]));
        assert_eq!(p.block_count, 3);
    }

    #[test]
    fn action_labels_separate_mdp_states() {
        // states 0 and 1 both loop to 2, but under different actions
        let matrix = SparseMatrix::from_rows(
            3,
            vec![vec![(2, rational(1, 1))], vec![(2, rational(1, 1))], vec![(2, rational(1, 1))]],
        );
        let choices = ChoiceStructure::from_counts(&[1, 1, 1], Some(vec!["a".into(), "b".into(), "".into()]));
        let m = Model::nondeterministic(matrix, choices, Labeling::new(3), StateSet::from_indices(3, [0]));
        let p = refine(&m, &initial_partition(&m, &[], &[]));
        assert_eq!(p.block_count, 3);
    }
}
