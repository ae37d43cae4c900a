//! Qualitative graph analysis: zero/one probability sets, strongly connected
//! components and maximal end components.

use std::collections::VecDeque;

use crate::model::{Model, StateSet};
use crate::number::Field;
use crate::property::Direction;
use crate::sparse::{BackwardEdges, SparseMatrix};

/// Transition structure with rows grouped by owning state.
pub struct Graph<'a, N> {
    pub matrix: &'a SparseMatrix<N>,
    /// `offsets[s]..offsets[s + 1]` are the rows of state `s`.
    pub offsets: &'a [usize],
    owners: Vec<usize>,
    backward: BackwardEdges,
}

impl<'a, N: Field> Graph<'a, N> {
    pub fn new(matrix: &'a SparseMatrix<N>, offsets: &'a [usize]) -> Self {
        let mut owners = vec![0; matrix.row_count()];
        for s in 0..offsets.len() - 1 {
            for owner in &mut owners[offsets[s]..offsets[s + 1]] {
                *owner = s;
            }
        }
        Graph {
            matrix,
            offsets,
            owners,
            backward: matrix.backward_edges(),
        }
    }

    pub fn of_model(model: &'a Model<N>) -> Self {
        Graph::new(&model.transitions, model.choices.state_offsets())
    }

    pub fn state_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn rows(&self, state: usize) -> std::ops::Range<usize> {
        self.offsets[state]..self.offsets[state + 1]
    }

    pub fn owner(&self, row: usize) -> usize {
        self.owners[row]
    }

    /// Rows with an edge into `state`.
    pub fn rows_into(&self, state: usize) -> &[usize] {
        self.backward.sources(state)
    }

    fn successors(&self, row: usize) -> &[usize] {
        self.matrix.row_columns(row)
    }

    /// States reaching `targets` through states of `through`, where a state
    /// joins as soon as one of its rows leads into the set.
    pub fn backward_reach(&self, targets: &StateSet, through: &StateSet) -> StateSet {
        let mut reached = targets.clone();
        let mut queue: VecDeque<usize> = targets.iter().collect();
        while let Some(t) = queue.pop_front() {
            for &row in self.rows_into(t) {
                let s = self.owner(row);
                if !reached.contains(s) && through.contains(s) {
                    reached.insert(s);
                    queue.push_back(s);
                }
            }
        }
        reached
    }

    /// Least fixpoint of `targets ∪ {s ∈ through : every row of s leads into the set}`.
    pub fn forced_reach(&self, targets: &StateSet, through: &StateSet) -> StateSet {
        let n = self.state_count();
        let mut reached = targets.clone();
        let mut row_hit = vec![false; self.matrix.row_count()];
        let mut remaining: Vec<usize> = (0..n).map(|s| self.rows(s).len()).collect();
        let mut queue: VecDeque<usize> = targets.iter().collect();
        while let Some(t) = queue.pop_front() {
            for &row in self.rows_into(t) {
                if row_hit[row] {
                    continue;
                }
                row_hit[row] = true;
                let s = self.owner(row);
                remaining[s] -= 1;
                if remaining[s] == 0 && !reached.contains(s) && through.contains(s) {
                    reached.insert(s);
                    queue.push_back(s);
                }
            }
        }
        reached
    }
}

/// States with probability zero and one of satisfying `φ1 U φ2` in a
/// deterministic model.
pub fn prob01_deterministic<N: Field>(graph: &Graph<N>, phi1: &StateSet, phi2: &StateSet) -> (StateSet, StateSet) {
    let positive = graph.backward_reach(phi2, phi1);
    let prob0 = positive.complement();
    let undecided = phi1.difference(phi2);
    let prob1 = graph.backward_reach(&prob0, &undecided).complement();
    (prob0, prob1)
}

/// Direction-specific zero and one sets of `φ1 U φ2` in a nondeterministic
/// model: `(P0max, P1max)` or `(P0min, P1min)`.
pub fn prob01_nondeterministic<N: Field>(
    graph: &Graph<N>,
    phi1: &StateSet,
    phi2: &StateSet,
    direction: Direction,
) -> (StateSet, StateSet) {
    match direction {
        Direction::Max => (prob0_all(graph, phi1, phi2), prob1_exists(graph, phi1, phi2)),
        Direction::Min => {
            let p0 = prob0_exists(graph, phi1, phi2);
            let p1 = prob1_all(graph, phi1, phi2, &p0);
            (p0, p1)
        }
    }
}

/// States where every scheduler has probability zero.
pub fn prob0_all<N: Field>(graph: &Graph<N>, phi1: &StateSet, phi2: &StateSet) -> StateSet {
    graph.backward_reach(phi2, phi1).complement()
}

/// States where some scheduler has probability zero.
pub fn prob0_exists<N: Field>(graph: &Graph<N>, phi1: &StateSet, phi2: &StateSet) -> StateSet {
    graph.forced_reach(phi2, &phi1.difference(phi2)).complement()
}

/// States where every scheduler has probability one; `prob0_exists` is the
/// result of [`prob0_exists`].
pub fn prob1_all<N: Field>(graph: &Graph<N>, phi1: &StateSet, phi2: &StateSet, prob0_exists: &StateSet) -> StateSet {
    graph
        .backward_reach(prob0_exists, &phi1.difference(phi2))
        .complement()
}

/// States where some scheduler has probability one.
pub fn prob1_exists<N: Field>(graph: &Graph<N>, phi1: &StateSet, phi2: &StateSet) -> StateSet {
    let n = graph.state_count();
    let mut u = StateSet::full(n);
    loop {
        // least fixpoint of states with a row staying in u and moving towards r
        let mut r = phi2.intersection(&u);
        let mut changed = true;
        while changed {
            changed = false;
            for s in 0..n {
                if r.contains(s) || !u.contains(s) || !phi1.contains(s) {
                    continue;
                }
                let good = graph.rows(s).any(|row| {
                    let succ = graph.successors(row);
                    succ.iter().all(|&t| u.contains(t)) && succ.iter().any(|&t| r.contains(t))
                });
                if good {
                    r.insert(s);
                    changed = true;
                }
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// Strongly connected components of the subgraph induced by `states` and the
/// rows for which `allowed` holds; components are listed in reverse
/// topological order.
pub fn sccs<N: Field>(graph: &Graph<N>, states: &StateSet, allowed: &dyn Fn(usize) -> bool) -> Vec<Vec<usize>> {
    let n = graph.state_count();
    const UNSEEN: usize = usize::MAX;
    let mut index = vec![UNSEEN; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    let mut counter = 0usize;
    let successors = |s: usize| -> Vec<usize> {
        let mut v: Vec<usize> = graph
            .rows(s)
            .filter(|&r| allowed(r))
            .flat_map(|r| graph.successors(r).iter().copied())
            .filter(|&t| states.contains(t))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    for root in states.iter() {
        if index[root] != UNSEEN {
            continue;
        }
        let mut call: Vec<(usize, Vec<usize>, usize)> = vec![(root, successors(root), 0)];
        index[root] = counter;
        low[root] = counter;
        counter += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some((v, succ, pos)) = call.last_mut() {
            let v = *v;
            if *pos < succ.len() {
                let w = succ[*pos];
                *pos += 1;
                if index[w] == UNSEEN {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    let sw = successors(w);
                    call.push((w, sw, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some((parent, _, _)) = call.last() {
                    low[*parent] = low[*parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut component = Vec::new();
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        component.push(w);
                        if w == v {
                            break;
                        }
                    }
                    component.sort_unstable();
                    out.push(component);
                }
            }
        }
    }
    out
}

/// A maximal end component: its states and the rows that stay inside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndComponent {
    pub states: Vec<usize>,
    pub rows: Vec<usize>,
}

/// Maximal end components within `states`, using only rows for which
/// `allowed` holds. Sorted by smallest state.
pub fn mec_decomposition<N: Field>(
    graph: &Graph<N>,
    states: &StateSet,
    allowed: &dyn Fn(usize) -> bool,
) -> Vec<EndComponent> {
    let n = graph.state_count();
    let mut component_of = vec![usize::MAX; n];
    let mut row_ok: Vec<bool> = (0..graph.matrix.row_count()).map(allowed).collect();
    let mut candidates = states.clone();
    loop {
        let components = sccs(graph, &candidates, &|r| row_ok[r]);
        for (i, c) in components.iter().enumerate() {
            for &s in c {
                component_of[s] = i;
            }
        }
        let mut changed = false;
        for s in candidates.iter().collect::<Vec<_>>() {
            for r in graph.rows(s) {
                if row_ok[r]
                    && graph
                        .successors(r)
                        .iter()
                        .any(|&t| !candidates.contains(t) || component_of[t] != component_of[s])
                {
                    row_ok[r] = false;
                    changed = true;
                }
            }
        }
        for s in candidates.iter().collect::<Vec<_>>() {
            if !graph.rows(s).any(|r| row_ok[r]) {
                candidates.remove(s);
                changed = true;
            }
        }
        if !changed {
            let mut out: Vec<EndComponent> = components
                .into_iter()
                .filter(|c| c.iter().all(|&s| candidates.contains(s)))
                .map(|c| {
                    let rows = c.iter().flat_map(|&s| graph.rows(s)).filter(|&r| row_ok[r]).collect();
                    EndComponent { states: c, rows }
                })
                .collect();
            out.sort_by_key(|c| c.states[0]);
            return out;
        }
    }
}

/// For every state of `within` outside `target`, the lowest row among
/// `allowed` rows that keeps inside `within ∪ target` and moves strictly
/// closer to `target` in the layered attractor. States that cannot be
/// attracted get `None`.
pub fn attractor_rows<N: Field>(
    graph: &Graph<N>,
    target: &StateSet,
    within: &StateSet,
    allowed: &dyn Fn(usize) -> bool,
) -> Vec<Option<usize>> {
    let n = graph.state_count();
    let mut choice = vec![None; n];
    let mut attracted = target.clone();
    let mut frontier: Vec<usize> = target.iter().collect();
    while !frontier.is_empty() {
        let mut candidates: Vec<usize> = frontier
            .iter()
            .flat_map(|&t| graph.rows_into(t).iter().map(|&r| graph.owner(r)))
            .filter(|&s| within.contains(s) && !attracted.contains(s))
            .collect();
        candidates.sort_unstable();
        candidates.dedup();
        let mut next = Vec::new();
        for s in candidates {
            let row = graph.rows(s).find(|&r| {
                allowed(r)
                    && graph.successors(r).iter().all(|&t| within.contains(t) || target.contains(t))
                    && graph.successors(r).iter().any(|&t| attracted.contains(t))
            });
            if let Some(r) = row {
                choice[s] = Some(r);
                next.push(s);
            }
        }
        for &s in &next {
            attracted.insert(s);
        }
        frontier = next;
    }
    choice
}
