//! State elimination over any field.

use std::collections::{BTreeMap, BTreeSet};

use super::{LinearSystem, SolverError, SolverOutcome};
use crate::number::Field;

/// Solves `x = A x + b` by eliminating states one at a time: a self-loop
/// `p` is removed by scaling the row with `1 / (1 − p)`, then every
/// predecessor is redirected through the state's outgoing entries.
///
/// States are eliminated in order of smallest `in-degree × out-degree`
/// (self-loops excluded), ties broken by index; states listed in `last` are
/// held back until everything else is gone.
pub fn state_elimination_solve<N: Field>(
    system: &LinearSystem<N>,
    last: &[usize],
) -> Result<SolverOutcome<N>, SolverError> {
    let n = system.size();
    let mut out: Vec<BTreeMap<usize, N>> = (0..n)
        .map(|i| system.a.row(i).filter(|(_, v)| !v.is_zero()).map(|(j, v)| (j, v.clone())).collect())
        .collect();
    let mut preds: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, row) in out.iter().enumerate() {
        for &j in row.keys() {
            if j != i {
                preds[j].insert(i);
            }
        }
    }
    let mut b = system.b.clone();
    let held: BTreeSet<usize> = last.iter().copied().collect();
    let mut eliminated = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let s = (0..n)
            .filter(|&s| !eliminated[s])
            .min_by_key(|&s| {
                let outdeg = out[s].keys().filter(|&&j| j != s).count();
                (held.contains(&s), preds[s].len() * outdeg, s)
            })
            .expect("state left to eliminate");
        if let Some(p) = out[s].remove(&s) {
            let rest = N::one() - p;
            if rest.is_zero() {
                return Err(SolverError::Singular { column: s });
            }
            let scale = N::one() / rest;
            for v in out[s].values_mut() {
                *v = v.clone() * scale.clone();
            }
            b[s] = b[s].clone() * scale;
        }
        let row: Vec<(usize, N)> = out[s].iter().map(|(&j, v)| (j, v.clone())).collect();
        for t in std::mem::take(&mut preds[s]) {
            let weight = out[t].remove(&s).expect("predecessor edge");
            for (u, v) in &row {
                let entry = out[t].entry(*u).or_insert_with(N::zero);
                *entry = entry.clone() + weight.clone() * v.clone();
                if entry.is_zero() {
                    out[t].remove(u);
                    preds[*u].remove(&t);
                } else if *u != t {
                    preds[*u].insert(t);
                }
            }
            b[t] = b[t].clone() + weight * b[s].clone();
        }
        for (u, _) in &row {
            preds[*u].remove(&s);
        }
        eliminated[s] = true;
        order.push(s);
    }
    let mut x = vec![N::zero(); n];
    for &s in order.iter().rev() {
        let mut acc = b[s].clone();
        for (&j, v) in &out[s] {
            acc = acc + v.clone() * x[j].clone();
        }
        x[s] = acc;
    }
    Ok(SolverOutcome::plain(x, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;
    use crate::solver::fixtures::*;
    use crate::solver::gaussian_elimination;

    #[test]
    fn coin_flip_rescales() {
        let out = state_elimination_solve(&coin_flip(), &[]).unwrap();
        assert_eq!(out.values, vec![rational(1, 1)]);
    }

    #[test]
    fn chain() {
        let sys = LinearSystem::new(matrix(2, &[&[(1, 1, 1)], &[]]), vector(&[(0, 1), (1, 1)]));
        assert_eq!(state_elimination_solve(&sys, &[0]).unwrap().values, vector(&[(1, 1), (1, 1)]));
    }

    #[test]
    fn absorbing_loop_is_rejected() {
        let sys = LinearSystem::new(matrix(1, &[&[(0, 1, 1)]]), vector(&[(0, 1)]));
        assert!(state_elimination_solve(&sys, &[]).is_err());
    }

    #[test]
    fn matches_gaussian_on_cyclic_system() {
        let sys = LinearSystem::new(
            matrix(3, &[&[(1, 1, 2), (2, 1, 4)], &[(0, 1, 3), (2, 1, 3)], &[(0, 1, 5), (1, 2, 5)]]),
            vector(&[(1, 4), (1, 6), (1, 5)]),
        );
        for last in [vec![], vec![0], vec![2, 1]] {
            assert_eq!(
                state_elimination_solve(&sys, &last).unwrap().values,
                gaussian_elimination(&sys).unwrap().values
            );
        }
    }
}
