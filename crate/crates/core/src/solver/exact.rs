//! Exact solvers: sparse Gaussian elimination, policy iteration and rational
//! search.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use num_traits::Signed;

use super::{BellmanSystem, IterationSettings, LinearSystem, SolverError, SolverOutcome};
use crate::number::{rational_from_f64, rational_to_f64, Field, OrderedField, Rational};
use crate::sparse::SparseMatrix;

/// Solves `(I − A) x = b` by sparse elimination, pivoting on the diagonal
/// whenever it is nonzero.
pub fn gaussian_elimination<N: Field>(system: &LinearSystem<N>) -> Result<SolverOutcome<N>, SolverError> {
    let n = system.size();
    let mut rows: Vec<BTreeMap<usize, N>> = vec![BTreeMap::new(); n];
    let mut column_rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (i, row) in rows.iter_mut().enumerate() {
        row.insert(i, N::one());
        for (j, v) in system.a.row(i) {
            let entry = row.entry(j).or_insert_with(N::zero);
            *entry = entry.clone() - v.clone();
        }
        row.retain(|_, v| !v.is_zero());
        for &j in row.keys() {
            column_rows[j].insert(i);
        }
    }
    let mut b = system.b.clone();
    let mut used = vec![false; n];
    let mut pivot_row = vec![0usize; n];
    for k in 0..n {
        let p = if column_rows[k].contains(&k) && !used[k] {
            k
        } else {
            *column_rows[k]
                .iter()
                .find(|&&r| !used[r])
                .ok_or(SolverError::Singular { column: k })?
        };
        used[p] = true;
        pivot_row[k] = p;
        let pivot = rows[p][&k].clone();
        let targets: Vec<usize> = column_rows[k].iter().copied().filter(|&r| !used[r]).collect();
        let pivot_entries: Vec<(usize, N)> = rows[p].iter().map(|(&j, v)| (j, v.clone())).collect();
        for i in targets {
            let factor = rows[i][&k].clone() / pivot.clone();
            for (j, v) in &pivot_entries {
                let current = rows[i].get(j).cloned().unwrap_or_else(N::zero);
                let updated = if *j == k { N::zero() } else { current - factor.clone() * v.clone() };
                if updated.is_zero() {
                    rows[i].remove(j);
                    column_rows[*j].remove(&i);
                } else {
                    rows[i].insert(*j, updated);
                    column_rows[*j].insert(i);
                }
            }
            b[i] = b[i].clone() - factor * b[p].clone();
        }
    }
    let mut x = vec![N::zero(); n];
    for k in (0..n).rev() {
        let p = pivot_row[k];
        let mut acc = b[p].clone();
        for (&j, v) in &rows[p] {
            if j != k {
                acc = acc - v.clone() * x[j].clone();
            }
        }
        x[k] = acc / rows[p][&k].clone();
    }
    Ok(SolverOutcome::plain(x, n))
}

fn has_deficit<N: OrderedField>(a: &SparseMatrix<N>, row: usize) -> bool {
    let deficit = N::one() - a.row_sum(row);
    if N::is_exact() {
        deficit.total_cmp(&N::zero()) == Ordering::Greater
    } else {
        deficit.as_f64() > 1e-12
    }
}

/// Exact policy iteration. Starts from the lowest row per state that keeps
/// the system's exit (row deficit) reachable, then alternates evaluation by
/// Gaussian elimination with greedy improvement on strict gains.
pub fn policy_iteration<N: OrderedField>(
    system: &BellmanSystem<N>,
    max_iterations: usize,
) -> Result<SolverOutcome<N>, SolverError> {
    let n = system.size();
    let view = system.view();
    let mut policy: Vec<Option<usize>> = vec![None; n];
    let mut attracted = vec![false; n];
    let mut changed = true;
    while changed {
        changed = false;
        let snapshot = attracted.clone();
        for s in 0..n {
            if attracted[s] {
                continue;
            }
            let start = system.offsets[s];
            let row = (start..system.offsets[s + 1]).find(|&r| {
                has_deficit(&system.a, r) || system.a.row_columns(r).iter().any(|&t| snapshot[t])
            });
            if let Some(r) = row {
                policy[s] = Some(r - start);
                attracted[s] = true;
                changed = true;
            }
        }
    }
    let mut policy: Vec<usize> = policy
        .into_iter()
        .enumerate()
        .map(|(s, p)| p.ok_or(SolverError::NoProperPolicy { state: s }))
        .collect::<Result<_, _>>()?;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > max_iterations {
            return Err(SolverError::IterationCap {
                method: "policy iteration",
                cap: max_iterations,
            });
        }
        let values = gaussian_elimination(&system.induced(&policy))?.values;
        let mut improved = false;
        for s in 0..n {
            let start = system.offsets[s];
            let current = view.row_value(start + policy[s], &values);
            let mut best = current.clone();
            let mut choice = policy[s];
            for r in start..system.offsets[s + 1] {
                let v = view.row_value(r, &values);
                if view.better(&v, &best) {
                    best = v;
                    choice = r - start;
                }
            }
            if choice != policy[s] && significant(&best, &current) {
                policy[s] = choice;
                improved = true;
            }
        }
        if !improved {
            return Ok(SolverOutcome {
                values,
                lower: None,
                upper: None,
                iterations,
                policy: Some(policy),
            });
        }
    }
}

fn significant<N: OrderedField>(a: &N, b: &N) -> bool {
    if N::is_exact() {
        a != b
    } else {
        let (a, b) = (a.as_f64(), b.as_f64());
        (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0)
    }
}

/// The rational with the smallest denominator (then numerator) in `[lo, hi]`,
/// found through continued-fraction expansion of the interval ends.
pub fn simplest_rational_between(lo: &Rational, hi: &Rational) -> Rational {
    assert!(lo <= hi, "empty interval");
    if lo.is_positive() {
        simplest_positive(lo, hi)
    } else if hi.is_negative() {
        -simplest_positive(&-hi.clone(), &-lo.clone())
    } else {
        <Rational as Field>::zero()
    }
}

fn simplest_positive(lo: &Rational, hi: &Rational) -> Rational {
    let floor = lo.floor();
    if floor == *lo {
        return floor;
    }
    let next = floor.clone() + <Rational as Field>::one();
    if next <= *hi {
        return next;
    }
    let inner = simplest_positive(&(hi.clone() - floor.clone()).recip(), &(lo.clone() - floor.clone()).recip());
    floor + inner.recip()
}

fn sharpen(values: &[Rational], radius: &Rational) -> Vec<Rational> {
    values
        .iter()
        .map(|v| simplest_rational_between(&(v.clone() - radius.clone()), &(v.clone() + radius.clone())))
        .collect()
}

/// Order visiting successors before predecessors where possible, so that
/// in-place sweeps settle acyclic parts in one pass.
fn topological_order(a: &SparseMatrix<Rational>) -> Vec<usize> {
    let n = a.row_count();
    let mut order = Vec::with_capacity(n);
    let mut state = vec![0u8; n];
    for root in 0..n {
        if state[root] != 0 {
            continue;
        }
        let mut stack = vec![(root, 0usize)];
        state[root] = 1;
        while let Some((v, pos)) = stack.last_mut() {
            let v = *v;
            let cols = a.row_columns(v);
            if *pos < cols.len() {
                let w = cols[*pos];
                *pos += 1;
                if state[w] == 0 {
                    state[w] = 1;
                    stack.push((w, 0));
                }
            } else {
                state[v] = 2;
                order.push(v);
                stack.pop();
            }
        }
    }
    order
}

/// Rational search: approximate in floating point at precision `εᵢ`, sharpen
/// each component to the simplest rational within `εᵢ`, and accept once the
/// candidate satisfies `x = A x + b` exactly; otherwise continue with
/// `εᵢ₊₁ = εᵢ²`. Once floating point runs out of precision the approximation
/// continues with exact in-place sweeps in topological order.
pub fn rational_search(
    system: &LinearSystem<Rational>,
    settings: &IterationSettings,
) -> Result<SolverOutcome<Rational>, SolverError> {
    const MAX_ROUNDS: usize = 64;
    let float = system.map(rational_to_f64);
    let mut epsilon = settings.epsilon;
    let mut rounds = 0;
    let mut iterations = 0;
    while epsilon >= 1e-15 {
        rounds += 1;
        let approx = super::vi(
            &float,
            &IterationSettings {
                epsilon,
                relative: false,
                ..settings.clone()
            },
        )?;
        iterations += approx.iterations;
        let radius = rational_from_f64(epsilon).expect("finite precision");
        let values: Vec<Rational> = approx
            .values
            .iter()
            .map(|v| rational_from_f64(*v).unwrap_or_else(<Rational as Field>::zero))
            .collect();
        let candidate = sharpen(&values, &radius);
        if system.is_solution(&candidate) {
            return Ok(SolverOutcome::plain(candidate, iterations));
        }
        epsilon *= epsilon;
    }
    let order = topological_order(&system.a);
    let mut x = vec![<Rational as Field>::zero(); system.size()];
    let mut radius = rational_from_f64(epsilon).expect("finite precision");
    let mut budget = settings.max_iterations;
    while rounds < MAX_ROUNDS {
        rounds += 1;
        loop {
            if budget == 0 {
                return Err(SolverError::IterationCap {
                    method: "rational search",
                    cap: settings.max_iterations,
                });
            }
            budget -= 1;
            iterations += 1;
            let mut delta = <Rational as Field>::zero();
            for &s in &order {
                let next = system.a.row_dot(s, &x) + system.b[s].clone();
                let d = (next.clone() - x[s].clone()).abs();
                if d > delta {
                    delta = d;
                }
                x[s] = next;
            }
            if delta.is_zero() {
                return Ok(SolverOutcome::plain(x, iterations));
            }
            if delta <= radius {
                break;
            }
        }
        let candidate = sharpen(&x, &radius);
        if system.is_solution(&candidate) {
            return Ok(SolverOutcome::plain(candidate, iterations));
        }
        radius = &radius * &radius;
    }
    Err(SolverError::PrecisionExhausted { rounds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::rational;
    use crate::property::Direction;
    use crate::solver::fixtures::*;
    use crate::solver::{state_elimination_solve, vi};

    #[test]
    fn one_by_one() {
        let out = gaussian_elimination(&coin_flip()).unwrap();
        assert_eq!(out.values, vec![rational(1, 1)]);
    }

    #[test]
    fn slow_chain_exact() {
        let sys = slow_chain();
        let x = gaussian_elimination(&sys).unwrap().values;
        assert!(sys.is_solution(&x));
        assert_eq!(x[0], rational(1, 2));
        assert_eq!(state_elimination_solve(&sys, &[]).unwrap().values, x);
    }

    #[test]
    fn zero_diagonal_needs_row_pivot() {
        // x0 = x1, x1 = ½ x0 + ½  (I − A has zero off the diagonal only after fill)
        let sys = LinearSystem::new(matrix(2, &[&[(1, 1, 1)], &[(0, 1, 2)]]), vector(&[(0, 1), (1, 2)]));
        let x = gaussian_elimination(&sys).unwrap().values;
        assert_eq!(x, vector(&[(1, 1), (1, 1)]));
    }

    #[test]
    fn singular_system_is_reported() {
        let sys = LinearSystem::new(matrix(1, &[&[(0, 1, 1)]]), vector(&[(0, 1)]));
        assert!(matches!(gaussian_elimination(&sys), Err(SolverError::Singular { .. })));
    }

    #[test]
    fn simplest_rationals() {
        let third = simplest_rational_between(&rational(3333324, 10000000), &rational(3333344, 10000000));
        assert_eq!(third, rational(1, 3));
        assert_eq!(simplest_rational_between(&rational(1, 2), &rational(1, 2)), rational(1, 2));
        assert_eq!(simplest_rational_between(&rational(-1, 3), &rational(1, 7)), rational(0, 1));
        assert_eq!(simplest_rational_between(&rational(-2, 3), &rational(-3, 5)), rational(-2, 3));
        assert_eq!(simplest_rational_between(&rational(7, 5), &rational(9, 5)), rational(3, 2));
    }

    fn brute_force(lo: &Rational, hi: &Rational) -> Rational {
        for q in 1i64..=1_000_000 {
            let q_r = rational(q, 1);
            let p = (lo * &q_r).ceil();
            let candidate = p / q_r;
            if candidate <= *hi {
                return candidate;
            }
        }
        unreachable!()
    }

    #[test]
    fn simplest_matches_brute_force() {
        let center = rational_from_f64(0.3333334).unwrap();
        let radius = rational(1, 1_000_000);
        let lo = center.clone() - radius.clone();
        let hi = center + radius;
        assert_eq!(simplest_rational_between(&lo, &hi), brute_force(&lo, &hi));
        for (a, b) in [(13, 97), (355, 113), (22, 7), (1, 999)] {
            let lo = rational(a, b) - rational(1, 100_000);
            let hi = rational(a, b) + rational(1, 100_000);
            assert_eq!(simplest_rational_between(&lo, &hi), brute_force(&lo, &hi));
        }
    }

    #[test]
    fn rational_search_recovers_exact_values() {
        let settings = IterationSettings::default();
        for sys in [coin_flip(), slow_chain()] {
            let out = rational_search(&sys, &settings).unwrap();
            assert!(sys.is_solution(&out.values));
        }
        // denominators far beyond floating-point reach
        let sys = LinearSystem::new(
            matrix(2, &[&[(1, 1, 1_000_003)], &[]]),
            vec![rational(1, 999_983), rational(7, 1_000_033) * rational(1, 1_000_037)],
        );
        let out = rational_search(&sys, &settings).unwrap();
        assert!(sys.is_solution(&out.values));
        assert_eq!(vi(&sys, &settings).unwrap().values.len(), 2);
    }

    #[test]
    fn policy_iteration_basics() {
        // single choice per state equals Gaussian elimination
        let lin = slow_chain();
        let bell = BellmanSystem::new(lin.a.clone(), (0..=20).collect(), lin.b.clone(), Direction::Max);
        let out = policy_iteration(&bell, 1000).unwrap();
        assert_eq!(out.values, gaussian_elimination(&lin).unwrap().values);

        // target vs sink
        let a = matrix(1, &[&[], &[]]);
        let max = BellmanSystem::new(a.clone(), vec![0, 2], vector(&[(1, 1), (0, 1)]), Direction::Max);
        let out = policy_iteration(&max, 1000).unwrap();
        assert_eq!(out.values, vector(&[(1, 1)]));
        assert_eq!(out.policy, Some(vec![0]));
        let min = BellmanSystem { direction: Direction::Min, ..max };
        assert_eq!(policy_iteration(&min, 1000).unwrap().values, vector(&[(0, 1)]));
    }

    fn enumerate_policies(sys: &BellmanSystem<Rational>) -> Vec<Rational> {
        let n = sys.size();
        let counts: Vec<usize> = (0..n).map(|s| sys.offsets[s + 1] - sys.offsets[s]).collect();
        let mut policy = vec![0usize; n];
        let mut best: Option<Vec<Rational>> = None;
        loop {
            let values = gaussian_elimination(&sys.induced(&policy)).unwrap().values;
            best = Some(match best {
                None => values,
                Some(b) => b
                    .into_iter()
                    .zip(values)
                    .map(|(x, y)| match sys.direction {
                        Direction::Max => x.max(y),
                        Direction::Min => x.min(y),
                    })
                    .collect(),
            });
            let mut i = 0;
            loop {
                if i == n {
                    return best.unwrap();
                }
                policy[i] += 1;
                if policy[i] < counts[i] {
                    break;
                }
                policy[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn detour_matches_enumeration() {
        for direction in [Direction::Max, Direction::Min] {
            let sys = detour(direction);
            let oracle = enumerate_policies(&sys);
            let out = policy_iteration(&sys, 1000).unwrap();
            assert_eq!(out.values, oracle);
            let induced = gaussian_elimination(&sys.induced(out.policy.as_ref().unwrap())).unwrap();
            assert_eq!(induced.values, oracle);
            let approx = vi(&sys, &IterationSettings::default()).unwrap();
            for (a, b) in approx.values.iter().zip(&oracle) {
                assert!((rational_to_f64(a) - rational_to_f64(b)).abs() < 1e-5);
            }
        }
    }
}
