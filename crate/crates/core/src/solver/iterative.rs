//! Value iteration and its sound variants.
//!
//! The stop criterion of plain value iteration is the maximum over states of
//! `|x' − x|` (absolute) or `|x' − x| / |x'|` (relative, `0/0` counting as
//! zero). Interval iteration and optimistic value iteration stop once the
//! bracket `[l, u]` satisfies `u − l ≤ 2ε` (absolute) or `u − l ≤ 2ε·l`
//! (relative; states with `l = 0` fall back to the absolute test) and return
//! the midpoint.

use std::cmp::Ordering;

use super::{BellmanSystem, IterationSettings, LinearSystem, SolverError, SolverOutcome, View};
use crate::number::OrderedField;
use crate::property::Direction;

/// Systems the iterative solvers accept.
pub trait Iterable<N> {
    #[doc(hidden)]
    fn as_view(&self) -> View<'_, N>;
}

impl<N: OrderedField> Iterable<N> for LinearSystem<N> {
    fn as_view(&self) -> View<'_, N> {
        self.view()
    }
}

impl<N: OrderedField> Iterable<N> for BellmanSystem<N> {
    fn as_view(&self) -> View<'_, N> {
        self.view()
    }
}

fn converged<N: OrderedField>(old: &[N], new: &[N], epsilon: f64, relative: bool) -> bool {
    old.iter().zip(new).all(|(o, n)| {
        let diff = (n.clone() - o.clone()).magnitude().as_f64();
        if diff == 0.0 {
            return true;
        }
        if relative {
            let scale = n.magnitude().as_f64();
            scale > 0.0 && diff / scale <= epsilon
        } else {
            diff <= epsilon
        }
    })
}

fn gap_closed<N: OrderedField>(lower: &[N], upper: &[N], epsilon: f64, relative: bool) -> bool {
    lower.iter().zip(upper).all(|(l, u)| {
        let gap = (u.clone() - l.clone()).as_f64();
        let l = l.as_f64();
        if relative && l > 0.0 {
            gap <= 2.0 * epsilon * l
        } else {
            gap <= 2.0 * epsilon
        }
    })
}

fn sweep<N: OrderedField>(view: &View<N>, x: &mut Vec<N>, gauss_seidel: bool) -> Vec<N> {
    if gauss_seidel {
        let old = x.clone();
        for s in 0..view.size() {
            x[s] = view.best(s, x).0;
        }
        old
    } else {
        let next = view.apply(x);
        std::mem::replace(x, next)
    }
}

/// Runs value iteration from `x` until the criterion holds; returns the
/// number of sweeps.
fn iterate<N: OrderedField>(
    view: &View<N>,
    x: &mut Vec<N>,
    epsilon: f64,
    settings: &IterationSettings,
    budget: &mut usize,
    method: &'static str,
) -> Result<usize, SolverError> {
    let mut sweeps = 0;
    loop {
        if *budget == 0 {
            return Err(SolverError::IterationCap {
                method,
                cap: settings.max_iterations,
            });
        }
        *budget -= 1;
        sweeps += 1;
        let old = sweep(view, x, settings.gauss_seidel);
        if converged(&old, x, epsilon, settings.relative) {
            return Ok(sweeps);
        }
    }
}

/// Plain value iteration from zero. The result is not guaranteed to be
/// ε-close to the solution.
pub fn vi<N: OrderedField>(
    system: &impl Iterable<N>,
    settings: &IterationSettings,
) -> Result<SolverOutcome<N>, SolverError> {
    let view = system.as_view();
    let mut x = vec![N::zero(); view.size()];
    let mut budget = settings.max_iterations;
    let iterations = iterate(&view, &mut x, settings.epsilon, settings, &mut budget, "value iteration")?;
    let policy = view.policy(&x);
    Ok(SolverOutcome {
        values: x,
        lower: None,
        upper: None,
        iterations,
        policy: Some(policy),
    })
}

/// Interval iteration from `0` and `upper`. The caller guarantees that the
/// solution lies below `upper` and that the system has a unique fixpoint.
pub fn interval_iteration<N: OrderedField>(
    system: &impl Iterable<N>,
    upper: Vec<N>,
    settings: &IterationSettings,
) -> Result<SolverOutcome<N>, SolverError> {
    let view = system.as_view();
    let n = view.size();
    let mut lower = vec![N::zero(); n];
    let mut upper = upper;
    let mut iterations = 0;
    while !gap_closed(&lower, &upper, settings.epsilon, settings.relative) {
        if iterations == settings.max_iterations {
            return Err(SolverError::IterationCap {
                method: "interval iteration",
                cap: settings.max_iterations,
            });
        }
        iterations += 1;
        let next_lower = view.apply(&lower);
        let next_upper = view.apply(&upper);
        for i in 0..n {
            lower[i] = N::max_of(lower[i].clone(), next_lower[i].clone());
            upper[i] = N::min_of(upper[i].clone(), next_upper[i].clone());
        }
        debug_assert!(lower
            .iter()
            .zip(&upper)
            .all(|(l, u)| l.total_cmp(u) != Ordering::Greater));
    }
    Ok(bracketed(&view, lower, upper, iterations))
}

fn bracketed<N: OrderedField>(view: &View<N>, lower: Vec<N>, upper: Vec<N>, iterations: usize) -> SolverOutcome<N> {
    let two = N::one() + N::one();
    let values: Vec<N> = lower
        .iter()
        .zip(&upper)
        .map(|(l, u)| (l.clone() + u.clone()) / two.clone())
        .collect();
    let policy = view.policy(&values);
    SolverOutcome {
        values,
        lower: Some(lower),
        upper: Some(upper),
        iterations,
        policy: Some(policy),
    }
}

/// Optimistic value iteration: guess an upper bound from a value-iteration
/// lower bound and certify it with one operator application; on failure the
/// heuristic criterion is halved and iteration continues from the current
/// lower bound.
pub fn ovi<N: OrderedField>(
    system: &impl Iterable<N>,
    settings: &IterationSettings,
) -> Result<SolverOutcome<N>, SolverError> {
    let view = system.as_view();
    let n = view.size();
    let epsilon = N::from_rational(
        &crate::number::rational_from_f64(settings.epsilon).expect("finite precision"),
    );
    let mut lower = vec![N::zero(); n];
    let mut budget = settings.max_iterations;
    let mut criterion = settings.epsilon;
    let mut iterations = 0;
    let plain = IterationSettings {
        gauss_seidel: false,
        ..settings.clone()
    };
    loop {
        let phase = iterate(&view, &mut lower, criterion, &plain, &mut budget, "optimistic value iteration")?;
        iterations += phase;
        let mut upper: Vec<N> = lower
            .iter()
            .map(|l| {
                if settings.relative {
                    l.clone() * (N::one() + epsilon.clone())
                } else {
                    l.clone() + epsilon.clone()
                }
            })
            .collect();
        let mut image = view.apply(&upper);
        let mut certified = false;
        for _ in 0..phase.max(16) {
            certified = image.iter().zip(&upper).all(|(phi, u)| phi.total_cmp(u) != Ordering::Greater);
            let decreasing = image.iter().zip(&upper).any(|(phi, u)| phi.total_cmp(u) == Ordering::Less);
            if certified || !decreasing || budget == 0 {
                break;
            }
            budget -= 1;
            iterations += 1;
            upper = image;
            image = view.apply(&upper);
        }
        if certified {
            let lower_ok = view.apply(&lower);
            let lower: Vec<N> = lower
                .iter()
                .zip(lower_ok)
                .map(|(l, next)| N::max_of(l.clone(), next))
                .collect();
            let upper: Vec<N> = upper
                .into_iter()
                .zip(image)
                .map(|(u, phi)| N::min_of(u, phi))
                .collect();
            return Ok(bracketed(&view, lower, upper, iterations));
        }
        criterion /= 2.0;
        if criterion < f64::MIN_POSITIVE {
            return Err(SolverError::IterationCap {
                method: "optimistic value iteration",
                cap: settings.max_iterations,
            });
        }
    }
}

/// Upper bound on the solution of a reward system whose row deficits
/// `1 − Σ_j A_rj` lead to the goal.
///
/// States are layered by distance to a deficit: a state is in layer `k + 1`
/// when every row (maximizing systems) or some row (minimizing systems) has
/// a deficit or an edge into layers `≤ k`. With `p` the smallest positive
/// entry or deficit and `D` the deepest layer, every `D` steps reach the goal
/// with probability at least `q = p^D`, so the expected number of steps is at
/// most `D / q` and every value is at most `r_max · D / q`. When the layering
/// does not cover all states or the bound overflows, a candidate `u` is
/// certified instead by checking `Φ(u) ≤ u`, starting from twice a
/// value-iteration estimate and doubling.
pub fn reward_upper_bound<N: OrderedField>(
    system: &impl Iterable<N>,
    settings: &IterationSettings,
) -> Result<Vec<N>, SolverError> {
    let view = system.as_view();
    let n = view.size();
    if n == 0 {
        return Ok(Vec::new());
    }
    let rows = view.a.row_count();
    let tolerance = if N::is_exact() { 0.0 } else { 1e-9 };
    let deficit: Vec<f64> = (0..rows)
        .map(|r| (N::one() - view.a.row_sum(r)).as_f64())
        .map(|d| if d > tolerance { d } else { 0.0 })
        .collect();
    let mut p_min = deficit.iter().copied().filter(|&d| d > 0.0).fold(1.0, f64::min);
    for v in view.a.values() {
        let v = v.as_f64();
        if v > 0.0 {
            p_min = p_min.min(v);
        }
    }
    let r_max = view.b.iter().map(|b| b.as_f64()).fold(0.0, f64::max);
    let mut layer = vec![usize::MAX; n];
    let mut depth = 0usize;
    loop {
        let mut next = Vec::new();
        for s in 0..n {
            if layer[s] != usize::MAX {
                continue;
            }
            let good = |r: usize| deficit[r] > 0.0 || view.a.row_columns(r).iter().any(|&t| layer[t] < depth);
            let mut rows = view.offsets[s]..view.offsets[s + 1];
            let ok = match view.direction {
                Direction::Max => rows.all(good),
                Direction::Min => rows.any(good),
            };
            if ok {
                next.push(s);
            }
        }
        if next.is_empty() {
            break;
        }
        for s in next {
            layer[s] = depth;
        }
        depth += 1;
    }
    let covered = layer.iter().all(|&l| l != usize::MAX);
    if covered {
        let d = depth as f64;
        let log_bound = r_max.max(f64::MIN_POSITIVE).ln() + d.ln() - d * p_min.ln();
        if log_bound < 600.0 {
            let bound = (r_max * d * p_min.powf(-d)).max(r_max);
            if let Some(b) = crate::number::rational_from_f64(bound * (1.0 + 1e-9) + 1e-9) {
                return Ok(vec![N::from_rational(&b); n]);
            }
        }
    }
    let estimate = vi(system, settings)?.values;
    let two = N::one() + N::one();
    let mut candidate: Vec<N> = estimate.iter().map(|v| v.clone() * two.clone() + N::one()).collect();
    for _ in 0..64 {
        let image = view.apply(&candidate);
        if image.iter().zip(&candidate).all(|(phi, u)| phi.total_cmp(u) != Ordering::Greater) {
            return Ok(candidate);
        }
        candidate = candidate.into_iter().map(|u| u * two.clone()).collect();
    }
    let state = layer.iter().position(|&l| l == usize::MAX).unwrap_or(0);
    Err(SolverError::NoUpperBound { state })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::number::{rational, Rational};
    use crate::solver::fixtures::*;
    use crate::solver::gaussian_elimination;
    use crate::sparse::SparseMatrix;

    fn float(system: &LinearSystem<Rational>) -> LinearSystem<f64> {
        system.map(crate::number::rational_to_f64)
    }

    fn settings(epsilon: f64, relative: bool) -> IterationSettings {
        IterationSettings {
            epsilon,
            relative,
            max_iterations: 1_000_000,
            gauss_seidel: false,
        }
    }

    #[test]
    fn constant_system_converges_at_once() {
        let sys = LinearSystem::new(SparseMatrix::<f64>::from_rows(1, vec![Vec::new()]), vec![0.5]);
        let out = vi(&sys, &settings(1e-6, true)).unwrap();
        assert_eq!(out.values, vec![0.5]);
        assert_eq!(out.iterations, 2);
        let out = ovi(&sys, &settings(1e-6, true)).unwrap();
        assert!(out.lower.unwrap()[0] <= 0.5 && out.upper.unwrap()[0] >= 0.5);
    }

    #[test]
    fn coin_flip_loop() {
        let sys = float(&coin_flip());
        let out = vi(&sys, &settings(1e-6, true)).unwrap();
        assert!((out.values[0] - 1.0).abs() < 1e-5);
        let out = interval_iteration(&sys, vec![1.0], &settings(1e-6, true)).unwrap();
        let (l, u) = (out.lower.unwrap()[0], out.upper.unwrap()[0]);
        assert!(l <= 1.0 && 1.0 <= u && u - l <= 2e-6);
        let out = ovi(&sys, &settings(1e-6, true)).unwrap();
        assert!(out.lower.unwrap()[0] <= 1.0 && out.upper.unwrap()[0] >= 1.0);
    }

    #[test]
    fn absorbing_row_closes_bracket_in_one_step() {
        let sys = LinearSystem::new(SparseMatrix::<f64>::from_rows(1, vec![Vec::new()]), vec![1.0]);
        let out = interval_iteration(&sys, vec![1.0], &settings(1e-6, false)).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.lower.unwrap(), vec![1.0]);
    }

    #[test]
    fn slow_chain_separates_sound_from_unsound() {
        let exact = slow_chain();
        let truth = gaussian_elimination(&exact).unwrap().values;
        let truth: Vec<f64> = truth.iter().map(crate::number::rational_to_f64).collect();
        let sys = float(&exact);
        let s = settings(1e-6, true);
        let plain = vi(&sys, &s).unwrap();
        assert!(plain
            .values
            .iter()
            .zip(&truth)
            .any(|(v, t)| (v - t).abs() > 1e-6 * t));
        for out in [interval_iteration(&sys, vec![1.0; 20], &s).unwrap(), ovi(&sys, &s).unwrap()] {
            let (lower, upper) = (out.lower.unwrap(), out.upper.unwrap());
            for i in 0..20 {
                assert!(lower[i] <= truth[i] && truth[i] <= upper[i]);
                assert!(upper[i] - lower[i] <= 2e-6 * lower[i].max(1.0));
                assert!((out.values[i] - truth[i]).abs() <= 1e-6 * truth[i]);
            }
        }
    }

    #[test]
    fn bellman_two_actions() {
        // state 0: row to target, row to sink
        let a = SparseMatrix::<f64>::from_rows(1, vec![Vec::new(), Vec::new()]);
        for (direction, expected) in [(Direction::Max, 1.0), (Direction::Min, 0.0)] {
            let sys = BellmanSystem::new(a.clone(), vec![0, 2], vec![1.0, 0.0], direction);
            assert_eq!(vi(&sys, &settings(1e-6, true)).unwrap().values, vec![expected]);
            let ii = interval_iteration(&sys, vec![1.0], &settings(1e-6, true)).unwrap();
            assert!((ii.values[0] - expected).abs() <= 1e-6);
            let o = ovi(&sys, &settings(1e-6, false)).unwrap();
            assert!((o.values[0] - expected).abs() <= 1e-6);
        }
    }

    #[test]
    fn single_choice_bellman_matches_linear() {
        let lin = float(&slow_chain());
        let bell = BellmanSystem::new(lin.a.clone(), (0..=20).collect(), lin.b.clone(), Direction::Min);
        let s = settings(1e-8, true);
        assert_eq!(vi(&lin, &s).unwrap().values, vi(&bell, &s).unwrap().values);
    }

    #[test]
    fn reward_bound_is_an_upper_bound() {
        // coin-flip loop with reward 1 per step: value 2
        let sys = LinearSystem::new(SparseMatrix::from_rows(1, vec![vec![(0, rational(1, 2))]]), vec![rational(1, 1)]);
        let bound = reward_upper_bound(&sys, &settings(1e-6, true)).unwrap();
        assert!(bound[0] >= rational(2, 1));
        let out = interval_iteration(&sys, bound, &IterationSettings {
            epsilon: 1e-3,
            ..settings(1e-3, true)
        })
        .unwrap();
        assert!(out.lower.unwrap()[0] <= rational(2, 1));
    }

    #[test]
    fn gauss_seidel_agrees() {
        let sys = float(&slow_chain());
        let jacobi = vi(&sys, &settings(1e-10, true)).unwrap();
        let gs = vi(&sys, &IterationSettings { gauss_seidel: true, ..settings(1e-10, true) }).unwrap();
        for (a, b) in jacobi.values.iter().zip(&gs.values) {
            assert!((a - b).abs() < 1e-6);
        }
        assert!(gs.iterations <= jacobi.iterations);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn small_system() -> impl Strategy<Value = LinearSystem<Rational>> {
            (1usize..4).prop_flat_map(|n| {
                proptest::collection::vec(proptest::collection::vec(0u8..4, n + 1), n).prop_map(move |weights| {
                    // each row: weights over n states plus a leak, with a guaranteed leak share
                    let rows: Vec<Vec<(usize, Rational)>> = weights
                        .iter()
                        .map(|w| {
                            let total: i64 = w.iter().map(|&x| x as i64).sum::<i64>() + 1;
                            (0..n)
                                .filter(|&j| w[j] > 0)
                                .map(|j| (j, rational(w[j] as i64, total)))
                                .collect()
                        })
                        .collect();
                    let b: Vec<Rational> = weights
                        .iter()
                        .map(|w| {
                            let total: i64 = w.iter().map(|&x| x as i64).sum::<i64>() + 1;
                            rational(w[n] as i64 + 1, total)
                        })
                        .collect();
                    LinearSystem::new(SparseMatrix::from_rows(n, rows), b)
                })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn exact_iterates_increase_towards_solution(sys in small_system()) {
                let truth = gaussian_elimination(&sys).unwrap().values;
                let mut x = vec![rational(0, 1); sys.size()];
                for _ in 0..100 {
                    let next = sys.apply(&x);
                    for i in 0..sys.size() {
                        prop_assert!(x[i] <= next[i]);
                        prop_assert!(next[i] <= truth[i]);
                    }
                    x = next;
                }
            }

            #[test]
            fn sound_brackets_contain_solution(sys in small_system()) {
                let truth = gaussian_elimination(&sys).unwrap().values;
                let upper = reward_upper_bound(&sys, &settings(1e-6, true)).unwrap();
                let s = settings(1e-6, true);
                for out in [interval_iteration(&sys, upper, &s).unwrap(), ovi(&sys, &s).unwrap()] {
                    let (lower, upper) = (out.lower.unwrap(), out.upper.unwrap());
                    for i in 0..sys.size() {
                        prop_assert!(lower[i] <= upper[i]);
                        prop_assert!(lower[i] <= truth[i] && truth[i] <= upper[i]);
                    }
                }
            }
        }
    }
}
