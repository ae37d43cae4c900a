//! Equation solvers behind two interfaces: linear fixpoint systems
//! `x = A x + b` and min/max Bellman systems over grouped rows.

mod elimination;
mod exact;
mod iterative;

use std::borrow::Cow;
use std::cmp::Ordering;

pub use elimination::state_elimination_solve;
pub use exact::{gaussian_elimination, policy_iteration, rational_search, simplest_rational_between};
pub use iterative::{interval_iteration, ovi, reward_upper_bound, vi, Iterable};

use crate::number::{Field, OrderedField};
use crate::property::Direction;
use crate::sparse::SparseMatrix;

/// Default cap on iterations of a single solve.
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;

/// Iteration cap, overridable through `STORMLET_MAX_ITER`.
pub fn default_max_iterations() -> usize {
    std::env::var("STORMLET_MAX_ITER")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&v: &usize| v > 0)
        .unwrap_or(DEFAULT_MAX_ITERATIONS)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("{method} did not converge within {cap} iterations")]
    IterationCap { method: &'static str, cap: usize },
    #[error("equation system is singular (column {column})")]
    Singular { column: usize },
    #[error("no proper initial policy: state {state} cannot leave the system")]
    NoProperPolicy { state: usize },
    #[error("no finite upper bound could be certified for state {state}")]
    NoUpperBound { state: usize },
    #[error("rational search gave up after {rounds} precision refinements")]
    PrecisionExhausted { rounds: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationSettings {
    pub epsilon: f64,
    pub relative: bool,
    pub max_iterations: usize,
    /// In-place updates instead of the two-vector (Jacobi) scheme.
    pub gauss_seidel: bool,
}

impl Default for IterationSettings {
    fn default() -> Self {
        IterationSettings {
            epsilon: 1e-6,
            relative: true,
            max_iterations: default_max_iterations(),
            gauss_seidel: false,
        }
    }
}

/// `x = A x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem<N> {
    pub a: SparseMatrix<N>,
    pub b: Vec<N>,
}

/// `x_s = opt_{r ∈ rows(s)} (A_r x + b_r)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BellmanSystem<N> {
    pub a: SparseMatrix<N>,
    /// Rows of state `s` are `offsets[s]..offsets[s + 1]`.
    pub offsets: Vec<usize>,
    pub b: Vec<N>,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOutcome<N> {
    pub values: Vec<N>,
    pub lower: Option<Vec<N>>,
    pub upper: Option<Vec<N>>,
    pub iterations: usize,
    /// Chosen row per state, as an offset within the state's rows.
    pub policy: Option<Vec<usize>>,
}

impl<N> SolverOutcome<N> {
    pub(crate) fn plain(values: Vec<N>, iterations: usize) -> Self {
        SolverOutcome {
            values,
            lower: None,
            upper: None,
            iterations,
            policy: None,
        }
    }
}

impl<N: Field> LinearSystem<N> {
    pub fn new(a: SparseMatrix<N>, b: Vec<N>) -> Self {
        assert_eq!(a.row_count(), b.len());
        assert_eq!(a.row_count(), a.column_count());
        LinearSystem { a, b }
    }

    pub fn size(&self) -> usize {
        self.b.len()
    }

    /// `A x + b`.
    pub fn apply(&self, x: &[N]) -> Vec<N> {
        (0..self.size())
            .map(|i| self.a.row_dot(i, x) + self.b[i].clone())
            .collect()
    }

    /// Exact check of `x = A x + b`.
    pub fn is_solution(&self, x: &[N]) -> bool {
        self.apply(x).iter().zip(x).all(|(l, r)| l == r)
    }

    pub fn map<M: Field>(&self, f: impl Fn(&N) -> M) -> LinearSystem<M> {
        LinearSystem {
            a: self.a.map_values(&f),
            b: self.b.iter().map(f).collect(),
        }
    }

    fn view(&self) -> View<'_, N> {
        View {
            a: &self.a,
            offsets: Cow::Owned((0..=self.size()).collect()),
            b: &self.b,
            direction: Direction::Max,
        }
    }
}

impl<N: Field> BellmanSystem<N> {
    pub fn new(a: SparseMatrix<N>, offsets: Vec<usize>, b: Vec<N>, direction: Direction) -> Self {
        assert_eq!(a.row_count(), b.len());
        assert_eq!(*offsets.last().expect("offsets"), a.row_count());
        BellmanSystem {
            a,
            offsets,
            b,
            direction,
        }
    }

    pub fn size(&self) -> usize {
        self.offsets.len() - 1
    }

    /// The linear system obtained by fixing one row (offset) per state.
    pub fn induced(&self, policy: &[usize]) -> LinearSystem<N> {
        let rows: Vec<usize> = (0..self.size()).map(|s| self.offsets[s] + policy[s]).collect();
        let a = SparseMatrix::from_rows(
            self.size(),
            rows.iter().map(|&r| self.a.row_entries(r)).collect(),
        );
        LinearSystem::new(a, rows.iter().map(|&r| self.b[r].clone()).collect())
    }

    fn view(&self) -> View<'_, N> {
        View {
            a: &self.a,
            offsets: Cow::Borrowed(&self.offsets),
            b: &self.b,
            direction: self.direction,
        }
    }
}

/// Borrowed Bellman form shared by the linear and optimizing variants.
#[doc(hidden)]
pub struct View<'a, N> {
    pub a: &'a SparseMatrix<N>,
    pub offsets: Cow<'a, [usize]>,
    pub b: &'a [N],
    pub direction: Direction,
}

impl<N: OrderedField> View<'_, N> {
    pub fn size(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn row_value(&self, row: usize, x: &[N]) -> N {
        self.a.row_dot(row, x) + self.b[row].clone()
    }

    /// Whether `candidate` beats `incumbent` in the system's direction.
    pub fn better(&self, candidate: &N, incumbent: &N) -> bool {
        let ord = candidate.total_cmp(incumbent);
        match self.direction {
            Direction::Max => ord == Ordering::Greater,
            Direction::Min => ord == Ordering::Less,
        }
    }

    /// Optimal value and row offset of state `s` under `x`; the lowest row
    /// wins ties.
    pub fn best(&self, s: usize, x: &[N]) -> (N, usize) {
        let start = self.offsets[s];
        let mut best = self.row_value(start, x);
        let mut arg = 0;
        for row in start + 1..self.offsets[s + 1] {
            let v = self.row_value(row, x);
            if self.better(&v, &best) {
                best = v;
                arg = row - start;
            }
        }
        (best, arg)
    }

    /// One Jacobi application of the Bellman operator.
    pub fn apply(&self, x: &[N]) -> Vec<N> {
        (0..self.size()).map(|s| self.best(s, x).0).collect()
    }

    pub fn policy(&self, x: &[N]) -> Vec<usize> {
        (0..self.size()).map(|s| self.best(s, x).1).collect()
    }
}
