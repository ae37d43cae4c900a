//! Parametric Markov chains: rational-function arithmetic, solution
//! functions, instantiation and region lifting.

mod analysis;
mod polynomial;
mod rational_function;

pub use analysis::{
    instantiate, parameters, parse_point, region_lifting, solution_function, solution_functions, ParametricError,
    Region,
};
pub use polynomial::{EvaluationError, Monomial, Polynomial};
pub use rational_function::RationalFunction;
