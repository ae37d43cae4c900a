//! Explicit-state probabilistic model checking.

pub mod bisimulation;
pub mod builder;
pub mod checker;
pub mod graph;
pub mod lexer;
pub mod model;
pub mod number;
pub mod parametric;
pub mod prism;
pub mod property;
pub mod solver;
pub mod sparse;
