//! Maximum-entropy Q-iteration on finite MDPs, additive composition of soft
//! Q-functions, and numerical certification of the resulting sub-optimality
//! bounds.
//!
//! The crate is organized as a stack: [`mdp`] holds the problem data types,
//! [`solver`] the entropy-regularized fixed-point solvers, [`compose`] the
//! additive-composition operators and bound certificates, [`grid`] the
//! gridworld environments used by the benchmark harness, [`oracle`]
//! independent high-precision reimplementations used only for cross-checking,
//! [`io`] the JSON document layer, and [`harness`] the CLI experiment driver.

pub mod compose;
pub mod grid;
pub mod harness;
pub mod io;
pub mod mdp;
pub mod oracle;
pub mod solver;
