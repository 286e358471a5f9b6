//! Synthesis of adaptive side-channel attacks on string-manipulating programs.
//!
//! - [`constraint`]: formulas over the secret `h` and the input `l`.
//! - [`automaton`]: compilation of formulas to DFAs, model counting and sampling.
//! - [`symexec`]: symbolic execution of the target program into observation constraints.
//! - [`attack`]: the adaptive attack loop and its input-selection heuristics.

pub mod attack;
pub mod automaton;
pub mod constraint;
pub mod symexec;
