//! Directional expansiveness laboratory: one-dimensional cellular automata,
//! a reversible arrow/bracket automaton, finite-scale prediction shapes,
//! Lyapunov profiles, exact slope algebra and a cycle-machine simulator.

pub mod shift;

pub use shift::{
    agree_on, all_windows, apply_rule, compose_rules, orbit, Alphabet, Automaton, Configuration,
    DefaultAction, LocalRule, ShiftError, Sym,
};
pub mod arrow_bracket;
pub mod dynamics;
pub mod geometry;
pub mod render;
pub mod cycle;
pub mod slope;
