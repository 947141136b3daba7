//! Tape-based reverse-mode differentiation over the primitive op set used
//! by the graph layers, plus a finite-difference gradient checker.

mod gradcheck;
mod params;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport};
pub use params::{ParamId, ParamStore, Variable};
pub use tape::{Gradients, Index, Tape, Var};
