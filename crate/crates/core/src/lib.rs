//! Multiple-relaxation Runge-Kutta methods.

pub mod problems;
pub mod tableaux;
pub mod stepper;
pub mod relaxation;
pub mod kdv;
pub mod reference;
pub mod experiments;
