#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Solver for the self-similar boundary-layer profile equation
//! `Phi''' + Phi Phi'' - ((m-1)/m) Phi'^2 = 0` on the real line.
//!
//! The left boundary condition `Phi -> -a` is imposed through an exponential
//! series, the free parameter of that series is found by shooting, and the
//! right far field is matched to an algebraic expansion. Closed-form
//! solutions for special exponents serve as oracles; flow fields, a
//! phase-plane reformulation and the local structure of blow-up solutions
//! are built on top.

pub mod blowup;
pub mod bvp;
pub mod cli;
pub mod exact;
pub mod flow;
pub mod integrator;
pub mod io;
pub mod phase;
pub mod roots;
pub mod series;
pub mod types;

pub use types::{Error, MValue, Params, Profile, Regime, Result, Solution, Termination};
