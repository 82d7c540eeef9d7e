//! Station-opening and fleet-growth planning for vehicle sharing systems:
//! a dense LP solver, the per-state profit model, and A* search over the
//! order in which stations are opened.

pub mod bench;
pub mod instance;
pub mod lp;
pub mod model;
pub mod search;

/// The LP layer is generic over the scalar; the planner works in `f64`.
pub type LinearProgram = lp::LinearProgram<f64>;
pub type LexicographicProgram = lp::LexicographicProgram<f64>;
pub type BinaryProgram = lp::BinaryProgram<f64>;
pub type LpSolution = lp::LpSolution<f64>;
pub type Tolerances = lp::Tolerances<f64>;
