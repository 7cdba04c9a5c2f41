//! Cutting-plane solvers for convex programs given by differentiable
//! constraint functions: Kelley's cutting plane loop, the extended supporting
//! hyperplane loop, and tools for checking when gradient cuts support the
//! feasible set.

pub mod cli;
pub mod expr;
pub mod lp;
pub mod model;
pub mod separation;
pub mod solve;
