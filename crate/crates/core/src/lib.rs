//! Robust Turing-machine dynamics and planar basins of attraction.
//!
//! The crate has two halves. The first compiles a Turing machine into a
//! smooth map of ℝ³ that agrees with the machine on integer configurations
//! and contracts around them, then embeds its iteration into an autonomous
//! 7-D ODE whose halting configuration is a hyperbolic sink. The second
//! computes basins of attraction of sinks of structurally stable planar
//! fields on a disk, with a brute-force integration oracle for comparison.

pub mod scalar;
pub mod quad;
pub mod smooth;
pub mod tm;
pub mod integrator;
pub mod robust_map;
pub mod ode_system;
pub mod planar;
