//! Radial basis function interpolation with classical and simulated quantum
//! solvers.

pub mod coherent;
pub mod compact;
pub mod interpolation;
pub mod kernels;
pub mod qcore;
pub mod qinvert;
