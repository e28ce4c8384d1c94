//! Desk-scale verifiers at finite `ε`: finite-difference solvers for the
//! linear and KPP problems and a Monte Carlo Feynman–Kac estimator.

pub mod convergence;
pub mod mc;
pub mod pde;

pub use convergence::{ConvergenceRow, ConvergenceTable, epsilon_convergence_table};
pub use mc::{McConfig, McRun, mc_feynman_kac, mc_occupation, mc_occupation_samples};
pub use pde::{KppProfile, PdeConfig, PdeField, PdeRun, kpp_pde_solve, linear_pde_solve};
