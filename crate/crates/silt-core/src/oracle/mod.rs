//! Exact and deterministic reference values for walk functionals.
//!
//! Everything in this module is computed without sampling. The submodules
//! deliberately overlap: several quantities are reachable by two distinct
//! routes (big-integer identities vs. dense transition tables, dense scans
//! vs. symmetry-reduced scans, closed-form recursions vs. brute-force path
//! enumeration). The overlaps are the point; they let the test suite check
//! independent implementations against each other before either is trusted
//! as a reference for Monte Carlo output.

mod enumerate;
mod killed;
mod ldbound;
mod reduced;
mod returns;
mod transition;

pub use enumerate::{confined_path_law, enumerate_paths, PathLaw, ENUMERATION_CAP};
pub use killed::{
    killed_table, log_survival_prob, principal_eigen, survival_prob, BallLattice, EigenPair,
    KilledTable,
};
pub use ldbound::{exp_sum_tail_mc, ld_bound_rhs};
pub use reduced::{gaussian_comparison_constant, gaussian_comparison_from_table};
pub use returns::{
    expected_mutual_intersection, expected_range, expected_silt, return_probs, RETURNS_MAX_STEPS,
};
pub use transition::{transition_probs, TransitionTable, DEFAULT_MEMORY_BUDGET};
