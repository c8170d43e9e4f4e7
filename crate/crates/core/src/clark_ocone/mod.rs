//! Adapted projection, Clark-Ocone representation and delta hedging.
//!
//! For a cylindrical `F` the integrand is `t ↦ E(D_t F | F_t)`, evaluated at
//! the left end of every grid interval from the path observed so far.

mod hedging;
mod l1;
mod projection;
mod representation;

pub use hedging::{
    black_scholes_call, black_scholes_delta, hedge_report, hedging_delta, replication_study, HedgeReport, HedgeRow,
    HedgingStrategy, Market, Payoff,
};
pub use l1::{clark_ocone_l1, l0_distance, truncate, Distance, L1Report, TruncationLadder};
pub use projection::{
    adapted_projection, expectation_preservation_check, self_adjointness_check, AdaptedProjectionProcess, Provenance,
};
pub use representation::{
    clark_ocone, clark_ocone_convergence, clark_ocone_integrand, clark_ocone_verify, martingale_identity_check,
    martingale_truncation, martingale_truncation_chaos, perturbation_check, ClarkOconeRepresentation, ConvergenceRow,
    ConvergenceTable, Diagnostics, MartingaleReport, PerturbationReport,
};
