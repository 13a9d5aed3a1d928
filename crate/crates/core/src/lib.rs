//! Small-scale laboratory for learning CNF formulas from uniform solutions.
//!
//! - [`cnf`]: clauses, formulas, assignments, pinnings and DIMACS I/O.
//! - [`generators`]: seeded formula families.
//! - [`solutions`]: exhaustive enumeration, counting, sampling and exact probabilities.
//! - [`learner`]: Valiant's clause-elimination learner and sample-complexity sweeps.
//! - [`resilience`]: θ-resilience, local uniformity and pin sequences.
//! - [`structure`]: well-behavedness checks and bad-set identification.
//! - [`reveal`]: frozen/blocked/alive classification and the revealing process.

pub mod cnf;
pub mod exact;
pub mod generators;
pub mod learner;
pub mod resilience;
pub mod reveal;
pub mod rng;
pub mod solutions;
pub mod structure;

pub use cnf::{
    clause_satisfied, clause_status, kds_parameters, parse_dimacs, simplify, write_dimacs,
    Assignment, Clause, ClauseStatus, CnfError, CnfFormula, KdsParams, Lit, Pinning, Var,
};
pub use exact::ExactProb;
pub use rng::{Rng, PRNG_ID};
