//! A laboratory for linear-program reconstruction attacks on noisy
//! statistical-query systems.
//!
//! The pieces, bottom-up:
//!
//! - [`dataset`]: the attack targets — (identifier, secret bit) tables,
//!   synthetic or CSV-loaded, plus presence-inference instances.
//! - [`querygen`]: query families — digit-predicate queries over
//!   identifiers, uniform random subsets, ±1 variants — and their
//!   restricted-SQL rendering.
//! - [`oracle`]: the simulated noisy counting interface: exact counts plus
//!   rounded Gaussian noise, with optional low-count suppression.
//! - [`lp`]: a generic box-bounded LP container and a from-scratch
//!   two-phase simplex solver with an independent verifier.
//! - [`reconstruct`]: the three attack formulations (least-absolute-error,
//!   bounded-error feasibility, and the capped hybrid), rounding, scoring.
//! - [`experiments`]: seeded Monte-Carlo sweeps over noise, query count,
//!   and error-bound multipliers, with CSV output.
//! - [`cli`]: the `lprecon` command-line front end.

pub mod cli;
pub mod dataset;
pub mod digits;
pub mod experiments;
pub mod lp;
pub mod oracle;
pub mod querygen;
pub mod reconstruct;
pub mod seed;

pub use dataset::{Dataset, PresenceInstance};
pub use oracle::{AnswerSet, NoiseModel};
pub use querygen::QueryFamily;
pub use reconstruct::{Method, ReconstructionResult};
