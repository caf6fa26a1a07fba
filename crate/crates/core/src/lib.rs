//! Solver library for a family of structured linear programs: tensor
//! variables under disjoint-support binary equality blocks and an
//! entrywise capacity bound. The family covers capacity-constrained
//! multi-marginal optimal transport and reconstruction from tomographic
//! projections.
//!
//! The main entry point is [`eppa::solve_ieppa`], an inexact entropic
//! proximal point loop whose subproblems are solved by dual block
//! coordinate descent ([`bcd`]). A Dykstra-with-KL-projections baseline
//! ([`dykl`]) and an exact simplex oracle for desk-scale verification
//! ([`oracle`]) round out the toolbox, with instance generators ([`gen`]),
//! a tomography front end ([`tomo`]) and JSON/PGM interchange formats.

pub mod bcd;
pub mod constraints;
pub mod dykl;
pub mod entropy;
pub mod eppa;
pub mod error;
pub mod gen;
pub mod oracle;
pub mod tensor;
pub mod tomo;

pub use constraints::{cmot_marginal_blocks, tomo_block, Instance, PartitionBlock};
pub use error::{Error, Result};
pub use tensor::{Dims, Tensor3};
