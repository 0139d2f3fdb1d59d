//! Internal stability of linear leader-follower formations.
//!
//! A formation is a set of agents `ẋ_i = A_i x_i + B_i u_i` linked by an
//! acyclic "follows" digraph whose edges `(i, j)` carry a desired displacement
//! `d_ij` (ideally `x_i + d_ij = x_j`). This crate
//!
//! * validates formation instances and computes their level structure
//!   ([`model`], [`levels`]),
//! * decides linear internal stability and reports evidence for every
//!   condition ([`criterion`]),
//! * synthesizes affine follower controllers and samples the full family of
//!   stabilizing controllers ([`synthesis`]),
//! * simulates the closed loop and checks the exponential-plus-gain error
//!   envelope ([`simulation`]),
//! * analyzes two-element subformations ([`pairwise`]).
//!
//! Node ids are 1-based in every file and report; the in-memory types use
//! 0-based indices.

pub mod cli;
pub mod config;
pub mod corpus;
pub mod criterion;
pub mod levels;
pub mod model;
pub mod numerics;
pub mod pairwise;
pub mod serde_util;
pub mod simulation;
pub mod synthesis;

pub use config::{RunConfig, Tolerances};
pub use criterion::{check, classify, verify_controller, Corollary, CriterionReport, Verdict};
pub use levels::{decompose, find_multi_leader_witness, LevelDecomposition, MultiLeaderWitness};
pub use model::{validate, AgentDynamics, Edge, FormationSpec, ValidationError, ValidationIssue};
pub use synthesis::{ControllerSet, FollowerController, SplitStrategy};
