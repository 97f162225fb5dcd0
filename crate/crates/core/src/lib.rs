//! Simulation lab for universal online learning with unbounded losses.
//!
//! The crate provides seeded instance processes, the memorization and
//! Fréchet-mean memorizer learning rules, randomized countable partitions of
//! the unit interval (and of general spaces via greedy covers), adversarial
//! targets and hypothesis-test foolers, and a Monte-Carlo harness that checks
//! each probabilistic bound with one-sided 0.99 confidence.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adversary;
pub mod frechet;
pub mod harness;
pub mod learner;
pub mod loss;
pub mod metric_space;
pub mod partition;
pub mod process;
pub mod seeding;
pub mod stats;
