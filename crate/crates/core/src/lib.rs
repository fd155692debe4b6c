//! Core of a hybrid prehensile / non-prehensile manipulation planner.
//!
//! Everything here is `no_std` + `alloc`: the geometry kernel, the
//! quasi-static tabletop twin, the five-primitive domain, sub-goal
//! rehearsal, the heuristic controllers, the scripted planner, and the
//! episode loop. IO, HTTP, and the CLI live in the `pnp` companion crate.
#![no_std]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod domain;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod planner;
pub mod render;
pub mod scenarios;
pub mod subgoal;
pub mod twin;

pub use error::{Error, Result};
