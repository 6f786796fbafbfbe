//! Specification-guided multi-agent control.
//!
//! The pipeline: parse a task specification ([`spec_lang`]), compile it into a
//! composite task monitor ([`monitor`]), find the states where agents must
//! agree on the next transition ([`sync`]), run distributed monitor copies
//! inside an augmented Markov game ([`game`]) scored by shaped rewards
//! ([`shaping`]), and train policies with an optional group curriculum
//! ([`scaling`], [`trainer`]) on the bundled environments ([`envs`]).
//! [`verify`] turns the framework's guarantees into executable checks and
//! [`config`] reads experiment files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod envs;
pub mod error;
pub mod game;
pub mod monitor;
pub mod scaling;
pub mod shaping;
pub mod spec_lang;
pub mod sync;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
pub use monitor::TaskMonitor;
pub use spec_lang::{parse, JointState, Predicate, Spec, Trajectory};
