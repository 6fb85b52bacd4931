//! Optimal IF-THEN rule discovery over structure-constrained decision trees.
//!
//! A rule is a root-to-leaf path of a tree whose shape, per-node feature
//! groups and candidate leaves are fixed by a [`StructureSpec`]. Rules are
//! scored by the VI index `N - w L` and the best one is found either by the
//! exact search in [`search`] or by an external MIP solver fed the model
//! from [`mip`].

pub mod bench;
pub mod commands;
pub mod dataset;
pub mod error;
pub mod heuristics;
pub mod mip;
pub mod problem;
pub mod rules;
pub mod search;
pub mod synth;
pub mod topology;

pub use bench::{cmd_bench, BenchReport, Method};
pub use commands::{cmd_emit, cmd_eval, cmd_fit, cmd_groups, cmd_sweep, EmitFormat, RunConfig};
pub use dataset::{Dataset, FeatureGroup, Schema};
pub use error::{Error, Result};
pub use heuristics::{bsccart_fit, rscrules_fit};
pub use problem::Problem;
pub use rules::{evaluate, Rule, RuleFile, RuleStats, Weight};
pub use search::{solve, Budget, OptResult, Status};
pub use topology::{StructureSpec, TreeShape};
