//! Static analyzer for GRAFCET specifications (IEC 60848).
//!
//! The pipeline: parse a textual specification, validate the model, check the
//! structural concurrency rules, then run a flow-sensitive abstract
//! interpretation with an interval domain over each sequential partial chart
//! and derive reachability / firing diagnostics from the per-node
//! environments.

pub mod domain;
pub mod expr;
pub mod model;
