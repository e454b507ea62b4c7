//! A logic-synthesis toolkit built around one idea: most node-level
//! transformations attempted by an optimization operator do nothing, so learn
//! which nodes are worth visiting and skip the rest.
//!
//! The crate provides:
//!
//! - an And-Inverter Graph core with AIGER I/O and structural hashing
//!   ([`aig`], [`aiger`]),
//! - bit-parallel truth-table simulation and equivalence checking ([`sim`]),
//! - a windowed resubstitution operator that emits per-node effectiveness
//!   labels ([`resub`]),
//! - bipartite-subgraph feature extraction ([`features`]) and labeled
//!   dataset / domain management ([`dataset`]),
//! - a from-scratch dense neural stack: bipartite-graph encoder, multi-head
//!   domain-aware classifier, focal loss, Adam ([`nn`]),
//! - the online pruned operator run: one-shot scoring, top-k selection,
//!   filtered optimization ([`prune`]),
//! - evaluation metrics and reports ([`metrics`]), benchmark generators
//!   ([`generators`]) and the batch pipeline ([`pipeline`]).
//!
//! See the crate `examples/` directory for a runnable tour of each piece.

pub mod aig;
pub mod aiger;
pub mod dataset;
pub mod features;
pub mod generators;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod prune;
pub mod resub;
pub mod sim;

pub use aig::{Aig, AigBuilder, Edge, Node, NodeId};
pub use aiger::{parse_aiger, read_aiger_file, write_aiger_file};
pub use sim::{circuits_equivalent, EquivMode, EquivVerdict, TruthTable};
