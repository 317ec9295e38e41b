//! Task planning for flexible assembly lines.
//!
//! A natural-language request is turned into a station-allocated subtask
//! list by combining knowledge-graph retrieval ([`retrieval`] over
//! [`kgraph`]), scene grounding ([`scenegraph`]) and a self-reflective line
//! balancer ([`linebalance`]), coordinated by [`orchestrator`].

pub mod backend;
pub mod evalharness;
pub mod kgraph;
pub mod linebalance;
pub mod orchestrator;
pub mod retrieval;
pub mod scenegraph;
