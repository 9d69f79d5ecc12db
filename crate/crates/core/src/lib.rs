//! Political-actor representation learning over heterogeneous information
//! networks.
//!
//! The pipeline: build a typed graph of actors and their social context
//! ([`hin`]), load or synthesize features and think-tank scores
//! ([`ingest`]), encode nodes with a gated relational GCN ([`model`]), train
//! it against expert-label, stance-consistency and echo-chamber objectives
//! ([`objectives`], [`trainer`]), then inspect the result ([`analysis`]) or
//! feed it to a roll-call vote predictor ([`vote`]).

pub mod analysis;
pub mod hin;
pub mod ingest;
pub mod model;
pub mod numkit;
pub mod objectives;
pub mod rng;
pub mod trainer;
pub mod vote;
