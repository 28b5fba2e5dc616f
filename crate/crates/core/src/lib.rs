//! Answering existentially quantified conjunctive queries over incomplete
//! knowledge graphs with a learned, GNN-guided search.
//!
//! The pipeline: a [`query::DnfQuery`] is bound against a
//! [`kg::KnowledgeGraph`], encoded as a [`compgraph::ComputationalGraph`],
//! and searched by the policy in [`policy`] under Gödel scoring
//! ([`fuzzy`]) with a pluggable [`predictor::LinkPredictor`].

pub mod compgraph;
pub mod eval;
pub mod fuzzy;
pub mod kg;
pub mod policy;
pub mod predictor;
pub mod query;
pub mod benchgen;
pub mod search;
pub mod synth;
pub mod templates;
pub mod trainer;
