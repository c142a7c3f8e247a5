pub mod cli;
pub mod config;
pub mod corpus;
pub mod eval;
pub mod generation;
pub mod geo;
pub mod mechanism;
pub mod region;
pub mod retrieval;
pub mod semantics;
