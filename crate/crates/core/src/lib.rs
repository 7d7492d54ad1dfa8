//! Permissioned ledger toolkit for distributed DevOps.

pub mod bench;
pub mod canonical;
pub mod castore;
pub mod cli;
pub mod client;
pub mod consensus;
pub mod contracts;
pub mod ledger;
pub mod node;
pub mod pipeline;
