//! Node daemons: a peer per organization and the orderer, each persisting
//! its chain to a block log and speaking the frame protocol. Peers serve
//! client RPC on their own endpoint.

pub mod client;
pub mod config;
pub mod demo;
pub mod orderer;
pub mod peer;
pub mod rpc;
mod server;
pub mod storage;
pub mod trail;

use thiserror::Error;

pub use client::{EventStream, NodeClient};
pub use config::{NetworkConfig, OrgConfig, TransportKind, DATA_DIR_ENV};
pub use demo::DemoNetwork;
pub use orderer::{OrdererNode, OrdererOptions};
pub use peer::{peer_name, PeerNode, PeerOptions};
pub use storage::{audit_block_log, BlockLog, DiskCounters, LogError};
pub use trail::{audit_trail, verify_remote_chain, TrailEntry};

#[derive(Debug, Error)]
pub enum NodeError {
    #[error("endpoint {0} is already in use")]
    PortInUse(String),
    #[error("stored chain is corrupt at height {height}: {reason}")]
    CorruptChain { height: u64, reason: String },
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

impl NodeError {
    pub fn code(&self) -> &'static str {
        match self {
            NodeError::PortInUse(_) => "PortInUse",
            NodeError::CorruptChain { .. } => "CorruptChain",
            NodeError::Config(_) => "BadConfig",
            NodeError::Io(_) => "Io",
        }
    }

    fn bind(endpoint: &str, e: std::io::Error) -> NodeError {
        match e.kind() {
            std::io::ErrorKind::AddrInUse => NodeError::PortInUse(endpoint.to_string()),
            _ => NodeError::Io(format!("{endpoint}: {e}")),
        }
    }
}

impl From<LogError> for NodeError {
    fn from(e: LogError) -> NodeError {
        match e {
            LogError::Corrupt { index, offset, reason } => {
                NodeError::CorruptChain { height: index, reason: format!("block log offset {offset}: {reason}") }
            }
            LogError::Io(e) => NodeError::Io(e.to_string()),
        }
    }
}
