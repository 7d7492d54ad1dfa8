//! Ordering and replication: a single orderer batches signed transactions
//! into blocks, and every organization's peer replays them through the
//! contract engine in the same order.

pub mod local;
pub mod orderer;
pub mod replica;
pub mod transport;
pub mod wire;

use serde::{Deserialize, Serialize};

pub use local::LocalNetwork;
pub use orderer::{cut_batch, genesis_block, GenesisSpec, OrderingPolicy, OrderingService, SoloOrderer};
pub use replica::{apply_block, state_digest, BlockOutcome, Event, Replica, TxLocation, TxResult};

/// Organizations, one peer each, plus exactly one orderer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub orgs: Vec<String>,
}

impl Default for NetworkTopology {
    fn default() -> Self {
        NetworkTopology::with_orgs(4)
    }
}

impl NetworkTopology {
    pub fn with_orgs(n: usize) -> NetworkTopology {
        NetworkTopology { orgs: (1..=n).map(|i| format!("org{i}")).collect() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.orgs.is_empty() {
            return Err("at least one organization is required".into());
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = self.orgs.iter().find(|o| !seen.insert(o.as_str())) {
            return Err(format!("duplicate organization {dup:?}"));
        }
        Ok(())
    }
}
