use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::canonical::{from_doc, parse_doc, to_canonical_bytes};
use crate::consensus::{GenesisSpec, NetworkTopology, OrderingPolicy};
use crate::ledger::{Identity, MemberId, PublicKey, SecretKey};

/// Overrides `data_dir` from the config file when set.
pub const DATA_DIR_ENV: &str = "DEVCHAIN_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransportKind {
    Tcp,
    /// In-process only; useful for tests and single-process demos.
    Loopback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrgConfig {
    pub name: String,
    /// Where the org's peer serves RPC.
    pub peer_endpoint: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub transport: TransportKind,
    pub orgs: Vec<OrgConfig>,
    pub orderer_endpoint: String,
    pub orderer_public_key: PublicKey,
    pub policy: OrderingPolicy,
    pub time_scale_divisor: u64,
    /// Identities registered at genesis.
    pub identities: Vec<Identity>,
    pub allocations: BTreeMap<MemberId, u64>,
    pub data_dir: String,
}

impl NetworkConfig {
    /// `orgs` organizations on consecutive TCP ports of `host`, orderer first.
    pub fn tcp(orgs: usize, host: &str, base_port: u16, orderer: &SecretKey, data_dir: &str) -> NetworkConfig {
        let topology = NetworkTopology::with_orgs(orgs);
        NetworkConfig {
            transport: TransportKind::Tcp,
            orgs: topology
                .orgs
                .iter()
                .enumerate()
                .map(|(i, name)| OrgConfig { name: name.clone(), peer_endpoint: format!("{host}:{}", base_port + 1 + i as u16) })
                .collect(),
            orderer_endpoint: format!("{host}:{base_port}"),
            orderer_public_key: orderer.public_key(),
            policy: OrderingPolicy::default(),
            time_scale_divisor: 1,
            identities: Vec::new(),
            allocations: BTreeMap::new(),
            data_dir: data_dir.to_string(),
        }
    }

    /// Same layout with loopback endpoint names.
    pub fn loopback(orgs: usize, orderer: &SecretKey, data_dir: &str) -> NetworkConfig {
        let mut cfg = NetworkConfig::tcp(orgs, "", 0, orderer, data_dir);
        cfg.transport = TransportKind::Loopback;
        cfg.orderer_endpoint = "orderer.example.com".into();
        for org in &mut cfg.orgs {
            org.peer_endpoint = format!("peer0.{}.example.com", org.name);
        }
        cfg
    }

    pub fn validate(&self) -> Result<(), String> {
        self.topology().validate()?;
        self.policy.validate()?;
        if self.time_scale_divisor == 0 {
            return Err("time_scale_divisor must be at least 1".into());
        }
        let mut seen = HashSet::new();
        for ep in std::iter::once(&self.orderer_endpoint).chain(self.orgs.iter().map(|o| &o.peer_endpoint)) {
            // Port 0 asks the OS for a fresh port, so repeats cannot collide.
            if !ep.ends_with(":0") && !seen.insert(ep.as_str()) {
                return Err(format!("endpoint {ep} is used twice"));
            }
        }
        Ok(())
    }

    pub fn topology(&self) -> NetworkTopology {
        NetworkTopology { orgs: self.orgs.iter().map(|o| o.name.clone()).collect() }
    }

    pub fn genesis_spec(&self) -> GenesisSpec {
        GenesisSpec {
            identities: self.identities.clone(),
            allocations: self.allocations.clone(),
            time_scale_divisor: self.time_scale_divisor,
        }
    }

    pub fn org(&self, name: &str) -> Option<&OrgConfig> {
        self.orgs.iter().find(|o| o.name == name)
    }

    pub fn data_dir(&self) -> PathBuf {
        PathBuf::from(&self.data_dir)
    }

    pub fn peer_dir(&self, org: &str) -> PathBuf {
        self.data_dir().join(format!("peer0.{org}"))
    }

    pub fn orderer_dir(&self) -> PathBuf {
        self.data_dir().join("orderer")
    }

    /// Where `network init` keeps the orderer's signing key.
    pub fn orderer_key_path(&self) -> PathBuf {
        self.orderer_dir().join("orderer.key")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<NetworkConfig, String> {
        let doc = parse_doc(bytes).map_err(|e| e.to_string())?;
        let cfg: NetworkConfig = from_doc(&doc).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, applying the data directory override.
    pub fn load(path: &Path) -> Result<NetworkConfig, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg = NetworkConfig::from_bytes(&bytes)?;
        if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
            if !dir.is_empty() {
                cfg.data_dir = dir;
            }
        }
        Ok(cfg)
    }

    pub fn to_canonical(&self) -> Vec<u8> {
        to_canonical_bytes(self).expect("config holds no floats")
    }
}

/// Reads a hex secret key file.
pub fn read_secret(path: &Path) -> Result<SecretKey, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    SecretKey::from_hex(text.trim()).map_err(|e| format!("{}: {e}", path.display()))
}
