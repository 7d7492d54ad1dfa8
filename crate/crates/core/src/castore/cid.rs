use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::ledger::Digest;

const PREFIX: &str = "sha256-";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed content id {0:?}")]
pub struct MalformedCid(pub String);

/// Address of an immutable object: `sha256-` followed by 64 lowercase hex
/// characters of the digest of the stored object bytes.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ContentId(Digest);

impl ContentId {
    pub fn of(bytes: &[u8]) -> ContentId {
        ContentId(Digest::of(bytes))
    }

    pub fn from_digest(digest: Digest) -> ContentId {
        ContentId(digest)
    }

    pub fn digest(&self) -> &Digest {
        &self.0
    }

    pub fn hex(&self) -> String {
        self.0.to_hex()
    }

    pub fn parse(s: &str) -> Result<ContentId, MalformedCid> {
        let hex = s.strip_prefix(PREFIX).ok_or_else(|| MalformedCid(s.to_string()))?;
        Digest::from_hex(hex).map(ContentId).map_err(|_| MalformedCid(s.to_string()))
    }

    pub fn render(&self) -> String {
        format!("{PREFIX}{}", self.0.to_hex())
    }
}

impl fmt::Display for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(PREFIX)?;
        f.write_str(&self.0.to_hex())
    }
}

impl fmt::Debug for ContentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ContentId({}…)", &self.render()[..19])
    }
}

impl FromStr for ContentId {
    type Err = MalformedCid;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ContentId::parse(s)
    }
}

impl Serialize for ContentId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.render())
    }
}

impl<'de> Deserialize<'de> for ContentId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        ContentId::parse(&s).map_err(serde::de::Error::custom)
    }
}
