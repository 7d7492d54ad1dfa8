use std::collections::BTreeMap;
use std::ops::Bound;

use super::hash::Digest;
use crate::canonical::{canonical_encode, Doc};

/// Document-oriented world state: string keys to canonical documents.
///
/// The store is only mutated by block replay. `version` is the height of the
/// last applied block, `None` before genesis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateStore {
    documents: BTreeMap<String, Doc>,
    version: Option<u64>,
}

impl StateStore {
    pub fn new() -> StateStore {
        StateStore::default()
    }

    pub fn version(&self) -> Option<u64> {
        self.version
    }

    pub(crate) fn set_version(&mut self, height: u64) {
        self.version = Some(height);
    }

    pub fn get(&self, key: &str) -> Option<&Doc> {
        self.documents.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.documents.contains_key(key)
    }

    pub(crate) fn put(&mut self, key: String, doc: Doc) {
        self.documents.insert(key, doc);
    }

    pub(crate) fn delete(&mut self, key: &str) {
        self.documents.remove(key);
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// All documents whose key starts with `prefix`, in key order.
    pub fn scan_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a String, &'a Doc)> + 'a {
        self.documents
            .range::<str, _>((Bound::Included(prefix), Bound::Unbounded))
            .take_while(move |(k, _)| k.starts_with(prefix))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Doc)> {
        self.documents.iter()
    }

    /// Canonical encoding of every document as one object in key order.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let map: serde_json::Map<String, Doc> =
            self.documents.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        canonical_encode(&Doc::Object(map)).expect("state documents are canonical")
    }

    pub fn digest(&self) -> Digest {
        Digest::of(&self.canonical_bytes())
    }
}
