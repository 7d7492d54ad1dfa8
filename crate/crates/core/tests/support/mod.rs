//! Shared fixtures for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;

use devchain::castore::ContentId;
use devchain::client::{query_typed, submit_and_wait, ChainAccess, LocalChain, NonceSource, RetryPolicy};
use devchain::consensus::{GenesisSpec, LocalNetwork, NetworkTopology, OrderingPolicy, TxLocation};
use devchain::contracts::{keys, Agreement, BuildSubmission, Call, Project, Side, Verdict};
use devchain::ledger::{generate_identity, Identity, MemberId, Role, SecretKey, Transaction};

/// A member with its key and a private nonce sequence.
pub struct Actor {
    pub identity: Identity,
    pub key: SecretKey,
    nonces: NonceSource,
}

impl Actor {
    pub fn new(role: Role, org: &str) -> Actor {
        let (identity, key) = generate_identity(role, org);
        Actor { identity, key, nonces: NonceSource::starting_at(1) }
    }

    pub fn id(&self) -> MemberId {
        self.identity.member_id
    }

    pub fn sign(&self, project: &str, call: Call) -> Transaction {
        call.sign(project, &self.key, 0, self.nonces.next())
    }

    /// Submits and waits for commit; panics only on transport failure.
    pub fn commit(&self, chain: &dyn ChainAccess, project: &str, call: Call) -> TxLocation {
        submit_and_wait(chain, &self.sign(project, call), RetryPolicy::default()).expect("committed")
    }

    pub fn ok(&self, chain: &dyn ChainAccess, project: &str, call: Call) -> TxLocation {
        let loc = self.commit(chain, project, call);
        assert!(loc.valid, "{:?}", loc.error);
        loc
    }
}

pub fn genesis(actors: &[&Actor], fund_cents: u64, time_scale_divisor: u64) -> GenesisSpec {
    GenesisSpec {
        identities: actors.iter().map(|a| a.identity.clone()).collect(),
        allocations: actors.iter().map(|a| (a.id(), fund_cents)).collect::<BTreeMap<_, _>>(),
        time_scale_divisor,
    }
}

/// A four-org in-process network whose clock only moves when advanced.
pub fn local_chain(actors: &[&Actor], fund_cents: u64, time_scale_divisor: u64, start_ms: u64) -> LocalChain {
    let policy = OrderingPolicy { heartbeat_ms: None, ..OrderingPolicy::default() };
    let net = LocalNetwork::new(
        NetworkTopology::with_orgs(4),
        policy,
        SecretKey::generate(),
        &genesis(actors, fund_cents, time_scale_divisor),
        start_ms,
    );
    LocalChain::new(net)
}

pub fn terms_cid() -> ContentId {
    ContentId::of(b"terms of engagement")
}

/// Creates `id` owned by `owner`, adds `members`, and has both sides accept.
pub fn active_project(chain: &dyn ChainAccess, id: &str, owner: &Actor, client: &Actor, members: &[&Actor], agreement: &Agreement) {
    owner.ok(chain, id, Call::create_project("demo", &terms_cid(), agreement));
    owner.ok(chain, id, Call::add_member(&client.identity));
    for m in members {
        owner.ok(chain, id, Call::add_member(&m.identity));
    }
    owner.ok(chain, id, Call::accept_terms(Side::Team));
    client.ok(chain, id, Call::accept_terms(Side::Client));
}

pub fn project(chain: &dyn ChainAccess, id: &str) -> Project {
    query_typed(chain, &keys::project(id)).unwrap().expect("project exists")
}

pub fn submission(version: &str, verdicts: [Verdict; 3]) -> BuildSubmission {
    let passed = verdicts.iter().all(|v| *v == Verdict::Pass);
    BuildSubmission {
        name: "app".into(),
        version: version.into(),
        time: "12:00:00".into(),
        date: "2024-01-01".into(),
        package_cid: passed.then(|| ContentId::of(version.as_bytes())),
        review: verdicts[0],
        unit: verdicts[1],
        integration: verdicts[2],
    }
}
