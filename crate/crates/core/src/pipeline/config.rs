use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::canonical::{from_doc, parse_doc, to_canonical_bytes};
use crate::castore::{CaStore, ContentId};
use crate::contracts::{keys, Verdict};
use crate::ledger::Digest;

/// Name of the config file checked into the repository root.
pub const CONFIG_FILE: &str = "devchain.pipeline";
pub const HEAD_SEQ_PLACEHOLDER: &str = "<head_seq>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Review,
    Unit,
    Integration,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Review, Stage::Unit, Stage::Integration];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RuleKind {
    /// No file may exceed `limit` bytes.
    MaxFileBytes { limit: u64 },
    /// No file may contain `pattern`. The root pipeline config is exempt,
    /// since it necessarily spells out its own patterns.
    ForbiddenPattern { pattern: String },
    /// `path` must exist as a file or directory.
    RequiredPath { path: String },
    /// The file at `path` must have this SHA-256 digest.
    ManifestAssertion { path: String, expected_digest: Digest },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckRule {
    pub rule: RuleKind,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub stage: Stage,
    pub checks: Vec<CheckRule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageSpec {
    pub name: String,
    #[serde(default = "default_version_template")]
    pub version_template: String,
    pub include_paths: Vec<String>,
}

fn default_version_template() -> String {
    format!("0.1.{HEAD_SEQ_PLACEHOLDER}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub stages: Vec<StageSpec>,
    pub package: PackageSpec,
    pub deploy_target: String,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.stages.windows(2).any(|w| w[0].stage >= w[1].stage) {
            return Err("stages must appear once each, in Review, Unit, Integration order".into());
        }
        if !self.package.version_template.contains(HEAD_SEQ_PLACEHOLDER) {
            return Err(format!("version_template must contain {HEAD_SEQ_PLACEHOLDER} so each run gets a new version"));
        }
        if !keys::valid_build_part(&self.package.name) || !keys::valid_build_part(&self.version_for(0)) {
            return Err("package name and version may not contain '/' or '@'".into());
        }
        Ok(())
    }

    pub fn version_for(&self, head_seq: u64) -> String {
        self.package.version_template.replace(HEAD_SEQ_PLACEHOLDER, &head_seq.to_string())
    }

    pub fn checks_for(&self, stage: Stage) -> &[CheckRule] {
        self.stages.iter().find(|s| s.stage == stage).map(|s| s.checks.as_slice()).unwrap_or(&[])
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PipelineConfig, String> {
        let doc = parse_doc(bytes).map_err(|e| e.to_string())?;
        let cfg: PipelineConfig = from_doc(&doc).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<PipelineConfig, String> {
        let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
        PipelineConfig::from_bytes(&bytes)
    }

    /// Reads `devchain.pipeline` from the root of a snapshot.
    pub fn from_tree(store: &CaStore, tree: &ContentId) -> Result<PipelineConfig, String> {
        let cid = store.resolve_path(tree, CONFIG_FILE).map_err(|e| e.to_string())?;
        PipelineConfig::from_bytes(&store.get(&cid).map_err(|e| e.to_string())?)
    }

    pub fn to_canonical(&self) -> Vec<u8> {
        to_canonical_bytes(self).expect("config holds no floats")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub rule: String,
    pub path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageResult {
    pub stage: Stage,
    pub verdict: Verdict,
    pub failures: Vec<Failure>,
}

/// Evaluates one stage's rules against a snapshot. Pure over the tree.
pub fn run_stage(store: &CaStore, tree: &ContentId, stage: Stage, rules: &[CheckRule]) -> Result<StageResult, crate::castore::StoreError> {
    let files = store.list_files(tree)?;
    let mut failures = Vec::new();
    for rule in rules {
        let fail = |path: Option<&str>| Failure { rule: rule.description.clone(), path: path.map(str::to_string) };
        match &rule.rule {
            RuleKind::MaxFileBytes { limit } => {
                failures.extend(files.iter().filter(|f| f.2 > *limit).map(|f| fail(Some(&f.0))));
            }
            RuleKind::ForbiddenPattern { pattern } => {
                let needle = pattern.as_bytes();
                for (path, cid, _) in files.iter().filter(|f| f.0 != CONFIG_FILE) {
                    let bytes = store.get(cid)?;
                    if needle.is_empty() || bytes.windows(needle.len()).any(|w| w == needle) {
                        failures.push(fail(Some(path)));
                    }
                }
            }
            RuleKind::RequiredPath { path } => {
                if store.resolve_path(tree, path.trim_end_matches('/')).is_err() {
                    failures.push(fail(Some(path)));
                }
            }
            RuleKind::ManifestAssertion { path, expected_digest } => {
                let ok = store
                    .resolve_path(tree, path)
                    .ok()
                    .filter(|cid| store.read_tree(cid).is_err())
                    .and_then(|cid| store.get(&cid).ok())
                    .is_some_and(|bytes| Digest::of(&bytes) == *expected_digest);
                if !ok {
                    failures.push(fail(Some(path)));
                }
            }
        }
    }
    let verdict = if failures.is_empty() { Verdict::Pass } else { Verdict::Fail };
    Ok(StageResult { stage, verdict, failures })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample() -> PipelineConfig {
        PipelineConfig {
            stages: vec![
                StageSpec {
                    stage: Stage::Review,
                    checks: vec![CheckRule { rule: RuleKind::ForbiddenPattern { pattern: "FIXME".into() }, description: "no FIXME markers".into() }],
                },
                StageSpec {
                    stage: Stage::Unit,
                    checks: vec![CheckRule { rule: RuleKind::RequiredPath { path: "tests".into() }, description: "tests exist".into() }],
                },
                StageSpec {
                    stage: Stage::Integration,
                    checks: vec![CheckRule { rule: RuleKind::MaxFileBytes { limit: 1024 }, description: "small files".into() }],
                },
            ],
            package: PackageSpec { name: "app".into(), version_template: default_version_template(), include_paths: vec!["src".into()] },
            deploy_target: "/tmp/deploy".into(),
        }
    }

    #[test]
    fn config_file_roundtrip_and_version() {
        let cfg = sample();
        assert_eq!(PipelineConfig::from_bytes(&cfg.to_canonical()).unwrap(), cfg);
        assert_eq!(cfg.version_for(7), "0.1.7");
    }

    #[test]
    fn stage_order_enforced() {
        let mut cfg = sample();
        cfg.stages.swap(0, 1);
        assert!(cfg.validate().is_err());
        let mut cfg = sample();
        cfg.package.version_template = "1.0".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rules_evaluate_over_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let store = CaStore::open(dir.path()).unwrap();
        let tree = store.put_files([("src/lib.rs", &b"// FIXME later"[..]), ("big.bin", &[0u8; 2000][..])]).unwrap();
        let cfg = sample();
        let results: Vec<StageResult> =
            Stage::ALL.iter().map(|s| run_stage(&store, &tree, *s, cfg.checks_for(*s)).unwrap()).collect();
        assert_eq!(results[0].failures, vec![Failure { rule: "no FIXME markers".into(), path: Some("src/lib.rs".into()) }]);
        assert_eq!(results[1].verdict, Verdict::Fail);
        assert_eq!(results[2].failures[0].path.as_deref(), Some("big.bin"));
        for r in &results {
            assert_eq!(r.verdict == Verdict::Pass, r.failures.is_empty());
        }

        let rule = |digest| CheckRule { rule: RuleKind::ManifestAssertion { path: "src/lib.rs".into(), expected_digest: digest }, description: "pinned".into() };
        let ok = run_stage(&store, &tree, Stage::Unit, &[rule(Digest::of(b"// FIXME later"))]).unwrap();
        assert_eq!(ok.verdict, Verdict::Pass);
        let bad = run_stage(&store, &tree, Stage::Unit, &[rule(Digest::of(b"other"))]).unwrap();
        assert_eq!(bad.verdict, Verdict::Fail);
    }
}
