use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::castore::ContentId;
use crate::ledger::{MemberId, PublicKey, Role};

pub const DAY_MS: u64 = 24 * 60 * 60 * 1000;
pub const DEFAULT_PERIOD_MS: u64 = 14 * DAY_MS;
pub const DEFAULT_GRACE_MS: u64 = 48 * 60 * 60 * 1000;
pub const NONPAYMENT_ACTION: &str = "StopProjectFunctions";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProjectStatus {
    Draft,
    Active,
    Frozen,
    /// No operation currently reaches this status.
    Closed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Project {
    pub project_id: String,
    pub name: String,
    pub owner: MemberId,
    pub status: ProjectStatus,
    pub terms_cid: ContentId,
    pub team_accepted: bool,
    pub client_accepted: bool,
    pub iteration_counter: u64,
    pub plan_count: u64,
    pub head_seq: u64,
    pub metric_count: u64,
    pub alert_count: u64,
    pub payment_count: u64,
    pub paid_cents: u64,
    /// Block time at which the next installment is due.
    pub next_due: Option<u64>,
    /// Completed iterations not yet paid for (per-iteration agreements only).
    pub dues_outstanding: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Member {
    pub member_id: MemberId,
    pub public_key: PublicKey,
    pub role: Role,
    pub org: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PaymentTrigger {
    PerIteration,
    PerTwoWeeks,
}

impl FromStr for PaymentTrigger {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "periteration" => Ok(PaymentTrigger::PerIteration),
            "pertwoweeks" => Ok(PaymentTrigger::PerTwoWeeks),
            _ => Err(format!("unknown payment trigger {s:?}")),
        }
    }
}

/// Payment terms fixed at project initiation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agreement {
    pub project_budget_cents: u64,
    pub installment_cents: u64,
    pub trigger: PaymentTrigger,
    #[serde(default = "default_period")]
    pub period_ms: u64,
    #[serde(default = "default_grace")]
    pub grace_ms: u64,
    #[serde(default = "default_action")]
    pub nonpayment_action: String,
}

fn default_period() -> u64 {
    DEFAULT_PERIOD_MS
}
fn default_grace() -> u64 {
    DEFAULT_GRACE_MS
}
fn default_action() -> String {
    NONPAYMENT_ACTION.to_string()
}

impl Agreement {
    pub fn new(budget_cents: u64, installment_cents: u64, trigger: PaymentTrigger) -> Agreement {
        Agreement {
            project_budget_cents: budget_cents,
            installment_cents,
            trigger,
            period_ms: DEFAULT_PERIOD_MS,
            grace_ms: DEFAULT_GRACE_MS,
            nonpayment_action: NONPAYMENT_ACTION.into(),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.project_budget_cents == 0 {
            return Err("budget must be positive".into());
        }
        if self.installment_cents == 0 {
            return Err("installment must be positive".into());
        }
        if self.installment_cents > self.project_budget_cents {
            return Err("installment exceeds budget".into());
        }
        if self.trigger == PaymentTrigger::PerTwoWeeks && self.period_ms == 0 {
            return Err("period must be positive".into());
        }
        if self.nonpayment_action != NONPAYMENT_ACTION {
            return Err(format!("non-payment action must be {NONPAYMENT_ACTION}"));
        }
        Ok(())
    }

    /// Reads the human-facing agreement JSON, e.g.
    /// `{"Project Budget": "$1000", "Payment After 1 Iteration": "$100",
    /// "In Case of Non Payment": "Stop Project's Functions"}`.
    /// Either "Payment After 1 Iteration" or "Payment After 2 Weeks" selects
    /// the trigger.
    pub fn from_terms_json(text: &str) -> Result<Agreement, String> {
        let doc: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let obj = doc.as_object().ok_or("agreement must be an object")?;
        let field = |k: &str| obj.get(k).and_then(|v| v.as_str());
        let budget = parse_dollars(field("Project Budget").ok_or("missing \"Project Budget\"")?)?;
        let (installment, trigger) = match (field("Payment After 1 Iteration"), field("Payment After 2 Weeks")) {
            (Some(p), None) => (parse_dollars(p)?, PaymentTrigger::PerIteration),
            (None, Some(p)) => (parse_dollars(p)?, PaymentTrigger::PerTwoWeeks),
            (Some(_), Some(_)) => return Err("both payment triggers given".into()),
            (None, None) => return Err("missing payment trigger".into()),
        };
        if let Some(action) = field("In Case of Non Payment") {
            let norm: String = action.chars().filter(|c| c.is_ascii_alphanumeric()).collect();
            if !norm.eq_ignore_ascii_case("StopProjectsFunctions") {
                return Err(format!("unsupported non-payment action {action:?}"));
            }
        }
        Ok(Agreement::new(budget, installment, trigger))
    }
}

/// `"$1000"` → 100000 cents, `"$12.5"` → 1250 cents.
pub fn parse_dollars(s: &str) -> Result<u64, String> {
    let t = s.trim().trim_start_matches('$').replace(',', "");
    let (whole, frac) = match t.split_once('.') {
        Some((w, f)) => (w, f),
        None => (t.as_str(), ""),
    };
    if whole.is_empty() || frac.len() > 2 || !whole.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(format!("bad amount {s:?}"));
    }
    let w: u64 = whole.parse().map_err(|_| format!("bad amount {s:?}"))?;
    let f: u64 = if frac.is_empty() { 0 } else { format!("{frac:0<2}").parse().unwrap_or(0) };
    w.checked_mul(100).and_then(|c| c.checked_add(f)).ok_or_else(|| format!("amount overflow {s:?}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuildStatus {
    Built,
    GatePassed,
    Deployed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateFlags {
    pub quality: bool,
    pub security: bool,
    pub compliance: bool,
    pub attester: MemberId,
}

impl GateFlags {
    pub fn all_true(&self) -> bool {
        self.quality && self.security && self.compliance
    }
}

/// What a CI run reports about one build.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildSubmission {
    pub name: String,
    pub version: String,
    pub time: String,
    pub date: String,
    pub package_cid: Option<ContentId>,
    pub review: Verdict,
    pub unit: Verdict,
    pub integration: Verdict,
}

impl BuildSubmission {
    pub fn all_pass(&self) -> bool {
        [self.review, self.unit, self.integration].iter().all(|v| *v == Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildRecord {
    pub name: String,
    pub version: String,
    pub time: String,
    pub date: String,
    pub package_cid: Option<ContentId>,
    pub review: Verdict,
    pub unit: Verdict,
    pub integration: Verdict,
    pub status: BuildStatus,
    pub gate: Option<GateFlags>,
    pub deployed_target: Option<String>,
    pub recorded_height: u64,
}

impl BuildRecord {
    pub fn stages_pass(&self) -> bool {
        [self.review, self.unit, self.integration].iter().all(|v| *v == Verdict::Pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanKind {
    Recording,
    Notes,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub record_id: u64,
    pub artifact_cid: ContentId,
    pub kind: PlanKind,
    pub recorded_by: MemberId,
    pub height: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoHead {
    pub head_seq: u64,
    pub commit_cid: ContentId,
    pub pushed_by: MemberId,
    pub height: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub seq: u64,
    pub metric_name: String,
    pub scaled_value: i64,
    /// Power of ten dividing `scaled_value`.
    pub scale: u32,
    pub height: u64,
    pub recorded_by: MemberId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Severity {
    Low,
    Medium,
    High,
    Critical,
}

impl FromStr for Severity {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Severity::Low),
            "medium" => Ok(Severity::Medium),
            "high" => Ok(Severity::High),
            "critical" => Ok(Severity::Critical),
            _ => Err(format!("unknown severity {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertRecord {
    pub alert_id: u64,
    pub severity: Severity,
    pub description: String,
    pub raised_by: MemberId,
    pub height: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaymentReceipt {
    pub seq: u64,
    pub amount_cents: u64,
    pub from: MemberId,
    pub to: MemberId,
    pub height: u64,
    pub block_timestamp: u64,
    pub paid_total_cents: u64,
    pub next_due: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub orderer: MemberId,
    pub time_scale_divisor: u64,
}

impl ChainConfig {
    /// Maps an agreement duration to block-time milliseconds.
    pub fn scale(&self, ms: u64) -> u64 {
        ms / self.time_scale_divisor.max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Team,
    Client,
}

impl FromStr for Side {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "team" => Ok(Side::Team),
            "client" => Ok(Side::Client),
            _ => Err(format!("unknown side {s:?}")),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Team => "Team",
            Side::Client => "Client",
        })
    }
}
