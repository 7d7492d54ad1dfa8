//! One benchmark round: a workload driven against the system under test by
//! a pool of workers following a precomputed schedule.

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use crossbeam_channel::unbounded;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::schedule::{next_send_offsets, Rate, Termination};

/// State-changing operation issued by write rounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum WriteOp {
    /// Moves `cents` from the worker's account to the next worker's.
    Transfer { cents: u64 },
    /// Appends a metric sample to the bench project.
    RecordMetric { metric_name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Workload {
    /// Keyed reads. `{n}` in the pattern is replaced by a zero-padded key
    /// number cycling through `1..=key_count`.
    QueryState { key_pattern: String, key_count: u64 },
    SubmitWrite { write: WriteOp },
}

impl Workload {
    pub fn key_for(pattern: &str, key_count: u64, seq: u64) -> String {
        pattern.replace("{n}", &format!("{:010}", seq % key_count.max(1) + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSpec {
    pub index: u32,
    pub label: String,
    pub workload: Workload,
    pub termination: Termination,
    pub rate: Rate,
    pub workers: u32,
}

impl RoundSpec {
    /// `Round<i>-<label>-<termination>-<rate>`, the row name in reports.
    pub fn name(&self) -> String {
        format!("Round{}-{}-{}-{}", self.index, self.label, self.termination.name(), self.rate.name())
    }

    pub fn validate(&self) -> Result<(), String> {
        self.rate.validate()?;
        self.termination.validate()?;
        if self.workers == 0 {
            return Err("a round needs at least one worker".into());
        }
        if self.label.is_empty() || self.label.contains('-') {
            return Err(format!("round label {:?} must be non-empty and free of '-'", self.label));
        }
        if let Workload::QueryState { key_count: 0, .. } = self.workload {
            return Err("key_count must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdapterError {
    /// The transaction completed unsuccessfully; counted as a failure.
    #[error("transaction failed: {0}")]
    Failed(String),
    /// The system under test cannot be reached; the round is abandoned.
    #[error("system under test unavailable: {0}")]
    Unavailable(String),
}

/// What a round drives. `execute` returns once the transaction has been
/// confirmed (or has failed), so its duration is the latency.
pub trait SutAdapter: Sync {
    fn execute(&self, worker: u32, seq: u64) -> Result<(), AdapterError>;
}

/// Timing of one attempted transaction, relative to the round start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub sent: Duration,
    pub done: Duration,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub name: String,
    pub succ: u64,
    pub fail: u64,
    pub send_rate_tps: f64,
    pub max_latency_s: f64,
    pub min_latency_s: f64,
    pub avg_latency_s: f64,
    pub throughput_tps: f64,
    /// Set when the round was cut short because the system went away.
    #[serde(default)]
    pub partial: bool,
}

impl RoundMetrics {
    /// Aggregates samples. Send rate is attempts over the span of send
    /// instants; throughput is successes over first send to last
    /// confirmation; latencies are taken over successful transactions, or
    /// over all of them when none succeeded.
    pub fn from_samples(name: String, samples: &[Sample], partial: bool) -> RoundMetrics {
        let succ = samples.iter().filter(|s| s.ok).count() as u64;
        let fail = samples.len() as u64 - succ;
        let first_send = samples.iter().map(|s| s.sent).min().unwrap_or_default();
        let last_send = samples.iter().map(|s| s.sent).max().unwrap_or_default();
        let last_done = samples.iter().map(|s| s.done).max().unwrap_or_default();
        let per_sec = |n: u64, span: Duration| if span.is_zero() { 0.0 } else { n as f64 / span.as_secs_f64() };

        let ok: Vec<f64> = samples.iter().filter(|s| s.ok).map(latency).collect();
        let lat = if ok.is_empty() { samples.iter().map(latency).collect() } else { ok };
        let (min, max, avg) = if lat.is_empty() {
            (0.0, 0.0, 0.0)
        } else {
            let min = lat.iter().copied().fold(f64::INFINITY, f64::min);
            let max = lat.iter().copied().fold(0.0, f64::max);
            // Clamped so float summation cannot push the mean outside [min, max].
            let avg = (lat.iter().sum::<f64>() / lat.len() as f64).clamp(min, max);
            (min, max, avg)
        };
        RoundMetrics {
            name,
            succ,
            fail,
            send_rate_tps: per_sec(samples.len() as u64, last_send - first_send),
            max_latency_s: max,
            min_latency_s: min,
            avg_latency_s: avg,
            throughput_tps: per_sec(succ, last_done - first_send),
            partial,
        }
    }

    pub fn attempted(&self) -> u64 {
        self.succ + self.fail
    }
}

fn latency(s: &Sample) -> f64 {
    s.done.saturating_sub(s.sent).as_secs_f64()
}

/// Runs a round to completion. Worker `w` owns the sends `k ≡ w (mod
/// workers)` and sleeps until each one's instant; a single collector
/// aggregates completions. A worker that falls behind sends immediately, so
/// an overloaded system shows up as a lower measured send rate.
pub fn run_round(spec: &RoundSpec, adapter: &dyn SutAdapter) -> RoundMetrics {
    let schedule = next_send_offsets(spec.rate, spec.termination);
    let workers = spec.workers.max(1) as usize;
    let abort = AtomicBool::new(false);
    let (tx, rx) = unbounded::<Sample>();
    let start = Instant::now();

    let samples = std::thread::scope(|s| {
        for w in 0..workers {
            let tx = tx.clone();
            let (schedule, abort) = (&schedule, &abort);
            std::thread::Builder::new()
                .name(format!("bench/w{w}"))
                .spawn_scoped(s, move || {
                    for k in (w..schedule.len()).step_by(workers) {
                        if abort.load(Ordering::Relaxed) {
                            return;
                        }
                        let due = start + schedule[k];
                        let now = Instant::now();
                        if due > now {
                            std::thread::sleep(due - now);
                        }
                        let sent = start.elapsed();
                        let result = adapter.execute(w as u32, k as u64);
                        let done = start.elapsed();
                        if let Err(AdapterError::Unavailable(why)) = &result {
                            log::warn!("round aborted at send {k}: {why}");
                            abort.store(true, Ordering::Relaxed);
                        }
                        let _ = tx.send(Sample { sent, done, ok: result.is_ok() });
                    }
                })
                .expect("spawn bench worker");
        }
        drop(tx);
        rx.iter().collect::<Vec<_>>()
    });
    RoundMetrics::from_samples(spec.name(), &samples, abort.load(Ordering::Relaxed))
}
