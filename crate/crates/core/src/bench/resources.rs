//! Per-node resource sampling during a round.
//!
//! The demo network runs every node in this process, so a node is observed
//! through the threads it names `<node>/<role>`. CPU time comes from
//! `/proc/self/task/*/schedstat`, memory is the resident set of the whole
//! process, and traffic and disk figures are deltas of the node's own
//! transport and block-log counters. Without `/proc` the CPU and memory
//! columns read zero.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::sync::atomic::Ordering;
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Sender};
use serde::{Deserialize, Serialize};

use crate::consensus::transport::TrafficCounters;
use crate::node::DiskCounters;

const MB: f64 = 1024.0 * 1024.0;
const PAGE_SIZE: u64 = 4096;

/// A node to observe.
#[derive(Clone)]
pub struct ProbeTarget {
    /// Row name in the report, e.g. `/peer0.org1.example.com`.
    pub name: String,
    /// Threads whose name starts with this belong to the node.
    pub thread_prefix: String,
    pub traffic: Arc<TrafficCounters>,
    pub disk: Option<Arc<DiskCounters>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessUsage {
    pub name: String,
    pub cpu_pct_max: f64,
    pub cpu_pct_avg: f64,
    pub memory_mb_max: f64,
    pub memory_mb_avg: f64,
    pub traffic_in_mb: f64,
    pub traffic_out_mb: f64,
    pub disc_write_b: u64,
    pub disc_read_b: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceSummary {
    pub round: String,
    pub processes: Vec<ProcessUsage>,
    /// Set when an observed node disappeared during the round.
    #[serde(default)]
    pub partial: bool,
}

/// Cumulative on-CPU nanoseconds per thread id, for threads matching `prefix`.
fn thread_cpu(prefix: &str) -> HashMap<u64, u64> {
    let mut out = HashMap::new();
    let Ok(tasks) = fs::read_dir("/proc/self/task") else { return out };
    for task in tasks.flatten() {
        let Some(tid) = task.file_name().to_str().and_then(|s| s.parse::<u64>().ok()) else { continue };
        let comm = fs::read_to_string(task.path().join("comm")).unwrap_or_default();
        if !comm.trim_end().starts_with(prefix) {
            continue;
        }
        let stat = fs::read_to_string(task.path().join("schedstat")).unwrap_or_default();
        if let Some(ns) = stat.split_whitespace().next().and_then(|v| v.parse().ok()) {
            out.insert(tid, ns);
        }
    }
    out
}

fn resident_bytes() -> u64 {
    fs::read_to_string("/proc/self/statm")
        .ok()
        .and_then(|s| s.split_whitespace().nth(1).and_then(|v| v.parse::<u64>().ok()))
        .map_or(0, |pages| pages * PAGE_SIZE)
}

struct Track {
    target: ProbeTarget,
    last_cpu: HashMap<u64, u64>,
    seen_threads: bool,
    vanished: bool,
    cpu: Vec<f64>,
    mem: Vec<f64>,
    start_in: u64,
    start_out: u64,
    start_write: u64,
    start_read: u64,
}

impl Track {
    fn new(target: ProbeTarget) -> Track {
        let last_cpu = thread_cpu(&target.thread_prefix);
        let (w, r) = target
            .disk
            .as_ref()
            .map_or((0, 0), |d| (d.written.load(Ordering::Relaxed), d.read.load(Ordering::Relaxed)));
        Track {
            seen_threads: !last_cpu.is_empty(),
            vanished: false,
            start_in: target.traffic.bytes_in(),
            start_out: target.traffic.bytes_out(),
            start_write: w,
            start_read: r,
            last_cpu,
            cpu: Vec::new(),
            mem: Vec::new(),
            target,
        }
    }

    /// CPU share since the previous sample. Time spent by threads that
    /// exited in between is lost, which only ever under-counts.
    fn sample(&mut self, elapsed: Duration, rss: u64) {
        let now = thread_cpu(&self.target.thread_prefix);
        let busy: u64 = now.iter().map(|(tid, ns)| ns.saturating_sub(*self.last_cpu.get(tid).unwrap_or(&0))).sum();
        if now.is_empty() && self.seen_threads {
            self.vanished = true;
        }
        self.seen_threads |= !now.is_empty();
        self.last_cpu = now;
        let secs = elapsed.as_secs_f64();
        self.cpu.push(if secs > 0.0 { busy as f64 / 1e9 / secs * 100.0 } else { 0.0 });
        self.mem.push(rss as f64 / MB);
    }

    fn finish(self) -> (ProcessUsage, bool) {
        let stats = |v: &[f64]| {
            if v.is_empty() {
                return (0.0, 0.0);
            }
            let max = v.iter().copied().fold(0.0, f64::max);
            (max, (v.iter().sum::<f64>() / v.len() as f64).min(max))
        };
        let (cpu_max, cpu_avg) = stats(&self.cpu);
        let (mem_max, mem_avg) = stats(&self.mem);
        let t = &self.target;
        let (w, r) = t.disk.as_ref().map_or((0, 0), |d| (d.written.load(Ordering::Relaxed), d.read.load(Ordering::Relaxed)));
        let usage = ProcessUsage {
            name: t.name.clone(),
            cpu_pct_max: cpu_max,
            cpu_pct_avg: cpu_avg,
            memory_mb_max: mem_max,
            memory_mb_avg: mem_avg,
            traffic_in_mb: t.traffic.bytes_in().saturating_sub(self.start_in) as f64 / MB,
            traffic_out_mb: t.traffic.bytes_out().saturating_sub(self.start_out) as f64 / MB,
            disc_write_b: w.saturating_sub(self.start_write),
            disc_read_b: r.saturating_sub(self.start_read),
        };
        (usage, self.vanished)
    }
}

/// Samples a set of nodes at a fixed interval until finished.
pub struct ResourceMonitor {
    round: String,
    stop: Sender<()>,
    handle: JoinHandle<Vec<Track>>,
}

impl ResourceMonitor {
    /// Starts sampling. Process names must be unique.
    pub fn start(round: &str, targets: Vec<ProbeTarget>, interval: Duration) -> Result<ResourceMonitor, String> {
        let mut names = HashSet::new();
        if let Some(dup) = targets.iter().find(|t| !names.insert(t.name.as_str())) {
            return Err(format!("duplicate process name {}", dup.name));
        }
        let interval = interval.max(Duration::from_millis(10));
        let (stop, stopped) = bounded::<()>(1);
        let mut tracks: Vec<Track> = targets.into_iter().map(Track::new).collect();
        let handle = std::thread::Builder::new()
            .name("bench/monitor".into())
            .spawn(move || {
                let mut last = Instant::now();
                loop {
                    let done = stopped.recv_timeout(interval).is_ok();
                    let rss = resident_bytes();
                    let now = Instant::now();
                    for t in tracks.iter_mut() {
                        t.sample(now - last, rss);
                    }
                    last = now;
                    if done {
                        return tracks;
                    }
                }
            })
            .map_err(|e| e.to_string())?;
        Ok(ResourceMonitor { round: round.to_string(), stop, handle })
    }

    /// Takes a final sample and summarizes.
    pub fn finish(self) -> ResourceSummary {
        let _ = self.stop.send(());
        let tracks = self.handle.join().unwrap_or_default();
        let mut partial = false;
        let mut processes = Vec::new();
        for t in tracks {
            let (usage, vanished) = t.finish();
            partial |= vanished;
            processes.push(usage);
        }
        ResourceSummary { round: self.round, processes, partial }
    }
}
