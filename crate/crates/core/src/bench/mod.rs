//! Throughput and latency benchmarking: scheduled load rounds against the
//! demo network, per-node resource sampling and report rendering.

pub mod harness;
pub mod report;
pub mod resources;
pub mod round;
pub mod schedule;

pub use harness::{metric_key_pattern, run_bench, start_network, BenchConfig, BenchError, BenchNetwork, ReadAdapter, BENCH_PROJECT};
pub use report::{render_report, BenchReport, ReportFormat, PERF_COLUMNS, RESOURCE_COLUMNS, SUMMARY_HEADING};
pub use resources::{ProbeTarget, ProcessUsage, ResourceMonitor, ResourceSummary};
pub use round::{run_round, AdapterError, RoundMetrics, RoundSpec, Sample, SutAdapter, Workload, WriteOp};
pub use schedule::{next_send_offsets, Rate, Termination, Tps};
