//! Runs three short benchmark rounds against a fresh loopback network and
//! prints the performance and resource tables.

use devchain::bench::{
    metric_key_pattern, render_report, run_bench, BenchConfig, BenchNetwork, Rate, ReportFormat, RoundSpec, Termination, Tps, Workload,
    WriteOp,
};
use devchain::consensus::OrderingPolicy;
use devchain::node::TransportKind;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let network = BenchNetwork {
        transport: TransportKind::Loopback,
        orgs: 2,
        host: "127.0.0.1".into(),
        base_port: 7050,
        policy: OrderingPolicy { max_batch_wait_ms: 20, ..OrderingPolicy::default() },
    };
    let rounds = vec![
        RoundSpec {
            index: 0,
            label: "QueryPrivateData".into(),
            workload: Workload::QueryState { key_pattern: metric_key_pattern(), key_count: 50 },
            termination: Termination::TxNumber { count: 300 },
            rate: Rate::FixedRate { tps: Tps::whole(150) },
            workers: 2,
        },
        RoundSpec {
            index: 1,
            label: "Transfer".into(),
            workload: Workload::SubmitWrite { write: WriteOp::Transfer { cents: 1 } },
            termination: Termination::TxDuration { seconds: 2 },
            rate: Rate::LinearRate { start_tps: Tps::whole(20), end_tps: Tps::whole(80) },
            workers: 4,
        },
        RoundSpec {
            index: 2,
            label: "RecordMetric".into(),
            workload: Workload::SubmitWrite { write: WriteOp::RecordMetric { metric_name: "latency_ms".into() } },
            termination: Termination::TxNumber { count: 100 },
            rate: Rate::FixedRate { tps: Tps::whole(50) },
            workers: 4,
        },
    ];
    let cfg = BenchConfig::new(network, &dir.path().display().to_string(), 50, rounds);
    let report = run_bench(&cfg)?;
    let table = render_report(&report.rounds, &report.resources, ReportFormat::Markdown);
    print!("{}", String::from_utf8(table)?);
    Ok(())
}
