use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use ceckd_bench::plot::{suite_charts, suite_csv};
use ceckd_bench::workload::narrative;
use ceckd_bench::{run, run_concurrent, verify_prefix, BenchConfig, EngineKind, QueryMix, RuleSet, Summary};

#[derive(Parser)]
#[command(version, about = "Benchmark ceckd against the scan-based baseline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Events per stream.
    #[arg(long, default_value_t = 10_000)]
    events: usize,
    #[arg(long, default_value_t = 50)]
    repeats: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// observations (signal fluents only) or clinical (plus the alert rules).
    #[arg(long, default_value = "observations")]
    rules: RuleSet,
}

#[derive(Subcommand)]
enum Cmd {
    /// Stream one patient through one engine and write sampled rows as CSV.
    Run {
        #[arg(long, default_value = "ceckd")]
        engine: EngineKind,
        #[arg(long, default_value = "ground_holds_at")]
        query: QueryMix,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run independent engines on concurrent threads, one patient each.
    Concurrent {
        #[arg(long, default_value = "ceckd")]
        engine: EngineKind,
        #[arg(long, default_value_t = 40)]
        threads: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Run both engines with both query mixes into DIR, then plot.
    Suite {
        #[arg(long, default_value = "bench-out")]
        dir: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Draw the four comparison charts from the suite CSVs in DIR.
    Plot {
        #[arg(long, default_value = "bench-out")]
        dir: PathBuf,
    },
    /// Check ceckd against the baseline on a stream prefix.
    Verify {
        #[arg(long, default_value_t = 1000)]
        events: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn print_summary(s: &Summary) {
    println!(
        "{:>5} {:<16} {:<12} events={} repeats={} update_ns={:.0} decile_ratio={:.2} query_ns={:.0} visits={:.1} mvis={} bytes={} alerts={}",
        s.engine,
        s.query_mix,
        s.rules,
        s.events,
        s.repeats,
        s.update_ns,
        s.decile_ratio,
        s.final_query_ns,
        s.final_visits,
        s.final_mvis,
        s.final_bytes,
        s.alerts,
    );
}

fn config(engine: EngineKind, query_mix: QueryMix, c: &Common, threads: usize, output: Option<PathBuf>) -> BenchConfig {
    BenchConfig {
        engine,
        events: c.events,
        repeats: c.repeats,
        threads,
        query_mix,
        rules: c.rules,
        rng_seed: c.seed,
        output,
    }
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { engine, query, common, out } => {
            let report = run(&config(engine, query, &common, 1, out))?;
            print_summary(&report.summary);
        }
        Cmd::Concurrent { engine, threads, common } => {
            let r = run_concurrent(&config(engine, QueryMix::GroundHoldsAt, &common, threads, None))?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Cmd::Suite { dir, common } => {
            std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
            for engine in [EngineKind::Naive, EngineKind::Ceckd] {
                for (query, tag) in [(QueryMix::GroundHoldsAt, "ground"), (QueryMix::UnboundHoldsAt, "unbound")] {
                    let out = dir.join(suite_csv(engine.name(), tag));
                    let report = run(&config(engine, query, &common, 1, Some(out)))?;
                    print_summary(&report.summary);
                }
            }
            for p in suite_charts(&dir)? {
                println!("wrote {}", p.display());
            }
        }
        Cmd::Plot { dir } => {
            for p in suite_charts(&dir)? {
                println!("wrote {}", p.display());
            }
        }
        Cmd::Verify { events, seed } => {
            verify_prefix(&narrative(events, seed)?)?;
            println!("ceckd agrees with the baseline on {events} events");
        }
    }
    Ok(())
}
