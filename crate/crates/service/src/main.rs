use std::path::PathBuf;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use ceckd::Parallelism;
use ceckd_service::record::{parse_csv, to_csv, PatientStream};
use ceckd_service::{bootstrap, http, synthetic_seeds, Config, Service};

#[derive(Parser)]
#[command(name = "ceckd-service", version, about = "Physiological event ingestion and alerting service")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Serve the HTTP API. The listen address can be overridden with CECKD_LISTEN.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Grow seed streams into synthetic patients, one CSV per patient.
    Bootstrap {
        /// Seed CSV files; seven synthetic seed patients are used when none are given.
        seeds: Vec<PathBuf>,
        #[arg(long, default_value_t = 50)]
        patients: usize,
        #[arg(long, default_value_t = 10_000)]
        events: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Days per synthetic seed patient.
        #[arg(long, default_value_t = 7)]
        seed_days: usize,
        #[arg(long, default_value = "patients")]
        out: PathBuf,
    },
}

fn load_seed(path: &PathBuf) -> Result<PatientStream> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let records = parse_csv(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    let patient_id = path.file_stem().map_or("seed".into(), |s| s.to_string_lossy().into_owned());
    Ok(PatientStream { patient_id, records })
}

async fn serve(config: Option<PathBuf>) -> Result<()> {
    let cfg = Config::load(config.as_deref())?;
    let svc = Service::open(&cfg).with_context(|| format!("opening {}", cfg.data_dir.display()))?;
    let listener = tokio::net::TcpListener::bind(cfg.listen)
        .await
        .with_context(|| format!("binding {}", cfg.listen))?;
    tracing::info!(listen = %cfg.listen, data_dir = %cfg.data_dir.display(), "serving");
    axum::serve(listener, http::router(Arc::new(svc)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    match Cli::parse().cmd {
        Cmd::Serve { config } => tokio::runtime::Runtime::new()?.block_on(serve(config)),
        Cmd::Bootstrap { seeds, patients, events, seed, seed_days, out } => {
            let seeds = if seeds.is_empty() {
                synthetic_seeds(seed_days, seed)
            } else {
                seeds.iter().map(load_seed).collect::<Result<_>>()?
            };
            let streams = bootstrap(&seeds, events, patients, seed, Parallelism::available())?;
            std::fs::create_dir_all(&out)?;
            for s in &streams {
                let path = out.join(format!("{}.csv", s.patient_id));
                std::fs::write(&path, to_csv(&s.records)).with_context(|| format!("writing {}", path.display()))?;
            }
            println!("wrote {} patients to {}", streams.len(), out.display());
            Ok(())
        }
    }
}
