// SPDX-License-Identifier: MPL-2.0

//! Command-line front end: the two aggregation servers, the client uploader,
//! the desk-scale simulator, and the differential-privacy budget calculator.

use clap::{Parser, Subcommand};
use hh_core::bits::BitString;
use hh_core::histogram::CandidateSet;
use hh_net::engine::{self, ProtocolOutput};
use hh_net::report::{CommReport, OutcomeReport, Report, ReportConfig, TimingReport};
use hh_net::sim::{simulate, SimOptions};
use hh_net::spool;
use hh_net::{client, Mode, RunConfig};
use rand::RngCore;
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "hh", about = "Two-server private heavy hitters", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one aggregation server (role 0 dials the peer, role 1 listens).
    Server {
        #[arg(long, value_parser = clap::value_parser!(u8).range(0..=1))]
        role: u8,
        /// Address to accept client uploads (and, for role 1, the peer).
        #[arg(long)]
        listen: String,
        /// Peer server address (dialed by role 0 after ingest).
        #[arg(long)]
        peer: String,
        /// TOML run configuration; must hash-match the peer's.
        #[arg(long)]
        config: PathBuf,
        /// Candidate-set file for histogram mode: one hex string per line.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Append-only upload spool (replayed on restart).
        #[arg(long)]
        spool: Option<PathBuf>,
        /// Restart the aggregate phase from the spool, skipping ingest.
        #[arg(long, default_value_t = false)]
        from_spool: bool,
        /// Report output path (JSON).
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Submit one input string to both servers.
    Client {
        #[arg(long)]
        server0: String,
        #[arg(long)]
        server1: String,
        /// Input as a hex string.
        #[arg(long)]
        input: String,
        /// Input length in bits.
        #[arg(long)]
        bits: usize,
        #[arg(long, value_enum, default_value = "heavy")]
        mode: CliMode,
    },
    /// Generate a population in-process and run both servers over loopback.
    Simulate {
        #[arg(long, default_value_t = 1000)]
        clients: u64,
        #[arg(long, default_value_t = 64)]
        bits: usize,
        /// Heaviness threshold as a fraction of clients.
        #[arg(long, default_value_t = 0.001)]
        tau: f64,
        /// Absolute threshold; overrides --tau.
        #[arg(long)]
        threshold: Option<u64>,
        #[arg(long = "zipf-s", default_value_t = 1.03)]
        zipf_s: f64,
        #[arg(long, default_value_t = 10_000)]
        support: u64,
        #[arg(long = "dp-epsilon")]
        dp_epsilon: Option<f64>,
        #[arg(long = "dp-delta")]
        dp_delta: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Print the privacy budget and noise sizing for a deployment.
    DpBudget {
        /// Per-query epsilon.
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        bits: usize,
        /// Heaviness threshold fraction (t = tau·C, so q = bits/tau queries).
        #[arg(long)]
        tau: f64,
        /// Overall delta.
        #[arg(long, default_value_t = 9.094947017729282e-13)] // 2^-40
        delta: f64,
        /// Tail parameter: deviation over 2·kappa/epsilon has probability
        /// at most exp(-kappa).
        #[arg(long, default_value_t = 30.0)]
        kappa: f64,
    },
}

#[derive(clap::ValueEnum, Clone, Copy)]
enum CliMode {
    Heavy,
    Histogram,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> Result<(), String> {
    match Cli::parse().cmd {
        Cmd::Server {
            role,
            listen,
            peer,
            config,
            candidates,
            spool,
            from_spool,
            output,
            csv,
        } => {
            let cfg = RunConfig::parse(
                &std::fs::read_to_string(&config).map_err(|e| format!("read config: {e}"))?,
            )
            .map_err(|e| e.to_string())?;
            let cand = match (&cfg.mode, &candidates) {
                (Mode::Histogram, Some(path)) => Some(load_candidates(path, cfg.bits)?),
                (Mode::Histogram, None) => {
                    return Err("histogram mode needs --candidates".into())
                }
                (Mode::Heavy, _) => None,
            };
            run_server(
                role, &listen, &peer, &cfg, cand, spool, from_spool, output, csv,
            )
        }
        Cmd::Client {
            server0,
            server1,
            input,
            bits,
            mode,
        } => {
            let alpha = BitString::from_hex(&input, bits)
                .ok_or_else(|| format!("input {input} does not fit {bits} bits"))?;
            let mode = match mode {
                CliMode::Heavy => Mode::Heavy,
                CliMode::Histogram => Mode::Histogram,
            };
            client::submit(mode, &alpha, &server0, &server1, &mut rand::thread_rng())?;
            println!("submitted {bits}-bit input to both servers");
            Ok(())
        }
        Cmd::Simulate {
            clients,
            bits,
            tau,
            threshold,
            zipf_s,
            support,
            dp_epsilon,
            dp_delta,
            seed,
            output,
            csv,
        } => {
            let opts = SimOptions {
                clients,
                bits,
                tau: if threshold.is_some() { None } else { Some(tau) },
                threshold,
                zipf_s,
                support,
                dp_epsilon,
                dp_delta,
                seed,
            };
            let run = simulate(&opts).map_err(|e| e.to_string())?;
            emit_report(&run.report, output, csv)
        }
        Cmd::DpBudget {
            epsilon,
            bits,
            tau,
            delta,
            kappa,
        } => {
            let queries = (bits as f64 / tau).round() as u64;
            println!("epsilon,queries,delta,epsilon_prime,noise_bound,slack,min_clients");
            let eps_prime = hh_core::dp::compose(epsilon, queries, delta);
            let bound = hh_core::dp::noise_bound(epsilon, kappa);
            for slack in [0.01, 0.02, 0.05, 0.10] {
                let min_c = hh_core::dp::min_clients(tau, epsilon, slack, kappa);
                println!(
                    "{epsilon},{queries},{delta:e},{eps_prime:.4},{bound},{slack},{min_c}"
                );
            }
            Ok(())
        }
    }
}

fn load_candidates(path: &PathBuf, bits: usize) -> Result<CandidateSet, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("read candidates: {e}"))?;
    let mut strings = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        strings.push(
            BitString::from_hex(line, bits)
                .ok_or_else(|| format!("candidates line {}: bad hex for {bits} bits", i + 1))?,
        );
    }
    CandidateSet::new(strings, bits).map_err(|e| e.to_string())
}

#[allow(clippy::too_many_arguments)]
fn run_server(
    role: u8,
    listen: &str,
    peer: &str,
    cfg: &RunConfig,
    candidates: Option<CandidateSet>,
    spool_path: Option<PathBuf>,
    from_spool: bool,
    output: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> Result<(), String> {
    let total_start = Instant::now();
    let listener = TcpListener::bind(listen).map_err(|e| format!("bind {listen}: {e}"))?;
    eprintln!("server role {role}: listening on {listen}");

    let ingest_start = Instant::now();
    let (store, pending_peer) = if from_spool {
        let path = spool_path
            .as_ref()
            .ok_or("--from-spool needs --spool PATH")?;
        let replayed = spool::replay(path).map_err(|e| format!("replay spool: {e}"))?;
        eprintln!(
            "replayed {} submissions from spool ({} rejected, truncated tail: {})",
            replayed.store.len(),
            replayed.rejected,
            replayed.truncated_tail
        );
        (replayed.store, None)
    } else {
        let outcome = engine::ingest(&listener, cfg, spool_path.as_deref())
            .map_err(|e| format!("ingest: {e}"))?;
        eprintln!(
            "ingested {} submissions ({} rejected)",
            outcome.store.len(),
            outcome.rejected
        );
        (outcome.store, outcome.pending_peer)
    };
    let ingest_seconds = ingest_start.elapsed().as_secs_f64();

    // Establish the peer channel: role 0 dials, role 1 answers.
    let agg_start = Instant::now();
    let (stream, pre_hello) = if role == 0 {
        let stream = TcpStream::connect(peer).map_err(|e| format!("connect peer {peer}: {e}"))?;
        (stream, None)
    } else {
        let (stream, frame) =
            engine::await_peer(&listener, pending_peer).map_err(|e| format!("await peer: {e}"))?;
        (stream, Some(frame))
    };
    let mut noise = rand_chacha::ChaCha20Rng::seed_from_u64(rand::thread_rng().next_u64());
    use rand::SeedableRng;
    let outcome = engine::run_aggregate(
        role,
        stream,
        cfg,
        candidates.as_ref(),
        &store,
        fresh_nonce(),
        &mut noise,
        pre_hello,
    )
    .map_err(|e| format!("aggregate: {e}"))?;
    let aggregate_seconds = agg_start.elapsed().as_secs_f64();

    let report = server_report(
        cfg,
        &outcome,
        ingest_seconds,
        aggregate_seconds,
        total_start.elapsed().as_secs_f64(),
    );
    emit_report(&report, output, csv)
}

fn fresh_nonce() -> [u8; 16] {
    let mut nonce = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut nonce);
    nonce
}

fn server_report(
    cfg: &RunConfig,
    outcome: &engine::AggregateOutcome,
    ingest_seconds: f64,
    aggregate_seconds: f64,
    total_seconds: f64,
) -> Report {
    let mut report = Report {
        config: ReportConfig {
            mode: match cfg.mode {
                Mode::Heavy => "heavy".into(),
                Mode::Histogram => "histogram".into(),
            },
            clients: cfg.clients,
            bits: cfg.bits,
            tau: cfg.tau,
            threshold: 0,
            dp_epsilon: cfg.dp_epsilon,
            dp_delta: cfg.dp_delta,
            zipf_s: None,
            zipf_support: None,
            seed: None,
        },
        outcome: OutcomeReport {
            upload_disqualified: outcome.upload_disqualified as u64,
            unmatched: outcome.unmatched as u64,
            ..OutcomeReport::default()
        },
        communication: CommReport::default(),
        prg_calls: 0,
        timing: TimingReport {
            ingest_seconds,
            aggregate_seconds,
            total_seconds,
            clients_per_second: outcome.roster_len as f64 / total_seconds.max(1e-9),
        },
    };
    match &outcome.output {
        ProtocolOutput::Heavy(h) => {
            report.config.threshold = h.threshold;
            report.outcome.heavy_hitters = h.heavy_hitters.iter().map(|p| p.to_hex()).collect();
            for (p, w) in &h.heavy_prefixes {
                if p.len() == cfg.bits && h.heavy_hitters.contains(p) {
                    report.outcome.weights.insert(p.to_hex(), *w);
                }
            }
            report.outcome.heavy_prefix_count = h.heavy_prefixes.len() as u64;
            report.outcome.disqualified = h.disqualified as u64;
            report.outcome.queries = h.queries;
            report.communication.sketch_r1_bytes = h.bytes.sketch_r1;
            report.communication.sketch_r2_bytes = h.bytes.sketch_r2;
            report.communication.weight_bytes = h.bytes.weights;
            report.communication.control_bytes = h.bytes.control;
            report.communication.total_sent_bytes = h.bytes.total();
            report.communication.messages = h.bytes.messages;
            report.prg_calls = h.prg_calls;
        }
        ProtocolOutput::Histogram(h) => {
            report.outcome.disqualified = h.disqualified as u64;
            for (i, c) in h.counts.iter().enumerate() {
                report.outcome.weights.insert(format!("sigma[{i}]"), *c as i64);
            }
            report.communication.sketch_r1_bytes = h.bytes.sketch_r1;
            report.communication.sketch_r2_bytes = h.bytes.sketch_r2;
            report.communication.weight_bytes = h.bytes.weights;
            report.communication.control_bytes = h.bytes.control;
            report.communication.total_sent_bytes = h.bytes.total();
            report.communication.messages = h.bytes.messages;
        }
    }
    report
}

fn emit_report(
    report: &Report,
    output: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> Result<(), String> {
    let json = report.to_json();
    match output {
        Some(path) => {
            std::fs::write(&path, &json).map_err(|e| format!("write report: {e}"))?;
            eprintln!("report written to {}", path.display());
        }
        None => println!("{json}"),
    }
    if let Some(path) = csv {
        std::fs::write(&path, report.to_csv()).map_err(|e| format!("write csv: {e}"))?;
    }
    Ok(())
}
