// SPDX-License-Identifier: MPL-2.0

//! Desk-scale simulator: generates a client population in-process, runs both
//! server roles over loopback TCP, and reports outcomes, communication, PRG
//! work, and wall-clock per phase. With a fixed master seed the report is
//! byte-identical across runs (timing excluded).

use crate::config::{Mode, RunConfig};
use crate::engine::{run_aggregate, AggregateOutcome, ProtocolOutput};
use crate::report::{CommReport, LevelComm, OutcomeReport, Report, ReportConfig, TimingReport};
use crate::spool::SubmissionStore;
use crate::upload::UploadMessage;
use crate::zipf::Zipf;
use hh_core::bits::BitString;
use hh_core::heavy::{self, HeavyOutput};
use hh_core::prg::FixedKeyPrg;
use hh_core::transport::ProtocolError;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::net::{TcpListener, TcpStream};
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub clients: u64,
    pub bits: usize,
    pub tau: Option<f64>,
    pub threshold: Option<u64>,
    pub zipf_s: f64,
    pub support: u64,
    pub dp_epsilon: Option<f64>,
    pub dp_delta: Option<f64>,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            clients: 1000,
            bits: 64,
            tau: Some(0.001),
            threshold: None,
            zipf_s: 1.03,
            support: 10_000,
            dp_epsilon: None,
            dp_delta: None,
            seed: 1,
        }
    }
}

fn random_bits(rng: &mut dyn RngCore, bits: usize) -> BitString {
    BitString::from_bools(&(0..bits).map(|_| rng.next_u32() & 1 == 1).collect::<Vec<_>>())
}

pub struct SimRun {
    pub report: Report,
    pub output: HeavyOutput,
    pub plaintext: Vec<BitString>,
}

pub fn simulate(opts: &SimOptions) -> Result<SimRun, ProtocolError> {
    let cfg = RunConfig {
        bits: opts.bits,
        clients: opts.clients,
        mode: Mode::Heavy,
        tau: opts.tau,
        threshold: opts.threshold,
        dp_epsilon: opts.dp_epsilon,
        dp_delta: opts.dp_delta,
        abort_disqualified_frac: None,
    };
    cfg.validate()?;
    let mut master = ChaCha20Rng::seed_from_u64(opts.seed);

    // Support of distinct strings; clients sample ranks from the Zipf law.
    // Narrow domains cap the support at the domain size.
    let support_n = if opts.bits < 20 {
        (opts.support as usize).min(1usize << opts.bits)
    } else {
        opts.support as usize
    }
    .max(1);
    let gen_start = Instant::now();
    let mut support = Vec::with_capacity(support_n);
    let mut seen = std::collections::HashSet::new();
    while support.len() < support_n {
        let s = random_bits(&mut master, opts.bits);
        if seen.insert(s.clone()) {
            support.push(s);
        }
    }
    let zipf = Zipf::new(support_n, opts.zipf_s);

    let mut inputs = Vec::with_capacity(opts.clients as usize);
    let mut store0 = SubmissionStore::new();
    let mut store1 = SubmissionStore::new();
    let mut upload_bytes = 0u64;
    for i in 0..opts.clients {
        let alpha = support[zipf.sample(&mut master)].clone();
        let [s0, s1] = heavy::client_submissions(&alpha, &mut master, &FixedKeyPrg);
        let mut nonce = [0u8; 16];
        master.fill_bytes(&mut nonce);
        nonce[..8].copy_from_slice(&i.to_le_bytes()); // collision-proof at any scale
        let m0 = UploadMessage::new(nonce, s0.key, s0.pp, s0.corr);
        let m1 = UploadMessage::new(nonce, s1.key, s1.pp, s1.corr);
        upload_bytes += (m0.encode().len() + m1.encode().len()) as u64;
        store0.insert(m0);
        store1.insert(m1);
        inputs.push(alpha);
    }
    let ingest_seconds = gen_start.elapsed().as_secs_f64();

    // Both roles over loopback TCP.
    let mut nonce0 = [0u8; 16];
    let mut nonce1 = [0u8; 16];
    master.fill_bytes(&mut nonce0);
    master.fill_bytes(&mut nonce1);
    let noise_seed = master.next_u64();

    let agg_start = Instant::now();
    let listener =
        TcpListener::bind("127.0.0.1:0").map_err(|e| ProtocolError::Transport(e.to_string()))?;
    let addr = listener
        .local_addr()
        .map_err(|e| ProtocolError::Transport(e.to_string()))?;
    let cfg1 = cfg.clone();
    let peer_thread = std::thread::spawn(move || -> Result<AggregateOutcome, ProtocolError> {
        let (conn, _) = listener
            .accept()
            .map_err(|e| ProtocolError::Transport(e.to_string()))?;
        let mut noise = ChaCha20Rng::seed_from_u64(noise_seed ^ 1);
        run_aggregate(1, conn, &cfg1, None, &store1, nonce1, &mut noise, None)
    });
    let conn =
        TcpStream::connect(addr).map_err(|e| ProtocolError::Transport(e.to_string()))?;
    let mut noise = ChaCha20Rng::seed_from_u64(noise_seed);
    let out0 = run_aggregate(0, conn, &cfg, None, &store0, nonce0, &mut noise, None)?;
    let out1 = peer_thread
        .join()
        .map_err(|_| ProtocolError::Transport("peer thread panicked".into()))??;
    let aggregate_seconds = agg_start.elapsed().as_secs_f64();

    let heavy0 = match out0.output {
        ProtocolOutput::Heavy(h) => h,
        ProtocolOutput::Histogram(_) => unreachable!("simulator runs heavy mode"),
    };
    let heavy1 = match out1.output {
        ProtocolOutput::Heavy(h) => h,
        ProtocolOutput::Histogram(_) => unreachable!(),
    };
    debug_assert_eq!(heavy0.heavy_hitters, heavy1.heavy_hitters);

    // Plaintext oracle comparison.
    let plaintext = heavy::plaintext_heavy_hitters(&inputs, heavy0.threshold, opts.bits);
    let exact_match = plaintext == heavy0.heavy_hitters;

    // Closed-form accounting: per level, sketching is 4 field elements per
    // active client per server (3 in round 1, 1 in round 2) and one weight
    // share per queried parent.
    let mut accounting_ok = true;
    let mut per_level = Vec::with_capacity(heavy0.levels.len());
    let mut formula_r1 = 0u64;
    let mut formula_r2 = 0u64;
    let mut formula_w = 0u64;
    for stats in &heavy0.levels {
        let fb = stats.field_bytes as u64;
        let r1 = stats.active as u64 * 3 * fb;
        let r2 = stats.active as u64 * fb;
        let w = stats.queried as u64 * fb;
        accounting_ok &= stats.bytes_r1 == r1 && stats.bytes_r2 == r2 && stats.bytes_weights == w;
        accounting_ok &= stats.candidates == 2 * stats.queried;
        formula_r1 += r1;
        formula_r2 += r2;
        formula_w += w;
        per_level.push(LevelComm {
            level: stats.level,
            candidates: stats.candidates as u64,
            active: stats.active as u64,
            field_bytes: fb,
            bytes_r1: stats.bytes_r1,
            bytes_r2: stats.bytes_r2,
            bytes_weights: stats.bytes_weights,
        });
    }
    accounting_ok &= heavy0.bytes.sketch_r1 == formula_r1
        && heavy0.bytes.sketch_r2 == formula_r2
        && heavy0.bytes.weights == formula_w;

    let mut weights = std::collections::BTreeMap::new();
    for (p, w) in &heavy0.heavy_prefixes {
        if p.len() == opts.bits && heavy0.heavy_hitters.contains(p) {
            weights.insert(p.to_hex(), *w);
        }
    }

    let total_seconds = ingest_seconds + aggregate_seconds;
    let report = Report {
        config: ReportConfig {
            mode: "heavy".into(),
            clients: opts.clients,
            bits: opts.bits,
            tau: opts.tau,
            threshold: heavy0.threshold,
            dp_epsilon: opts.dp_epsilon,
            dp_delta: opts.dp_delta,
            zipf_s: Some(opts.zipf_s),
            zipf_support: Some(opts.support),
            seed: Some(opts.seed),
        },
        outcome: OutcomeReport {
            heavy_hitters: heavy0.heavy_hitters.iter().map(|h| h.to_hex()).collect(),
            weights,
            heavy_prefix_count: heavy0.heavy_prefixes.len() as u64,
            disqualified: heavy0.disqualified as u64,
            upload_disqualified: out0.upload_disqualified as u64,
            unmatched: out0.unmatched as u64,
            queries: heavy0.queries,
            exact_match: Some(exact_match),
        },
        communication: CommReport {
            sketch_r1_bytes: heavy0.bytes.sketch_r1,
            sketch_r2_bytes: heavy0.bytes.sketch_r2,
            weight_bytes: heavy0.bytes.weights,
            control_bytes: heavy0.bytes.control,
            total_sent_bytes: heavy0.bytes.total(),
            messages: heavy0.bytes.messages,
            upload_bytes_per_client: upload_bytes / opts.clients.max(1),
            accounting_ok,
            per_level,
        },
        prg_calls: heavy0.prg_calls,
        timing: TimingReport {
            ingest_seconds,
            aggregate_seconds,
            total_seconds,
            clients_per_second: opts.clients as f64 / total_seconds.max(1e-9),
        },
    };
    Ok(SimRun {
        report,
        output: heavy0,
        plaintext,
    })
}
