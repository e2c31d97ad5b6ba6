//! Per-sample latency of baseline random-resized-crop against a candidate
//! config, over the same sources, seeds and worker pool.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::Result;
use cropmix_core::dataset::decode;
use cropmix_core::pipeline::apply_timed;
use cropmix_core::tensor::write_raw;
use cropmix_core::{PipelineConfig, StageTimes};
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{load_config, sources, thread_pool};
use crate::{BenchArgs, BenchMode};

const WARMUP: u64 = 32;

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub samples: u64,
    pub workers: usize,
    pub resolution: usize,
    pub baseline: ConfigTiming,
    pub candidate: ConfigTiming,
    /// `candidate.mean_ms / baseline.mean_ms`.
    pub overhead_ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct ConfigTiming {
    pub label: String,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p99_ms: f64,
    pub wall_s: f64,
    pub samples_per_sec: f64,
    /// Percent of summed per-sample time spent in each stage.
    pub stage_shares: StageShares,
}

#[derive(Debug, Serialize)]
pub struct StageShares {
    pub decode: f64,
    pub crop: f64,
    pub resize: f64,
    pub mix: f64,
    pub encode: f64,
}

impl StageShares {
    pub fn total(&self) -> f64 {
        self.decode + self.crop + self.resize + self.mix + self.encode
    }
}

/// Decode, transform and encode one sample; returns its stage times.
fn one_sample(path: &PathBuf, cfg: &PipelineConfig, seed: u64, index: u64) -> Result<StageTimes> {
    let mut times = StageTimes::default();
    let t = Instant::now();
    let img = decode(path)?;
    times.decode = t.elapsed();

    let (out, _) = apply_timed(&img, cfg, seed, index, &mut times)?;

    let t = Instant::now();
    let mut buf = Vec::with_capacity(out.data().len() * 4 + 17);
    write_raw(&out, &mut buf)?;
    std::hint::black_box(&buf);
    times.encode = t.elapsed();
    Ok(times)
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let rank = (q * (sorted.len() - 1) as f64).round() as usize;
    sorted[rank]
}

/// Times `count` samples of `cfg` on `pool`.
pub fn time_config(
    label: &str,
    cfg: &PipelineConfig,
    srcs: &[PathBuf],
    seed: u64,
    count: u64,
    pool: &rayon::ThreadPool,
) -> Result<ConfigTiming> {
    let run = |n: u64| -> Result<Vec<StageTimes>> {
        pool.install(|| {
            (0..n)
                .into_par_iter()
                .map(|i| one_sample(&srcs[(i % srcs.len() as u64) as usize], cfg, seed, i))
                .collect()
        })
    };
    run(WARMUP.min(count))?;

    let start = Instant::now();
    let per_sample = run(count)?;
    let wall = start.elapsed().as_secs_f64();

    let mut total = StageTimes::default();
    for t in &per_sample {
        total.add(t);
    }
    let mut latencies: Vec<f64> = per_sample
        .iter()
        .map(|t| t.total().as_secs_f64() * 1e3)
        .collect();
    latencies.sort_by(f64::total_cmp);
    let sum = total.total().as_secs_f64();
    let share = |d: Duration| {
        if sum > 0.0 {
            100.0 * d.as_secs_f64() / sum
        } else {
            0.0
        }
    };
    Ok(ConfigTiming {
        label: label.to_string(),
        mean_ms: latencies.iter().sum::<f64>() / latencies.len().max(1) as f64,
        p50_ms: if latencies.is_empty() {
            0.0
        } else {
            percentile(&latencies, 0.5)
        },
        p99_ms: if latencies.is_empty() {
            0.0
        } else {
            percentile(&latencies, 0.99)
        },
        wall_s: wall,
        samples_per_sec: if wall > 0.0 { count as f64 / wall } else { 0.0 },
        stage_shares: StageShares {
            decode: share(total.decode),
            crop: share(total.crop),
            resize: share(total.resize),
            mix: share(total.mix),
            encode: share(total.encode),
        },
    })
}

pub fn run(args: &BenchArgs) -> Result<BenchReport> {
    let cfg = load_config(args.pipeline.config.as_deref())?;
    let srcs = sources(&args.input, true)?;
    let pool = thread_pool(args.pipeline.workers)?;
    let seed = args.pipeline.seed;
    let count = args.count.max(1);

    let baseline_cfg = cfg.as_baseline();
    let (label, candidate_cfg) = match args.mode {
        BenchMode::Rrc => ("rrc", baseline_cfg.clone()),
        BenchMode::Cropmix => (
            "cropmix",
            PipelineConfig {
                baseline_rrc: false,
                ..cfg.clone()
            },
        ),
    };
    let baseline = time_config("rrc", &baseline_cfg, &srcs, seed, count, &pool)?;
    let candidate = time_config(label, &candidate_cfg, &srcs, seed, count, &pool)?;
    Ok(BenchReport {
        samples: count,
        workers: pool.current_num_threads(),
        resolution: cfg.resolution,
        overhead_ratio: candidate.mean_ms / baseline.mean_ms,
        baseline,
        candidate,
    })
}
