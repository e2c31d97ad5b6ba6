use std::fs;
use std::time::Instant;

use anyhow::{Context, Result};
use cropmix_core::dataset::{decode, persist, relative_name, SampleSource};
use cropmix_core::{pipeline, OutputFormat};
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{load_config, sources, thread_pool};
use crate::SampleArgs;

#[derive(Debug, Serialize)]
pub struct SampleReport {
    pub samples: u64,
    pub elapsed_s: f64,
    pub samples_per_sec: f64,
}

/// Produces `count` samples; sample `i` uses source `i mod len` and the
/// stream `(seed, i)`.
pub fn run(args: &SampleArgs) -> Result<SampleReport> {
    let cfg = load_config(args.pipeline.config.as_deref())?;
    let formats = OutputFormat::parse_list(&args.formats)?;
    let srcs = sources(&args.input, args.count > 0)?;
    let pool = thread_pool(args.pipeline.workers)?;
    fs::create_dir_all(&args.output)
        .with_context(|| format!("cannot create {}", args.output.display()))?;
    let digest = cfg.digest();
    let seed = args.pipeline.seed;

    let start = Instant::now();
    pool.install(|| {
        (0..args.count)
            .into_par_iter()
            .try_for_each(|i| -> Result<()> {
                let source_index = (i % srcs.len() as u64) as usize;
                let path = &srcs[source_index];
                let img = decode(path)?;
                let (out, plan) = pipeline::apply(&img, &cfg, seed, i)
                    .with_context(|| format!("sample {i} from {}", path.display()))?;
                let name = relative_name(&args.input, path);
                let source = SampleSource {
                    source: &name,
                    source_index,
                    root_seed: seed,
                    config_digest: &digest,
                };
                persist(&args.output, i, &out, &plan, &formats, &source)?;
                Ok(())
            })
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok(SampleReport {
        samples: args.count,
        elapsed_s: elapsed,
        samples_per_sec: if elapsed > 0.0 {
            args.count as f64 / elapsed
        } else {
            0.0
        },
    })
}
