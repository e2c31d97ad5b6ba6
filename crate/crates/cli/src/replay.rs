use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use cropmix_core::dataset::{decode, read_manifest, SampleManifest};
use cropmix_core::pipeline;
use cropmix_core::tensor::write_raw;
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{load_config, thread_pool};
use crate::ReplayArgs;

#[derive(Debug, Serialize)]
pub struct ReplayReport {
    pub checked: usize,
    pub matched: usize,
    /// Sample indices whose regenerated raw tensor differs, ascending.
    pub mismatched: Vec<u64>,
}

/// `sample_<i>.json` files in `dir`, ordered by sample index.
fn manifests(dir: &std::path::Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let index = name
            .strip_prefix("sample_")
            .and_then(|s| s.strip_suffix(".json"))
            .and_then(|s| s.parse::<u64>().ok());
        if let Some(i) = index {
            out.push((i, path));
        }
    }
    out.sort();
    Ok(out)
}

fn verify(
    args: &ReplayArgs,
    cfg: &cropmix_core::PipelineConfig,
    m: &SampleManifest,
) -> Result<bool> {
    let raw_name = m
        .outputs
        .iter()
        .find(|o| o.ends_with(".cmtx"))
        .with_context(|| format!("sample {} has no raw output to verify", m.sample_index))?;
    let img = decode(args.input.join(&m.source))?;
    let regenerated = pipeline::replay(&img, cfg, &m.plan)
        .with_context(|| format!("sample {}", m.sample_index))?;
    let mut expected = Vec::new();
    write_raw(&regenerated, &mut expected)?;
    let stored_path = args.output.join(raw_name);
    let stored =
        fs::read(&stored_path).with_context(|| format!("cannot read {}", stored_path.display()))?;
    Ok(stored == expected)
}

pub fn run(args: &ReplayArgs) -> Result<ReplayReport> {
    let cfg = load_config(args.config.as_deref())?;
    let digest = cfg.digest();
    let pool = thread_pool(args.workers)?;
    let entries = manifests(&args.output)?;

    let results: Vec<(u64, bool)> = pool.install(|| {
        entries
            .par_iter()
            .map(|(i, path)| -> Result<(u64, bool)> {
                let m = read_manifest(path)?;
                if m.sample_index != *i {
                    bail!("{} records sample index {}", path.display(), m.sample_index);
                }
                if m.config_digest != digest {
                    bail!(
                        "sample {i} was produced with config {} but the given config is {digest}",
                        m.config_digest
                    );
                }
                Ok((*i, verify(args, &cfg, &m)?))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    for (i, ok) in &results {
        eprintln!("sample_{i}: {}", if *ok { "match" } else { "MISMATCH" });
    }
    let mismatched: Vec<u64> = results
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(i, _)| *i)
        .collect();
    Ok(ReplayReport {
        checked: results.len(),
        matched: results.len() - mismatched.len(),
        mismatched,
    })
}
