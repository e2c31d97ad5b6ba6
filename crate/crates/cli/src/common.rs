use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cropmix_core::dataset::{scan_dataset, IMAGE_EXTENSIONS};
use cropmix_core::PipelineConfig;

pub fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

pub fn thread_pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = match workers {
        Some(0) => bail!("--workers must be >= 1"),
        Some(n) => n,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .context("cannot start worker pool")
}

/// Scanned sources; an empty folder is an error when `need_any` is set.
pub(crate) fn sources(input: &Path, need_any: bool) -> Result<Vec<PathBuf>> {
    let found = scan_dataset(input, IMAGE_EXTENSIONS)?;
    if need_any && found.is_empty() {
        bail!("no PNG or JPEG images under {}", input.display());
    }
    Ok(found)
}
