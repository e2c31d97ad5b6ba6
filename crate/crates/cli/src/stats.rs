//! Plan-only statistics: no pixels are touched, only the sampled crops,
//! weights, boxes and permutations.

use std::collections::BTreeMap;

use anyhow::Result;
use cropmix_core::dataset::decode;
use cropmix_core::pipeline::sample_plan;
use cropmix_core::{AugmentRecord, MixPlan, PipelineConfig};
use rayon::prelude::*;
use serde::Serialize;

use crate::common::{load_config, sources, thread_pool};
use crate::StatsArgs;

const DEFAULT_SHAPE: (usize, usize, usize) = (3, 512, 512);

#[derive(Debug, Serialize)]
pub struct StatsReport {
    pub trials: u64,
    pub seed: u64,
    pub source_shape: [usize; 3],
    /// Crop count → number of trials.
    pub n_histogram: BTreeMap<usize, u64>,
    pub partitions: Vec<PartitionStats>,
    pub lambda: Vec<LambdaStats>,
    pub cutmix_effective_fraction_mean: Option<f64>,
    /// Comma-joined permutation → count, over every channel-permute record.
    pub permutation_histogram: BTreeMap<String, u64>,
}

#[derive(Debug, Serialize)]
pub struct PartitionStats {
    pub n: usize,
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
    pub area_min: f64,
    pub area_mean: f64,
    pub area_max: f64,
}

#[derive(Debug, Serialize)]
pub struct LambdaStats {
    pub n: usize,
    pub alpha: f64,
    pub count: u64,
    pub mean: f64,
    pub variance: f64,
    pub expected_mean: f64,
    pub expected_variance: f64,
}

#[derive(Default)]
struct Moments {
    count: u64,
    sum: f64,
    sum_sq: f64,
    min: f64,
    max: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        if self.count == 0 {
            self.min = v;
            self.max = v;
        }
        self.count += 1;
        self.sum += v;
        self.sum_sq += v * v;
        self.min = self.min.min(v);
        self.max = self.max.max(v);
    }

    fn mean(&self) -> f64 {
        self.sum / self.count as f64
    }

    fn variance(&self) -> f64 {
        let m = self.mean();
        (self.sum_sq / self.count as f64 - m * m).max(0.0)
    }
}

fn source_shape(args: &StatsArgs) -> Result<(usize, usize, usize)> {
    match &args.input {
        Some(dir) => Ok(decode(&sources(dir, true)?[0])?.shape()),
        None => Ok(DEFAULT_SHAPE),
    }
}

pub fn summarize(
    plans: &[MixPlan],
    cfg: &PipelineConfig,
    seed: u64,
    shape: (usize, usize, usize),
) -> Result<StatsReport> {
    let (_, h, w) = shape;
    let mut n_histogram = BTreeMap::new();
    let mut partitions: BTreeMap<(usize, usize), (f64, f64, Moments)> = BTreeMap::new();
    let mut lambdas: BTreeMap<usize, Moments> = BTreeMap::new();
    let mut fractions = Moments::default();
    let mut perms = BTreeMap::new();

    for plan in plans {
        *n_histogram.entry(plan.n).or_insert(0) += 1;
        for (i, crop) in plan.crops.iter().enumerate() {
            let entry = partitions
                .entry((plan.n, i))
                .or_insert_with(|| (crop.scale.lo, crop.scale.hi, Moments::default()));
            entry.2.push(crop.rect.area_fraction(w, h));
        }
        for step in &plan.steps {
            lambdas.entry(plan.n).or_default().push(step.lambda);
            if let Some(b) = &step.mix_box {
                fractions.push(b.effective_fraction);
            }
        }
        let records = plan
            .steps
            .iter()
            .flat_map(|s| &s.ops)
            .chain(&plan.after_ops);
        for rec in records {
            if let AugmentRecord::ChannelPermute { permutation } = rec {
                let key = permutation
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>()
                    .join(",");
                *perms.entry(key).or_insert(0) += 1;
            }
        }
    }

    let lambda = lambdas
        .into_iter()
        .map(|(n, m)| {
            let params = cfg.beta_params(n)?;
            Ok(LambdaStats {
                n,
                alpha: params.alpha(),
                count: m.count,
                mean: m.mean(),
                variance: m.variance(),
                expected_mean: 0.5,
                expected_variance: params.variance(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(StatsReport {
        trials: plans.len() as u64,
        seed,
        source_shape: [shape.0, shape.1, shape.2],
        n_histogram,
        partitions: partitions
            .into_iter()
            .map(|((n, index), (lo, hi, m))| PartitionStats {
                n,
                index,
                lo,
                hi,
                count: m.count,
                area_min: m.min,
                area_mean: m.mean(),
                area_max: m.max,
            })
            .collect(),
        lambda,
        cutmix_effective_fraction_mean: (fractions.count > 0).then(|| fractions.mean()),
        permutation_histogram: perms,
    })
}

pub fn run(args: &StatsArgs) -> Result<StatsReport> {
    let cfg = load_config(args.pipeline.config.as_deref())?;
    let shape = source_shape(args)?;
    let pool = thread_pool(args.pipeline.workers)?;
    let seed = args.pipeline.seed;
    let plans: Vec<MixPlan> = pool.install(|| {
        (0..args.count)
            .into_par_iter()
            .map(|i| sample_plan(shape, &cfg, seed, i))
            .collect::<Result<Vec<_>, _>>()
    })?;
    summarize(&plans, &cfg, seed, shape)
}
