//! Ablation harness: every single graph, every leave-one-out pair, the
//! merge-edges and intra-only baselines, and the full tensor model.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Masks, Split};
use crate::error::{Error, Result};
use crate::graph::TextGraphTensor;
use crate::model::{Model, ModelRegistry, ModelSpec};
use crate::trainer::{train, TrainConfig, TrainReport};

/// One row of the ablation table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variant {
    pub label: String,
    pub spec: ModelSpec,
}

impl Variant {
    pub fn new(label: impl Into<String>, spec: ModelSpec) -> Self {
        Self {
            label: label.into(),
            spec,
        }
    }
}

/// The nine standard rows over `graphs`: one per single graph, one per
/// leave-one-out subset, then merge, intra_only and tensor.
pub fn standard_variants(graphs: &[String]) -> Vec<Variant> {
    let mut out = Vec::new();
    for g in graphs {
        out.push(Variant::new(g.clone(), ModelSpec::with_graphs("single", &[g.as_str()])));
    }
    if graphs.len() > 2 {
        for g in graphs {
            let rest: Vec<&str> = graphs.iter().filter(|h| *h != g).map(String::as_str).collect();
            out.push(Variant::new(format!("w/o {g}"), ModelSpec::with_graphs("tensor", &rest)));
        }
    }
    for mode in ["merge", "intra_only", "tensor"] {
        out.push(Variant::new(mode, ModelSpec::new(mode)));
    }
    out
}

/// Accuracy of one variant over several seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub mode: String,
    pub seeds: Vec<u64>,
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation; zero for a single seed.
    pub std: f64,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// A labeled transductive problem shared by every ablation job.
#[derive(Clone, Copy, Debug)]
pub struct AblationTask<'a> {
    pub tensor: &'a TextGraphTensor,
    pub labels: &'a [usize],
    pub splits: &'a [Split],
    pub num_classes: usize,
}

/// Trains one variant with `config.seed` overridden by `seed`; masks are
/// drawn from the same seed.
pub fn run_one(
    registry: &ModelRegistry,
    task: AblationTask<'_>,
    spec: &ModelSpec,
    config: &TrainConfig,
    seed: u64,
) -> Result<TrainReport> {
    let config = TrainConfig {
        seed,
        mode: spec.to_string(),
        ..config.clone()
    };
    let model = Model::new(registry, spec, task.tensor, &[config.hidden_dim], task.num_classes)?;
    let masks = Masks::from_splits(task.splits, config.val_fraction, seed)?;
    Ok(train(&model, task.labels, &masks, &config)?.1)
}

/// Trains every `(variant, seed)` pair in parallel. Rows and reports come
/// back in variant order, then seed order.
pub fn run_ablation(
    registry: &ModelRegistry,
    task: AblationTask<'_>,
    variants: &[Variant],
    config: &TrainConfig,
    seeds: &[u64],
) -> Result<(Vec<AblationRow>, Vec<Vec<TrainReport>>)> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("ablation needs at least one seed".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..variants.len())
        .flat_map(|v| seeds.iter().map(move |&s| (v, s)))
        .collect();
    let reports: Vec<TrainReport> = jobs
        .par_iter()
        .map(|&(v, seed)| run_one(registry, task, &variants[v].spec, config, seed))
        .collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(variants.len());
    let mut grouped = Vec::with_capacity(variants.len());
    for (variant, chunk) in variants.iter().zip(reports.chunks(seeds.len())) {
        let accuracies: Vec<f64> = chunk.iter().map(|r| r.test_accuracy).collect();
        let (mean, std) = mean_std(&accuracies);
        rows.push(AblationRow {
            variant: variant.label.clone(),
            mode: variant.spec.to_string(),
            seeds: seeds.to_vec(),
            accuracies,
            mean,
            std,
        });
        grouped.push(chunk.to_vec());
    }
    Ok((rows, grouped))
}

/// Aligned `mean ± std` table, one line per row.
pub fn ablation_table(rows: &[AblationRow]) -> String {
    let width = rows.iter().map(|r| r.variant.len()).max().unwrap_or(0).max(7);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>17}  {:>5}", "variant", "accuracy", "runs");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>8.4} ± {:.4}  {:>5}",
            r.variant,
            r.mean,
            r.std,
            r.accuracies.len()
        );
    }
    out
}

pub fn ablation_jsonl(rows: &[AblationRow]) -> Result<String> {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}
