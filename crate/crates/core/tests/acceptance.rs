//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Criteria that need the R8 or MR benchmark read them from environment
//! variables and report FAIL with the reason when they are absent. The
//! process exits nonzero on any FAIL only when
//! `TENSORGCN_ACCEPTANCE_STRICT=1`, so the rest of the workspace tests
//! still run by default.

mod common;

use std::env;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use common::*;
use tensorgcn::ablation::{mean_std, run_one, AblationTask};
use tensorgcn::autodiff::Tape;
use tensorgcn::corpus::{Corpus, DepAnnotations, EmbeddingAnnotations, EmbeddingMode, NodeIndex, Split, Vocabulary};
use tensorgcn::fixtures::{complementary_task, random_tensor, ComplementaryConfig};
use tensorgcn::gradcheck::{gradcheck, GradcheckConfig};
use tensorgcn::graph::io::save_tensor;
use tensorgcn::graph::{build_text_graph_tensor, pmi_edges, semantic_edges, syntactic_edges, tfidf_edges, GraphConfig, TextGraphTensor};
use tensorgcn::linalg::DenseMatrix;
use tensorgcn::model::{inter_propagate, Activation, Model, ModelRegistry, ModelSpec};
use tensorgcn::trainer::{train, TrainConfig};

const ORACLE_TOLERANCE: f64 = 1e-10;
const GRADCHECK_TOLERANCE: f64 = 1e-4;
const GRADCHECK_STEP: f64 = 1e-5;
const BUILDER_TOLERANCE: f64 = 1e-12;
const R8_TARGET: f64 = 0.960;
const MR_TARGET: f64 = 0.755;
const R8_BUDGET_SECS: f64 = 30.0 * 60.0;
/// 0.3 accuracy points on a 0..100 scale.
const TENSOR_MARGIN: f64 = 0.003;
const ABLATION_SEEDS: u64 = 10;
const ABLATION_REQUIRED: usize = 8;
/// The fixture has 20 training documents; a 0.2 hold-out keeps four of
/// them for early stopping instead of two.
const ABLATION_VAL_FRACTION: f64 = 0.2;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn oracle_equivalence() -> Outcome {
    let registry = ModelRegistry::default();
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let tensor = random_tensor(6, 14, 3, 0.3, seed).expect("fixture");
        for hidden in [vec![8], vec![5, 4]] {
            let model = Model::new(&registry, &ModelSpec::new("tensor"), &tensor, &hidden, 3).expect("model");
            let params = model.init_params(seed);
            let logits = model.logits(&params).expect("forward");
            let oracle = tensor_forward(&dense_graphs(&tensor), tensor.names(), &params, hidden.len() + 1, true);
            worst = worst.max(max_abs_diff(&oracle, &logits));
        }
    }
    outcome(
        worst <= ORACLE_TOLERANCE,
        format!("max abs error {worst:.3e} (tolerance {ORACLE_TOLERANCE:e}, r=3, n=20)"),
    )
}

fn gradient_correctness() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_param = String::new();
    let mut all_passed = true;
    for dropout in [0.0, 0.5] {
        let report = gradcheck(&GradcheckConfig {
            mode: ModelSpec::new("tensor"),
            tolerance: GRADCHECK_TOLERANCE,
            step: GRADCHECK_STEP,
            dropout,
            ..GradcheckConfig::default()
        })
        .expect("gradcheck");
        all_passed &= report.passed;
        if report.max_rel_error >= worst {
            worst = report.max_rel_error;
            worst_param = report.worst_parameter;
        }
    }
    outcome(
        all_passed,
        format!("max relative error {worst:.3e} at {worst_param} (tolerance {GRADCHECK_TOLERANCE:e}, step {GRADCHECK_STEP:e}, dropout off and frozen at 0.5)"),
    )
}

fn builder_oracle() -> Outcome {
    let mut worst = 0.0f64;
    let mut corpora = 0;
    for seed in 0..8u64 {
        let corpus = random_corpus(8 + 6 * seed as usize, 15, 16, seed);
        for (min_df, window, rho) in [(1, 4, 0.9), (1, 20, 0.6), (2, 6, 0.95)] {
            let vocab = Vocabulary::build(&corpus, min_df).expect("vocab");
            let ni = NodeIndex::new(&corpus, &vocab);
            let emb = random_static_embeddings(&corpus, 2, seed);
            let dep = random_dependencies(&corpus, seed);
            let errors = [
                edge_error(&tfidf_edges(&corpus, &vocab, &ni).expect("tfidf"), &tfidf_dense(&corpus, &vocab)),
                edge_error(&pmi_edges(&corpus, &vocab, &ni, window).expect("pmi"), &pmi_dense(&corpus, &vocab, window)),
                edge_error(
                    &semantic_edges(&corpus, &vocab, &ni, &emb, rho).expect("semantic"),
                    &semantic_dense(&corpus, &vocab, &emb, rho),
                ),
                edge_error(
                    &syntactic_edges(&corpus, &vocab, &ni, &dep).expect("syntactic"),
                    &syntactic_dense(&corpus, &vocab, &dep),
                ),
            ];
            worst = errors.into_iter().fold(worst, f64::max);
            corpora += 1;
        }
    }
    outcome(
        worst <= BUILDER_TOLERANCE,
        format!("max abs error {worst:.3e} over {corpora} corpus/config pairs of 8..50 docs (tolerance {BUILDER_TOLERANCE:e})"),
    )
}

fn inter_law() -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    for r in 2..=5 {
        let slices: Vec<DenseMatrix> = (0..r)
            .map(|k| DenseMatrix::from_fn(11, 6, |i, j| ((i * 31 + j * 17 + k * 7) % 13) as f64 / 7.0 - 0.9))
            .collect();
        let mut tape = Tape::new();
        let vars: Vec<_> = slices.iter().map(|s| tape.constant(s.clone())).collect();
        let w = tape.param(DenseMatrix::identity(6));
        let out = inter_propagate(&mut tape, &vars, w, Activation::Identity).expect("inter");
        for (i, &o) in out.iter().enumerate() {
            let got = tape.value(o).expect("value");
            for node in 0..11 {
                for c in 0..6 {
                    let mut expect = 0.0;
                    let mut first = true;
                    for (k, s) in slices.iter().enumerate() {
                        if k != i {
                            expect = if first { s.get(node, c) } else { expect + s.get(node, c) };
                            first = false;
                        }
                    }
                    checked += 1;
                    if got.get(node, c).to_bits() != expect.to_bits() {
                        violations += 1;
                    }
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{violations} inexact entries out of {checked} (r = 2..5, W_inter = I, identity activation)"),
    )
}

fn load_benchmark(name: &str) -> Result<(Corpus, PathBuf), String> {
    let var = format!("TENSORGCN_{name}_DATASET");
    let path = env::var_os(&var).map(PathBuf::from).ok_or_else(|| {
        format!("{name} dataset unavailable: set {var} to its corpus file")
    })?;
    let corpus = Corpus::load(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((corpus, path))
}

/// Graph tensor of a benchmark. Without annotations the semantic and
/// syntactic graphs carry only the shared doc–word edges.
fn benchmark_tensor(corpus: &Corpus, dep: Option<&Path>, emb: Option<&Path>) -> Result<TextGraphTensor, String> {
    let dep = match dep {
        Some(p) => DepAnnotations::load(p, corpus).map_err(|e| e.to_string())?,
        None => DepAnnotations::empty(corpus),
    };
    let emb = match emb {
        Some(p) => EmbeddingAnnotations::load(p, corpus, EmbeddingMode::Static).map_err(|e| e.to_string())?,
        None => EmbeddingAnnotations::Static {
            dim: 0,
            vectors: Default::default(),
        },
    };
    build_text_graph_tensor(corpus, &dep, &emb, &GraphConfig::default())
        .map(|(t, _)| t)
        .map_err(|e| e.to_string())
}

fn mean_accuracy(corpus: &Corpus, tensor: &TextGraphTensor, spec: &ModelSpec, seeds: &[u64]) -> Result<f64, String> {
    let registry = ModelRegistry::default();
    let labels = corpus.labels();
    let splits: Vec<Split> = corpus.documents().iter().map(|d| d.split).collect();
    let task = AblationTask {
        tensor,
        labels: &labels,
        splits: &splits,
        num_classes: corpus.num_classes(),
    };
    let mut accs = Vec::new();
    for &seed in seeds {
        let report = run_one(&registry, task, spec, &TrainConfig::default(), seed).map_err(|e| e.to_string())?;
        accs.push(report.test_accuracy);
    }
    Ok(mean_std(&accs).0)
}

fn textgcn_baseline() -> Outcome {
    let seeds = [0, 1, 2];
    let spec: ModelSpec = "single(sequential)".parse().expect("spec");
    let mut details = Vec::new();
    let mut passed = true;
    for (name, target) in [("R8", R8_TARGET), ("MR", MR_TARGET)] {
        let start = Instant::now();
        let result = load_benchmark(name)
            .and_then(|(corpus, _)| {
                let tensor = benchmark_tensor(&corpus, None, None)?;
                mean_accuracy(&corpus, &tensor, &spec, &seeds)
            });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(acc) => {
                let ok = acc >= target && (name != "R8" || secs <= R8_BUDGET_SECS);
                passed &= ok;
                details.push(format!("{name} mean accuracy {acc:.4} (target {target}) in {secs:.0}s"));
            }
            Err(e) => {
                passed = false;
                details.push(e);
            }
        }
    }
    outcome(passed, details.join("; "))
}

fn tensor_over_single() -> Outcome {
    let seeds = [0, 1, 2];
    let result = load_benchmark("MR").and_then(|(corpus, _)| {
        let dep = env::var_os("TENSORGCN_MR_DEP").map(PathBuf::from);
        let emb = env::var_os("TENSORGCN_MR_EMBEDDINGS").map(PathBuf::from);
        let (Some(dep), Some(emb)) = (dep, emb) else {
            return Err("MR annotations unavailable: set TENSORGCN_MR_DEP and TENSORGCN_MR_EMBEDDINGS (static vectors)".into());
        };
        let tensor = benchmark_tensor(&corpus, Some(&dep), Some(&emb))?;
        let full = mean_accuracy(&corpus, &tensor, &ModelSpec::new("tensor"), &seeds)?;
        let mut best_single = f64::NEG_INFINITY;
        for g in tensor.names() {
            let spec = ModelSpec::with_graphs("single", &[g.as_str()]);
            best_single = best_single.max(mean_accuracy(&corpus, &tensor, &spec, &seeds)?);
        }
        Ok((full, best_single))
    });
    match result {
        Ok((full, single)) => outcome(
            full - single >= TENSOR_MARGIN,
            format!("tensor {full:.4} vs best single {single:.4} (required margin {TENSOR_MARGIN})"),
        ),
        Err(e) => outcome(false, e),
    }
}

fn ablation_ordering() -> Outcome {
    let task = complementary_task(&ComplementaryConfig::default(), 0).expect("fixture");
    let registry = ModelRegistry::default();
    let config = TrainConfig {
        val_fraction: ABLATION_VAL_FRACTION,
        ..TrainConfig::default()
    };
    let shared = AblationTask {
        tensor: &task.tensor,
        labels: &task.labels,
        splits: &task.splits,
        num_classes: task.num_classes,
    };
    let mut wins = 0;
    let mut rows = Vec::new();
    for seed in 0..ABLATION_SEEDS {
        let acc = |mode: &str| {
            run_one(&registry, shared, &ModelSpec::new(mode), &config, seed)
                .expect("training")
                .test_accuracy
        };
        let (t, i, m) = (acc("tensor"), acc("intra_only"), acc("merge"));
        if t >= i && t >= m {
            wins += 1;
        }
        rows.push(format!("{t:.3}/{i:.3}/{m:.3}"));
    }
    outcome(
        wins >= ABLATION_REQUIRED,
        format!(
            "tensor >= intra_only and merge in {wins}/{ABLATION_SEEDS} seeds (need {ABLATION_REQUIRED}); tensor/intra/merge per seed: {}",
            rows.join(" ")
        ),
    )
}

fn determinism() -> Outcome {
    let corpus = random_corpus(30, 20, 18, 42);
    let dep = random_dependencies(&corpus, 42);
    let emb = random_static_embeddings(&corpus, 3, 42);
    let config = TrainConfig {
        hidden_dim: 16,
        max_epochs: 40,
        ..TrainConfig::default()
    };
    let run = |dir: &Path| -> Vec<(String, Vec<u8>)> {
        let (tensor, _) = build_text_graph_tensor(&corpus, &dep, &emb, &config.graph_config()).expect("build");
        let mut files: Vec<(String, Vec<u8>)> = save_tensor(dir, &tensor)
            .expect("save")
            .into_iter()
            .map(|p| {
                let name = p.file_name().expect("file").to_string_lossy().into_owned();
                (name, std::fs::read(&p).expect("read"))
            })
            .collect();
        let registry = ModelRegistry::default();
        for mode in ["tensor", "merge"] {
            let model = Model::new(&registry, &ModelSpec::new(mode), &tensor, &[config.hidden_dim], 2).expect("model");
            let masks = tensorgcn::corpus::Masks::split(&corpus, config.val_fraction, config.seed).expect("masks");
            let (_, report) = train(&model, &corpus.labels(), &masks, &TrainConfig { mode: mode.into(), ..config.clone() })
                .expect("train");
            files.push((format!("{mode}.jsonl"), report.to_jsonl().expect("jsonl").into_bytes()));
        }
        files
    };
    let a = tempfile::tempdir().expect("tempdir");
    let b = tempfile::tempdir().expect("tempdir");
    let first = run(a.path());
    let second = run(b.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    outcome(
        differing.is_empty() && first.len() == second.len(),
        if differing.is_empty() {
            format!("{} artifacts byte-identical across two runs", first.len())
        } else {
            format!("differing artifacts: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("gradient correctness", gradient_correctness),
        ("graph-builder oracle", builder_oracle),
        ("inter-propagation law", inter_law),
        ("textgcn-equivalent baseline", textgcn_baseline),
        ("tensor-over-single ordering", tensor_over_single),
        ("ablation ordering on fixtures", ablation_ordering),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let o = check();
        if !o.passed {
            failed += 1;
        }
        println!(
            "{} {name}: {} [{:.1}s]",
            if o.passed { "PASS" } else { "FAIL" },
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    let strict = env::var("TENSORGCN_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && failed > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
