use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};

use tensorgcn::ablation::{
    ablation_jsonl, ablation_table, run_ablation, standard_variants, AblationTask,
};
use tensorgcn::corpus::{Corpus, DepAnnotations, EmbeddingAnnotations, EmbeddingMode, Masks, Split};
use tensorgcn::gradcheck::{gradcheck, GradcheckConfig};
use tensorgcn::graph::io::{load_tensor, save_tensor};
use tensorgcn::graph::{build_text_graph_tensor, TextGraphTensor};
use tensorgcn::manifest::RunManifest;
use tensorgcn::model::{Checkpoint, Model, ModelRegistry, ModelSpec};
use tensorgcn::trainer::{evaluate, train, TrainConfig};

const CHECKPOINT_FILE: &str = "checkpoint.bin";
const REPORT_FILE: &str = "report.jsonl";

#[derive(Parser)]
#[command(name = "tensorgcn", version, about = "Text graph tensors and TensorGCN training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the semantic, syntactic and sequential graphs of a corpus.
    BuildGraphs(BuildArgs),
    /// Train one model mode and write a checkpoint and report.
    Train(TrainArgs),
    /// Score a checkpoint on the training and test documents.
    Evaluate(EvaluateArgs),
    /// Train every ablation variant over several seeds.
    Ablate(AblateArgs),
    /// Compare analytic gradients with central differences on a fixture.
    Gradcheck(GradcheckArgs),
}

/// Every `TrainConfig` key as an optional flag; a flag beats the config
/// file, which beats the defaults.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    lr: Option<String>,
    #[arg(long)]
    l2_weight: Option<String>,
    #[arg(long)]
    dropout: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    hidden_dim: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// tensor, intra_only, merge or single(<graph>).
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    rho_sem: Option<String>,
    #[arg(long)]
    window_size: Option<String>,
    #[arg(long)]
    val_fraction: Option<String>,
    #[arg(long)]
    min_df: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut config = match &self.config {
            Some(p) => TrainConfig::from_file(p)
                .with_context(|| format!("reading config {}", p.display()))?,
            None => TrainConfig::default(),
        };
        let flags = [
            ("lr", &self.lr),
            ("l2_weight", &self.l2_weight),
            ("dropout", &self.dropout),
            ("max_epochs", &self.max_epochs),
            ("patience", &self.patience),
            ("hidden_dim", &self.hidden_dim),
            ("seed", &self.seed),
            ("mode", &self.mode),
            ("rho_sem", &self.rho_sem),
            ("window_size", &self.window_size),
            ("val_fraction", &self.val_fraction),
            ("min_df", &self.min_df),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.set(key, v)?;
            }
        }
        Ok(config)
    }
}

#[derive(Args)]
struct BuildArgs {
    /// Corpus file: one `{id, text, label, split}` record per line.
    #[arg(long)]
    dataset: PathBuf,
    /// Dependency annotations: one `{id, edges}` record per line.
    #[arg(long)]
    dep: Option<PathBuf>,
    /// Token embeddings for the semantic graph.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long, default_value = "contextual")]
    embedding_mode: EmbeddingMode,
    /// Output directory for graph files, node index and manifest.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct DataArgs {
    /// Directory written by `build-graphs`.
    #[arg(long)]
    graphs_dir: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated graph subset, e.g. `semantic,sequential`.
    #[arg(long)]
    graphs: Option<String>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated seeds; defaults to 0..num_seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long, default_value_t = 10)]
    num_seeds: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value = "tensor")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 4)]
    hidden: usize,
    /// Dropout rate; masks are frozen across the check.
    #[arg(long, default_value_t = 0.0)]
    dropout: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::BuildGraphs(a) => build_graphs(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Parses and resolves a mode against the registry; exits with a usage
/// error when it names no registered strategy.
fn checked_spec(registry: &ModelRegistry, mode: &str, graphs: Option<&str>) -> ModelSpec {
    let usage = |msg: String| -> ! { Cli::command().error(ErrorKind::InvalidValue, msg).exit() };
    let mut spec: ModelSpec = match mode.parse() {
        Ok(s) => s,
        Err(e) => usage(e.to_string()),
    };
    if let Some(list) = graphs {
        spec.graphs = Some(list.split(',').map(|g| g.trim().to_string()).collect());
    }
    if let Err(e) = registry.create(&spec.strategy) {
        usage(format!("{e}; known modes: {}", registry.names().collect::<Vec<_>>().join(", ")));
    }
    spec
}

fn load_data(args: &DataArgs, manifest: &mut RunManifest) -> Result<(Corpus, TextGraphTensor)> {
    let corpus = Corpus::load(&args.dataset)
        .with_context(|| format!("loading {}", args.dataset.display()))?;
    let tensor = load_tensor(&args.graphs_dir)
        .with_context(|| format!("loading graphs from {}", args.graphs_dir.display()))?;
    let same_docs = tensor.node_index().doc_ids().len() == corpus.len()
        && corpus.documents().iter().zip(tensor.node_index().doc_ids()).all(|(d, id)| &d.id == id);
    if !same_docs {
        bail!(
            "graphs in {} were built from a different corpus ({} documents vs {})",
            args.graphs_dir.display(),
            tensor.node_index().n_docs(),
            corpus.len()
        );
    }
    manifest.add_input(&args.dataset)?;
    for entry in graph_files(&args.graphs_dir)? {
        manifest.add_input(entry)?;
    }
    Ok((corpus, tensor))
}

fn graph_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    files.retain(|p| {
        p.extension().is_some_and(|x| x == "tsv" || x == "graph")
    });
    files.sort();
    Ok(files)
}

fn build_graphs(args: BuildArgs) -> Result<ExitCode> {
    let config = args.config.resolve()?;
    config.validate()?;
    let mut manifest = RunManifest::start("build-graphs", &config)?;
    let corpus = Corpus::load(&args.dataset)
        .with_context(|| format!("loading {}", args.dataset.display()))?;
    manifest.add_input(&args.dataset)?;
    let Some(emb_path) = &args.embeddings else {
        bail!("the semantic graph needs --embeddings (contextual vectors, or static vectors with --embedding-mode static)");
    };
    let embeddings = EmbeddingAnnotations::load(emb_path, &corpus, args.embedding_mode)
        .with_context(|| format!("loading {}", emb_path.display()))?;
    manifest.add_input(emb_path)?;
    let Some(dep_path) = &args.dep else {
        bail!("the syntactic graph needs --dep dependency annotations");
    };
    let dep = DepAnnotations::load(dep_path, &corpus)
        .with_context(|| format!("loading {}", dep_path.display()))?;
    manifest.add_input(dep_path)?;

    let (tensor, stats) = build_text_graph_tensor(&corpus, &dep, &embeddings, &config.graph_config())?;
    for path in save_tensor(&args.out, &tensor)? {
        manifest.add_artifact(path)?;
    }
    let stats_path = args.out.join("stats.json");
    fs::write(&stats_path, serde_json::to_string(&stats)? + "\n")?;
    manifest.add_artifact(&stats_path)?;
    manifest.finish(&args.out)?;

    println!("{:<12} {:>12}", "graph", "edges");
    for (name, count) in &stats.word_word_edges {
        println!("{name:<12} {count:>12}");
    }
    println!("{:<12} {:>12}", "doc-word", stats.doc_word_edges);
    println!(
        "{} nodes: {} documents, {} words",
        stats.nodes, stats.docs, stats.words
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_train(args: TrainArgs) -> Result<ExitCode> {
    let registry = ModelRegistry::default();
    let mut config = args.config.resolve()?;
    let spec = checked_spec(&registry, &config.mode, args.graphs.as_deref());
    config.mode = spec.to_string();
    config.validate()?;
    let mut manifest = RunManifest::start("train", &config)?;
    let (corpus, tensor) = load_data(&args.data, &mut manifest)?;
    let model = Model::new(&registry, &spec, &tensor, &[config.hidden_dim], corpus.num_classes())?;
    let masks = Masks::split(&corpus, config.val_fraction, config.seed)?;
    let (params, report) = train(&model, &corpus.labels(), &masks, &config)?;

    fs::create_dir_all(&args.out)?;
    let checkpoint = Checkpoint {
        mode: spec.to_string(),
        dims: model.dims().to_vec(),
        graphs: model.graph_names().to_vec(),
        params,
    };
    let ckpt_path = args.out.join(CHECKPOINT_FILE);
    checkpoint.save(&ckpt_path)?;
    let report_path = args.out.join(REPORT_FILE);
    report.write_jsonl(&report_path)?;
    manifest.add_artifact(&ckpt_path)?;
    manifest.add_artifact(&report_path)?;
    manifest.finish(&args.out)?;
    print!("{}", report.summary_table());
    Ok(ExitCode::SUCCESS)
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<ExitCode> {
    let registry = ModelRegistry::default();
    let checkpoint = Checkpoint::load(&args.checkpoint)
        .with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let mut manifest = RunManifest::start("evaluate", &serde_json::json!({ "mode": checkpoint.mode }))?;
    manifest.add_input(&args.checkpoint)?;
    let (corpus, tensor) = load_data(&args.data, &mut manifest)?;
    let spec: ModelSpec = checkpoint.mode.parse()?;
    let spec = ModelSpec {
        graphs: Some(checkpoint.graphs.clone()),
        ..spec
    };
    let dims = &checkpoint.dims;
    if dims.len() < 2 {
        bail!("checkpoint has {} layer widths", dims.len());
    }
    let model = Model::new(
        &registry,
        &spec,
        &tensor,
        &dims[1..dims.len() - 1],
        dims[dims.len() - 1],
    )?;
    if model.dims() != dims.as_slice() {
        bail!("checkpoint widths {:?} do not fit graphs with widths {:?}", dims, model.dims());
    }
    model.check_params(&checkpoint.params)?;
    let labels = corpus.labels();
    let split = |s| -> Vec<bool> { corpus.documents().iter().map(|d| d.split == s).collect() };
    let train_acc = evaluate(&model, &checkpoint.params, &labels, &split(Split::Train))?;
    let test_acc = evaluate(&model, &checkpoint.params, &labels, &split(Split::Test))?;
    println!(
        "{}",
        serde_json::json!({ "mode": checkpoint.mode, "train_accuracy": train_acc, "test_accuracy": test_acc })
    );
    println!("{:<10} {:>9}", "split", "accuracy");
    println!("{:<10} {:>9.4}", "train", train_acc);
    println!("{:<10} {:>9.4}", "test", test_acc);
    Ok(ExitCode::SUCCESS)
}

fn cmd_ablate(args: AblateArgs) -> Result<ExitCode> {
    let registry = ModelRegistry::default();
    let config = args.config.resolve()?;
    config.validate()?;
    let seeds = args.seeds.clone().unwrap_or_else(|| (0..args.num_seeds).collect());
    let mut manifest = RunManifest::start(
        "ablate",
        &serde_json::json!({ "config": config, "seeds": seeds }),
    )?;
    let (corpus, tensor) = load_data(&args.data, &mut manifest)?;
    let labels = corpus.labels();
    let splits: Vec<_> = corpus.documents().iter().map(|d| d.split).collect();
    let task = AblationTask {
        tensor: &tensor,
        labels: &labels,
        splits: &splits,
        num_classes: corpus.num_classes(),
    };
    let variants = standard_variants(tensor.names());
    let (rows, reports) = run_ablation(&registry, task, &variants, &config, &seeds)?;

    fs::create_dir_all(&args.out)?;
    for (variant, runs) in variants.iter().zip(&reports) {
        let dir = args.out.join(slug(&variant.label));
        fs::create_dir_all(&dir)?;
        for r in runs {
            let path = dir.join(format!("seed{}.jsonl", r.seed));
            r.write_jsonl(&path)?;
            manifest.add_artifact(&path)?;
        }
    }
    let table = ablation_table(&rows);
    let table_path = args.out.join("ablation.txt");
    fs::write(&table_path, &table)?;
    let jsonl_path = args.out.join("ablation.jsonl");
    fs::write(&jsonl_path, ablation_jsonl(&rows)?)?;
    manifest.add_artifact(&table_path)?;
    manifest.add_artifact(&jsonl_path)?;
    manifest.finish(&args.out)?;
    print!("{table}");
    Ok(ExitCode::SUCCESS)
}

fn slug(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect::<String>()
        .replace("__", "_")
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<ExitCode> {
    let registry = ModelRegistry::default();
    let spec = checked_spec(&registry, &args.mode, None);
    let report = gradcheck(&GradcheckConfig {
        mode: spec,
        seed: args.seed,
        tolerance: args.tolerance,
        step: args.step,
        hidden: args.hidden,
        dropout: args.dropout,
        ..GradcheckConfig::default()
    })?;
    println!("{}", serde_json::to_string(&report)?);
    println!(
        "{:<20} {:>14} {:>10} {:>8}",
        "mode", "max_rel_error", "checked", "result"
    );
    println!(
        "{:<20} {:>14.3e} {:>10} {:>8}",
        report.mode,
        report.max_rel_error,
        report.checked,
        if report.passed { "PASS" } else { "FAIL" }
    );
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
