//! Full-batch transductive training with Adam and early stopping.

mod adam;
mod early_stopping;
mod report;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use early_stopping::{EarlyStopping, StopDecision};
pub use report::{EpochRecord, TrainReport};

use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Var};
use crate::corpus::Masks;
use crate::error::{Error, Result};
use crate::graph::GraphConfig;
use crate::linalg::DenseMatrix;
use crate::model::{Dropout, Model, ModelParams, ModelSpec, ParamVars};

/// Offset separating the dropout stream from the initialization stream.
const DROPOUT_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub l2_weight: f64,
    pub dropout: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub hidden_dim: usize,
    pub seed: u64,
    pub mode: String,
    pub rho_sem: f64,
    pub window_size: usize,
    pub val_fraction: f64,
    pub min_df: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 0.002,
            l2_weight: 5e-6,
            dropout: 0.5,
            max_epochs: 1000,
            patience: 10,
            hidden_dim: 200,
            seed: 0,
            mode: "tensor".into(),
            rho_sem: 0.9,
            window_size: 20,
            val_fraction: 0.1,
            min_df: 1,
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad value `{value}` for `{key}`")))
}

impl TrainConfig {
    pub const KEYS: [&'static str; 12] = [
        "lr",
        "l2_weight",
        "dropout",
        "max_epochs",
        "patience",
        "hidden_dim",
        "seed",
        "mode",
        "rho_sem",
        "window_size",
        "val_fraction",
        "min_df",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "lr" => self.lr = parse_value(key, value)?,
            "l2_weight" => self.l2_weight = parse_value(key, value)?,
            "dropout" => self.dropout = parse_value(key, value)?,
            "max_epochs" => self.max_epochs = parse_value(key, value)?,
            "patience" => self.patience = parse_value(key, value)?,
            "hidden_dim" => self.hidden_dim = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "mode" => self.mode = value.trim().to_string(),
            "rho_sem" => self.rho_sem = parse_value(key, value)?,
            "window_size" => self.window_size = parse_value(key, value)?,
            "val_fraction" => self.val_fraction = parse_value(key, value)?,
            "min_df" => self.min_df = parse_value(key, value)?,
            _ => return Err(Error::InvalidArgument(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return bad(format!("l2_weight must be non-negative, got {}", self.l2_weight));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.max_epochs == 0 || self.patience == 0 || self.hidden_dim == 0 {
            return bad("max_epochs, patience and hidden_dim must be at least 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must lie in (0, 1), got {}", self.val_fraction));
        }
        self.model_spec()?;
        self.graph_config().validate()
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        self.mode.parse()
    }

    pub fn graph_config(&self) -> GraphConfig {
        GraphConfig {
            window_size: self.window_size,
            rho_sem: self.rho_sem,
            min_df: self.min_df,
        }
    }

    pub fn dropout_seed(&self) -> u64 {
        self.seed ^ DROPOUT_STREAM
    }
}

/// Node rows and labels of the documents selected by `mask`.
pub fn masked_rows(labels: &[usize], mask: &[bool]) -> (Vec<usize>, Vec<usize>) {
    mask.iter()
        .zip(labels)
        .enumerate()
        .filter(|(_, (&m, _))| m)
        .map(|(i, (_, &y))| (i, y))
        .unzip()
}

/// Records the training objective: mean cross-entropy over `rows` plus
/// `l2_weight` times the squared norm of every parameter. Returns the
/// logits and the loss.
pub fn objective(
    tape: &mut Tape,
    model: &Model,
    params: &ParamVars,
    dropout: &mut Dropout,
    rows: &[usize],
    labels: &[usize],
    l2_weight: f64,
) -> Result<(Var, Var)> {
    let logits = model.forward(tape, params, dropout)?;
    let mut loss = tape.softmax_cross_entropy(logits, rows, labels)?;
    if l2_weight != 0.0 {
        let mut penalty: Option<Var> = None;
        for &p in params.vars() {
            let sq = tape.squared_norm(p)?;
            penalty = Some(match penalty {
                Some(acc) => tape.add(acc, sq)?,
                None => sq,
            });
        }
        if let Some(penalty) = penalty {
            let scaled = tape.scale(penalty, l2_weight)?;
            loss = tape.add(loss, scaled)?;
        }
    }
    Ok((logits, loss))
}

/// Objective value with dropout off.
pub fn masked_loss(
    model: &Model,
    params: &ModelParams,
    labels: &[usize],
    mask: &[bool],
    l2_weight: f64,
) -> Result<f64> {
    let (rows, ys) = masked_rows(labels, mask);
    let mut tape = Tape::new();
    let vars = params.record(&mut tape);
    let (_, loss) = objective(
        &mut tape,
        model,
        &vars,
        &mut Dropout::disabled(),
        &rows,
        &ys,
        l2_weight,
    )?;
    Ok(tape.value(loss)?.get(0, 0))
}

/// Row-wise argmax; ties go to the lowest class index.
pub fn predict(logits: &DenseMatrix) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            let row = logits.row(i);
            let mut best = 0;
            for (k, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// Fraction of masked documents whose prediction matches the label.
pub fn accuracy(logits: &DenseMatrix, labels: &[usize], mask: &[bool]) -> f64 {
    let predictions = predict(logits);
    let (rows, ys) = masked_rows(labels, mask);
    if rows.is_empty() {
        return 0.0;
    }
    let hits = rows
        .iter()
        .zip(&ys)
        .filter(|&(&r, &y)| predictions[r] == y)
        .count();
    hits as f64 / rows.len() as f64
}

pub fn evaluate(model: &Model, params: &ModelParams, labels: &[usize], mask: &[bool]) -> Result<f64> {
    check_masks(model, labels, &[mask])?;
    Ok(accuracy(&model.logits(params)?, labels, mask))
}

fn check_masks(model: &Model, labels: &[usize], masks: &[&[bool]]) -> Result<()> {
    let n_docs = model.n_docs();
    if labels.len() != n_docs || masks.iter().any(|m| m.len() != n_docs) {
        return Err(Error::shape(format!(
            "graph has {n_docs} documents but labels/masks cover {}",
            labels.len()
        )));
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= model.num_classes()) {
        return Err(Error::InvalidArgument(format!(
            "label {y} outside {} classes",
            model.num_classes()
        )));
    }
    Ok(())
}

/// Trains from a fresh seeded initialization and returns the parameters of
/// the epoch with the lowest validation loss.
pub fn train(
    model: &Model,
    labels: &[usize],
    masks: &Masks,
    config: &TrainConfig,
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    check_masks(model, labels, &[&masks.train, &masks.val, &masks.test])?;
    let start = Instant::now();
    let (train_rows, train_labels) = masked_rows(labels, &masks.train);
    let mut params = model.init_params(config.seed);
    let mut state = AdamState::new(&params);
    let mut dropout = Dropout::new(config.dropout, config.dropout_seed())?;
    let mut stopper = EarlyStopping::new(config.patience);
    let mut best = params.clone();
    let mut epochs = Vec::new();
    let mut stop_epoch = config.max_epochs;

    for epoch in 1..=config.max_epochs {
        let mut tape = Tape::new();
        let vars = params.record(&mut tape);
        let (logits, loss) = objective(
            &mut tape,
            model,
            &vars,
            &mut dropout,
            &train_rows,
            &train_labels,
            config.l2_weight,
        )?;
        let train_loss = tape.value(loss)?.get(0, 0);
        if !train_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                value: train_loss,
            });
        }
        let train_accuracy = accuracy(tape.value(logits)?, labels, &masks.train);
        let grads = tape.backward(loss)?;
        let grads: Vec<DenseMatrix> = vars
            .vars()
            .iter()
            .zip(params.values())
            .map(|(&v, p)| grads.get_or_zeros(v, p.shape()))
            .collect();
        adam_step(&mut params, &grads, &mut state, config.lr)?;
        model.project(&mut params);

        let logits = model.logits(&params)?;
        let val_loss = masked_loss(model, &params, labels, &masks.val, config.l2_weight)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                value: val_loss,
            });
        }
        let val_accuracy = accuracy(&logits, labels, &masks.val);
        log::debug!(
            "epoch {epoch}: train loss {train_loss:.5} acc {train_accuracy:.4}, val loss {val_loss:.5} acc {val_accuracy:.4}"
        );
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            train_accuracy,
            val_loss,
            val_accuracy,
        });
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best = params.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stop_epoch = epoch;
                break;
            }
        }
    }

    let test_accuracy = evaluate(model, &best, labels, &masks.test)?;
    let report = TrainReport {
        mode: model.spec().to_string(),
        seed: config.seed,
        best_epoch: stopper.best_epoch().unwrap_or(0),
        stop_epoch,
        test_accuracy,
        epochs,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    Ok((best, report))
}
