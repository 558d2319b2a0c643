use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Training trace of one run. Wall time is kept out of the serialized
/// records so identical runs serialize identically.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainReport {
    pub mode: String,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stop_epoch: usize,
    pub test_accuracy: f64,
    #[serde(skip)]
    pub wall_time_secs: f64,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.mode == other.mode
            && self.seed == other.seed
            && self.epochs == other.epochs
            && self.best_epoch == other.best_epoch
            && self.stop_epoch == other.stop_epoch
            && self.test_accuracy.to_bits() == other.test_accuracy.to_bits()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Line {
    Epoch(EpochRecord),
    Summary {
        mode: String,
        seed: u64,
        best_epoch: usize,
        stop_epoch: usize,
        test_accuracy: f64,
    },
}

impl TrainReport {
    /// One record per epoch followed by a summary record.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.epochs {
            out.push_str(&serde_json::to_string(&Line::Epoch(e.clone()))?);
            out.push('\n');
        }
        let summary = Line::Summary {
            mode: self.mode.clone(),
            seed: self.seed,
            best_epoch: self.best_epoch,
            stop_epoch: self.stop_epoch,
            test_accuracy: self.test_accuracy,
        };
        out.push_str(&serde_json::to_string(&summary)?);
        out.push('\n');
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut epochs = Vec::new();
        let mut report = None;
        for line in text.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str(line)? {
                Line::Epoch(e) => epochs.push(e),
                Line::Summary {
                    mode,
                    seed,
                    best_epoch,
                    stop_epoch,
                    test_accuracy,
                } => {
                    report = Some(TrainReport {
                        mode,
                        seed,
                        epochs: Vec::new(),
                        best_epoch,
                        stop_epoch,
                        test_accuracy,
                        wall_time_secs: 0.0,
                    })
                }
            }
        }
        let mut report = report.ok_or_else(|| {
            crate::Error::InvalidArgument("report has no summary record".into())
        })?;
        report.epochs = epochs;
        Ok(report)
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_jsonl()?)?;
        Ok(())
    }

    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|e| e.epoch == self.best_epoch)
    }

    /// Aligned text summary: the best and last epochs and the outcome.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<8} {:>11} {:>10} {:>10} {:>9}",
            "epoch", "train_loss", "train_acc", "val_loss", "val_acc"
        );
        let mut shown: Vec<&EpochRecord> = self.best().into_iter().collect();
        if let Some(last) = self.epochs.last() {
            if last.epoch != self.best_epoch {
                shown.push(last);
            }
        }
        for e in shown {
            let tag = if e.epoch == self.best_epoch { "*" } else { "" };
            let _ = writeln!(
                out,
                "{:<8} {:>11.5} {:>10.4} {:>10.5} {:>9.4}",
                format!("{}{tag}", e.epoch),
                e.train_loss,
                e.train_accuracy,
                e.val_loss,
                e.val_accuracy
            );
        }
        let _ = writeln!(
            out,
            "mode {}  seed {}  stopped at epoch {}  best epoch {}  test accuracy {:.4}  ({:.1}s)",
            self.mode, self.seed, self.stop_epoch, self.best_epoch, self.test_accuracy, self.wall_time_secs
        );
        out
    }
}
