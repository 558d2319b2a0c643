//! Central finite-difference verification of the analytic gradients.

use serde::Serialize;

use crate::autodiff::{Fault, Tape};
use crate::error::{Error, Result};
use crate::fixtures::{gradcheck_task, SyntheticTask};
use crate::model::{Dropout, Init, Model, ModelParams, ModelRegistry, ModelSpec};
use crate::trainer::{masked_rows, objective};

#[derive(Clone, Debug)]
pub struct GradcheckConfig {
    pub mode: ModelSpec,
    pub seed: u64,
    pub tolerance: f64,
    pub step: f64,
    pub hidden: usize,
    /// Dropout rate; masks are redrawn from the same seed at every
    /// evaluation, so they stay frozen across the check.
    pub dropout: f64,
    pub l2_weight: f64,
    pub zero_init: bool,
    pub fault: Option<Fault>,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            mode: ModelSpec::new("tensor"),
            seed: 0,
            tolerance: 1e-4,
            step: 1e-5,
            hidden: 4,
            dropout: 0.0,
            l2_weight: 5e-6,
            zero_init: false,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub mode: String,
    pub max_rel_error: f64,
    pub worst_parameter: String,
    pub worst_entry: (usize, usize),
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

struct Problem<'a> {
    model: &'a Model,
    rows: Vec<usize>,
    labels: Vec<usize>,
    config: &'a GradcheckConfig,
}

impl Problem<'_> {
    fn dropout(&self) -> Result<Dropout> {
        Dropout::new(self.config.dropout, self.config.seed)
    }

    fn loss(&self, params: &ModelParams) -> Result<f64> {
        let mut tape = Tape::new();
        let vars = params.record(&mut tape);
        let (_, loss) = objective(
            &mut tape,
            self.model,
            &vars,
            &mut self.dropout()?,
            &self.rows,
            &self.labels,
            self.config.l2_weight,
        )?;
        let v = tape.value(loss)?.get(0, 0);
        if !v.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: 0, value: v });
        }
        Ok(v)
    }

    fn analytic(&self, params: &ModelParams) -> Result<Vec<crate::linalg::DenseMatrix>> {
        let mut tape = Tape::new();
        if let Some(f) = self.config.fault {
            tape.inject_fault(f);
        }
        let vars = params.record(&mut tape);
        let (_, loss) = objective(
            &mut tape,
            self.model,
            &vars,
            &mut self.dropout()?,
            &self.rows,
            &self.labels,
            self.config.l2_weight,
        )?;
        let grads = tape.backward(loss)?;
        Ok(vars
            .vars()
            .iter()
            .zip(params.values())
            .map(|(&v, p)| grads.get_or_zeros(v, p.shape()))
            .collect())
    }
}

/// Checks every scalar parameter of `model` on the training rows of `task`.
pub fn gradcheck_model(
    model: &Model,
    params: &ModelParams,
    task: &SyntheticTask,
    config: &GradcheckConfig,
) -> Result<GradcheckReport> {
    let train: Vec<bool> = task.splits.iter().map(|&s| s == crate::corpus::Split::Train).collect();
    let (rows, labels) = masked_rows(&task.labels, &train);
    let problem = Problem {
        model,
        rows,
        labels,
        config,
    };
    problem.loss(params)?;
    let analytic = problem.analytic(params)?;
    let mut probe = params.clone();
    let mut worst = (0.0f64, String::new(), (0, 0));
    let mut checked = 0;
    for (p, name) in params.names().iter().enumerate() {
        let (rows, cols) = params.values()[p].shape();
        for i in 0..rows {
            for j in 0..cols {
                let x = params.values()[p].get(i, j);
                probe.values_mut()[p].set(i, j, x + config.step);
                let up = problem.loss(&probe)?;
                probe.values_mut()[p].set(i, j, x - config.step);
                let down = problem.loss(&probe)?;
                probe.values_mut()[p].set(i, j, x);
                let numeric = (up - down) / (2.0 * config.step);
                let err = relative_error(analytic[p].get(i, j), numeric);
                checked += 1;
                if err > worst.0 || worst.1.is_empty() {
                    worst = (err, name.clone(), (i, j));
                }
            }
        }
    }
    Ok(GradcheckReport {
        mode: model.spec().to_string(),
        max_rel_error: worst.0,
        worst_parameter: worst.1,
        worst_entry: worst.2,
        checked,
        tolerance: config.tolerance,
        passed: worst.0 < config.tolerance,
    })
}

/// Runs the check on the built-in fixture: three graphs over six nodes,
/// two classes.
pub fn gradcheck(config: &GradcheckConfig) -> Result<GradcheckReport> {
    let task = gradcheck_task()?;
    let model = Model::new(
        &ModelRegistry::default(),
        &config.mode,
        &task.tensor,
        &[config.hidden],
        task.num_classes,
    )?;
    let mut specs = model.param_specs();
    if config.zero_init {
        for s in &mut specs {
            if s.init == Init::Glorot {
                s.init = Init::Constant(0.0);
            }
        }
    }
    let params = ModelParams::initialize(&specs, config.seed);
    gradcheck_model(&model, &params, &task, config)
}
