use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{DropoutMask, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// How a parameter is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Uniform in `±sqrt(6 / (rows + cols))`.
    Glorot,
    Constant(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: (usize, usize),
    pub init: Init,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: (usize, usize), init: Init) -> Self {
        Self {
            name: name.into(),
            shape,
            init,
        }
    }
}

/// Named trainable matrices in a fixed order.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    names: Vec<String>,
    values: Vec<DenseMatrix>,
}

impl ModelParams {
    pub fn new(entries: Vec<(String, DenseMatrix)>) -> Result<Self> {
        let mut names = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        for (n, v) in entries {
            if names.contains(&n) {
                return Err(Error::InvalidArgument(format!("duplicate parameter `{n}`")));
            }
            names.push(n);
            values.push(v);
        }
        Ok(Self { names, values })
    }

    /// Draws every parameter from one seeded stream, in spec order.
    pub fn initialize(specs: &[ParamSpec], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut names = Vec::with_capacity(specs.len());
        let mut values = Vec::with_capacity(specs.len());
        for spec in specs {
            let (r, c) = spec.shape;
            let m = match spec.init {
                Init::Glorot => {
                    let limit = (6.0 / (r + c) as f64).sqrt();
                    DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-limit..limit))
                }
                Init::Constant(v) => DenseMatrix::filled(r, c, v),
            };
            names.push(spec.name.clone());
            values.push(m);
        }
        Self { names, values }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            names: self.names.clone(),
            values: self
                .values
                .iter()
                .map(|v| DenseMatrix::zeros(v.rows(), v.cols()))
                .collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[DenseMatrix] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [DenseMatrix] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&DenseMatrix> {
        self.position(name).map(|i| &self.values[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut DenseMatrix> {
        self.position(name).map(move |i| &mut self.values[i])
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseMatrix)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.data().len()).sum()
    }

    /// Sum of squared entries over every parameter.
    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(DenseMatrix::squared_norm).sum()
    }

    /// Checks names and shapes against a parameter layout.
    pub fn check_layout(&self, specs: &[ParamSpec]) -> Result<()> {
        if specs.len() != self.len() {
            return Err(Error::shape(format!(
                "model expects {} parameters, got {}",
                specs.len(),
                self.len()
            )));
        }
        for (spec, (name, value)) in specs.iter().zip(self.iter()) {
            if spec.name != name || spec.shape != value.shape() {
                return Err(Error::shape(format!(
                    "parameter `{name}` {:?} does not match `{}` {:?}",
                    value.shape(),
                    spec.name,
                    spec.shape
                )));
            }
        }
        Ok(())
    }

    /// Records every parameter as a trainable leaf.
    pub fn record(&self, tape: &mut Tape) -> ParamVars {
        ParamVars {
            names: self.names.clone(),
            vars: self.values.iter().map(|v| tape.param(v.clone())).collect(),
        }
    }
}

/// Tape handles of a recorded [`ModelParams`].
#[derive(Clone, Debug)]
pub struct ParamVars {
    names: Vec<String>,
    vars: Vec<Var>,
}

impl ParamVars {
    pub fn get(&self, name: &str) -> Result<Var> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.vars[i])
            .ok_or_else(|| Error::InvalidArgument(format!("no parameter named `{name}`")))
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

/// Source of dropout masks. Masks are drawn in call order from one seeded
/// stream; a disabled state returns no masks at all.
#[derive(Clone, Debug)]
pub struct Dropout {
    rate: f64,
    rng: Option<ChaCha8Rng>,
}

impl Dropout {
    pub fn disabled() -> Self {
        Self {
            rate: 0.0,
            rng: None,
        }
    }

    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        if rate == 0.0 {
            return Ok(Self::disabled());
        }
        Ok(Self {
            rate,
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        })
    }

    pub fn is_active(&self) -> bool {
        self.rng.is_some()
    }

    fn keep_factor(&mut self) -> f64 {
        let rate = self.rate;
        let rng = self.rng.as_mut().expect("active dropout");
        if rng.random::<f64>() < rate {
            0.0
        } else {
            1.0 / (1.0 - rate)
        }
    }

    /// Mask over a dense `rows x cols` input.
    pub fn elementwise(&mut self, rows: usize, cols: usize) -> Option<DropoutMask> {
        self.rng.as_ref()?;
        Some(DropoutMask::Elementwise(DenseMatrix::from_fn(
            rows,
            cols,
            |_, _| self.keep_factor(),
        )))
    }

    /// Mask over the one-hot identity features of `n` nodes, expressed as
    /// factors on the rows of the following weight matrix.
    pub fn rows(&mut self, n: usize) -> Option<DropoutMask> {
        self.rng.as_ref()?;
        Some(DropoutMask::Rows((0..n).map(|_| self.keep_factor()).collect()))
    }
}
