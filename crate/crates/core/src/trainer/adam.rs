use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::model::ModelParams;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates, one pair per parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<DenseMatrix>,
    pub v: Vec<DenseMatrix>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let zeros = params.zeros_like();
        Self {
            m: zeros.values().to_vec(),
            v: zeros.values().to_vec(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &[DenseMatrix],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::shape(format!(
            "{} parameters, {} gradients, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    for (((p, g), m), v) in params
        .values_mut()
        .iter_mut()
        .zip(grads)
        .zip(&mut state.m)
        .zip(&mut state.v)
    {
        if p.shape() != g.shape() || p.shape() != m.shape() {
            return Err(Error::shape(format!(
                "parameter {:?} with gradient {:?}",
                p.shape(),
                g.shape()
            )));
        }
        for (((pk, &gk), mk), vk) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mk = BETA1 * *mk + (1.0 - BETA1) * gk;
            *vk = BETA2 * *vk + (1.0 - BETA2) * gk * gk;
            let m_hat = *mk / c1;
            let v_hat = *vk / c2;
            *pk -= lr * m_hat / (v_hat.sqrt() + EPSILON);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ModelParams {
        ModelParams::new(vec![("w".into(), DenseMatrix::filled(1, 1, v))]).unwrap()
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        let mut p = ModelParams::new(vec![(
            "w".into(),
            DenseMatrix::from_rows(&[vec![1.0, 1.0, 1.0]]),
        )])
        .unwrap();
        let mut s = AdamState::new(&p);
        let g = DenseMatrix::from_rows(&[vec![3.0, -0.2, 1e3]]);
        adam_step(&mut p, &[g], &mut s, 0.002).unwrap();
        let w = p.get("w").unwrap().data();
        assert!((w[0] - 0.998).abs() < 1e-9);
        assert!((w[1] - 1.002).abs() < 1e-9);
        assert!((w[2] - 0.998).abs() < 1e-9);
    }

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut p = scalar(0.5);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &[DenseMatrix::filled(1, 1, 1.0)], &mut s, 0.1).unwrap();
        let before = p.clone();
        let m = s.m[0].get(0, 0);
        s.v[0].set(0, 0, 0.0);
        adam_step(&mut p, &[DenseMatrix::zeros(1, 1)], &mut s, 0.1).unwrap();
        assert_eq!(s.m[0].get(0, 0), BETA1 * m);
        assert!(p.get("w").unwrap().get(0, 0) < before.get("w").unwrap().get(0, 0));
        let mut q = scalar(0.5);
        let mut fresh = AdamState::new(&q);
        adam_step(&mut q, &[DenseMatrix::zeros(1, 1)], &mut fresh, 0.1).unwrap();
        assert_eq!(q, scalar(0.5));
    }

    #[test]
    fn mismatched_gradients_are_rejected() {
        let mut p = scalar(0.0);
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut p, &[], &mut s, 0.1).is_err());
        assert!(adam_step(&mut p, &[DenseMatrix::zeros(2, 1)], &mut s, 0.1).is_err());
    }
}
