//! Adam with bias correction, L2 weight decay folded into the gradients, and
//! step-wise learning-rate decay.

use crate::dense::DenseMatrix;
use crate::model::ModelParams;
use crate::scalar::Scalar;
use crate::train::TrainConfig;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First/second moment estimates, index-aligned with the parameter list.
pub struct AdamState<T> {
    pub step: usize,
    m: Vec<DenseMatrix<T>>,
    v: Vec<DenseMatrix<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>) -> AdamState<T> {
        let zeros: Vec<DenseMatrix<T>> = params
            .matrices()
            .map(|p| DenseMatrix::zeros(p.rows, p.cols))
            .collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// Learning rate after step decay: lr * factor^floor(epoch / every).
pub fn effective_lr(cfg: &TrainConfig, epoch: usize) -> f64 {
    if cfg.lr_decay_every == 0 {
        return cfg.lr;
    }
    cfg.lr * cfg.lr_decay_factor.powi((epoch / cfg.lr_decay_every) as i32)
}

/// One Adam update in place. Weight decay enters as `grad + wd * param`
/// (plain L2, not decoupled), matching the reference training protocol.
pub fn adam_step<T: Scalar>(
    params: &mut ModelParams<T>,
    grads: &[DenseMatrix<T>],
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
    epoch: usize,
) {
    assert_eq!(
        grads.len(),
        params.entries.len(),
        "gradient list must align with parameters"
    );
    state.step += 1;
    let t = state.step as i32;
    let lr = T::from_f64(effective_lr(cfg, epoch));
    let (b1, b2) = (T::from_f64(BETA1), T::from_f64(BETA2));
    let eps = T::from_f64(EPSILON);
    let wd = T::from_f64(cfg.weight_decay);
    let corr1 = T::one() - T::from_f64(BETA1.powi(t));
    let corr2 = T::one() - T::from_f64(BETA2.powi(t));
    for ((param, grad), (m, v)) in params
        .matrices_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(&mut state.v))
    {
        assert_eq!(param.rows, grad.rows, "gradient shape mismatch");
        assert_eq!(param.cols, grad.cols, "gradient shape mismatch");
        for i in 0..param.data.len() {
            let g = grad.data[i] + wd * param.data[i];
            m.data[i] = b1 * m.data[i] + (T::one() - b1) * g;
            v.data[i] = b2 * v.data[i] + (T::one() - b2) * g * g;
            let m_hat = m.data[i] / corr1;
            let v_hat = v.data[i] / corr2;
            param.data[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{init_params, ModelKind, ModelSpec};

    fn test_cfg() -> TrainConfig {
        TrainConfig::default()
    }

    fn linear_spec() -> ModelSpec {
        ModelSpec {
            kind: ModelKind::SmpLinear,
            k_steps: 2,
            feat_dim: 2,
            stoch_dim: 2,
            hidden_dim: 2,
            out_dim: 2,
        }
    }

    #[test]
    fn test_step_decay_schedule() {
        let cfg = test_cfg(); // lr 0.01, factor 0.1, every 200
        assert!((effective_lr(&cfg, 0) - 0.01).abs() < 1e-15);
        assert!((effective_lr(&cfg, 199) - 0.01).abs() < 1e-15);
        assert!((effective_lr(&cfg, 200) - 0.001).abs() < 1e-15);
        assert!((effective_lr(&cfg, 400) - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn test_zero_gradients_zero_decay_leave_params_unchanged() {
        let spec = linear_spec();
        let mut params = init_params::<f64>(&spec, 0);
        let before = params.clone();
        let mut state = AdamState::new(&params);
        let zeros: Vec<_> = params
            .matrices()
            .map(|p| DenseMatrix::zeros(p.rows, p.cols))
            .collect();
        let mut cfg = test_cfg();
        cfg.weight_decay = 0.0;
        adam_step(&mut params, &zeros, &mut state, &cfg, 0);
        assert_eq!(params, before);
        assert_eq!(state.step, 1);
    }

    #[test]
    fn test_first_step_moves_by_about_lr_against_gradient_sign() {
        // With bias correction, the first update is lr * g / (|g| + eps').
        let spec = linear_spec();
        let mut params = init_params::<f64>(&spec, 1);
        let w0 = params.get("w_out").get(0, 0);
        let mut state = AdamState::new(&params);
        let grads: Vec<_> = params
            .matrices()
            .map(|p| DenseMatrix::filled(p.rows, p.cols, 3.0))
            .collect();
        let mut cfg = test_cfg();
        cfg.weight_decay = 0.0;
        adam_step(&mut params, &grads, &mut state, &cfg, 0);
        let moved = params.get("w_out").get(0, 0) - w0;
        assert!((moved + cfg.lr).abs() < 1e-6, "moved {moved}");
    }

    #[test]
    fn test_weight_decay_pulls_toward_zero() {
        let spec = linear_spec();
        let mut params = init_params::<f64>(&spec, 2);
        let w0 = params.get("w_out").get(0, 1);
        assert!(w0.abs() > 1e-4, "need a nonzero weight for this test");
        let mut state = AdamState::new(&params);
        let zeros: Vec<_> = params
            .matrices()
            .map(|p| DenseMatrix::zeros(p.rows, p.cols))
            .collect();
        let mut cfg = test_cfg();
        cfg.weight_decay = 5e-4;
        adam_step(&mut params, &zeros, &mut state, &cfg, 0);
        let w1 = params.get("w_out").get(0, 1);
        assert!(w1.abs() < w0.abs(), "decay should shrink the weight");
        assert_eq!(w1.signum(), w0.signum());
    }

    #[test]
    fn test_adam_converges_on_quadratic() {
        // Minimize sum (w - 3)^2 over a single parameter matrix.
        let spec = linear_spec();
        let mut params = init_params::<f64>(&spec, 3);
        let mut state = AdamState::new(&params);
        let mut cfg = test_cfg();
        cfg.lr = 0.05;
        cfg.weight_decay = 0.0;
        cfg.lr_decay_every = 0;
        for epoch in 0..2000 {
            let grads: Vec<_> = params
                .matrices()
                .map(|p| p.map(|w| 2.0 * (w - 3.0)))
                .collect();
            adam_step(&mut params, &grads, &mut state, &cfg, epoch);
        }
        for m in params.matrices() {
            for &w in &m.data {
                assert!((w - 3.0).abs() < 1e-3, "w = {w}");
            }
        }
    }
}
