use crate::tensor::{Gradients, ParamStore, Scalar};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// First and second moment estimates per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new<T: Scalar>(params: &ParamStore<T>) -> Self {
        let zeros: Vec<Vec<f64>> = params.ids().map(|id| vec![0.0; params.get(id).len()]).collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam update. Parameters the gradient never touched
/// are left alone, moments included.
pub fn adam_step<T: Scalar>(params: &mut ParamStore<T>, grads: &Gradients<T>, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let ids: Vec<_> = params.ids().collect();
    for id in ids {
        let Some(g) = grads.get(id) else { continue };
        let (m, v) = (&mut state.m[id.0], &mut state.v[id.0]);
        for (k, w) in params.get_mut(id).data_mut().iter_mut().enumerate() {
            let gk = g[k].to_f64().unwrap_or(f64::NAN);
            m[k] = BETA1 * m[k] + (1.0 - BETA1) * gk;
            v[k] = BETA2 * v[k] + (1.0 - BETA2) * gk * gk;
            let update = lr * (m[k] / c1) / ((v[k] / c2).sqrt() + EPSILON);
            *w = T::of(w.to_f64().unwrap_or(f64::NAN) - update);
        }
    }
}
