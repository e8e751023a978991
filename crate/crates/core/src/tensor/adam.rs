use super::{Gradients, ParamSet, TensorError};

/// Applies one update to a parameter set given its gradients.
pub trait Optimizer {
    fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<(), TensorError>;
}

/// Plain gradient descent.
#[derive(Clone, Debug)]
pub struct Sgd {
    pub lr: f64,
}

impl Optimizer for Sgd {
    fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<(), TensorError> {
        check_alignment(params, grads)?;
        for i in 0..params.len() {
            for (p, g) in params.get_mut(i).data_mut().iter_mut().zip(grads.get(i)) {
                *p -= self.lr * g;
            }
        }
        Ok(())
    }
}

/// Adam moments for a single parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(len: usize, lr: f64) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update of `theta` in place.
pub fn adam_step(
    state: &mut AdamState,
    theta: &mut [f64],
    grad: &[f64],
) -> Result<(), TensorError> {
    if theta.len() != grad.len() || state.m.len() != theta.len() || state.v.len() != theta.len() {
        return Err(TensorError::ShapeMismatch {
            op: "adam_step",
            left: vec![theta.len()],
            right: vec![grad.len(), state.m.len()],
        });
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..theta.len() {
        let g = grad[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        theta[i] -= state.lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

/// Adam over a whole [`ParamSet`], one [`AdamState`] per tensor.
#[derive(Clone, Debug)]
pub struct Adam {
    states: Vec<AdamState>,
}

impl Adam {
    pub fn new(params: &ParamSet, lr: f64) -> Self {
        Adam {
            states: params
                .iter()
                .map(|(_, t)| AdamState::new(t.len(), lr))
                .collect(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.states.first().map_or(0, |s| s.t)
    }

    pub fn states(&self) -> &[AdamState] {
        &self.states
    }
}

impl Optimizer for Adam {
    fn step(&mut self, params: &mut ParamSet, grads: &Gradients) -> Result<(), TensorError> {
        check_alignment(params, grads)?;
        for (i, state) in self.states.iter_mut().enumerate() {
            adam_step(state, params.get_mut(i).data_mut(), grads.get(i))?;
        }
        Ok(())
    }
}

fn check_alignment(params: &ParamSet, grads: &Gradients) -> Result<(), TensorError> {
    if params.len() != grads.len() {
        return Err(TensorError::ShapeMismatch {
            op: "optimizer_step",
            left: vec![params.len()],
            right: vec![grads.len()],
        });
    }
    Ok(())
}
