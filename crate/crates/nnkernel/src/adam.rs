use crate::{NnError, Tensor};

/// Bias-corrected Adam state for an ordered list of parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(param_lens: &[usize], learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
            second_moment: param_lens.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_params(params: &[&Tensor], learning_rate: f64) -> Self {
        let lens: Vec<usize> = params.iter().map(|p| p.len()).collect();
        Self::new(&lens, learning_rate)
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// One Adam update of `params` in place.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Vec<f64>]) -> Result<(), NnError> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(NnError::ShapeMismatch {
                op: "adam_step",
                expected: format!("{} parameter tensors", self.first_moment.len()),
                got: format!("{} params, {} grads", params.len(), grads.len()),
            });
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first_moment) {
            if p.len() != g.len() || p.len() != m.len() {
                return Err(NnError::ShapeMismatch {
                    op: "adam_step",
                    expected: format!("{} elements", m.len()),
                    got: format!("param {} / grad {}", p.len(), g.len()),
                });
            }
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = b1 * *mi + (1.0 - b1) * gi;
                *vi = b2 * *vi + (1.0 - b2) * gi * gi;
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Functional form: returns updated copies and leaves the inputs untouched.
pub fn adam_step(state: &AdamState, params: &[Tensor], grads: &[Vec<f64>]) -> Result<(Vec<Tensor>, AdamState), NnError> {
    let mut state = state.clone();
    let mut params = params.to_vec();
    let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
    state.step(&mut refs, grads)?;
    Ok((params, state))
}
