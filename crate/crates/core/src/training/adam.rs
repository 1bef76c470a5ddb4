//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::models::NamedParams;
use crate::tensor::Scalar;

pub struct Adam {
    beta1: Scalar,
    beta2: Scalar,
    epsilon: Scalar,
    step: u64,
    first_moment: Vec<Vec<Scalar>>,
    second_moment: Vec<Vec<Scalar>>,
}

impl Default for Adam {
    fn default() -> Self {
        Self::new()
    }
}

impl Adam {
    /// Standard coefficients: beta1 = 0.9, beta2 = 0.999, epsilon = 1e-8.
    pub fn new() -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One bias-corrected update of every parameter from its accumulated
    /// gradient. Missing gradients are an error.
    pub fn step(&mut self, params: &NamedParams, lr: Scalar) -> Result<()> {
        if self.first_moment.is_empty() {
            self.first_moment = params.iter().map(|(_, t)| vec![0.0; t.numel()]).collect();
            self.second_moment = self.first_moment.clone();
        }
        assert_eq!(
            self.first_moment.len(),
            params.len(),
            "optimizer bound to a different parameter list"
        );
        self.step += 1;
        let t = self.step as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for (i, (name, param)) in params.iter().enumerate() {
            let grad = param
                .grad()
                .ok_or_else(|| Error::MissingGrad(name.clone()))?;
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            let mut delta = vec![0.0; grad.len()];
            for j in 0..grad.len() {
                let g = grad[j];
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                delta[j] = -lr * m_hat / (v_hat.sqrt() + self.epsilon);
            }
            param.apply_delta(&delta)?;
        }
        Ok(())
    }

    /// Clear accumulated gradients before the next batch.
    pub fn zero_grad(params: &NamedParams) {
        for (_, p) in params {
            p.zero_grad();
        }
    }
}
