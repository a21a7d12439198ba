//! Gradient-descent optimizers over flat parameter vectors.

use crate::error::{Error, Result};

/// Optimizer over a flat `Vec<f64>` parameter layout.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd(Sgd),
    Adam(Adam),
}

impl Optimizer {
    pub fn sgd(learning_rate: f64) -> Result<Optimizer> {
        Ok(Optimizer::Sgd(Sgd::new(learning_rate)?))
    }

    pub fn adam(learning_rate: f64, param_count: usize) -> Result<Optimizer> {
        Ok(Optimizer::Adam(Adam::new(learning_rate, param_count)?))
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            Optimizer::Sgd(s) => s.step(params, grads),
            Optimizer::Adam(a) => a.step(params, grads),
        }
    }
}

fn check_rate(learning_rate: f64) -> Result<()> {
    if !(learning_rate > 0.0) || !learning_rate.is_finite() {
        return Err(Error::Parameter(format!(
            "learning rate must be positive and finite, got {learning_rate}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
}

impl Sgd {
    pub fn new(learning_rate: f64) -> Result<Sgd> {
        check_rate(learning_rate)?;
        Ok(Sgd { learning_rate })
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Dimension(format!(
                "sgd step: {} params vs {} grads",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter_mut().zip(grads) {
            *p -= self.learning_rate * g;
        }
        Ok(())
    }
}

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8 by default).
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(learning_rate: f64, param_count: usize) -> Result<Adam> {
        check_rate(learning_rate)?;
        Ok(Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
        })
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Dimension(format!(
                "adam step: {} params, {} grads, state sized {}",
                params.len(),
                grads.len(),
                self.m.len()
            )));
        }
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / b1t;
            let v_hat = self.v[i] / b2t;
            params[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}
