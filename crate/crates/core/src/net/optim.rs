//! First-order optimizers, selectable by name (`adam`, `sgd`).

use super::model::Gradients;
use crate::registry::Registry;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub learning_rate: f64,
}

pub trait Optimizer: Send {
    fn name(&self) -> &'static str;

    /// Applies one update to `params` in place.
    fn step(&mut self, params: &mut [Vec<f64>], grads: &Gradients);
}

/// Plain gradient descent.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f64,
}

impl Optimizer for Sgd {
    fn name(&self) -> &'static str {
        "sgd"
    }

    fn step(&mut self, params: &mut [Vec<f64>], grads: &Gradients) {
        for (p, g) in params.iter_mut().zip(grads.blocks()) {
            for (w, d) in p.iter_mut().zip(g) {
                *w -= self.learning_rate * d;
            }
        }
    }
}

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, params: &mut [Vec<f64>], grads: &Gradients) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads.blocks())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
            }
        }
    }
}

pub type OptimizerFactory = fn(&OptimizerSettings) -> Box<dyn Optimizer>;

pub fn registry() -> Registry<OptimizerFactory> {
    let mut reg: Registry<OptimizerFactory> = Registry::new("optimizer");
    reg.register("adam", |s| Box::new(Adam::new(s.learning_rate)))
        .register("sgd", |s| {
            Box::new(Sgd {
                learning_rate: s.learning_rate,
            })
        });
    reg
}
