//! First-order optimizers over the flat parameter buffer.

use serde::{Deserialize, Serialize};

use super::registry::Registry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimConfig {
    pub learning_rate: f64,
    /// Adam `beta1`, or the SGD momentum coefficient.
    pub momentum: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 3e-3,
            momentum: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

pub trait Optimizer: Send {
    fn name(&self) -> &'static str;
    /// One update of `params` from `grads` (same length).
    fn step(&mut self, params: &mut [f64], grads: &[f64]);
}

pub struct Adam {
    cfg: OptimConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(cfg: &OptimConfig) -> Self {
        Adam {
            cfg: cfg.clone(),
            m: Vec::new(),
            v: Vec::new(),
            t: 0,
        }
    }
}

impl Optimizer for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        if self.m.len() != params.len() {
            self.m = vec![0.0; params.len()];
            self.v = vec![0.0; params.len()];
            self.t = 0;
        }
        self.t += 1;
        let (b1, b2) = (self.cfg.momentum, self.cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.cfg.learning_rate;
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g;
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.cfg.epsilon);
        }
    }
}

/// Heavy-ball SGD: `v = mu v + g; p -= lr v`.
pub struct SgdMomentum {
    cfg: OptimConfig,
    velocity: Vec<f64>,
}

impl SgdMomentum {
    pub fn new(cfg: &OptimConfig) -> Self {
        SgdMomentum {
            cfg: cfg.clone(),
            velocity: Vec::new(),
        }
    }
}

impl Optimizer for SgdMomentum {
    fn name(&self) -> &'static str {
        "sgd-momentum"
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), grads.len());
        if self.velocity.len() != params.len() {
            self.velocity = vec![0.0; params.len()];
        }
        for i in 0..params.len() {
            self.velocity[i] = self.cfg.momentum * self.velocity[i] + grads[i];
            params[i] -= self.cfg.learning_rate * self.velocity[i];
        }
    }
}

pub type OptimizerRegistry = Registry<dyn Optimizer, OptimConfig>;

/// Registry with `adam` and `sgd-momentum`.
pub fn optimizer_registry() -> OptimizerRegistry {
    let mut r = OptimizerRegistry::new("optimizer");
    r.register("adam", |c| Box::new(Adam::new(c)) as Box<dyn Optimizer>)
        .register("sgd-momentum", |c| Box::new(SgdMomentum::new(c)) as Box<dyn Optimizer>);
    r
}

pub fn create_optimizer(name: &str, cfg: &OptimConfig) -> crate::Result<Box<dyn Optimizer>> {
    optimizer_registry().create(name, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let cfg = OptimConfig {
            learning_rate: 0.01,
            ..OptimConfig::default()
        };
        let mut opt = Adam::new(&cfg);
        let mut p = vec![1.0, -2.0, 0.5];
        opt.step(&mut p, &[3.0, -0.5, 0.0]);
        assert!((p[0] - 0.99).abs() < 1e-8);
        assert!((p[1] + 1.99).abs() < 1e-8);
        assert_eq!(p[2], 0.5);
    }

    #[test]
    fn sgd_momentum_accumulates() {
        let cfg = OptimConfig {
            learning_rate: 0.1,
            momentum: 0.5,
            ..OptimConfig::default()
        };
        let mut opt = SgdMomentum::new(&cfg);
        let mut p = vec![0.0];
        opt.step(&mut p, &[1.0]);
        assert!((p[0] + 0.1).abs() < 1e-12);
        opt.step(&mut p, &[1.0]);
        assert!((p[0] + 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let cfg = OptimConfig {
            learning_rate: 0.0,
            ..OptimConfig::default()
        };
        for name in optimizer_registry().names() {
            let mut opt = create_optimizer(&name, &cfg).unwrap();
            let mut p = vec![0.3, -0.7];
            opt.step(&mut p, &[1.0, 2.0]);
            assert_eq!(p, vec![0.3, -0.7], "{name}");
        }
    }

    #[test]
    fn both_minimise_a_quadratic() {
        let cfg = OptimConfig {
            learning_rate: 0.05,
            ..OptimConfig::default()
        };
        for name in ["adam", "sgd-momentum"] {
            let mut opt = create_optimizer(name, &cfg).unwrap();
            let mut p = vec![3.0, -2.0];
            for _ in 0..2000 {
                let g = vec![2.0 * p[0], 4.0 * p[1]];
                opt.step(&mut p, &g);
            }
            assert!(p[0].abs() < 1e-3 && p[1].abs() < 1e-3, "{name}: {p:?}");
        }
        assert!(create_optimizer("lbfgs", &cfg).is_err());
    }
}
