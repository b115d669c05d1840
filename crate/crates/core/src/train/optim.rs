use crate::gnn::ModelParams;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    SgdMomentum,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::SgdMomentum => "sgd",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adam" => Ok(Self::Adam),
            "sgd" => Ok(Self::SgdMomentum),
            _ => Err(format!("unknown optimizer `{s}` (expected adam or sgd)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// SGD momentum.
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate: 1e-3,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First- and second-moment buffers for every trainable tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Optimizer<T> {
    pub config: OptimizerConfig,
    step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(config: OptimizerConfig) -> Self {
        Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Applies the accumulated gradients and clears them.
    pub fn step(&mut self, params: &mut ModelParams<T>) {
        let mut tensors = params.trainable_mut();
        if self.m.is_empty() {
            self.m = tensors.iter().map(|t| vec![T::zero(); t.len()]).collect();
            self.v = self.m.clone();
        }
        self.step += 1;
        let c = &self.config;
        let lr = T::lit(c.learning_rate);
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bias1 = T::one() - T::lit(c.beta1.powi(self.step.min(i32::MAX as u64) as i32));
        let bias2 = T::one() - T::lit(c.beta2.powi(self.step.min(i32::MAX as u64) as i32));
        let eps = T::lit(c.eps);
        let mu = T::lit(c.momentum);
        for ((t, m), v) in tensors.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let Some(g) = t.grad.take() else { continue };
            let data = t.data_mut();
            match c.kind {
                OptimizerKind::Adam => {
                    for i in 0..data.len() {
                        m[i] = b1 * m[i] + (T::one() - b1) * g[i];
                        v[i] = b2 * v[i] + (T::one() - b2) * g[i] * g[i];
                        let mh = m[i] / bias1;
                        let vh = v[i] / bias2;
                        data[i] -= lr * mh / (vh.sqrt() + eps);
                    }
                }
                OptimizerKind::SgdMomentum => {
                    for i in 0..data.len() {
                        m[i] = mu * m[i] + g[i];
                        data[i] -= lr * m[i];
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{ModelConfig, Pooling};

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut p = ModelParams::<f64>::init(&ModelConfig::toy(2, Pooling::MaxPool), 1).unwrap();
        let before = p.classifier[0].b.data().to_vec();
        let g: Vec<f64> = (0..before.len()).map(|i| if i % 2 == 0 { 3.0 } else { -0.5 }).collect();
        p.classifier[0].b.accumulate_grad(&g);
        let mut opt = Optimizer::new(OptimizerConfig::default());
        opt.step(&mut p);
        for ((a, b), g) in p.classifier[0].b.data().iter().zip(&before).zip(&g) {
            assert!((b - a - 1e-3 * g.signum()).abs() < 1e-9);
        }
        assert!(p.classifier[0].b.grad.is_none());
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn sgd_momentum_accumulates_velocity() {
        let mut p = ModelParams::<f64>::init(&ModelConfig::toy(2, Pooling::MaxPool), 1).unwrap();
        let x0 = p.classifier[0].b.data()[0];
        let mut opt = Optimizer::new(OptimizerConfig {
            kind: OptimizerKind::SgdMomentum,
            learning_rate: 0.1,
            ..Default::default()
        });
        let n = p.classifier[0].b.len();
        for _ in 0..2 {
            p.classifier[0].b.accumulate_grad(&vec![1.0; n]);
            opt.step(&mut p);
        }
        // velocity 1 then 1.9
        assert!((p.classifier[0].b.data()[0] - (x0 - 0.1 - 0.19)).abs() < 1e-12);
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = ModelParams::<f64>::init(&ModelConfig::toy(2, Pooling::MaxPool), 2).unwrap();
        let mut opt = Optimizer::new(OptimizerConfig {
            learning_rate: 0.05,
            ..Default::default()
        });
        for _ in 0..500 {
            let g: Vec<f64> = p.classifier[0].w.data().iter().map(|&w| 2.0 * (w - 0.3)).collect();
            p.classifier[0].w.accumulate_grad(&g);
            opt.step(&mut p);
        }
        assert!(p.classifier[0].w.data().iter().all(|w| (w - 0.3).abs() < 1e-2));
    }
}
