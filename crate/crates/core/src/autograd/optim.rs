use serde::{Deserialize, Serialize};

use super::{Grads, ParamSet, Tensor};

/// Rescales `grads` so their global norm is at most `max_norm`. Returns the
/// norm before clipping.
pub fn clip_grad_norm(grads: &mut Grads, max_norm: f64) -> f64 {
    let norm = grads.norm();
    if norm > max_norm && norm > 0.0 {
        grads.scale(max_norm / norm);
    }
    norm
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
    t: u64,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &ParamSet) -> Self {
        let zeros = || {
            params
                .tensors()
                .iter()
                .map(|t| Tensor::zeros(t.rows, t.cols))
                .collect()
        };
        Adam {
            config,
            m: zeros(),
            v: zeros(),
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamSet, grads: &Grads) {
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (k, p) in params.tensors_mut().iter_mut().enumerate() {
            let g = &grads.tensors[k].data;
            let m = &mut self.m[k].data;
            let v = &mut self.v[k].data;
            for j in 0..p.data.len() {
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let mh = m[j] / c1;
                let vh = v[j] / c2;
                p.data[j] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }

    /// Optimizer state as named arrays, for exact resume.
    pub fn export(&self, prefix: &str, params: &ParamSet) -> Vec<(String, Tensor)> {
        let mut out = Vec::new();
        for ((name, _), (m, v)) in params.iter().zip(self.m.iter().zip(&self.v)) {
            out.push((format!("{prefix}m.{name}"), m.clone()));
            out.push((format!("{prefix}v.{name}"), v.clone()));
        }
        out.push((
            format!("{prefix}t"),
            Tensor {
                rows: 1,
                cols: 1,
                data: vec![self.t as f64],
            },
        ));
        out
    }

    pub fn import(
        &mut self,
        prefix: &str,
        params: &ParamSet,
        arrays: &std::collections::HashMap<String, Tensor>,
    ) -> crate::Result<()> {
        let get = |k: String| {
            arrays
                .get(&k)
                .cloned()
                .ok_or_else(|| crate::Error::Checkpoint(format!("missing optimizer array {k}")))
        };
        for (i, (name, _)) in params.iter().enumerate() {
            self.m[i] = get(format!("{prefix}m.{name}"))?;
            self.v[i] = get(format!("{prefix}v.{name}"))?;
        }
        self.t = get(format!("{prefix}t"))?.data[0] as u64;
        Ok(())
    }
}
