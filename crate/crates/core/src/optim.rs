//! Adam and a single-cycle cosine learning-rate schedule.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{join, ParamKind, Parameters};
use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam state: first/second moments per trainable tensor, in traversal order.
#[derive(Clone, Debug)]
pub struct Adam<T: Real> {
    pub config: AdamConfig,
    pub step: u64,
    names: Vec<String>,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            names: Vec::new(),
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    /// One update `θ ← θ − lr·m̂/(√v̂ + ε)`. Every gradient is checked for
    /// non-finite values before anything is modified.
    pub fn update<P: Parameters<T>>(&mut self, params: &mut P, grads: &P, lr: f64) -> Result<()> {
        let mut grad_list: Vec<(String, Tensor<T>)> = Vec::new();
        grads.visit("", &mut |name, kind, g| {
            if kind == ParamKind::Weight {
                grad_list.push((name.to_string(), g.clone()));
            }
        });
        if let Some((name, _)) = grad_list.iter().find(|(_, g)| !g.all_finite()) {
            return Err(Error::NonFiniteGradient(name.clone()));
        }
        if self.names.is_empty() {
            self.names = grad_list.iter().map(|(n, _)| n.clone()).collect();
            self.m = grad_list.iter().map(|(_, g)| g.zeros_like()).collect();
            self.v = self.m.clone();
        }
        if self.names.len() != grad_list.len() || self.names.iter().zip(&grad_list).any(|(a, (b, _))| a != b) {
            return Err(Error::Dimension("optimizer state does not match the parameter set".into()));
        }

        self.step += 1;
        let c = self.config;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let mut idx = 0;
        let mut result = Ok(());
        params.visit_mut("", &mut |name, kind, p| {
            if kind != ParamKind::Weight || result.is_err() {
                return;
            }
            let g = &grad_list[idx].1;
            if p.shape() != g.shape() {
                result = Err(Error::Dimension(format!("gradient shape mismatch for `{name}`")));
                return;
            }
            let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
            for (((theta, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = b1 * *mi + (T::one() - b1) * gi;
                *vi = b2 * *vi + (T::one() - b2) * gi * gi;
                let m_hat = mi.as_f64() / bc1;
                let v_hat = vi.as_f64() / bc2;
                *theta -= T::of(lr * m_hat / (v_hat.sqrt() + c.eps));
            }
            idx += 1;
        });
        result
    }
}

impl<T: Real> Parameters<T> for Adam<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        for (i, name) in self.names.iter().enumerate() {
            f(&join(prefix, &format!("m.{name}")), ParamKind::Buffer, &self.m[i]);
            f(&join(prefix, &format!("v.{name}")), ParamKind::Buffer, &self.v[i]);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        for (i, name) in self.names.iter().enumerate() {
            f(&join(prefix, &format!("m.{name}")), ParamKind::Buffer, &mut self.m[i]);
            f(&join(prefix, &format!("v.{name}")), ParamKind::Buffer, &mut self.v[i]);
        }
    }
}

impl<T: Real> Adam<T> {
    /// Rebuilds state from saved moments; `moments` holds `(name, m, v)`.
    pub fn restore(config: AdamConfig, step: u64, moments: Vec<(String, Tensor<T>, Tensor<T>)>) -> Self {
        let mut adam = Adam::new(config);
        adam.step = step;
        for (name, m, v) in moments {
            adam.names.push(name);
            adam.m.push(m);
            adam.v.push(v);
        }
        adam
    }

    pub fn tracked(&self) -> &[String] {
        &self.names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CosineSchedule {
    pub base_lr: f64,
    pub min_lr: f64,
    pub max_iters: u64,
}

impl Default for CosineSchedule {
    fn default() -> Self {
        CosineSchedule {
            base_lr: 1e-4,
            min_lr: 1e-6,
            max_iters: 64_000,
        }
    }
}

impl CosineSchedule {
    /// `η_min + ½(η₀ − η_min)(1 + cos(π t / T_max))`, clamped to `η_min` past `T_max`.
    pub fn lr(&self, iteration: u64) -> f64 {
        if self.max_iters == 0 || iteration >= self.max_iters {
            return self.min_lr;
        }
        let frac = iteration as f64 / self.max_iters as f64;
        self.min_lr + 0.5 * (self.base_lr - self.min_lr) * (1.0 + (PI * frac).cos())
    }
}
