//! Named-parameter traversal shared by layers, the optimizer and checkpoints.
//!
//! Gradients are stored in a value of the same type as the model, so a
//! traversal of the model and of its gradient visit tensors in lockstep.

use crate::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamKind {
    /// Trainable, updated by the optimizer.
    Weight,
    /// Persistent state that is not trained (running normalization stats).
    Buffer,
}

pub trait Parameters<T: Real> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>));

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>));

    /// A copy with every tensor zeroed, used as a gradient accumulator.
    fn zeros_like(&self) -> Self
    where
        Self: Clone,
    {
        let mut out = self.clone();
        out.visit_mut("", &mut |_, _, t| t.fill(T::zero()));
        out
    }

    fn num_weights(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, kind, t| {
            if kind == ParamKind::Weight {
                n += t.len();
            }
        });
        n
    }

    fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        self.visit("", &mut |name, _, _| names.push(name.to_string()));
        names
    }
}

pub(crate) fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// A flat list of named trainable tensors.
#[derive(Clone, Debug, Default)]
pub struct NamedTensors<T: Real>(pub Vec<(String, Tensor<T>)>);

impl<T: Real> Parameters<T> for NamedTensors<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &Tensor<T>)) {
        for (name, t) in &self.0 {
            f(&join(prefix, name), ParamKind::Weight, t);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, ParamKind, &mut Tensor<T>)) {
        for (name, t) in &mut self.0 {
            f(&join(prefix, name), ParamKind::Weight, t);
        }
    }
}
