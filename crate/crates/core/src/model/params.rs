use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::{adam_step, Adam, Param};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named, ordered collection of every trainable tensor in a network.
#[derive(Clone, Debug, Default)]
pub struct ParamSet {
    params: Vec<Param>,
    names: Vec<String>,
}

impl ParamSet {
    pub fn add(&mut self, name: String, value: Tensor) -> ParamId {
        self.params.push(Param::new(value));
        self.names.push(name);
        ParamId(self.params.len() - 1)
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Param] {
        &mut self.params
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn zero_grads(&self) -> Grads {
        Grads(self.params.iter().map(|p| Tensor::zeros(p.value.shape())).collect())
    }

    /// Copies `grads · scale` into each parameter's gradient slot and applies one Adam step.
    pub fn apply(&mut self, grads: &Grads, scale: f64, lr: f64, adam: Adam, t: u64) -> Result<()> {
        if grads.0.len() != self.params.len() {
            return Err(Error::Shape {
                op: "ParamSet::apply",
                dim: "parameter count",
                got: grads.0.len(),
                expected: self.params.len(),
            });
        }
        for (p, g) in self.params.iter_mut().zip(&grads.0) {
            p.grad = g.clone();
            p.grad.scale(scale);
            adam_step(p, lr, adam, t)?;
            p.zero_grad();
        }
        Ok(())
    }

    /// Replaces parameter values, keeping optimizer state untouched.
    pub fn set_value(&mut self, id: ParamId, value: Tensor) -> Result<()> {
        self.params[id.0].value.same_shape(&value, "ParamSet::set_value")?;
        self.params[id.0].value = value;
        Ok(())
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }
}

/// Gradient buffers aligned with a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads(pub Vec<Tensor>);

impl Grads {
    pub fn accumulate(&mut self, id: ParamId, g: &Tensor) -> Result<()> {
        self.0[id.0].add_assign(g)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.0[id.0]
    }

    pub fn add(&mut self, other: &Grads) -> Result<()> {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }
}

/// Kaiming-uniform (fan-in) weights.
pub(crate) fn kaiming_uniform(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let fan_in: usize = shape[1..].iter().product();
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound))
}
