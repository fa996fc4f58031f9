use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Real, Tensor};
use crate::error::{Error, Result};

/// Handle to a tensor inside a [`ParameterSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
struct Slot<T> {
    name: String,
    tensor: Tensor<T>,
    first_moment: Vec<T>,
    second_moment: Vec<T>,
}

/// Trainable tensors in creation order, with their Adam state.
#[derive(Debug, Clone)]
pub struct ParameterSet<T> {
    slots: Vec<Slot<T>>,
    step: u64,
}

impl<T: Real> Default for ParameterSet<T> {
    fn default() -> Self {
        ParameterSet::new()
    }
}

impl<T: Real> ParameterSet<T> {
    pub fn new() -> Self {
        ParameterSet {
            slots: Vec::new(),
            step: 0,
        }
    }

    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> ParamId {
        let n = tensor.len();
        let mut tensor = tensor;
        if !tensor.requires_grad() {
            tensor = tensor.with_grad();
        }
        // Gradients start out "not yet computed".
        tensor.set_grad(None).expect("clearing a gradient never fails");
        self.slots.push(Slot {
            name: name.into(),
            tensor,
            first_moment: vec![T::zero(); n],
            second_moment: vec![T::zero(); n],
        });
        ParamId(self.slots.len() - 1)
    }

    /// Normal weights with variance `2 / fan_in`.
    pub fn add_kaiming<R: Rng>(
        &mut self,
        name: impl Into<String>,
        shape: Vec<usize>,
        fan_in: usize,
        rng: &mut R,
    ) -> ParamId {
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive standard deviation");
        let n: usize = shape.iter().product();
        let values = (0..n)
            .map(|_| T::from_f64_lossy(normal.sample(rng)))
            .collect();
        let tensor = Tensor::new(shape, values).expect("kaiming shape is consistent");
        self.add(name, tensor)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, shape: Vec<usize>) -> ParamId {
        self.add(name, Tensor::zeros(shape))
    }

    /// Number of parameter tensors.
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn num_scalars(&self) -> usize {
        self.slots.iter().map(|s| s.tensor.len()).sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.slots.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.slots[id.0].name
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.slots[id.0].tensor
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.slots[id.0].tensor
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.slots.iter().position(|s| s.name == name).map(ParamId)
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, id: ParamId) -> &[T] {
        &self.slots[id.0].first_moment
    }

    pub fn second_moment(&self, id: ParamId) -> &[T] {
        &self.slots[id.0].second_moment
    }

    /// Adds `grad` into the parameter's gradient, allocating it on first use.
    pub fn accumulate_grad(&mut self, id: ParamId, grad: &[T]) -> Result<()> {
        let tensor = &mut self.slots[id.0].tensor;
        if grad.len() != tensor.len() {
            return Err(Error::Shape(format!(
                "gradient of length {} for parameter of length {}",
                grad.len(),
                tensor.len()
            )));
        }
        match tensor.grad_mut() {
            Some(g) => g.iter_mut().zip(grad).for_each(|(a, &b)| *a += b),
            None => tensor.set_grad(Some(grad.to_vec()))?,
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for slot in &mut self.slots {
            slot.tensor.set_grad(None).expect("clearing never fails");
        }
    }

    /// Copies values (not optimizer state) from another set with the same
    /// layout, converting precision.
    pub fn load_values_from<U: Real>(&mut self, other: &ParameterSet<U>) -> Result<()> {
        if other.len() != self.len() {
            return Err(Error::Shape(format!(
                "parameter sets differ in size: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for (dst, src) in self.slots.iter_mut().zip(&other.slots) {
            if dst.tensor.shape() != src.tensor.shape() || dst.name != src.name {
                return Err(Error::Shape(format!(
                    "parameter `{}` {:?} does not match `{}` {:?}",
                    dst.name,
                    dst.tensor.shape(),
                    src.name,
                    src.tensor.shape()
                )));
            }
            for (d, s) in dst.tensor.values_mut().iter_mut().zip(src.tensor.values()) {
                *d = T::from_f64_lossy(s.to_f64_lossy());
            }
        }
        Ok(())
    }

    /// Same layout and values in another precision, with fresh optimizer state.
    pub fn cast<U: Real>(&self) -> ParameterSet<U> {
        let mut out = ParameterSet::new();
        for slot in &self.slots {
            out.add(slot.name.clone(), slot.tensor.cast());
        }
        out
    }
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..AdamConfig::default()
        }
    }
}

/// One bias-corrected Adam update over every parameter, then clears the
/// gradients. Fails before touching anything if any gradient is missing.
pub fn adam_step<T: Real>(params: &mut ParameterSet<T>, config: &AdamConfig) -> Result<()> {
    if let Some(slot) = params.slots.iter().find(|s| s.tensor.grad().is_none()) {
        return Err(Error::MissingGradient(slot.name.clone()));
    }
    params.step += 1;
    let t = params.step as i32;
    let b1 = T::from_f64_lossy(config.beta1);
    let b2 = T::from_f64_lossy(config.beta2);
    let one = T::one();
    let lr = T::from_f64_lossy(config.lr);
    let eps = T::from_f64_lossy(config.eps);
    let bias1 = T::from_f64_lossy(1.0 - config.beta1.powi(t));
    let bias2 = T::from_f64_lossy(1.0 - config.beta2.powi(t));

    for slot in &mut params.slots {
        let grad = slot.tensor.grad().expect("checked above").to_vec();
        let values = slot.tensor.values_mut();
        for i in 0..values.len() {
            let g = grad[i];
            let m = b1 * slot.first_moment[i] + (one - b1) * g;
            let v = b2 * slot.second_moment[i] + (one - b2) * g * g;
            slot.first_moment[i] = m;
            slot.second_moment[i] = v;
            let m_hat = m / bias1;
            let v_hat = v / bias2;
            values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    params.zero_grad();
    Ok(())
}
