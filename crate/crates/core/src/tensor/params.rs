use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Tensor, TensorError};

/// An ordered collection of named learnable tensors.
///
/// Order is insertion order and is part of the contract: tapes bind
/// parameters by position and [`Gradients`] are aligned to it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    tensors: IndexMap<String, Tensor>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a parameter and returns its position.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> usize {
        let (index, _) = self.tensors.insert_full(name.into(), tensor);
        index
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, index: usize) -> &Tensor {
        &self.tensors[index]
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Tensor {
        &mut self.tensors[index]
    }

    pub fn by_name(&self, name: &str) -> Result<&Tensor, TensorError> {
        self.tensors
            .get(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Result<&mut Tensor, TensorError> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.get_index_of(name)
    }

    pub fn name(&self, index: usize) -> &str {
        self.tensors
            .get_index(index)
            .map(|(k, _)| k.as_str())
            .unwrap()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.values().all(Tensor::is_finite)
    }

    /// Order-sensitive FNV-1a hash over names, shapes and the exact bit
    /// patterns of every value.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |bytes: &[u8]| {
            for b in bytes {
                h ^= *b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for (name, t) in &self.tensors {
            eat(name.as_bytes());
            for d in t.shape() {
                eat(&(*d as u64).to_le_bytes());
            }
            for v in t.data() {
                eat(&v.to_bits().to_le_bytes());
            }
        }
        h
    }

    /// `self - step * grads`, as a new set.
    pub fn descended(&self, grads: &Gradients, step: f64) -> ParamSet {
        let mut out = self.clone();
        for (i, g) in grads.iter().enumerate() {
            for (p, gv) in out.get_mut(i).data_mut().iter_mut().zip(g) {
                *p -= step * gv;
            }
        }
        out
    }

    /// `self + scale * direction`, as a new set.
    pub fn offset(&self, direction: &Gradients, scale: f64) -> ParamSet {
        self.descended(direction, -scale)
    }
}

/// Per-parameter gradient arrays aligned with a [`ParamSet`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(params: &ParamSet) -> Self {
        Gradients(
            params
                .tensors
                .values()
                .map(|t| vec![0.0; t.len()])
                .collect(),
        )
    }

    pub fn from_vecs(vecs: Vec<Vec<f64>>) -> Self {
        Gradients(vecs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> &[f64] {
        &self.0[index]
    }

    pub fn get_mut(&mut self, index: usize) -> &mut Vec<f64> {
        &mut self.0[index]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.0.iter()
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.0.iter_mut().flatten().for_each(|v| *v *= factor);
    }

    /// `a * self + b * other`, elementwise.
    pub fn combine(&self, a: f64, other: &Gradients, b: f64) -> Gradients {
        Gradients(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(x, y)| x.iter().zip(y).map(|(p, q)| a * p + b * q).collect())
                .collect(),
        )
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}
