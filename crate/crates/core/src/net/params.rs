use ndarray::{Array1, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Real;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Index of a tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

/// Named, flat-stored parameter tensors. Gradients and optimizer moments
/// use the same container so they line up tensor-for-tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<T> {
    specs: Vec<TensorSpec>,
    data: Vec<Array1<T>>,
}

impl<T: Real> ParamStore<T> {
    pub(crate) fn empty() -> Self {
        Self { specs: Vec::new(), data: Vec::new() }
    }

    pub(crate) fn push(&mut self, name: impl Into<String>, shape: Vec<usize>) -> ParamId {
        let spec = TensorSpec { name: name.into(), shape };
        self.data.push(Array1::zeros(spec.len()));
        self.specs.push(spec);
        ParamId(self.data.len() - 1)
    }

    pub fn zeros_like(&self) -> Self {
        Self { specs: self.specs.clone(), data: self.data.iter().map(|a| Array1::zeros(a.len())).collect() }
    }

    pub fn specs(&self) -> &[TensorSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.data.iter().map(|a| a.len()).sum()
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.specs.iter().position(|s| s.name == name).map(ParamId)
    }

    pub fn tensor(&self, id: ParamId) -> ArrayView1<'_, T> {
        self.data[id.0].view()
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> ArrayViewMut1<'_, T> {
        self.data[id.0].view_mut()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.data.len()).map(ParamId)
    }

    pub(crate) fn matrix(&self, id: ParamId) -> ArrayView2<'_, T> {
        let s = &self.specs[id.0].shape;
        self.data[id.0].view().into_shape_with_order((s[0], s[1])).expect("2-d tensor")
    }

    pub(crate) fn matrix_mut(&mut self, id: ParamId) -> ArrayViewMut2<'_, T> {
        let s = &self.specs[id.0].shape;
        self.data[id.0].view_mut().into_shape_with_order((s[0], s[1])).expect("2-d tensor")
    }

    pub(crate) fn vector(&self, id: ParamId) -> ArrayView1<'_, T> {
        self.data[id.0].view()
    }

    pub(crate) fn vector_mut(&mut self, id: ParamId) -> ArrayViewMut1<'_, T> {
        self.data[id.0].view_mut()
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.specs == other.specs
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.iter().all(|x| x.is_finite()))
    }

    /// Overwrites every tensor with `U(-scale, scale)` draws.
    pub fn randomize(&mut self, rng: &mut impl Rng, scale: f64) {
        for a in &mut self.data {
            a.mapv_inplace(|_| T::from(rng.gen_range(-scale..=scale)).unwrap());
        }
    }

    pub fn copy_from(&mut self, other: &Self) {
        debug_assert!(self.same_layout(other));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            a.assign(b);
        }
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().flat_map(|a| a.iter()).fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn cast<U: Real>(&self) -> ParamStore<U> {
        ParamStore {
            specs: self.specs.clone(),
            data: self.data.iter().map(|a| a.mapv(|x| U::from(x).unwrap())).collect(),
        }
    }

    pub(crate) fn from_parts(specs: Vec<TensorSpec>, data: Vec<Array1<T>>) -> Self {
        Self { specs, data }
    }

    pub(crate) fn data(&self) -> &[Array1<T>] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Array1<T>] {
        &mut self.data
    }
}
