//! Flat parameter storage with named, shaped views.
//!
//! Every model registers its tensors in a [`Layout`] once; parameter values,
//! gradients and optimizer moments are then plain `Vec<f64>` buffers sharing
//! that layout. The layout order is the serialization order of checkpoints.

use std::sync::Arc;

use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Layout {
    entries: Vec<Entry>,
    total: usize,
}

impl Layout {
    pub fn add(&mut self, name: impl Into<String>, shape: &[usize]) -> ParamId {
        let len = shape.iter().product();
        self.entries.push(Entry {
            name: name.into(),
            shape: shape.to_vec(),
            offset: self.total,
            len,
        });
        self.total += len;
        ParamId(self.entries.len() - 1)
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn entry(&self, id: ParamId) -> &Entry {
        &self.entries[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn size(&self) -> usize {
        self.total
    }
}

/// Parameter values (or gradients) laid out per a shared [`Layout`].
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    layout: Arc<Layout>,
    data: Vec<f64>,
}

impl Params {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        let data = vec![0.0; layout.size()];
        Self { layout, data }
    }

    pub fn from_data(layout: Arc<Layout>, data: Vec<f64>) -> Option<Self> {
        (data.len() == layout.size()).then_some(Self { layout, data })
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn slice(&self, id: ParamId) -> &[f64] {
        let e = self.layout.entry(id);
        &self.data[e.offset..e.offset + e.len]
    }

    pub fn slice_mut(&mut self, id: ParamId) -> &mut [f64] {
        let e = self.layout.entry(id);
        let (o, n) = (e.offset, e.len);
        &mut self.data[o..o + n]
    }

    pub fn vec(&self, id: ParamId) -> ArrayView1<'_, f64> {
        ArrayView1::from(self.slice(id))
    }

    pub fn vec_mut(&mut self, id: ParamId) -> ArrayViewMut1<'_, f64> {
        ArrayViewMut1::from(self.slice_mut(id))
    }

    pub fn mat(&self, id: ParamId) -> ArrayView2<'_, f64> {
        let e = self.layout.entry(id);
        let (r, c) = (e.shape[0], e.shape[1]);
        ArrayView2::from_shape((r, c), self.slice(id)).expect("2-d parameter")
    }

    pub fn mat_mut(&mut self, id: ParamId) -> ArrayViewMut2<'_, f64> {
        let e = self.layout.entry(id);
        let (r, c) = (e.shape[0], e.shape[1]);
        ArrayViewMut2::from_shape((r, c), self.slice_mut(id)).expect("2-d parameter")
    }

    /// Mutable weight matrix and bias vector of one affine layer.
    pub fn linear_mut(&mut self, w: ParamId, b: ParamId) -> (ArrayViewMut2<'_, f64>, ArrayViewMut1<'_, f64>) {
        let (ew, eb) = (self.layout.entry(w).clone(), self.layout.entry(b).clone());
        let (sw, sb) = two_slices_mut(&mut self.data, (ew.offset, ew.len), (eb.offset, eb.len));
        (
            ArrayViewMut2::from_shape((ew.shape[0], ew.shape[1]), sw).expect("2-d parameter"),
            ArrayViewMut1::from(sb),
        )
    }

    /// Two distinct tensors as mutable slices.
    pub fn pair_mut(&mut self, a: ParamId, b: ParamId) -> (&mut [f64], &mut [f64]) {
        let (ea, eb) = (self.layout.entry(a).clone(), self.layout.entry(b).clone());
        two_slices_mut(&mut self.data, (ea.offset, ea.len), (eb.offset, eb.len))
    }

    pub fn fill(&mut self, id: ParamId, v: f64) {
        self.slice_mut(id).fill(v);
    }

    /// Fills with `U(-bound, bound)` draws.
    pub fn fill_uniform<R: Rng>(&mut self, id: ParamId, bound: f64, rng: &mut R) {
        for x in self.slice_mut(id) {
            *x = rng.random_range(-bound..=bound);
        }
    }

    pub fn add_assign(&mut self, other: &Params) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|x| *x *= k);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// `(name, values)` for every tensor in layout order.
    pub fn named(&self) -> impl Iterator<Item = (&Entry, &[f64])> {
        self.layout
            .entries()
            .iter()
            .map(move |e| (e, &self.data[e.offset..e.offset + e.len]))
    }
}

fn two_slices_mut(data: &mut [f64], a: (usize, usize), b: (usize, usize)) -> (&mut [f64], &mut [f64]) {
    assert!(a.0 + a.1 <= b.0 || b.0 + b.1 <= a.0, "overlapping parameter slices");
    if a.0 < b.0 {
        let (lo, hi) = data.split_at_mut(b.0);
        (&mut lo[a.0..a.0 + a.1], &mut hi[..b.1])
    } else {
        let (lo, hi) = data.split_at_mut(a.0);
        (&mut hi[..a.1], &mut lo[b.0..b.0 + b.1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn views_follow_layout() {
        let mut l = Layout::default();
        let a = l.add("a", &[2, 3]);
        let b = l.add("b", &[4]);
        assert_eq!(l.size(), 10);
        let mut p = Params::zeros(Arc::new(l));
        p.mat_mut(a)[[1, 2]] = 5.0;
        p.fill(b, 1.0);
        assert_eq!(p.data()[5], 5.0);
        assert_eq!(p.vec(b).sum(), 4.0);
        assert_eq!(p.layout().find("b"), Some(b));
        let names: Vec<_> = p.named().map(|(e, _)| e.name.clone()).collect();
        assert_eq!(names, ["a", "b"]);
    }
}
