//! Pointwise value types and node-indexed fields.
//!
//! A [`Field`] is either a stored array or a lazily evaluated function of the
//! node index. Lazy fields keep high-dimensional grids (e.g. 32^5 nodes of
//! 4-component spinors) out of memory; stencils simply evaluate neighbours.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DVector;
use smallvec::SmallVec;

use crate::C64;

/// Fiber value of the spinor bundle: `2^[n/2]` complex components.
#[derive(Clone, Debug, PartialEq)]
pub struct Spinor(pub SmallVec<[C64; 8]>);

impl Spinor {
    pub fn zeros(dim: usize) -> Self {
        Spinor(SmallVec::from_elem(C64::new(0.0, 0.0), dim))
    }

    pub fn from_slice(v: &[C64]) -> Self {
        Spinor(SmallVec::from_slice(v))
    }

    /// The `k`-th standard basis spinor.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.0[k] = C64::new(1.0, 0.0);
        s
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Hermitian product, conjugate-linear in `other`.
    pub fn inner(&self, other: &Spinor) -> C64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a * b.conj()).sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, a: C64) -> Spinor {
        Spinor(self.0.iter().map(|x| x * a).collect())
    }

    pub fn scale_re(&self, a: f64) -> Spinor {
        Spinor(self.0.iter().map(|x| x * a).collect())
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: C64, x: &Spinor) {
        for (s, v) in self.0.iter_mut().zip(x.0.iter()) {
            *s += a * v;
        }
    }

    pub fn to_dvector(&self) -> DVector<C64> {
        DVector::from_iterator(self.dim(), self.0.iter().copied())
    }

    pub fn from_dvector(v: &DVector<C64>) -> Self {
        Spinor(v.iter().copied().collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }
}

impl Add for Spinor {
    type Output = Spinor;
    fn add(mut self, rhs: Spinor) -> Spinor {
        self += &rhs;
        self
    }
}

impl<'a> AddAssign<&'a Spinor> for Spinor {
    fn add_assign(&mut self, rhs: &'a Spinor) {
        for (s, v) in self.0.iter_mut().zip(rhs.0.iter()) {
            *s += v;
        }
    }
}

impl Sub for Spinor {
    type Output = Spinor;
    fn sub(mut self, rhs: Spinor) -> Spinor {
        for (s, v) in self.0.iter_mut().zip(rhs.0.iter()) {
            *s -= v;
        }
        self
    }
}

impl Neg for Spinor {
    type Output = Spinor;
    fn neg(self) -> Spinor {
        Spinor(self.0.into_iter().map(|x| -x).collect())
    }
}

impl Mul<C64> for Spinor {
    type Output = Spinor;
    fn mul(self, a: C64) -> Spinor {
        self.scale(a)
    }
}

impl Mul<f64> for Spinor {
    type Output = Spinor;
    fn mul(self, a: f64) -> Spinor {
        self.scale_re(a)
    }
}

/// Small real vector (frame components of a tangent vector, or a flattened
/// form / matrix).
pub type RVec = SmallVec<[f64; 8]>;

/// Values that stencils can combine linearly.
pub trait Lin: Clone {
    fn scaled(&self, a: f64) -> Self;
    fn add_scaled(&mut self, a: f64, x: &Self);
}

impl Lin for f64 {
    fn scaled(&self, a: f64) -> Self {
        self * a
    }
    fn add_scaled(&mut self, a: f64, x: &Self) {
        *self += a * x;
    }
}

impl Lin for Spinor {
    fn scaled(&self, a: f64) -> Self {
        self.scale_re(a)
    }
    fn add_scaled(&mut self, a: f64, x: &Self) {
        for (s, v) in self.0.iter_mut().zip(x.0.iter()) {
            *s += v * a;
        }
    }
}

impl Lin for RVec {
    fn scaled(&self, a: f64) -> Self {
        self.iter().map(|x| x * a).collect()
    }
    fn add_scaled(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x.iter()) {
            *s += a * v;
        }
    }
}

impl Lin for Vec<f64> {
    fn scaled(&self, a: f64) -> Self {
        self.iter().map(|x| x * a).collect()
    }
    fn add_scaled(&mut self, a: f64, x: &Self) {
        for (s, v) in self.iter_mut().zip(x.iter()) {
            *s += a * v;
        }
    }
}

type LazyFn<T> = Arc<dyn Fn(usize) -> T + Send + Sync>;

#[derive(Clone)]
enum Src<T> {
    Stored(Arc<Vec<T>>),
    Lazy(LazyFn<T>),
}

/// Values attached to the nodes of a chart.
#[derive(Clone)]
pub struct Field<T> {
    len: usize,
    src: Src<T>,
}

impl<T: Clone + Send + Sync + 'static> Field<T> {
    pub fn from_values(values: Vec<T>) -> Self {
        Field { len: values.len(), src: Src::Stored(Arc::new(values)) }
    }

    pub fn from_fn(len: usize, f: impl Fn(usize) -> T + Send + Sync + 'static) -> Self {
        Field { len, src: Src::Lazy(Arc::new(f)) }
    }

    pub fn constant(len: usize, value: T) -> Self {
        Self::from_fn(len, move |_| value.clone())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_stored(&self) -> bool {
        matches!(self.src, Src::Stored(_))
    }

    #[inline]
    pub fn at(&self, node: usize) -> T {
        match &self.src {
            Src::Stored(v) => v[node].clone(),
            Src::Lazy(f) => f(node),
        }
    }

    /// Evaluate every node and store the result.
    pub fn materialize(&self) -> Self {
        match &self.src {
            Src::Stored(_) => self.clone(),
            Src::Lazy(_) => Self::from_values(self.values()),
        }
    }

    pub fn values(&self) -> Vec<T> {
        use rayon::prelude::*;
        (0..self.len).into_par_iter().map(|i| self.at(i)).collect()
    }

    /// Lazy pointwise map.
    pub fn map<U: Clone + Send + Sync + 'static>(
        &self,
        g: impl Fn(T) -> U + Send + Sync + 'static,
    ) -> Field<U> {
        let me = self.clone();
        Field::from_fn(self.len, move |i| g(me.at(i)))
    }

    /// Lazy pointwise map that also sees the node index.
    pub fn map_indexed<U: Clone + Send + Sync + 'static>(
        &self,
        g: impl Fn(usize, T) -> U + Send + Sync + 'static,
    ) -> Field<U> {
        let me = self.clone();
        Field::from_fn(self.len, move |i| g(i, me.at(i)))
    }
}

pub type ScalarField = Field<f64>;
pub type SpinorField = Field<Spinor>;
/// Frame components of a tangent vector (or a 1-form, via the metric).
pub type VectorField = Field<RVec>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inner_is_conjugate_linear_in_second_slot() {
        let a = Spinor::from_slice(&[C64::new(1.0, 2.0), C64::new(0.5, -1.0)]);
        let b = Spinor::from_slice(&[C64::new(-0.3, 0.7), C64::new(2.0, 0.1)]);
        let z = C64::new(0.2, 1.3);
        let lhs = a.inner(&b.scale(z));
        let rhs = a.inner(&b) * z.conj();
        assert!((lhs - rhs).norm() < 1e-14);
        assert!((a.scale(z).inner(&b) - z * a.inner(&b)).norm() < 1e-14);
    }

    #[test]
    fn lazy_and_stored_agree() {
        let lazy = ScalarField::from_fn(10, |i| (i * i) as f64);
        let stored = lazy.materialize();
        assert!(stored.is_stored());
        for i in 0..10 {
            assert_eq!(lazy.at(i), stored.at(i));
        }
        let doubled = stored.map(|x| 2.0 * x);
        assert_eq!(doubled.at(3), 18.0);
    }
}
