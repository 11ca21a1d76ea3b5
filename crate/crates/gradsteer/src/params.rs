//! Flat parameter and gradient vectors with a layer manifest, shared by the
//! model, the optimizer and the reweighting machinery.

use crate::real::Real;

/// One named span inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerEntry {
    pub name: String,
    pub offset: usize,
    pub extent: usize,
}

/// Flat view of all model parameters plus the manifest describing which
/// span belongs to which layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatorParams<T: Real> {
    pub values: Vec<T>,
    pub manifest: Vec<LayerEntry>,
}

impl<T: Real> SeparatorParams<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn layer(&self, name: &str) -> Option<&[T]> {
        self.manifest
            .iter()
            .find(|e| e.name == name)
            .map(|e| &self.values[e.offset..e.offset + e.extent])
    }

    pub fn check_manifest(&self) -> bool {
        let mut expected = 0;
        for e in &self.manifest {
            if e.offset != expected {
                return false;
            }
            expected += e.extent;
        }
        expected == self.values.len()
    }
}

/// Flat gradient aligned to a [`SeparatorParams`] manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector<T: Real>(pub Vec<T>);

impl<T: Real> GradientVector<T> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> T {
        self.0.iter().map(|&g| g * g).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }

    /// `self += scale * other`
    pub fn axpy(&mut self, scale: T, other: &Self) {
        debug_assert_eq!(self.len(), other.len());
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            *a += scale * b;
        }
    }
}
