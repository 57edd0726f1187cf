use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{bail, Result};

/// Named parameter tensors with a fixed iteration order.
///
/// Vectors (biases) are stored as single-row matrices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    entries: Vec<(String, Matrix)>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Matrix) -> Result<()> {
        let name = name.into();
        if self.get(&name).is_some() {
            bail!(Parameter, "duplicate parameter name {name}");
        }
        self.entries.push((name, value));
        Ok(())
    }

    pub fn with(mut self, name: impl Into<String>, value: Matrix) -> Result<Self> {
        self.insert(name, value)?;
        Ok(self)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Matrix> {
        self.entries.iter_mut().find(|(n, _)| n == name).map(|(_, m)| m)
    }

    pub fn require(&self, name: &str) -> Result<&Matrix> {
        match self.get(name) {
            Some(m) => Ok(m),
            None => bail!(Shape, "parameter {name} not present"),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Matrix)> {
        self.entries.iter().map(|(n, m)| (n.as_str(), m))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Matrix)> {
        self.entries.iter_mut().map(|(n, m)| (n.as_str(), m))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total scalar count.
    pub fn numel(&self) -> usize {
        self.entries.iter().map(|(_, m)| m.as_slice().len()).sum()
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(n, m)| (n.clone(), Matrix::zeros(m.rows(), m.cols())))
                .collect(),
        }
    }

    pub fn sum_sq(&self) -> f64 {
        self.entries.iter().map(|(_, m)| m.frobenius_sq()).sum()
    }

    /// Errors unless `other` has the same names, order and shapes.
    pub fn check_compatible(&self, other: &ParamSet) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            bail!(Shape, "parameter sets have {} and {} entries", self.entries.len(), other.entries.len());
        }
        for ((na, ma), (nb, mb)) in self.entries.iter().zip(&other.entries) {
            if na != nb {
                bail!(Shape, "parameter name mismatch: {na} vs {nb}");
            }
            if ma.shape() != mb.shape() {
                bail!(Shape, "{na}: shape {:?} vs {:?}", ma.shape(), mb.shape());
            }
        }
        Ok(())
    }

    /// `self += scale · other`
    pub fn add_scaled(&mut self, scale: f64, other: &ParamSet) -> Result<()> {
        self.check_compatible(other)?;
        for ((_, a), (_, b)) in self.entries.iter_mut().zip(&other.entries) {
            super::axpy(scale, b.as_slice(), a.as_mut_slice());
        }
        Ok(())
    }

    pub fn flat(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|(_, m)| m.as_slice().iter().copied())
            .collect()
    }

    /// Mutable access to the `index`-th scalar in iteration order.
    pub fn scalar_mut(&mut self, mut index: usize) -> Option<&mut f64> {
        for (_, m) in self.entries.iter_mut() {
            let n = m.as_slice().len();
            if index < n {
                return Some(&mut m.as_mut_slice()[index]);
            }
            index -= n;
        }
        None
    }

    pub fn scalar(&self, mut index: usize) -> Option<f64> {
        for (_, m) in &self.entries {
            let n = m.as_slice().len();
            if index < n {
                return Some(m.as_slice()[index]);
            }
            index -= n;
        }
        None
    }

    /// Human-readable location of the `index`-th scalar.
    pub fn locate(&self, mut index: usize) -> Option<(String, usize, usize)> {
        for (name, m) in &self.entries {
            let n = m.as_slice().len();
            if index < n {
                return Some((name.clone(), index / m.cols().max(1), index % m.cols().max(1)));
            }
            index -= n;
        }
        None
    }
}
