use std::collections::HashMap;
use std::path::Path;

use crate::error::{bail, Result};
use crate::textfmt;

const MAGIC: &str = "fscil-feat";

/// Feature vectors with one class label each.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    features: Vec<Vec<f64>>,
    labels: Vec<String>,
    /// Classes in order of first appearance.
    classes: Vec<String>,
    by_class: HashMap<String, Vec<usize>>,
}

impl LabeledDataset {
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        if features.len() != labels.len() {
            bail!(Shape, "{} features for {} labels", features.len(), labels.len());
        }
        let dim = features.first().map_or(0, Vec::len);
        if dim == 0 {
            bail!(Shape, "dataset must contain samples of positive dim");
        }
        let mut classes = Vec::new();
        let mut by_class: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, (f, y)) in features.iter().zip(&labels).enumerate() {
            if f.len() != dim {
                bail!(Shape, "sample {i} has dim {}, expected {dim}", f.len());
            }
            if f.iter().any(|v| !v.is_finite()) {
                bail!(Format, "sample {i} has a non-finite feature");
            }
            textfmt::check_label(y)?;
            by_class
                .entry(y.clone())
                .or_insert_with(|| {
                    classes.push(y.clone());
                    Vec::new()
                })
                .push(i);
        }
        Ok(Self {
            dim,
            features,
            labels,
            classes,
            by_class,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (_, rows) = textfmt::read_rows(text, MAGIC)?;
        let (labels, features) = rows.into_iter().unzip();
        Self::new(features, labels)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        textfmt::write_rows(
            MAGIC,
            self.dim,
            self.labels.iter().map(String::as_str).zip(self.features.iter().map(Vec::as_slice)),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Sample indices of `class`, in dataset order.
    pub fn samples_of(&self, class: &str) -> &[usize] {
        self.by_class.get(class).map_or(&[], Vec::as_slice)
    }
}
