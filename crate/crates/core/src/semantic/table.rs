use std::collections::HashMap;
use std::path::Path;

use crate::error::{bail, Result};
use crate::numkit::norm;
use crate::textfmt;

const MAGIC: &str = "fscil-emb";

/// Per-class semantic vectors keyed by class label, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingTable {
    class_ids: Vec<String>,
    dim: usize,
    vectors: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl EmbeddingTable {
    pub fn new(class_ids: Vec<String>, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if class_ids.len() != vectors.len() {
            bail!(Shape, "{} labels for {} vectors", class_ids.len(), vectors.len());
        }
        if class_ids.is_empty() {
            bail!(Parameter, "embedding table must hold at least one class");
        }
        let dim = vectors[0].len();
        if dim == 0 {
            bail!(Shape, "embedding dim must be positive");
        }
        let mut index = HashMap::with_capacity(class_ids.len());
        for (i, (id, v)) in class_ids.iter().zip(&vectors).enumerate() {
            textfmt::check_label(id)?;
            if v.len() != dim {
                bail!(Shape, "class {id} has dim {}, expected {dim}", v.len());
            }
            if v.iter().any(|x| !x.is_finite()) {
                bail!(Format, "class {id} has a non-finite component");
            }
            if norm(v) == 0.0 {
                bail!(Degenerate, "class {id} has a zero-norm embedding");
            }
            if index.insert(id.clone(), i).is_some() {
                bail!(Format, "duplicate label {id}");
            }
        }
        Ok(Self {
            class_ids,
            dim,
            vectors,
            index,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (dim, rows) = textfmt::read_rows(text, MAGIC)?;
        let (ids, vectors): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let table = Self::new(ids, vectors)?;
        debug_assert_eq!(table.dim, dim);
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        textfmt::write_rows(
            MAGIC,
            self.dim,
            self.class_ids.iter().map(String::as_str).zip(self.vectors.iter().map(Vec::as_slice)),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.class_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.class_ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Result<&[f64]> {
        match self.index.get(id) {
            Some(&i) => Ok(&self.vectors[i]),
            None => bail!(MissingClass, "{id} not in embedding table"),
        }
    }

    /// Table restricted to `ids`, in the given order.
    pub fn subset<S: AsRef<str>>(&self, ids: &[S]) -> Result<Self> {
        let vectors = ids
            .iter()
            .map(|id| self.get(id.as_ref()).map(<[f64]>::to_vec))
            .collect::<Result<Vec<_>>>()?;
        Self::new(ids.iter().map(|s| s.as_ref().to_string()).collect(), vectors)
    }

    /// Copy with every vector scaled to unit length.
    pub fn normalized(&self) -> Self {
        let vectors = self
            .vectors
            .iter()
            .map(|v| {
                let n = norm(v);
                v.iter().map(|x| x / n).collect()
            })
            .collect();
        Self {
            vectors,
            ..self.clone()
        }
    }
}
