use std::collections::HashSet;

use crate::embed::{EmbeddingProvider, EmbeddingVector};
use crate::error::{Error, Result};

/// Candidate labels with their unit-norm embeddings in both spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelBank {
    pub labels: Vec<String>,
    pub e_v: Vec<EmbeddingVector>,
    pub e_s: Vec<EmbeddingVector>,
}

impl LabelBank {
    /// Rows are renormalized; zero or non-finite rows are rejected.
    pub fn new(
        labels: Vec<String>,
        e_v: Vec<EmbeddingVector>,
        e_s: Vec<EmbeddingVector>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidInput("label bank is empty".into()));
        }
        if e_v.len() != labels.len() || e_s.len() != labels.len() {
            return Err(Error::DimMismatch(format!(
                "{} labels but {} vision and {} semantic rows",
                labels.len(),
                e_v.len(),
                e_s.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::InvalidLabel(format!("duplicate bank label {dup:?}")));
        }
        let unit = |rows: Vec<EmbeddingVector>| -> Result<Vec<EmbeddingVector>> {
            let dim = rows[0].dim();
            rows.into_iter()
                .map(|r| {
                    if r.dim() != dim {
                        Err(Error::DimMismatch(format!(
                            "bank rows of dim {dim} and {}",
                            r.dim()
                        )))
                    } else if !r.is_finite() || r.norm() == 0.0 {
                        Err(Error::UndefinedEmbedding)
                    } else {
                        Ok(r.normalized())
                    }
                })
                .collect()
        };
        Ok(LabelBank {
            e_v: unit(e_v)?,
            e_s: unit(e_s)?,
            labels,
        })
    }

    pub fn from_provider<S: AsRef<str>>(
        labels: &[S],
        provider: &dyn EmbeddingProvider,
    ) -> Result<Self> {
        let mut e_v = Vec::with_capacity(labels.len());
        let mut e_s = Vec::with_capacity(labels.len());
        for l in labels {
            let t = provider.embed_text(l.as_ref())?;
            e_v.push(t.vision);
            e_s.push(t.semantic);
        }
        LabelBank::new(
            labels.iter().map(|l| l.as_ref().to_string()).collect(),
            e_v,
            e_s,
        )
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.e_v[0].dim(), self.e_s[0].dim())
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub(crate) fn check_dims(&self, dv: usize, ds: usize) -> Result<()> {
        if self.dims() == (dv, ds) {
            Ok(())
        } else {
            Err(Error::DimMismatch(format!(
                "bank dims {:?}, field dims ({dv}, {ds})",
                self.dims()
            )))
        }
    }
}
