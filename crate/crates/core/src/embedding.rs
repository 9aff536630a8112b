//! Modality-labelled collections of equal-dimension vectors.

use serde::{Deserialize, Serialize};

use crate::numcore::{norm, Mat};
use crate::{Error, Result};

const UNIT_TOL: f64 = 1e-9;

/// `n × d` vectors tagged with a modality label.
///
/// When `unit_norm` is set every row has norm 1 within 1e-9.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    vectors: Mat,
    modality: String,
    unit_norm: bool,
}

impl EmbeddingSet {
    pub fn new(vectors: Mat, modality: impl Into<String>) -> Result<Self> {
        if vectors.rows() == 0 {
            return Err(Error::TooFewVectors { needed: 1, found: 0 });
        }
        if vectors.cols() == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if !vectors.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            vectors,
            modality: modality.into(),
            unit_norm: false,
        })
    }

    /// Like [`EmbeddingSet::new`] but requires every row to be unit norm.
    pub fn unit(vectors: Mat, modality: impl Into<String>) -> Result<Self> {
        let mut set = Self::new(vectors, modality)?;
        for r in set.vectors.row_iter() {
            let n = norm(r);
            if (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::NotUnitNorm { norm: n });
            }
        }
        set.unit_norm = true;
        Ok(set)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], modality: impl Into<String>) -> Result<Self> {
        Self::new(Mat::from_rows(rows)?, modality)
    }

    /// Copy with every row scaled onto the unit sphere.
    pub fn normalized(&self) -> Result<Self> {
        Ok(Self {
            vectors: self.vectors.normalize_rows()?,
            modality: self.modality.clone(),
            unit_norm: true,
        })
    }

    pub fn len(&self) -> usize {
        self.vectors.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn vectors(&self) -> &Mat {
        &self.vectors
    }

    pub fn into_vectors(self) -> Mat {
        self.vectors
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn modality(&self) -> &str {
        &self.modality
    }

    pub fn with_modality(mut self, modality: impl Into<String>) -> Self {
        self.modality = modality.into();
        self
    }

    pub fn is_unit_norm(&self) -> bool {
        self.unit_norm
    }

    pub fn centroid(&self) -> Vec<f64> {
        self.vectors.column_means()
    }

    /// First `n` rows (all rows when `n >= len`).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let n = n.min(self.len());
        let d = self.dim();
        let vectors = Mat::new(n, d, self.vectors.as_slice()[..n * d].to_vec())?;
        Ok(Self {
            vectors,
            modality: self.modality.clone(),
            unit_norm: self.unit_norm,
        })
    }
}
