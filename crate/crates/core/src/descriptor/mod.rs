//! Descriptor computation, descriptor-set ingestion and query-to-reference
//! similarity.

pub mod builtin;
pub mod hog;
pub mod image;
pub mod sfdesc;

pub use builtin::{compute_descriptor, BuiltinTechnique};
pub use image::ImageGray;
pub use sfdesc::{load_descriptor_set, save_descriptor_set};

use crate::error::{Error, Result};
use crate::technique::TechniqueId;

/// One descriptor produced by a technique.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorVector {
    technique_id: TechniqueId,
    values: Vec<f64>,
}

impl DescriptorVector {
    pub fn new(technique_id: TechniqueId, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("descriptor has zero length"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value in `{technique_id}` descriptor")));
        }
        Ok(DescriptorVector {
            technique_id,
            values,
        })
    }

    pub fn technique_id(&self) -> &TechniqueId {
        &self.technique_id
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn relabel(mut self, technique_id: TechniqueId) -> Self {
        self.technique_id = technique_id;
        self
    }
}

/// Row-major collection of equal-length descriptors, index-aligned with an
/// image list.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    technique_id: TechniqueId,
    dim: usize,
    values: Vec<f64>,
    norms: Vec<f64>,
}

impl DescriptorSet {
    pub fn new(technique_id: TechniqueId, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() {
            return Err(Error::EmptySet(format!("`{technique_id}` has no rows or zero dimension")));
        }
        if values.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "{} values do not form rows of dimension {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value in `{technique_id}` descriptor set")));
        }
        let norms = values.chunks(dim).map(l2_norm).collect();
        Ok(DescriptorSet {
            technique_id,
            dim,
            values,
            norms,
        })
    }

    pub fn from_rows(technique_id: TechniqueId, rows: &[DescriptorVector]) -> Result<Self> {
        let dim = rows.first().map(|r| r.dim()).unwrap_or(0);
        if let Some(bad) = rows.iter().find(|r| r.dim() != dim) {
            return Err(Error::invalid(format!(
                "descriptor rows disagree on dimension ({} vs {dim})",
                bad.dim()
            )));
        }
        let values = rows.iter().flat_map(|r| r.values.iter().copied()).collect();
        DescriptorSet::new(technique_id, dim, values)
    }

    pub fn technique_id(&self) -> &TechniqueId {
        &self.technique_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }

    pub fn vector(&self, i: usize) -> DescriptorVector {
        DescriptorVector {
            technique_id: self.technique_id.clone(),
            values: self.row(i).to_vec(),
        }
    }

    pub fn relabel(mut self, technique_id: TechniqueId) -> Self {
        self.technique_id = technique_id;
        self
    }

    /// The listed rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= self.len()) {
            return Err(Error::invalid(format!("row {bad} out of range ({} rows)", self.len())));
        }
        let values = rows.iter().flat_map(|&r| self.row(r).iter().copied()).collect();
        DescriptorSet::new(self.technique_id.clone(), self.dim, values)
    }
}

/// Scores of one query against every reference under one technique.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityVector {
    technique_id: TechniqueId,
    scores: Vec<f64>,
}

impl SimilarityVector {
    pub fn new(technique_id: TechniqueId, scores: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite similarity for `{technique_id}`")));
        }
        Ok(SimilarityVector {
            technique_id,
            scores,
        })
    }

    pub fn technique_id(&self) -> &TechniqueId {
        &self.technique_id
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Maximum similarity and the lowest reference index attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchScore {
    pub value: f64,
    pub best_index: usize,
}

fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cosine_with_norms(a: &[f64], norm_a: f64, b: &[f64], norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// Cosine similarity; zero if either vector has zero norm.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    cosine_with_norms(a, l2_norm(a), b, l2_norm(b))
}

/// Cosine similarity of `query` against every row of `refs`.
pub fn similarity_vector(query: &DescriptorVector, refs: &DescriptorSet) -> Result<SimilarityVector> {
    if query.technique_id != refs.technique_id {
        return Err(Error::invalid(format!(
            "query technique `{}` does not match reference technique `{}`",
            query.technique_id, refs.technique_id
        )));
    }
    if query.dim() != refs.dim {
        return Err(Error::invalid(format!(
            "query dimension {} does not match reference dimension {}",
            query.dim(),
            refs.dim
        )));
    }
    let q_norm = l2_norm(&query.values);
    let scores = refs
        .rows()
        .zip(&refs.norms)
        .map(|(row, &r_norm)| cosine_with_norms(&query.values, q_norm, row, r_norm))
        .collect();
    Ok(SimilarityVector {
        technique_id: query.technique_id.clone(),
        scores,
    })
}

/// Index of the first maximum of `values`, with the maximum itself.
pub(crate) fn first_argmax(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

pub fn raw_match_score(sim: &SimilarityVector) -> Result<MatchScore> {
    first_argmax(&sim.scores)
        .map(|(best_index, value)| MatchScore { value, best_index })
        .ok_or_else(|| Error::invalid("empty similarity vector"))
}
