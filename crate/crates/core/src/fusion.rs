//! Min-max normalization of selected similarity vectors and fusion by summation.

use crate::descriptor::{first_argmax, SimilarityVector};
use crate::error::{Error, Result};
use crate::technique::TechniqueId;

pub const DEFAULT_EPSILON: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    epsilon: f64,
}

impl FusionParams {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(Error::invalid(format!("epsilon {epsilon} must lie in (0, 0.5)")));
        }
        Ok(FusionParams { epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl Default for FusionParams {
    fn default() -> Self {
        FusionParams {
            epsilon: DEFAULT_EPSILON,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedVector {
    pub technique_id: TechniqueId,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedVector {
    pub values: Vec<f64>,
    pub contributing: Vec<TechniqueId>,
}

/// Rescales to `[-ε, 1-ε]` via `(v - min) / (max - min) - ε`. A constant
/// vector carries no ranking information and maps to all zeros.
pub fn normalize(sim: &SimilarityVector, params: &FusionParams) -> Result<NormalizedVector> {
    let scores = sim.scores();
    if scores.is_empty() {
        return Err(Error::invalid("cannot normalize an empty similarity vector"));
    }
    let (min, max) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let values = if max > min {
        let span = max - min;
        scores.iter().map(|&v| (v - min) / span - params.epsilon).collect()
    } else {
        vec![0.0; scores.len()]
    };
    Ok(NormalizedVector {
        technique_id: sim.technique_id().clone(),
        values,
    })
}

/// Elementwise sum of the normalized vectors (duplicates count each time).
pub fn fuse(vectors: &[NormalizedVector]) -> Result<FusedVector> {
    let first = vectors
        .first()
        .ok_or_else(|| Error::invalid("nothing to fuse"))?;
    let len = first.values.len();
    if let Some(bad) = vectors.iter().find(|v| v.values.len() != len) {
        return Err(Error::invalid(format!(
            "`{}` has {} entries, expected {len}",
            bad.technique_id,
            bad.values.len()
        )));
    }
    let mut values = vec![0.0; len];
    for v in vectors {
        for (acc, x) in values.iter_mut().zip(&v.values) {
            *acc += x;
        }
    }
    Ok(FusedVector {
        values,
        contributing: vectors.iter().map(|v| v.technique_id.clone()).collect(),
    })
}

/// Reference index with the highest fused score (lowest index on ties) and
/// that score divided by the number of contributing techniques.
pub fn best_match(fused: &FusedVector) -> Result<(usize, f64)> {
    let (index, max) =
        first_argmax(&fused.values).ok_or_else(|| Error::invalid("empty fused vector"))?;
    let n = fused.contributing.len().max(1) as f64;
    Ok((index, max / n))
}

/// Normalizes and fuses `sims`, returning the match.
pub fn fuse_similarities<'a>(
    sims: impl IntoIterator<Item = &'a SimilarityVector>,
    params: &FusionParams,
) -> Result<(usize, f64)> {
    let normalized = sims
        .into_iter()
        .map(|s| normalize(s, params))
        .collect::<Result<Vec<_>>>()?;
    best_match(&fuse(&normalized)?)
}
