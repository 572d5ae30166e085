//! Priors and binned score likelihoods estimated from a labeled calibration
//! traversal.

mod histogram;
mod store_file;

pub use histogram::{likelihood, Hypothesis, LikelihoodHistogram};
pub use store_file::{load_store, save_store, STORE_MAGIC};

use std::collections::BTreeMap;

use crate::config::TripartiteConfig;
use crate::error::{Error, Result};
use crate::technique::TechniqueId;

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_ALPHA: f64 = 1.0;
pub const DEFAULT_MIN_SAMPLES: usize = 10;
pub const PRIOR_MIN: f64 = 0.01;
pub const PRIOR_MAX: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationParams {
    pub bins: usize,
    pub alpha: f64,
    pub min_samples: usize,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        CalibrationParams {
            bins: DEFAULT_BINS,
            alpha: DEFAULT_ALPHA,
            min_samples: DEFAULT_MIN_SAMPLES,
        }
    }
}

/// Outcome of one technique on one calibration query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// The technique's match score (maximum similarity).
    pub score: f64,
    /// Whether its best reference was a ground-truth match.
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TechniqueCalibration {
    pub technique_id: TechniqueId,
    pub prior_match: f64,
    pub histogram: LikelihoodHistogram,
    pub sample_count: u64,
}

impl TechniqueCalibration {
    pub fn likelihoods(&self, score: f64) -> Result<(f64, f64)> {
        Ok((
            self.histogram.likelihood(score, Hypothesis::Match)?,
            self.histogram.likelihood(score, Hypothesis::Mismatch)?,
        ))
    }
}

/// Histogram of the primary technique's score, split by whether the
/// candidate technique matched on the same query.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCalibration {
    pub primary_id: TechniqueId,
    pub candidate_id: TechniqueId,
    pub histogram: LikelihoodHistogram,
}

fn check_sample_count(technique: &TechniqueId, n: usize, params: &CalibrationParams) -> Result<()> {
    if n < params.min_samples.max(1) {
        return Err(Error::InsufficientData {
            technique: technique.to_string(),
            got: n,
            needed: params.min_samples.max(1),
        });
    }
    Ok(())
}

pub fn calibrate_technique(
    technique_id: TechniqueId,
    samples: &[Observation],
    params: &CalibrationParams,
) -> Result<TechniqueCalibration> {
    check_sample_count(&technique_id, samples.len(), params)?;
    let pairs: Vec<(f64, bool)> = samples.iter().map(|o| (o.score, o.matched)).collect();
    let histogram = LikelihoodHistogram::from_samples(&pairs, params.bins, params.alpha)?;
    let matched = samples.iter().filter(|o| o.matched).count();
    let prior_match = (matched as f64 / samples.len() as f64).clamp(PRIOR_MIN, PRIOR_MAX);
    Ok(TechniqueCalibration {
        technique_id,
        prior_match,
        histogram,
        sample_count: samples.len() as u64,
    })
}

/// `samples` pairs the primary's score with the candidate's outcome on the same query.
pub fn calibrate_pair(
    samples: &[(f64, bool)],
    primary_id: TechniqueId,
    candidate_id: TechniqueId,
    params: &CalibrationParams,
) -> Result<PairCalibration> {
    check_sample_count(&primary_id, samples.len(), params)?;
    let histogram = LikelihoodHistogram::from_samples(samples, params.bins, params.alpha)?;
    Ok(PairCalibration {
        primary_id,
        candidate_id,
        histogram,
    })
}

/// Per-technique observations over the same ordered calibration queries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationRun {
    observations: BTreeMap<TechniqueId, Vec<Observation>>,
}

impl CalibrationRun {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, technique: TechniqueId, observations: Vec<Observation>) {
        self.observations.insert(technique, observations);
    }

    pub fn get(&self, technique: &TechniqueId) -> Option<&[Observation]> {
        self.observations.get(technique).map(Vec::as_slice)
    }
}

/// Every calibration needed to run switching over a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationStore {
    techniques: BTreeMap<TechniqueId, TechniqueCalibration>,
    pairs: BTreeMap<(TechniqueId, TechniqueId), PairCalibration>,
}

impl CalibrationStore {
    pub fn from_parts(
        techniques: impl IntoIterator<Item = TechniqueCalibration>,
        pairs: impl IntoIterator<Item = PairCalibration>,
    ) -> Self {
        CalibrationStore {
            techniques: techniques
                .into_iter()
                .map(|c| (c.technique_id.clone(), c))
                .collect(),
            pairs: pairs
                .into_iter()
                .map(|p| ((p.primary_id.clone(), p.candidate_id.clone()), p))
                .collect(),
        }
    }

    pub fn technique(&self, id: &TechniqueId) -> Result<&TechniqueCalibration> {
        self.techniques
            .get(id)
            .ok_or_else(|| Error::IncompleteCalibration(format!("no calibration for `{id}`")))
    }

    pub fn pair(&self, primary: &TechniqueId, candidate: &TechniqueId) -> Result<&PairCalibration> {
        self.pairs
            .get(&(primary.clone(), candidate.clone()))
            .ok_or_else(|| {
                Error::IncompleteCalibration(format!("no pair calibration for `{primary}` -> `{candidate}`"))
            })
    }

    pub fn techniques(&self) -> impl Iterator<Item = &TechniqueCalibration> {
        self.techniques.values()
    }

    pub fn pairs(&self) -> impl Iterator<Item = &PairCalibration> {
        self.pairs.values()
    }

    /// Checks that every technique and every ordered pair of distinct
    /// techniques in `config` is calibrated.
    pub fn check_complete(&self, config: &TripartiteConfig) -> Result<()> {
        let all = config.techniques();
        for a in &all {
            self.technique(a)?;
            for b in all.iter().filter(|b| *b != a) {
                self.pair(a, b)?;
            }
        }
        Ok(())
    }
}

/// Calibrates every technique of `config` and every ordered pair of distinct
/// techniques (pairs span units so the pooled switch-only baseline is covered).
pub fn build_store(
    run: &CalibrationRun,
    config: &TripartiteConfig,
    params: &CalibrationParams,
) -> Result<CalibrationStore> {
    let all = config.techniques();
    let mut observations = Vec::with_capacity(all.len());
    for t in &all {
        let obs = run.get(t).ok_or_else(|| {
            Error::IncompleteCalibration(format!("calibration run has no observations for `{t}`"))
        })?;
        observations.push(obs);
    }
    let query_count = observations[0].len();
    if let Some((t, _)) = all.iter().zip(&observations).find(|(_, o)| o.len() != query_count) {
        return Err(Error::IncompleteCalibration(format!(
            "`{t}` covers a different number of calibration queries"
        )));
    }

    let techniques = all
        .iter()
        .zip(&observations)
        .map(|(t, obs)| calibrate_technique(t.clone(), obs, params))
        .collect::<Result<Vec<_>>>()?;

    let mut pairs = Vec::new();
    for (a, obs_a) in all.iter().zip(&observations) {
        for (b, obs_b) in all.iter().zip(&observations) {
            if a == b {
                continue;
            }
            let joint: Vec<(f64, bool)> = obs_a
                .iter()
                .zip(obs_b.iter())
                .map(|(oa, ob)| (oa.score, ob.matched))
                .collect();
            pairs.push(calibrate_pair(&joint, a.clone(), b.clone(), params)?);
        }
    }
    Ok(CalibrationStore::from_parts(techniques, pairs))
}
