//! Bayesian technique switching inside each unit of the model.
//!
//! Each unit starts at its primary technique and accepts it when the
//! posterior probability of a correct match exceeds the threshold. Otherwise
//! it hops to the unvisited technique with the highest complementarity to the
//! current one, and so on. If the pool is exhausted the visited technique with
//! the highest posterior is taken.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::calibration::{CalibrationStore, Hypothesis, PairCalibration, TechniqueCalibration};
use crate::config::{TripartiteConfig, Unit};
use crate::descriptor::{raw_match_score, SimilarityVector};
use crate::engine::{SimilarityCache, SimilaritySource};
use crate::error::{Error, Result};
use crate::technique::TechniqueId;

/// Posterior probability of a correct match given the evidence likelihoods:
/// `P(M) P(Z|M) / (P(M) P(Z|M) + (1 - P(M)) P(Z|MM))`.
pub fn posterior_match(prior: f64, lik_m: f64, lik_mm: f64) -> Result<f64> {
    if !(prior > 0.0 && prior < 1.0) {
        return Err(Error::invalid(format!("prior {prior} outside (0, 1)")));
    }
    if !(lik_m >= 0.0 && lik_mm >= 0.0 && lik_m.is_finite() && lik_mm.is_finite()) {
        return Err(Error::invalid(format!("likelihoods ({lik_m}, {lik_mm}) must be finite and >= 0")));
    }
    let matched = prior * lik_m;
    let evidence = matched + (1.0 - prior) * lik_mm;
    if evidence == 0.0 {
        return Err(Error::UndefinedEvidence);
    }
    Ok((matched / evidence).clamp(0.0, 1.0))
}

/// Likelihood-ratio ranking score of moving from the current technique to a
/// candidate. Unbounded; only its ordering is used.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplementarityScore {
    pub primary_id: TechniqueId,
    pub candidate_id: TechniqueId,
    pub value: f64,
}

/// `[P(Z|M_A) P(Z|M_B)] / [P(Z|MM_A) P(Z|MM_B)]` at the current technique's score.
pub fn complementarity(
    pair_ab: &PairCalibration,
    self_calib: &TechniqueCalibration,
    score: f64,
) -> Result<ComplementarityScore> {
    if pair_ab.primary_id != self_calib.technique_id {
        return Err(Error::IncompleteCalibration(format!(
            "pair calibration is for `{}`, current technique is `{}`",
            pair_ab.primary_id, self_calib.technique_id
        )));
    }
    let (m_a, mm_a) = self_calib.likelihoods(score)?;
    let m_b = pair_ab.histogram.likelihood(score, Hypothesis::Match)?;
    let mm_b = pair_ab.histogram.likelihood(score, Hypothesis::Mismatch)?;
    let denom = mm_a * mm_b;
    if denom == 0.0 {
        return Err(Error::UndefinedEvidence);
    }
    Ok(ComplementarityScore {
        primary_id: pair_ab.primary_id.clone(),
        candidate_id: pair_ab.candidate_id.clone(),
        value: (m_a * m_b) / denom,
    })
}

/// Posterior and complementarity queries over unit positions `0..n`.
pub trait SwitchEvaluator {
    fn posterior(&mut self, position: usize) -> Result<f64>;
    fn complementarity(&mut self, from: usize, to: usize) -> Result<f64>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopStep {
    pub position: usize,
    pub posterior: f64,
    /// Complementarity from this position to each unvisited position, in unit order.
    pub complementarity: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopOutcome {
    pub selected: usize,
    pub posterior: f64,
    pub fallback_used: bool,
    pub steps: Vec<LoopStep>,
}

/// The dynamic switching loop over a unit of `n` techniques. Acceptance is
/// strict (`posterior > threshold`); ties go to the earlier unit position.
pub fn switch_loop(n: usize, threshold: f64, eval: &mut dyn SwitchEvaluator) -> Result<LoopOutcome> {
    if n == 0 {
        return Err(Error::invalid("unit has no techniques"));
    }
    let mut visited = vec![false; n];
    let mut steps: Vec<LoopStep> = Vec::with_capacity(n);
    let mut current = 0usize;
    loop {
        visited[current] = true;
        let posterior = eval.posterior(current)?;
        if posterior > threshold {
            steps.push(LoopStep {
                position: current,
                posterior,
                complementarity: Vec::new(),
            });
            return Ok(LoopOutcome {
                selected: current,
                posterior,
                fallback_used: false,
                steps,
            });
        }
        let mut scores = Vec::new();
        let mut best: Option<(usize, f64)> = None;
        for cand in (0..n).filter(|&c| !visited[c]) {
            let value = eval.complementarity(current, cand)?;
            scores.push((cand, value));
            if best.is_none_or(|(_, b)| value > b) {
                best = Some((cand, value));
            }
        }
        steps.push(LoopStep {
            position: current,
            posterior,
            complementarity: scores,
        });
        match best {
            Some((next, _)) => current = next,
            None => break,
        }
    }
    // every technique was visited without acceptance
    let mut by_position: Vec<&LoopStep> = steps.iter().collect();
    by_position.sort_by_key(|s| s.position);
    let mut pick = by_position[0];
    for s in &by_position[1..] {
        if s.posterior > pick.posterior {
            pick = s;
        }
    }
    Ok(LoopOutcome {
        selected: pick.position,
        posterior: pick.posterior,
        fallback_used: true,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub technique: TechniqueId,
    pub match_score: f64,
    pub posterior: f64,
    pub complementarity: Vec<ComplementarityScore>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnitDecision {
    pub unit_label: String,
    pub selected_technique: TechniqueId,
    pub selected_posterior: f64,
    pub fallback_used: bool,
    pub trace: Vec<TraceStep>,
}

struct StoreEvaluator<'a, F> {
    unit: &'a Unit,
    store: &'a CalibrationStore,
    similarity: F,
    scores: Vec<Option<f64>>,
}

impl<F> StoreEvaluator<'_, F>
where
    F: FnMut(&TechniqueId) -> Result<Arc<SimilarityVector>>,
{
    fn score(&mut self, position: usize) -> Result<f64> {
        if let Some(s) = self.scores[position] {
            return Ok(s);
        }
        let sim = (self.similarity)(&self.unit.techniques[position])?;
        let s = raw_match_score(&sim)?.value;
        self.scores[position] = Some(s);
        Ok(s)
    }
}

impl<F> SwitchEvaluator for StoreEvaluator<'_, F>
where
    F: FnMut(&TechniqueId) -> Result<Arc<SimilarityVector>>,
{
    fn posterior(&mut self, position: usize) -> Result<f64> {
        let score = self.score(position)?;
        let cal = self.store.technique(&self.unit.techniques[position])?;
        let (lik_m, lik_mm) = cal.likelihoods(score)?;
        posterior_match(cal.prior_match, lik_m, lik_mm)
    }

    fn complementarity(&mut self, from: usize, to: usize) -> Result<f64> {
        let score = self.score(from)?;
        let (a, b) = (&self.unit.techniques[from], &self.unit.techniques[to]);
        let pair = self.store.pair(a, b)?;
        Ok(complementarity(pair, self.store.technique(a)?, score)?.value)
    }
}

/// Runs the switching loop for one unit. `similarity` supplies (and may
/// cache) the query's similarity vector for a technique.
pub fn select_technique(
    unit: &Unit,
    similarity: impl FnMut(&TechniqueId) -> Result<Arc<SimilarityVector>>,
    store: &CalibrationStore,
    threshold: f64,
) -> Result<UnitDecision> {
    let mut eval = StoreEvaluator {
        unit,
        store,
        similarity,
        scores: vec![None; unit.techniques.len()],
    };
    let outcome = switch_loop(unit.techniques.len(), threshold, &mut eval)?;
    let id = |p: usize| unit.techniques[p].clone();
    let trace = outcome
        .steps
        .iter()
        .map(|step| TraceStep {
            technique: id(step.position),
            match_score: eval.scores[step.position].expect("visited technique has a score"),
            posterior: step.posterior,
            complementarity: step
                .complementarity
                .iter()
                .map(|&(c, value)| ComplementarityScore {
                    primary_id: id(step.position),
                    candidate_id: id(c),
                    value,
                })
                .collect(),
        })
        .collect();
    Ok(UnitDecision {
        unit_label: unit.label.clone(),
        selected_technique: id(outcome.selected),
        selected_posterior: outcome.posterior,
        fallback_used: outcome.fallback_used,
        trace,
    })
}

/// The selected multiset of techniques for one query, one per unit.
#[derive(Debug, Clone)]
pub struct SelectedTechniques {
    pub decisions: Vec<UnitDecision>,
    /// Similarity vectors of every technique evaluated while switching.
    pub similarities: BTreeMap<TechniqueId, Arc<SimilarityVector>>,
    /// How many similarity vectors were computed (each technique at most once).
    pub computations: usize,
}

impl SelectedTechniques {
    pub fn selected(&self) -> impl Iterator<Item = &TechniqueId> {
        self.decisions.iter().map(|d| &d.selected_technique)
    }

    pub fn selected_vectors(&self) -> Vec<Arc<SimilarityVector>> {
        self.selected()
            .map(|t| Arc::clone(&self.similarities[t]))
            .collect()
    }
}

/// Runs every unit of `config` independently on `query`, sharing one similarity cache.
pub fn run_tripartite(
    config: &TripartiteConfig,
    query: usize,
    source: &dyn SimilaritySource,
    store: &CalibrationStore,
) -> Result<SelectedTechniques> {
    run_units(config.units(), config.threshold(), query, source, store)
}

pub(crate) fn run_units(
    units: &[Unit],
    threshold: f64,
    query: usize,
    source: &dyn SimilaritySource,
    store: &CalibrationStore,
) -> Result<SelectedTechniques> {
    let cache = SimilarityCache::new();
    let decisions = units
        .iter()
        .map(|unit| {
            select_technique(
                unit,
                |t| cache.get_or_compute(t, || source.similarity(query, t)),
                store,
                threshold,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let computations = cache.computations();
    Ok(SelectedTechniques {
        decisions,
        similarities: cache.into_map(),
        computations,
    })
}
