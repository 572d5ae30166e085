//! Scoring predictions against ground truth, precision-recall sweeps and the
//! method comparisons (single techniques, fuse-all, switch-only, Switch-Fuse).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::calibration::{CalibrationRun, CalibrationStore, Observation};
use crate::config::TripartiteConfig;
use crate::descriptor::raw_match_score;
use crate::engine::SimilaritySource;
use crate::error::{Error, Result};
use crate::fusion::{fuse_similarities, FusionParams};
use crate::io::write_atomic;
use crate::switching::{run_tripartite, run_units, UnitDecision};
use crate::technique::TechniqueId;

pub const DEFAULT_TOLERANCE: usize = 1;

/// Acceptable reference indices per query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    sets: Vec<Vec<usize>>,
    reference_count: usize,
}

impl GroundTruth {
    pub fn new(sets: Vec<Vec<usize>>, reference_count: usize) -> Result<Self> {
        let mut sets = sets;
        for (q, set) in sets.iter_mut().enumerate() {
            set.sort_unstable();
            set.dedup();
            if set.is_empty() {
                return Err(Error::invalid(format!("query {q} has no acceptable reference")));
            }
            if let Some(&bad) = set.iter().find(|&&r| r >= reference_count) {
                return Err(Error::invalid(format!(
                    "query {q} lists reference {bad}, but there are only {reference_count}"
                )));
            }
        }
        Ok(GroundTruth {
            sets,
            reference_count,
        })
    }

    /// Frame-aligned traverses: query `i` matches references `i - k ..= i + k`.
    pub fn from_tolerance(query_count: usize, reference_count: usize, k: usize) -> Result<Self> {
        let sets = (0..query_count)
            .map(|i| (i.saturating_sub(k)..=i + k).filter(|&r| r < reference_count).collect())
            .collect();
        GroundTruth::new(sets, reference_count)
    }

    pub fn query_count(&self) -> usize {
        self.sets.len()
    }

    pub fn reference_count(&self) -> usize {
        self.reference_count
    }

    pub fn acceptable(&self, query: usize) -> Option<&[usize]> {
        self.sets.get(query).map(Vec::as_slice)
    }

    pub fn is_correct(&self, query: usize, reference: usize) -> bool {
        self.sets
            .get(query)
            .is_some_and(|s| s.binary_search(&reference).is_ok())
    }

    /// Ground truth for a subset of queries, in the given order.
    pub fn select(&self, queries: &[usize]) -> Result<Self> {
        let sets = queries
            .iter()
            .map(|&q| {
                self.sets
                    .get(q)
                    .cloned()
                    .ok_or_else(|| Error::invalid(format!("query {q} out of range")))
            })
            .collect::<Result<_>>()?;
        GroundTruth::new(sets, self.reference_count)
    }

    /// CSV with header `query,references`, references separated by `;`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("query,references\n");
        for (q, set) in self.sets.iter().enumerate() {
            let refs: Vec<String> = set.iter().map(usize::to_string).collect();
            out.push_str(&format!("{q},{}\n", refs.join(";")));
        }
        out
    }

    pub fn parse_csv(text: &str, reference_count: usize) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut sets: Vec<Vec<usize>> = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Format(format!("ground truth row {}: bad index `{s}`", line + 1)))
            };
            let q = parse(record.get(0).unwrap_or(""))?;
            if q != sets.len() {
                return Err(Error::Format(format!(
                    "ground truth rows must be in query order (expected {}, found {q})",
                    sets.len()
                )));
            }
            let refs = record
                .get(1)
                .unwrap_or("")
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(parse)
                .collect::<Result<Vec<_>>>()?;
            sets.push(refs);
        }
        GroundTruth::new(sets, reference_count)
    }

    pub fn load_csv(path: &Path, reference_count: usize) -> Result<Self> {
        Self::parse_csv(&crate::io::read_to_string(path)?, reference_count)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }
}

/// A method's answer for one query, before scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub query: usize,
    pub predicted: usize,
    pub confidence: f64,
    pub decisions: Vec<UnitDecision>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub query: usize,
    pub predicted: usize,
    pub confidence: f64,
    pub correct: bool,
    pub decisions: Vec<UnitDecision>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub method: String,
    pub accuracy: f64,
    pub correct_count: usize,
    pub query_count: usize,
    pub pr_points: Vec<PrPoint>,
    pub outcomes: Vec<QueryOutcome>,
}

/// Marks each prediction correct or not and computes accuracy. PR points are left empty.
pub fn score_predictions(
    method: &str,
    predictions: Vec<Prediction>,
    ground_truth: &GroundTruth,
) -> Result<EvaluationReport> {
    let mut outcomes = Vec::with_capacity(predictions.len());
    for p in predictions {
        if ground_truth.acceptable(p.query).is_none() {
            return Err(Error::invalid(format!("no ground truth for query {}", p.query)));
        }
        outcomes.push(QueryOutcome {
            query: p.query,
            predicted: p.predicted,
            confidence: p.confidence,
            correct: ground_truth.is_correct(p.query, p.predicted),
            decisions: p.decisions,
        });
    }
    outcomes.sort_by_key(|o| o.query);
    let correct_count = outcomes.iter().filter(|o| o.correct).count();
    let query_count = outcomes.len();
    let accuracy = if query_count == 0 {
        0.0
    } else {
        correct_count as f64 / query_count as f64
    };
    Ok(EvaluationReport {
        method: method.to_owned(),
        accuracy,
        correct_count,
        query_count,
        pr_points: Vec::new(),
        outcomes,
    })
}

/// Sweeps every distinct confidence from high to low; at threshold `t` the
/// attempted queries are those with confidence `>= t`.
pub fn pr_curve(outcomes: &[QueryOutcome]) -> Vec<PrPoint> {
    let total = outcomes.len();
    if total == 0 {
        return Vec::new();
    }
    let mut ranked: Vec<(f64, bool)> = outcomes.iter().map(|o| (o.confidence, o.correct)).collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut points = Vec::new();
    let (mut attempted, mut correct) = (0usize, 0usize);
    let mut i = 0;
    while i < ranked.len() {
        let threshold = ranked[i].0;
        while i < ranked.len() && ranked[i].0 == threshold {
            attempted += 1;
            correct += ranked[i].1 as usize;
            i += 1;
        }
        points.push(PrPoint {
            precision: correct as f64 / attempted as f64,
            recall: correct as f64 / total as f64,
            threshold,
        });
    }
    points
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    SwitchFuse,
    SwitchOnly,
    FuseAll,
    Single(TechniqueId),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::SwitchFuse => f.write_str("switch-fuse"),
            Method::SwitchOnly => f.write_str("switch-only"),
            Method::FuseAll => f.write_str("fuse-all"),
            Method::Single(t) => write!(f, "single:{t}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "switch-fuse" => Ok(Method::SwitchFuse),
            "switch-only" => Ok(Method::SwitchOnly),
            "fuse-all" => Ok(Method::FuseAll),
            _ => match s.strip_prefix("single:") {
                Some(t) if !t.is_empty() => Ok(Method::Single(t.into())),
                _ => Err(Error::invalid(format!("unknown method `{s}`"))),
            },
        }
    }
}

impl Method {
    /// The comparison set: Switch-Fuse, both baselines, then every technique alone.
    pub fn all_for(config: &TripartiteConfig) -> Vec<Method> {
        let mut methods = vec![Method::SwitchFuse, Method::SwitchOnly, Method::FuseAll];
        methods.extend(config.techniques().into_iter().map(Method::Single));
        methods
    }
}

/// Everything a method needs to answer queries.
pub struct EvalContext<'a> {
    pub source: &'a dyn SimilaritySource,
    pub config: &'a TripartiteConfig,
    pub store: Option<&'a CalibrationStore>,
    pub fusion: FusionParams,
}

impl EvalContext<'_> {
    fn store(&self, method: &Method) -> Result<&CalibrationStore> {
        self.store
            .ok_or_else(|| Error::IncompleteCalibration(format!("{method} needs a calibration store")))
    }

    /// Answers a single query with `method`.
    pub fn predict(&self, method: &Method, query: usize) -> Result<Prediction> {
        match method {
            Method::SwitchFuse => {
                let selected = run_tripartite(self.config, query, self.source, self.store(method)?)?;
                let vectors = selected.selected_vectors();
                let (predicted, confidence) =
                    fuse_similarities(vectors.iter().map(|v| v.as_ref()), &self.fusion)?;
                Ok(Prediction {
                    query,
                    predicted,
                    confidence,
                    decisions: selected.decisions,
                })
            }
            Method::SwitchOnly => {
                let pool = [self.config.pooled_unit()];
                let selected = run_units(&pool, self.config.threshold(), query, self.source, self.store(method)?)?;
                let vector = &selected.selected_vectors()[0];
                let best = raw_match_score(vector)?;
                Ok(Prediction {
                    query,
                    predicted: best.best_index,
                    confidence: best.value,
                    decisions: selected.decisions,
                })
            }
            Method::FuseAll => {
                let sims = self
                    .config
                    .techniques()
                    .iter()
                    .map(|t| self.source.similarity(query, t))
                    .collect::<Result<Vec<_>>>()?;
                let (predicted, confidence) = fuse_similarities(&sims, &self.fusion)?;
                Ok(Prediction {
                    query,
                    predicted,
                    confidence,
                    decisions: Vec::new(),
                })
            }
            Method::Single(t) => {
                let best = raw_match_score(&self.source.similarity(query, t)?)?;
                Ok(Prediction {
                    query,
                    predicted: best.best_index,
                    confidence: best.value,
                    decisions: Vec::new(),
                })
            }
        }
    }

    fn check_method(&self, method: &Method) -> Result<()> {
        if let Method::Single(t) = method {
            if !self.source.has_technique(t) {
                return Err(Error::invalid(format!("technique `{t}` is not bound to the dataset")));
            }
        }
        for t in self.config.techniques() {
            if !self.source.has_technique(&t) {
                return Err(Error::UnknownTechnique(t.to_string()));
            }
        }
        Ok(())
    }

    /// Predictions for every query, in query order.
    pub fn predict_all(&self, method: &Method) -> Result<Vec<Prediction>> {
        self.check_method(method)?;
        (0..self.source.query_count())
            .into_par_iter()
            .map(|q| self.predict(method, q))
            .collect()
    }

    pub fn run_method(&self, method: &Method, ground_truth: &GroundTruth) -> Result<EvaluationReport> {
        if ground_truth.query_count() != self.source.query_count() {
            return Err(Error::invalid(format!(
                "ground truth covers {} queries, dataset has {}",
                ground_truth.query_count(),
                self.source.query_count()
            )));
        }
        let predictions = self.predict_all(method)?;
        let mut report = score_predictions(&method.to_string(), predictions, ground_truth)?;
        report.pr_points = pr_curve(&report.outcomes);
        Ok(report)
    }
}

/// Match score and correctness of every configured technique on every query.
pub fn calibration_run(
    source: &dyn SimilaritySource,
    techniques: &[TechniqueId],
    ground_truth: &GroundTruth,
) -> Result<CalibrationRun> {
    if ground_truth.query_count() != source.query_count() {
        return Err(Error::invalid(format!(
            "ground truth covers {} queries, dataset has {}",
            ground_truth.query_count(),
            source.query_count()
        )));
    }
    let mut run = CalibrationRun::new();
    for t in techniques {
        let observations = (0..source.query_count())
            .into_par_iter()
            .map(|q| {
                let best = raw_match_score(&source.similarity(q, t)?)?;
                Ok(Observation {
                    score: best.value,
                    matched: ground_truth.is_correct(q, best.best_index),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        run.insert(t.clone(), observations);
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub method: String,
    pub accuracy: f64,
    pub correct_count: usize,
    /// This method's accuracy minus the reference method's.
    pub accuracy_delta: f64,
    pub correct_delta: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub reference: String,
    pub rows: Vec<ComparisonRow>,
}

/// Tabulates each report against the Switch-Fuse report (or the first one).
pub fn compare(reports: &[EvaluationReport]) -> Result<ComparisonReport> {
    let reference = reports
        .iter()
        .find(|r| r.method == Method::SwitchFuse.to_string())
        .or(reports.first())
        .ok_or_else(|| Error::invalid("no reports to compare"))?;
    let rows = reports
        .iter()
        .map(|r| ComparisonRow {
            method: r.method.clone(),
            accuracy: r.accuracy,
            correct_count: r.correct_count,
            accuracy_delta: r.accuracy - reference.accuracy,
            correct_delta: r.correct_count as i64 - reference.correct_count as i64,
        })
        .collect();
    Ok(ComparisonReport {
        reference: reference.method.clone(),
        rows,
    })
}
