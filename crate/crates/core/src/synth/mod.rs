//! Seeded synthetic datasets with controllable per-technique correctness.
//!
//! Score mode plants, for every query and technique, one maximum similarity at
//! either the true reference (when the technique is "correct" on that query)
//! or at a wrong reference, over a background that always stays below it.
//! Which techniques are correct together is governed by a Gaussian copula, so
//! pairwise joint-correct rates can be designed.
//!
//! The planted scores are exported as descriptors: reference `j` is the unit
//! vector `e_j` in `R + 1` dimensions and a query is `(s_1, …, s_R, t)` with
//! `t = sqrt(R - Σ s²)`, so the cosine similarity to reference `j` is
//! `s_j / √R` up to `f32` rounding. In-memory datasets go through the same
//! descriptors, which keeps library and CLI runs bit-identical.
//!
//! Randomness comes from ChaCha8 with one stream per `(query, slot)`, where the
//! slot is a technique index or one of two per-query slots. Generation is
//! parallel over queries and independent of scheduling.

mod copula;
pub mod images;

pub use copula::{bivariate_normal_cdf, correlation_for_overlap, normal_cdf, threshold_for_rate};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DescriptorSource, TripartiteConfig, Unit};
use crate::descriptor::{save_descriptor_set, DescriptorSet, SimilarityVector};
use crate::engine::{BoundTechnique, QueryDescriptors, SimilaritySource, TechniqueBank};
use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::io::write_atomic;
use crate::manifest::{DatasetManifest, DescriptorBinding, GroundTruthSource};
use crate::technique::TechniqueId;

/// Minimum distance between a planted maximum and any background entry.
pub const PLANT_GAP: f64 = 1e-3;
const QUERY_SLOT: u64 = 0xFFFF;
const BACKGROUND_SLOT: u64 = 0xFFFE;
const SPLIT_STREAM: u64 = u64::MAX;
const MAX_TECHNIQUES: usize = 0xFFF0;

/// RNG for one `(query, slot)` pair under `seed`.
pub(crate) fn stream_rng(seed: u64, query: u64, slot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((query << 16) | slot);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn default_fraction() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TechniqueProfile {
    pub id: TechniqueId,
    pub correct_rate: f64,
    pub mean_m: f64,
    pub sd_m: f64,
    pub mean_mm: f64,
    pub sd_mm: f64,
    /// Probability that this technique and the named one are both correct.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overlaps: BTreeMap<TechniqueId, f64>,
}

impl TechniqueProfile {
    pub fn new(id: &str, correct_rate: f64, matched: (f64, f64), mismatched: (f64, f64)) -> Self {
        TechniqueProfile {
            id: id.into(),
            correct_rate,
            mean_m: matched.0,
            sd_m: matched.1,
            mean_mm: mismatched.0,
            sd_mm: mismatched.1,
            overlaps: BTreeMap::new(),
        }
    }

    pub fn with_overlap(mut self, other: &str, overlap: f64) -> Self {
        self.overlaps.insert(other.into(), overlap);
        self
    }
}

/// Non-planted entries: `mean + sd·(√shared·G_j + √(1-shared)·E_j)` with `G`
/// common to all techniques of a query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackgroundModel {
    pub mean: f64,
    pub sd: f64,
    #[serde(default)]
    pub shared: f64,
}

impl Default for BackgroundModel {
    fn default() -> Self {
        BackgroundModel {
            mean: 0.0,
            sd: 0.2,
            shared: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub query_count: usize,
    pub reference_count: usize,
    #[serde(default = "default_fraction")]
    pub calibration_fraction: f64,
    /// Probability that a wrong technique lands on the query's shared
    /// confuser (itself a uniformly drawn wrong reference) rather than on an
    /// independently drawn wrong reference.
    #[serde(default)]
    pub aliasing: f64,
    #[serde(default)]
    pub background: BackgroundModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(rename = "technique")]
    pub techniques: Vec<TechniqueProfile>,
    #[serde(rename = "unit", default, skip_serializing_if = "Vec::is_empty")]
    pub units: Vec<Unit>,
}

fn spec_err(msg: impl Into<String>) -> Error {
    Error::InvalidSpec(msg.into())
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl SynthSpec {
    pub fn new(query_count: usize, reference_count: usize, techniques: Vec<TechniqueProfile>) -> Self {
        SynthSpec {
            query_count,
            reference_count,
            calibration_fraction: default_fraction(),
            aliasing: 0.0,
            background: BackgroundModel::default(),
            threshold: None,
            techniques,
            units: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let spec: SynthSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("synth spec serializes")
    }

    fn index_of(&self, id: &TechniqueId) -> Option<usize> {
        self.techniques.iter().position(|p| &p.id == id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.query_count < 2 || self.reference_count < 2 {
            return Err(spec_err("query_count and reference_count must both be at least 2"));
        }
        if self.techniques.is_empty() || self.techniques.len() > MAX_TECHNIQUES {
            return Err(spec_err(format!("need 1..={MAX_TECHNIQUES} technique profiles")));
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(spec_err("calibration_fraction must lie in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.aliasing) {
            return Err(spec_err("aliasing must lie in [0, 1]"));
        }
        let bg = &self.background;
        if !(bg.sd > 0.0 && bg.mean.is_finite() && (0.0..=1.0).contains(&bg.shared)) {
            return Err(spec_err("background needs sd > 0 and shared in [0, 1]"));
        }
        for (i, p) in self.techniques.iter().enumerate() {
            if !valid_id(p.id.as_str()) {
                return Err(spec_err(format!(
                    "technique id `{}` must be non-empty ASCII letters, digits, `_` or `-`",
                    p.id
                )));
            }
            if self.techniques[..i].iter().any(|q| q.id == p.id) {
                return Err(spec_err(format!("technique `{}` listed twice", p.id)));
            }
            if !(0.0..=1.0).contains(&p.correct_rate) {
                return Err(spec_err(format!("`{}`: correct_rate must lie in [0, 1]", p.id)));
            }
            if !(p.sd_m > 0.0 && p.sd_mm > 0.0 && p.mean_m.is_finite() && p.mean_mm.is_finite()) {
                return Err(spec_err(format!("`{}`: score distributions need finite means and sd > 0", p.id)));
            }
            for (other, &overlap) in &p.overlaps {
                let j = self
                    .index_of(other)
                    .ok_or_else(|| spec_err(format!("`{}` overlaps unknown technique `{other}`", p.id)))?;
                if j == i {
                    return Err(spec_err(format!("`{}` lists an overlap with itself", p.id)));
                }
                let q = &self.techniques[j];
                if overlap > p.correct_rate.min(q.correct_rate) + 1e-12
                    || overlap < (p.correct_rate + q.correct_rate - 1.0).max(0.0) - 1e-12
                {
                    return Err(spec_err(format!(
                        "overlap {overlap} of `{}` and `{other}` is impossible for rates {} and {}",
                        p.id, p.correct_rate, q.correct_rate
                    )));
                }
                if let Some(&back) = q.overlaps.get(&p.id) {
                    if (back - overlap).abs() > 1e-12 {
                        return Err(spec_err(format!(
                            "overlap of `{}` and `{other}` is given twice with different values",
                            p.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Latent correlation matrix of the copula.
    fn latent_correlations(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.techniques.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, p) in self.techniques.iter().enumerate() {
            m[i][i] = 1.0;
            for (other, &overlap) in &p.overlaps {
                let j = self.index_of(other).expect("validated");
                let rho = correlation_for_overlap(p.correct_rate, self.techniques[j].correct_rate, overlap)?;
                m[i][j] = rho;
                m[j][i] = rho;
            }
        }
        Ok(m)
    }

    /// The tripartite configuration the exported dataset is meant to be run
    /// with: the spec's units, or one unit of every technique.
    pub fn config(&self) -> Result<TripartiteConfig> {
        let units = if self.units.is_empty() {
            let ids: Vec<&str> = self.techniques.iter().map(|p| p.id.as_str()).collect();
            vec![Unit::new("all", &ids)]
        } else {
            self.units.clone()
        };
        let sources = units
            .iter()
            .flat_map(|u| u.techniques.iter())
            .map(|t| (t.clone(), DescriptorSource::Sfdesc))
            .collect();
        TripartiteConfig::with_sources(units, self.threshold.unwrap_or(0.5), sources)
    }
}

/// A synthetic spec file: `mode = "scores"` (the default) or `mode = "images"`,
/// followed by the fields of [`SynthSpec`] or [`images::ImageSynthSpec`].
#[derive(Debug, Clone, PartialEq)]
pub enum SynthFile {
    Scores(SynthSpec),
    Images(images::ImageSynthSpec),
}

impl SynthFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text)?;
        let mode = match table.remove("mode") {
            None => "scores".to_string(),
            Some(toml::Value::String(m)) => m,
            Some(other) => return Err(spec_err(format!("mode must be a string, found {other}"))),
        };
        let value = toml::Value::Table(table);
        match mode.as_str() {
            "scores" => {
                let spec: SynthSpec = value.try_into()?;
                spec.validate()?;
                Ok(SynthFile::Scores(spec))
            }
            "images" => {
                let spec: images::ImageSynthSpec = value.try_into()?;
                spec.validate()?;
                Ok(SynthFile::Images(spec))
            }
            other => Err(spec_err(format!("unknown mode `{other}` (expected `scores` or `images`)"))),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&crate::io::read_to_string(path)?)
    }

    pub fn export(&self, seed: u64, dir: &Path) -> Result<ExportedSplit> {
        match self {
            SynthFile::Scores(spec) => export_split(spec, seed, dir),
            SynthFile::Images(spec) => images::export_image_split(spec, seed, dir),
        }
    }
}

/// Per-query outcome of the generator before encoding.
struct QueryDraw {
    true_ref: usize,
    correct: Vec<bool>,
    rows: Vec<Vec<f32>>,
}

fn draw_query(spec: &SynthSpec, chol: &[Vec<f64>], thresholds: &[f64], seed: u64, q: usize) -> QueryDraw {
    let r = spec.reference_count;
    let n = spec.techniques.len();
    let mut rng = stream_rng(seed, q as u64, QUERY_SLOT);
    let true_ref = rng.random_range(0..r);
    let wrong = |rng: &mut ChaCha8Rng| {
        let k = rng.random_range(0..r - 1);
        if k >= true_ref { k + 1 } else { k }
    };
    let confuser = wrong(&mut rng);
    let z: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let correct: Vec<bool> = (0..n)
        .map(|i| {
            let x: f64 = (0..=i).map(|k| chol[i][k] * z[k]).sum();
            x < thresholds[i]
        })
        .collect();

    let bg = &spec.background;
    let mut shared_rng = stream_rng(seed, q as u64, BACKGROUND_SLOT);
    let shared: Vec<f64> = (0..r).map(|_| normal(&mut shared_rng)).collect();
    let (ws, wi) = (bg.shared.sqrt(), (1.0 - bg.shared).sqrt());

    let rows = spec
        .techniques
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut rng = stream_rng(seed, q as u64, i as u64);
            let (location, mean, sd) = if correct[i] {
                (true_ref, p.mean_m, p.sd_m)
            } else if rng.random::<f64>() < spec.aliasing {
                (confuser, p.mean_mm, p.sd_mm)
            } else {
                (wrong(&mut rng), p.mean_mm, p.sd_mm)
            };
            let planted = (mean + sd * normal(&mut rng)).clamp(-1.0 + PLANT_GAP, 1.0);
            let mut scores: Vec<f64> = shared
                .iter()
                .map(|g| {
                    let e = normal(&mut rng);
                    (bg.mean + bg.sd * (ws * g + wi * e)).clamp(-1.0, planted - PLANT_GAP)
                })
                .collect();
            scores[location] = planted;
            encode_query(&scores)
        })
        .collect();
    QueryDraw { true_ref, correct, rows }
}

/// `(s_1, …, s_R, t)` in `f32` with `t` completing the squared norm to `R`.
fn encode_query(scores: &[f64]) -> Vec<f32> {
    let mut row: Vec<f32> = scores.iter().map(|&s| s as f32).collect();
    let sum_sq: f64 = row.iter().map(|&s| (s as f64) * (s as f64)).sum();
    row.push((scores.len() as f64 - sum_sq).max(0.0).sqrt() as f32);
    row
}

fn one_hot_references(id: &TechniqueId, r: usize) -> Result<DescriptorSet> {
    let dim = r + 1;
    let mut values = vec![0.0; r * dim];
    for j in 0..r {
        values[j * dim + j] = 1.0;
    }
    DescriptorSet::new(id.clone(), dim, values)
}

/// A generated score-mode dataset, bound and ready to evaluate.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    spec: SynthSpec,
    seed: u64,
    bank: TechniqueBank,
    ground_truth: GroundTruth,
    true_refs: Vec<usize>,
    /// `correct[query][technique]`, techniques in spec order.
    correct: Vec<Vec<bool>>,
    /// Indices of these queries in the dataset they were generated in.
    source_queries: Vec<usize>,
}

pub fn generate(spec: &SynthSpec, seed: u64) -> Result<SyntheticDataset> {
    spec.validate()?;
    let chol = copula::cholesky(&spec.latent_correlations()?)?;
    let thresholds: Vec<f64> = spec.techniques.iter().map(|p| threshold_for_rate(p.correct_rate)).collect();
    let draws: Vec<QueryDraw> = (0..spec.query_count)
        .into_par_iter()
        .map(|q| draw_query(spec, &chol, &thresholds, seed, q))
        .collect();

    let mut bank = TechniqueBank::new();
    for (i, p) in spec.techniques.iter().enumerate() {
        let values = draws.iter().flat_map(|d| d.rows[i].iter().map(|&v| v as f64)).collect();
        let queries = DescriptorSet::new(p.id.clone(), spec.reference_count + 1, values)?;
        bank.insert(
            p.id.clone(),
            BoundTechnique {
                references: one_hot_references(&p.id, spec.reference_count)?,
                queries: QueryDescriptors::Precomputed(queries),
            },
        )?;
    }
    let true_refs: Vec<usize> = draws.iter().map(|d| d.true_ref).collect();
    let ground_truth = GroundTruth::new(true_refs.iter().map(|&r| vec![r]).collect(), spec.reference_count)?;
    Ok(SyntheticDataset {
        spec: spec.clone(),
        seed,
        bank,
        ground_truth,
        true_refs,
        correct: draws.into_iter().map(|d| d.correct).collect(),
        source_queries: (0..spec.query_count).collect(),
    })
}

impl SyntheticDataset {
    pub fn spec(&self) -> &SynthSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn bank(&self) -> &TechniqueBank {
        &self.bank
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.ground_truth
    }

    pub fn true_reference(&self, query: usize) -> usize {
        self.true_refs[query]
    }

    /// Whether the generator made `technique` correct on `query`.
    pub fn is_correct(&self, query: usize, technique: &TechniqueId) -> Option<bool> {
        let i = self.spec.index_of(technique)?;
        self.correct.get(query).map(|row| row[i])
    }

    pub fn source_queries(&self) -> &[usize] {
        &self.source_queries
    }

    pub fn config(&self) -> Result<TripartiteConfig> {
        self.spec.config()
    }

    /// The listed queries, in the given order.
    pub fn subset(&self, queries: &[usize]) -> Result<SyntheticDataset> {
        let mut bank = TechniqueBank::new();
        for p in &self.spec.techniques {
            let bound = self.bank.get(&p.id).expect("generated technique");
            let QueryDescriptors::Precomputed(set) = &bound.queries else {
                unreachable!("synthetic queries are precomputed")
            };
            bank.insert(
                p.id.clone(),
                BoundTechnique {
                    references: bound.references.clone(),
                    queries: QueryDescriptors::Precomputed(set.select(queries)?),
                },
            )?;
        }
        Ok(SyntheticDataset {
            spec: self.spec.clone(),
            seed: self.seed,
            bank,
            ground_truth: self.ground_truth.select(queries)?,
            true_refs: queries.iter().map(|&q| self.true_refs[q]).collect(),
            correct: queries.iter().map(|&q| self.correct[q].clone()).collect(),
            source_queries: queries.iter().map(|&q| self.source_queries[q]).collect(),
        })
    }

    /// Writes `refs_<t>.sfdesc`, `<name>_<t>.sfdesc`, `<name>_gt.csv` and the
    /// manifest `<name>.toml` into `dir`; returns the manifest path.
    pub fn export(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let mut descriptors = BTreeMap::new();
        for p in &self.spec.techniques {
            let bound = self.bank.get(&p.id).expect("generated technique");
            let QueryDescriptors::Precomputed(queries) = &bound.queries else {
                unreachable!("synthetic queries are precomputed")
            };
            let refs = PathBuf::from(format!("refs_{}.sfdesc", p.id));
            let qs = PathBuf::from(format!("{name}_{}.sfdesc", p.id));
            save_descriptor_set(&bound.references, &dir.join(&refs))?;
            save_descriptor_set(queries, &dir.join(&qs))?;
            descriptors.insert(p.id.clone(), DescriptorBinding { references: refs, queries: qs });
        }
        let gt = PathBuf::from(format!("{name}_gt.csv"));
        self.ground_truth.save_csv(&dir.join(&gt))?;
        let manifest = DatasetManifest {
            name: name.to_string(),
            reference_images: Vec::new(),
            query_images: Vec::new(),
            descriptors,
            ground_truth: GroundTruthSource::File(gt),
            base_dir: dir.to_path_buf(),
        };
        let path = dir.join(format!("{name}.toml"));
        write_atomic(&path, manifest.to_toml().as_bytes())?;
        Ok(path)
    }
}

impl SimilaritySource for SyntheticDataset {
    fn query_count(&self) -> usize {
        self.bank.query_count()
    }

    fn reference_count(&self) -> usize {
        self.bank.reference_count()
    }

    fn has_technique(&self, technique: &TechniqueId) -> bool {
        self.bank.has_technique(technique)
    }

    fn similarity(&self, query: usize, technique: &TechniqueId) -> Result<SimilarityVector> {
        self.bank.similarity(query, technique)
    }
}

/// Seeded disjoint split of `0..query_count`: the calibration part holds
/// `round(fraction·n)` queries (at least one, leaving at least one), both
/// parts in ascending order.
pub fn split_indices(query_count: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if query_count < 2 {
        return Err(Error::invalid("need at least 2 queries to split"));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid(format!("split fraction {fraction} must lie in (0, 1)")));
    }
    let k = ((fraction * query_count as f64).round() as usize).clamp(1, query_count - 1);
    let mut order: Vec<usize> = (0..query_count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SPLIT_STREAM);
    order.shuffle(&mut rng);
    let (mut cal, mut eval) = (order[..k].to_vec(), order[k..].to_vec());
    cal.sort_unstable();
    eval.sort_unstable();
    Ok((cal, eval))
}

pub fn split_calibration_eval(
    dataset: &SyntheticDataset,
    fraction: f64,
    seed: u64,
) -> Result<(SyntheticDataset, SyntheticDataset)> {
    let (cal, eval) = split_indices(dataset.query_count(), fraction, seed)?;
    Ok((dataset.subset(&cal)?, dataset.subset(&eval)?))
}

/// Files written by [`export_split`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportedSplit {
    pub calibration_manifest: PathBuf,
    pub evaluation_manifest: PathBuf,
    pub config: PathBuf,
}

/// Generates, splits by the spec's calibration fraction, and writes both
/// halves plus `config.toml` into `dir`.
pub fn export_split(spec: &SynthSpec, seed: u64, dir: &Path) -> Result<ExportedSplit> {
    let dataset = generate(spec, seed)?;
    let config = dataset.config()?;
    let (cal, eval) = split_calibration_eval(&dataset, spec.calibration_fraction, seed)?;
    let calibration_manifest = cal.export(dir, "calibration")?;
    let evaluation_manifest = eval.export(dir, "evaluation")?;
    let config_path = dir.join("config.toml");
    write_atomic(&config_path, config.to_toml().as_bytes())?;
    Ok(ExportedSplit {
        calibration_manifest,
        evaluation_manifest,
        config: config_path,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::raw_match_score;

    fn profile(id: &str, rate: f64) -> TechniqueProfile {
        TechniqueProfile::new(id, rate, (0.8, 0.05), (0.6, 0.05))
    }

    fn argmax(ds: &SyntheticDataset, q: usize, t: &str) -> usize {
        raw_match_score(&ds.similarity(q, &t.into()).unwrap()).unwrap().best_index
    }

    #[test]
    fn forced_rates() {
        let spec = SynthSpec::new(300, 20, vec![profile("always", 1.0), profile("never", 0.0)]);
        let ds = generate(&spec, 7).unwrap();
        for q in 0..300 {
            assert_eq!(argmax(&ds, q, "always"), ds.true_reference(q));
            assert_ne!(argmax(&ds, q, "never"), ds.true_reference(q));
        }
    }

    #[test]
    fn joint_correct_frequency_follows_overlap() {
        let spec = SynthSpec::new(
            10_000,
            10,
            vec![profile("a", 0.6).with_overlap("b", 0.36), profile("b", 0.6)],
        );
        let ds = generate(&spec, 2024).unwrap();
        let both = (0..10_000)
            .filter(|&q| ds.is_correct(q, &"a".into()).unwrap() && ds.is_correct(q, &"b".into()).unwrap())
            .count();
        assert!((both as f64 / 10_000.0 - 0.36).abs() <= 0.02, "{both}");
    }

    #[test]
    fn empirical_rates_and_argmax_agree_with_flags() {
        let spec = SynthSpec::new(
            5_000,
            50,
            vec![
                profile("a", 0.45).with_overlap("b", 0.15),
                profile("b", 0.65),
                profile("c", 0.55).with_overlap("a", 0.3),
            ],
        );
        let ds = generate(&spec, 11).unwrap();
        for p in &spec.techniques {
            let mut hits = 0;
            for q in 0..5_000 {
                let flag = ds.is_correct(q, &p.id).unwrap();
                assert_eq!(argmax(&ds, q, p.id.as_str()) == ds.true_reference(q), flag);
                hits += flag as usize;
            }
            assert!((hits as f64 / 5_000.0 - p.correct_rate).abs() <= 0.02, "{}: {hits}", p.id);
        }
    }

    #[test]
    fn reproducible_and_order_independent() {
        let spec = SynthSpec::new(200, 30, vec![profile("a", 0.5).with_overlap("b", 0.2), profile("b", 0.5)]);
        let a = generate(&spec, 5).unwrap();
        let b = generate(&spec, 5).unwrap();
        let c = generate(&spec, 6).unwrap();
        let row = |d: &SyntheticDataset, q| d.similarity(q, &"a".into()).unwrap();
        for q in 0..200 {
            assert_eq!(row(&a, q), row(&b, q));
        }
        assert!((0..200).any(|q| row(&a, q) != row(&c, q)));

        let big = SynthSpec { query_count: 400, ..spec.clone() };
        let d = generate(&big, 5).unwrap();
        assert_eq!(row(&d, 17), row(&a, 17));
    }

    #[test]
    fn infeasible_overlaps_are_rejected() {
        let too_big = SynthSpec::new(10, 5, vec![profile("a", 0.5).with_overlap("b", 0.6), profile("b", 0.7)]);
        assert!(matches!(generate(&too_big, 1), Err(Error::InvalidSpec(_))));

        // Pairwise feasible, jointly not: three techniques all strongly anti-correlated.
        let triangle = SynthSpec::new(
            10,
            5,
            vec![
                profile("a", 0.5).with_overlap("b", 0.02).with_overlap("c", 0.02),
                profile("b", 0.5).with_overlap("c", 0.02),
                profile("c", 0.5),
            ],
        );
        assert!(matches!(generate(&triangle, 1), Err(Error::InvalidSpec(_))));

        let conflicting = SynthSpec::new(
            10,
            5,
            vec![profile("a", 0.5).with_overlap("b", 0.2), profile("b", 0.5).with_overlap("a", 0.3)],
        );
        assert!(matches!(generate(&conflicting, 1), Err(Error::InvalidSpec(_))));
        assert!(matches!(generate(&SynthSpec::new(1, 5, vec![profile("a", 0.5)]), 1), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn split_is_disjoint_and_seeded() {
        let (cal, eval) = split_indices(101, 0.5, 3).unwrap();
        assert_eq!(cal.len(), 51);
        let mut all: Vec<usize> = cal.iter().chain(&eval).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
        assert_eq!(split_indices(101, 0.5, 3).unwrap(), (cal.clone(), eval));
        assert_ne!(split_indices(101, 0.5, 4).unwrap().0, cal);
        assert!(split_indices(1, 0.5, 3).is_err());
    }

    #[test]
    fn calibrated_prior_tracks_rate() {
        use crate::calibration::{calibrate_technique, CalibrationParams};
        use crate::evaluation::calibration_run;
        let spec = SynthSpec::new(4_000, 40, vec![profile("a", 0.45), profile("b", 0.62)]);
        let ds = generate(&spec, 99).unwrap();
        let (cal, _) = split_calibration_eval(&ds, 0.5, 99).unwrap();
        let ids: Vec<TechniqueId> = vec!["a".into(), "b".into()];
        let run = calibration_run(&cal, &ids, cal.ground_truth()).unwrap();
        for p in &spec.techniques {
            let c = calibrate_technique(p.id.clone(), run.get(&p.id).unwrap(), &CalibrationParams::default()).unwrap();
            assert!((c.prior_match - p.correct_rate).abs() <= 0.05, "{}: {}", p.id, c.prior_match);
        }
    }

    #[test]
    fn spec_toml_round_trip_and_export() {
        let mut spec = SynthSpec::new(
            20,
            6,
            vec![profile("a", 0.5).with_overlap("b", 0.3), profile("b", 0.5)],
        );
        spec.units = vec![Unit::new("u", &["a", "b"])];
        assert_eq!(SynthSpec::parse(&spec.to_toml()).unwrap(), spec);

        let dir = tempfile::tempdir().unwrap();
        let files = export_split(&spec, 8, dir.path()).unwrap();
        let config = TripartiteConfig::load(&files.config).unwrap();
        let manifest = DatasetManifest::load(&files.evaluation_manifest).unwrap();
        let (bank, gt) = manifest.bind(&config).unwrap();

        let ds = generate(&spec, 8).unwrap();
        let (_, eval) = split_calibration_eval(&ds, 0.5, 8).unwrap();
        assert_eq!(&gt, eval.ground_truth());
        for q in 0..eval.query_count() {
            assert_eq!(bank.similarity(q, &"b".into()).unwrap(), eval.similarity(q, &"b".into()).unwrap());
        }
    }
}
