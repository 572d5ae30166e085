//! Dataset manifests: which reference and query inputs a run uses, and where
//! ground truth comes from.
//!
//! ```toml
//! name = "gardens-day-vs-night"
//! reference_images = ["refs/0000.pgm", "refs/0001.pgm"]   # needed by built-in techniques
//! query_images = ["queries/0000.pgm", "queries/0001.pgm"]
//!
//! [descriptors.netvlad]                                   # needed by sfdesc techniques
//! references = "netvlad_refs.sfdesc"
//! queries = "netvlad_queries.sfdesc"
//!
//! [ground_truth]
//! file = "gt.csv"        # explicit sets; or `tolerance = 1` for aligned traverses
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::config::{DescriptorSource, TripartiteConfig};
use crate::descriptor::{load_descriptor_set, ImageGray};
use crate::engine::{BoundTechnique, QueryDescriptors, TechniqueBank};
use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::technique::TechniqueId;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescriptorBinding {
    pub references: PathBuf,
    pub queries: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroundTruthSource {
    File(PathBuf),
    Tolerance(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reference_images: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub query_images: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub descriptors: BTreeMap<TechniqueId, DescriptorBinding>,
    pub ground_truth: GroundTruthSource,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut manifest: DatasetManifest = toml::from_str(text)?;
        manifest.base_dir = base_dir.to_path_buf();
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn load_images(&self, list: &[PathBuf], what: &str) -> Result<Vec<ImageGray>> {
        if list.is_empty() {
            return Err(Error::Config(format!(
                "manifest `{}` lists no {what} images but a built-in technique needs them",
                self.name
            )));
        }
        list.iter().map(|p| ImageGray::read_pgm(&self.resolve(p))).collect()
    }

    /// Loads every technique `config` uses into a bank, plus the ground truth.
    pub fn bind(&self, config: &TripartiteConfig) -> Result<(TechniqueBank, GroundTruth)> {
        let mut bank = TechniqueBank::new();
        let mut images: Option<(Vec<ImageGray>, Arc<Vec<ImageGray>>)> = None;
        for t in config.techniques() {
            match config.source(&t).expect("configured technique has a source") {
                DescriptorSource::Builtin(kind) => {
                    if images.is_none() {
                        let refs = self.load_images(&self.reference_images, "reference")?;
                        let queries = self.load_images(&self.query_images, "query")?;
                        images = Some((refs, Arc::new(queries)));
                    }
                    let (refs, queries) = images.as_ref().unwrap();
                    bank.insert_builtin(t.clone(), *kind, refs, Arc::clone(queries))?;
                }
                DescriptorSource::Sfdesc => {
                    let binding = self.descriptors.get(&t).ok_or_else(|| {
                        Error::Config(format!(
                            "manifest `{}` has no descriptor files for `{t}`",
                            self.name
                        ))
                    })?;
                    let references = load_descriptor_set(&self.resolve(&binding.references), t.clone())?;
                    let queries = load_descriptor_set(&self.resolve(&binding.queries), t.clone())?;
                    bank.insert(
                        t.clone(),
                        BoundTechnique {
                            references,
                            queries: QueryDescriptors::Precomputed(queries),
                        },
                    )?;
                }
            }
        }
        use crate::engine::SimilaritySource;
        let ground_truth = match &self.ground_truth {
            GroundTruthSource::File(p) => GroundTruth::load_csv(&self.resolve(p), bank.reference_count())?,
            GroundTruthSource::Tolerance(k) => {
                GroundTruth::from_tolerance(bank.query_count(), bank.reference_count(), *k)?
            }
        };
        if ground_truth.query_count() != bank.query_count() {
            return Err(Error::invalid(format!(
                "ground truth covers {} queries, manifest `{}` has {}",
                ground_truth.query_count(),
                self.name,
                bank.query_count()
            )));
        }
        Ok((bank, ground_truth))
    }
}
