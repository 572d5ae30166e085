//! Binding of techniques to reference/query descriptors, and the per-query
//! similarity cache shared by all units.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use crate::descriptor::{similarity_vector, BuiltinTechnique, DescriptorSet, ImageGray, SimilarityVector};
use crate::error::{Error, Result};
use crate::technique::TechniqueId;

/// Anything that can produce the similarity vector of a query under a technique.
pub trait SimilaritySource: Sync {
    fn query_count(&self) -> usize;
    fn reference_count(&self) -> usize;
    fn has_technique(&self, technique: &TechniqueId) -> bool;
    fn similarity(&self, query: usize, technique: &TechniqueId) -> Result<SimilarityVector>;
}

/// Query side of a bound technique.
#[derive(Debug, Clone)]
pub enum QueryDescriptors {
    Precomputed(DescriptorSet),
    /// Descriptors computed on demand from query images.
    Images {
        kind: BuiltinTechnique,
        images: Arc<Vec<ImageGray>>,
    },
}

#[derive(Debug, Clone)]
pub struct BoundTechnique {
    pub references: DescriptorSet,
    pub queries: QueryDescriptors,
}

impl BoundTechnique {
    fn query_count(&self) -> usize {
        match &self.queries {
            QueryDescriptors::Precomputed(set) => set.len(),
            QueryDescriptors::Images { images, .. } => images.len(),
        }
    }
}

/// Techniques bound to one dataset, all sharing the same reference and query ordering.
#[derive(Debug, Clone, Default)]
pub struct TechniqueBank {
    techniques: BTreeMap<TechniqueId, BoundTechnique>,
    reference_count: usize,
    query_count: usize,
}

impl TechniqueBank {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: TechniqueId, bound: BoundTechnique) -> Result<()> {
        let refs = bound.references.len();
        let queries = bound.query_count();
        if self.techniques.is_empty() {
            self.reference_count = refs;
            self.query_count = queries;
        } else if refs != self.reference_count || queries != self.query_count {
            return Err(Error::invalid(format!(
                "`{id}` binds {refs} references / {queries} queries, expected {} / {}",
                self.reference_count, self.query_count
            )));
        }
        if let QueryDescriptors::Precomputed(q) = &bound.queries {
            if q.dim() != bound.references.dim() {
                return Err(Error::invalid(format!(
                    "`{id}` query dimension {} differs from reference dimension {}",
                    q.dim(),
                    bound.references.dim()
                )));
            }
        }
        let references = bound.references.relabel(id.clone());
        let queries = match bound.queries {
            QueryDescriptors::Precomputed(q) => QueryDescriptors::Precomputed(q.relabel(id.clone())),
            other => other,
        };
        self.techniques.insert(id, BoundTechnique { references, queries });
        Ok(())
    }

    /// Binds a built-in technique by computing reference descriptors now and
    /// query descriptors lazily.
    pub fn insert_builtin(
        &mut self,
        id: TechniqueId,
        kind: BuiltinTechnique,
        references: &[ImageGray],
        queries: Arc<Vec<ImageGray>>,
    ) -> Result<()> {
        let rows = references
            .iter()
            .map(|img| kind.compute(img))
            .collect::<Result<Vec<_>>>()?;
        let values = rows.into_iter().flatten().collect();
        let references = DescriptorSet::new(id.clone(), kind.dimension(), values)?;
        self.insert(
            id,
            BoundTechnique {
                references,
                queries: QueryDescriptors::Images { kind, images: queries },
            },
        )
    }

    pub fn get(&self, id: &TechniqueId) -> Option<&BoundTechnique> {
        self.techniques.get(id)
    }

    pub fn technique_ids(&self) -> impl Iterator<Item = &TechniqueId> {
        self.techniques.keys()
    }
}

impl SimilaritySource for TechniqueBank {
    fn query_count(&self) -> usize {
        self.query_count
    }

    fn reference_count(&self) -> usize {
        self.reference_count
    }

    fn has_technique(&self, technique: &TechniqueId) -> bool {
        self.techniques.contains_key(technique)
    }

    fn similarity(&self, query: usize, technique: &TechniqueId) -> Result<SimilarityVector> {
        let bound = self
            .techniques
            .get(technique)
            .ok_or_else(|| Error::UnknownTechnique(technique.to_string()))?;
        if query >= self.query_count {
            return Err(Error::invalid(format!(
                "query index {query} out of range ({} queries)",
                self.query_count
            )));
        }
        let descriptor = match &bound.queries {
            QueryDescriptors::Precomputed(set) => set.vector(query),
            QueryDescriptors::Images { kind, images } => {
                crate::descriptor::DescriptorVector::new(technique.clone(), kind.compute(&images[query])?)?
            }
        };
        similarity_vector(&descriptor, &bound.references)
    }
}

/// Similarity vectors of one query, computed at most once per technique.
#[derive(Debug, Default)]
pub struct SimilarityCache {
    entries: Mutex<HashMap<TechniqueId, Arc<SimilarityVector>>>,
    computed: AtomicUsize,
}

impl SimilarityCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the cached vector for `technique`, computing it with `compute`
    /// if absent. Concurrent callers may both compute; the first insert wins.
    pub fn get_or_compute(
        &self,
        technique: &TechniqueId,
        compute: impl FnOnce() -> Result<SimilarityVector>,
    ) -> Result<Arc<SimilarityVector>> {
        if let Some(v) = self.entries.lock().unwrap().get(technique) {
            return Ok(Arc::clone(v));
        }
        let fresh = Arc::new(compute()?);
        self.computed.fetch_add(1, Ordering::Relaxed);
        let mut entries = self.entries.lock().unwrap();
        Ok(Arc::clone(entries.entry(technique.clone()).or_insert(fresh)))
    }

    /// Number of similarity vectors actually computed through this cache.
    pub fn computations(&self) -> usize {
        self.computed.load(Ordering::Relaxed)
    }

    pub fn into_map(self) -> BTreeMap<TechniqueId, Arc<SimilarityVector>> {
        self.entries.into_inner().unwrap().into_iter().collect()
    }
}
