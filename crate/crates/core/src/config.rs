//! Tripartite model configuration.
//!
//! ```toml
//! threshold = 0.5            # optional, strict acceptance: posterior > threshold
//!
//! [[unit]]
//! label = "seasonal"
//! techniques = ["alexnet", "amosnet", "hog"]   # first entry is the unit's primary
//!
//! [[unit]]
//! label = "illumination"
//! techniques = ["hybridnet", "cohog", "calc"]
//!
//! [sources]                  # optional; defaults shown below
//! hog = "builtin:hog"        # built-in ids default to their built-in
//! alexnet = "sfdesc"         # anything else defaults to manifest-bound SFDESC1 files
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::descriptor::BuiltinTechnique;
use crate::error::{Error, Result};
use crate::technique::TechniqueId;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const MAX_UNITS: usize = 8;
pub const MAX_UNIT_TECHNIQUES: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DescriptorSource {
    Builtin(BuiltinTechnique),
    /// Descriptor files bound per technique in the dataset manifest.
    Sfdesc,
}

impl fmt::Display for DescriptorSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DescriptorSource::Builtin(b) => write!(f, "builtin:{b}"),
            DescriptorSource::Sfdesc => f.write_str("sfdesc"),
        }
    }
}

impl FromStr for DescriptorSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.strip_prefix("builtin:") {
            Some(name) => Ok(DescriptorSource::Builtin(name.parse()?)),
            None if s == "sfdesc" => Ok(DescriptorSource::Sfdesc),
            None => Err(Error::Config(format!("unknown descriptor source `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unit {
    pub label: String,
    pub techniques: Vec<TechniqueId>,
}

impl Unit {
    pub fn new(label: impl Into<String>, techniques: &[&str]) -> Self {
        Unit {
            label: label.into(),
            techniques: techniques.iter().map(|&t| t.into()).collect(),
        }
    }

    pub fn primary(&self) -> &TechniqueId {
        &self.techniques[0]
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(rename = "unit", default)]
    units: Vec<Unit>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    sources: BTreeMap<String, String>,
}

/// Ordered units of technique pools plus the acceptance threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteConfig {
    units: Vec<Unit>,
    threshold: f64,
    sources: BTreeMap<TechniqueId, DescriptorSource>,
}

impl TripartiteConfig {
    pub fn new(units: Vec<Unit>, threshold: f64) -> Result<Self> {
        Self::with_sources(units, threshold, BTreeMap::new())
    }

    pub fn with_sources(
        units: Vec<Unit>,
        threshold: f64,
        explicit: BTreeMap<TechniqueId, DescriptorSource>,
    ) -> Result<Self> {
        if units.is_empty() || units.len() > MAX_UNITS {
            return Err(Error::Config(format!(
                "expected 1..={MAX_UNITS} units, found {}",
                units.len()
            )));
        }
        for unit in &units {
            let n = unit.techniques.len();
            if n == 0 || n > MAX_UNIT_TECHNIQUES {
                return Err(Error::Config(format!(
                    "unit `{}` must list 1..={MAX_UNIT_TECHNIQUES} techniques, found {n}",
                    unit.label
                )));
            }
            for (i, t) in unit.techniques.iter().enumerate() {
                if unit.techniques[..i].contains(t) {
                    return Err(Error::Config(format!(
                        "unit `{}` lists `{t}` more than once",
                        unit.label
                    )));
                }
            }
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Config(format!("threshold {threshold} must lie in (0, 1)")));
        }
        let mut sources = BTreeMap::new();
        for unit in &units {
            for t in &unit.techniques {
                let source = match explicit.get(t) {
                    Some(s) => s.clone(),
                    None => match t.as_str().parse::<BuiltinTechnique>() {
                        Ok(b) => DescriptorSource::Builtin(b),
                        Err(_) => DescriptorSource::Sfdesc,
                    },
                };
                sources.insert(t.clone(), source);
            }
        }
        if let Some(extra) = explicit.keys().find(|k| !sources.contains_key(*k)) {
            return Err(Error::Config(format!("source given for `{extra}`, which no unit uses")));
        }
        Ok(TripartiteConfig {
            units,
            threshold,
            sources,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text)?;
        let sources = raw
            .sources
            .into_iter()
            .map(|(k, v)| Ok((TechniqueId::from(k), v.parse()?)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        Self::with_sources(raw.units, raw.threshold.unwrap_or(DEFAULT_THRESHOLD), sources)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            threshold: Some(self.threshold),
            units: self.units.clone(),
            sources: self
                .sources
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        };
        toml::to_string(&raw).expect("config serializes")
    }

    pub fn units(&self) -> &[Unit] {
        &self.units
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Config(format!("threshold {threshold} must lie in (0, 1)")));
        }
        self.threshold = threshold;
        Ok(self)
    }

    pub fn source(&self, technique: &TechniqueId) -> Option<&DescriptorSource> {
        self.sources.get(technique)
    }

    /// Distinct techniques in order of first appearance across units.
    pub fn techniques(&self) -> Vec<TechniqueId> {
        let mut out: Vec<TechniqueId> = Vec::new();
        for t in self.units.iter().flat_map(|u| &u.techniques) {
            if !out.contains(t) {
                out.push(t.clone());
            }
        }
        out
    }

    /// All distinct techniques pooled into a single unit, led by the first unit's primary.
    pub fn pooled_unit(&self) -> Unit {
        Unit {
            label: "pool".into(),
            techniques: self.techniques(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
threshold = 0.6

[[unit]]
label = "seasonal"
techniques = ["alexnet", "amosnet", "hog"]

[[unit]]
label = "day-night"
techniques = ["netvlad", "hog"]

[sources]
amosnet = "builtin:tiny_patch"
"#;

    #[test]
    fn parses_units_threshold_and_sources() {
        let cfg = TripartiteConfig::parse(SAMPLE).unwrap();
        assert_eq!(cfg.units().len(), 2);
        assert_eq!(cfg.threshold(), 0.6);
        assert_eq!(cfg.units()[0].primary().as_str(), "alexnet");
        assert_eq!(
            cfg.source(&"amosnet".into()),
            Some(&DescriptorSource::Builtin(BuiltinTechnique::TinyPatch))
        );
        assert_eq!(cfg.source(&"hog".into()), Some(&DescriptorSource::Builtin(BuiltinTechnique::Hog)));
        assert_eq!(cfg.source(&"netvlad".into()), Some(&DescriptorSource::Sfdesc));
        let names: Vec<_> = cfg.techniques().iter().map(|t| t.to_string()).collect();
        assert_eq!(names, ["alexnet", "amosnet", "hog", "netvlad"]);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = TripartiteConfig::parse(SAMPLE).unwrap();
        assert_eq!(TripartiteConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn default_threshold() {
        let cfg = TripartiteConfig::parse("[[unit]]\nlabel='a'\ntechniques=['x']\n").unwrap();
        assert_eq!(cfg.threshold(), DEFAULT_THRESHOLD);
    }

    #[test]
    fn rejects_invalid_configs() {
        assert!(TripartiteConfig::new(vec![], 0.5).is_err());
        assert!(TripartiteConfig::new(vec![Unit::new("a", &[])], 0.5).is_err());
        assert!(TripartiteConfig::new(vec![Unit::new("a", &["x", "x"])], 0.5).is_err());
        assert!(TripartiteConfig::new(vec![Unit::new("a", &["x"])], 1.0).is_err());
        assert!(TripartiteConfig::new(vec![Unit::new("a", &["x"]); 9], 0.5).is_err());
        assert!(TripartiteConfig::parse("[[unit]]\nlabel='a'\ntechniques=['x']\n[sources]\ny='sfdesc'\n").is_err());
        assert!(TripartiteConfig::parse("[[unit]]\nlabel='a'\ntechniques=['x']\n[sources]\nx='builtin:sift'\n").is_err());
    }
}
