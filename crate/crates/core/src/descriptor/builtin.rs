use std::fmt;
use std::str::FromStr;

use super::image::ImageGray;
use super::{hog, DescriptorVector};
use crate::error::{Error, Result};
use crate::technique::TechniqueId;

pub const MIN_IMAGE_SIDE: usize = 16;
const TINY_SIDE: usize = 16;
const HIST_BINS: usize = 64;

/// Descriptors computed in-process from grayscale images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BuiltinTechnique {
    Hog,
    TinyPatch,
    IntensityHist,
}

impl BuiltinTechnique {
    pub const ALL: [BuiltinTechnique; 3] = [
        BuiltinTechnique::Hog,
        BuiltinTechnique::TinyPatch,
        BuiltinTechnique::IntensityHist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinTechnique::Hog => "hog",
            BuiltinTechnique::TinyPatch => "tiny_patch",
            BuiltinTechnique::IntensityHist => "intensity_hist",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            BuiltinTechnique::Hog => hog::DIMENSION,
            BuiltinTechnique::TinyPatch => TINY_SIDE * TINY_SIDE,
            BuiltinTechnique::IntensityHist => HIST_BINS,
        }
    }

    pub fn compute(self, image: &ImageGray) -> Result<Vec<f64>> {
        if image.width() < MIN_IMAGE_SIDE || image.height() < MIN_IMAGE_SIDE {
            return Err(Error::invalid(format!(
                "image {}x{} is smaller than the {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE} minimum",
                image.width(),
                image.height()
            )));
        }
        Ok(match self {
            BuiltinTechnique::Hog => hog::compute(image),
            BuiltinTechnique::TinyPatch => tiny_patch(image),
            BuiltinTechnique::IntensityHist => intensity_hist(image),
        })
    }
}

impl fmt::Display for BuiltinTechnique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinTechnique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinTechnique::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::UnknownTechnique(s.to_owned()))
    }
}

/// Computes the built-in descriptor named `technique` for `image`.
pub fn compute_descriptor(image: &ImageGray, technique: &str) -> Result<DescriptorVector> {
    let kind: BuiltinTechnique = technique.parse()?;
    DescriptorVector::new(TechniqueId::from(kind.name()), kind.compute(image)?)
}

fn tiny_patch(image: &ImageGray) -> Vec<f64> {
    let small = image.resize_area(TINY_SIDE, TINY_SIDE);
    let mut v: Vec<f64> = small.data().iter().map(|&p| p as f64).collect();
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    // constant images leave only rounding residue after centring
    if norm > 1e-9 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    v
}

fn intensity_hist(image: &ImageGray) -> Vec<f64> {
    let mut hist = vec![0.0f64; HIST_BINS];
    for &p in image.data() {
        let bin = ((p as f64 * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        hist[bin] += 1.0;
    }
    let total = image.data().len() as f64;
    hist.iter_mut().for_each(|c| *c /= total);
    hist
}
