//! Image-mode synthetic datasets: patterned 64×64 places and perturbed query
//! views, for exercising the built-in descriptors end to end.
//!
//! Every query shows its place under one perturbation (brightness change,
//! blur, or sensor noise), chosen round-robin, plus a small shift. The
//! generated configuration has one unit per perturbation, each led by the
//! built-in technique that copes best with it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{split_indices, stream_rng};
use crate::config::{TripartiteConfig, Unit};
use crate::descriptor::ImageGray;
use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::io::write_atomic;
use crate::manifest::{DatasetManifest, GroundTruthSource};

pub const IMAGE_SIZE: usize = 64;
const PLACE_SLOT: u64 = 0xFFFD;
const VIEW_SLOT: u64 = 0xFFFC;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    Brightness,
    Blur,
    Noise,
}

impl Perturbation {
    pub const ALL: [Perturbation; 3] = [Perturbation::Brightness, Perturbation::Blur, Perturbation::Noise];

    pub fn label(self) -> &'static str {
        match self {
            Perturbation::Brightness => "brightness",
            Perturbation::Blur => "blur",
            Perturbation::Noise => "noise",
        }
    }

    fn unit_techniques(self) -> [&'static str; 3] {
        match self {
            Perturbation::Brightness => ["hog", "tiny_patch", "intensity_hist"],
            Perturbation::Blur => ["tiny_patch", "intensity_hist", "hog"],
            Perturbation::Noise => ["intensity_hist", "tiny_patch", "hog"],
        }
    }
}

fn default_fraction() -> f64 {
    0.5
}

fn default_noise() -> f64 {
    0.02
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSynthSpec {
    pub query_count: usize,
    pub reference_count: usize,
    #[serde(default = "default_fraction")]
    pub calibration_fraction: f64,
    /// Standard deviation of the pixel noise added to every query view.
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

impl ImageSynthSpec {
    pub fn new(query_count: usize, reference_count: usize) -> Self {
        ImageSynthSpec {
            query_count,
            reference_count,
            calibration_fraction: default_fraction(),
            noise: default_noise(),
            threshold: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.query_count < 2 || self.reference_count < 2 {
            return Err(Error::InvalidSpec(
                "query_count and reference_count must both be at least 2".into(),
            ));
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return Err(Error::InvalidSpec("calibration_fraction must lie in (0, 1)".into()));
        }
        if !(self.noise >= 0.0 && self.noise < 1.0) {
            return Err(Error::InvalidSpec("noise must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn config(&self) -> Result<TripartiteConfig> {
        let units = Perturbation::ALL
            .iter()
            .map(|p| Unit::new(p.label(), &p.unit_techniques()))
            .collect();
        TripartiteConfig::with_sources(units, self.threshold.unwrap_or(0.5), BTreeMap::new())
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f32 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}

/// Sum of random gratings and blocks, clamped to `[0, 1]`.
fn place_image(rng: &mut ChaCha8Rng) -> ImageGray {
    let gratings: Vec<(f32, f32, f32, f32)> = (0..3)
        .map(|_| {
            let theta = rng.random_range(0.0..std::f32::consts::PI);
            let cycles = rng.random_range(1.5f32..6.0);
            let phase = rng.random_range(0.0..std::f32::consts::TAU);
            let amp = rng.random_range(0.08f32..0.2);
            (theta, cycles, phase, amp)
        })
        .collect();
    let blocks: Vec<(usize, usize, usize, usize, f32)> = (0..3)
        .map(|_| {
            let (x, y) = (rng.random_range(0..48), rng.random_range(0..48));
            let (w, h) = (rng.random_range(6..24), rng.random_range(6..24));
            (x, y, w, h, rng.random_range(-0.3f32..0.3))
        })
        .collect();
    let size = IMAGE_SIZE as f32;
    ImageGray::from_fn(IMAGE_SIZE, IMAGE_SIZE, |x, y| {
        let (xf, yf) = (x as f32 / size, y as f32 / size);
        let mut v = 0.5;
        for &(theta, cycles, phase, amp) in &gratings {
            let u = xf * theta.cos() + yf * theta.sin();
            v += amp * (std::f32::consts::TAU * cycles * u + phase).sin();
        }
        for &(bx, by, w, h, delta) in &blocks {
            if x >= bx && x < bx + w && y >= by && y < by + h {
                v += delta;
            }
        }
        v
    })
    .expect("fixed image size")
}

fn shifted(img: &ImageGray, dx: isize, dy: isize) -> ImageGray {
    let (w, h) = (img.width() as isize, img.height() as isize);
    ImageGray::from_fn(img.width(), img.height(), |x, y| {
        let sx = (x as isize - dx).clamp(0, w - 1) as usize;
        let sy = (y as isize - dy).clamp(0, h - 1) as usize;
        img.get(sx, sy)
    })
    .expect("same size")
}

fn box_blur(img: &ImageGray, radius: usize) -> ImageGray {
    let (w, h) = (img.width(), img.height());
    let r = radius as isize;
    ImageGray::from_fn(w, h, |x, y| {
        let mut sum = 0.0;
        let mut n = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let sx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                let sy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                sum += img.get(sx, sy);
                n += 1.0;
            }
        }
        sum / n
    })
    .expect("same size")
}

fn view(place: &ImageGray, kind: Perturbation, noise: f32, rng: &mut ChaCha8Rng) -> ImageGray {
    let (dx, dy): (i32, i32) = (rng.random_range(-2..=2), rng.random_range(-2..=2));
    let moved = shifted(place, dx as isize, dy as isize);
    let base = match kind {
        Perturbation::Brightness => {
            let gain = rng.random_range(0.45f32..0.75);
            let offset = rng.random_range(0.0f32..0.25);
            ImageGray::from_fn(moved.width(), moved.height(), |x, y| gain * moved.get(x, y) + offset)
                .expect("same size")
        }
        Perturbation::Blur => box_blur(&moved, rng.random_range(1..=3)),
        Perturbation::Noise => {
            let sd = rng.random_range(0.06f32..0.12);
            ImageGray::from_fn(moved.width(), moved.height(), |x, y| moved.get(x, y) + sd * gaussian(rng))
                .expect("same size")
        }
    };
    if noise == 0.0 {
        return base;
    }
    ImageGray::from_fn(base.width(), base.height(), |x, y| base.get(x, y) + noise * gaussian(rng))
        .expect("same size")
}

/// Quantizes to 8 bits, as a PGM round trip would.
fn quantized(img: ImageGray) -> ImageGray {
    ImageGray::decode_pgm(&img.encode_pgm()).expect("own encoding")
}

#[derive(Debug, Clone)]
pub struct ImageDataset {
    pub references: Vec<ImageGray>,
    pub queries: Vec<ImageGray>,
    pub perturbations: Vec<Perturbation>,
    pub ground_truth: GroundTruth,
}

pub fn generate_images(spec: &ImageSynthSpec, seed: u64) -> Result<ImageDataset> {
    spec.validate()?;
    let references: Vec<ImageGray> = (0..spec.reference_count)
        .into_par_iter()
        .map(|j| quantized(place_image(&mut stream_rng(seed, j as u64, PLACE_SLOT))))
        .collect();
    let views: Vec<(usize, Perturbation, ImageGray)> = (0..spec.query_count)
        .into_par_iter()
        .map(|q| {
            let mut rng = stream_rng(seed, q as u64, VIEW_SLOT);
            let place = rng.random_range(0..spec.reference_count);
            let kind = Perturbation::ALL[q % Perturbation::ALL.len()];
            let img = view(&references[place], kind, spec.noise as f32, &mut rng);
            (place, kind, quantized(img))
        })
        .collect();
    let ground_truth = GroundTruth::new(views.iter().map(|v| vec![v.0]).collect(), spec.reference_count)?;
    let (perturbations, queries) = views.into_iter().map(|(_, k, img)| (k, img)).unzip();
    Ok(ImageDataset {
        references,
        queries,
        perturbations,
        ground_truth,
    })
}

impl ImageDataset {
    pub fn subset(&self, queries: &[usize]) -> Result<ImageDataset> {
        Ok(ImageDataset {
            references: self.references.clone(),
            queries: queries.iter().map(|&q| self.queries[q].clone()).collect(),
            perturbations: queries.iter().map(|&q| self.perturbations[q]).collect(),
            ground_truth: self.ground_truth.select(queries)?,
        })
    }

    /// Writes `refs/ref_NNNN.pgm`, `<name>/query_NNNN.pgm`, `<name>_gt.csv`
    /// and `<name>.toml`; returns the manifest path.
    pub fn export(&self, dir: &Path, name: &str) -> Result<PathBuf> {
        let write_all = |sub: &str, stem: &str, images: &[ImageGray]| -> Result<Vec<PathBuf>> {
            std::fs::create_dir_all(dir.join(sub))?;
            images
                .iter()
                .enumerate()
                .map(|(i, img)| {
                    let rel = PathBuf::from(sub).join(format!("{stem}_{i:04}.pgm"));
                    write_atomic(&dir.join(&rel), &img.encode_pgm())?;
                    Ok(rel)
                })
                .collect()
        };
        let reference_images = write_all("refs", "ref", &self.references)?;
        let query_images = write_all(name, "query", &self.queries)?;
        let gt = PathBuf::from(format!("{name}_gt.csv"));
        self.ground_truth.save_csv(&dir.join(&gt))?;
        let manifest = DatasetManifest {
            name: name.to_string(),
            reference_images,
            query_images,
            descriptors: BTreeMap::new(),
            ground_truth: GroundTruthSource::File(gt),
            base_dir: dir.to_path_buf(),
        };
        let path = dir.join(format!("{name}.toml"));
        write_atomic(&path, manifest.to_toml().as_bytes())?;
        Ok(path)
    }
}

pub fn export_image_split(spec: &ImageSynthSpec, seed: u64, dir: &Path) -> Result<super::ExportedSplit> {
    let dataset = generate_images(spec, seed)?;
    let (cal, eval) = split_indices(spec.query_count, spec.calibration_fraction, seed)?;
    std::fs::create_dir_all(dir)?;
    let calibration_manifest = dataset.subset(&cal)?.export(dir, "calibration")?;
    let evaluation_manifest = dataset.subset(&eval)?.export(dir, "evaluation")?;
    let config = dir.join("config.toml");
    write_atomic(&config, spec.config()?.to_toml().as_bytes())?;
    Ok(super::ExportedSplit {
        calibration_manifest,
        evaluation_manifest,
        config,
    })
}
