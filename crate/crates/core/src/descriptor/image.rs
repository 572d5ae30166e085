//! Grayscale images, 8-bit PGM (P5) I/O and area resampling.

use std::path::Path;

use crate::error::{Error, Result};

/// Row-major grayscale image with intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl ImageGray {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "image data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(ImageGray {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel; values are clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                data.push(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) });
            }
        }
        ImageGray::new(width, height, data)
    }

    pub fn uniform(width: usize, height: usize, value: f32) -> Result<Self> {
        ImageGray::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Resamples to `out_w` x `out_h` by integrating each output pixel's footprint
    /// over the input grid. Same-size resampling returns an identical image.
    pub fn resize_area(&self, out_w: usize, out_h: usize) -> ImageGray {
        if out_w == self.width && out_h == self.height {
            return self.clone();
        }
        let wx = footprint_weights(self.width, out_w);
        let wy = footprint_weights(self.height, out_h);

        // horizontal pass
        let mut tmp = vec![0.0f64; out_w * self.height];
        for y in 0..self.height {
            let row = &self.data[y * self.width..(y + 1) * self.width];
            for (ox, taps) in wx.iter().enumerate() {
                tmp[y * out_w + ox] = taps.iter().map(|&(i, w)| row[i] as f64 * w).sum();
            }
        }
        // vertical pass
        let mut data = vec![0.0f32; out_w * out_h];
        for (oy, taps) in wy.iter().enumerate() {
            for ox in 0..out_w {
                let v: f64 = taps.iter().map(|&(i, w)| tmp[i * out_w + ox] * w).sum();
                data[oy * out_w + ox] = v.clamp(0.0, 1.0) as f32;
            }
        }
        ImageGray {
            width: out_w,
            height: out_h,
            data,
        }
    }

    pub fn read_pgm(path: &Path) -> Result<Self> {
        let bytes = crate::io::read(path)?;
        Self::decode_pgm(&bytes).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Decodes a binary 8-bit PGM (`P5`) image.
    pub fn decode_pgm(bytes: &[u8]) -> Result<Self> {
        let mut pos = 0usize;
        let mut fields = [0usize; 3];
        let magic = next_token(bytes, &mut pos).ok_or_else(|| Error::Format("empty PGM".into()))?;
        if magic != b"P5" {
            return Err(Error::Format("not a binary PGM (expected P5)".into()));
        }
        for field in fields.iter_mut() {
            let tok = next_token(bytes, &mut pos)
                .ok_or_else(|| Error::Format("truncated PGM header".into()))?;
            *field = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format("malformed PGM header".into()))?;
        }
        let [width, height, maxval] = fields;
        if maxval == 0 || maxval > 255 {
            return Err(Error::Format(format!("unsupported PGM maxval {maxval}")));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let n = width * height;
        if bytes.len() < pos + n {
            return Err(Error::Format("truncated PGM raster".into()));
        }
        let scale = maxval as f32;
        let data = bytes[pos..pos + n]
            .iter()
            .map(|&b| (b as f32 / scale).min(1.0))
            .collect();
        ImageGray::new(width, height, data)
    }

    pub fn encode_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| (v * 255.0).round() as u8));
        out
    }
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

/// For each output sample, the input indices overlapping its footprint and
/// their normalized coverage weights.
fn footprint_weights(input: usize, output: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = input as f64 / output as f64;
    (0..output)
        .map(|o| {
            let start = o as f64 * scale;
            let end = (o + 1) as f64 * scale;
            let first = start.floor() as usize;
            let last = (end.ceil() as usize).min(input);
            let mut taps: Vec<(usize, f64)> = (first..last)
                .map(|i| {
                    let lo = start.max(i as f64);
                    let hi = end.min((i + 1) as f64);
                    (i, (hi - lo).max(0.0))
                })
                .filter(|&(_, w)| w > 0.0)
                .collect();
            let total: f64 = taps.iter().map(|&(_, w)| w).sum();
            for tap in taps.iter_mut() {
                tap.1 /= total;
            }
            taps
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_dimensions_and_values() {
        assert!(ImageGray::new(2, 2, vec![0.0; 3]).is_err());
        assert!(ImageGray::new(1, 1, vec![1.5]).is_err());
        assert!(ImageGray::new(1, 1, vec![f32::NAN]).is_err());
        assert!(ImageGray::new(0, 4, vec![]).is_err());
    }

    #[test]
    fn same_size_resize_is_identity() {
        let img = ImageGray::from_fn(20, 17, |x, y| ((x * 7 + y * 3) % 11) as f32 / 10.0).unwrap();
        assert_eq!(img.resize_area(20, 17), img);
    }

    #[test]
    fn downsample_by_two_averages_blocks() {
        let img = ImageGray::new(4, 2, vec![0.0, 1.0, 0.5, 0.5, 1.0, 0.0, 0.25, 0.75]).unwrap();
        let small = img.resize_area(2, 1);
        assert_eq!(small.data(), &[0.5, 0.5]);
    }

    #[test]
    fn upsample_preserves_constant() {
        let img = ImageGray::uniform(3, 5, 0.3).unwrap();
        let big = img.resize_area(64, 64);
        assert!(big.data().iter().all(|&v| (v - 0.3).abs() < 1e-6));
    }

    #[test]
    fn pgm_round_trip() {
        let img = ImageGray::from_fn(5, 3, |x, y| (x * 3 + y) as f32 * 17.0 / 255.0).unwrap();
        let decoded = ImageGray::decode_pgm(&img.encode_pgm()).unwrap();
        assert_eq!(decoded.width(), 5);
        for (a, b) in img.data().iter().zip(decoded.data()) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn pgm_header_comments_and_errors() {
        let mut bytes = b"P5\n# comment\n2 1\n# another\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let img = ImageGray::decode_pgm(&bytes).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);

        assert!(matches!(ImageGray::decode_pgm(b"P2\n1 1\n255\n0"), Err(Error::Format(_))));
        assert!(matches!(ImageGray::decode_pgm(b"P5\n2 2\n255\n\x00"), Err(Error::Format(_))));
    }
}
