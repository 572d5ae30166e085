//! `SFCAL1` calibration store files.
//!
//! All integers and floats little-endian:
//!
//! ```text
//! magic            8 bytes  "SFCAL1\0\0"
//! version          u32      1
//! technique_count  u32
//! technique_count x {
//!     name_len     u32
//!     name         name_len bytes, UTF-8
//!     prior_match  f64
//!     sample_count u64
//!     histogram
//! }
//! pair_count       u32
//! pair_count x {
//!     primary      u32      index into the technique table
//!     candidate    u32      index into the technique table
//!     histogram
//! }
//!
//! histogram := bins u32, lo f64, hi f64, alpha f64,
//!              bins x u64 matched counts, bins x u64 mismatched counts
//! ```

use std::path::Path;

use super::{CalibrationStore, Hypothesis, LikelihoodHistogram, PairCalibration, TechniqueCalibration};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::technique::TechniqueId;

pub const STORE_MAGIC: &[u8; 8] = b"SFCAL1\0\0";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_histogram(out: &mut Vec<u8>, h: &LikelihoodHistogram) {
    let (lo, hi) = h.range();
    put_u32(out, h.bin_count() as u32);
    put_f64(out, lo);
    put_f64(out, hi);
    put_f64(out, h.alpha());
    for hyp in [Hypothesis::Match, Hypothesis::Mismatch] {
        for &c in h.counts(hyp) {
            put_u64(out, c);
        }
    }
}

pub fn encode(store: &CalibrationStore) -> Vec<u8> {
    let mut out = STORE_MAGIC.to_vec();
    put_u32(&mut out, VERSION);
    let table: Vec<&TechniqueId> = store.techniques.keys().collect();
    put_u32(&mut out, table.len() as u32);
    for cal in store.techniques.values() {
        let name = cal.technique_id.as_str().as_bytes();
        put_u32(&mut out, name.len() as u32);
        out.extend_from_slice(name);
        put_f64(&mut out, cal.prior_match);
        put_u64(&mut out, cal.sample_count);
        put_histogram(&mut out, &cal.histogram);
    }
    let index = |id: &TechniqueId| table.iter().position(|t| *t == id).expect("pair technique in table") as u32;
    put_u32(&mut out, store.pairs.len() as u32);
    for pair in store.pairs.values() {
        put_u32(&mut out, index(&pair.primary_id));
        put_u32(&mut out, index(&pair.candidate_id));
        put_histogram(&mut out, &pair.histogram);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("truncated calibration store".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn histogram(&mut self) -> Result<LikelihoodHistogram> {
        let bins = self.u32()? as usize;
        if bins > self.bytes.len() {
            return Err(Error::Format(format!("implausible bin count {bins}")));
        }
        let lo = self.f64()?;
        let hi = self.f64()?;
        let alpha = self.f64()?;
        let matched = (0..bins).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
        let mismatched = (0..bins).map(|_| self.u64()).collect::<Result<Vec<_>>>()?;
        LikelihoodHistogram::from_parts(lo, hi, matched, mismatched, alpha)
            .map_err(|e| Error::Format(format!("bad histogram: {e}")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<CalibrationStore> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8).ok() != Some(&STORE_MAGIC[..]) {
        return Err(Error::Format("bad magic, expected SFCAL1".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported calibration store version {version}")));
    }
    let n = r.u32()? as usize;
    let mut techniques = Vec::new();
    for _ in 0..n {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::Format("technique name is not UTF-8".into()))?;
        let prior_match = r.f64()?;
        let sample_count = r.u64()?;
        let histogram = r.histogram()?;
        techniques.push(TechniqueCalibration {
            technique_id: name.into(),
            prior_match,
            histogram,
            sample_count,
        });
    }
    let lookup = |i: u32| {
        techniques
            .get(i as usize)
            .map(|t| t.technique_id.clone())
            .ok_or_else(|| Error::Format(format!("pair references unknown technique index {i}")))
    };
    let m = r.u32()? as usize;
    let mut pairs = Vec::new();
    for _ in 0..m {
        let primary_id = lookup(r.u32()?)?;
        let candidate_id = lookup(r.u32()?)?;
        pairs.push(PairCalibration {
            primary_id,
            candidate_id,
            histogram: r.histogram()?,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after calibration store".into()));
    }
    Ok(CalibrationStore::from_parts(techniques, pairs))
}

pub fn save_store(store: &CalibrationStore, path: &Path) -> Result<()> {
    write_atomic(path, &encode(store))
}

pub fn load_store(path: &Path) -> Result<CalibrationStore> {
    let bytes = crate::io::read(path)?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}
