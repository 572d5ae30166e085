use crate::error::{Error, Result};

/// Which side of a binary outcome a likelihood is conditioned on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Match,
    Mismatch,
}

/// Equal-width score histogram split by outcome, with additive smoothing
/// applied on lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodHistogram {
    lo: f64,
    hi: f64,
    counts_matched: Vec<u64>,
    counts_mismatched: Vec<u64>,
    alpha: f64,
}

impl LikelihoodHistogram {
    /// Builds a histogram directly from its parts.
    pub fn from_parts(
        lo: f64,
        hi: f64,
        counts_matched: Vec<u64>,
        counts_mismatched: Vec<u64>,
        alpha: f64,
    ) -> Result<Self> {
        if counts_matched.len() < 2 || counts_matched.len() != counts_mismatched.len() {
            return Err(Error::invalid("histogram needs at least 2 bins on both sides"));
        }
        if !(lo.is_finite() && hi.is_finite() && hi > lo) {
            return Err(Error::invalid(format!("invalid histogram range [{lo}, {hi}]")));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::invalid(format!("smoothing alpha {alpha} must be >= 0")));
        }
        Ok(LikelihoodHistogram {
            lo,
            hi,
            counts_matched,
            counts_mismatched,
            alpha,
        })
    }

    /// Fills a histogram from `(score, outcome)` pairs. The range spans the
    /// observed scores widened by 1% of their spread on each side, or
    /// `score ± 0.5` when every score is equal.
    pub fn from_samples(samples: &[(f64, bool)], bins: usize, alpha: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("no samples for histogram"));
        }
        if let Some(&(s, _)) = samples.iter().find(|(s, _)| !s.is_finite()) {
            return Err(Error::Data(format!("non-finite calibration score {s}")));
        }
        let (min, max) = samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(s, _)| (lo.min(s), hi.max(s)));
        let (lo, hi) = if max > min {
            let pad = 0.01 * (max - min);
            (min - pad, max + pad)
        } else {
            (min - 0.5, min + 0.5)
        };
        let mut hist = LikelihoodHistogram::from_parts(lo, hi, vec![0; bins], vec![0; bins], alpha)?;
        for &(score, matched) in samples {
            let bin = hist.bin_of(score);
            if matched {
                hist.counts_matched[bin] += 1;
            } else {
                hist.counts_mismatched[bin] += 1;
            }
        }
        Ok(hist)
    }

    pub fn bin_count(&self) -> usize {
        self.counts_matched.len()
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn counts(&self, hypothesis: Hypothesis) -> &[u64] {
        match hypothesis {
            Hypothesis::Match => &self.counts_matched,
            Hypothesis::Mismatch => &self.counts_mismatched,
        }
    }

    /// Bin containing `score`; out-of-range scores clamp to the edge bins.
    pub fn bin_of(&self, score: f64) -> usize {
        let bins = self.bin_count();
        let t = (score - self.lo) / (self.hi - self.lo);
        if t <= 0.0 {
            0
        } else {
            ((t * bins as f64) as usize).min(bins - 1)
        }
    }

    /// Smoothed probability mass of `bin` under `hypothesis`:
    /// `(count + alpha) / (total + alpha * bins)`.
    pub fn mass(&self, bin: usize, hypothesis: Hypothesis) -> f64 {
        let counts = self.counts(hypothesis);
        let total: u64 = counts.iter().sum();
        let denom = total as f64 + self.alpha * counts.len() as f64;
        if denom == 0.0 {
            return 0.0;
        }
        (counts[bin] as f64 + self.alpha) / denom
    }

    pub fn likelihood(&self, score: f64, hypothesis: Hypothesis) -> Result<f64> {
        if !score.is_finite() {
            return Err(Error::Data(format!("non-finite score {score}")));
        }
        Ok(self.mass(self.bin_of(score), hypothesis))
    }
}

/// Smoothed likelihood of `score` under `hypothesis`.
pub fn likelihood(hist: &LikelihoodHistogram, score: f64, hypothesis: Hypothesis) -> Result<f64> {
    hist.likelihood(score, hypothesis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_side_is_uniform() {
        let h = LikelihoodHistogram::from_parts(0.0, 1.0, vec![5; 20], vec![0; 20], 1.0).unwrap();
        for s in [-3.0, 0.0, 0.33, 0.99, 7.0] {
            assert_eq!(h.likelihood(s, Hypothesis::Mismatch).unwrap(), 1.0 / 20.0);
        }
    }

    #[test]
    fn below_range_equals_lo() {
        let h = LikelihoodHistogram::from_parts(0.2, 0.8, vec![3, 1, 0], vec![0, 2, 9], 1.0).unwrap();
        for hyp in [Hypothesis::Match, Hypothesis::Mismatch] {
            assert_eq!(h.likelihood(-5.0, hyp).unwrap(), h.likelihood(0.2, hyp).unwrap());
            assert_eq!(h.likelihood(5.0, hyp).unwrap(), h.likelihood(0.8, hyp).unwrap());
        }
    }

    #[test]
    fn counts_three_one() {
        let h = LikelihoodHistogram::from_parts(0.0, 1.0, vec![3, 1], vec![0, 0], 1.0).unwrap();
        assert!((h.likelihood(0.25, Hypothesis::Match).unwrap() - 4.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_range_widens_by_half() {
        let samples = vec![(0.4, true); 12];
        let h = LikelihoodHistogram::from_samples(&samples, 20, 1.0).unwrap();
        let (lo, hi) = h.range();
        assert!((lo + 0.1).abs() < 1e-12 && (hi - 0.9).abs() < 1e-12);
    }

    #[test]
    fn range_widened_one_percent() {
        let samples = [(0.1, false), (0.9, true)];
        let h = LikelihoodHistogram::from_samples(&samples, 2, 1.0).unwrap();
        let (lo, hi) = h.range();
        assert!((lo - 0.092).abs() < 1e-12 && (hi - 0.908).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parts_and_scores() {
        assert!(LikelihoodHistogram::from_parts(0.0, 1.0, vec![1], vec![1], 1.0).is_err());
        assert!(LikelihoodHistogram::from_parts(1.0, 1.0, vec![1, 1], vec![1, 1], 1.0).is_err());
        assert!(LikelihoodHistogram::from_parts(0.0, 1.0, vec![1, 1], vec![1, 1], -1.0).is_err());
        let h = LikelihoodHistogram::from_parts(0.0, 1.0, vec![1, 1], vec![1, 1], 1.0).unwrap();
        assert!(h.likelihood(f64::NAN, Hypothesis::Match).is_err());
    }

    proptest! {
        #[test]
        fn masses_sum_to_one_and_are_positive(
            samples in prop::collection::vec((-1.0f64..1.0, any::<bool>()), 1..200),
            bins in 2usize..40,
            alpha in 0.01f64..5.0,
        ) {
            let h = LikelihoodHistogram::from_samples(&samples, bins, alpha).unwrap();
            for hyp in [Hypothesis::Match, Hypothesis::Mismatch] {
                let total: f64 = (0..bins).map(|b| h.mass(b, hyp)).sum();
                prop_assert!((total - 1.0).abs() <= 1e-9);
                prop_assert!((0..bins).all(|b| h.mass(b, hyp) > 0.0));
            }
        }
    }
}
