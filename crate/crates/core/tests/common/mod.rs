//! Reference implementations written independently of the library, used as
//! oracles by the integration and acceptance tests.

#![allow(dead_code)]

/// 64x64 image, 0 left of column 32 and 1 from column 32 on.
pub fn step_edge() -> Vec<f32> {
    let mut px = vec![0.0f32; 64 * 64];
    for y in 0..64 {
        for x in 32..64 {
            px[y * 64 + x] = 1.0;
        }
    }
    px
}

/// Plain-loop HOG of a 64x64 image: centred differences with replicated
/// borders, unsigned orientation, 9 bins centred on multiples of 20°, votes
/// split linearly between the two nearest centres, 8x8 cells, 2x2-cell
/// blocks at stride one, L2 per block.
pub fn hog_oracle(px: &[f32]) -> Vec<f64> {
    assert_eq!(px.len(), 64 * 64);
    let at = |x: i64, y: i64| -> f64 {
        let cx = x.clamp(0, 63) as usize;
        let cy = y.clamp(0, 63) as usize;
        px[cy * 64 + cx] as f64
    };
    let mut cells = [[[0.0f64; 9]; 8]; 8];
    for cy in 0..8 {
        for cx in 0..8 {
            for dy in 0..8 {
                for dx in 0..8 {
                    let x = (cx * 8 + dx) as i64;
                    let y = (cy * 8 + dy) as i64;
                    let gx = at(x + 1, y) - at(x - 1, y);
                    let gy = at(x, y + 1) - at(x, y - 1);
                    let mag = (gx * gx + gy * gy).sqrt();
                    if mag == 0.0 {
                        continue;
                    }
                    // Angle in [0, 180) degrees from the half-plane gy >= 0.
                    let ux = if gy < 0.0 || (gy == 0.0 && gx < 0.0) { -gx } else { gx };
                    let mut angle = (ux / mag).clamp(-1.0, 1.0).acos() * 180.0 / std::f64::consts::PI;
                    if angle >= 180.0 {
                        angle -= 180.0;
                    }
                    let mut lo = 0usize;
                    for b in 0..9 {
                        if angle >= 20.0 * b as f64 {
                            lo = b;
                        }
                    }
                    let w_hi = (angle - 20.0 * lo as f64) / 20.0;
                    cells[cy][cx][lo] += mag * (1.0 - w_hi);
                    cells[cy][cx][(lo + 1) % 9] += mag * w_hi;
                }
            }
        }
    }
    let mut out = Vec::with_capacity(1764);
    for by in 0..7 {
        for bx in 0..7 {
            let mut block = Vec::with_capacity(36);
            for cy in by..by + 2 {
                for cx in bx..bx + 2 {
                    block.extend_from_slice(&cells[cy][cx]);
                }
            }
            let norm = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            for v in block {
                out.push(if norm > 0.0 { v / norm } else { 0.0 });
            }
        }
    }
    out
}

/// Posterior of a match given a score, by enumerating the smoothed joint
/// table `P(hypothesis, bin)` built from raw `(score, matched)` samples.
pub fn brute_force_posterior(samples: &[(f64, bool)], bins: usize, alpha: f64, score: f64) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(s, _) in samples {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    let (lo, hi) = if hi > lo {
        let pad = (hi - lo) / 100.0;
        (lo - pad, hi + pad)
    } else {
        (lo - 0.5, lo + 0.5)
    };
    let width = (hi - lo) / bins as f64;
    let bin_of = |s: f64| {
        let mut found = 0;
        for k in 0..bins {
            if s >= lo + width * k as f64 {
                found = k;
            }
        }
        found
    };
    // table[h][b]: h = 0 matched, 1 mismatched
    let mut table = vec![vec![0.0f64; bins]; 2];
    let mut n = [0.0f64; 2];
    for &(s, m) in samples {
        let h = if m { 0 } else { 1 };
        table[h][bin_of(s)] += 1.0;
        n[h] += 1.0;
    }
    let prior_m = (n[0] / (n[0] + n[1])).clamp(0.01, 0.99);
    let priors = [prior_m, 1.0 - prior_m];
    let b = bin_of(score);
    let joint: Vec<f64> = (0..2)
        .map(|h| priors[h] * (table[h][b] + alpha) / (n[h] + alpha * bins as f64))
        .collect();
    joint[0] / (joint[0] + joint[1])
}
