//! Otsu thresholding on 256-bin histograms.

use crate::error::Result;
use crate::patterns::BinaryTemplate;
use crate::printchan::GrayImage;

/// Result of [`otsu_threshold`]. Bins `< threshold` form the dark class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OtsuThreshold {
    pub threshold: u8,
    /// Set when the histogram holds a single occupied bin; the threshold is
    /// then that bin's value.
    pub degenerate: bool,
}

/// 128×128 → 256-bit product, as `(hi, lo)`.
fn mul_wide(a: u128, b: u128) -> (u128, u128) {
    let mask = u64::MAX as u128;
    let (a0, a1) = (a & mask, a >> 64);
    let (b0, b1) = (b & mask, b >> 64);
    let p00 = a0 * b0;
    let p01 = a0 * b1;
    let p10 = a1 * b0;
    let p11 = a1 * b1;
    let mid = (p00 >> 64) + (p01 & mask) + (p10 & mask);
    let lo = (p00 & mask) | (mid << 64);
    let hi = p11 + (p01 >> 64) + (p10 >> 64) + (mid >> 64);
    (hi, lo)
}

/// Between-class variance of a split, kept as an exact fraction
/// `num / den` with `num = (S0·N − S·W0)²` and `den = W0·W1`.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn gt(&self, other: &Score) -> bool {
        mul_wide(self.num, other.den) > mul_wide(other.num, self.den)
    }
}

fn split_score(w0: u64, s0: u64, n: u64, s: u64) -> Option<Score> {
    let w1 = n - w0;
    if w0 == 0 || w1 == 0 {
        return None;
    }
    let a = s0 as i128 * n as i128 - s as i128 * w0 as i128;
    let num = a.unsigned_abs().checked_mul(a.unsigned_abs())?;
    Some(Score {
        num,
        den: w0 as u128 * w1 as u128,
    })
}

/// Threshold maximizing the between-class variance; ties go to the lower
/// threshold. Returns `None` for an empty histogram.
pub fn otsu_threshold(hist: &[u64; 256]) -> Option<OtsuThreshold> {
    let n: u64 = hist.iter().sum();
    if n == 0 {
        return None;
    }
    let occupied: Vec<usize> = (0..256).filter(|&i| hist[i] > 0).collect();
    if occupied.len() == 1 {
        return Some(OtsuThreshold {
            threshold: occupied[0] as u8,
            degenerate: true,
        });
    }
    let s: u64 = hist.iter().enumerate().map(|(i, &h)| i as u64 * h).sum();
    let (mut w0, mut s0) = (0u64, 0u64);
    let mut best: Option<(u8, Score)> = None;
    for t in 1..256usize {
        w0 += hist[t - 1];
        s0 += (t as u64 - 1) * hist[t - 1];
        if let Some(sc) = split_score(w0, s0, n, s) {
            if best.is_none_or(|(_, b)| sc.gt(&b)) {
                best = Some((t as u8, sc));
            }
        }
    }
    best.map(|(t, _)| OtsuThreshold {
        threshold: t,
        degenerate: false,
    })
}

/// Quantize a `[0, 1]` value to an 8-bit bin.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn histogram(values: &[f64]) -> [u64; 256] {
    let mut h = [0u64; 256];
    for &v in values {
        h[quantize(v) as usize] += 1;
    }
    h
}

/// Otsu binarization of per-symbol values: quantized values below the
/// threshold become black.
pub fn otsu_binarize(values: &[f64], rows: usize, cols: usize) -> Result<(BinaryTemplate, OtsuThreshold)> {
    let th = otsu_threshold(&histogram(values)).expect("non-empty input");
    if th.degenerate {
        log::warn!("otsu: single-valued histogram at {}", th.threshold);
    }
    let bits = values
        .iter()
        .map(|&v| u8::from(quantize(v) >= th.threshold))
        .collect();
    Ok((BinaryTemplate::from_bits(rows, cols, bits)?, th))
}

/// Block-average every symbol of a registered scan, then threshold globally.
pub fn otsu_estimate(scan: &GrayImage) -> Result<BinaryTemplate> {
    let (n, m) = scan
        .symbol_dims()
        .ok_or_else(|| crate::Error::Dimension(format!("{:?} is not a multiple of pps {}", scan.dims(), scan.pps)))?;
    let means = scan.block_means()?;
    Ok(otsu_binarize(&means, n, m)?.0)
}
