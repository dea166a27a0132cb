//! Defender-side preprocessing and similarity scores.
//!
//! A probe is registered against its template, stretched to `[0, 1]` and
//! binarized per symbol. HAMMING and JACCARD compare symbol-level bits;
//! SSIM and CORR compare the normalized grayscale with the upsampled
//! template at the probe's own resolution.

use serde::{Deserialize, Serialize};

use crate::attack::otsu::otsu_binarize;
use crate::error::{Error, Result};
use crate::io::{fmt_f, CsvTable};
use crate::patterns::{BinaryTemplate, BLACK};
use crate::printchan::{register, upsample, GrayImage};

pub const SSIM_RADIUS: usize = 5;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Normalization {
    MinMax,
    Percentile { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessParams {
    pub max_shift: usize,
    pub normalization: Normalization,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            max_shift: 6,
            normalization: Normalization::Percentile { lo: 1.0, hi: 99.0 },
        }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if let Normalization::Percentile { lo, hi } = self.normalization {
            if !(0.0 <= lo && lo < hi && hi <= 100.0) {
                return Err(Error::Parameter(format!("percentiles ({lo}, {hi}) must satisfy 0 <= lo < hi <= 100")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub gray: GrayImage,
    pub binary: BinaryTemplate,
    pub shift: (isize, isize),
    /// Set when the probe had no dynamic range to stretch.
    pub degenerate: bool,
}

/// Linear-interpolated percentile of an already sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

pub fn normalize(img: &GrayImage, norm: Normalization) -> (GrayImage, bool) {
    let (lo, hi) = match norm {
        Normalization::MinMax => img
            .pixels()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
        Normalization::Percentile { lo, hi } => {
            let mut s = img.pixels().to_vec();
            s.sort_by(f64::total_cmp);
            (percentile(&s, lo), percentile(&s, hi))
        }
    };
    let mut out = img.clone();
    if !(hi - lo > 1e-12) {
        log::warn!("normalization: probe has no dynamic range ({lo}..{hi})");
        out.pixels_mut().iter_mut().for_each(|v| *v = 0.5);
        return (out, true);
    }
    let scale = 1.0 / (hi - lo);
    out.pixels_mut()
        .iter_mut()
        .for_each(|v| *v = ((*v - lo) * scale).clamp(0.0, 1.0));
    (out, false)
}

pub fn preprocess(probe: &GrayImage, t: &BinaryTemplate, theta: &PreprocessParams) -> Result<Preprocessed> {
    theta.validate()?;
    let reg = register(probe, t, theta.max_shift)?;
    let (gray, degenerate) = normalize(&reg.image, theta.normalization);
    let (binary, _) = otsu_binarize(&gray.block_means()?, t.rows(), t.cols())?;
    Ok(Preprocessed {
        gray,
        binary,
        shift: reg.shift,
        degenerate,
    })
}

fn same_dims(a: &BinaryTemplate, b: &BinaryTemplate) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension(format!("{:?} vs {:?}", a.dims(), b.dims())));
    }
    Ok(())
}

fn same_grid(a: &GrayImage, b: &GrayImage) -> Result<()> {
    if a.dims() != b.dims() || a.pps != b.pps {
        return Err(Error::Dimension(format!(
            "{:?}@{} vs {:?}@{}",
            a.dims(),
            a.pps,
            b.dims(),
            b.pps
        )));
    }
    Ok(())
}

/// Fraction of differing symbols.
pub fn hamming_score(t: &BinaryTemplate, a: &BinaryTemplate) -> Result<f64> {
    same_dims(t, a)?;
    let diff = t.bits().iter().zip(a.bits()).filter(|(x, y)| x != y).count();
    Ok(diff as f64 / t.bits().len() as f64)
}

/// Intersection over union of the black symbol sets; 1 when both are empty.
pub fn jaccard_score(t: &BinaryTemplate, a: &BinaryTemplate) -> Result<f64> {
    same_dims(t, a)?;
    let (mut inter, mut union) = (0usize, 0usize);
    for (&x, &y) in t.bits().iter().zip(a.bits()) {
        let (bx, by) = (x == BLACK, y == BLACK);
        inter += usize::from(bx && by);
        union += usize::from(bx || by);
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Pearson correlation, `None` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

pub fn corr_score(t_up: &GrayImage, a: &GrayImage) -> Result<f64> {
    same_grid(t_up, a)?;
    Ok(pearson(t_up.pixels(), a.pixels()).unwrap_or_else(|| {
        log::warn!("corr: constant input, score set to 0");
        0.0
    }))
}

fn gaussian_taps() -> Vec<f64> {
    let r = SSIM_RADIUS as isize;
    (-r..=r)
        .map(|d| (-(d * d) as f64 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect()
}

/// Separable weighted local mean; the window is truncated at the borders
/// and renormalized over the in-bounds taps.
fn local_mean(v: &[f64], rows: usize, cols: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let pass = |src: &[f64], along_rows: bool| -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        for i in 0..rows {
            for j in 0..cols {
                let (pos, len) = if along_rows { (j, cols) } else { (i, rows) };
                let (mut acc, mut norm) = (0.0, 0.0);
                for (k, &w) in taps.iter().enumerate() {
                    let q = pos as isize + k as isize - r;
                    if q < 0 || q >= len as isize {
                        continue;
                    }
                    let idx = if along_rows { i * cols + q as usize } else { q as usize * cols + j };
                    acc += w * src[idx];
                    norm += w;
                }
                out[i * cols + j] = acc / norm;
            }
        }
        out
    };
    pass(&pass(v, true), false)
}

/// Mean local SSIM with a Gaussian window (radius 5, σ 1.5) and dynamic
/// range 1.
pub fn ssim_score(x: &GrayImage, y: &GrayImage) -> Result<f64> {
    same_grid(x, y)?;
    let (rows, cols) = x.dims();
    let taps = gaussian_taps();
    let (xs, ys) = (x.pixels(), y.pixels());
    let prod = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> { xs.iter().zip(ys).map(|(&a, &b)| f(a, b)).collect() };
    let mx = local_mean(xs, rows, cols, &taps);
    let my = local_mean(ys, rows, cols, &taps);
    let mxx = local_mean(&prod(&|a, _| a * a), rows, cols, &taps);
    let myy = local_mean(&prod(&|_, b| b * b), rows, cols, &taps);
    let mxy = local_mean(&prod(&|a, b| a * b), rows, cols, &taps);
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let total: f64 = (0..rows * cols)
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = mxx[i] - ux * ux;
            let vy = myy[i] - uy * uy;
            let cxy = mxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / (rows * cols) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub hamming: f64,
    pub ssim: f64,
    pub jaccard: f64,
    pub corr: f64,
}

impl MetricVector {
    pub const NAMES: [&'static str; 4] = ["hamming", "ssim", "jaccard", "corr"];

    pub fn to_array(&self) -> [f64; 4] {
        [self.hamming, self.ssim, self.jaccard, self.corr]
    }

    pub fn from_array(v: [f64; 4]) -> Self {
        MetricVector {
            hamming: v[0],
            ssim: v[1],
            jaccard: v[2],
            corr: v[3],
        }
    }

    /// Index of a metric by name.
    pub fn index_of(name: &str) -> Option<usize> {
        Self::NAMES.iter().position(|n| *n == name)
    }
}

pub fn metric_vector(t: &BinaryTemplate, probe: &GrayImage, theta: &PreprocessParams) -> Result<MetricVector> {
    let a = preprocess(probe, t, theta)?;
    let t_up = upsample(t, a.gray.pps);
    Ok(MetricVector {
        hamming: hamming_score(t, &a.binary)?,
        ssim: ssim_score(&t_up, &a.gray)?,
        jaccard: jaccard_score(t, &a.binary)?,
        corr: corr_score(&t_up, &a.gray)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeClass {
    Original,
    Fake,
    FakeCross,
}

impl ProbeClass {
    pub fn name(self) -> &'static str {
        match self {
            ProbeClass::Original => "original",
            ProbeClass::Fake => "fake",
            ProbeClass::FakeCross => "fake-cross",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "original" => Some(ProbeClass::Original),
            "fake" => Some(ProbeClass::Fake),
            "fake-cross" => Some(ProbeClass::FakeCross),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredProbe {
    pub code_id: u64,
    pub printer: String,
    pub class: ProbeClass,
    pub vector: MetricVector,
}

pub fn metrics_table(rows: &[ScoredProbe]) -> CsvTable {
    let mut t = CsvTable::new(["code_id", "printer", "class", "hamming", "ssim", "jaccard", "corr"]);
    for r in rows {
        let mut row = vec![r.code_id.to_string(), r.printer.clone(), r.class.name().to_string()];
        row.extend(r.vector.to_array().iter().map(|&v| fmt_f(v, 12)));
        t.push(row);
    }
    t
}

/// Parse a table written by [`metrics_table`].
pub fn parse_metrics_table(text: &str) -> Result<Vec<ScoredProbe>> {
    let mut out = Vec::new();
    let bad = |line: usize, why: &str| Error::Parameter(format!("metrics table line {line}: {why}"));
    for (i, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.starts_with('#') && !l.is_empty())
        .skip(1)
    {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(bad(i + 1, "expected 7 fields"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(i + 1, "bad number"));
        out.push(ScoredProbe {
            code_id: f[0].parse().map_err(|_| bad(i + 1, "bad code id"))?,
            printer: f[1].to_string(),
            class: ProbeClass::parse(f[2]).ok_or_else(|| bad(i + 1, "bad class"))?,
            vector: MetricVector::from_array([num(f[3])?, num(f[4])?, num(f[5])?, num(f[6])?]),
        });
    }
    Ok(out)
}
