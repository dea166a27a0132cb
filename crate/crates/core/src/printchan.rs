//! Print-scan channel simulator and probe registration.
//!
//! The channel is a fixed pipeline applied to the nearest-neighbour upsampled
//! template: signed dot gain (soft-disk grayscale morphology on the ink),
//! Gaussian blur, affine tone map, additive sensor noise and a final clamp
//! to `[0, 1]`. Two presets stand in for the two production printers.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::BinaryTemplate;

/// Pixels per symbol of the attacker's high-resolution acquisition.
pub const ATTACK_PPS: usize = 8;
/// Pixels per symbol of the defender's authentication acquisition.
pub const AUTH_PPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Original,
    Fake,
    EstimateRender,
    Synthetic,
}

/// Intensity image in `[0, 1]` with its pixels-per-symbol scale.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    rows: usize,
    cols: usize,
    pixels: Vec<f64>,
    pub pps: usize,
    pub provenance: Provenance,
    pub printer: Option<String>,
}

impl GrayImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<f64>, pps: usize) -> Result<Self> {
        if pixels.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} pixels for a {rows}x{cols} image",
                pixels.len()
            )));
        }
        if pps == 0 {
            return Err(Error::Parameter("pps must be >= 1".into()));
        }
        Ok(GrayImage {
            rows,
            cols,
            pixels,
            pps,
            provenance: Provenance::Synthetic,
            printer: None,
        })
    }

    pub fn constant(rows: usize, cols: usize, value: f64, pps: usize) -> Self {
        Self::new(rows, cols, vec![value; rows * cols], pps).expect("valid dims")
    }

    pub fn from_fn(rows: usize, cols: usize, pps: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let pixels = (0..rows * cols).map(|i| f(i / cols, i % cols)).collect();
        Self::new(rows, cols, pixels, pps).expect("valid dims")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.pixels[r * self.cols + c]
    }

    /// Symbol grid size if this image is registered (dims divisible by pps).
    pub fn symbol_dims(&self) -> Option<(usize, usize)> {
        (self.rows.is_multiple_of(self.pps) && self.cols.is_multiple_of(self.pps))
            .then(|| (self.rows / self.pps, self.cols / self.pps))
    }

    /// Ensure this image is registered against an `n × m` template.
    pub fn check_registered(&self, n: usize, m: usize) -> Result<()> {
        if self.rows != n * self.pps || self.cols != m * self.pps {
            return Err(Error::Dimension(format!(
                "image {}x{} at pps {} is not registered to a {n}x{m} template",
                self.rows, self.cols, self.pps
            )));
        }
        Ok(())
    }

    /// Mean of each `pps × pps` symbol cell, row-major over the symbol grid.
    pub fn block_means(&self) -> Result<Vec<f64>> {
        let (n, m) = self.symbol_dims().ok_or_else(|| {
            Error::Dimension(format!(
                "{}x{} not divisible by pps {}",
                self.rows, self.cols, self.pps
            ))
        })?;
        let p = self.pps;
        let mut out = vec![0.0; n * m];
        for r in 0..self.rows {
            let row = &self.pixels[r * self.cols..(r + 1) * self.cols];
            let dst = &mut out[(r / p) * m..(r / p + 1) * m];
            for (c, v) in row.iter().enumerate() {
                dst[c / p] += v;
            }
        }
        let norm = 1.0 / (p * p) as f64;
        out.iter_mut().for_each(|v| *v *= norm);
        Ok(out)
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    pub fn with_provenance(mut self, provenance: Provenance, printer: Option<&str>) -> Self {
        self.provenance = provenance;
        self.printer = printer.map(str::to_string);
        self
    }

    /// Write as 16-bit grayscale PNG, `v ↦ round(v · 65535)`.
    pub fn save_png(&self, path: &Path) -> Result<()> {
        let buf: Vec<u16> = self
            .pixels
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
            .collect();
        let img: image::ImageBuffer<image::Luma<u16>, Vec<u16>> =
            image::ImageBuffer::from_raw(self.cols as u32, self.rows as u32, buf)
                .expect("buffer matches dimensions");
        crate::io::write_atomic_with(path, |tmp| {
            img.save_with_format(tmp, image::ImageFormat::Png)
                .map_err(|e| Error::format(path, e.to_string()))
        })
    }

    /// Read any grayscale PNG; the file carries no scale, so `pps` is supplied.
    pub fn load_png(path: &Path, pps: usize) -> Result<Self> {
        let img = image::open(path).map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::format(path, other.to_string()),
        })?;
        let luma = img.to_luma16();
        let (w, h) = luma.dimensions();
        let pixels = luma.pixels().map(|p| p.0[0] as f64 / 65535.0).collect();
        Self::new(h as usize, w as usize, pixels, pps)
    }
}

/// Channel parameters. Blur and dot gain are in symbol units and scale with pps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub pps: usize,
    pub psf_sigma: f64,
    /// Signed ink spread: positive dilates black, negative erodes it.
    pub dot_gain: f64,
    pub gain: f64,
    pub offset: f64,
    pub noise_std: f64,
    /// Per-symbol ink variation added before the blur, intensity units.
    /// Shared by every acquisition of one print.
    #[serde(default)]
    pub ink_noise_std: f64,
    /// Standard deviation of a per-print offset to `dot_gain`.
    #[serde(default)]
    pub dot_gain_jitter: f64,
    pub seed: u64,
}

impl ChannelParams {
    /// Printer profile standing in for the first production press.
    pub fn p55() -> Self {
        ChannelParams {
            pps: ATTACK_PPS,
            psf_sigma: 0.55,
            dot_gain: 0.29,
            gain: 3.0,
            offset: -0.5,
            noise_std: 0.25,
            ink_noise_std: 0.1,
            dot_gain_jitter: 0.02,
            seed: 55,
        }
    }

    /// Printer profile standing in for the second production press.
    pub fn p76() -> Self {
        ChannelParams {
            pps: ATTACK_PPS,
            psf_sigma: 0.50,
            dot_gain: 0.32,
            gain: 3.0,
            offset: -0.5,
            noise_std: 0.25,
            ink_noise_std: 0.1,
            dot_gain_jitter: 0.02,
            seed: 76,
        }
    }

    pub fn preset(tag: &str) -> Option<Self> {
        match tag {
            "P55" => Some(Self::p55()),
            "P76" => Some(Self::p76()),
            _ => None,
        }
    }

    /// Channel with no degradation other than a vanishing blur.
    pub fn identity(pps: usize) -> Self {
        ChannelParams {
            pps,
            psf_sigma: 1e-9,
            dot_gain: 0.0,
            gain: 1.0,
            offset: 0.0,
            noise_std: 0.0,
            ink_noise_std: 0.0,
            dot_gain_jitter: 0.0,
            seed: 0,
        }
    }

    pub fn with_pps(mut self, pps: usize) -> Self {
        self.pps = pps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Per-item seed, `base ⊕ id`.
    pub fn for_item(&self, id: u64) -> Self {
        (*self).with_seed(self.seed ^ id)
    }

    pub fn validate(&self) -> Result<()> {
        if self.pps == 0 {
            return Err(Error::Parameter("pps must be >= 1".into()));
        }
        if !(self.psf_sigma > 0.0) {
            return Err(Error::Parameter(format!("psf_sigma {} must be > 0", self.psf_sigma)));
        }
        if !(-0.5..=0.5).contains(&self.dot_gain) {
            return Err(Error::Parameter(format!(
                "dot_gain {} outside [-0.5, 0.5]",
                self.dot_gain
            )));
        }
        if !(self.dot_gain_jitter >= 0.0) {
            return Err(Error::Parameter(format!("dot_gain_jitter {} must be >= 0", self.dot_gain_jitter)));
        }
        if !(self.ink_noise_std >= 0.0) {
            return Err(Error::Parameter(format!("ink_noise_std {} must be >= 0", self.ink_noise_std)));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Parameter(format!("noise_std {} must be >= 0", self.noise_std)));
        }
        if !self.gain.is_finite() || !self.offset.is_finite() {
            return Err(Error::Parameter("tone map must be finite".into()));
        }
        Ok(())
    }
}

impl fmt::Display for ChannelParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pps={} psf={} dg={}±{} gain={} offset={} noise={} ink={}",
            self.pps,
            self.psf_sigma,
            self.dot_gain,
            self.dot_gain_jitter,
            self.gain,
            self.offset,
            self.noise_std,
            self.ink_noise_std
        )
    }
}

/// Nearest-neighbour replication: black → 0.0, white → 1.0.
pub fn upsample(t: &BinaryTemplate, pps: usize) -> GrayImage {
    let pps = pps.max(1);
    let (n, m) = t.dims();
    let (rows, cols) = (n * pps, m * pps);
    let mut pixels = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            pixels.push(t.get(r / pps, c / pps) as f64);
        }
    }
    GrayImage::new(rows, cols, pixels, pps).expect("valid dims")
}

/// Soft-disk structuring function: weight of a neighbour at distance `d`
/// for spread radius `radius`. Continuous in `radius`, 1 at the centre.
fn disk_weight(radius: f64, d: f64) -> f64 {
    if d == 0.0 {
        1.0
    } else {
        (radius + 1.0 - d).clamp(0.0, 1.0)
    }
}

/// Grayscale morphology on the ink layer: dilation of black for positive
/// `dot_gain`, dilation of white (erosion of ink) for negative.
pub fn apply_dot_gain(img: &GrayImage, dot_gain: f64) -> GrayImage {
    let radius = dot_gain.abs() * img.pps as f64;
    if radius == 0.0 {
        return img.clone();
    }
    let grow_ink = dot_gain > 0.0;
    // Layer being dilated: ink = 1 - v when spreading black, v otherwise.
    let layer: Vec<f64> = if grow_ink {
        img.pixels.iter().map(|v| 1.0 - v).collect()
    } else {
        img.pixels.clone()
    };
    let (rows, cols) = img.dims();
    let reach = (radius + 1.0).ceil() as isize;
    let mut offsets = Vec::new();
    for dy in -reach..=reach {
        for dx in -reach..=reach {
            if dy == 0 && dx == 0 {
                continue;
            }
            let w = disk_weight(radius, ((dy * dy + dx * dx) as f64).sqrt());
            if w > 0.0 {
                offsets.push((dy, dx, w));
            }
        }
    }
    let mut out = layer.clone();
    for &(dy, dx, w) in &offsets {
        for r in 0..rows {
            let sr = (r as isize + dy).clamp(0, rows as isize - 1) as usize;
            let src = &layer[sr * cols..(sr + 1) * cols];
            let dst = &mut out[r * cols..(r + 1) * cols];
            for (c, o) in dst.iter_mut().enumerate() {
                let sc = (c as isize + dx).clamp(0, cols as isize - 1) as usize;
                let v = w * src[sc];
                if v > *o {
                    *o = v;
                }
            }
        }
    }
    if grow_ink {
        out.iter_mut().for_each(|v| *v = 1.0 - *v);
    }
    GrayImage { pixels: out, ..img.clone() }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable Gaussian blur with edge-clamped borders. `sigma` in pixels.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma < 1e-6 {
        return img.clone();
    }
    let k = gaussian_kernel(sigma);
    let radius = (k.len() / 2) as isize;
    let (rows, cols) = img.dims();
    let mut tmp = vec![0.0; rows * cols];
    for r in 0..rows {
        let src = &img.pixels[r * cols..(r + 1) * cols];
        let dst = &mut tmp[r * cols..(r + 1) * cols];
        for (c, o) in dst.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (i, w) in k.iter().enumerate() {
                let sc = (c as isize + i as isize - radius).clamp(0, cols as isize - 1) as usize;
                acc += w * src[sc];
            }
            *o = acc;
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (i, w) in k.iter().enumerate() {
        for r in 0..rows {
            let sr = (r as isize + i as isize - radius).clamp(0, rows as isize - 1) as usize;
            let src = &tmp[sr * cols..(sr + 1) * cols];
            let dst = &mut out[r * cols..(r + 1) * cols];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += w * s;
            }
        }
    }
    GrayImage { pixels: out, ..img.clone() }
}

/// Run a template through the channel. Deterministic in `(t, p)`.
pub fn simulate_print_scan(t: &BinaryTemplate, p: &ChannelParams) -> Result<GrayImage> {
    p.validate()?;
    let up = upsample(t, p.pps);
    let mut dot_gain = p.dot_gain;
    if p.dot_gain_jitter > 0.0 {
        let mut jit_rng = ChaCha20Rng::seed_from_u64(p.seed);
        jit_rng.set_stream(2);
        let z: f64 = StandardNormal.sample(&mut jit_rng);
        dot_gain = (dot_gain + p.dot_gain_jitter * z).clamp(-0.5, 0.5);
    }
    let mut inked = apply_dot_gain(&up, dot_gain);
    if p.ink_noise_std > 0.0 {
        let mut ink_rng = ChaCha20Rng::seed_from_u64(p.seed);
        ink_rng.set_stream(1);
        let (n, m) = t.dims();
        let eta: Vec<f64> = (0..n * m)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut ink_rng);
                p.ink_noise_std * z
            })
            .collect();
        let cols = inked.cols;
        for (i, v) in inked.pixels.iter_mut().enumerate() {
            let (r, c) = (i / cols, i % cols);
            *v += eta[(r / p.pps) * m + c / p.pps];
        }
    }
    let mut img = gaussian_blur(&inked, p.psf_sigma * p.pps as f64);
    let mut rng = ChaCha20Rng::seed_from_u64(p.seed);
    for v in img.pixels.iter_mut() {
        let mut x = p.gain * *v + p.offset;
        if p.noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            x += p.noise_std * z;
        }
        *v = x.clamp(0.0, 1.0);
    }
    Ok(img)
}

/// Area-average resampling of one axis from `len` pixels at scale `from`
/// to `len * to / from` pixels.
fn area_weights(len: usize, from: usize, to: usize) -> Vec<Vec<(usize, f64)>> {
    let out_len = len * to / from;
    let step = from as f64 / to as f64;
    (0..out_len)
        .map(|i| {
            let (lo, hi) = (i as f64 * step, (i + 1) as f64 * step);
            let mut w = Vec::new();
            let mut j = lo.floor() as usize;
            while (j as f64) < hi && j < len {
                let overlap = (hi.min(j as f64 + 1.0) - lo.max(j as f64)).max(0.0);
                if overlap > 0.0 {
                    w.push((j, overlap / step));
                }
                j += 1;
            }
            w
        })
        .collect()
}

/// Simulate a lower-resolution acquisition by area averaging.
pub fn downscale(img: &GrayImage, target_pps: usize) -> Result<GrayImage> {
    if target_pps == 0 || target_pps > img.pps {
        return Err(Error::Parameter(format!(
            "cannot rescale pps {} to {target_pps}",
            img.pps
        )));
    }
    if target_pps == img.pps {
        return Ok(img.clone());
    }
    let (n, m) = img.symbol_dims().ok_or_else(|| {
        Error::Dimension(format!("{}x{} not divisible by pps {}", img.rows, img.cols, img.pps))
    })?;
    let wr = area_weights(img.rows, img.pps, target_pps);
    let wc = area_weights(img.cols, img.pps, target_pps);
    let (rows, cols) = (n * target_pps, m * target_pps);
    let mut tmp = vec![0.0; img.rows * cols];
    for r in 0..img.rows {
        let src = &img.pixels[r * img.cols..(r + 1) * img.cols];
        for (c, ws) in wc.iter().enumerate() {
            tmp[r * cols + c] = ws.iter().map(|&(j, w)| w * src[j]).sum();
        }
    }
    let mut out = vec![0.0; rows * cols];
    for (r, ws) in wr.iter().enumerate() {
        for &(j, w) in ws {
            for c in 0..cols {
                out[r * cols + c] += w * tmp[j * cols + c];
            }
        }
    }
    for v in out.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(GrayImage {
        rows,
        cols,
        pixels: out,
        pps: target_pps,
        provenance: img.provenance,
        printer: img.printer.clone(),
    })
}

/// Shift image content by `(dy, dx)` pixels, replicating edges.
pub fn translate(img: &GrayImage, dy: isize, dx: isize) -> GrayImage {
    let (rows, cols) = img.dims();
    let pixels = (0..rows * cols)
        .map(|i| {
            let sr = (i / cols) as isize - dy;
            let sc = (i % cols) as isize - dx;
            img.get(
                sr.clamp(0, rows as isize - 1) as usize,
                sc.clamp(0, cols as isize - 1) as usize,
            )
        })
        .collect();
    GrayImage { pixels, ..img.clone() }
}

/// Pad an image with a constant border of `margin` pixels on every side.
pub fn pad(img: &GrayImage, margin: usize, value: f64) -> GrayImage {
    let (rows, cols) = (img.rows + 2 * margin, img.cols + 2 * margin);
    let pixels = (0..rows * cols)
        .map(|i| {
            let (r, c) = (i / cols, i % cols);
            if r < margin || c < margin || r >= margin + img.rows || c >= margin + img.cols {
                value
            } else {
                img.get(r - margin, c - margin)
            }
        })
        .collect();
    GrayImage { rows, cols, pixels, ..img.clone() }
}

/// Result of integer-shift registration.
#[derive(Debug, Clone)]
pub struct Registration {
    pub image: GrayImage,
    /// Displacement of the probe content relative to the centred crop.
    pub shift: (isize, isize),
    /// Zero-mean normalized cross-correlation at the chosen shift.
    pub score: f64,
}

impl Registration {
    /// Translation that undoes the detected displacement.
    pub fn correction(&self) -> (isize, isize) {
        (-self.shift.0, -self.shift.1)
    }
}

/// Zero-mean normalized correlation between `reference` and the probe window
/// whose top-left corner sits at `(oy, ox)`; only in-bounds pixels count.
fn window_correlation(reference: &GrayImage, probe: &GrayImage, oy: isize, ox: isize) -> f64 {
    let (h, w) = reference.dims();
    let r0 = (-oy).max(0) as usize;
    let r1 = ((probe.rows as isize - oy).min(h as isize)).max(0) as usize;
    let c0 = (-ox).max(0) as usize;
    let c1 = ((probe.cols as isize - ox).min(w as isize)).max(0) as usize;
    if r1 <= r0 || c1 <= c0 {
        return 0.0;
    }
    let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in r0..r1 {
        let pr = (r as isize + oy) as usize;
        let a = &reference.pixels[r * w + c0..r * w + c1];
        let pc = (c0 as isize + ox) as usize;
        let b = &probe.pixels[pr * probe.cols + pc..pr * probe.cols + pc + (c1 - c0)];
        for (x, y) in a.iter().zip(b) {
            sa += x;
            sb += y;
            saa += x * x;
            sbb += y * y;
            sab += x * y;
        }
    }
    let n = ((r1 - r0) * (c1 - c0)) as f64;
    let cov = sab - sa * sb / n;
    let va = saa - sa * sa / n;
    let vb = sbb - sb * sb / n;
    if va <= 1e-12 || vb <= 1e-12 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Find the integer shift in `[-max_shift, max_shift]²` that best aligns the
/// probe with the upsampled template and return the aligned crop.
pub fn register(probe: &GrayImage, t: &BinaryTemplate, max_shift: usize) -> Result<Registration> {
    let reference = upsample(t, probe.pps);
    let (h, w) = reference.dims();
    if probe.rows < h || probe.cols < w {
        return Err(Error::Dimension(format!(
            "probe {}x{} smaller than template {}x{} at pps {}",
            probe.rows, probe.cols, h, w, probe.pps
        )));
    }
    let base = (((probe.rows - h) / 2) as isize, ((probe.cols - w) / 2) as isize);
    let s = max_shift as isize;
    let mut best = ((0, 0), window_correlation(&reference, probe, base.0, base.1));
    for dy in -s..=s {
        for dx in -s..=s {
            if (dy, dx) == (0, 0) {
                continue;
            }
            let score = window_correlation(&reference, probe, base.0 + dy, base.1 + dx);
            if score > best.1 {
                best = ((dy, dx), score);
            }
        }
    }
    let ((dy, dx), score) = best;
    let (oy, ox) = (base.0 + dy, base.1 + dx);
    let pixels = (0..h * w)
        .map(|i| {
            let pr = (i / w) as isize + oy;
            let pc = (i % w) as isize + ox;
            probe.get(
                pr.clamp(0, probe.rows as isize - 1) as usize,
                pc.clamp(0, probe.cols as isize - 1) as usize,
            )
        })
        .collect();
    let image = GrayImage {
        rows: h,
        cols: w,
        pixels,
        pps: probe.pps,
        provenance: probe.provenance,
        printer: probe.printer.clone(),
    };
    Ok(Registration {
        image,
        shift: (dy, dx),
        score,
    })
}
