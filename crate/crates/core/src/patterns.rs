//! Binary CDP templates and dataset manifests.
//!
//! Bit convention used everywhere in this crate: `0` is black ink, `1` is
//! white substrate. Density is the probability of black, `P[t = 0]`.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BLACK: u8 = 0;
pub const WHITE: u8 = 1;

/// Smallest side length accepted by [`generate_template`].
pub const MIN_SIDE: usize = 16;

/// A digital template: an `rows × cols` matrix over `{0, 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryTemplate {
    rows: usize,
    cols: usize,
    bits: Vec<u8>,
    /// Target probability of black used at generation (measured for loaded files).
    pub density: f64,
    pub id: u64,
    pub seed: u64,
}

impl BinaryTemplate {
    /// Build from row-major bits. Every entry must be 0 or 1.
    pub fn from_bits(rows: usize, cols: usize, bits: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Parameter("template must be non-empty".into()));
        }
        if bits.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} bits for a {rows}x{cols} template",
                bits.len()
            )));
        }
        if let Some(v) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::Parameter(format!("template bit {v} is not binary")));
        }
        let mut t = BinaryTemplate {
            rows,
            cols,
            bits,
            density: 0.0,
            id: 0,
            seed: 0,
        };
        t.density = measure_density(&t);
        Ok(t)
    }

    pub fn filled(rows: usize, cols: usize, bit: u8) -> Self {
        Self::from_bits(rows, cols, vec![bit.min(1); rows * cols]).expect("valid dims")
    }

    /// Checkerboard with black at even `(r + c)`.
    pub fn checkerboard(rows: usize, cols: usize) -> Self {
        let bits = (0..rows * cols)
            .map(|i| ((i / cols + i % cols) % 2) as u8)
            .collect();
        Self::from_bits(rows, cols, bits).expect("valid dims")
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

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.bits[r * self.cols + c]
    }

    /// Bitwise complement (black ↔ white).
    pub fn complement(&self) -> Self {
        let mut t = self.clone();
        t.bits.iter_mut().for_each(|b| *b = 1 - *b);
        t.density = 1.0 - t.density;
        t
    }

    /// Copy of the `h × w` window starting at `(r0, c0)`.
    pub fn crop(&self, r0: usize, c0: usize, h: usize, w: usize) -> Result<Self> {
        if r0 + h > self.rows || c0 + w > self.cols {
            return Err(Error::Dimension(format!(
                "crop {h}x{w}@({r0},{c0}) outside {}x{}",
                self.rows, self.cols
            )));
        }
        let bits = (r0..r0 + h)
            .flat_map(|r| self.bits[r * self.cols + c0..r * self.cols + c0 + w].iter().copied())
            .collect();
        let mut t = Self::from_bits(h, w, bits)?;
        t.id = self.id;
        t.seed = self.seed;
        Ok(t)
    }
}

/// Generate an i.i.d. template: each symbol is black with probability `density`.
///
/// The stream comes from ChaCha20 keyed by `seed`, so the same
/// `(rows, cols, density, seed)` gives the same bits on every platform.
pub fn generate_template(rows: usize, cols: usize, density: f64, seed: u64) -> Result<BinaryTemplate> {
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::Parameter(format!("density {density} outside (0, 1)")));
    }
    if rows < MIN_SIDE || cols < MIN_SIDE {
        return Err(Error::Parameter(format!(
            "template {rows}x{cols} smaller than {MIN_SIDE}x{MIN_SIDE}"
        )));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let bits = (0..rows * cols)
        .map(|_| if rng.gen::<f64>() < density { BLACK } else { WHITE })
        .collect();
    let mut t = BinaryTemplate::from_bits(rows, cols, bits)?;
    t.density = density;
    t.seed = seed;
    Ok(t)
}

/// Realized black fraction.
pub fn measure_density(t: &BinaryTemplate) -> f64 {
    let black = t.bits.iter().filter(|&&b| b == BLACK).count();
    black as f64 / t.bits.len() as f64
}

/// Write as 8-bit grayscale PNG (black = 0, white = 255).
pub fn save_template(t: &BinaryTemplate, path: &Path) -> Result<()> {
    let buf: Vec<u8> = t.bits.iter().map(|&b| b * 255).collect();
    let img = image::GrayImage::from_raw(t.cols as u32, t.rows as u32, buf)
        .expect("buffer matches dimensions");
    crate::io::write_atomic_with(path, |tmp| {
        img.save_with_format(tmp, image::ImageFormat::Png)
            .map_err(|e| Error::format(path, e.to_string()))
    })
}

/// Read a 1-bit, 8-bit or 16-bit grayscale PNG. Any pixel other than full
/// black or full white is a format error.
pub fn load_template(path: &Path) -> Result<BinaryTemplate> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::format(path, other.to_string()),
    })?;
    let luma = img.to_luma16();
    let (w, h) = luma.dimensions();
    let mut bits = Vec::with_capacity((w * h) as usize);
    for (i, p) in luma.pixels().enumerate() {
        match p.0[0] {
            0 => bits.push(BLACK),
            u16::MAX => bits.push(WHITE),
            v => {
                return Err(Error::format(
                    path,
                    format!(
                        "pixel {} at ({}, {}) is not binary",
                        v,
                        i / w as usize,
                        i % w as usize
                    ),
                ))
            }
        }
    }
    BinaryTemplate::from_bits(h as usize, w as usize, bits)
}

/// What a dataset entry is used for. Roles partition the dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    AttackTrain,
    AuthTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRef {
    pub printer_tag: String,
    pub ppi: u32,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: u64,
    pub density: f64,
    pub template_path: PathBuf,
    #[serde(default)]
    pub scans: Vec<ScanRef>,
    pub role: Role,
}

/// Dataset description; paths are resolved against the manifest's directory on load.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default, rename = "entry")]
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    pub fn by_role(&self, role: Role) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.role == role)
    }

    /// Check the role partition and (optionally) that every referenced file exists.
    pub fn validate(&self, check_files: bool) -> Result<()> {
        let mut seen: HashMap<&Path, Role> = HashMap::new();
        let mut ids: HashMap<u64, Role> = HashMap::new();
        for e in &self.entries {
            if let Some(prev) = seen.insert(e.template_path.as_path(), e.role) {
                if prev != e.role {
                    return Err(Error::Manifest(format!(
                        "template {} appears in both {prev:?} and {:?}",
                        e.template_path.display(),
                        e.role
                    )));
                }
                return Err(Error::Manifest(format!(
                    "template {} listed twice",
                    e.template_path.display()
                )));
            }
            if let Some(prev) = ids.insert(e.id, e.role) {
                return Err(Error::Manifest(format!(
                    "id {} duplicated ({prev:?} / {:?})",
                    e.id, e.role
                )));
            }
            if !(0.0..=1.0).contains(&e.density) {
                return Err(Error::Manifest(format!("entry {} density {}", e.id, e.density)));
            }
            if check_files {
                let paths =
                    std::iter::once(&e.template_path).chain(e.scans.iter().map(|s| &s.path));
                for p in paths {
                    if !p.is_file() {
                        return Err(Error::Manifest(format!(
                            "entry {}: missing file {}",
                            e.id,
                            p.display()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Parse a TOML manifest, resolve relative paths and validate it.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m: DatasetManifest =
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    for e in &mut m.entries {
        resolve(&mut e.template_path);
        for s in &mut e.scans {
            resolve(&mut s.path);
        }
    }
    m.validate(true)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_of_trivial_templates() {
        assert_eq!(measure_density(&BinaryTemplate::filled(4, 4, WHITE)), 0.0);
        assert_eq!(measure_density(&BinaryTemplate::filled(4, 4, BLACK)), 1.0);
        assert_eq!(measure_density(&BinaryTemplate::checkerboard(2, 2)), 0.5);
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_template(16, 16, 0.5, 42).unwrap();
        let b = generate_template(16, 16, 0.5, 42).unwrap();
        assert_eq!(a.bits(), b.bits());
        let c = generate_template(16, 16, 0.5, 43).unwrap();
        assert_ne!(a.bits(), c.bits());
    }

    #[test]
    fn generation_rejects_bad_parameters() {
        for d in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(generate_template(16, 16, d, 0), Err(Error::Parameter(_))));
        }
        assert!(generate_template(15, 16, 0.5, 0).is_err());
    }

    #[test]
    fn full_size_code_density() {
        let t = generate_template(228, 228, 0.5, 7).unwrap();
        assert_eq!(t.dims(), (228, 228));
        assert!((measure_density(&t) - 0.5).abs() < 0.01);
    }

    #[test]
    fn low_density_within_binomial_bound() {
        // 64x64 at p = 0.3: sd = sqrt(p(1-p)/4096) ~ 0.00716, so +-0.05 is ~7 sd.
        for seed in 0..100 {
            let d = measure_density(&generate_template(64, 64, 0.3, seed).unwrap());
            assert!((0.25..=0.35).contains(&d), "seed {seed}: {d}");
        }
    }

    #[test]
    fn large_template_density_converges() {
        let t = generate_template(512, 512, 0.4, 3).unwrap();
        assert!((measure_density(&t) - 0.4).abs() < 0.01);
    }

    #[test]
    fn neighbours_are_uncorrelated() {
        let (mut sxy, mut sx, mut sy, mut sxx, mut syy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for seed in 0..1000 {
            let t = generate_template(16, 16, 0.5, seed).unwrap();
            for r in 0..16 {
                for c in 0..15 {
                    let (x, y) = (t.get(r, c) as f64, t.get(r, c + 1) as f64);
                    sxy += x * y;
                    sx += x;
                    sy += y;
                    sxx += x * x;
                    syy += y * y;
                    n += 1.0;
                }
            }
        }
        let cov = sxy / n - sx / n * sy / n;
        let r = cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt();
        assert!(r.abs() < 0.05, "r = {r}");
    }

    #[test]
    fn png_round_trip_and_rejects_gray() {
        let dir = tempfile::tempdir().unwrap();
        let t = generate_template(228, 228, 0.35, 11).unwrap();
        let p = dir.path().join("t.png");
        save_template(&t, &p).unwrap();
        let back = load_template(&p).unwrap();
        assert_eq!(back.bits(), t.bits());
        assert_eq!(back.dims(), (228, 228));

        let gray = image::GrayImage::from_fn(16, 16, |x, _| image::Luma([if x == 3 { 128 } else { 0 }]));
        let gp = dir.path().join("gray.png");
        gray.save(&gp).unwrap();
        assert!(matches!(load_template(&gp), Err(Error::Format { .. })));
    }

    #[test]
    fn manifest_rejects_role_overlap() {
        let dir = tempfile::tempdir().unwrap();
        let t = generate_template(16, 16, 0.5, 1).unwrap();
        save_template(&t, &dir.path().join("a.png")).unwrap();
        let text = r#"
[[entry]]
id = 0
density = 0.5
template_path = "a.png"
role = "attack-train"

[[entry]]
id = 1
density = 0.5
template_path = "a.png"
role = "auth-test"
"#;
        let mp = dir.path().join("m.toml");
        fs::write(&mp, text).unwrap();
        let err = load_manifest(&mp).unwrap_err();
        assert!(err.to_string().contains("both"), "{err}");
    }

    #[test]
    fn manifest_reports_missing_files() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"
[[entry]]
id = 0
density = 0.3
template_path = "nope.png"
role = "auth-test"
"#;
        let mp = dir.path().join("m.toml");
        fs::write(&mp, text).unwrap();
        assert!(matches!(load_manifest(&mp), Err(Error::Manifest(_))));
    }

    #[test]
    fn manifest_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let t = generate_template(16, 16, 0.5, 1).unwrap();
        save_template(&t, &dir.path().join("a.png")).unwrap();
        save_template(&t, &dir.path().join("a_scan.png")).unwrap();
        let text = r#"
[[entry]]
id = 0
density = 0.5
template_path = "a.png"
role = "attack-train"

[[entry.scans]]
printer_tag = "P55"
ppi = 6400
path = "a_scan.png"
"#;
        let mp = dir.path().join("m.toml");
        fs::write(&mp, text).unwrap();
        let m = load_manifest(&mp).unwrap();
        assert_eq!(m.entries[0].template_path, dir.path().join("a.png"));
        assert_eq!(m.entries[0].scans[0].ppi, 6400);
        assert_eq!(m.by_role(Role::AttackTrain).count(), 1);
    }
}
