//! ROC/AUC, kernel densities, scatter data, decision rasters and the report
//! bundle (CSV tables, SVG figures, manifest).
//!
//! The fake class is the positive class throughout: a higher score means
//! "more likely fake". Similarity metrics are flipped (`s ↦ 1 − s`) first.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::authmetrics::{MetricVector, ProbeClass, ScoredProbe};
use crate::classify::SvmModel;
use crate::error::{Error, Result};
use crate::io::{fmt_f, write_atomic, CsvTable};

/// Header line attached to every ROC-derived table.
pub const POSITIVE_CLASS_NOTE: &str = "positive class = fake; similarity scores flipped as 1 - s";

pub const KDE_GRID: usize = 512;

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(fpr, tpr)` from the strictest threshold to the loosest, starting
    /// at `(0, 0)` and ending at `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
    pub flipped: bool,
}

/// ROC over every distinct pooled score. A probe is called fake when its
/// (possibly flipped) score is at least the threshold.
pub fn roc(orig_scores: &[f64], fake_scores: &[f64], flip: bool) -> Result<RocCurve> {
    if orig_scores.is_empty() || fake_scores.is_empty() {
        return Err(Error::Parameter("roc needs at least one score per class".into()));
    }
    if orig_scores.iter().chain(fake_scores).any(|v| !v.is_finite()) {
        return Err(Error::Parameter("roc scores must be finite".into()));
    }
    let orient = |v: f64| if flip { 1.0 - v } else { v };
    // (score, is_fake), sorted by descending score.
    let mut pooled: Vec<(f64, bool)> = orig_scores
        .iter()
        .map(|&v| (orient(v), false))
        .chain(fake_scores.iter().map(|&v| (orient(v), true)))
        .collect();
    pooled.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (no, nf) = (orig_scores.len() as f64, fake_scores.len() as f64);
    let mut points = vec![(0.0, 0.0)];
    let (mut fp, mut tp) = (0usize, 0usize);
    let mut i = 0;
    while i < pooled.len() {
        let s = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == s {
            if pooled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / no, tp as f64 / nf));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum();
    Ok(RocCurve { points, auc, flipped: flip })
}

/// Whether a metric is a similarity (higher = more original-like) and must
/// be flipped for ROC.
pub fn is_similarity(metric: &str) -> bool {
    metric != "hamming"
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityCurve {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub bandwidth: f64,
}

impl DensityCurve {
    /// Trapezoidal integral over the grid.
    pub fn integral(&self) -> f64 {
        self.grid
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) * 0.5)
            .sum()
    }
}

fn quantile_sorted(v: &[f64], q: f64) -> f64 {
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Silverman's rule of thumb, `0.9 · min(σ, IQR/1.34) · n^(-1/5)`. Falls
/// back to σ when the IQR is zero.
pub fn silverman_bandwidth(scores: &[f64]) -> f64 {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let sd = (scores.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Gaussian KDE on a [`KDE_GRID`]-point grid spanning the data ± 3
/// bandwidths.
pub fn kde(scores: &[f64], bandwidth: Option<f64>) -> Result<DensityCurve> {
    if scores.len() < 2 {
        return Err(Error::Parameter(format!("kde needs >= 2 scores, got {}", scores.len())));
    }
    if scores.iter().any(|v| !v.is_finite()) {
        return Err(Error::Parameter("kde scores must be finite".into()));
    }
    let h = bandwidth.unwrap_or_else(|| silverman_bandwidth(scores));
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!("kde bandwidth {h} must be > 0 (constant scores?)")));
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * h;
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * h;
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    let grid: Vec<f64> = (0..KDE_GRID).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (scores.len() as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let density = grid
        .iter()
        .map(|&x| {
            norm * scores
                .iter()
                .map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp())
                .sum::<f64>()
        })
        .collect();
    Ok(DensityCurve {
        grid,
        density,
        bandwidth: h,
    })
}

/// All six metric pairs `(i, j)` with `i < j`.
pub fn metric_pairs() -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            out.push((i, j));
        }
    }
    out
}

pub fn pair_name((i, j): (usize, usize)) -> String {
    format!("{}-{}", MetricVector::NAMES[i], MetricVector::NAMES[j])
}

/// Long-format table of every probe in every metric pair.
pub fn scatter_table(rows: &[ScoredProbe]) -> CsvTable {
    let mut t = CsvTable::new(["pair", "code_id", "printer", "class", "x", "y"]);
    for p in metric_pairs() {
        let name = pair_name(p);
        for r in rows {
            let v = r.vector.to_array();
            t.push([
                name.clone(),
                r.code_id.to_string(),
                r.printer.clone(),
                r.class.name().to_string(),
                fmt_f(v[p.0], 6),
                fmt_f(v[p.1], 6),
            ]);
        }
    }
    t
}

/// Decision signs of a two-feature model over a grid in standardized
/// coordinates. `signs` is row-major with row 0 at `y_range.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRegion {
    pub pair: (usize, usize),
    pub resolution: usize,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// +1 where the model accepts (original), −1 otherwise.
    pub signs: Vec<i8>,
}

impl DecisionRegion {
    pub fn coord(&self, k: usize, range: (f64, f64)) -> f64 {
        range.0 + (range.1 - range.0) * k as f64 / (self.resolution - 1) as f64
    }

    pub fn sign_at(&self, row: usize, col: usize) -> i8 {
        self.signs[row * self.resolution + col]
    }
}

/// Rasterize the decision function over the support-vector bounding box
/// widened by one standardized unit on each side.
pub fn decision_region(model: &SvmModel, pair: (usize, usize), resolution: usize) -> Result<DecisionRegion> {
    if model.dims() != 2 {
        return Err(Error::Dimension(format!(
            "decision region needs a model trained on one metric pair, got {} features",
            model.dims()
        )));
    }
    if model.support_vectors.is_empty() {
        return Err(Error::Parameter("model has no support vectors".into()));
    }
    if resolution < 2 {
        return Err(Error::Parameter(format!("resolution {resolution} must be >= 2")));
    }
    let bounds = |k: usize| {
        let it = model.support_vectors.iter().map(|v| v[k]);
        let lo = it.clone().fold(f64::INFINITY, f64::min);
        let hi = it.fold(f64::NEG_INFINITY, f64::max);
        (lo - 1.0, hi + 1.0)
    };
    let (x_range, y_range) = (bounds(0), bounds(1));
    let mut region = DecisionRegion {
        pair,
        resolution,
        x_range,
        y_range,
        signs: Vec::with_capacity(resolution * resolution),
    };
    for r in 0..resolution {
        let y = region.coord(r, y_range);
        for c in 0..resolution {
            let x = region.coord(c, x_range);
            let d = model.decision_standardized(&[x, y]);
            region.signs.push(if d > 0.0 { 1 } else { -1 });
        }
    }
    Ok(region)
}

pub fn decision_table(region: &DecisionRegion) -> CsvTable {
    let mut t = CsvTable::new(["row", "col", "x", "y", "sign"]);
    t.comment(format!("pair {} in standardized units", pair_name(region.pair)));
    for r in 0..region.resolution {
        for c in 0..region.resolution {
            t.push([
                r.to_string(),
                c.to_string(),
                fmt_f(region.coord(c, region.x_range), 6),
                fmt_f(region.coord(r, region.y_range), 6),
                region.sign_at(r, c).to_string(),
            ]);
        }
    }
    t
}

/// One estimator's error over a set of held-out codes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub printer: String,
    pub estimator: String,
    pub density: f64,
    pub p_error_mean: f64,
    pub p_error_std: f64,
    pub codes: usize,
}

/// Estimators as rows, densities as columns.
pub fn attack_table(results: &[AttackResult]) -> CsvTable {
    let mut densities: Vec<f64> = results.iter().map(|r| r.density).collect();
    densities.sort_by(f64::total_cmp);
    densities.dedup();
    let mut header = vec!["printer".to_string(), "estimator".to_string()];
    header.extend(densities.iter().map(|d| format!("d{:.0}", d * 100.0)));
    let mut t = CsvTable::new(header);
    t.comment("mean P_error (%) over held-out codes");
    let mut keys: Vec<(String, String)> = Vec::new();
    for r in results {
        let k = (r.printer.clone(), r.estimator.clone());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    for (printer, est) in keys {
        let mut row = vec![printer.clone(), est.clone()];
        for d in &densities {
            let v = results
                .iter()
                .find(|r| r.printer == printer && r.estimator == est && r.density == *d)
                .map(|r| fmt_f(r.p_error_mean, 2))
                .unwrap_or_default();
            row.push(v);
        }
        t.push(row);
    }
    t
}

/// Long-format attack table with spreads and code counts.
pub fn attack_detail_table(results: &[AttackResult]) -> CsvTable {
    let mut t = CsvTable::new(["printer", "estimator", "density", "p_error_mean", "p_error_std", "codes"]);
    for r in results {
        t.push([
            r.printer.clone(),
            r.estimator.clone(),
            fmt_f(r.density, 2),
            fmt_f(r.p_error_mean, 4),
            fmt_f(r.p_error_std, 4),
            r.codes.to_string(),
        ]);
    }
    t
}

pub fn parse_attack_detail_table(text: &str) -> Result<Vec<AttackResult>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().filter(|l| !l.starts_with('#') && !l.is_empty()).enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::Parameter(format!("attack table row {i}: {line:?}"));
        if f.len() != 6 {
            return Err(bad());
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        out.push(AttackResult {
            printer: f[0].to_string(),
            estimator: f[1].to_string(),
            density: num(f[2])?,
            p_error_mean: num(f[3])?,
            p_error_std: num(f[4])?,
            codes: f[5].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// AUC per metric, originals vs one fake population.
pub fn auc_table(rows: &[(String, String, [f64; 4])]) -> CsvTable {
    let mut header = vec!["defender".to_string(), "fakes".to_string()];
    header.extend(MetricVector::NAMES.iter().map(|n| format!("auc_{n}")));
    let mut t = CsvTable::new(header);
    t.comment(POSITIVE_CLASS_NOTE);
    for (d, f, aucs) in rows {
        let mut row = vec![d.clone(), f.clone()];
        row.extend(aucs.iter().map(|&a| fmt_f(a, 6)));
        t.push(row);
    }
    t
}

/// AUC of every metric separating `originals` from `fakes`.
pub fn metric_aucs(originals: &[MetricVector], fakes: &[MetricVector]) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (k, name) in MetricVector::NAMES.iter().enumerate() {
        let o: Vec<f64> = originals.iter().map(|v| v.to_array()[k]).collect();
        let f: Vec<f64> = fakes.iter().map(|v| v.to_array()[k]).collect();
        out[k] = roc(&o, &f, is_similarity(name))?.auc;
    }
    Ok(out)
}

// ---- SVG ----

#[derive(Debug, Clone, PartialEq)]
pub enum SeriesStyle {
    Line,
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub style: SeriesStyle,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            series: Vec::new(),
        }
    }

    pub fn add(mut self, label: &str, style: SeriesStyle, points: Vec<(f64, f64)>) -> Self {
        self.series.push(Series {
            label: label.into(),
            style,
            points,
        });
        self
    }

    /// Axes, series and legend; nothing else.
    pub fn to_svg(&self) -> String {
        let (w, h) = (480.0, 360.0);
        let (l, r, t, b) = (60.0, 20.0, 30.0, 45.0);
        let all = self.series.iter().flat_map(|s| s.points.iter()).filter(|p| p.0.is_finite() && p.1.is_finite());
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in all {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| l + (x - x0) / (x1 - x0) * (w - l - r);
        let sy = |y: f64| h - b - (y - y0) / (y1 - y0) * (h - t - b);
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#,
            w / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<path d="M{l} {t} V{} H{}" fill="none" stroke="black"/>"#,
            h - b,
            w - r
        );
        for k in 0..=4 {
            let fx = x0 + (x1 - x0) * k as f64 / 4.0;
            let fy = y0 + (y1 - y0) * k as f64 / 4.0;
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{}" text-anchor="middle">{}</text>"#,
                sx(fx),
                h - b + 14.0,
                fmt_tick(fx)
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{:.1}" text-anchor="end">{}</text>"#,
                l - 4.0,
                sy(fy) + 4.0,
                fmt_tick(fy)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            (l + w - r) / 2.0,
            h - 8.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            (t + h - b) / 2.0,
            (t + h - b) / 2.0,
            escape(&self.y_label)
        );
        for (i, series) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            match series.style {
                SeriesStyle::Line => {
                    let d: Vec<String> = series
                        .points
                        .iter()
                        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                        .collect();
                    let _ = writeln!(
                        s,
                        r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                        d.join(" ")
                    );
                }
                SeriesStyle::Points => {
                    for &(x, y) in &series.points {
                        let _ = writeln!(
                            s,
                            r#"<circle cx="{:.2}" cy="{:.2}" r="1.8" fill="{color}" fill-opacity="0.6"/>"#,
                            sx(x),
                            sy(y)
                        );
                    }
                }
            }
            let ly = t + 14.0 * i as f64 + 6.0;
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
                w - r - 110.0,
                ly,
                w - r - 96.0,
                ly + 9.0,
                escape(&series.label)
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.to_string() }
}

// ---- bundle ----

/// Everything needed to reproduce a report.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub config: String,
    pub seeds: BTreeMap<String, u64>,
    /// Relative path → SHA-256 (hex) of every dataset file used.
    pub dataset_hashes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default)]
pub struct ReportInput {
    pub manifest: ReportManifest,
    pub attack: Vec<AttackResult>,
    pub probes: Vec<ScoredProbe>,
    /// Pre-rendered tables copied verbatim, by file stem.
    pub tables: BTreeMap<String, CsvTable>,
    pub regions: Vec<(String, DecisionRegion)>,
}

fn vectors_of<'a>(probes: &'a [ScoredProbe], printer: &str, class: ProbeClass) -> Vec<&'a MetricVector> {
    probes
        .iter()
        .filter(|p| p.class == class && p.printer == printer)
        .map(|p| &p.vector)
        .collect()
}

/// Write `tables/*.csv`, `figures/*.svg` and `manifest.json` under `dir`.
/// Returns the files written, relative to `dir`.
pub fn emit_report(dir: &Path, input: &ReportInput) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let stamp = format!("config {}", input.manifest.config_hash);
    let mut put_table = |name: &str, mut table: CsvTable| -> Result<()> {
        table.comments.insert(0, stamp.clone());
        let rel = PathBuf::from("tables").join(format!("{name}.csv"));
        table.write(&dir.join(&rel))?;
        written.push(rel);
        Ok(())
    };
    if !input.attack.is_empty() {
        put_table("attack_p_error", attack_table(&input.attack))?;
        put_table("attack_p_error_detail", attack_detail_table(&input.attack))?;
    }
    for (name, t) in &input.tables {
        put_table(name, t.clone())?;
    }
    let mut figures: Vec<(String, Plot)> = Vec::new();

    if !input.probes.is_empty() {
        put_table("scatter", scatter_table(&input.probes))?;
        let mut auc_rows = Vec::new();
        let originals: Vec<&str> = {
            let mut v: Vec<&str> = input
                .probes
                .iter()
                .filter(|p| p.class == ProbeClass::Original)
                .map(|p| p.printer.as_str())
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        for printer in originals {
            let o: Vec<MetricVector> = vectors_of(&input.probes, printer, ProbeClass::Original).into_iter().copied().collect();
            // Same-printer fakes are tagged "<estimating printer>/<printing printer>".
            let mut families: Vec<&str> = input
                .probes
                .iter()
                .filter(|p| p.class != ProbeClass::Original && p.printer.ends_with(&format!("/{printer}")))
                .map(|p| p.printer.as_str())
                .collect();
            families.sort_unstable();
            families.dedup();
            for fam in families {
                let f: Vec<MetricVector> = input
                    .probes
                    .iter()
                    .filter(|p| p.class != ProbeClass::Original && p.printer == fam)
                    .map(|p| p.vector)
                    .collect();
                if o.is_empty() || f.is_empty() {
                    continue;
                }
                let aucs = metric_aucs(&o, &f)?;
                auc_rows.push((printer.to_string(), fam.to_string(), aucs));
                let tag = format!("{}_vs_{}", printer, fam.replace('/', "-"));
                let mut plot = Plot::new(&format!("ROC {printer} originals vs {fam} fakes"), "FPR", "TPR");
                for (k, name) in MetricVector::NAMES.iter().enumerate() {
                    let ov: Vec<f64> = o.iter().map(|v| v.to_array()[k]).collect();
                    let fv: Vec<f64> = f.iter().map(|v| v.to_array()[k]).collect();
                    let c = roc(&ov, &fv, is_similarity(name))?;
                    plot = plot.add(&format!("{name} {:.3}", c.auc), SeriesStyle::Line, c.points);
                }
                figures.push((format!("roc_{tag}"), plot));
                for (k, name) in MetricVector::NAMES.iter().enumerate() {
                    let mut plot = Plot::new(&format!("{name}: {printer} vs {fam}"), name, "density");
                    for (label, pop) in [("original", &o), ("fake", &f)] {
                        let v: Vec<f64> = pop.iter().map(|m| m.to_array()[k]).collect();
                        if let Ok(curve) = kde(&v, None) {
                            plot = plot.add(label, SeriesStyle::Line, curve.grid.into_iter().zip(curve.density).collect());
                        }
                    }
                    figures.push((format!("kde_{name}_{tag}"), plot));
                }
            }
        }
        if !auc_rows.is_empty() {
            put_table("metric_auc", auc_table(&auc_rows))?;
        }
        for p in metric_pairs() {
            let mut plot = Plot::new(&pair_name(p), MetricVector::NAMES[p.0], MetricVector::NAMES[p.1]);
            let mut groups: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            for r in &input.probes {
                let v = r.vector.to_array();
                groups
                    .entry(format!("{} {}", r.printer, r.class.name()))
                    .or_default()
                    .push((v[p.0], v[p.1]));
            }
            for (label, pts) in groups {
                plot = plot.add(&label, SeriesStyle::Points, pts);
            }
            figures.push((format!("scatter_{}", pair_name(p)), plot));
        }
    }

    if !input.attack.is_empty() {
        let mut plot = Plot::new("Template estimation error", "density", "P_error (%)");
        let mut keys: Vec<(String, String)> = Vec::new();
        for r in &input.attack {
            let k = (r.printer.clone(), r.estimator.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        for (printer, est) in keys {
            let mut pts: Vec<(f64, f64)> = input
                .attack
                .iter()
                .filter(|r| r.printer == printer && r.estimator == est)
                .map(|r| (r.density, r.p_error_mean))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            plot = plot.add(&format!("{est} {printer}"), SeriesStyle::Line, pts);
        }
        figures.push(("attack_p_error".into(), plot));
    }

    for (name, region) in &input.regions {
        put_table(&format!("region_{name}"), decision_table(region))?;
        let mut acc = Vec::new();
        let mut rej = Vec::new();
        for r in 0..region.resolution {
            for c in 0..region.resolution {
                let pt = (region.coord(c, region.x_range), region.coord(r, region.y_range));
                if region.sign_at(r, c) > 0 { acc.push(pt) } else { rej.push(pt) }
            }
        }
        let plot = Plot::new(
            &format!("decision region {name}"),
            &format!("{} (standardized)", MetricVector::NAMES[region.pair.0]),
            &format!("{} (standardized)", MetricVector::NAMES[region.pair.1]),
        )
        .add("accept", SeriesStyle::Points, acc)
        .add("reject", SeriesStyle::Points, rej);
        figures.push((format!("region_{name}"), plot));
    }

    for (name, plot) in figures {
        let rel = PathBuf::from("figures").join(format!("{name}.svg"));
        write_atomic(&dir.join(&rel), plot.to_svg().as_bytes())?;
        written.push(rel);
    }
    let manifest = serde_json::to_string_pretty(&input.manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), manifest.as_bytes())?;
    written.push(PathBuf::from("manifest.json"));
    Ok(written)
}
