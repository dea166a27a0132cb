//! Pipeline stages. Each stage reads only files written by earlier stages
//! and writes its own outputs atomically under the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cdp_core::attack::{evaluate, lda_train, loss_table, train_estimator, EstimatorKind, EstimatorModel};
use cdp_core::authmetrics::{metric_vector, metrics_table, parse_metrics_table, ProbeClass, ScoredProbe};
use cdp_core::classify::{evaluate_protocol, protocol_table, train_one_class, ProtocolConfig, ProtocolRow, SvmKind};
use cdp_core::evalreport::{
    attack_detail_table, decision_region, emit_report, metric_pairs, pair_name, parse_attack_detail_table,
    AttackResult, ReportInput, ReportManifest,
};
use cdp_core::io::{write_atomic, CsvTable};
use cdp_core::par;
use cdp_core::patterns::{
    generate_template, load_manifest, load_template, save_template, BinaryTemplate, DatasetManifest, ManifestEntry,
    Role,
};
use cdp_core::printchan::{downscale, simulate_print_scan, GrayImage, ATTACK_PPS, AUTH_PPS};

use crate::config::{parse_subset, ExperimentConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Generate,
    Printsim,
    Attack,
    Fakes,
    Authenticate,
    Classify,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Generate,
        Stage::Printsim,
        Stage::Attack,
        Stage::Fakes,
        Stage::Authenticate,
        Stage::Classify,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Printsim => "printsim",
            Stage::Attack => "attack",
            Stage::Fakes => "fakes",
            Stage::Authenticate => "authenticate",
            Stage::Classify => "classify",
            Stage::Report => "report",
        }
    }

    fn upstream(self) -> &'static [Stage] {
        match self {
            Stage::Generate => &[],
            Stage::Printsim => &[Stage::Generate],
            Stage::Attack => &[Stage::Printsim],
            Stage::Fakes => &[Stage::Attack],
            Stage::Authenticate => &[Stage::Fakes],
            Stage::Classify => &[Stage::Authenticate],
            Stage::Report => &[Stage::Attack, Stage::Classify],
        }
    }

    /// The configuration this stage's outputs depend on directly.
    fn section(self, cfg: &ExperimentConfig) -> String {
        fn ser<T: Serialize>(v: &T) -> String {
            toml::to_string(v).expect("config section serializes")
        }
        match self {
            Stage::Generate => format!("seed={}\n{}", cfg.seed, ser(&cfg.templates)),
            Stage::Printsim => ser(&cfg.printers),
            Stage::Attack => ser(&cfg.attack),
            Stage::Fakes => format!("{}{}", ser(&cfg.fakes), ser(&cfg.printers)),
            Stage::Authenticate => ser(&cfg.auth),
            Stage::Classify => ser(&cfg.classify),
            Stage::Report => ser(&cfg.report),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tag_key(tag: &str) -> u64 {
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

const STREAM_TEMPLATE: u64 = 1;
const STREAM_PRINT: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_FAKE: u64 = 4;
const STREAM_CLASSIFY: u64 = 5;

fn derive(seed: u64, stream: u64, key: u64) -> u64 {
    mix(mix(seed ^ mix(stream)) ^ key)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Stamp {
    stage: String,
    hash: String,
}

/// Output directory plus the resolved configuration.
pub struct Workspace {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Code {
    pub id: u64,
    pub density: f64,
    pub role: Role,
}

fn code_file(id: u64) -> String {
    format!("code_{id:05}.png")
}

impl Workspace {
    pub fn new(cfg: ExperimentConfig, out: Option<PathBuf>) -> Self {
        let out = out.unwrap_or_else(|| cfg.out.clone());
        Workspace { cfg, out }
    }

    pub fn config_hash(&self) -> String {
        sha256_hex(self.cfg.to_toml().as_bytes())
    }

    pub fn template_dir(&self) -> PathBuf {
        self.out.join("templates")
    }

    pub fn template_path(&self, id: u64) -> PathBuf {
        self.template_dir().join(code_file(id))
    }

    pub fn scan_path(&self, tag: &str, pps: usize, id: u64) -> PathBuf {
        self.out.join("scans").join(tag).join(format!("pps{pps}")).join(code_file(id))
    }

    pub fn estimate_path(&self, tag: &str, kind: EstimatorKind, id: u64) -> PathBuf {
        self.out.join("estimates").join(tag).join(kind.name()).join(code_file(id))
    }

    pub fn model_path(&self, tag: &str, kind: EstimatorKind, density: f64) -> PathBuf {
        self.out
            .join("models")
            .join(tag)
            .join(format!("{}_d{:.0}.json", kind.name(), density * 100.0))
    }

    pub fn attack_result_path(&self, tag: &str, kind: EstimatorKind) -> PathBuf {
        self.out.join("attack").join(format!("{tag}_{}.csv", kind.name()))
    }

    pub fn fake_path(&self, est_tag: &str, print_tag: &str, id: u64) -> PathBuf {
        self.out
            .join("fakes")
            .join(format!("{est_tag}-{print_tag}"))
            .join(code_file(id))
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.out.join("metrics").join("metrics.csv")
    }

    pub fn table_path(&self, name: &str) -> PathBuf {
        self.out.join("tables").join(format!("{name}.csv"))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.join("report")
    }

    fn stamp_path(&self, stage: Stage) -> PathBuf {
        self.out.join("stages").join(format!("{}.json", stage.name()))
    }

    fn read_stamp(&self, stage: Stage) -> Option<Stamp> {
        let text = fs::read_to_string(self.stamp_path(stage)).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Content hash of a stage: its config section chained with the
    /// hashes its upstream stages recorded.
    fn stage_hash(&self, stage: Stage) -> String {
        let mut h = Sha256::new();
        h.update(stage.name());
        h.update(stage.section(&self.cfg));
        for up in stage.upstream() {
            let prev = self.read_stamp(*up).map(|s| s.hash).unwrap_or_default();
            h.update(prev);
        }
        hex::encode(h.finalize())
    }

    fn up_to_date(&self, stage: Stage) -> bool {
        self.read_stamp(stage).is_some_and(|s| s.hash == self.stage_hash(stage))
    }

    fn write_stamp(&self, stage: Stage) -> Result<()> {
        let stamp = Stamp {
            stage: stage.name().into(),
            hash: self.stage_hash(stage),
        };
        write_atomic(&self.stamp_path(stage), serde_json::to_string_pretty(&stamp)?.as_bytes())?;
        Ok(())
    }

    /// Fail with a pointer to the stage that should have produced `path`.
    fn require(&self, path: &Path, producer: Stage) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            bail!(
                "missing {} (produced by stage `{}`); run `cdpbench {}` first",
                path.display(),
                producer.name(),
                producer.name()
            )
        }
    }

    /// Every code, in id order: density-major, then index within density.
    pub fn codes(&self) -> Vec<Code> {
        let t = &self.cfg.templates;
        let mut out = Vec::with_capacity(t.count * t.densities.len());
        for (di, &density) in t.densities.iter().enumerate() {
            for k in 0..t.count {
                out.push(Code {
                    id: (di * t.count + k) as u64,
                    density,
                    role: if k < self.cfg.attack.train_codes {
                        Role::AttackTrain
                    } else {
                        Role::AuthTest
                    },
                });
            }
        }
        out
    }

    /// Held-out codes at the densities used for fakes and authentication.
    pub fn auth_codes(&self) -> Vec<Code> {
        let dens = self.cfg.fake_densities();
        self.codes()
            .into_iter()
            .filter(|c| c.role == Role::AuthTest && dens.contains(&c.density))
            .collect()
    }

    fn load_template(&self, id: u64) -> Result<BinaryTemplate> {
        let p = self.template_path(id);
        self.require(&p, Stage::Generate)?;
        Ok(load_template(&p)?)
    }

    fn load_scan(&self, tag: &str, pps: usize, id: u64) -> Result<GrayImage> {
        let p = self.scan_path(tag, pps, id);
        self.require(&p, Stage::Printsim)?;
        Ok(GrayImage::load_png(&p, pps)?)
    }

    fn printer_tags(&self, only: Option<&str>) -> Result<Vec<String>> {
        match only {
            Some(t) => {
                self.cfg.printer(t)?;
                Ok(vec![t.to_string()])
            }
            None => Ok(self.cfg.printers.keys().cloned().collect()),
        }
    }

    fn run_stage(&self, stage: Stage, full: bool, body: impl FnOnce() -> Result<()>) -> Result<()> {
        if full && self.up_to_date(stage) {
            info!("{}: up to date", stage.name());
            return Ok(());
        }
        info!("{}: running", stage.name());
        body().with_context(|| format!("stage {}", stage.name()))?;
        if full {
            self.write_stamp(stage)?;
        }
        Ok(())
    }

    // ---- stages ----

    pub fn generate(&self) -> Result<()> {
        self.run_stage(Stage::Generate, true, || {
            let t = &self.cfg.templates;
            let codes = self.codes();
            let results = par::map(&codes, |c| -> Result<ManifestEntry> {
                let seed = derive(self.cfg.seed, STREAM_TEMPLATE, c.id);
                let tpl = generate_template(t.rows, t.cols, c.density, seed)?;
                save_template(&tpl, &self.template_path(c.id))?;
                Ok(ManifestEntry {
                    id: c.id,
                    density: c.density,
                    template_path: PathBuf::from(code_file(c.id)),
                    scans: Vec::new(),
                    role: c.role,
                })
            });
            let manifest = DatasetManifest {
                entries: results.into_iter().collect::<Result<_>>()?,
            };
            write_atomic(&self.template_dir().join("manifest.toml"), manifest.to_toml().as_bytes())?;
            Ok(())
        })
    }

    /// Load and check the template manifest written by `generate`.
    pub fn manifest(&self) -> Result<DatasetManifest> {
        let p = self.template_dir().join("manifest.toml");
        self.require(&p, Stage::Generate)?;
        let m = load_manifest(&p)?;
        if m.entries.len() != self.codes().len() {
            bail!(
                "{} lists {} codes but the config asks for {}; rerun `cdpbench generate`",
                p.display(),
                m.entries.len(),
                self.codes().len()
            );
        }
        Ok(m)
    }

    /// Print and scan every template at the attack resolution, and derive
    /// the authentication-resolution acquisition from the same print.
    pub fn printsim(&self, only: Option<&str>) -> Result<()> {
        let tags = self.printer_tags(only)?;
        self.run_stage(Stage::Printsim, only.is_none(), || {
            self.manifest()?;
            let codes = self.codes();
            for tag in &tags {
                let p = self.cfg.printer(tag)?;
                let p = p.with_seed(derive(self.cfg.seed, STREAM_PRINT, p.seed));
                par::map(&codes, |c| -> Result<()> {
                    let t = self.load_template(c.id)?;
                    let x8 = simulate_print_scan(&t, &p.for_item(c.id))?;
                    let x3 = downscale(&x8, AUTH_PPS)?;
                    x8.save_png(&self.scan_path(tag, ATTACK_PPS, c.id))?;
                    x3.save_png(&self.scan_path(tag, AUTH_PPS, c.id))?;
                    Ok(())
                })
                .into_iter()
                .collect::<Result<()>>()?;
                info!("printsim: {tag} done ({} codes)", codes.len());
            }
            Ok(())
        })
    }

    fn train_model(
        &self,
        kind: EstimatorKind,
        tag: &str,
        di: usize,
        pairs: &[(BinaryTemplate, GrayImage)],
    ) -> Result<EstimatorModel> {
        let a = &self.cfg.attack;
        Ok(match kind {
            EstimatorKind::Otsu => EstimatorModel::Otsu { pps: ATTACK_PPS },
            EstimatorKind::Lda => EstimatorModel::Lda(lda_train(pairs, a.lda_window)?),
            EstimatorKind::Learned => {
                let mut tc = a.learned.clone();
                tc.seed = derive(self.cfg.seed, STREAM_TRAIN, tag_key(tag) ^ di as u64);
                let (m, history) = train_estimator(pairs, &tc, a.learned_mode)?;
                let density = self.cfg.templates.densities[di];
                loss_table(&history).write(&self.out.join("attack").join(format!(
                    "{tag}_learned_d{:.0}_loss.csv",
                    density * 100.0
                )))?;
                EstimatorModel::Learned(m)
            }
        })
    }

    /// Fit each estimator on the training codes of every density and score
    /// it on the held-out codes.
    pub fn attack(&self, only_kind: Option<EstimatorKind>, only_printer: Option<&str>) -> Result<()> {
        let tags = self.printer_tags(only_printer)?;
        let kinds: Vec<EstimatorKind> = match only_kind {
            Some(k) if !self.cfg.attack.estimators.contains(&k) => {
                bail!("estimator {} is not listed in attack.estimators", k.name())
            }
            Some(k) => vec![k],
            None => self.cfg.attack.estimators.clone(),
        };
        let full = only_kind.is_none() && only_printer.is_none();
        self.run_stage(Stage::Attack, full, || {
            let codes = self.codes();
            for tag in &tags {
                let mut results: BTreeMap<&'static str, Vec<AttackResult>> = BTreeMap::new();
                for (di, &density) in self.cfg.templates.densities.iter().enumerate() {
                    let load = |c: &Code| -> Result<(BinaryTemplate, GrayImage)> {
                        Ok((self.load_template(c.id)?, self.load_scan(tag, ATTACK_PPS, c.id)?))
                    };
                    let train: Vec<_> = codes
                        .iter()
                        .filter(|c| c.density == density && c.role == Role::AttackTrain)
                        .map(load)
                        .collect::<Result<_>>()?;
                    let test_codes: Vec<&Code> = codes
                        .iter()
                        .filter(|c| c.density == density && c.role == Role::AuthTest)
                        .collect();
                    let test: Vec<_> = test_codes.iter().map(|c| load(c)).collect::<Result<_>>()?;
                    for &kind in &kinds {
                        let model = self.train_model(kind, tag, di, &train)?;
                        model.save(&self.model_path(tag, kind, density))?;
                        let scored = evaluate(&model, &test)?;
                        for (c, (est, _)) in test_codes.iter().zip(&scored) {
                            save_template(est, &self.estimate_path(tag, kind, c.id))?;
                        }
                        let pe: Vec<f64> = scored.iter().map(|s| s.1).collect();
                        let (mean, std) = mean_std(&pe);
                        info!("attack: {tag} {} d={density:.2} P_error {mean:.2}", kind.name());
                        results.entry(kind.name()).or_default().push(AttackResult {
                            printer: tag.clone(),
                            estimator: kind.name().into(),
                            density,
                            p_error_mean: mean,
                            p_error_std: std,
                            codes: pe.len(),
                        });
                    }
                }
                for &kind in &kinds {
                    attack_detail_table(&results[kind.name()]).write(&self.attack_result_path(tag, kind))?;
                }
            }
            self.write_attack_tables()
        })
    }

    /// Results of every (printer, estimator) pair present on disk, in
    /// config order.
    pub fn attack_results(&self) -> Result<Vec<AttackResult>> {
        let mut all = Vec::new();
        for tag in self.cfg.printers.keys() {
            for &kind in &self.cfg.attack.estimators {
                let p = self.attack_result_path(tag, kind);
                if p.exists() {
                    all.extend(parse_attack_detail_table(&fs::read_to_string(&p)?)?);
                }
            }
        }
        Ok(all)
    }

    fn write_attack_tables(&self) -> Result<()> {
        let all = self.attack_results()?;
        cdp_core::evalreport::attack_table(&all).write(&self.table_path("attack_p_error"))?;
        attack_detail_table(&all).write(&self.table_path("attack_p_error_detail"))?;
        Ok(())
    }

    /// Re-print each held-out estimate made from `est_tag` scans through
    /// the `print_tag` channel.
    pub fn fakes(&self, only_from: Option<&str>, only_to: Option<&str>) -> Result<()> {
        let from = self.printer_tags(only_from)?;
        let to = self.printer_tags(only_to)?;
        let kind = self.cfg.fakes.estimator;
        self.run_stage(Stage::Fakes, only_from.is_none() && only_to.is_none(), || {
            let codes = self.auth_codes();
            for a in &from {
                for b in &to {
                    let p = self.cfg.printer(b)?;
                    let p = p.with_seed(derive(self.cfg.seed, STREAM_FAKE ^ tag_key(a), p.seed));
                    par::map(&codes, |c| -> Result<()> {
                        let ep = self.estimate_path(a, kind, c.id);
                        self.require(&ep, Stage::Attack)?;
                        let est = load_template(&ep)?;
                        let f8 = simulate_print_scan(&est, &p.for_item(c.id))?;
                        downscale(&f8, AUTH_PPS)?.save_png(&self.fake_path(a, b, c.id))?;
                        Ok(())
                    })
                    .into_iter()
                    .collect::<Result<()>>()?;
                    info!("fakes: {a}/{b} done ({} codes)", codes.len());
                }
            }
            Ok(())
        })
    }

    /// Score originals and every fake family at the authentication
    /// resolution.
    pub fn authenticate(&self) -> Result<()> {
        self.run_stage(Stage::Authenticate, true, || {
            let codes = self.auth_codes();
            let tags: Vec<String> = self.cfg.printers.keys().cloned().collect();
            let theta = self.cfg.auth;
            let mut jobs: Vec<(u64, String, ProbeClass, PathBuf, Stage)> = Vec::new();
            for d in &tags {
                for c in &codes {
                    jobs.push((c.id, d.clone(), ProbeClass::Original, self.scan_path(d, AUTH_PPS, c.id), Stage::Printsim));
                }
            }
            for a in &tags {
                for b in &tags {
                    let class = if a == b { ProbeClass::Fake } else { ProbeClass::FakeCross };
                    for c in &codes {
                        jobs.push((c.id, format!("{a}/{b}"), class, self.fake_path(a, b, c.id), Stage::Fakes));
                    }
                }
            }
            let rows = par::map(&jobs, |(id, printer, class, path, producer)| -> Result<ScoredProbe> {
                self.require(path, *producer)?;
                let t = self.load_template(*id)?;
                let probe = GrayImage::load_png(path, AUTH_PPS)?;
                Ok(ScoredProbe {
                    code_id: *id,
                    printer: printer.clone(),
                    class: *class,
                    vector: metric_vector(&t, &probe, &theta)?,
                })
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let mut table = metrics_table(&rows);
            table.comment("printer: tag for originals, estimating/printing tags for fakes");
            table.write(&self.metrics_path())?;
            Ok(())
        })
    }

    pub fn load_metrics(&self) -> Result<Vec<ScoredProbe>> {
        let p = self.metrics_path();
        self.require(&p, Stage::Authenticate)?;
        Ok(parse_metrics_table(&fs::read_to_string(&p)?)?)
    }

    /// One-class and two-class protocols for every defender printer,
    /// metric subset and fake family.
    pub fn classify(&self) -> Result<()> {
        self.run_stage(Stage::Classify, true, || {
            let probes = self.load_metrics()?;
            let c = &self.cfg.classify;
            let tags: Vec<String> = self.cfg.printers.keys().cloned().collect();
            let select = |printer: &str, idx: &[usize]| -> Vec<Vec<f64>> {
                probes
                    .iter()
                    .filter(|p| p.printer == printer)
                    .map(|p| {
                        let v = p.vector.to_array();
                        idx.iter().map(|&i| v[i]).collect()
                    })
                    .collect()
            };
            let base = ProtocolConfig {
                kind: SvmKind::OneClass { nu: c.nu },
                gamma: c.gamma,
                train_size: c.train_size,
                runs: c.runs,
                seed: derive(self.cfg.seed, STREAM_CLASSIFY, 0),
            };
            let two = ProtocolConfig {
                kind: SvmKind::TwoClass { c: c.c },
                ..base.clone()
            };
            let row = |model: &str, subset: &str, d: &str, a: &str, rates| ProtocolRow {
                model: model.into(),
                metric_subset: subset.into(),
                defender_printer: d.into(),
                attacker_printer: a.into(),
                rates,
            };
            let (mut pairs, mut full, mut sup) = (Vec::new(), Vec::new(), Vec::new());
            for d in &tags {
                for subset in &c.one_class_subsets {
                    let idx = parse_subset(subset)?;
                    let orig = select(d, &idx);
                    let mut rows = Vec::new();
                    for a in &tags {
                        for b in &tags {
                            let fam = format!("{a}/{b}");
                            let rates = evaluate_protocol(&orig, &select(&fam, &idx), None, &base)?;
                            rows.push(row("one-class", subset, d, &fam, rates));
                        }
                    }
                    for e in tags.iter().filter(|e| *e != d) {
                        let rates =
                            evaluate_protocol(&orig, &select(&format!("{d}/{d}"), &idx), Some(&select(e, &idx)), &base)?;
                        rows.push(row("one-class-cross", subset, d, e, rates));
                    }
                    if idx.len() == 2 {
                        pairs.extend(rows);
                    } else {
                        full.extend(rows);
                    }
                }
                for subset in &c.two_class_subsets {
                    let idx = parse_subset(subset)?;
                    let orig = select(d, &idx);
                    for a in &tags {
                        for b in &tags {
                            let fam = format!("{a}/{b}");
                            let rates = evaluate_protocol(&orig, &select(&fam, &idx), None, &two)?;
                            sup.push(row("two-class", subset, d, &fam, rates));
                        }
                    }
                }
            }
            let note = "p_a = estimating/printing printer of the fakes; one-class-cross rows measure P_miss on originals from p_a";
            for (name, rows) in [
                ("classify_one_class_pairs", pairs),
                ("classify_one_class", full),
                ("classify_two_class", sup),
            ] {
                let mut t = protocol_table(&rows);
                t.comment(note);
                t.write(&self.table_path(name))?;
            }
            Ok(())
        })
    }

    fn dataset_hashes(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for dir in ["templates", "scans", "fakes"] {
            let root = self.out.join(dir);
            let mut stack = vec![root.clone()];
            while let Some(d) = stack.pop() {
                for entry in fs::read_dir(&d).with_context(|| format!("listing {}", d.display()))? {
                    let path = entry?.path();
                    if path.is_dir() {
                        stack.push(path);
                    } else {
                        let rel = path.strip_prefix(&self.out).expect("under out").to_string_lossy().replace('\\', "/");
                        out.insert(rel, sha256_hex(&fs::read(&path)?));
                    }
                }
            }
        }
        Ok(out)
    }

    /// Tables, figures and a reproduction manifest under `report/`.
    pub fn report(&self) -> Result<()> {
        self.run_stage(Stage::Report, true, || {
            let probes = self.load_metrics()?;
            let attack = self.attack_results()?;
            if attack.is_empty() {
                bail!("no attack results found; run `cdpbench attack` first");
            }
            let mut tables = BTreeMap::new();
            for name in ["classify_one_class_pairs", "classify_one_class", "classify_two_class"] {
                let p = self.table_path(name);
                self.require(&p, Stage::Classify)?;
                tables.insert(name.to_string(), CsvTable::parse(&fs::read_to_string(&p)?)?);
            }
            let c = &self.cfg.classify;
            let mut regions = Vec::new();
            for d in self.cfg.printers.keys() {
                for pair in metric_pairs() {
                    let x: Vec<Vec<f64>> = probes
                        .iter()
                        .filter(|p| p.printer == *d)
                        .take(c.train_size)
                        .map(|p| {
                            let v = p.vector.to_array();
                            vec![v[pair.0], v[pair.1]]
                        })
                        .collect();
                    let model = train_one_class(&x, c.nu, c.gamma)?;
                    let region = decision_region(&model, pair, self.cfg.report.region_resolution)?;
                    regions.push((format!("{d}_{}", pair_name(pair)), region));
                }
            }
            let mut seeds = BTreeMap::new();
            seeds.insert("base".to_string(), self.cfg.seed);
            seeds.insert("classify".to_string(), derive(self.cfg.seed, STREAM_CLASSIFY, 0));
            for (di, _) in self.cfg.templates.densities.iter().enumerate() {
                for tag in self.cfg.printers.keys() {
                    seeds.insert(
                        format!("learned.{tag}.{di}"),
                        derive(self.cfg.seed, STREAM_TRAIN, tag_key(tag) ^ di as u64),
                    );
                }
            }
            for tag in self.cfg.printers.keys() {
                let p = self.cfg.printer(tag)?;
                seeds.insert(format!("print.{tag}"), derive(self.cfg.seed, STREAM_PRINT, p.seed));
            }
            let input = ReportInput {
                manifest: ReportManifest {
                    tool_version: env!("CARGO_PKG_VERSION").into(),
                    config_hash: self.config_hash(),
                    config: self.cfg.to_toml(),
                    seeds,
                    dataset_hashes: self.dataset_hashes()?,
                },
                attack,
                probes,
                tables,
                regions,
            };
            let files = emit_report(&self.report_dir(), &input)?;
            info!("report: {} files under {}", files.len(), self.report_dir().display());
            Ok(())
        })
    }

    /// Every stage in order.
    pub fn run_all(&self) -> Result<()> {
        write_atomic(&self.out.join("config.toml"), self.cfg.to_toml().as_bytes())?;
        self.generate()?;
        self.printsim(None)?;
        self.attack(None, None)?;
        self.fakes(None, None)?;
        self.authenticate()?;
        self.classify()?;
        self.report()
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}
