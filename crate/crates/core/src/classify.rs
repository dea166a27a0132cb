//! RBF-kernel SVMs over similarity features and the repeated-split
//! evaluation protocol.
//!
//! Both formulations reduce to the dual
//!
//! ```text
//! min ½ αᵀQα + pᵀα   s.t.  yᵀα = Δ,  0 ≤ α_i ≤ C
//! ```
//!
//! solved by sequential pairwise updates with second-order working-set
//! selection. Originals are the positive class; a decision value of exactly
//! zero is labelled fake.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f, CsvTable};

pub const DEFAULT_GAMMA: f64 = 0.3;
pub const DEFAULT_NU: f64 = 0.01;
pub const DEFAULT_C: f64 = 1.0;
pub const KKT_TOL: f64 = 1e-6;
pub const MAX_ITER: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Features whose training variance was zero; their scale is 1.
    pub constant: Vec<usize>,
}

/// Per-feature zero mean and unit (population) variance.
pub fn standardize_fit(x: &[Vec<f64>]) -> Result<Standardization> {
    if x.len() < 2 {
        return Err(Error::Parameter("standardization needs at least 2 vectors".into()));
    }
    let d = x[0].len();
    let n = x.len() as f64;
    let mean: Vec<f64> = (0..d).map(|j| x.iter().map(|v| v[j]).sum::<f64>() / n).collect();
    let mut scale = Vec::with_capacity(d);
    let mut constant = Vec::new();
    for j in 0..d {
        let var = x.iter().map(|v| (v[j] - mean[j]).powi(2)).sum::<f64>() / n;
        if var.sqrt() > 1e-12 {
            scale.push(var.sqrt());
        } else {
            log::warn!("standardization: feature {j} is constant");
            constant.push(j);
            scale.push(1.0);
        }
    }
    Ok(Standardization { mean, scale, constant })
}

impl Standardization {
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        v.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    (-gamma * d2).exp()
}

/// Dual problem in the shared form.
struct Dual<'a> {
    q: &'a [f64],
    p: &'a [f64],
    y: &'a [f64],
    c: f64,
    n: usize,
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// Maximal KKT violation `max_up(−y∇) − min_low(−y∇)`, recomputed from
    /// scratch at the returned point.
    pub kkt_gap: f64,
}

impl Dual<'_> {
    fn gradient(&self, alpha: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let row = &self.q[i * self.n..(i + 1) * self.n];
                row.iter().zip(alpha).map(|(q, a)| q * a).sum::<f64>() + self.p[i]
            })
            .collect()
    }

    fn is_up(&self, i: usize, a: f64) -> bool {
        if self.y[i] > 0.0 {
            a < self.c
        } else {
            a > 0.0
        }
    }

    fn is_low(&self, i: usize, a: f64) -> bool {
        if self.y[i] > 0.0 {
            a > 0.0
        } else {
            a < self.c
        }
    }

    fn gap(&self, alpha: &[f64], g: &[f64]) -> f64 {
        let mut up = f64::NEG_INFINITY;
        let mut low = f64::INFINITY;
        for i in 0..self.n {
            let v = -self.y[i] * g[i];
            if self.is_up(i, alpha[i]) {
                up = up.max(v);
            }
            if self.is_low(i, alpha[i]) {
                low = low.min(v);
            }
        }
        if up.is_finite() && low.is_finite() {
            (up - low).max(0.0)
        } else {
            0.0
        }
    }

    /// Second-order working-set selection; `None` once the gap is below
    /// `tol`.
    fn select(&self, alpha: &[f64], g: &[f64], tol: f64) -> Option<(usize, usize)> {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..self.n {
            if self.is_up(t, alpha[t]) {
                let v = -self.y[t] * g[t];
                if v > gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let i = i_sel?;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        let mut j_sel = None;
        for t in 0..self.n {
            if !self.is_low(t, alpha[t]) {
                continue;
            }
            let v = self.y[t] * g[t];
            gmax2 = gmax2.max(v);
            let b = gmax + v;
            if b > 0.0 {
                let a = self.q[i * self.n + i] + self.q[t * self.n + t]
                    - 2.0 * self.y[i] * self.y[t] * self.q[i * self.n + t];
                let a = if a > 0.0 { a } else { 1e-12 };
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j_sel = Some(t);
                }
            }
        }
        if gmax + gmax2 < tol {
            return None;
        }
        j_sel.map(|j| (i, j))
    }

    fn update(&self, i: usize, j: usize, alpha: &mut [f64], g: &mut [f64]) {
        let n = self.n;
        let (qi, qj) = (&self.q[i * n..(i + 1) * n], &self.q[j * n..(j + 1) * n]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let c = self.c;
        if self.y[i] != self.y[j] {
            let quad = qi[i] + qj[j] + 2.0 * qi[j];
            let quad = if quad > 0.0 { quad } else { 1e-12 };
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = qi[i] + qj[j] - 2.0 * qi[j];
            let quad = if quad > 0.0 { quad } else { 1e-12 };
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            g[t] += qi[t] * di + qj[t] * dj;
        }
    }

    fn rho(&self, alpha: &[f64], g: &[f64]) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum, mut free) = (0.0, 0usize);
        for i in 0..self.n {
            let yg = self.y[i] * g[i];
            let a = alpha[i];
            if a > 0.0 && a < self.c {
                sum += yg;
                free += 1;
            } else if (a >= self.c && self.y[i] < 0.0) || (a <= 0.0 && self.y[i] > 0.0) {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        }
        if free > 0 {
            sum / free as f64
        } else {
            0.5 * (ub + lb)
        }
    }

    fn solve(&self, mut alpha: Vec<f64>, tol: f64) -> Result<DualSolution> {
        let mut g = self.gradient(&alpha);
        let mut iterations = 0;
        loop {
            match self.select(&alpha, &g, tol) {
                Some((i, j)) => {
                    if iterations >= MAX_ITER {
                        return Err(Error::Solver { iterations });
                    }
                    self.update(i, j, &mut alpha, &mut g);
                    iterations += 1;
                }
                None => {
                    // Guard against drift in the incrementally updated
                    // gradient before accepting the point.
                    let fresh = self.gradient(&alpha);
                    let gap = self.gap(&alpha, &fresh);
                    g = fresh;
                    if gap < tol || iterations >= MAX_ITER {
                        let rho = self.rho(&alpha, &g);
                        return Ok(DualSolution {
                            alpha,
                            rho,
                            iterations,
                            kkt_gap: gap,
                        });
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SvmKind {
    OneClass { nu: f64 },
    TwoClass { c: f64 },
}

impl SvmKind {
    pub fn name(&self) -> &'static str {
        match self {
            SvmKind::OneClass { .. } => "one-class",
            SvmKind::TwoClass { .. } => "two-class",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Original,
    Fake,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub kind: SvmKind,
    pub gamma: f64,
    pub standardization: Standardization,
    /// Standardized support vectors.
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i y_i` per support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub kkt_gap: f64,
}

impl SvmModel {
    pub fn dims(&self) -> usize {
        self.standardization.mean.len()
    }

    /// Decision value on an already standardized vector.
    pub fn decision_standardized(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.coef)
            .map(|(sv, c)| c * rbf(sv, z, self.gamma))
            .sum::<f64>()
            - self.rho
    }

    pub fn decision(&self, v: &[f64]) -> f64 {
        self.decision_standardized(&self.standardization.apply(v))
    }

    /// Label and decision value; zero counts as fake.
    pub fn predict(&self, v: &[f64]) -> (Label, f64) {
        let s = self.decision(v);
        (if s > 0.0 { Label::Original } else { Label::Fake }, s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parameter(format!("svm model: {e}")))
    }
}

fn gram(z: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = z.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = rbf(&z[i], &z[j], gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

fn check_dims(x: &[Vec<f64>]) -> Result<usize> {
    let d = x.first().map(Vec::len).unwrap_or(0);
    if d == 0 || x.iter().any(|v| v.len() != d) {
        return Err(Error::Dimension("feature vectors must share a non-zero length".into()));
    }
    Ok(d)
}

fn finish(kind: SvmKind, gamma: f64, st: Standardization, z: Vec<Vec<f64>>, y: &[f64], sol: DualSolution) -> SvmModel {
    let mut support_vectors = Vec::new();
    let mut coef = Vec::new();
    for ((zi, &a), &yi) in z.into_iter().zip(&sol.alpha).zip(y) {
        if a > 0.0 {
            support_vectors.push(zi);
            coef.push(a * yi);
        }
    }
    SvmModel {
        kind,
        gamma,
        standardization: st,
        support_vectors,
        coef,
        rho: sol.rho,
        iterations: sol.iterations,
        kkt_gap: sol.kkt_gap,
    }
}

/// ν one-class SVM in the scaled dual `0 ≤ α ≤ 1, Σα = νl`.
pub fn train_one_class(x: &[Vec<f64>], nu: f64, gamma: f64) -> Result<SvmModel> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(Error::Parameter(format!("nu {nu} must lie in (0, 1]")));
    }
    if x.len() < 10 {
        return Err(Error::Parameter(format!("one-class training needs >= 10 vectors, got {}", x.len())));
    }
    check_dims(x)?;
    let st = standardize_fit(x)?;
    let z: Vec<Vec<f64>> = x.iter().map(|v| st.apply(v)).collect();
    let n = z.len();
    let q = gram(&z, gamma);
    let p = vec![0.0; n];
    let y = vec![1.0; n];
    let total = nu * n as f64;
    let full = total.floor() as usize;
    let mut alpha = vec![0.0; n];
    alpha.iter_mut().take(full).for_each(|a| *a = 1.0);
    if full < n {
        alpha[full] = total - full as f64;
    }
    let sol = Dual { q: &q, p: &p, y: &y, c: 1.0, n }.solve(alpha, KKT_TOL)?;
    Ok(finish(SvmKind::OneClass { nu }, gamma, st, z, &y, sol))
}

/// Soft-margin C-SVC with originals as the positive class.
pub fn train_two_class(pos: &[Vec<f64>], neg: &[Vec<f64>], c: f64, gamma: f64) -> Result<SvmModel> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Parameter("two-class training needs both classes".into()));
    }
    if !(c > 0.0) {
        return Err(Error::Parameter(format!("C {c} must be > 0")));
    }
    let x: Vec<Vec<f64>> = pos.iter().chain(neg).cloned().collect();
    check_dims(&x)?;
    let st = standardize_fit(&x)?;
    let z: Vec<Vec<f64>> = x.iter().map(|v| st.apply(v)).collect();
    let n = z.len();
    let y: Vec<f64> = (0..n).map(|i| if i < pos.len() { 1.0 } else { -1.0 }).collect();
    let k = gram(&z, gamma);
    let q: Vec<f64> = (0..n * n).map(|idx| y[idx / n] * y[idx % n] * k[idx]).collect();
    let p = vec![-1.0; n];
    let sol = Dual { q: &q, p: &p, y: &y, c, n }.solve(vec![0.0; n], KKT_TOL)?;
    Ok(finish(SvmKind::TwoClass { c }, gamma, st, z, &y, sol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub kind: SvmKind,
    pub gamma: f64,
    pub train_size: usize,
    pub runs: usize,
    pub seed: u64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            kind: SvmKind::OneClass { nu: DEFAULT_NU },
            gamma: DEFAULT_GAMMA,
            train_size: 144,
            runs: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub run: usize,
    pub p_miss: f64,
    pub p_fa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    pub p_miss_mean: f64,
    pub p_miss_std: f64,
    pub p_fa_mean: f64,
    pub p_fa_std: f64,
    pub runs: usize,
    pub outcomes: Vec<RunOutcome>,
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

fn percent_where(model: &SvmModel, xs: &[&Vec<f64>], label: Label) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    100.0 * xs.iter().filter(|v| model.predict(v).0 == label).count() as f64 / xs.len() as f64
}

/// Repeated random splits. Each run trains on `train_size` originals (and,
/// for the two-class model, `train_size` fakes) and scores the held-out
/// remainder. When `test_originals` is given, P_miss is measured on that
/// population instead, e.g. originals from a different printer.
pub fn evaluate_protocol(
    originals: &[Vec<f64>],
    fakes: &[Vec<f64>],
    test_originals: Option<&[Vec<f64>]>,
    cfg: &ProtocolConfig,
) -> Result<ErrorRates> {
    let two_class = matches!(cfg.kind, SvmKind::TwoClass { .. });
    let need_fakes = if two_class { cfg.train_size + 1 } else { 1 };
    let need_orig = cfg.train_size + usize::from(test_originals.is_none());
    if cfg.runs == 0 || originals.len() < need_orig || fakes.len() < need_fakes {
        return Err(Error::Protocol(format!(
            "need >= {need_orig} originals and >= {need_fakes} fakes for train size {} ({} and {} given)",
            cfg.train_size,
            originals.len(),
            fakes.len()
        )));
    }
    let outcomes = crate::par::map_range(cfg.runs, |run| -> Result<RunOutcome> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(run as u64));
        let mut oi: Vec<usize> = (0..originals.len()).collect();
        let mut fi: Vec<usize> = (0..fakes.len()).collect();
        oi.shuffle(&mut rng);
        fi.shuffle(&mut rng);
        let train_o: Vec<Vec<f64>> = oi[..cfg.train_size].iter().map(|&i| originals[i].clone()).collect();
        let (model, fake_test) = match cfg.kind {
            SvmKind::OneClass { nu } => (train_one_class(&train_o, nu, cfg.gamma)?, &fi[..]),
            SvmKind::TwoClass { c } => {
                let train_f: Vec<Vec<f64>> = fi[..cfg.train_size].iter().map(|&i| fakes[i].clone()).collect();
                (train_two_class(&train_o, &train_f, c, cfg.gamma)?, &fi[cfg.train_size..])
            }
        };
        let orig_test: Vec<&Vec<f64>> = match test_originals {
            Some(t) => t.iter().collect(),
            None => oi[cfg.train_size..].iter().map(|&i| &originals[i]).collect(),
        };
        let fake_test: Vec<&Vec<f64>> = fake_test.iter().map(|&i| &fakes[i]).collect();
        Ok(RunOutcome {
            run,
            p_miss: percent_where(&model, &orig_test, Label::Fake),
            p_fa: percent_where(&model, &fake_test, Label::Original),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (p_miss_mean, p_miss_std) = mean_std(&outcomes.iter().map(|o| o.p_miss).collect::<Vec<_>>());
    let (p_fa_mean, p_fa_std) = mean_std(&outcomes.iter().map(|o| o.p_fa).collect::<Vec<_>>());
    Ok(ErrorRates {
        p_miss_mean,
        p_miss_std,
        p_fa_mean,
        p_fa_std,
        runs: cfg.runs,
        outcomes,
    })
}

/// One row of a results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolRow {
    pub model: String,
    pub metric_subset: String,
    pub defender_printer: String,
    pub attacker_printer: String,
    pub rates: ErrorRates,
}

pub fn protocol_table(rows: &[ProtocolRow]) -> CsvTable {
    let mut t = CsvTable::new([
        "model",
        "metric_subset",
        "p_d",
        "p_a",
        "p_miss_mean",
        "p_miss_std",
        "p_fa_mean",
        "p_fa_std",
    ]);
    for r in rows {
        t.push([
            r.model.clone(),
            r.metric_subset.clone(),
            r.defender_printer.clone(),
            r.attacker_printer.clone(),
            fmt_f(r.rates.p_miss_mean, 2),
            fmt_f(r.rates.p_miss_std, 2),
            fmt_f(r.rates.p_fa_mean, 2),
            fmt_f(r.rates.p_fa_std, 2),
        ]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blob(n: usize, centre: &[f64], sd: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Normal::new(0.0, sd).unwrap();
        (0..n)
            .map(|_| centre.iter().map(|c| c + g.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn standardization_examples() {
        let st = standardize_fit(&[vec![-1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert_eq!(st.mean, vec![1.0, 5.0]);
        assert_eq!(st.scale, vec![2.0, 1.0]);
        assert_eq!(st.constant, vec![1]);
        let x = blob(50, &[3.0, -2.0, 10.0], 4.0, 1);
        let st = standardize_fit(&x).unwrap();
        let z: Vec<Vec<f64>> = x.iter().map(|v| st.apply(v)).collect();
        let again = standardize_fit(&z).unwrap();
        for j in 0..3 {
            assert!(again.mean[j].abs() < 1e-12);
            assert!((again.scale[j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_class_accepts_its_blob_and_rejects_far_cluster() {
        let train = blob(200, &[0.0, 0.0], 1.0, 2);
        let m = train_one_class(&train, 0.01, 0.3).unwrap();
        let outliers = train.iter().filter(|v| m.predict(v).0 == Label::Fake).count();
        assert!(outliers as f64 / 200.0 <= 0.01 + 2.0 / 200.0);
        // ν bounds the training outliers only; a same-distribution holdout
        // sees a few percent more rejections.
        let hold = blob(4000, &[0.0, 0.0], 1.0, 3);
        let acc = hold.iter().filter(|v| m.predict(v).0 == Label::Original).count();
        assert!(acc as f64 >= 0.90 * hold.len() as f64, "{acc}");
        let far = blob(50, &[10.0, 10.0], 1.0, 4);
        assert!(far.iter().all(|v| m.predict(v).0 == Label::Fake));
        assert_eq!(m.predict(&[100.0, 100.0]).0, Label::Fake);
        assert_eq!(m.predict(&[0.0, 0.0]).0, Label::Original);
        assert!(m.kkt_gap < KKT_TOL);
    }

    #[test]
    fn two_class_separates_xor() {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (i, (x, y)) in [(1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)].iter().enumerate() {
            let pts = blob(10, &[*x, *y], 0.1, i as u64);
            if x * y > 0.0 {
                pos.extend(pts);
            } else {
                neg.extend(pts);
            }
        }
        let m = train_two_class(&pos, &neg, 10.0, 1.0).unwrap();
        assert!(pos.iter().all(|v| m.predict(v).0 == Label::Original));
        assert!(neg.iter().all(|v| m.predict(v).0 == Label::Fake));
        assert!(m.kkt_gap < KKT_TOL);
    }

    #[test]
    fn zero_decision_is_fake() {
        let m = SvmModel {
            kind: SvmKind::TwoClass { c: 1.0 },
            gamma: 1.0,
            standardization: Standardization {
                mean: vec![0.0],
                scale: vec![1.0],
                constant: vec![],
            },
            support_vectors: vec![],
            coef: vec![],
            rho: 0.0,
            iterations: 0,
            kkt_gap: 0.0,
        };
        assert_eq!(m.predict(&[0.3]), (Label::Fake, 0.0));
    }

    #[test]
    fn model_json_round_trip() {
        let m = train_one_class(&blob(30, &[1.0, 2.0], 1.0, 9), 0.1, 0.3).unwrap();
        let back = SvmModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn protocol_on_disjoint_clusters() {
        let orig = blob(400, &[0.0, 0.0], 1.0, 5);
        let fake = blob(200, &[12.0, 12.0], 1.0, 6);
        let cfg = ProtocolConfig {
            runs: 5,
            ..ProtocolConfig::default()
        };
        let r = evaluate_protocol(&orig, &fake, None, &cfg).unwrap();
        assert_eq!(r.p_fa_mean, 0.0);
        assert!(r.p_miss_mean < 15.0, "{r:?}");
        assert_eq!(r.outcomes.len(), 5);
        assert!(evaluate_protocol(&orig[..144], &fake, None, &cfg).is_err());
    }
}
