//! Fisher linear discriminant over symbol neighbourhoods.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patterns::BinaryTemplate;
use crate::printchan::GrayImage;

/// Ridge added to the pooled scatter when it is not positive definite,
/// relative to its mean diagonal.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub window: usize,
    pub pps: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// True when the ridge had to be applied during training.
    pub regularized: bool,
}

/// `(2w+1)²` neighbourhood features of each symbol, edge-replicated,
/// row-major over symbols.
pub fn neighbourhood_features(means: &[f64], rows: usize, cols: usize, window: usize) -> Vec<Vec<f64>> {
    let w = window as isize;
    let clampi = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut f = Vec::with_capacity((2 * window + 1).pow(2));
            for dr in -w..=w {
                for dc in -w..=w {
                    let rr = clampi(r as isize + dr, rows);
                    let cc = clampi(c as isize + dc, cols);
                    f.push(means[rr * cols + cc]);
                }
            }
            out.push(f);
        }
    }
    out
}

/// In-place Cholesky factor `L` of a symmetric matrix; `None` if it is not
/// positive definite.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let v = a[i * d + i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i * d + i] = v.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * d + i];
    }
    x
}

/// Fit the discriminant on labelled feature vectors (label 1 = white).
pub fn fit_features(features: &[Vec<f64>], labels: &[u8]) -> Result<(Vec<f64>, f64, bool)> {
    let d = features.first().map(Vec::len).unwrap_or(0);
    let mut sum = [vec![0.0; d], vec![0.0; d]];
    let mut count = [0usize; 2];
    for (f, &y) in features.iter().zip(labels) {
        let k = y as usize;
        count[k] += 1;
        sum[k].iter_mut().zip(f).for_each(|(a, b)| *a += b);
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(Error::Parameter("LDA needs both black and white symbols".into()));
    }
    let mu: Vec<Vec<f64>> = (0..2)
        .map(|k| sum[k].iter().map(|s| s / count[k] as f64).collect())
        .collect();
    let mut cov = vec![0.0; d * d];
    for (f, &y) in features.iter().zip(labels) {
        let m = &mu[y as usize];
        for i in 0..d {
            let ai = f[i] - m[i];
            for j in 0..=i {
                cov[i * d + j] += ai * (f[j] - m[j]);
            }
        }
    }
    let dof = (features.len() - 2).max(1) as f64;
    for i in 0..d {
        for j in 0..=i {
            cov[i * d + j] /= dof;
            cov[j * d + i] = cov[i * d + j];
        }
    }
    let diff: Vec<f64> = mu[1].iter().zip(&mu[0]).map(|(a, b)| a - b).collect();
    let (l, regularized) = match cholesky(&cov, d) {
        Some(l) => (l, false),
        None => {
            let scale = (0..d).map(|i| cov[i * d + i]).sum::<f64>() / d as f64;
            let eps = RIDGE * if scale > 0.0 { scale } else { 1.0 };
            log::warn!("lda: within-class scatter is singular, adding ridge {eps:e}");
            let mut reg = cov.clone();
            for i in 0..d {
                reg[i * d + i] += eps;
            }
            let l = cholesky(&reg, d)
                .ok_or_else(|| Error::Parameter("LDA scatter not positive definite after ridge".into()))?;
            (l, true)
        }
    };
    let w = cholesky_solve(&l, d, &diff);
    let mid: Vec<f64> = mu[0].iter().zip(&mu[1]).map(|(a, b)| 0.5 * (a + b)).collect();
    let bias = -w.iter().zip(&mid).map(|(a, b)| a * b).sum::<f64>();
    Ok((w, bias, regularized))
}

pub fn lda_train(pairs: &[(BinaryTemplate, GrayImage)], window: usize) -> Result<LdaModel> {
    let pps = pairs
        .first()
        .ok_or_else(|| Error::Parameter("LDA needs at least one training pair".into()))?
        .1
        .pps;
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for (t, x) in pairs {
        if x.pps != pps {
            return Err(Error::Dimension(format!("mixed pps {} and {}", pps, x.pps)));
        }
        x.check_registered(t.rows(), t.cols())?;
        feats.extend(neighbourhood_features(&x.block_means()?, t.rows(), t.cols(), window));
        labels.extend_from_slice(t.bits());
    }
    let (weights, bias, regularized) = fit_features(&feats, &labels)?;
    Ok(LdaModel {
        window,
        pps,
        weights,
        bias,
        regularized,
    })
}

impl LdaModel {
    /// Discriminant score per symbol; positive means white.
    pub fn scores(&self, scan: &GrayImage) -> Result<Vec<f64>> {
        if scan.pps != self.pps {
            return Err(Error::Dimension(format!("scan pps {} but model expects {}", scan.pps, self.pps)));
        }
        let (n, m) = scan
            .symbol_dims()
            .ok_or_else(|| Error::Dimension("scan is not registered".into()))?;
        Ok(neighbourhood_features(&scan.block_means()?, n, m, self.window)
            .iter()
            .map(|f| f.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias)
            .collect())
    }
}
