//! Learned template estimator.
//!
//! The mapper `g` is a small encoder–decoder with skip connections. Its first
//! layer is a `pps × pps` stride-`pps` convolution, so it reads every scan
//! pixel but predicts one value per printed symbol.
//!
//! Training minimizes `recon + marginal`:
//!
//! * `recon = λ · mean (t − g(x))²`, the negative Gaussian-prior
//!   log-likelihood term;
//! * `marginal = w · mean softplus(−D(g(x)))`, a density-ratio penalty where
//!   `D` is a discriminator trained to tell real template patches from
//!   estimates. It pulls the marginal of the estimates toward the binary
//!   template prior.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::nn::{
    avg_pool2, avg_pool2_backward, concat, flatten, flatten_grads, relu, relu_backward, sigmoid,
    softplus, split, unflatten, upsample2, upsample2_backward, Adam, Conv2d, ConvGrad, Scalar,
    Tensor,
};
use crate::error::{Error, Result};
use crate::patterns::BinaryTemplate;
use crate::printchan::GrayImage;

/// Input noise of the stochastic estimator.
pub const STOCHASTIC_NOISE_STD: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Deterministic,
    Stochastic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub pps: usize,
    pub levels: usize,
    pub base_channels: usize,
    pub disc_channels: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            pps: 8,
            levels: 3,
            base_channels: 8,
            disc_channels: 8,
        }
    }
}

impl Architecture {
    fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Scale of the reconstruction term.
    pub lambda: f64,
    /// Weight of the density-ratio marginal term.
    pub adversarial_weight: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub pps: usize,
    /// Side of the square symbol crops used for training.
    pub crop: usize,
    pub crops_per_pair: usize,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1.0,
            adversarial_weight: 0.01,
            epochs: 40,
            batch_size: 4,
            learning_rate: 3e-3,
            seed: 0,
            pps: 8,
            crop: 32,
            crops_per_pair: 8,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::Parameter(format!("lambda {} must be > 0", self.lambda)));
        }
        if !(self.adversarial_weight >= 0.0) {
            return Err(Error::Parameter("adversarial_weight must be >= 0".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.crops_per_pair == 0 {
            return Err(Error::Parameter("epochs, batch_size and crops_per_pair must be >= 1".into()));
        }
        if self.pps != self.architecture.pps {
            return Err(Error::Parameter(format!(
                "pps {} differs from architecture pps {}",
                self.pps, self.architecture.pps
            )));
        }
        if self.architecture.levels == 0 || self.architecture.base_channels == 0 {
            return Err(Error::Parameter("architecture needs >= 1 level and channel".into()));
        }
        Ok(())
    }
}

/// Per-epoch loss terms; `total = recon + marginal`, i.e. `−(D_tt̂ − D_t)`
/// with `recon = −D_tt̂` and `marginal` the weighted `D_t` term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub epoch: usize,
    pub total: f64,
    pub recon: f64,
    pub marginal: f64,
    pub disc: f64,
}

/// Encoder–decoder mapper from a scan to per-symbol whiteness in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct UNet<T> {
    pub arch: Architecture,
    patch: Conv2d<T>,
    enc0: Conv2d<T>,
    down: Vec<(Conv2d<T>, Conv2d<T>)>,
    up: Vec<Conv2d<T>>,
    head: Conv2d<T>,
}

/// Intermediate activations kept for the backward pass.
pub struct UNetCache<T> {
    x: Tensor<T>,
    a0: Tensor<T>,
    enc: Vec<Tensor<T>>,
    pooled: Vec<Tensor<T>>,
    mid: Vec<Tensor<T>>,
    cat: Vec<Tensor<T>>,
    dec: Vec<Tensor<T>>,
    pub out: Tensor<T>,
}

impl<T: Scalar> UNet<T> {
    pub fn new(arch: Architecture, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c0 = arch.channels(0);
        let patch = Conv2d::new(1, c0, arch.pps, arch.pps, 0, &mut rng);
        let enc0 = Conv2d::new(c0, c0, 3, 1, 1, &mut rng);
        let down = (1..arch.levels)
            .map(|l| {
                let (ci, co) = (arch.channels(l - 1), arch.channels(l));
                (
                    Conv2d::new(ci, co, 3, 1, 1, &mut rng),
                    Conv2d::new(co, co, 3, 1, 1, &mut rng),
                )
            })
            .collect();
        let up = (0..arch.levels - 1)
            .map(|l| {
                let (cs, cd) = (arch.channels(l), arch.channels(l + 1));
                Conv2d::new(cs + cd, cs, 3, 1, 1, &mut rng)
            })
            .collect();
        let head = Conv2d::new(c0, 1, 1, 1, 0, &mut rng);
        UNet {
            arch,
            patch,
            enc0,
            down,
            up,
            head,
        }
    }

    fn layers(&self) -> Vec<&Conv2d<T>> {
        let mut v = vec![&self.patch, &self.enc0];
        for (a, b) in &self.down {
            v.push(a);
            v.push(b);
        }
        v.extend(self.up.iter());
        v.push(&self.head);
        v
    }

    fn layers_mut(&mut self) -> Vec<&mut Conv2d<T>> {
        let mut v = vec![&mut self.patch, &mut self.enc0];
        for (a, b) in &mut self.down {
            v.push(a);
            v.push(b);
        }
        v.extend(self.up.iter_mut());
        v.push(&mut self.head);
        v
    }

    pub fn params(&self) -> Vec<T> {
        flatten(&self.layers())
    }

    pub fn set_params(&mut self, flat: &[T]) {
        unflatten(&mut self.layers_mut(), flat);
    }

    pub fn n_params(&self) -> usize {
        self.layers().iter().map(|l| l.n_params()).sum()
    }

    /// Parameter tensor shapes in flattening order.
    pub fn shapes(&self) -> Vec<Vec<usize>> {
        self.layers()
            .iter()
            .flat_map(|l| [vec![l.cout, l.cin, l.k, l.k], vec![l.cout]])
            .collect()
    }

    pub fn forward(&self, x: Tensor<T>) -> UNetCache<T> {
        let levels = self.arch.levels;
        let a0 = relu(&self.patch.forward(&x));
        let mut enc = vec![relu(&self.enc0.forward(&a0))];
        let mut pooled = Vec::new();
        let mut mid = Vec::new();
        for (ca, cb) in &self.down {
            let p = avg_pool2(enc.last().expect("level 0"));
            let m = relu(&ca.forward(&p));
            enc.push(relu(&cb.forward(&m)));
            pooled.push(p);
            mid.push(m);
        }
        // Decoder, deepest first; cat[l] / dec[l] indexed by level.
        let mut cat = vec![Tensor::zeros(0, 0, 0); levels.saturating_sub(1)];
        let mut dec = vec![Tensor::zeros(0, 0, 0); levels.saturating_sub(1)];
        let mut cur = enc[levels - 1].clone();
        for l in (0..levels - 1).rev() {
            let skip = &enc[l];
            let c = concat(skip, &upsample2(&cur, skip.h, skip.w));
            let d = relu(&self.up[l].forward(&c));
            cur = d.clone();
            cat[l] = c;
            dec[l] = d;
        }
        let out = self.head.forward(&cur).map(sigmoid);
        UNetCache {
            x,
            a0,
            enc,
            pooled,
            mid,
            cat,
            dec,
            out,
        }
    }

    pub fn predict(&self, x: Tensor<T>) -> Tensor<T> {
        self.forward(x).out
    }

    /// Gradients of the parameters (flat, in [`Self::params`] order) given
    /// the gradient of the loss with respect to the sigmoid output.
    pub fn backward(&self, cache: &UNetCache<T>, g_out: &Tensor<T>) -> Vec<T> {
        let levels = self.arch.levels;
        let mut g_patch = ConvGrad::zeros_like(&self.patch);
        let mut g_enc0 = ConvGrad::zeros_like(&self.enc0);
        let mut g_down: Vec<(ConvGrad<T>, ConvGrad<T>)> = self
            .down
            .iter()
            .map(|(a, b)| (ConvGrad::zeros_like(a), ConvGrad::zeros_like(b)))
            .collect();
        let mut g_up: Vec<ConvGrad<T>> = self.up.iter().map(ConvGrad::zeros_like).collect();
        let mut g_head = ConvGrad::zeros_like(&self.head);

        let g_logit = Tensor::from_vec(
            1,
            g_out.h,
            g_out.w,
            g_out
                .data
                .iter()
                .zip(&cache.out.data)
                .map(|(&g, &y)| g * y * (T::one() - y))
                .collect(),
        );
        let top = if levels > 1 { &cache.dec[0] } else { &cache.enc[0] };
        let mut g_cur = self.head.backward(top, &g_logit, &mut g_head);

        let mut g_enc: Vec<Option<Tensor<T>>> = vec![None; levels];
        let add = |slot: &mut Option<Tensor<T>>, g: Tensor<T>| match slot {
            Some(acc) => acc.data.iter_mut().zip(&g.data).for_each(|(a, b)| *a += *b),
            None => *slot = Some(g),
        };
        for l in 0..levels - 1 {
            let g_pre = relu_backward(&cache.dec[l], &g_cur);
            let g_cat = self.up[l].backward(&cache.cat[l], &g_pre, &mut g_up[l]);
            let (g_skip, g_upd) = split(&g_cat, cache.enc[l].c);
            add(&mut g_enc[l], g_skip);
            let deeper = &cache.enc[l + 1];
            g_cur = upsample2_backward(deeper.h, deeper.w, &g_upd);
        }
        add(&mut g_enc[levels - 1], g_cur);

        for l in (1..levels).rev() {
            let g_e = g_enc[l].take().expect("gradient reaches every level");
            let (ca, cb) = &self.down[l - 1];
            let g_m = cb.backward(
                &cache.mid[l - 1],
                &relu_backward(&cache.enc[l], &g_e),
                &mut g_down[l - 1].1,
            );
            let g_p = ca.backward(
                &cache.pooled[l - 1],
                &relu_backward(&cache.mid[l - 1], &g_m),
                &mut g_down[l - 1].0,
            );
            let prev = &cache.enc[l - 1];
            add(&mut g_enc[l - 1], avg_pool2_backward(prev.h, prev.w, &g_p));
        }
        let g_e0 = g_enc[0].take().expect("level 0 gradient");
        let g_a0 = self
            .enc0
            .backward(&cache.a0, &relu_backward(&cache.enc[0], &g_e0), &mut g_enc0);
        self.patch
            .backward(&cache.x, &relu_backward(&cache.a0, &g_a0), &mut g_patch);

        let mut grads = vec![g_patch, g_enc0];
        for (a, b) in g_down {
            grads.push(a);
            grads.push(b);
        }
        grads.extend(g_up);
        grads.push(g_head);
        flatten_grads(&grads)
    }
}

/// Patch discriminator: two 3×3 conv layers, global average, linear logit.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T> {
    conv1: Conv2d<T>,
    conv2: Conv2d<T>,
    fc: Conv2d<T>,
}

pub struct DiscCache<T> {
    x: Tensor<T>,
    h1: Tensor<T>,
    h2: Tensor<T>,
    pooled: Tensor<T>,
    pub logit: T,
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD15C);
        Discriminator {
            conv1: Conv2d::new(1, channels, 3, 1, 1, &mut rng),
            conv2: Conv2d::new(channels, channels, 3, 1, 1, &mut rng),
            fc: Conv2d::new(channels, 1, 1, 1, 0, &mut rng),
        }
    }

    pub fn params(&self) -> Vec<T> {
        flatten(&[&self.conv1, &self.conv2, &self.fc])
    }

    pub fn set_params(&mut self, flat: &[T]) {
        unflatten(&mut [&mut self.conv1, &mut self.conv2, &mut self.fc], flat);
    }

    pub fn forward(&self, x: &Tensor<T>) -> DiscCache<T> {
        let h1 = relu(&self.conv1.forward(x));
        let h2 = relu(&self.conv2.forward(&h1));
        let n = T::from_usize(h2.h * h2.w).expect("size");
        let pooled = Tensor::from_vec(
            h2.c,
            1,
            1,
            (0..h2.c).map(|c| h2.plane(c).iter().copied().sum::<T>() / n).collect(),
        );
        let logit = self.fc.forward(&pooled).data[0];
        DiscCache {
            x: x.clone(),
            h1,
            h2,
            pooled,
            logit,
        }
    }

    /// Parameter gradients and input gradient for `dL/dlogit = g`.
    pub fn backward(&self, cache: &DiscCache<T>, g: T) -> (Vec<T>, Tensor<T>) {
        let mut g1 = ConvGrad::zeros_like(&self.conv1);
        let mut g2 = ConvGrad::zeros_like(&self.conv2);
        let mut gf = ConvGrad::zeros_like(&self.fc);
        let g_pool = self
            .fc
            .backward(&cache.pooled, &Tensor::from_vec(1, 1, 1, vec![g]), &mut gf);
        let (h, w) = (cache.h2.h, cache.h2.w);
        let n = T::from_usize(h * w).expect("size");
        let mut g_h2 = Tensor::zeros(cache.h2.c, h, w);
        for c in 0..cache.h2.c {
            let v = g_pool.data[c] / n;
            g_h2.plane_mut(c).iter_mut().for_each(|x| *x = v);
        }
        let g_h1 = self
            .conv2
            .backward(&cache.h1, &relu_backward(&cache.h2, &g_h2), &mut g2);
        let g_x = self
            .conv1
            .backward(&cache.x, &relu_backward(&cache.h1, &g_h1), &mut g1);
        (flatten_grads(&[g1, g2, gf]), g_x)
    }
}

/// Losses and gradients for one `(scan, template)` sample.
pub struct SampleGrads<T> {
    pub recon: f64,
    pub marginal: f64,
    pub disc: f64,
    pub g_gen: Vec<T>,
    pub g_disc: Vec<T>,
}

/// Generator loss `λ·mse + w·softplus(−D(g(x)))` and discriminator loss
/// `softplus(−D(t)) + softplus(D(g(x)))` with their gradients.
pub fn sample_grads<T: Scalar>(
    net: &UNet<T>,
    disc: &Discriminator<T>,
    x: Tensor<T>,
    target: &Tensor<T>,
    lambda: f64,
    adv_weight: f64,
) -> SampleGrads<T> {
    let cache = net.forward(x);
    let out = &cache.out;
    let n = out.data.len() as f64;
    let lam = T::from_f64(lambda).expect("lambda");
    let scale = T::from_f64(2.0 * lambda / n).expect("scale");
    let mut recon = 0.0;
    let mut g_out = Tensor::zeros(1, out.h, out.w);
    for ((g, &y), &t) in g_out.data.iter_mut().zip(&out.data).zip(&target.data) {
        let d = y - t;
        recon += (d * d).to_f64().unwrap_or(f64::NAN);
        *g = scale * d;
    }
    recon = lam.to_f64().unwrap_or(1.0) * recon / n;

    let mut marginal = 0.0;
    let mut disc_loss = 0.0;
    let mut g_disc = vec![T::zero(); disc.params().len()];
    if adv_weight > 0.0 {
        let w = T::from_f64(adv_weight).expect("weight");
        // Generator side: non-saturating density-ratio term.
        let fake = disc.forward(out);
        marginal = adv_weight * softplus(-fake.logit).to_f64().unwrap_or(f64::NAN);
        let dz = -sigmoid(-fake.logit);
        let (_, g_in) = disc.backward(&fake, w * dz);
        g_out.data.iter_mut().zip(&g_in.data).for_each(|(a, b)| *a += *b);

        // Discriminator side, estimate treated as a constant.
        let real = disc.forward(target);
        disc_loss = (softplus(-real.logit) + softplus(fake.logit)).to_f64().unwrap_or(f64::NAN);
        let (g_real, _) = disc.backward(&real, -sigmoid(-real.logit));
        let (g_fake, _) = disc.backward(&fake, sigmoid(fake.logit));
        for ((g, a), b) in g_disc.iter_mut().zip(&g_real).zip(&g_fake) {
            *g = *a + *b;
        }
    }
    let g_gen = net.backward(&cache, &g_out);
    SampleGrads {
        recon,
        marginal,
        disc: disc_loss,
        g_gen,
        g_disc,
    }
}

/// Convert a registered scan (or a crop of it) into a network input.
pub fn scan_tensor<T: Scalar>(scan: &GrayImage, noise: Option<(&mut ChaCha8Rng, f64)>) -> Tensor<T> {
    let mut data: Vec<T> = scan
        .pixels()
        .iter()
        .map(|&v| T::from_f64(v).expect("pixel"))
        .collect();
    if let Some((rng, std)) = noise {
        let dist = Normal::new(0.0, std).expect("valid std");
        for v in data.iter_mut() {
            *v += T::from_f64(dist.sample(rng)).expect("noise");
        }
    }
    Tensor::from_vec(1, scan.rows(), scan.cols(), data)
}

pub fn template_tensor<T: Scalar>(t: &BinaryTemplate) -> Tensor<T> {
    Tensor::from_vec(
        1,
        t.rows(),
        t.cols(),
        t.bits().iter().map(|&b| T::from_u8(b).expect("bit")).collect(),
    )
}

/// Trained estimator: the mapper plus what is needed to reproduce inference.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedModel {
    pub net: UNet<f32>,
    pub mode: Mode,
    pub input_noise_std: f64,
    pub config: TrainConfig,
}

impl LearnedModel {
    /// Per-symbol whiteness for a registered scan. The stochastic estimator
    /// perturbs its input with a stream keyed by `noise_seed`.
    pub fn estimate(&self, scan: &GrayImage, noise_seed: u64) -> Result<Vec<f64>> {
        if scan.pps != self.net.arch.pps {
            return Err(Error::Dimension(format!(
                "scan pps {} but model expects {}",
                scan.pps, self.net.arch.pps
            )));
        }
        if scan.symbol_dims().is_none() {
            return Err(Error::Dimension("scan is not registered".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let noise = match self.mode {
            Mode::Stochastic => Some((&mut rng, self.input_noise_std)),
            Mode::Deterministic => None,
        };
        let out = self.net.predict(scan_tensor(scan, noise));
        Ok(out.data.iter().map(|&v| v as f64).collect())
    }
}

fn random_crop(
    t: &BinaryTemplate,
    x: &GrayImage,
    crop: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(BinaryTemplate, GrayImage)> {
    let (n, m) = t.dims();
    let (ch, cw) = (crop.min(n), crop.min(m));
    let r0 = rng.gen_range(0..=n - ch);
    let c0 = rng.gen_range(0..=m - cw);
    let tc = t.crop(r0, c0, ch, cw)?;
    let p = x.pps;
    let pixels = (r0 * p..(r0 + ch) * p)
        .flat_map(|r| x.pixels()[r * x.cols() + c0 * p..r * x.cols() + (c0 + cw) * p].iter().copied())
        .collect();
    Ok((tc, GrayImage::new(ch * p, cw * p, pixels, p)?))
}

/// Train the learned estimator on `(template, registered scan)` pairs.
pub fn train_estimator(
    pairs: &[(BinaryTemplate, GrayImage)],
    cfg: &TrainConfig,
    mode: Mode,
) -> Result<(LearnedModel, Vec<LossBreakdown>)> {
    cfg.validate()?;
    if pairs.len() < 8 {
        return Err(Error::Parameter(format!(
            "need at least 8 training pairs, got {}",
            pairs.len()
        )));
    }
    for (t, x) in pairs {
        if x.pps != cfg.pps {
            return Err(Error::Dimension(format!("scan pps {} != {}", x.pps, cfg.pps)));
        }
        x.check_registered(t.rows(), t.cols())?;
    }
    let noise_std = match mode {
        Mode::Stochastic => STOCHASTIC_NOISE_STD,
        Mode::Deterministic => 0.0,
    };
    let mut net = UNet::<f32>::new(cfg.architecture, cfg.seed);
    let mut disc = Discriminator::<f32>::new(cfg.architecture.disc_channels, cfg.seed);
    let mut opt_g = Adam::new(net.n_params(), cfg.learning_rate);
    let mut opt_d = Adam::new(disc.params().len(), cfg.learning_rate);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5EED_CAFE);
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..pairs.len())
            .flat_map(|i| std::iter::repeat_n(i, cfg.crops_per_pair))
            .collect();
        order.shuffle(&mut rng);
        let (mut sum_r, mut sum_m, mut sum_d, mut count) = (0.0, 0.0, 0.0, 0usize);
        for batch in order.chunks(cfg.batch_size) {
            let mut samples = Vec::with_capacity(batch.len());
            for &i in batch {
                let (t, x) = random_crop(&pairs[i].0, &pairs[i].1, cfg.crop, &mut rng)?;
                let noise_seed = rng.gen::<u64>();
                samples.push((t, x, noise_seed));
            }
            let results = crate::par::map(&samples, |(t, x, noise_seed)| {
                let mut nrng = ChaCha8Rng::seed_from_u64(*noise_seed);
                let noise = (noise_std > 0.0).then_some((&mut nrng, noise_std));
                sample_grads(
                    &net,
                    &disc,
                    scan_tensor(x, noise),
                    &template_tensor(t),
                    cfg.lambda,
                    cfg.adversarial_weight,
                )
            });
            let inv = 1.0 / results.len() as f32;
            let mut g_gen = vec![0.0f32; net.n_params()];
            let mut g_disc = vec![0.0f32; disc.params().len()];
            for r in &results {
                g_gen.iter_mut().zip(&r.g_gen).for_each(|(a, b)| *a += b * inv);
                g_disc.iter_mut().zip(&r.g_disc).for_each(|(a, b)| *a += b * inv);
                sum_r += r.recon;
                sum_m += r.marginal;
                sum_d += r.disc;
                count += 1;
            }
            if g_gen.iter().any(|v| !v.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    reason: "non-finite generator gradient".into(),
                });
            }
            let mut p = net.params();
            opt_g.step(&mut p, &g_gen);
            net.set_params(&p);
            if cfg.adversarial_weight > 0.0 {
                let mut q = disc.params();
                opt_d.step(&mut q, &g_disc);
                disc.set_params(&q);
            }
        }
        let c = count as f64;
        let entry = LossBreakdown {
            epoch,
            recon: sum_r / c,
            marginal: sum_m / c,
            total: (sum_r + sum_m) / c,
            disc: sum_d / c,
        };
        if !entry.total.is_finite() {
            return Err(Error::Training {
                epoch,
                reason: "loss is NaN".into(),
            });
        }
        log::debug!("epoch {epoch}: total {:.5} recon {:.5} marginal {:.5}", entry.total, entry.recon, entry.marginal);
        history.push(entry);
    }
    Ok((
        LearnedModel {
            net,
            mode,
            input_noise_std: noise_std,
            config: cfg.clone(),
        },
        history,
    ))
}
