//! Minimal convolutional network toolkit with hand-written backward passes.
//!
//! Everything works on single `C × H × W` tensors; batching is done by the
//! caller, which keeps per-sample work independent and easy to parallelize.
//! Layers are generic over the float type so the same code can be trained in
//! `f32` and gradient-checked in `f64`.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + AddAssign + MulAssign + Sum + Send + Sync + Debug + Default + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[inline]
fn s<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("representable")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(c: usize, h: usize, w: usize) -> Self {
        Tensor {
            c,
            h,
            w,
            data: vec![T::zero(); c * h * w],
        }
    }

    pub fn from_vec(c: usize, h: usize, w: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), c * h * w, "tensor data length");
        Tensor { c, h, w, data }
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[T] {
        &self.data[c * self.h * self.w..(c + 1) * self.h * self.w]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.h * self.w;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        self.shape_like(self.data.iter().map(|&v| f(v)).collect())
    }
}

impl<T> Tensor<T> {
    fn shape_like<U>(&self, data: Vec<U>) -> Tensor<U> {
        Tensor {
            c: self.c,
            h: self.h,
            w: self.w,
            data,
        }
    }
}

/// Dot product with four independent accumulators (fixed summation order).
#[inline]
fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (mut s0, mut s1, mut s2, mut s3) = (T::zero(), T::zero(), T::zero(), T::zero());
    let chunks = n / 4;
    for i in 0..chunks {
        let j = 4 * i;
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    for j in 4 * chunks..n {
        s0 += a[j] * b[j];
    }
    (s0 + s1) + (s2 + s3)
}

#[inline]
fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// 2-D convolution with square kernel, zero padding and integer stride.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d<T> {
    pub cin: usize,
    pub cout: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    /// `[cout][cin][k][k]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Conv2d<T> {
    /// He-normal initialisation.
    pub fn new<R: Rng>(cin: usize, cout: usize, k: usize, stride: usize, pad: usize, rng: &mut R) -> Self {
        let std = (2.0 / (cin * k * k) as f64).sqrt();
        let weight = (0..cout * cin * k * k)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                s(std * z)
            })
            .collect();
        Conv2d {
            cin,
            cout,
            k,
            stride,
            pad,
            weight,
            bias: vec![T::zero(); cout],
        }
    }

    pub fn n_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * self.pad - self.k) / self.stride + 1,
            (w + 2 * self.pad - self.k) / self.stride + 1,
        )
    }

    #[inline]
    fn widx(&self, co: usize, ci: usize, ky: usize, kx: usize) -> usize {
        ((co * self.cin + ci) * self.k + ky) * self.k + kx
    }

    /// Valid output range along one axis for kernel tap `kt` (stride 1).
    #[inline]
    fn span(&self, kt: usize, len_in: usize, len_out: usize) -> (usize, usize) {
        let lo = self.pad.saturating_sub(kt);
        let hi = (len_in + self.pad).saturating_sub(kt).min(len_out);
        (lo, hi.max(lo))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Tensor<T> {
        assert_eq!(x.c, self.cin, "conv input channels");
        let (ho, wo) = self.out_dims(x.h, x.w);
        let mut y = Tensor::zeros(self.cout, ho, wo);
        for co in 0..self.cout {
            let out = y.plane_mut(co);
            out.iter_mut().for_each(|v| *v = self.bias[co]);
            for ci in 0..self.cin {
                let inp = x.plane(ci);
                for ky in 0..self.k {
                    for kx in 0..self.k {
                        let wv = self.weight[self.widx(co, ci, ky, kx)];
                        if self.stride == 1 {
                            let (oy0, oy1) = self.span(ky, x.h, ho);
                            let (ox0, ox1) = self.span(kx, x.w, wo);
                            for oy in oy0..oy1 {
                                let iy = oy + ky - self.pad;
                                let ix0 = ox0 + kx - self.pad;
                                axpy(
                                    wv,
                                    &inp[iy * x.w + ix0..iy * x.w + ix0 + (ox1 - ox0)],
                                    &mut out[oy * wo + ox0..oy * wo + ox1],
                                );
                            }
                        } else {
                            for oy in 0..ho {
                                let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                                if iy < 0 || iy as usize >= x.h {
                                    continue;
                                }
                                let row = &inp[iy as usize * x.w..(iy as usize + 1) * x.w];
                                for ox in 0..wo {
                                    let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                    if ix >= 0 && (ix as usize) < x.w {
                                        out[oy * wo + ox] += wv * row[ix as usize];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        y
    }

    /// Accumulate parameter gradients into `g` and return the input gradient.
    pub fn backward(&self, x: &Tensor<T>, gy: &Tensor<T>, g: &mut ConvGrad<T>) -> Tensor<T> {
        let (ho, wo) = (gy.h, gy.w);
        let mut gx = Tensor::zeros(self.cin, x.h, x.w);
        for co in 0..self.cout {
            let go = gy.plane(co);
            g.bias[co] += go.iter().copied().sum::<T>();
            for ci in 0..self.cin {
                let inp = x.plane(ci);
                for ky in 0..self.k {
                    for kx in 0..self.k {
                        let wi = self.widx(co, ci, ky, kx);
                        let wv = self.weight[wi];
                        let mut acc = T::zero();
                        if self.stride == 1 {
                            let (oy0, oy1) = self.span(ky, x.h, ho);
                            let (ox0, ox1) = self.span(kx, x.w, wo);
                            let gxp = gx.plane_mut(ci);
                            for oy in oy0..oy1 {
                                let iy = oy + ky - self.pad;
                                let ix0 = ox0 + kx - self.pad;
                                let n = ox1 - ox0;
                                let gor = &go[oy * wo + ox0..oy * wo + ox1];
                                acc += dot(gor, &inp[iy * x.w + ix0..iy * x.w + ix0 + n]);
                                axpy(wv, gor, &mut gxp[iy * x.w + ix0..iy * x.w + ix0 + n]);
                            }
                        } else {
                            let gxp = gx.plane_mut(ci);
                            for oy in 0..ho {
                                let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                                if iy < 0 || iy as usize >= x.h {
                                    continue;
                                }
                                let iy = iy as usize;
                                for ox in 0..wo {
                                    let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                    if ix >= 0 && (ix as usize) < x.w {
                                        let gv = go[oy * wo + ox];
                                        acc += gv * inp[iy * x.w + ix as usize];
                                        gxp[iy * x.w + ix as usize] += wv * gv;
                                    }
                                }
                            }
                        }
                        g.weight[wi] += acc;
                    }
                }
            }
        }
        gx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrad<T> {
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> ConvGrad<T> {
    pub fn zeros_like(c: &Conv2d<T>) -> Self {
        ConvGrad {
            weight: vec![T::zero(); c.weight.len()],
            bias: vec![T::zero(); c.bias.len()],
        }
    }

    pub fn add(&mut self, other: &Self) {
        axpy(T::one(), &other.weight, &mut self.weight);
        axpy(T::one(), &other.bias, &mut self.bias);
    }
}

pub fn relu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient through ReLU given its *output*.
pub fn relu_backward<T: Scalar>(y: &Tensor<T>, gy: &Tensor<T>) -> Tensor<T> {
    let data = y
        .data
        .iter()
        .zip(&gy.data)
        .map(|(&o, &g)| if o > T::zero() { g } else { T::zero() })
        .collect();
    y.shape_like(data)
}

pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// `ln(1 + e^v)` without overflow.
pub fn softplus<T: Scalar>(v: T) -> T {
    if v > T::zero() {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

/// 2×2 average pooling; odd trailing rows/columns pool over what exists.
pub fn avg_pool2<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (ho, wo) = (x.h.div_ceil(2), x.w.div_ceil(2));
    let mut y = Tensor::zeros(x.c, ho, wo);
    for c in 0..x.c {
        let inp = x.plane(c);
        let out = y.plane_mut(c);
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = T::zero();
                let mut n = 0usize;
                for iy in 2 * oy..(2 * oy + 2).min(x.h) {
                    for ix in 2 * ox..(2 * ox + 2).min(x.w) {
                        acc += inp[iy * x.w + ix];
                        n += 1;
                    }
                }
                out[oy * wo + ox] = acc / s(n as f64);
            }
        }
    }
    y
}

pub fn avg_pool2_backward<T: Scalar>(h: usize, w: usize, gy: &Tensor<T>) -> Tensor<T> {
    let mut gx = Tensor::zeros(gy.c, h, w);
    for c in 0..gy.c {
        let go = gy.plane(c);
        let gi = gx.plane_mut(c);
        for oy in 0..gy.h {
            for ox in 0..gy.w {
                let ys = 2 * oy..(2 * oy + 2).min(h);
                let xs = 2 * ox..(2 * ox + 2).min(w);
                let n = ys.len() * xs.len();
                let g = go[oy * gy.w + ox] / s(n as f64);
                for iy in ys {
                    for ix in xs.clone() {
                        gi[iy * w + ix] += g;
                    }
                }
            }
        }
    }
    gx
}

/// Nearest-neighbour ×2 upsampling cropped to `(h, w)`.
pub fn upsample2<T: Scalar>(x: &Tensor<T>, h: usize, w: usize) -> Tensor<T> {
    let mut y = Tensor::zeros(x.c, h, w);
    for c in 0..x.c {
        let inp = x.plane(c);
        let out = y.plane_mut(c);
        for oy in 0..h {
            for ox in 0..w {
                out[oy * w + ox] = inp[(oy / 2) * x.w + ox / 2];
            }
        }
    }
    y
}

pub fn upsample2_backward<T: Scalar>(src_h: usize, src_w: usize, gy: &Tensor<T>) -> Tensor<T> {
    let mut gx = Tensor::zeros(gy.c, src_h, src_w);
    for c in 0..gy.c {
        let go = gy.plane(c);
        let gi = gx.plane_mut(c);
        for oy in 0..gy.h {
            for ox in 0..gy.w {
                gi[(oy / 2) * src_w + ox / 2] += go[oy * gy.w + ox];
            }
        }
    }
    gx
}

pub fn concat<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    assert_eq!((a.h, a.w), (b.h, b.w), "concat spatial dims");
    let mut data = a.data.clone();
    data.extend_from_slice(&b.data);
    Tensor::from_vec(a.c + b.c, a.h, a.w, data)
}

pub fn split<T: Scalar>(g: &Tensor<T>, ca: usize) -> (Tensor<T>, Tensor<T>) {
    let n = g.h * g.w;
    (
        Tensor::from_vec(ca, g.h, g.w, g.data[..ca * n].to_vec()),
        Tensor::from_vec(g.c - ca, g.h, g.w, g.data[ca * n..].to_vec()),
    )
}

/// Adam optimizer over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let (b1, b2) = (s::<T>(self.beta1), s::<T>(self.beta2));
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        let step = s::<T>(self.lr * c2.sqrt() / c1);
        let eps = s::<T>(self.eps * c2.sqrt());
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            params[i] = params[i] - step * self.m[i] / (self.v[i].sqrt() + eps);
        }
    }
}

/// Collect conv layer parameters into one flat vector (weights then bias, per layer).
pub fn flatten<T: Scalar>(layers: &[&Conv2d<T>]) -> Vec<T> {
    let mut out = Vec::with_capacity(layers.iter().map(|l| l.n_params()).sum());
    for l in layers {
        out.extend_from_slice(&l.weight);
        out.extend_from_slice(&l.bias);
    }
    out
}

pub fn unflatten<T: Scalar>(layers: &mut [&mut Conv2d<T>], flat: &[T]) {
    let mut i = 0;
    for l in layers.iter_mut() {
        let nw = l.weight.len();
        l.weight.copy_from_slice(&flat[i..i + nw]);
        i += nw;
        let nb = l.bias.len();
        l.bias.copy_from_slice(&flat[i..i + nb]);
        i += nb;
    }
    assert_eq!(i, flat.len(), "parameter count");
}

pub fn flatten_grads<T: Scalar>(grads: &[ConvGrad<T>]) -> Vec<T> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(&g.weight);
        out.extend_from_slice(&g.bias);
    }
    out
}
