//! Policy/value network: optional same-padded convolution, fully connected
//! ReLU trunk, and separate policy and value heads. Forward and backward
//! passes are batched through GEMM.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::Float;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar type of the network (`f32` for training speed, `f64` for checks).
pub trait Real: Float + Default + Debug + Send + Sync + Sum + 'static {
    /// `C = alpha * A * B + beta * C` with arbitrary strides.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_strides: (usize, usize),
        b: &[Self],
        b_strides: (usize, usize),
        beta: Self,
        c: &mut [Self],
        c_strides: (usize, usize),
    );

    fn from_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

fn span(rows: usize, cols: usize, (rs, cs): (usize, usize)) -> usize {
    if rows == 0 || cols == 0 {
        0
    } else {
        (rows - 1) * rs + (cols - 1) * cs + 1
    }
}

macro_rules! impl_real {
    ($t:ty, $f:path) => {
        impl Real for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_strides: (usize, usize),
                b: &[Self],
                b_strides: (usize, usize),
                beta: Self,
                c: &mut [Self],
                c_strides: (usize, usize),
            ) {
                assert!(a.len() >= span(m, k, a_strides));
                assert!(b.len() >= span(k, n, b_strides));
                assert!(c.len() >= span(m, n, c_strides));
                if m == 0 || n == 0 {
                    return;
                }
                // SAFETY: the asserts above keep every strided access inside the slices.
                unsafe {
                    $f(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        a_strides.0 as isize,
                        a_strides.1 as isize,
                        b.as_ptr(),
                        b_strides.0 as isize,
                        b_strides.1 as isize,
                        beta,
                        c.as_mut_ptr(),
                        c_strides.0 as isize,
                        c_strides.1 as isize,
                    )
                }
            }

            fn from_f64(v: f64) -> Self {
                v as $t
            }

            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

/// Network shape. `conv_filters = 0` skips the convolution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyArch {
    pub input: [usize; 3],
    pub conv_filters: usize,
    pub kernel: usize,
    pub hidden: Vec<usize>,
    pub n_actions: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Dense {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

impl PolicyArch {
    /// Conv 32 3x3, then FC 512 and FC 256.
    pub fn reference(input: [usize; 3], n_actions: usize) -> Self {
        PolicyArch { input, conv_filters: 32, kernel: 3, hidden: vec![512, 256], n_actions }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input.contains(&0) || self.n_actions == 0 {
            return Err(Error::config("arch", "input dimensions and action count must be positive"));
        }
        if self.conv_filters > 0 && self.kernel.is_multiple_of(2) {
            return Err(Error::config("arch.kernel", "kernel size must be odd"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("arch.hidden", "layer widths must be positive"));
        }
        Ok(())
    }

    fn positions(&self) -> usize {
        self.input[0] * self.input[1]
    }

    fn obs_len(&self) -> usize {
        self.input.iter().product()
    }

    fn patch_len(&self) -> usize {
        self.kernel * self.kernel * self.input[2]
    }

    fn feature_len(&self) -> usize {
        if self.conv_filters > 0 {
            self.positions() * self.conv_filters
        } else {
            self.obs_len()
        }
    }

    fn trunk_width(&self) -> usize {
        self.hidden.last().copied().unwrap_or_else(|| self.feature_len())
    }

    /// Parameter blocks: conv (if any), hidden layers, policy head, value head.
    fn blocks(&self) -> (Option<Dense>, Vec<Dense>, Dense, Dense) {
        let mut off = 0;
        let mut dense = |fan_in: usize, fan_out: usize| {
            let d = Dense { w: off, b: off + fan_in * fan_out, fan_in, fan_out };
            off += fan_in * fan_out + fan_out;
            d
        };
        let conv = (self.conv_filters > 0).then(|| dense(self.patch_len(), self.conv_filters));
        let mut width = self.feature_len();
        let mut hidden = Vec::new();
        for &h in &self.hidden {
            hidden.push(dense(width, h));
            width = h;
        }
        let policy = dense(width, self.n_actions);
        let value = dense(width, 1);
        (conv, hidden, policy, value)
    }

    pub fn n_params(&self) -> usize {
        let (_, _, _, v) = self.blocks();
        v.b + 1
    }
}

/// Flat parameter vector bound to an architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams<T: Real> {
    arch: PolicyArch,
    data: Vec<T>,
}

/// Activations kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct ForwardCache<T: Real> {
    batch: usize,
    cols: Vec<T>,
    acts: Vec<Vec<T>>,
    pub logits: Vec<T>,
    pub values: Vec<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn logits_row(&self, i: usize) -> &[T] {
        let a = self.logits.len() / self.batch.max(1);
        &self.logits[i * a..(i + 1) * a]
    }
}

fn add_bias<T: Real>(out: &mut [T], bias: &[T]) {
    for row in out.chunks_mut(bias.len()) {
        for (o, &b) in row.iter_mut().zip(bias) {
            *o = *o + b;
        }
    }
}

fn relu<T: Real>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

fn col_sum<T: Real>(m: &[T], cols: usize, out: &mut [T]) {
    for row in m.chunks(cols) {
        for (o, &x) in out.iter_mut().zip(row) {
            *o = *o + x;
        }
    }
}

fn relu_mask<T: Real>(grad: &mut [T], act: &[T]) {
    for (g, &a) in grad.iter_mut().zip(act) {
        if a <= T::zero() {
            *g = T::zero();
        }
    }
}

impl<T: Real> PolicyParams<T> {
    /// Xavier-uniform weights, zero biases.
    pub fn init(arch: PolicyArch, rng: &mut impl Rng) -> Result<Self> {
        arch.validate()?;
        let mut data = vec![T::zero(); arch.n_params()];
        let (conv, hidden, policy, value) = arch.blocks();
        let k2 = arch.kernel * arch.kernel;
        let mut layers: Vec<(Dense, usize, usize)> = Vec::new();
        if let Some(c) = conv {
            layers.push((c, c.fan_in, k2 * c.fan_out));
        }
        layers.extend(hidden.iter().chain([&policy, &value]).map(|d| (*d, d.fan_in, d.fan_out)));
        for (d, fan_in, fan_out) in layers {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut data[d.w..d.b] {
                *w = T::from_f64(rng.gen_range(-bound..=bound));
            }
        }
        Ok(PolicyParams { arch, data })
    }

    pub fn from_vec(arch: PolicyArch, data: Vec<T>) -> Result<Self> {
        arch.validate()?;
        if data.len() != arch.n_params() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameters", arch.n_params()),
                got: format!("{}", data.len()),
            });
        }
        Ok(PolicyParams { arch, data })
    }

    pub fn arch(&self) -> &PolicyArch {
        &self.arch
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn cast<U: Real>(&self) -> PolicyParams<U> {
        PolicyParams { arch: self.arch.clone(), data: self.data.iter().map(|x| U::from_f64(x.as_f64())).collect() }
    }

    /// Xavier bound of every weight entry, `None` for biases.
    pub fn weight_bounds(&self) -> Vec<Option<f64>> {
        let mut out = vec![None; self.data.len()];
        let (conv, hidden, policy, value) = self.arch.blocks();
        let k2 = self.arch.kernel * self.arch.kernel;
        let mut layers: Vec<(Dense, usize, usize)> = Vec::new();
        if let Some(c) = conv {
            layers.push((c, c.fan_in, k2 * c.fan_out));
        }
        layers.extend(hidden.iter().chain([&policy, &value]).map(|d| (*d, d.fan_in, d.fan_out)));
        for (d, fan_in, fan_out) in layers {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            out[d.w..d.b].fill(Some(bound));
        }
        out
    }

    /// Batched forward pass over `obs` holding `batch` observations.
    pub fn forward(&self, obs: &[T], batch: usize, cache: &mut ForwardCache<T>) -> Result<()> {
        let arch = &self.arch;
        if obs.len() != batch * arch.obs_len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{batch} x {:?}", arch.input),
                got: format!("{} values", obs.len()),
            });
        }
        let (conv, hidden, policy, value) = arch.blocks();
        let p = &self.data;
        cache.batch = batch;
        cache.acts.resize_with(hidden.len() + 1, Vec::new);

        let feat = arch.feature_len();
        let a0 = &mut cache.acts[0];
        a0.clear();
        a0.resize(batch * feat, T::zero());
        if let Some(c) = conv {
            self.im2col(obs, batch, &mut cache.cols);
            let rows = batch * arch.positions();
            let f = arch.conv_filters;
            let kk = arch.patch_len();
            T::gemm(rows, kk, f, T::one(), &cache.cols, (kk, 1), &p[c.w..c.b], (f, 1), T::zero(), a0, (f, 1));
            add_bias(a0, &p[c.b..c.b + f]);
            relu(a0);
        } else {
            a0.copy_from_slice(obs);
        }

        let mut width = feat;
        for (l, d) in hidden.iter().enumerate() {
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let (x, out) = (&prev[l], &mut rest[0]);
            out.clear();
            out.resize(batch * d.fan_out, T::zero());
            T::gemm(batch, width, d.fan_out, T::one(), x, (width, 1), &p[d.w..d.b], (d.fan_out, 1), T::zero(), out, (d.fan_out, 1));
            add_bias(out, &p[d.b..d.b + d.fan_out]);
            relu(out);
            width = d.fan_out;
        }

        let h = cache.acts.last().expect("trunk output");
        let a = arch.n_actions;
        cache.logits.clear();
        cache.logits.resize(batch * a, T::zero());
        T::gemm(batch, width, a, T::one(), h, (width, 1), &p[policy.w..policy.b], (a, 1), T::zero(), &mut cache.logits, (a, 1));
        add_bias(&mut cache.logits, &p[policy.b..policy.b + a]);
        cache.values.clear();
        cache.values.resize(batch, T::zero());
        T::gemm(batch, width, 1, T::one(), h, (width, 1), &p[value.w..value.b], (1, 1), T::zero(), &mut cache.values, (1, 1));
        let vb = p[value.b];
        for v in &mut cache.values {
            *v = *v + vb;
        }
        Ok(())
    }

    fn im2col(&self, obs: &[T], batch: usize, cols: &mut Vec<T>) {
        let [rows, width, ch] = self.arch.input;
        let k = self.arch.kernel;
        let pad = k / 2;
        let kk = self.arch.patch_len();
        cols.clear();
        cols.resize(batch * rows * width * kk, T::zero());
        for b in 0..batch {
            let img = &obs[b * rows * width * ch..(b + 1) * rows * width * ch];
            for r in 0..rows {
                for c in 0..width {
                    let row = &mut cols[((b * rows + r) * width + c) * kk..][..kk];
                    for dr in 0..k {
                        let Some(rr) = (r + dr).checked_sub(pad).filter(|&x| x < rows) else { continue };
                        for dc in 0..k {
                            let Some(cc) = (c + dc).checked_sub(pad).filter(|&x| x < width) else { continue };
                            let src = &img[(rr * width + cc) * ch..][..ch];
                            row[(dr * k + dc) * ch..][..ch].copy_from_slice(src);
                        }
                    }
                }
            }
        }
    }

    /// Accumulate parameter gradients into `grad` given the loss gradients
    /// with respect to the logits (`batch x n_actions`) and values (`batch`).
    pub fn backward(&self, cache: &ForwardCache<T>, d_logits: &[T], d_values: &[T], grad: &mut [T]) {
        let arch = &self.arch;
        let batch = cache.batch;
        let (conv, hidden, policy, value) = arch.blocks();
        let p = &self.data;
        let a = arch.n_actions;
        let width = arch.trunk_width();
        let h = cache.acts.last().expect("trunk output");

        T::gemm(width, batch, a, T::one(), h, (1, width), d_logits, (a, 1), T::one(), &mut grad[policy.w..policy.b], (a, 1));
        col_sum(d_logits, a, &mut grad[policy.b..policy.b + a]);
        T::gemm(width, batch, 1, T::one(), h, (1, width), d_values, (1, 1), T::one(), &mut grad[value.w..value.b], (1, 1));
        grad[value.b] = grad[value.b] + d_values.iter().copied().sum();

        let mut dh = vec![T::zero(); batch * width];
        T::gemm(batch, a, width, T::one(), d_logits, (a, 1), &p[policy.w..policy.b], (1, a), T::zero(), &mut dh, (width, 1));
        T::gemm(batch, 1, width, T::one(), d_values, (1, 1), &p[value.w..value.b], (1, 1), T::one(), &mut dh, (width, 1));

        for (l, d) in hidden.iter().enumerate().rev() {
            relu_mask(&mut dh, &cache.acts[l + 1]);
            let x = &cache.acts[l];
            let (fi, fo) = (d.fan_in, d.fan_out);
            T::gemm(fi, batch, fo, T::one(), x, (1, fi), &dh, (fo, 1), T::one(), &mut grad[d.w..d.b], (fo, 1));
            col_sum(&dh, fo, &mut grad[d.b..d.b + fo]);
            if l == 0 && conv.is_none() {
                return;
            }
            let mut prev = vec![T::zero(); batch * fi];
            T::gemm(batch, fo, fi, T::one(), &dh, (fo, 1), &p[d.w..d.b], (1, fo), T::zero(), &mut prev, (fi, 1));
            dh = prev;
        }

        if let Some(c) = conv {
            relu_mask(&mut dh, &cache.acts[0]);
            let rows = batch * arch.positions();
            let f = arch.conv_filters;
            let kk = arch.patch_len();
            T::gemm(kk, rows, f, T::one(), &cache.cols, (1, kk), &dh, (f, 1), T::one(), &mut grad[c.w..c.b], (f, 1));
            col_sum(&dh, f, &mut grad[c.b..c.b + f]);
        }
    }
}

/// Softmax over the unmasked entries of `logits`; masked entries get 0.
pub fn masked_softmax<T: Real>(logits: &[T], mask: Option<&[bool]>, out: &mut [T]) {
    let allowed = |i: usize| mask.is_none_or(|m| m[i]);
    let max = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| allowed(*i))
        .map(|(_, &x)| x)
        .fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for (i, (o, &x)) in out.iter_mut().zip(logits).enumerate() {
        *o = if allowed(i) { (x - max).exp() } else { T::zero() };
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}
