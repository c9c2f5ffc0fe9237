//! Minimal deterministic training engine: quantum-filter convolution,
//! average pooling, two dense layers, softmax cross-entropy, Adam.
//!
//! All hot loops accumulate in a fixed order, so training is bitwise
//! reproducible under a fixed seed regardless of the `parallel` feature
//! or thread count.

use crate::activations::{patch_trig, ActivationKernel, ActivationKind, KernelTrig};
use crate::error::{Error, Result};
use crate::tensor::Tensor;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Convolution window side; the architecture uses 3x3 kernels.
pub const KERNEL_SIZE: usize = 3;

#[derive(Clone, Copy, Debug)]
pub struct CnnConfig {
    pub input_h: usize,
    pub input_w: usize,
    pub channels: usize,
    pub hidden: usize,
    pub classes: usize,
    pub kind: ActivationKind,
}

impl CnnConfig {
    /// The 28x28 / 16-channel / 64-hidden / 10-class architecture.
    pub fn standard(kind: ActivationKind) -> Self {
        Self {
            input_h: 28,
            input_w: 28,
            channels: 16,
            hidden: 64,
            classes: 10,
            kind,
        }
    }

    pub fn conv_h(&self) -> usize {
        self.input_h - (KERNEL_SIZE - 1)
    }

    pub fn conv_w(&self) -> usize {
        self.input_w - (KERNEL_SIZE - 1)
    }

    pub fn pooled_h(&self) -> usize {
        self.conv_h() / 2
    }

    pub fn pooled_w(&self) -> usize {
        self.conv_w() / 2
    }

    pub fn flatten_len(&self) -> usize {
        self.pooled_h() * self.pooled_w() * self.channels
    }

    fn validate(&self) -> Result<()> {
        if self.input_h <= KERNEL_SIZE - 1 || self.input_w <= KERNEL_SIZE - 1 {
            return Err(Error::Shape(format!(
                "input {}x{} too small for {KERNEL_SIZE}x{KERNEL_SIZE} kernels",
                self.input_h, self.input_w
            )));
        }
        if self.conv_h() % 2 != 0 || self.conv_w() % 2 != 0 {
            return Err(Error::Shape(format!(
                "conv output {}x{} must have even sides for 2x2 pooling",
                self.conv_h(),
                self.conv_w()
            )));
        }
        if self.channels == 0 || self.hidden == 0 || self.classes == 0 {
            return Err(Error::Argument("zero-sized layer".into()));
        }
        Ok(())
    }
}

/// The convolution + pooling + two dense layers model, with its Adam
/// optimizer state.
#[derive(Clone, Debug)]
pub struct CnnModel {
    pub config: CnnConfig,
    pub kernels: Vec<ActivationKernel>,
    /// [flatten_len x hidden], row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// [hidden x classes], row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub opt: Adam,
}

fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
}

impl CnnModel {
    pub fn new(config: CnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let kernels: Vec<ActivationKernel> = (0..config.channels)
            .map(|_| ActivationKernel::init(config.kind, KERNEL_SIZE * KERNEL_SIZE, &mut rng))
            .collect();
        let flat = config.flatten_len();
        let w1 = glorot(&mut rng, flat, config.hidden, flat * config.hidden);
        let b1 = vec![0.0; config.hidden];
        let w2 = glorot(&mut rng, config.hidden, config.classes, config.hidden * config.classes);
        let b2 = vec![0.0; config.classes];
        let kernel_params: usize = kernels.iter().map(|k| k.params().len()).sum();
        let opt = Adam::new(&[
            kernel_params,
            w1.len(),
            b1.len(),
            w2.len(),
            b2.len(),
        ]);
        Ok(Self {
            config,
            kernels,
            w1,
            b1,
            w2,
            b2,
            opt,
        })
    }

    fn check_images(&self, images: &Tensor) -> Result<usize> {
        let c = &self.config;
        match images.shape() {
            [b, h, w] if *h == c.input_h && *w == c.input_w => Ok(*b),
            s => Err(Error::Shape(format!(
                "expected images [B, {}, {}], got {s:?}",
                c.input_h, c.input_w
            ))),
        }
    }
}

/// Adam optimizer over a fixed list of parameter groups.
#[derive(Clone, Debug)]
pub struct Adam {
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(group_sizes: &[usize]) -> Self {
        Self {
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: group_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: group_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn step(&mut self, lr: f64, params: &mut [&mut [f64]], grads: &[&[f64]]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (g, (p, grad)) in params.iter_mut().zip(grads).enumerate().map(|(g, pg)| (g, pg)) {
            let (m, v) = (&mut self.m[g], &mut self.v[g]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * grad[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                p[i] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

/// Forward intermediates reused by the backward pass.
pub struct ForwardCache {
    pub cos_map: Vec<f64>,
    pub sin_map: Vec<f64>,
    pub flat: Vec<f64>,
    pub h1: Vec<f64>,
}

/// Quantum-filter convolution: one kernel evaluation per channel per 3x3
/// window, stride 1, no padding. The kernel is the nonlinearity; no
/// separate post-activation is applied.
pub fn conv_forward(model: &CnnModel, images: &Tensor) -> Result<Tensor> {
    let batch = model.check_images(images)?;
    let (cos_map, sin_map) = batch_trig(images);
    Ok(conv_forward_pre(model, images, &cos_map, &sin_map, batch))
}

fn batch_trig(images: &Tensor) -> (Vec<f64>, Vec<f64>) {
    patch_trig(images.data())
}

fn conv_forward_pre(
    model: &CnnModel,
    images: &Tensor,
    cos_map: &[f64],
    sin_map: &[f64],
    batch: usize,
) -> Tensor {
    let c = &model.config;
    let (oh, ow, nc) = (c.conv_h(), c.conv_w(), c.channels);
    let (h, w) = (c.input_h, c.input_w);
    let trigs: Vec<KernelTrig> = model.kernels.iter().map(|k| k.trig()).collect();
    let mut out = Tensor::zeros(vec![batch, oh, ow, nc]);
    let per_sample = oh * ow * nc;
    par_chunks_mut!(out.data_mut(), per_sample)
        .enumerate()
        .for_each(|(b, chunk)| {
            let img = &images.data()[b * h * w..(b + 1) * h * w];
            let cmap = &cos_map[b * h * w..(b + 1) * h * w];
            let smap = &sin_map[b * h * w..(b + 1) * h * w];
            let mut px = [0.0; KERNEL_SIZE * KERNEL_SIZE];
            let mut pc = [0.0; KERNEL_SIZE * KERNEL_SIZE];
            let mut ps = [0.0; KERNEL_SIZE * KERNEL_SIZE];
            for i in 0..oh {
                for j in 0..ow {
                    gather_patch(img, cmap, smap, w, i, j, &mut px, &mut pc, &mut ps);
                    let base = (i * ow + j) * nc;
                    for (ch, (kernel, trig)) in model.kernels.iter().zip(&trigs).enumerate() {
                        chunk[base + ch] = kernel.eval_pre(trig, &px, &pc, &ps);
                    }
                }
            }
        });
    out
}

#[inline]
fn gather_patch(
    img: &[f64],
    cmap: &[f64],
    smap: &[f64],
    w: usize,
    i: usize,
    j: usize,
    px: &mut [f64; 9],
    pc: &mut [f64; 9],
    ps: &mut [f64; 9],
) {
    for r in 0..KERNEL_SIZE {
        let row = (i + r) * w + j;
        for s in 0..KERNEL_SIZE {
            px[r * KERNEL_SIZE + s] = img[row + s];
            pc[r * KERNEL_SIZE + s] = cmap[row + s];
            ps[r * KERNEL_SIZE + s] = smap[row + s];
        }
    }
}

/// 2x2 non-overlapping mean pooling over the spatial axes.
pub fn avg_pool(x: &Tensor) -> Result<Tensor> {
    let (b, oh, ow, nc) = match x.shape() {
        [b, oh, ow, nc] => (*b, *oh, *ow, *nc),
        s => return Err(Error::Shape(format!("expected [B,H,W,C], got {s:?}"))),
    };
    if oh % 2 != 0 || ow % 2 != 0 {
        return Err(Error::Shape(format!("odd spatial dims {oh}x{ow}")));
    }
    let (ph, pw) = (oh / 2, ow / 2);
    let mut out = Tensor::zeros(vec![b, ph, pw, nc]);
    let per_sample = ph * pw * nc;
    let src = x.data();
    par_chunks_mut!(out.data_mut(), per_sample)
        .enumerate()
        .for_each(|(s, chunk)| {
            let base = s * oh * ow * nc;
            for i in 0..ph {
                for j in 0..pw {
                    for c in 0..nc {
                        let mut acc = 0.0;
                        for di in 0..2 {
                            for dj in 0..2 {
                                acc += src[base + (((2 * i + di) * ow) + 2 * j + dj) * nc + c];
                            }
                        }
                        chunk[(i * pw + j) * nc + c] = acc / 4.0;
                    }
                }
            }
        });
    Ok(out)
}

/// Full forward pass. dense1 uses tanh, dense2 is linear; softmax lives in
/// the loss.
pub fn forward(model: &CnnModel, images: &Tensor) -> Result<(Tensor, ForwardCache)> {
    let batch = model.check_images(images)?;
    let (cos_map, sin_map) = batch_trig(images);
    let conv = conv_forward_pre(model, images, &cos_map, &sin_map, batch);
    let pooled = avg_pool(&conv)?;
    let flat = pooled.into_data();
    let c = &model.config;
    let (f, hid, k) = (c.flatten_len(), c.hidden, c.classes);

    let mut h1 = vec![0.0; batch * hid];
    par_chunks_mut!(h1.as_mut_slice(), hid)
        .enumerate()
        .for_each(|(b, row)| {
            let fr = &flat[b * f..(b + 1) * f];
            for j in 0..hid {
                let mut z = model.b1[j];
                for i in 0..f {
                    z += fr[i] * model.w1[i * hid + j];
                }
                row[j] = z.tanh();
            }
        });

    let mut logits = Tensor::zeros(vec![batch, k]);
    par_chunks_mut!(logits.data_mut(), k)
        .enumerate()
        .for_each(|(b, row)| {
            let hr = &h1[b * hid..(b + 1) * hid];
            for j in 0..k {
                let mut z = model.b2[j];
                for i in 0..hid {
                    z += hr[i] * model.w2[i * k + j];
                }
                row[j] = z;
            }
        });

    Ok((
        logits,
        ForwardCache {
            cos_map,
            sin_map,
            flat,
            h1,
        },
    ))
}

/// Row-wise softmax with max-subtraction.
pub fn softmax_rows(logits: &Tensor) -> Result<Vec<f64>> {
    let (b, k) = match logits.shape() {
        [b, k] => (*b, *k),
        s => return Err(Error::Shape(format!("expected [B,K] logits, got {s:?}"))),
    };
    let mut probs = vec![0.0; b * k];
    for r in 0..b {
        let row = &logits.data()[r * k..(r + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for j in 0..k {
            let e = (row[j] - max).exp();
            probs[r * k + j] = e;
            sum += e;
        }
        for j in 0..k {
            probs[r * k + j] /= sum;
        }
    }
    Ok(probs)
}

/// Mean categorical cross-entropy over the batch.
pub fn loss_ce(logits: &Tensor, labels: &[u8]) -> Result<f64> {
    let (b, k) = match logits.shape() {
        [b, k] => (*b, *k),
        s => return Err(Error::Shape(format!("expected [B,K] logits, got {s:?}"))),
    };
    if labels.len() != b {
        return Err(Error::Argument(format!(
            "{} labels for batch of {b}",
            labels.len()
        )));
    }
    let mut total = 0.0;
    for r in 0..b {
        let y = labels[r] as usize;
        if y >= k {
            return Err(Error::Argument(format!("label {y} out of range 0..{k}")));
        }
        let row = &logits.data()[r * k..(r + 1) * k];
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = row.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        total += -(row[y] - max) + log_sum;
    }
    Ok(total / b as f64)
}

/// Parameter gradients, grouped in optimizer order.
pub struct Gradients {
    pub kernels: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Loss and exact analytic gradients on one batch.
pub fn compute_gradients(
    model: &CnnModel,
    images: &Tensor,
    labels: &[u8],
) -> Result<(f64, Gradients)> {
    let batch = model.check_images(images)?;
    if labels.len() != batch {
        return Err(Error::Argument(format!(
            "{} labels for batch of {batch}",
            labels.len()
        )));
    }
    let (logits, cache) = forward(model, images)?;
    let loss = loss_ce(&logits, labels)?;
    let probs = softmax_rows(&logits)?;

    let c = &model.config;
    let (f, hid, k, nc) = (c.flatten_len(), c.hidden, c.classes, c.channels);
    let (oh, ow) = (c.conv_h(), c.conv_w());
    let (ph, pw) = (c.pooled_h(), c.pooled_w());
    let (h, w) = (c.input_h, c.input_w);

    // dLoss/dlogits, mean-reduced over the batch.
    let mut gl = probs;
    for r in 0..batch {
        gl[r * k + labels[r] as usize] -= 1.0;
    }
    for v in gl.iter_mut() {
        *v /= batch as f64;
    }

    let mut dw2 = vec![0.0; hid * k];
    par_chunks_mut!(dw2.as_mut_slice(), k)
        .enumerate()
        .for_each(|(i, row)| {
            for b in 0..batch {
                let hv = cache.h1[b * hid + i];
                for j in 0..k {
                    row[j] += hv * gl[b * k + j];
                }
            }
        });
    let mut db2 = vec![0.0; k];
    for b in 0..batch {
        for j in 0..k {
            db2[j] += gl[b * k + j];
        }
    }

    // Backprop through dense2 and the tanh of dense1.
    let mut gh1 = vec![0.0; batch * hid];
    par_chunks_mut!(gh1.as_mut_slice(), hid)
        .enumerate()
        .for_each(|(b, row)| {
            for i in 0..hid {
                let mut acc = 0.0;
                for j in 0..k {
                    acc += gl[b * k + j] * model.w2[i * k + j];
                }
                let hv = cache.h1[b * hid + i];
                row[i] = acc * (1.0 - hv * hv);
            }
        });

    let mut dw1 = vec![0.0; f * hid];
    par_chunks_mut!(dw1.as_mut_slice(), hid)
        .enumerate()
        .for_each(|(i, row)| {
            for b in 0..batch {
                let fv = cache.flat[b * f + i];
                if fv != 0.0 {
                    for j in 0..hid {
                        row[j] += fv * gh1[b * hid + j];
                    }
                }
            }
        });
    let mut db1 = vec![0.0; hid];
    for b in 0..batch {
        for j in 0..hid {
            db1[j] += gh1[b * hid + j];
        }
    }

    let mut gflat = vec![0.0; batch * f];
    par_chunks_mut!(gflat.as_mut_slice(), f)
        .enumerate()
        .for_each(|(b, row)| {
            for i in 0..f {
                let mut acc = 0.0;
                for j in 0..hid {
                    acc += model.w1[i * hid + j] * gh1[b * hid + j];
                }
                row[i] = acc;
            }
        });

    // Kernel gradients: unpool the flattened gradient on the fly and apply
    // the product rule at every window position, channels in parallel.
    let plens: Vec<usize> = model.kernels.iter().map(|kn| kn.params().len()).collect();
    let plen = plens[0];
    let mut dkernels = vec![0.0; nc * plen];
    let trigs: Vec<KernelTrig> = model.kernels.iter().map(|kn| kn.trig()).collect();
    par_chunks_mut!(dkernels.as_mut_slice(), plen)
        .enumerate()
        .for_each(|(ch, acc)| {
            let kernel = &model.kernels[ch];
            let trig = &trigs[ch];
            let mut px = [0.0; 9];
            let mut pc = [0.0; 9];
            let mut ps = [0.0; 9];
            for b in 0..batch {
                let img = &images.data()[b * h * w..(b + 1) * h * w];
                let cmap = &cache.cos_map[b * h * w..(b + 1) * h * w];
                let smap = &cache.sin_map[b * h * w..(b + 1) * h * w];
                for i in 0..oh {
                    for j in 0..ow {
                        let scale =
                            gflat[b * f + ((i / 2) * pw + j / 2) * nc + ch] / 4.0;
                        if scale == 0.0 {
                            continue;
                        }
                        gather_patch(img, cmap, smap, w, i, j, &mut px, &mut pc, &mut ps);
                        kernel.accumulate_grad_pre(trig, &px, &pc, &ps, scale, acc);
                    }
                }
            }
        });
    let _ = (ph, ow);

    Ok((
        loss,
        Gradients {
            kernels: dkernels,
            w1: dw1,
            b1: db1,
            w2: dw2,
            b2: db2,
        },
    ))
}

/// One optimization step on a batch; returns the batch loss.
pub fn backward_and_step(
    model: &mut CnnModel,
    images: &Tensor,
    labels: &[u8],
    lr: f64,
) -> Result<f64> {
    let (loss, grads) = compute_gradients(model, images, labels)?;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("non-finite batch loss {loss}")));
    }
    apply_gradients(model, &grads, lr);
    Ok(loss)
}

/// Adam update from precomputed gradients.
pub fn apply_gradients(model: &mut CnnModel, grads: &Gradients, lr: f64) {
    let mut kernel_params: Vec<f64> = model
        .kernels
        .iter()
        .flat_map(|k| k.params().iter().copied())
        .collect();
    {
        let CnnModel { w1, b1, w2, b2, opt, .. } = model;
        opt.step(
            lr,
            &mut [&mut kernel_params, w1, b1, w2, b2],
            &[&grads.kernels, &grads.w1, &grads.b1, &grads.w2, &grads.b2],
        );
    }
    let mut offset = 0;
    for kernel in model.kernels.iter_mut() {
        let n = kernel.params().len();
        kernel
            .params_mut()
            .copy_from_slice(&kernel_params[offset..offset + n]);
        offset += n;
    }
}

/// Per-epoch metric row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

/// Training history; the optimal epoch is the one minimizing test loss.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
}

impl TrainReport {
    pub fn optimal_epoch(&self) -> Result<usize> {
        self.records
            .iter()
            .min_by(|a, b| a.test_loss.total_cmp(&b.test_loss))
            .map(|r| r.epoch)
            .ok_or_else(|| Error::Argument("empty training report".into()))
    }

    pub fn csv_header() -> &'static str {
        "epoch,train_loss,train_acc,test_loss,test_acc"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::csv_header());
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc
            ));
        }
        out
    }
}

#[derive(Clone, Copy, Debug)]
pub struct TrainOptions {
    /// Final epoch number (inclusive); training runs start_epoch..=epochs.
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// First epoch to actually run (1 for a fresh model). Resuming from a
    /// checkpoint saved after epoch e uses start_epoch = e + 1; the shuffle
    /// stream for skipped epochs is still drawn so the resumed run sees the
    /// same batch order as an uninterrupted one.
    pub start_epoch: usize,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            epochs: 5,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
            start_epoch: 1,
        }
    }
}

/// Mean loss and accuracy over a full split, evaluated in fixed-order
/// chunks.
pub fn evaluate(model: &CnnModel, images: &Tensor, labels: &[u8]) -> Result<(f64, f64)> {
    let n = model.check_images(images)?;
    if n == 0 {
        return Err(Error::Argument("empty evaluation set".into()));
    }
    let c = &model.config;
    let px = c.input_h * c.input_w;
    let chunk = 256;
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut start = 0;
    while start < n {
        let end = (start + chunk).min(n);
        let sub = Tensor::new(
            vec![end - start, c.input_h, c.input_w],
            images.data()[start * px..end * px].to_vec(),
        )?;
        let (logits, _) = forward(model, &sub)?;
        loss_sum += loss_ce(&logits, &labels[start..end])? * (end - start) as f64;
        for (r, &y) in labels[start..end].iter().enumerate() {
            let row = &logits.data()[r * c.classes..(r + 1) * c.classes];
            let pred = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap();
            if pred == y as usize {
                correct += 1;
            }
        }
        start = end;
    }
    Ok((loss_sum / n as f64, correct as f64 / n as f64))
}

/// Seeded training loop with full-split metrics each epoch. `on_epoch`
/// fires after each epoch's metrics are computed (checkpointing hook).
pub fn train<F>(
    model: &mut CnnModel,
    train_images: &Tensor,
    train_labels: &[u8],
    test_images: &Tensor,
    test_labels: &[u8],
    opts: TrainOptions,
    mut on_epoch: F,
) -> Result<TrainReport>
where
    F: FnMut(&CnnModel, &EpochRecord) -> Result<()>,
{
    let n = model.check_images(train_images)?;
    model.check_images(test_images)?;
    if n == 0 || test_labels.is_empty() {
        return Err(Error::Argument("empty dataset".into()));
    }
    if train_labels.len() != n {
        return Err(Error::Argument("train labels/images length mismatch".into()));
    }
    let c = model.config;
    let px = c.input_h * c.input_w;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = TrainReport::default();
    if opts.start_epoch == 0 {
        return Err(Error::Argument("start_epoch must be >= 1".into()));
    }
    for epoch in 1..=opts.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        if epoch < opts.start_epoch {
            continue;
        }
        for batch_idx in order.chunks(opts.batch_size.max(1)) {
            let mut data = Vec::with_capacity(batch_idx.len() * px);
            let mut labels = Vec::with_capacity(batch_idx.len());
            for &s in batch_idx {
                data.extend_from_slice(&train_images.data()[s * px..(s + 1) * px]);
                labels.push(train_labels[s]);
            }
            let batch = Tensor::new(vec![batch_idx.len(), c.input_h, c.input_w], data)?;
            backward_and_step(model, &batch, &labels, opts.lr)?;
        }
        let (train_loss, train_acc) = evaluate(model, train_images, train_labels)?;
        let (test_loss, test_acc) = evaluate(model, test_images, test_labels)?;
        let record = EpochRecord {
            epoch,
            train_loss,
            train_acc,
            test_loss,
            test_acc,
        };
        on_epoch(model, &record)?;
        report.records.push(record);
    }
    Ok(report)
}
