//! A small differentiable mask-based separator: strided-conv encoder, a
//! stack of residual conv blocks, N sigmoid masks applied to the encoder
//! output, and a shared transposed-conv decoder trimmed to the input
//! length. Backward passes are hand-derived per layer; correctness is
//! pinned by finite-difference tests.
//!
//! Encoder and decoder carry no bias, so a zero mixture maps to all-zero
//! estimates regardless of the mask values.

use crate::mixgen::WaveformBatch;
use crate::params::{GradientVector, LayerEntry, SeparatorParams};
use crate::real::Real;
use crate::reweight::{BatchPmf, Granularity};
use crate::signal::{pit_with_baseline, si_sdr_and_grad, SignalError, SourceSet, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input of {0} samples is shorter than the encoder kernel ({1})")]
    InputTooShort(usize, usize),
    #[error("gradient contains non-finite components")]
    NonFiniteGradient,
    #[error("pmf has {0} units but the batch produces {1}")]
    UnitCountMismatch(usize, usize),
    #[error(transparent)]
    Signal(#[from] SignalError),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub enc_kernel: usize,
    pub enc_stride: usize,
    pub n_bases: usize,
    pub n_blocks: usize,
    pub hidden: usize,
    pub n_sources: usize,
    /// SI-SDR cap used inside the training loss, in dB.
    pub cap_db: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            enc_kernel: 17,
            enc_stride: 8,
            n_bases: 64,
            n_blocks: 2,
            hidden: 64,
            n_sources: 2,
            cap_db: 60.0,
        }
    }
}

const BLOCK_KERNEL: usize = 3;

impl ModelConfig {
    /// Layer manifest: names, offsets and extents in the flat vector.
    pub fn manifest(&self) -> Vec<LayerEntry> {
        let (nb, h, n) = (self.n_bases, self.hidden, self.n_sources);
        let mut entries = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, extent: usize, offset: &mut usize| {
            entries.push(LayerEntry { name, offset: *offset, extent });
            *offset += extent;
        };
        push("enc.w".into(), nb * self.enc_kernel, &mut offset);
        for b in 0..self.n_blocks {
            push(format!("block{b}.pw1.w"), h * nb, &mut offset);
            push(format!("block{b}.pw1.b"), h, &mut offset);
            push(format!("block{b}.dw.w"), h * h * BLOCK_KERNEL, &mut offset);
            push(format!("block{b}.dw.b"), h, &mut offset);
            push(format!("block{b}.pw2.w"), nb * h, &mut offset);
            push(format!("block{b}.pw2.b"), nb, &mut offset);
        }
        push("mask.w".into(), n * nb * nb, &mut offset);
        push("mask.b".into(), n * nb, &mut offset);
        push("dec.w".into(), nb * self.enc_kernel, &mut offset);
        entries
    }

    pub fn param_count(&self) -> usize {
        self.manifest().iter().map(|e| e.extent).sum()
    }

    fn frames(&self, input_len: usize) -> usize {
        // ceil((T - K) / S) + 1 frames; the input is zero-padded so the
        // last frame is fully covered.
        (input_len - self.enc_kernel).div_ceil(self.enc_stride) + 1
    }

    fn padded_len(&self, frames: usize) -> usize {
        (frames - 1) * self.enc_stride + self.enc_kernel
    }
}

/// Deterministic fan-in-scaled uniform initialization.
pub fn init_params<T: Real>(config: &ModelConfig, seed: u64) -> SeparatorParams<T> {
    let manifest = config.manifest();
    let total: usize = manifest.iter().map(|e| e.extent).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6d6f64656c);
    let mut values = vec![T::zero(); total];
    for entry in &manifest {
        let fan_in = fan_in_for(config, &entry.name);
        let bound = 1.0 / (fan_in as f64).sqrt();
        for v in &mut values[entry.offset..entry.offset + entry.extent] {
            *v = T::from_f64c(rng.gen_range(-bound..bound));
        }
    }
    SeparatorParams { values, manifest }
}

fn fan_in_for(config: &ModelConfig, name: &str) -> usize {
    let (nb, h) = (config.n_bases, config.hidden);
    if name == "enc.w" || name == "dec.w" {
        config.enc_kernel
    } else if name.ends_with("pw1.w") {
        nb
    } else if name.ends_with("dw.w") {
        h * BLOCK_KERNEL
    } else if name.ends_with("pw2.w") {
        h
    } else if name == "mask.w" {
        nb
    } else {
        // biases
        1
    }
}

// ---------------------------------------------------------------------------
// Convolution primitives on flat (channels, time) buffers.

fn conv1d<T: Real>(
    x: &[T],
    in_ch: usize,
    in_len: usize,
    w: &[T],
    b: Option<&[T]>,
    out_ch: usize,
    kernel: usize,
    stride: usize,
    y: &mut [T],
) {
    let frames = (in_len - kernel) / stride + 1;
    for o in 0..out_ch {
        let bias = b.map_or(T::zero(), |b| b[o]);
        for f in 0..frames {
            let start = f * stride;
            let mut acc = bias;
            for c in 0..in_ch {
                let xr = &x[c * in_len + start..c * in_len + start + kernel];
                let wr = &w[(o * in_ch + c) * kernel..(o * in_ch + c + 1) * kernel];
                for k in 0..kernel {
                    acc += wr[k] * xr[k];
                }
            }
            y[o * frames + f] = acc;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv1d_backward<T: Real>(
    x: &[T],
    in_ch: usize,
    in_len: usize,
    w: &[T],
    out_ch: usize,
    kernel: usize,
    stride: usize,
    dy: &[T],
    dx: Option<&mut [T]>,
    dw: &mut [T],
    db: Option<&mut [T]>,
) {
    let frames = (in_len - kernel) / stride + 1;
    if let Some(db) = db {
        for o in 0..out_ch {
            for f in 0..frames {
                db[o] += dy[o * frames + f];
            }
        }
    }
    for o in 0..out_ch {
        for c in 0..in_ch {
            let wr = (o * in_ch + c) * kernel;
            for f in 0..frames {
                let g = dy[o * frames + f];
                if g == T::zero() {
                    continue;
                }
                let start = f * stride;
                for k in 0..kernel {
                    dw[wr + k] += g * x[c * in_len + start + k];
                }
            }
        }
    }
    if let Some(dx) = dx {
        for o in 0..out_ch {
            for c in 0..in_ch {
                let wr = &w[(o * in_ch + c) * kernel..(o * in_ch + c + 1) * kernel];
                for f in 0..frames {
                    let g = dy[o * frames + f];
                    if g == T::zero() {
                        continue;
                    }
                    let start = f * stride;
                    for k in 0..kernel {
                        dx[c * in_len + start + k] += g * wr[k];
                    }
                }
            }
        }
    }
}

/// Transposed convolution, `w` laid out `[in_ch][out_ch][kernel]`.
fn conv_transpose1d<T: Real>(
    x: &[T],
    in_ch: usize,
    frames: usize,
    w: &[T],
    out_ch: usize,
    kernel: usize,
    stride: usize,
    y: &mut [T],
) {
    let out_len = (frames - 1) * stride + kernel;
    for v in y.iter_mut() {
        *v = T::zero();
    }
    for c in 0..in_ch {
        for o in 0..out_ch {
            let wr = &w[(c * out_ch + o) * kernel..(c * out_ch + o + 1) * kernel];
            for f in 0..frames {
                let xv = x[c * frames + f];
                if xv == T::zero() {
                    continue;
                }
                let start = f * stride;
                for k in 0..kernel {
                    y[o * out_len + start + k] += xv * wr[k];
                }
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn conv_transpose1d_backward<T: Real>(
    x: &[T],
    in_ch: usize,
    frames: usize,
    w: &[T],
    out_ch: usize,
    kernel: usize,
    stride: usize,
    dy: &[T],
    dx: &mut [T],
    dw: &mut [T],
) {
    let out_len = (frames - 1) * stride + kernel;
    for c in 0..in_ch {
        for o in 0..out_ch {
            let wr = &w[(c * out_ch + o) * kernel..(c * out_ch + o + 1) * kernel];
            let dwr = (c * out_ch + o) * kernel;
            for f in 0..frames {
                let start = f * stride;
                let mut acc = T::zero();
                let xv = x[c * frames + f];
                for k in 0..kernel {
                    let g = dy[o * out_len + start + k];
                    acc += g * wr[k];
                    dw[dwr + k] += g * xv;
                }
                dx[c * frames + f] += acc;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Parameter views.

struct Views<'a, T: Real> {
    enc_w: &'a [T],
    blocks: Vec<BlockViews<'a, T>>,
    mask_w: &'a [T],
    mask_b: &'a [T],
    dec_w: &'a [T],
}

struct BlockViews<'a, T: Real> {
    pw1_w: &'a [T],
    pw1_b: &'a [T],
    dw_w: &'a [T],
    dw_b: &'a [T],
    pw2_w: &'a [T],
    pw2_b: &'a [T],
}

fn views<'a, T: Real>(config: &ModelConfig, flat: &'a [T]) -> Views<'a, T> {
    let manifest = config.manifest();
    let get = |name: &str| -> &'a [T] {
        let e = manifest
            .iter()
            .find(|e| e.name == name)
            .unwrap_or_else(|| panic!("missing layer {name}"));
        &flat[e.offset..e.offset + e.extent]
    };
    Views {
        enc_w: get("enc.w"),
        blocks: (0..config.n_blocks)
            .map(|b| BlockViews {
                pw1_w: get(&format!("block{b}.pw1.w")),
                pw1_b: get(&format!("block{b}.pw1.b")),
                dw_w: get(&format!("block{b}.dw.w")),
                dw_b: get(&format!("block{b}.dw.b")),
                pw2_w: get(&format!("block{b}.pw2.w")),
                pw2_b: get(&format!("block{b}.pw2.b")),
            })
            .collect(),
        mask_w: get("mask.w"),
        mask_b: get("mask.b"),
        dec_w: get("dec.w"),
    }
}

// Mutable variant used to accumulate gradients. Splits the flat buffer
// following the manifest order.
struct ViewsMut<'a, T: Real> {
    enc_w: &'a mut [T],
    blocks: Vec<BlockViewsMut<'a, T>>,
    mask_w: &'a mut [T],
    mask_b: &'a mut [T],
    dec_w: &'a mut [T],
}

struct BlockViewsMut<'a, T: Real> {
    pw1_w: &'a mut [T],
    pw1_b: &'a mut [T],
    dw_w: &'a mut [T],
    dw_b: &'a mut [T],
    pw2_w: &'a mut [T],
    pw2_b: &'a mut [T],
}

fn views_mut<'a, T: Real>(config: &ModelConfig, mut flat: &'a mut [T]) -> ViewsMut<'a, T> {
    let mut take = |n: usize| -> &'a mut [T] {
        let (head, tail) = std::mem::take(&mut flat).split_at_mut(n);
        flat = tail;
        head
    };
    let (nb, h, n, k) = (config.n_bases, config.hidden, config.n_sources, config.enc_kernel);
    let enc_w = take(nb * k);
    let blocks = (0..config.n_blocks)
        .map(|_| BlockViewsMut {
            pw1_w: take(h * nb),
            pw1_b: take(h),
            dw_w: take(h * h * BLOCK_KERNEL),
            dw_b: take(h),
            pw2_w: take(nb * h),
            pw2_b: take(nb),
        })
        .collect();
    let mask_w = take(n * nb * nb);
    let mask_b = take(n * nb);
    let dec_w = take(nb * k);
    assert!(flat.is_empty(), "manifest does not cover flat vector");
    ViewsMut { enc_w, blocks, mask_w, mask_b, dec_w }
}

// ---------------------------------------------------------------------------
// Forward pass with cached activations.

struct BlockCache<T: Real> {
    input: Vec<T>,      // [nb][F]
    pw1_act: Vec<T>,    // tanh(pw1(x))          [h][F]
    dw_act: Vec<T>,     // tanh(dw(pw1_act))     [h][F]
}

struct ExampleCache<T: Real> {
    padded: Vec<T>,     // [1][P]
    enc_out: Vec<T>,    // [nb][F]
    blocks: Vec<BlockCache<T>>,
    features: Vec<T>,   // block stack output    [nb][F]
    masks: Vec<T>,      // sigmoid activations   [N*nb][F]
    masked: Vec<T>,     // masks * enc_out       [N*nb][F]
    frames: usize,
    input_len: usize,
    /// For each active reference slot j: (estimate index pi(j),
    /// d si_sdr / d estimate).
    grads_per_source: Vec<Option<(usize, Vec<T>)>>,
}

fn tanh_all<T: Real>(x: &mut [T]) {
    for v in x.iter_mut() {
        *v = v.tanh();
    }
}

fn sigmoid<T: Real>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

fn forward_example<T: Real>(
    config: &ModelConfig,
    v: &Views<T>,
    mixture: &Waveform<T>,
) -> Result<(ExampleCache<T>, SourceSet<T>), ModelError> {
    let t_in = mixture.len();
    let (k, s, nb, h, n) = (
        config.enc_kernel,
        config.enc_stride,
        config.n_bases,
        config.hidden,
        config.n_sources,
    );
    if t_in < k {
        return Err(ModelError::InputTooShort(t_in, k));
    }
    let frames = config.frames(t_in);
    let padded_len = config.padded_len(frames);
    let mut padded = vec![T::zero(); padded_len];
    padded[..t_in].copy_from_slice(&mixture.samples);

    let mut enc_out = vec![T::zero(); nb * frames];
    conv1d(&padded, 1, padded_len, v.enc_w, None, nb, k, s, &mut enc_out);

    let mut x = enc_out.clone();
    let mut blocks = Vec::with_capacity(config.n_blocks);
    for bv in &v.blocks {
        let input = x.clone();
        let mut pw1 = vec![T::zero(); h * frames];
        conv1d(&input, nb, frames, bv.pw1_w, Some(bv.pw1_b), h, 1, 1, &mut pw1);
        tanh_all(&mut pw1);
        // 3-tap conv, zero padding 1 on both sides
        let mut pw1_pad = vec![T::zero(); h * (frames + 2)];
        for c in 0..h {
            pw1_pad[c * (frames + 2) + 1..c * (frames + 2) + 1 + frames]
                .copy_from_slice(&pw1[c * frames..(c + 1) * frames]);
        }
        let mut dw = vec![T::zero(); h * frames];
        conv1d(&pw1_pad, h, frames + 2, bv.dw_w, Some(bv.dw_b), h, BLOCK_KERNEL, 1, &mut dw);
        tanh_all(&mut dw);
        let mut pw2 = vec![T::zero(); nb * frames];
        conv1d(&dw, h, frames, bv.pw2_w, Some(bv.pw2_b), nb, 1, 1, &mut pw2);
        for (out, &skip) in pw2.iter_mut().zip(&input) {
            *out += skip;
        }
        blocks.push(BlockCache { input, pw1_act: pw1, dw_act: dw });
        x = pw2;
    }
    let features = x;

    let mut mask_pre = vec![T::zero(); n * nb * frames];
    conv1d(
        &features, nb, frames, v.mask_w, Some(v.mask_b), n * nb, 1, 1, &mut mask_pre,
    );
    let masks: Vec<T> = mask_pre.iter().map(|&p| sigmoid(p)).collect();
    let mut masked = vec![T::zero(); n * nb * frames];
    for src in 0..n {
        for c in 0..nb {
            let m = (src * nb + c) * frames;
            for f in 0..frames {
                masked[m + f] = masks[m + f] * enc_out[c * frames + f];
            }
        }
    }

    let dec_len = padded_len;
    let mut estimates = Vec::with_capacity(n);
    for src in 0..n {
        let mut out = vec![T::zero(); dec_len];
        conv_transpose1d(
            &masked[src * nb * frames..(src + 1) * nb * frames],
            nb,
            frames,
            v.dec_w,
            1,
            k,
            s,
            &mut out,
        );
        out.truncate(t_in);
        estimates.push(Waveform { samples: out, sample_rate: mixture.sample_rate });
    }
    let cache = ExampleCache {
        padded,
        enc_out,
        blocks,
        features,
        masks,
        masked,
        frames,
        input_len: t_in,
        grads_per_source: Vec::new(),
    };
    let est_set = SourceSet::all_active(estimates)?;
    Ok((cache, est_set))
}

/// Run the separator on one mixture.
pub fn forward<T: Real>(
    config: &ModelConfig,
    params: &SeparatorParams<T>,
    mixture: &Waveform<T>,
) -> Result<SourceSet<T>, ModelError> {
    let v = views(config, &params.values);
    Ok(forward_example(config, &v, mixture)?.1)
}

// ---------------------------------------------------------------------------
// Batch forward: per-unit losses + cached loss gradients for backward.

/// Forward state for a whole batch: per-unit losses, unit classes and the
/// cached activations needed for the backward pass.
pub struct BatchForward<T: Real> {
    caches: Vec<ExampleCache<T>>,
    pub per_unit_losses: Vec<T>,
    pub per_unit_classes: Vec<u32>,
    pub granularity: Granularity,
    /// (example index, reference slot) per unit.
    unit_index: Vec<(usize, usize)>,
    /// Active-slot count per example (PerExample averaging factor).
    active_counts: Vec<usize>,
}

pub fn forward_batch<T: Real>(
    config: &ModelConfig,
    params: &SeparatorParams<T>,
    batch: &WaveformBatch<T>,
    granularity: Granularity,
) -> Result<BatchForward<T>, ModelError> {
    let v = views(config, &params.values);
    let cap = T::from_f64c(config.cap_db);
    let mut caches = Vec::with_capacity(batch.len());
    let mut losses = Vec::new();
    let mut classes = Vec::new();
    let mut unit_index = Vec::new();
    let mut active_counts = Vec::new();

    for (i, ex) in batch.examples.iter().enumerate() {
        let (mut cache, estimates) = forward_example(config, &v, &ex.mixture)?;
        let (pit, baselines) = pit_with_baseline(&estimates, &ex.sources, &ex.mixture, cap)?;
        let n = ex.sources.n_sources();
        let mut per_source_loss = Vec::with_capacity(n);
        let mut grads = Vec::with_capacity(n);
        for j in 0..n {
            if !ex.sources.active[j] {
                grads.push(None);
                per_source_loss.push(None);
                continue;
            }
            let est_idx = pit.permutation[j];
            let (sep_db, g) =
                si_sdr_and_grad(&estimates.sources[est_idx], &ex.sources.sources[j], cap)?;
            let base = baselines[j].expect("active slot has baseline");
            per_source_loss.push(Some(-(sep_db - base)));
            grads.push(Some((est_idx, g)));
        }
        let n_active = per_source_loss.iter().flatten().count();
        cache.grads_per_source = grads;
        match granularity {
            Granularity::PerExample => {
                let sum: T = per_source_loss.iter().flatten().cloned().sum();
                losses.push(sum / T::from_f64c(n_active as f64));
                classes.push(ex.classes[0]);
                unit_index.push((i, usize::MAX));
            }
            Granularity::PerSource => {
                for (j, l) in per_source_loss.iter().enumerate() {
                    if let Some(l) = l {
                        losses.push(*l);
                        classes.push(ex.classes[j]);
                        unit_index.push((i, j));
                    }
                }
            }
        }
        active_counts.push(n_active);
        caches.push(cache);
    }
    Ok(BatchForward {
        caches,
        per_unit_losses: losses,
        per_unit_classes: classes,
        granularity,
        unit_index,
        active_counts,
    })
}

/// Per-unit losses only (no backward state retained by the caller).
pub fn batch_losses<T: Real>(
    config: &ModelConfig,
    params: &SeparatorParams<T>,
    batch: &WaveformBatch<T>,
    granularity: Granularity,
) -> Result<Vec<T>, ModelError> {
    Ok(forward_batch(config, params, batch, granularity)?.per_unit_losses)
}

/// Gradient of the pmf-weighted objective w.r.t. the parameters, with the
/// pmf held constant.
pub fn backward_batch<T: Real>(
    config: &ModelConfig,
    params: &SeparatorParams<T>,
    fwd: &BatchForward<T>,
    pmf: &BatchPmf<T>,
) -> Result<GradientVector<T>, ModelError> {
    if pmf.len() != fwd.per_unit_losses.len() {
        return Err(ModelError::UnitCountMismatch(pmf.len(), fwd.per_unit_losses.len()));
    }
    let v = views(config, &params.values);
    let mut grad = GradientVector::zeros(params.len());

    // Upstream gradient w.r.t. each example's estimates. d loss_unit /
    // d estimate = -(d si_sdr / d estimate); PerExample units average
    // over active slots.
    let n = config.n_sources;
    let mut upstream: Vec<Option<Vec<Vec<T>>>> = vec![None; fwd.caches.len()];
    for (u, &(i, j)) in fwd.unit_index.iter().enumerate() {
        let p = pmf.weights[u];
        let cache = &fwd.caches[i];
        let slot_weight = match fwd.granularity {
            Granularity::PerExample => p / T::from_f64c(fwd.active_counts[i] as f64),
            Granularity::PerSource => p,
        };
        let dest = upstream[i]
            .get_or_insert_with(|| vec![vec![T::zero(); cache.input_len]; n]);
        let slots: Vec<usize> = match fwd.granularity {
            Granularity::PerExample => (0..cache.grads_per_source.len())
                .filter(|&jj| cache.grads_per_source[jj].is_some())
                .collect(),
            Granularity::PerSource => vec![j],
        };
        for jj in slots {
            let &(est_idx, ref dsi) = cache.grads_per_source[jj]
                .as_ref()
                .expect("active slot has cached gradient");
            for (d, &g) in dest[est_idx].iter_mut().zip(dsi) {
                *d -= slot_weight * g;
            }
        }
    }

    for (i, up) in upstream.into_iter().enumerate() {
        let Some(up) = up else { continue };
        backward_example(config, &v, &fwd.caches[i], &up, &mut grad.0);
    }
    if !grad.is_finite() {
        return Err(ModelError::NonFiniteGradient);
    }
    Ok(grad)
}

fn backward_example<T: Real>(
    config: &ModelConfig,
    v: &Views<T>,
    cache: &ExampleCache<T>,
    d_estimates: &[Vec<T>],
    grad_flat: &mut [T],
) {
    let (k, s, nb, h, n) = (
        config.enc_kernel,
        config.enc_stride,
        config.n_bases,
        config.hidden,
        config.n_sources,
    );
    let frames = cache.frames;
    let dec_len = config.padded_len(frames);
    let mut g = views_mut(config, grad_flat);

    // decoder (shared across sources)
    let mut d_masked = vec![T::zero(); n * nb * frames];
    for src in 0..n {
        let mut dy = vec![T::zero(); dec_len];
        dy[..cache.input_len].copy_from_slice(&d_estimates[src]);
        conv_transpose1d_backward(
            &cache.masked[src * nb * frames..(src + 1) * nb * frames],
            nb,
            frames,
            v.dec_w,
            1,
            k,
            s,
            &dy,
            &mut d_masked[src * nb * frames..(src + 1) * nb * frames],
            g.dec_w,
        );
    }

    // masked = mask * enc_out
    let mut d_enc_out = vec![T::zero(); nb * frames];
    let mut d_mask_pre = vec![T::zero(); n * nb * frames];
    for src in 0..n {
        for c in 0..nb {
            let m = (src * nb + c) * frames;
            for f in 0..frames {
                let dm = d_masked[m + f];
                let mask = cache.masks[m + f];
                d_enc_out[c * frames + f] += dm * mask;
                // sigmoid'
                d_mask_pre[m + f] = dm * cache.enc_out[c * frames + f] * mask * (T::one() - mask);
            }
        }
    }

    // mask head (1x1 conv over features)
    let mut d_features = vec![T::zero(); nb * frames];
    conv1d_backward(
        &cache.features,
        nb,
        frames,
        v.mask_w,
        n * nb,
        1,
        1,
        &d_mask_pre,
        Some(&mut d_features),
        g.mask_w,
        Some(g.mask_b),
    );

    // residual blocks, in reverse
    let mut d_x = d_features;
    for (bi, bv) in v.blocks.iter().enumerate().rev() {
        let bc = &cache.blocks[bi];
        let gb = &mut g.blocks[bi];
        // y = input + pw2(dw_act); d input accumulates the skip below.
        let mut d_dw_act = vec![T::zero(); h * frames];
        conv1d_backward(
            &bc.dw_act, h, frames, bv.pw2_w, nb, 1, 1, &d_x,
            Some(&mut d_dw_act), gb.pw2_w, Some(gb.pw2_b),
        );
        // tanh'
        for (d, &a) in d_dw_act.iter_mut().zip(&bc.dw_act) {
            *d *= T::one() - a * a;
        }
        // 3-tap conv over padded pw1_act
        let mut pw1_pad = vec![T::zero(); h * (frames + 2)];
        for c in 0..h {
            pw1_pad[c * (frames + 2) + 1..c * (frames + 2) + 1 + frames]
                .copy_from_slice(&bc.pw1_act[c * frames..(c + 1) * frames]);
        }
        let mut d_pw1_pad = vec![T::zero(); h * (frames + 2)];
        conv1d_backward(
            &pw1_pad, h, frames + 2, bv.dw_w, h, BLOCK_KERNEL, 1, &d_dw_act,
            Some(&mut d_pw1_pad), gb.dw_w, Some(gb.dw_b),
        );
        let mut d_pw1 = vec![T::zero(); h * frames];
        for c in 0..h {
            d_pw1[c * frames..(c + 1) * frames]
                .copy_from_slice(&d_pw1_pad[c * (frames + 2) + 1..c * (frames + 2) + 1 + frames]);
        }
        for (d, &a) in d_pw1.iter_mut().zip(&bc.pw1_act) {
            *d *= T::one() - a * a;
        }
        let mut d_input = vec![T::zero(); nb * frames];
        conv1d_backward(
            &bc.input, nb, frames, bv.pw1_w, h, 1, 1, &d_pw1,
            Some(&mut d_input), gb.pw1_w, Some(gb.pw1_b),
        );
        // skip connection
        for (di, &dy) in d_input.iter_mut().zip(&d_x) {
            *di += dy;
        }
        d_x = d_input;
    }

    // block stack input is the encoder output
    for (de, &dx) in d_enc_out.iter_mut().zip(&d_x) {
        *de += dx;
    }

    // encoder
    let padded_len = cache.padded.len();
    conv1d_backward(
        &cache.padded, 1, padded_len, v.enc_w, nb, k, s, &d_enc_out,
        None, g.enc_w, None,
    );
}

/// Per-unit losses and the gradient of the detached weighted objective.
pub fn loss_and_grads<T: Real>(
    config: &ModelConfig,
    params: &SeparatorParams<T>,
    batch: &WaveformBatch<T>,
    pmf: &BatchPmf<T>,
) -> Result<(Vec<T>, GradientVector<T>), ModelError> {
    let fwd = forward_batch(config, params, batch, pmf.units)?;
    let grad = backward_batch(config, params, &fwd, pmf)?;
    Ok((fwd.per_unit_losses, grad))
}
