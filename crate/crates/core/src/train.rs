//! Desk-scale gradient-descent demo: a small readout maps synthetic
//! feature grids to the two prediction heads, then trains under either
//! the height-collapsed sequence loss or the 2D loss.
//!
//! The readout is deliberately tiny. A fixed local stencil derives a
//! trace-continuity channel and a column-evidence channel from the raw
//! features; a per-position linear class head produces class logits, and
//! a per-position linear transition head (used only by the 2D loss)
//! produces the height logits of the path-transition map. The vanilla
//! baseline is the same class head with heights collapsed by the mean,
//! mirroring how a sequence-only loss has to consume 2D predictions.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::Label;
use crate::ctc2d::ctc2d_grad;
use crate::decode::{greedy_decode_1d, greedy_decode_2d};
use crate::error::{CtcError, Result};
use crate::prob::{ProbMap2D, ProbSeq1D, TransitionMap};
use crate::synth::{SynthConfig, SynthInstance};
use crate::vanilla::{ctc_grad_log_probs, ctc_loss};

/// Which loss drives the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Vanilla,
    TwoDim,
}

/// Horizontal stencil taps (dw = -2..=2) for the continuity channel.
const KAPPA_H: [f64; 5] = [0.15, 0.5, 1.0, 0.5, 0.15];
/// Vertical stencil taps (dh = -1..=1).
const KAPPA_V: [f64; 3] = [0.5, 1.0, 0.5];

/// Per-position linear readout over raw feature channels plus the
/// stencil-derived channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub num_classes: usize,
    pub feature_channels: usize,
    /// C x F weights on the raw channels.
    class_weights: Vec<f64>,
    /// C weights on the column-evidence channel (continuity column sum).
    class_colsum: Vec<f64>,
    class_bias: Vec<f64>,
    /// Weight tying each class logit to its channel's column mean (the
    /// vertical pooling a sequence-only consumer relies on).
    col_vote: f64,
    /// Transition-head weight on the continuity channel.
    trans_m: f64,
}

impl ReadoutModel {
    /// A readout that passes each symbol's evidence channel straight to
    /// its class logit, with a blank prior that wins wherever no
    /// evidence is present. Column gating starts at zero and is learned.
    pub fn identity_init(num_classes: usize, feature_channels: usize) -> Self {
        let mut class_weights = vec![0.0; num_classes * feature_channels];
        for c in 1..num_classes {
            // Evidence channel c-1 feeds class c.
            class_weights[c * feature_channels + (c - 1)] = 4.0;
        }
        let mut class_colsum = vec![0.0; num_classes];
        class_colsum[0] = -2.0;
        let mut class_bias = vec![0.0; num_classes];
        class_bias[0] = 2.5;
        Self {
            num_classes,
            feature_channels,
            class_weights,
            class_colsum,
            class_bias,
            col_vote: 1.0,
            trans_m: 2.0,
        }
    }

    pub fn random_init(num_classes: usize, feature_channels: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect()
        };
        Self {
            num_classes,
            feature_channels,
            class_weights: draw(num_classes * feature_channels),
            class_colsum: draw(num_classes),
            class_bias: draw(num_classes),
            col_vote: 0.1,
            trans_m: 0.1,
        }
    }

    pub fn param_count(&self) -> usize {
        self.class_weights.len() + self.class_colsum.len() + self.class_bias.len() + 2
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.class_weights);
        p.extend_from_slice(&self.class_colsum);
        p.extend_from_slice(&self.class_bias);
        p.push(self.col_vote);
        p.push(self.trans_m);
        p
    }

    fn set_params(&mut self, params: &[f64]) {
        let cw = self.class_weights.len();
        let cc = self.class_colsum.len();
        let cb = self.class_bias.len();
        self.class_weights.copy_from_slice(&params[..cw]);
        self.class_colsum.copy_from_slice(&params[cw..cw + cc]);
        self.class_bias.copy_from_slice(&params[cw + cc..cw + cc + cb]);
        self.col_vote = params[cw + cc + cb];
        self.trans_m = params[cw + cc + cb + 1];
    }
}

/// Stencil-derived channels for one instance.
struct Derived {
    /// H x W: continuity (triangular smoothing of the per-position
    /// evidence totals).
    m: Vec<f64>,
    /// W: column sum of the raw evidence totals.
    colsum: Vec<f64>,
    /// W x F: per-channel column sums (vertical pooling).
    colmean: Vec<f64>,
}

fn derive(inst: &SynthInstance, height: usize, width: usize, channels: usize) -> Derived {
    let mut total = vec![0.0; height * width];
    for h in 0..height {
        for w in 0..width {
            let base = (h * width + w) * channels;
            total[h * width + w] = inst.features[base..base + channels].iter().sum();
        }
    }
    let mut m = vec![0.0; height * width];
    for h in 0..height {
        for w in 0..width {
            let mut acc = 0.0;
            for (i, kv) in KAPPA_V.iter().enumerate() {
                let hh = h as i64 + i as i64 - 1;
                if hh < 0 || hh as usize >= height {
                    continue;
                }
                for (j, kh) in KAPPA_H.iter().enumerate() {
                    let ww = w as i64 + j as i64 - 2;
                    if ww < 0 || ww as usize >= width {
                        continue;
                    }
                    acc += kv * kh * total[hh as usize * width + ww as usize];
                }
            }
            m[h * width + w] = acc;
        }
    }
    let mut colsum = vec![0.0; width];
    for w in 0..width {
        let mut acc = 0.0;
        for h in 0..height {
            acc += total[h * width + w];
        }
        colsum[w] = acc;
    }
    let mut colmean = vec![0.0; width * channels];
    for h in 0..height {
        for w in 0..width {
            let base = (h * width + w) * channels;
            for f in 0..channels {
                colmean[w * channels + f] += inst.features[base + f];
            }
        }
    }
    Derived { m, colsum, colmean }
}

/// The two prediction heads for one instance, as raw logits.
struct HeadOutputs {
    class_logits: Vec<f64>,
    trans_logits: Vec<f64>,
    derived: Derived,
}

fn forward_heads(
    model: &ReadoutModel,
    inst: &SynthInstance,
    height: usize,
    width: usize,
) -> HeadOutputs {
    let channels = model.feature_channels;
    let classes = model.num_classes;
    let derived = derive(inst, height, width, channels);

    let mut class_logits = vec![0.0; height * width * classes];
    for h in 0..height {
        for w in 0..width {
            let raw = &inst.features[(h * width + w) * channels..(h * width + w + 1) * channels];
            let out = &mut class_logits[(h * width + w) * classes..(h * width + w + 1) * classes];
            for (c, slot) in out.iter_mut().enumerate() {
                let weights = &model.class_weights[c * channels..(c + 1) * channels];
                let mut acc = model.class_bias[c] + model.class_colsum[c] * derived.colsum[w];
                if c > 0 {
                    acc += model.col_vote * derived.colmean[w * channels + c - 1];
                }
                for f in 0..channels {
                    acc += weights[f] * raw[f];
                }
                *slot = acc;
            }
        }
    }

    let mut trans_logits = vec![0.0; (width - 1) * height];
    for w in 0..width - 1 {
        for h in 0..height {
            let pos = h * width + w + 1;
            trans_logits[w * height + h] = model.trans_m * derived.m[pos];
        }
    }

    HeadOutputs { class_logits, trans_logits, derived }
}

/// Accumulates `∂loss/∂class_logits` (and transition logits) into the
/// flat parameter gradient.
#[allow(clippy::too_many_arguments)]
fn backprop_heads(
    model: &ReadoutModel,
    inst: &SynthInstance,
    heads: &HeadOutputs,
    class_grad: &[f64],
    trans_grad: Option<&[f64]>,
    height: usize,
    width: usize,
    param_grad: &mut [f64],
) {
    let channels = model.feature_channels;
    let classes = model.num_classes;
    let cw = model.class_weights.len();
    let cc = model.class_colsum.len();
    let (gw, rest) = param_grad.split_at_mut(cw);
    let (gc, rest) = rest.split_at_mut(cc);
    let (gb, rest) = rest.split_at_mut(classes);
    let (gv, gt) = rest.split_at_mut(1);

    for h in 0..height {
        for w in 0..width {
            let raw = &inst.features[(h * width + w) * channels..(h * width + w + 1) * channels];
            let grad = &class_grad[(h * width + w) * classes..(h * width + w + 1) * classes];
            for (c, &g) in grad.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &mut gw[c * channels..(c + 1) * channels];
                for f in 0..channels {
                    row[f] += g * raw[f];
                }
                gc[c] += g * heads.derived.colsum[w];
                gb[c] += g;
                if c > 0 {
                    gv[0] += g * heads.derived.colmean[w * channels + c - 1];
                }
            }
        }
    }

    if let Some(tg) = trans_grad {
        for w in 0..width - 1 {
            for h in 0..height {
                let g = tg[w * height + h];
                if g == 0.0 {
                    continue;
                }
                let pos = h * width + w + 1;
                gt[0] += g * heads.derived.m[pos];
            }
        }
    }
}

/// Mean over heights of the per-position class distributions, then a
/// renormalization; returns the sequence plus the per-column mean sums
/// needed by the backward pass.
fn collapse_heights(map: &ProbMap2D) -> (ProbSeq1D, Vec<f64>) {
    let (height, width, classes) = (map.height(), map.width(), map.num_classes());
    let mut mean = vec![0.0; width * classes];
    for h in 0..height {
        for w in 0..width {
            for c in 0..classes {
                mean[w * classes + c] += map.prob(h, w, c) / height as f64;
            }
        }
    }
    let mut sums = vec![0.0; width];
    for w in 0..width {
        let s: f64 = mean[w * classes..(w + 1) * classes].iter().sum();
        sums[w] = s;
        for c in 0..classes {
            mean[w * classes + c] /= s;
        }
    }
    let seq = ProbSeq1D::from_linear(width, classes, mean).expect("renormalized rows");
    (seq, sums)
}

/// Per-item loss and flat parameter gradient.
#[allow(clippy::needless_range_loop)]
fn item_loss_grad(
    model: &ReadoutModel,
    inst: &SynthInstance,
    kind: LossKind,
    height: usize,
    width: usize,
    param_grad: &mut [f64],
) -> Result<f64> {
    let heads = forward_heads(model, inst, height, width);
    let map = ProbMap2D::from_logits(height, width, model.num_classes, &heads.class_logits)?;
    match kind {
        LossKind::TwoDim => {
            let psi = TransitionMap::simplified_from_logits(
                height,
                width - 1,
                &heads.trans_logits,
                None,
            )?;
            let grads = ctc2d_grad(&map, &psi, &inst.label, false)?;
            backprop_heads(
                model,
                inst,
                &heads,
                &grads.class_logits,
                Some(&grads.transition_logits),
                height,
                width,
                param_grad,
            );
            Ok(grads.loss)
        }
        LossKind::Vanilla => {
            let classes = model.num_classes;
            let (seq, sums) = collapse_heights(&map);
            let (loss, g_log) = ctc_grad_log_probs(&seq, &inst.label)?;

            // Chain: loss -> renormalized mean -> per-position softmax.
            let mut class_grad = vec![0.0; height * width * classes];
            let mut v = vec![0.0; classes];
            for w in 0..width {
                let x_row = seq.row(w);
                let g_row = &g_log[w * classes..(w + 1) * classes];
                // ∂loss/∂X, then ∂loss/∂mean through the renormalization.
                let mut dot = 0.0;
                for c in 0..classes {
                    v[c] = if x_row[c] > 0.0 { g_row[c] / x_row[c] } else { 0.0 };
                    dot += v[c] * x_row[c];
                }
                for value in v.iter_mut() {
                    *value = (*value - dot) / sums[w];
                }
                // Mean over heights, then the softmax at each position.
                for h in 0..height {
                    let base = (h * width + w) * classes;
                    let mut pos_dot = 0.0;
                    for c in 0..classes {
                        pos_dot += v[c] / height as f64 * map.prob(h, w, c);
                    }
                    for c in 0..classes {
                        class_grad[base + c] =
                            map.prob(h, w, c) * (v[c] / height as f64 - pos_dot);
                    }
                }
            }
            backprop_heads(model, inst, &heads, &class_grad, None, height, width, param_grad);
            Ok(loss)
        }
    }
}

/// Forward-only loss (used by the adaptive full-batch mode and eval).
fn item_loss(
    model: &ReadoutModel,
    inst: &SynthInstance,
    kind: LossKind,
    height: usize,
    width: usize,
) -> Result<f64> {
    let heads = forward_heads(model, inst, height, width);
    let map = ProbMap2D::from_logits(height, width, model.num_classes, &heads.class_logits)?;
    match kind {
        LossKind::TwoDim => {
            let psi = TransitionMap::simplified_from_logits(
                height,
                width - 1,
                &heads.trans_logits,
                None,
            )?;
            Ok(crate::ctc2d::ctc2d_loss(&map, &psi, &inst.label)?.value())
        }
        LossKind::Vanilla => {
            let (seq, _) = collapse_heights(&map);
            Ok(ctc_loss(&seq, &inst.label)?.value())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss_kind: LossKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    /// L2 penalty applied at each update; keeps the softmax heads from
    /// saturating (saturated heads stop the column gate from training).
    #[serde(default)]
    pub weight_decay: f64,
    pub seed: u64,
    /// Full-batch mode that halves the step whenever an update would
    /// increase the loss, keeping the recorded losses non-increasing.
    #[serde(default)]
    pub halve_lr_on_increase: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub exact_match: f64,
    pub mean_edit_distance: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_kind: LossKind,
    /// Mean training loss per epoch, in epoch order.
    pub epoch_losses: Vec<f64>,
    pub initial: EvalMetrics,
    pub final_eval: EvalMetrics,
    /// Wall-clock seconds per epoch (not covered by determinism checks).
    pub epoch_wall_clock_secs: Vec<f64>,
}

impl TrainReport {
    /// Hash of every deterministic field (timings excluded), for
    /// run-to-run reproducibility checks.
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        (self.loss_kind == LossKind::TwoDim).hash(&mut hasher);
        for l in &self.epoch_losses {
            l.to_bits().hash(&mut hasher);
        }
        for m in [&self.initial, &self.final_eval] {
            m.exact_match.to_bits().hash(&mut hasher);
            m.mean_edit_distance.to_bits().hash(&mut hasher);
            m.mean_loss.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }
}

/// Gradient descent (optional momentum) of the readout under the chosen
/// loss. Deterministic for a fixed config: shuffling, batching, and
/// accumulation order all derive from `cfg.seed`.
pub fn train(
    model: &mut ReadoutModel,
    train_data: &[SynthInstance],
    eval_data: &[SynthInstance],
    synth: &SynthConfig,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    if train_data.is_empty() {
        return Err(CtcError::Empty { what: "training data" });
    }
    let (height, width) = (synth.height, synth.width);
    let initial = evaluate(model, eval_data, synth, cfg.loss_kind)?;
    let mut report = TrainReport {
        loss_kind: cfg.loss_kind,
        epoch_losses: Vec::new(),
        initial,
        final_eval: initial,
        epoch_wall_clock_secs: Vec::new(),
    };
    if cfg.epochs == 0 {
        return Ok(report);
    }

    let n = train_data.len();
    let batch_size = if cfg.halve_lr_on_increase {
        n
    } else {
        cfg.batch_size.clamp(1, n)
    };
    let mut params = model.params();
    let mut velocity = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut lr = cfg.learning_rate;
    let mut prev_full_loss = if cfg.halve_lr_on_increase {
        mean_loss(model, train_data, cfg.loss_kind, height, width)?
    } else {
        f64::INFINITY
    };

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        order.shuffle(&mut rng);

        let mut epoch_loss_sum = 0.0;
        for batch in order.chunks(batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut batch_loss = 0.0;
            for &i in batch {
                batch_loss +=
                    item_loss_grad(model, &train_data[i], cfg.loss_kind, height, width, &mut grad)?;
            }
            if !batch_loss.is_finite() {
                return Err(CtcError::Diverged {
                    epoch,
                    detail: format!("batch loss {batch_loss}"),
                });
            }
            epoch_loss_sum += batch_loss;
            let scale = 1.0 / batch.len() as f64;

            if cfg.halve_lr_on_increase {
                // Plain descent with backtracking on the full batch.
                let before = params.clone();
                let mut accepted = false;
                for _ in 0..40 {
                    for (p, g) in params.iter_mut().zip(&grad) {
                        *p -= lr * g * scale;
                    }
                    model.set_params(&params);
                    let after = mean_loss(model, train_data, cfg.loss_kind, height, width)?;
                    if after <= prev_full_loss + 1e-12 {
                        prev_full_loss = after;
                        accepted = true;
                        break;
                    }
                    params.copy_from_slice(&before);
                    lr *= 0.5;
                }
                if !accepted {
                    model.set_params(&params);
                }
            } else {
                for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                    *v = cfg.momentum * *v - lr * (g * scale + cfg.weight_decay * *p);
                    *p += *v;
                }
                model.set_params(&params);
            }
        }

        let epoch_loss = if cfg.halve_lr_on_increase {
            prev_full_loss
        } else {
            epoch_loss_sum / n as f64
        };
        if !epoch_loss.is_finite() {
            return Err(CtcError::Diverged { epoch, detail: format!("epoch loss {epoch_loss}") });
        }
        report.epoch_losses.push(epoch_loss);
        report.epoch_wall_clock_secs.push(started.elapsed().as_secs_f64());
    }

    report.final_eval = evaluate(model, eval_data, synth, cfg.loss_kind)?;
    Ok(report)
}

fn mean_loss(
    model: &ReadoutModel,
    data: &[SynthInstance],
    kind: LossKind,
    height: usize,
    width: usize,
) -> Result<f64> {
    let mut sum = 0.0;
    for inst in data {
        sum += item_loss(model, inst, kind, height, width)?;
    }
    Ok(sum / data.len() as f64)
}

/// Greedy decode of one instance under the chosen pipeline.
pub fn decode_instance(
    model: &ReadoutModel,
    inst: &SynthInstance,
    synth: &SynthConfig,
    kind: LossKind,
) -> Result<Label> {
    let (height, width) = (synth.height, synth.width);
    let heads = forward_heads(model, inst, height, width);
    let map = ProbMap2D::from_logits(height, width, model.num_classes, &heads.class_logits)?;
    match kind {
        LossKind::TwoDim => {
            let psi = TransitionMap::simplified_from_logits(
                height,
                width - 1,
                &heads.trans_logits,
                None,
            )?;
            Ok(greedy_decode_2d(&map, &psi)?.label)
        }
        LossKind::Vanilla => {
            let (seq, _) = collapse_heights(&map);
            Ok(greedy_decode_1d(&seq).label)
        }
    }
}

/// Greedy decoding accuracy, normalized edit distance, and mean loss of
/// `model` on `data`.
pub fn evaluate(
    model: &ReadoutModel,
    data: &[SynthInstance],
    synth: &SynthConfig,
    kind: LossKind,
) -> Result<EvalMetrics> {
    let (height, width) = (synth.height, synth.width);
    let mut exact = 0usize;
    let mut edit_sum = 0.0;
    let mut loss_sum = 0.0;
    for inst in data {
        let heads = forward_heads(model, inst, height, width);
        let map = ProbMap2D::from_logits(height, width, model.num_classes, &heads.class_logits)?;
        let decoded = match kind {
            LossKind::TwoDim => {
                let psi = TransitionMap::simplified_from_logits(
                    height,
                    width - 1,
                    &heads.trans_logits,
                    None,
                )?;
                loss_sum += crate::ctc2d::ctc2d_loss(&map, &psi, &inst.label)?.value();
                greedy_decode_2d(&map, &psi)?.label
            }
            LossKind::Vanilla => {
                let (seq, _) = collapse_heights(&map);
                loss_sum += ctc_loss(&seq, &inst.label)?.value();
                greedy_decode_1d(&seq).label
            }
        };
        if decoded == inst.label {
            exact += 1;
        }
        edit_sum += normalized_edit_distance(&inst.label, &decoded);
    }
    let n = data.len().max(1) as f64;
    Ok(EvalMetrics {
        exact_match: exact as f64 / n,
        mean_edit_distance: edit_sum / n,
        mean_loss: loss_sum / n,
    })
}

/// Levenshtein distance divided by the reference length (or by 1 when
/// the reference is empty).
pub fn normalized_edit_distance(reference: &Label, hypothesis: &Label) -> f64 {
    edit_distance(reference.classes(), hypothesis.classes()) as f64
        / reference.len().max(1) as f64
}

fn edit_distance(a: &[usize], b: &[usize]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

// ---------------------------------------------------------------------
// End-to-end demo
// ---------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub synth: SynthConfig,
    pub train_count: usize,
    pub test_count: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    #[serde(default)]
    pub weight_decay: f64,
    pub batch_size: usize,
    pub train_seed: u64,
}

impl DemoConfig {
    /// The bundled curved-text comparison: sinusoidal baselines with
    /// clutter on, 2000 train / 500 test instances, fixed seeds.
    pub fn bundled_default() -> Self {
        Self {
            synth: SynthConfig {
                seed: 90210,
                height: 10,
                width: 28,
                num_classes: 11,
                curvature: crate::synth::Curvature::Sinusoidal,
                noise_sigma: 0.05,
                clutter_prob: 0.08,
                min_label_len: 3,
                max_label_len: 5,
            },
            train_count: 2000,
            test_count: 500,
            epochs: 20,
            learning_rate: 0.1,
            momentum: 0.9,
            weight_decay: 1e-4,
            batch_size: 32,
            train_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub config: DemoConfig,
    pub vanilla: TrainReport,
    pub two_dim: TrainReport,
}

impl DemoReport {
    pub fn fingerprint(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.vanilla.fingerprint().hash(&mut hasher);
        self.two_dim.fingerprint().hash(&mut hasher);
        hasher.finish()
    }
}

/// Generates the dataset once and trains the same initial readout under
/// both losses.
pub fn run_demo(cfg: &DemoConfig) -> Result<DemoReport> {
    let data = crate::synth::generate(&cfg.synth, cfg.train_count + cfg.test_count)?;
    let (train_set, test_set) = data.split_at(cfg.train_count);

    let mut reports = Vec::with_capacity(2);
    for kind in [LossKind::Vanilla, LossKind::TwoDim] {
        let mut model = ReadoutModel::identity_init(
            cfg.synth.num_classes,
            cfg.synth.feature_channels(),
        );
        let train_cfg = TrainConfig {
            loss_kind: kind,
            learning_rate: cfg.learning_rate,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
            seed: cfg.train_seed,
            halve_lr_on_increase: false,
        };
        reports.push(train(&mut model, train_set, test_set, &cfg.synth, &train_cfg)?);
    }
    let two_dim = reports.pop().expect("two reports");
    let vanilla = reports.pop().expect("two reports");
    Ok(DemoReport { config: cfg.clone(), vanilla, two_dim })
}
