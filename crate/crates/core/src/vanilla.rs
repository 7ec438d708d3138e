//! Vanilla CTC: exact forward probability, loss, and gradient through
//! the `α` dynamic program, entirely in log domain.

use rayon::prelude::*;

use crate::alphabet::{ExpandedLabel, Label};
use crate::error::{CtcError, Result};
use crate::numeric::{log_sum_exp2, log_sum_exp3, LOG_ZERO};
use crate::prob::ProbSeq1D;

/// The `(2L+1) x T` table of log forward probabilities `α_{s,t}`.
#[derive(Debug, Clone)]
pub struct AlphaTable {
    values: Vec<f64>,
    num_states: usize,
    width: usize,
}

impl AlphaTable {
    #[inline]
    pub fn log_alpha(&self, s: usize, t: usize) -> f64 {
        self.values[s * self.width + t]
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// A loss value carrying its feasibility. Infeasible labels (no valid
/// alignment) report `+inf` rather than a silent NaN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossValue {
    value: f64,
    feasible: bool,
}

impl LossValue {
    pub(crate) fn from_log_prob(log_prob: f64) -> Self {
        if log_prob == LOG_ZERO {
            Self { value: f64::INFINITY, feasible: false }
        } else {
            Self { value: -log_prob, feasible: true }
        }
    }

    /// `-ln P`, or `+inf` when no valid alignment exists.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_feasible(&self) -> bool {
        self.feasible
    }

    pub fn log_prob(&self) -> f64 {
        -self.value
    }
}

/// How a batch treats infeasible items: reject everything, or clamp the
/// offending losses to a finite value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BatchMode {
    Strict,
    Permissive { clamp: f64 },
}

#[derive(Debug, Clone)]
pub struct BatchLoss {
    pub mean: f64,
    pub per_item: Vec<f64>,
    /// Indices whose labels had no valid alignment.
    pub infeasible: Vec<usize>,
}

fn check_alphabet(num_classes: usize, y: &Label) -> Result<()> {
    if !y.is_empty() && y.max_class() >= num_classes {
        return Err(CtcError::ClassOutOfRange {
            class: y.max_class(),
            num_classes,
        });
    }
    Ok(())
}

/// Log forward probability `ln P(Y|X)` and the `α` table.
///
/// States interleave blanks (`Y*`); each column admits a stay, a step,
/// and — for symbol states not repeating the symbol two states back — a
/// two-state skip. Infeasible labels come out as `-inf`.
pub fn ctc_forward(x: &ProbSeq1D, y: &Label) -> Result<(f64, AlphaTable)> {
    check_alphabet(x.num_classes(), y)?;
    let expanded = y.expand();
    let (log_prob, values) = forward_table(x, &expanded);
    Ok((
        log_prob,
        AlphaTable {
            values,
            num_states: expanded.len(),
            width: x.width(),
        },
    ))
}

fn forward_table(x: &ProbSeq1D, expanded: &ExpandedLabel) -> (f64, Vec<f64>) {
    let states = expanded.classes();
    let num_states = states.len();
    let width = x.width();
    let mut table = vec![LOG_ZERO; num_states * width];

    table[0] = x.log_prob(0, states[0]);
    if num_states > 1 {
        table[width] = x.log_prob(0, states[1]);
    }

    for t in 1..width {
        for s in 0..num_states {
            let stay = table[s * width + t - 1];
            let step = if s >= 1 { table[(s - 1) * width + t - 1] } else { LOG_ZERO };
            let base = if s >= 2 && expanded.allows_skip(s) {
                log_sum_exp3(stay, step, table[(s - 2) * width + t - 1])
            } else {
                log_sum_exp2(stay, step)
            };
            table[s * width + t] = base + x.log_prob(t, states[s]);
        }
    }

    let last = table[(num_states - 1) * width + width - 1];
    let prev = if num_states >= 2 {
        table[(num_states - 2) * width + width - 1]
    } else {
        LOG_ZERO
    };
    (log_sum_exp2(last, prev), table)
}

/// `-ln P(Y|X)`, `+inf`-flagged when the label is infeasible.
pub fn ctc_loss(x: &ProbSeq1D, y: &Label) -> Result<LossValue> {
    let (log_prob, _) = ctc_forward(x, y)?;
    Ok(LossValue::from_log_prob(log_prob))
}

/// Loss plus its gradient with respect to the per-frame *log*
/// probabilities (`∂loss/∂ln X_{t,c}`), from the adjoint of the forward
/// pass. The per-frame logit gradient in [`ctc_grad`] derives from this.
pub fn ctc_grad_log_probs(x: &ProbSeq1D, y: &Label) -> Result<(f64, Vec<f64>)> {
    check_alphabet(x.num_classes(), y)?;
    let expanded = y.expand();
    let (log_prob, table) = forward_table(x, &expanded);
    if log_prob == LOG_ZERO {
        return Err(CtcError::InfeasibleGradient {
            min_width: y.min_width(),
            available: x.width(),
        });
    }

    let states = expanded.classes();
    let num_states = states.len();
    let width = x.width();
    let at = |s: usize, t: usize| table[s * width + t];

    // adj[s][t] = ∂ln P / ∂ α̲_{s,t} where α̲ is the log-domain cell.
    let mut adj = vec![0.0; num_states * width];
    adj[(num_states - 1) * width + width - 1] = (at(num_states - 1, width - 1) - log_prob).exp();
    if num_states >= 2 {
        adj[(num_states - 2) * width + width - 1] =
            (at(num_states - 2, width - 1) - log_prob).exp();
    }

    // g[t][c] accumulates ∂ln P / ∂ ln X_{t,c} over every emission use.
    let mut g = vec![0.0; width * x.num_classes()];
    for t in (1..width).rev() {
        for s in 0..num_states {
            let a = adj[s * width + t];
            if a == 0.0 || at(s, t) == LOG_ZERO {
                continue;
            }
            g[t * x.num_classes() + states[s]] += a;

            let stay = at(s, t - 1);
            let step = if s >= 1 { at(s - 1, t - 1) } else { LOG_ZERO };
            let skip = if s >= 2 && expanded.allows_skip(s) {
                at(s - 2, t - 1)
            } else {
                LOG_ZERO
            };
            let base = log_sum_exp3(stay, step, skip);
            if stay != LOG_ZERO {
                adj[s * width + t - 1] += a * (stay - base).exp();
            }
            if step != LOG_ZERO {
                adj[(s - 1) * width + t - 1] += a * (step - base).exp();
            }
            if skip != LOG_ZERO {
                adj[(s - 2) * width + t - 1] += a * (skip - base).exp();
            }
        }
    }
    g[states[0]] += adj[0];
    if num_states > 1 {
        g[states[1]] += adj[width];
    }

    // ∂loss/∂ln X = -g (loss = -ln P).
    for v in &mut g {
        *v = -*v;
    }
    Ok((-log_prob, g))
}

/// Loss and gradient of the loss with respect to the per-frame logits,
/// i.e. through a class-axis softmax at every frame.
pub fn ctc_grad(x: &ProbSeq1D, y: &Label) -> Result<(f64, Vec<f64>)> {
    let (loss, g_log) = ctc_grad_log_probs(x, y)?;
    let num_classes = x.num_classes();
    let mut grad = vec![0.0; g_log.len()];
    for t in 0..x.width() {
        let row = &g_log[t * num_classes..(t + 1) * num_classes];
        let row_sum: f64 = row.iter().sum();
        for c in 0..num_classes {
            grad[t * num_classes + c] = row[c] - x.prob(t, c) * row_sum;
        }
    }
    Ok((loss, grad))
}

/// Mean loss over a batch. Items evaluate in parallel; the reduction is
/// in index order, so results do not depend on the thread count.
pub fn ctc_batch_loss(items: &[(&ProbSeq1D, &Label)], mode: BatchMode) -> Result<BatchLoss> {
    let losses: Vec<Result<LossValue>> = items
        .par_iter()
        .map(|(x, y)| ctc_loss(x, y))
        .collect();
    reduce_batch(losses, mode, |i| {
        (items[i].1.min_width(), items[i].0.width())
    })
}

pub(crate) fn reduce_batch(
    losses: Vec<Result<LossValue>>,
    mode: BatchMode,
    detail: impl Fn(usize) -> (usize, usize),
) -> Result<BatchLoss> {
    let mut per_item = Vec::with_capacity(losses.len());
    let mut infeasible = Vec::new();
    for (i, loss) in losses.into_iter().enumerate() {
        let loss = loss?;
        if !loss.is_feasible() {
            infeasible.push(i);
            match mode {
                BatchMode::Strict => {
                    let (min_width, available) = detail(i);
                    return Err(CtcError::Infeasible { min_width, available });
                }
                BatchMode::Permissive { clamp } => per_item.push(clamp),
            }
        } else {
            per_item.push(loss.value());
        }
    }
    let mean = per_item.iter().sum::<f64>() / per_item.len().max(1) as f64;
    Ok(BatchLoss { mean, per_item, infeasible })
}
