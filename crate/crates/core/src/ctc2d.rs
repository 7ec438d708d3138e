//! 2D-CTC: forward probability, loss, and gradients through the `β`
//! dynamic program over (state, height, column), in log domain.
//!
//! The full variant carries source-conditioned transitions and costs
//! `O(W·L·H²)`. For the simplified variant the transition factor is
//! independent of the source height, so each column's heights can be
//! marginalized once per emission class (`E_{w,c} = Σ_h weight_h ·
//! X'_{h,w,c}`) and the remaining recursion collapses to the vanilla
//! shape, `O(W·L·H)` in total.

use rayon::prelude::*;

use crate::alphabet::{ExpandedLabel, Label};
use crate::decode::check_shapes;
use crate::error::{CtcError, Result};
use crate::numeric::{log_sum_exp, log_sum_exp2, log_sum_exp3, LOG_ZERO};
use crate::prob::{ProbMap2D, TransitionKind, TransitionMap};
use crate::vanilla::{reduce_batch, BatchLoss, BatchMode, LossValue};

/// The `(2L+1) x H x W` table of log probabilities `β_{s,h,w}`.
#[derive(Debug, Clone)]
pub struct BetaTable {
    values: Vec<f64>,
    num_states: usize,
    height: usize,
    width: usize,
}

impl BetaTable {
    #[inline]
    pub fn log_beta(&self, s: usize, h: usize, w: usize) -> f64 {
        self.values[(s * self.height + h) * self.width + w]
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

/// Gradients of the loss with respect to the logits behind each softmax
/// head.
#[derive(Debug, Clone)]
pub struct Ctc2dGradients {
    pub loss: f64,
    /// `H x W x C`; the class softmax at each position.
    pub class_logits: Vec<f64>,
    /// Simplified: `(W-1) x H` (height softmax per column).
    /// Full: `H x (W-1) x H` (destination softmax per source position).
    pub transition_logits: Vec<f64>,
    /// `H`; present when `Γ` is marked trainable.
    pub gamma_logits: Option<Vec<f64>>,
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

/// Log forward probability `ln P(Y|X')` and the `β` table.
pub fn ctc2d_forward(
    x: &ProbMap2D,
    psi: &TransitionMap,
    y: &Label,
) -> Result<(f64, BetaTable)> {
    check_shapes(x, psi)?;
    check_alphabet(x.num_classes(), y)?;
    let expanded = y.expand();
    match psi.kind() {
        TransitionKind::Simplified => {
            let fwd = simplified_forward(x, psi, &expanded);
            Ok((fwd.log_prob, fwd.materialize(x, psi, &expanded)))
        }
        TransitionKind::Full => {
            let (log_prob, values) = full_forward(x, psi, &expanded);
            Ok((
                log_prob,
                BetaTable {
                    values,
                    num_states: expanded.len(),
                    height: x.height(),
                    width: x.width(),
                },
            ))
        }
    }
}

/// `-ln P(Y|X')`, `+inf`-flagged when the label is infeasible. Skips the
/// `β` materialization on the simplified fast path.
pub fn ctc2d_loss(x: &ProbMap2D, psi: &TransitionMap, y: &Label) -> Result<LossValue> {
    check_shapes(x, psi)?;
    check_alphabet(x.num_classes(), y)?;
    let expanded = y.expand();
    let log_prob = match psi.kind() {
        TransitionKind::Simplified => simplified_forward(x, psi, &expanded).log_prob,
        TransitionKind::Full => full_forward(x, psi, &expanded).0,
    };
    Ok(LossValue::from_log_prob(log_prob))
}

/// Mean loss over a batch (parallel evaluation, index-ordered reduction).
pub fn ctc2d_batch_loss(
    items: &[(&ProbMap2D, &TransitionMap, &Label)],
    mode: BatchMode,
) -> Result<BatchLoss> {
    let losses: Vec<Result<LossValue>> = items
        .par_iter()
        .map(|(x, psi, y)| ctc2d_loss(x, psi, y))
        .collect();
    reduce_batch(losses, mode, |i| {
        (items[i].2.min_width(), items[i].0.width())
    })
}

/// Loss plus gradients for the class, transition, and (optionally) `Γ`
/// logits, from the adjoint of the forward recursion.
pub fn ctc2d_grad(
    x: &ProbMap2D,
    psi: &TransitionMap,
    y: &Label,
    gamma_trainable: bool,
) -> Result<Ctc2dGradients> {
    check_shapes(x, psi)?;
    check_alphabet(x.num_classes(), y)?;
    let expanded = y.expand();
    let raw = match psi.kind() {
        TransitionKind::Simplified => simplified_adjoint(x, psi, &expanded),
        TransitionKind::Full => full_adjoint(x, psi, &expanded),
    };
    let raw = match raw {
        Some(raw) => raw,
        None => {
            return Err(CtcError::InfeasibleGradient {
                min_width: y.min_width(),
                available: x.width(),
            })
        }
    };
    Ok(project_gradients(x, psi, raw, gamma_trainable))
}

/// Raw adjoints: derivatives of `ln P` with respect to the log inputs.
struct RawGradients {
    log_prob: f64,
    /// `∂ln P / ∂ln X'` per (h, w, c).
    x: Vec<f64>,
    /// `∂ln P / ∂ln Ψ̂` per (w, h), or `∂ln P / ∂ln Ψ` per (h, w, j).
    transition: Vec<f64>,
    /// `∂ln P / ∂ln Γ` per h.
    gamma: Vec<f64>,
}

fn project_gradients(
    x: &ProbMap2D,
    psi: &TransitionMap,
    raw: RawGradients,
    gamma_trainable: bool,
) -> Ctc2dGradients {
    let height = x.height();
    let width = x.width();
    let num_classes = x.num_classes();

    // loss = -ln P, so ∂loss/∂logit = p * Σg - g on every softmax axis.
    let mut class_logits = vec![0.0; raw.x.len()];
    for h in 0..height {
        for w in 0..width {
            let base = (h * width + w) * num_classes;
            let row = &raw.x[base..base + num_classes];
            let row_sum: f64 = row.iter().sum();
            for c in 0..num_classes {
                class_logits[base + c] = x.prob(h, w, c) * row_sum - row[c];
            }
        }
    }

    let mut transition_logits = vec![0.0; raw.transition.len()];
    match psi.kind() {
        TransitionKind::Simplified => {
            for w in 0..psi.columns() {
                let base = w * height;
                let row = &raw.transition[base..base + height];
                let row_sum: f64 = row.iter().sum();
                for h in 0..height {
                    transition_logits[base + h] = psi.psi_hat(w, h) * row_sum - row[h];
                }
            }
        }
        TransitionKind::Full => {
            for h in 0..height {
                for w in 0..psi.columns() {
                    let base = (h * psi.columns() + w) * height;
                    let row = &raw.transition[base..base + height];
                    let row_sum: f64 = row.iter().sum();
                    for j in 0..height {
                        transition_logits[base + j] = psi.psi(h, w, j) * row_sum - row[j];
                    }
                }
            }
        }
    }

    let gamma_logits = gamma_trainable.then(|| {
        let sum: f64 = raw.gamma.iter().sum();
        (0..height)
            .map(|h| psi.gamma(h) * sum - raw.gamma[h])
            .collect()
    });

    Ctc2dGradients {
        loss: -raw.log_prob,
        class_logits,
        transition_logits,
        gamma_logits,
    }
}

// ---------------------------------------------------------------------
// Simplified variant
// ---------------------------------------------------------------------

/// Forward state of the simplified recursion: the marginalized column
/// emissions `E`, the height-summed DP rows `r`, and the pre-emission
/// accumulators `u` needed to rebuild `β` and to run the adjoint.
struct SimplifiedForward {
    log_prob: f64,
    /// Distinct classes of `Y*`, and a class -> slot lookup.
    used: Vec<usize>,
    slot_of: Vec<usize>,
    /// `W x used.len()`: `ln E_{w,c}`.
    log_e: Vec<f64>,
    /// `S x W`: `ln r_{s,w}` where `r = Σ_h β`.
    log_r: Vec<f64>,
    /// `S x W`: `ln u`, the transition-summed mass entering column w.
    log_u: Vec<f64>,
}

fn class_slots(expanded: &ExpandedLabel, num_classes: usize) -> (Vec<usize>, Vec<usize>) {
    let mut slot_of = vec![usize::MAX; num_classes];
    let mut used = Vec::new();
    for &c in expanded.classes() {
        if slot_of[c] == usize::MAX {
            slot_of[c] = used.len();
            used.push(c);
        }
    }
    (used, slot_of)
}

fn simplified_forward(
    x: &ProbMap2D,
    psi: &TransitionMap,
    expanded: &ExpandedLabel,
) -> SimplifiedForward {
    let width = x.width();
    let states = expanded.classes();
    let num_states = states.len();
    let (used, slot_of) = class_slots(expanded, x.num_classes());

    // Marginalize heights once per (column, used class). A within-column
    // convex combination cannot underflow the way cross-column products
    // do, so this stays in linear domain.
    let mut log_e = vec![LOG_ZERO; width * used.len()];
    for w in 0..width {
        let weights = if w == 0 {
            psi.gamma_values()
        } else {
            psi.psi_hat_col(w - 1)
        };
        for (slot, &c) in used.iter().enumerate() {
            let mut sum = 0.0;
            for (h, &weight) in weights.iter().enumerate() {
                sum += weight * x.prob(h, w, c);
            }
            log_e[w * used.len() + slot] = sum.ln();
        }
    }

    let mut log_r = vec![LOG_ZERO; num_states * width];
    let mut log_u = vec![LOG_ZERO; num_states * width];
    log_u[0] = 0.0;
    log_r[0] = log_e[slot_of[states[0]]];
    if num_states > 1 {
        log_u[width] = 0.0;
        log_r[width] = log_e[slot_of[states[1]]];
    }
    for w in 1..width {
        for s in 0..num_states {
            let stay = log_r[s * width + w - 1];
            let step = if s >= 1 { log_r[(s - 1) * width + w - 1] } else { LOG_ZERO };
            let u = if s >= 2 && expanded.allows_skip(s) {
                log_sum_exp3(stay, step, log_r[(s - 2) * width + w - 1])
            } else {
                log_sum_exp2(stay, step)
            };
            log_u[s * width + w] = u;
            log_r[s * width + w] = u + log_e[w * used.len() + slot_of[states[s]]];
        }
    }

    let last = log_r[(num_states - 1) * width + width - 1];
    let prev = if num_states >= 2 {
        log_r[(num_states - 2) * width + width - 1]
    } else {
        LOG_ZERO
    };
    SimplifiedForward {
        log_prob: log_sum_exp2(last, prev),
        used,
        slot_of,
        log_e,
        log_r,
        log_u,
    }
}

impl SimplifiedForward {
    /// Rebuilds the per-height `β` table:
    /// `β_{s,h,w} = X'_{h,w,Y*_s} · weight_{w,h} · u_{s,w}`.
    fn materialize(
        &self,
        x: &ProbMap2D,
        psi: &TransitionMap,
        expanded: &ExpandedLabel,
    ) -> BetaTable {
        let height = x.height();
        let width = x.width();
        let states = expanded.classes();
        let num_states = states.len();
        let mut values = vec![LOG_ZERO; num_states * height * width];
        for (s, &c) in states.iter().enumerate() {
            for h in 0..height {
                let base = (s * height + h) * width;
                if s <= 1 {
                    values[base] = psi.log_gamma(h) + x.log_prob(h, 0, c);
                }
                for w in 1..width {
                    let u = self.log_u[s * width + w];
                    if u != LOG_ZERO {
                        values[base + w] =
                            x.log_prob(h, w, c) + psi.log_psi_hat(w - 1, h) + u;
                    }
                }
            }
        }
        BetaTable { values, num_states, height, width }
    }
}

fn simplified_adjoint(
    x: &ProbMap2D,
    psi: &TransitionMap,
    expanded: &ExpandedLabel,
) -> Option<RawGradients> {
    let fwd = simplified_forward(x, psi, expanded);
    if fwd.log_prob == LOG_ZERO {
        return None;
    }
    let height = x.height();
    let width = x.width();
    let states = expanded.classes();
    let num_states = states.len();
    let used = &fwd.used;
    let lr = |s: usize, w: usize| fwd.log_r[s * width + w];

    // Reverse pass over the reduced DP: adjoints of ln r.
    let mut adj_r = vec![0.0; num_states * width];
    adj_r[(num_states - 1) * width + width - 1] =
        (lr(num_states - 1, width - 1) - fwd.log_prob).exp();
    if num_states >= 2 {
        adj_r[(num_states - 2) * width + width - 1] =
            (lr(num_states - 2, width - 1) - fwd.log_prob).exp();
    }

    let mut g_e = vec![0.0; width * used.len()];
    for w in (1..width).rev() {
        for s in 0..num_states {
            let a = adj_r[s * width + w];
            if a == 0.0 || lr(s, w) == LOG_ZERO {
                continue;
            }
            g_e[w * used.len() + fwd.slot_of[states[s]]] += a;

            let u = fwd.log_u[s * width + w];
            let stay = lr(s, w - 1);
            if stay != LOG_ZERO {
                adj_r[s * width + w - 1] += a * (stay - u).exp();
            }
            if s >= 1 {
                let step = lr(s - 1, w - 1);
                if step != LOG_ZERO {
                    adj_r[(s - 1) * width + w - 1] += a * (step - u).exp();
                }
            }
            if s >= 2 && expanded.allows_skip(s) {
                let skip = lr(s - 2, w - 1);
                if skip != LOG_ZERO {
                    adj_r[(s - 2) * width + w - 1] += a * (skip - u).exp();
                }
            }
        }
    }
    for s in 0..num_states.min(2) {
        g_e[fwd.slot_of[states[s]]] += adj_r[s * width];
    }

    // Unmarginalize: spread each column emission gradient back over
    // heights, onto X' and the transition (or Γ) weights.
    let mut g_x = vec![0.0; height * width * x.num_classes()];
    let mut g_trans = vec![0.0; psi.columns() * height];
    let mut g_gamma = vec![0.0; height];
    for w in 0..width {
        let weights = if w == 0 {
            psi.log_gamma_values()
        } else {
            psi.log_psi_hat_col(w - 1)
        };
        for (slot, &c) in used.iter().enumerate() {
            let ge = g_e[w * used.len() + slot];
            if ge == 0.0 {
                continue;
            }
            let le = fwd.log_e[w * used.len() + slot];
            for h in 0..height {
                let term = weights[h] + x.log_prob(h, w, c);
                if term == LOG_ZERO {
                    continue;
                }
                let share = ge * (term - le).exp();
                g_x[(h * width + w) * x.num_classes() + c] += share;
                if w == 0 {
                    g_gamma[h] += share;
                } else {
                    g_trans[(w - 1) * height + h] += share;
                }
            }
        }
    }

    Some(RawGradients {
        log_prob: fwd.log_prob,
        x: g_x,
        transition: g_trans,
        gamma: g_gamma,
    })
}

// ---------------------------------------------------------------------
// Full variant
// ---------------------------------------------------------------------

fn full_forward(
    x: &ProbMap2D,
    psi: &TransitionMap,
    expanded: &ExpandedLabel,
) -> (f64, Vec<f64>) {
    let height = x.height();
    let width = x.width();
    let states = expanded.classes();
    let num_states = states.len();
    let mut beta = vec![LOG_ZERO; num_states * height * width];
    let at = |s: usize, h: usize, w: usize| (s * height + h) * width + w;

    for s in 0..num_states.min(2) {
        for h in 0..height {
            beta[at(s, h, 0)] = psi.log_gamma(h) + x.log_prob(h, 0, states[s]);
        }
    }

    let mut merged = vec![LOG_ZERO; height];
    let mut terms = vec![LOG_ZERO; height];
    for w in 1..width {
        for s in 0..num_states {
            // Transition-source mass per previous height, shared over h.
            for (j, m) in merged.iter_mut().enumerate() {
                let stay = beta[at(s, j, w - 1)];
                let step = if s >= 1 { beta[at(s - 1, j, w - 1)] } else { LOG_ZERO };
                *m = if s >= 2 && expanded.allows_skip(s) {
                    log_sum_exp3(stay, step, beta[at(s - 2, j, w - 1)])
                } else {
                    log_sum_exp2(stay, step)
                };
            }
            for h in 0..height {
                for j in 0..height {
                    terms[j] = merged[j] + psi.log_psi(j, w - 1, h);
                }
                beta[at(s, h, w)] = x.log_prob(h, w, states[s]) + log_sum_exp(&terms);
            }
        }
    }

    let mut finals = Vec::with_capacity(2 * height);
    for s in [num_states.wrapping_sub(2), num_states - 1] {
        if s >= num_states {
            continue; // single-state label
        }
        for h in 0..height {
            finals.push(beta[at(s, h, width - 1)]);
        }
    }
    (log_sum_exp(&finals), beta)
}

fn full_adjoint(
    x: &ProbMap2D,
    psi: &TransitionMap,
    expanded: &ExpandedLabel,
) -> Option<RawGradients> {
    let (log_prob, beta) = full_forward(x, psi, expanded);
    if log_prob == LOG_ZERO {
        return None;
    }
    let height = x.height();
    let width = x.width();
    let num_classes = x.num_classes();
    let states = expanded.classes();
    let num_states = states.len();
    let at = |s: usize, h: usize, w: usize| (s * height + h) * width + w;

    let mut adj = vec![0.0; beta.len()];
    for s in [num_states.wrapping_sub(2), num_states - 1] {
        if s >= num_states {
            continue;
        }
        for h in 0..height {
            let b = beta[at(s, h, width - 1)];
            if b != LOG_ZERO {
                adj[at(s, h, width - 1)] = (b - log_prob).exp();
            }
        }
    }

    let mut g_x = vec![0.0; height * width * num_classes];
    let mut g_trans = vec![0.0; height * psi.columns() * height];
    let mut g_gamma = vec![0.0; height];
    let mut merged = vec![LOG_ZERO; height];
    let mut adj_merged = vec![0.0; height];

    for w in (1..width).rev() {
        for s in 0..num_states {
            for (j, m) in merged.iter_mut().enumerate() {
                let stay = beta[at(s, j, w - 1)];
                let step = if s >= 1 { beta[at(s - 1, j, w - 1)] } else { LOG_ZERO };
                *m = if s >= 2 && expanded.allows_skip(s) {
                    log_sum_exp3(stay, step, beta[at(s - 2, j, w - 1)])
                } else {
                    log_sum_exp2(stay, step)
                };
            }
            adj_merged.iter_mut().for_each(|v| *v = 0.0);

            for h in 0..height {
                let a = adj[at(s, h, w)];
                if a == 0.0 || beta[at(s, h, w)] == LOG_ZERO {
                    continue;
                }
                g_x[(h * width + w) * num_classes + states[s]] += a;
                let inner = beta[at(s, h, w)] - x.log_prob(h, w, states[s]);
                for j in 0..height {
                    let term = merged[j] + psi.log_psi(j, w - 1, h);
                    if term == LOG_ZERO {
                        continue;
                    }
                    let share = a * (term - inner).exp();
                    g_trans[(j * psi.columns() + w - 1) * height + h] += share;
                    adj_merged[j] += share;
                }
            }

            for j in 0..height {
                let am = adj_merged[j];
                if am == 0.0 {
                    continue;
                }
                let m = merged[j];
                let stay = beta[at(s, j, w - 1)];
                if stay != LOG_ZERO {
                    adj[at(s, j, w - 1)] += am * (stay - m).exp();
                }
                if s >= 1 {
                    let step = beta[at(s - 1, j, w - 1)];
                    if step != LOG_ZERO {
                        adj[at(s - 1, j, w - 1)] += am * (step - m).exp();
                    }
                }
                if s >= 2 && expanded.allows_skip(s) {
                    let skip = beta[at(s - 2, j, w - 1)];
                    if skip != LOG_ZERO {
                        adj[at(s - 2, j, w - 1)] += am * (skip - m).exp();
                    }
                }
            }
        }
    }

    for s in 0..num_states.min(2) {
        for h in 0..height {
            let a = adj[at(s, h, 0)];
            if a == 0.0 {
                continue;
            }
            g_gamma[h] += a;
            g_x[(h * width) * num_classes + states[s]] += a;
        }
    }

    Some(RawGradients { log_prob, x: g_x, transition: g_trans, gamma: g_gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::oracle_ctc2d_prob;
    use crate::prob::ProbSeq1D;
    use crate::sampling;
    use crate::testutil;
    use crate::vanilla::{ctc_forward, ctc_grad};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn label(classes: &[usize]) -> Label {
        Label::new(classes.to_vec()).unwrap()
    }

    #[test]
    fn height_one_degenerates_to_vanilla() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..25 {
            let w = rng.gen_range(1..=6);
            let c = rng.gen_range(2..=4);
            let map = sampling::random_map(&mut rng, 1, w, c);
            let psi = TransitionMap::uniform_simplified(1, w - 1);
            let len = rng.gen_range(0..=2);
            let y = sampling::random_label(&mut rng, c, len);
            let seq = map.row_as_seq(0);

            let (lp2d, _) = ctc2d_forward(&map, &psi, &y).unwrap();
            let (lp1d, _) = ctc_forward(&seq, &y).unwrap();
            if lp1d == LOG_ZERO {
                assert_eq!(lp2d, LOG_ZERO);
                continue;
            }
            assert!((lp2d - lp1d).abs() <= 1e-10, "2d {lp2d} vs 1d {lp1d}");

            let grads = ctc2d_grad(&map, &psi, &y, false).unwrap();
            let (_, grad1d) = ctc_grad(&seq, &y).unwrap();
            for (a, b) in grads.class_logits.iter().zip(&grad1d) {
                assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn single_column_closed_form() {
        let map = ProbMap2D::uniform(2, 1, 2);
        let psi = TransitionMap::uniform_simplified(2, 0);
        let (lp, table) = ctc2d_forward(&map, &psi, &label(&[1])).unwrap();
        assert!((lp.exp() - 0.5).abs() < 1e-15);
        // Eq-12-style start: finite only for the first two states.
        for h in 0..2 {
            assert!(table.log_beta(0, h, 0).is_finite());
            assert!(table.log_beta(1, h, 0).is_finite());
            assert_eq!(table.log_beta(2, h, 0), LOG_ZERO);
        }
    }

    #[test]
    fn uniform_two_by_two_matches_enumeration() {
        let map = ProbMap2D::uniform(2, 2, 2);
        let psi = TransitionMap::uniform_simplified(2, 1);
        let y = label(&[1]);
        let reference = oracle_ctc2d_prob(&map, &psi, &y).unwrap();
        let loss = ctc2d_loss(&map, &psi, &y).unwrap();
        assert!((loss.value() + reference.ln()).abs() < 1e-12);
        assert!((reference - 0.75).abs() < 1e-15);
    }

    #[test]
    fn matches_oracle_on_random_instances_both_variants() {
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        for i in 0..40 {
            let h = rng.gen_range(1..=3);
            let w = rng.gen_range(1..=4);
            let c = rng.gen_range(2..=3);
            let map = sampling::random_map(&mut rng, h, w, c);
            let psi = if i % 2 == 0 {
                sampling::random_simplified(&mut rng, h, w)
            } else {
                sampling::random_full(&mut rng, h, w)
            };
            let len = rng.gen_range(0..=2.min(w));
            let y = sampling::random_label(&mut rng, c, len);
            let reference = oracle_ctc2d_prob(&map, &psi, &y).unwrap();
            let (lp, _) = ctc2d_forward(&map, &psi, &y).unwrap();
            if reference == 0.0 {
                assert_eq!(lp, LOG_ZERO);
            } else {
                assert!(
                    (lp.exp() - reference).abs() <= 1e-9 * reference,
                    "dp {} vs oracle {}",
                    lp.exp(),
                    reference
                );
            }
        }
    }

    /// Delta map, transitions, and Γ tracing one path spelling "A".
    fn delta_instance() -> (ProbMap2D, TransitionMap, Label) {
        let (height, width, classes) = (2, 3, 2);
        let mut values = vec![0.0; height * width * classes];
        let mut set = |h: usize, w: usize, c: usize| {
            values[(h * width + w) * classes + c] = 1.0;
        };
        // Path heights [0, 1, 0], classes [A, ε, ε].
        set(0, 0, 1);
        set(1, 1, 0);
        set(0, 2, 0);
        // Off-path positions hold probability mass too (blank), but the
        // transition deltas give their paths zero weight.
        set(1, 0, 0);
        set(0, 1, 0);
        set(1, 2, 0);
        let map = ProbMap2D::from_linear(height, width, classes, values).unwrap();
        let psi = TransitionMap::simplified_from_linear(
            height,
            width - 1,
            vec![0.0, 1.0, 1.0, 0.0],
            Some(vec![1.0, 0.0]),
        )
        .unwrap();
        (map, psi, label(&[1]))
    }

    #[test]
    fn delta_configuration_is_the_minimum() {
        let (map, psi, y) = delta_instance();
        let loss = ctc2d_loss(&map, &psi, &y).unwrap();
        assert_eq!(loss.value(), 0.0);

        let grads = ctc2d_grad(&map, &psi, &y, true).unwrap();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&grads.class_logits) <= 1e-8);
        assert!(norm(&grads.transition_logits) <= 1e-8);
        assert!(norm(grads.gamma_logits.as_deref().unwrap()) <= 1e-8);
    }

    #[test]
    fn infeasible_width_is_flagged() {
        let map = ProbMap2D::uniform(2, 2, 3);
        let psi = TransitionMap::uniform_simplified(2, 1);
        let y = label(&[1, 1]); // min_width 3 > W = 2
        let loss = ctc2d_loss(&map, &psi, &y).unwrap();
        assert!(!loss.is_feasible());
        assert_eq!(loss.value(), f64::INFINITY);
        assert!(matches!(
            ctc2d_grad(&map, &psi, &y, false),
            Err(CtcError::InfeasibleGradient { min_width: 3, available: 2 })
        ));
    }

    #[test]
    fn simplified_and_expanded_full_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let h = rng.gen_range(1..=3);
            let w = rng.gen_range(1..=4);
            let c = rng.gen_range(2..=3);
            let map = sampling::random_map(&mut rng, h, w, c);
            let psi = sampling::random_simplified(&mut rng, h, w);
            let full = psi.expand_simplified().unwrap();
            let len = rng.gen_range(0..=2.min(w));
            let y = sampling::random_label(&mut rng, c, len);
            let (lp_s, _) = ctc2d_forward(&map, &psi, &y).unwrap();
            let (lp_f, _) = ctc2d_forward(&map, &full, &y).unwrap();
            if lp_s == LOG_ZERO {
                assert_eq!(lp_f, LOG_ZERO);
            } else {
                assert!((lp_s - lp_f).abs() <= 1e-12, "{lp_s} vs {lp_f}");
            }
        }
    }

    #[test]
    fn label_mass_partitions_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        for _ in 0..6 {
            let h = rng.gen_range(1..=2);
            let w = rng.gen_range(1..=3);
            let c = rng.gen_range(2..=3);
            let map = sampling::random_map(&mut rng, h, w, c);
            let psi = sampling::random_simplified(&mut rng, h, w);
            let mut total = 0.0;
            for y in testutil::all_labels(c, w) {
                total += ctc2d_forward(&map, &psi, &y).unwrap().0.exp();
            }
            assert!((total - 1.0).abs() < 1e-8, "total {total}");
        }
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn consistent_height_permutation_preserves_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..10 {
            let (h, w, c) = (3, 3, 3);
            let map = sampling::random_map(&mut rng, h, w, c);
            let psi = sampling::random_full(&mut rng, h, w);
            let y = sampling::random_label(&mut rng, c, 2);

            let perm = [2usize, 0, 1];
            let mut values = Vec::with_capacity(h * w * c);
            for hh in 0..h {
                for ww in 0..w {
                    for cc in 0..c {
                        values.push(map.prob(perm[hh], ww, cc));
                    }
                }
            }
            let pmap = ProbMap2D::from_linear(h, w, c, values).unwrap();
            let mut psi_values = Vec::with_capacity(h * (w - 1) * h);
            for hh in 0..h {
                for ww in 0..w - 1 {
                    for jj in 0..h {
                        psi_values.push(psi.psi(perm[hh], ww, perm[jj]));
                    }
                }
            }
            let gamma = (0..h).map(|hh| psi.gamma(perm[hh])).collect();
            let ppsi =
                TransitionMap::full_from_linear(h, w - 1, psi_values, Some(gamma)).unwrap();

            let (lp, _) = ctc2d_forward(&map, &psi, &y).unwrap();
            let (lp_perm, _) = ctc2d_forward(&pmap, &ppsi, &y).unwrap();
            if lp == LOG_ZERO {
                assert_eq!(lp_perm, LOG_ZERO);
            } else {
                assert!((lp - lp_perm).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for i in 0..10 {
            let h = rng.gen_range(1..=3);
            let w = rng.gen_range(2..=5);
            let c = rng.gen_range(2..=3);
            let map = sampling::random_map(&mut rng, h, w, c);
            let simplified = i % 2 == 0;
            let psi = if simplified {
                sampling::random_simplified(&mut rng, h, w)
            } else {
                sampling::random_full(&mut rng, h, w)
            };
            let y = sampling::random_label(&mut rng, c, 1);
            let grads = ctc2d_grad(&map, &psi, &y, true).unwrap();
            for row in grads.class_logits.chunks(c) {
                assert!(row.iter().sum::<f64>().abs() <= 1e-10);
            }
            for row in grads.transition_logits.chunks(h) {
                assert!(row.iter().sum::<f64>().abs() <= 1e-10);
            }
            assert!(
                grads
                    .gamma_logits
                    .as_deref()
                    .unwrap()
                    .iter()
                    .sum::<f64>()
                    .abs()
                    <= 1e-10
            );
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(59);
        for i in 0..8 {
            let h = rng.gen_range(1..=3);
            let w = rng.gen_range(1..=5);
            let c = rng.gen_range(2..=3);
            let simplified = i % 2 == 0;
            let len = rng.gen_range(0..=2);
            let y = sampling::random_label(&mut rng, c, len);
            if y.min_width() > w {
                continue;
            }

            let x_logits = sampling::random_logits(&mut rng, h * w * c);
            let t_len = if simplified { (w - 1) * h } else { h * (w - 1) * h };
            let t_logits = sampling::random_logits(&mut rng, t_len);
            let g_logits = sampling::random_logits(&mut rng, h);

            let build = |xl: &[f64], tl: &[f64], gl: &[f64]| {
                let map = ProbMap2D::from_logits(h, w, c, xl).unwrap();
                let psi = if simplified {
                    TransitionMap::simplified_from_logits(h, w - 1, tl, Some(gl)).unwrap()
                } else {
                    let mut probs = Vec::with_capacity(tl.len());
                    for row in tl.chunks(h) {
                        probs.extend(crate::numeric::softmax_normalize(row).unwrap().0);
                    }
                    let (gamma, _) = crate::numeric::softmax_normalize(gl).unwrap();
                    TransitionMap::full_from_linear(h, w - 1, probs, Some(gamma)).unwrap()
                };
                (map, psi)
            };

            let (map, psi) = build(&x_logits, &t_logits, &g_logits);
            let grads = ctc2d_grad(&map, &psi, &y, true).unwrap();

            let err_x = testutil::max_relative_error(&grads.class_logits, &x_logits, |l| {
                let (map, psi) = build(l, &t_logits, &g_logits);
                ctc2d_loss(&map, &psi, &y).unwrap().value()
            });
            assert!(err_x <= 1e-4, "class gradient error {err_x}");

            let err_t =
                testutil::max_relative_error(&grads.transition_logits, &t_logits, |l| {
                    let (map, psi) = build(&x_logits, l, &g_logits);
                    ctc2d_loss(&map, &psi, &y).unwrap().value()
                });
            assert!(err_t <= 1e-4, "transition gradient error {err_t}");

            let err_g = testutil::max_relative_error(
                grads.gamma_logits.as_deref().unwrap(),
                &g_logits,
                |l| {
                    let (map, psi) = build(&x_logits, &t_logits, l);
                    ctc2d_loss(&map, &psi, &y).unwrap().value()
                },
            );
            assert!(err_g <= 1e-4, "gamma gradient error {err_g}");
        }
    }

    #[test]
    fn batch_loss_runs_both_modes() {
        let map = ProbMap2D::uniform(2, 3, 2);
        let psi = TransitionMap::uniform_simplified(2, 2);
        let ok = label(&[1]);
        let bad = label(&[1, 1, 1]);
        let strict = ctc2d_batch_loss(&[(&map, &psi, &ok)], BatchMode::Strict).unwrap();
        assert!(strict.mean.is_finite());
        assert!(
            ctc2d_batch_loss(&[(&map, &psi, &ok), (&map, &psi, &bad)], BatchMode::Strict).is_err()
        );
        let lenient = ctc2d_batch_loss(
            &[(&map, &psi, &ok), (&map, &psi, &bad)],
            BatchMode::Permissive { clamp: 5.0 },
        )
        .unwrap();
        assert_eq!(lenient.infeasible, vec![1]);
    }

    #[test]
    fn beta_table_and_seq_consistency() {
        // Summing β over heights reproduces the reduced recursion that
        // a height-1 vanilla run would see on the marginalized columns.
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let map = sampling::random_map(&mut rng, 3, 4, 3);
        let psi = sampling::random_simplified(&mut rng, 3, 4);
        let y = label(&[1, 2]);
        let (lp, table) = ctc2d_forward(&map, &psi, &y).unwrap();

        // Final-column height sums of the last two states reproduce P.
        let s_last = table.num_states() - 1;
        let mut terms = Vec::new();
        for s in [s_last - 1, s_last] {
            for h in 0..table.height() {
                terms.push(table.log_beta(s, h, table.width() - 1));
            }
        }
        assert!((log_sum_exp(&terms) - lp).abs() < 1e-10);

        // Eq-12-style start column against the marginalized sequence DP.
        let e_rows = crate::decode::marginalize_columns(&map, &psi);
        let mut values = Vec::new();
        for row in &e_rows {
            values.extend(row.iter().map(|&lp: &f64| lp.exp()));
        }
        let seq = ProbSeq1D::from_linear(map.width(), map.num_classes(), values)
            .unwrap();
        let (lp_seq, _) = ctc_forward(&seq, &y).unwrap();
        assert!((lp_seq - lp).abs() < 1e-9);
    }
}
