//! Brute-force reference implementations.
//!
//! Everything here enumerates complete path sets in linear-domain
//! arithmetic, sharing no numerical code with the log-domain dynamic
//! programs it is used to check. Exponential time; size guards reject
//! anything beyond toy scale.

use std::collections::BTreeMap;

use crate::alphabet::Label;
use crate::decode::collapse;
use crate::error::{CtcError, Result};
use crate::prob::{ProbMap2D, ProbSeq1D, TransitionMap};

const MAX_SEQ_WIDTH: usize = 8;
const MAX_SEQ_CLASSES: usize = 4;
const MAX_MAP_HEIGHT: usize = 3;
const MAX_MAP_WIDTH: usize = 5;
const MAX_MAP_CLASSES: usize = 3;

/// One fully enumerated alignment: per-step choices, its linear-domain
/// probability, and the label it collapses to.
#[derive(Debug, Clone, PartialEq)]
pub struct EnumeratedPath {
    pub heights: Vec<usize>,
    pub classes: Vec<usize>,
    pub probability: f64,
    pub label: Label,
}

fn guard_seq(x: &ProbSeq1D) -> Result<()> {
    if x.width() > MAX_SEQ_WIDTH {
        return Err(CtcError::SizeGuard {
            what: "sequence width",
            limit: MAX_SEQ_WIDTH,
            actual: x.width(),
        });
    }
    if x.num_classes() > MAX_SEQ_CLASSES {
        return Err(CtcError::SizeGuard {
            what: "class count",
            limit: MAX_SEQ_CLASSES,
            actual: x.num_classes(),
        });
    }
    Ok(())
}

fn guard_map(x: &ProbMap2D) -> Result<()> {
    if x.height() > MAX_MAP_HEIGHT {
        return Err(CtcError::SizeGuard {
            what: "map height",
            limit: MAX_MAP_HEIGHT,
            actual: x.height(),
        });
    }
    if x.width() > MAX_MAP_WIDTH {
        return Err(CtcError::SizeGuard {
            what: "map width",
            limit: MAX_MAP_WIDTH,
            actual: x.width(),
        });
    }
    if x.num_classes() > MAX_MAP_CLASSES {
        return Err(CtcError::SizeGuard {
            what: "class count",
            limit: MAX_MAP_CLASSES,
            actual: x.num_classes(),
        });
    }
    Ok(())
}

/// Visits every class path of `x` in lexicographic order. The callback
/// receives the classes and the path's linear-domain probability.
fn for_each_seq_path(x: &ProbSeq1D, mut visit: impl FnMut(&[usize], f64)) {
    let width = x.width();
    let classes = x.num_classes();
    let mut path = vec![0usize; width];
    loop {
        let mut p = 1.0;
        for (t, &c) in path.iter().enumerate() {
            p *= x.prob(t, c);
        }
        visit(&path, p);

        // Odometer increment, most significant step first.
        let mut pos = width;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            path[pos] += 1;
            if path[pos] < classes {
                break;
            }
            path[pos] = 0;
        }
    }
}

/// Visits every joint (class, height) path of `x` in lexicographic order
/// of per-step `(class, height)` keys.
fn for_each_map_path(
    x: &ProbMap2D,
    psi: &TransitionMap,
    mut visit: impl FnMut(&[usize], &[usize], f64),
) {
    let width = x.width();
    let classes = x.num_classes();
    let height = x.height();
    // Encoded choice per step: class * height + height_index, so the
    // odometer order matches the decoder tie-break (class first).
    let choices = classes * height;
    let mut encoded = vec![0usize; width];
    let mut path_classes = vec![0usize; width];
    let mut path_heights = vec![0usize; width];
    loop {
        for (w, &e) in encoded.iter().enumerate() {
            path_classes[w] = e / height;
            path_heights[w] = e % height;
        }
        let mut p = psi.gamma(path_heights[0]);
        for w in 0..width {
            p *= x.prob(path_heights[w], w, path_classes[w]);
            if w + 1 < width {
                p *= psi.transition(path_heights[w], w, path_heights[w + 1]);
            }
        }
        visit(&path_classes, &path_heights, p);

        let mut pos = width;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            encoded[pos] += 1;
            if encoded[pos] < choices {
                break;
            }
            encoded[pos] = 0;
        }
    }
}

/// Sum of the probabilities of all class paths collapsing to `y`.
pub fn oracle_ctc_prob(x: &ProbSeq1D, y: &Label) -> Result<f64> {
    guard_seq(x)?;
    let mut total = 0.0;
    for_each_seq_path(x, |classes, p| {
        if &collapse(classes) == y {
            total += p;
        }
    });
    Ok(total)
}

/// Sum of the probabilities of all joint height/class paths whose class
/// sequence collapses to `y`, weighted by `Γ`, `X'`, and `Ψ`.
pub fn oracle_ctc2d_prob(x: &ProbMap2D, psi: &TransitionMap, y: &Label) -> Result<f64> {
    guard_map(x)?;
    crate::decode::check_shapes(x, psi)?;
    let mut total = 0.0;
    for_each_map_path(x, psi, |classes, _heights, p| {
        if &collapse(classes) == y {
            total += p;
        }
    });
    Ok(total)
}

/// Probability mass per collapsed label, over every path of `x`.
pub fn oracle_label_probs_1d(x: &ProbSeq1D) -> Result<BTreeMap<Label, f64>> {
    guard_seq(x)?;
    let mut by_label: BTreeMap<Label, f64> = BTreeMap::new();
    for_each_seq_path(x, |classes, p| {
        *by_label.entry(collapse(classes)).or_insert(0.0) += p;
    });
    Ok(by_label)
}

pub fn oracle_label_probs_2d(
    x: &ProbMap2D,
    psi: &TransitionMap,
) -> Result<BTreeMap<Label, f64>> {
    guard_map(x)?;
    crate::decode::check_shapes(x, psi)?;
    let mut by_label: BTreeMap<Label, f64> = BTreeMap::new();
    for_each_map_path(x, psi, |classes, _heights, p| {
        *by_label.entry(collapse(classes)).or_insert(0.0) += p;
    });
    Ok(by_label)
}

/// Exhaustive argmax path; ties resolve to the first path in
/// lexicographic `(class, height)` order, matching the decoders.
pub fn oracle_best_path_1d(x: &ProbSeq1D) -> Result<EnumeratedPath> {
    guard_seq(x)?;
    let mut best: Option<EnumeratedPath> = None;
    for_each_seq_path(x, |classes, p| {
        if best.as_ref().is_none_or(|b| p > b.probability) {
            best = Some(EnumeratedPath {
                heights: vec![0; classes.len()],
                classes: classes.to_vec(),
                probability: p,
                label: collapse(classes),
            });
        }
    });
    Ok(best.expect("width >= 1 yields at least one path"))
}

pub fn oracle_best_path_2d(x: &ProbMap2D, psi: &TransitionMap) -> Result<EnumeratedPath> {
    guard_map(x)?;
    crate::decode::check_shapes(x, psi)?;
    let mut best: Option<EnumeratedPath> = None;
    for_each_map_path(x, psi, |classes, heights, p| {
        if best.as_ref().is_none_or(|b| p > b.probability) {
            best = Some(EnumeratedPath {
                heights: heights.to_vec(),
                classes: classes.to_vec(),
                probability: p,
                label: collapse(classes),
            });
        }
    });
    Ok(best.expect("width >= 1 yields at least one path"))
}
