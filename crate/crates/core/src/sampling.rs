//! Seeded random instance builders shared by tests, the acceptance
//! suite, and the benchmarks.

use rand::Rng;

use crate::alphabet::Label;
use crate::prob::{ProbMap2D, ProbSeq1D, TransitionMap};

const LOGIT_RANGE: std::ops::Range<f64> = -2.5..2.5;

pub fn random_logits<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(LOGIT_RANGE)).collect()
}

pub fn random_seq<R: Rng>(rng: &mut R, width: usize, num_classes: usize) -> ProbSeq1D {
    let logits = random_logits(rng, width * num_classes);
    ProbSeq1D::from_logits(width, num_classes, &logits).expect("finite logits")
}

pub fn random_map<R: Rng>(
    rng: &mut R,
    height: usize,
    width: usize,
    num_classes: usize,
) -> ProbMap2D {
    let logits = random_logits(rng, height * width * num_classes);
    ProbMap2D::from_logits(height, width, num_classes, &logits).expect("finite logits")
}

/// Simplified transitions with a random (non-uniform) `Γ`.
pub fn random_simplified<R: Rng>(rng: &mut R, height: usize, width: usize) -> TransitionMap {
    let columns = width - 1;
    let logits = random_logits(rng, columns * height);
    let gamma_logits = random_logits(rng, height);
    TransitionMap::simplified_from_logits(height, columns, &logits, Some(&gamma_logits))
        .expect("finite logits")
}

/// Full transitions with a random `Γ`.
pub fn random_full<R: Rng>(rng: &mut R, height: usize, width: usize) -> TransitionMap {
    let columns = width - 1;
    let mut psi = Vec::with_capacity(height * columns * height);
    for _ in 0..height * columns {
        let (row, _) =
            crate::numeric::softmax_normalize(&random_logits(rng, height)).expect("finite");
        psi.extend(row);
    }
    let (gamma, _) =
        crate::numeric::softmax_normalize(&random_logits(rng, height)).expect("finite");
    TransitionMap::full_from_linear(height, columns, psi, Some(gamma)).expect("normalized rows")
}

/// A label of the given length over classes `1..num_classes`.
pub fn random_label<R: Rng>(rng: &mut R, num_classes: usize, len: usize) -> Label {
    let classes = (0..len).map(|_| rng.gen_range(1..num_classes)).collect();
    Label::new(classes).expect("non-blank classes")
}
