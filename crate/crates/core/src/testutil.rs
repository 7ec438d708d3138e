//! Helpers shared by the unit tests.

use crate::alphabet::Label;

/// All labels with length <= `max_len` over classes `1..num_classes`.
pub(crate) fn all_labels(num_classes: usize, max_len: usize) -> Vec<Label> {
    let mut out = vec![Label::empty()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &frontier {
            for c in 1..num_classes {
                let mut classes = prefix.clone();
                classes.push(c);
                out.push(Label::new(classes.clone()).unwrap());
                next.push(classes);
            }
        }
        frontier = next;
    }
    out
}

/// Worst-case deviation between an analytic gradient and central finite
/// differences (step 1e-5) over `logits`. Relative to the larger
/// magnitude; near zero the comparison is absolute, scaled so the usual
/// 1e-4 gate corresponds to an absolute 1e-6.
pub(crate) fn max_relative_error(
    analytic: &[f64],
    logits: &[f64],
    mut f: impl FnMut(&[f64]) -> f64,
) -> f64 {
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    let mut perturbed = logits.to_vec();
    for i in 0..logits.len() {
        perturbed[i] = logits[i] + step;
        let up = f(&perturbed);
        perturbed[i] = logits[i] - step;
        let down = f(&perturbed);
        perturbed[i] = logits[i];
        let numeric = (up - down) / (2.0 * step);
        let denom = analytic[i].abs().max(numeric.abs());
        let err = if denom < 1e-6 {
            (analytic[i] - numeric).abs() * 1e2
        } else {
            (analytic[i] - numeric).abs() / denom
        };
        worst = worst.max(err);
    }
    worst
}
