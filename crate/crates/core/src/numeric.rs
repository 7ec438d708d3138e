//! Log-space arithmetic and shift-invariant softmax.

use crate::error::{CtcError, Result};

/// Log-domain zero. Propagates through [`log_sum_exp2`] without producing NaN.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// `ln(exp(a) + exp(b))`, stable for large magnitudes and for `-inf` inputs.
#[inline]
pub fn log_sum_exp2(a: f64, b: f64) -> f64 {
    if a == LOG_ZERO {
        return b;
    }
    if b == LOG_ZERO {
        return a;
    }
    if a >= b {
        a + (b - a).exp().ln_1p()
    } else {
        b + (a - b).exp().ln_1p()
    }
}

/// `ln(exp(a) + exp(b) + exp(c))`.
#[inline]
pub fn log_sum_exp3(a: f64, b: f64, c: f64) -> f64 {
    let m = a.max(b).max(c);
    if m == LOG_ZERO {
        return LOG_ZERO;
    }
    m + ((a - m).exp() + (b - m).exp() + (c - m).exp()).ln()
}

/// `ln(sum(exp(values)))` over a slice; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let mut m = LOG_ZERO;
    for &v in values {
        if v > m {
            m = v;
        }
    }
    if m == LOG_ZERO {
        return LOG_ZERO;
    }
    let mut s = 0.0;
    for &v in values {
        s += (v - m).exp();
    }
    m + s.ln()
}

/// Shift-invariant softmax of one axis slice.
///
/// Returns linear probabilities plus the matching log-probabilities
/// (computed as `x - max - ln(sum)`, which is more accurate than taking
/// `ln` of the linear result). Rejects non-finite input.
pub fn softmax_normalize(logits: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if logits.is_empty() {
        return Err(CtcError::Empty { what: "softmax input" });
    }
    let mut max = f64::NEG_INFINITY;
    for (i, &v) in logits.iter().enumerate() {
        if !v.is_finite() {
            return Err(CtcError::NonFinite { what: "softmax input", index: i });
        }
        if v > max {
            max = v;
        }
    }
    let mut probs = Vec::with_capacity(logits.len());
    let mut sum = 0.0;
    for &v in logits {
        let e = (v - max).exp();
        probs.push(e);
        sum += e;
    }
    let log_sum = sum.ln();
    let log_probs = logits.iter().map(|&v| v - max - log_sum).collect();
    for p in &mut probs {
        *p /= sum;
    }
    Ok((probs, log_probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_symmetry() {
        let (p, _) = softmax_normalize(&[0.0, 0.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn softmax_constant_rows() {
        for c in [-1e6, -3.25, 0.0, 7.5, 1e6] {
            let (p, _) = softmax_normalize(&[c, c, c]).unwrap();
            for v in p {
                assert!((v - 1.0 / 3.0).abs() < 1e-15, "got {v}");
            }
        }
    }

    #[test]
    fn softmax_log_ratio() {
        // exp/sum evaluates exactly: e^0 / (e^0 + e^ln3) = 1/4.
        let (p, lp) = softmax_normalize(&[0.0, 3.0f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15);
        assert!((p[1] - 0.75).abs() < 1e-15);
        assert!((lp[0] - 0.25f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_non_finite() {
        assert!(softmax_normalize(&[0.0, f64::NAN]).is_err());
        assert!(softmax_normalize(&[f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn lse_handles_neg_infinity() {
        assert_eq!(log_sum_exp2(LOG_ZERO, LOG_ZERO), LOG_ZERO);
        assert_eq!(log_sum_exp2(LOG_ZERO, -2.5), -2.5);
        assert_eq!(log_sum_exp3(LOG_ZERO, LOG_ZERO, LOG_ZERO), LOG_ZERO);
        assert_eq!(log_sum_exp(&[]), LOG_ZERO);
        assert_eq!(log_sum_exp(&[LOG_ZERO, LOG_ZERO]), LOG_ZERO);
    }

    #[test]
    fn lse_matches_direct_sum() {
        let v = [-0.5f64, -1.25, -3.0];
        let direct = (v.iter().map(|x| x.exp()).sum::<f64>()).ln();
        assert!((log_sum_exp(&v) - direct).abs() < 1e-14);
        assert!((log_sum_exp3(v[0], v[1], v[2]) - direct).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(
            xs in proptest::collection::vec(-30.0f64..30.0, 1..8),
            shift in -100.0f64..100.0,
        ) {
            let (base, _) = softmax_normalize(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + shift).collect();
            let (moved, _) = softmax_normalize(&shifted).unwrap();
            for (a, b) in base.iter().zip(&moved) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_sums_to_one(xs in proptest::collection::vec(-50.0f64..50.0, 1..10)) {
            let (p, _) = softmax_normalize(&xs).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
        }

        #[test]
        fn lse2_commutes_and_bounds(a in -700.0f64..700.0, b in -700.0f64..700.0) {
            let ab = log_sum_exp2(a, b);
            let ba = log_sum_exp2(b, a);
            prop_assert!((ab - ba).abs() < 1e-12);
            prop_assert!(ab >= a.max(b));
        }
    }
}
