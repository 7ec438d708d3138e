//! Probability containers: per-frame sequences, per-position maps, and
//! path-transition maps, each stored with a paired log-domain view.
//!
//! Construction is strict: rows must already sum to 1 within
//! [`NORM_TOL`]; out-of-tolerance input is rejected rather than silently
//! renormalized. Use the explicit `renormalized` operations when lenient
//! behaviour is wanted.

use crate::error::{CtcError, Result};
use crate::numeric::softmax_normalize;

/// Absolute tolerance on every per-row probability sum.
pub const NORM_TOL: f64 = 1e-6;

fn check_row(what: &'static str, location: &dyn Fn() -> String, row: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for (i, &p) in row.iter().enumerate() {
        if !p.is_finite() {
            return Err(CtcError::NonFinite { what, index: i });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(CtcError::OutOfRange {
                what,
                location: location(),
                value: p,
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > NORM_TOL {
        return Err(CtcError::Normalization {
            what,
            location: location(),
            sum,
            tolerance: NORM_TOL,
        });
    }
    Ok(())
}

fn renormalize_rows(values: &mut [f64], row_len: usize) {
    for row in values.chunks_mut(row_len) {
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for v in row {
                *v /= sum;
            }
        }
    }
}

fn log_view(values: &[f64]) -> Vec<f64> {
    values.iter().map(|&p| p.ln()).collect()
}

/// Per-frame class distributions of shape `T x |Ω|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbSeq1D {
    width: usize,
    num_classes: usize,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl ProbSeq1D {
    pub fn from_linear(width: usize, num_classes: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 {
            return Err(CtcError::Empty { what: "sequence width" });
        }
        if num_classes < 2 {
            return Err(CtcError::Empty { what: "class axis (needs blank plus one symbol)" });
        }
        if values.len() != width * num_classes {
            return Err(CtcError::ShapeMismatch {
                what: "sequence buffer",
                expected: format!("{} values", width * num_classes),
                actual: format!("{}", values.len()),
            });
        }
        let seq = Self {
            width,
            num_classes,
            log_probs: log_view(&values),
            probs: values,
        };
        seq.validate()?;
        Ok(seq)
    }

    /// Softmax over the class axis of raw logits.
    pub fn from_logits(width: usize, num_classes: usize, logits: &[f64]) -> Result<Self> {
        if logits.len() != width * num_classes {
            return Err(CtcError::ShapeMismatch {
                what: "logit buffer",
                expected: format!("{} values", width * num_classes),
                actual: format!("{}", logits.len()),
            });
        }
        if width == 0 || num_classes < 2 {
            return Err(CtcError::Empty { what: "sequence shape" });
        }
        let mut probs = Vec::with_capacity(logits.len());
        let mut log_probs = Vec::with_capacity(logits.len());
        for row in logits.chunks(num_classes) {
            let (p, lp) = softmax_normalize(row)?;
            probs.extend(p);
            log_probs.extend(lp);
        }
        Ok(Self { width, num_classes, probs, log_probs })
    }

    pub fn uniform(width: usize, num_classes: usize) -> Self {
        let p = 1.0 / num_classes as f64;
        Self {
            width,
            num_classes,
            probs: vec![p; width * num_classes],
            log_probs: vec![p.ln(); width * num_classes],
        }
    }

    /// Rescales every frame to sum exactly to 1 (lenient counterpart of
    /// the strict constructor).
    pub fn renormalized(mut self) -> Self {
        renormalize_rows(&mut self.probs, self.num_classes);
        self.log_probs = log_view(&self.probs);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for t in 0..self.width {
            check_row("frame distribution", &|| format!("frame {t}"), self.row(t))?;
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    pub fn prob(&self, t: usize, c: usize) -> f64 {
        self.probs[t * self.num_classes + c]
    }

    #[inline]
    pub fn log_prob(&self, t: usize, c: usize) -> f64 {
        self.log_probs[t * self.num_classes + c]
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.probs[t * self.num_classes..(t + 1) * self.num_classes]
    }

    pub fn log_row(&self, t: usize) -> &[f64] {
        &self.log_probs[t * self.num_classes..(t + 1) * self.num_classes]
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    /// Appends one frame, returning the extended sequence.
    pub fn with_frame(&self, frame: &[f64]) -> Result<Self> {
        let mut values = self.probs.clone();
        values.extend_from_slice(frame);
        Self::from_linear(self.width + 1, self.num_classes, values)
    }
}

/// Per-position class distributions of shape `H x W x |Ω|`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMap2D {
    height: usize,
    width: usize,
    num_classes: usize,
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl ProbMap2D {
    pub fn from_linear(
        height: usize,
        width: usize,
        num_classes: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(CtcError::Empty { what: "map shape" });
        }
        if num_classes < 2 {
            return Err(CtcError::Empty { what: "class axis (needs blank plus one symbol)" });
        }
        if values.len() != height * width * num_classes {
            return Err(CtcError::ShapeMismatch {
                what: "map buffer",
                expected: format!("{} values", height * width * num_classes),
                actual: format!("{}", values.len()),
            });
        }
        let map = Self {
            height,
            width,
            num_classes,
            log_probs: log_view(&values),
            probs: values,
        };
        map.validate()?;
        Ok(map)
    }

    /// Softmax over the class axis at each position.
    pub fn from_logits(
        height: usize,
        width: usize,
        num_classes: usize,
        logits: &[f64],
    ) -> Result<Self> {
        if logits.len() != height * width * num_classes {
            return Err(CtcError::ShapeMismatch {
                what: "logit buffer",
                expected: format!("{} values", height * width * num_classes),
                actual: format!("{}", logits.len()),
            });
        }
        if height == 0 || width == 0 || num_classes < 2 {
            return Err(CtcError::Empty { what: "map shape" });
        }
        let mut probs = Vec::with_capacity(logits.len());
        let mut log_probs = Vec::with_capacity(logits.len());
        for row in logits.chunks(num_classes) {
            let (p, lp) = softmax_normalize(row)?;
            probs.extend(p);
            log_probs.extend(lp);
        }
        Ok(Self { height, width, num_classes, probs, log_probs })
    }

    pub fn uniform(height: usize, width: usize, num_classes: usize) -> Self {
        let p = 1.0 / num_classes as f64;
        Self {
            height,
            width,
            num_classes,
            probs: vec![p; height * width * num_classes],
            log_probs: vec![p.ln(); height * width * num_classes],
        }
    }

    pub fn renormalized(mut self) -> Self {
        renormalize_rows(&mut self.probs, self.num_classes);
        self.log_probs = log_view(&self.probs);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for h in 0..self.height {
            for w in 0..self.width {
                check_row(
                    "position distribution",
                    &|| format!("position (h={h}, w={w})"),
                    self.class_row(h, w),
                )?;
            }
        }
        Ok(())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    #[inline]
    fn base(&self, h: usize, w: usize) -> usize {
        (h * self.width + w) * self.num_classes
    }

    #[inline]
    pub fn prob(&self, h: usize, w: usize, c: usize) -> f64 {
        self.probs[self.base(h, w) + c]
    }

    #[inline]
    pub fn log_prob(&self, h: usize, w: usize, c: usize) -> f64 {
        self.log_probs[self.base(h, w) + c]
    }

    pub fn class_row(&self, h: usize, w: usize) -> &[f64] {
        let b = self.base(h, w);
        &self.probs[b..b + self.num_classes]
    }

    pub fn values(&self) -> &[f64] {
        &self.probs
    }

    /// Height collapse: the mean over rows of each column's class
    /// distributions, renormalized. This is the baseline reduction a
    /// sequence loss needs before it can consume 2D predictions.
    pub fn collapse_mean(&self) -> ProbSeq1D {
        let mut values = vec![0.0; self.width * self.num_classes];
        let inv_h = 1.0 / self.height as f64;
        for h in 0..self.height {
            for w in 0..self.width {
                let b = self.base(h, w);
                for c in 0..self.num_classes {
                    values[w * self.num_classes + c] += self.probs[b + c] * inv_h;
                }
            }
        }
        renormalize_rows(&mut values, self.num_classes);
        ProbSeq1D {
            width: self.width,
            num_classes: self.num_classes,
            log_probs: log_view(&values),
            probs: values,
        }
    }

    /// Reads a single height row out as a 1D sequence (exact copy, no
    /// renormalization).
    pub fn row_as_seq(&self, h: usize) -> ProbSeq1D {
        let mut values = Vec::with_capacity(self.width * self.num_classes);
        for w in 0..self.width {
            values.extend_from_slice(self.class_row(h, w));
        }
        ProbSeq1D {
            width: self.width,
            num_classes: self.num_classes,
            log_probs: log_view(&values),
            probs: values,
        }
    }
}

/// Which factorisation the transition probabilities use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    /// `Ψ[h][w][j]`: source-conditioned, shape `H x (W-1) x H`.
    Full,
    /// `Ψ̂[w][h]`: source-independent, shape `(W-1) x H`.
    Simplified,
}

#[derive(Debug, Clone, PartialEq)]
enum Transitions {
    Full { probs: Vec<f64>, log_probs: Vec<f64> },
    Simplified { probs: Vec<f64>, log_probs: Vec<f64> },
}

/// Path-transition probabilities `Ψ` (or `Ψ̂`) plus the initial height
/// distribution `Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMap {
    height: usize,
    /// Number of transition columns, `W - 1`.
    columns: usize,
    trans: Transitions,
    gamma: Vec<f64>,
    log_gamma: Vec<f64>,
}

impl TransitionMap {
    /// Builds the simplified variant. `psi_hat` is `(W-1) x H` row-major;
    /// `gamma` defaults to uniform when absent.
    pub fn simplified_from_linear(
        height: usize,
        columns: usize,
        psi_hat: Vec<f64>,
        gamma: Option<Vec<f64>>,
    ) -> Result<Self> {
        if psi_hat.len() != columns * height {
            return Err(CtcError::ShapeMismatch {
                what: "simplified transition buffer",
                expected: format!("{} values", columns * height),
                actual: format!("{}", psi_hat.len()),
            });
        }
        let map = Self {
            height,
            columns,
            trans: Transitions::Simplified {
                log_probs: log_view(&psi_hat),
                probs: psi_hat,
            },
            log_gamma: Vec::new(),
            gamma: Vec::new(),
        };
        map.with_gamma_checked(gamma)
    }

    /// Builds the full variant. `psi` is `H x (W-1) x H` row-major.
    pub fn full_from_linear(
        height: usize,
        columns: usize,
        psi: Vec<f64>,
        gamma: Option<Vec<f64>>,
    ) -> Result<Self> {
        if psi.len() != height * columns * height {
            return Err(CtcError::ShapeMismatch {
                what: "full transition buffer",
                expected: format!("{} values", height * columns * height),
                actual: format!("{}", psi.len()),
            });
        }
        let map = Self {
            height,
            columns,
            trans: Transitions::Full {
                log_probs: log_view(&psi),
                probs: psi,
            },
            log_gamma: Vec::new(),
            gamma: Vec::new(),
        };
        map.with_gamma_checked(gamma)
    }

    /// Simplified variant from raw logits: softmax over the height axis
    /// per column, and over `gamma_logits` for `Γ`.
    pub fn simplified_from_logits(
        height: usize,
        columns: usize,
        logits: &[f64],
        gamma_logits: Option<&[f64]>,
    ) -> Result<Self> {
        if logits.len() != columns * height {
            return Err(CtcError::ShapeMismatch {
                what: "simplified transition logits",
                expected: format!("{} values", columns * height),
                actual: format!("{}", logits.len()),
            });
        }
        let mut probs = Vec::with_capacity(logits.len());
        let mut log_probs = Vec::with_capacity(logits.len());
        for row in logits.chunks(height) {
            let (p, lp) = softmax_normalize(row)?;
            probs.extend(p);
            log_probs.extend(lp);
        }
        let (gamma, log_gamma) = match gamma_logits {
            Some(gl) => {
                if gl.len() != height {
                    return Err(CtcError::ShapeMismatch {
                        what: "gamma logits",
                        expected: format!("{height} values"),
                        actual: format!("{}", gl.len()),
                    });
                }
                softmax_normalize(gl)?
            }
            None => uniform_gamma(height),
        };
        Ok(Self {
            height,
            columns,
            trans: Transitions::Simplified { probs, log_probs },
            gamma,
            log_gamma,
        })
    }

    /// Uniform simplified transitions and uniform `Γ`.
    pub fn uniform_simplified(height: usize, columns: usize) -> Self {
        let p = 1.0 / height as f64;
        let (gamma, log_gamma) = uniform_gamma(height);
        Self {
            height,
            columns,
            trans: Transitions::Simplified {
                probs: vec![p; columns * height],
                log_probs: vec![p.ln(); columns * height],
            },
            gamma,
            log_gamma,
        }
    }

    fn with_gamma_checked(mut self, gamma: Option<Vec<f64>>) -> Result<Self> {
        let (gamma, log_gamma) = match gamma {
            Some(g) => {
                if g.len() != self.height {
                    return Err(CtcError::ShapeMismatch {
                        what: "gamma",
                        expected: format!("{} values", self.height),
                        actual: format!("{}", g.len()),
                    });
                }
                let lg = log_view(&g);
                (g, lg)
            }
            None => uniform_gamma(self.height),
        };
        self.gamma = gamma;
        self.log_gamma = log_gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 {
            return Err(CtcError::Empty { what: "transition height" });
        }
        match &self.trans {
            Transitions::Simplified { probs, .. } => {
                for w in 0..self.columns {
                    check_row(
                        "transition distribution",
                        &|| format!("column {w}"),
                        &probs[w * self.height..(w + 1) * self.height],
                    )?;
                }
            }
            Transitions::Full { probs, .. } => {
                for h in 0..self.height {
                    for w in 0..self.columns {
                        let b = (h * self.columns + w) * self.height;
                        check_row(
                            "transition distribution",
                            &|| format!("source (h={h}, w={w})"),
                            &probs[b..b + self.height],
                        )?;
                    }
                }
            }
        }
        check_row("gamma", &|| "gamma".to_string(), &self.gamma)
    }

    pub fn kind(&self) -> TransitionKind {
        match self.trans {
            Transitions::Full { .. } => TransitionKind::Full,
            Transitions::Simplified { .. } => TransitionKind::Simplified,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `W - 1`: one transition column between each adjacent pair.
    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn gamma(&self, h: usize) -> f64 {
        self.gamma[h]
    }

    pub fn log_gamma(&self, h: usize) -> f64 {
        self.log_gamma[h]
    }

    pub fn gamma_values(&self) -> &[f64] {
        &self.gamma
    }

    pub fn log_gamma_values(&self) -> &[f64] {
        &self.log_gamma
    }

    /// Log `Ψ̂` column `w` as a slice over heights (simplified only).
    pub fn log_psi_hat_col(&self, w: usize) -> &[f64] {
        match &self.trans {
            Transitions::Simplified { log_probs, .. } => {
                &log_probs[w * self.height..(w + 1) * self.height]
            }
            Transitions::Full { .. } => panic!("log_psi_hat_col on a full transition map"),
        }
    }

    /// Linear `Ψ̂` column `w` as a slice over heights (simplified only).
    pub fn psi_hat_col(&self, w: usize) -> &[f64] {
        match &self.trans {
            Transitions::Simplified { probs, .. } => {
                &probs[w * self.height..(w + 1) * self.height]
            }
            Transitions::Full { .. } => panic!("psi_hat_col on a full transition map"),
        }
    }

    /// Simplified transition `Ψ̂[w][h]`. Panics on a full-variant map.
    #[inline]
    pub fn psi_hat(&self, w: usize, h: usize) -> f64 {
        match &self.trans {
            Transitions::Simplified { probs, .. } => probs[w * self.height + h],
            Transitions::Full { .. } => panic!("psi_hat on a full transition map"),
        }
    }

    #[inline]
    pub fn log_psi_hat(&self, w: usize, h: usize) -> f64 {
        match &self.trans {
            Transitions::Simplified { log_probs, .. } => log_probs[w * self.height + h],
            Transitions::Full { .. } => panic!("log_psi_hat on a full transition map"),
        }
    }

    /// Full transition `Ψ[h][w][j]`. Panics on a simplified-variant map.
    #[inline]
    pub fn psi(&self, h: usize, w: usize, j: usize) -> f64 {
        match &self.trans {
            Transitions::Full { probs, .. } => {
                probs[(h * self.columns + w) * self.height + j]
            }
            Transitions::Simplified { .. } => panic!("psi on a simplified transition map"),
        }
    }

    #[inline]
    pub fn log_psi(&self, h: usize, w: usize, j: usize) -> f64 {
        match &self.trans {
            Transitions::Full { log_probs, .. } => {
                log_probs[(h * self.columns + w) * self.height + j]
            }
            Transitions::Simplified { .. } => panic!("log_psi on a simplified transition map"),
        }
    }

    /// Linear transition probability regardless of variant.
    #[inline]
    pub fn transition(&self, source: usize, w: usize, dest: usize) -> f64 {
        match &self.trans {
            Transitions::Full { probs, .. } => {
                probs[(source * self.columns + w) * self.height + dest]
            }
            Transitions::Simplified { probs, .. } => probs[w * self.height + dest],
        }
    }

    /// Per-destination column weights used by the decoders: `Ψ̂[w]` for
    /// the simplified variant, the mean over sources for the full one.
    pub fn column_weights(&self, w: usize) -> Vec<f64> {
        match &self.trans {
            Transitions::Simplified { probs, .. } => {
                probs[w * self.height..(w + 1) * self.height].to_vec()
            }
            Transitions::Full { probs, .. } => {
                let mut out = vec![0.0; self.height];
                let inv = 1.0 / self.height as f64;
                for (h, weight) in out.iter_mut().enumerate() {
                    for src in 0..self.height {
                        *weight += probs[(src * self.columns + w) * self.height + h] * inv;
                    }
                }
                out
            }
        }
    }

    /// Broadcasts a simplified map to the full layout (Ψ[h][w][j] =
    /// Ψ̂[w][j] for every source h).
    pub fn expand_simplified(&self) -> Result<TransitionMap> {
        let psi_hat = match &self.trans {
            Transitions::Simplified { probs, .. } => probs,
            Transitions::Full { .. } => return Err(CtcError::NotSimplified),
        };
        let mut full = Vec::with_capacity(self.height * self.columns * self.height);
        for _h in 0..self.height {
            full.extend_from_slice(psi_hat);
        }
        TransitionMap::full_from_linear(self.height, self.columns, full, Some(self.gamma.clone()))
    }
}

fn uniform_gamma(height: usize) -> (Vec<f64>, Vec<f64>) {
    let p = 1.0 / height as f64;
    (vec![p; height], vec![p.ln(); height])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_construction_rejects_bad_rows() {
        // One frame summing to 1.5.
        let err = ProbSeq1D::from_linear(2, 2, vec![0.5, 0.5, 0.75, 0.75]).unwrap_err();
        match err {
            CtcError::Normalization { location, sum, .. } => {
                assert_eq!(location, "frame 1");
                assert!((sum - 1.5).abs() < 1e-12);
            }
            other => panic!("unexpected error {other:?}"),
        }

        let err = ProbMap2D::from_linear(1, 2, 2, vec![0.5, 0.5, 0.9, 0.6]).unwrap_err();
        assert!(err.to_string().contains("(h=0, w=1)"));
    }

    #[test]
    fn gamma_violation_names_sum() {
        let err = TransitionMap::simplified_from_linear(2, 1, vec![0.5, 0.5], Some(vec![0.7, 0.7]))
            .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gamma"), "message: {msg}");
        assert!(msg.contains("1.4"), "message: {msg}");
    }

    #[test]
    fn uniform_maps_validate() {
        ProbMap2D::uniform(3, 4, 5).validate().unwrap();
        ProbSeq1D::uniform(4, 3).validate().unwrap();
        TransitionMap::uniform_simplified(3, 2).validate().unwrap();
    }

    #[test]
    fn renormalize_fixes_rows() {
        let seq = ProbSeq1D::from_linear(1, 2, vec![0.6, 0.6]);
        assert!(seq.is_err());
        let fixed = ProbSeq1D {
            width: 1,
            num_classes: 2,
            probs: vec![0.6, 0.6],
            log_probs: vec![0.6f64.ln(); 2],
        }
        .renormalized();
        assert!((fixed.prob(0, 0) - 0.5).abs() < 1e-15);
        fixed.validate().unwrap();
    }

    #[test]
    fn expand_simplified_broadcasts() {
        let m = TransitionMap::simplified_from_linear(2, 1, vec![0.3, 0.7], None).unwrap();
        let full = m.expand_simplified().unwrap();
        assert_eq!(full.kind(), TransitionKind::Full);
        for h in 0..2 {
            assert!((full.psi(h, 0, 0) - 0.3).abs() < 1e-15);
            assert!((full.psi(h, 0, 1) - 0.7).abs() < 1e-15);
        }
        // Uniform stays uniform.
        let u = TransitionMap::uniform_simplified(3, 2).expand_simplified().unwrap();
        for h in 0..3 {
            for w in 0..2 {
                for j in 0..3 {
                    assert!((u.psi(h, w, j) - 1.0 / 3.0).abs() < 1e-15);
                }
            }
        }
        assert!(u.expand_simplified().is_err());
    }

    #[test]
    fn collapse_mean_keeps_distributions() {
        let map = ProbMap2D::from_linear(
            2,
            1,
            2,
            vec![0.9, 0.1, 0.3, 0.7],
        )
        .unwrap();
        let seq = map.collapse_mean();
        assert!((seq.prob(0, 0) - 0.6).abs() < 1e-15);
        assert!((seq.prob(0, 1) - 0.4).abs() < 1e-15);
        seq.validate().unwrap();
    }

    #[test]
    fn from_logits_matches_softmax() {
        let seq = ProbSeq1D::from_logits(1, 2, &[0.0, 3.0f64.ln()]).unwrap();
        assert!((seq.prob(0, 0) - 0.25).abs() < 1e-15);
        assert!((seq.prob(0, 1) - 0.75).abs() < 1e-15);

        let t = TransitionMap::simplified_from_logits(2, 1, &[0.0, 0.0], Some(&[0.0, 0.0])).unwrap();
        assert!((t.psi_hat(0, 0) - 0.5).abs() < 1e-15);
        assert!((t.gamma(1) - 0.5).abs() < 1e-15);
    }
}
