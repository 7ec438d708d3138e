//! Deterministic generator of toy "scene text" instances: H x W x F
//! feature grids with per-symbol evidence bumps placed along a straight,
//! slanted, or sinusoidal baseline, plus optional noise and off-baseline
//! clutter bumps that mimic background distractors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, Label};
use crate::error::{CtcError, Result};

/// Baseline shape of the planted text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    Flat,
    Slanted,
    Sinusoidal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    /// Alphabet size including the blank.
    pub num_classes: usize,
    pub curvature: Curvature,
    /// Standard deviation of the additive Gaussian feature noise.
    pub noise_sigma: f64,
    /// Per-column probability of a spurious single-column character bump
    /// away from the baseline.
    pub clutter_prob: f64,
    pub min_label_len: usize,
    pub max_label_len: usize,
}

impl SynthConfig {
    /// Symbol spans are at least this wide.
    pub const MIN_SPAN: usize = 3;
    const MAX_SPAN: usize = 4;
    /// Rows kept clear at the top and bottom.
    const MARGIN: usize = 1;

    pub fn validate(&self) -> Result<()> {
        if self.height < 2 * Self::MARGIN + 2 || self.width < Self::MIN_SPAN {
            return Err(CtcError::Empty { what: "synth grid" });
        }
        if self.num_classes < 2 {
            return Err(CtcError::Empty { what: "synth alphabet" });
        }
        if self.noise_sigma < 0.0 {
            return Err(CtcError::OutOfRange {
                what: "noise sigma",
                location: "config".into(),
                value: self.noise_sigma,
            });
        }
        if !(0.0..=1.0).contains(&self.clutter_prob) {
            return Err(CtcError::OutOfRange {
                what: "clutter probability",
                location: "config".into(),
                value: self.clutter_prob,
            });
        }
        if self.min_label_len < 1 || self.min_label_len > self.max_label_len {
            return Err(CtcError::Empty { what: "label length range" });
        }
        let capacity = self.capacity();
        if self.max_label_len > capacity {
            return Err(CtcError::LabelTooLong {
                label_len: self.max_label_len,
                capacity,
                width: self.width,
            });
        }
        Ok(())
    }

    /// Longest label whose spans and separating gaps fit the width,
    /// never more than half the width.
    pub fn capacity(&self) -> usize {
        // L spans of MIN_SPAN with L-1 single-column gaps.
        let fit = (self.width + 1) / (Self::MIN_SPAN + 1);
        fit.min(self.width / 2)
    }

    /// Feature channel count: one evidence channel per non-blank symbol
    /// plus one noise-only channel.
    pub fn feature_channels(&self) -> usize {
        self.num_classes
    }

    /// Sinusoidal amplitude in height cells, bounded by the margins.
    pub fn sinusoid_amplitude(&self) -> f64 {
        let mid = (self.height - 1) as f64 / 2.0;
        (0.28 * self.height as f64).min(mid - Self::MARGIN as f64)
    }

    /// Uppercase-letter alphabet matching `num_classes`.
    pub fn alphabet(&self) -> Alphabet {
        let symbols: String = (0..self.num_classes - 1)
            .map(|i| {
                if i < 26 {
                    (b'A' + i as u8) as char
                } else {
                    (b'0' + (i - 26) as u8) as char
                }
            })
            .collect();
        Alphabet::new(&symbols).expect("distinct synthetic symbols")
    }
}

/// One generated instance. `baseline` records the true per-column height
/// for diagnostics; training never reads it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthInstance {
    /// H x W x F, row-major.
    pub features: Vec<f64>,
    pub label: Label,
    pub baseline: Vec<usize>,
}

impl SynthInstance {
    #[inline]
    pub fn feature(&self, h: usize, w: usize, f: usize, width: usize, channels: usize) -> f64 {
        self.features[(h * width + w) * channels + f]
    }
}

/// Generates `count` instances. Each instance is a pure function of
/// `(config, index)`, so regeneration and parallel generation agree.
pub fn generate(config: &SynthConfig, count: usize) -> Result<Vec<SynthInstance>> {
    config.validate()?;
    (0..count).map(|i| generate_one(config, i)).collect()
}

/// Generates the `index`-th instance of the stream.
pub fn generate_one(config: &SynthConfig, index: usize) -> Result<SynthInstance> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index as u64 + 1);
    Ok(build_instance(config, &mut rng))
}

fn build_instance(config: &SynthConfig, rng: &mut ChaCha8Rng) -> SynthInstance {
    let (height, width) = (config.height, config.width);
    let channels = config.feature_channels();
    let margin = SynthConfig::MARGIN;

    let label_len = rng.gen_range(config.min_label_len..=config.max_label_len);
    let classes: Vec<usize> = (0..label_len)
        .map(|_| rng.gen_range(1..config.num_classes))
        .collect();
    let label = Label::new(classes.clone()).expect("non-blank classes");

    let spans = layout_spans(config, label_len, rng);
    let baseline = draw_baseline(config, rng);
    let mut features = vec![0.0; height * width * channels];
    let bump = |features: &mut Vec<f64>, h: i64, w: usize, channel: usize, amp: f64| {
        for (dh, scale) in [(-1i64, 0.6), (0, 1.0), (1, 0.6)] {
            let hh = h + dh;
            if hh >= 0 && (hh as usize) < height {
                features[((hh as usize) * width + w) * channels + channel] += amp * scale;
            }
        }
    };

    for (symbol, span) in classes.iter().zip(&spans) {
        for w in span.clone() {
            let amp = rng.gen_range(0.85..1.15);
            bump(&mut features, baseline[w] as i64, w, symbol - 1, amp);
        }
    }

    // Clutter: single-column distractor bumps sharing the text columns
    // but placed well off the baseline, with the same per-position
    // signature as real characters. Only the lack of horizontal
    // continuity tells them apart.
    for span in &spans {
        for w in span.clone() {
            if rng.gen_range(0.0..1.0) >= config.clutter_prob {
                continue;
            }
            let candidates: Vec<usize> = (margin..height - margin)
                .filter(|&h| (h as i64 - baseline[w] as i64).abs() >= 3)
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let h = candidates[rng.gen_range(0..candidates.len())];
            let class = rng.gen_range(1..config.num_classes);
            let amp = rng.gen_range(0.85..1.15);
            bump(&mut features, h as i64, w, class - 1, amp);
        }
    }

    if config.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, config.noise_sigma).expect("sigma >= 0");
        for v in &mut features {
            *v += normal.sample(rng);
        }
    }

    SynthInstance { features, label, baseline }
}

/// Disjoint left-to-right column spans, one per symbol, separated by at
/// least one evidence-free column (so repeats stay decodable). Slack
/// columns are sprinkled over spans, gaps, and margins.
fn layout_spans(
    config: &SynthConfig,
    label_len: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<std::ops::Range<usize>> {
    let mut span_widths = vec![SynthConfig::MIN_SPAN; label_len];
    // gaps[0] and gaps[label_len] are the outer margins (may be empty).
    let mut gaps = vec![0usize; label_len + 1];
    for gap in gaps.iter_mut().take(label_len).skip(1) {
        *gap = 1;
    }
    let used: usize = span_widths.iter().sum::<usize>() + gaps.iter().sum::<usize>();
    let mut slack = config.width - used;
    while slack > 0 {
        let slot = rng.gen_range(0..2 * label_len + 1);
        if slot < label_len {
            if span_widths[slot] < SynthConfig::MAX_SPAN {
                span_widths[slot] += 1;
                slack -= 1;
            } else if span_widths.iter().all(|&s| s == SynthConfig::MAX_SPAN) {
                // No span can grow; dump the rest into the trailing margin.
                gaps[label_len] += slack;
                slack = 0;
            }
        } else {
            gaps[slot - label_len] += 1;
            slack -= 1;
        }
    }

    let mut spans = Vec::with_capacity(label_len);
    let mut cursor = gaps[0];
    for (i, &sw) in span_widths.iter().enumerate() {
        spans.push(cursor..cursor + sw);
        cursor += sw + gaps[i + 1];
    }
    spans
}

fn draw_baseline(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let height = config.height as f64;
    let margin = SynthConfig::MARGIN as f64;
    let clamp = |v: f64| -> usize { (v.round().max(margin)).min(height - 1.0 - margin) as usize };
    match config.curvature {
        Curvature::Flat => {
            let h = rng.gen_range(SynthConfig::MARGIN..config.height - SynthConfig::MARGIN);
            vec![h; config.width]
        }
        Curvature::Slanted => {
            let start = rng.gen_range(margin..height - 1.0 - margin);
            let end = rng.gen_range(margin..height - 1.0 - margin);
            (0..config.width)
                .map(|w| {
                    let t = w as f64 / (config.width - 1).max(1) as f64;
                    clamp(start + (end - start) * t)
                })
                .collect()
        }
        Curvature::Sinusoidal => {
            let mid = (height - 1.0) / 2.0;
            let amplitude = config.sinusoid_amplitude();
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (0..config.width)
                .map(|w| {
                    let angle = std::f64::consts::TAU * w as f64 / config.width as f64 + phase;
                    clamp(mid + amplitude * angle.sin())
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config() -> SynthConfig {
        SynthConfig {
            seed: 1234,
            height: 10,
            width: 24,
            num_classes: 9,
            curvature: Curvature::Flat,
            noise_sigma: 0.0,
            clutter_prob: 0.0,
            min_label_len: 2,
            max_label_len: 4,
        }
    }

    #[test]
    fn deterministic_across_calls_and_indexing() {
        let config = SynthConfig { noise_sigma: 0.1, clutter_prob: 0.3, ..base_config() };
        let a = generate(&config, 8).unwrap();
        let b = generate(&config, 8).unwrap();
        assert_eq!(a, b);
        // Pure in (config, index): a lone instance matches its batch slot.
        let fifth = generate_one(&config, 5).unwrap();
        assert_eq!(a[5], fifth);
    }

    #[test]
    fn noiseless_instances_are_separable() {
        let config = base_config();
        let channels = config.feature_channels();
        for inst in generate(&config, 12).unwrap() {
            let mut in_span = 0;
            for w in 0..config.width {
                let h = inst.baseline[w];
                let mut top_channel = None;
                let mut top = 0.0;
                for f in 0..channels {
                    let v = inst.feature(h, w, f, config.width, channels);
                    if v > top {
                        top = v;
                        top_channel = Some(f);
                    }
                }
                if let Some(f) = top_channel {
                    in_span += 1;
                    // Strict dominance over every other class channel.
                    for other in 0..channels {
                        if other != f {
                            assert!(
                                inst.feature(h, w, other, config.width, channels) < top,
                                "class {other} not dominated at column {w}"
                            );
                        }
                    }
                }
            }
            // Spans cover at least MIN_SPAN columns per symbol.
            assert!(in_span >= SynthConfig::MIN_SPAN * inst.label.len());
        }
    }

    #[test]
    fn labels_fit_capacity_and_baselines_stay_in_bounds() {
        for curvature in [Curvature::Flat, Curvature::Slanted, Curvature::Sinusoidal] {
            let config = SynthConfig { curvature, ..base_config() };
            for inst in generate(&config, 10).unwrap() {
                assert!(inst.label.len() <= config.width / 2);
                assert!(inst.baseline.iter().all(|&h| h < config.height));
            }
        }
    }

    #[test]
    fn sinusoidal_baseline_varies() {
        let config = SynthConfig {
            height: 8,
            curvature: Curvature::Sinusoidal,
            ..base_config()
        };
        // The configured amplitude alone guarantees a swing of at least
        // two cells once a full period is sampled.
        assert!(config.sinusoid_amplitude() >= 1.0);
        for inst in generate(&config, 10).unwrap() {
            let max = *inst.baseline.iter().max().unwrap();
            let min = *inst.baseline.iter().min().unwrap();
            assert!(max - min >= 2, "flat-looking sinusoid: {:?}", inst.baseline);
        }
    }

    #[test]
    fn oversized_labels_are_rejected() {
        let config = SynthConfig { max_label_len: 12, ..base_config() };
        match generate(&config, 1) {
            Err(CtcError::LabelTooLong { capacity, .. }) => {
                assert!(capacity < 12);
            }
            other => panic!("expected LabelTooLong, got {other:?}"),
        }
    }

    #[test]
    fn clutter_bumps_sit_well_off_the_baseline() {
        let config = SynthConfig { clutter_prob: 0.5, ..base_config() };
        let channels = config.feature_channels();
        let mut clutter_columns = 0;
        for inst in generate(&config, 20).unwrap() {
            for w in 0..config.width {
                for h in 0..config.height {
                    let distance = (h as i64 - inst.baseline[w] as i64).abs();
                    let evidence: f64 = (0..channels - 1)
                        .map(|f| inst.feature(h, w, f, config.width, channels))
                        .sum();
                    if evidence > 0.0 && distance >= 2 {
                        clutter_columns += 1;
                        assert!(distance >= 2, "clutter too close at ({h},{w})");
                    }
                }
            }
        }
        assert!(clutter_columns > 0, "clutter probability 0.5 produced none");
    }
}
