//! Alignment-free sequence losses over 1D and 2D probability
//! distributions.
//!
//! The crate implements the classic CTC loss (per-frame class
//! distributions, the `α` dynamic program) and its two-dimensional
//! extension, where class distributions live on an `H x W` grid and a
//! path-transition map `Ψ` (with initial height distribution `Γ`)
//! weights the vertical movement of the decoding path. Forward
//! probabilities, losses, and logit gradients are exact and computed in
//! log domain; brute-force enumeration oracles, greedy/beam decoders, a
//! synthetic curved-text generator, and a small training demo round out
//! the toolkit.

pub mod alphabet;
pub mod ctc2d;
pub mod decode;
pub mod error;
pub mod numeric;
pub mod oracle;
pub mod prob;
pub mod sampling;
pub mod synth;
pub mod train;
pub mod vanilla;

pub mod io;

#[cfg(test)]
pub(crate) mod testutil;

pub use alphabet::{Alphabet, ExpandedLabel, Label, BLANK};
pub use ctc2d::{ctc2d_batch_loss, ctc2d_forward, ctc2d_grad, ctc2d_loss, BetaTable, Ctc2dGradients};
pub use decode::{
    beam_decode_1d, beam_decode_2d, collapse, greedy_decode_1d, greedy_decode_2d, DecodeResult,
    PathChoice,
};
pub use error::{CtcError, Result};
pub use prob::{ProbMap2D, ProbSeq1D, TransitionKind, TransitionMap, NORM_TOL};
pub use vanilla::{
    ctc_batch_loss, ctc_forward, ctc_grad, ctc_grad_log_probs, ctc_loss, AlphaTable, BatchLoss,
    BatchMode, LossValue,
};
