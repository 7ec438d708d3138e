//! Mapping tensor files onto the library's probability types, plus the
//! exit-code classification of failures.

use ctc2d::io::{IoError, Tensor};
use ctc2d::{CtcError, ProbMap2D, ProbSeq1D, TransitionMap};

use crate::{InputArgs, Variant};

pub struct CliFailure {
    /// 1 for malformed input, 2 for infeasible labels in strict mode.
    pub code: u8,
    pub message: String,
}

impl CliFailure {
    pub fn bad_input(message: impl Into<String>) -> Self {
        Self { code: 1, message: message.into() }
    }
}

impl From<CtcError> for CliFailure {
    fn from(err: CtcError) -> Self {
        let code = match err {
            CtcError::Infeasible { .. } | CtcError::InfeasibleGradient { .. } => 2,
            _ => 1,
        };
        Self { code, message: err.to_string() }
    }
}

impl From<IoError> for CliFailure {
    fn from(err: IoError) -> Self {
        match err {
            IoError::Domain(inner) => inner.into(),
            other => Self { code: 1, message: other.to_string() },
        }
    }
}

/// Parsed and validated inputs: a 1D sequence, or a 2D map with its
/// transition map.
pub enum Inputs {
    Sequence(ProbSeq1D),
    Map { map: ProbMap2D, psi: TransitionMap },
}

impl Inputs {
    pub fn width(&self) -> usize {
        match self {
            Inputs::Sequence(seq) => seq.width(),
            Inputs::Map { map, .. } => map.width(),
        }
    }
}

pub fn load_inputs(args: &InputArgs, num_classes: usize) -> Result<Inputs, CliFailure> {
    let probs = Tensor::read(&args.probs)?;
    match probs.rank() {
        2 => {
            let (width, classes) = (probs.dims()[0], probs.dims()[1]);
            check_classes(classes, num_classes)?;
            if args.transitions.is_some() || args.gamma.is_some() {
                return Err(CliFailure::bad_input(
                    "transition/gamma inputs apply only to rank-3 probability maps",
                ));
            }
            let seq = ProbSeq1D::from_linear(width, classes, probs.data_f64())?;
            Ok(Inputs::Sequence(seq))
        }
        3 => {
            let (height, width, classes) =
                (probs.dims()[0], probs.dims()[1], probs.dims()[2]);
            check_classes(classes, num_classes)?;
            let map = ProbMap2D::from_linear(height, width, classes, probs.data_f64())?;
            let psi = load_transitions(args, height, width)?;
            Ok(Inputs::Map { map, psi })
        }
        rank => Err(CliFailure::bad_input(format!(
            "probability tensor must have rank 2 or 3, got {rank}"
        ))),
    }
}

fn check_classes(classes: usize, alphabet_size: usize) -> Result<(), CliFailure> {
    if classes != alphabet_size {
        return Err(CliFailure::bad_input(format!(
            "tensor has {classes} classes but the alphabet (with blank) has {alphabet_size}"
        )));
    }
    Ok(())
}

fn load_transitions(
    args: &InputArgs,
    height: usize,
    width: usize,
) -> Result<TransitionMap, CliFailure> {
    let gamma = match &args.gamma {
        Some(path) => {
            let g = Tensor::read(path)?;
            if g.rank() != 1 || g.dims()[0] != height {
                return Err(CliFailure::bad_input(format!(
                    "gamma must be rank 1 with {height} entries"
                )));
            }
            Some(g.data_f64())
        }
        None => None,
    };

    let map = match &args.transitions {
        None => {
            // No transitions: uniform, with the requested gamma.
            let uniform = TransitionMap::uniform_simplified(height, width - 1);
            match gamma {
                Some(g) => TransitionMap::simplified_from_linear(
                    height,
                    width - 1,
                    (0..(width - 1) * height)
                        .map(|i| uniform.psi_hat(i / height, i % height))
                        .collect(),
                    Some(g),
                )?,
                None => uniform,
            }
        }
        Some(path) => {
            let t = Tensor::read(path)?;
            match t.rank() {
                2 => {
                    let (cols, t_height) = (t.dims()[0], t.dims()[1]);
                    expect_shape(cols, t_height, height, width)?;
                    let simplified = TransitionMap::simplified_from_linear(
                        height,
                        cols,
                        t.data_f64(),
                        gamma,
                    )?;
                    match args.variant {
                        Variant::Simplified => simplified,
                        Variant::Full => simplified.expand_simplified()?,
                    }
                }
                3 => {
                    if args.variant == Variant::Simplified {
                        return Err(CliFailure::bad_input(
                            "--variant simplified cannot read a rank-3 (full) transition tensor",
                        ));
                    }
                    let (src, cols, dst) = (t.dims()[0], t.dims()[1], t.dims()[2]);
                    if src != height || dst != height {
                        return Err(CliFailure::bad_input(format!(
                            "full transitions must be [{height}, {}, {height}]",
                            width - 1
                        )));
                    }
                    expect_shape(cols, dst, height, width)?;
                    TransitionMap::full_from_linear(height, cols, t.data_f64(), gamma)?
                }
                rank => {
                    return Err(CliFailure::bad_input(format!(
                        "transition tensor must have rank 2 or 3, got {rank}"
                    )))
                }
            }
        }
    };
    Ok(map)
}

fn expect_shape(
    cols: usize,
    t_height: usize,
    height: usize,
    width: usize,
) -> Result<(), CliFailure> {
    if t_height != height || cols != width - 1 {
        return Err(CliFailure::bad_input(format!(
            "transitions must cover {} columns at height {height}, got {cols} at {t_height}",
            width - 1
        )));
    }
    Ok(())
}
