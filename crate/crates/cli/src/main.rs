//! `ctc2d`: loss evaluation, decoding, the synthetic training demo, and
//! probability-map visualization over the library's tensor file formats.
//!
//! Exit codes: 0 success, 1 malformed input, 2 infeasible label in
//! strict mode.

mod format;
mod tensors;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ctc2d::io::{self, Tensor};
use ctc2d::train::{run_demo, DemoConfig};
use ctc2d::{
    beam_decode_1d, beam_decode_2d, ctc2d_grad, ctc2d_loss, ctc_grad, ctc_loss, greedy_decode_1d,
    greedy_decode_2d, Alphabet, CtcError, DecodeResult,
};

use crate::format::sig12;
use crate::tensors::{load_inputs, CliFailure, Inputs};

#[derive(Parser)]
#[command(name = "ctc2d", version, about)]
struct Cli {
    /// Size of the internal thread pool (defaults to the logical CPU count).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a loss (and optionally its gradients) on tensor files.
    Loss(LossArgs),
    /// Decode tensor files greedily or with a prefix beam search.
    Decode(DecodeArgs),
    /// Run the synthetic-data training comparison end to end.
    Demo(DemoArgs),
    /// Export probability and transition maps as PGM images.
    Visualize(VisualizeArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LossFlavor {
    Vanilla,
    #[value(name = "2d")]
    TwoDim,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Variant {
    Full,
    Simplified,
}

#[derive(Args)]
struct InputArgs {
    /// Class probabilities: rank 2 `[T, C]` or rank 3 `[H, W, C]`.
    #[arg(long)]
    probs: PathBuf,
    /// Path transitions: rank 2 `[W-1, H]` (simplified) or rank 3
    /// `[H, W-1, H]` (full).
    #[arg(long)]
    transitions: Option<PathBuf>,
    /// Initial height distribution, rank 1 `[H]` (default uniform).
    #[arg(long)]
    gamma: Option<PathBuf>,
    /// Non-blank symbols in class order; the blank is class 0.
    #[arg(long)]
    alphabet: String,
    /// How to read the transition input (a simplified map may be
    /// expanded to the full layout).
    #[arg(long, value_enum, default_value_t = Variant::Simplified)]
    variant: Variant,
}

#[derive(Args)]
struct LossArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Target label, written in the alphabet's symbols.
    #[arg(long)]
    label: String,
    #[arg(long = "loss", value_enum)]
    flavor: LossFlavor,
    /// Report an infeasible label as `loss=inf` instead of exit code 2.
    #[arg(long)]
    permissive: bool,
    /// Write gradient tensors with this path prefix.
    #[arg(long)]
    grad_out: Option<PathBuf>,
}

#[derive(Args)]
struct DecodeArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Greedy decoding (the default).
    #[arg(long, conflicts_with = "beam")]
    greedy: bool,
    /// Prefix beam search with this width.
    #[arg(long)]
    beam: Option<usize>,
}

#[derive(Args)]
struct DemoArgs {
    /// Demo configuration (JSON); the bundled default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report output path (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Override the configured epoch count.
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Args)]
struct VisualizeArgs {
    /// Class probabilities, rank 3 `[H, W, C]`.
    #[arg(long)]
    probs: PathBuf,
    /// Simplified transitions, rank 2 `[W-1, H]`.
    #[arg(long)]
    transitions: Option<PathBuf>,
    /// Output path prefix.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    let outcome = match cli.command {
        Command::Loss(args) => run_loss(args),
        Command::Decode(args) => run_decode(args),
        Command::Demo(args) => run_demo_command(args),
        Command::Visualize(args) => run_visualize(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn parse_label(alphabet: &Alphabet, text: &str) -> Result<ctc2d::Label, CliFailure> {
    alphabet.label_from_str(text).map_err(CliFailure::from)
}

fn run_loss(args: LossArgs) -> Result<(), CliFailure> {
    let alphabet = Alphabet::new(&args.input.alphabet)?;
    let inputs = load_inputs(&args.input, alphabet.size())?;
    let label = parse_label(&alphabet, &args.label)?;

    let loss = match (args.flavor, &inputs) {
        (LossFlavor::Vanilla, Inputs::Sequence(seq)) => ctc_loss(seq, &label)?,
        (LossFlavor::TwoDim, Inputs::Map { map, psi }) => ctc2d_loss(map, psi, &label)?,
        (LossFlavor::Vanilla, Inputs::Map { .. }) => {
            return Err(CliFailure::bad_input(
                "--loss vanilla expects a rank-2 probability tensor",
            ))
        }
        (LossFlavor::TwoDim, Inputs::Sequence(_)) => {
            return Err(CliFailure::bad_input(
                "--loss 2d expects a rank-3 probability tensor (and transitions)",
            ))
        }
    };

    if !loss.is_feasible() && !args.permissive {
        return Err(CliFailure {
            code: 2,
            message: CtcError::Infeasible {
                min_width: label.min_width(),
                available: inputs.width(),
            }
            .to_string(),
        });
    }
    println!("loss={}", sig12(loss.value()));

    if let Some(prefix) = &args.grad_out {
        write_gradients(prefix, &args, &inputs, &label)?;
    }
    Ok(())
}

fn write_gradients(
    prefix: &std::path::Path,
    args: &LossArgs,
    inputs: &Inputs,
    label: &ctc2d::Label,
) -> Result<(), CliFailure> {
    let named = |suffix: &str| {
        let mut name = prefix.as_os_str().to_owned();
        name.push(suffix);
        PathBuf::from(name)
    };
    match (args.flavor, inputs) {
        (LossFlavor::Vanilla, Inputs::Sequence(seq)) => {
            let (_, grad) = ctc_grad(seq, label)?;
            Tensor::from_f64(vec![seq.width(), seq.num_classes()], &grad)?
                .write(&named("_frame_grad.ct2t"))?;
        }
        (LossFlavor::TwoDim, Inputs::Map { map, psi }) => {
            let grads = ctc2d_grad(map, psi, label, true)?;
            Tensor::from_f64(
                vec![map.height(), map.width(), map.num_classes()],
                &grads.class_logits,
            )?
            .write(&named("_class_grad.ct2t"))?;
            let t_dims = match psi.kind() {
                ctc2d::TransitionKind::Simplified => vec![psi.columns(), psi.height()],
                ctc2d::TransitionKind::Full => {
                    vec![psi.height(), psi.columns(), psi.height()]
                }
            };
            Tensor::from_f64(t_dims, &grads.transition_logits)?
                .write(&named("_transition_grad.ct2t"))?;
            if let Some(gamma) = &grads.gamma_logits {
                Tensor::from_f64(vec![psi.height()], gamma)?
                    .write(&named("_gamma_grad.ct2t"))?;
            }
        }
        _ => unreachable!("flavor/shape mismatch caught earlier"),
    }
    Ok(())
}

fn run_decode(args: DecodeArgs) -> Result<(), CliFailure> {
    let alphabet = Alphabet::new(&args.input.alphabet)?;
    let inputs = load_inputs(&args.input, alphabet.size())?;

    let results: Vec<DecodeResult> = match (&inputs, args.beam) {
        (Inputs::Sequence(seq), None) => vec![greedy_decode_1d(seq)],
        (Inputs::Map { map, psi }, None) => vec![greedy_decode_2d(map, psi)?],
        (Inputs::Sequence(seq), Some(width)) => beam_decode_1d(seq, width)?,
        (Inputs::Map { map, psi }, Some(width)) => beam_decode_2d(map, psi, width)?,
    };

    for (rank, result) in results.iter().enumerate() {
        let key = if rank == 0 { "label" } else { "alt" };
        println!(
            "{key}={} score={}",
            alphabet.label_to_string(&result.label),
            sig12(result.score)
        );
    }
    Ok(())
}

fn run_demo_command(args: DemoArgs) -> Result<(), CliFailure> {
    let mut config: DemoConfig = match &args.config {
        Some(path) => io::read_json_file(path)?,
        None => DemoConfig::bundled_default(),
    };
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    let report = run_demo(&config)?;
    io::write_json_file(&args.out, &report)?;
    for (name, part) in [("vanilla", &report.vanilla), ("2d", &report.two_dim)] {
        println!(
            "{name} exact_match={} edit_distance={} loss={}",
            sig12(part.final_eval.exact_match),
            sig12(part.final_eval.mean_edit_distance),
            sig12(part.final_eval.mean_loss),
        );
    }
    Ok(())
}

fn run_visualize(args: VisualizeArgs) -> Result<(), CliFailure> {
    let probs = Tensor::read(&args.probs)?;
    if probs.rank() != 3 {
        return Err(CliFailure::bad_input(
            "visualize expects a rank-3 [H, W, C] probability tensor",
        ));
    }
    let (height, width, classes) = (probs.dims()[0], probs.dims()[1], probs.dims()[2]);
    let data = probs.data_f64();

    let named = |suffix: &str| {
        let mut name = args.out.as_os_str().to_owned();
        name.push(suffix);
        PathBuf::from(name)
    };

    for c in 0..classes {
        let mut pixels = Vec::with_capacity(height * width);
        for h in 0..height {
            for w in 0..width {
                pixels.push(io::quantize_prob(data[(h * width + w) * classes + c]));
            }
        }
        let image = io::encode_pgm(width, height, &pixels);
        std::fs::write(named(&format!("_class{c}.pgm")), image).map_err(io::IoError::Io)?;
    }

    let transitions = match &args.transitions {
        Some(path) => {
            let t = Tensor::read(path)?;
            if t.rank() != 2 {
                return Err(CliFailure::bad_input(
                    "visualize expects rank-2 [W-1, H] transitions",
                ));
            }
            let (cols, t_height) = (t.dims()[0], t.dims()[1]);
            let values = t.data_f64();
            let mut pixels = Vec::with_capacity(t_height * cols);
            for h in 0..t_height {
                for w in 0..cols {
                    pixels.push(io::quantize_prob(values[w * t_height + h]));
                }
            }
            let image = io::encode_pgm(cols, t_height, &pixels);
            std::fs::write(named("_transition.pgm"), image).map_err(io::IoError::Io)?;
            Some(t)
        }
        None => None,
    };

    // Full-precision sidecar: the tensors in their JSON text form.
    let mut sidecar = Vec::new();
    sidecar.extend_from_slice(b"{\"probs\":");
    probs.write_json(&mut sidecar)?;
    if let Some(t) = &transitions {
        sidecar.extend_from_slice(b",\"transition\":");
        t.write_json(&mut sidecar)?;
    }
    sidecar.extend_from_slice(b"}");
    std::fs::write(named("_values.json"), sidecar).map_err(io::IoError::Io)?;
    Ok(())
}
