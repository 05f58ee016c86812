//! Experiment CLI: every subcommand is a thin wrapper over
//! `desklearn::experiments`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use desklearn::experiments::{
    calc_anchors, run_bpe_decode, run_bpe_encode, run_bpe_train, run_calc, run_char_gpt,
    run_ddpm2d, run_hopfield, run_kmeans, run_vae2d, run_xor, CalcRequest, CharGptOptions,
    Ddpm2dOptions, DiffusionDataset, ExperimentConfig, ExperimentRun, HopfieldOptions,
    KMeansOptions, Vae2dOptions, XorOptions,
};

#[derive(Parser)]
#[command(name = "desklearn", about = "Desk-scale deep-learning experiments and calculators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Seed for every stochastic component of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Directory for metrics.csv / summary.json (and per-experiment files).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the summary as JSON instead of aligned text.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Train linear-only and tanh-MLP models on XOR.
    Xor {
        #[arg(long, default_value_t = 2000)]
        steps: usize,
    },
    /// Train a character-level GPT on a text corpus.
    CharGpt {
        /// UTF-8 text file, at least 1 KiB.
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 64)]
        d_model: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        #[arg(long, default_value_t = 4)]
        heads: usize,
        #[arg(long, default_value_t = 32)]
        context: usize,
    },
    /// Train a 2-D VAE on a toy mixture.
    Vae2d {
        #[arg(long, default_value_t = 20)]
        epochs: usize,
    },
    /// Train a 2-D diffusion model and sample from it.
    Ddpm2d {
        /// Training distribution: "origin" (point mass) or "moons".
        #[arg(long, default_value = "origin")]
        dataset: String,
        #[arg(long, default_value_t = 1200)]
        steps: usize,
    },
    /// Cluster CSV points (default: the built-in 4-point line).
    Kmeans {
        #[arg(long)]
        points: Option<PathBuf>,
        #[arg(long, default_value_t = 2)]
        k: usize,
    },
    /// Hopfield pattern storage and corrupted-recall experiment.
    Hopfield {
        #[arg(long, default_value_t = 100)]
        neurons: usize,
        #[arg(long, default_value_t = 10)]
        patterns: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Byte-pair-encoding tokenizer.
    Bpe {
        #[command(subcommand)]
        action: BpeAction,
    },
    /// Scaling and compression calculators.
    Calc {
        #[command(subcommand)]
        what: CalcCommand,
    },
}

#[derive(Subcommand)]
enum BpeAction {
    /// Learn merge rules from a corpus (default: the three-word corpus).
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        merges: usize,
        /// Where to save the merge table.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Tokenize text with a saved merge table.
    Encode {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        text: String,
    },
    /// Reassemble text from whitespace-separated tokens.
    Decode {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        tokens: String,
    },
}

#[derive(Subcommand)]
enum CalcCommand {
    /// Dense or convolutional parameter counts.
    Params {
        #[arg(long)]
        inputs: Option<u64>,
        #[arg(long)]
        hidden: Option<u64>,
        #[arg(long)]
        in_channels: Option<u64>,
        #[arg(long)]
        out_channels: Option<u64>,
        #[arg(long)]
        kernel: Option<u64>,
        #[arg(long)]
        separable: bool,
    },
    /// Compound scaling of (depth, width, resolution).
    Scaling {
        #[arg(long, default_value_t = 1.0)]
        phi: f64,
        #[arg(long, default_value_t = 1.2)]
        alpha: f64,
        #[arg(long, default_value_t = 1.1)]
        beta: f64,
        #[arg(long, default_value_t = 1.15)]
        gamma: f64,
        #[arg(long, default_value_t = 16)]
        depth: u64,
        #[arg(long, default_value_t = 32)]
        width: u64,
        #[arg(long, default_value_t = 224)]
        resolution: u64,
    },
    /// Gradient attenuation alpha^layers.
    Vanishing {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        layers: u32,
    },
    /// Compute-optimal token budget.
    Chinchilla {
        #[arg(long)]
        params: f64,
        #[arg(long, default_value_t = 20.0)]
        ratio: f64,
    },
    /// Integer quantization mapping.
    Quant {
        #[arg(long, default_value_t = 8)]
        bits: u32,
        /// Calibrate symmetrically from max |x| instead of [min, max].
        #[arg(long)]
        symmetric: bool,
        #[arg(long, allow_hyphen_values = true, default_value_t = -2.5)]
        min: f64,
        #[arg(long, default_value_t = 2.5)]
        max: f64,
        #[arg(long, default_value_t = 2.5)]
        max_abs: f64,
    },
    /// All pinned calculator values at once.
    Anchors,
}

fn print_run(run: &ExperimentRun, json: bool) {
    if json {
        println!("{}", run.summary_json());
    } else {
        let width = run.summary().keys().map(String::len).max().unwrap_or(0);
        for (k, v) in run.summary() {
            println!("{k:width$}  {v}");
        }
    }
}

fn dispatch(cli: Cli) -> desklearn::Result<ExperimentRun> {
    let name = match &cli.command {
        Command::Xor { .. } => "xor",
        Command::CharGpt { .. } => "char-gpt",
        Command::Vae2d { .. } => "vae2d",
        Command::Ddpm2d { .. } => "ddpm2d",
        Command::Kmeans { .. } => "kmeans",
        Command::Hopfield { .. } => "hopfield",
        Command::Bpe { .. } => "bpe",
        Command::Calc { .. } => "calc",
    };
    let mut config = ExperimentConfig::new(name, cli.common.seed);
    config.out_dir = cli.common.out.clone();

    match cli.command {
        Command::Xor { steps } => run_xor(&config, &XorOptions { steps, ..Default::default() }),
        Command::CharGpt { corpus, steps, d_model, layers, heads, context } => run_char_gpt(
            &config,
            &corpus,
            &CharGptOptions {
                steps,
                d_model,
                n_layers: layers,
                n_heads: heads,
                context,
                ..Default::default()
            },
        ),
        Command::Vae2d { epochs } => {
            run_vae2d(&config, &Vae2dOptions { epochs, ..Default::default() })
        }
        Command::Ddpm2d { dataset, steps } => {
            let dataset = match dataset.as_str() {
                "origin" => DiffusionDataset::Origin,
                "moons" => DiffusionDataset::Moons,
                other => {
                    return Err(desklearn::Error::invalid_argument(format!(
                        "unknown dataset {other:?} (expected origin or moons)"
                    )))
                }
            };
            run_ddpm2d(&config, &Ddpm2dOptions { dataset, steps, ..Default::default() })
        }
        Command::Kmeans { points, k } => {
            run_kmeans(&config, points.as_deref(), &KMeansOptions { k, ..Default::default() })
        }
        Command::Hopfield { neurons, patterns, trials } => run_hopfield(
            &config,
            &HopfieldOptions { neurons, patterns, trials, ..Default::default() },
        ),
        Command::Bpe { action } => match action {
            BpeAction::Train { corpus, merges, table } => {
                run_bpe_train(&config, corpus.as_deref(), merges, table.as_deref())
            }
            BpeAction::Encode { table, text } => run_bpe_encode(&config, &table, &text),
            BpeAction::Decode { table, tokens } => run_bpe_decode(&config, &table, &tokens),
        },
        Command::Calc { what } => {
            let request = match what {
                CalcCommand::Params {
                    inputs,
                    hidden,
                    in_channels,
                    out_channels,
                    kernel,
                    separable,
                } => match (inputs, hidden, in_channels, out_channels, kernel) {
                    (Some(i), Some(h), None, None, None) => {
                        CalcRequest::MlpParams { inputs: i, hidden: h }
                    }
                    (None, None, Some(m), Some(n), Some(k)) => CalcRequest::ConvParams {
                        in_channels: m,
                        out_channels: n,
                        kernel: k,
                        separable,
                    },
                    _ => {
                        return Err(desklearn::Error::invalid_argument(
                            "pass either --inputs with --hidden, or --in-channels, --out-channels, and --kernel",
                        ))
                    }
                },
                CalcCommand::Scaling { phi, alpha, beta, gamma, depth, width, resolution } => {
                    CalcRequest::Scaling { depth, width, resolution, alpha, beta, gamma, phi }
                }
                CalcCommand::Vanishing { alpha, layers } => {
                    CalcRequest::Vanishing { alpha, layers }
                }
                CalcCommand::Chinchilla { params, ratio } => {
                    CalcRequest::Chinchilla { params, tokens_per_param: ratio }
                }
                CalcCommand::Quant { bits, symmetric, min, max, max_abs } => {
                    if symmetric {
                        CalcRequest::QuantSymmetric { bits, max_abs }
                    } else {
                        CalcRequest::QuantAffine { bits, min, max }
                    }
                }
                CalcCommand::Anchors => {
                    let run = calc_anchors()?;
                    return run.finish(&config);
                }
            };
            run_calc(&config, &request)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let json = cli.common.json;
    match dispatch(cli) {
        Ok(run) => {
            print_run(&run, json);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
