use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tactile_cli::{
    cmd_budget, cmd_clear, cmd_show, cmd_text, cmd_verify, exit, CliError, Config, Outcome,
    Render, RunOpts, ShowInput, VerifyScope, CONFIG_ENV,
};
use tactile_core::circuit::GateLogic;
use tactile_core::Bitmap;

#[derive(Parser)]
#[command(name = "tactile", version, about = "Latching-solenoid tactile display simulator")]
struct Cli {
    /// Configuration file (section.key=value lines).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,

    /// Abort on the first addressing hazard (exit status 3).
    #[arg(long, global = true)]
    strict: bool,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct TraceArg {
    /// Write a tab-separated step trace to this file.
    #[arg(long, value_name = "OUT")]
    trace: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Display a PBM/PGM image, or a literal frame given as hex.
    Show {
        #[arg(required_unless_present = "frame", conflicts_with = "frame")]
        file: Option<PathBuf>,
        /// Canonical frame bytes in hex (rows of ceil(cols/8) bytes, MSB = column 0).
        #[arg(long)]
        frame: Option<String>,
        /// Raise pixels darker than T.
        #[arg(long, value_name = "T", conflicts_with = "dither")]
        threshold: Option<u8>,
        /// Use 4x4 ordered dithering.
        #[arg(long)]
        dither: bool,
        /// Raise light pixels instead of dark ones.
        #[arg(long)]
        invert: bool,
        #[command(flatten)]
        trace: TraceArg,
    },
    /// Display text as 6-dot Braille.
    Text {
        text: String,
        #[command(flatten)]
        trace: TraceArg,
    },
    /// Reset every taxel.
    Clear {
        #[command(flatten)]
        trace: TraceArg,
    },
    /// Check that shown frames are displayed exactly and cleared completely.
    Verify {
        /// Exhaustive check at this many rows (with --cols, at most 16 taxels).
        #[arg(long, requires = "cols", conflicts_with = "random")]
        rows: Option<usize>,
        #[arg(long, requires = "rows")]
        cols: Option<usize>,
        /// Show N random frames at the configured size instead.
        #[arg(long, value_name = "N")]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fault injection: replace the set-gate logic.
        #[arg(long, value_enum, hide = true)]
        mutant: Option<Mutant>,
        /// Run on a single thread.
        #[arg(long)]
        serial: bool,
    },
    /// Print the active-element budget of the addressing scheme.
    Budget,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mutant {
    AndSetGate,
}

fn report(outcome: &Outcome) -> u8 {
    print!("{}", outcome.stats);
    if outcome.truncated > 0 {
        println!("truncated={}", outcome.truncated);
    }
    println!("verified={}", outcome.verified);
    outcome.exit_code()
}

fn parse_frame(hex: &str, config: &Config) -> Result<Bitmap, CliError> {
    let bad = || CliError::Usage(format!("invalid frame hex {hex:?}"));
    let hex = hex.trim();
    if !hex.len().is_multiple_of(2) {
        return Err(bad());
    }
    let bytes = (0..hex.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(hex.get(i..i + 2).ok_or_else(bad)?, 16).map_err(|_| bad()))
        .collect::<Result<Vec<u8>, _>>()?;
    Bitmap::from_bytes(config.dims()?, &bytes).map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let mut config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    config.strict_hazards |= cli.strict;

    match cli.command {
        Cmd::Show {
            file,
            frame,
            threshold,
            dither,
            invert,
            trace,
        } => {
            let input = match (file, frame) {
                (_, Some(hex)) => ShowInput::Frame(parse_frame(&hex, &config)?),
                (Some(p), None) => ShowInput::Path(p),
                (None, None) => return Err(CliError::Usage("no input".into())),
            };
            let render = if dither {
                Render::Dither
            } else {
                Render::Threshold(threshold.unwrap_or(128))
            };
            let opts = RunOpts {
                trace: trace.trace,
                ..RunOpts::default()
            };
            Ok(report(&cmd_show(&config, input, render, invert, &opts)?))
        }
        Cmd::Text { text, trace } => {
            let opts = RunOpts {
                trace: trace.trace,
                ..RunOpts::default()
            };
            Ok(report(&cmd_text(&config, &text, &opts)?))
        }
        Cmd::Clear { trace } => {
            let opts = RunOpts {
                trace: trace.trace,
                ..RunOpts::default()
            };
            Ok(report(&cmd_clear(&config, &opts)?))
        }
        Cmd::Verify {
            rows,
            cols,
            random,
            seed,
            mutant,
            serial,
        } => {
            let scope = match (rows, cols, random) {
                (_, _, Some(count)) => VerifyScope::Random { count, seed },
                (Some(rows), Some(cols), None) => VerifyScope::Exhaustive { rows, cols },
                _ => VerifyScope::Exhaustive { rows: 4, cols: 4 },
            };
            let logic = match mutant {
                Some(Mutant::AndSetGate) => GateLogic::SetGateAnd,
                None => GateLogic::Reference,
            };
            let r = cmd_verify(&config, scope, logic, !serial)?;
            println!("checked={}", r.checked);
            println!("passed={}", r.checked - r.failures);
            println!("failed={}", r.failures);
            if let Some(c) = &r.first {
                print!("{c}");
            }
            Ok(if r.passed() { exit::OK } else { exit::VERIFY_FAILED })
        }
        Cmd::Budget => {
            let b = cmd_budget(&config)?;
            println!("{b}");
            println!("column_transistors={}", b.column_transistors);
            println!("row_transistors={}", b.row_transistors);
            println!("controller_pins={}", b.controller_pins);
            println!("naive_half_bridge={}", b.naive_half_bridge);
            println!("naive_full_bridge={}", b.naive_full_bridge);
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
