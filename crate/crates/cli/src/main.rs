use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hke_core::EnvelopeVariant;
use hke_lab::config::parse_list;
use hke_lab::{commands, CliError, CliResult, FileConfig, Output, Overrides, Settings};

#[derive(Parser)]
#[command(name = "hke-lab", version, about = "Heat kernel envelopes and Monte Carlo checks for jump processes")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Catalog kernel such as stable:1.5, loginf:2 or piecewise:1.5,2.5@1, or `degenerate`.
    #[arg(long, global = true)]
    kernel: Option<String>,
    /// JSON file with optional fields kernel, d, envelope_params, sim and verify.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "hke-out")]
    out_dir: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    paths: Option<usize>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Verification preset.
    #[arg(long, global = true, default_value = "all")]
    preset: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Auto,
    K,
    KInf,
}

#[derive(Subcommand)]
enum Command {
    /// Integrability, scaling indices, comparability and calculus checks.
    Analyze {
        #[arg(long, default_value_t = 1e-4)]
        r_min: f64,
        #[arg(long, default_value_t = 1e4)]
        r_max: f64,
    },
    /// Envelope table over a t × r grid.
    Envelope {
        #[arg(long, default_value = "0.5,1,2")]
        t: String,
        #[arg(long, default_value = "0,0.5,1,2,4,8")]
        r: String,
        #[arg(long, value_enum, default_value = "auto")]
        variant: Variant,
    },
    /// Simulate paths and write checkpoint, tail and exit tables.
    Simulate {
        /// Radii for the tail fractions P(|X_t| > r).
        #[arg(long, default_value = "1,2,4,8")]
        tail_radii: String,
    },
    /// Run the acceptance criteria of a preset.
    Verify,
    /// Median trace of the LIL statistic at t = 2^k.
    Lil {
        #[arg(long, default_value_t = 20)]
        k_max: i32,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    let c = &cli.common;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot set thread count: {e}")))?;
    }
    let file = match &c.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let flags = Overrides { kernel: c.kernel.clone(), seed: c.seed, paths: c.paths };
    let settings = Settings::resolve(file, &flags)?;
    let out = Output::new(&c.out_dir)?;
    let report = match cli.command {
        Command::Analyze { r_min, r_max } => commands::analyze(&settings, (r_min, r_max), out)?,
        Command::Envelope { t, r, variant } => {
            let variant = match variant {
                Variant::Auto => EnvelopeVariant::Auto,
                Variant::K => EnvelopeVariant::K,
                Variant::KInf => EnvelopeVariant::KInf,
            };
            commands::envelope(&settings, &parse_list(&t)?, &parse_list(&r)?, variant, out)?
        }
        Command::Simulate { tail_radii } => commands::simulate(&settings, &parse_list(&tail_radii)?, out)?,
        Command::Verify => commands::verify(&settings, &c.preset, out)?.0,
        Command::Lil { k_max } => commands::lil(&settings, k_max, c.paths.unwrap_or(200), out)?,
    };
    println!("wrote {} to {}", report.files.join(", "), c.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hke-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
