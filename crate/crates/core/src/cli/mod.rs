//! Command-line front end.

pub mod commands;
pub mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
pub use commands::{CompareRow, Engine, Method, PriceRow, SurfaceRow};
pub use config::{RunConfig, Setting};

pub const DEFAULT_STRIKES: [f64; 9] = [80.0, 85.0, 90.0, 95.0, 100.0, 105.0, 110.0, 115.0, 120.0];
pub const DEFAULT_MATURITIES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 3.0];
pub const DEFAULT_SPOTS: [f64; 9] = DEFAULT_STRIKES;

#[derive(Debug, Parser)]
#[command(name = "bates", version, about = "European call pricing under the Bates model")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// INI file with [model] [market] [grid] [solver] [mc] [fft] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parameter preset S1..S4; explicit model keys override it.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Override any key, e.g. `--set grid.nx=128`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    pub set: Vec<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub rate: Option<String>,
    /// Initial variance, or `eta` for the long-run level.
    #[arg(long, global = true)]
    pub y0: Option<String>,
    #[arg(long, global = true)]
    pub s0: Option<String>,
    #[arg(long, global = true)]
    pub strike: Option<String>,
    #[arg(long, global = true)]
    pub maturity: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<String>,
    /// Write CSV output here instead of stdout.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the configuration and print it fully resolved.
    Validate,
    /// Price one call.
    Price {
        #[arg(long, value_enum, default_value = "fem")]
        method: MethodArg,
    },
    /// Implied-volatility surface over strikes and maturities.
    Surface {
        #[arg(long, value_enum, default_value = "fft")]
        engine: EngineArg,
        #[arg(long, value_delimiter = ',')]
        strikes: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        maturities: Option<Vec<f64>>,
    },
    /// FEM against FFT over a range of spots, from one FEM solve.
    Compare {
        #[arg(long, value_delimiter = ',')]
        spots: Option<Vec<f64>>,
    },
    /// Mesh and operator statistics.
    MeshInfo {
        #[arg(long)]
        export_mesh: Option<PathBuf>,
        /// Directory for the assembled matrices in coordinate text format.
        #[arg(long)]
        export_matrices: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Fem,
    Fft,
    Mc,
    Merton,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EngineArg {
    Fft,
    Fem,
}

impl CommonArgs {
    /// Settings from the file followed by the flags, in override order.
    pub fn settings(&self) -> Result<Vec<Setting>> {
        let mut out = match &self.config {
            Some(path) => config::read_settings(path)?,
            None => Vec::new(),
        };
        if let Some(p) = &self.preset {
            out.push(Setting::new("model", "preset", p, "command line"));
        }
        for s in &self.set {
            out.push(Setting::parse_flag(s)?);
        }
        let shortcuts = [
            ("market", "rate", &self.rate),
            ("market", "y0", &self.y0),
            ("market", "s0", &self.s0),
            ("market", "strike", &self.strike),
            ("market", "maturity", &self.maturity),
            ("mc", "seed", &self.seed),
        ];
        for (section, key, value) in shortcuts {
            if let Some(v) = value {
                out.push(Setting::new(section, key, v, "command line"));
            }
        }
        Ok(out)
    }

    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::resolve(&self.settings()?)?;
        cfg.output = self.output.clone();
        Ok(cfg)
    }
}

/// Runs one command, writing results to `stdout` unless an output file is set.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let cfg = cli.common.resolve()?;
    let mut file;
    let out: &mut dyn Write = match &cfg.output {
        Some(path) => {
            let f = File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
            file = BufWriter::new(f);
            &mut file
        }
        None => stdout,
    };
    match &cli.command {
        Command::Validate => commands::validate(&cfg, out, stderr)?,
        Command::Price { method } => {
            let method = match method {
                MethodArg::Fem => Method::Fem,
                MethodArg::Fft => Method::Fft,
                MethodArg::Mc => Method::Mc,
                MethodArg::Merton => Method::Merton,
            };
            let row = commands::price(&cfg, method)?;
            commands::write_price(&cfg, method, &row, out)?;
        }
        Command::Surface {
            engine,
            strikes,
            maturities,
        } => {
            let engine = match engine {
                EngineArg::Fft => Engine::Fft,
                EngineArg::Fem => Engine::Fem,
            };
            let strikes = strikes.clone().unwrap_or(DEFAULT_STRIKES.to_vec());
            let maturities = maturities.clone().unwrap_or(DEFAULT_MATURITIES.to_vec());
            let rows = commands::surface(&cfg, engine, &strikes, &maturities)?;
            commands::write_surface(&rows, out)?;
        }
        Command::Compare { spots } => {
            let spots = spots.clone().unwrap_or(DEFAULT_SPOTS.to_vec());
            let rows = commands::compare(&cfg, &spots)?;
            commands::write_compare(&rows, out)?;
        }
        Command::MeshInfo {
            export_mesh,
            export_matrices,
        } => commands::mesh_info(&cfg, export_mesh.as_deref(), export_matrices.as_deref(), out)?,
    }
    let path = cfg.output.as_ref().map_or("stdout".into(), |p| p.display().to_string());
    out.flush().map_err(|e| Error::io(path, e))
}

/// Parses arguments, runs, and maps errors to exit codes.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut err = std::io::stderr();
    match execute(&cli, &mut out, &mut err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
