//! Command-line front end for controller synthesis and simulation.

pub mod commands;
pub mod config;
pub mod output;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::CmdError;
use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "bullwhip", version, about = "Peak-gain order policies for a single vendor")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Steady state, stability and assumption checks.
    Analyze(Overrides),
    /// Synthesize a controller and write controller.csv.
    Synth(Overrides),
    /// Peak gain over an (alpha, beta, lambda) grid; writes sweep.csv.
    Sweep(Overrides),
    /// Closed-loop trials; writes trace.csv, metrics.csv, forecast_sweep.csv.
    Simulate(Overrides),
}

#[derive(Debug, Args)]
struct Overrides {
    /// key = value file; flags below take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "lambda-min")]
    lambda_min: Option<f64>,
    #[arg(long = "eps-f")]
    eps_f: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "emit-svg")]
    emit_svg: bool,
    #[arg(long = "feas-tol")]
    feas_tol: Option<f64>,
    #[arg(long = "gap-tol")]
    gap_tol: Option<f64>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    threads: Option<usize>,
}

impl Overrides {
    fn load(&self) -> Result<RunConfig, CmdError> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        let nums = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("lambda_min", self.lambda_min),
            ("eps_f", self.eps_f),
            ("feas_tol", self.feas_tol),
            ("gap_tol", self.gap_tol),
        ];
        for (key, v) in nums {
            if let Some(v) = v {
                c.set(key, &v.to_string())?;
            }
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(o) = &self.out {
            c.output_dir = o.clone();
        }
        if let Some(t) = self.threads {
            c.threads = t;
        }
        c.emit_svg |= self.emit_svg;
        c.validate()?;
        Ok(c)
    }
}

fn dispatch(cmd: &Command, out: &mut (dyn Write + Send)) -> Result<i32, CmdError> {
    let o = match cmd {
        Command::Analyze(o) | Command::Synth(o) | Command::Sweep(o) | Command::Simulate(o) => o,
    };
    let cfg = o.load()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| CmdError::Io {
            path: PathBuf::from("<thread pool>"),
            msg: e.to_string(),
        })?;
    pool.install(|| match cmd {
        Command::Analyze(_) => {
            let r = commands::cmd_analyze(&cfg, out)?;
            Ok(if r.passes() { 0 } else { 1 })
        }
        Command::Synth(_) => commands::cmd_synth(&cfg, out).map(|_| 0),
        Command::Sweep(_) => commands::cmd_sweep(&cfg, out).map(|_| 0),
        Command::Simulate(_) => commands::cmd_simulate(&cfg, out).map(|_| 0),
    })
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            if code == 0 {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    match dispatch(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
