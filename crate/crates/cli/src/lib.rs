//! Command-line front end wiring the pipeline together: spectral analysis,
//! normal-form reduction, realization, holonomy integration, certificate
//! verification, contraction envelopes, and two canned demonstrations.
//! JSON in, JSON out; every output embeds a run manifest; exit codes
//! encode verdicts.

pub mod commands;
pub mod manifest;

use clap::{Args, Parser, Subcommand};
use holorealize_core::{Tolerances, C64};
use std::path::PathBuf;
use std::str::FromStr;

/// Exit code conventions shared by every subcommand.
pub mod exit {
    /// The computed verdict matches the command's expectation.
    pub const OK: i32 = 0;
    /// I/O or input validation failure.
    pub const IO: i32 = 1;
    /// The mathematical verdict is contrary to the expectation.
    pub const CONTRARY: i32 = 2;
    /// The numerical layer failed: integrator breakdown or conditioning.
    pub const NUMERICAL: i32 = 3;
}

/// Maps a pipeline error to the exit code that reports it.
pub fn exit_for(err: &holorealize_core::Error) -> i32 {
    use holorealize_core::Error as E;
    match err {
        E::Obstructed(_) | E::NegativeResonancePresent(_) => exit::CONTRARY,
        E::StepUnderflow { .. }
        | E::NonFiniteCoefficient { .. }
        | E::LeftDomain { .. }
        | E::OnSlit
        | E::InsufficientSamples
        | E::IllConditioned(_) => exit::NUMERICAL,
        _ => exit::IO,
    }
}

/// Complex flag value parsed from "re" or "re,im".
#[derive(Clone, Copy, Debug)]
pub struct CpxArg(pub C64);

impl FromStr for CpxArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.splitn(2, ',');
        let re: f64 = parts
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| format!("bad real part: {e}"))?;
        let im: f64 = match parts.next() {
            Some(p) => p.trim().parse().map_err(|e| format!("bad imaginary part: {e}"))?,
            None => 0.0,
        };
        Ok(CpxArg(C64::new(re, im)))
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "holorealize",
    version,
    about = "Saddle systems with prescribed holonomy jets"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Clone, Debug)]
pub struct GlobalArgs {
    /// Coefficient tolerance for jet comparisons.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol_coeff: f64,
    /// Distance-to-integer tolerance for resonance classification.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol_int: f64,
    /// Tolerance for loop and transport integration.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub tol_ode: f64,
    /// Seed for random sampling.
    #[arg(long, global = true, default_value_t = 7)]
    pub seed: u64,
    /// Worker threads for multi-certificate verification.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Also write the output envelope to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

impl GlobalArgs {
    /// The pipeline tolerance set these flags select.
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            coeff: self.tol_coeff,
            int: self.tol_int,
            ode_rel: self.tol_ode,
            ode_abs: self.tol_ode * 1e-3,
            ..Tolerances::default()
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Spectral analysis of a saddle matrix: Jordan split, multipliers,
    /// contraction bounds, and the resonance table.
    Analyze(AnalyzeArgs),
    /// Reduce a diffeomorphism jet to resonant normal form relative to a
    /// matrix and report the realizability verdict.
    Normalform(NormalformArgs),
    /// Realize a jet as the holonomy of a saddle system; prints the full
    /// certificate, or the obstructing resonances with exit code 2.
    Realize(RealizeArgs),
    /// Integrate the holonomy jet of a saddle system around the loop.
    Holonomy(HolonomyArgs),
    /// Re-integrate certificates and compare against their input jets.
    Verify(VerifyArgs),
    /// Measure the transport contraction envelope of a system.
    Contraction(ContractionArgs),
    /// Canned obstruction demo on the spectrum (-3/2, -1/4), with divisor
    /// tables and the effect of integer shifts.
    Counterexample(CounterexampleArgs),
    /// Canned linearizable demo: realize (lambda*y1, y2 + a*y1^d).
    DemoLinearizable(DemoLinearizableArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Analyze(_) => "analyze",
            Command::Normalform(_) => "normalform",
            Command::Realize(_) => "realize",
            Command::Holonomy(_) => "holonomy",
            Command::Verify(_) => "verify",
            Command::Contraction(_) => "contraction",
            Command::Counterexample(_) => "counterexample",
            Command::DemoLinearizable(_) => "demo-linearizable",
        }
    }
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    /// Matrix JSON (row-major, complex entries as [re, im]).
    #[arg(long)]
    pub matrix: PathBuf,
    /// Degree cutoff for the reported resonance table.
    #[arg(long, default_value_t = 4)]
    pub max_degree: usize,
}

#[derive(Args, Debug)]
pub struct NormalformArgs {
    /// Diffeomorphism jet JSON.
    #[arg(long)]
    pub jet: PathBuf,
    /// Matrix JSON; the jet's linear part must be its time-one monodromy.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Reduction order; defaults to the jet's truncation order.
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Args, Debug)]
pub struct RealizeArgs {
    /// Diffeomorphism jet JSON.
    #[arg(long)]
    pub jet: PathBuf,
    /// Matrix JSON with spectrum in the left half plane.
    #[arg(long)]
    pub matrix: PathBuf,
    /// Jet order override; bypasses the automatic order rule.
    #[arg(long)]
    pub nu: Option<usize>,
}

#[derive(Args, Debug)]
pub struct HolonomyArgs {
    /// Saddle system JSON.
    #[arg(long)]
    pub system: PathBuf,
    /// Jet order to integrate.
    #[arg(long)]
    pub nu: usize,
    /// Basepoint on the unit circle, as "re,im".
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub x0: CpxArg,
    /// Integration tolerance override for this run.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Traverse the loop negatively (yields the inverse holonomy).
    #[arg(long)]
    pub reversed: bool,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Certificate JSON path(s); repeat the flag for a batch.
    #[arg(long, required = true, num_args = 1..)]
    pub cert: Vec<PathBuf>,
    /// Largest acceptable holonomy coefficient error.
    #[arg(long, default_value_t = 1e-6)]
    pub max_error: f64,
}

#[derive(Args, Debug)]
pub struct ContractionArgs {
    /// Saddle system JSON.
    #[arg(long)]
    pub system: PathBuf,
    /// Spectral data JSON for the system's matrix.
    #[arg(long)]
    pub spectral: PathBuf,
    /// Random point pairs per |x| sample.
    #[arg(long, default_value_t = 10)]
    pub pairs: usize,
}

#[derive(Args, Debug)]
pub struct CounterexampleArgs {
    /// Subtract this multiple of the identity from the matrix.
    #[arg(long, default_value_t = 0)]
    pub shift: usize,
    /// Jet order override for the realization attempt.
    #[arg(long)]
    pub nu: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DemoLinearizableArgs {
    /// First exponent: real, negative, irrational in spirit.
    #[arg(long, default_value_t = -0.381_966_011_250_105_1, allow_negative_numbers = true)]
    pub mu1: f64,
    /// Second exponent: a negative integer.
    #[arg(long, default_value_t = -1, allow_negative_numbers = true)]
    pub mu2: i64,
    /// Coefficient of the single nonlinear term, as "re,im".
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub a_coeff: CpxArg,
    /// Degree of the nonlinear term a*y1^d in the second component.
    #[arg(long, default_value_t = 2)]
    pub a_degree: usize,
    /// Jet order for the realization.
    #[arg(long, default_value_t = 4)]
    pub nu: usize,
}

/// Initializes logging from the HOLOREALIZE_LOG environment variable.
pub fn init_logging() {
    let env = env_logger::Env::new().filter("HOLOREALIZE_LOG");
    env_logger::Builder::from_env(env).try_init().ok();
}

/// Runs one parsed invocation: dispatches, wraps the result in an
/// envelope on stdout (and --out), and returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let started = std::time::Instant::now();
    match commands::dispatch(&cli.global, &cli.command) {
        Ok(out) => {
            let man = manifest::RunManifest::new(
                cli.command.name(),
                out.inputs,
                &cli.global,
                started.elapsed().as_secs_f64(),
            );
            let envelope = serde_json::json!({ "manifest": man, "result": out.result });
            let text = match serde_json::to_string_pretty(&envelope) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot encode output: {e}");
                    return exit::IO;
                }
            };
            println!("{text}");
            if let Some(path) = &cli.global.out {
                if let Err(e) = std::fs::write(path, text + "\n") {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return exit::IO;
                }
            }
            out.exit
        }
        Err(fail) => {
            eprintln!("error: {}", fail.message);
            fail.exit
        }
    }
}
