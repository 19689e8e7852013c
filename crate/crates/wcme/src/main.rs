use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wcme::commands;
use wcme::error::CliError;
use wcme::scenario::{self, Equation, PRESETS};

#[derive(Parser)]
#[command(
    name = "wcme",
    version,
    about = "Weak-coupling master equations for open quantum systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario JSON file or preset:NAME.
    #[arg(long)]
    scenario: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario's coupling strength.
    #[arg(long)]
    lambda: Option<f64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Time evolution under one master equation.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Overrides the scenario's equation.
        #[arg(long, value_enum)]
        equation: Option<Equation>,
    },
    /// Second-order mean-force Hamiltonian and state.
    Meanforce {
        #[command(flatten)]
        common: Common,
    },
    /// Property checks; exits with status 4 when any fails.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Errors of all three equations against the truncated-bath oracle.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Prints a bundled scenario as JSON.
    Preset {
        /// One of qubit-ohmic, atom, superconducting-qubit.
        name: String,
    },
}

fn setup(common: &Common) -> Result<(scenario::Scenario, Vec<u8>), CliError> {
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::validation("cli", "--threads must be positive".into()));
        }
        // A second initialization fails harmlessly.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (mut s, bytes) = scenario::load(&common.scenario)?;
    if let Some(l) = common.lambda {
        s.lambda = l;
    }
    Ok((s, bytes))
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Evolve { common, equation } => {
            let (s, bytes) = setup(&common)?;
            let eq = equation.unwrap_or(s.options.equation);
            let r = commands::evolve(&s, &bytes, eq, &common.out)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "{}: {} points, final distance to Gibbs {:.3e}",
                r.csv, r.points, r.final_distance_to_gibbs
            );
            Ok(0)
        }
        Command::Meanforce { common } => {
            let (s, bytes) = setup(&common)?;
            let r = commands::meanforce(&s, &bytes, &common.out)?;
            println!("|[H_S(1), H_mf,C(2)]| = {:.3e}", r.commutator_norm);
            if let Some(o) = r.oracle {
                println!(
                    "oracle ({} modes): distance {:.3e} (second order), {:.3e} (bare Gibbs)",
                    o.modes, o.distance_mean_force, o.distance_bare
                );
            }
            Ok(0)
        }
        Command::Verify { common } => {
            let (s, bytes) = setup(&common)?;
            let r = commands::verify(&s, &bytes, &common.out)?;
            for c in &r.checks {
                let cmp = if c.kind == "max" { "<=" } else { ">=" };
                println!(
                    "{} {:<22} {:.3e} {cmp} {:.1e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold
                );
            }
            Ok(if r.passed { 0 } else { 4 })
        }
        Command::Compare { common } => {
            let (s, bytes) = setup(&common)?;
            let r = commands::compare(&s, &bytes, &common.out)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            for m in &r.summaries {
                println!(
                    "lambda {:.4}: cumulant {:.3e} redfield {:.3e} davies {:.3e}",
                    m.lambda, m.max_cumulant, m.max_redfield, m.max_davies
                );
            }
            println!(
                "error ratios lambda/(lambda/2): cumulant {:.2} redfield {:.2} davies {:.2}",
                r.ratio_cumulant, r.ratio_redfield, r.ratio_davies
            );
            Ok(0)
        }
        Command::Preset { name } => {
            let s = scenario::preset(&name).ok_or_else(|| {
                CliError::validation(
                    "scenario",
                    format!("unknown preset {name:?}; known: {}", PRESETS.join(", ")),
                )
            })?;
            println!("{}", s.to_json());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
