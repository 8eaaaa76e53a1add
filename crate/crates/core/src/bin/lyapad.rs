use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lyapunov_adiabatic::runner::{run_to_dir, sweep, RunError, RunReport};
use lyapunov_adiabatic::scenario::{parse_scenario, preset, preset_document, Scenario, ScenarioError, PRESET_NAMES};

/// Lyapunov-controlled adiabatic evolution simulator.
#[derive(Parser)]
#[command(name = "lyapad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one scenario and write its outputs.
    Run(Target),
    /// Run every value of the scenario's sweep and write a comparison table.
    Sweep(Target),
    /// Inspect the built-in presets.
    Presets {
        #[command(subcommand)]
        command: PresetCommand,
    },
}

#[derive(Args)]
struct Target {
    /// Scenario JSON file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scenario: Option<PathBuf>,
    /// Built-in preset name.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory; defaults to the scenario's output.directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write states.csv with full-precision amplitudes.
    #[arg(long)]
    dump_states: bool,
}

#[derive(Subcommand)]
enum PresetCommand {
    List,
    Show { name: String },
}

fn load(target: &Target) -> Result<Scenario, RunError> {
    let mut s = match (&target.scenario, &target.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
                path: path.clone(),
                source,
            })?;
            parse_scenario(&text)?
        }
        (None, Some(name)) => preset(name)?,
        (None, None) => unreachable!("clap requires one of --scenario, --preset"),
    };
    if target.dump_states {
        s.output.dump_states = true;
    }
    Ok(s)
}

fn out_dir(target: &Target, s: &Scenario) -> Result<PathBuf, RunError> {
    target
        .out
        .clone()
        .or_else(|| s.output.directory.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            RunError::Validation(ScenarioError {
                path: "output.directory".into(),
                message: "no output directory; pass --out".into(),
            })
        })
}

fn print_report(label: &str, r: &RunReport, dir: &Path) {
    println!(
        "{label}: min F {:.6}  mean F {:.6}  final F {:.6}  min gap {:.6}  -> {}",
        r.min_fidelity,
        r.mean_fidelity,
        r.final_fidelity,
        r.min_gap,
        dir.display()
    );
}

fn execute(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Run(target) => {
            let s = load(&target)?;
            let dir = out_dir(&target, &s)?;
            let report = run_to_dir(&s, &dir)?;
            print_report(s.name.as_deref().unwrap_or("run"), &report, &dir);
        }
        Command::Sweep(target) => {
            let s = load(&target)?;
            let dir = out_dir(&target, &s)?;
            let entries = sweep(&s, Some(&dir))?;
            let parameter = s.sweep.as_ref().map_or("value", |sw| sw.parameter.name());
            for e in &entries {
                print_report(&format!("{parameter} = {}", e.value), &e.report, &dir.join(&e.directory));
            }
            println!("comparison table -> {}", dir.join("comparison.csv").display());
        }
        Command::Presets { command } => match command {
            PresetCommand::List => {
                for name in PRESET_NAMES {
                    println!("{name}");
                }
            }
            PresetCommand::Show { name } => {
                if preset_document(&name).is_none() {
                    return Err(preset(&name).unwrap_err().into());
                }
                println!("{}", preset(&name)?.to_json_pretty());
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
