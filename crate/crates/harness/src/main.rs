use clap::{Args, Parser, Subcommand};
use hiact_demonstrator::{build_dataset, load_dataset, save_dataset};
use hiact_harness::{
    config_file, default_variants, emit_report, run_generalization, run_grid, EvalSettings,
    GridOptions, HarnessError, ReportInputs,
};
use hiact_policy::{load_checkpoint, save_checkpoint, train, PolicyConfig};
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hiact", about = "Haptic-informed action-chunking policy experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an expert demonstration dataset.
    Collect(CollectArgs),
    /// Train a policy on a collected dataset.
    Train(TrainArgs),
    /// Evaluate a trained policy over repeated trials.
    Eval(EvalArgs),
    /// Train and evaluate the full 2x2 {haptic, recovery} grid.
    Grid(GridArgs),
    /// Evaluate a trained policy across object-size variants.
    Generalize(GeneralizeArgs),
    /// Regenerate report.md from saved CSV tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct CollectArgs {
    #[arg(long, default_value_t = 160)]
    n_success: u32,
    #[arg(long, default_value_t = 40)]
    n_recovery: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Include the force token (default).
    #[arg(long, overrides_with = "no_haptic")]
    haptic: bool,
    /// Drop the force token (the ACT ablation).
    #[arg(long)]
    no_haptic: bool,
    /// key = value file with PolicyConfig overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training RNG seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: u32,
    #[arg(long, default_value_t = 0.3)]
    p_slip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: u32,
    #[arg(long, default_value_t = 0.3)]
    p_slip: f64,
    /// Use the 40/10 demonstration profile instead of the scaled 160/40.
    #[arg(long)]
    paper_profile: bool,
    /// key = value file with PolicyConfig overrides.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GeneralizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    trials: u32,
    #[arg(long, default_value_t = 0.3)]
    p_slip: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory holding grid.csv / generalization.csv / force_trace_*.csv.
    #[arg(long, name = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn read_to_string(path: &PathBuf) -> Result<String, HarnessError> {
    fs::read_to_string(path)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Collect(args) => {
            let dataset = build_dataset(args.n_success, args.n_recovery, args.seed)?;
            save_dataset(&dataset, &args.out)?;
            println!(
                "collected {} episodes ({} success, {} recovery, {} discarded) -> {}",
                dataset.episodes.len(),
                dataset.n_success,
                dataset.n_recovery,
                dataset.total_discards,
                args.out.display()
            );
        }
        Command::Train(args) => {
            let dataset = load_dataset(&args.dataset)?;
            let mut cfg = PolicyConfig::default();
            if let Some(path) = &args.config {
                config_file::parse(&read_to_string(path)?)?.apply_policy(&mut cfg)?;
            }
            if args.no_haptic {
                cfg.haptic_enabled = false;
            } else if args.haptic {
                cfg.haptic_enabled = true;
            }
            if let Some(seed) = args.seed {
                cfg.rng_seed = seed;
            }
            let (params, log) = train(&dataset, &cfg)?;
            save_checkpoint(&params, &args.out)?;
            println!(
                "trained {} steps in {:.1}s; final reconstruction {:.4}; checkpoint {} -> {}",
                cfg.train_steps,
                log.wall_seconds,
                log.final_reconstruction(100),
                log.params_checksum,
                args.out.display()
            );
        }
        Command::Eval(args) => {
            let params = load_checkpoint(&args.model)?;
            let eval = EvalSettings { n_trials: args.trials, p_slip: args.p_slip, ..Default::default() };
            let variants =
                vec![hiact_harness::ObjectVariant { name: "eval".into(), size_multiplier: 1.0, contrast: 1.0 }];
            let table = run_generalization(&params, args.seed, &eval, &variants)?;
            emit_report(&args.out, None, Some(&table), &[])?;
            let row = table.row("eval");
            println!(
                "{} trials: pick {:.3} delivery {:.3} loop failures {:.3}",
                row.trials, row.pick_rate, row.delivery_rate, row.loop_failure_rate
            );
        }
        Command::Grid(args) => {
            let mut options = GridOptions {
                eval: EvalSettings { n_trials: args.trials, p_slip: args.p_slip, ..Default::default() },
                ..Default::default()
            };
            if args.paper_profile {
                options.profile = hiact_demonstrator::PAPER_PROFILE;
            }
            if let Some(path) = &args.config {
                config_file::parse(&read_to_string(path)?)?.apply_policy(&mut options.policy)?;
            }
            let outcome = run_grid(args.seed, &options)?;
            emit_report(&args.out, Some(&outcome.table), None, &outcome.sample_traces)?;
            save_dataset(&outcome.dataset, &args.out.join("dataset"))?;
            for (spec, params) in outcome.conditions.iter().zip(&outcome.models) {
                save_checkpoint(params, &args.out.join(format!("model_{}.hiam", spec.name)))?;
            }
            for row in &outcome.table.rows {
                println!(
                    "{:<20} pick {:.3} delivery {:.3} loops {:.3}",
                    row.label, row.pick_rate, row.delivery_rate, row.loop_failure_rate
                );
            }
        }
        Command::Generalize(args) => {
            let params = load_checkpoint(&args.model)?;
            let eval = EvalSettings { n_trials: args.trials, p_slip: args.p_slip, ..Default::default() };
            let table = run_generalization(&params, args.seed, &eval, &default_variants())?;
            emit_report(&args.out, None, Some(&table), &[])?;
            for row in &table.rows {
                println!(
                    "{:<18} x{:<5.2} pick {:.3} delivery {:.3} loops {:.3}",
                    row.label, row.size_multiplier, row.pick_rate, row.delivery_rate, row.loop_failure_rate
                );
            }
        }
        Command::Report(args) => {
            let read_opt = |name: &str| -> Option<String> {
                fs::read_to_string(args.input.join(name)).ok().filter(|s| s.lines().count() > 1)
            };
            let mut trace_names: Vec<String> = fs::read_dir(&args.input)
                .map_err(|source| HarnessError::Io { path: args.input.display().to_string(), source })?
                .filter_map(|e| e.ok())
                .filter_map(|e| e.file_name().into_string().ok())
                .filter_map(|name| {
                    name.strip_prefix("force_trace_")
                        .and_then(|rest| rest.strip_suffix(".csv"))
                        .map(str::to_string)
                })
                .collect();
            trace_names.sort();
            let inputs = ReportInputs {
                grid_csv: read_opt("grid.csv"),
                generalization_csv: read_opt("generalization.csv"),
                trace_names,
            };
            fs::create_dir_all(&args.out)
                .map_err(|source| HarnessError::Io { path: args.out.display().to_string(), source })?;
            let path = args.out.join("report.md");
            fs::write(&path, hiact_harness::render_report(&inputs))
                .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.category() as u8)
        }
    }
}

