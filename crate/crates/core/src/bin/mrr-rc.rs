//! `mrr-rc`: run, sweep, validate and plot from the command line.
//!
//! Exit codes: 0 success, 1 validation failure, 2 usage or configuration
//! error, 3 numerical divergence.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mrr_reservoir::config::CliConfigFile;
use mrr_reservoir::experiment::{run_experiment, Alignment, Mode, Task};
use mrr_reservoir::heatmap;
use mrr_reservoir::sweep::{
    export_results, find_best, load_results_csv, optimize_beta_on_grid, parse_grid_shape,
    run_sweep_with, ExportFormats, SweepControl,
};
use mrr_reservoir::validation::{validate_all, SuiteOptions};
use mrr_reservoir::Error;

#[derive(Parser)]
#[command(
    name = "mrr-rc",
    version,
    about = "Microring reservoir computing simulator"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for inputs and masks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Parallel sweep workers.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Reuse completed sweep points found in the output directory.
    #[arg(long, global = true)]
    resume: bool,
    /// Print the fully resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long, allow_negative_numbers = true)]
    power_dbm: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    detuning_ghz: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Number of pumps (wdm_delayed only).
    #[arg(long)]
    pumps: Option<usize>,
    #[arg(long, value_parser = parse_task)]
    task: Option<Task>,
    /// Lag of the recall task.
    #[arg(long)]
    lag: Option<usize>,
    #[arg(long)]
    washout: Option<usize>,
    /// Train against y(n+1) instead of y(n).
    #[arg(long)]
    one_step_ahead: bool,
    /// Standardize features before the ridge fit.
    #[arg(long)]
    standardize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print its NMSE.
    Run(Overrides),
    /// Sweep total power and detuning, export CSV, metadata and heatmap.
    Sweep {
        #[command(flatten)]
        overrides: Overrides,
        /// Grid shape `RxC` over [-15, 25] dBm × [-100, 100] GHz.
        #[arg(long)]
        grid: Option<String>,
        /// The 41 × 41 grid.
        #[arg(long, conflicts_with = "grid")]
        full: bool,
        /// Comma-separated β candidates; the best (training NMSE) is used.
        #[arg(long, value_delimiter = ',')]
        beta_grid: Option<Vec<f64>>,
        /// Stop after computing this many new points.
        #[arg(long, hide = true)]
        max_points: Option<usize>,
    },
    /// Run the physics and pipeline oracle suite.
    Validate {
        /// Run only the named check (repeatable).
        #[arg(long = "check")]
        checks: Vec<String>,
    },
    /// Re-render the heatmap from a results CSV.
    Plot {
        results: PathBuf,
        /// Output SVG (default: heatmap.svg next to the CSV).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

fn parse_task(s: &str) -> Result<Task, String> {
    match s {
        "narma10" => Ok(Task::Narma10),
        "lag_recall" | "lag-recall" => Ok(Task::LagRecall),
        _ => Err(format!("unknown task `{s}` (narma10, lag_recall)")),
    }
}

fn apply(cfg: &mut CliConfigFile, cli: &Cli, o: &Overrides) {
    let e = &mut cfg.experiment;
    if let Some(m) = o.mode {
        e.mode = m;
        // The pump count follows the mode unless given explicitly.
        e.pumps = 0;
    }
    if let Some(v) = o.pumps {
        e.pumps = v;
    }
    if let Some(v) = o.power_dbm {
        e.power_dbm = v;
    }
    if let Some(v) = o.detuning_ghz {
        e.detuning_ghz = v;
    }
    if let Some(v) = o.beta {
        e.beta = v;
    }
    if let Some(v) = o.lambda {
        e.lambda = v;
    }
    if let Some(v) = o.task {
        e.task = v;
    }
    if let Some(v) = o.lag {
        e.recall_lag = v;
    }
    if let Some(v) = o.washout {
        e.washout = v;
    }
    if o.one_step_ahead {
        e.alignment = Alignment::OneStepAhead;
    }
    if o.standardize {
        e.standardize = true;
    }
    if let Some(s) = cli.seed {
        e.master_seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.sweep.workers = Some(w);
    }
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    if err.is_divergence() {
        ExitCode::from(3)
    } else {
        ExitCode::from(2)
    }
}

fn load_config(cli: &Cli) -> Result<CliConfigFile, Error> {
    match &cli.config {
        Some(path) => CliConfigFile::load(path),
        None => Ok(CliConfigFile::default()),
    }
}

fn print_config(cfg: &CliConfigFile) -> ExitCode {
    match cfg.to_toml() {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => exit_for(&e),
    }
}

fn cmd_run(cli: &Cli, overrides: &Overrides) -> ExitCode {
    let mut cfg = match load_config(cli) {
        Ok(c) => c,
        Err(e) => return exit_for(&e),
    };
    apply(&mut cfg, cli, overrides);
    if cli.print_config {
        return print_config(&cfg);
    }
    let result = match run_experiment(&cfg.experiment) {
        Ok(r) => r,
        Err(e) => return exit_for(&e),
    };
    let d = &result.diagnostics;
    println!("mode: {}", cfg.experiment.mode);
    println!("nmse_train: {}", result.nmse_train);
    println!("nmse_test: {}", result.nmse_test);
    println!("nmse_test_power: {}", result.nmse_test_power);
    println!("max_delta_t_k: {:e}", d.max_delta_t);
    println!("max_delta_n_m3: {:e}", d.max_delta_n);
    println!("mean_drop_power_w: {:e}", d.mean_drop_power);
    println!("fingerprint: {}", result.fingerprint);
    println!("wall_time_s: {:.3}", result.wall_time_s);
    if let Some(dir) = &cli.out {
        let write = || -> Result<(), Error> {
            std::fs::create_dir_all(dir)
                .map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
            let path = dir.join("result.json");
            let body = serde_json::json!({ "config": cfg.experiment, "result": result });
            std::fs::write(&path, serde_json::to_vec_pretty(&body)?)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        };
        if let Err(e) = write() {
            return exit_for(&e);
        }
    }
    ExitCode::SUCCESS
}

fn cmd_sweep(
    cli: &Cli,
    overrides: &Overrides,
    grid: Option<&str>,
    full: bool,
    beta_grid: Option<&[f64]>,
    max_points: Option<usize>,
) -> ExitCode {
    let mut cfg = match load_config(cli) {
        Ok(c) => c,
        Err(e) => return exit_for(&e),
    };
    apply(&mut cfg, cli, overrides);
    if let Some(g) = grid {
        if let Err(e) = parse_grid_shape(g) {
            return exit_for(&e);
        }
        cfg.sweep.grid = Some(g.to_string());
        cfg.sweep.power_dbm = None;
        cfg.sweep.detuning_ghz = None;
    }
    if full {
        cfg.sweep.grid = Some("41x41".into());
        cfg.sweep.power_dbm = None;
        cfg.sweep.detuning_ghz = None;
    }
    if let Some(b) = beta_grid {
        cfg.sweep.beta_grid = Some(b.to_vec());
    }
    if cli.print_config {
        return print_config(&cfg);
    }
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("sweep-out"));
    let mut spec = match cfg.sweep_spec(Some(out.clone()), cli.resume) {
        Ok(s) => s,
        Err(e) => return exit_for(&e),
    };
    if let Some(betas) = &cfg.sweep.beta_grid {
        match optimize_beta_on_grid(&spec, betas) {
            Ok((beta, score)) => {
                println!("beta: {beta} (training nmse {score})");
                spec.base.beta = beta;
            }
            Err(e) => return exit_for(&e),
        }
    }
    let control = SweepControl {
        max_new_points: max_points,
    };
    let result = match run_sweep_with(&spec, control) {
        Ok(r) => r,
        Err(e) => return exit_for(&e),
    };
    if !result.is_complete() {
        let done = result.records().count();
        println!(
            "stopped after {done} of {} points; rerun with --resume",
            result.points.len()
        );
        return ExitCode::SUCCESS;
    }
    if let Err(e) = export_results(&spec, &result, &out, ExportFormats::default()) {
        return exit_for(&e);
    }
    let failed = result.failed();
    if failed > 0 {
        eprintln!("warning: {failed} of {} points failed", result.points.len());
    }
    match find_best(&result) {
        Ok(b) => {
            println!(
                "best: P={} dF={} NMSE={}",
                b.power_dbm, b.detuning_ghz, b.nmse
            );
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn cmd_validate(cli: &Cli, checks: &[String]) -> ExitCode {
    let cfg = match load_config(cli) {
        Ok(c) => c,
        Err(e) => return exit_for(&e),
    };
    if cli.print_config {
        return print_config(&cfg);
    }
    let options = SuiteOptions {
        only: (!checks.is_empty()).then(|| checks.to_vec()),
        ..Default::default()
    };
    let report = validate_all(&cfg.experiment.cavity, &options);
    for c in &report.checks {
        println!("{c}");
    }
    if report.all_passed() {
        println!("all {} checks passed", report.checks.len());
        ExitCode::SUCCESS
    } else {
        let names: Vec<_> = report.failed().map(|c| c.name).collect();
        println!("failed: {}", names.join(", "));
        ExitCode::from(1)
    }
}

fn cmd_plot(results: &Path, output: Option<&Path>) -> ExitCode {
    let rows = match load_results_csv(results) {
        Ok(r) => r,
        Err(e) => return exit_for(&e),
    };
    let svg = match heatmap::render(&rows) {
        Ok(s) => s,
        Err(e) => return exit_for(&e),
    };
    let out = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| results.with_file_name("heatmap.svg"));
    if let Err(e) = std::fs::write(&out, svg) {
        eprintln!("error: {}: {e}", out.display());
        return ExitCode::from(2);
    }
    println!("wrote {}", out.display());
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match &cli.command {
        Command::Run(o) => cmd_run(&cli, o),
        Command::Sweep {
            overrides,
            grid,
            full,
            beta_grid,
            max_points,
        } => cmd_sweep(
            &cli,
            overrides,
            grid.as_deref(),
            *full,
            beta_grid.as_deref(),
            *max_points,
        ),
        Command::Validate { checks } => cmd_validate(&cli, checks),
        Command::Plot { results, output } => cmd_plot(results, output.as_deref()),
    }
}
