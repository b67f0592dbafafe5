//! The `pinn` command-line tool.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use thiserror::Error;

use pinn_core::network::Architecture;
use pinn_core::trainer::{
    boundary_mismatch, evaluate_model, evaluation_grid, preset, replicate_manual_table,
    write_coefficient_csv, ReplicationMode, TableRow, TrainConfig, TrainOutcome, Trainer,
    PRESET_NAMES, REPORTED_LOOP0_LOSS, REPORTED_LOOP0_Y_HAT,
};
use pinn_core::transport::{ConditionSpec, ResidualSpec};
use pinn_core::PinnError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read config file `{path}`: {source}")]
    ReadConfig {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config file `{path}`: {source}")]
    ParseConfig {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unknown preset `{0}` (available: {presets})", presets = PRESET_NAMES.join(", "))]
    UnknownPreset(String),
    #[error("cannot write `{path}`: {source}")]
    Write { path: PathBuf, source: PinnError },
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("{0}")]
    Usage(String),
    #[error("loop-0 prediction {0} is not within 0.001 of {REPORTED_LOOP0_Y_HAT}")]
    ReplicationMismatch(f64),
    #[error(transparent)]
    Core(#[from] PinnError),
}

#[derive(Parser, Debug)]
#[command(
    name = "pinn",
    version,
    about = "Physics-informed neural networks for u_t + c·u_x = 0"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve the forward problem with a known transport coefficient.
    Forward(RunArgs),
    /// Recover the transport coefficient from observations.
    Inverse(RunArgs),
    /// Recompute the five-loop hand calculation on a [2, 2, 1] network.
    ReplicateTable {
        #[arg(long, value_enum, default_value_t = TableMode::Literal)]
        mode: TableMode,
        /// Also write the table as CSV into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one forward model per hidden-layer width or learning rate.
    Sweep(SweepArgs),
    /// Print a built-in preset as JSON.
    ShowPreset { name: String },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TableMode {
    Literal,
    Standard,
}

#[derive(Args, Debug, Clone)]
pub struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration to start from.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Fill the `seconds` column of the run log.
    #[arg(long)]
    pub record_time: bool,
    /// Suppress progress output. The effective config is still printed.
    #[arg(long)]
    pub quiet: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Override the learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Hidden widths of a single-hidden-layer network.
    #[arg(
        long,
        value_delimiter = ',',
        conflicts_with = "lr",
        required_unless_present = "lr"
    )]
    pub nodes: Option<Vec<usize>>,
    /// Learning rates.
    #[arg(long, value_delimiter = ',')]
    pub lr: Option<Vec<f64>>,
}

fn load_config(args: &ConfigArgs, default_preset: &str) -> Result<TrainConfig, CliError> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::ReadConfig {
                path: path.clone(),
                source,
            })?;
            serde_json::from_str(&text).map_err(|source| CliError::ParseConfig {
                path: path.clone(),
                source,
            })?
        }
        (None, name) => {
            let name = name.as_deref().unwrap_or(default_preset);
            preset(name).ok_or_else(|| CliError::UnknownPreset(name.to_string()))?
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        config.epochs = epochs;
    }
    if args.record_time {
        config.record_wall_clock = true;
    }
    Ok(config)
}

fn create_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Write {
            path: path.to_path_buf(),
            source: e.into(),
        })
}

fn write_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> pinn_core::Result<()>,
) -> Result<(), CliError> {
    let mut file = create_file(path)?;
    f(&mut file)
        .and_then(|_| file.flush().map_err(PinnError::from))
        .map_err(|source| CliError::Write {
            path: path.to_path_buf(),
            source,
        })
}

fn make_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Write {
        path: dir.to_path_buf(),
        source: e.into(),
    })
}

fn print_effective(out: &mut dyn Write, config: &TrainConfig) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(config).map_err(PinnError::from)?;
    writeln!(out, "effective config:\n{json}").map_err(PinnError::from)?;
    Ok(())
}

/// Trains, writes the standard outputs into `dir` and returns the outcome.
fn train_into(
    config: TrainConfig,
    dir: &Path,
    progress: bool,
    out: &mut dyn Write,
) -> Result<TrainOutcome, CliError> {
    make_out_dir(dir)?;
    let epochs = config.epochs;
    let mut trainer = Trainer::new(config.clone())?;
    if progress {
        let conds = ConditionSpec::new(config.boundary);
        let mismatch = boundary_mismatch(&conds, &config.domain, &trainer.collocation().boundary)?;
        writeln!(
            out,
            "boundary condition mismatch vs exact solution: {mismatch:.6}"
        )
        .map_err(PinnError::from)?;
    }
    trainer.run_to(epochs)?;
    let checkpoint = trainer.checkpoint();
    let outcome = trainer.run()?;
    let predictions = evaluate_model(&outcome.params, &evaluation_grid(&config.domain))?;
    write_with(&dir.join("runlog.csv"), |w| outcome.log.write_csv(w))?;
    write_with(&dir.join("predictions.csv"), |w| predictions.write_csv(w))?;
    write_with(&dir.join("checkpoint.txt"), |w| checkpoint.write(w))?;
    write_with(&dir.join("config.json"), |w| {
        serde_json::to_writer_pretty(&mut *w, &config)?;
        writeln!(w)?;
        Ok(())
    })?;
    if config.residual.is_trainable() {
        write_with(&dir.join("coefficient.csv"), |w| {
            write_coefficient_csv(w, &outcome.coefficient_trace)
        })?;
    }
    Ok(outcome)
}

fn run_problem(args: &RunArgs, inverse: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let default = if inverse {
        "inverse-tutorial"
    } else {
        "forward-small"
    };
    let mut config = load_config(&args.common, default)?;
    if let Some(lr) = args.lr {
        config.optimizer.learning_rate = lr;
    }
    match (inverse, config.residual) {
        (false, ResidualSpec::Trainable(_)) => {
            return Err(CliError::Usage(
                "`forward` needs a fixed coefficient; use `inverse` for a trainable one".into(),
            ))
        }
        (true, ResidualSpec::Fixed(_)) => {
            return Err(CliError::Usage(
                "`inverse` needs a trainable coefficient; use `forward` for a fixed one".into(),
            ))
        }
        _ => {}
    }
    config.validate()?;
    if inverse && config.build_collocation()?.observations.is_empty() {
        return Err(CliError::Usage("`inverse` needs observations".into()));
    }
    print_effective(out, &config)?;
    let outcome = train_into(config, &args.common.out, !args.common.quiet, out)?;
    let last = outcome.final_row();
    writeln!(out, "final loss: {}", last.loss.total).map_err(PinnError::from)?;
    writeln!(out, "final relative L2 error: {}", last.rel_l2).map_err(PinnError::from)?;
    if let Some(c) = outcome.coefficient {
        writeln!(out, "final coefficient C: {c}").map_err(PinnError::from)?;
    }
    Ok(())
}

const TABLE_HEADER: [&str; 12] = [
    "loop", "w1", "w2", "w3", "w4", "w5", "w6", "b1", "b2", "b3", "y_hat", "loss",
];

fn table_fields(r: &TableRow) -> Vec<String> {
    let mut fields = vec![r.loop_index.to_string()];
    fields.extend(r.weights.iter().chain(&r.biases).map(|v| v.to_string()));
    fields.push(r.y_hat.to_string());
    fields.push(r.loss.to_string());
    fields
}

fn replicate(mode: TableMode, dir: Option<&Path>, out: &mut dyn Write) -> Result<(), CliError> {
    let rows = replicate_manual_table(match mode {
        TableMode::Literal => ReplicationMode::Literal,
        TableMode::Standard => ReplicationMode::StandardDescent,
    })?;
    let io = |e: std::io::Error| CliError::Core(e.into());
    writeln!(out, "{}", TABLE_HEADER.map(|h| format!("{h:>9}")).join(" ")).map_err(io)?;
    for r in &rows {
        let mut line = format!("{:>9}", r.loop_index);
        for v in r.weights.iter().chain(&r.biases).chain([&r.y_hat, &r.loss]) {
            line.push_str(&format!(" {v:>9.5}"));
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    if let Some(dir) = dir {
        make_out_dir(dir)?;
        write_with(&dir.join("table.csv"), |w| {
            let mut csv = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(w);
            csv.write_record(TABLE_HEADER)?;
            for r in &rows {
                csv.write_record(table_fields(r))?;
            }
            csv.flush()?;
            Ok(())
        })?;
    }
    let y0 = rows[0].y_hat;
    let pass = (y0 - REPORTED_LOOP0_Y_HAT).abs() <= 1e-3;
    writeln!(
        out,
        "loop-0 y_hat {y0:.6} vs reported {REPORTED_LOOP0_Y_HAT}: {}",
        if pass { "PASS" } else { "FAIL" }
    )
    .map_err(io)?;
    writeln!(
        out,
        "loop-0 loss {:.6} (reported {REPORTED_LOOP0_LOSS}, not reproducible from the stated loss)",
        rows[0].loss
    )
    .map_err(io)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::ReplicationMismatch(y0))
    }
}

#[derive(Clone, Copy, Debug)]
enum SweepValue {
    Nodes(usize),
    LearningRate(f64),
}

impl SweepValue {
    fn label(&self) -> String {
        match self {
            SweepValue::Nodes(n) => n.to_string(),
            SweepValue::LearningRate(lr) => lr.to_string(),
        }
    }

    fn dir_name(&self) -> String {
        match self {
            SweepValue::Nodes(n) => format!("nodes_{n}"),
            SweepValue::LearningRate(lr) => format!("lr_{lr}"),
        }
    }

    fn apply(&self, config: &mut TrainConfig) -> Result<(), CliError> {
        match *self {
            SweepValue::Nodes(n) => {
                config.architecture = Architecture::new(
                    vec![2, n, 1],
                    config.architecture.activation,
                    config.architecture.output_linear,
                )?;
            }
            SweepValue::LearningRate(lr) => config.optimizer.learning_rate = lr,
        }
        config.validate()?;
        Ok(())
    }
}

/// One finished sweep run.
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub value: String,
    pub final_rel_l2: f64,
    pub final_loss: f64,
    pub seconds: Option<f64>,
}

fn sweep(args: &SweepArgs, out: &mut dyn Write) -> Result<Vec<SweepResult>, CliError> {
    let values: Vec<SweepValue> = match (&args.nodes, &args.lr) {
        (Some(nodes), None) => nodes.iter().map(|&n| SweepValue::Nodes(n)).collect(),
        (None, Some(lrs)) => lrs.iter().map(|&lr| SweepValue::LearningRate(lr)).collect(),
        _ => {
            return Err(CliError::Sweep(
                "give exactly one of --nodes or --lr".into(),
            ))
        }
    };
    if values.is_empty() {
        return Err(CliError::Sweep("the sweep list is empty".into()));
    }
    let base = load_config(&args.common, "forward-small")?;
    if base.residual.is_trainable() {
        return Err(CliError::Sweep("sweeps run forward problems only".into()));
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            v.apply(&mut cfg)
                .map_err(|e| CliError::Sweep(format!("value {}: {e}", v.label())))?;
            Ok(cfg)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    print_effective(out, &base)?;
    make_out_dir(&args.common.out)?;
    let results = values
        .par_iter()
        .zip(configs)
        .map(|(v, cfg)| {
            let record = cfg.record_wall_clock;
            let start = Instant::now();
            let outcome = train_into(
                cfg,
                &args.common.out.join(v.dir_name()),
                false,
                &mut std::io::sink(),
            )?;
            let last = outcome.final_row();
            Ok(SweepResult {
                value: v.label(),
                final_rel_l2: last.rel_l2,
                final_loss: last.loss.total,
                seconds: record.then(|| start.elapsed().as_secs_f64()),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let path = args.common.out.join("summary.csv");
    write_with(&path, |w| {
        let mut csv = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        csv.write_record(["sweep_value", "final_rel_l2", "final_loss", "seconds"])?;
        for r in &results {
            csv.write_record([
                r.value.clone(),
                r.final_rel_l2.to_string(),
                r.final_loss.to_string(),
                r.seconds.map(|s| s.to_string()).unwrap_or_default(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    })?;
    if !args.common.quiet {
        for r in &results {
            writeln!(
                out,
                "{}: final relative L2 error {}, final loss {}",
                r.value, r.final_rel_l2, r.final_loss
            )
            .map_err(PinnError::from)?;
        }
    }
    Ok(results)
}

/// Sizes the global thread pool from `PINN_THREADS` when it is set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("PINN_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "PINN_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size the thread pool: {e}")))
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Forward(args) => run_problem(&args, false, out),
        Command::Inverse(args) => run_problem(&args, true, out),
        Command::ReplicateTable { mode, out: dir } => replicate(mode, dir.as_deref(), out),
        Command::Sweep(args) => sweep(&args, out).map(|_| ()),
        Command::ShowPreset { name } => {
            let config = preset(&name).ok_or(CliError::UnknownPreset(name))?;
            let json = serde_json::to_string_pretty(&config).map_err(PinnError::from)?;
            writeln!(out, "{json}").map_err(PinnError::from)?;
            Ok(())
        }
    }
}
