//! Training loops, run logs and the manual-calculation replication.
//!
//! One epoch is one full-batch optimizer step. Row `k` of the run log holds
//! the loss at the parameters *before* step `k`, so a run of `n` epochs logs
//! epochs `0, log_every, …` and then epoch `n` at the final parameters.

mod checkpoint;
mod config;
mod replicate;

use std::io::Write;
use std::time::Instant;

pub use checkpoint::{Checkpoint, OptimizerSnapshot, CHECKPOINT_VERSION};
pub use config::{preset, CollocationConfig, TrainConfig, PRESET_NAMES};
pub use replicate::{
    replicate_manual_table, ReplicationMode, TableRow, LABEL_ORDER, REPORTED_LOOP0_LOSS,
    REPORTED_LOOP0_Y_HAT, REPORTED_TABLE3,
};

use crate::error::{PinnError, Result};
use crate::loss::{LossBreakdown, PinnLoss};
use crate::network::{init_network, predict, Architecture, NetworkParams};
use crate::optimizer::Optimizer;
use crate::sampling::{line_grid, CollocationSet, Point, SpaceTimeDomain};
use crate::transport::{boundary_value, exact_solution, ConditionSpec, ResidualSpec};

/// Number of equispaced evaluation points at `t = t_min`.
pub const EVAL_POINTS: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub epoch: usize,
    pub loss: LossBreakdown,
    pub rel_l2: f64,
    pub coefficient: Option<f64>,
    pub seconds: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

pub const RUNLOG_HEADER: [&str; 9] = [
    "epoch",
    "total",
    "residual",
    "boundary",
    "initial",
    "observation",
    "rel_l2",
    "coefficient",
    "seconds",
];

fn opt_field(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl RunLog {
    pub fn last(&self) -> Option<&LogRow> {
        self.rows.last()
    }

    pub fn row_at(&self, epoch: usize) -> Option<&LogRow> {
        self.rows.iter().find(|r| r.epoch == epoch)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(RUNLOG_HEADER)?;
        for r in &self.rows {
            let l = &r.loss;
            w.write_record([
                r.epoch.to_string(),
                l.total.to_string(),
                l.residual_term.to_string(),
                l.boundary_term.to_string(),
                l.initial_term.to_string(),
                l.observation_term.to_string(),
                r.rel_l2.to_string(),
                opt_field(r.coefficient),
                opt_field(r.seconds),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A coefficient value recorded during an inverse run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientSample {
    pub epoch: usize,
    pub value: f64,
}

pub fn write_coefficient_csv<W: Write>(out: W, samples: &[CoefficientSample]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(["epoch", "C"])?;
    for s in samples {
        w.write_record([s.epoch.to_string(), s.value.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Anything that maps `(x, t)` to a prediction.
pub trait Predictor {
    fn predict(&self, x: f64, t: f64) -> f64;
}

impl Predictor for NetworkParams {
    fn predict(&self, x: f64, t: f64) -> f64 {
        self.forward(x, t)
    }
}

impl<F: Fn(f64, f64) -> f64> Predictor for F {
    fn predict(&self, x: f64, t: f64) -> f64 {
        self(x, t)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PredictionRow {
    pub x: f64,
    pub t: f64,
    pub y_hat: f64,
    pub u_exact: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelEvaluation {
    pub rows: Vec<PredictionRow>,
    pub rel_l2: f64,
}

impl ModelEvaluation {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(["x", "t", "y_hat", "u_exact"])?;
        for r in &self.rows {
            w.write_record([
                r.x.to_string(),
                r.t.to_string(),
                r.y_hat.to_string(),
                r.u_exact.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `‖ŷ − u*‖₂ / ‖u*‖₂`. Falls back to the absolute norm when the reference
/// is identically zero on the grid.
pub fn relative_l2(predicted: &[f64], reference: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (p, r) in predicted.iter().zip(reference) {
        num += (p - r) * (p - r);
        den += r * r;
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

pub fn evaluate_model<P: Predictor + ?Sized>(model: &P, grid: &[Point]) -> Result<ModelEvaluation> {
    if grid.is_empty() {
        return Err(PinnError::EmptyGrid);
    }
    let rows: Vec<PredictionRow> = grid
        .iter()
        .map(|p| PredictionRow {
            x: p.x,
            t: p.t,
            y_hat: model.predict(p.x, p.t),
            u_exact: exact_solution(p.x, p.t),
        })
        .collect();
    let y: Vec<f64> = rows.iter().map(|r| r.y_hat).collect();
    let u: Vec<f64> = rows.iter().map(|r| r.u_exact).collect();
    let rel_l2 = relative_l2(&y, &u);
    Ok(ModelEvaluation { rows, rel_l2 })
}

/// The fixed evaluation grid: [`EVAL_POINTS`] equispaced `x` at `t_min`.
pub fn evaluation_grid(domain: &SpaceTimeDomain) -> Vec<Point> {
    line_grid(domain, EVAL_POINTS, domain.t_min)
}

/// Largest `|u* − prescribed|` over the boundary points, i.e. how far the
/// chosen boundary condition is from the exact solution's wall trace.
pub fn boundary_mismatch(
    conds: &ConditionSpec,
    domain: &SpaceTimeDomain,
    boundary: &[Point],
) -> Result<f64> {
    boundary.iter().try_fold(0.0f64, |acc, p| {
        let prescribed = boundary_value(conds, domain, p.x, p.t)?;
        Ok(acc.max((exact_solution(p.x, p.t) - prescribed).abs()))
    })
}

/// Result of a finished run.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetworkParams,
    pub coefficient: Option<f64>,
    pub log: RunLog,
    pub coefficient_trace: Vec<CoefficientSample>,
}

impl TrainOutcome {
    pub fn final_row(&self) -> &LogRow {
        self.log.last().expect("a finished run has a final row")
    }
}

pub struct Trainer {
    config: TrainConfig,
    colloc: CollocationSet,
    loss: PinnLoss,
    theta: Vec<f64>,
    optimizer: Optimizer,
    epoch: usize,
    eval_grid: Vec<Point>,
    eval_truth: Vec<f64>,
    log: RunLog,
    coefficient_trace: Vec<CoefficientSample>,
    clock: Instant,
}

impl Trainer {
    /// Samples the point sets, initializes the network from the config seed
    /// and compiles the loss.
    pub fn new(config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let params = init_network(&config.architecture, config.init, config.seed)?;
        Self::with_params(config, params)
    }

    /// As [`Trainer::new`] but starting from given network parameters.
    pub fn with_params(config: TrainConfig, params: NetworkParams) -> Result<Self> {
        config.validate()?;
        if params.arch != config.architecture {
            return Err(PinnError::Config(
                "starting parameters do not match the configured architecture".into(),
            ));
        }
        let colloc = config.build_collocation()?;
        let conds = ConditionSpec::new(config.boundary);
        let loss = PinnLoss::assemble(
            &config.architecture,
            &config.residual,
            &conds,
            &config.domain,
            &colloc,
            &config.weights,
        )?;
        let mut theta = params.into_flat();
        if let ResidualSpec::Trainable(c) = config.residual {
            theta.push(c);
        }
        let optimizer = Optimizer::new(&config.optimizer, theta.len())?;
        let eval_grid = evaluation_grid(&config.domain);
        let eval_truth = eval_grid.iter().map(|p| exact_solution(p.x, p.t)).collect();
        Ok(Self {
            config,
            colloc,
            loss,
            theta,
            optimizer,
            epoch: 0,
            eval_grid,
            eval_truth,
            log: RunLog::default(),
            coefficient_trace: Vec::new(),
            clock: Instant::now(),
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn collocation(&self) -> &CollocationSet {
        &self.colloc
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn log(&self) -> &RunLog {
        &self.log
    }

    pub fn coefficient_trace(&self) -> &[CoefficientSample] {
        &self.coefficient_trace
    }

    /// Network parameters, without the coefficient.
    pub fn theta(&self) -> &[f64] {
        &self.theta[..self.config.architecture.param_count()]
    }

    pub fn coefficient(&self) -> Option<f64> {
        match self.config.residual {
            ResidualSpec::Trainable(_) => self.theta.last().copied(),
            ResidualSpec::Fixed(_) => None,
        }
    }

    pub fn params(&self) -> NetworkParams {
        NetworkParams::from_flat(self.config.architecture.clone(), self.theta().to_vec())
            .expect("trainer parameters are finite and sized")
    }

    /// Relative L2 error of the current parameters on the evaluation grid.
    pub fn current_rel_l2(&self) -> f64 {
        rel_l2_of(
            &self.config.architecture,
            self.theta(),
            &self.eval_grid,
            &self.eval_truth,
        )
    }

    fn non_finite(&self, detail: String) -> PinnError {
        PinnError::NonFiniteLoss {
            epoch: self.epoch,
            detail,
        }
    }

    fn record_row(&mut self, loss: LossBreakdown) -> Result<()> {
        let rel_l2 = self.current_rel_l2();
        if !rel_l2.is_finite() {
            return Err(self.non_finite("evaluation error is not finite".into()));
        }
        let seconds = self
            .config
            .record_wall_clock
            .then(|| self.clock.elapsed().as_secs_f64());
        self.log.rows.push(LogRow {
            epoch: self.epoch,
            loss,
            rel_l2,
            coefficient: self.coefficient(),
            seconds,
        });
        Ok(())
    }

    fn record_coefficient(&mut self) {
        if let Some(value) = self.coefficient() {
            self.coefficient_trace.push(CoefficientSample {
                epoch: self.epoch,
                value,
            });
        }
    }

    fn checked_value_and_gradient(&self) -> Result<(LossBreakdown, Vec<f64>)> {
        let (loss, grad) = self
            .loss
            .value_and_gradient(&self.theta)
            .map_err(|e| match e {
                PinnError::Autodiff(inner) => self.non_finite(inner.to_string()),
                other => other,
            })?;
        if !loss.is_finite() {
            return Err(self.non_finite(format!("loss terms {:?}", loss.terms())));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(self.non_finite(format!("gradient component {i} is {}", grad[i])));
        }
        Ok((loss, grad))
    }

    /// Takes optimizer steps until `target` epochs have been completed.
    pub fn run_to(&mut self, target: usize) -> Result<()> {
        while self.epoch < target {
            let (loss, grad) = self.checked_value_and_gradient()?;
            if self.epoch.is_multiple_of(self.config.log_every) {
                self.record_row(loss)?;
            }
            if self.epoch.is_multiple_of(self.config.coefficient_log_every) {
                self.record_coefficient();
            }
            self.optimizer.step(&mut self.theta, &grad)?;
            self.epoch += 1;
        }
        Ok(())
    }

    /// Runs the configured number of epochs and logs the final parameters.
    pub fn run(mut self) -> Result<TrainOutcome> {
        self.run_to(self.config.epochs)?;
        let final_epoch_logged = self.log.last().map(|r| r.epoch) == Some(self.epoch);
        if !final_epoch_logged {
            let loss = self.loss.evaluate(&self.theta).map_err(|e| match e {
                PinnError::Autodiff(inner) => self.non_finite(inner.to_string()),
                other => other,
            })?;
            if !loss.is_finite() {
                return Err(self.non_finite(format!("loss terms {:?}", loss.terms())));
            }
            self.record_row(loss)?;
        }
        if self.coefficient_trace.last().map(|s| s.epoch) != Some(self.epoch) {
            self.record_coefficient();
        }
        Ok(TrainOutcome {
            params: self.params(),
            coefficient: self.coefficient(),
            log: self.log,
            coefficient_trace: self.coefficient_trace,
        })
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config_hash: self.config.config_hash(),
            epoch: self.epoch,
            architecture: self.config.architecture.clone(),
            theta: self.theta.clone(),
            optimizer: OptimizerSnapshot::capture(&self.optimizer),
        }
    }

    /// Rebuilds a trainer from `config` and continues from `checkpoint`.
    /// The run log of the resumed trainer starts at the checkpoint epoch.
    pub fn resume(config: TrainConfig, checkpoint: &Checkpoint) -> Result<Self> {
        let mut trainer = Self::new(config)?;
        let hash = trainer.config.config_hash();
        if checkpoint.config_hash != hash {
            return Err(PinnError::Checkpoint(format!(
                "checkpoint was written for config {} but this config hashes to {hash}",
                checkpoint.config_hash
            )));
        }
        if checkpoint.architecture != trainer.config.architecture
            || checkpoint.theta.len() != trainer.theta.len()
        {
            return Err(PinnError::Checkpoint(
                "checkpoint parameters do not fit the configured model".into(),
            ));
        }
        trainer.theta = checkpoint.theta.clone();
        trainer.optimizer = checkpoint
            .optimizer
            .restore(&trainer.config.optimizer, trainer.theta.len())?;
        trainer.epoch = checkpoint.epoch;
        Ok(trainer)
    }
}

fn rel_l2_of(arch: &Architecture, theta: &[f64], grid: &[Point], truth: &[f64]) -> f64 {
    let y: Vec<f64> = grid
        .iter()
        .map(|p| predict(arch, theta, p.x, p.t))
        .collect();
    relative_l2(&y, truth)
}

/// Trains with a known transport coefficient.
pub fn train_forward(config: TrainConfig) -> Result<TrainOutcome> {
    if config.residual.is_trainable() {
        return Err(PinnError::Config(
            "forward training needs a fixed transport coefficient".into(),
        ));
    }
    Trainer::new(config)?.run()
}

/// Trains the network and the transport coefficient jointly against
/// observations. The outcome's `coefficient_trace` holds `C` every
/// `coefficient_log_every` epochs.
pub fn train_inverse(config: TrainConfig) -> Result<TrainOutcome> {
    check_inverse(&config)?;
    Trainer::new(config)?.run()
}

pub(crate) fn check_inverse(config: &TrainConfig) -> Result<()> {
    if !config.residual.is_trainable() {
        return Err(PinnError::Config(
            "inverse training needs a trainable transport coefficient".into(),
        ));
    }
    let has_observations = match &config.collocation {
        CollocationConfig::Sampled {
            observation_grid, ..
        } => observation_grid.is_some(),
        CollocationConfig::Explicit { observations, .. } => !observations.is_empty(),
    };
    if !has_observations || config.weights.w_obs == 0.0 {
        return Err(PinnError::Config(
            "inverse training needs observations with a positive weight".into(),
        ));
    }
    Ok(())
}
