//! Line-oriented text checkpoints.
//!
//! ```text
//! pinn-checkpoint 1
//! config_hash <16 hex digits>
//! epoch <completed epochs>
//! layer_sizes <sizes separated by spaces>
//! activation <sigmoid|tanh>
//! output_linear <true|false>
//! theta <n>
//! <n lines, one value each>
//! optimizer sgd
//! end
//! ```
//!
//! For Adam the `optimizer` line reads `optimizer adam <step count>` and is
//! followed by `first_moment <n>` and `second_moment <n>` blocks laid out like
//! `theta`. Values are written in shortest round-trip scientific notation, so
//! a checkpoint restores every bit. `theta` is the flat parameter vector,
//! followed by the transport coefficient for inverse runs.

use std::io::{BufRead, Write};

use crate::error::{PinnError, Result};
use crate::network::{Activation, Architecture};
use crate::optimizer::{AdamState, Optimizer, OptimizerConfig, OptimizerKind};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &str = "pinn-checkpoint";

#[derive(Clone, Debug, PartialEq)]
pub enum OptimizerSnapshot {
    Sgd,
    Adam(AdamState),
}

impl OptimizerSnapshot {
    pub fn capture(optimizer: &Optimizer) -> Self {
        match optimizer {
            Optimizer::Sgd { .. } => OptimizerSnapshot::Sgd,
            Optimizer::Adam { state, .. } => OptimizerSnapshot::Adam(state.clone()),
        }
    }

    pub fn restore(&self, config: &OptimizerConfig, n: usize) -> Result<Optimizer> {
        let mut optimizer = Optimizer::new(config, n)?;
        match (self, &mut optimizer) {
            (OptimizerSnapshot::Sgd, Optimizer::Sgd { .. }) => {}
            (OptimizerSnapshot::Adam(saved), Optimizer::Adam { state, .. }) => {
                if saved.first_moment.len() != n || saved.second_moment.len() != n {
                    return Err(PinnError::Checkpoint(
                        "optimizer moments do not match the parameter count".into(),
                    ));
                }
                *state = saved.clone();
            }
            _ => {
                return Err(PinnError::Checkpoint(format!(
                    "checkpoint optimizer differs from configured {:?}",
                    config.kind
                )))
            }
        }
        Ok(optimizer)
    }

    fn kind(&self) -> OptimizerKind {
        match self {
            OptimizerSnapshot::Sgd => OptimizerKind::Sgd,
            OptimizerSnapshot::Adam(_) => OptimizerKind::Adam,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config_hash: String,
    pub epoch: usize,
    pub architecture: Architecture,
    pub theta: Vec<f64>,
    pub optimizer: OptimizerSnapshot,
}

fn write_block<W: Write>(out: &mut W, name: &str, values: &[f64]) -> std::io::Result<()> {
    writeln!(out, "{name} {}", values.len())?;
    for v in values {
        writeln!(out, "{v:e}")?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<String> {
        self.number += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(self.error("unexpected end of file")),
        }
    }

    fn error(&self, msg: impl std::fmt::Display) -> PinnError {
        PinnError::Checkpoint(format!("line {}: {msg}", self.number))
    }

    /// Reads `key value…` and returns the remainder after the key.
    fn field(&mut self, key: &str) -> Result<String> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest.to_string()),
            _ if line == key => Ok(String::new()),
            _ => Err(self.error(format!("expected `{key}`, found `{line}`"))),
        }
    }

    fn parse<T: std::str::FromStr>(&self, s: &str, what: &str) -> Result<T> {
        s.trim()
            .parse()
            .map_err(|_| self.error(format!("invalid {what} `{s}`")))
    }

    fn block(&mut self, key: &str) -> Result<Vec<f64>> {
        let n: usize = {
            let raw = self.field(key)?;
            self.parse(&raw, "length")?
        };
        (0..n)
            .map(|_| {
                let line = self.next_line()?;
                let v: f64 = self.parse(&line, "value")?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(self.error("non-finite value"))
                }
            })
            .collect()
    }
}

impl Checkpoint {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{MAGIC} {CHECKPOINT_VERSION}")?;
        writeln!(out, "config_hash {}", self.config_hash)?;
        writeln!(out, "epoch {}", self.epoch)?;
        let sizes: Vec<String> = self
            .architecture
            .layer_sizes
            .iter()
            .map(|s| s.to_string())
            .collect();
        writeln!(out, "layer_sizes {}", sizes.join(" "))?;
        let activation = match self.architecture.activation {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        };
        writeln!(out, "activation {activation}")?;
        writeln!(out, "output_linear {}", self.architecture.output_linear)?;
        write_block(&mut out, "theta", &self.theta)?;
        match &self.optimizer {
            OptimizerSnapshot::Sgd => writeln!(out, "optimizer sgd")?,
            OptimizerSnapshot::Adam(state) => {
                writeln!(out, "optimizer adam {}", state.step_count)?;
                write_block(&mut out, "first_moment", &state.first_moment)?;
                write_block(&mut out, "second_moment", &state.second_moment)?;
            }
        }
        writeln!(out, "end")?;
        out.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = Lines {
            inner: input.lines(),
            number: 0,
        };
        let version = lines.field(MAGIC)?;
        let version: u32 = lines.parse(&version, "version")?;
        if version != CHECKPOINT_VERSION {
            return Err(lines.error(format!("unsupported checkpoint version {version}")));
        }
        let config_hash = lines.field("config_hash")?;
        let epoch = {
            let raw = lines.field("epoch")?;
            lines.parse(&raw, "epoch")?
        };
        let sizes = lines.field("layer_sizes")?;
        let layer_sizes = sizes
            .split_whitespace()
            .map(|s| lines.parse(s, "layer size"))
            .collect::<Result<Vec<usize>>>()?;
        let activation = match lines.field("activation")?.as_str() {
            "sigmoid" => Activation::Sigmoid,
            "tanh" => Activation::Tanh,
            other => return Err(lines.error(format!("unknown activation `{other}`"))),
        };
        let output_linear = {
            let raw = lines.field("output_linear")?;
            lines.parse(&raw, "flag")?
        };
        let architecture = Architecture::new(layer_sizes, activation, output_linear)
            .map_err(|e| lines.error(e))?;
        let theta = lines.block("theta")?;
        let opt = lines.field("optimizer")?;
        let mut words = opt.split_whitespace();
        let optimizer = match (words.next(), words.next()) {
            (Some("sgd"), None) => OptimizerSnapshot::Sgd,
            (Some("adam"), Some(steps)) => {
                let step_count = lines.parse(steps, "step count")?;
                let first_moment = lines.block("first_moment")?;
                let second_moment = lines.block("second_moment")?;
                OptimizerSnapshot::Adam(AdamState {
                    first_moment,
                    second_moment,
                    step_count,
                })
            }
            _ => return Err(lines.error(format!("unknown optimizer `{opt}`"))),
        };
        lines.field("end")?;
        let extra = architecture.param_count();
        if theta.len() != extra && theta.len() != extra + 1 {
            return Err(PinnError::Checkpoint(format!(
                "theta has {} values but the architecture needs {extra} (or {} with a coefficient)",
                theta.len(),
                extra + 1
            )));
        }
        Ok(Checkpoint {
            config_hash,
            epoch,
            architecture,
            theta,
            optimizer,
        })
    }

    pub fn optimizer_kind(&self) -> OptimizerKind {
        self.optimizer.kind()
    }
}
