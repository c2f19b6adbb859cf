//! Deterministic SGD training, from scratch or against a frozen teacher.

use serde::{Deserialize, Serialize};

use super::loss::{bce_with_logits, kd_loss_per_bit, sigmoid, total_loss};
use super::net::{backward, LogitLoss, LossParts, Net, NetSpec};
use super::KdError;

/// Distillation hyperparameters of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillConfig {
    /// Weight on the student's hard-label loss.
    pub alpha: f64,
    /// Softmax temperature applied to both teacher and student logits.
    pub temperature: f64,
}

impl DistillConfig {
    pub fn validate(&self) -> Result<(), KdError> {
        if !(self.temperature > 0.0) {
            return Err(KdError::InvalidTemperature(self.temperature));
        }
        if self.alpha < 0.0 || !self.alpha.is_finite() {
            return Err(KdError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

/// Trainer settings. Plain SGD with a fixed learning rate; everything is
/// derived from the seed so reruns reproduce bit for bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub n_steps: usize,
    pub batch_size: usize,
}

/// One minibatch: feature vectors and 0/1 bit targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

/// Deterministic stream of training batches.
pub trait BatchSource {
    fn batch(&mut self, step: usize, size: usize) -> Batch;
}

/// What the trainer optimises.
pub enum Objective<'a> {
    /// Mean binary cross-entropy against the hard bits.
    Scratch,
    /// `alpha * L_student + L_KD` against a frozen teacher.
    Distill {
        teacher: &'a Net,
        config: DistillConfig,
    },
}

/// Loss record for one step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub total: f64,
    pub student: f64,
    pub kd: f64,
}

/// The result of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRun {
    pub config: TrainConfig,
    pub loss_history: Vec<LossRecord>,
    pub net: Net,
}

struct ScratchLoss<'a> {
    targets: &'a [Vec<f64>],
}

impl LogitLoss for ScratchLoss<'_> {
    fn eval(&self, sample: usize, logits: &[f64]) -> Result<(LossParts, Vec<f64>), KdError> {
        let y = &self.targets[sample];
        if y.len() != logits.len() {
            return Err(KdError::DimensionMismatch {
                expected: y.len(),
                got: logits.len(),
            });
        }
        let n = logits.len() as f64;
        let mut loss = 0.0;
        let mut grad = Vec::with_capacity(logits.len());
        for (&z, &t) in logits.iter().zip(y) {
            loss += bce_with_logits(z, t) / n;
            grad.push((sigmoid(z) - t) / n);
        }
        Ok((
            LossParts {
                total: loss,
                student: loss,
                kd: 0.0,
            },
            grad,
        ))
    }
}

struct DistillLoss<'a> {
    targets: &'a [Vec<f64>],
    teacher_logits: Vec<Vec<f64>>,
    alpha: f64,
    temperature: f64,
}

impl LogitLoss for DistillLoss<'_> {
    fn eval(&self, sample: usize, logits: &[f64]) -> Result<(LossParts, Vec<f64>), KdError> {
        let y = &self.targets[sample];
        let zt = &self.teacher_logits[sample];
        if y.len() != logits.len() || zt.len() != logits.len() {
            return Err(KdError::DimensionMismatch {
                expected: y.len(),
                got: logits.len(),
            });
        }
        let n = logits.len() as f64;
        let t = self.temperature;
        let mut student = 0.0;
        let mut grad = Vec::with_capacity(logits.len());
        for ((&z, &target), &teacher) in logits.iter().zip(y).zip(zt) {
            student += bce_with_logits(z, target) / n;
            // d/dz of the per-bit mean: alpha * (sigma(z) - y) / n for the
            // hard term, (sigma(z/T) - sigma(zt/T)) / (T n) for the KL term.
            let g_student = (sigmoid(z) - target) / n;
            let g_kd = (sigmoid(z / t) - sigmoid(teacher / t)) / (t * n);
            grad.push(self.alpha * g_student + g_kd);
        }
        let kd = kd_loss_per_bit(zt, logits, t)?;
        Ok((
            LossParts {
                total: total_loss(student, kd, self.alpha),
                student,
                kd,
            },
            grad,
        ))
    }
}

/// Run SGD for `config.n_steps` over batches from `data`.
///
/// The teacher is frozen when distilling. Loss is recorded at the
/// parameters each gradient was computed from; a non-finite loss aborts
/// with the offending step.
pub fn train(
    student: NetSpec,
    config: &TrainConfig,
    data: &mut dyn BatchSource,
    objective: &Objective<'_>,
) -> Result<TrainRun, KdError> {
    if let Objective::Distill { config: dc, .. } = objective {
        dc.validate()?;
    }
    let mut net = Net::init(student, config.seed);
    let mut loss_history = Vec::with_capacity(config.n_steps);
    for step in 0..config.n_steps {
        let batch = data.batch(step, config.batch_size);
        let (parts, grad) = step_loss_and_grad(&net, &batch, objective)?;
        if !parts.total.is_finite() {
            return Err(KdError::Diverged { step });
        }
        for (p, g) in net.params.iter_mut().zip(&grad) {
            *p -= config.learning_rate * g;
        }
        loss_history.push(LossRecord {
            step,
            total: parts.total,
            student: parts.student,
            kd: parts.kd,
        });
    }
    Ok(TrainRun {
        config: *config,
        loss_history,
        net,
    })
}

fn step_loss_and_grad(
    net: &Net,
    batch: &Batch,
    objective: &Objective<'_>,
) -> Result<(LossParts, Vec<f64>), KdError> {
    match objective {
        Objective::Scratch => {
            let loss = ScratchLoss {
                targets: &batch.targets,
            };
            backward(net, &batch.inputs, &loss)
        }
        Objective::Distill { teacher, config } => {
            let teacher_logits = batch
                .inputs
                .iter()
                .map(|x| teacher.forward(x))
                .collect::<Result<Vec<_>, _>>()?;
            let loss = DistillLoss {
                targets: &batch.targets,
                teacher_logits,
                alpha: config.alpha,
                temperature: config.temperature,
            };
            backward(net, &batch.inputs, &loss)
        }
    }
}

// ---------------------------------------------------------------------------
// Checkpoints and loss history files
// ---------------------------------------------------------------------------

const CHECKPOINT_VERSION: u32 = 1;

/// Versioned JSON record of a trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub spec: NetSpec,
    pub params: Vec<f64>,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(net: &Net, seed: u64) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            spec: net.spec,
            params: net.params.clone(),
            seed,
        }
    }

    pub fn net(&self) -> Net {
        Net {
            spec: self.spec,
            params: self.params.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, KdError> {
        let cp: Checkpoint = serde_json::from_str(text).map_err(|e| KdError::BadCheckpoint {
            message: e.to_string(),
        })?;
        if cp.version != CHECKPOINT_VERSION {
            return Err(KdError::BadCheckpoint {
                message: format!(
                    "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                    cp.version
                ),
            });
        }
        if cp.params.len() != cp.spec.n_params() {
            return Err(KdError::BadCheckpoint {
                message: format!(
                    "parameter vector has {} entries, spec requires {}",
                    cp.params.len(),
                    cp.spec.n_params()
                ),
            });
        }
        Ok(cp)
    }
}

/// Loss history as `step,L,L_student,L_KD` CSV.
pub fn loss_history_to_csv(history: &[LossRecord]) -> String {
    let mut out = String::from("step,L,L_student,L_KD\n");
    for r in history {
        out.push_str(&format!("{},{},{},{}\n", r.step, r.total, r.student, r.kd));
    }
    out
}

pub fn loss_history_from_csv(text: &str) -> Result<Vec<LossRecord>, KdError> {
    let mut records = Vec::new();
    let mut header_seen = false;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !header_seen {
            if line != "step,L,L_student,L_KD" {
                return Err(KdError::BadLossCsv {
                    line: i + 1,
                    message: "expected header `step,L,L_student,L_KD`".into(),
                });
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(KdError::BadLossCsv {
                line: i + 1,
                message: "expected 4 fields".into(),
            });
        }
        let parse = |s: &str| -> Result<f64, KdError> {
            s.parse().map_err(|_| KdError::BadLossCsv {
                line: i + 1,
                message: format!("bad number `{s}`"),
            })
        };
        records.push(LossRecord {
            step: fields[0].parse().map_err(|_| KdError::BadLossCsv {
                line: i + 1,
                message: format!("bad step `{}`", fields[0]),
            })?,
            total: parse(fields[1])?,
            student: parse(fields[2])?,
            kd: parse(fields[3])?,
        });
    }
    Ok(records)
}
