use rand::seq::SliceRandom;

use super::loss::{argmax, loss_and_grad, softmax_into, LossKind, SoftLabel, Target};
use super::{clear_grads, Gradients, NetParams, OutputKind, Sgd, Workspace};
use crate::data::{Dataset, Label, Sample, Task};
use crate::error::{Error, Result};
use crate::rng;

/// Step learning-rate schedule: multiply by `factor` at each epoch listed in
/// `decay_epochs`.
#[derive(Debug, Clone, PartialEq)]
pub struct LrSchedule {
    pub initial: f64,
    pub decay_epochs: Vec<usize>,
    pub factor: f64,
}

impl LrSchedule {
    pub fn constant(lr: f64) -> Self {
        LrSchedule {
            initial: lr,
            decay_epochs: Vec::new(),
            factor: 1.0,
        }
    }

    pub fn at(&self, epoch: usize) -> f64 {
        let decays = self.decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.initial * self.factor.powi(decays as i32)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: LrSchedule,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub loss: LossKind,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if !(self.lr.initial > 0.0) {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument("momentum must be in [0,1), weight decay >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: NetParams,
    /// Mean training loss of each epoch.
    pub history: Vec<f64>,
}

fn target_of(label: &Label) -> Target {
    match *label {
        Label::Class(c) => Target::Class(c),
        Label::Scalar(y) => Target::Scalar(y),
    }
}

pub(crate) fn check_compat(params: &NetParams, task: Task, loss: &LossKind) -> Result<()> {
    let ok = match (params.spec().output(), task, loss) {
        (OutputKind::Logits(c), Task::Classification { classes }, l) => c == classes && l.is_classification(),
        (OutputKind::NonnegScalar, Task::Regression { .. }, LossKind::PlainSe) => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::TaskMismatch(format!(
            "network output {:?} with task {task:?} and loss {loss:?}",
            params.spec().output()
        )))
    }
}

/// Soft labels of `teacher` at temperature `t` for every sample.
pub(crate) fn teacher_soft_labels(teacher: &NetParams, samples: &[Sample], t: f64) -> Vec<Vec<f64>> {
    let mut ws = Workspace::new(teacher);
    samples
        .iter()
        .map(|s| {
            let logits = ws.forward(teacher, &s.features);
            let mut p = vec![0.0; logits.len()];
            softmax_into(logits, t, &mut p);
            p
        })
        .collect()
}

/// Accumulates the gradient of the mean loss over `batch` into `grads` and
/// returns the summed loss.
#[allow(clippy::too_many_arguments)]
fn accumulate(
    params: &NetParams,
    ws: &mut Workspace,
    batch: impl Iterator<Item = (usize, f64)>,
    samples: &[Sample],
    loss: &LossKind,
    teacher: Option<&[Vec<f64>]>,
    grads: &mut Gradients,
    buffers: &mut (Vec<f64>, Vec<f64>),
) -> Result<f64> {
    let (scratch, d_out) = buffers;
    let mut total = 0.0;
    for (i, scale) in batch {
        let s = &samples[i];
        if s.features.len() != params.spec().input_dim() {
            return Err(Error::DimensionMismatch {
                expected: params.spec().input_dim(),
                found: s.features.len(),
            });
        }
        let out = ws.forward(params, &s.features);
        d_out.iter_mut().for_each(|g| *g = 0.0);
        let t = teacher.map(|t| t[i].as_slice());
        total += loss_and_grad(loss, out, target_of(&s.label), t, scratch, Some(d_out))?;
        ws.backward(params, d_out, scale, grads, None);
    }
    Ok(total)
}

/// Exact gradient of the mean loss over `batch`, plus that mean loss.
pub fn gradients(
    params: &NetParams,
    batch: &[Sample],
    loss: &LossKind,
    teacher_soft: Option<&[SoftLabel]>,
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    loss.validate()?;
    if loss.needs_teacher() && teacher_soft.map(<[_]>::len) != Some(batch.len()) {
        return Err(Error::InvalidArgument("BLKD needs one teacher soft label per sample".into()));
    }
    let teacher: Option<Vec<Vec<f64>>> = teacher_soft.map(|t| t.iter().map(|s| s.probs.clone()).collect());
    let mut ws = Workspace::new(params);
    let mut grads = params.zero_grads();
    let width = params.spec().output_width();
    let mut buffers = (vec![0.0; width], vec![0.0; width]);
    let scale = 1.0 / batch.len() as f64;
    let total = accumulate(
        params,
        &mut ws,
        (0..batch.len()).map(|i| (i, scale)),
        batch,
        loss,
        teacher.as_deref(),
        &mut grads,
        &mut buffers,
    )?;
    Ok((total / batch.len() as f64, grads))
}

/// Mini-batch SGD. The shuffle of epoch `e` comes from the stream derived
/// from `(config.seed, e)`; BLKD teacher soft labels are computed once for
/// every sample (real or fake) at the configured temperature.
pub fn train(
    params: &NetParams,
    dataset: &Dataset,
    config: &TrainConfig,
    teacher: Option<&NetParams>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_compat(params, dataset.task, &config.loss)?;
    if dataset.dim != params.spec().input_dim() {
        return Err(Error::DimensionMismatch {
            expected: params.spec().input_dim(),
            found: dataset.dim,
        });
    }
    let teacher_soft = match (config.loss, teacher) {
        (LossKind::Blkd { temperature, .. }, Some(t)) => {
            check_compat(t, dataset.task, &LossKind::PlainCe)?;
            Some(teacher_soft_labels(t, &dataset.samples, temperature))
        }
        (LossKind::Blkd { .. }, None) => {
            return Err(Error::InvalidArgument("BLKD training requires a teacher".into()))
        }
        (_, Some(_)) => return Err(Error::InvalidArgument("a teacher is only used with the BLKD loss".into())),
        (_, None) => None,
    };

    let mut params = params.clone();
    let mut ws = Workspace::new(&params);
    let mut grads = params.zero_grads();
    let mut opt = Sgd::new(&params, config.momentum, config.weight_decay);
    let width = params.spec().output_width();
    let mut buffers = (vec![0.0; width], vec![0.0; width]);
    let n = dataset.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.sort_unstable();
        let mut shuffle_rng = rng::stream(rng::derive_index(config.seed, epoch as u64));
        order.shuffle(&mut shuffle_rng);
        let lr = config.lr.at(epoch);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            clear_grads(&mut grads);
            let scale = 1.0 / batch.len() as f64;
            epoch_loss += accumulate(
                &params,
                &mut ws,
                batch.iter().map(|&i| (i, scale)),
                &dataset.samples,
                &config.loss,
                teacher_soft.as_deref(),
                &mut grads,
                &mut buffers,
            )?;
            opt.step(&mut params, &grads, lr);
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() || !params.is_finite() {
            return Err(Error::Divergence(format!("non-finite loss at epoch {epoch}")));
        }
        history.push(mean);
    }
    Ok(TrainOutcome { params, history })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    /// Fraction of correct argmax predictions.
    Top1(f64),
    /// Mean absolute error in label units.
    Mae(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub value: MetricValue,
    pub sample_count: usize,
}

impl Metrics {
    pub fn raw(&self) -> f64 {
        match self.value {
            MetricValue::Top1(v) | MetricValue::Mae(v) => v,
        }
    }

    /// Larger is better for both tasks (negated MAE).
    pub fn score(&self) -> f64 {
        match self.value {
            MetricValue::Top1(v) => v,
            MetricValue::Mae(v) => -v,
        }
    }
}

/// Network output for every sample (logits, or the scalar prediction).
pub fn predict(params: &NetParams, samples: &[Sample]) -> Vec<Vec<f64>> {
    let mut ws = Workspace::new(params);
    samples.iter().map(|s| ws.forward(params, &s.features).to_vec()).collect()
}

/// Top-1 accuracy for classification; MAE on unnormalized labels for
/// regression.
pub fn evaluate(params: &NetParams, dataset: &Dataset) -> Result<Metrics> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let loss = if dataset.task.is_classification() {
        LossKind::PlainCe
    } else {
        LossKind::PlainSe
    };
    check_compat(params, dataset.task, &loss)?;
    let mut ws = Workspace::new(params);
    let n = dataset.len();
    let value = match dataset.task {
        Task::Classification { .. } => {
            let correct = dataset
                .samples
                .iter()
                .filter(|s| Some(argmax(ws.forward(params, &s.features))) == s.label.class())
                .count();
            MetricValue::Top1(correct as f64 / n as f64)
        }
        task @ Task::Regression { .. } => {
            let total: f64 = dataset
                .samples
                .iter()
                .map(|s| {
                    let pred = ws.forward(params, &s.features)[0];
                    let y = s.label.scalar().unwrap_or(f64::NAN);
                    (task.unnormalize(pred) - task.unnormalize(y)).abs()
                })
                .sum();
            MetricValue::Mae(total / n as f64)
        }
    };
    Ok(Metrics {
        value,
        sample_count: n,
    })
}
