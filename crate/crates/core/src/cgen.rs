//! Conditional generators: a toy cGAN trained on vector data, and a
//! corrupted oracle that samples the true family with known defect rates.

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::{KvDoc, KvReader};
use crate::data::{Dataset, Label, Provenance, Sample, SynthConfig, Task};
use crate::error::{Error, Result};
use crate::nn::{init_params, NetParams, NetSpec, OutputKind, Sgd, Workspace};
use crate::rng;
use crate::textfmt;

/// Label corruption applied by the oracle generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelNoise {
    /// With this probability, features are drawn from a uniformly chosen
    /// wrong class.
    Flip(f64),
    /// Features are drawn at `clamp(y + N(0, std^2), 0, 1)`.
    Gaussian(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorHandle {
    TrainedCgan {
        generator: NetParams,
        noise_dim: usize,
        task: Task,
        dim: usize,
    },
    CorruptedOracle {
        base: SynthConfig,
        label_noise: LabelNoise,
        junk_prob: f64,
        /// Standard deviation of the off-manifold Gaussian used for junk.
        junk_spread: f64,
    },
}

/// Ground truth behind one generated sample, known only for the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truth {
    /// Label whose conditional distribution produced the features (`None`
    /// for junk and for trained generators).
    pub actual: Option<Label>,
    pub junk: bool,
}

/// Anything that can produce features for a requested label from an
/// indexed random stream.
pub trait Generate {
    fn task(&self) -> Task;
    fn dim(&self) -> usize;
    /// Features for `label` using stream `index` under `seed`.
    fn draw(&self, label: &Label, seed: u64, index: u64) -> (Vec<f64>, Truth);
}

pub fn make_oracle(base: SynthConfig, label_noise: LabelNoise, junk_prob: f64, junk_spread: f64) -> Result<GeneratorHandle> {
    base.validate()?;
    let p_ok = |p: f64| (0.0..=1.0).contains(&p);
    match (label_noise, base.task()) {
        (LabelNoise::Flip(p), Task::Classification { .. }) if p_ok(p) => {}
        (LabelNoise::Gaussian(s), Task::Regression { .. }) if s >= 0.0 => {}
        _ => {
            return Err(Error::InvalidArgument(format!(
                "label noise {label_noise:?} invalid for task {:?}",
                base.task()
            )))
        }
    }
    if !p_ok(junk_prob) || !(junk_spread >= 0.0) {
        return Err(Error::InvalidArgument("junk_prob must be in [0,1] and junk_spread >= 0".into()));
    }
    Ok(GeneratorHandle::CorruptedOracle {
        base,
        label_noise,
        junk_prob,
        junk_spread,
    })
}

impl Generate for GeneratorHandle {
    fn task(&self) -> Task {
        match self {
            GeneratorHandle::TrainedCgan { task, .. } => *task,
            GeneratorHandle::CorruptedOracle { base, .. } => base.task(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            GeneratorHandle::TrainedCgan { dim, .. } => *dim,
            GeneratorHandle::CorruptedOracle { base, .. } => base.dim,
        }
    }

    fn draw(&self, label: &Label, seed: u64, index: u64) -> (Vec<f64>, Truth) {
        let mut rng = rng::item_stream(seed, index);
        match self {
            GeneratorHandle::CorruptedOracle {
                base,
                label_noise,
                junk_prob,
                junk_spread,
            } => {
                let actual = match (*label_noise, *label) {
                    (LabelNoise::Flip(p), Label::Class(c)) => {
                        let classes = base.task().classes().unwrap_or(1);
                        if classes > 1 && rng.random::<f64>() < p {
                            let other = rng.random_range(0..classes - 1);
                            Label::Class(if other >= c { other + 1 } else { other })
                        } else {
                            Label::Class(c)
                        }
                    }
                    (LabelNoise::Gaussian(s), Label::Scalar(y)) => {
                        let z: f64 = rng.sample(StandardNormal);
                        Label::Scalar((y + s * z).clamp(0.0, 1.0))
                    }
                    _ => *label,
                };
                if rng.random::<f64>() < *junk_prob {
                    let x = (0..base.dim)
                        .map(|_| junk_spread * rng.sample::<f64, _>(StandardNormal))
                        .collect();
                    (x, Truth { actual: None, junk: true })
                } else {
                    (
                        base.draw_features(&actual, &mut rng),
                        Truth {
                            actual: Some(actual),
                            junk: false,
                        },
                    )
                }
            }
            GeneratorHandle::TrainedCgan {
                generator,
                noise_dim,
                task,
                ..
            } => {
                let mut input: Vec<f64> = (0..*noise_dim).map(|_| rng.sample(StandardNormal)).collect();
                task.encode_label(label, &mut input);
                let x = generator.forward(&input).expect("generator input width");
                (x, Truth { actual: None, junk: false })
            }
        }
    }
}

/// Labels drawn with replacement from the empirical label distribution.
pub fn sample_labels(train_set: &Dataset, n: usize, seed: u64) -> Result<Vec<Label>> {
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let mut rng = rng::stream(seed);
    Ok((0..n)
        .map(|_| train_set.samples[rng.random_range(0..train_set.len())].label)
        .collect())
}

/// One fake sample per requested label, in order, tagged `fake_raw`.
/// Sample `i` only depends on `(seed, i, labels[i])`, so a shorter request is
/// a prefix of a longer one.
pub fn sample<G: Generate>(generator: &G, labels: &[Label], seed: u64) -> Result<Dataset> {
    Ok(sample_traced(generator, labels, seed)?.0)
}

pub fn sample_traced<G: Generate>(generator: &G, labels: &[Label], seed: u64) -> Result<(Dataset, Vec<Truth>)> {
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no labels requested".into()));
    }
    let task = generator.task();
    let mut ds = Dataset::new(task, generator.dim());
    let mut truth = Vec::with_capacity(labels.len());
    for (i, label) in labels.iter().enumerate() {
        task.check_label(label)?;
        let (features, t) = generator.draw(label, seed, i as u64);
        ds.samples.push(Sample {
            features,
            label: *label,
            provenance: Provenance::FakeRaw,
        });
        truth.push(t);
    }
    Ok((ds, truth))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanTrainConfig {
    pub iterations: usize,
    pub batch_size: usize,
    pub generator_lr: f64,
    pub discriminator_lr: f64,
    pub momentum: f64,
    pub noise_dim: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl GanTrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.noise_dim == 0 || self.hidden.is_empty() {
            return Err(Error::InvalidArgument("batch size, noise dim and hidden widths must be positive".into()));
        }
        if !(self.generator_lr > 0.0 && self.discriminator_lr > 0.0) {
            return Err(Error::InvalidArgument("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// `log(1 + exp(x))` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-iteration losses of a cGAN run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GanHistory {
    pub discriminator: Vec<f64>,
    pub generator: Vec<f64>,
}

/// Trains a conditional GAN with the non-saturating logistic loss. The label
/// encoding is concatenated to the generator's noise and to the
/// discriminator's features. Aborts on a non-finite loss.
pub fn train_cgan(train_set: &Dataset, config: &GanTrainConfig) -> Result<(GeneratorHandle, GanHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let task = train_set.task;
    let dim = train_set.dim;
    let enc = task.encoding_width();
    let g_spec = NetSpec::new(config.noise_dim + enc, config.hidden.clone(), OutputKind::Linear(dim))?;
    let d_spec = NetSpec::new(dim + enc, config.hidden.clone(), OutputKind::Linear(1))?;
    let mut g = init_params(&g_spec, rng::derive_seed(config.seed, "generator-init"));
    let mut d = init_params(&d_spec, rng::derive_seed(config.seed, "discriminator-init"));
    let mut g_opt = Sgd::new(&g, config.momentum, 0.0);
    let mut d_opt = Sgd::new(&d, config.momentum, 0.0);
    let mut g_ws = Workspace::new(&g);
    let mut d_ws = Workspace::new(&d);
    let mut g_grads = g.zero_grads();
    let mut d_grads = d.zero_grads();
    let mut d_scratch = d.zero_grads();
    let mut rng = rng::stream(rng::derive_seed(config.seed, "gan-batches"));
    let mut history = GanHistory::default();

    let b = config.batch_size;
    let scale = 1.0 / b as f64;
    let mut g_in = Vec::with_capacity(config.noise_dim + enc);
    let mut d_in = Vec::with_capacity(dim + enc);
    let mut d_x = vec![0.0; dim + enc];

    for it in 0..config.iterations {
        // discriminator step
        crate::nn::clear_grads(&mut d_grads);
        let mut d_loss = 0.0;
        for _ in 0..b {
            let real = &train_set.samples[rng.random_range(0..train_set.len())];
            d_in.clear();
            d_in.extend_from_slice(&real.features);
            task.encode_label(&real.label, &mut d_in);
            let s = d_ws.forward(&d, &d_in)[0];
            d_loss += softplus(-s);
            d_ws.backward(&d, &[sigmoid(s) - 1.0], scale, &mut d_grads, None);

            let label = train_set.samples[rng.random_range(0..train_set.len())].label;
            g_in.clear();
            g_in.extend((0..config.noise_dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
            task.encode_label(&label, &mut g_in);
            let fake = g_ws.forward(&g, &g_in);
            d_in.clear();
            d_in.extend_from_slice(fake);
            task.encode_label(&label, &mut d_in);
            let s = d_ws.forward(&d, &d_in)[0];
            d_loss += softplus(s);
            d_ws.backward(&d, &[sigmoid(s)], scale, &mut d_grads, None);
        }
        d_opt.step(&mut d, &d_grads, config.discriminator_lr);

        // generator step
        crate::nn::clear_grads(&mut g_grads);
        let mut g_loss = 0.0;
        for _ in 0..b {
            let label = train_set.samples[rng.random_range(0..train_set.len())].label;
            g_in.clear();
            g_in.extend((0..config.noise_dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
            task.encode_label(&label, &mut g_in);
            let fake = g_ws.forward(&g, &g_in);
            d_in.clear();
            d_in.extend_from_slice(fake);
            task.encode_label(&label, &mut d_in);
            let s = d_ws.forward(&d, &d_in)[0];
            g_loss += softplus(-s);
            d_ws.backward(&d, &[sigmoid(s) - 1.0], 1.0, &mut d_scratch, Some(&mut d_x));
            g_ws.backward(&g, &d_x[..dim], scale, &mut g_grads, None);
        }
        g_opt.step(&mut g, &g_grads, config.generator_lr);

        let (dl, gl) = (d_loss * scale, g_loss * scale);
        if !dl.is_finite() || !gl.is_finite() || !g.is_finite() || !d.is_finite() {
            return Err(Error::Divergence(format!(
                "cGAN iteration {it}: discriminator loss {dl}, generator loss {gl}"
            )));
        }
        history.discriminator.push(dl);
        history.generator.push(gl);
    }

    Ok((
        GeneratorHandle::TrainedCgan {
            generator: g,
            noise_dim: config.noise_dim,
            task,
            dim,
        },
        history,
    ))
}

pub const GENERATOR_FORMAT: &str = "cgankd-generator v1";

pub(crate) fn write_task(doc: &mut KvDoc, prefix: &str, task: Task) {
    match task {
        Task::Classification { classes } => {
            doc.set(&format!("{prefix}.kind"), "classification");
            doc.set(&format!("{prefix}.classes"), classes);
        }
        Task::Regression { lo, hi } => {
            doc.set(&format!("{prefix}.kind"), "regression");
            doc.set(&format!("{prefix}.lo"), lo);
            doc.set(&format!("{prefix}.hi"), hi);
        }
    }
}

pub(crate) fn read_task(r: &mut KvReader<'_>, prefix: &str) -> Result<Task> {
    match r.str(&format!("{prefix}.kind"))? {
        "classification" => Ok(Task::Classification {
            classes: r.get(&format!("{prefix}.classes"))?,
        }),
        "regression" => Ok(Task::Regression {
            lo: r.get(&format!("{prefix}.lo"))?,
            hi: r.get(&format!("{prefix}.hi"))?,
        }),
        other => Err(Error::Config(format!("unknown task `{other}`"))),
    }
}

impl GeneratorHandle {
    pub fn to_doc(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set(textfmt::FORMAT_KEY, GENERATOR_FORMAT);
        match self {
            GeneratorHandle::CorruptedOracle {
                base,
                label_noise,
                junk_prob,
                junk_spread,
            } => {
                doc.set("kind", "oracle");
                textfmt::write_synth(&mut doc, "base", base);
                match label_noise {
                    LabelNoise::Flip(p) => doc.set("flip_prob", p),
                    LabelNoise::Gaussian(s) => doc.set("label_std", s),
                }
                doc.set("junk_prob", junk_prob);
                doc.set("junk_spread", junk_spread);
            }
            GeneratorHandle::TrainedCgan {
                generator,
                noise_dim,
                task,
                dim,
            } => {
                doc.set("kind", "cgan");
                doc.set("noise_dim", noise_dim);
                doc.set("dim", dim);
                write_task(&mut doc, "task", *task);
                textfmt::write_net(&mut doc, "generator", generator);
            }
        }
        doc
    }

    pub fn from_doc(doc: &KvDoc) -> Result<Self> {
        let mut r = doc.reader();
        textfmt::check_format(&mut r, GENERATOR_FORMAT)?;
        let handle = match r.str("kind")? {
            "oracle" => {
                let base = textfmt::read_synth(&mut r, "base", 1, 0)?;
                let noise = if r.has("flip_prob") {
                    LabelNoise::Flip(r.get("flip_prob")?)
                } else {
                    LabelNoise::Gaussian(r.get("label_std")?)
                };
                make_oracle(base, noise, r.get("junk_prob")?, r.get("junk_spread")?)?
            }
            "cgan" => GeneratorHandle::TrainedCgan {
                noise_dim: r.get("noise_dim")?,
                dim: r.get("dim")?,
                task: read_task(&mut r, "task")?,
                generator: textfmt::read_net(&mut r, "generator")?,
            },
            other => return Err(Error::Config(format!("unknown generator kind `{other}`"))),
        };
        r.finish()?;
        Ok(handle)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_doc().to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&KvDoc::load(path)?)
    }
}
