//! Density-ratio rejection sampling of generator output.
//!
//! A binary classifier separates real `(x, y)` pairs from generated ones.
//! Its odds, rescaled by the fake-to-real sample ratio, estimate
//! `p_r(x|y) / p_g(x|y)`. A candidate is accepted with probability
//! `min(ratio / ceiling, 1)`.

use std::path::Path;

use rand::Rng;

use crate::cgen::{sample_labels, Generate, Truth};
use crate::config::KvDoc;
use crate::data::{Dataset, Label, Provenance, Sample, Task};
use crate::error::{Error, Result};
use crate::nn::{init_params, train, NetParams, NetSpec, OutputKind, TrainConfig, Workspace, PROB_FLOOR};
use crate::{rng, textfmt};

/// Largest log-odds the model reports; matches the probability floor.
fn max_log_odds() -> f64 {
    -PROB_FLOOR.ln()
}

/// `p / (1 - p) * prior_correction`, with `p` clamped to
/// `[floor, 1 - floor]`.
pub fn ratio_from_prob(p: f64, prior_correction: f64) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    p / (1.0 - p) * prior_correction
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRatioModel {
    /// Two-logit classifier on `features ++ label encoding`; logit 1 is "real".
    pub net: NetParams,
    pub task: Task,
    /// `N_fake / N_real` of the training sets.
    pub prior_correction: f64,
    /// Rejection envelope `M_max`.
    pub ceiling: f64,
}

/// Source of density ratios for rejection sampling.
pub trait Ratio {
    fn ratio(&self, sample: &Sample) -> f64;
}

impl<F: Fn(&Sample) -> f64> Ratio for F {
    fn ratio(&self, sample: &Sample) -> f64 {
        self(sample)
    }
}

impl DensityRatioModel {
    fn log_odds(&self, ws: &mut Workspace, input: &[f64]) -> f64 {
        let out = ws.forward(&self.net, input);
        let m = max_log_odds();
        (out[1] - out[0]).clamp(-m, m)
    }

    fn input(&self, features: &[f64], label: &Label) -> Vec<f64> {
        let mut v = features.to_vec();
        self.task.encode_label(label, &mut v);
        v
    }

    /// Estimated `p_r(x|y) / p_g(x|y)` for one sample.
    pub fn ratio_of(&self, sample: &Sample) -> Result<f64> {
        let expected = self.net.spec().input_dim() - self.task.encoding_width();
        if sample.features.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: sample.features.len(),
            });
        }
        self.task.check_label(&sample.label)?;
        Ok(self.ratio(sample))
    }

    pub fn ratios(&self, samples: &[Sample]) -> Vec<f64> {
        let mut ws = Workspace::new(&self.net);
        samples
            .iter()
            .map(|s| self.log_odds(&mut ws, &self.input(&s.features, &s.label)).exp() * self.prior_correction)
            .collect()
    }
}

impl Ratio for DensityRatioModel {
    fn ratio(&self, sample: &Sample) -> f64 {
        let mut ws = Workspace::new(&self.net);
        self.log_odds(&mut ws, &self.input(&sample.features, &sample.label)).exp() * self.prior_correction
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsampleConfig {
    pub dr_hidden: Vec<usize>,
    pub dr_train: TrainConfig,
    /// Number of generated samples used to fit the ratio model; defaults to
    /// the number of real samples when `None`.
    pub dr_fakes: Option<usize>,
    /// Target count `N^g` of accepted samples.
    pub target: usize,
    pub calibration_size: usize,
    /// Multiplier `gamma >= 1` on the calibration maximum.
    pub safety_factor: f64,
    pub seed: u64,
}

impl SubsampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target == 0 {
            return Err(Error::InvalidArgument("target count N^g must be positive".into()));
        }
        if !(self.safety_factor >= 1.0) {
            return Err(Error::InvalidArgument("safety factor must be >= 1".into()));
        }
        if self.calibration_size == 0 {
            return Err(Error::InvalidArgument("calibration size must be positive".into()));
        }
        self.dr_train.validate()
    }
}

fn check_pair(a: &Dataset, b: &Dataset) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if a.task != b.task || a.dim != b.dim {
        return Err(Error::TaskMismatch("real and fake sets differ in task or dimension".into()));
    }
    Ok(())
}

/// Fits the ratio model on real (class 1) versus fake (class 0) pairs and
/// sets the ceiling to `safety_factor * max ratio` over `calibration`.
pub fn train_dr(real: &Dataset, fake: &Dataset, calibration: &Dataset, config: &SubsampleConfig) -> Result<DensityRatioModel> {
    check_pair(real, fake)?;
    check_pair(real, calibration)?;
    let task = real.task;
    let width = real.dim + task.encoding_width();
    let mut joint = Dataset::new(Task::Classification { classes: 2 }, width);
    for (set, class) in [(real, 1), (fake, 0)] {
        for s in &set.samples {
            let mut x = s.features.clone();
            task.encode_label(&s.label, &mut x);
            joint.samples.push(Sample {
                features: x,
                label: Label::Class(class),
                provenance: s.provenance,
            });
        }
    }
    let spec = NetSpec::new(width, config.dr_hidden.clone(), OutputKind::Logits(2))?;
    let init = init_params(&spec, rng::derive_seed(config.seed, "dr-init"));
    let net = train(&init, &joint, &config.dr_train, None)?.params;
    let mut model = DensityRatioModel {
        net,
        task,
        prior_correction: fake.len() as f64 / real.len() as f64,
        ceiling: 1.0,
    };
    let max = model.ratios(&calibration.samples).into_iter().fold(0.0, f64::max);
    model.ceiling = (config.safety_factor * max).max(f64::MIN_POSITIVE);
    Ok(model)
}

/// Draws the ratio model's fake training set and calibration batch from the
/// generator (labels from the real set's empirical distribution), then fits
/// it.
pub fn fit_density_ratio<G: Generate>(real: &Dataset, generator: &G, config: &SubsampleConfig) -> Result<DensityRatioModel> {
    config.validate()?;
    let n_fake = config.dr_fakes.unwrap_or(real.len());
    let labels = sample_labels(real, n_fake, rng::derive_seed(config.seed, "dr-labels"))?;
    let fake = crate::cgen::sample(generator, &labels, rng::derive_seed(config.seed, "dr-fakes"))?;
    let cal_labels = sample_labels(real, config.calibration_size, rng::derive_seed(config.seed, "cal-labels"))?;
    let calibration = crate::cgen::sample(generator, &cal_labels, rng::derive_seed(config.seed, "cal-fakes"))?;
    train_dr(real, &fake, &calibration, config)
}

/// Where candidate labels come from.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelSource {
    Fixed(Label),
    /// Uniform draw from this list for every candidate.
    Empirical(Vec<Label>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionOutput {
    pub dataset: Dataset,
    /// Generator ground truth of each accepted sample.
    pub truth: Vec<Truth>,
    /// Candidates drawn in total.
    pub draws: usize,
}

/// Window for acceptance-collapse detection.
pub const COLLAPSE_WINDOW: usize = 100_000;
pub const COLLAPSE_RATE: f64 = 1e-4;

/// Accepts candidate `i` iff `u_i < min(ratio_i / ceiling, 1)`, where `u_i`
/// comes from its own stream, until `target` candidates are accepted.
pub fn rejection_sample<G: Generate, R: Ratio + ?Sized>(
    generator: &G,
    ratio: &R,
    ceiling: f64,
    source: &LabelSource,
    target: usize,
    seed: u64,
) -> Result<RejectionOutput> {
    if target == 0 {
        return Err(Error::InvalidArgument("target count must be positive".into()));
    }
    if !(ceiling > 0.0) {
        return Err(Error::InvalidArgument(format!("ceiling must be positive, got {ceiling}")));
    }
    if let LabelSource::Empirical(l) = source {
        if l.is_empty() {
            return Err(Error::EmptyDataset);
        }
    }
    let task = generator.task();
    let label_seed = rng::derive_seed(seed, "labels");
    let gen_seed = rng::derive_seed(seed, "generator");
    let accept_seed = rng::derive_seed(seed, "accept");
    let mut out = Dataset::new(task, generator.dim());
    let mut truth = Vec::with_capacity(target);
    let (mut draws, mut window_accepts) = (0usize, 0usize);
    while out.len() < target {
        let i = draws as u64;
        let label = match source {
            LabelSource::Fixed(l) => *l,
            LabelSource::Empirical(ls) => ls[rng::item_stream(label_seed, i).random_range(0..ls.len())],
        };
        let (features, t) = generator.draw(&label, gen_seed, i);
        let candidate = Sample {
            features,
            label,
            provenance: Provenance::FakeM1,
        };
        let r = ratio.ratio(&candidate);
        let u: f64 = rng::item_stream(accept_seed, i).random();
        draws += 1;
        if u < (r / ceiling).min(1.0) {
            out.samples.push(candidate);
            truth.push(t);
            window_accepts += 1;
        }
        if draws % COLLAPSE_WINDOW == 0 {
            let rate = window_accepts as f64 / COLLAPSE_WINDOW as f64;
            if rate < COLLAPSE_RATE {
                return Err(Error::AcceptanceCollapse {
                    rate,
                    window: COLLAPSE_WINDOW,
                });
            }
            window_accepts = 0;
        }
    }
    Ok(RejectionOutput {
        dataset: out,
        truth,
        draws,
    })
}

/// Per-class quotas `N/C`, with the remainder given to the lowest classes.
pub fn class_quotas(total: usize, classes: usize) -> Vec<usize> {
    (0..classes).map(|c| total / classes + usize::from(c < total % classes)).collect()
}

/// Draws `target` samples through `ratio`: class by class with fixed labels
/// and equal quotas for classification, with labels from the real set's
/// empirical distribution for regression.
pub fn draw_subsampled<G: Generate, R: Ratio + ?Sized>(
    generator: &G,
    ratio: &R,
    ceiling: f64,
    real: &Dataset,
    target: usize,
    seed: u64,
) -> Result<RejectionOutput> {
    match real.task {
        Task::Classification { classes } => {
            let mut all = RejectionOutput {
                dataset: Dataset::new(real.task, generator.dim()),
                truth: Vec::new(),
                draws: 0,
            };
            for (c, quota) in class_quotas(target, classes).into_iter().enumerate() {
                if quota == 0 {
                    continue;
                }
                let part = rejection_sample(
                    generator,
                    ratio,
                    ceiling,
                    &LabelSource::Fixed(Label::Class(c)),
                    quota,
                    rng::derive_index(seed, c as u64),
                )?;
                all.dataset.samples.extend(part.dataset.samples);
                all.truth.extend(part.truth);
                all.draws += part.draws;
            }
            Ok(all)
        }
        Task::Regression { .. } => {
            let labels = real.samples.iter().map(|s| s.label).collect();
            rejection_sample(generator, ratio, ceiling, &LabelSource::Empirical(labels), target, seed)
        }
    }
}

/// M1: accepted samples tagged `fake_m1`.
pub fn subsample<G: Generate>(generator: &G, model: &DensityRatioModel, real: &Dataset, target: usize, seed: u64) -> Result<RejectionOutput> {
    draw_subsampled(generator, model, model.ceiling, real, target, seed)
}

/// Same label allocation and streams as [`subsample`] but every candidate is
/// accepted; tagged `fake_raw`.
pub fn draw_unfiltered<G: Generate>(generator: &G, real: &Dataset, target: usize, seed: u64) -> Result<RejectionOutput> {
    let mut out = draw_subsampled(generator, &|_: &Sample| 1.0, 1.0, real, target, seed)?;
    out.dataset = out.dataset.with_provenance(Provenance::FakeRaw);
    Ok(out)
}

pub const DR_FORMAT: &str = "cgankd-density-ratio v1";

impl DensityRatioModel {
    pub fn to_doc(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set(textfmt::FORMAT_KEY, DR_FORMAT);
        crate::cgen::write_task(&mut doc, "task", self.task);
        doc.set("prior_correction", self.prior_correction);
        doc.set("ceiling", self.ceiling);
        textfmt::write_net(&mut doc, "net", &self.net);
        doc
    }

    pub fn from_doc(doc: &KvDoc) -> Result<Self> {
        let mut r = doc.reader();
        textfmt::check_format(&mut r, DR_FORMAT)?;
        let model = DensityRatioModel {
            task: crate::cgen::read_task(&mut r, "task")?,
            prior_correction: r.get("prior_correction")?,
            ceiling: r.get("ceiling")?,
            net: textfmt::read_net(&mut r, "net")?,
        };
        r.finish()?;
        if !(model.ceiling > 0.0) || !(model.prior_correction > 0.0) {
            return Err(Error::Config("ceiling and prior correction must be positive".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_doc().to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&KvDoc::load(path)?)
    }
}
