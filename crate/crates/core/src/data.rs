//! Samples, datasets, synthetic data families and the dataset text format.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng;

/// A class index or a scalar regression label normalized to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Label {
    Class(usize),
    Scalar(f64),
}

impl Label {
    pub fn class(&self) -> Option<usize> {
        match *self {
            Label::Class(c) => Some(c),
            Label::Scalar(_) => None,
        }
    }

    pub fn scalar(&self) -> Option<f64> {
        match *self {
            Label::Scalar(y) => Some(y),
            Label::Class(_) => None,
        }
    }
}

/// Where a sample came from in the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Provenance {
    Real,
    FakeRaw,
    FakeM1,
    FakeM2,
}

impl Provenance {
    pub const ALL: [Provenance; 4] = [
        Provenance::Real,
        Provenance::FakeRaw,
        Provenance::FakeM1,
        Provenance::FakeM2,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Real => "real",
            Provenance::FakeRaw => "fake_raw",
            Provenance::FakeM1 => "fake_m1",
            Provenance::FakeM2 => "fake_m2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Provenance::ALL.into_iter().find(|p| p.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: Label,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Task {
    Classification { classes: usize },
    /// Labels are stored normalized to `[0, 1]`; `lo`/`hi` map them back to
    /// label units for reporting.
    Regression { lo: f64, hi: f64 },
}

impl Task {
    pub fn classes(&self) -> Option<usize> {
        match *self {
            Task::Classification { classes } => Some(classes),
            Task::Regression { .. } => None,
        }
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, Task::Classification { .. })
    }

    pub fn unnormalize(&self, y: f64) -> f64 {
        match *self {
            Task::Regression { lo, hi } => lo + (hi - lo) * y,
            Task::Classification { .. } => y,
        }
    }

    /// Width of the label encoding appended to features for conditioning:
    /// one-hot for classes, the raw scalar for regression.
    pub fn encoding_width(&self) -> usize {
        match *self {
            Task::Classification { classes } => classes,
            Task::Regression { .. } => 1,
        }
    }

    pub fn encode_label(&self, label: &Label, out: &mut Vec<f64>) {
        match (*self, *label) {
            (Task::Classification { classes }, Label::Class(c)) => {
                out.extend((0..classes).map(|k| if k == c { 1.0 } else { 0.0 }))
            }
            (_, Label::Scalar(y)) => out.push(y),
            (Task::Regression { .. }, Label::Class(c)) => out.push(c as f64),
        }
    }

    pub fn check_label(&self, label: &Label) -> Result<()> {
        match (*self, *label) {
            (Task::Classification { classes }, Label::Class(c)) => {
                if c < classes {
                    Ok(())
                } else {
                    Err(Error::LabelOutOfRange(format!("class {c} with C={classes}")))
                }
            }
            (Task::Regression { .. }, Label::Scalar(y)) => {
                if (0.0..=1.0).contains(&y) {
                    Ok(())
                } else {
                    Err(Error::LabelOutOfRange(format!("scalar label {y} outside [0,1]")))
                }
            }
            _ => Err(Error::TaskMismatch(format!("label {label:?} for task {self:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub task: Task,
    pub dim: usize,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(task: Task, dim: usize) -> Self {
        Dataset {
            task,
            dim,
            samples: Vec::new(),
        }
    }

    pub fn from_samples(task: Task, dim: usize, samples: Vec<Sample>) -> Result<Self> {
        let ds = Dataset { task, dim, samples };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn push(&mut self, sample: Sample) -> Result<()> {
        self.check_sample(&sample)?;
        self.samples.push(sample);
        Ok(())
    }

    fn check_sample(&self, s: &Sample) -> Result<()> {
        if s.features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: s.features.len(),
            });
        }
        if s.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample features".into()));
        }
        self.task.check_label(&s.label)
    }

    /// Checks every sample and that at most one fake stage is present.
    pub fn validate(&self) -> Result<()> {
        for s in &self.samples {
            self.check_sample(s)?;
        }
        let fake_stages = self.provenance_counts().iter().filter(|(p, n)| *p != Provenance::Real && *n > 0).count();
        if fake_stages > 1 {
            return Err(Error::InvalidArgument("dataset mixes fake samples from different pipeline stages".into()));
        }
        Ok(())
    }

    pub fn provenance_counts(&self) -> Vec<(Provenance, usize)> {
        Provenance::ALL
            .into_iter()
            .map(|p| (p, self.samples.iter().filter(|s| s.provenance == p).count()))
            .collect()
    }

    pub fn count_provenance(&self, p: Provenance) -> usize {
        self.samples.iter().filter(|s| s.provenance == p).count()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let c = self.task.classes().unwrap_or(0);
        let mut counts = vec![0; c];
        for s in &self.samples {
            if let Label::Class(k) = s.label {
                counts[k] += 1;
            }
        }
        counts
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        for s in &mut self.samples {
            s.provenance = p;
        }
        self
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            task: self.task,
            dim: self.dim,
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
        }
    }
}

/// Radius of the regression curve as a function of the label:
/// `base + slope * y`. A positive slope makes the curve a spiral, so the
/// label is an injective function of the noiseless point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusFn {
    pub base: f64,
    pub slope: f64,
}

impl RadiusFn {
    pub fn at(&self, y: f64) -> f64 {
        self.base + self.slope * y
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    /// Gaussian blobs with means evenly spaced on a circle of radius
    /// `separation` in the first two coordinates.
    Blobs {
        classes: usize,
        separation: f64,
        noise_std: f64,
    },
    /// Points at angle `2*pi*y` on a curve of radius `radius(y)`, plus noise;
    /// labels are reported in `[label_lo, label_hi]` units.
    Ring {
        radius: RadiusFn,
        noise_std: f64,
        label_lo: f64,
        label_hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub family: Family,
    pub dim: usize,
    pub n: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if self.dim < 2 {
            return Err(Error::InvalidArgument("synthetic families need dim >= 2".into()));
        }
        match self.family {
            Family::Blobs {
                classes,
                separation,
                noise_std,
            } => {
                if classes < 2 {
                    return Err(Error::InvalidArgument("blobs need at least 2 classes".into()));
                }
                if !(noise_std >= 0.0) || !separation.is_finite() {
                    return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
                }
            }
            Family::Ring {
                radius,
                noise_std,
                label_lo,
                label_hi,
            } => {
                if !(noise_std >= 0.0) {
                    return Err(Error::InvalidArgument("noise_std must be >= 0".into()));
                }
                if !(label_hi > label_lo) {
                    return Err(Error::InvalidArgument("label_hi must exceed label_lo".into()));
                }
                if !(radius.base > 0.0) || !(radius.slope >= 0.0) {
                    return Err(Error::InvalidArgument("radius must be positive and non-decreasing".into()));
                }
            }
        }
        Ok(())
    }

    pub fn task(&self) -> Task {
        match self.family {
            Family::Blobs { classes, .. } => Task::Classification { classes },
            Family::Ring { label_lo, label_hi, .. } => Task::Regression {
                lo: label_lo,
                hi: label_hi,
            },
        }
    }

    /// Mean of class `c` for the blobs family.
    pub fn class_mean(&self, c: usize) -> Vec<f64> {
        let mut mu = vec![0.0; self.dim];
        if let Family::Blobs {
            classes, separation, ..
        } = self.family
        {
            let angle = TAU * c as f64 / classes as f64;
            mu[0] = separation * angle.cos();
            mu[1] = separation * angle.sin();
        }
        mu
    }

    /// Noiseless point on the regression curve for label `y`.
    pub fn curve_point(&self, y: f64) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        if let Family::Ring { radius, .. } = self.family {
            let r = radius.at(y);
            p[0] = r * (TAU * y).cos();
            p[1] = r * (TAU * y).sin();
        }
        p
    }

    pub fn noise_std(&self) -> f64 {
        match self.family {
            Family::Blobs { noise_std, .. } | Family::Ring { noise_std, .. } => noise_std,
        }
    }

    /// Draws features for a given label from the family's conditional
    /// distribution.
    pub fn draw_features<R: Rng + ?Sized>(&self, label: &Label, rng: &mut R) -> Vec<f64> {
        let mut x = match *label {
            Label::Class(c) => self.class_mean(c),
            Label::Scalar(y) => self.curve_point(y),
        };
        let s = self.noise_std();
        if s > 0.0 {
            for v in &mut x {
                let z: f64 = rng.sample(StandardNormal);
                *v += s * z;
            }
        }
        x
    }

    /// Label of a noiseless regression point: the angle fixes `y` up to the
    /// wrap at `y = 0 / 1`, which the radius resolves.
    pub fn true_label(&self, features: &[f64]) -> f64 {
        let Family::Ring { radius, .. } = self.family else {
            return f64::NAN;
        };
        let angle = features[1].atan2(features[0]).rem_euclid(TAU);
        let y0 = angle / TAU;
        let r = features[0].hypot(features[1]);
        [y0, y0 + 1.0, y0 - 1.0]
            .into_iter()
            .filter(|y| (0.0..=1.0).contains(y))
            .min_by(|a, b| (radius.at(*a) - r).abs().total_cmp(&(radius.at(*b) - r).abs()))
            .unwrap_or(y0)
    }
}

/// Balanced Gaussian-blob classification data: sample `i` belongs to class
/// `i mod C`.
pub fn make_classification(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    let Family::Blobs { classes, .. } = config.family else {
        return Err(Error::InvalidArgument("make_classification needs the blobs family".into()));
    };
    let mut rng = rng::stream(config.seed);
    let samples = (0..config.n)
        .map(|i| {
            let label = Label::Class(i % classes);
            Sample {
                features: config.draw_features(&label, &mut rng),
                label,
                provenance: Provenance::Real,
            }
        })
        .collect();
    Ok(Dataset {
        task: config.task(),
        dim: config.dim,
        samples,
    })
}

/// Regression data on the spiral: `y ~ U[0,1]`, features on the curve plus
/// isotropic Gaussian noise.
pub fn make_regression(config: &SynthConfig) -> Result<Dataset> {
    config.validate()?;
    if !matches!(config.family, Family::Ring { .. }) {
        return Err(Error::InvalidArgument("make_regression needs the ring family".into()));
    }
    let mut rng = rng::stream(config.seed);
    let samples = (0..config.n)
        .map(|_| {
            let label = Label::Scalar(rng.random::<f64>());
            Sample {
                features: config.draw_features(&label, &mut rng),
                label,
                provenance: Provenance::Real,
            }
        })
        .collect();
    Ok(Dataset {
        task: config.task(),
        dim: config.dim,
        samples,
    })
}

pub fn make_dataset(config: &SynthConfig) -> Result<Dataset> {
    match config.family {
        Family::Blobs { .. } => make_classification(config),
        Family::Ring { .. } => make_regression(config),
    }
}

/// Random train/test partition. Classification splits are stratified; each
/// class contributes `round(fraction * n_c)` training samples, kept within
/// `[1, n_c - 1]`. Both outputs preserve the input order.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("train fraction {train_fraction} outside (0,1)")));
    }
    let mut rng = rng::stream(seed);
    let mut in_train = vec![false; dataset.len()];
    let groups: Vec<Vec<usize>> = match dataset.task {
        Task::Classification { classes } => {
            let mut g = vec![Vec::new(); classes];
            for (i, s) in dataset.samples.iter().enumerate() {
                if let Label::Class(c) = s.label {
                    g[c].push(i);
                }
            }
            for (c, members) in g.iter().enumerate() {
                if members.len() < 2 {
                    return Err(Error::ClassTooSmall {
                        class: c,
                        count: members.len(),
                        required: 2,
                    });
                }
            }
            g
        }
        Task::Regression { .. } => {
            if dataset.len() < 2 {
                return Err(Error::InvalidArgument("need at least 2 samples to split".into()));
            }
            vec![(0..dataset.len()).collect()]
        }
    };
    for mut members in groups {
        let n = members.len();
        let k = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
        members.shuffle(&mut rng);
        for &i in &members[..k] {
            in_train[i] = true;
        }
    }
    let (mut train, mut test) = (Dataset::new(dataset.task, dataset.dim), Dataset::new(dataset.task, dataset.dim));
    for (s, t) in dataset.samples.iter().zip(in_train) {
        if t {
            train.samples.push(s.clone());
        } else {
            test.samples.push(s.clone());
        }
    }
    Ok((train, test))
}

pub const DATASET_MAGIC: &str = "cgankd-dataset v1";

/// Serializes a dataset in the versioned text format. Floats use Rust's
/// shortest round-trip representation, so reading the text back is exact.
pub fn dataset_to_string(dataset: &Dataset) -> String {
    let mut out = String::new();
    out.push_str(DATASET_MAGIC);
    out.push('\n');
    match dataset.task {
        Task::Classification { classes } => writeln!(out, "task=classification C={classes}"),
        Task::Regression { lo, hi } => writeln!(out, "task=regression lo={lo} hi={hi}"),
    }
    .unwrap();
    writeln!(out, "dim={}", dataset.dim).unwrap();
    for s in &dataset.samples {
        match s.label {
            Label::Class(c) => write!(out, "{c}"),
            Label::Scalar(y) => write!(out, "{y}"),
        }
        .unwrap();
        write!(out, ",{}", s.provenance.as_str()).unwrap();
        for v in &s.features {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn dataset_from_str(text: &str, origin: &str) -> Result<Dataset> {
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| Error::parse(origin, 0, format!("missing {what} line")))
    };
    let (n, magic) = next("header")?;
    if magic != DATASET_MAGIC {
        return Err(Error::parse(origin, n, format!("expected `{DATASET_MAGIC}`")));
    }
    let (n, task_line) = next("task")?;
    let task = parse_task_line(task_line).map_err(|m| Error::parse(origin, n, m))?;
    let (n, dim_line) = next("dim")?;
    let dim: usize = dim_line
        .strip_prefix("dim=")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| Error::parse(origin, n, "expected `dim=<d>`"))?;

    let mut ds = Dataset::new(task, dim);
    for (i, line) in lines {
        let line_no = i + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim + 2 {
            return Err(Error::parse(
                origin,
                line_no,
                format!("expected {} fields, found {}", dim + 2, fields.len()),
            ));
        }
        let label = match task {
            Task::Classification { .. } => Label::Class(
                fields[0]
                    .parse()
                    .map_err(|_| Error::parse(origin, line_no, format!("bad class label `{}`", fields[0])))?,
            ),
            Task::Regression { .. } => Label::Scalar(
                fields[0]
                    .parse()
                    .map_err(|_| Error::parse(origin, line_no, format!("bad scalar label `{}`", fields[0])))?,
            ),
        };
        let provenance = Provenance::parse(fields[1])
            .ok_or_else(|| Error::parse(origin, line_no, format!("unknown provenance `{}`", fields[1])))?;
        let features = fields[2..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parse(origin, line_no, format!("bad feature: {e}")))?;
        let sample = Sample {
            features,
            label,
            provenance,
        };
        ds.push(sample).map_err(|e| Error::parse(origin, line_no, e.to_string()))?;
    }
    ds.validate()?;
    Ok(ds)
}

fn parse_task_line(line: &str) -> std::result::Result<Task, String> {
    let mut parts = line.split(' ');
    let kind = parts.next().unwrap_or_default();
    let mut kv = |key: &str| -> std::result::Result<f64, String> {
        let p = parts.next().ok_or_else(|| format!("missing `{key}=`"))?;
        p.strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .and_then(|v| v.parse::<f64>().ok())
            .ok_or_else(|| format!("expected `{key}=<value>`, found `{p}`"))
    };
    let task = match kind {
        "task=classification" => {
            let c = kv("C")?;
            if c.fract() != 0.0 || c < 1.0 {
                return Err(format!("invalid class count {c}"));
            }
            Task::Classification { classes: c as usize }
        }
        "task=regression" => {
            let lo = kv("lo")?;
            let hi = kv("hi")?;
            Task::Regression { lo, hi }
        }
        other => return Err(format!("unknown task `{other}`")),
    };
    if parts.next().is_some() {
        return Err("trailing fields on task line".into());
    }
    Ok(task)
}

pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_string(dataset)).map_err(|e| Error::io(path, e))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    dataset_from_str(&text, &path.display().to_string())
}
