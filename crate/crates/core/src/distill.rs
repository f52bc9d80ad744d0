//! Augmentation training and the end-to-end pipeline.
//!
//! A run is split in two: [`prepare`] builds everything that does not depend
//! on the filtering quantile or the fake-sample cap (data, teacher, NOKD
//! student, generator, M1 output), and [`finish`] applies M2, augments the
//! real set and trains the distilled student. Sweeps over `rho` or `M^g`
//! reuse one prepared state.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;

use crate::cgen::{make_oracle, train_cgan, GanTrainConfig, GeneratorHandle, LabelNoise, Truth};
use crate::config::{join_list, KvDoc, KvReader};
use crate::data::{make_dataset, write_dataset, Dataset, Label, SynthConfig, Task};
use crate::error::{Error, Result};
use crate::labeladjust::{filter_indices, replace_labels, FilterReport};
use crate::nn::{evaluate, init_params, train, LossKind, LrSchedule, Metrics, NetParams, NetSpec, OutputKind, TrainConfig};
use crate::subsample::{draw_unfiltered, fit_density_ratio, subsample, DensityRatioModel, RejectionOutput, SubsampleConfig};
use crate::{rng, textfmt};

/// `D^r` followed by the fake samples; provenance tags are kept.
pub fn augment(real: &Dataset, fakes: &Dataset) -> Result<Dataset> {
    if real.task != fakes.task || real.dim != fakes.dim {
        return Err(Error::TaskMismatch("real and fake sets differ in task or dimension".into()));
    }
    let mut out = real.clone();
    out.samples.extend(fakes.samples.iter().cloned());
    out.validate()?;
    Ok(out)
}

/// Real-sample fraction `N^r / (N^r + M^g)`.
pub fn theta(n_real: usize, m_fake: usize) -> f64 {
    n_real as f64 / (n_real + m_fake) as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StudentMode {
    Plain,
    Blkd { lambda: f64, temperature: f64 },
}

impl StudentMode {
    fn loss(&self, task: Task) -> LossKind {
        match (self, task) {
            (StudentMode::Blkd { lambda, temperature }, Task::Classification { .. }) => LossKind::Blkd {
                lambda: *lambda,
                temperature: *temperature,
            },
            (_, Task::Classification { .. }) => LossKind::PlainCe,
            (_, Task::Regression { .. }) => LossKind::PlainSe,
        }
    }
}

/// Plain loss for the task.
fn plain_loss(task: Task) -> LossKind {
    StudentMode::Plain.loss(task)
}

/// Trains a student on `augmented`; `teacher` is required in BLKD mode and
/// its soft labels cover every sample.
pub fn train_student(
    augmented: &Dataset,
    init: &NetParams,
    config: &TrainConfig,
    mode: StudentMode,
    teacher: Option<&NetParams>,
) -> Result<NetParams> {
    let mut config = config.clone();
    config.loss = mode.loss(augmented.task);
    let teacher = if config.loss.needs_teacher() {
        Some(teacher.ok_or_else(|| Error::InvalidArgument("BLKD mode requires a teacher".into()))?)
    } else {
        None
    };
    Ok(train(init, augmented, &config, teacher)?.params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetConfig {
    pub hidden: Vec<usize>,
    /// `seed` and `loss` are filled in by the pipeline.
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorChoice {
    Oracle {
        label_noise: LabelNoise,
        junk_prob: f64,
        junk_spread: f64,
    },
    Cgan(GanTrainConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct M1Config {
    pub enabled: bool,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub fakes: Option<usize>,
    pub calibration_size: usize,
    pub safety_factor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Training-set generator; `n` is `N^r`. Its seed is derived from `seed`.
    pub data: SynthConfig,
    /// Size of the held-out evaluation set.
    pub eval_n: usize,
    pub generator: GeneratorChoice,
    pub m1: M1Config,
    /// `N^g`.
    pub ng: usize,
    pub rho: f64,
    pub mg_cap: Option<usize>,
    pub teacher: NetConfig,
    pub student: NetConfig,
    pub mode: StudentMode,
    pub seed: u64,
}

fn output_kind(task: Task) -> OutputKind {
    match task {
        Task::Classification { classes } => OutputKind::Logits(classes),
        Task::Regression { .. } => OutputKind::NonnegScalar,
    }
}

fn read_net_config(r: &mut KvReader<'_>, prefix: &str, defaults: (&[usize], usize)) -> Result<NetConfig> {
    let key = |k: &str| format!("{prefix}.{k}");
    Ok(NetConfig {
        hidden: r.list_or(&key("hidden"), defaults.0.to_vec())?,
        train: read_train(r, prefix, defaults.1)?,
    })
}

fn read_train(r: &mut KvReader<'_>, prefix: &str, default_epochs: usize) -> Result<TrainConfig> {
    let key = |k: &str| format!("{prefix}.{k}");
    Ok(TrainConfig {
        epochs: r.get_or(&key("epochs"), default_epochs)?,
        batch_size: r.get_or(&key("batch_size"), 64)?,
        lr: LrSchedule {
            initial: r.get_or(&key("lr"), 0.05)?,
            decay_epochs: r.list_or(&key("lr_decay_epochs"), Vec::new())?,
            factor: r.get_or(&key("lr_decay_factor"), 0.1)?,
        },
        momentum: r.get_or(&key("momentum"), 0.9)?,
        weight_decay: r.get_or(&key("weight_decay"), 0.0)?,
        seed: 0,
        loss: LossKind::PlainCe,
    })
}

fn write_train(doc: &mut KvDoc, prefix: &str, t: &TrainConfig) {
    doc.set(&format!("{prefix}.epochs"), t.epochs);
    doc.set(&format!("{prefix}.batch_size"), t.batch_size);
    doc.set(&format!("{prefix}.lr"), t.lr.initial);
    doc.set(&format!("{prefix}.lr_decay_epochs"), join_list(&t.lr.decay_epochs));
    doc.set(&format!("{prefix}.lr_decay_factor"), t.lr.factor);
    doc.set(&format!("{prefix}.momentum"), t.momentum);
    doc.set(&format!("{prefix}.weight_decay"), t.weight_decay);
}

fn write_net_config(doc: &mut KvDoc, prefix: &str, n: &NetConfig) {
    doc.set(&format!("{prefix}.hidden"), join_list(&n.hidden));
    write_train(doc, prefix, &n.train);
}

impl PipelineConfig {
    pub fn from_doc(doc: &KvDoc) -> Result<Self> {
        let mut r = doc.reader();
        if r.has("data.seed") {
            return Err(Error::Config("`data.seed` is derived from `seed`; remove it".into()));
        }
        let seed = r.get_or("seed", 0)?;
        let data = textfmt::read_synth(&mut r, "data", 800, 0)?;
        let task = data.task();
        let generator = match r.opt_str("generator.kind").unwrap_or("oracle") {
            "oracle" => GeneratorChoice::Oracle {
                label_noise: match task {
                    Task::Classification { .. } => LabelNoise::Flip(r.get_or("generator.flip_prob", 0.0)?),
                    Task::Regression { .. } => LabelNoise::Gaussian(r.get_or("generator.label_std", 0.0)?),
                },
                junk_prob: r.get_or("generator.junk_prob", 0.0)?,
                junk_spread: r.get_or("generator.junk_spread", 5.0)?,
            },
            "cgan" => GeneratorChoice::Cgan(GanTrainConfig {
                iterations: r.get_or("cgan.iterations", 3000)?,
                batch_size: r.get_or("cgan.batch_size", 64)?,
                generator_lr: r.get_or("cgan.generator_lr", 0.01)?,
                discriminator_lr: r.get_or("cgan.discriminator_lr", 0.01)?,
                momentum: r.get_or("cgan.momentum", 0.5)?,
                noise_dim: r.get_or("cgan.noise_dim", 4)?,
                hidden: r.list_or("cgan.hidden", vec![32, 32])?,
                seed: 0,
            }),
            other => return Err(Error::Config(format!("unknown generator kind `{other}`"))),
        };
        let m1 = M1Config {
            enabled: r.bool_or("m1.enabled", true)?,
            hidden: r.list_or("m1.hidden", vec![32])?,
            train: read_train(&mut r, "m1", 20)?,
            fakes: r.opt("m1.fakes")?,
            calibration_size: r.get_or("m1.calibration", 2000)?,
            safety_factor: r.get_or("m1.safety_factor", 1.2)?,
        };
        let default_rho = if task.is_classification() { 0.9 } else { 0.7 };
        let mode = match r.opt_str("student.mode").unwrap_or("plain") {
            "plain" => StudentMode::Plain,
            "blkd" => StudentMode::Blkd {
                lambda: r.get_or("student.lambda_kd", 0.5)?,
                temperature: r.get_or("student.temperature", 5.0)?,
            },
            other => return Err(Error::Config(format!("unknown student mode `{other}`"))),
        };
        let config = PipelineConfig {
            eval_n: r.get_or("eval.n", 2000)?,
            ng: r.get_or("ng", 8000)?,
            rho: r.get_or("rho", default_rho)?,
            mg_cap: r.opt("mg_cap")?,
            teacher: read_net_config(&mut r, "teacher", (&[64, 64], 100))?,
            student: read_net_config(&mut r, "student", (&[16], 100))?,
            data,
            generator,
            m1,
            mode,
            seed,
        };
        r.finish()?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&KvDoc::load(path)?)
    }

    /// Every setting with defaults filled in; parses back to an equal config.
    pub fn to_doc(&self) -> KvDoc {
        let mut doc = KvDoc::new();
        doc.set("seed", self.seed);
        let mut data = KvDoc::new();
        textfmt::write_synth(&mut data, "data", &self.data);
        for k in data.keys().filter(|k| *k != "data.seed") {
            doc.set(k, data.get(k).unwrap_or_default());
        }
        doc.set("eval.n", self.eval_n);
        match &self.generator {
            GeneratorChoice::Oracle {
                label_noise,
                junk_prob,
                junk_spread,
            } => {
                doc.set("generator.kind", "oracle");
                match label_noise {
                    LabelNoise::Flip(p) => doc.set("generator.flip_prob", p),
                    LabelNoise::Gaussian(s) => doc.set("generator.label_std", s),
                }
                doc.set("generator.junk_prob", junk_prob);
                doc.set("generator.junk_spread", junk_spread);
            }
            GeneratorChoice::Cgan(g) => {
                doc.set("generator.kind", "cgan");
                doc.set("cgan.iterations", g.iterations);
                doc.set("cgan.batch_size", g.batch_size);
                doc.set("cgan.generator_lr", g.generator_lr);
                doc.set("cgan.discriminator_lr", g.discriminator_lr);
                doc.set("cgan.momentum", g.momentum);
                doc.set("cgan.noise_dim", g.noise_dim);
                doc.set("cgan.hidden", join_list(&g.hidden));
            }
        }
        doc.set("m1.enabled", self.m1.enabled);
        doc.set("m1.hidden", join_list(&self.m1.hidden));
        write_train(&mut doc, "m1", &self.m1.train);
        doc.set("m1.fakes", self.m1.fakes.map_or("none".to_string(), |v| v.to_string()));
        doc.set("m1.calibration", self.m1.calibration_size);
        doc.set("m1.safety_factor", self.m1.safety_factor);
        doc.set("ng", self.ng);
        doc.set("rho", self.rho);
        doc.set("mg_cap", self.mg_cap.map_or("none".to_string(), |v| v.to_string()));
        write_net_config(&mut doc, "teacher", &self.teacher);
        write_net_config(&mut doc, "student", &self.student);
        match self.mode {
            StudentMode::Plain => doc.set("student.mode", "plain"),
            StudentMode::Blkd { lambda, temperature } => {
                doc.set("student.mode", "blkd");
                doc.set("student.lambda_kd", lambda);
                doc.set("student.temperature", temperature);
            }
        }
        doc
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::Config(format!("rho must lie in [0, 1], got {}", self.rho)));
        }
        if self.ng == 0 {
            return Err(Error::Config("ng must be positive".into()));
        }
        if self.eval_n == 0 {
            return Err(Error::Config("eval.n must be positive".into()));
        }
        if let StudentMode::Blkd { .. } = self.mode {
            if !self.data.task().is_classification() {
                return Err(Error::Config("BLKD mode needs a classification task".into()));
            }
        }
        let task = self.data.task();
        for (name, net) in [("teacher", &self.teacher), ("student", &self.student)] {
            NetSpec::new(self.data.dim, net.hidden.clone(), output_kind(task))
                .map_err(|e| Error::Config(format!("{name}: {e}")))?;
            let mut t = net.train.clone();
            t.loss = plain_loss(task);
            t.validate().map_err(|e| Error::Config(format!("{name}: {e}")))?;
        }
        self.mode.loss(task).validate().map_err(|e| Error::Config(format!("student: {e}")))?;
        if self.m1.enabled && !(self.m1.safety_factor >= 1.0) {
            return Err(Error::Config("m1.safety_factor must be >= 1".into()));
        }
        Ok(())
    }
}

/// Ground-truth quality of a fake set, when the generator knows it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FakeDiagnostics {
    pub count: usize,
    pub junk_fraction: f64,
    /// Fraction of non-junk samples whose actual label differs from the
    /// assigned one (classification only).
    pub mislabeled_fraction: Option<f64>,
}

pub fn diagnose(samples: &Dataset, truth: &[Truth]) -> FakeDiagnostics {
    let n = truth.len().max(1) as f64;
    let junk = truth.iter().filter(|t| t.junk).count();
    let known: Vec<(&Label, Label)> = samples
        .samples
        .iter()
        .zip(truth)
        .filter_map(|(s, t)| t.actual.map(|a| (&s.label, a)))
        .collect();
    let mislabeled_fraction = (samples.task.is_classification() && !known.is_empty())
        .then(|| known.iter().filter(|(s, a)| **s != *a).count() as f64 / known.len() as f64);
    FakeDiagnostics {
        count: truth.len(),
        junk_fraction: junk as f64 / n,
        mislabeled_fraction,
    }
}

/// Everything a run needs before M2.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: PipelineConfig,
    pub train: Dataset,
    pub test: Dataset,
    pub teacher: NetParams,
    pub teacher_metrics: Metrics,
    pub nokd: NetParams,
    pub nokd_metrics: Metrics,
    pub generator: GeneratorHandle,
    pub dr_model: Option<DensityRatioModel>,
    /// `D^g_s` (or the raw fakes when M1 is disabled), with generator truth.
    pub fakes: RejectionOutput,
    pub timings: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineReport {
    pub task: Task,
    pub n_real: usize,
    pub n_fake: usize,
    pub m_fake: usize,
    pub rho: f64,
    pub theta: f64,
    pub teacher: Metrics,
    pub student_nokd: Metrics,
    pub student_cgankd: Metrics,
    pub filter: FilterReport,
    /// Candidates drawn to obtain `N^g` fakes.
    pub draws: usize,
    pub fakes_before_m2: FakeDiagnostics,
    pub fakes_after_m2: FakeDiagnostics,
    pub seed: u64,
    /// Wall-clock seconds per stage; not part of any numeric comparison.
    pub timings: Vec<(String, f64)>,
}

impl PipelineReport {
    /// Same report with timings cleared, for reproducibility checks.
    pub fn without_timings(&self) -> Self {
        PipelineReport {
            timings: Vec::new(),
            ..self.clone()
        }
    }
}

/// Where to write intermediate artifacts.
#[derive(Debug, Clone, Default)]
pub struct Checkpoints {
    pub dir: Option<PathBuf>,
}

impl Checkpoints {
    pub fn to(dir: &Path) -> Self {
        Checkpoints {
            dir: Some(dir.to_path_buf()),
        }
    }

    fn save(&self, name: &str, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
        match &self.dir {
            Some(d) => write(&d.join(name)),
            None => Ok(()),
        }
    }

    fn net(&self, name: &str, p: &NetParams) -> Result<()> {
        self.save(name, |path| {
            std::fs::write(path, textfmt::net_to_text(p)).map_err(|e| Error::io(path, e))
        })
    }

    fn dataset(&self, name: &str, d: &Dataset) -> Result<()> {
        self.save(name, |path| write_dataset(d, path))
    }
}

fn stage<T>(name: &'static str, timings: &mut Vec<(String, f64)>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| Error::Stage {
        stage: name,
        source: Box::new(e),
    });
    timings.push((name.to_string(), start.elapsed().as_secs_f64()));
    out
}

fn train_net(net: &NetConfig, data: &Dataset, seed: u64, name: &str) -> Result<NetParams> {
    let spec = NetSpec::new(data.dim, net.hidden.clone(), output_kind(data.task))?;
    let init = init_params(&spec, rng::derive_seed(seed, &format!("{name}-init")));
    let mut config = net.train.clone();
    config.seed = rng::derive_seed(seed, &format!("{name}-train"));
    config.loss = plain_loss(data.task);
    Ok(train(&init, data, &config, None)?.params)
}

fn student_init(config: &PipelineConfig) -> Result<(NetParams, TrainConfig)> {
    let task = config.data.task();
    let spec = NetSpec::new(config.data.dim, config.student.hidden.clone(), output_kind(task))?;
    let init = init_params(&spec, rng::derive_seed(config.seed, "student-init"));
    let mut t = config.student.train.clone();
    t.seed = rng::derive_seed(config.seed, "student-train");
    t.loss = plain_loss(task);
    Ok((init, t))
}

/// Data, teacher, NOKD student, generator and M1.
pub fn prepare(config: &PipelineConfig, checkpoints: &Checkpoints) -> Result<Prepared> {
    config.validate()?;
    let seed = config.seed;
    let mut timings = Vec::new();
    let (train_set, test_set) = stage("data", &mut timings, || {
        let train_cfg = SynthConfig {
            seed: rng::derive_seed(seed, "data"),
            ..config.data
        };
        let test_cfg = SynthConfig {
            n: config.eval_n,
            seed: rng::derive_seed(seed, "eval-data"),
            ..config.data
        };
        let (a, b) = (make_dataset(&train_cfg)?, make_dataset(&test_cfg)?);
        checkpoints.dataset("train.dataset", &a)?;
        checkpoints.dataset("test.dataset", &b)?;
        Ok((a, b))
    })?;
    let (teacher, teacher_metrics) = stage("teacher", &mut timings, || {
        let t = train_net(&config.teacher, &train_set, seed, "teacher")?;
        checkpoints.net("teacher.net", &t)?;
        let m = evaluate(&t, &test_set)?;
        Ok((t, m))
    })?;
    let (nokd, nokd_metrics) = stage("nokd", &mut timings, || {
        let (init, t) = student_init(config)?;
        let s = train(&init, &train_set, &t, None)?.params;
        checkpoints.net("student_nokd.net", &s)?;
        let m = evaluate(&s, &test_set)?;
        Ok((s, m))
    })?;
    let generator = stage("generator", &mut timings, || {
        let g = match &config.generator {
            GeneratorChoice::Oracle {
                label_noise,
                junk_prob,
                junk_spread,
            } => make_oracle(config.data, *label_noise, *junk_prob, *junk_spread)?,
            GeneratorChoice::Cgan(c) => {
                let c = GanTrainConfig {
                    seed: rng::derive_seed(seed, "cgan"),
                    ..c.clone()
                };
                train_cgan(&train_set, &c)?.0
            }
        };
        checkpoints.save("generator.cfg", |p| g.save(p))?;
        Ok(g)
    })?;
    let draw_seed = rng::derive_seed(seed, "m1-draws");
    let (dr_model, fakes) = stage("m1", &mut timings, || {
        let out = if config.m1.enabled {
            let sc = subsample_config(config);
            let model = fit_density_ratio(&train_set, &generator, &sc)?;
            checkpoints.save("density_ratio.cfg", |p| model.save(p))?;
            let out = subsample(&generator, &model, &train_set, config.ng, draw_seed)?;
            (Some(model), out)
        } else {
            (None, draw_unfiltered(&generator, &train_set, config.ng, draw_seed)?)
        };
        checkpoints.dataset("fakes_m1.dataset", &out.1.dataset)?;
        Ok(out)
    })?;
    Ok(Prepared {
        config: config.clone(),
        train: train_set,
        test: test_set,
        teacher,
        teacher_metrics,
        nokd,
        nokd_metrics,
        generator,
        dr_model,
        fakes,
        timings,
    })
}

fn subsample_config(config: &PipelineConfig) -> SubsampleConfig {
    let mut dr_train = config.m1.train.clone();
    dr_train.seed = rng::derive_seed(config.seed, "dr-train");
    dr_train.loss = LossKind::PlainCe;
    SubsampleConfig {
        dr_hidden: config.m1.hidden.clone(),
        dr_train,
        dr_fakes: config.m1.fakes,
        target: config.ng,
        calibration_size: config.m1.calibration_size,
        safety_factor: config.m1.safety_factor,
        seed: rng::derive_seed(config.seed, "dr"),
    }
}

/// The raw (pre-M1) fakes drawn from the same candidate streams as M1 uses.
pub fn raw_fakes(prepared: &Prepared) -> Result<RejectionOutput> {
    let c = &prepared.config;
    draw_unfiltered(&prepared.generator, &prepared.train, c.ng, rng::derive_seed(c.seed, "m1-draws"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinishOptions {
    pub rho: f64,
    pub mg_cap: Option<usize>,
    /// Label replacement after filtering; the pipeline default enables it for
    /// regression only.
    pub replace: bool,
}

impl FinishOptions {
    pub fn from_config(config: &PipelineConfig) -> Self {
        FinishOptions {
            rho: config.rho,
            mg_cap: config.mg_cap,
            replace: !config.data.task().is_classification(),
        }
    }
}

/// M2, augmentation and student training on the prepared fakes.
pub fn finish(prepared: &Prepared, options: FinishOptions, checkpoints: &Checkpoints) -> Result<PipelineReport> {
    finish_with(prepared, &prepared.fakes, options, checkpoints)
}

/// As [`finish`], with an explicit `D^g_s`.
pub fn finish_with(
    prepared: &Prepared,
    fakes: &RejectionOutput,
    options: FinishOptions,
    checkpoints: &Checkpoints,
) -> Result<PipelineReport> {
    let config = &prepared.config;
    let mut timings = prepared.timings.clone();
    let (kept, filtered, report) = stage("m2", &mut timings, || {
        let (mut kept, report) = filter_indices(&prepared.teacher, &fakes.dataset, options.rho)?;
        if let Some(cap) = options.mg_cap {
            if cap < kept.len() {
                let mut order = kept.clone();
                order.shuffle(&mut rng::stage_stream(config.seed, "mg-cap"));
                order.truncate(cap);
                order.sort_unstable();
                kept = order;
            }
        }
        let mut filtered = fakes
            .dataset
            .subset(&kept)
            .with_provenance(crate::data::Provenance::FakeM2);
        if options.replace && !filtered.is_empty() {
            filtered = replace_labels(&prepared.teacher, &filtered)?;
        }
        checkpoints.dataset("fakes_m2.dataset", &filtered)?;
        Ok((kept, filtered, report))
    })?;
    let kept_truth: Vec<Truth> = kept.iter().map(|&i| fakes.truth[i]).collect();
    let student_metrics = stage("student", &mut timings, || {
        let reuse_nokd = filtered.is_empty() && (config.mode == StudentMode::Plain || options.rho == 0.0);
        let student = if reuse_nokd {
            prepared.nokd.clone()
        } else {
            let aug = augment(&prepared.train, &filtered)?;
            let (init, t) = student_init(config)?;
            train_student(&aug, &init, &t, config.mode, Some(&prepared.teacher))?
        };
        checkpoints.net("student_cgankd.net", &student)?;
        evaluate(&student, &prepared.test)
    })?;
    let m_fake = filtered.len();
    Ok(PipelineReport {
        task: config.data.task(),
        n_real: prepared.train.len(),
        n_fake: fakes.dataset.len(),
        m_fake,
        rho: options.rho,
        theta: theta(prepared.train.len(), m_fake),
        teacher: prepared.teacher_metrics,
        student_nokd: prepared.nokd_metrics,
        student_cgankd: student_metrics,
        filter: report,
        draws: fakes.draws,
        fakes_before_m2: diagnose(&fakes.dataset, &fakes.truth),
        fakes_after_m2: diagnose(&filtered, &kept_truth),
        seed: config.seed,
        timings,
    })
}

pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineReport> {
    run_pipeline_with(config, &Checkpoints::default())
}

pub fn run_pipeline_with(config: &PipelineConfig, checkpoints: &Checkpoints) -> Result<PipelineReport> {
    let prepared = prepare(config, checkpoints)?;
    finish(&prepared, FinishOptions::from_config(config), checkpoints)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Variant {
    RawFakes,
    M1,
    M1M2,
    M1M2Replace,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::RawFakes, Variant::M1, Variant::M1M2, Variant::M1M2Replace];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::RawFakes => "raw",
            Variant::M1 => "m1",
            Variant::M1M2 => "m1_m2",
            Variant::M1M2Replace => "m1_m2_replace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.as_str() == s)
    }
}

/// The four module variants on shared seeds: raw fakes, after M1, after M1
/// and filtering, and with label replacement as well. Replacement applies to
/// regression only, so for classification the last two coincide.
pub fn run_ablation(config: &PipelineConfig) -> Result<Vec<(Variant, PipelineReport)>> {
    let mut config = config.clone();
    config.m1.enabled = true;
    let none = Checkpoints::default();
    let prepared = prepare(&config, &none)?;
    let raw = raw_fakes(&prepared)?;
    let regression = !config.data.task().is_classification();
    let keep_all = |replace| FinishOptions {
        rho: 1.0,
        mg_cap: config.mg_cap,
        replace,
    };
    let filtered = |replace| FinishOptions {
        rho: config.rho,
        mg_cap: config.mg_cap,
        replace,
    };
    Ok(vec![
        (Variant::RawFakes, finish_with(&prepared, &raw, keep_all(false), &none)?),
        (Variant::M1, finish(&prepared, keep_all(false), &none)?),
        (Variant::M1M2, finish(&prepared, filtered(false), &none)?),
        (Variant::M1M2Replace, finish(&prepared, filtered(regression), &none)?),
    ])
}
