//! `cgankd` command-line harness: single runs, sensitivity sweeps,
//! module ablations, bound verification and plot-data export.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 a pipeline stage
//! failed (the stage is named on standard error).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use cgankd::config::KvDoc;
use cgankd::distill::{finish, prepare, run_ablation, run_pipeline_with, Checkpoints, FinishOptions, Variant};
use cgankd::theory::{load_setup, verify_bound};
use cgankd::{PipelineConfig, PipelineReport};

pub mod manifest;
pub mod stats;
pub mod table;

use manifest::RunManifest;
use table::{report_cells, report_table, summary_cells, Table, REPORT_COLUMNS};

#[derive(Debug, Parser)]
#[command(name = "cgankd", version, about = "Knowledge distillation through filtered generator samples")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline once and write report.csv.
    Run(RunArgs),
    /// Repeat the pipeline over values of one parameter and several seeds.
    Sweep(SweepArgs),
    /// Compare raw fakes, +M1, +M1+M2 and +M1+M2 with label replacement.
    Ablation(AblationArgs),
    /// Check the excess-risk bound on a finite discrete setup.
    VerifyBound(BoundArgs),
    /// Turn a sweep or ablation CSV into long-format plot data.
    Plotdata(PlotArgs),
}

#[derive(Debug, clap::Args)]
pub struct RunArgs {
    /// Pipeline config file.
    #[arg(required_unless_present = "manifest", conflicts_with = "manifest")]
    pub config: Option<PathBuf>,
    /// Re-run the exact configuration recorded in a manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "cgankd-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    /// Cap on the number of fake samples added (`M^g`).
    Mg,
    /// Filtering quantile.
    Rho,
    /// Teacher training epochs.
    TeacherEpochs,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Mg => "mg",
            SweepParam::Rho => "rho",
            SweepParam::TeacherEpochs => "teacher-epochs",
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma-separated values.
    #[arg(long)]
    pub values: String,
    /// Comma-separated seeds, or an inclusive range `a..b`.
    #[arg(long, default_value = "0")]
    pub seeds: String,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "cgankd-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct AblationArgs {
    pub config: PathBuf,
    #[arg(long, default_value = "0")]
    pub seeds: String,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value = "cgankd-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, clap::Args)]
pub struct BoundArgs {
    /// Discrete setup file.
    pub setup: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "cgankd-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Sweep,
    Ablation,
}

#[derive(Debug, clap::Args)]
pub struct PlotArgs {
    /// A sweep.csv or ablation.csv written by this tool.
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    #[arg(long, default_value = "cgankd-out")]
    pub out_dir: PathBuf,
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Stage(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Stage(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) | Failure::Stage(e) => write!(f, "{e:#}"),
        }
    }
}

type CmdResult<T = ()> = Result<T, Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

/// Maps core errors: configuration problems give exit 2, everything else 3.
fn core_err(e: cgankd::Error) -> Failure {
    if e.is_config() {
        Failure::Config(e.into())
    } else {
        Failure::Stage(e.into())
    }
}

fn output_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Stage(e.into().context("writing output"))
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> CmdResult {
    match command {
        Command::Run(a) => cmd_run(a).map(|_| ()),
        Command::Sweep(a) => cmd_sweep(a).map(|_| ()),
        Command::Ablation(a) => cmd_ablation(a).map(|_| ()),
        Command::VerifyBound(a) => cmd_verify_bound(a).map(|_| ()),
        Command::Plotdata(a) => cmd_plotdata(a).map(|_| ()),
    }
}

fn create_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(output_err)
}

/// Loads a config and renders it back to text; the returned config is
/// parsed from that text, so the snapshot is exactly what runs.
fn load_config(path: &Path, seed: Option<u64>) -> CmdResult<(PipelineConfig, String)> {
    let doc = KvDoc::load(path).map_err(core_err)?;
    snapshot(&doc, seed)
}

fn snapshot(doc: &KvDoc, seed: Option<u64>) -> CmdResult<(PipelineConfig, String)> {
    let mut config = PipelineConfig::from_doc(doc).map_err(core_err)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    let text = config.to_doc().to_text();
    let parsed = KvDoc::parse(&text, "resolved config").map_err(core_err)?;
    let executed = PipelineConfig::from_doc(&parsed).map_err(core_err)?;
    Ok((executed, text))
}

pub fn cmd_run(args: &RunArgs) -> CmdResult<PipelineReport> {
    let started = manifest::unix_now();
    let (config, text, source) = match (&args.manifest, &args.config) {
        (Some(m), _) => {
            let manifest = RunManifest::load(m).map_err(config_err)?;
            let (c, t) = snapshot(&manifest.config_doc().map_err(core_err)?, args.seed)?;
            (c, t, manifest.config_path)
        }
        (None, Some(p)) => {
            let (c, t) = load_config(p, args.seed)?;
            (c, t, p.display().to_string())
        }
        (None, None) => return Err(config_err(anyhow!("a config path or --manifest is required"))),
    };
    let out = &args.out_dir;
    create_dir(&out.join("artifacts"))?;
    std::fs::write(out.join("config.resolved.cfg"), &text).map_err(output_err)?;
    let report = run_pipeline_with(&config, &Checkpoints::to(&out.join("artifacts"))).map_err(core_err)?;
    report_table(&report).save(&out.join("report.csv")).map_err(output_err)?;
    std::fs::write(out.join("report.txt"), manifest::report_text(&report)).map_err(output_err)?;
    let m = RunManifest {
        command: "run".into(),
        config_path: source,
        seed: config.seed,
        started_unix: started,
        finished_unix: manifest::unix_now(),
        artifacts: vec![
            ("report".into(), "report.csv".into()),
            ("details".into(), "report.txt".into()),
            ("snapshot".into(), "config.resolved.cfg".into()),
            ("checkpoints".into(), "artifacts".into()),
        ],
        config_text: text,
    };
    m.save(&out.join("manifest.cfg")).map_err(output_err)?;
    Ok(report)
}

/// `"1,2,3"` or an inclusive range `"1..5"`.
pub fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let s = s.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
        if a > b {
            bail!("empty seed range `{s}`");
        }
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse()).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

fn parse_values(param: SweepParam, s: &str) -> anyhow::Result<Vec<f64>> {
    let mut values: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().with_context(|| format!("bad value `{x}`")))
        .collect::<anyhow::Result<_>>()?;
    if values.is_empty() {
        bail!("no values given");
    }
    for &v in &values {
        let ok = match param {
            SweepParam::Rho => (0.0..=1.0).contains(&v),
            SweepParam::Mg => v >= 0.0 && v.fract() == 0.0,
            SweepParam::TeacherEpochs => v >= 1.0 && v.fract() == 0.0,
        };
        if !ok {
            bail!("value {v} is invalid for --param {}", param.name());
        }
    }
    values.sort_by(f64::total_cmp);
    values.dedup();
    Ok(values)
}

fn pool(jobs: usize) -> CmdResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure::Stage(e.into()))
}

/// Sweep cells for one seed; `prepare` is shared across values unless the
/// value changes the teacher.
fn sweep_seed(base: &PipelineConfig, param: SweepParam, values: &[f64], seed: u64) -> cgankd::Result<Vec<(f64, PipelineReport)>> {
    let mut config = base.clone();
    config.seed = seed;
    let none = Checkpoints::default();
    match param {
        SweepParam::TeacherEpochs => values
            .iter()
            .map(|&v| {
                let mut c = config.clone();
                c.teacher.train.epochs = v as usize;
                Ok((v, cgankd::distill::run_pipeline(&c)?))
            })
            .collect(),
        SweepParam::Mg | SweepParam::Rho => {
            let prepared = prepare(&config, &none)?;
            values
                .iter()
                .map(|&v| {
                    let mut o = FinishOptions::from_config(&config);
                    match param {
                        SweepParam::Mg => o.mg_cap = Some(v as usize),
                        _ => o.rho = v,
                    }
                    Ok((v, finish(&prepared, o, &none)?))
                })
                .collect()
        }
    }
}

fn write_run_manifest(out: &Path, command: &str, config_path: &Path, seed: u64, started: u64, text: String, artifact: &str) -> CmdResult {
    RunManifest {
        command: command.into(),
        config_path: config_path.display().to_string(),
        seed,
        started_unix: started,
        finished_unix: manifest::unix_now(),
        artifacts: vec![("table".into(), artifact.into())],
        config_text: text,
    }
    .save(&out.join("manifest.cfg"))
    .map_err(output_err)
}

pub const SWEEP_PREFIX: [&str; 3] = ["row_kind", "param", "value"];

pub fn cmd_sweep(args: &SweepArgs) -> CmdResult<Table> {
    let started = manifest::unix_now();
    let (base, text) = load_config(&args.config, None)?;
    let values = parse_values(args.param, &args.values).map_err(config_err)?;
    let seeds = parse_seeds(&args.seeds).map_err(config_err)?;
    create_dir(&args.out_dir)?;
    let cells: Vec<Vec<(f64, PipelineReport)>> = pool(args.jobs)?
        .install(|| {
            seeds
                .par_iter()
                .map(|&s| sweep_seed(&base, args.param, &values, s))
                .collect::<cgankd::Result<_>>()
        })
        .map_err(core_err)?;
    let mut flat: Vec<(f64, PipelineReport)> = cells.into_iter().flatten().collect();
    flat.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.seed.cmp(&b.1.seed)));

    let header: Vec<&str> = SWEEP_PREFIX.iter().chain(REPORT_COLUMNS.iter()).copied().collect();
    let mut table = Table::new(&header);
    let name = args.param.name();
    for &v in &values {
        let group: Vec<Vec<String>> = flat.iter().filter(|c| c.0 == v).map(|c| report_cells(&c.1)).collect();
        for g in &group {
            table.push(prefixed(&["cell", name, &v.to_string()], g));
        }
        let refs: Vec<&[String]> = group.iter().map(Vec::as_slice).collect();
        let (mean, sd) = summary_cells(&refs);
        table.push(prefixed(&["mean", name, &v.to_string()], &mean));
        table.push(prefixed(&["stddev", name, &v.to_string()], &sd));
    }
    table.save(&args.out_dir.join("sweep.csv")).map_err(output_err)?;
    write_run_manifest(&args.out_dir, "sweep", &args.config, base.seed, started, text, "sweep.csv")?;
    Ok(table)
}

fn prefixed(prefix: &[&str], cells: &[String]) -> Vec<String> {
    prefix.iter().map(|s| s.to_string()).chain(cells.iter().cloned()).collect()
}

pub const ABLATION_PREFIX: [&str; 2] = ["row_kind", "variant"];

pub fn cmd_ablation(args: &AblationArgs) -> CmdResult<Table> {
    let started = manifest::unix_now();
    let (base, text) = load_config(&args.config, None)?;
    let seeds = parse_seeds(&args.seeds).map_err(config_err)?;
    create_dir(&args.out_dir)?;
    let runs: Vec<Vec<(Variant, PipelineReport)>> = pool(args.jobs)?
        .install(|| {
            seeds
                .par_iter()
                .map(|&s| {
                    let mut c = base.clone();
                    c.seed = s;
                    run_ablation(&c)
                })
                .collect::<cgankd::Result<_>>()
        })
        .map_err(core_err)?;
    let mut flat: Vec<(Variant, PipelineReport)> = runs.into_iter().flatten().collect();
    flat.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.seed.cmp(&b.1.seed)));

    let header: Vec<&str> = ABLATION_PREFIX.iter().chain(REPORT_COLUMNS.iter()).copied().collect();
    let mut table = Table::new(&header);
    for v in Variant::ALL {
        let group: Vec<Vec<String>> = flat.iter().filter(|c| c.0 == v).map(|c| report_cells(&c.1)).collect();
        for g in &group {
            table.push(prefixed(&["cell", v.as_str()], g));
        }
        let refs: Vec<&[String]> = group.iter().map(Vec::as_slice).collect();
        let (mean, sd) = summary_cells(&refs);
        table.push(prefixed(&["mean", v.as_str()], &mean));
        table.push(prefixed(&["stddev", v.as_str()], &sd));
    }
    table.save(&args.out_dir.join("ablation.csv")).map_err(output_err)?;
    write_run_manifest(&args.out_dir, "ablation", &args.config, base.seed, started, text, "ablation.csv")?;
    Ok(table)
}

pub const BOUND_COLUMNS: [&str; 16] = [
    "row_kind",
    "trial",
    "n",
    "theta",
    "tv",
    "rademacher",
    "rademacher_se",
    "capacity_term",
    "statistical_term",
    "gap_term",
    "approx_term",
    "rhs",
    "lhs",
    "holds",
    "delta",
    "holds_fraction",
];

pub fn cmd_verify_bound(args: &BoundArgs) -> CmdResult<Table> {
    let setup = load_setup(&args.setup).map_err(core_err)?;
    let report = verify_bound(&setup, args.trials, args.delta, args.seed).map_err(|e| match e {
        e @ (cgankd::Error::InvalidArgument(_) | cgankd::Error::InvalidSpec(_)) => config_err(e),
        e => core_err(e),
    })?;
    create_dir(&args.out_dir)?;
    let mut table = Table::new(&BOUND_COLUMNS);
    for t in &report.trials {
        let b = &t.report;
        table.push(vec![
            "trial".into(),
            t.trial.to_string(),
            t.n.to_string(),
            report.theta.to_string(),
            report.tv.to_string(),
            b.rademacher.to_string(),
            t.rademacher_se.to_string(),
            b.capacity_term.to_string(),
            b.statistical_term.to_string(),
            b.gap_term.to_string(),
            b.approx_term.to_string(),
            b.rhs.to_string(),
            table::fmt_opt(b.lhs),
            b.holds().map_or(String::new(), |h| h.to_string()),
            report.delta.to_string(),
            String::new(),
        ]);
    }
    let mut summary = vec![String::new(); BOUND_COLUMNS.len()];
    summary[0] = "summary".into();
    summary[3] = report.theta.to_string();
    summary[4] = report.tv.to_string();
    summary[14] = report.delta.to_string();
    summary[15] = report.holds_fraction().to_string();
    table.push(summary);
    table.save(&args.out_dir.join("bound.csv")).map_err(output_err)?;
    Ok(table)
}

pub const PLOT_COLUMNS: [&str; 5] = ["x", "series", "mean", "stddev", "count"];
const SERIES: [&str; 3] = ["teacher_metric", "student_nokd_metric", "student_cgankd_metric"];

/// Long-format `(x, series, mean, stddev, count)` rows recomputed from the
/// cell rows of a sweep or ablation table.
pub fn plot_table(input: &Table, kind: PlotKind) -> anyhow::Result<Table> {
    let kind_col = input.column("row_kind")?;
    let x_col = input.column(match kind {
        PlotKind::Sweep => "value",
        PlotKind::Ablation => "variant",
    })?;
    let series_cols: Vec<usize> = SERIES.iter().map(|s| input.column(s)).collect::<anyhow::Result<_>>()?;
    let cells: Vec<&Vec<String>> = input.rows.iter().filter(|r| r[kind_col] == "cell").collect();
    let mut xs: Vec<String> = Vec::new();
    for r in &cells {
        if !xs.contains(&r[x_col]) {
            xs.push(r[x_col].clone());
        }
    }
    match kind {
        PlotKind::Sweep => {
            let mut keyed = xs
                .into_iter()
                .map(|x| Ok((table::parse_f64(&x, "value")?, x)))
                .collect::<anyhow::Result<Vec<_>>>()?;
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
            xs = keyed.into_iter().map(|k| k.1).collect();
        }
        PlotKind::Ablation => {
            for x in &xs {
                Variant::parse(x).ok_or_else(|| anyhow!("unknown variant `{x}`"))?;
            }
            xs.sort_by_key(|x| Variant::parse(x));
        }
    }
    let mut out = Table::new(&PLOT_COLUMNS);
    for x in &xs {
        for (name, &col) in SERIES.iter().zip(&series_cols) {
            let vals: Vec<f64> = cells
                .iter()
                .filter(|r| &r[x_col] == x)
                .map(|r| table::parse_f64(&r[col], name))
                .collect::<anyhow::Result<_>>()?;
            out.push(vec![
                x.clone(),
                name.trim_end_matches("_metric").to_string(),
                stats::mean(&vals).to_string(),
                stats::stddev(&vals).to_string(),
                vals.len().to_string(),
            ]);
        }
    }
    Ok(out)
}

pub fn cmd_plotdata(args: &PlotArgs) -> CmdResult<Table> {
    let input = Table::load(&args.input).map_err(config_err)?;
    let out = plot_table(&input, args.kind).map_err(config_err)?;
    create_dir(&args.out_dir)?;
    out.save(&args.out_dir.join("plot.csv")).map_err(output_err)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seeds("1,2, 5").unwrap(), vec![1, 2, 5]);
        assert_eq!(parse_seeds("3..5").unwrap(), vec![3, 4, 5]);
        assert!(parse_seeds("5..3").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn values_are_checked_and_sorted() {
        assert_eq!(parse_values(SweepParam::Mg, "800,0,400").unwrap(), vec![0.0, 400.0, 800.0]);
        assert!(parse_values(SweepParam::Rho, "1.2").is_err());
        assert!(parse_values(SweepParam::Mg, "2.5").is_err());
        assert!(parse_values(SweepParam::TeacherEpochs, "0").is_err());
    }

    #[test]
    fn plot_rows_recompute_means() {
        let header: Vec<&str> = SWEEP_PREFIX.iter().chain(REPORT_COLUMNS.iter()).copied().collect();
        let mut t = Table::new(&header);
        let row = |kind: &str, v: &str, m: &str| {
            let mut r = vec![kind.to_string(), "rho".into(), v.into()];
            r.extend(REPORT_COLUMNS.iter().map(|_| "1".to_string()));
            r[3 + 8] = m.into();
            r
        };
        t.push(row("cell", "0.9", "2"));
        t.push(row("cell", "0.9", "4"));
        t.push(row("mean", "0.9", "999"));
        t.push(row("cell", "0.1", "1"));
        let p = plot_table(&t, PlotKind::Sweep).unwrap();
        assert_eq!(p.rows.len(), 6);
        assert_eq!(p.rows[0][0], "0.1");
        let r = p.rows.iter().find(|r| r[0] == "0.9" && r[1] == "student_cgankd").unwrap();
        assert_eq!(r[2], "3");
        assert_eq!(r[3], std::f64::consts::SQRT_2.to_string());
        let empty = Table::new(&header);
        assert!(plot_table(&empty, PlotKind::Sweep).unwrap().rows.is_empty());
        assert!(plot_table(&Table::new(&["a"]), PlotKind::Sweep).is_err());
    }
}
