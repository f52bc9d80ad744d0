//! CSV tables: a header plus string cells, written with the shortest
//! round-trip float formatting so reruns are byte-identical.

use std::io::{Read, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};

use cgankd::PipelineReport;

use crate::stats;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("missing column `{name}`"))
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width");
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(String::from_utf8(buf)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.iter().map(str::to_string).collect();
        let rows = rdr
            .records()
            .map(|rec| Ok(rec?.iter().map(str::to_string).collect()))
            .collect::<Result<_>>()?;
        Ok(Table { header, rows })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Self::read_from(file)
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub const REPORT_COLUMNS: [&str; 12] = [
    "task",
    "n_r",
    "n_g",
    "m_g",
    "rho",
    "theta",
    "teacher_metric",
    "student_nokd_metric",
    "student_cgankd_metric",
    "consistency_before",
    "consistency_after",
    "seed",
];

pub fn task_name(r: &PipelineReport) -> &'static str {
    if r.task.is_classification() {
        "classification"
    } else {
        "regression"
    }
}

pub fn report_cells(r: &PipelineReport) -> Vec<String> {
    vec![
        task_name(r).to_string(),
        r.n_real.to_string(),
        r.n_fake.to_string(),
        r.m_fake.to_string(),
        r.rho.to_string(),
        r.theta.to_string(),
        r.teacher.raw().to_string(),
        r.student_nokd.raw().to_string(),
        r.student_cgankd.raw().to_string(),
        fmt_opt(r.filter.consistency_before),
        fmt_opt(r.filter.consistency_after),
        r.seed.to_string(),
    ]
}

pub fn report_table(r: &PipelineReport) -> Table {
    let mut t = Table::new(&REPORT_COLUMNS);
    t.push(report_cells(r));
    t
}

/// Mean and stddev rows over `cells` (rows of [`REPORT_COLUMNS`]): numeric
/// columns are aggregated, `task` is copied, `seed` is left blank, and a
/// column with any blank cell stays blank.
pub fn summary_cells(cells: &[&[String]]) -> (Vec<String>, Vec<String>) {
    let seed_col = REPORT_COLUMNS.len() - 1;
    let mut mean = Vec::with_capacity(REPORT_COLUMNS.len());
    let mut sd = Vec::with_capacity(REPORT_COLUMNS.len());
    for c in 0..REPORT_COLUMNS.len() {
        if c == 0 {
            mean.push(cells[0][0].clone());
            sd.push(cells[0][0].clone());
            continue;
        }
        let vals: Option<Vec<f64>> = cells.iter().map(|r| r[c].parse::<f64>().ok()).collect();
        match vals {
            Some(v) if c != seed_col => {
                mean.push(stats::mean(&v).to_string());
                sd.push(stats::stddev(&v).to_string());
            }
            _ => {
                mean.push(String::new());
                sd.push(String::new());
            }
        }
    }
    (mean, sd)
}

pub fn parse_f64(cell: &str, what: &str) -> Result<f64> {
    match cell.parse() {
        Ok(v) => Ok(v),
        Err(_) => bail!("{what}: cannot parse `{cell}` as a number"),
    }
}
