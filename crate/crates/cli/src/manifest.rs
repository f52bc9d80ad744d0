//! Run manifests: what was executed, with which config, and where the
//! outputs went. The embedded config snapshot is enough to rerun.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

use cgankd::config::KvDoc;
use cgankd::PipelineReport;

pub const MANIFEST_FORMAT: &str = "cgankd-manifest v1";
const CONFIG_PREFIX: &str = "config.";

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config_path: String,
    pub seed: u64,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// `(name, path relative to the output directory)`.
    pub artifacts: Vec<(String, String)>,
    /// The resolved config exactly as executed.
    pub config_text: String,
}

impl RunManifest {
    pub fn to_text(&self) -> Result<String> {
        let mut doc = KvDoc::new();
        doc.set("format", MANIFEST_FORMAT);
        doc.set("command", &self.command);
        doc.set("config_path", &self.config_path);
        doc.set("seed", self.seed);
        doc.set("started_unix", self.started_unix);
        doc.set("finished_unix", self.finished_unix);
        for (k, v) in &self.artifacts {
            doc.set(&format!("artifact.{k}"), v);
        }
        let config = KvDoc::parse(&self.config_text, "config snapshot")?;
        for k in config.keys() {
            doc.set(&format!("{CONFIG_PREFIX}{k}"), config.get(k).unwrap_or_default());
        }
        Ok(doc.to_text())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).with_context(|| format!("writing {}", path.display()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc = KvDoc::load(path)?;
        let format = doc.get("format").unwrap_or_default();
        if format != MANIFEST_FORMAT {
            anyhow::bail!("{}: not a manifest (format `{format}`)", path.display());
        }
        let get = |k: &str| doc.get(k).with_context(|| format!("manifest lacks `{k}`"));
        let mut config = KvDoc::new();
        let mut artifacts = Vec::new();
        for k in doc.keys() {
            let v = doc.get(k).unwrap_or_default();
            if let Some(c) = k.strip_prefix(CONFIG_PREFIX) {
                config.set(c, v);
            } else if let Some(a) = k.strip_prefix("artifact.") {
                artifacts.push((a.to_string(), v.to_string()));
            }
        }
        Ok(RunManifest {
            command: get("command")?.to_string(),
            config_path: get("config_path")?.to_string(),
            seed: get("seed")?.parse()?,
            started_unix: get("started_unix")?.parse()?,
            finished_unix: get("finished_unix")?.parse()?,
            artifacts,
            config_text: config.to_text(),
        })
    }

    pub fn config_doc(&self) -> cgankd::Result<KvDoc> {
        KvDoc::parse(&self.config_text, "manifest config")
    }
}

/// Human-readable key-value details of a run: counts, metrics, the filter
/// report and generator-truth diagnostics. Stage timings are left out so
/// reruns produce identical text.
pub fn report_text(r: &PipelineReport) -> String {
    let mut doc = KvDoc::new();
    doc.set("n_r", r.n_real);
    doc.set("n_g", r.n_fake);
    doc.set("m_g", r.m_fake);
    doc.set("theta", r.theta);
    doc.set("draws", r.draws);
    doc.set("teacher_metric", r.teacher.raw());
    doc.set("student_nokd_metric", r.student_nokd.raw());
    doc.set("student_cgankd_metric", r.student_cgankd.raw());
    for (name, d) in [("before_m2", &r.fakes_before_m2), ("after_m2", &r.fakes_after_m2)] {
        doc.set(&format!("fakes_{name}.count"), d.count);
        doc.set(&format!("fakes_{name}.junk_fraction"), d.junk_fraction);
        doc.set(
            &format!("fakes_{name}.mislabeled_fraction"),
            d.mislabeled_fraction.map_or("none".to_string(), |v| v.to_string()),
        );
    }
    let filter = r.filter.to_doc();
    for k in filter.keys() {
        doc.set(&format!("filter.{k}"), filter.get(k).unwrap_or_default());
    }
    doc.to_text()
}
