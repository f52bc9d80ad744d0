//! Teacher-driven filtering and relabelling of generated samples.
//!
//! Each fake sample gets an error: `-ln p_t(assigned class)` with the
//! teacher's `T = 1` soft labels for classification, `|f_t(x) - y|` for
//! regression. Samples whose error exceeds the `rho` quantile of their group
//! (per class, or global for regression) are dropped.

use crate::config::{join_list, KvDoc};
use crate::data::{Dataset, Label, Provenance, Task};
use crate::error::{Error, Result};
use crate::nn::{argmax, check_compat, predict, soft_labels, LossKind, NetParams};

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport {
    pub rho: f64,
    /// One threshold per class, or a single global one for regression.
    /// `-inf` when `rho = 0`.
    pub thresholds: Vec<f64>,
    /// Per-class counts for classification, a single entry for regression.
    pub counts_in: Vec<usize>,
    pub counts_out: Vec<usize>,
    /// Fraction of samples whose teacher argmax equals the assigned class.
    /// `None` for regression, or when the set is empty.
    pub consistency_before: Option<f64>,
    pub consistency_after: Option<f64>,
    /// Nearest-rank quantiles of all errors at 0, 0.25, 0.5, 0.75, 1.
    pub error_quantiles: [f64; 5],
}

impl FilterReport {
    pub fn total_in(&self) -> usize {
        self.counts_in.iter().sum()
    }

    pub fn total_out(&self) -> usize {
        self.counts_out.iter().sum()
    }

    pub fn to_doc(&self) -> KvDoc {
        let opt = |v: Option<f64>| v.map_or_else(|| "none".to_string(), |v| v.to_string());
        let mut doc = KvDoc::new();
        doc.set("rho", self.rho);
        doc.set("thresholds", join_list(&self.thresholds));
        doc.set("counts_in", join_list(&self.counts_in));
        doc.set("counts_out", join_list(&self.counts_out));
        doc.set("consistency_before", opt(self.consistency_before));
        doc.set("consistency_after", opt(self.consistency_after));
        doc.set("error_quantiles", join_list(&self.error_quantiles));
        doc
    }

    pub fn from_doc(doc: &KvDoc) -> Result<Self> {
        let mut r = doc.reader();
        let q: Vec<f64> = r.list("error_quantiles")?;
        let report = FilterReport {
            rho: r.get("rho")?,
            thresholds: r.list("thresholds")?,
            counts_in: r.list("counts_in")?,
            counts_out: r.list("counts_out")?,
            consistency_before: r.opt("consistency_before")?,
            consistency_after: r.opt("consistency_after")?,
            error_quantiles: q
                .try_into()
                .map_err(|_| Error::Config("error_quantiles needs 5 entries".into()))?,
        };
        r.finish()?;
        Ok(report)
    }
}

fn check_teacher(teacher: &NetParams, samples: &Dataset) -> Result<()> {
    let loss = if samples.task.is_classification() {
        LossKind::PlainCe
    } else {
        LossKind::PlainSe
    };
    check_compat(teacher, samples.task, &loss)?;
    if teacher.spec().input_dim() != samples.dim {
        return Err(Error::DimensionMismatch {
            expected: teacher.spec().input_dim(),
            found: samples.dim,
        });
    }
    Ok(())
}

/// Per-sample teacher error, in sample order.
pub fn sample_errors(teacher: &NetParams, samples: &Dataset) -> Result<Vec<f64>> {
    check_teacher(teacher, samples)?;
    predict(teacher, &samples.samples)
        .iter()
        .zip(&samples.samples)
        .map(|(out, s)| match s.label {
            Label::Class(c) => Ok(-soft_labels(out, 1.0)?.probs[c].ln()),
            Label::Scalar(y) => Ok((out[0] - y).abs()),
        })
        .collect()
}

/// Nearest-rank `rho` quantile: the `ceil(rho * n)`-th smallest error
/// (1-based); `-inf` for `rho = 0`.
pub fn quantile_threshold(errors: &[f64], rho: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho must lie in [0, 1], got {rho}")));
    }
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::NonFinite("filter error".into()));
    }
    if rho == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[nearest_rank(rho, sorted.len()) - 1])
}

/// `ceil(rho * n)` clamped to `[1, n]`; the small slack keeps products such
/// as `0.7 * 10` from rounding up to the next rank.
fn nearest_rank(rho: f64, n: usize) -> usize {
    ((rho * n as f64 - 1e-9).ceil() as usize).clamp(1, n)
}

fn quantile_summary(errors: &[f64]) -> [f64; 5] {
    if errors.is_empty() {
        return [f64::NAN; 5];
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| sorted[if q == 0.0 { 0 } else { nearest_rank(q, n) - 1 }])
}

fn consistency(teacher_argmax: &[usize], samples: &Dataset, keep: impl Fn(usize) -> bool) -> Option<f64> {
    let (mut n, mut agree) = (0usize, 0usize);
    for (i, s) in samples.samples.iter().enumerate().filter(|(i, _)| keep(*i)) {
        n += 1;
        agree += usize::from(s.label.class() == Some(teacher_argmax[i]));
    }
    (n > 0).then(|| agree as f64 / n as f64)
}

/// Indices kept by the filter, in input order, and the report. Works for
/// both tasks.
pub fn filter_indices(teacher: &NetParams, samples: &Dataset, rho: f64) -> Result<(Vec<usize>, FilterReport)> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let errors = sample_errors(teacher, samples)?;
    let groups: Vec<Vec<usize>> = match samples.task {
        Task::Classification { classes } => {
            let mut g = vec![Vec::new(); classes];
            for (i, s) in samples.samples.iter().enumerate() {
                g[s.label.class().expect("validated label")].push(i);
            }
            if let Some(c) = g.iter().position(Vec::is_empty) {
                return Err(Error::MissingClass(c));
            }
            g
        }
        Task::Regression { .. } => vec![(0..samples.len()).collect()],
    };
    let mut keep = vec![false; samples.len()];
    let (mut thresholds, mut counts_in, mut counts_out) = (Vec::new(), Vec::new(), Vec::new());
    for group in &groups {
        let e: Vec<f64> = group.iter().map(|&i| errors[i]).collect();
        let alpha = quantile_threshold(&e, rho)?;
        let mut kept = 0;
        for &i in group {
            if errors[i] <= alpha {
                keep[i] = true;
                kept += 1;
            }
        }
        thresholds.push(alpha);
        counts_in.push(group.len());
        counts_out.push(kept);
    }
    let (before, after) = if samples.task.is_classification() {
        let predicted: Vec<usize> = predict(teacher, &samples.samples).iter().map(|o| argmax(o)).collect();
        (consistency(&predicted, samples, |_| true), consistency(&predicted, samples, |i| keep[i]))
    } else {
        (None, None)
    };
    let kept: Vec<usize> = (0..samples.len()).filter(|&i| keep[i]).collect();
    let report = FilterReport {
        rho,
        thresholds,
        counts_in,
        counts_out,
        consistency_before: before,
        consistency_after: after,
        error_quantiles: quantile_summary(&errors),
    };
    Ok((kept, report))
}

fn filter(teacher: &NetParams, samples: &Dataset, rho: f64) -> Result<(Dataset, FilterReport)> {
    let (kept, report) = filter_indices(teacher, samples, rho)?;
    Ok((samples.subset(&kept).with_provenance(Provenance::FakeM2), report))
}

/// Per-class filtering; output tagged `fake_m2`.
pub fn filter_classification(teacher: &NetParams, samples: &Dataset, rho: f64) -> Result<(Dataset, FilterReport)> {
    if !samples.task.is_classification() {
        return Err(Error::TaskMismatch("filter_classification needs a classification set".into()));
    }
    filter(teacher, samples, rho)
}

/// One global threshold; output tagged `fake_m2`.
pub fn filter_regression(teacher: &NetParams, samples: &Dataset, rho: f64) -> Result<(Dataset, FilterReport)> {
    if samples.task.is_classification() {
        return Err(Error::TaskMismatch("filter_regression needs a regression set".into()));
    }
    filter(teacher, samples, rho)
}

/// Replaces every regression label with `clamp(f_t(x), 0, 1)`.
pub fn replace_labels(teacher: &NetParams, samples: &Dataset) -> Result<Dataset> {
    if samples.task.is_classification() {
        return Err(Error::TaskMismatch("label replacement applies to regression only".into()));
    }
    check_teacher(teacher, samples)?;
    let mut out = samples.clone().with_provenance(Provenance::FakeM2);
    for (s, p) in out.samples.iter_mut().zip(predict(teacher, &samples.samples)) {
        s.label = Label::Scalar(p[0].clamp(0.0, 1.0));
    }
    Ok(out)
}

/// Filtering, followed by replacement when `replace` is set.
pub fn run_m2_with(teacher: &NetParams, samples: &Dataset, rho: f64, replace: bool) -> Result<(Dataset, FilterReport)> {
    let (kept, report) = filter(teacher, samples, rho)?;
    if replace && !kept.is_empty() {
        Ok((replace_labels(teacher, &kept)?, report))
    } else {
        Ok((kept, report))
    }
}

/// Filtering for classification; filtering then replacement for regression.
pub fn run_m2(teacher: &NetParams, samples: &Dataset, rho: f64) -> Result<(Dataset, FilterReport)> {
    run_m2_with(teacher, samples, rho, !samples.task.is_classification())
}

/// Parses a report from its key-value text block.
pub fn report_from_text(text: &str) -> Result<FilterReport> {
    FilterReport::from_doc(&KvDoc::parse(text, "filter report")?)
}
