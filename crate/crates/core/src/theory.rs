//! Exact evaluation of the student's excess-risk bound on finite problems.
//!
//! With probability at least `1 - delta`,
//!
//! ```text
//! V(f_hat) - V(f*) <= 4 C_L R_hat
//!                   + 2 C_L sqrt(4 / N * ln(2 / delta))
//!                   + 4 C_L (1 - theta) TV(p_r, p_g^rho)
//!                   + (V(f_s°) - V(f*))
//! ```
//!
//! where `R_hat` is the empirical Rademacher complexity of the student class
//! on `N = N^r + M^g` draws from `p_theta = theta p_r + (1 - theta) p_g^rho`.
//! Everything here is computed exactly on a finite support, so the bound can
//! be checked trial by trial.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::config::KvDoc;
use crate::error::{Error, Result};
use crate::rng;

const PROB_TOL: f64 = 1e-12;

/// Joint distribution over finitely many `(x, y)` points; `x` indexes a
/// finite input set.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    pub points: Vec<(usize, f64)>,
    pub probs: Vec<f64>,
}

impl DiscreteJoint {
    pub fn new(points: Vec<(usize, f64)>, probs: Vec<f64>) -> Result<Self> {
        let j = DiscreteJoint { points, probs };
        j.validate()?;
        Ok(j)
    }

    pub fn validate(&self) -> Result<()> {
        if self.points.len() != self.probs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.points.len(),
                found: self.probs.len(),
            });
        }
        if self.points.is_empty() {
            return Err(Error::InvalidSpec("empty support".into()));
        }
        if self.probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidSpec("probabilities must be finite and >= 0".into()));
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidSpec(format!("probabilities sum to {total}, not 1")));
        }
        let mut keys: Vec<_> = self.points.iter().map(|&(x, y)| (x, y.to_bits())).collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSpec("duplicate support point".into()));
        }
        Ok(())
    }

    /// `w p + (1 - w) q` on the union of supports.
    pub fn mixture(p: &DiscreteJoint, q: &DiscreteJoint, w: f64) -> Result<DiscreteJoint> {
        if !(0.0..=1.0).contains(&w) {
            return Err(Error::InvalidArgument(format!("mixture weight {w} outside [0, 1]")));
        }
        let (points, a, b) = aligned(p, q)?;
        let probs = a.iter().zip(&b).map(|(x, y)| w * x + (1.0 - w) * y).collect();
        Ok(DiscreteJoint { points, probs })
    }

    /// Draws `n` support indices i.i.d.
    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        let mut cdf = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for p in &self.probs {
            acc += p;
            cdf.push(acc);
        }
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        (0..n)
            .map(|_| {
                let u: f64 = rng.random::<f64>() * acc;
                cdf.partition_point(|&c| c <= u).min(last)
            })
            .collect()
    }
}

type Aligned = (Vec<(usize, f64)>, Vec<f64>, Vec<f64>);

/// Probability vectors of `p` and `q` over the union of their supports, in
/// `(x, y)` order.
fn aligned(p: &DiscreteJoint, q: &DiscreteJoint) -> Result<Aligned> {
    p.validate()?;
    q.validate()?;
    let mut table: BTreeMap<(usize, u64), (f64, f64, f64)> = BTreeMap::new();
    for (&(x, y), &pr) in p.points.iter().zip(&p.probs) {
        table.entry((x, y.to_bits())).or_insert((y, 0.0, 0.0)).1 += pr;
    }
    for (&(x, y), &pr) in q.points.iter().zip(&q.probs) {
        table.entry((x, y.to_bits())).or_insert((y, 0.0, 0.0)).2 += pr;
    }
    let mut points = Vec::with_capacity(table.len());
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for ((x, _), (y, pa, pb)) in table {
        points.push((x, y));
        a.push(pa);
        b.push(pb);
    }
    Ok((points, a, b))
}

/// Half the L1 distance; supports are zero-padded to their union.
pub fn tv_distance(p: &DiscreteJoint, q: &DiscreteJoint) -> Result<f64> {
    let (_, a, b) = aligned(p, q)?;
    let tv = 0.5 * a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>();
    Ok(tv.min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    Squared,
    Absolute,
}

impl Loss {
    pub fn eval(&self, prediction: f64, y: f64) -> f64 {
        match self {
            Loss::Squared => (prediction - y).powi(2),
            Loss::Absolute => (prediction - y).abs(),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Loss::Squared => "squared",
            Loss::Absolute => "absolute",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "squared" => Ok(Loss::Squared),
            "absolute" => Ok(Loss::Absolute),
            _ => Err(Error::Config(format!("unknown loss `{s}`"))),
        }
    }

    /// Minimum over all predictions `a` of `sum_k w_k loss(a, y_k)`.
    fn best_constant(&self, ys: &[(f64, f64)]) -> f64 {
        let mass: f64 = ys.iter().map(|(_, w)| w).sum();
        if mass == 0.0 {
            return 0.0;
        }
        let a = match self {
            Loss::Squared => ys.iter().map(|(y, w)| y * w).sum::<f64>() / mass,
            Loss::Absolute => {
                let mut sorted = ys.to_vec();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut acc = 0.0;
                sorted
                    .iter()
                    .find(|(_, w)| {
                        acc += w;
                        acc >= mass / 2.0
                    })
                    .map_or(sorted[0].0, |p| p.0)
            }
        };
        ys.iter().map(|(y, w)| w * self.eval(a, *y)).sum()
    }
}

/// Predictor as a table over x-indices.
pub type Predictor = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHypothesisClass {
    pub predictors: Vec<Predictor>,
}

impl FiniteHypothesisClass {
    pub fn new(predictors: Vec<Predictor>) -> Result<Self> {
        let Some(first) = predictors.first() else {
            return Err(Error::InvalidSpec("hypothesis class is empty".into()));
        };
        if predictors.iter().any(|p| p.len() != first.len()) {
            return Err(Error::InvalidSpec("predictors must share one domain".into()));
        }
        Ok(FiniteHypothesisClass { predictors })
    }

    /// The `2 n` threshold rules on `n` ordered x-points: output `high` on
    /// `x >= t` (or `x < t`) for `t = 0..n`, `low` elsewhere.
    pub fn thresholds(n: usize, low: f64, high: f64) -> Self {
        let mut predictors = Vec::with_capacity(2 * n);
        for t in 0..n {
            predictors.push((0..n).map(|x| if x >= t { high } else { low }).collect());
            predictors.push((0..n).map(|x| if x < t { high } else { low }).collect());
        }
        FiniteHypothesisClass { predictors }
    }

    pub fn domain_size(&self) -> usize {
        self.predictors[0].len()
    }

    fn check_covers(&self, joint: &DiscreteJoint) -> Result<()> {
        match joint.points.iter().find(|(x, _)| *x >= self.domain_size()) {
            Some((x, _)) => Err(Error::InvalidSpec(format!("predictors undefined at x = {x}"))),
            None => Ok(()),
        }
    }
}

fn check_bounded(f: &[f64], points: &[(usize, f64)], loss: Loss, c_l: f64) -> Result<()> {
    if !(c_l > 0.0) {
        return Err(Error::InvalidArgument("loss bound C_L must be positive".into()));
    }
    for &(x, y) in points {
        let pred = *f
            .get(x)
            .ok_or_else(|| Error::InvalidSpec(format!("predictor undefined at x = {x}")))?;
        let l = loss.eval(pred, y);
        if l > c_l + PROB_TOL {
            return Err(Error::InvalidSpec(format!("loss {l} at (x = {x}, y = {y}) exceeds C_L = {c_l}")));
        }
    }
    Ok(())
}

/// `sum_i p_i loss(f(x_i), y_i)`; fails if the loss exceeds `c_l` anywhere
/// on the support.
pub fn exact_risk(f: &[f64], joint: &DiscreteJoint, loss: Loss, c_l: f64) -> Result<f64> {
    joint.validate()?;
    check_bounded(f, &joint.points, loss, c_l)?;
    Ok(joint
        .points
        .iter()
        .zip(&joint.probs)
        .map(|(&(x, y), p)| p * loss.eval(f[x], y))
        .sum())
}

/// Risk of the unrestricted optimal predictor (conditional mean for squared
/// loss, conditional median for absolute loss).
pub fn optimal_risk(joint: &DiscreteJoint, loss: Loss) -> Result<f64> {
    joint.validate()?;
    let mut by_x: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for (&(x, y), &p) in joint.points.iter().zip(&joint.probs) {
        by_x.entry(x).or_default().push((y, p));
    }
    Ok(by_x.values().map(|ys| loss.best_constant(ys)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rademacher {
    pub value: f64,
    pub std_error: f64,
}

/// Sample multiset grouped by support point: `(x, y, count)`.
fn group(samples: &[(usize, f64)]) -> Vec<(usize, f64, u64)> {
    let mut m: BTreeMap<(usize, u64), (f64, u64)> = BTreeMap::new();
    for &(x, y) in samples {
        m.entry((x, y.to_bits())).or_insert((y, 0)).1 += 1;
    }
    m.into_iter().map(|((x, _), (y, c))| (x, y, c)).collect()
}

fn loss_table(h: &FiniteHypothesisClass, groups: &[(usize, f64, u64)], loss: Loss, c_l: f64) -> Result<Vec<Vec<f64>>> {
    let points: Vec<(usize, f64)> = groups.iter().map(|&(x, y, _)| (x, y)).collect();
    h.predictors
        .iter()
        .map(|f| {
            check_bounded(f, &points, loss, c_l)?;
            Ok(points.iter().map(|&(x, y)| loss.eval(f[x], y) / c_l).collect())
        })
        .collect()
}

fn sup_abs(table: &[Vec<f64>], sums: &[f64]) -> f64 {
    table
        .iter()
        .map(|row| row.iter().zip(sums).map(|(l, s)| l * s).sum::<f64>().abs())
        .fold(0.0, f64::max)
}

/// Monte-Carlo estimate of `E_sigma sup_f |1/n sum_i sigma_i loss_i(f) / C_L|`.
///
/// Signs are summed per distinct support point, drawn as `2 Bin(k, 1/2) - k`,
/// so the draws depend only on the sample multiset and are shared by every
/// hypothesis class evaluated with the same seed.
pub fn empirical_rademacher(
    h: &FiniteHypothesisClass,
    samples: &[(usize, f64)],
    loss: Loss,
    c_l: f64,
    n_mc: usize,
    seed: u64,
) -> Result<Rademacher> {
    if samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_mc == 0 {
        return Err(Error::InvalidArgument("n_mc must be at least 1".into()));
    }
    let groups = group(samples);
    let table = loss_table(h, &groups, loss, c_l)?;
    let n = samples.len() as f64;
    let dists: Vec<Binomial> = groups
        .iter()
        .map(|&(_, _, k)| Binomial::new(k, 0.5).expect("valid binomial"))
        .collect();
    let mut r = rng::stream(seed);
    let mut sums = vec![0.0; groups.len()];
    let (mut mean, mut m2) = (0.0, 0.0);
    for t in 0..n_mc {
        for ((s, d), g) in sums.iter_mut().zip(&dists).zip(&groups) {
            *s = 2.0 * d.sample(&mut r) as f64 - g.2 as f64;
        }
        let v = sup_abs(&table, &sums) / n;
        let delta = v - mean;
        mean += delta / (t + 1) as f64;
        m2 += delta * (v - mean);
    }
    let std_error = if n_mc > 1 {
        (m2 / (n_mc - 1) as f64 / n_mc as f64).sqrt()
    } else {
        0.0
    };
    Ok(Rademacher { value: mean, std_error })
}

/// Largest sample for [`exact_rademacher`].
pub const EXACT_RADEMACHER_MAX: usize = 16;

/// Exact expectation by summing over all `2^n` sign vectors.
pub fn exact_rademacher(h: &FiniteHypothesisClass, samples: &[(usize, f64)], loss: Loss, c_l: f64) -> Result<f64> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if n > EXACT_RADEMACHER_MAX {
        return Err(Error::InvalidArgument(format!(
            "exact Rademacher needs n <= {EXACT_RADEMACHER_MAX}, got {n}"
        )));
    }
    let groups: Vec<(usize, f64, u64)> = samples.iter().map(|&(x, y)| (x, y, 1)).collect();
    let table = loss_table(h, &groups, loss, c_l)?;
    let mut signs = vec![0.0; n];
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        for (i, s) in signs.iter_mut().enumerate() {
            *s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
        }
        total += sup_abs(&table, &signs);
    }
    Ok(total / n as f64 / f64::from(1u32 << n))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub rademacher: f64,
    pub c_l: f64,
    /// `N^r + M^g`.
    pub n: usize,
    pub delta: f64,
    pub theta: f64,
    pub tv: f64,
    /// `V(f_s°) - V(f*)`.
    pub approx_gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub c_l: f64,
    pub rademacher: f64,
    /// `4 C_L R_hat`.
    pub capacity_term: f64,
    /// `2 C_L sqrt(4 / N ln(2 / delta))`.
    pub statistical_term: f64,
    /// `4 C_L (1 - theta) TV`.
    pub gap_term: f64,
    pub approx_term: f64,
    pub rhs: f64,
    /// Measured `V(f_hat) - V(f*)`, when known.
    pub lhs: Option<f64>,
}

impl BoundReport {
    pub fn holds(&self) -> Option<bool> {
        self.lhs.map(|l| l <= self.rhs)
    }
}

pub fn bound_rhs(inputs: &BoundInputs) -> Result<BoundReport> {
    let BoundInputs {
        rademacher,
        c_l,
        n,
        delta,
        theta,
        tv,
        approx_gap,
    } = *inputs;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidArgument(format!("theta must lie in [0, 1], got {theta}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    for (name, v) in [("R_hat", rademacher), ("C_L", c_l), ("tv", tv), ("approximation gap", approx_gap)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let capacity_term = 4.0 * c_l * rademacher;
    let statistical_term = 2.0 * c_l * (4.0 / n as f64 * (2.0 / delta).ln()).sqrt();
    let gap_term = 4.0 * c_l * (1.0 - theta) * tv;
    Ok(BoundReport {
        c_l,
        rademacher,
        capacity_term,
        statistical_term,
        gap_term,
        approx_term: approx_gap,
        rhs: capacity_term + statistical_term + gap_term + approx_gap,
        lhs: None,
    })
}

/// A finite verification problem: real distribution, a raw generator, an
/// idealized M1/M2 applied to it exactly, and a finite student class.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSetup {
    pub real: DiscreteJoint,
    pub generator: DiscreteJoint,
    /// Exponent `beta` on the exact conditional ratio used by M1: 1 is exact
    /// rejection sampling, 0 accepts everything.
    pub m1_sharpness: f64,
    /// Teacher prediction at every x-point; filtering error is
    /// `|f_t(x) - y|`, thresholded per label value.
    pub teacher: Vec<f64>,
    pub rho: f64,
    pub n_real: usize,
    pub m_fake: usize,
    pub student: FiniteHypothesisClass,
    pub loss: Loss,
    pub c_l: f64,
    pub n_mc: usize,
}

fn label_values(j: &DiscreteJoint) -> Vec<f64> {
    let mut ys: Vec<f64> = j.points.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    ys
}

/// Conditional of `probs` given label `y` on `points`, or `None` if `y` has
/// no mass.
fn conditional(points: &[(usize, f64)], probs: &[f64], y: f64) -> Option<Vec<f64>> {
    let mass: f64 = points.iter().zip(probs).filter(|(p, _)| p.1 == y).map(|(_, w)| w).sum();
    (mass > 0.0).then(|| {
        points
            .iter()
            .zip(probs)
            .map(|(p, w)| if p.1 == y { w / mass } else { 0.0 })
            .collect()
    })
}

impl DiscreteSetup {
    pub fn validate(&self) -> Result<()> {
        self.real.validate()?;
        self.generator.validate()?;
        self.student.check_covers(&self.real)?;
        self.student.check_covers(&self.generator)?;
        if self.teacher.len() < self.student.domain_size() {
            return Err(Error::InvalidSpec("teacher must be defined on every x-point".into()));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidSpec(format!("rho must lie in (0, 1], got {}", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.m1_sharpness) {
            return Err(Error::InvalidSpec("m1 sharpness must lie in [0, 1]".into()));
        }
        if self.n_real == 0 || self.n_mc == 0 {
            return Err(Error::InvalidSpec("n_real and n_mc must be positive".into()));
        }
        for f in &self.student.predictors {
            check_bounded(f, &self.real.points, self.loss, self.c_l)?;
            check_bounded(f, &self.generator.points, self.loss, self.c_l)?;
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.n_real as f64 / (self.n_real + self.m_fake) as f64
    }

    /// Generator distribution after M1: within each label, candidates are
    /// accepted with probability `min(r^beta / M, 1)`, `r = p_r(x|y) /
    /// p_g(x|y)`, `M = max r^beta`; labels follow the real label marginal.
    pub fn after_m1(&self) -> Result<DiscreteJoint> {
        let (points, pr, pg) = aligned(&self.real, &self.generator)?;
        let mut probs = vec![0.0; points.len()];
        for y in label_values(&self.real) {
            let real_y: f64 = points.iter().zip(&pr).filter(|(p, _)| p.1 == y).map(|(_, w)| w).sum();
            let (Some(cr), Some(cg)) = (conditional(&points, &pr, y), conditional(&points, &pg, y)) else {
                return Err(Error::InvalidSpec(format!("generator never produces label {y}")));
            };
            let ratio: Vec<f64> = cr
                .iter()
                .zip(&cg)
                .map(|(a, b)| if *b > 0.0 { (a / b).powf(self.m1_sharpness) } else { 0.0 })
                .collect();
            let ceiling = ratio.iter().cloned().fold(0.0, f64::max);
            if ceiling == 0.0 {
                return Err(Error::InvalidSpec(format!("no overlap between real and generated label {y}")));
            }
            let accepted: Vec<f64> = cg.iter().zip(&ratio).map(|(g, r)| g * (r / ceiling).min(1.0)).collect();
            let mass: f64 = accepted.iter().sum();
            for (p, a) in probs.iter_mut().zip(&accepted) {
                *p += real_y * a / mass;
            }
        }
        DiscreteJoint::new(points, probs)
    }

    /// Applies the quantile filter to the M1 output per label value: keeps
    /// the points whose error is at most the smallest error reaching
    /// conditional mass `rho`, then renormalizes within the label.
    pub fn after_m2(&self) -> Result<DiscreteJoint> {
        let s = self.after_m1()?;
        let mut probs = vec![0.0; s.points.len()];
        for y in label_values(&s) {
            let label_mass: f64 = s.points.iter().zip(&s.probs).filter(|(p, _)| p.1 == y).map(|(_, w)| w).sum();
            if label_mass == 0.0 {
                continue;
            }
            let mut idx: Vec<usize> = (0..s.points.len()).filter(|&i| s.points[i].1 == y && s.probs[i] > 0.0).collect();
            let err = |i: usize| (self.teacher[s.points[i].0] - y).abs();
            idx.sort_by(|&a, &b| err(a).total_cmp(&err(b)));
            let mut acc = 0.0;
            let mut alpha = f64::INFINITY;
            for &i in &idx {
                acc += s.probs[i] / label_mass;
                if acc >= self.rho - 1e-12 {
                    alpha = err(i);
                    break;
                }
            }
            let kept: f64 = idx.iter().filter(|&&i| err(i) <= alpha).map(|&i| s.probs[i]).sum();
            for &i in idx.iter().filter(|&&i| err(i) <= alpha) {
                probs[i] = label_mass * s.probs[i] / kept;
            }
        }
        DiscreteJoint::new(s.points, probs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub n: usize,
    pub rademacher_se: f64,
    pub chosen: usize,
    pub report: BoundReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub delta: f64,
    pub theta: f64,
    pub tv: f64,
    pub optimal_risk: f64,
    pub best_in_class_risk: f64,
    pub trials: Vec<TrialRow>,
}

impl VerifyReport {
    pub fn holds_fraction(&self) -> f64 {
        let held = self.trials.iter().filter(|t| t.report.holds() == Some(true)).count();
        held as f64 / self.trials.len() as f64
    }
}

/// Runs `trials` independent draws of `D_aug ~ p_theta`, fits the student
/// by exact empirical-risk minimization, and compares the measured excess
/// risk against the bound.
pub fn verify_bound(setup: &DiscreteSetup, trials: usize, delta: f64, seed: u64) -> Result<VerifyReport> {
    setup.validate()?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let filtered = setup.after_m2()?;
    let tv = tv_distance(&setup.real, &filtered)?;
    let theta = setup.theta();
    let mix = DiscreteJoint::mixture(&setup.real, &filtered, theta)?;
    let (loss, c_l) = (setup.loss, setup.c_l);
    let v_star = optimal_risk(&setup.real, loss)?;
    let risks: Vec<f64> = setup
        .student
        .predictors
        .iter()
        .map(|f| exact_risk(f, &setup.real, loss, c_l))
        .collect::<Result<_>>()?;
    let v_best = risks.iter().cloned().fold(f64::INFINITY, f64::min);
    let n = setup.n_real + setup.m_fake;
    let draw_seed = rng::derive_seed(seed, "bound-draws");
    let rad_seed = rng::derive_seed(seed, "bound-rademacher");
    let mut rows = Vec::with_capacity(trials);
    for trial in 0..trials {
        let idx = mix.sample_indices(n, &mut rng::item_stream(draw_seed, trial as u64));
        let samples: Vec<(usize, f64)> = idx.iter().map(|&i| mix.points[i]).collect();
        let groups = group(&samples);
        let chosen = (0..setup.student.predictors.len())
            .map(|h| {
                let f = &setup.student.predictors[h];
                groups.iter().map(|&(x, y, k)| k as f64 * loss.eval(f[x], y)).sum::<f64>()
            })
            .enumerate()
            .fold((0, f64::INFINITY), |best, (h, r)| if r < best.1 { (h, r) } else { best })
            .0;
        let rad = empirical_rademacher(
            &setup.student,
            &samples,
            loss,
            c_l,
            setup.n_mc,
            rng::derive_index(rad_seed, trial as u64),
        )?;
        let mut report = bound_rhs(&BoundInputs {
            rademacher: rad.value,
            c_l,
            n,
            delta,
            theta,
            tv,
            approx_gap: (v_best - v_star).max(0.0),
        })?;
        report.lhs = Some(risks[chosen] - v_star);
        rows.push(TrialRow {
            trial,
            n,
            rademacher_se: rad.std_error,
            chosen,
            report,
        });
    }
    Ok(VerifyReport {
        delta,
        theta,
        tv,
        optimal_risk: v_star,
        best_in_class_risk: v_best,
        trials: rows,
    })
}

/// Joint over `x = 0..n`, labels `{0, 1}`, from an x-marginal and
/// `P(y = 1 | x)`.
pub fn binary_joint(marginal: &[f64], p_one: &[f64]) -> Result<DiscreteJoint> {
    if marginal.len() != p_one.len() {
        return Err(Error::DimensionMismatch {
            expected: marginal.len(),
            found: p_one.len(),
        });
    }
    if p_one.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidSpec("P(y = 1 | x) must lie in [0, 1]".into()));
    }
    let total: f64 = marginal.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidSpec("x-marginal has no mass".into()));
    }
    let mut points = Vec::new();
    let mut probs = Vec::new();
    for (x, (&m, &q)) in marginal.iter().zip(p_one).enumerate() {
        points.push((x, 0.0));
        probs.push(m / total * (1.0 - q));
        points.push((x, 1.0));
        probs.push(m / total * q);
    }
    DiscreteJoint::new(points, probs)
}

/// Reads a setup:
///
/// ```text
/// real.marginal = ...      # x-marginal, normalized on load
/// real.p_one = ...         # P(y = 1 | x)
/// generator.marginal = ...
/// generator.p_one = ...
/// m1.sharpness = 1
/// teacher = ...            # teacher prediction per x
/// rho = 0.9
/// n_real = 200
/// m_fake = 800
/// student.low = 0.2        # threshold rules with these two outputs
/// student.high = 0.8
/// loss = squared
/// c_l = 1
/// n_mc = 2000
/// ```
pub fn setup_from_doc(doc: &KvDoc) -> Result<DiscreteSetup> {
    let mut r = doc.reader();
    let real = binary_joint(&r.list::<f64>("real.marginal")?, &r.list::<f64>("real.p_one")?)?;
    let generator = binary_joint(&r.list::<f64>("generator.marginal")?, &r.list::<f64>("generator.p_one")?)?;
    let n_x = real.points.len() / 2;
    let setup = DiscreteSetup {
        m1_sharpness: r.get_or("m1.sharpness", 1.0)?,
        teacher: r.list("teacher")?,
        rho: r.get("rho")?,
        n_real: r.get("n_real")?,
        m_fake: r.get("m_fake")?,
        student: FiniteHypothesisClass::thresholds(n_x, r.get_or("student.low", 0.2)?, r.get_or("student.high", 0.8)?),
        loss: Loss::parse(r.opt_str("loss").unwrap_or("squared"))?,
        c_l: r.get_or("c_l", 1.0)?,
        n_mc: r.get_or("n_mc", 2000)?,
        real,
        generator,
    };
    r.finish()?;
    setup.validate()?;
    Ok(setup)
}

pub fn load_setup(path: &Path) -> Result<DiscreteSetup> {
    setup_from_doc(&KvDoc::load(path)?)
}

/// The reference problem: 8 x-points, labels `{0, 1}`, 16 threshold rules.
pub const STANDARD_SETUP: &str = "\
real.marginal = 1,1,1,1,1,1,1,1
real.p_one = 0.1,0.1,0.2,0.3,0.7,0.8,0.9,0.9
generator.marginal = 4,3,2,1,1,2,3,4
generator.p_one = 0.3,0.3,0.35,0.4,0.6,0.65,0.7,0.7
m1.sharpness = 0.5
teacher = 0.1,0.1,0.2,0.3,0.7,0.8,0.9,0.9
rho = 0.9
n_real = 200
m_fake = 800
student.low = 0.2
student.high = 0.8
loss = squared
c_l = 1
n_mc = 2000
";

pub fn standard_setup() -> DiscreteSetup {
    setup_from_doc(&KvDoc::parse(STANDARD_SETUP, "standard setup").expect("valid text")).expect("valid setup")
}
