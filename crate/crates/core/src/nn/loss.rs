use crate::error::{Error, Result};

/// Probabilities are clamped to this floor before taking logs, so a
/// classifier can never be charged an unbounded loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Temperature-scaled softmax output. Entries are at least [`PROB_FLOOR`].
#[derive(Debug, Clone, PartialEq)]
pub struct SoftLabel {
    pub probs: Vec<f64>,
}

impl SoftLabel {
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Softmax of `logits / t`, with max subtraction.
pub(crate) fn softmax_into(logits: &[f64], t: f64, out: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = ((l - m) / t).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

pub fn soft_labels(logits: &[f64], t: f64) -> Result<SoftLabel> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {t}")));
    }
    if logits.iter().any(|l| !l.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    let mut probs = vec![0.0; logits.len()];
    softmax_into(logits, t, &mut probs);
    for p in &mut probs {
        *p = p.max(PROB_FLOOR);
    }
    Ok(SoftLabel { probs })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// Hard-label cross entropy at temperature 1.
    PlainCe,
    /// Squared error on a scalar output.
    PlainSe,
    /// `(1 - lambda) * CE(y, p_s) + lambda * CE(p_t, p_s^T)`. The hard-label
    /// term uses temperature 1, the teacher term uses `temperature` on both
    /// teacher and student.
    Blkd { lambda: f64, temperature: f64 },
}

impl LossKind {
    pub fn validate(&self) -> Result<()> {
        if let LossKind::Blkd { lambda, temperature } = *self {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(Error::InvalidArgument(format!("lambda_kd {lambda} outside [0,1]")));
            }
            if !(temperature > 0.0) {
                return Err(Error::InvalidArgument(format!("temperature {temperature} must be positive")));
            }
        }
        Ok(())
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, LossKind::PlainSe)
    }

    pub fn needs_teacher(&self) -> bool {
        matches!(self, LossKind::Blkd { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Class(usize),
    Scalar(f64),
}

/// `-sum_c t_c log max(p_c, floor)` where `p = softmax(logits / temp)`, and
/// its gradient w.r.t. the logits added into `grad` with weight `w`.
///
/// `target` is either a one-hot class or a full distribution.
fn soft_ce(logits: &[f64], temp: f64, target: CeTarget<'_>, w: f64, probs: &mut [f64], grad: Option<&mut [f64]>) -> f64 {
    softmax_into(logits, temp, probs);
    let weight_of = |c: usize| match target {
        CeTarget::Hard(k) => {
            if c == k {
                1.0
            } else {
                0.0
            }
        }
        CeTarget::Soft(t) => t[c],
    };
    let mut loss = 0.0;
    let mut live = 0.0;
    for (c, &p) in probs.iter().enumerate() {
        let t = weight_of(c);
        if t == 0.0 {
            continue;
        }
        if p > PROB_FLOOR {
            loss -= t * p.ln();
            live += t;
        } else {
            loss -= t * PROB_FLOOR.ln();
        }
    }
    if let Some(grad) = grad {
        for (c, (g, &p)) in grad.iter_mut().zip(probs.iter()).enumerate() {
            let own = if p > PROB_FLOOR { weight_of(c) } else { 0.0 };
            *g += w * (p * live - own) / temp;
        }
    }
    loss
}

#[derive(Clone, Copy)]
enum CeTarget<'a> {
    Hard(usize),
    Soft(&'a [f64]),
}

/// Per-sample loss; if `grad` is given, `dL/dprediction` is added into it.
pub(crate) fn loss_and_grad(
    kind: &LossKind,
    prediction: &[f64],
    target: Target,
    teacher_soft: Option<&[f64]>,
    scratch: &mut [f64],
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    match (*kind, target) {
        (LossKind::PlainSe, Target::Scalar(y)) => {
            let r = prediction[0] - y;
            if let Some(g) = grad {
                g[0] += 2.0 * r;
            }
            Ok(r * r)
        }
        (LossKind::PlainCe, Target::Class(c)) => Ok(soft_ce(prediction, 1.0, CeTarget::Hard(c), 1.0, scratch, grad)),
        (LossKind::Blkd { lambda, temperature }, Target::Class(c)) => {
            let teacher = teacher_soft.ok_or_else(|| Error::InvalidArgument("BLKD loss needs teacher soft labels".into()))?;
            let mut total = 0.0;
            if lambda < 1.0 {
                let ls = soft_ce(prediction, 1.0, CeTarget::Hard(c), 1.0 - lambda, scratch, grad.as_deref_mut());
                total += (1.0 - lambda) * ls;
            }
            if lambda > 0.0 {
                let lkd = soft_ce(prediction, temperature, CeTarget::Soft(teacher), lambda, scratch, grad);
                total += lambda * lkd;
            }
            Ok(total)
        }
        (k, t) => Err(Error::TaskMismatch(format!("loss {k:?} with target {t:?}"))),
    }
}

/// Loss of a single prediction.
///
/// * `PlainCe`: `-log p_y` with `p = softmax(prediction)`
/// * `PlainSe`: `(prediction - y)^2`
/// * `Blkd`: `(1 - lambda) * L_s + lambda * L_KD`, with
///   `L_KD = -sum_c p^t_c log p^s_c` at the configured temperature
pub fn loss_value(kind: &LossKind, prediction: &[f64], target: Target, teacher_soft: Option<&SoftLabel>) -> Result<f64> {
    kind.validate()?;
    let mut scratch = vec![0.0; prediction.len()];
    if let (Target::Class(c), true) = (target, kind.is_classification()) {
        if c >= prediction.len() {
            return Err(Error::LabelOutOfRange(format!("class {c} for {} logits", prediction.len())));
        }
    }
    loss_and_grad(kind, prediction, target, teacher_soft.map(|s| s.probs.as_slice()), &mut scratch, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn equal_logits_give_uniform() {
        for t in [0.1, 1.0, 7.0] {
            let s = soft_labels(&[2.5, 2.5, 2.5], t).unwrap();
            assert!(s.probs.iter().all(|p| close(*p, 1.0 / 3.0, 1e-15)));
        }
    }

    #[test]
    fn huge_temperature_is_uniform() {
        let s = soft_labels(&[1.0, 0.0], 1e6).unwrap();
        assert!(close(s.probs[0], 0.5, 1e-5) && close(s.probs[1], 0.5, 1e-5));
    }

    #[test]
    fn softmax_matches_scalar_oracle() {
        let s = soft_labels(&[2.0, 0.0, 0.0], 1.0).unwrap();
        let z = 2f64.exp() + 2.0;
        let expect = [2f64.exp() / z, 1.0 / z, 1.0 / z];
        for (p, e) in s.probs.iter().zip(expect) {
            assert!(close(*p, e, 1e-15));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(soft_labels(&[f64::NAN, 0.0], 1.0).is_err());
        assert!(soft_labels(&[1.0, 0.0], 0.0).is_err());
    }

    #[test]
    fn confident_correct_prediction_has_no_loss() {
        // probability 1 up to rounding: exp(-800) underflows to zero
        let l = loss_value(&LossKind::PlainCe, &[800.0, 0.0, 0.0], Target::Class(0), None).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn floor_bounds_the_loss() {
        let l = loss_value(&LossKind::PlainCe, &[0.0, 1e6], Target::Class(0), None).unwrap();
        assert!(close(l, -PROB_FLOOR.ln(), 1e-9));
    }

    #[test]
    fn kd_term_hand_value() {
        // p_s = [0.5, 0.5] from equal logits, p_t = [0.7, 0.3]
        let teacher = SoftLabel { probs: vec![0.7, 0.3] };
        let l = loss_value(
            &LossKind::Blkd {
                lambda: 1.0,
                temperature: 5.0,
            },
            &[0.3, 0.3],
            Target::Class(1),
            Some(&teacher),
        )
        .unwrap();
        assert!(close(l, 2f64.ln(), 1e-15));
    }

    #[test]
    fn blkd_endpoints_reduce_exactly() {
        let teacher = SoftLabel { probs: vec![0.2, 0.5, 0.3] };
        let logits = [0.4, -1.2, 2.0];
        let ce = loss_value(&LossKind::PlainCe, &logits, Target::Class(1), None).unwrap();
        let b0 = loss_value(
            &LossKind::Blkd {
                lambda: 0.0,
                temperature: 5.0,
            },
            &logits,
            Target::Class(1),
            Some(&teacher),
        )
        .unwrap();
        assert_eq!(ce, b0);
        let b1 = loss_value(
            &LossKind::Blkd {
                lambda: 1.0,
                temperature: 5.0,
            },
            &logits,
            Target::Class(1),
            Some(&teacher),
        )
        .unwrap();
        let p = soft_labels(&logits, 5.0).unwrap();
        let kd: f64 = teacher.probs.iter().zip(&p.probs).map(|(t, s)| -t * s.ln()).sum();
        assert_eq!(b1, kd);
    }

    #[test]
    fn blkd_without_teacher_fails() {
        let k = LossKind::Blkd {
            lambda: 0.5,
            temperature: 2.0,
        };
        assert!(loss_value(&k, &[0.0, 1.0], Target::Class(0), None).is_err());
        assert!(LossKind::Blkd {
            lambda: 1.5,
            temperature: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn squared_error() {
        assert_eq!(loss_value(&LossKind::PlainSe, &[0.7], Target::Scalar(0.4), None).unwrap(), (0.7f64 - 0.4).powi(2));
        assert!(loss_value(&LossKind::PlainSe, &[0.7], Target::Class(0), None).is_err());
    }
}
