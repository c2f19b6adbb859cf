//! Temperature-softened probabilities, KL divergence and the combined
//! distillation objective `L = alpha * L_student + L_KD`.
//!
//! No temperature-squared gradient rescaling is applied to the KD term;
//! the objective is used exactly as written.

use super::KdError;

/// Softmax of `logits / temperature`, computed with max subtraction.
pub fn softened_probs(logits: &[f64], temperature: f64) -> Result<Vec<f64>, KdError> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(KdError::InvalidTemperature(temperature));
    }
    if logits.is_empty() {
        return Err(KdError::EmptyLogits);
    }
    if let Some(&bad) = logits.iter().find(|l| !l.is_finite()) {
        return Err(KdError::NonFiniteLogit(bad));
    }
    let scaled: Vec<f64> = logits.iter().map(|z| z / temperature).collect();
    let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// `sum p_i * ln(p_i / q_i)` with the conventions `0 * ln 0 = 0` and `q`
/// clamped below at 1e-12.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64, KdError> {
    if p.len() != q.len() {
        return Err(KdError::LengthMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    let check_sum = |v: &[f64], name: &'static str| -> Result<(), KdError> {
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(KdError::NotADistribution { name, sum: s });
        }
        Ok(())
    };
    check_sum(p, "p")?;
    check_sum(q, "q")?;
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            kl += pi * (pi / qi.max(1e-12)).ln();
        }
    }
    Ok(kl)
}

/// `KL(p(z_t, T), p(z_s, T))` over whole logit vectors, teacher first.
pub fn kd_loss(
    teacher_logits: &[f64],
    student_logits: &[f64],
    temperature: f64,
) -> Result<f64, KdError> {
    if teacher_logits.len() != student_logits.len() {
        return Err(KdError::LengthMismatch {
            left: teacher_logits.len(),
            right: student_logits.len(),
        });
    }
    let p = softened_probs(teacher_logits, temperature)?;
    let q = softened_probs(student_logits, temperature)?;
    kl_divergence(&p, &q)
}

/// Per-bit variant used by the receiver trainer: each output bit is a
/// two-class distribution with logit pair `(z, 0)`, and the result is the
/// mean two-class KL over bits.
pub fn kd_loss_per_bit(
    teacher_logits: &[f64],
    student_logits: &[f64],
    temperature: f64,
) -> Result<f64, KdError> {
    if teacher_logits.len() != student_logits.len() {
        return Err(KdError::LengthMismatch {
            left: teacher_logits.len(),
            right: student_logits.len(),
        });
    }
    if teacher_logits.is_empty() {
        return Err(KdError::EmptyLogits);
    }
    let mut total = 0.0;
    for (&zt, &zs) in teacher_logits.iter().zip(student_logits) {
        let p = softened_probs(&[zt, 0.0], temperature)?;
        let q = softened_probs(&[zs, 0.0], temperature)?;
        total += kl_divergence(&p, &q)?;
    }
    Ok(total / teacher_logits.len() as f64)
}

/// The combined objective `alpha * L_student + L_KD`.
pub fn total_loss(student_task_loss: f64, kd: f64, alpha: f64) -> f64 {
    alpha * student_task_loss + kd
}

/// Numerically stable sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Stable binary cross-entropy with logits against a 0/1 target:
/// `max(z, 0) - z*y + ln(1 + exp(-|z|))`.
pub fn bce_with_logits(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (1.0 + (-logit.abs()).exp()).ln()
}
