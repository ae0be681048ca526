use std::f64::consts::PI;

/// Linear-cosine decay: the product of a linear ramp-down and a cosine, plus
/// a floor `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCosine {
    pub num_periods: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LinearCosine {
    fn default() -> Self {
        LinearCosine {
            num_periods: 0.5,
            alpha: 0.0,
            beta: 0.001,
        }
    }
}

/// Learning rate at `step` out of `total_steps`; steps past the end are
/// clamped to the end.
pub fn lr_at(step: u64, total_steps: u64, base_lr: f64, p: &LinearCosine) -> f64 {
    let total = total_steps.max(1) as f64;
    let t = step.min(total_steps.max(1)) as f64;
    let linear = (total - t) / total;
    let cosine = 0.5 * (1.0 + (PI * 2.0 * p.num_periods * t / total).cos());
    base_lr * ((p.alpha + linear) * cosine + p.beta)
}
