//! Linear warmup followed by linear decay.

/// Learning rate at `step` of `total`: a ramp from 0 to `base_lr` over the
/// first `warmup_ratio · total` steps, then a straight line down to 0.
pub fn lr_schedule(step: usize, total: usize, base_lr: f64, warmup_ratio: f64) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let step = step.min(total) as f64;
    let total = total as f64;
    let warmup = warmup_ratio * total;
    if step < warmup {
        base_lr * step / warmup
    } else if warmup >= total {
        base_lr
    } else {
        base_lr * (total - step) / (total - warmup)
    }
}
