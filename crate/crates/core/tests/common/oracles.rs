//! Independent reference computations.

use rand::Rng;

/// Every admissible pair, ordered by descending score, then start, then end.
pub fn enumerate_spans(s: &[f64], e: &[f64], mask: &[bool], max_len: usize) -> (usize, usize, f64) {
    let mut pairs = Vec::new();
    for i in 0..s.len() {
        for j in 0..s.len() {
            if mask[i] && mask[j] && i <= j && j - i < max_len {
                pairs.push((i, j, s[i] + e[j]));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    pairs[0]
}

fn log_sum_exp(v: &[f64], mask: &[bool]) -> f64 {
    let valid: Vec<f64> = v.iter().zip(mask).filter(|(_, &m)| m).map(|(&x, _)| x).collect();
    let hi = valid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi + valid.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

/// `½ CE_s + ½ CE_e` written out directly.
pub fn span_loss(s: &[f64], e: &[f64], ys: usize, ye: usize, mask: &[bool]) -> f64 {
    0.5 * (log_sum_exp(s, mask) - s[ys]) + 0.5 * (log_sum_exp(e, mask) - e[ye])
}

/// Logits drawn from a small integer grid half the time so that ties occur.
pub fn logits(r: &mut impl Rng, n: usize) -> Vec<f64> {
    if r.gen_bool(0.5) {
        (0..n).map(|_| f64::from(r.gen_range(-2i32..=2))).collect()
    } else {
        (0..n).map(|_| r.gen_range(-5.0..5.0)).collect()
    }
}
