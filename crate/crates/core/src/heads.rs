//! Span-extraction and classification outputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{masked_softmax, Graph, ParamId, ParamStore, Var};
use crate::error::{Result, SainError, TensorError};
use crate::tensor::Real;

pub const DEFAULT_MAX_SPAN: usize = 30;

/// Start/end scoring over `[m_1 ⊙ P_1, …, m_M ⊙ P_M]` with one `Md × 2` map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpanHead {
    pub weight: ParamId,
    pub steps: usize,
    pub d: usize,
}

impl SpanHead {
    pub fn new<T: Real, R: Rng>(store: &mut ParamStore<T>, steps: usize, d: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((steps * d) as f64).sqrt();
        let weight = store.insert_uniform("head.span", vec![steps * d, 2], bound, rng);
        SpanHead { weight, steps, d }
    }

    /// `(s_logits, e_logits)`, each `|P| × 1`.
    pub fn span_logits<T: Real>(
        &self,
        g: &mut Graph<T>,
        store: &ParamStore<T>,
        memories: &[Var],
        passage: &[Var],
    ) -> Result<(Var, Var), TensorError> {
        if memories.len() != self.steps || passage.len() != self.steps {
            return Err(TensorError::Dimension {
                op: "span_logits",
                detail: format!(
                    "{} memories and {} structures for M = {}",
                    memories.len(),
                    passage.len(),
                    self.steps
                ),
            });
        }
        let blocks = memories
            .iter()
            .zip(passage)
            .map(|(&m, &p)| g.mul_row(p, m))
            .collect::<Result<Vec<_>, _>>()?;
        let e = g.concat(&blocks, 1)?;
        let w = g.param(store, self.weight);
        let logits = g.matmul(e, w)?;
        let s = g.slice_cols(logits, 0, 1)?;
        let e = g.slice_cols(logits, 1, 1)?;
        Ok((s, e))
    }
}

fn one_hot<T: Real>(n: usize, k: usize) -> Vec<T> {
    let mut v = vec![T::zero(); n];
    v[k] = T::one();
    v
}

/// `½ CE(p_s, y_s) + ½ CE(p_e, y_e)` over valid positions.
pub fn span_loss<T: Real>(
    g: &mut Graph<T>,
    s_logits: Var,
    e_logits: Var,
    y_s: usize,
    y_e: usize,
    mask: &[bool],
) -> Result<Var, TensorError> {
    let n = mask.len();
    for y in [y_s, y_e] {
        if y >= n {
            return Err(TensorError::OutOfRange {
                op: "span_loss",
                index: y,
                extent: n,
            });
        }
    }
    let ls = g.cross_entropy_masked(s_logits, &one_hot(n, y_s), mask)?;
    let le = g.cross_entropy_masked(e_logits, &one_hot(n, y_e), mask)?;
    let total = g.add(ls, le)?;
    g.scale_const(total, T::from_f64_lossy(0.5))
}

/// Best `(start, end, score)` with `start ≤ end < start + max_len` over valid
/// positions; ties go to the smallest start, then the smallest end.
pub fn decode_span<T: Real>(s: &[T], e: &[T], mask: &[bool], max_len: usize) -> Result<(usize, usize, T)> {
    if max_len == 0 {
        return Err(SainError::Config("max span length must be at least 1".into()));
    }
    if s.len() != mask.len() || e.len() != mask.len() {
        return Err(TensorError::Dimension {
            op: "decode_span",
            detail: format!("{} / {} logits for {} positions", s.len(), e.len(), mask.len()),
        }
        .into());
    }
    let mut best: Option<(usize, usize, T)> = None;
    for i in (0..s.len()).filter(|&i| mask[i]) {
        let stop = (i + max_len).min(s.len());
        for j in (i..stop).filter(|&j| mask[j]) {
            let score = s[i] + e[j];
            if best.is_none_or(|(_, _, b)| score > b) {
                best = Some((i, j, score));
            }
        }
    }
    best.ok_or_else(|| TensorError::DegenerateMask { op: "decode_span" }.into())
}

/// `p = m_M W`, a `1 × N` logit row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassHead {
    pub weight: ParamId,
    pub classes: usize,
}

impl ClassHead {
    pub fn new<T: Real, R: Rng>(store: &mut ParamStore<T>, d: usize, classes: usize, rng: &mut R) -> Result<Self> {
        if classes < 2 {
            return Err(SainError::Config(format!("classification needs N ≥ 2, got {classes}")));
        }
        let bound = 1.0 / (d as f64).sqrt();
        let weight = store.insert_uniform("head.class", vec![d, classes], bound, rng);
        Ok(ClassHead { weight, classes })
    }

    pub fn nli_logits<T: Real>(&self, g: &mut Graph<T>, store: &ParamStore<T>, m_last: Var) -> Result<Var, TensorError> {
        let w = g.param(store, self.weight);
        g.matmul(m_last, w)
    }
}

pub fn nli_loss<T: Real>(g: &mut Graph<T>, logits: Var, label: usize) -> Result<Var, TensorError> {
    let n = g.value(logits).len();
    if label >= n {
        return Err(TensorError::OutOfRange {
            op: "nli_loss",
            index: label,
            extent: n,
        });
    }
    g.cross_entropy(logits, &one_hot(n, label))
}

/// Decoded MRC output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPrediction {
    pub p_start: Vec<f64>,
    pub p_end: Vec<f64>,
    /// Subword span.
    pub start: usize,
    pub end: usize,
    /// Word span.
    pub start_word: usize,
    pub end_word: usize,
    pub text: String,
    pub score: f64,
}

/// Decoded NLI output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliPrediction {
    pub p: Vec<f64>,
    pub label: usize,
}

impl NliPrediction {
    pub fn from_logits<T: Real>(logits: &[T]) -> Result<Self> {
        let p = masked_softmax(logits, &vec![true; logits.len()])?;
        let p: Vec<f64> = p.iter().map(|v| v.to_f64().unwrap_or(0.0)).collect();
        let label = argmax(logits);
        Ok(NliPrediction { p, label })
    }
}

/// Index of the first maximum.
pub fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// One line of a prediction dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictionRecord {
    Span {
        id: String,
        text: String,
        start: usize,
        end: usize,
        score: f64,
    },
    Label {
        id: String,
        label: String,
        distribution: Vec<f64>,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hand_worked_span_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut store = ParamStore::<f64>::new();
        let head = SpanHead::new(&mut store, 1, 2, &mut rng);
        store.set_values(head.weight, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let mut g = Graph::new();
        let m = g.constant(Tensor::row(vec![1.0, 1.0])).unwrap();
        let p = g.constant(Tensor::new(vec![2, 2], vec![1.0, 0.0, 0.0, 2.0]).unwrap()).unwrap();
        let (s, e) = head.span_logits(&mut g, &store, &[m], &[p]).unwrap();
        assert_eq!(g.value(s).data(), &[1.0, 2.0]);
        assert_eq!(g.value(e).data(), &[0.0, 0.0]);
    }

    #[test]
    fn zero_memory_gives_zero_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::<f64>::new();
        let head = SpanHead::new(&mut store, 2, 3, &mut rng);
        let mut g = Graph::new();
        let z = g.constant(Tensor::zeros(vec![1, 3])).unwrap();
        let p = g.constant(Tensor::new(vec![4, 3], (0..12).map(f64::from).collect()).unwrap()).unwrap();
        let (s, e) = head.span_logits(&mut g, &store, &[z, z], &[p, p]).unwrap();
        assert_eq!(g.shape(s), &[4, 1]);
        assert!(g.value(s).data().iter().chain(g.value(e).data()).all(|&x| x == 0.0));
        assert!(head.span_logits(&mut g, &store, &[z], &[p, p]).is_err());
    }

    #[test]
    fn uniform_span_loss_is_ln4() {
        let mut g = Graph::<f64>::new();
        let s = g.constant(Tensor::new(vec![5, 1], vec![0.3; 5]).unwrap()).unwrap();
        let mask = [true, true, true, true, false];
        let l = span_loss(&mut g, s, s, 1, 3, &mask).unwrap();
        assert!((g.value(l).data()[0] - 4f64.ln()).abs() < 1e-12);
        assert!(span_loss(&mut g, s, s, 4, 4, &mask).is_err());
    }

    #[test]
    fn decode_examples() {
        let mask = [true, true];
        assert_eq!(decode_span(&[3.0, 0.0], &[0.0, 3.0], &mask, 30).unwrap(), (0, 1, 6.0));
        assert_eq!(decode_span(&[1.0; 4], &[1.0; 4], &[true; 4], 30).unwrap(), (0, 0, 2.0));
        // Length cap and masking.
        assert_eq!(decode_span(&[5.0, 0.0, 0.0], &[0.0, 0.0, 5.0], &[true; 3], 2).unwrap().2, 5.0);
        assert_eq!(decode_span(&[0.0, 9.0], &[0.0, 9.0], &[true, false], 30).unwrap(), (0, 0, 0.0));
        assert!(decode_span::<f64>(&[0.0], &[0.0], &[false], 30).is_err());
        assert!(decode_span(&[0.0], &[0.0], &[true], 0).is_err());
    }

    #[test]
    fn nli_uniform_and_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f64>::new();
        let head = ClassHead::new(&mut store, 4, 3, &mut rng).unwrap();
        store.set_values(head.weight, vec![0.0; 12]).unwrap();
        let mut g = Graph::new();
        let m = g.constant(Tensor::row(vec![0.3, -1.0, 2.0, 0.5])).unwrap();
        let logits = head.nli_logits(&mut g, &store, m).unwrap();
        let pred = NliPrediction::from_logits(g.value(logits).data()).unwrap();
        assert!(pred.p.iter().all(|&p| (p - 1.0 / 3.0).abs() < 1e-12));
        let l = nli_loss(&mut g, logits, 2).unwrap();
        assert!((g.value(l).data()[0] - 3f64.ln()).abs() < 1e-12);
        assert!(nli_loss(&mut g, logits, 3).is_err());
        assert!(ClassHead::new(&mut store, 4, 1, &mut rng).is_err());
    }
}
