//! Analytic gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Gradients, Graph, ParamStore, Var};
use crate::data::{PaddedSentence, Target, TaskKind};
use crate::error::Result;
use crate::model::{ModelInput, Sain};

pub const FD_STEP: f64 = 1e-5;
pub const DEFAULT_TOLERANCE: f64 = 1e-4;
/// Denominator floor: round-off in a central difference at `FD_STEP` is
/// around 1e-10 in absolute terms, so smaller gradients are compared
/// absolutely.
pub const REL_FLOOR: f64 = 1e-6;

/// `|a − n| / max(|a|, |n|, REL_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub name: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub tolerance: f64,
    pub groups: Vec<GroupReport>,
    pub max_rel_err: f64,
    pub passed: bool,
}

impl GradcheckReport {
    pub fn worst(&self) -> Option<&GroupReport> {
        self.groups.iter().max_by(|a, b| a.max_rel_err.total_cmp(&b.max_rel_err))
    }
}

/// Differentiates `loss` analytically and compares every parameter entry
/// against central differences.
pub fn gradcheck<F>(store: &ParamStore<f64>, loss: F, tolerance: f64) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let mut g = Graph::new();
    let l = loss(&mut g, store)?;
    let analytic = g.backward(l)?;
    compare_gradients(store, loss, &analytic, tolerance)
}

/// Compares supplied gradients with central differences of `loss`.
pub fn compare_gradients<F>(
    store: &ParamStore<f64>,
    loss: F,
    analytic: &Gradients<f64>,
    tolerance: f64,
) -> Result<GradcheckReport>
where
    F: Fn(&mut Graph<f64>, &ParamStore<f64>) -> Result<Var>,
{
    let eval = |s: &ParamStore<f64>| -> Result<f64> {
        let mut g = Graph::new();
        let l = loss(&mut g, s)?;
        Ok(g.value(l).data()[0])
    };
    let mut probe = store.clone();
    let mut groups = Vec::new();
    for (id, name, t) in store.iter() {
        let zeros = vec![0.0; t.len()];
        let grad = analytic.get(id).unwrap_or(&zeros);
        let mut report = GroupReport {
            name: name.to_string(),
            checked: t.len(),
            max_rel_err: 0.0,
            worst_index: 0,
            analytic: 0.0,
            numeric: 0.0,
        };
        for k in 0..t.len() {
            let orig = t.data()[k];
            probe.get_mut(id).data_mut()[k] = orig + FD_STEP;
            let up = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = orig - FD_STEP;
            let down = eval(&probe)?;
            probe.get_mut(id).data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let err = relative_error(grad[k], numeric);
            if err > report.max_rel_err || k == 0 {
                report.max_rel_err = err;
                report.worst_index = k;
                report.analytic = grad[k];
                report.numeric = numeric;
            }
        }
        groups.push(report);
    }
    let max_rel_err = groups.iter().map(|g| g.max_rel_err).fold(0.0, f64::max);
    Ok(GradcheckReport {
        tolerance,
        groups,
        max_rel_err,
        passed: max_rel_err < tolerance,
    })
}

/// A random input of fixed passage and question lengths for a model.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckInstance {
    pub passage: PaddedSentence,
    pub question: PaddedSentence,
    pub target: Target,
}

impl GradcheckInstance {
    /// Random token and label ids; the last `masked` passage positions are
    /// padding.
    pub fn random(
        model: &Sain<f64>,
        passage_len: usize,
        question_len: usize,
        masked: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = &model.config;
        let mut sentence = |n: usize, pad: usize| {
            let token_ids = (0..n).map(|_| rng.gen_range(0..cfg.num_tokens)).collect();
            let labels = (0..cfg.steps)
                .map(|_| (0..n).map(|_| rng.gen_range(0..cfg.num_labels)).collect())
                .collect();
            let mask = (0..n).map(|p| p + pad < n).collect();
            PaddedSentence { token_ids, labels, mask }
        };
        let passage = sentence(passage_len, masked);
        let question = sentence(question_len, 0);
        let valid = passage_len - masked;
        let target = match cfg.task {
            TaskKind::Mrc => {
                let start = rng.gen_range(0..valid);
                let end = rng.gen_range(start..valid);
                Target::Span {
                    start_word: start,
                    end_word: end,
                    start,
                    end,
                }
            }
            TaskKind::Nli => Target::Label(rng.gen_range(0..cfg.num_classes)),
        };
        GradcheckInstance {
            passage,
            question,
            target,
        }
    }

    pub fn loss(&self, model: &Sain<f64>, g: &mut Graph<f64>, params: &ParamStore<f64>) -> Result<Var> {
        let input = ModelInput {
            passage: &self.passage,
            question: &self.question,
            passage_vectors: None,
            question_vectors: None,
        };
        // The model reads its own store; swap in the probe values.
        let mut probe = model.clone();
        probe.params = params.clone();
        let fwd = probe.forward(g, &input)?;
        probe.loss(g, &fwd, &self.target)
    }
}

/// Finite-difference check of the whole network on `instance`.
pub fn gradcheck_model(model: &Sain<f64>, instance: &GradcheckInstance, tolerance: f64) -> Result<GradcheckReport> {
    gradcheck(&model.params, |g, p| instance.loss(model, g, p), tolerance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Linear;
    use crate::tensor::Tensor;

    #[test]
    fn affine_slice_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f64>::new();
        let lin = Linear::new(&mut store, "lin", 5, 3, true, &mut rng);
        let x = Tensor::new(vec![4, 5], (0..20).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let loss = |g: &mut Graph<f64>, s: &ParamStore<f64>| -> Result<Var> {
            let xv = g.constant(x.clone())?;
            let y = lin.forward(g, s, xv)?;
            Ok(g.sum(y)?)
        };
        let report = gradcheck(&store, loss, 1e-8).unwrap();
        assert!(report.passed, "{report:?}");
        assert!(report.max_rel_err < 1e-8);
    }

    #[test]
    fn corrupted_gradient_is_caught() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut store = ParamStore::<f64>::new();
        let lin = Linear::new(&mut store, "lin", 3, 2, true, &mut rng);
        let x = Tensor::new(vec![2, 3], vec![0.5, -1.0, 2.0, 1.5, 0.25, -0.75]).unwrap();
        let loss = |g: &mut Graph<f64>, s: &ParamStore<f64>| -> Result<Var> {
            let xv = g.constant(x.clone())?;
            let y = lin.forward(g, s, xv)?;
            let t = g.tanh(y)?;
            Ok(g.sum(t)?)
        };
        let mut g = Graph::new();
        let l = loss(&mut g, &store).unwrap();
        let good = g.backward(l).unwrap();
        let entries: Vec<_> = good
            .iter()
            .map(|(id, v)| {
                let mut v = v.to_vec();
                if id == lin.weight {
                    v[0] = -v[0];
                }
                (id, v)
            })
            .collect();
        let bad = Gradients::from_entries(entries);
        assert!(compare_gradients(&store, loss, &good, 1e-4).unwrap().passed);
        let report = compare_gradients(&store, loss, &bad, 1e-4).unwrap();
        assert!(!report.passed);
        assert_eq!(report.worst().unwrap().name, "lin.weight");
    }
}
