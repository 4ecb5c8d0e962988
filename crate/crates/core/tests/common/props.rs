//! Randomised trials shared by the cell tests and the acceptance run. Each
//! returns the largest deviation it observed.

use rand::Rng;

use sain::autodiff::{Graph, ParamStore, Var};
use sain::cell::{AblationMode, CellParams};
use sain::data::{PaddedSentence, TaskKind};
use sain::model::{Forward, ModelInput, Output, Sain};
use sain::Tensor;

use super::{config, mask, rng, sentence, tensor};

const TOKENS: usize = 20;
const LABELS: usize = 5;

fn random_model(r: &mut impl Rng, ablation: AblationMode, seed: u64) -> Sain<f64> {
    let steps = r.gen_range(1..=4);
    let d_s = 2 * r.gen_range(1..=3);
    let d_w = 2 * r.gen_range(1..=2);
    let mut m = Sain::new(config(TaskKind::Mrc, ablation, steps, d_s, d_w), seed).unwrap();
    scramble(&mut m.params, r, 1.0);
    m
}

/// Replaces every parameter, including the zero initial states, with
/// uniform values in `±scale`.
pub fn scramble(store: &mut ParamStore<f64>, r: &mut impl Rng, scale: f64) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let n = store.get(id).len();
        let v = (0..n).map(|_| r.gen_range(-scale..scale)).collect();
        store.set_values(id, v).unwrap();
    }
}

fn draw(r: &mut impl Rng, lens: std::ops::Range<usize>, steps: usize) -> PaddedSentence {
    let n = r.gen_range(lens);
    sentence(r, n, steps, TOKENS, LABELS)
}

fn forward(model: &Sain<f64>, g: &mut Graph<f64>, p: &PaddedSentence, q: &PaddedSentence) -> Forward<f64> {
    let input = ModelInput {
        passage: p,
        question: q,
        passage_vectors: None,
        question_vectors: None,
    };
    model.forward(g, &input).unwrap()
}

fn span_values(g: &Graph<f64>, fwd: &Forward<f64>) -> (Vec<f64>, Vec<f64>) {
    match fwd.output {
        Output::Span { start, end } => (g.value(start).data().to_vec(), g.value(end).data().to_vec()),
        Output::Class(_) => panic!("span model expected"),
    }
}

fn rows(g: &Graph<f64>, vars: &[Var]) -> Vec<f64> {
    vars.iter().flat_map(|&v| g.value(v).data().to_vec()).collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Sum-to-one error of every recorded distribution; infinite if a masked
/// position receives weight.
pub fn attention_trial(seed: u64) -> f64 {
    let mut r = rng(seed);
    let ablation = [AblationMode::Full, AblationMode::NoSi, AblationMode::NoIr][r.gen_range(0..3)];
    let model = random_model(&mut r, ablation, seed);
    let steps = model.config.steps;
    let mut p = draw(&mut r, 1..14, steps);
    let mut q = draw(&mut r, 1..8, steps);
    p.mask = mask(&mut r, p.len());
    q.mask = mask(&mut r, q.len());
    let mut g = Graph::new();
    let fwd = forward(&model, &mut g, &p, &q);
    let mut worst: f64 = 0.0;
    for state in &fwd.inference.states {
        for (dist, m) in [(&state.question_attention, &q.mask), (&state.passage_attention, &p.mask)] {
            if dist.iter().zip(m.iter()).any(|(&w, &valid)| !valid && w != 0.0) {
                return f64::INFINITY;
            }
            worst = worst.max((dist.iter().sum::<f64>() - 1.0).abs());
        }
    }
    worst
}

/// Distance by which any memory component leaves the interval spanned by
/// the previous memory and the candidate.
pub fn gate_trial(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = 2 * r.gen_range(1..=5);
    let mut store = ParamStore::<f64>::new();
    let cell = CellParams::new(&mut store, "cell", d, &mut r).unwrap();
    scramble(&mut store, &mut r, 3.0);
    let mut g = Graph::new();
    let m_prev = g.constant(tensor(&mut r, &[1, d], 5.0)).unwrap();
    let read = g.constant(tensor(&mut r, &[1, d], 5.0)).unwrap();
    let c = g.constant(tensor(&mut r, &[1, d], 5.0)).unwrap();
    let w = cell.write_step(&mut g, &store, m_prev, read, c).unwrap();
    let prev = g.value(m_prev).data();
    let cand = g.value(w.candidate).data();
    let mem = g.value(w.memory).data();
    (0..d)
        .map(|j| {
            let (lo, hi) = (prev[j].min(cand[j]), prev[j].max(cand[j]));
            (lo - mem[j]).max(mem[j] - hi).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// `|c_i − q|` when every valid question row equals `q`.
pub fn collapse_trial(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = 2 * r.gen_range(1..=5);
    let n = r.gen_range(1..10);
    let mut store = ParamStore::<f64>::new();
    let cell = CellParams::new(&mut store, "cell", d, &mut r).unwrap();
    scramble(&mut store, &mut r, 3.0);
    let q: Vec<f64> = (0..d).map(|_| r.gen_range(-2.0..2.0)).collect();
    let m = mask(&mut r, n);
    let mut data = Vec::with_capacity(n * d);
    for &valid in &m {
        if valid {
            data.extend_from_slice(&q);
        } else {
            data.extend((0..d).map(|_| r.gen_range(-9.0..9.0)));
        }
    }
    let mut g = Graph::new();
    let question = g.constant(Tensor::new(vec![n, d], data).unwrap()).unwrap();
    let c_prev = g.constant(tensor(&mut r, &[1, d], 2.0)).unwrap();
    let bq = g.constant(tensor(&mut r, &[1, d], 2.0)).unwrap();
    let (c, _) = cell.control_step(&mut g, &store, c_prev, bq, question, &m).unwrap();
    max_abs_diff(g.value(c).data(), &q)
}

/// Change of span logits at real positions, and of every control and
/// memory state, after appending masked positions.
pub fn padding_trial(seed: u64) -> f64 {
    let mut r = rng(seed);
    let model = random_model(&mut r, AblationMode::Full, seed);
    let steps = model.config.steps;
    let p = draw(&mut r, 1..12, steps);
    let q = draw(&mut r, 1..7, steps);
    let pp = { let k = r.gen_range(0..=8); super::pad(&p, k, &mut r, TOKENS, LABELS) };
    let qq = { let k = r.gen_range(0..=8); super::pad(&q, k, &mut r, TOKENS, LABELS) };
    let mut g1 = Graph::new();
    let a = forward(&model, &mut g1, &p, &q);
    let mut g2 = Graph::new();
    let b = forward(&model, &mut g2, &pp, &qq);
    let (s1, e1) = span_values(&g1, &a);
    let (s2, e2) = span_values(&g2, &b);
    let n = p.len();
    let states = |g: &Graph<f64>, f: &Forward<f64>| {
        let vars: Vec<Var> = f.inference.states.iter().flat_map(|s| [s.control, s.memory]).collect();
        rows(g, &vars)
    };
    max_abs_diff(&s1, &s2[..n])
        .max(max_abs_diff(&e1, &e2[..n]))
        .max(max_abs_diff(&states(&g1, &a), &states(&g2, &b)))
}

/// FULL against NO_IR on inputs whose M structures are identical.
pub fn ir_equivalence_trial(seed: u64) -> f64 {
    let mut r = rng(seed);
    let full = random_model(&mut r, AblationMode::Full, seed);
    let mut fused = full.clone();
    fused.config.ablation = AblationMode::NoIr;
    let steps = full.config.steps;
    let mut p = draw(&mut r, 1..12, steps);
    let mut q = draw(&mut r, 1..7, steps);
    for s in [&mut p, &mut q] {
        let first = s.labels[0].clone();
        for seq in &mut s.labels {
            seq.clone_from(&first);
        }
        s.mask = mask(&mut r, s.len());
    }
    let mut g1 = Graph::new();
    let a = forward(&full, &mut g1, &p, &q);
    let mut g2 = Graph::new();
    let b = forward(&fused, &mut g2, &p, &q);
    let (s1, e1) = span_values(&g1, &a);
    let (s2, e2) = span_values(&g2, &b);
    max_abs_diff(&s1, &s2)
        .max(max_abs_diff(&e1, &e2))
        .max(max_abs_diff(&rows(&g1, &a.inference.memories), &rows(&g2, &b.inference.memories)))
}

/// Distance of `c_i` and `r_i` outside the per-component range of their
/// valid input rows.
pub fn hull_trial(seed: u64) -> f64 {
    let mut r = rng(seed);
    let d = 2 * r.gen_range(1..=4);
    let (np, nq) = (r.gen_range(1..10), r.gen_range(1..8));
    let mut store = ParamStore::<f64>::new();
    let cell = CellParams::new(&mut store, "cell", d, &mut r).unwrap();
    scramble(&mut store, &mut r, 2.0);
    let pm = mask(&mut r, np);
    let qm = mask(&mut r, nq);
    let pt: Tensor<f64> = tensor(&mut r, &[np, d], 3.0);
    let qt: Tensor<f64> = tensor(&mut r, &[nq, d], 3.0);
    let mut g = Graph::new();
    let passage = g.constant(pt.clone()).unwrap();
    let question = g.constant(qt.clone()).unwrap();
    let c_prev = g.constant(tensor(&mut r, &[1, d], 2.0)).unwrap();
    let bq = g.constant(tensor(&mut r, &[1, d], 2.0)).unwrap();
    let m_prev = g.constant(tensor(&mut r, &[1, d], 2.0)).unwrap();
    let (c, _) = cell.control_step(&mut g, &store, c_prev, bq, question, &qm).unwrap();
    let (read, _) = cell.read_step(&mut g, &store, m_prev, c, passage, &pm).unwrap();
    let outside = |v: &[f64], t: &Tensor<f64>, m: &[bool]| -> f64 {
        (0..d)
            .map(|j| {
                let col: Vec<f64> = (0..m.len()).filter(|&i| m[i]).map(|i| t.data()[i * d + j]).collect();
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (lo - v[j]).max(v[j] - hi).max(0.0)
            })
            .fold(0.0, f64::max)
    };
    outside(g.value(c).data(), &qt, &qm).max(outside(g.value(read).data(), &pt, &pm))
}
