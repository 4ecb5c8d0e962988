mod common;

use proptest::prelude::*;
use rand::Rng;

use sain::autodiff::Graph;
use sain::heads::{argmax, decode_span, span_loss, NliPrediction};
use sain::Tensor;

fn column(v: &[f64]) -> Tensor<f64> {
    Tensor::new(vec![v.len(), 1], v.to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn decode_matches_exhaustive_enumeration(seed in 0u64..1_000_000, n in 1usize..=20, max_len in 1usize..=30) {
        let mut r = common::rng(seed);
        let s = common::oracles::logits(&mut r, n);
        let e = common::oracles::logits(&mut r, n);
        let mask = common::mask(&mut r, n);
        let (i, j, score) = decode_span(&s, &e, &mask, max_len).unwrap();
        prop_assert!(i <= j && j - i < max_len);
        prop_assert_eq!((i, j, score), common::oracles::enumerate_spans(&s, &e, &mask, max_len));
    }

    #[test]
    fn span_loss_is_the_two_term_average(seed in 0u64..1_000_000, n in 1usize..=20) {
        let mut r = common::rng(seed);
        let s: Vec<f64> = (0..n).map(|_| r.gen_range(-6.0..6.0)).collect();
        let e: Vec<f64> = (0..n).map(|_| r.gen_range(-6.0..6.0)).collect();
        let mask = common::mask(&mut r, n);
        let valid: Vec<usize> = (0..n).filter(|&k| mask[k]).collect();
        let ys = valid[r.gen_range(0..valid.len())];
        let ye = valid[r.gen_range(0..valid.len())];
        let mut g = Graph::new();
        let sv = g.constant(column(&s)).unwrap();
        let ev = g.constant(column(&e)).unwrap();
        let loss = span_loss(&mut g, sv, ev, ys, ye, &mask).unwrap();
        let got = g.value(loss).data()[0];
        prop_assert!((got - common::oracles::span_loss(&s, &e, ys, ye, &mask)).abs() < 1e-6);
    }

    #[test]
    fn class_argmax_ignores_a_common_shift(logits in proptest::collection::vec(-10.0f64..10.0, 2..6), shift in -100.0f64..100.0) {
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let a = NliPrediction::from_logits(&logits).unwrap();
        let b = NliPrediction::from_logits(&shifted).unwrap();
        prop_assert_eq!(a.label, b.label);
        prop_assert_eq!(a.label, argmax(&logits));
    }
}
