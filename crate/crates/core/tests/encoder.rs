mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use sain::autodiff::{Graph, ParamStore, Var};
use sain::encoder::{ContextMode, Encoder, EncoderConfig};
use sain::train::gradcheck::gradcheck;

const TOKENS: usize = 12;
const LABELS: usize = 6;

fn encoder(store: &mut ParamStore<f64>, d_s: usize, d_w: usize, seed: u64) -> Encoder {
    let config = EncoderConfig {
        d_s,
        d_w,
        mode: ContextMode::Toy,
    };
    Encoder::new(store, config, TOKENS, LABELS, true, &mut common::rng(seed)).unwrap()
}

fn values(g: &Graph<f64>, vars: &[Var]) -> Vec<Vec<f64>> {
    vars.iter().map(|&v| g.value(v).data().to_vec()).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn label_permutation_leaves_joint_rows_unchanged(seed in 0u64..10_000, len in 1usize..9, m in 1usize..5) {
        let mut store = ParamStore::new();
        let enc = encoder(&mut store, 4, 3, seed);
        let mut rng = common::rng(seed);
        let sentence = common::sentence(&mut rng, len, m, TOKENS, LABELS);
        let mut perm: Vec<usize> = (0..LABELS).collect();
        perm.shuffle(&mut rng);

        let mut permuted_store = store.clone();
        let table_id = enc.label_embedding.unwrap();
        let table = store.get(table_id).data().to_vec();
        let d_w = 3;
        let mut moved = vec![0.0; table.len()];
        for (old, &new) in perm.iter().enumerate() {
            moved[new * d_w..(new + 1) * d_w].copy_from_slice(&table[old * d_w..(old + 1) * d_w]);
        }
        permuted_store.set_values(table_id, moved).unwrap();
        let mut relabelled = sentence.clone();
        for seq in &mut relabelled.labels {
            for l in seq.iter_mut() {
                *l = perm[*l];
            }
        }

        let mut g1 = Graph::new();
        let a = enc.encode(&mut g1, &store, &sentence, None).unwrap();
        let mut g2 = Graph::new();
        let b = enc.encode(&mut g2, &permuted_store, &relabelled, None).unwrap();
        prop_assert_eq!(values(&g1, &a.structures), values(&g2, &b.structures));
    }

    #[test]
    fn context_columns_are_shared_across_structures(seed in 0u64..10_000, len in 1usize..9, m in 1usize..6) {
        let mut store = ParamStore::new();
        let enc = encoder(&mut store, 6, 2, seed);
        let mut rng = common::rng(seed);
        let mut sentence = common::sentence(&mut rng, len, m, TOKENS, LABELS);
        sentence.mask = common::mask(&mut rng, len);
        let mut g = Graph::new();
        let joint = enc.encode(&mut g, &store, &sentence, None).unwrap();
        let width = 8;
        let ctx = |v: Var| -> Vec<f64> {
            g.value(v)
                .data()
                .chunks(width)
                .flat_map(|row| row[..6].to_vec())
                .collect()
        };
        let first = ctx(joint.structures[0]);
        for &s in &joint.structures[1..] {
            prop_assert_eq!(ctx(s), first.clone());
        }
    }
}

#[test]
fn toy_encoder_passes_gradcheck() {
    for seed in 0..5 {
        let mut store = ParamStore::new();
        let enc = encoder(&mut store, 4, 2, seed);
        let mut rng = common::rng(seed);
        let mut sentence = common::sentence(&mut rng, 7, 2, TOKENS, LABELS);
        sentence.mask = vec![true, true, true, true, true, false, false];
        let weights: Vec<sain::Tensor<f64>> = (0..2).map(|_| common::tensor(&mut rng, &[7, 6], 1.0)).collect();
        let loss = |g: &mut Graph<f64>, s: &ParamStore<f64>| -> sain::Result<Var> {
            let joint = enc.encode(g, s, &sentence, None)?;
            let mut terms = Vec::new();
            for (x, w) in joint.structures.iter().zip(&weights) {
                let w = g.constant(w.clone())?;
                let t = g.tanh(*x)?;
                let p = g.hadamard(t, w)?;
                terms.push(g.sum(p)?);
            }
            Ok(g.add_n(&terms)?)
        };
        let report = gradcheck(&store, loss, 1e-4).unwrap();
        assert!(report.passed, "seed {seed}: {:?}", report.worst());
    }
}
