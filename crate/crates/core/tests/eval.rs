mod common;

use sain::cell::AblationMode;
use sain::data::{gen_synthetic_chain, Answer, RawExample, SynthConfig, TaskKind, Vocabs};
use sain::eval::{
    evaluate, exact_match, export_trace, f1_token, sweep_noise, sweep_steps, EvalEcho, EvalRecord, EvalReport,
    Experiment,
};
use sain::model::Sain;
use sain::train::TrainConfig;

#[test]
fn metric_fixture_matches_hand_values() {
    for (pred, gold, em, f1) in common::fixtures::METRIC_CASES {
        assert_eq!(exact_match(pred, gold), em, "{pred:?} vs {gold:?}");
        assert!((f1_token(pred, gold) - f1).abs() < 1e-12, "{pred:?} vs {gold:?}");
    }
}

fn synthetic(count: usize, seed: u64) -> Vec<RawExample> {
    gen_synthetic_chain(&SynthConfig {
        chain_len: 1,
        count,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn report_aggregates_are_recomputable_and_ordered() {
    let raw = synthetic(10, 2);
    let v = Vocabs::build(&raw);
    let ds = v.tag_all(&raw, 2).unwrap();
    let mut mc = common::config(TaskKind::Mrc, AblationMode::Full, 2, 4, 4);
    mc.num_tokens = v.tokens.len();
    mc.num_labels = v.labels.len();
    let model = Sain::<f32>::new(mc, 1).unwrap();
    let a = evaluate(&model, &ds, TaskKind::Mrc, None).unwrap();
    let b = evaluate(&model, &ds, TaskKind::Mrc, None).unwrap();
    assert_eq!(a, b);
    let em = a.exact_match.unwrap();
    let f1 = a.f1.unwrap();
    assert!((0.0..=f1).contains(&em) && f1 <= 100.0);
    let mean_em = 100.0 * a.records.iter().map(|r| r.em).sum::<f64>() / a.records.len() as f64;
    assert!((mean_em - em).abs() < 1e-9);
    let ids: Vec<_> = a.records.iter().map(|r| r.id.clone()).collect();
    assert_eq!(ids, ds.iter().map(|e| e.id.clone()).collect::<Vec<_>>());
    assert!(evaluate(&model, &ds, TaskKind::Nli, None).is_err());
}

#[test]
fn gold_predictions_score_one_hundred() {
    let records = (0..4)
        .map(|k| EvalRecord {
            id: k.to_string(),
            prediction: "special training".into(),
            gold: "Special training.".into(),
            correct: true,
            em: exact_match("special training", "Special training."),
            f1: f1_token("special training", "Special training."),
        })
        .collect();
    let echo = EvalEcho {
        task: TaskKind::Mrc,
        steps: 3,
        ablation: AblationMode::Full,
        noise: 0.0,
    };
    let report = EvalReport::from_records(echo, records);
    assert_eq!(report.exact_match, Some(100.0));
    assert_eq!(report.f1, Some(100.0));
}

#[test]
fn constant_classifier_is_at_chance_on_a_balanced_set() {
    let raw: Vec<RawExample> = synthetic(30, 4)
        .into_iter()
        .enumerate()
        .map(|(k, mut ex)| {
            ex.answer = Answer::Label { label: k % 3 };
            ex
        })
        .collect();
    let v = Vocabs::build(&raw);
    let ds = v.tag_all(&raw, 2).unwrap();
    let mut mc = common::config(TaskKind::Nli, AblationMode::Full, 2, 4, 4);
    mc.num_tokens = v.tokens.len();
    mc.num_labels = v.labels.len();
    let mut model = Sain::<f64>::new(mc, 0).unwrap();
    let head = model.params.id("head.class").unwrap();
    let zeros = vec![0.0; model.params.get(head).len()];
    model.params.set_values(head, zeros).unwrap();
    let report = evaluate(&model, &ds, TaskKind::Nli, None).unwrap();
    assert!((report.accuracy.unwrap() - 100.0 / 3.0).abs() < 1e-9);
}

#[test]
fn sweeps_have_one_row_per_cell_and_zero_noise_is_the_baseline() {
    let train = synthetic(8, 5);
    let eval = synthetic(4, 6);
    let exp = Experiment {
        model: common::config(TaskKind::Mrc, AblationMode::Full, 2, 4, 4),
        train: TrainConfig {
            max_steps: 3,
            batch_size: 4,
            ..TrainConfig::default()
        },
        train_set: &train,
        eval_set: &eval,
        seeds: vec![1],
    };
    let steps = sweep_steps(&exp, &[1, 2]).unwrap();
    assert_eq!(steps.rows.len(), 4);
    let single = sweep_steps(&exp, &[1]).unwrap();
    assert_eq!(single.rows.len(), 2);
    assert!(sweep_steps(&exp, &[]).is_err());
    let noise = sweep_noise(&exp, &[0.0, 0.2, 0.4]).unwrap();
    assert_eq!(noise.rows.len(), 3);
    let baseline = exp.run_cell(2, AblationMode::Full, 0.0, 1).unwrap();
    assert_eq!(noise.rows[0].metrics[0], baseline.report.headline());
    assert!(sweep_noise(&exp, &[1.5]).is_err());
}

#[test]
fn trace_has_one_normalised_record_per_step() {
    let raw = synthetic(2, 7);
    let v = Vocabs::build(&raw);
    let ds = v.tag_all(&raw, 3).unwrap();
    let mut mc = common::config(TaskKind::Mrc, AblationMode::Full, 3, 4, 4);
    mc.num_tokens = v.tokens.len();
    mc.num_labels = v.labels.len();
    let model = Sain::<f32>::new(mc, 2).unwrap();
    let trace = export_trace(&model, &ds[0], None).unwrap();
    assert_eq!(trace.records.len(), 3);
    assert_eq!(trace.passage_tokens, ds[0].passage.subwords);
    assert_eq!(trace.question_tokens, ds[0].question.subwords);
    for r in &trace.records {
        assert!((r.passage_attention.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!((r.question_attention.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
    let text = sain::eval::render_heatmap(&trace);
    assert!(text.contains("step 3"));
}
