mod common;

use common::props;
use sain::cell::AblationMode;
use sain::data::TaskKind;
use sain::model::Sain;
use sain::train::gradcheck::DEFAULT_TOLERANCE;
use sain::train::{gradcheck_model, GradcheckInstance};

const TRIALS: u64 = 200;

fn worst(trial: fn(u64) -> f64) -> f64 {
    (0..TRIALS).map(trial).fold(0.0, f64::max)
}

#[test]
fn attention_distributions_sum_to_one_with_zero_padding() {
    assert!(worst(props::attention_trial) < 1e-9);
}

#[test]
fn write_gate_stays_between_old_and_candidate_memory() {
    assert!(worst(props::gate_trial) < 1e-12);
}

#[test]
fn constant_question_collapses_the_control_state() {
    assert!(worst(props::collapse_trial) < 1e-9);
}

#[test]
fn masked_padding_does_not_move_states_or_logits() {
    assert!(worst(props::padding_trial) < 1e-9);
}

#[test]
fn identical_structures_make_full_and_fused_agree() {
    assert!(worst(props::ir_equivalence_trial) < 1e-9);
}

#[test]
fn control_and_read_vectors_stay_in_the_row_hull() {
    assert!(worst(props::hull_trial) < 1e-9);
}

#[test]
fn every_mode_passes_an_end_to_end_gradcheck() {
    for (k, mode) in [AblationMode::Full, AblationMode::NoIr, AblationMode::NoSi, AblationMode::NoIm]
        .into_iter()
        .enumerate()
    {
        let model = Sain::<f64>::new(common::config(TaskKind::Mrc, mode, 3, 4, 4), k as u64).unwrap();
        let instance = GradcheckInstance::random(&model, 12, 6, 2, k as u64);
        let report = gradcheck_model(&model, &instance, DEFAULT_TOLERANCE).unwrap();
        assert!(report.passed, "{mode}: {:?}", report.worst());
    }
}

#[test]
fn per_step_cells_and_classification_pass_gradcheck() {
    let mut config = common::config(TaskKind::Nli, AblationMode::Full, 2, 4, 2);
    config.shared_cell = false;
    let model = Sain::<f64>::new(config, 9).unwrap();
    assert!(model.params.id("cell1.control_in.weight").is_some());
    let instance = GradcheckInstance::random(&model, 8, 5, 1, 9);
    let report = gradcheck_model(&model, &instance, DEFAULT_TOLERANCE).unwrap();
    assert!(report.passed, "{:?}", report.worst());
}

#[test]
fn fixed_seed_gives_identical_parameters_and_outputs() {
    let a = Sain::<f32>::new(common::config(TaskKind::Mrc, AblationMode::Full, 3, 4, 4), 21).unwrap();
    let b = Sain::<f32>::new(common::config(TaskKind::Mrc, AblationMode::Full, 3, 4, 4), 21).unwrap();
    for ((_, n1, t1), (_, n2, t2)) in a.params.iter().zip(b.params.iter()) {
        assert_eq!(n1, n2);
        let bits = |t: &sain::Tensor<f32>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(t1), bits(t2));
    }
}
