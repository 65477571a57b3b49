mod common;

use common::{full_batch, random_teacher, toy_model};
use proptest::prelude::*;
use sset_core::model::{batch_loss_and_grad, kd_loss, sfna_loss, ska_gradient_check};
use sset_core::{LossSign, TypeId};

const H: f64 = 1e-5;

#[test]
fn full_loss_gradient_matches_central_differences() {
    for with_text in [true, false] {
        let (g, model) = toy_model(3, with_text);
        let teacher = random_teacher(&g, 4);
        let batch = full_batch(&g, model.hops, &teacher);
        for lambda in [0.0, 0.5, 1.0] {
            let report =
                ska_gradient_check(&model, &g, &batch, lambda, LossSign::NegLogLikelihood, H)
                    .unwrap();
            assert_eq!(report.checked, model.params.num_values());
            assert!(
                report.max_rel_error < 1e-4,
                "text {with_text} lambda {lambda}: {} at {}",
                report.max_rel_error,
                report.worst_coord
            );
        }
    }
}

#[test]
fn printed_sign_gradient_is_also_consistent() {
    let (g, model) = toy_model(5, true);
    let teacher = random_teacher(&g, 6);
    let batch = full_batch(&g, model.hops, &teacher);
    let report = ska_gradient_check(&model, &g, &batch, 0.5, LossSign::AsPrinted, H).unwrap();
    assert!(report.max_rel_error < 1e-4, "{}", report.max_rel_error);
}

#[test]
fn total_is_linear_in_lambda() {
    let (g, model) = toy_model(7, true);
    let teacher = random_teacher(&g, 8);
    let batch = full_batch(&g, model.hops, &teacher);
    let sign = LossSign::NegLogLikelihood;
    let (p0, _) = batch_loss_and_grad(&model, &g, &batch, 0.0, sign).unwrap();
    for lambda in [0.0, 0.25, 0.5, 1.0] {
        let (p, _) = batch_loss_and_grad(&model, &g, &batch, lambda, sign).unwrap();
        assert_eq!(p.sfna, p0.sfna);
        assert_eq!(p.kd, p0.kd);
        assert_eq!(p.total, lambda * p.sfna + (1.0 - lambda) * p.kd);
    }
}

proptest! {
    #[test]
    fn losses_are_nonnegative(
        row in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0, any::<bool>()), 1..20)
    ) {
        let probs: Vec<f64> = row.iter().map(|r| r.0).collect();
        let teacher: Vec<f64> = row.iter().map(|r| r.1).collect();
        let pos: Vec<TypeId> = row.iter().enumerate().filter(|(_, r)| r.2).map(|(i, _)| TypeId::from(i)).collect();
        let (s, _) = sfna_loss(&probs, &pos, LossSign::NegLogLikelihood);
        let (k, _) = kd_loss(&teacher, &probs, LossSign::NegLogLikelihood);
        prop_assert!(s >= 0.0 && s.is_finite());
        prop_assert!(k >= 0.0 && k.is_finite());
    }
}
