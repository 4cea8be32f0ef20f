mod common;

use common::*;

fn check<C: Case>(seed: u64) {
    let r = run_case::<C>(seed);
    assert!(r.double < DOUBLE_TOL, "{}: double-precision error {:.3e} ({})", r.name, r.double, r.worst);
    assert!(r.single < SINGLE_TOL, "{}: single-precision error {:.3e} ({})", r.name, r.single, r.worst);
}

#[test]
fn conv2d_dilated() {
    check::<ConvCase>(101);
}

#[test]
fn conv2d_pointwise() {
    check::<PointwiseConvCase>(102);
}

#[test]
fn batchnorm_batch_statistics() {
    check::<BatchNormCase>(103);
}

#[test]
fn batchnorm_running_statistics() {
    check::<BatchNormEvalCase>(104);
}

#[test]
fn relu() {
    check::<ReluCase>(105);
}

#[test]
fn maxpool_with_ragged_edge() {
    check::<MaxPoolCase>(106);
}

#[test]
fn bottleneck_block_with_projection_shortcut() {
    check::<BlockCase>(107);
}

#[test]
fn linear() {
    check::<LinearCase>(108);
}

#[test]
fn log_softmax() {
    check::<LogSoftmaxCase>(109);
}

#[test]
fn gru_step() {
    check::<GruStepCase>(110);
}

#[test]
fn gru_sequence() {
    check::<GruSequenceCase>(111);
}

#[test]
fn bigru_stack() {
    check::<BiGruCase>(112);
}

#[test]
fn ctc_logit_gradient() {
    check::<CtcCase>(113);
}

#[test]
fn micro_model_end_to_end() {
    check::<MicroModelCase>(114);
}
