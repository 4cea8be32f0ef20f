use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use omrf_bench::{ctc_case, rng, token_pair, uniform};
use omrf_core::ctc::ctc_loss;
use omrf_core::metrics::edit_distance;
use omrf_core::nn::{Conv2d, ConvSpec};
use omrf_core::rnn::BiGru;
use omrf_core::Parameters;
use std::hint::black_box;

fn conv(c: &mut Criterion) {
    let mut r = rng(1);
    let mut group = c.benchmark_group("conv3x3");
    for (ci, co, h, w) in [(8, 8, 64, 128), (32, 32, 16, 64)] {
        let layer = Conv2d::<f32>::new(ConvSpec::spatial(ci, co, (2, 1)), &mut r).unwrap();
        let x = uniform(&[2, ci, h, w], &mut r);
        let y = layer.forward(&x).unwrap();
        let label = format!("{ci}x{h}x{w}");
        group.bench_with_input(BenchmarkId::new("forward", &label), &x, |b, x| {
            b.iter(|| layer.forward(black_box(x)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("backward", &label), &x, |b, x| {
            b.iter(|| {
                let mut g = layer.zeros_like();
                layer.backward(black_box(x), &y, &mut g).unwrap()
            })
        });
    }
    group.finish();
}

fn bigru(c: &mut Criterion) {
    let mut r = rng(2);
    let rnn = BiGru::<f32>::new(256, 64, 2, &mut r);
    let xs = uniform(&[100, 256], &mut r);
    let (out, cache) = rnn.forward(&xs).unwrap();
    c.bench_function("bigru/forward/100x256", |b| b.iter(|| rnn.forward(black_box(&xs)).unwrap()));
    c.bench_function("bigru/backward/100x256", |b| {
        b.iter(|| {
            let mut g = rnn.zeros_like();
            rnn.backward(&cache, black_box(&out), &mut g).unwrap()
        })
    });
}

fn ctc(c: &mut Criterion) {
    let mut r = rng(3);
    let mut group = c.benchmark_group("ctc_loss");
    for (t, classes, len) in [(64, 17, 12), (250, 101, 60)] {
        let (lp, target) = ctc_case(t, classes, len, &mut r);
        group.bench_function(BenchmarkId::from_parameter(format!("T{t}_C{classes}_L{len}")), |b| {
            b.iter(|| ctc_loss(black_box(&lp), &target).unwrap())
        });
    }
    group.finish();
}

fn edit(c: &mut Criterion) {
    let mut r = rng(4);
    let mut group = c.benchmark_group("edit_distance");
    for len in [16, 64, 256] {
        let (gt, pred) = token_pair(len, len / 8 + 1, &mut r);
        group.bench_function(BenchmarkId::from_parameter(len), |b| {
            b.iter(|| edit_distance(black_box(&gt), black_box(&pred)))
        });
    }
    group.finish();
}

criterion_group!(benches, conv, bigru, ctc, edit);
criterion_main!(benches);
