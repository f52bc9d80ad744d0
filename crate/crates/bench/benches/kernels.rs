use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use cgankd::cgen::{make_oracle, sample_labels};
use cgankd::data::{make_classification, Family};
use cgankd::labeladjust::filter_indices;
use cgankd::nn::{gradients, init_params, LossKind};
use cgankd::subsample::{rejection_sample, LabelSource};
use cgankd::theory::{empirical_rademacher, standard_setup};
use cgankd::{rng, LabelNoise, NetSpec, OutputKind, Provenance, Sample, SynthConfig};

fn blobs(n: usize) -> SynthConfig {
    SynthConfig {
        family: Family::Blobs {
            classes: 4,
            separation: 3.0,
            noise_std: 1.0,
        },
        dim: 2,
        n,
        seed: 1,
    }
}

fn nn_kernels(c: &mut Criterion) {
    let data = make_classification(&blobs(64)).unwrap();
    let spec = NetSpec::new(2, vec![64, 64], OutputKind::Logits(4)).unwrap();
    let p = init_params(&spec, 0);
    c.bench_function("gradients/mlp64x64/batch64", |b| {
        b.iter(|| gradients(black_box(&p), &data.samples, &LossKind::PlainCe, None).unwrap())
    });
    let x = [0.3, -1.2];
    c.bench_function("forward/mlp64x64/single", |b| b.iter(|| p.forward(black_box(&x)).unwrap()));
}

fn filter_kernel(c: &mut Criterion) {
    let fakes = make_classification(&blobs(8000)).unwrap().with_provenance(Provenance::FakeM1);
    let teacher = init_params(&NetSpec::new(2, vec![64, 64], OutputKind::Logits(4)).unwrap(), 2);
    c.bench_function("m2/filter/8000", |b| {
        b.iter(|| filter_indices(black_box(&teacher), &fakes, 0.9).unwrap())
    });
}

fn rejection_kernel(c: &mut Criterion) {
    let real = make_classification(&blobs(800)).unwrap();
    let gen = make_oracle(blobs(800), LabelNoise::Flip(0.2), 0.15, 4.0).unwrap();
    let labels = sample_labels(&real, 4000, 3).unwrap();
    // Accepts the half plane x > 0 at full rate, the rest at a tenth.
    let ratio = |s: &Sample| if s.features[0] > 0.0 { 1.0 } else { 0.1 };
    c.bench_function("m1/rejection/2000", |b| {
        b.iter_batched(
            || LabelSource::Empirical(labels.clone()),
            |src| rejection_sample(&gen, &ratio, 1.0, &src, 2000, 5).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn rademacher_kernel(c: &mut Criterion) {
    let setup = standard_setup();
    let mut r = rng::stream(4);
    let idx = setup.real.sample_indices(1000, &mut r);
    let samples: Vec<(usize, f64)> = idx.iter().map(|&i| setup.real.points[i]).collect();
    c.bench_function("theory/rademacher/n1000/mc2000", |b| {
        b.iter(|| empirical_rademacher(&setup.student, black_box(&samples), setup.loss, 1.0, 2000, 7).unwrap())
    });
}

criterion_group!(benches, nn_kernels, filter_kernel, rejection_kernel, rademacher_kernel);
criterion_main!(benches);
