use std::hint::black_box;

use cmdp_lab::envs::{make_media_streaming, MediaStreamingParams};
use cmdp_lab::posterior::DirichletPosterior;
use cmdp_lab::safe_psrl::{SafePsrlRun, ScheduleConfig};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn learner_benchmarks(c: &mut Criterion) {
    let model = make_media_streaming(&MediaStreamingParams::default()).unwrap();

    c.bench_function("dirichlet_kernel_sample_11x2", |b| {
        let posterior = DirichletPosterior::new(11, 2, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        b.iter(|| black_box(posterior.sample(&mut rng)))
    });

    c.bench_function("safe_psrl_episode", |b| {
        let config = ScheduleConfig::for_model(&model, 1.0, 0.05).unwrap();
        let prior = DirichletPosterior::new(11, 2, 0.1).unwrap();
        let mut run = SafePsrlRun::new(&model, prior, config, 7).unwrap();
        b.iter(|| black_box(run.step()))
    });
}

criterion_group!(benches, learner_benchmarks);
criterion_main!(benches);
