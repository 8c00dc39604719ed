use std::sync::Arc;

use criterion::{black_box, criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};
use motion_stream::backend::{MotionBackend, StyleEmbedding, ToyBackend, ToyParams};
use motion_stream::experiment::{score_modes, synthetic_motion};
use motion_stream::metrics::sequence_jitter_terms;
use motion_stream::motion::JointSequence;
use motion_stream::par;
use motion_stream::pipeline::{Mode, PipelineConfig, PipelineState};

fn noisy_backend(seed: u64) -> Arc<dyn MotionBackend> {
    let params = ToyParams {
        noise_sigma: 0.1,
        ..ToyParams::default()
    };
    Arc::new(ToyBackend::new(seed, params).unwrap())
}

fn stride_throughput(c: &mut Criterion) {
    let mut group = c.benchmark_group("stride");
    let input = synthetic_motion(60 + 4 * 64, 12, 20.0, 1).unwrap();
    let backend = noisy_backend(1);
    for steps in [10, 4] {
        let cfg = PipelineConfig {
            steps,
            ..PipelineConfig::default()
        };
        group.bench_with_input(BenchmarkId::new("steps", steps), &cfg, |b, cfg| {
            b.iter_batched(
                || {
                    PipelineState::new(
                        cfg.clone(),
                        Arc::clone(&backend),
                        StyleEmbedding::seeded(8, 1),
                    )
                    .unwrap()
                },
                |mut st| black_box(st.push_frames(&input).unwrap()),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn trial_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("trial_sweep");
    group.sample_size(10);
    let seeds: Vec<u64> = (0..16).collect();
    let trial = |&seed: &u64| {
        let input = synthetic_motion(200, 12, 20.0, seed).unwrap();
        score_modes(
            &input,
            &noisy_backend(seed),
            &PipelineConfig::default(),
            &StyleEmbedding::seeded(8, 77),
            &[
                Mode::Proposed,
                Mode::Naive,
                Mode::NoReencode,
                Mode::Noncausal,
            ],
        )
        .unwrap()
    };
    group.bench_function("sequential", |b| b.iter(|| par::map_seq(&seeds, trial)));
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| b.iter(|| par::map_par(&seeds, trial)));
    group.finish();
}

fn batch_jitter(c: &mut Criterion) {
    let mut group = c.benchmark_group("batch_jitter");
    let backend = noisy_backend(2);
    let seqs: Vec<JointSequence> = (0..64)
        .map(|seed| {
            let m = synthetic_motion(2000, 12, 20.0, seed).unwrap();
            backend.features_to_joints(&m).unwrap()
        })
        .collect();
    group.bench_function("sequential", |b| {
        b.iter(|| par::map_seq(&seqs, sequence_jitter_terms))
    });
    #[cfg(feature = "parallel")]
    group.bench_function("parallel", |b| {
        b.iter(|| par::map_par(&seqs, sequence_jitter_terms))
    });
    group.finish();
}

criterion_group!(benches, stride_throughput, trial_sweep, batch_jitter);
criterion_main!(benches);
