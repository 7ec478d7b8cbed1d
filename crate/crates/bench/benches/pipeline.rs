use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use indegree_core::estimators::{high_prob_risk_experiment, RiskExperiment};
use indegree_core::instances::random_markov;
use indegree_core::learner::identify_support;
use indegree_core::tester::statistic;
use indegree_core::{DenseDistribution, LearnerConfig, Sampler, Seed, SupportMask};

fn sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("ancestral_sampling");
    for n in [8usize, 16, 32] {
        let net = random_markov(n, 2, 0.1, 0.9, &mut Seed(n as u64).rng());
        group.throughput(Throughput::Elements(10_000));
        group.bench_with_input(BenchmarkId::from_parameter(n), &net, |b, net| {
            let mut rng = Seed(1).rng();
            b.iter(|| black_box(net.sampler().draw_many(10_000, &mut rng)));
        });
    }
    group.finish();
}

fn exact_distribution(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact_distribution");
    for n in [8usize, 12, 16] {
        let net = random_markov(n, 2, 0.1, 0.9, &mut Seed(n as u64).rng());
        group.bench_with_input(BenchmarkId::from_parameter(n), &net, |b, net| {
            b.iter(|| black_box(net.exact_distribution().unwrap()));
        });
    }
    group.finish();
}

fn tester_statistic(c: &mut Criterion) {
    let mut group = c.benchmark_group("tester_statistic");
    for n in [6usize, 8, 10] {
        let net = random_markov(n, 1, 0.1, 0.9, &mut Seed(n as u64).rng());
        let mask = SupportMask::full(&net.dag).unwrap();
        let samples = net.sample(2_000, Seed(2));
        group.bench_with_input(BenchmarkId::from_parameter(n), &samples, |b, samples| {
            b.iter(|| black_box(statistic(samples, &net, &mask, 2_000.0).unwrap()));
        });
    }
    group.finish();
}

fn support_identification(c: &mut Criterion) {
    let net = random_markov(12, 2, 0.1, 0.9, &mut Seed(12).rng());
    let cfg = LearnerConfig::default();
    c.bench_function("identify_support/12", |b| {
        b.iter(|| black_box(identify_support(&net.sampler(), &net.dag, &cfg, Seed(3)).unwrap()));
    });
}

fn add_k_risk(c: &mut Criterion) {
    let p = DenseDistribution::uniform(64);
    let cfg = RiskExperiment {
        n_samples: 5_000,
        k: 5.0,
        trials: 200,
        delta: 0.01,
        bound_multiple: 1.0,
    };
    c.bench_function("add_k_risk/64x200", |b| {
        b.iter(|| black_box(high_prob_risk_experiment(&p, &cfg, Seed(4)).unwrap()));
    });
}

criterion_group!(
    benches,
    sampling,
    exact_distribution,
    tester_statistic,
    support_identification,
    add_k_risk
);
criterion_main!(benches);
