use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twophase::learners::{cross_fit, fit_logistic_irls, make_folds, CrossFitPlan, FitTarget, LearnerSpec, Loss};
use twophase::simulation::run_replication;
use twophase::ScenarioConfig;

fn logistic_data(n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = DMatrix::from_fn(n, p, |_, _| rng.random::<f64>());
    let y = (0..n)
        .map(|i| {
            let eta = 0.5 - x.row(i).sum() / p as f64;
            f64::from(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp())))
        })
        .collect();
    (x, y)
}

fn irls(c: &mut Criterion) {
    let (x, y) = logistic_data(5000, 5);
    let w = vec![1.0; y.len()];
    c.bench_function("irls n=5000 p=5", |b| b.iter(|| fit_logistic_irls(&x, &y, &w, None).unwrap()));
}

fn super_learner(c: &mut Criterion) {
    let (x, y) = logistic_data(5000, 5);
    let w = vec![1.0; y.len()];
    let plan = CrossFitPlan::Folds(make_folds(y.len(), 5, 2, None).unwrap());
    let spec = LearnerSpec::default_binary();
    c.bench_function("cross-fit binary super learner n=5000", |b| {
        b.iter(|| cross_fit(&spec, FitTarget { x: &x, y: &y, w: &w, offset: None }, &plan, Loss::Bernoulli).unwrap())
    });
}

fn replication(c: &mut Criterion) {
    let config = ScenarioConfig { n: 2500, rho: 0.3, ..ScenarioConfig::default() };
    let mut g = c.benchmark_group("replication");
    g.sample_size(10);
    g.bench_function("n=2500 rho=0.3", |b| b.iter(|| run_replication(&config, 0)));
    g.finish();
}

criterion_group!(benches, irls, super_learner, replication);
criterion_main!(benches);
