use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use vardiff::estimators::{ensemble, RunConfig};
use vardiff::exec::Executor;
use vardiff::integrators::MethodKind;
use vardiff::noise::NoiseScheme;
use vardiff::{Diffusion, Potential, ProblemSpec};

fn executors() -> Vec<(&'static str, Executor)> {
    let mut v = vec![("sequential", Executor::Sequential)];
    #[cfg(feature = "parallel")]
    v.push(("parallel", Executor::Parallel));
    v
}

fn bench_ensemble(c: &mut Criterion) {
    let problem = ProblemSpec::new(
        2,
        1.0,
        Potential::QuadrupleWell,
        Diffusion::MoroCardin {
            amplitude: 5.0,
            eps: 0.3,
            inverted: true,
        },
    )
    .unwrap();
    let n_traj = 1024;
    let cfg = RunConfig {
        method: MethodKind::Pvd2 { noise: NoiseScheme::W2Ito1 },
        h: 0.05,
        t_final: 5.0,
        burn_in: None,
        replicates: n_traj,
        seed: 1,
        x0: vec![0.0, 0.0],
    };
    let mut group = c.benchmark_group("ensemble_quadruple_well");
    group.sample_size(10);
    group.throughput(Throughput::Elements(n_traj as u64 * 100));
    for (name, exec) in executors() {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, exec| {
            b.iter(|| ensemble(&problem, &cfg, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_ensemble);
criterion_main!(benches);
