//! Sequential vs data-parallel: distance-field builds and seeded run batches.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use drilltwin::exec::Execution;
use drilltwin::scenario::{run_batch, Scenario};
use drilltwin::twin::{build_sdf_with, generate_phantom, PhantomSpec};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn sdf(c: &mut Criterion) {
    let mut group = c.benchmark_group("sdf");
    group.sample_size(10);
    for dims in [48, 72] {
        let spec = PhantomSpec {
            dims: [dims; 3],
            spacing: 18.0 / dims as f64,
            seed: 0,
            jitter: 0.0,
        };
        let (volume, structures, _) = generate_phantom(&spec).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, dims), &volume, |b, v| {
                b.iter(|| build_sdf_with(v, &structures, exec).unwrap())
            });
        }
    }
    group.finish();
}

const BATCH: &str = r#"
name = "bench"
duration = 1.0
[anatomy]
phantom = { dims = [48, 48, 48], spacing = 0.375 }
[input]
kind = "scripted"
[[input.segments]]
type = "approach"
duration = 0.4
target = [6.0, 11.0, 7.6]
[[input.segments]]
type = "press"
duration = 0.6
point = [6.0, 11.0, 7.0]
direction = [0.0, 0.0, -1.0]
force = 1.2
power = true
"#;

fn batch(c: &mut Criterion) {
    let scenario = Scenario::from_toml_str(BATCH, None).unwrap();
    let seeds: Vec<u64> = (1..=4).collect();
    let mut group = c.benchmark_group("run_batch");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| run_batch(&scenario, &seeds, exec, |log| log.records.len()).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, sdf, batch);
criterion_main!(benches);
