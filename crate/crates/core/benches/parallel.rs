use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use streamflow_core::model::{ChannelValue, SensorUpdate, Value};
use streamflow_core::par::Execution;
use streamflow_core::platform::Platform;
use streamflow_core::runtime::{compute_update, FetchPolicy, Runtime, RuntimeConfig};
use streamflow_core::store::{Store, StoreConfig};
use streamflow_core::topo::{
    analyze_many, deploy, generate_family, generate_many, Family, GeneratorKnobs, OperandDistribution, CHANNEL, STREAM,
};

fn knobs(count: u64) -> Vec<GeneratorKnobs> {
    (0..count)
        .map(|seed| GeneratorKnobs {
            num_streams: 60,
            num_composite: 40,
            operands: 4,
            distribution: OperandDistribution::Uniform,
            allow_cycles: false,
            seed,
        })
        .collect()
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn batch_generation(c: &mut Criterion) {
    let ks = knobs(256);
    let mut g = c.benchmark_group("generate_many");
    for (label, exec) in modes() {
        g.bench_function(label, |b| b.iter(|| black_box(generate_many(&ks, exec))));
    }
    g.finish();
}

fn batch_metrics(c: &mut Criterion) {
    let specs: Vec<_> = generate_many(&knobs(64), Execution::Sequential)
        .into_iter()
        .map(Result::unwrap)
        .collect();
    let mut g = c.benchmark_group("analyze_many");
    for (label, exec) in modes() {
        g.bench_function(label, |b| b.iter(|| black_box(analyze_many(&specs, exec))));
    }
    g.finish();
}

fn input_fetch(c: &mut Criterion) {
    let mut g = c.benchmark_group("input_fetch");
    for fan_in in [8usize, 64, 256] {
        let store = Arc::new(Store::open_memory(StoreConfig::default()));
        let rt = Runtime::new(store.clone(), RuntimeConfig::default()).unwrap();
        let platform = Platform::new(rt);
        let spec = generate_family(Family::InDegree, fan_in).unwrap();
        let dep = deploy(&spec, &platform).unwrap();
        let target = dep.stream("sink").unwrap().clone();
        for (label, execution) in modes() {
            let policy = FetchPolicy { execution, parallel_min: 1 };
            let mut ts = 1_000;
            g.bench_with_input(BenchmarkId::new(label, fan_in), &fan_in, |b, _| {
                b.iter(|| {
                    ts += 1;
                    let su = Arc::new(SensorUpdate::new(STREAM, ts, vec![ChannelValue::new(CHANNEL, Value::Number(1.0))]));
                    black_box(compute_update(&store, &target, "s1", &su, policy))
                })
            });
        }
    }
    g.finish();
}

criterion_group!(benches, batch_generation, batch_metrics, input_fetch);
criterion_main!(benches);
