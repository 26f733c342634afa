use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tendon_hand::finger::{workspace_sample, CommandRange, FingerConfig, FingerType};
use tendon_hand::geometry::Vec2;
use tendon_hand::tactile::{
    density_map, detect_markers_doh, displace_markers, preprocess, render_frame, DohParams, GridSpec, Indentation,
    MarkerLayout, Rect, DEFAULT_THRESHOLD,
};
use tendon_hand::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn workspace(c: &mut Criterion) {
    let cfg = FingerConfig::new(FingerType::D);
    let range = CommandRange::full(&cfg);
    let mut group = c.benchmark_group("workspace_10k");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| workspace_sample(&cfg, range, black_box(10_000), 7, exec))
        });
    }
    group.finish();
}

fn tactile(c: &mut Criterion) {
    let layout = MarkerLayout::default();
    let ind = Indentation::new(Vec2::new(120.0, 120.0), 0.6, 60.0);
    let moved = displace_markers(&layout.positions, &ind);
    let frame = render_frame(&moved, &layout, Execution::Sequential);
    let binary = preprocess(&frame, Rect::full(&frame), DEFAULT_THRESHOLD).unwrap();
    let grid = GridSpec::default();

    let mut group = c.benchmark_group("tactile");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("render", name), |b| {
            b.iter(|| render_frame(black_box(&moved), &layout, exec))
        });
        group.bench_function(BenchmarkId::new("doh", name), |b| {
            b.iter(|| detect_markers_doh(black_box(&binary), &DohParams::default(), exec))
        });
        group.bench_function(BenchmarkId::new("density", name), |b| {
            b.iter(|| density_map(black_box(&moved), 24.0, &grid, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, workspace, tactile);
criterion_main!(benches);
