use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use prnn_core::cells::{unroll, CellState};
use prnn_core::{CellConfig, CellKind, CellParams, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params(kind: CellKind, d: usize, n: usize) -> CellParams {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    CellParams::init(&CellConfig::new(kind, d, n), &mut rng).unwrap()
}

fn single_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("step_b50_n128");
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Tensor::uniform(&[50, 10], -1.0, 1.0, &mut rng);
    for kind in CellKind::ALL {
        let p = params(kind, 10, 128);
        group.bench_with_input(BenchmarkId::from_parameter(kind), &kind, |bench, _| {
            bench.iter(|| {
                let mut tape = Tape::new();
                let cell = p.bind(&mut tape);
                let s = CellState::zeros(&mut tape, 50, 128);
                let xv = tape.constant(x.clone());
                black_box(cell.step(&mut tape, &s, xv).unwrap())
            })
        });
    }
    group.finish();
}

fn unroll_backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("bptt_b50_t100_n128");
    group.sample_size(10);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inputs = Tensor::uniform(&[50, 100, 2], 0.0, 1.0, &mut rng);
    for kind in [CellKind::Lstm, CellKind::Pru, CellKind::PruPlus, CellKind::Gru] {
        let p = params(kind, 2, 128);
        group.bench_with_input(BenchmarkId::from_parameter(kind), &kind, |bench, _| {
            bench.iter(|| {
                let mut tape = Tape::new();
                let cell = p.bind(&mut tape);
                let run = unroll(&mut tape, &cell, &inputs, None).unwrap();
                let loss = tape.sum(run.last.h, None).unwrap();
                black_box(tape.backward(loss).unwrap())
            })
        });
    }
    group.finish();
}

criterion_group!(benches, single_step, unroll_backward);
criterion_main!(benches);
