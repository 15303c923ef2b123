//! Microbenchmarks for the hot numeric kernels at production sizes: one LSTM
//! step, one attention pass, one temperature softmax, and corpus BLEU.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use ltmn::nn::{lstm_step, softmax_with_temperature, LstmParams, Matrix};
use ltmn::{attend, bleu_corpus, AttentionParams};

const HIDDEN: usize = 128;
const EMBED: usize = 50;

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn bench_lstm_step(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let params = LstmParams::uniform(EMBED, HIDDEN, 0.08, &mut rng);
    let x = random_vec(&mut rng, EMBED);
    let h = random_vec(&mut rng, HIDDEN);
    let cell = random_vec(&mut rng, HIDDEN);
    c.bench_function("lstm_step_128", |b| {
        b.iter(|| lstm_step(&params, black_box(&x), black_box(&h), black_box(&cell)).unwrap())
    });
}

fn bench_attend(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let att = AttentionParams {
        w_a: Matrix::uniform(HIDDEN, HIDDEN, -0.08, 0.08, &mut rng),
        u_a: Matrix::uniform(HIDDEN, HIDDEN, -0.08, 0.08, &mut rng),
        v_a: Matrix::uniform(1, HIDDEN, -0.08, 0.08, &mut rng),
    };
    let query = random_vec(&mut rng, HIDDEN);
    let states: Vec<Vec<f64>> = (0..7).map(|_| random_vec(&mut rng, HIDDEN)).collect();
    c.bench_function("attend_128x7", |b| {
        b.iter(|| attend(&att, black_box(&query), black_box(&states)).unwrap())
    });
}

fn bench_softmax(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let logits = random_vec(&mut rng, HIDDEN);
    c.bench_function("softmax_tau08_128", |b| {
        b.iter(|| softmax_with_temperature(black_box(&logits), 0.8).unwrap())
    });
}

fn bench_bleu(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let make = |rng: &mut ChaCha8Rng| -> Vec<Vec<u32>> {
        (0..20)
            .map(|_| (0..30).map(|_| rng.random_range(0..40u32)).collect())
            .collect()
    };
    let candidates = make(&mut rng);
    let references = make(&mut rng);
    c.bench_function("bleu_20x30", |b| {
        b.iter(|| bleu_corpus(black_box(&candidates), black_box(&references), 4).unwrap())
    });
}

criterion_group!(kernels, bench_lstm_step, bench_attend, bench_softmax, bench_bleu);
criterion_main!(kernels);
