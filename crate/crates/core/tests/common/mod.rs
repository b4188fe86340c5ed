//! Scalar reference implementations shared by the integration tests. They
//! work literal by literal on `bool` slices and raw state bytes and never
//! touch the packed masks.

#![allow(dead_code)]

use fptm::{BitDataset, BitSample, Hyperparameters, Mode, Model};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn literal(x: &[bool], j: usize) -> bool {
    let f = x.len();
    if j < f {
        x[j]
    } else {
        !x[j - f]
    }
}

/// Votes of one clause given its raw states.
pub fn oracle_votes(states: &[u8], x: &[bool], lf: u32, training: bool) -> u32 {
    assert_eq!(states.len(), 2 * x.len());
    let mut included = 0u32;
    let mut failed = 0u32;
    for (j, &s) in states.iter().enumerate() {
        if s >= 128 {
            included += 1;
            if !literal(x, j) {
                failed += 1;
            }
        }
    }
    if included == 0 {
        return if training { lf } else { 0 };
    }
    let limit = if included > lf { lf } else { included };
    limit.saturating_sub(failed)
}

/// Strict conjunction: 1 iff every included literal is true.
pub fn conjunction(states: &[u8], x: &[bool]) -> u32 {
    let mut any = false;
    for (j, &s) in states.iter().enumerate() {
        if s >= 128 {
            any = true;
            if !literal(x, j) {
                return 0;
            }
        }
    }
    u32::from(any)
}

pub fn oracle_sums(model: &Model, x: &[bool]) -> Vec<i64> {
    let lf = model.hyper().lf;
    model
        .banks()
        .iter()
        .map(|bank| {
            bank.clauses
                .iter()
                .map(|c| i64::from(c.polarity()) * i64::from(oracle_votes(c.states(), x, lf, false)))
                .sum()
        })
        .collect()
}

pub fn oracle_predict(model: &Model, x: &[bool]) -> usize {
    let sums = oracle_sums(model, x);
    match model.mode() {
        Mode::Binary => usize::from(sums[0] >= 0),
        Mode::Multiclass => {
            let mut best = 0;
            for i in 1..sums.len() {
                if sums[i] > sums[best] {
                    best = i;
                }
            }
            best
        }
    }
}

/// A state byte that is included with probability `p_include`, spread over
/// the whole range so saturation and threshold neighbours both show up.
pub fn random_state(rng: &mut impl Rng, p_include: f64) -> u8 {
    if rng.random_bool(p_include) {
        rng.random_range(128..=255)
    } else {
        rng.random_range(0..=127)
    }
}

pub fn random_bools(rng: &mut impl Rng, n: usize, density: f64) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(density)).collect()
}

pub fn hyper(t: u32, s: f64, l: u32, lf: u32, clauses: u32) -> Hyperparameters {
    Hyperparameters {
        t,
        s,
        l,
        lf,
        clauses_per_class: clauses,
    }
}

/// A model whose states are drawn at random with a per-clause inclusion
/// rate, so clause sizes range from empty to far above `LF`.
pub fn random_model(mode: Mode, features: usize, classes: usize, hyper: Hyperparameters, seed: u64) -> Model {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = Model::new(mode, features, classes, hyper).unwrap();
    let mut states = Vec::with_capacity(model.state_bytes());
    for _ in 0..model.clause_count() {
        let p = match rng.random_range(0..4) {
            0 => 0.0,
            1 => 1.5 / (2 * features) as f64,
            2 => 0.1,
            _ => rng.random_range(0.0..0.6),
        };
        states.extend((0..2 * features).map(|_| random_state(&mut rng, p)));
    }
    model.set_state_matrix(&states).unwrap();
    model
}

pub fn random_dataset(features: usize, samples: usize, classes: usize, density: f64, seed: u64) -> (BitDataset, Vec<Vec<bool>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = BitDataset::new(features, classes);
    let mut raw = Vec::with_capacity(samples);
    for _ in 0..samples {
        let x = random_bools(&mut rng, features, density);
        let label = rng.random_range(0..classes as u32);
        data.push(BitSample::from_bools(&x).view(), label).unwrap();
        raw.push(x);
    }
    (data, raw)
}

/// The 4-sample XOR task over 2 features.
pub fn xor_dataset() -> BitDataset {
    let mut data = BitDataset::new(2, 2);
    for (a, b) in [(false, false), (false, true), (true, false), (true, true)] {
        data.push(BitSample::from_bools(&[a, b]).view(), u32::from(a ^ b)).unwrap();
    }
    data
}
