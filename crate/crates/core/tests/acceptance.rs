//! Acceptance suite: one PASS / FAIL / BLOCKED line per criterion.
//!
//! Dataset-backed criteria read `FPTM_IMDB_DIR` (an `aclImdb` directory) and
//! `FPTM_FMNIST_DIR` (Fashion-MNIST IDX files). Without them those lines say
//! BLOCKED. The smoke variants run by default once the data is present; set
//! `FPTM_FULL=1` for the 1000-epoch runs and the real-data training-speed
//! comparison.

mod common;

use std::time::{Duration, Instant};

use common::*;
use fptm::booleanize::Descriptor;
use fptm::dataset::{fashion_mnist_paths, load_idx, load_imdb_dir};
use fptm::infer::naive;
use fptm::model::INITIAL_STATE;
use fptm::presets::{self, Preset, PresetInput};
use fptm::session::{self, TrainConfig, DEFAULT_SEED};
use fptm::{
    evaluate_clause, suggest_s, suggest_t, BitDataset, BitSample, Clause, FalseLiteralAction, FeedbackConfig, Mode,
    Model, PackedModel, ThroughputReport, Trainer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

use Outcome::*;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get()).clamp(1, 8)
}

fn full_runs() -> bool {
    std::env::var("FPTM_FULL").is_ok_and(|v| v == "1")
}

fn config(preset: &Preset) -> TrainConfig {
    TrainConfig {
        threads: threads(),
        ..TrainConfig::from_preset(preset)
    }
}

/// Bits with literal `j` of a `features`-wide sample forced true or false.
fn sample_failing(features: usize, included: &[usize], failing: usize) -> BitSample {
    let mut x = BitSample::zeros(features);
    for (k, &j) in included.iter().enumerate() {
        // Positive literals over bit j: true when the bit is set.
        x.set(j, k >= failing);
    }
    x
}

fn worked_examples() -> Outcome {
    let f = 200;
    let clause_with = |n: usize| {
        let mut states = vec![INITIAL_STATE; 2 * f];
        states[..n].fill(200);
        (Clause::from_states(states, 1).unwrap(), (0..n).collect::<Vec<_>>())
    };
    let (c100, lits100) = clause_with(100);
    let (c20, lits20) = clause_with(20);
    let a = evaluate_clause(&c100, sample_failing(f, &lits100, 15).view(), 50, false).unwrap().votes;
    let b = evaluate_clause(&c100, sample_failing(f, &lits100, 80).view(), 50, false).unwrap().votes;
    let c = evaluate_clause(&c20, sample_failing(f, &lits20, 10).view(), 50, false).unwrap().votes;
    check((a, b, c) == (35, 0, 10), format!("votes {a}, {b}, {c} (expected 35, 0, 10)"))
}

fn all_samples(features: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u32..1 << features).map(move |m| (0..features).map(|j| m >> j & 1 == 1).collect())
}

fn random_clause(rng: &mut impl Rng, features: usize) -> Clause {
    let p = [0.0, 1.0 / features as f64, 0.1, 0.4][rng.random_range(0..4)];
    let states = (0..2 * features).map(|_| random_state(rng, p)).collect();
    Clause::from_states(states, 1).unwrap()
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for _ in 0..100_000 {
        let f = rng.random_range(1..=160);
        let clause = random_clause(&mut rng, f);
        let density = rng.random_range(0.0..1.0);
        let x = random_bools(&mut rng, f, density);
        let lf = rng.random_range(1..=2 * f as u32);
        let training = rng.random_bool(0.5);
        let got = evaluate_clause(&clause, BitSample::from_bools(&x).view(), lf, training).unwrap().votes;
        mismatches += usize::from(got != oracle_votes(clause.states(), &x, lf, training));
        checked += 1;
    }
    for round in 0..100u64 {
        let f = rng.random_range(1..=128);
        let (mode, classes) = if round % 2 == 0 { (Mode::Binary, 2) } else { (Mode::Multiclass, 4) };
        let lf = rng.random_range(1..=(2 * f as u32).min(32));
        let model = random_model(mode, f, classes, hyper(10, 4.0, 16, lf, 3), round);
        let packed = PackedModel::from_model(&model);
        let (data, raw) = random_dataset(f, 1_000, classes, rng.random_range(0.05..0.95), round);
        let labels = packed.predict_batch(&data, 2).unwrap();
        for (i, x) in raw.iter().enumerate() {
            let want = oracle_predict(&model, x);
            mismatches += usize::from(labels[i] as usize != want);
            mismatches += usize::from(packed.class_sums(data.sample(i)).unwrap() != oracle_sums(&model, x));
            checked += 1;
        }
    }
    for f in 1..=16usize {
        let model = random_model(Mode::Multiclass, f, 3, hyper(8, 4.0, 8, (f as u32).min(5), 2), 1000 + f as u64);
        let packed = PackedModel::from_model(&model);
        let clause = random_clause(&mut rng, f);
        let lf = rng.random_range(1..=2 * f as u32);
        for x in all_samples(f) {
            let sample = BitSample::from_bools(&x);
            mismatches += usize::from(packed.class_sums(sample.view()).unwrap() != oracle_sums(&model, &x));
            let got = evaluate_clause(&clause, sample.view(), lf, true).unwrap().votes;
            mismatches += usize::from(got != oracle_votes(clause.states(), &x, lf, true));
            checked += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} mismatches over {checked} instances"))
}

fn lf_one_strictness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for f in 1..=12usize {
        for _ in 0..20 {
            let clause = random_clause(&mut rng, f);
            if clause.literal_count() == 0 {
                continue;
            }
            for x in all_samples(f) {
                let votes = evaluate_clause(&clause, BitSample::from_bools(&x).view(), 1, false).unwrap().votes;
                mismatches += usize::from(votes > 1 || votes != conjunction(clause.states(), &x));
                checked += 1;
            }
        }
    }
    check(mismatches == 0, format!("{mismatches} mismatches over {checked} exhaustive evaluations"))
}

fn memory_formula() -> Outcome {
    let p = presets::preset("imdb-binary-1c").unwrap();
    let model = Model::new(p.mode, p.feature_count(), p.classes(), p.hyper).unwrap();
    let bytes = model.state_bytes();
    check(bytes == 51_200 && model.state_matrix().len() == bytes, format!("state matrix {bytes} bytes"))
}

fn xor_learnability() -> Outcome {
    let data = xor_dataset();
    let t = suggest_t(10, 1, Mode::Multiclass).unwrap().t;
    let mut model = Model::new(Mode::Multiclass, 2, 2, hyper(t, 4.0, 4, 1, 10)).unwrap();
    let cfg = FeedbackConfig {
        false_literal_action: FalseLiteralAction::Decrement,
        rng_seed: DEFAULT_SEED,
    };
    let reports = Trainer::new(&model, cfg).fit(&mut model, &data, 200, None, 1, |_| {}).unwrap();
    match reports.iter().find(|r| r.train_accuracy == 1.0) {
        Some(r) => Pass(format!("100% train accuracy at epoch {} (T={t}, S=4, L=4, seed {DEFAULT_SEED})", r.epoch)),
        None => Fail(format!("best train accuracy {:.3} after 200 epochs", reports.iter().map(|r| r.train_accuracy).fold(0.0, f64::max))),
    }
}

/// Trains epoch by epoch and returns (peak test accuracy, epochs run, seconds).
fn peak_accuracy(config: &TrainConfig, train: &BitDataset, test: &BitDataset, budget: Option<Duration>) -> (f64, usize, f64) {
    let start = Instant::now();
    let mut model = Model::new(config.mode, train.features(), train.classes().max(2), config.hyper).unwrap();
    let feedback = FeedbackConfig {
        false_literal_action: config.false_literal_action,
        rng_seed: config.seed,
    };
    let mut trainer = Trainer::new(&model, feedback);
    let mut peak = 0.0f64;
    let mut epochs = 0;
    while epochs < config.epochs {
        trainer.train_epoch(&mut model, train, config.threads).unwrap();
        epochs += 1;
        peak = peak.max(PackedModel::from_model(&model).accuracy(test, config.threads).unwrap());
        if budget.is_some_and(|b| start.elapsed() >= b) {
            break;
        }
    }
    (peak, epochs, start.elapsed().as_secs_f64())
}

fn imdb_data(preset: &Preset, subset: Option<usize>) -> Option<(BitDataset, BitDataset)> {
    let dir = std::env::var_os("FPTM_IMDB_DIR")?;
    let mut corpus = load_imdb_dir(dir).expect("FPTM_IMDB_DIR is not a readable aclImdb directory");
    if let Some(keep) = subset {
        let spread = |n: usize| (0..keep.min(n)).map(|k| k * n / keep.min(n)).collect::<Vec<_>>();
        corpus.train = corpus.train.subset(&spread(corpus.train.len()));
    }
    let PresetInput::Text { vocab_size, max_ngram, features } = preset.input else { unreachable!() };
    let (_, train, test) = session::booleanize_text(&corpus.train, Some(&corpus.test), vocab_size, max_ngram, features).unwrap();
    Some((train, test.unwrap()))
}

fn imdb_reproduction() -> Outcome {
    let preset = presets::preset("imdb-binary-1c").unwrap();
    let Some((train, test)) = imdb_data(preset, (!full_runs()).then_some(5_000)) else {
        return Blocked("FPTM_IMDB_DIR not set; the IMDb dataset is not available here".into());
    };
    if full_runs() {
        let (peak, epochs, secs) = peak_accuracy(&config(preset), &train, &test, None);
        check(peak >= 0.88, format!("peak test accuracy {:.2}% over {epochs} epochs in {secs:.0}s (need >= 88.0%)", peak * 100.0))
    } else {
        let (peak, epochs, secs) = peak_accuracy(&config(preset), &train, &test, Some(Duration::from_secs(300)));
        check(
            peak >= 0.82 && secs <= 300.0 + 60.0,
            format!("5,000-review smoke: peak test accuracy {:.2}% over {epochs} epochs in {secs:.0}s (need >= 82% in 5 min)", peak * 100.0),
        )
    }
}

fn fmnist_tiny() -> Outcome {
    let Some(dir) = std::env::var_os("FPTM_FMNIST_DIR") else {
        return Blocked("FPTM_FMNIST_DIR not set; the Fashion-MNIST dataset is not available here".into());
    };
    let preset = presets::preset("fmnist-tiny").unwrap();
    let PresetInput::Image { bits_per_map } = preset.input else { unreachable!() };
    let (img, lab) = fashion_mnist_paths(&dir, "train").unwrap();
    let train = load_idx(img, lab).unwrap();
    let (img, lab) = fashion_mnist_paths(&dir, "test").unwrap();
    let test = load_idx(img, lab).unwrap();
    let (_, train, test) = session::booleanize_images(&train, Some(&test), bits_per_map).unwrap();
    let test = test.unwrap();
    let mut cfg = config(preset);
    if full_runs() {
        let (peak, epochs, secs) = peak_accuracy(&cfg, &train, &test, None);
        check(peak >= 0.905, format!("peak test accuracy {:.2}% over {epochs} epochs in {secs:.0}s (need >= 90.5%)", peak * 100.0))
    } else {
        cfg.epochs = 200;
        let (peak, epochs, secs) = peak_accuracy(&cfg, &train, &test, None);
        check(peak > 0.88, format!("200-epoch smoke: peak test accuracy {:.2}% over {epochs} epochs in {secs:.0}s (need > 88%)", peak * 100.0))
    }
}

fn hyper_helper() -> Outcome {
    let t = suggest_t(200, 10, Mode::Multiclass).unwrap().t;
    let s = suggest_s(10.0).unwrap();
    check(t == 32 && s == 100.0, format!("suggest_T(multiclass, 200, 10) = {t}, suggest_S(10) = {s}"))
}

fn throughput() -> Outcome {
    let preset = presets::preset("imdb-binary-1c").unwrap();
    let f = preset.feature_count();
    let mut model = Model::new(preset.mode, f, 2, preset.hyper).unwrap();
    // About 64 included literals per clause, the preset's L.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let states: Vec<u8> = (0..model.state_bytes()).map(|_| random_state(&mut rng, 64.0 / (2 * f) as f64)).collect();
    model.set_state_matrix(&states).unwrap();
    let (data, _) = random_dataset(f, 25_000, 2, 0.02, 4);

    let packed = PackedModel::from_model(&model);
    let (labels, fast) = packed.benchmark(&data, 1, 3).unwrap();
    let unpacked = naive::unpack(&data);
    let slow = naive::benchmark(&model, &unpacked, 3);
    let same = naive::predict_all(&model, &unpacked) == labels;
    let speedup = fast.predictions_per_second / slow.predictions_per_second;
    let invariant = fast.bytes_per_second == ThroughputReport::bytes_for(fast.predictions_per_second, f)
        && fast.bytes_per_second == fast.predictions_per_second * f as f64 / 8.0;
    check(
        speedup >= 10.0 && invariant && same,
        format!(
            "packed {:.3e} preds/s ({:.3e} B/s), naive {:.3e} preds/s, speedup {speedup:.1}x (need >= 10x), bytes/s = preds/s x F/8: {invariant}, labels agree: {same}",
            fast.predictions_per_second, fast.bytes_per_second, slow.predictions_per_second
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut problems = Vec::new();
    let names: Vec<&str> = presets::names().collect();
    for name in &names {
        let preset = presets::preset(name).unwrap();
        let (train, _) = random_dataset(preset.feature_count(), 40, preset.classes(), 0.05, 5);
        let mut cfg = TrainConfig::from_preset(preset);
        cfg.epochs = 2;
        let run = || session::train(&cfg, &train, None, Descriptor::None, |_| {}).unwrap().0;
        let (a, b) = (run(), run());
        if a.to_bytes() != b.to_bytes() {
            problems.push(format!("{name}: models differ"));
        }
        let path = dir.path().join(format!("{name}.fptm"));
        a.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        let before = PackedModel::from_model(&a).predict_batch(&train, 1).unwrap();
        let after = PackedModel::from_model(&loaded).predict_batch(&train, 1).unwrap();
        if before != after || loaded != a {
            problems.push(format!("{name}: round trip changed predictions"));
        }
    }
    check(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{} presets byte-identical across runs, round trip preserves predictions", names.len())
        } else {
            problems.join("; ")
        },
    )
}

/// Sparse synthetic "reviews": each document draws about 60 words, mostly
/// neutral, with class-indicative words at a 15% rate (80% from its own
/// class's 40-word list).
fn synthetic_reviews(features: usize, n: usize, seed: u64) -> BitDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = BitDataset::new(features, 2);
    let mut bits = vec![false; features];
    for _ in 0..n {
        bits.fill(false);
        let label = rng.random_range(0..2u32);
        for _ in 0..60 {
            let w = if rng.random_bool(0.15) {
                let own = rng.random_bool(0.8);
                let class = if own { label } else { 1 - label } as usize;
                class * 40 + rng.random_range(0..40)
            } else {
                80 + rng.random_range(0..features - 80)
            };
            bits[w] = true;
        }
        data.push(BitSample::from_bools(&bits).view(), label).unwrap();
    }
    data
}

fn training_speed() -> Outcome {
    let optimal = presets::preset("imdb-optimal-200c").unwrap();
    let slow = presets::preset("imdb-optimal-200c-t320").unwrap();
    let real = if full_runs() { imdb_data(optimal, None) } else { None };
    let label = if real.is_some() { "IMDb" } else { "synthetic stand-in (F=1000, 1,000 reviews; set FPTM_IMDB_DIR and FPTM_FULL=1 for IMDb)" };
    let (train, test) = real.unwrap_or_else(|| (synthetic_reviews(1_000, 1_000, 6), synthetic_reviews(1_000, 500, 7)));
    let mut times = Vec::new();
    let mut detail = Vec::new();
    for preset in [optimal, slow] {
        let cfg = config(preset);
        let mut per_epoch = Vec::new();
        let (_, reports) = session::train(&cfg, &train, Some(&test), Descriptor::None, |r| per_epoch.push(r.wall_time)).unwrap();
        let total: f64 = per_epoch.iter().sum();
        let finite = per_epoch.len() == preset.epochs && per_epoch.iter().all(|t| t.is_finite());
        let peak = reports.iter().filter_map(|r| r.test_accuracy).fold(0.0, f64::max);
        detail.push(format!("T={}: {} epochs in {total:.1}s, peak test {:.1}%", preset.hyper.t, per_epoch.len(), peak * 100.0));
        times.push((total, finite));
    }
    let ok = times.iter().all(|t| t.1) && times[0].0 < times[1].0;
    check(ok, format!("{label}: {}", detail.join(", ")))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("worked-example exactness", worked_examples),
        ("oracle equivalence", oracle_equivalence),
        ("LF=1 strictness", lf_one_strictness),
        ("memory formula", memory_formula),
        ("small-instance learnability", xor_learnability),
        ("IMDb reproduction", imdb_reproduction),
        ("Fashion-MNIST tiny", fmnist_tiny),
        ("hyperparameter helper", hyper_helper),
        ("throughput property", throughput),
        ("determinism", determinism),
        ("training-speed property", training_speed),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let (tag, detail) = match run() {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Blocked(d) => ("BLOCKED", d),
        };
        println!("{tag:<7} {name}: {detail}");
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
