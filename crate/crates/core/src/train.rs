//! Feedback rules and the training loop.
//!
//! Type Ia is deterministic and gated by `L` for new inclusions; Type Ib is
//! the only stochastic rule (decrement with probability `1/S`); Type II is
//! the standard-TM rule. Every bank owns an RNG stream, so training is
//! reproducible from the seed regardless of how banks are spread over threads.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::bits::SampleRef;
use crate::dataset::BitDataset;
use crate::error::{Error, Result};
use crate::eval::{check_width, class_sum_unchecked, vote_unchecked};
use crate::infer::PackedModel;
use crate::model::{Clause, ClauseBank, Hyperparameters, Mode, Model, INCLUDE_THRESHOLD};

/// What Type Ia does to automata whose literal is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FalseLiteralAction {
    #[default]
    Decrement,
    Noop,
}

impl std::str::FromStr for FalseLiteralAction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decrement" => Ok(Self::Decrement),
            "noop" => Ok(Self::Noop),
            other => Err(Error::InvalidArgument(format!(
                "false-literal action must be `decrement` or `noop`, got `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeedbackConfig {
    pub false_literal_action: FalseLiteralAction,
    pub rng_seed: u64,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            false_literal_action: FalseLiteralAction::Decrement,
            rng_seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    /// 1-based.
    pub epoch: usize,
    pub train_accuracy: f64,
    pub test_accuracy: Option<f64>,
    /// Seconds spent in feedback for this epoch, evaluation excluded.
    pub wall_time: f64,
}

impl EpochReport {
    pub const CSV_HEADER: &'static str = "epoch,train_acc,test_acc,seconds";

    pub fn csv_line(&self) -> String {
        let test = self.test_accuracy.map(|a| format!("{a:.6}")).unwrap_or_default();
        format!("{},{:.6},{},{:.6}", self.epoch, self.train_accuracy, test, self.wall_time)
    }
}

/// Writes the extended literal vector of `sample` as one byte per literal:
/// `F` feature bits followed by their negations.
fn expand_literals(sample: &[u64], features: usize, out: &mut Vec<u8>) {
    out.clear();
    out.resize(2 * features, 0);
    let (pos, neg) = out.split_at_mut(features);
    for (i, (p, n)) in pos.iter_mut().zip(neg.iter_mut()).enumerate() {
        let bit = ((sample[i / 64] >> (i % 64)) & 1) as u8;
        *p = bit;
        *n = bit ^ 1;
    }
}

fn apply_type_ia(states: &mut [u8], literals: &[u8], l: u32, decrement: bool) {
    let dec = u8::from(decrement);
    let mut before = 0u32;
    let mut included = 0u32;
    for (s, &lit) in states.iter_mut().zip(literals) {
        // Reinforce included true literals, push false ones down.
        before += u32::from(*s >> 7);
        let inc = lit & (*s >> 7);
        let down = (lit ^ 1) & dec;
        *s = s.saturating_add(inc).saturating_sub(down);
        included += u32::from(*s >> 7);
    }
    if before >= l || included >= l {
        return;
    }
    // New inclusions stop as soon as the clause reaches L literals.
    for (s, &lit) in states.iter_mut().zip(literals) {
        if lit == 1 && *s < INCLUDE_THRESHOLD {
            *s += 1;
            if *s == INCLUDE_THRESHOLD {
                included += 1;
                if included >= l {
                    return;
                }
            }
        }
    }
}

fn apply_type_ii(states: &mut [u8], literals: &[u8]) {
    for (s, &lit) in states.iter_mut().zip(literals) {
        // Excluded automata sit below 128, so this cannot overflow.
        *s += (lit ^ 1) & ((*s >> 7) ^ 1);
    }
}

fn apply_type_ib<R: Rng + ?Sized>(states: &mut [u8], probability: f64, rng: &mut R) {
    // Below f64 resolution 1 - p rounds to 1 and the geometric sampler
    // never terminates; such a decrement could not be observed anyway.
    if probability < f64::EPSILON {
        return;
    }
    if probability >= 1.0 {
        states.iter_mut().for_each(|s| *s = s.saturating_sub(1));
        return;
    }
    // Gaps between Bernoulli(p) successes are geometric; skipping them draws
    // one variate per decrement instead of one per automaton.
    let gaps = Geometric::new(probability).expect("probability in (0, 1)");
    let mut i = usize::try_from(gaps.sample(rng)).unwrap_or(usize::MAX);
    while i < states.len() {
        states[i] = states[i].saturating_sub(1);
        let gap = usize::try_from(gaps.sample(rng)).unwrap_or(usize::MAX);
        i = i.saturating_add(gap).saturating_add(1);
    }
}

/// Deterministic Type Ia feedback.
///
/// True literals are incremented when the clause holds fewer than `l`
/// literals or the automaton is already included; false literals follow
/// `action`. Call only for a clause that did not fail on `sample`.
pub fn type_ia_feedback(clause: &mut Clause, sample: SampleRef<'_>, l: u32, action: FalseLiteralAction) -> Result<()> {
    check_width(clause.features(), sample.width())?;
    let mut literals = Vec::new();
    expand_literals(sample.words(), sample.width(), &mut literals);
    apply_type_ia(clause.states_mut(), &literals, l, action == FalseLiteralAction::Decrement);
    clause.sync_include_mask();
    Ok(())
}

/// Type Ib feedback: each automaton decrements independently with
/// probability `1/s`.
pub fn type_ib_feedback<R: Rng + ?Sized>(clause: &mut Clause, s: f64, rng: &mut R) -> Result<()> {
    if s.is_nan() || s < 1.0 {
        return Err(Error::InvalidHyperparameters(format!("S must be >= 1, got {s}")));
    }
    apply_type_ib(clause.states_mut(), 1.0 / s, rng);
    clause.sync_include_mask();
    Ok(())
}

/// Type II feedback: excluded automata of false literals move one step
/// towards inclusion.
pub fn type_ii_feedback(clause: &mut Clause, sample: SampleRef<'_>) -> Result<()> {
    check_width(clause.features(), sample.width())?;
    let mut literals = Vec::new();
    expand_literals(sample.words(), sample.width(), &mut literals);
    apply_type_ii(clause.states_mut(), &literals);
    clause.sync_include_mask();
    Ok(())
}

/// Feedback probability for a bank given its clamped training sum.
/// `target` banks are pushed up towards `T`, the others down towards `-T`.
pub fn feedback_probability(clamped: i64, t: u32, target: bool) -> f64 {
    let t = i64::from(t);
    let numerator = if target { t - clamped } else { t + clamped };
    numerator as f64 / (2 * t) as f64
}

/// Literal bytes of the current sample, expanded on first use.
struct LiteralCache<'a> {
    sample: &'a [u64],
    features: usize,
    buf: &'a mut Vec<u8>,
    ready: bool,
}

impl LiteralCache<'_> {
    fn get(&mut self) -> &[u8] {
        if !self.ready {
            expand_literals(self.sample, self.features, self.buf);
            self.ready = true;
        }
        self.buf
    }
}

struct BankUpdate<'a> {
    hyper: &'a Hyperparameters,
    decrement: bool,
}

impl BankUpdate<'_> {
    /// One sample's feedback to one bank. With `target`, positive clauses
    /// learn the sample (Ia / Ib) and negative clauses get Type II; otherwise
    /// the roles swap.
    fn apply(&self, bank: &mut ClauseBank, sample: &[u64], target: bool, rng: &mut ChaCha8Rng, scratch: &mut Vec<u8>) {
        let hyper = self.hyper;
        let sum = class_sum_unchecked(bank, hyper, sample, true);
        let p = feedback_probability(sum.clamped, hyper.t, target);
        if p <= 0.0 {
            return;
        }
        let features = bank.clauses.first().map_or(0, Clause::features);
        let mut literals = LiteralCache {
            sample,
            features,
            buf: scratch,
            ready: false,
        };
        for clause in &mut bank.clauses {
            if rng.random::<f64>() >= p {
                continue;
            }
            let votes = vote_unchecked(clause, sample, hyper.lf, true).votes;
            let learns_sample = (clause.polarity() > 0) == target;
            if learns_sample {
                if votes > 0 {
                    apply_type_ia(clause.states_mut(), literals.get(), hyper.l, self.decrement);
                } else {
                    apply_type_ib(clause.states_mut(), hyper.decrement_probability(), rng);
                }
            } else if votes > 0 {
                apply_type_ii(clause.states_mut(), literals.get());
            } else {
                continue;
            }
            clause.sync_include_mask();
        }
    }
}

/// Training state that outlives a single `fit` call: the sample-order RNG
/// and one RNG stream per bank.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: FeedbackConfig,
    order_rng: ChaCha8Rng,
    bank_rngs: Vec<ChaCha8Rng>,
    scratch: Vec<u8>,
    epochs_done: usize,
}

impl Trainer {
    pub fn new(model: &Model, config: FeedbackConfig) -> Self {
        let order_rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        let bank_rngs = (0..model.banks().len())
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
                rng.set_stream(b as u64 + 1);
                rng
            })
            .collect();
        Self {
            config,
            order_rng,
            bank_rngs,
            scratch: Vec::new(),
            epochs_done: 0,
        }
    }

    pub fn config(&self) -> &FeedbackConfig {
        &self.config
    }

    fn check_model(&self, model: &Model) -> Result<()> {
        if model.banks().len() != self.bank_rngs.len() {
            return Err(Error::InvalidArgument(format!(
                "trainer was built for {} banks, model has {}",
                self.bank_rngs.len(),
                model.banks().len()
            )));
        }
        Ok(())
    }

    /// Applies one labelled sample. Multiclass trains the label's bank as
    /// target and one uniformly drawn other class as negative; binary trains
    /// the shared bank as target for label 1 and negative for label 0.
    pub fn update_on_sample(&mut self, model: &mut Model, sample: SampleRef<'_>, label: usize) -> Result<()> {
        self.check_model(model)?;
        check_width(model.features(), sample.width())?;
        if label >= model.classes() {
            return Err(Error::LabelOutOfRange {
                label,
                classes: model.classes(),
            });
        }
        let hyper = *model.hyper();
        let update = BankUpdate {
            hyper: &hyper,
            decrement: self.config.false_literal_action == FalseLiteralAction::Decrement,
        };
        match model.mode() {
            Mode::Binary => {
                update.apply(
                    &mut model.banks_mut()[0],
                    sample.words(),
                    label == 1,
                    &mut self.bank_rngs[0],
                    &mut self.scratch,
                );
            }
            Mode::Multiclass => {
                let negative = draw_negative(&mut self.order_rng, label, model.classes());
                let banks = model.banks_mut();
                update.apply(&mut banks[label], sample.words(), true, &mut self.bank_rngs[label], &mut self.scratch);
                update.apply(
                    &mut banks[negative],
                    sample.words(),
                    false,
                    &mut self.bank_rngs[negative],
                    &mut self.scratch,
                );
            }
        }
        Ok(())
    }

    /// One pass over `data` in a freshly shuffled order.
    ///
    /// Banks are independent given the sample order and the drawn negative
    /// classes, so splitting them over `threads` workers gives the same
    /// bytes as a single thread.
    pub fn train_epoch(&mut self, model: &mut Model, data: &BitDataset, threads: usize) -> Result<()> {
        self.check_model(model)?;
        check_dataset(model, data)?;
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.order_rng);
        let negatives: Vec<usize> = match model.mode() {
            Mode::Binary => Vec::new(),
            Mode::Multiclass => order
                .iter()
                .map(|&i| draw_negative(&mut self.order_rng, data.label(i) as usize, model.classes()))
                .collect(),
        };

        let hyper = *model.hyper();
        let mode = model.mode();
        let update = BankUpdate {
            hyper: &hyper,
            decrement: self.config.false_literal_action == FalseLiteralAction::Decrement,
        };
        let run_banks = |banks: &mut [ClauseBank], rngs: &mut [ChaCha8Rng], scratch: &mut Vec<u8>| {
            for (bank, rng) in banks.iter_mut().zip(rngs.iter_mut()) {
                let class = bank.class_id as usize;
                for (k, &i) in order.iter().enumerate() {
                    let label = data.label(i) as usize;
                    let target = match mode {
                        Mode::Binary => label == 1,
                        Mode::Multiclass if label == class => true,
                        Mode::Multiclass if negatives[k] == class => false,
                        Mode::Multiclass => continue,
                    };
                    update.apply(bank, data.row(i), target, rng, scratch);
                }
            }
        };

        let threads = threads.max(1).min(model.banks().len());
        if threads == 1 {
            run_banks(model.banks_mut(), &mut self.bank_rngs, &mut self.scratch);
        } else {
            let per_worker = model.banks().len().div_ceil(threads);
            std::thread::scope(|scope| {
                let chunks = model
                    .banks_mut()
                    .chunks_mut(per_worker)
                    .zip(self.bank_rngs.chunks_mut(per_worker));
                for (banks, rngs) in chunks {
                    let run_banks = &run_banks;
                    scope.spawn(move || run_banks(banks, rngs, &mut Vec::new()));
                }
            });
        }
        self.epochs_done += 1;
        Ok(())
    }

    /// Trains for `epochs` epochs, evaluating train (and optional test)
    /// accuracy after each one. `on_epoch` sees every report as it is made.
    pub fn fit(
        &mut self,
        model: &mut Model,
        train: &BitDataset,
        epochs: usize,
        test: Option<&BitDataset>,
        threads: usize,
        mut on_epoch: impl FnMut(&EpochReport),
    ) -> Result<Vec<EpochReport>> {
        if train.is_empty() {
            return Err(Error::Empty("training dataset has no samples".into()));
        }
        check_dataset(model, train)?;
        if let Some(test) = test {
            check_dataset(model, test)?;
        }
        let mut reports = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let start = Instant::now();
            self.train_epoch(model, train, threads)?;
            let wall_time = start.elapsed().as_secs_f64();
            let packed = PackedModel::from_model(model);
            let report = EpochReport {
                epoch: self.epochs_done,
                train_accuracy: packed.accuracy(train, threads)?,
                test_accuracy: test.map(|t| packed.accuracy(t, threads)).transpose()?,
                wall_time,
            };
            on_epoch(&report);
            reports.push(report);
        }
        Ok(reports)
    }
}

/// Convenience wrapper: a fresh [`Trainer`] seeded from `config`.
pub fn fit(
    model: &mut Model,
    train: &BitDataset,
    epochs: usize,
    config: FeedbackConfig,
    test: Option<&BitDataset>,
) -> Result<Vec<EpochReport>> {
    Trainer::new(model, config).fit(model, train, epochs, test, 1, |_| {})
}

fn draw_negative(rng: &mut ChaCha8Rng, label: usize, classes: usize) -> usize {
    let k = rng.random_range(0..classes - 1);
    if k >= label {
        k + 1
    } else {
        k
    }
}

fn check_dataset(model: &Model, data: &BitDataset) -> Result<()> {
    check_width(model.features(), data.features())?;
    if data.classes() > model.classes() {
        return Err(Error::InvalidArgument(format!(
            "dataset has {} classes, model has {}",
            data.classes(),
            model.classes()
        )));
    }
    Ok(())
}
