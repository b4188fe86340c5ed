//! End-to-end operations shared by the CLI and the Python bindings, so both
//! produce byte-identical results for equal inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::booleanize::{Descriptor, ImageBooleanizer, TextBooleanizer};
use crate::dataset::{BitDataset, ImageSet, LabeledCorpus};
use crate::error::{Error, Result};
use crate::model::{Hyperparameters, Mode, Model, INITIAL_STATE};
use crate::heuristics::suggest_t;
use crate::presets::{self, Preset};
use crate::train::{EpochReport, FalseLiteralAction, FeedbackConfig, Trainer};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub mode: Mode,
    pub hyper: Hyperparameters,
    pub epochs: usize,
    pub seed: u64,
    pub threads: usize,
    pub false_literal_action: FalseLiteralAction,
    pub initial_state: u8,
}

impl TrainConfig {
    pub fn from_preset(preset: &Preset) -> Self {
        Self {
            mode: preset.mode,
            hyper: preset.hyper,
            epochs: preset.epochs,
            seed: DEFAULT_SEED,
            threads: 1,
            false_literal_action: FalseLiteralAction::Decrement,
            initial_state: INITIAL_STATE,
        }
    }
}

/// Training settings as a user states them: an optional preset plus explicit
/// values that override it. `t` falls back to the suggested threshold.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigOverrides {
    pub preset: Option<String>,
    pub mode: Option<Mode>,
    pub clauses: Option<u32>,
    pub t: Option<u32>,
    pub s: Option<f64>,
    pub l: Option<u32>,
    pub lf: Option<u32>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub false_literal_action: Option<FalseLiteralAction>,
    pub initial_state: Option<u8>,
}

impl ConfigOverrides {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let base = self.preset.as_deref().map(lookup_preset).transpose()?;
        let missing = |name: &str| Error::InvalidArgument(format!("`{name}` is required without a preset"));
        let mode = self.mode.or(base.map(|p| p.mode)).ok_or_else(|| missing("mode"))?;
        let clauses = self.clauses.or(base.map(|p| p.hyper.clauses_per_class)).ok_or_else(|| missing("clauses"))?;
        let lf = self.lf.or(base.map(|p| p.hyper.lf)).ok_or_else(|| missing("lf"))?;
        let t = match self.t.or(base.map(|p| p.hyper.t)) {
            Some(t) => t,
            None => suggest_t(clauses, lf, mode)?.t,
        };
        let hyper = Hyperparameters {
            t,
            s: self.s.or(base.map(|p| p.hyper.s)).ok_or_else(|| missing("s"))?,
            l: self.l.or(base.map(|p| p.hyper.l)).ok_or_else(|| missing("l"))?,
            lf,
            clauses_per_class: clauses,
        };
        hyper.validate(0)?;
        let threads = self.threads.unwrap_or(1);
        if threads == 0 {
            return Err(Error::InvalidArgument("threads must be at least 1".into()));
        }
        Ok(TrainConfig {
            mode,
            hyper,
            epochs: self.epochs.or(base.map(|p| p.epochs)).ok_or_else(|| missing("epochs"))?,
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            threads,
            false_literal_action: self.false_literal_action.unwrap_or_default(),
            initial_state: self.initial_state.unwrap_or(INITIAL_STATE),
        })
    }
}

pub fn lookup_preset(name: &str) -> Result<&'static Preset> {
    presets::preset(name).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "unknown preset `{name}` (known: {})",
            presets::names().collect::<Vec<_>>().join(", ")
        ))
    })
}

/// Builds a model sized for `train` and fits it. `epochs == 0` returns the
/// untrained model.
pub fn train(
    config: &TrainConfig,
    train: &BitDataset,
    test: Option<&BitDataset>,
    descriptor: Descriptor,
    on_epoch: impl FnMut(&EpochReport),
) -> Result<(Model, Vec<EpochReport>)> {
    let classes = match config.mode {
        Mode::Binary if train.classes() > 2 => {
            return Err(Error::InvalidArgument(format!(
                "binary mode needs a 2-class dataset, got {} classes",
                train.classes()
            )))
        }
        Mode::Binary => 2,
        Mode::Multiclass => train.classes(),
    };
    if let Some(f) = descriptor.feature_count() {
        if f != train.features() {
            return Err(Error::WidthMismatch {
                expected: f,
                actual: train.features(),
            });
        }
    }
    let mut model = Model::new(config.mode, train.features(), classes, config.hyper)?;
    model.descriptor = descriptor;
    if config.initial_state != INITIAL_STATE {
        model.reset_states(config.initial_state);
    }
    if config.epochs == 0 {
        return Ok((model, Vec::new()));
    }
    let feedback = FeedbackConfig {
        false_literal_action: config.false_literal_action,
        rng_seed: config.seed,
    };
    let mut trainer = Trainer::new(&model, feedback);
    let reports = trainer.fit(&mut model, train, config.epochs, test, config.threads, on_epoch)?;
    Ok((model, reports))
}

pub fn transform_corpus(booleanizer: &TextBooleanizer, corpus: &LabeledCorpus, classes: usize) -> Result<BitDataset> {
    let mut data = BitDataset::new(booleanizer.feature_count(), classes);
    for (doc, &label) in corpus.documents.iter().zip(&corpus.labels) {
        data.push(booleanizer.transform(doc).view(), label)?;
    }
    Ok(data)
}

pub fn transform_images(booleanizer: &ImageBooleanizer, images: &ImageSet, classes: usize) -> Result<BitDataset> {
    let mut data = BitDataset::new(booleanizer.feature_count(), classes);
    for i in 0..images.len() {
        data.push(booleanizer.transform(images.image(i))?.view(), u32::from(images.labels[i]))?;
    }
    Ok(data)
}

/// Fits a text booleanizer on `train` and converts both splits.
pub fn booleanize_text(
    train: &LabeledCorpus,
    test: Option<&LabeledCorpus>,
    vocab_size: usize,
    max_ngram: usize,
    features: usize,
) -> Result<(Descriptor, BitDataset, Option<BitDataset>)> {
    let booleanizer = TextBooleanizer::fit(&train.documents, vocab_size, max_ngram, features)?;
    let classes = train.labels.iter().chain(test.iter().flat_map(|t| &t.labels)).max().map_or(2, |&m| m as usize + 1).max(2);
    let train_bits = transform_corpus(&booleanizer, train, classes)?;
    let test_bits = test.map(|t| transform_corpus(&booleanizer, t, classes)).transpose()?;
    Ok((Descriptor::Text(booleanizer), train_bits, test_bits))
}

/// Fits an image booleanizer with the default kernels on `train` and
/// converts both splits.
pub fn booleanize_images(
    train: &ImageSet,
    test: Option<&ImageSet>,
    bits_per_map: usize,
) -> Result<(Descriptor, BitDataset, Option<BitDataset>)> {
    let booleanizer = ImageBooleanizer::fit(train, crate::booleanize::default_kernels(), bits_per_map)?;
    let classes = train.classes().max(test.map_or(0, ImageSet::classes)).max(2);
    let train_bits = transform_images(&booleanizer, train, classes)?;
    let test_bits = test.map(|t| transform_images(&booleanizer, t, classes)).transpose()?;
    Ok((Descriptor::Image(booleanizer), train_bits, test_bits))
}

/// Seeded random samples with each bit set with probability `density`.
pub fn random_dataset(features: usize, samples: usize, classes: usize, density: f64, seed: u64) -> BitDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = BitDataset::new(features, classes);
    let mut bits = vec![false; features];
    for _ in 0..samples {
        bits.iter_mut().for_each(|b| *b = rng.random_bool(density));
        let label = rng.random_range(0..classes as u32);
        data.push(crate::bits::BitSample::from_bools(&bits).view(), label)
            .expect("width and label in range");
    }
    data
}
