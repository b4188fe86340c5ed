//! Named experiment configurations.

use crate::model::{Hyperparameters, Mode};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PresetInput {
    Text {
        vocab_size: usize,
        max_ngram: usize,
        features: usize,
    },
    Image {
        bits_per_map: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub mode: Mode,
    pub hyper: Hyperparameters,
    pub epochs: usize,
    pub input: PresetInput,
}

const IMDB_BINARY_TEXT: PresetInput = PresetInput::Text {
    vocab_size: 40_000,
    max_ngram: 4,
    features: 12_800,
};

const IMDB_MULTI_TEXT: PresetInput = PresetInput::Text {
    vocab_size: 65_535,
    max_ngram: 4,
    features: 70_000,
};

const FMNIST_IMAGE: PresetInput = PresetInput::Image { bits_per_map: 4 };

const IMDB_OPTIMAL: Hyperparameters = Hyperparameters {
    t: 32,
    s: 2000.0,
    l: 100,
    lf: 10,
    clauses_per_class: 200,
};

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "imdb-binary-1c",
        mode: Mode::Binary,
        hyper: Hyperparameters {
            t: 18,
            s: 1000.0,
            l: 64,
            lf: 64,
            clauses_per_class: 1,
        },
        epochs: 1000,
        input: IMDB_BINARY_TEXT,
    },
    Preset {
        name: "imdb-optimal-200c",
        mode: Mode::Multiclass,
        hyper: IMDB_OPTIMAL,
        epochs: 200,
        input: IMDB_MULTI_TEXT,
    },
    Preset {
        name: "imdb-optimal-200c-t320",
        mode: Mode::Multiclass,
        hyper: Hyperparameters { t: 320, ..IMDB_OPTIMAL },
        epochs: 200,
        input: IMDB_MULTI_TEXT,
    },
    Preset {
        name: "imdb-optimal-200c-s200",
        mode: Mode::Multiclass,
        hyper: Hyperparameters { s: 200.0, ..IMDB_OPTIMAL },
        epochs: 200,
        input: IMDB_MULTI_TEXT,
    },
    Preset {
        name: "imdb-optimal-200c-lf100",
        mode: Mode::Multiclass,
        hyper: Hyperparameters { lf: 100, ..IMDB_OPTIMAL },
        epochs: 200,
        input: IMDB_MULTI_TEXT,
    },
    Preset {
        name: "fmnist-tiny",
        mode: Mode::Multiclass,
        hyper: Hyperparameters {
            t: 80,
            s: 1000.0,
            l: 1200,
            lf: 1200,
            clauses_per_class: 2,
        },
        epochs: 1000,
        input: FMNIST_IMAGE,
    },
    Preset {
        name: "fmnist-small",
        mode: Mode::Multiclass,
        hyper: Hyperparameters {
            t: 100,
            s: 700.0,
            l: 200,
            lf: 200,
            clauses_per_class: 20,
        },
        epochs: 1000,
        input: FMNIST_IMAGE,
    },
];

pub fn preset(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.name)
}

impl Preset {
    /// Feature width this preset's booleanizer produces on 28x28 images with
    /// the default five maps, or the text feature count.
    pub fn feature_count(&self) -> usize {
        match self.input {
            PresetInput::Text { features, .. } => features,
            PresetInput::Image { bits_per_map } => 5 * 28 * 28 * bits_per_map,
        }
    }

    pub fn classes(&self) -> usize {
        match self.input {
            PresetInput::Text { .. } => 2,
            PresetInput::Image { .. } => 10,
        }
    }
}
