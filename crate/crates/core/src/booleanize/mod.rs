//! Raw data to fixed-width bit vectors.

mod image;
mod text;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use image::{default_kernels, ImageBooleanizer, Kernel};
pub use text::{tokenize, TextBooleanizer};

/// The pipeline that produced a model's input bits, stored inside the model
/// file so raw inputs can be predicted end to end.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Descriptor {
    #[default]
    None,
    Text(TextBooleanizer),
    Image(ImageBooleanizer),
}

impl Descriptor {
    pub fn feature_count(&self) -> Option<usize> {
        match self {
            Descriptor::None => None,
            Descriptor::Text(t) => Some(t.feature_count()),
            Descriptor::Image(i) => Some(i.feature_count()),
        }
    }

    /// Empty for [`Descriptor::None`], JSON otherwise.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Descriptor::None => Vec::new(),
            other => serde_json::to_vec(other).expect("descriptor serializes"),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.is_empty() {
            return Ok(Descriptor::None);
        }
        serde_json::from_slice(bytes).map_err(|e| Error::Descriptor(e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
