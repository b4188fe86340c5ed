use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::bits::BitSample;
use crate::error::{Error, Result};

/// Word ids are packed into 16-bit lanes of a `u64`, so n-grams are capped
/// at four words over a 65,535-word vocabulary.
const MAX_VOCAB: usize = u16::MAX as usize;
const MAX_NGRAM: usize = 4;

/// Lowercased alphanumeric tokens. Apostrophes are dropped inside words,
/// every other non-alphanumeric character separates tokens.
pub fn tokenize(document: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in document.replace("<br />", " ").chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if ch == '\'' {
            continue;
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct StoredText {
    vocab_size: usize,
    max_ngram: usize,
    vocabulary: Vec<String>,
    features: Vec<Vec<u32>>,
}

/// Bag-of-n-grams presence features over a document-frequency vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(from = "StoredText", into = "StoredText")]
pub struct TextBooleanizer {
    stored: StoredText,
    word_ids: HashMap<String, u32>,
    feature_ids: HashMap<u64, u32>,
}

impl PartialEq for TextBooleanizer {
    fn eq(&self, other: &Self) -> bool {
        self.stored == other.stored
    }
}

impl From<StoredText> for TextBooleanizer {
    fn from(stored: StoredText) -> Self {
        let word_ids = stored
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        let feature_ids = stored
            .features
            .iter()
            .enumerate()
            .map(|(i, ids)| (pack(ids), i as u32))
            .collect();
        Self {
            stored,
            word_ids,
            feature_ids,
        }
    }
}

impl From<TextBooleanizer> for StoredText {
    fn from(t: TextBooleanizer) -> Self {
        t.stored
    }
}

fn pack(ids: &[u32]) -> u64 {
    ids.iter()
        .enumerate()
        .fold(0u64, |key, (k, &id)| key | (u64::from(id) + 1) << (16 * k))
}

fn unpack(mut key: u64) -> Vec<u32> {
    let mut ids = Vec::new();
    while key != 0 {
        ids.push((key & 0xffff) as u32 - 1);
        key >>= 16;
    }
    ids
}

/// Packed keys of every n-gram (n <= max_ngram) made only of in-vocabulary
/// words.
fn ngram_keys(ids: &[Option<u32>], max_ngram: usize, mut emit: impl FnMut(u64)) {
    for start in 0..ids.len() {
        let mut key = 0u64;
        for (k, id) in ids[start..].iter().take(max_ngram).enumerate() {
            let Some(id) = id else { break };
            key |= (u64::from(*id) + 1) << (16 * k);
            emit(key);
        }
    }
}

impl TextBooleanizer {
    /// Fits the vocabulary (top `vocab_size` words by document frequency) and
    /// selects the `feature_count` most frequent n-grams over it. Ties are
    /// broken lexicographically on the space-joined n-gram.
    pub fn fit<S: AsRef<str>>(corpus: &[S], vocab_size: usize, max_ngram: usize, feature_count: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("text corpus".into()));
        }
        if vocab_size == 0 || vocab_size > MAX_VOCAB {
            return Err(Error::InvalidArgument(format!(
                "vocabulary size must be in 1..={MAX_VOCAB}, got {vocab_size}"
            )));
        }
        if max_ngram == 0 || max_ngram > MAX_NGRAM {
            return Err(Error::InvalidArgument(format!(
                "max n-gram must be in 1..={MAX_NGRAM}, got {max_ngram}"
            )));
        }
        if feature_count == 0 {
            return Err(Error::InvalidArgument("feature count must be at least 1".into()));
        }
        let docs: Vec<Vec<String>> = corpus.iter().map(|d| tokenize(d.as_ref())).collect();

        let mut word_df: HashMap<&str, u32> = HashMap::new();
        for doc in &docs {
            let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for w in seen {
                *word_df.entry(w).or_default() += 1;
            }
        }
        let mut words: Vec<(&str, u32)> = word_df.into_iter().collect();
        words.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        words.truncate(vocab_size);
        let vocabulary: Vec<String> = words.iter().map(|(w, _)| (*w).to_owned()).collect();
        let word_ids: HashMap<&str, u32> = vocabulary.iter().enumerate().map(|(i, w)| (w.as_str(), i as u32)).collect();

        let mut ngram_df: HashMap<u64, u32> = HashMap::new();
        let mut keys = Vec::new();
        for doc in &docs {
            let ids: Vec<Option<u32>> = doc.iter().map(|w| word_ids.get(w.as_str()).copied()).collect();
            keys.clear();
            ngram_keys(&ids, max_ngram, |k| keys.push(k));
            keys.sort_unstable();
            keys.dedup();
            for &k in &keys {
                *ngram_df.entry(k).or_default() += 1;
            }
        }
        if ngram_df.len() < feature_count {
            return Err(Error::InvalidArgument(format!(
                "corpus yields {} candidate n-grams, fewer than the {feature_count} features requested",
                ngram_df.len()
            )));
        }

        let mut candidates: Vec<(u32, u64)> = ngram_df.into_iter().map(|(key, df)| (df, key)).collect();
        // Only the boundary document frequency needs the string tie-break.
        let (_, &mut (cutoff, _), _) = candidates.select_nth_unstable_by(feature_count - 1, |a, b| b.0.cmp(&a.0));
        let text_of = |key: u64| -> String {
            unpack(key)
                .iter()
                .map(|&id| vocabulary[id as usize].as_str())
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut chosen: Vec<(u32, String, u64)> = candidates
            .iter()
            .filter(|(df, _)| *df >= cutoff)
            .map(|&(df, key)| (df, text_of(key), key))
            .collect();
        chosen.sort_unstable_by(|a, b| match b.0.cmp(&a.0) {
            Ordering::Equal => a.1.cmp(&b.1),
            other => other,
        });
        chosen.truncate(feature_count);

        Ok(StoredText {
            vocab_size,
            max_ngram,
            vocabulary,
            features: chosen.into_iter().map(|(_, _, key)| unpack(key)).collect(),
        }
        .into())
    }

    pub fn feature_count(&self) -> usize {
        self.stored.features.len()
    }

    pub fn max_ngram(&self) -> usize {
        self.stored.max_ngram
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.stored.vocabulary
    }

    /// Feature `j` as its space-joined words.
    pub fn feature_text(&self, j: usize) -> String {
        self.stored.features[j]
            .iter()
            .map(|&id| self.stored.vocabulary[id as usize].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Presence bits: bit `j` is set iff feature n-gram `j` occurs in the
    /// document.
    pub fn transform(&self, document: &str) -> BitSample {
        let ids: Vec<Option<u32>> = tokenize(document)
            .iter()
            .map(|w| self.word_ids.get(w.as_str()).copied())
            .collect();
        let mut sample = BitSample::zeros(self.feature_count());
        ngram_keys(&ids, self.stored.max_ngram, |k| {
            if let Some(&j) = self.feature_ids.get(&k) {
                sample.set(j as usize, true);
            }
        });
        sample
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("Don't STOP, it's<br />fine!!"), ["dont", "stop", "its", "fine"]);
        assert!(tokenize(" ... ").is_empty());
    }

    #[test]
    fn tie_break_is_lexicographic() {
        let t = TextBooleanizer::fit(&["a b", "a c"], 3, 1, 2).unwrap();
        assert_eq!(t.feature_text(0), "a");
        assert_eq!(t.feature_text(1), "b");
    }

    #[test]
    fn too_few_candidates() {
        assert!(TextBooleanizer::fit(&["a b"], 10, 1, 3).is_err());
        assert!(TextBooleanizer::fit::<&str>(&[], 10, 1, 1).is_err());
    }

    #[test]
    fn ngrams_skip_out_of_vocabulary_words() {
        // vocab of 2 keeps "x" and "y"; "z" breaks n-grams.
        let corpus = ["x y z", "x y", "x z y"];
        let t = TextBooleanizer::fit(&corpus, 2, 2, 3).unwrap();
        let feats: Vec<String> = (0..3).map(|j| t.feature_text(j)).collect();
        assert_eq!(feats, ["x", "y", "x y"]);
        let s = t.transform("y x");
        assert_eq!(s.to_bools(), [true, true, false]);
        let s = t.transform("x z y");
        assert_eq!(s.to_bools(), [true, true, false]);
    }

    #[test]
    fn no_vocabulary_words_gives_zero_sample() {
        let t = TextBooleanizer::fit(&["good film", "bad film"], 10, 2, 3).unwrap();
        assert_eq!(t.transform("nothing here").count_ones(), 0);
    }

    #[test]
    fn serde_round_trip() {
        let t = TextBooleanizer::fit(&["good film", "bad film", "good good"], 10, 2, 3).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: TextBooleanizer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.transform("good film"), t.transform("good film"));
    }
}
