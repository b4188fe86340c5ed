//! Automaton state, clause and bank layout, and the model file format.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::bits::{popcount, words_for};
use crate::booleanize::Descriptor;
use crate::error::{Error, Result};

/// States at or above this value select the include action.
pub const INCLUDE_THRESHOLD: u8 = 128;
/// Fresh automata start on the exclude side, one step from the boundary.
pub const INITIAL_STATE: u8 = INCLUDE_THRESHOLD - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// One shared bank; positive clauses vote for class 1, negative for class 0.
    Binary,
    /// One-vs-rest: one bank per class, argmax over class sums.
    Multiclass,
}

impl Mode {
    fn code(self) -> u8 {
        match self {
            Mode::Binary => 0,
            Mode::Multiclass => 1,
        }
    }

    fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Mode::Binary),
            1 => Ok(Mode::Multiclass),
            other => Err(Error::Malformed(format!("unknown mode code {other}"))),
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "binary" => Ok(Mode::Binary),
            "multiclass" => Ok(Mode::Multiclass),
            other => Err(Error::InvalidArgument(format!(
                "mode must be `binary` or `multiclass`, got `{other}`"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Binary => "binary",
            Mode::Multiclass => "multiclass",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    /// Vote threshold used by the feedback schedule.
    pub t: u32,
    /// Specificity; Type Ib decrements each automaton with probability `1/s`.
    pub s: f64,
    /// Maximum literals a clause may grow to through Type Ia.
    pub l: u32,
    /// Maximum literal failures: the vote ceiling of a fuzzy clause.
    pub lf: u32,
    pub clauses_per_class: u32,
}

impl Hyperparameters {
    pub fn validate(&self, features: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidHyperparameters(msg));
        if self.t == 0 {
            return bad("T must be at least 1".into());
        }
        if self.s.is_nan() || self.s < 1.0 || self.s.is_infinite() {
            return bad(format!("S must be a finite value >= 1, got {}", self.s));
        }
        if self.l == 0 {
            return bad("L must be at least 1".into());
        }
        if self.lf == 0 {
            return bad("LF must be at least 1".into());
        }
        if self.clauses_per_class == 0 {
            return bad("clauses per class must be at least 1".into());
        }
        if features > 0 && self.lf as usize > 2 * features {
            return bad(format!(
                "LF = {} exceeds the literal universe 2F = {}",
                self.lf,
                2 * features
            ));
        }
        Ok(())
    }

    /// Type Ib decrement probability.
    pub fn decrement_probability(&self) -> f64 {
        1.0 / self.s
    }
}

/// A conjunction over the `2F` literals of a sample: features `0..F` and
/// their negations `F..2F`, one automaton each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    states: Vec<u8>,
    /// Positive-literal mask words followed by negated-literal mask words,
    /// each half word-aligned with zero padding.
    include: Vec<u64>,
    literal_count: u32,
    polarity: i8,
}

impl Clause {
    pub fn new(features: usize, polarity: i8) -> Self {
        assert!(polarity == 1 || polarity == -1, "polarity must be +1 or -1");
        Self {
            states: vec![INITIAL_STATE; 2 * features],
            include: vec![0; 2 * words_for(features)],
            literal_count: 0,
            polarity,
        }
    }

    pub fn from_states(states: Vec<u8>, polarity: i8) -> Result<Self> {
        if !states.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "clause state vector must have even length, got {}",
                states.len()
            )));
        }
        let mut clause = Self::new(states.len() / 2, polarity);
        clause.states = states;
        clause.sync_include_mask();
        Ok(clause)
    }

    #[inline]
    pub fn features(&self) -> usize {
        self.states.len() / 2
    }

    #[inline]
    pub fn states(&self) -> &[u8] {
        &self.states
    }

    /// Raw state access. The include mask is stale until
    /// [`Clause::sync_include_mask`] runs.
    #[inline]
    pub(crate) fn states_mut(&mut self) -> &mut [u8] {
        &mut self.states
    }

    pub fn set_state(&mut self, j: usize, state: u8) {
        self.states[j] = state;
        self.sync_include_mask();
    }

    #[inline]
    pub fn polarity(&self) -> i8 {
        self.polarity
    }

    #[inline]
    pub fn literal_count(&self) -> u32 {
        self.literal_count
    }

    #[inline]
    pub fn include_mask(&self) -> &[u64] {
        &self.include
    }

    #[inline]
    pub fn include_pos(&self) -> &[u64] {
        &self.include[..self.include.len() / 2]
    }

    #[inline]
    pub fn include_neg(&self) -> &[u64] {
        &self.include[self.include.len() / 2..]
    }

    pub fn is_included(&self, j: usize) -> bool {
        let f = self.features();
        let (half, i) = if j < f {
            (self.include_pos(), j)
        } else {
            (self.include_neg(), j - f)
        };
        (half[i / 64] >> (i % 64)) & 1 == 1
    }

    /// Indices of included literals in the extended `2F` literal space.
    pub fn included_literals(&self) -> Vec<usize> {
        (0..self.states.len())
            .filter(|&j| self.states[j] >= INCLUDE_THRESHOLD)
            .collect()
    }

    /// Recomputes the include mask and literal count from the states.
    pub fn sync_include_mask(&mut self) {
        let f = self.features();
        let half = self.include.len() / 2;
        let (pos, neg) = self.include.split_at_mut(half);
        threshold_pack(&self.states[..f], pos);
        threshold_pack(&self.states[f..], neg);
        self.literal_count = popcount(&self.include);
    }
}

fn threshold_pack(states: &[u8], out: &mut [u64]) {
    for (word, chunk) in out.iter_mut().zip(states.chunks(64)) {
        let mut w = 0u64;
        for (i, &s) in chunk.iter().enumerate() {
            w |= u64::from(s >> 7) << i;
        }
        *word = w;
    }
}

/// The clauses voting for one class (or, in binary mode, for both classes
/// through their polarity).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClauseBank {
    pub class_id: u32,
    pub clauses: Vec<Clause>,
}

impl ClauseBank {
    /// Even positions are positive, odd negative. A bank of one clause is a
    /// single positive clause.
    fn new(class_id: u32, clause_count: usize, features: usize) -> Self {
        let clauses = (0..clause_count)
            .map(|i| Clause::new(features, if i % 2 == 0 { 1 } else { -1 }))
            .collect();
        Self { class_id, clauses }
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    mode: Mode,
    features: usize,
    classes: usize,
    hyper: Hyperparameters,
    banks: Vec<ClauseBank>,
    pub descriptor: Descriptor,
}

impl Model {
    /// Builds an untrained model with every automaton at [`INITIAL_STATE`].
    pub fn new(mode: Mode, features: usize, classes: usize, hyper: Hyperparameters) -> Result<Self> {
        if features == 0 {
            return Err(Error::InvalidArgument("feature count must be at least 1".into()));
        }
        if classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "at least 2 classes are required, got {classes}"
            )));
        }
        if mode == Mode::Binary && classes != 2 {
            return Err(Error::InvalidArgument(format!(
                "binary mode requires exactly 2 classes, got {classes}"
            )));
        }
        hyper.validate(features)?;
        let per_class = hyper.clauses_per_class as usize;
        let banks = match mode {
            Mode::Binary => vec![ClauseBank::new(1, 2 * per_class, features)],
            Mode::Multiclass => (0..classes)
                .map(|c| ClauseBank::new(c as u32, per_class, features))
                .collect(),
        };
        Ok(Self {
            mode,
            features,
            classes,
            hyper,
            banks,
            descriptor: Descriptor::None,
        })
    }

    /// Sets every automaton to `state` and resyncs the include masks. Lower
    /// starting states make each automaton integrate more feedback before
    /// its first inclusion.
    pub fn reset_states(&mut self, state: u8) {
        for clause in self.banks.iter_mut().flat_map(|b| b.clauses.iter_mut()) {
            clause.states_mut().fill(state);
            clause.sync_include_mask();
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn hyper(&self) -> &Hyperparameters {
        &self.hyper
    }

    pub fn banks(&self) -> &[ClauseBank] {
        &self.banks
    }

    pub(crate) fn banks_mut(&mut self) -> &mut [ClauseBank] {
        &mut self.banks
    }

    pub fn clause_count(&self) -> usize {
        self.banks.iter().map(ClauseBank::len).sum()
    }

    /// Size of the automaton state matrix: one byte per literal per clause.
    pub fn state_bytes(&self) -> usize {
        self.clause_count() * 2 * self.features
    }

    /// The whole state matrix, banks then clauses in order.
    pub fn state_matrix(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.state_bytes());
        for clause in self.banks.iter().flat_map(|b| &b.clauses) {
            out.extend_from_slice(clause.states());
        }
        out
    }

    /// Replaces the state matrix, laid out as [`Model::state_matrix`] returns it.
    pub fn set_state_matrix(&mut self, states: &[u8]) -> Result<()> {
        if states.len() != self.state_bytes() {
            return Err(Error::InvalidArgument(format!(
                "state matrix needs {} bytes, got {}",
                self.state_bytes(),
                states.len()
            )));
        }
        let width = 2 * self.features;
        let clauses = self.banks.iter_mut().flat_map(|b| b.clauses.iter_mut());
        for (clause, chunk) in clauses.zip(states.chunks_exact(width)) {
            clause.states_mut().copy_from_slice(chunk);
            clause.sync_include_mask();
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let descriptor = self.descriptor.to_bytes();
        let mut out = Vec::with_capacity(HEADER_LEN + descriptor.len() + self.state_bytes() + 4);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&[self.mode.code(), 0, 0, 0]);
        out.extend_from_slice(&(self.features as u64).to_le_bytes());
        out.extend_from_slice(&(self.classes as u32).to_le_bytes());
        out.extend_from_slice(&self.hyper.t.to_le_bytes());
        out.extend_from_slice(&self.hyper.s.to_le_bytes());
        out.extend_from_slice(&self.hyper.l.to_le_bytes());
        out.extend_from_slice(&self.hyper.lf.to_le_bytes());
        out.extend_from_slice(&self.hyper.clauses_per_class.to_le_bytes());
        out.extend_from_slice(&(descriptor.len() as u32).to_le_bytes());
        debug_assert_eq!(out.len(), HEADER_LEN);
        out.extend_from_slice(&descriptor);
        for clause in self.banks.iter().flat_map(|b| &b.clauses) {
            out.extend_from_slice(clause.states());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != MODEL_MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < HEADER_LEN + 4 {
            return Err(Error::Truncated(format!(
                "model header needs {} bytes, file has {}",
                HEADER_LEN + 4,
                bytes.len()
            )));
        }
        let mut r = Reader::new(&bytes[4..HEADER_LEN]);
        let version = r.u32();
        if version != MODEL_VERSION {
            return Err(Error::VersionMismatch {
                expected: MODEL_VERSION,
                found: version,
            });
        }
        let mode = Mode::from_code(r.bytes(4)[0])?;
        let features = usize::try_from(r.u64())
            .map_err(|_| Error::Malformed("feature count overflows usize".into()))?;
        let classes = r.u32() as usize;
        let hyper = Hyperparameters {
            t: r.u32(),
            s: r.f64(),
            l: r.u32(),
            lf: r.u32(),
            clauses_per_class: r.u32(),
        };
        let descriptor_len = r.u32() as usize;

        let mut model = Model::new(mode, features, classes, hyper)?;
        let expected = HEADER_LEN + descriptor_len + model.state_bytes() + 4;
        if bytes.len() < expected {
            return Err(Error::Truncated(format!(
                "model needs {expected} bytes, file has {}",
                bytes.len()
            )));
        }
        if bytes.len() > expected {
            return Err(Error::Malformed(format!(
                "{} trailing bytes after model",
                bytes.len() - expected
            )));
        }
        let body = &bytes[..expected - 4];
        let stored = u32::from_le_bytes(bytes[expected - 4..].try_into().unwrap());
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::ChecksumMismatch { stored, computed });
        }
        model.descriptor = Descriptor::from_bytes(&body[HEADER_LEN..HEADER_LEN + descriptor_len])?;
        let mut states = body[HEADER_LEN + descriptor_len..].chunks_exact(2 * features);
        for clause in model.banks.iter_mut().flat_map(|b| &mut b.clauses) {
            clause.states.copy_from_slice(states.next().unwrap());
            clause.sync_include_mask();
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = fs::File::create(path)?;
        file.write_all(&self.to_bytes())?;
        file.sync_all()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

pub const MODEL_MAGIC: &[u8; 4] = b"FPTM";
pub const MODEL_VERSION: u32 = 1;
/// magic, version, mode+pad, F, classes, T, S, L, LF, clauses/class, descriptor length
const HEADER_LEN: usize = 4 + 4 + 4 + 8 + 4 + 4 + 8 + 4 + 4 + 4 + 4;

/// Little-endian cursor over a slice whose length was checked up front.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn bytes(&mut self, n: usize) -> &'a [u8] {
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        s
    }

    pub(crate) fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.bytes(4).try_into().unwrap())
    }

    pub(crate) fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.bytes(8).try_into().unwrap())
    }

    pub(crate) fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.bytes(8).try_into().unwrap())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hyper(clauses: u32) -> Hyperparameters {
        Hyperparameters {
            t: 18,
            s: 1000.0,
            l: 64,
            lf: 64,
            clauses_per_class: clauses,
        }
    }

    #[test]
    fn binary_one_clause_per_class_is_fifty_kilobytes() {
        let m = Model::new(Mode::Binary, 12_800, 2, hyper(1)).unwrap();
        assert_eq!(m.clause_count(), 2);
        assert_eq!(m.state_bytes(), 51_200);
        assert_eq!(m.state_bytes() as f64 / 1024.0, 50.0);
        let polarities: Vec<i8> = m.banks()[0].clauses.iter().map(Clause::polarity).collect();
        assert_eq!(polarities, [1, -1]);
    }

    #[test]
    fn multiclass_sizes() {
        let h = Hyperparameters { lf: 1, l: 2, ..hyper(2) };
        let m = Model::new(Mode::Multiclass, 1, 2, h).unwrap();
        assert_eq!(m.clause_count(), 4);
        // 4 clauses x 2 literals x 1 byte
        assert_eq!(m.state_bytes(), 8);

        let h = Hyperparameters { t: 32, s: 2000.0, l: 100, lf: 10, clauses_per_class: 200 };
        let m = Model::new(Mode::Multiclass, 70_000, 2, h).unwrap();
        assert_eq!(m.clause_count(), 400);
        assert_eq!(m.state_bytes(), 56_000_000);
    }

    #[test]
    fn single_clause_multiclass_bank_is_positive() {
        let m = Model::new(Mode::Multiclass, 40, 3, hyper(1)).unwrap();
        for bank in m.banks() {
            assert_eq!(bank.len(), 1);
            assert_eq!(bank.clauses[0].polarity(), 1);
        }
    }

    #[test]
    fn fresh_model_is_all_exclude() {
        let m = Model::new(Mode::Multiclass, 100, 3, hyper(4)).unwrap();
        assert!(m.state_matrix().iter().all(|&s| s == INITIAL_STATE));
        for c in m.banks().iter().flat_map(|b| &b.clauses) {
            assert_eq!(c.literal_count(), 0);
            assert!(c.include_mask().iter().all(|&w| w == 0));
        }
    }

    #[test]
    fn construction_errors() {
        assert!(Model::new(Mode::Multiclass, 10, 1, hyper(1)).is_err());
        assert!(Model::new(Mode::Binary, 10, 3, hyper(1)).is_err());
        let zero_lf = Hyperparameters { lf: 0, ..hyper(1) };
        assert!(matches!(
            Model::new(Mode::Binary, 100, 2, zero_lf),
            Err(Error::InvalidHyperparameters(_))
        ));
        // LF = 64 > 2F = 20
        assert!(Model::new(Mode::Binary, 10, 2, hyper(1)).is_err());
        let low_s = Hyperparameters { s: 0.5, ..hyper(1) };
        assert!(Model::new(Mode::Binary, 100, 2, low_s).is_err());
    }

    #[test]
    fn sync_include_mask_cases() {
        let mut c = Clause::new(10, 1);
        c.sync_include_mask();
        assert_eq!(c.literal_count(), 0);

        c.set_state(3, 128);
        assert_eq!(c.include_pos()[0], 1 << 3);
        assert_eq!(c.include_neg()[0], 0);
        assert_eq!(c.literal_count(), 1);

        c.set_state(17, 255);
        assert!(c.is_included(17));
        assert_eq!(c.include_neg()[0], 1 << 7);
        assert_eq!(c.included_literals(), vec![3, 17]);
    }

    #[test]
    fn round_trip_fresh_model() {
        let m = Model::new(Mode::Binary, 300, 2, hyper(3)).unwrap();
        let bytes = m.to_bytes();
        let back = Model::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut m = Model::new(Mode::Multiclass, 40, 3, hyper(2)).unwrap();
        m.banks_mut()[1].clauses[0].set_state(5, 200);
        let bytes = m.to_bytes();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        let err = Model::from_bytes(&bad).unwrap_err();
        assert_eq!(err.to_string(), "bad magic");

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(Model::from_bytes(&bad), Err(Error::VersionMismatch { found: 9, .. })));

        assert!(matches!(
            Model::from_bytes(&bytes[..bytes.len() - 10]),
            Err(Error::Truncated(_))
        ));

        let mut bad = bytes.clone();
        let mid = bytes.len() - 20;
        bad[mid] ^= 1;
        assert!(matches!(Model::from_bytes(&bad), Err(Error::ChecksumMismatch { .. })));
    }
}
