//! Fuzzy clause evaluation and class-sum aggregation.
//!
//! A clause starts with `min(literal_count, LF)` votes (`LF` when it has no
//! literals or more than `LF`) and loses one vote per failed literal, clipped
//! at zero. With `LF = 1` this degenerates to the strict conjunction.

use crate::bits::SampleRef;
use crate::error::{Error, Result};
use crate::model::{Clause, ClauseBank, Hyperparameters, Mode, Model};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClauseVote {
    pub votes: u32,
    pub failed_count: u32,
    pub effective_limit: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassSum {
    pub raw: i64,
    /// `raw` clipped to `[-T, T]`; only the feedback schedule reads this.
    pub clamped: i64,
}

impl ClassSum {
    pub fn new(raw: i64, t: u32) -> Self {
        let t = i64::from(t);
        Self {
            raw,
            clamped: raw.clamp(-t, t),
        }
    }
}

/// Starting vote count of a clause with `literal_count` literals.
#[inline]
pub fn effective_limit(literal_count: u32, lf: u32) -> u32 {
    if literal_count == 0 || literal_count > lf {
        lf
    } else {
        literal_count
    }
}

/// Included literals that are false in `sample`: positive literals over
/// zero bits plus negated literals over one bits.
#[inline]
pub(crate) fn failed_literals(clause: &Clause, sample: &[u64]) -> u32 {
    let pos = clause.include_pos();
    let neg = clause.include_neg();
    let mut failed = 0;
    for ((&p, &n), &x) in pos.iter().zip(neg).zip(sample) {
        failed += (p & !x).count_ones() + (n & x).count_ones();
    }
    failed
}

#[inline]
pub(crate) fn vote_unchecked(clause: &Clause, sample: &[u64], lf: u32, training: bool) -> ClauseVote {
    let literal_count = clause.literal_count();
    let failed_count = failed_literals(clause, sample);
    let effective_limit = effective_limit(literal_count, lf);
    let votes = if literal_count == 0 && !training {
        0
    } else {
        effective_limit.saturating_sub(failed_count)
    };
    ClauseVote {
        votes,
        failed_count,
        effective_limit,
    }
}

/// Evaluates one clause on one sample.
///
/// An empty clause votes `LF` while training and `0` at inference, so
/// untrained clauses cannot decide predictions.
pub fn evaluate_clause(clause: &Clause, sample: SampleRef<'_>, lf: u32, training: bool) -> Result<ClauseVote> {
    check_width(clause.features(), sample.width())?;
    Ok(vote_unchecked(clause, sample.words(), lf, training))
}

/// A clause has failed entirely when it casts no votes.
#[inline]
pub fn clause_failed(vote: &ClauseVote) -> bool {
    vote.votes == 0
}

pub fn class_sum(bank: &ClauseBank, hyper: &Hyperparameters, sample: SampleRef<'_>, training: bool) -> Result<ClassSum> {
    if let Some(first) = bank.clauses.first() {
        check_width(first.features(), sample.width())?;
    }
    Ok(class_sum_unchecked(bank, hyper, sample.words(), training))
}

pub(crate) fn class_sum_unchecked(bank: &ClauseBank, hyper: &Hyperparameters, sample: &[u64], training: bool) -> ClassSum {
    let raw = bank
        .clauses
        .iter()
        .map(|c| i64::from(c.polarity()) * i64::from(vote_unchecked(c, sample, hyper.lf, training).votes))
        .sum();
    ClassSum::new(raw, hyper.t)
}

/// Inference-mode raw sums, one per bank.
pub fn class_sums(model: &Model, sample: SampleRef<'_>) -> Result<Vec<i64>> {
    check_width(model.features(), sample.width())?;
    Ok(model
        .banks()
        .iter()
        .map(|b| class_sum_unchecked(b, model.hyper(), sample.words(), false).raw)
        .collect())
}

/// Reference prediction straight from the clause masks.
///
/// Binary: class 1 iff the shared bank's raw sum is non-negative.
/// Multiclass: argmax of raw sums, ties to the lowest class id.
pub fn predict(model: &Model, sample: SampleRef<'_>) -> Result<usize> {
    let sums = class_sums(model, sample)?;
    Ok(decide(model.mode(), &sums))
}

pub(crate) fn decide(mode: Mode, sums: &[i64]) -> usize {
    match mode {
        Mode::Binary => usize::from(sums[0] >= 0),
        Mode::Multiclass => argmax_first(sums),
    }
}

pub(crate) fn argmax_first(sums: &[i64]) -> usize {
    let mut best = 0;
    for (i, &s) in sums.iter().enumerate().skip(1) {
        if s > sums[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_width(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::WidthMismatch { expected, actual });
    }
    Ok(())
}
