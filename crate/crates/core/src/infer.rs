//! Batch inference over packed clause masks.
//!
//! Each clause keeps its positive and negated include masks as `u64` words.
//! Failed literals are `popcount(pos & !x) + popcount(neg & x)`, so a clause
//! costs two popcounts per sample word and no per-literal branches.

use std::time::Instant;

use crate::bits::SampleRef;
use crate::dataset::BitDataset;
use crate::error::Result;
use crate::eval::{check_width, decide, effective_limit};
use crate::model::{Mode, Model, INCLUDE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ClauseMeta {
    literal_count: u32,
    effective_limit: u32,
    polarity: i8,
}

/// Borrowed view of one packed clause.
#[derive(Debug, Clone, Copy)]
pub struct PackedClause<'a> {
    pub include_pos: &'a [u64],
    pub include_neg: &'a [u64],
    pub literal_count: u32,
    pub effective_limit: u32,
    pub polarity: i8,
}

impl PackedClause<'_> {
    /// Inference votes: empty clauses vote 0.
    #[inline]
    pub fn votes(&self, sample: &[u64]) -> u32 {
        if self.literal_count == 0 {
            return 0;
        }
        self.effective_limit.saturating_sub(failed_count(self, sample))
    }
}

/// Included literals that are false in `sample`. `sample` must have zero
/// padding bits.
#[inline]
pub fn failed_count(clause: &PackedClause<'_>, sample: &[u64]) -> u32 {
    let mut failed = 0;
    for ((&p, &n), &x) in clause.include_pos.iter().zip(clause.include_neg).zip(sample) {
        failed += (p & !x).count_ones() + (n & x).count_ones();
    }
    failed
}

#[derive(Debug, Clone, PartialEq)]
struct PackedBank {
    /// Per clause: `words` positive-mask words then `words` negated-mask words.
    masks: Vec<u64>,
    meta: Vec<ClauseMeta>,
}

/// Immutable inference-only snapshot of a [`Model`].
#[derive(Debug, Clone, PartialEq)]
pub struct PackedModel {
    mode: Mode,
    features: usize,
    classes: usize,
    words: usize,
    banks: Vec<PackedBank>,
}

impl PackedModel {
    pub fn from_model(model: &Model) -> Self {
        let lf = model.hyper().lf;
        let banks = model
            .banks()
            .iter()
            .map(|bank| {
                let mut masks = Vec::with_capacity(bank.len() * 2 * crate::bits::words_for(model.features()));
                let meta = bank
                    .clauses
                    .iter()
                    .map(|c| {
                        masks.extend_from_slice(c.include_pos());
                        masks.extend_from_slice(c.include_neg());
                        ClauseMeta {
                            literal_count: c.literal_count(),
                            effective_limit: effective_limit(c.literal_count(), lf),
                            polarity: c.polarity(),
                        }
                    })
                    .collect();
                PackedBank { masks, meta }
            })
            .collect();
        Self {
            mode: model.mode(),
            features: model.features(),
            classes: model.classes(),
            words: crate::bits::words_for(model.features()),
            banks,
        }
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn bank_count(&self) -> usize {
        self.banks.len()
    }

    pub fn clause_count(&self, bank: usize) -> usize {
        self.banks[bank].meta.len()
    }

    pub fn clause(&self, bank: usize, index: usize) -> PackedClause<'_> {
        let b = &self.banks[bank];
        let m = b.meta[index];
        let base = index * 2 * self.words;
        PackedClause {
            include_pos: &b.masks[base..base + self.words],
            include_neg: &b.masks[base + self.words..base + 2 * self.words],
            literal_count: m.literal_count,
            effective_limit: m.effective_limit,
            polarity: m.polarity,
        }
    }

    #[inline(always)]
    fn bank_sum(&self, bank: &PackedBank, sample: &[u64]) -> i64 {
        let stride = 2 * self.words;
        let mut sum = 0i64;
        for (masks, meta) in bank.masks.chunks_exact(stride).zip(&bank.meta) {
            if meta.literal_count == 0 {
                continue;
            }
            let (pos, neg) = masks.split_at(self.words);
            let mut failed = 0u32;
            for ((&p, &n), &x) in pos.iter().zip(neg).zip(sample) {
                failed += (p & !x).count_ones() + (n & x).count_ones();
            }
            sum += i64::from(meta.polarity) * i64::from(meta.effective_limit.saturating_sub(failed));
        }
        sum
    }

    #[inline(always)]
    fn predict_words(&self, sample: &[u64]) -> usize {
        match self.mode {
            Mode::Binary => usize::from(self.bank_sum(&self.banks[0], sample) >= 0),
            Mode::Multiclass => {
                let mut best = 0;
                let mut best_sum = i64::MIN;
                for (c, bank) in self.banks.iter().enumerate() {
                    let s = self.bank_sum(bank, sample);
                    if s > best_sum {
                        best = c;
                        best_sum = s;
                    }
                }
                best
            }
        }
    }

    pub fn class_sums(&self, sample: SampleRef<'_>) -> Result<Vec<i64>> {
        check_width(self.features, sample.width())?;
        Ok(self.banks.iter().map(|b| self.bank_sum(b, sample.words())).collect())
    }

    pub fn predict(&self, sample: SampleRef<'_>) -> Result<usize> {
        check_width(self.features, sample.width())?;
        Ok(self.predict_words(sample.words()))
    }

    /// Predicts `n` packed rows laid out back to back into `out`.
    fn predict_rows(&self, rows: &[u64], out: &mut [u32]) {
        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("popcnt") && std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports popcnt, checked just above.
            unsafe { self.predict_rows_popcnt(rows, out) };
            return;
        }
        self.predict_rows_portable(rows, out);
    }

    /// The portable loop recompiled with the hardware popcount instruction,
    /// which the baseline x86-64 target does not assume.
    #[cfg(target_arch = "x86_64")]
    #[target_feature(enable = "popcnt,avx2")]
    fn predict_rows_popcnt(&self, rows: &[u64], out: &mut [u32]) {
        self.predict_rows_portable(rows, out);
    }

    #[inline(always)]
    fn predict_rows_portable(&self, rows: &[u64], out: &mut [u32]) {
        for (row, label) in rows.chunks_exact(self.words).zip(out.iter_mut()) {
            *label = self.predict_words(row) as u32;
        }
    }

    /// Labels for every sample, with samples split evenly over `threads`
    /// workers that each own a slice of the output.
    pub fn predict_batch(&self, data: &BitDataset, threads: usize) -> Result<Vec<u32>> {
        check_width(self.features, data.features())?;
        let n = data.len();
        let mut out = vec![0u32; n];
        if n == 0 {
            return Ok(out);
        }
        let threads = threads.clamp(1, n);
        if threads == 1 || self.words == 0 {
            self.predict_rows(data.rows(), &mut out);
            return Ok(out);
        }
        let per_worker = n.div_ceil(threads);
        std::thread::scope(|scope| {
            for (rows, labels) in data
                .rows()
                .chunks(per_worker * self.words)
                .zip(out.chunks_mut(per_worker))
            {
                scope.spawn(move || self.predict_rows(rows, labels));
            }
        });
        Ok(out)
    }

    pub fn accuracy(&self, data: &BitDataset, threads: usize) -> Result<f64> {
        if data.is_empty() {
            return Ok(0.0);
        }
        let predicted = self.predict_batch(data, threads)?;
        let correct = predicted.iter().zip(data.labels()).filter(|(p, l)| p == l).count();
        Ok(correct as f64 / data.len() as f64)
    }

    /// Times `repetitions` batch predictions after one warm-up pass and
    /// reports the median.
    pub fn benchmark(&self, data: &BitDataset, threads: usize, repetitions: usize) -> Result<(Vec<u32>, ThroughputReport)> {
        let labels = self.predict_batch(data, threads)?;
        let times = time_repetitions(repetitions, || {
            std::hint::black_box(self.predict_batch(data, threads).map(|_| ()))
        })?;
        let report = ThroughputReport::from_median(&times, data.len(), self.features, threads);
        Ok((labels, report))
    }
}

fn time_repetitions(repetitions: usize, mut run: impl FnMut() -> Result<()>) -> Result<Vec<f64>> {
    let mut times = Vec::with_capacity(repetitions.max(1));
    for _ in 0..repetitions.max(1) {
        let start = Instant::now();
        run()?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(times)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputReport {
    pub predictions_per_second: f64,
    /// Input bytes consumed per second: `predictions_per_second * F / 8`.
    pub bytes_per_second: f64,
    pub batch_size: usize,
    pub threads: usize,
    pub features: usize,
    pub median_seconds: f64,
}

impl ThroughputReport {
    pub const CSV_HEADER: &'static str = "predictions_per_second,bytes_per_second,batch_size,threads";

    pub fn from_median(times: &[f64], batch_size: usize, features: usize, threads: usize) -> Self {
        let mut sorted = times.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median_seconds = sorted[sorted.len() / 2].max(f64::MIN_POSITIVE);
        let predictions_per_second = batch_size as f64 / median_seconds;
        Self {
            predictions_per_second,
            bytes_per_second: Self::bytes_for(predictions_per_second, features),
            batch_size,
            threads,
            features,
            median_seconds,
        }
    }

    #[inline]
    pub fn bytes_for(predictions_per_second: f64, features: usize) -> f64 {
        predictions_per_second * features as f64 / 8.0
    }

    pub fn csv_line(&self) -> String {
        format!(
            "{:.1},{:.1},{},{}",
            self.predictions_per_second, self.bytes_per_second, self.batch_size, self.threads
        )
    }
}

/// Unpacked baseline: one byte-state comparison and one literal lookup per
/// literal per clause. Only used to measure the packed engine against.
pub mod naive {
    use super::*;

    /// A dataset unpacked to one `bool` per feature.
    pub fn unpack(data: &BitDataset) -> Vec<Vec<bool>> {
        (0..data.len())
            .map(|i| {
                let s = data.sample(i);
                (0..data.features()).map(|j| s.get(j)).collect()
            })
            .collect()
    }

    pub fn predict(model: &Model, sample: &[bool]) -> usize {
        let f = model.features();
        let lf = model.hyper().lf;
        let sums: Vec<i64> = model
            .banks()
            .iter()
            .map(|bank| {
                let mut sum = 0i64;
                for clause in &bank.clauses {
                    let mut literals = 0u32;
                    let mut failed = 0u32;
                    for (j, &state) in clause.states().iter().enumerate() {
                        if state >= INCLUDE_THRESHOLD {
                            literals += 1;
                            let value = if j < f { sample[j] } else { !sample[j - f] };
                            if !value {
                                failed += 1;
                            }
                        }
                    }
                    if literals > 0 {
                        let votes = effective_limit(literals, lf).saturating_sub(failed);
                        sum += i64::from(clause.polarity()) * i64::from(votes);
                    }
                }
                sum
            })
            .collect();
        decide(model.mode(), &sums)
    }

    pub fn predict_all(model: &Model, samples: &[Vec<bool>]) -> Vec<u32> {
        samples.iter().map(|s| predict(model, s) as u32).collect()
    }

    /// Median-of-`repetitions` timing of [`predict_all`], single-threaded.
    pub fn benchmark(model: &Model, samples: &[Vec<bool>], repetitions: usize) -> ThroughputReport {
        std::hint::black_box(predict_all(model, samples));
        let times = time_repetitions(repetitions, || {
            std::hint::black_box(predict_all(model, samples));
            Ok(())
        })
        .expect("infallible");
        ThroughputReport::from_median(&times, samples.len(), model.features(), 1)
    }
}
