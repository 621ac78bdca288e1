//! Synthetic corpora with known structure for tests and demonstrations.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::augment::{augment_corpus, Translator, TranslatorEndpoint};
use crate::corpus::{Corpus, Example, Lang};
use crate::error::{Error, Result};
use crate::features::EmbeddingMatrix;
use crate::rng;

/// Two well-separated uniform blobs in 2-D: positives have `x0 ∈ [0.5, 2]`,
/// negatives `x0 ∈ [-2, -0.5]`, and `x1 ∈ [-1, 1]` for both.
pub fn separable_2d(n: usize, pos_frac: f64, seed: u64) -> (EmbeddingMatrix, Vec<u8>) {
    let mut r = rng::stream(seed, "synthetic/separable", 0);
    let pos = (n as f64 * pos_frac).round() as usize;
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < pos)).collect();
    labels.shuffle(&mut r);
    let mut data = Vec::with_capacity(2 * n);
    for &y in &labels {
        let x0: f32 = r.random_range(0.5..2.0);
        data.push(if y == 1 { x0 } else { -x0 });
        data.push(r.random_range(-1.0..1.0));
    }
    let m = EmbeddingMatrix::new(2, data, "synthetic-separable").expect("finite by construction");
    (m, labels)
}

/// Language-specific Gaussian clusters.
///
/// A row of language `l` and label `y` has features `N(μ, noise² I)` with
/// `μ_0 = y·class_gap + shift_l` and `μ_j = 0` otherwise, where the shift is
/// `+lang_shift` for English, 0 for Spanish and `-lang_shift` for Italian.
/// Nothing but the first coordinate depends on the language, so a linear
/// head cannot undo the shift and each language prefers its own threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftSpec {
    pub per_lang: usize,
    pub positive_rates: [f64; 3],
    pub dim: usize,
    pub class_gap: f64,
    pub lang_shift: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        ShiftSpec {
            per_lang: 500,
            positive_rates: [0.09, 0.18, 0.24],
            dim: 16,
            class_gap: 2.0,
            lang_shift: 1.0,
            noise: 1.0,
            seed: 0,
        }
    }
}

impl ShiftSpec {
    fn validate(&self) -> Result<()> {
        if self.per_lang == 0 || self.dim == 0 {
            return Err(Error::Config("synthetic corpus needs per_lang and dim > 0".into()));
        }
        if !(self.noise > 0.0) || self.positive_rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config("synthetic noise must be positive and rates in [0, 1]".into()));
        }
        Ok(())
    }

    fn shift(&self, lang: Lang) -> f64 {
        match lang {
            Lang::En => self.lang_shift,
            Lang::Es => 0.0,
            Lang::It => -self.lang_shift,
        }
    }

    /// Native corpus: `per_lang` rows per language, positives first.
    pub fn corpus(&self) -> Result<Corpus> {
        self.validate()?;
        let mut rows = Vec::with_capacity(3 * self.per_lang);
        for lang in Lang::ALL {
            let pos = (self.per_lang as f64 * self.positive_rates[lang.index()]).round() as usize;
            for i in 0..self.per_lang {
                let label = u8::from(i < pos);
                rows.push(Example::new(
                    format!("{}{i:05}", lang.code()),
                    format!("synthetic {} tweet {i}", lang.name()),
                    lang,
                    label,
                ));
            }
        }
        Corpus::new(rows)
    }

    /// Features for every row, each drawn from a stream keyed by the row id.
    pub fn embed(&self, corpus: &Corpus) -> Result<EmbeddingMatrix> {
        self.validate()?;
        let mut data = Vec::with_capacity(corpus.len() * self.dim);
        for ex in corpus.examples() {
            let mut r = rng::stream(self.seed, "synthetic/row", rng::fnv1a(ex.id.as_bytes()));
            for j in 0..self.dim {
                let z: f64 = r.sample(StandardNormal);
                let mu = if j == 0 {
                    f64::from(ex.label) * self.class_gap + self.shift(ex.lang)
                } else {
                    0.0
                };
                data.push((mu + self.noise * z) as f32);
            }
        }
        EmbeddingMatrix::new(self.dim, data, format!("synthetic-shift-{}", self.dim))
    }
}

/// Native corpus plus features aligned with it.
pub fn shifted_native(spec: &ShiftSpec) -> Result<(Corpus, EmbeddingMatrix)> {
    let corpus = spec.corpus()?;
    let emb = spec.embed(&corpus)?;
    Ok((corpus, emb))
}

/// Native corpus plus features aligned with its mock back-translation
/// (three rows per native row, in augmentation order).
pub fn shifted_fixture(spec: &ShiftSpec) -> Result<(Corpus, EmbeddingMatrix)> {
    let corpus = spec.corpus()?;
    let augmented = augment_corpus(&corpus, &Translator::new(TranslatorEndpoint::mock())?)?;
    let emb = spec.embed(&augmented)?;
    Ok((corpus, emb))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn separable_split_is_clean() {
        let (x, y) = separable_2d(200, 0.25, 9);
        assert_eq!(y.iter().filter(|&&v| v == 1).count(), 50);
        for (i, &label) in y.iter().enumerate() {
            assert_eq!(x.row(i)[0] > 0.0, label == 1);
        }
    }

    #[test]
    fn shifted_corpus_shape() {
        let spec = ShiftSpec::default();
        let (corpus, emb) = shifted_fixture(&spec).unwrap();
        assert_eq!(corpus.len(), 1500);
        assert_eq!(emb.rows(), 4500);
        let table = crate::corpus::label_language_table(&corpus).unwrap();
        assert_eq!(table.counts, [[455, 45], [410, 90], [380, 120]]);
        // same row id, same features, regardless of corpus order
        let again = spec.embed(&corpus).unwrap();
        assert_eq!(again.row(0), shifted_native(&spec).unwrap().1.row(0));
    }

    #[test]
    fn cluster_means_follow_the_shift() {
        let spec = ShiftSpec::default();
        let (corpus, emb) = shifted_native(&spec).unwrap();
        for lang in Lang::ALL {
            let idx: Vec<usize> = (0..corpus.len())
                .filter(|&i| corpus.examples()[i].lang == lang && corpus.examples()[i].label == 0)
                .collect();
            let mean = idx.iter().map(|&i| f64::from(emb.row(i)[0])).sum::<f64>() / idx.len() as f64;
            assert!((mean - spec.shift(lang)).abs() < 0.2, "{lang}: {mean}");
        }
    }
}
