use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::corpus::{Corpus, Lang, Origin};
use crate::error::{Error, Result};
use crate::rng;

/// A k-way partition of corpus row indices.
///
/// Rows are grouped by their source tweet (`id` up to the first `#`), so a
/// back-translated row always lands in the same fold as its native original.
/// `strata` counts groups per fold for every `lang/label` stratum.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FoldSplit {
    pub k: usize,
    pub folds: Vec<Vec<usize>>,
    pub strata: BTreeMap<String, Vec<usize>>,
    pub warnings: Vec<String>,
}

impl FoldSplit {
    /// Every index outside fold `f`, ascending.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != f)
            .flat_map(|(_, idx)| idx.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }

    pub fn val_indices(&self, f: usize) -> &[usize] {
        &self.folds[f]
    }

    pub fn len(&self) -> usize {
        self.folds.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn stratum_tag(lang: Lang, label: u8) -> String {
    format!("{}/{}", lang.code(), label)
}

/// Stratified k-fold split on (language, label).
///
/// Each stratum is shuffled with its own keyed stream and dealt round-robin;
/// the dealing pointer carries over from one stratum to the next so fold
/// sizes stay balanced overall as well as per stratum.
pub fn stratified_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyInput("cannot split an empty corpus"));
    }

    // group rows by source tweet, in order of first appearance
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut anchor: Vec<(Lang, u8)> = Vec::new();
    for (i, ex) in corpus.examples().iter().enumerate() {
        let base = ex.id.split('#').next().unwrap_or(&ex.id);
        match group_of.get(base) {
            Some(&g) => {
                groups[g].push(i);
                if ex.origin == Origin::Native {
                    anchor[g] = (ex.lang, ex.label);
                }
            }
            None => {
                group_of.insert(base, groups.len());
                groups.push(vec![i]);
                anchor.push((ex.lang, ex.label));
            }
        }
    }

    let mut folds = vec![Vec::new(); k];
    let mut strata = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut next = 0usize;
    for lang in Lang::ALL {
        for label in [0u8, 1] {
            let tag = stratum_tag(lang, label);
            let mut members: Vec<usize> = (0..groups.len()).filter(|&g| anchor[g] == (lang, label)).collect();
            if members.is_empty() {
                warnings.push(format!("stratum {tag} is empty"));
                continue;
            }
            if members.len() < k {
                warnings.push(format!(
                    "stratum {tag} has {} members for {k} folds; some folds lack it",
                    members.len()
                ));
            }
            members.shuffle(&mut rng::stream(seed, &format!("fold/{tag}"), 0));
            let mut counts = vec![0usize; k];
            for g in members {
                let f = next % k;
                next += 1;
                counts[f] += 1;
                folds[f].extend_from_slice(&groups[g]);
            }
            strata.insert(tag, counts);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(FoldSplit {
        k,
        folds,
        strata,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Example;

    fn corpus_with(per_lang: usize, positives: [usize; 3]) -> Corpus {
        let mut rows = Vec::new();
        for (l, lang) in Lang::ALL.iter().enumerate() {
            for i in 0..per_lang {
                let label = u8::from(i < positives[l]);
                rows.push(Example::new(format!("{}{i}", lang.code()), "t", *lang, label));
            }
        }
        Corpus::new(rows).unwrap()
    }

    #[test]
    fn proportioned_corpus_gives_equal_language_shares() {
        let c = corpus_with(100, [9, 18, 24]);
        let split = stratified_folds(&c, 5, 7).unwrap();
        for fold in &split.folds {
            for lang in Lang::ALL {
                let n = fold.iter().filter(|&&i| c.examples()[i].lang == lang).count();
                assert_eq!(n, 20);
            }
        }
        for v in &split.strata["en/1"] {
            assert!((1..=2).contains(v));
        }
        for counts in split.strata.values() {
            let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
            assert!(hi - lo <= 1);
        }
        assert!(split.warnings.is_empty());
    }

    #[test]
    fn small_stratum_two_folds() {
        let rows = (0..4).map(|i| Example::new(format!("x{i}"), "t", Lang::Es, 1)).collect();
        let split = stratified_folds(&Corpus::new(rows).unwrap(), 2, 1).unwrap();
        assert_eq!(split.folds[0].len(), 2);
        assert_eq!(split.folds[1].len(), 2);
    }

    #[test]
    fn oversized_k_warns() {
        let c = corpus_with(10, [2, 3, 4]);
        let split = stratified_folds(&c, 5, 1).unwrap();
        assert!(split.warnings.iter().any(|w| w.contains("en/1")));
        assert_eq!(split.len(), 30);
        assert!(matches!(stratified_folds(&c, 1, 1), Err(Error::Config(_))));
    }

    #[test]
    fn translations_follow_their_source() {
        let c = corpus_with(20, [4, 5, 6]);
        let aug = crate::augment::augment_corpus(
            &c,
            &crate::augment::Translator::new(Default::default()).unwrap(),
        )
        .unwrap();
        let split = stratified_folds(&aug, 5, 3).unwrap();
        let mut fold_of = vec![usize::MAX; aug.len()];
        for (f, idx) in split.folds.iter().enumerate() {
            for &i in idx {
                fold_of[i] = f;
            }
        }
        for (i, ex) in aug.examples().iter().enumerate() {
            let base = ex.id.split('#').next().unwrap();
            let native = aug.examples().iter().position(|e| e.id == base).unwrap();
            assert_eq!(fold_of[i], fold_of[native]);
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn folds_partition_rows(per_lang in 4usize..60, k in 2usize..7, seed in any::<u64>(), pos in prop::array::uniform3(1usize..4)) {
                let c = corpus_with(per_lang, pos);
                let split = stratified_folds(&c, k, seed).unwrap();
                let mut all: Vec<usize> = split.folds.concat();
                all.sort_unstable();
                prop_assert_eq!(all, (0..c.len()).collect::<Vec<_>>());
                for counts in split.strata.values() {
                    let (lo, hi) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
                    prop_assert!(hi - lo <= 1);
                }
                prop_assert_eq!(stratified_folds(&c, k, seed).unwrap(), split);
            }
        }
    }
}
