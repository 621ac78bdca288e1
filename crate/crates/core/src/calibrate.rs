//! Per-language decision thresholds on the reclamatory confidence score.
//!
//! For each language the sweep evaluates every threshold that yields a
//! distinct labeling of the validation scores (0, 1 and the midpoints
//! between consecutive distinct scores) and keeps the macro-F1 maximizer.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Lang;
use crate::error::{Error, Result};
use crate::evaluation::{f1, ConfusionCounts};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub id: String,
    pub lang: Lang,
    pub conf: f64,
    pub label: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDiagnostics {
    pub tau: f64,
    pub macro_f1_at_tau: f64,
    pub macro_f1_at_default: f64,
    pub tpr: f64,
    pub fpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMap {
    pub per_lang: BTreeMap<Lang, f64>,
    pub default: f64,
    pub diagnostics: BTreeMap<Lang, ThresholdDiagnostics>,
}

impl Default for ThresholdMap {
    fn default() -> Self {
        ThresholdMap {
            per_lang: BTreeMap::new(),
            default: DEFAULT_THRESHOLD,
            diagnostics: BTreeMap::new(),
        }
    }
}

impl ThresholdMap {
    pub fn tau(&self, lang: Lang) -> f64 {
        self.per_lang.get(&lang).copied().unwrap_or(self.default)
    }

    /// `{lang: {tau, macro_f1_at_tau, macro_f1_at_default, tpr, fpr}}`.
    pub fn report_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.diagnostics).expect("diagnostics")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lang: Lang,
    pub tau: f64,
    pub macro_f1: f64,
    pub tpr: f64,
    pub fpr: f64,
}

fn macro_f1(c: &ConfusionCounts) -> f64 {
    (f1(c.tp, c.fp, c.fn_) + f1(c.tn, c.fn_, c.fp)) / 2.0
}

/// Labeled scores of one language, sorted ascending by confidence.
struct Sorted {
    confs: Vec<f64>,
    /// positives among the first i rows
    pos_prefix: Vec<u64>,
}

impl Sorted {
    fn new(lang: Lang, rows: &[&ScoredPrediction]) -> Result<Sorted> {
        let mut pairs: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
        for r in rows {
            let label = r.label.ok_or_else(|| {
                Error::Degenerate(format!("validation row {} has no label", r.id))
            })?;
            if !(0.0..=1.0).contains(&r.conf) {
                return Err(Error::Numeric(format!("confidence {} of {} outside [0, 1]", r.conf, r.id)));
            }
            pairs.push((r.conf, label));
        }
        let positives = pairs.iter().filter(|p| p.1 == 1).count();
        if positives == 0 || positives == pairs.len() {
            return Err(Error::DegenerateLanguage(lang));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut pos_prefix = Vec::with_capacity(pairs.len() + 1);
        pos_prefix.push(0);
        for p in &pairs {
            pos_prefix.push(pos_prefix.last().unwrap() + u64::from(p.1));
        }
        Ok(Sorted {
            confs: pairs.into_iter().map(|p| p.0).collect(),
            pos_prefix,
        })
    }

    fn counts_at(&self, tau: f64) -> ConfusionCounts {
        let below = self.confs.partition_point(|&c| c < tau);
        let n = self.confs.len() as u64;
        let p = *self.pos_prefix.last().unwrap();
        let fn_ = self.pos_prefix[below];
        let tn = below as u64 - fn_;
        ConfusionCounts {
            tp: p - fn_,
            fp: (n - p) - tn,
            fn_,
            tn,
        }
    }

    fn candidates(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        for w in self.confs.windows(2) {
            if w[0] != w[1] {
                out.push(0.5 * (w[0] + w[1]));
            }
        }
        out.push(1.0);
        out
    }
}

fn by_language(validation: &[ScoredPrediction]) -> Result<Vec<(Lang, Sorted)>> {
    let mut groups: BTreeMap<Lang, Vec<&ScoredPrediction>> = BTreeMap::new();
    for r in validation {
        groups.entry(r.lang).or_default().push(r);
    }
    if groups.is_empty() {
        return Err(Error::EmptyInput("no validation scores to calibrate on"));
    }
    groups
        .into_par_iter()
        .map(|(lang, rows)| Sorted::new(lang, &rows).map(|s| (lang, s)))
        .collect()
}

fn better(candidate: (f64, f64), incumbent: (f64, f64)) -> bool {
    let (f, tau) = candidate;
    let (bf, btau) = incumbent;
    if f != bf {
        return f > bf;
    }
    let (d, bd) = ((tau - 0.5).abs(), (btau - 0.5).abs());
    if d != bd {
        return d < bd;
    }
    tau < btau
}

/// Macro-F1 maximizing threshold per language.
///
/// Ties between equally good thresholds go to the one closest to 0.5, then
/// to the smaller one.
pub fn sweep_thresholds(validation: &[ScoredPrediction]) -> Result<ThresholdMap> {
    let mut map = ThresholdMap::default();
    for (lang, sorted) in by_language(validation)? {
        let mut best = (f64::NEG_INFINITY, f64::NAN);
        for tau in sorted.candidates() {
            let f = macro_f1(&sorted.counts_at(tau));
            if best.1.is_nan() || better((f, tau), best) {
                best = (f, tau);
            }
        }
        let at_tau = sorted.counts_at(best.1);
        map.per_lang.insert(lang, best.1);
        map.diagnostics.insert(
            lang,
            ThresholdDiagnostics {
                tau: best.1,
                macro_f1_at_tau: best.0,
                macro_f1_at_default: macro_f1(&sorted.counts_at(DEFAULT_THRESHOLD)),
                tpr: at_tau.tpr(),
                fpr: at_tau.fpr(),
            },
        );
    }
    Ok(map)
}

/// Macro-F1, TPR and FPR at every candidate threshold, per language.
pub fn threshold_curve(validation: &[ScoredPrediction]) -> Result<Vec<CurvePoint>> {
    let mut out = Vec::new();
    for (lang, sorted) in by_language(validation)? {
        for tau in sorted.candidates() {
            let c = sorted.counts_at(tau);
            out.push(CurvePoint {
                lang,
                tau,
                macro_f1: macro_f1(&c),
                tpr: c.tpr(),
                fpr: c.fpr(),
            });
        }
    }
    Ok(out)
}

pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("lang,tau,macro_f1,tpr,fpr\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{},{}", p.lang, p.tau, p.macro_f1, p.tpr, p.fpr);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Applied {
    pub preds: Vec<u8>,
    /// Rows whose label differs from the plain `conf >= 0.5` rule.
    pub flips: usize,
}

/// `pred = 1` iff `conf >= τ_lang`; languages without an entry use the
/// map's default.
pub fn apply_thresholds(predictions: &[ScoredPrediction], tmap: &ThresholdMap) -> Applied {
    let mut flips = 0;
    let preds = predictions
        .iter()
        .map(|p| {
            let pred = u8::from(p.conf >= tmap.tau(p.lang));
            flips += usize::from(pred != u8::from(p.conf >= DEFAULT_THRESHOLD));
            pred
        })
        .collect();
    Applied { preds, flips }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(lang: Lang, scored: &[(f64, u8)]) -> Vec<ScoredPrediction> {
        scored
            .iter()
            .enumerate()
            .map(|(i, &(conf, label))| ScoredPrediction {
                id: format!("{lang}{i}"),
                lang,
                conf,
                label: Some(label),
            })
            .collect()
    }

    const WORKED: [(f64, u8); 6] = [(0.9, 1), (0.8, 1), (0.7, 0), (0.6, 1), (0.3, 0), (0.2, 0)];

    /// Macro-F1 of `conf >= tau` computed from scratch.
    fn brute_macro_f1(scored: &[(f64, u8)], tau: f64) -> f64 {
        let y: Vec<u8> = scored.iter().map(|p| p.1).collect();
        let p: Vec<u8> = scored.iter().map(|p| u8::from(p.0 >= tau)).collect();
        crate::evaluation::metrics(&crate::evaluation::confusion(&y, &p).unwrap()).macro_f1
    }

    #[test]
    fn worked_example() {
        let map = sweep_thresholds(&rows(Lang::En, &WORKED)).unwrap();
        assert!((map.tau(Lang::En) - 0.45).abs() < 1e-12);
        let d = map.diagnostics[&Lang::En];
        assert!((d.macro_f1_at_tau - (6.0 / 7.0 + 4.0 / 5.0) / 2.0).abs() < 1e-12);
        assert!((d.macro_f1_at_tau - 0.82857).abs() < 1e-5);
        assert_eq!((d.tpr, d.fpr), (1.0, 1.0 / 3.0));
        // exhaustive oracle over every candidate
        let best = [0.0, 0.25, 0.45, 0.65, 0.75, 0.85, 1.0]
            .iter()
            .map(|&t| brute_macro_f1(&WORKED, t))
            .fold(0.0, f64::max);
        assert_eq!(best, d.macro_f1_at_tau);
    }

    #[test]
    fn separated_scores_pick_the_gap() {
        let scored = [(0.1, 0), (0.2, 0), (0.3, 0), (0.7, 1), (0.9, 1)];
        let map = sweep_thresholds(&rows(Lang::It, &scored)).unwrap();
        assert_eq!(map.tau(Lang::It), 0.5);
        assert_eq!(map.diagnostics[&Lang::It].macro_f1_at_tau, 1.0);
    }

    #[test]
    fn languages_are_independent() {
        let mut v = rows(Lang::En, &WORKED);
        v.extend(rows(Lang::Es, &WORKED));
        let map = sweep_thresholds(&v).unwrap();
        assert_eq!(map.tau(Lang::En), map.tau(Lang::Es));
        assert_eq!(map.tau(Lang::It), DEFAULT_THRESHOLD);
    }

    #[test]
    fn single_class_language_is_named() {
        let mut v = rows(Lang::En, &WORKED);
        v.extend(rows(Lang::It, &[(0.2, 0), (0.4, 0)]));
        assert!(matches!(sweep_thresholds(&v), Err(Error::DegenerateLanguage(Lang::It))));
        assert!(matches!(sweep_thresholds(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn apply_examples() {
        let mut tmap = ThresholdMap::default();
        tmap.per_lang.insert(Lang::En, 0.58);
        tmap.per_lang.insert(Lang::It, 0.42);
        let p = |lang, conf| ScoredPrediction {
            id: "x".into(),
            lang,
            conf,
            label: None,
        };
        let preds = [p(Lang::En, 0.55), p(Lang::It, 0.45), p(Lang::En, 0.58), p(Lang::Es, 0.5)];
        let out = apply_thresholds(&preds, &tmap);
        assert_eq!(out.preds, vec![0, 1, 1, 1]);
        assert_eq!(out.flips, 2);
    }

    #[test]
    fn curve_rows() {
        let pts = threshold_curve(&rows(Lang::En, &WORKED)).unwrap();
        assert_eq!(pts.len(), 7);
        let csv = curve_csv(&pts);
        assert!(csv.starts_with("lang,tau,macro_f1,tpr,fpr\nen,0,0.3333333333333333,1,1\n"), "{csv}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn scored() -> impl Strategy<Value = Vec<(f64, u8)>> {
            prop::collection::vec(((0u32..=1000).prop_map(|v| f64::from(v) / 1000.0), 0u8..2), 2..80)
                .prop_filter("two classes", |v| v.iter().any(|p| p.1 == 0) && v.iter().any(|p| p.1 == 1))
        }

        proptest! {
            #[test]
            fn optimum_dominates_dense_grid(s in scored()) {
                let map = sweep_thresholds(&rows(Lang::Es, &s)).unwrap();
                let best = map.diagnostics[&Lang::Es].macro_f1_at_tau;
                prop_assert_eq!(best, brute_macro_f1(&s, map.tau(Lang::Es)));
                for g in 0..=1000 {
                    prop_assert!(best >= brute_macro_f1(&s, f64::from(g) / 1000.0));
                }
            }

            #[test]
            fn rates_fall_as_tau_rises(s in scored()) {
                let pts = threshold_curve(&rows(Lang::En, &s)).unwrap();
                for w in pts.windows(2) {
                    prop_assert!(w[0].tau < w[1].tau);
                    prop_assert!(w[1].tpr <= w[0].tpr && w[1].fpr <= w[0].fpr);
                }
            }

            #[test]
            fn monotone_transform_keeps_optimum(s in scored()) {
                let t: Vec<(f64, u8)> = s.iter().map(|&(c, y)| (c * c, y)).collect();
                let a = sweep_thresholds(&rows(Lang::En, &s)).unwrap();
                let b = sweep_thresholds(&rows(Lang::En, &t)).unwrap();
                let la: Vec<u8> = s.iter().map(|p| u8::from(p.0 >= a.tau(Lang::En))).collect();
                let lb: Vec<u8> = t.iter().map(|p| u8::from(p.0 >= b.tau(Lang::En))).collect();
                let (fa, fb) = (a.diagnostics[&Lang::En].macro_f1_at_tau, b.diagnostics[&Lang::En].macro_f1_at_tau);
                prop_assert_eq!(fa, fb);
                // the labeling is the same whenever the optimum is unique
                let optima = threshold_curve(&rows(Lang::En, &s)).unwrap().iter().filter(|p| p.macro_f1 == fa).count();
                if optima == 1 {
                    prop_assert_eq!(la, lb);
                }
            }

            #[test]
            fn half_everywhere_is_the_default_rule(confs in prop::collection::vec(0.0f64..=1.0, 1..50)) {
                let preds: Vec<ScoredPrediction> = confs
                    .iter()
                    .map(|&c| ScoredPrediction { id: "r".into(), lang: Lang::It, conf: c, label: None })
                    .collect();
                let mut tmap = ThresholdMap::default();
                for l in Lang::ALL {
                    tmap.per_lang.insert(l, 0.5);
                }
                let out = apply_thresholds(&preds, &tmap);
                prop_assert_eq!(out.flips, 0);
                for (p, c) in out.preds.iter().zip(&confs) {
                    prop_assert_eq!(*p, u8::from(*c >= 0.5));
                }
            }
        }
    }
}
