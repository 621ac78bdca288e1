//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reclaim_core::augment::{augment_corpus, Translator, TranslatorEndpoint};
use reclaim_core::calibrate::{sweep_thresholds, ScoredPrediction};
use reclaim_core::corpus::{chi_square_independence, load_corpus, ContingencyTable};
use reclaim_core::evaluation::{confusion, metrics, roc_auc};
use reclaim_core::hpo::{optimize, should_prune, ParamSpec, SearchSpace, TpeConfig, TrialRecord, TrialState};
use reclaim_core::pipeline::{emit_report, execute_run, write_fixture, PipelineConfig, RunArtifact, RunId};
use reclaim_core::synthetic::ShiftSpec;
use reclaim_core::training::{loss_and_grad, plan_epoch, Control, LinearModel, LossConfig};
use reclaim_core::{Corpus, Example, Lang};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    check(elapsed.as_secs_f64() < limit_s, || {
        format!("runtime {:.2}s exceeds {limit_s}s", elapsed.as_secs_f64())
    })
}

fn rng(tag: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0xACCE_0000 + tag)
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dim = r.random_range(1..=8);
        let n = r.random_range(1..=6);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random_range(-2.0..2.0)).collect()).collect();
        let y: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        let cfg = LossConfig {
            w0: r.random_range(0.1..1.0),
            w1: r.random_range(0.1..1.0),
            ..LossConfig::default()
        };
        let mut model = LinearModel::zeros(dim);
        model.weights.iter_mut().for_each(|w| *w = r.random_range(-1.0..1.0));
        model.bias = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
        let (_, grad) = loss_and_grad(&model, &x, &y, &cfg).map_err(|e| e.to_string())?;

        let loss_at = |m: &LinearModel| loss_and_grad(m, &x, &y, &cfg).map(|(l, _)| l).unwrap();
        let analytic: Vec<f64> = grad.weights.iter().chain(&grad.bias).copied().collect();
        for (p, &a) in analytic.iter().enumerate() {
            let nudge = |delta: f64| {
                let mut m = model.clone();
                if p < m.weights.len() {
                    m.weights[p] += delta;
                } else {
                    m.bias[p - m.weights.len()] += delta;
                }
                loss_at(&m)
            };
            let numeric = (nudge(h) - nudge(-h)) / (2.0 * h);
            // relative error, with absolute error once both sides are below 1
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            worst = worst.max(rel);
        }
    }
    check(worst <= 1e-5, || format!("max relative error {worst:e} > 1e-5"))?;
    within(start.elapsed(), 5.0)?;
    Ok(format!("max relative error {worst:.2e} over 100 instances"))
}

fn sampler_invariants() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let mut nonempty = 0;
    for case in 0..1000 {
        let p = r.random_range(0..150usize);
        let n = r.random_range(0..600usize);
        let b = 4 * r.random_range(1..=16usize);
        let mut labels: Vec<u8> = std::iter::repeat_n(1u8, p).chain(std::iter::repeat_n(0u8, n)).collect();
        labels.shuffle(&mut r);
        let expected = (4 * p / b).min(4 * n / (3 * b));
        let epoch = r.random_range(1..10u64);
        match plan_epoch(&labels, b, case, epoch) {
            Err(e) => check(expected == 0, || format!("P={p} N={n} B={b}: unexpected error {e}"))?,
            Ok(plan) => {
                nonempty += 1;
                check(plan.len() == expected, || {
                    format!("P={p} N={n} B={b}: {} batches, expected {expected}", plan.len())
                })?;
                let mut seen = HashSet::new();
                for batch in &plan.batches {
                    let pos = batch.iter().filter(|&&i| labels[i] == 1).count();
                    check(batch.len() == b && 3 * pos == batch.len() - pos, || {
                        format!("P={p} N={n} B={b}: batch with {pos} positives of {}", batch.len())
                    })?;
                    for &i in batch {
                        check(seen.insert(i), || format!("P={p} N={n} B={b}: index {i} repeated"))?;
                    }
                }
            }
        }
    }
    within(start.elapsed(), 5.0)?;
    Ok(format!("1000 pools ({nonempty} with batches) all 1:3, no repeats, count formula holds"))
}

fn metric_oracles() -> Outcome {
    let mut r = rng(3);
    for case in 0..500 {
        let n = r.random_range(2..=200);
        let mut y: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();
        y[0] = 1;
        y[1] = 0;
        let grid = r.random_range(2..40);
        let s: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(0..grid)) / f64::from(grid)).collect();
        let pred: Vec<u8> = (0..n).map(|_| r.random_range(0..2)).collect();

        // confusion oracle counted per class
        let count = |t: u8, p: u8| y.iter().zip(&pred).filter(|&(&a, &b)| a == t && b == p).count() as u64;
        let (tp, fp, fn_, tn) = (count(1, 1), count(0, 1), count(1, 0), count(0, 0));
        let f1 = |a: u64, b: u64, c: u64| if 2 * a + b + c == 0 { 0.0 } else { (2 * a) as f64 / (2 * a + b + c) as f64 };
        let macro_oracle = (f1(tp, fp, fn_) + f1(tn, fn_, fp)) / 2.0;
        let acc_oracle = (tp + tn) as f64 / n as f64;

        let mut wins2 = 0u64;
        let mut pairs = 0u64;
        for i in (0..n).filter(|&i| y[i] == 1) {
            for j in (0..n).filter(|&j| y[j] == 0) {
                pairs += 1;
                wins2 += match s[i].partial_cmp(&s[j]).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
        let auc_oracle = (wins2 as f64 / 2.0) / pairs as f64;

        let m = metrics(&confusion(&y, &pred).map_err(|e| e.to_string())?);
        let auc = roc_auc(&y, &s).map_err(|e| e.to_string())?;
        check(m.macro_f1 == macro_oracle, || format!("case {case}: macro-F1 {} vs {macro_oracle}", m.macro_f1))?;
        check(m.accuracy == acc_oracle, || format!("case {case}: accuracy {} vs {acc_oracle}", m.accuracy))?;
        check(auc == auc_oracle, || format!("case {case}: AUC {auc} vs {auc_oracle}"))?;
    }
    let worked = metrics(&confusion(&[1, 1, 1, 0, 0, 0, 0, 0, 0, 0], &[1, 1, 0, 1, 0, 0, 0, 0, 0, 0]).unwrap());
    check(format!("{:.5}", worked.macro_f1) == "0.76190", || {
        format!("worked macro-F1 {} does not round to 0.76190", worked.macro_f1)
    })?;
    check(worked.macro_f1 == (4.0 / 6.0 + 12.0 / 14.0) / 2.0, || "worked macro-F1 not 16/21".into())?;
    let auc = roc_auc(&[1, 1, 0, 1, 0, 0], &[0.9, 0.8, 0.7, 0.6, 0.3, 0.2]).unwrap();
    check(auc == 8.0 / 9.0, || format!("worked AUC {auc} != 8/9"))?;
    Ok(format!("500 instances exact; worked macro-F1 {:.5}, AUC {auc}", worked.macro_f1))
}

fn chi_square() -> Outcome {
    for (a, b) in [(50, 50), (91, 9), (7, 13), (1, 1)] {
        let c = chi_square_independence(&ContingencyTable::from_counts([[a, b]; 3])).map_err(|e| e.to_string())?;
        check(c.statistic == 0.0 && c.p_value == 1.0, || {
            format!("uniform [{a},{b}]: statistic {}, p {}", c.statistic, c.p_value)
        })?;
    }
    let c = chi_square_independence(&ContingencyTable::from_counts([[91, 9], [82, 18], [76, 24]]))
        .map_err(|e| e.to_string())?;
    check((c.statistic - 8.079).abs() <= 1e-3, || format!("statistic {} not within 1e-3 of 8.079", c.statistic))?;
    let closed = (-c.statistic / 2.0).exp();
    check((c.p_value - closed).abs() <= 1e-4, || format!("p {} vs exp(-stat/2) {closed}", c.p_value))?;
    Ok(format!("uniform → 0, p=1; statistic {:.4}, p {:.6}", c.statistic, c.p_value))
}

fn threshold_sweep() -> Outcome {
    let mut r = rng(5);
    let macro_at = |rows: &[(f64, u8)], tau: f64| {
        let y: Vec<u8> = rows.iter().map(|p| p.1).collect();
        let p: Vec<u8> = rows.iter().map(|p| u8::from(p.0 >= tau)).collect();
        metrics(&confusion(&y, &p).unwrap()).macro_f1
    };
    for case in 0..200 {
        let mut rows: Vec<ScoredPrediction> = Vec::new();
        let mut per_lang = Vec::new();
        for lang in Lang::ALL {
            let n = r.random_range(2..60);
            let mut set: Vec<(f64, u8)> = (0..n)
                .map(|_| {
                    let y = r.random_range(0..2u8);
                    let c: f64 = (r.random_range(0.0..1.0) + 0.3 * f64::from(y)).min(1.0);
                    // coarse values create ties and grid-aligned scores
                    (if r.random_bool(0.5) { (c * 20.0).round() / 20.0 } else { c }, y)
                })
                .collect();
            set[0].1 = 1;
            set[1].1 = 0;
            rows.extend(set.iter().enumerate().map(|(i, &(conf, label))| ScoredPrediction {
                id: format!("{lang}{i}"),
                lang,
                conf,
                label: Some(label),
            }));
            per_lang.push((lang, set));
        }
        let map = sweep_thresholds(&rows).map_err(|e| e.to_string())?;
        for (lang, set) in &per_lang {
            let best = macro_at(set, map.tau(*lang));
            for g in 0..=1000 {
                let tau = f64::from(g) / 1000.0;
                let v = macro_at(set, tau);
                check(best >= v, || format!("case {case} {lang}: τ*={} gives {best}, grid τ={tau} gives {v}", map.tau(*lang)))?;
            }
        }
    }
    let worked: Vec<ScoredPrediction> = [(0.9, 1), (0.8, 1), (0.7, 0), (0.6, 1), (0.3, 0), (0.2, 0)]
        .iter()
        .enumerate()
        .map(|(i, &(conf, y))| ScoredPrediction {
            id: i.to_string(),
            lang: Lang::En,
            conf,
            label: Some(y),
        })
        .collect();
    let map = sweep_thresholds(&worked).map_err(|e| e.to_string())?;
    let tau = map.tau(Lang::En);
    let f1 = map.diagnostics[&Lang::En].macro_f1_at_tau;
    check((tau - 0.45).abs() <= 1e-9, || format!("worked τ {tau} != 0.45"))?;
    // 0.82857 is 29/35 to five places
    check((f1 - 29.0 / 35.0).abs() <= 1e-9 && format!("{f1:.5}") == "0.82857", || {
        format!("worked macro-F1 {f1} is not 29/35 ≈ 0.82857")
    })?;
    Ok(format!("200 score sets dominate the 1e-3 grid; worked τ {tau:.2}, macro-F1 {f1:.5}"))
}

fn tpe_efficacy() -> Outcome {
    let start = Instant::now();
    let space = SearchSpace::single("x", ParamSpec::Uniform { low: 0.0, high: 1.0 });
    let best_of = |cfg: &TpeConfig| -> Result<(f64, f64), String> {
        let study = optimize(
            |p, _| Ok(-(p["x"] - 0.3).powi(2)),
            &space,
            cfg,
            50,
            usize::MAX,
        )
        .map_err(|e| e.to_string())?;
        let best = study.best();
        Ok((best.final_value.unwrap_or(f64::NEG_INFINITY), best.params["x"]))
    };
    let mut hits = 0;
    let mut tpe_best = Vec::new();
    let mut random_best = Vec::new();
    for seed in 0..20 {
        let tpe = TpeConfig {
            seed,
            ..TpeConfig::default()
        };
        // random search: every trial is a startup draw
        let random = TpeConfig {
            n_startup: 50,
            seed,
            ..TpeConfig::default()
        };
        let (v, x) = best_of(&tpe)?;
        hits += usize::from((x - 0.3).abs() <= 0.05);
        tpe_best.push(v);
        random_best.push(best_of(&random)?.0);
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (v[9] + v[10]) / 2.0
    };
    let (mt, mr) = (median(&mut tpe_best), median(&mut random_best));
    check(hits >= 18, || format!("{hits}/20 seeds within 0.05"))?;
    check(mt >= mr, || format!("TPE median best {mt:e} < random median best {mr:e}"))?;
    within(start.elapsed(), 30.0)?;
    Ok(format!("{hits}/20 seeds within 0.05; median best TPE {mt:.2e} vs random {mr:.2e}"))
}

fn pruner_contract() -> Outcome {
    let strong: Vec<TrialRecord> = (0..3)
        .map(|id| TrialRecord {
            trial_id: id,
            params: Default::default(),
            intermediate: (1..=6).map(|e| (e, 0.8 + 0.01 * id as f64)).collect(),
            final_value: Some(0.8),
            state: TrialState::Complete,
            pruned_at: None,
            error: None,
        })
        .collect();
    for epoch in 1..3 {
        for v in [-1.0, 0.0, 0.5] {
            check(!should_prune(epoch, v, &strong, 3), || format!("pruned at epoch {epoch}"))?;
        }
    }
    let space = SearchSpace::single("x", ParamSpec::Uniform { low: 0.0, high: 1.0 });
    let mut trial = 0usize;
    let study = optimize(
        |_, rep| {
            let value = if trial < 3 { 0.8 } else { 0.2 };
            trial += 1;
            for epoch in 1..=6 {
                if rep.report(epoch, value) == Control::Stop {
                    break;
                }
            }
            Ok(value)
        },
        &space,
        &TpeConfig::default(),
        4,
        3,
    )
    .map_err(|e| e.to_string())?;
    let weak = &study.trials[3];
    check(study.trials[..3].iter().all(|t| t.state == TrialState::Complete), || "strong trial pruned".into())?;
    check(weak.state == TrialState::Pruned && weak.pruned_at == Some(3), || {
        format!("dominated trial state {:?} pruned_at {:?}", weak.state, weak.pruned_at)
    })?;
    check(weak.intermediate.keys().copied().max() == Some(3), || "dominated trial ran past epoch 3".into())?;
    Ok("never before epoch 3; dominated trial pruned at epoch 3".into())
}

fn augmentation() -> Outcome {
    let mut r = rng(8);
    let translator = Translator::new(TranslatorEndpoint::mock()).map_err(|e| e.to_string())?;
    for case in 0..100 {
        let n = r.random_range(1..80);
        let rows: Vec<Example> = (0..n)
            .map(|i| {
                let lang = Lang::ALL[r.random_range(0..3)];
                let words: Vec<String> = (0..r.random_range(1..6)).map(|_| format!("w{}", r.random_range(0..99))).collect();
                Example::new(format!("c{case}r{i}"), words.join(" "), lang, r.random_range(0..2))
            })
            .collect();
        let corpus = Corpus::new(rows).map_err(|e| e.to_string())?;
        let a = augment_corpus(&corpus, &translator).map_err(|e| e.to_string())?;
        let b = augment_corpus(&corpus, &translator).map_err(|e| e.to_string())?;
        check(a.len() == 3 * corpus.len(), || format!("case {case}: {} rows from {}", a.len(), corpus.len()))?;
        let ones = |c: &Corpus| c.labels().iter().filter(|&&y| y == 1).count();
        check(ones(&a) == 3 * ones(&corpus) && a.len() - ones(&a) == 3 * (corpus.len() - ones(&corpus)), || {
            format!("case {case}: label multiset not tripled")
        })?;
        check(a.to_jsonl() == b.to_jsonl(), || format!("case {case}: repeated augmentation differs"))?;
    }
    Ok("100 corpora tripled with tripled labels, byte-identical on repeat".into())
}

const SEED: u64 = 2024;

struct EndToEnd {
    run1: RunArtifact,
    run3: RunArtifact,
    files: Vec<(String, Vec<u8>)>,
    elapsed: Duration,
}

/// Fixture, run1, run3 and the report in a fresh directory; returns every
/// prediction and report file keyed by its path relative to the directory.
fn end_to_end(dir: &Path) -> Result<EndToEnd, String> {
    let start = Instant::now();
    let cfg_path = write_fixture(dir, &ShiftSpec::default(), 50, 5, SEED).map_err(|e| e.to_string())?;
    let cfg = PipelineConfig::load(&cfg_path).map_err(|e| e.to_string())?;
    let (run1, mut paths) = execute_run(&cfg, RunId::Run1).map_err(|e| e.to_string())?;
    let (run3, more) = execute_run(&cfg, RunId::Run3).map_err(|e| e.to_string())?;
    paths.extend(more);
    let corpus = load_corpus(&cfg.corpus_path).map_err(|e| e.to_string())?;
    paths.extend(
        emit_report(&corpus, &[run1.clone(), run3.clone()], cfg.seed, &cfg.output_dir.join("report"))
            .map_err(|e| e.to_string())?,
    );
    let elapsed = start.elapsed();
    let mut files = Vec::new();
    for p in paths {
        let bytes = fs::read(&p).map_err(|e| e.to_string())?;
        files.push((p.strip_prefix(dir).unwrap_or(&p).display().to_string(), bytes));
    }
    Ok(EndToEnd {
        run1,
        run3,
        files,
        elapsed,
    })
}

fn threshold_gain(e: &EndToEnd) -> Outcome {
    let m1 = e.run1.summary.metrics.macro_f1;
    let m3 = e.run3.summary.metrics.macro_f1;
    let tmap = e.run3.summary.thresholds.as_ref().ok_or("run3 has no thresholds")?;
    let taus: Vec<f64> = Lang::ALL.iter().map(|&l| tmap.tau(l)).collect();
    check(m3 - m1 >= 0.02, || format!("run3 {m3:.4} - run1 {m1:.4} = {:.4} < 0.02", m3 - m1))?;
    check(taus.iter().any(|&t| t != taus[0]), || format!("τ* constant across languages: {taus:?}"))?;
    let same_conf = e.run1.scores.iter().zip(&e.run3.scores).all(|(a, b)| a.conf.to_bits() == b.conf.to_bits());
    check(same_conf && e.run1.scores.len() == e.run3.scores.len(), || "run3 confidences differ from run1".into())?;
    within(e.elapsed, 600.0)?;
    Ok(format!(
        "run1 {m1:.4} → run3 {m3:.4} (+{:.4}); τ* en {:.4} es {:.4} it {:.4}; {:.1}s",
        m3 - m1,
        taus[0],
        taus[1],
        taus[2],
        e.elapsed.as_secs_f64()
    ))
}

fn determinism(a: &EndToEnd, b: &EndToEnd) -> Outcome {
    let names = |e: &EndToEnd| e.files.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>();
    check(names(a) == names(b), || "different file sets".into())?;
    for ((name, x), (_, y)) in a.files.iter().zip(&b.files) {
        check(x == y, || format!("{name} differs between executions"))?;
    }
    Ok(format!("{} prediction and report files byte-identical", a.files.len()))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 gradient correctness", gradient_check()),
        ("2 sampler invariants", sampler_invariants()),
        ("3 metric oracles", metric_oracles()),
        ("4 chi-square", chi_square()),
        ("5 threshold-sweep optimality", threshold_sweep()),
        ("6 TPE efficacy", tpe_efficacy()),
        ("7 pruner contract", pruner_contract()),
        ("8 augmentation", augmentation()),
    ];
    let dirs = (tempfile::tempdir().expect("tempdir"), tempfile::tempdir().expect("tempdir"));
    match (end_to_end(dirs.0.path()), end_to_end(dirs.1.path())) {
        (Ok(a), Ok(b)) => {
            results.push(("9 end-to-end threshold gain", threshold_gain(&a)));
            results.push(("10 determinism", determinism(&a, &b)));
        }
        (Err(e), _) | (_, Err(e)) => {
            results.push(("9 end-to-end threshold gain", Err(e.clone())));
            results.push(("10 determinism", Err(e)));
        }
    }

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
