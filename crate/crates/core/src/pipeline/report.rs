use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::artifact::{json_with_provenance, write_file, InputHasher, Provenance, RunArtifact};
use super::config::{PipelineConfig, RunId};
use crate::corpus::{chi_square_independence, label_language_table, load_corpus, Corpus, Lang};
use crate::error::{Error, Result};
use crate::evaluation::{cross_validate, MetricsReport};
use crate::features::EmbeddingMatrix;
use crate::training::LossConfig;

pub fn label_distribution_csv(corpus: &Corpus, prov: &Provenance) -> Result<String> {
    let table = label_language_table(corpus)?;
    let mut out = prov.comment();
    out.push_str("lang,label_0,label_1,total,positive_rate\n");
    for lang in Lang::ALL {
        let [n0, n1] = table.counts[lang.index()];
        let _ = writeln!(out, "{lang},{n0},{n1},{},{}", n0 + n1, table.positive_rate(lang));
    }
    let [c0, c1] = table.col_totals();
    let total = c0 + c1;
    let _ = writeln!(out, "all,{c0},{c1},{total},{}", c1 as f64 / total as f64);
    Ok(out)
}

#[derive(Serialize)]
struct ChiSquareReport {
    table: [[u64; 2]; 3],
    statistic: f64,
    dof: u32,
    p_value: f64,
}

pub fn chi_square_json(corpus: &Corpus, prov: &Provenance) -> Result<Vec<u8>> {
    let table = label_language_table(corpus)?;
    let chi = chi_square_independence(&table)?;
    Ok(json_with_provenance(
        prov,
        &ChiSquareReport {
            table: table.counts,
            statistic: chi.statistic,
            dof: chi.dof,
            p_value: chi.p_value,
        },
    ))
}

fn corpus_provenance(cfg: &PipelineConfig) -> Result<Provenance> {
    Ok(Provenance {
        seed: cfg.seed,
        input_sha256: InputHasher::default().file(&cfg.corpus_path)?.finish(),
    })
}

/// Descriptive analytics: label distribution and the independence test.
pub fn analyze(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let corpus = load_corpus(&cfg.corpus_path)?;
    let prov = corpus_provenance(cfg)?;
    let dir = cfg.output_dir.join("analysis");
    let files = vec![
        (dir.join("label_distribution.csv"), label_distribution_csv(&corpus, &prov)?.into_bytes()),
        (dir.join("chi_square.json"), chi_square_json(&corpus, &prov)?),
    ];
    for (p, b) in &files {
        write_file(p, b)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}

/// Hinge-loss linear model under k-fold CV for every configured embedding
/// file. A file with N rows is matched to the native corpus, one with 3N
/// rows to its back-translated form.
pub fn baseline(cfg: &PipelineConfig) -> Result<PathBuf> {
    let corpus = load_corpus(&cfg.corpus_path)?;
    let mut sources: Vec<&Path> = cfg.baseline_embeddings.iter().map(PathBuf::as_path).collect();
    sources.extend(cfg.embeddings_run1_path.as_deref());
    sources.extend(cfg.embeddings_run2_path.as_deref());
    if sources.is_empty() {
        return Err(Error::Config(
            "analyze --baseline needs baseline_embeddings or run embedding paths".into(),
        ));
    }
    let mut augmented: Option<Corpus> = None;
    let mut hasher = InputHasher::default();
    hasher.file(&cfg.corpus_path)?;
    let train = cfg.seeded().0;
    let loss = LossConfig::hinge(1.0);

    let mut rows = String::from("source,source_tag,rows,macro_f1_mean,ci_low,ci_high,f1_pos,f1_neg,roc_auc\n");
    for path in sources {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        hasher.part(&bytes);
        let emb = EmbeddingMatrix::from_bytes(&bytes)?;
        if emb.rows() != corpus.len() && emb.rows() != 3 * corpus.len() {
            return Err(Error::Alignment {
                found: emb.rows(),
                expected: corpus.len(),
            });
        }
        let target = if emb.rows() == corpus.len() {
            &corpus
        } else {
            if augmented.is_none() {
                let t = crate::augment::Translator::new(cfg.translator.clone())?;
                augmented = Some(crate::augment::augment_corpus(&corpus, &t)?);
            }
            augmented.as_ref().expect("just set")
        };
        let cv = cross_validate(target, &emb, &train, &loss, cfg.k, cfg.seed)?;
        let mean = |f: fn(&MetricsReport) -> f64| {
            cv.folds.iter().map(|o| f(&o.report)).sum::<f64>() / cv.folds.len() as f64
        };
        let auc = mean(|r| r.roc_auc.unwrap_or(f64::NAN));
        let _ = writeln!(
            rows,
            "{},{},{},{},{},{},{},{},{}",
            path.file_name().map(|n| n.to_string_lossy()).unwrap_or_default(),
            emb.source_tag(),
            emb.rows(),
            cv.macro_f1.mean,
            cv.macro_f1.lower(),
            cv.macro_f1.upper(),
            mean(|r| r.f1_pos),
            mean(|r| r.f1_neg),
            auc
        );
    }
    let prov = Provenance {
        seed: cfg.seed,
        input_sha256: hasher.finish(),
    };
    let path = cfg.output_dir.join("analysis").join("baseline.csv");
    write_file(&path, format!("{}{rows}", prov.comment()).as_bytes())?;
    Ok(path)
}

const METRIC_COLUMNS: &str =
    "run,scope,support,accuracy,precision_pos,recall_pos,f1_pos,precision_neg,recall_neg,f1_neg,macro_f1,roc_auc";

fn metric_cells(r: &MetricsReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{}",
        r.support,
        r.accuracy,
        r.precision_pos,
        r.recall_pos,
        r.f1_pos,
        r.precision_neg,
        r.recall_neg,
        r.f1_neg,
        r.macro_f1,
        r.roc_auc.map(|v| v.to_string()).unwrap_or_default()
    )
}

fn scopes(r: &MetricsReport) -> Vec<(String, &MetricsReport)> {
    let mut out = vec![("overall".to_string(), r)];
    for lang in Lang::ALL {
        if let Some(sub) = r.per_language.get(&lang) {
            out.push((lang.code().to_string(), sub));
        }
    }
    out
}

/// Per-run, per-scope metric table. When a threshold run and its parent are
/// both present the table gains a `delta_macro_f1` column (run minus parent).
pub fn metric_table_csv(artifacts: &[RunArtifact]) -> String {
    let find = |id: RunId| artifacts.iter().find(|a| a.run_id() == id);
    let with_delta = artifacts
        .iter()
        .any(|a| a.run_id().parent().is_some_and(|p| find(p).is_some()));
    let mut out = String::from(METRIC_COLUMNS);
    if with_delta {
        out.push_str(",delta_macro_f1");
    }
    out.push('\n');
    for art in artifacts {
        let parent = art.run_id().parent().and_then(find);
        for (scope, r) in scopes(&art.summary.metrics) {
            let _ = write!(out, "{},{scope},{}", art.run_id(), metric_cells(r));
            if with_delta {
                out.push(',');
                let base = parent.and_then(|p| {
                    let m = &p.summary.metrics;
                    if scope == "overall" {
                        Some(m)
                    } else {
                        scope.parse::<Lang>().ok().and_then(|l| m.per_language.get(&l))
                    }
                });
                if let Some(b) = base {
                    let _ = write!(out, "{}", r.macro_f1 - b.macro_f1);
                }
            }
            out.push('\n');
        }
    }
    out
}

fn hpo_history_csv(artifacts: &[RunArtifact]) -> String {
    let mut out = String::new();
    for art in artifacts {
        let Some(study) = &art.study else { continue };
        let csv = study.to_csv();
        let mut lines = csv.lines();
        let header = lines.next().unwrap_or_default();
        if out.is_empty() {
            let _ = writeln!(out, "run,{header}");
        }
        for line in lines {
            let _ = writeln!(out, "{},{line}", art.run_id());
        }
    }
    if out.is_empty() {
        out.push_str("run,trial_id,state,value,best_so_far\n");
    }
    out
}

fn curve_csv(artifacts: &[RunArtifact]) -> String {
    let mut out = String::from("run,lang,tau,macro_f1,tpr,fpr\n");
    for art in artifacts {
        for p in &art.curve {
            let _ = writeln!(out, "{},{},{},{},{},{}", art.run_id(), p.lang, p.tau, p.macro_f1, p.tpr, p.fpr);
        }
    }
    out
}

/// Plot-ready data for a set of runs, written under `out_dir`.
pub fn emit_report(corpus: &Corpus, artifacts: &[RunArtifact], seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    if artifacts.is_empty() {
        return Err(Error::Config("emit_report needs at least one run artifact".into()));
    }
    let mut hasher = InputHasher::default();
    hasher.part(corpus.to_jsonl().as_bytes());
    for art in artifacts {
        hasher.part(art.run_id().as_str().as_bytes());
        hasher.part(art.provenance().input_sha256.as_bytes());
    }
    let prov = Provenance {
        seed,
        input_sha256: hasher.finish(),
    };
    let with_comment = |body: String| format!("{}{body}", prov.comment()).into_bytes();
    let files = vec![
        (out_dir.join("label_distribution.csv"), label_distribution_csv(corpus, &prov)?.into_bytes()),
        (out_dir.join("chi_square.json"), chi_square_json(corpus, &prov)?),
        (out_dir.join("hpo_history.csv"), with_comment(hpo_history_csv(artifacts))),
        (out_dir.join("threshold_curve.csv"), with_comment(curve_csv(artifacts))),
        (out_dir.join("metric_table.csv"), with_comment(metric_table_csv(artifacts))),
    ];
    for (p, b) in &files {
        write_file(p, b)?;
    }
    Ok(files.into_iter().map(|(p, _)| p).collect())
}
