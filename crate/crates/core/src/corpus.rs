//! Labeled multilingual corpora, label/language frequency tables and the
//! chi-square test of independence between language and label.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gamma_q;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    Es,
    It,
}

impl Lang {
    pub const ALL: [Lang; 3] = [Lang::En, Lang::Es, Lang::It];

    pub fn code(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Es => "es",
            Lang::It => "it",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Lang::En => "English",
            Lang::Es => "Spanish",
            Lang::It => "Italian",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// The two other languages, in enum order.
    pub fn alternates(self) -> [Lang; 2] {
        match self {
            Lang::En => [Lang::Es, Lang::It],
            Lang::Es => [Lang::En, Lang::It],
            Lang::It => [Lang::En, Lang::Es],
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Lang {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Lang::En),
            "es" => Ok(Lang::Es),
            "it" => Ok(Lang::It),
            other => Err(format!("unknown language {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    #[default]
    Native,
    Translated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub text: String,
    pub lang: Lang,
    pub label: u8,
    #[serde(default)]
    pub origin: Origin,
}

impl Example {
    pub fn new(id: impl Into<String>, text: impl Into<String>, lang: Lang, label: u8) -> Self {
        Example {
            id: id.into(),
            text: text.into(),
            lang,
            label,
            origin: Origin::Native,
        }
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.text.is_empty() {
            return Err(format!("empty text for id {:?}", self.id));
        }
        if self.label > 1 {
            return Err(format!("label must be 0 or 1, got {}", self.label));
        }
        if self.origin == Origin::Native && self.id.contains('#') {
            return Err(format!("native id {:?} must not contain '#'", self.id));
        }
        Ok(())
    }
}

/// Ordered, id-unique collection of examples. Row `i` aligns with row `i`
/// of any embedding matrix built for it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    examples: Vec<Example>,
}

impl Corpus {
    pub fn new(examples: Vec<Example>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(examples.len());
        for (i, ex) in examples.iter().enumerate() {
            ex.check().map_err(|message| Error::Validation { line: i + 1, message })?;
            if let Some(first) = seen.insert(ex.id.as_str(), i) {
                return Err(Error::Validation {
                    line: i + 1,
                    message: format!("duplicate id {:?} (first seen at line {})", ex.id, first + 1),
                });
            }
        }
        Ok(Corpus { examples })
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&Example> {
        self.examples.get(i)
    }

    pub fn labels(&self) -> Vec<u8> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn langs(&self) -> Vec<Lang> {
        self.examples.iter().map(|e| e.lang).collect()
    }

    pub fn into_examples(self) -> Vec<Example> {
        self.examples
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for ex in &self.examples {
            out.push_str(&serde_json::to_string(ex).expect("example serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}

#[derive(Deserialize)]
struct RawExample {
    id: String,
    text: String,
    lang: String,
    label: u8,
    #[serde(default)]
    origin: Origin,
}

/// Parses a corpus from JSONL text. Blank lines are skipped; line numbers in
/// errors are 1-based physical lines.
pub fn parse_corpus(text: &str) -> Result<Corpus> {
    let mut examples = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawExample = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        let lang = raw
            .lang
            .parse::<Lang>()
            .map_err(|message| Error::Validation { line: lineno, message })?;
        let ex = Example {
            id: raw.id,
            text: raw.text,
            lang,
            label: raw.label,
            origin: raw.origin,
        };
        ex.check()
            .map_err(|message| Error::Validation { line: lineno, message })?;
        if let Some(first) = seen.insert(ex.id.clone(), lineno) {
            return Err(Error::Validation {
                line: lineno,
                message: format!("duplicate id {:?} (first seen at line {first})", ex.id),
            });
        }
        examples.push(ex);
    }
    Ok(Corpus { examples })
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&text)
}

/// Label counts per language; rows en/es/it, columns label 0/1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    pub counts: [[u64; 2]; 3],
}

impl ContingencyTable {
    pub fn from_counts(counts: [[u64; 2]; 3]) -> Self {
        ContingencyTable { counts }
    }

    pub fn row_totals(&self) -> [u64; 3] {
        self.counts.map(|r| r[0] + r[1])
    }

    pub fn col_totals(&self) -> [u64; 2] {
        let mut out = [0; 2];
        for row in &self.counts {
            out[0] += row[0];
            out[1] += row[1];
        }
        out
    }

    pub fn grand_total(&self) -> u64 {
        self.row_totals().iter().sum()
    }

    /// Positive share per language, 0 for an empty row.
    pub fn positive_rate(&self, lang: Lang) -> f64 {
        let row = self.counts[lang.index()];
        let total = row[0] + row[1];
        if total == 0 {
            0.0
        } else {
            row[1] as f64 / total as f64
        }
    }
}

pub fn label_language_table(corpus: &Corpus) -> Result<ContingencyTable> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("label_language_table needs a non-empty corpus"));
    }
    let mut counts = [[0u64; 2]; 3];
    for ex in corpus.examples() {
        counts[ex.lang.index()][usize::from(ex.label)] += 1;
    }
    Ok(ContingencyTable { counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: u32,
    pub p_value: f64,
}

/// Pearson chi-square test of independence (no continuity correction).
pub fn chi_square_independence(table: &ContingencyTable) -> Result<ChiSquareResult> {
    let rows = table.row_totals();
    let cols = table.col_totals();
    let grand = table.grand_total();
    if grand == 0 {
        return Err(Error::DegenerateTable("grand total is zero".into()));
    }
    if let Some(l) = rows.iter().position(|&r| r == 0) {
        return Err(Error::DegenerateTable(format!(
            "row {} has zero total",
            Lang::ALL[l]
        )));
    }
    if let Some(c) = cols.iter().position(|&c| c == 0) {
        return Err(Error::DegenerateTable(format!("label {c} has zero total")));
    }
    let grand = grand as f64;
    let mut statistic = 0.0;
    for (r, row) in table.counts.iter().enumerate() {
        for (c, &observed) in row.iter().enumerate() {
            let expected = rows[r] as f64 * cols[c] as f64 / grand;
            let diff = observed as f64 - expected;
            statistic += diff * diff / expected;
        }
    }
    let dof = ((rows.len() - 1) * (cols.len() - 1)) as u32;
    let p_value = gamma_q(f64::from(dof) / 2.0, statistic / 2.0)?;
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value,
    })
}
