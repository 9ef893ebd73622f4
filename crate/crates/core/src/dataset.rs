//! Line-delimited JSON claim files and train/dev/test data directories.
//!
//! One line per claim:
//!
//! ```json
//! {"claim_id":"c1","domain":"abcd","label":"true","claim_timestamp":"2020-01-10",
//!  "claim_vector":[...],"metadata_vector":[...],
//!  "evidence":[{"snippet_id":"c1-0","snippet_text":"Jan 3, 2020 ...","timestamp":null,
//!               "vector":[...],"search_rank":1}]}
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DomainLabels, DomainSchema};
use crate::oracle::{build_ground_truth, GroundTruthRanking, RankingMethod};
use crate::temporal::{parse_date, Claim, Date, EvidenceSet, EvidenceSnippet};

pub const TRAIN_FILE: &str = "train.jsonl";
pub const DEV_FILE: &str = "dev.jsonl";
pub const TEST_FILE: &str = "test.jsonl";
pub const SCHEMA_FILE: &str = "schema.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct EvidenceLine {
    snippet_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    snippet_text: Option<String>,
    #[serde(default)]
    timestamp: Option<Date>,
    vector: Vec<f64>,
    search_rank: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ClaimLine {
    claim_id: String,
    domain: String,
    label: String,
    claim_timestamp: Date,
    claim_vector: Vec<f64>,
    metadata_vector: Vec<f64>,
    evidence: Vec<EvidenceLine>,
}

/// A claim together with its evidence set.
#[derive(Clone, Debug, PartialEq)]
pub struct ClaimRecord {
    pub claim: Claim,
    pub evidence: EvidenceSet,
}

impl ClaimRecord {
    pub fn ground_truth(&self, method: RankingMethod) -> GroundTruthRanking {
        build_ground_truth(method, &self.claim, &self.evidence)
    }

    pub fn to_json_line(&self) -> Result<String> {
        let line = ClaimLine {
            claim_id: self.claim.claim_id.clone(),
            domain: self.claim.domain.clone(),
            label: self.claim.label.clone(),
            claim_timestamp: self.claim.timestamp,
            claim_vector: self.claim.claim_vector.clone(),
            metadata_vector: self.claim.metadata_vector.clone(),
            evidence: self
                .evidence
                .snippets()
                .iter()
                .map(|s| EvidenceLine {
                    snippet_id: s.snippet_id.clone(),
                    snippet_text: s.snippet_text.clone(),
                    timestamp: s.timestamp,
                    vector: s.evidence_vector.clone(),
                    search_rank: s.search_rank,
                })
                .collect(),
        };
        Ok(serde_json::to_string(&line)?)
    }

    pub fn from_json_line(text: &str) -> Result<Self> {
        let line: ClaimLine = serde_json::from_str(text)?;
        let check = |v: &[f64], what: &str| -> Result<()> {
            if v.iter().all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(Error::NonFinite(format!(
                    "{what} of claim `{}`",
                    line.claim_id
                )))
            }
        };
        check(&line.claim_vector, "claim_vector")?;
        check(&line.metadata_vector, "metadata_vector")?;
        let d = line.claim_vector.len();
        let mut snippets = Vec::with_capacity(line.evidence.len());
        for e in line.evidence {
            check(&e.vector, "evidence vector")?;
            if e.vector.len() != d {
                return Err(Error::Dimension {
                    block: "evidence",
                    expected: d,
                    actual: e.vector.len(),
                });
            }
            snippets.push(EvidenceSnippet {
                snippet_id: e.snippet_id,
                snippet_text: e.snippet_text,
                timestamp: e.timestamp,
                evidence_vector: e.vector,
                search_rank: e.search_rank,
            });
        }
        Ok(ClaimRecord {
            evidence: EvidenceSet::new(snippets)?,
            claim: Claim {
                claim_id: line.claim_id,
                domain: line.domain,
                label: line.label,
                timestamp: line.claim_timestamp,
                claim_vector: line.claim_vector,
                metadata_vector: line.metadata_vector,
            },
        })
    }
}

/// Reads a claim file. Every claim must share the first claim's vector
/// dimensions.
pub fn read_jsonl(path: impl AsRef<Path>) -> Result<Vec<ClaimRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records: Vec<ClaimRecord> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            message,
        };
        let rec = ClaimRecord::from_json_line(&line).map_err(|e| parse_err(e.to_string()))?;
        if let Some(first) = records.first() {
            let want = (
                first.claim.claim_vector.len(),
                first.claim.metadata_vector.len(),
            );
            let got = (
                rec.claim.claim_vector.len(),
                rec.claim.metadata_vector.len(),
            );
            if want != got {
                return Err(parse_err(format!(
                    "vector dimensions {got:?} differ from the file's {want:?}"
                )));
            }
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn write_jsonl(path: impl AsRef<Path>, records: &[ClaimRecord]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for r in records {
        writeln!(out, "{}", r.to_json_line()?).map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Domains sorted by name, each with its labels sorted.
pub fn infer_schema<'a>(
    records: impl IntoIterator<Item = &'a ClaimRecord>,
) -> Result<DomainSchema> {
    let mut map: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for r in records {
        let labels = map.entry(&r.claim.domain).or_default();
        if !labels.contains(&r.claim.label.as_str()) {
            labels.push(&r.claim.label);
        }
    }
    DomainSchema::new(
        map.into_iter()
            .map(|(name, mut labels)| {
                labels.sort_unstable();
                DomainLabels {
                    name: name.to_string(),
                    labels: labels.into_iter().map(String::from).collect(),
                }
            })
            .collect(),
    )
}

/// Train/dev/test splits with the schema they share.
#[derive(Clone, Debug)]
pub struct DataSplits {
    pub schema: DomainSchema,
    pub train: Vec<ClaimRecord>,
    pub dev: Vec<ClaimRecord>,
    pub test: Vec<ClaimRecord>,
}

impl DataSplits {
    /// Loads `train.jsonl`, `dev.jsonl` and `test.jsonl` from `dir`, using
    /// `schema.json` when present and otherwise inferring the schema.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let split = |name: &str| -> Result<Vec<ClaimRecord>> {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(Error::io(
                    &path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "missing data split"),
                ));
            }
            read_jsonl(path)
        };
        let (train, dev, test) = (split(TRAIN_FILE)?, split(DEV_FILE)?, split(TEST_FILE)?);
        let schema_path = dir.join(SCHEMA_FILE);
        let schema = if schema_path.is_file() {
            read_schema(&schema_path)?
        } else {
            infer_schema(train.iter().chain(&dev).chain(&test))?
        };
        let splits = DataSplits {
            schema,
            train,
            dev,
            test,
        };
        splits.validate()?;
        Ok(splits)
    }

    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_schema(dir.join(SCHEMA_FILE), &self.schema)?;
        write_jsonl(dir.join(TRAIN_FILE), &self.train)?;
        write_jsonl(dir.join(DEV_FILE), &self.dev)?;
        write_jsonl(dir.join(TEST_FILE), &self.test)
    }

    /// Labels registered, vector dimensions shared across splits.
    pub fn validate(&self) -> Result<()> {
        if self.train.is_empty() {
            return Err(Error::Empty("training split"));
        }
        let dims = self.dims();
        for r in self.all() {
            self.schema.local_label(&r.claim.domain, &r.claim.label)?;
            let got = (r.claim.claim_vector.len(), r.claim.metadata_vector.len());
            if got != dims {
                return Err(Error::Invalid(format!(
                    "claim `{}` has dimensions {got:?}, expected {dims:?}",
                    r.claim.claim_id
                )));
            }
        }
        Ok(())
    }

    /// `(claim/evidence dimension, metadata dimension)` of the training split.
    pub fn dims(&self) -> (usize, usize) {
        let c = &self.train[0].claim;
        (c.claim_vector.len(), c.metadata_vector.len())
    }

    pub fn all(&self) -> impl Iterator<Item = &ClaimRecord> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }
}

/// Reads one JSON document, such as a configuration file.
pub fn read_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<DomainSchema> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema: DomainSchema = serde_json::from_str(&text)?;
    DomainSchema::new(schema.domains)
}

pub fn write_schema(path: impl AsRef<Path>, schema: &DomainSchema) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(schema)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Outcome of filling snippet timestamps from their text.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FillReport {
    pub snippets: usize,
    pub already_dated: usize,
    pub filled: usize,
    pub undated: usize,
    /// Share of snippets carrying a timestamp afterwards.
    pub dated_share: f64,
}

/// Sets missing snippet timestamps from a date at the start of the snippet text.
pub fn fill_timestamps(records: &mut [ClaimRecord]) -> FillReport {
    let mut report = FillReport::default();
    for r in records.iter_mut() {
        for s in r.evidence.snippets_mut() {
            report.snippets += 1;
            if s.timestamp.is_some() {
                report.already_dated += 1;
                continue;
            }
            match s.snippet_text.as_deref().and_then(parse_date) {
                Some(d) => {
                    s.timestamp = Some(d);
                    report.filled += 1;
                }
                None => report.undated += 1,
            }
        }
    }
    if report.snippets > 0 {
        report.dated_share = (report.already_dated + report.filled) as f64 / report.snippets as f64;
    }
    report
}

/// One line of a ground-truth ranking file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingRecord {
    pub claim_id: String,
    pub method: RankingMethod,
    #[serde(flatten)]
    pub ranking: GroundTruthRanking,
}

pub fn rankings_for(records: &[ClaimRecord], method: RankingMethod) -> Vec<RankingRecord> {
    records
        .iter()
        .map(|r| RankingRecord {
            claim_id: r.claim.claim_id.clone(),
            method,
            ranking: r.ground_truth(method),
        })
        .collect()
}

pub fn write_rankings(path: impl AsRef<Path>, rankings: &[RankingRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for r in rankings {
        text.push_str(&serde_json::to_string(r)?);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn split_paths(dir: &Path) -> [PathBuf; 3] {
    [
        dir.join(TRAIN_FILE),
        dir.join(DEV_FILE),
        dir.join(TEST_FILE),
    ]
}
