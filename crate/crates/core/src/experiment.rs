//! Per-domain comparison of ranking methods, reported as a result table with
//! one row per domain, a column pair (Micro/Macro F1) per method, the best
//! temporal method per domain, and a cross-domain average row.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dataset::{ClaimRecord, DataSplits};
use crate::error::{Error, Result};
use crate::model::ModelParameters;
use crate::oracle::RankingMethod;
use crate::training::{evaluate, finetune, pretrain_runs, select_pretrained_for, TrainingConfig};

/// A result column: the base model (no ranking supervision) or a ranking method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Variant(pub Option<RankingMethod>);

impl Variant {
    pub const BASE: Variant = Variant(None);

    /// Base, search ranking, then the four temporal methods.
    pub fn all() -> Vec<Variant> {
        [Variant::BASE, Variant(Some(RankingMethod::SearchRank))]
            .into_iter()
            .chain(RankingMethod::TEMPORAL.iter().map(|&m| Variant(Some(m))))
            .collect()
    }

    pub fn title(self) -> &'static str {
        self.0.map_or("Base Model", RankingMethod::title)
    }

    pub fn is_temporal(self) -> bool {
        self.0.is_some_and(RankingMethod::is_temporal)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0.map_or("base", RankingMethod::as_str))
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "base" | "none" => Ok(Variant::BASE),
            other => Ok(Variant(Some(other.parse()?))),
        }
    }
}

impl Serialize for Variant {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub training: TrainingConfig,
    pub methods: Vec<Variant>,
    /// Training seeds; scores are averaged over them. Empty means
    /// `training.seed` alone.
    pub seeds: Vec<u64>,
    /// Domains to fine-tune and report; empty means every domain.
    pub domains: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            training: TrainingConfig::default(),
            methods: Variant::all(),
            seeds: Vec::new(),
            domains: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    fn seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![self.training.seed]
        } else {
            self.seeds.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub micro_f1: f64,
    pub macro_f1: f64,
}

impl Scores {
    fn max(self, other: Scores) -> Scores {
        Scores {
            micro_f1: self.micro_f1.max(other.micro_f1),
            macro_f1: self.macro_f1.max(other.macro_f1),
        }
    }

    fn mean(items: impl IntoIterator<Item = Scores>) -> Option<Scores> {
        let (mut sum, mut n) = (Scores::default(), 0usize);
        for s in items {
            sum.micro_f1 += s.micro_f1;
            sum.macro_f1 += s.macro_f1;
            n += 1;
        }
        (n > 0).then(|| Scores {
            micro_f1: sum.micro_f1 / n as f64,
            macro_f1: sum.macro_f1 / n as f64,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub domain: String,
    /// Scores per variant, in the table's column order.
    pub scores: Vec<Scores>,
    /// Componentwise maximum over the temporal columns, when any are present.
    pub time_aware: Option<Scores>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub methods: Vec<Variant>,
    pub seeds: Vec<u64>,
    pub rows: Vec<ResultRow>,
    /// Column means over the domain rows.
    pub average: ResultRow,
}

fn time_aware(methods: &[Variant], scores: &[Scores]) -> Option<Scores> {
    methods
        .iter()
        .zip(scores)
        .filter(|(m, _)| m.is_temporal())
        .map(|(_, s)| *s)
        .reduce(Scores::max)
}

impl ResultTable {
    /// Builds the table from per-domain scores in `methods` order.
    pub fn new(methods: Vec<Variant>, seeds: Vec<u64>, cells: Vec<(String, Vec<Scores>)>) -> Self {
        let rows: Vec<ResultRow> = cells
            .into_iter()
            .map(|(domain, scores)| ResultRow {
                time_aware: time_aware(&methods, &scores),
                domain,
                scores,
            })
            .collect();
        let average = ResultRow {
            domain: "Average".into(),
            scores: (0..methods.len())
                .map(|c| Scores::mean(rows.iter().map(|r| r.scores[c])).unwrap_or_default())
                .collect(),
            time_aware: Scores::mean(rows.iter().filter_map(|r| r.time_aware)),
        };
        ResultTable {
            methods,
            seeds,
            rows,
            average,
        }
    }

    pub fn column(&self, method: Variant) -> Option<usize> {
        self.methods.iter().position(|&m| m == method)
    }

    pub fn get(&self, domain: &str, method: Variant) -> Option<Scores> {
        let c = self.column(method)?;
        self.rows
            .iter()
            .find(|r| r.domain == domain)
            .map(|r| r.scores[c])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let mut header = String::from("| Domain |");
        let mut rule = String::from("|---|");
        let titles = self.methods.iter().map(|m| m.title()).chain(
            self.rows
                .iter()
                .any(|r| r.time_aware.is_some())
                .then_some("Time-Aware Ranking"),
        );
        let mut columns = 0;
        for t in titles {
            let _ = write!(header, " {t} Micro F1 | {t} Macro F1 |");
            rule.push_str("---:|---:|");
            columns += 1;
        }
        let _ = writeln!(out, "{header}\n{rule}");
        for row in self.rows.iter().chain(std::iter::once(&self.average)) {
            let _ = write!(out, "| {} |", row.domain);
            for s in row
                .scores
                .iter()
                .chain(row.time_aware.as_ref())
                .take(columns)
            {
                let _ = write!(out, " {:.4} | {:.4} |", s.micro_f1, s.macro_f1);
            }
            out.push('\n');
        }
        out
    }
}

fn domain_claims<'a>(records: &'a [ClaimRecord], domain: &str) -> Vec<&'a ClaimRecord> {
    records
        .iter()
        .filter(|r| r.claim.domain == domain)
        .collect()
}

/// Test scores of every (domain, method) pair for one training seed.
fn run_seed(
    splits: &DataSplits,
    config: &ExperimentConfig,
    domains: &[String],
    seed: u64,
) -> Result<Vec<Vec<Scores>>> {
    let training = TrainingConfig {
        seed,
        ..config.training.clone()
    };
    let runs = pretrain_runs(
        &splits.train,
        &splits.dev,
        &splits.schema,
        splits.dims(),
        &training,
    )?;
    let pretrained: Vec<&ModelParameters> = domains
        .iter()
        .map(|d| {
            select_pretrained_for(&runs, d, &splits.train, &splits.dev, &splits.schema)
                .map(|s| &s.best_params)
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, Variant)> = (0..domains.len())
        .flat_map(|d| config.methods.iter().map(move |&m| (d, m)))
        .collect();
    let scores: Vec<Scores> = jobs
        .par_iter()
        .map(|&(d, method)| -> Result<Scores> {
            let cfg = TrainingConfig {
                ranking_method: method.0,
                ..training.clone()
            };
            let domain = &domains[d];
            let state = finetune(
                domain,
                &splits.train,
                &splits.dev,
                &splits.schema,
                pretrained[d],
                &cfg,
            )?;
            let test = domain_claims(&splits.test, domain);
            let eval = evaluate(&state.best_params, &splits.schema, &test, None)?;
            Ok(Scores {
                micro_f1: eval.micro_f1,
                macro_f1: eval.macro_f1,
            })
        })
        .collect::<Result<_>>()?;
    Ok(scores
        .chunks(config.methods.len())
        .map(<[Scores]>::to_vec)
        .collect())
}

/// Pre-trains once per seed (shared by every method), fine-tunes each
/// (domain, method) pair, and scores it on the domain's test claims.
pub fn run_experiment(splits: &DataSplits, config: &ExperimentConfig) -> Result<ResultTable> {
    config.training.validate()?;
    if config.methods.is_empty() {
        return Err(Error::Config("no methods to compare".into()));
    }
    let domains: Vec<String> = if config.domains.is_empty() {
        splits
            .schema
            .domains
            .iter()
            .map(|d| d.name.clone())
            .collect()
    } else {
        config.domains.clone()
    };
    for d in &domains {
        splits.schema.domain_index(d)?;
        if domain_claims(&splits.test, d).is_empty() {
            return Err(Error::Invalid(format!("domain `{d}` has no test claims")));
        }
    }
    let seeds = config.seeds();
    let per_seed: Vec<Vec<Vec<Scores>>> = seeds
        .iter()
        .map(|&s| run_seed(splits, config, &domains, s))
        .collect::<Result<_>>()?;
    let cells = domains
        .iter()
        .enumerate()
        .map(|(d, name)| {
            let scores = (0..config.methods.len())
                .map(|m| Scores::mean(per_seed.iter().map(|run| run[d][m])).unwrap_or_default())
                .collect();
            (name.clone(), scores)
        })
        .collect();
    Ok(ResultTable::new(config.methods.clone(), seeds, cells))
}
