//! Synthetic claim datasets with a planted temporal relevance signal.
//!
//! Every evidence vector carries label content in its leading dimensions and
//! one relevance cue per ranking method in its last [`CUE_DIMS`] dimensions.
//! For a time-sensitive claim, only the snippets ranked inside the planted
//! window by its domain's planted method agree with the gold label; the rest
//! agree with one wrong label. Each cue grows with its method's relevance, so
//! any method's order can be learned from the vectors alone, even where
//! timestamps are hidden, but only the planted one predicts the label.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{ClaimRecord, DataSplits};
use crate::error::{Error, Result};
use crate::model::{DomainLabels, DomainSchema};
use crate::oracle::{temporal_keys, RankingMethod};
use crate::temporal::{Claim, Date, EvidenceSet, EvidenceSnippet, MAX_EVIDENCE};

/// Trailing evidence dimensions holding relevance cues, one per
/// [`RankingMethod::ALL`] entry in that order.
pub const CUE_DIMS: usize = RankingMethod::ALL.len();

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub name: String,
    pub labels: Vec<String>,
    pub claims: usize,
    /// Overrides the spec-wide planted method for this domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted_method: Option<RankingMethod>,
}

impl DomainSpec {
    pub fn new(name: &str, labels: &[&str], claims: usize) -> Self {
        DomainSpec {
            name: name.into(),
            labels: labels.iter().map(|l| l.to_string()).collect(),
            claims,
            planted_method: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub domains: Vec<DomainSpec>,
    /// Claim and evidence vector width, cue dimensions included.
    pub claim_dim: usize,
    pub meta_dim: usize,
    pub evidence_per_claim: usize,
    pub planted_method: RankingMethod,
    /// Snippets at the top of the planted order that agree with the gold label.
    pub window: usize,
    /// Share of claims whose off-window evidence agrees with a wrong label.
    pub time_sensitive_rate: f64,
    /// Draw a fresh wrong label for every off-window snippet instead of one
    /// per claim.
    pub wrong_label_per_snippet: bool,
    pub missing_timestamp_rate: f64,
    /// Share of snippets published after their claim.
    pub post_claim_rate: f64,
    /// Largest distance in days between a claim and its evidence.
    pub horizon_days: i64,
    pub first_claim_date: Date,
    pub claim_date_span_days: i64,
    pub cue_scale: f64,
    pub cue_noise: f64,
    pub content_noise: f64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            domains: vec![
                DomainSpec::new("alpha", &["true", "false", "mixed"], 600),
                DomainSpec::new("beta", &["correct", "incorrect", "unproven"], 600),
            ],
            claim_dim: 32,
            meta_dim: 8,
            evidence_per_claim: MAX_EVIDENCE,
            planted_method: RankingMethod::EvidenceRecency,
            window: 3,
            time_sensitive_rate: 0.5,
            wrong_label_per_snippet: true,
            missing_timestamp_rate: 0.1,
            post_claim_rate: 0.5,
            horizon_days: 365,
            first_claim_date: Date::from_ymd(2014, 1, 1).expect("valid date"),
            claim_date_span_days: 1460,
            cue_scale: 2.0,
            cue_noise: 0.01,
            content_noise: 0.5,
            dev_fraction: 0.15,
            test_fraction: 0.15,
        }
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.domains.is_empty() {
            return bad("at least one domain is required".into());
        }
        for d in &self.domains {
            if d.claims == 0 {
                return bad(format!("domain `{}` has no claims", d.name));
            }
            if d.labels.len() < 2 {
                return bad(format!("domain `{}` needs at least two labels", d.name));
            }
        }
        if self.claim_dim <= CUE_DIMS {
            return bad(format!(
                "claim_dim must exceed the {CUE_DIMS} cue dimensions"
            ));
        }
        if !(1..=MAX_EVIDENCE).contains(&self.evidence_per_claim) {
            return bad(format!("evidence_per_claim must be in 1..={MAX_EVIDENCE}"));
        }
        if self.window == 0 || self.window > self.evidence_per_claim {
            return bad(format!(
                "window {} must be in 1..={} (evidence_per_claim)",
                self.window, self.evidence_per_claim
            ));
        }
        for (name, rate) in [
            ("time_sensitive_rate", self.time_sensitive_rate),
            ("missing_timestamp_rate", self.missing_timestamp_rate),
            ("post_claim_rate", self.post_claim_rate),
            ("dev_fraction", self.dev_fraction),
            ("test_fraction", self.test_fraction),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return bad(format!("{name} must lie in [0, 1], got {rate}"));
            }
        }
        if self.dev_fraction + self.test_fraction >= 1.0 {
            return bad("dev_fraction + test_fraction must leave training claims".into());
        }
        if self.horizon_days < 1 || self.claim_date_span_days < 1 {
            return bad("horizon_days and claim_date_span_days must be >= 1".into());
        }
        let last = self
            .first_claim_date
            .add_days(self.claim_date_span_days + self.horizon_days);
        let first = self.first_claim_date.add_days(-self.horizon_days);
        if last.is_none() || first.is_none() {
            return bad("claim dates plus horizon leave the calendar range".into());
        }
        for (name, v) in [
            ("cue_scale", self.cue_scale),
            ("cue_noise", self.cue_noise),
            ("content_noise", self.content_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Result<DomainSchema> {
        DomainSchema::new(
            self.domains
                .iter()
                .map(|d| DomainLabels {
                    name: d.name.clone(),
                    labels: d.labels.clone(),
                })
                .collect(),
        )
    }
}

/// What the generator knows about a claim beyond the written record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentClaim {
    pub time_sensitive: bool,
    /// Day offsets of every snippet, hidden timestamps included.
    pub deltas: Vec<i64>,
    /// Snippet indices in planted relevance order.
    pub planted_order: Vec<usize>,
    /// Local label index each snippet's content agrees with.
    pub agreeing_labels: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub splits: DataSplits,
    /// Content prototypes per domain and label, `claim_dim - CUE_DIMS` wide.
    pub prototypes: Vec<Vec<Vec<f64>>>,
    pub latent: BTreeMap<String, LatentClaim>,
}

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Relevance of each snippet under `method`, scaled to roughly [-2, 1];
/// larger is more relevant.
fn relevance_cues(method: RankingMethod, deltas: &[i64], ranks: &[u32], horizon: i64) -> Vec<f64> {
    let h = horizon as f64;
    let present: Vec<Option<i64>> = deltas.iter().map(|&d| Some(d)).collect();
    match method {
        RankingMethod::SearchRank => {
            let k = ranks.len() as f64;
            ranks.iter().map(|&r| -f64::from(r) / k).collect()
        }
        RankingMethod::ClaimRecency => deltas
            .iter()
            .map(|&d| {
                if d <= 0 {
                    d as f64 / h
                } else {
                    -1.0 - d as f64 / h
                }
            })
            .collect(),
        RankingMethod::EvidenceClustering => temporal_keys(method, &present)
            .into_iter()
            .map(|k| k.expect("all offsets present") as f64 / (2.0 * h))
            .collect(),
        _ => temporal_keys(method, &present)
            .into_iter()
            .map(|k| k.expect("all offsets present") as f64 / h)
            .collect(),
    }
}

/// Snippet indices by descending key; the lower index first on equal keys.
fn order_by_key(keys: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
    order
}

struct Generated {
    record: ClaimRecord,
    latent: LatentClaim,
}

fn generate_claim(
    spec: &GeneratorSpec,
    domain: &DomainSpec,
    prototypes: &[Vec<f64>],
    claim_id: String,
    rng: &mut ChaCha8Rng,
) -> Result<Generated> {
    let k = spec.evidence_per_claim;
    let n_labels = domain.labels.len();
    let gold = rng.random_range(0..n_labels);
    let wrong = (gold + rng.random_range(1..n_labels)) % n_labels;
    let claim_date = spec
        .first_claim_date
        .add_days(rng.random_range(0..=spec.claim_date_span_days))
        .expect("validated date range");
    let time_sensitive = rng.random_bool(spec.time_sensitive_rate);

    let deltas: Vec<i64> = (0..k)
        .map(|_| {
            if rng.random_bool(spec.post_claim_rate) {
                rng.random_range(1..=spec.horizon_days)
            } else {
                -rng.random_range(0..=spec.horizon_days)
            }
        })
        .collect();
    let mut ranks: Vec<u32> = (1..=k as u32).collect();
    ranks.shuffle(rng);

    let cues: Vec<Vec<f64>> = RankingMethod::ALL
        .iter()
        .map(|&m| relevance_cues(m, &deltas, &ranks, spec.horizon_days))
        .collect();
    let planted = domain.planted_method.unwrap_or(spec.planted_method);
    let planted_slot = RankingMethod::ALL
        .iter()
        .position(|&m| m == planted)
        .expect("every method has a cue");
    let order = order_by_key(&cues[planted_slot]);
    let mut agreeing = vec![gold; k];
    if time_sensitive {
        for &j in &order[spec.window..] {
            agreeing[j] = if spec.wrong_label_per_snippet {
                (gold + rng.random_range(1..n_labels)) % n_labels
            } else {
                wrong
            };
        }
    }

    let content = Normal::new(0.0, spec.content_noise).expect("validated noise");
    let cue = Normal::new(0.0, spec.cue_noise).expect("validated noise");
    let mut snippets = Vec::with_capacity(k);
    for j in 0..k {
        let mut vector: Vec<f64> = prototypes[agreeing[j]]
            .iter()
            .map(|p| p + content.sample(rng))
            .collect();
        for method_cues in &cues {
            vector.push(spec.cue_scale * method_cues[j] + cue.sample(rng));
        }
        let date = claim_date
            .add_days(deltas[j])
            .expect("validated date range");
        let hidden = rng.random_bool(spec.missing_timestamp_rate);
        let snippet_id = format!("{claim_id}-{j}");
        let snippet_text = if hidden {
            format!("synthetic evidence {snippet_id}")
        } else {
            format!("{} ... synthetic evidence {snippet_id}", date_prefix(date))
        };
        snippets.push(EvidenceSnippet {
            snippet_id,
            snippet_text: Some(snippet_text),
            timestamp: (!hidden).then_some(date),
            evidence_vector: vector,
            search_rank: ranks[j],
        });
    }

    let claim = Claim {
        claim_id,
        domain: domain.name.clone(),
        label: domain.labels[gold].clone(),
        timestamp: claim_date,
        claim_vector: normals(rng, spec.claim_dim),
        metadata_vector: normals(rng, spec.meta_dim),
    };
    Ok(Generated {
        record: ClaimRecord {
            claim,
            evidence: EvidenceSet::new(snippets)?,
        },
        latent: LatentClaim {
            time_sensitive,
            deltas,
            planted_order: order,
            agreeing_labels: agreeing,
        },
    })
}

fn date_prefix(d: Date) -> String {
    const MONTHS: [&str; 12] = [
        "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
    ];
    format!(
        "{} {}, {}",
        MONTHS[d.month() as usize - 1],
        d.day(),
        d.year()
    )
}

/// Generates train/dev/test splits. Claims are split per domain, so every
/// split keeps the domain mix.
pub fn generate_synthetic(spec: &GeneratorSpec, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let schema = spec.schema()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let content_dim = spec.claim_dim - CUE_DIMS;
    let prototypes: Vec<Vec<Vec<f64>>> = spec
        .domains
        .iter()
        .map(|d| {
            d.labels
                .iter()
                .map(|_| normals(&mut rng, content_dim))
                .collect()
        })
        .collect();

    let (mut train, mut dev, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut latent = BTreeMap::new();
    for (d, domain) in spec.domains.iter().enumerate() {
        let mut generated = Vec::with_capacity(domain.claims);
        for i in 0..domain.claims {
            let id = format!("{}-{i:05}", domain.name);
            generated.push(generate_claim(spec, domain, &prototypes[d], id, &mut rng)?);
        }
        generated.shuffle(&mut rng);
        let n_test = (domain.claims as f64 * spec.test_fraction).round() as usize;
        let n_dev = (domain.claims as f64 * spec.dev_fraction).round() as usize;
        for (i, g) in generated.into_iter().enumerate() {
            latent.insert(g.record.claim.claim_id.clone(), g.latent);
            if i < n_test {
                test.push(g.record);
            } else if i < n_test + n_dev {
                dev.push(g.record);
            } else {
                train.push(g.record);
            }
        }
    }
    let splits = DataSplits {
        schema,
        train,
        dev,
        test,
    };
    splits.validate()?;
    Ok(SyntheticData {
        splits,
        prototypes,
        latent,
    })
}

/// Nearest content prototype to an evidence vector, ignoring the cue.
pub fn decode_label(vector: &[f64], prototypes: &[Vec<f64>]) -> usize {
    let dist = |p: &[f64]| -> f64 { p.iter().zip(vector).map(|(a, b)| (a - b).powi(2)).sum() };
    let mut best = 0;
    for (i, p) in prototypes.iter().enumerate() {
        if dist(p) < dist(&prototypes[best]) {
            best = i;
        }
    }
    best
}
