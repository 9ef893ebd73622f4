//! Simulated ground-truth evidence rankings.
//!
//! Each temporal method turns the claim/evidence day offsets into a relevance
//! key (larger is more relevant). Snippets without a timestamp, or rejected
//! by the method's constraint, are masked out. Equal keys form a tie group.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::temporal::{compute_delta_set, Claim, DeltaSet, EvidenceSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    /// Later-published evidence is more relevant.
    EvidenceRecency,
    /// Only evidence published on or before the claim date, latest first.
    ClaimRecency,
    /// Evidence closest in time to the claim first.
    ClaimCloseness,
    /// Evidence closest to the medoid of the set's offsets first.
    EvidenceClustering,
    /// Search-engine position; timestamps are ignored.
    SearchRank,
}

impl RankingMethod {
    pub const ALL: [RankingMethod; 5] = [
        RankingMethod::EvidenceRecency,
        RankingMethod::ClaimRecency,
        RankingMethod::ClaimCloseness,
        RankingMethod::EvidenceClustering,
        RankingMethod::SearchRank,
    ];

    pub const TEMPORAL: [RankingMethod; 4] = [
        RankingMethod::EvidenceRecency,
        RankingMethod::ClaimRecency,
        RankingMethod::ClaimCloseness,
        RankingMethod::EvidenceClustering,
    ];

    pub fn is_temporal(self) -> bool {
        self != RankingMethod::SearchRank
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RankingMethod::EvidenceRecency => "evidence_recency",
            RankingMethod::ClaimRecency => "claim_recency",
            RankingMethod::ClaimCloseness => "claim_closeness",
            RankingMethod::EvidenceClustering => "evidence_clustering",
            RankingMethod::SearchRank => "search_rank",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            RankingMethod::EvidenceRecency => "Evidence Recency",
            RankingMethod::ClaimRecency => "Claim Recency",
            RankingMethod::ClaimCloseness => "Claim Closeness",
            RankingMethod::EvidenceClustering => "Evidence Clustering",
            RankingMethod::SearchRank => "Search Ranking",
        }
    }
}

impl fmt::Display for RankingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        RankingMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::Invalid(format!("unknown ranking method `{s}`")))
    }
}

/// A relevance ordering over the included snippets of one evidence set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthRanking {
    /// Snippet indices, most relevant first.
    pub order: Vec<usize>,
    /// Consecutive runs of `order` sharing the same relevance.
    pub tie_groups: Vec<Vec<usize>>,
    /// One flag per snippet of the evidence set.
    pub included: Vec<bool>,
}

impl GroundTruthRanking {
    /// Ranks snippets by `keys` (larger is more relevant); `None` masks a snippet.
    pub fn from_keys(keys: &[Option<i64>]) -> Self {
        let mut idx: Vec<usize> = (0..keys.len()).filter(|&j| keys[j].is_some()).collect();
        // Stable, so ties keep ascending snippet index.
        idx.sort_by_key(|&j| std::cmp::Reverse(keys[j]));

        let mut tie_groups: Vec<Vec<usize>> = Vec::new();
        let mut last = None;
        for &j in &idx {
            if last.is_some() && last == keys[j] {
                tie_groups.last_mut().expect("open group").push(j);
            } else {
                tie_groups.push(vec![j]);
            }
            last = keys[j];
        }
        GroundTruthRanking {
            order: idx,
            tie_groups,
            included: keys.iter().map(Option::is_some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.included.len()
    }

    pub fn is_empty(&self) -> bool {
        self.included.is_empty()
    }

    pub fn included_count(&self) -> usize {
        self.order.len()
    }

    /// Tie-group position of each snippet (0 = most relevant), `None` when masked.
    pub fn grades(&self) -> Vec<Option<usize>> {
        let mut grades = vec![None; self.included.len()];
        for (g, group) in self.tie_groups.iter().enumerate() {
            for &j in group {
                grades[j] = Some(g);
            }
        }
        grades
    }

    /// Checks the structural invariants: `order` is a permutation of the
    /// included indices and the tie groups partition it contiguously.
    pub fn validate(&self) -> Result<()> {
        let k = self.included.len();
        let mut seen = vec![false; k];
        for &j in &self.order {
            if j >= k || seen[j] || !self.included[j] {
                return Err(Error::Invalid(format!("bad index {j} in ranking order")));
            }
            seen[j] = true;
        }
        if seen != self.included {
            return Err(Error::Invalid(
                "ranking order does not cover the mask".into(),
            ));
        }
        let flat: Vec<usize> = self.tie_groups.iter().flatten().copied().collect();
        if flat != self.order || self.tie_groups.iter().any(Vec::is_empty) {
            return Err(Error::Invalid(
                "tie groups do not partition the order".into(),
            ));
        }
        Ok(())
    }
}

/// Element minimizing the summed absolute distance to all elements; the
/// earliest position wins ties.
pub fn medoid(values: &[i64]) -> Result<i64> {
    if values.is_empty() {
        return Err(Error::Empty("medoid of an empty sequence"));
    }
    let column_sum = |&a: &i64| -> i128 {
        values
            .iter()
            .map(|&b| (i128::from(a) - i128::from(b)).abs())
            .sum()
    };
    let mut best = values[0];
    let mut best_sum = column_sum(&values[0]);
    for v in &values[1..] {
        let s = column_sum(v);
        if s < best_sum {
            best = *v;
            best_sum = s;
        }
    }
    Ok(best)
}

/// Relevance keys for a temporal method; larger keys rank first.
pub fn temporal_keys(method: RankingMethod, deltas: &DeltaSet) -> Vec<Option<i64>> {
    match method {
        RankingMethod::EvidenceRecency => deltas.clone(),
        RankingMethod::ClaimRecency => deltas.iter().map(|d| d.filter(|&d| d <= 0)).collect(),
        RankingMethod::ClaimCloseness => deltas.iter().map(|d| d.map(|d| -d.abs())).collect(),
        RankingMethod::EvidenceClustering => {
            let present: Vec<i64> = deltas.iter().flatten().copied().collect();
            match medoid(&present) {
                Ok(m) => deltas.iter().map(|d| d.map(|d| -(d - m).abs())).collect(),
                Err(_) => vec![None; deltas.len()],
            }
        }
        // Search positions are not a function of the day offsets.
        RankingMethod::SearchRank => vec![None; deltas.len()],
    }
}

pub fn evidence_recency_ranking(deltas: &DeltaSet) -> GroundTruthRanking {
    GroundTruthRanking::from_keys(&temporal_keys(RankingMethod::EvidenceRecency, deltas))
}

pub fn claim_recency_ranking(deltas: &DeltaSet) -> GroundTruthRanking {
    GroundTruthRanking::from_keys(&temporal_keys(RankingMethod::ClaimRecency, deltas))
}

pub fn claim_closeness_ranking(deltas: &DeltaSet) -> GroundTruthRanking {
    GroundTruthRanking::from_keys(&temporal_keys(RankingMethod::ClaimCloseness, deltas))
}

pub fn evidence_clustering_ranking(deltas: &DeltaSet) -> GroundTruthRanking {
    GroundTruthRanking::from_keys(&temporal_keys(RankingMethod::EvidenceClustering, deltas))
}

pub fn search_rank_ranking(set: &EvidenceSet) -> GroundTruthRanking {
    let keys: Vec<Option<i64>> = set
        .snippets()
        .iter()
        .map(|s| Some(-i64::from(s.search_rank)))
        .collect();
    GroundTruthRanking::from_keys(&keys)
}

pub fn build_ground_truth(
    method: RankingMethod,
    claim: &Claim,
    set: &EvidenceSet,
) -> GroundTruthRanking {
    match method {
        RankingMethod::SearchRank => search_rank_ranking(set),
        RankingMethod::EvidenceRecency => evidence_recency_ranking(&compute_delta_set(claim, set)),
        RankingMethod::ClaimRecency => claim_recency_ranking(&compute_delta_set(claim, set)),
        RankingMethod::ClaimCloseness => claim_closeness_ranking(&compute_delta_set(claim, set)),
        RankingMethod::EvidenceClustering => {
            evidence_clustering_ranking(&compute_delta_set(claim, set))
        }
    }
}
