//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use timerank::model::{
    backward, forward, init_parameters, DomainLabels, DomainSchema, ForwardTrace, LossWeights,
    ModelParameters,
};
use timerank::{Claim, Date, EvidenceSet, EvidenceSnippet, GroundTruthRanking, RankingMethod};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn is_leap(y: i64) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

fn month_len(y: i64, m: u32) -> i64 {
    match m {
        2 if is_leap(y) => 29,
        2 => 28,
        4 | 6 | 9 | 11 => 30,
        _ => 31,
    }
}

/// Days since 0001-01-01, counted year by year and month by month.
pub fn ordinal(y: i32, m: u32, d: u32) -> i64 {
    let mut days = 0;
    for year in 1..i64::from(y) {
        days += if is_leap(year) { 366 } else { 365 };
    }
    for month in 1..m {
        days += month_len(i64::from(y), month);
    }
    days + i64::from(d) - 1
}

pub fn random_date(rng: &mut impl Rng, years: std::ops::RangeInclusive<i32>) -> Date {
    let y = rng.random_range(years);
    let m = rng.random_range(1..=12);
    let d = rng.random_range(1..=month_len(i64::from(y), m) as u32);
    Date::from_ymd(y, m, d).unwrap()
}

pub fn claim(
    domain: &str,
    label: &str,
    date: Date,
    d: usize,
    d_m: usize,
    rng: &mut impl Rng,
) -> Claim {
    Claim {
        claim_id: format!("c{}", rng.random::<u32>()),
        domain: domain.into(),
        label: label.into(),
        timestamp: date,
        claim_vector: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        metadata_vector: (0..d_m).map(|_| rng.random_range(-1.0..1.0)).collect(),
    }
}

/// A claim with 1..=10 snippets, mixed missing timestamps and frequent
/// duplicate offsets.
pub fn random_case(rng: &mut impl Rng) -> (Claim, EvidenceSet) {
    let date = random_date(rng, 2000..=2020);
    let c = claim("abcd", "true", date, 2, 1, rng);
    let k = rng.random_range(1..=10);
    let spread = if rng.random_bool(0.5) { 6 } else { 800 };
    let missing = rng.random_range(0.0..=0.6);
    let mut ranks: Vec<u32> = (1..=k as u32).collect();
    ranks.shuffle(rng);
    let snippets = (0..k)
        .map(|j| EvidenceSnippet {
            snippet_id: format!("s{j}"),
            snippet_text: None,
            timestamp: if rng.random_bool(missing) {
                None
            } else {
                date.add_days(rng.random_range(-spread..=spread))
            },
            evidence_vector: vec![0.0, 0.0],
            search_rank: ranks[j],
        })
        .collect();
    (c, EvidenceSet::new(snippets).unwrap())
}

/// Exhaustive argmin over the column sums of the pairwise distance matrix;
/// the first column wins ties.
pub fn brute_medoid(values: &[i64]) -> i64 {
    let n = values.len();
    let dist: Vec<Vec<i64>> = (0..n)
        .map(|i| (0..n).map(|j| (values[i] - values[j]).abs()).collect())
        .collect();
    let sums: Vec<i64> = (0..n).map(|j| (0..n).map(|i| dist[i][j]).sum()).collect();
    let mut best = 0;
    for j in 1..n {
        if sums[j] < sums[best] {
            best = j;
        }
    }
    values[best]
}

/// Relevance of each snippet under `method` straight from the hypothesis
/// definitions; `None` for snippets the method cannot rank.
pub fn reference_relevance(
    method: RankingMethod,
    claim: &Claim,
    set: &EvidenceSet,
) -> Vec<Option<i64>> {
    let deltas: Vec<Option<i64>> = set
        .snippets()
        .iter()
        .map(|s| {
            s.timestamp.map(|t| {
                let ord = |d: Date| ordinal(d.year(), d.month(), d.day());
                ord(t) - ord(claim.timestamp)
            })
        })
        .collect();
    match method {
        RankingMethod::EvidenceRecency => deltas,
        RankingMethod::ClaimRecency => deltas.iter().map(|d| d.filter(|&d| d <= 0)).collect(),
        RankingMethod::ClaimCloseness => deltas.iter().map(|d| d.map(|d| -d.abs())).collect(),
        RankingMethod::EvidenceClustering => {
            let present: Vec<i64> = deltas.iter().flatten().copied().collect();
            if present.is_empty() {
                return vec![None; deltas.len()];
            }
            let m = brute_medoid(&present);
            deltas.iter().map(|d| d.map(|d| -(d - m).abs())).collect()
        }
        RankingMethod::SearchRank => set
            .snippets()
            .iter()
            .map(|s| Some(-i64::from(s.search_rank)))
            .collect(),
    }
}

/// Checks a ranking against reference relevance: the mask, the order as a
/// permutation of included snippets, equal relevance inside tie groups, and
/// for every included pair, strictly more relevant snippets first.
pub fn check_ranking(truth: &GroundTruthRanking, relevance: &[Option<i64>]) -> Result<(), String> {
    let included: Vec<bool> = relevance.iter().map(Option::is_some).collect();
    if truth.included != included {
        return Err(format!(
            "mask {:?}, expected {:?}",
            truth.included, included
        ));
    }
    let mut sorted = truth.order.clone();
    sorted.sort_unstable();
    let expected: Vec<usize> = (0..relevance.len()).filter(|&j| included[j]).collect();
    if sorted != expected {
        return Err(format!(
            "order {:?} is not a permutation of {:?}",
            truth.order, expected
        ));
    }
    let flat: Vec<usize> = truth.tie_groups.iter().flatten().copied().collect();
    if flat != truth.order {
        return Err("tie groups do not partition the order".into());
    }
    let grades = truth.grades();
    for group in &truth.tie_groups {
        if group.iter().any(|&j| relevance[j] != relevance[group[0]]) {
            return Err(format!("tie group {group:?} mixes relevance"));
        }
    }
    for &a in &truth.order {
        for &b in &truth.order {
            let (ga, gb) = (grades[a].unwrap(), grades[b].unwrap());
            let (ra, rb) = (relevance[a].unwrap(), relevance[b].unwrap());
            if (ga < gb) != (ra > rb) {
                return Err(format!("pair ({a}, {b}) violates the relevance order"));
            }
        }
    }
    Ok(())
}

pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Plackett-Luce probability as a plain product of stagewise softmaxes.
pub fn pl_probability(scores: &[f64], perm: &[usize]) -> f64 {
    let mut p = 1.0;
    for u in 0..perm.len() {
        let denom: f64 = perm[u..].iter().map(|&j| scores[j].exp()).sum();
        p *= scores[perm[u]].exp() / denom;
    }
    p
}

/// Included snippets by descending key, ascending index among equal keys.
pub fn reference_target(keys: &[Option<i64>]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).filter(|&j| keys[j].is_some()).collect();
    idx.sort_by(|&a, &b| keys[b].cmp(&keys[a]).then(a.cmp(&b)));
    idx
}

pub fn random_keys(rng: &mut impl Rng, n: usize, mask_rate: f64) -> Vec<Option<i64>> {
    (0..n)
        .map(|_| (!rng.random_bool(mask_rate)).then(|| rng.random_range(0..4)))
        .collect()
}

/// `|a - n| <= 1e-4 * max(|a|, |n|)`, or both within 1e-8 of each other.
pub fn grad_close(analytic: f64, numeric: f64) -> bool {
    let diff = (analytic - numeric).abs();
    diff <= 1e-8 || diff <= 1e-4 * analytic.abs().max(numeric.abs())
}

pub fn central_difference(mut f: impl FnMut(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

pub fn schema(sizes: &[usize]) -> DomainSchema {
    DomainSchema::new(
        sizes
            .iter()
            .enumerate()
            .map(|(d, &n)| DomainLabels {
                name: format!("d{d}"),
                labels: (0..n).map(|l| format!("l{l}")).collect(),
            })
            .collect(),
    )
    .unwrap()
}

/// One randomized model configuration for gradient checks.
pub struct GradCase {
    pub schema: DomainSchema,
    pub params: ModelParameters,
    pub claim: Claim,
    pub set: EvidenceSet,
    pub gold: usize,
    pub keys: Vec<Option<i64>>,
    pub truth: GroundTruthRanking,
}

pub fn grad_case(seed: u64) -> GradCase {
    let mut rng = rng(seed);
    let sizes: Vec<usize> = (0..rng.random_range(1..=3))
        .map(|_| rng.random_range(1..=4))
        .collect();
    let schema = schema(&sizes);
    let d = rng.random_range(1..=5);
    let d_m = rng.random_range(1..=3);
    let mut params = init_parameters(&schema, d, d_m, seed).unwrap();
    params.for_each_tensor_mut(|_, t| {
        for v in t.iter_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    });
    params.ranking_fc.bias[0] = rng.random_range(0.0..1.0);
    let dom = rng.random_range(0..sizes.len());
    let date = random_date(&mut rng, 2010..=2012);
    let claim = claim(&format!("d{dom}"), "l0", date, d, d_m, &mut rng);
    let k = rng.random_range(1..=6);
    let set = EvidenceSet::new(
        (0..k)
            .map(|j| EvidenceSnippet {
                snippet_id: format!("s{j}"),
                snippet_text: None,
                timestamp: None,
                evidence_vector: (0..d).map(|_| rng.random_range(-2.0..2.0)).collect(),
                search_rank: j as u32 + 1,
            })
            .collect(),
    )
    .unwrap();
    let gold = rng.random_range(0..sizes[dom]);
    let keys = random_keys(&mut rng, k, 0.2);
    let truth = GroundTruthRanking::from_keys(&keys);
    GradCase {
        schema,
        params,
        claim,
        set,
        gold,
        keys,
        truth,
    }
}

fn activation_pattern(trace: &ForwardTrace) -> Vec<bool> {
    trace
        .score_pre_activations
        .iter()
        .chain(trace.label_pre_activations.iter().flatten())
        .map(|&a| a > 0.0)
        .collect()
}

/// Outcome of comparing every parameter gradient with finite differences.
#[derive(Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    /// Components whose finite-difference stencil crosses an activation kink.
    pub skipped: usize,
    pub failures: Vec<String>,
}

/// Compares both gradient sets from `backward` against central differences
/// of the cross-entropy and ListMLE losses, entry by entry.
pub fn check_model_gradients(case: &GradCase, h: f64) -> GradReport {
    let GradCase {
        schema,
        params,
        claim,
        set,
        gold,
        keys,
        truth,
    } = case;
    let trace = forward(claim, set, params, schema).unwrap();
    let base_pattern = activation_pattern(&trace);
    let grads = backward(
        &trace,
        *gold,
        Some(truth),
        LossWeights::default(),
        params,
        schema,
    )
    .unwrap();
    let ce_grads: Vec<Vec<f64>> = grads
        .classification
        .tensors()
        .iter()
        .map(|(_, t)| t.to_vec())
        .collect();
    let mut rank_grads: Vec<Vec<f64>> = params
        .zeros_like()
        .tensors()
        .iter()
        .map(|(_, t)| t.to_vec())
        .collect();
    let n = rank_grads.len();
    rank_grads[n - 2] = grads.ranking.weight.data.clone();
    rank_grads[n - 1] = grads.ranking.bias.clone();
    let target = reference_target(keys);

    let perturbed = |tensor: usize, index: usize, value: f64| -> ForwardTrace {
        let mut p = params.clone();
        let mut t = 0;
        p.for_each_tensor_mut(|_, data| {
            if t == tensor {
                data[index] = value;
            }
            t += 1;
        });
        forward(claim, set, &p, schema).unwrap()
    };

    let mut report = GradReport::default();
    for (t, (_, data)) in params.tensors().iter().enumerate() {
        for i in 0..data.len() {
            let x = data[i];
            let (plus, minus) = (perturbed(t, i, x + h), perturbed(t, i, x - h));
            if activation_pattern(&plus) != base_pattern
                || activation_pattern(&minus) != base_pattern
            {
                report.skipped += 1;
                continue;
            }
            let ce = |tr: &ForwardTrace| -tr.probabilities[*gold].ln();
            let lm = |tr: &ForwardTrace| -pl_probability(&tr.scores, &target).ln();
            let num_ce = (ce(&plus) - ce(&minus)) / (2.0 * h);
            let num_lm = (lm(&plus) - lm(&minus)) / (2.0 * h);
            report.checked += 1;
            if !grad_close(ce_grads[t][i], num_ce) {
                report.failures.push(format!(
                    "cross-entropy tensor {t}[{i}]: {} vs {num_ce}",
                    ce_grads[t][i]
                ));
            }
            if !grad_close(rank_grads[t][i], num_lm) {
                report.failures.push(format!(
                    "listmle tensor {t}[{i}]: {} vs {num_lm}",
                    rank_grads[t][i]
                ));
            }
        }
    }
    report
}
