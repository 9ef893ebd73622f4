use crate::error::{Error, Result};
use crate::listmle::{canonical_permutation, listmle_gradient, permutation_log_prob};
use crate::oracle::GroundTruthRanking;
use crate::temporal::{Claim, EvidenceSet};

use super::{dot, Dense, DomainSchema, ModelParameters};

/// Negative slope of the label layer's LeakyReLU.
pub const LEAKY_SLOPE: f64 = 0.01;

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

fn relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// `[c; e; c − e; c ∘ e; m]`
pub fn fuse(claim: &[f64], evidence: &[f64], meta: &[f64]) -> Result<Vec<f64>> {
    if evidence.len() != claim.len() {
        return Err(Error::Dimension {
            block: "evidence",
            expected: claim.len(),
            actual: evidence.len(),
        });
    }
    let d = claim.len();
    let mut f = Vec::with_capacity(4 * d + meta.len());
    f.extend_from_slice(claim);
    f.extend_from_slice(evidence);
    f.extend(claim.iter().zip(evidence).map(|(c, e)| c - e));
    f.extend(claim.iter().zip(evidence).map(|(c, e)| c * e));
    f.extend_from_slice(meta);
    Ok(f)
}

/// `ReLU(w·f + b)`
pub fn ranking_score(f: &[f64], ranking_fc: &Dense) -> f64 {
    (dot(ranking_fc.weight.row(0), f) + ranking_fc.bias[0]).max(0.0)
}

struct LabelPass {
    projected: Vec<f64>,
    similarities: Vec<f64>,
    pre_activation: Vec<f64>,
    label_vector: Vec<f64>,
}

fn label_pass(
    f: &[f64],
    domain: usize,
    params: &ModelParameters,
    schema: &DomainSchema,
) -> LabelPass {
    let projected = params.fusion_projection.matvec(f);
    let mut similarities = params.label_embeddings.matvec(&projected);
    let own = schema.label_range(domain);
    for (t, s) in similarities.iter_mut().enumerate() {
        if !own.contains(&t) {
            *s = 0.0;
        }
    }
    let pre_activation = params.label_fc[domain].apply(&similarities);
    let label_vector = pre_activation.iter().map(|&a| leaky(a)).collect();
    LabelPass {
        projected,
        similarities,
        pre_activation,
        label_vector,
    }
}

/// Domain-specific label vector for one fused claim/evidence representation:
/// similarities to every label embedding, foreign-domain entries zeroed, then
/// the domain's affine map and a LeakyReLU.
pub fn domain_label_vector(
    f: &[f64],
    domain: &str,
    params: &ModelParameters,
    schema: &DomainSchema,
) -> Result<Vec<f64>> {
    let d = schema.domain_index(domain)?;
    if f.len() != params.fused_dim() {
        return Err(Error::Dimension {
            block: "fused",
            expected: params.fused_dim(),
            actual: f.len(),
        });
    }
    Ok(label_pass(f, d, params, schema).label_vector)
}

/// Every intermediate of one claim's forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    pub domain: usize,
    pub fused: Vec<Vec<f64>>,
    pub projected: Vec<Vec<f64>>,
    /// Masked label similarities, length T per snippet.
    pub similarities: Vec<Vec<f64>>,
    pub label_pre_activations: Vec<Vec<f64>>,
    pub label_vectors: Vec<Vec<f64>>,
    pub score_pre_activations: Vec<f64>,
    /// Ranking scores, one per snippet, all ≥ 0.
    pub scores: Vec<f64>,
    pub logits: Vec<f64>,
    pub probabilities: Vec<f64>,
}

impl ForwardTrace {
    /// Local index of the most probable label; the lowest index wins ties.
    pub fn predicted_label(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probabilities.iter().enumerate() {
            if p > self.probabilities[best] {
                best = i;
            }
        }
        best
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_dim(block: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::Dimension {
            block,
            expected,
            actual,
        });
    }
    Ok(())
}

pub fn forward(
    claim: &Claim,
    set: &EvidenceSet,
    params: &ModelParameters,
    schema: &DomainSchema,
) -> Result<ForwardTrace> {
    let domain = schema.domain_index(&claim.domain)?;
    check_dim("claim", params.claim_dim, claim.claim_vector.len())?;
    check_dim("metadata", params.meta_dim, claim.metadata_vector.len())?;

    let n = schema.domains[domain].labels.len();
    let k = set.len();
    let mut trace = ForwardTrace {
        domain,
        fused: Vec::with_capacity(k),
        projected: Vec::with_capacity(k),
        similarities: Vec::with_capacity(k),
        label_pre_activations: Vec::with_capacity(k),
        label_vectors: Vec::with_capacity(k),
        score_pre_activations: Vec::with_capacity(k),
        scores: Vec::with_capacity(k),
        logits: vec![0.0; n],
        probabilities: Vec::new(),
    };
    for snippet in set.snippets() {
        let f = fuse(
            &claim.claim_vector,
            &snippet.evidence_vector,
            &claim.metadata_vector,
        )?;
        let pass = label_pass(&f, domain, params, schema);
        let u = dot(params.ranking_fc.weight.row(0), &f) + params.ranking_fc.bias[0];
        let r = u.max(0.0);
        for (z, l) in trace.logits.iter_mut().zip(&pass.label_vector) {
            *z += r * l;
        }
        trace.fused.push(f);
        trace.projected.push(pass.projected);
        trace.similarities.push(pass.similarities);
        trace.label_pre_activations.push(pass.pre_activation);
        trace.label_vectors.push(pass.label_vector);
        trace.score_pre_activations.push(u);
        trace.scores.push(r);
    }
    if trace.logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::NonFinite(format!(
            "logits of claim `{}`",
            claim.claim_id
        )));
    }
    trace.probabilities = softmax(&trace.logits);
    Ok(trace)
}

/// Cross-entropy of the gold label (local index within the claim's domain).
pub fn classification_loss(trace: &ForwardTrace, gold: usize) -> f64 {
    -trace.probabilities[gold].ln()
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LossWeights {
    pub classification: f64,
    pub ranking: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            classification: 1.0,
            ranking: 1.0,
        }
    }
}

/// Gradients from one claim, kept apart per loss.
#[derive(Clone, Debug)]
pub struct Backward {
    /// Cross-entropy gradient for every tensor, the ranking layer included.
    /// Trainers decide whether the ranking layer consumes it.
    pub classification: ModelParameters,
    /// ListMLE gradient for the ranking layer only.
    pub ranking: Dense,
    /// ListMLE gradient with respect to each snippet's ranking score.
    pub score_gradients: Vec<f64>,
    pub classification_loss: f64,
    pub ranking_loss: f64,
}

pub fn backward(
    trace: &ForwardTrace,
    gold: usize,
    truth: Option<&GroundTruthRanking>,
    weights: LossWeights,
    params: &ModelParameters,
    schema: &DomainSchema,
) -> Result<Backward> {
    let k = trace.scores.len();
    let n = trace.probabilities.len();
    if gold >= n {
        return Err(Error::Invalid(format!(
            "gold label {gold} outside {n} domain labels"
        )));
    }
    let own = schema.label_range(trace.domain);
    let fc = &params.label_fc[trace.domain];

    let mut grads = params.zeros_like();
    let mut dlogits: Vec<f64> = trace.probabilities.clone();
    dlogits[gold] -= 1.0;
    for g in &mut dlogits {
        *g *= weights.classification;
    }

    for j in 0..k {
        let f = &trace.fused[j];
        let r = trace.scores[j];

        let dr = dot(&dlogits, &trace.label_vectors[j]);
        let da: Vec<f64> = dlogits
            .iter()
            .zip(&trace.label_pre_activations[j])
            .map(|(&g, &a)| r * g * leaky_grad(a))
            .collect();

        let gfc = &mut grads.label_fc[trace.domain];
        gfc.weight.add_outer(&da, &trace.similarities[j]);
        for (b, g) in gfc.bias.iter_mut().zip(&da) {
            *b += g;
        }

        let mut ds = fc.weight.matvec_t(&da);
        for (t, s) in ds.iter_mut().enumerate() {
            if !own.contains(&t) {
                *s = 0.0;
            }
        }
        grads.label_embeddings.add_outer(&ds, &trace.projected[j]);
        let dz = params.label_embeddings.matvec_t(&ds);
        grads.fusion_projection.add_outer(&dz, f);

        let du = dr * relu_grad(trace.score_pre_activations[j]);
        grads.ranking_fc.weight.add_outer(&[du], f);
        grads.ranking_fc.bias[0] += du;
    }

    let mut ranking = Dense::zeros(1, params.fused_dim());
    let (score_gradients, ranking_loss) = match truth {
        Some(truth) => {
            let mut g = listmle_gradient(&trace.scores, truth)?;
            for v in &mut g {
                *v *= weights.ranking;
            }
            for ((&gj, &pre), f) in g.iter().zip(&trace.score_pre_activations).zip(&trace.fused) {
                let du = gj * relu_grad(pre);
                ranking.weight.add_outer(&[du], f);
                ranking.bias[0] += du;
            }
            let loss = -permutation_log_prob(&trace.scores, &canonical_permutation(truth));
            (g, loss)
        }
        None => (vec![0.0; k], 0.0),
    };

    Ok(Backward {
        classification: grads,
        ranking,
        score_gradients,
        classification_loss: classification_loss(trace, gold),
        ranking_loss,
    })
}
