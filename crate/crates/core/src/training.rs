//! Two-phase training: multi-domain pre-training on veracity classification,
//! then per-domain fine-tuning on classification plus time-aware ranking.
//!
//! During fine-tuning with a ranking method, RMSProp updates every
//! classification tensor from the cross-entropy gradient and Adam updates the
//! ranking layer from the ListMLE gradient; both steps run on the same batch,
//! classification first. Without a ranking method the ranking layer is only
//! trained through the classification loss, as in pre-training.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::ClaimRecord;
use crate::error::{Error, Result};
use crate::metrics::{kendall_tau_b, macro_f1, micro_f1};
use crate::model::{
    backward, forward, init_parameters, DomainSchema, LossWeights, ModelParameters, ParamGroup,
};
use crate::optim::{self, Adam, RmsProp, CLASSIFICATION_LR, RANKING_LR};
use crate::oracle::RankingMethod;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a dev Micro F1 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub ranking_method: Option<RankingMethod>,
    pub classification_lr: f64,
    pub ranking_lr: f64,
    pub loss_weights: LossWeights,
    /// Independent pre-training runs; the best per domain is fine-tuned.
    pub pretrain_runs: usize,
    /// Pre-training epoch cap; `max_epochs` when unset.
    pub pretrain_epochs: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 32,
            max_epochs: 150,
            patience: 5,
            seed: 0,
            ranking_method: None,
            classification_lr: CLASSIFICATION_LR,
            ranking_lr: RANKING_LR,
            loss_weights: LossWeights::default(),
            pretrain_runs: 3,
            pretrain_epochs: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if self.pretrain_runs == 0 {
            return Err(Error::Config("pretrain_runs must be >= 1".into()));
        }
        if !(self.classification_lr > 0.0 && self.ranking_lr > 0.0) {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Fine-tuning domain, or `"*"` during pre-training.
    pub domain: String,
    pub classification_loss: f64,
    pub ranking_loss: f64,
    pub dev_micro_f1: f64,
    pub dev_macro_f1: f64,
    pub elapsed_seconds: f64,
}

pub fn write_log(path: impl AsRef<Path>, records: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for r in records {
        writeln!(file, "{}", serde_json::to_string(r)?).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct TrainingState {
    pub params: ModelParameters,
    /// Parameters from the epoch with the best dev Micro F1.
    pub best_params: ModelParameters,
    pub rmsprop: RmsProp,
    pub adam: Adam,
    pub epoch: usize,
    pub best_dev: f64,
    pub epochs_since_improvement: usize,
    pub log: Vec<EpochRecord>,
}

impl TrainingState {
    pub fn new(params: ModelParameters, config: &TrainingConfig) -> Self {
        TrainingState {
            best_params: params.clone(),
            params,
            rmsprop: RmsProp::new(config.classification_lr),
            adam: Adam::new(config.ranking_lr),
            epoch: 0,
            best_dev: f64::NEG_INFINITY,
            epochs_since_improvement: 0,
            log: Vec::new(),
        }
    }

    /// Records an epoch's dev score; returns true when training should stop.
    fn end_epoch(&mut self, dev: f64, patience: usize) -> bool {
        self.epoch += 1;
        if dev > self.best_dev {
            self.best_dev = dev;
            self.best_params = self.params.clone();
            self.epochs_since_improvement = 0;
        } else {
            self.epochs_since_improvement += 1;
        }
        self.epochs_since_improvement >= patience
    }
}

/// Gradients of one batch: mean cross-entropy over claims, summed ListMLE.
#[derive(Clone, Debug)]
pub struct BatchGradients {
    pub classification: ModelParameters,
    /// Only the ranking tensors are ever non-zero.
    pub ranking: ModelParameters,
    pub classification_loss: f64,
    pub ranking_loss: f64,
}

pub fn batch_gradients(
    params: &ModelParameters,
    schema: &DomainSchema,
    batch: &[&ClaimRecord],
    method: Option<RankingMethod>,
    weights: LossWeights,
) -> Result<BatchGradients> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let mut out = BatchGradients {
        classification: params.zeros_like(),
        ranking: params.zeros_like(),
        classification_loss: 0.0,
        ranking_loss: 0.0,
    };
    let scale = 1.0 / batch.len() as f64;
    for rec in batch {
        let gold = schema.local_label(&rec.claim.domain, &rec.claim.label)?;
        let trace = forward(&rec.claim, &rec.evidence, params, schema)?;
        let truth = method.map(|m| rec.ground_truth(m));
        let b = backward(&trace, gold, truth.as_ref(), weights, params, schema)?;
        out.classification.add_scaled(&b.classification, scale);
        out.classification_loss += scale * b.classification_loss;
        out.ranking_loss += b.ranking_loss;
        for (acc, g) in out
            .ranking
            .ranking_fc
            .weight
            .data
            .iter_mut()
            .zip(&b.ranking.weight.data)
        {
            *acc += g;
        }
        out.ranking.ranking_fc.bias[0] += b.ranking.bias[0];
    }
    if !out.classification_loss.is_finite() || !out.ranking_loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    Ok(out)
}

/// Applies one batch: the classification step, then (with a ranking method)
/// the ranking step. Returns the batch losses.
pub fn train_batch(
    state: &mut TrainingState,
    schema: &DomainSchema,
    batch: &[&ClaimRecord],
    method: Option<RankingMethod>,
    weights: LossWeights,
) -> Result<(f64, f64)> {
    let g = batch_gradients(&state.params, schema, batch, method, weights)?;
    match method {
        None => optim::step(
            &mut state.rmsprop,
            &mut state.params,
            &g.classification,
            &[ParamGroup::Classification, ParamGroup::Ranking],
        )?,
        Some(_) => {
            optim::step(
                &mut state.rmsprop,
                &mut state.params,
                &g.classification,
                &[ParamGroup::Classification],
            )?;
            optim::step(
                &mut state.adam,
                &mut state.params,
                &g.ranking,
                &[ParamGroup::Ranking],
            )?;
        }
    }
    Ok((g.classification_loss, g.ranking_loss))
}

/// Test-time scores over a set of claims.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub claims: usize,
    pub micro_f1: f64,
    pub macro_f1: f64,
    /// Mean Kendall tau-b of ranking scores against the method's ground
    /// truth, over claims where it is defined.
    pub mean_kendall_tau: Option<f64>,
}

/// Predicts every claim; Macro F1 averages over the labels of all domains
/// present in `records`. Claims are scored in parallel and reduced in order.
pub fn evaluate(
    params: &ModelParameters,
    schema: &DomainSchema,
    records: &[&ClaimRecord],
    method: Option<RankingMethod>,
) -> Result<Evaluation> {
    if records.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let per_claim: Vec<(usize, usize, Option<f64>)> = records
        .par_iter()
        .map(|rec| -> Result<_> {
            let d = schema.domain_index(&rec.claim.domain)?;
            let offset = schema.label_range(d).start;
            let gold = offset + schema.local_label(&rec.claim.domain, &rec.claim.label)?;
            let trace = forward(&rec.claim, &rec.evidence, params, schema)?;
            let tau = method.and_then(|m| kendall_tau_b(&trace.scores, &rec.ground_truth(m)));
            Ok((gold, offset + trace.predicted_label(), tau))
        })
        .collect::<Result<_>>()?;

    let golds: Vec<usize> = per_claim.iter().map(|c| c.0).collect();
    let preds: Vec<usize> = per_claim.iter().map(|c| c.1).collect();
    let mut labels: Vec<usize> = Vec::new();
    for (d, _) in schema.domains.iter().enumerate() {
        if records
            .iter()
            .any(|r| schema.domain_index(&r.claim.domain).ok() == Some(d))
        {
            labels.extend(schema.label_range(d));
        }
    }
    let taus: Vec<f64> = per_claim.iter().filter_map(|c| c.2).collect();
    Ok(Evaluation {
        claims: records.len(),
        micro_f1: micro_f1(&golds, &preds)?,
        macro_f1: macro_f1(&golds, &preds, &labels)?,
        mean_kendall_tau: (!taus.is_empty()).then(|| taus.iter().sum::<f64>() / taus.len() as f64),
    })
}

/// Batches per domain in each pre-training epoch: the smallest domain's
/// batch count.
pub fn pretrain_batch_cap(domain_sizes: &[usize], batch_size: usize) -> usize {
    domain_sizes
        .iter()
        .copied()
        .filter(|&n| n > 0)
        .min()
        .map_or(0, |n| n.div_ceil(batch_size))
}

fn by_domain<'a>(schema: &DomainSchema, records: &'a [ClaimRecord]) -> Vec<Vec<&'a ClaimRecord>> {
    let mut groups = vec![Vec::new(); schema.domains.len()];
    for r in records {
        if let Ok(d) = schema.domain_index(&r.claim.domain) {
            groups[d].push(r);
        }
    }
    groups
}

/// The batch schedule of one pre-training epoch: each domain shuffled, cut
/// into batches, capped at the smallest domain's batch count, and
/// interleaved round-robin.
pub fn pretrain_schedule<'a>(
    domains: &[Vec<&'a ClaimRecord>],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<&'a ClaimRecord>> {
    let sizes: Vec<usize> = domains.iter().map(Vec::len).collect();
    let cap = pretrain_batch_cap(&sizes, batch_size);
    let per_domain: Vec<Vec<Vec<&ClaimRecord>>> = domains
        .iter()
        .map(|recs| {
            let mut recs = recs.clone();
            recs.shuffle(rng);
            recs.chunks(batch_size)
                .take(cap)
                .map(<[_]>::to_vec)
                .collect()
        })
        .collect();
    let mut schedule = Vec::new();
    for b in 0..cap {
        for batches in &per_domain {
            if let Some(batch) = batches.get(b) {
                schedule.push(batch.clone());
            }
        }
    }
    schedule
}

fn run_seed(seed: u64, run: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(run as u64)
}

/// One pre-training run over all domains, early-stopped on pooled dev Micro F1.
pub fn pretrain(
    train: &[ClaimRecord],
    dev: &[ClaimRecord],
    schema: &DomainSchema,
    dims: (usize, usize),
    config: &TrainingConfig,
    run: usize,
) -> Result<TrainingState> {
    config.validate()?;
    let domains = by_domain(schema, train);
    if domains.iter().all(Vec::is_empty) {
        return Err(Error::Empty("training set"));
    }
    let seed = run_seed(config.seed, run);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = init_parameters(schema, dims.0, dims.1, seed)?;
    let mut state = TrainingState::new(params, config);

    let dev_refs: Vec<&ClaimRecord> = if dev.is_empty() {
        train.iter().collect()
    } else {
        dev.iter().collect()
    };
    let start = Instant::now();
    for _ in 0..config.pretrain_epochs.unwrap_or(config.max_epochs) {
        let schedule = pretrain_schedule(&domains, config.batch_size, &mut rng);
        let mut loss = 0.0;
        for batch in &schedule {
            loss += train_batch(&mut state, schema, batch, None, config.loss_weights)?.0;
        }
        let eval = evaluate(&state.params, schema, &dev_refs, None)?;
        state.log.push(EpochRecord {
            epoch: state.epoch + 1,
            domain: "*".into(),
            classification_loss: loss / schedule.len().max(1) as f64,
            ranking_loss: 0.0,
            dev_micro_f1: eval.micro_f1,
            dev_macro_f1: eval.macro_f1,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if state.end_epoch(eval.micro_f1, config.patience) {
            break;
        }
    }
    Ok(state)
}

/// Fine-tunes pre-trained parameters on one domain with `config.ranking_method`.
/// Stops early on the domain's dev Micro F1 (training claims stand in when
/// the domain has no dev claims); `best_params` holds the best epoch.
pub fn finetune(
    domain: &str,
    train: &[ClaimRecord],
    dev: &[ClaimRecord],
    schema: &DomainSchema,
    pretrained: &ModelParameters,
    config: &TrainingConfig,
) -> Result<TrainingState> {
    config.validate()?;
    schema.domain_index(domain)?;
    let mut claims: Vec<&ClaimRecord> = train.iter().filter(|r| r.claim.domain == domain).collect();
    if claims.is_empty() {
        return Err(Error::Empty("training claims for the fine-tuning domain"));
    }
    let mut dev_refs: Vec<&ClaimRecord> = dev.iter().filter(|r| r.claim.domain == domain).collect();
    if dev_refs.is_empty() {
        dev_refs = claims.clone();
    }
    let method = config.ranking_method;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = TrainingState::new(pretrained.clone(), config);
    let start = Instant::now();
    for _ in 0..config.max_epochs {
        claims.shuffle(&mut rng);
        let (mut cls, mut rank, mut batches) = (0.0, 0.0, 0usize);
        for batch in claims.chunks(config.batch_size) {
            let (c, r) = train_batch(&mut state, schema, batch, method, config.loss_weights)?;
            cls += c;
            rank += r;
            batches += 1;
        }
        let eval = evaluate(&state.params, schema, &dev_refs, None)?;
        state.log.push(EpochRecord {
            epoch: state.epoch + 1,
            domain: domain.to_string(),
            classification_loss: cls / batches as f64,
            ranking_loss: rank / batches as f64,
            dev_micro_f1: eval.micro_f1,
            dev_macro_f1: eval.macro_f1,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        if state.end_epoch(eval.micro_f1, config.patience) {
            break;
        }
    }
    Ok(state)
}

/// Index of the run with the highest dev metric; the earliest run wins ties.
pub fn select_best(metrics: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &m) in metrics.iter().enumerate() {
        if best.is_none_or(|b| m > metrics[b]) {
            best = Some(i);
        }
    }
    best
}

/// Runs `config.pretrain_runs` independent pre-trainings.
pub fn pretrain_runs(
    train: &[ClaimRecord],
    dev: &[ClaimRecord],
    schema: &DomainSchema,
    dims: (usize, usize),
    config: &TrainingConfig,
) -> Result<Vec<TrainingState>> {
    (0..config.pretrain_runs)
        .into_par_iter()
        .map(|run| pretrain(train, dev, schema, dims, config, run))
        .collect()
}

/// Picks, for `domain`, the pre-training run whose best parameters score the
/// highest dev Micro F1 on that domain.
pub fn select_pretrained_for<'a>(
    runs: &'a [TrainingState],
    domain: &str,
    train: &[ClaimRecord],
    dev: &[ClaimRecord],
    schema: &DomainSchema,
) -> Result<&'a TrainingState> {
    let mut refs: Vec<&ClaimRecord> = dev.iter().filter(|r| r.claim.domain == domain).collect();
    if refs.is_empty() {
        refs = train.iter().filter(|r| r.claim.domain == domain).collect();
    }
    let metrics: Vec<f64> = if refs.is_empty() {
        runs.iter().map(|r| r.best_dev).collect()
    } else {
        runs.iter()
            .map(|r| evaluate(&r.best_params, schema, &refs, None).map(|e| e.micro_f1))
            .collect::<Result<_>>()?
    };
    select_best(&metrics)
        .map(|i| &runs[i])
        .ok_or(Error::Empty("pre-training runs"))
}
