//! The veracity head: claim/evidence fusion, a domain-masked label embedding
//! layer, an evidence ranking layer, and a ranking-weighted softmax over the
//! claim domain's labels. Forward and backward passes are written by hand.

mod forward;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forward::{
    backward, classification_loss, domain_label_vector, forward, fuse, ranking_score, Backward,
    ForwardTrace, LossWeights, LEAKY_SLOPE,
};

/// Width of the label embedding space.
pub const LABEL_DIM: usize = 16;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// `self · x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    /// `selfᵀ · y`
    pub fn matvec_t(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &yr) in y.iter().enumerate() {
            if yr != 0.0 {
                for (o, &w) in out.iter_mut().zip(self.row(r)) {
                    *o += yr * w;
                }
            }
        }
        out
    }

    /// `self += a ⊗ b`
    pub fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!((a.len(), b.len()), (self.rows, self.cols));
        for (r, &ar) in a.iter().enumerate() {
            if ar != 0.0 {
                let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
                for (w, &bc) in row.iter_mut().zip(b) {
                    *w += ar * bc;
                }
            }
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An affine map `W·x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(out: usize, inp: usize) -> Self {
        Dense {
            weight: Matrix::zeros(out, inp),
            bias: vec![0.0; out],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.weight.matvec(x);
        for (y, b) in y.iter_mut().zip(&self.bias) {
            *y += b;
        }
        y
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainLabels {
    pub name: String,
    pub labels: Vec<String>,
}

/// Domains and their label vocabularies. Labels of all domains share one
/// global index space, laid out domain after domain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainSchema {
    pub domains: Vec<DomainLabels>,
}

impl DomainSchema {
    pub fn new(domains: Vec<DomainLabels>) -> Result<Self> {
        if domains.is_empty() {
            return Err(Error::Empty("domain schema"));
        }
        for (i, d) in domains.iter().enumerate() {
            if d.labels.is_empty() {
                return Err(Error::Config(format!("domain `{}` has no labels", d.name)));
            }
            if domains[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::Config(format!("duplicate domain `{}`", d.name)));
            }
            let mut sorted = d.labels.clone();
            sorted.sort();
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Config(format!(
                    "duplicate label in domain `{}`",
                    d.name
                )));
            }
        }
        Ok(DomainSchema { domains })
    }

    pub fn total_labels(&self) -> usize {
        self.domains.iter().map(|d| d.labels.len()).sum()
    }

    pub fn domain_index(&self, name: &str) -> Result<usize> {
        self.domains
            .iter()
            .position(|d| d.name == name)
            .ok_or_else(|| Error::UnknownDomain(name.to_string()))
    }

    /// Global label indices owned by domain `d`.
    pub fn label_range(&self, d: usize) -> Range<usize> {
        let start: usize = self.domains[..d].iter().map(|x| x.labels.len()).sum();
        start..start + self.domains[d].labels.len()
    }

    /// Position of `label` within its domain's label list.
    pub fn local_label(&self, domain: &str, label: &str) -> Result<usize> {
        let d = self.domain_index(domain)?;
        self.domains[d]
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel {
                domain: domain.to_string(),
                label: label.to_string(),
            })
    }

    pub fn global_label(&self, domain: &str, label: &str) -> Result<usize> {
        let d = self.domain_index(domain)?;
        Ok(self.label_range(d).start + self.local_label(domain, label)?)
    }
}

/// Which optimizer owns a parameter tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Classification,
    Ranking,
}

/// All trainable tensors. The same layout doubles as a gradient container.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParameters {
    pub claim_dim: usize,
    pub meta_dim: usize,
    /// T × label_dim
    pub label_embeddings: Matrix,
    /// label_dim × fused_dim
    pub fusion_projection: Matrix,
    /// One map from all T similarities to the domain's labels, per domain.
    pub label_fc: Vec<Dense>,
    /// fused_dim → 1
    pub ranking_fc: Dense,
}

fn xavier_fill(m: &mut Matrix, rng: &mut impl Rng) {
    let bound = xavier_bound(m.rows, m.cols);
    for w in &mut m.data {
        *w = rng.random_range(-bound..=bound);
    }
}

/// Half-width of the Xavier-uniform interval for an `out × in` weight.
pub fn xavier_bound(rows: usize, cols: usize) -> f64 {
    (6.0 / (rows + cols) as f64).sqrt()
}

impl ModelParameters {
    pub fn zeros(schema: &DomainSchema, claim_dim: usize, meta_dim: usize) -> Self {
        let t = schema.total_labels();
        let fused = fused_dim(claim_dim, meta_dim);
        ModelParameters {
            claim_dim,
            meta_dim,
            label_embeddings: Matrix::zeros(t, LABEL_DIM),
            fusion_projection: Matrix::zeros(LABEL_DIM, fused),
            label_fc: schema
                .domains
                .iter()
                .map(|d| Dense::zeros(d.labels.len(), t))
                .collect(),
            ranking_fc: Dense::zeros(1, fused),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_tensor_mut(|_, t| t.fill(0.0));
        z
    }

    pub fn fused_dim(&self) -> usize {
        fused_dim(self.claim_dim, self.meta_dim)
    }

    /// Visits every tensor in a fixed order, tagged with its owning group.
    pub fn tensors(&self) -> Vec<(ParamGroup, &[f64])> {
        let mut out: Vec<(ParamGroup, &[f64])> = vec![
            (ParamGroup::Classification, &self.label_embeddings.data),
            (ParamGroup::Classification, &self.fusion_projection.data),
        ];
        for fc in &self.label_fc {
            out.push((ParamGroup::Classification, &fc.weight.data));
            out.push((ParamGroup::Classification, &fc.bias));
        }
        out.push((ParamGroup::Ranking, &self.ranking_fc.weight.data));
        out.push((ParamGroup::Ranking, &self.ranking_fc.bias));
        out
    }

    pub fn for_each_tensor_mut(&mut self, mut f: impl FnMut(ParamGroup, &mut [f64])) {
        f(ParamGroup::Classification, &mut self.label_embeddings.data);
        f(ParamGroup::Classification, &mut self.fusion_projection.data);
        for fc in &mut self.label_fc {
            f(ParamGroup::Classification, &mut fc.weight.data);
            f(ParamGroup::Classification, &mut fc.bias);
        }
        f(ParamGroup::Ranking, &mut self.ranking_fc.weight.data);
        f(ParamGroup::Ranking, &mut self.ranking_fc.bias);
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self += scale · other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParameters, scale: f64) {
        let src: Vec<Vec<f64>> = other
            .tensors()
            .into_iter()
            .map(|(_, t)| t.to_vec())
            .collect();
        let mut i = 0;
        self.for_each_tensor_mut(|_, t| {
            for (a, b) in t.iter_mut().zip(&src[i]) {
                *a += scale * b;
            }
            i += 1;
        });
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Checks tensor shapes against `schema` and the stored dimensions.
    pub fn check_shapes(&self, schema: &DomainSchema) -> Result<()> {
        let expected = ModelParameters::zeros(schema, self.claim_dim, self.meta_dim);
        let shapes = |p: &ModelParameters| -> Vec<usize> {
            p.tensors().iter().map(|(_, t)| t.len()).collect()
        };
        if shapes(self) != shapes(&expected)
            || self.label_embeddings.rows != expected.label_embeddings.rows
            || self.fusion_projection.cols != expected.fusion_projection.cols
        {
            return Err(Error::Invalid(
                "parameter shapes do not match the domain schema".into(),
            ));
        }
        Ok(())
    }
}

pub fn fused_dim(claim_dim: usize, meta_dim: usize) -> usize {
    4 * claim_dim + meta_dim
}

/// Xavier-uniform weights, zero biases; identical for identical seeds.
pub fn init_parameters(
    schema: &DomainSchema,
    claim_dim: usize,
    meta_dim: usize,
    seed: u64,
) -> Result<ModelParameters> {
    if claim_dim == 0 || meta_dim == 0 {
        return Err(Error::Config(
            "claim and metadata dimensions must be >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParameters::zeros(schema, claim_dim, meta_dim);
    xavier_fill(&mut p.label_embeddings, &mut rng);
    xavier_fill(&mut p.fusion_projection, &mut rng);
    for fc in &mut p.label_fc {
        xavier_fill(&mut fc.weight, &mut rng);
    }
    xavier_fill(&mut p.ranking_fc.weight, &mut rng);
    Ok(p)
}
