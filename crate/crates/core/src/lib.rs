//! Time-aware evidence ranking for claim veracity prediction.
//!
//! Evidence timestamps are turned into simulated ground-truth rankings under
//! several temporal relevance hypotheses ([`oracle`]), a ranking layer is
//! trained against them with ListMLE ([`listmle`]) while a ranking-weighted
//! classifier predicts domain-specific veracity labels ([`model`],
//! [`training`]), and both are evaluated ([`metrics`], [`experiment`]).

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod listmle;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod synth;
pub mod temporal;
pub mod training;

pub use error::{Error, Result};
pub use oracle::{build_ground_truth, GroundTruthRanking, RankingMethod};
pub use temporal::{parse_date, Claim, Date, EvidenceSet, EvidenceSnippet};
