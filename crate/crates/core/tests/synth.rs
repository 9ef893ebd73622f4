use proptest::prelude::*;
use timerank::synth::{decode_label, generate_synthetic, DomainSpec, GeneratorSpec, CUE_DIMS};
use timerank::temporal::compute_delta_set;
use timerank::{build_ground_truth, RankingMethod};

fn small_spec() -> GeneratorSpec {
    GeneratorSpec {
        domains: vec![
            DomainSpec::new("alpha", &["true", "false", "mixed"], 60),
            DomainSpec::new("beta", &["yes", "no"], 40),
        ],
        claim_dim: 12,
        meta_dim: 2,
        ..GeneratorSpec::default()
    }
}

fn method() -> impl Strategy<Value = RankingMethod> {
    prop::sample::select(RankingMethod::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn planted_window_carries_the_gold_label(seed in any::<u64>(), planted in method()) {
        let spec = GeneratorSpec {
            time_sensitive_rate: 1.0,
            content_noise: 0.0,
            planted_method: planted,
            ..small_spec()
        };
        let data = generate_synthetic(&spec, seed).unwrap();
        let schema = &data.splits.schema;
        for rec in data.splits.all() {
            let latent = &data.latent[&rec.claim.claim_id];
            let d = schema.domain_index(&rec.claim.domain).unwrap();
            let gold = schema.local_label(&rec.claim.domain, &rec.claim.label).unwrap();
            prop_assert!(latent.time_sensitive);
            for (rank, &j) in latent.planted_order.iter().enumerate() {
                let decoded = decode_label(&rec.evidence.snippets()[j].evidence_vector, &data.prototypes[d]);
                prop_assert_eq!(decoded, latent.agreeing_labels[j]);
                prop_assert_eq!(decoded == gold, rank < spec.window, "rank {}", rank);
            }
        }
    }

    #[test]
    fn insensitive_claims_agree_everywhere(seed in any::<u64>()) {
        let spec = GeneratorSpec { time_sensitive_rate: 0.0, ..small_spec() };
        let data = generate_synthetic(&spec, seed).unwrap();
        for rec in data.splits.all() {
            let gold = data.splits.schema.local_label(&rec.claim.domain, &rec.claim.label).unwrap();
            let latent = &data.latent[&rec.claim.claim_id];
            prop_assert!(latent.agreeing_labels.iter().all(|&l| l == gold));
        }
    }

    #[test]
    fn visible_timestamps_match_the_planted_order(seed in any::<u64>(), planted in method()) {
        let spec = GeneratorSpec { missing_timestamp_rate: 0.0, planted_method: planted, ..small_spec() };
        let data = generate_synthetic(&spec, seed).unwrap();
        for rec in data.splits.all() {
            let latent = &data.latent[&rec.claim.claim_id];
            let deltas = compute_delta_set(&rec.claim, &rec.evidence);
            let visible: Vec<i64> = deltas.iter().map(|d| d.unwrap()).collect();
            prop_assert_eq!(&visible, &latent.deltas);
            if planted != RankingMethod::ClaimRecency {
                let truth = build_ground_truth(planted, &rec.claim, &rec.evidence);
                let grades = truth.grades();
                let planted_grades: Vec<_> = latent.planted_order.iter().map(|&j| grades[j].unwrap()).collect();
                prop_assert!(planted_grades.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }
}

#[test]
fn output_is_byte_identical_for_a_seed() {
    let spec = small_spec();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        generate_synthetic(&spec, 11)
            .unwrap()
            .splits
            .save(dir.path())
            .unwrap();
    }
    for name in ["schema.json", "train.jsonl", "dev.jsonl", "test.jsonl"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert!(!a.is_empty() && a == b, "{name}");
    }
    let other = tempfile::tempdir().unwrap();
    generate_synthetic(&spec, 12)
        .unwrap()
        .splits
        .save(other.path())
        .unwrap();
    assert_ne!(
        std::fs::read(dirs[0].path().join("train.jsonl")).unwrap(),
        std::fs::read(other.path().join("train.jsonl")).unwrap()
    );
}

#[test]
fn fully_undated_evidence_gives_empty_temporal_truths() {
    let spec = GeneratorSpec {
        missing_timestamp_rate: 1.0,
        ..small_spec()
    };
    let data = generate_synthetic(&spec, 5).unwrap();
    for rec in data.splits.all() {
        for m in RankingMethod::ALL {
            assert_eq!(rec.ground_truth(m).order.is_empty(), m.is_temporal());
        }
    }
}

#[test]
fn splits_partition_every_domain() {
    let spec = small_spec();
    let data = generate_synthetic(&spec, 2).unwrap();
    let s = &data.splits;
    assert_eq!(s.train.len() + s.dev.len() + s.test.len(), 100);
    for d in &spec.domains {
        for split in [&s.train, &s.dev, &s.test] {
            assert!(
                split.iter().any(|r| r.claim.domain == d.name),
                "{} missing from a split",
                d.name
            );
        }
    }
    assert_eq!(s.dims(), (12, 2));
    assert_eq!(data.prototypes[0][0].len(), 12 - CUE_DIMS);
    assert_eq!(data.latent.len(), 100);
}

#[test]
fn invalid_specs_are_rejected() {
    let too_narrow = GeneratorSpec {
        claim_dim: CUE_DIMS,
        ..small_spec()
    };
    assert!(generate_synthetic(&too_narrow, 0).is_err());
    let bad_rate = GeneratorSpec {
        missing_timestamp_rate: 1.5,
        ..small_spec()
    };
    assert!(generate_synthetic(&bad_rate, 0).is_err());
}
