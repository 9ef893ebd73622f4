mod common;

use proptest::prelude::*;
use timerank::dataset::{fill_timestamps, read_jsonl, write_jsonl, ClaimRecord, DataSplits};
use timerank::synth::{generate_synthetic, DomainSpec, GeneratorSpec};
use timerank::Date;

fn record(seed: u64) -> ClaimRecord {
    let (claim, evidence) = common::random_case(&mut common::rng(seed));
    ClaimRecord { claim, evidence }
}

proptest! {
    #[test]
    fn json_lines_round_trip(seed in any::<u64>()) {
        let rec = record(seed);
        let back = ClaimRecord::from_json_line(&rec.to_json_line().unwrap()).unwrap();
        prop_assert_eq!(back, rec);
    }
}

#[test]
fn files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let records: Vec<ClaimRecord> = (0..20).map(record).collect();
    let path = dir.path().join("claims.jsonl");
    write_jsonl(&path, &records).unwrap();
    assert_eq!(read_jsonl(&path).unwrap(), records);

    let spec = GeneratorSpec {
        domains: vec![DomainSpec::new("a", &["x", "y"], 30)],
        claim_dim: 8,
        meta_dim: 1,
        ..GeneratorSpec::default()
    };
    let splits = generate_synthetic(&spec, 4).unwrap().splits;
    splits.save(dir.path().join("data")).unwrap();
    let loaded = DataSplits::load(dir.path().join("data")).unwrap();
    assert_eq!(loaded.schema, splits.schema);
    assert_eq!(
        (loaded.train, loaded.dev, loaded.test),
        (splits.train, splits.dev, splits.test)
    );
}

#[test]
fn filling_reads_leading_dates_only() {
    let mut records = vec![record(1)];
    let snippets = records[0].evidence.snippets_mut();
    for s in snippets.iter_mut() {
        s.timestamp = None;
        s.snippet_text = Some("no date here".into());
    }
    snippets[0].snippet_text = Some("Jan 3, 2017 ... text".into());
    let report = fill_timestamps(&mut records);
    assert_eq!(report.filled, 1);
    assert_eq!(report.already_dated, 0);
    assert_eq!(
        records[0].evidence.snippets()[0].timestamp,
        Date::from_ymd(2017, 1, 3)
    );
}

#[test]
fn malformed_lines_report_their_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    let good = record(2).to_json_line().unwrap();
    std::fs::write(&path, format!("{good}\n{{not json\n")).unwrap();
    let err = read_jsonl(&path).unwrap_err().to_string();
    assert!(err.contains('2'), "{err}");
    assert!(DataSplits::load(dir.path().join("missing")).is_err());
}
