mod common;

use std::path::Path;

use bucketforge::bench::{Algorithm, ModelSource, RunConfig};
use bucketforge::io::records::OracleStatus;
use bucketforge::{brute_force_log_z, parse_uai, run_benchmark, write_uai, Error, VarId};

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures/malformed")
        .join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn every_malformed_fixture_has_a_specific_error() {
    let parse_err = |name: &str| match parse_uai(&fixture(name)) {
        Err(Error::Parse { token, message }) => (token, message),
        other => panic!("{name}: expected parse error, got {other:?}"),
    };
    assert!(matches!(
        parse_uai(&fixture("03_bayes.uai")),
        Err(Error::BayesUnsupported)
    ));
    for (name, needle) in [
        ("01_empty.uai", "end of input"),
        ("02_bad_preamble.uai", "preamble"),
        ("04_missing_var_count.uai", "variable count"),
        ("05_var_count_not_number.uai", "variable count"),
        ("06_zero_variables.uai", "at least one variable"),
        ("07_zero_cardinality.uai", "cardinality"),
        ("08_truncated_cardinalities.uai", "cardinality"),
        ("09_negative_factor_count.uai", "factor count"),
        ("10_scope_out_of_range.uai", "out of range"),
        ("11_repeated_scope_var.uai", "repeated"),
        ("12_table_size_mismatch.uai", "table size"),
        ("13_truncated_table.uai", "end of input"),
        ("14_negative_entry.uai", "negative"),
        ("15_nan_entry.uai", "not finite"),
        ("16_infinite_entry.uai", "not finite"),
        ("17_garbage_entry.uai", "table entry"),
        ("18_trailing_tokens.uai", "trailing"),
        ("19_missing_tables.uai", "table"),
        ("20_fractional_card.uai", "cardinality"),
    ] {
        let (_, message) = parse_err(name);
        assert!(message.contains(needle), "{name}: {message}");
    }
    let (token, _) = parse_err("14_negative_entry.uai");
    // 1-based position of "-0.5".
    assert_eq!(token, 9);
}

#[test]
fn unsorted_scope_is_relaid() {
    // Factor listed over (1, 0): entry order is x1 slowest.
    let text = "MARKOV\n2\n2 3\n1\n2 1 0\n6\n 1 2 3 4 5 6\n";
    let g = parse_uai(text).unwrap();
    let f = &g.factors()[0];
    assert_eq!(f.scope(), &[VarId(0), VarId(1)]);
    // (x0, x1) row-major: value at (x0=a, x1=b) was at index b*2 + a.
    assert_eq!(f.table(), &[1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
    let again = parse_uai(&write_uai(&g)).unwrap();
    assert_eq!(again, g);
}

#[test]
fn written_file_preserves_the_partition_function() {
    let g = common::random_graph(4, vec![2, 3, 2, 4], 6, 3);
    let back = parse_uai(&write_uai(&g)).unwrap();
    let (a, b) = (
        brute_force_log_z(&g).unwrap(),
        brute_force_log_z(&back).unwrap(),
    );
    assert!(a.error_vs(b) < 1e-13);
}

#[test]
fn benchmark_reads_uai_and_reports_failures_per_record() {
    let dir = std::env::temp_dir().join(format!("bucketforge-uai-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let good = dir.join("good.uai");
    std::fs::write(
        &good,
        write_uai(&common::random_pairwise(2, 5, &common::cycle_edges(5))),
    )
    .unwrap();

    let mut cfg = RunConfig::ising(bucketforge::Topology::Complete { n: 3 }, 1.0, vec![]);
    cfg.source = ModelSource::Uai(good.clone());
    cfg.algorithms = vec![Algorithm::ExactBe, Algorithm::Mbr, Algorithm::Gbr];
    cfg.ibound = Some(1);
    let records = run_benchmark(&cfg).unwrap();
    assert_eq!(records.len(), 3);
    assert!(records
        .iter()
        .all(|r| r.oracle == OracleStatus::Ok && r.failure.is_none()));
    assert!(records[0].error.unwrap() < 1e-12);
    let hashes: Vec<&str> = records.iter().map(|r| r.order_hash.as_str()).collect();
    assert!(hashes.windows(2).all(|w| w[0] == w[1]));

    cfg.source = ModelSource::Uai(dir.join("missing.uai"));
    let records = run_benchmark(&cfg).unwrap();
    assert!(records
        .iter()
        .all(|r| r.failure.is_some() && r.log10_z.is_none()));
    std::fs::remove_dir_all(&dir).ok();
}
