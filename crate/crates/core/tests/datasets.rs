mod common;

use std::collections::BTreeMap;
use std::path::PathBuf;

use fedfair::datasets::{load_adult, load_compas, stratified_split_indices, Dataset};
use fedfair::Error;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn golden(name: &str) -> Dataset {
    Dataset::load(fixture(name)).unwrap()
}

#[test]
fn adult_fixture_matches_golden() {
    let d = load_adult(fixture("adult_10.csv")).unwrap();
    assert_eq!(d, golden("adult_10.expected.csv"));
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        std::fs::read_to_string(fixture("adult_10.expected.csv")).unwrap()
    );
}

#[test]
fn compas_fixture_matches_golden() {
    let d = load_compas(fixture("compas_10.csv")).unwrap();
    assert_eq!(d.len(), 8);
    assert_eq!(d, golden("compas_10.expected.csv"));
}

#[test]
fn encoded_features_are_binary() {
    for d in [common::adult(), common::compas()] {
        assert!(d.features().iter().all(|&v| v == 0.0 || v == 1.0));
    }
}

#[test]
fn canonical_round_trip_is_exact() {
    let d = common::compas();
    let w: Vec<f64> = (0..d.len()).map(|i| 0.5 + (i % 7) as f64 / 3.0).collect();
    let d = d.with_weights(w).unwrap();
    let mut buf = Vec::new();
    d.write_csv(&mut buf).unwrap();
    let back = Dataset::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, d);
    assert!(back
        .weights()
        .iter()
        .zip(d.weights())
        .all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn full_adult_split_sizes() {
    let d = common::adult();
    assert_eq!(d.len(), 48_842);
    let (train, test) = stratified_split_indices(d, 0.2, 0).unwrap();
    assert!(test.len() == 9_768 || test.len() == 9_769, "{}", test.len());
    assert_eq!(train.len() + test.len(), d.len());
    assert_eq!(
        stratified_split_indices(d, 0.2, 0).unwrap(),
        (train, test.clone())
    );

    // every (attribute, label) cell within one sample of its quota
    for attr in ["sex", "race"] {
        let s = d.sensitive(attr).unwrap();
        let mut total: BTreeMap<(u8, u8), usize> = BTreeMap::new();
        for (i, &g) in s.iter().enumerate() {
            *total.entry((g, d.labels()[i])).or_default() += 1;
        }
        let mut in_test: BTreeMap<(u8, u8), usize> = BTreeMap::new();
        for &i in &test {
            *in_test.entry((s[i], d.labels()[i])).or_default() += 1;
        }
        for (cell, &n) in &total {
            let got = in_test.get(cell).copied().unwrap_or(0) as f64;
            assert!((got - 0.2 * n as f64).abs() <= 1.0, "{attr} {cell:?}");
        }
    }
}

#[test]
fn missing_file_and_bad_header() {
    assert!(matches!(
        load_adult("/nonexistent/adult.csv"),
        Err(Error::Io { .. })
    ));
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("x.csv");
    std::fs::write(&p, "a,b,c\n1,2,3\n").unwrap();
    assert!(matches!(load_compas(&p), Err(Error::MalformedHeader(_))));
}
