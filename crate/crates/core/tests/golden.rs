use dsi_core::oracle::{corpus, golden_values, GoldenCase};
use dsi_core::Loss;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/golden.json");

fn computed() -> Vec<GoldenCase> {
    golden_values(&corpus(), &[Loss::adit(), Loss::euclidean()]).unwrap()
}

/// Set `DSI_REGENERATE_GOLDEN=1` to rewrite the fixture from the oracle.
#[test]
fn fixture_matches_oracle() {
    let fresh = computed();
    if std::env::var_os("DSI_REGENERATE_GOLDEN").is_some() {
        std::fs::write(FIXTURE, serde_json::to_string_pretty(&fresh).unwrap() + "\n").unwrap();
    }
    let stored: Vec<GoldenCase> =
        serde_json::from_str(&std::fs::read_to_string(FIXTURE).unwrap()).unwrap();
    assert_eq!(stored.len(), fresh.len());
    for (a, b) in stored.iter().zip(&fresh) {
        assert_eq!(a.case, b.case);
        assert_eq!(a.values.len(), b.values.len());
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!((&x.loss, x.node), (&y.loss, y.node));
            assert!((x.statistic - y.statistic).abs() <= 1e-12, "{} node {}", a.case.name, x.node);
            assert!((x.pvalue - y.pvalue).abs() <= 1e-12, "{} node {}", a.case.name, x.node);
        }
    }
}

#[test]
fn fixture_values_are_probabilities() {
    for case in computed() {
        for v in &case.values {
            assert!((0.0..=1.0).contains(&v.pvalue));
            assert!(v.statistic <= 0.0);
        }
    }
}
