//! Metric scores against the committed golden corpus and stemmer list.

#[path = "support/mod.rs"]
mod support;

use std::fs;

use sharp_core::metrics::{evaluate, porter, TokenizedPair};

#[test]
fn golden_corpus_matches_oracle() {
    let summary = support::checks::metrics_golden().unwrap();
    println!("{summary}");
}

#[test]
fn stemmer_matches_reference_list() {
    let raw = fs::read_to_string(support::fixtures_dir().join("metrics/porter_reference.tsv")).unwrap();
    let mut wrong = Vec::new();
    let mut total = 0;
    for line in raw.lines() {
        let (word, want) = line.split_once('\t').unwrap();
        total += 1;
        let got = porter::stem(word);
        if got != want {
            wrong.push(format!("{word}: {got} != {want}"));
        }
    }
    assert!(total > 250, "reference list too short: {total}");
    assert!(wrong.is_empty(), "{} of {total} differ: {wrong:?}", wrong.len());
}

#[test]
fn repeated_evaluation_is_bit_identical() {
    let pairs = vec![
        TokenizedPair::from_texts(
            "walk to the sink and fill the kettle",
            &["walk to the sink", "fill the kettle at the sink"],
        ),
        TokenizedPair::from_texts(
            "turn left then walk to the stove",
            &["turn 90 degrees left and walk to the stove"],
        ),
        TokenizedPair::from_texts("place the cup on the table", &["put the cup on the table"]),
    ];
    let a = evaluate(&pairs).unwrap();
    for _ in 0..5 {
        let b = evaluate(&pairs).unwrap();
        assert_eq!(a.bleu.map(f64::to_bits), b.bleu.map(f64::to_bits));
        assert_eq!(a.cider.unwrap().to_bits(), b.cider.unwrap().to_bits());
        assert_eq!(a.meteor.to_bits(), b.meteor.to_bits());
    }
}

#[test]
fn single_pair_has_no_cider() {
    let pairs = vec![TokenizedPair::from_texts("walk to the sink", &["walk to the sink"])];
    let report = evaluate(&pairs).unwrap();
    assert_eq!(report.cider, None);
    assert_eq!(report.bleu, [1.0; 4]);
}
