use std::path::PathBuf;

use intent_gate_core::corpus::{evaluate, generate_corpus, seed_examples, Augmenter, Corpus, Provenance};
use intent_gate_core::extraction::{ExtractorBackend, RuleBackend};
use serde::Deserialize;

#[derive(Deserialize)]
struct Floor {
    backend: String,
    seed: u64,
    rounds: u32,
    macro_f1: f64,
}

fn floor() -> Floor {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/corpus_floor.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn same_seed_same_bytes() {
    let a = Augmenter::bundled();
    let seeds = seed_examples();
    let first = generate_corpus(&a, &seeds, 42, 3).to_jsonl();
    let second = generate_corpus(&a, &seeds, 42, 3).to_jsonl();
    assert_eq!(first, second);
    let parsed = Corpus::from_jsonl(&first).unwrap();
    assert_eq!(parsed.header.seed, 42);
    assert_eq!(parsed.header.corpus_version, a.corpus_version());
}

#[test]
fn augmentation_preserves_labels() {
    let corpus = generate_corpus(&Augmenter::bundled(), &seed_examples(), 42, 3);
    let seeds = seed_examples();
    let rule = RuleBackend::bundled();
    let mut variants = 0;
    for ex in corpus.examples.iter().filter(|e| e.provenance != Provenance::Seed) {
        variants += 1;
        let parent = seeds.iter().find(|s| Some(&s.id) == ex.parent.as_ref()).expect("variant names its seed");
        assert_eq!((&ex.labels, ex.marker), (&parent.labels, parent.marker), "{}", ex.id);
        // the variant reads the same to the classifier as its seed
        assert_eq!(
            rule.classify(&ex.text).unwrap().types(),
            rule.classify(&parent.text).unwrap().types(),
            "{}: {}",
            ex.id,
            ex.text
        );
    }
    assert!(variants >= 2 * seeds.len(), "only {variants} variants");
    for p in [Provenance::Paraphrase, Provenance::Erasure, Provenance::ToneShift] {
        assert!(corpus.examples.iter().any(|e| e.provenance == p), "{p:?}");
    }
}

#[test]
fn rule_backend_stays_above_the_pinned_floor() {
    let f = floor();
    assert_eq!(f.backend, "rule");
    let corpus = generate_corpus(&Augmenter::bundled(), &seed_examples(), f.seed, f.rounds);
    let report = evaluate(&RuleBackend::bundled(), &corpus.examples).unwrap();
    assert!(report.macro_f1 >= f.macro_f1, "macro-F1 {} below floor {}", report.macro_f1, f.macro_f1);
}
