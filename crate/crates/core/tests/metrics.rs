use std::collections::{BTreeSet, HashMap};

use intent_gate_core::corpus::{evaluate, CorpusError, LabeledExample, Sentinel};
use intent_gate_core::extraction::{ExtractionError, ExtractorBackend};
use intent_gate_core::model::{DetectedIntent, ExtractionOutcome, IntentType};
use proptest::prelude::*;

/// Answers from a fixed table keyed by request text.
struct Table(HashMap<String, ExtractionOutcome>);

impl ExtractorBackend for Table {
    fn name(&self) -> &str {
        "table"
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn classify(&self, text: &str) -> Result<ExtractionOutcome, ExtractionError> {
        self.0.get(text).cloned().ok_or(ExtractionError::EmptyRequest)
    }
}

#[derive(Debug, Clone)]
enum Answer {
    Types(BTreeSet<IntentType>),
    Sentinel(Sentinel),
}

fn outcome(a: &Answer) -> ExtractionOutcome {
    match a {
        Answer::Types(ts) if !ts.is_empty() => ExtractionOutcome::intents(
            ts.iter().map(|&t| DetectedIntent::new(t, "x", Vec::new(), 1.0).unwrap()).collect(),
        )
        .unwrap(),
        Answer::Types(_) | Answer::Sentinel(Sentinel::NoIntentPresent) => ExtractionOutcome::NoIntentPresent,
        Answer::Sentinel(Sentinel::UnknownIntent) => ExtractionOutcome::UnknownIntent,
    }
}

fn arb_answer(allow_empty: bool) -> impl Strategy<Value = Answer> {
    let types = prop::collection::btree_set(prop::sample::select(IntentType::ALL.to_vec()), if allow_empty { 0..4 } else { 1..4 });
    prop_oneof![
        4 => types.prop_map(Answer::Types),
        1 => Just(Answer::Sentinel(Sentinel::NoIntentPresent)),
        1 => Just(Answer::Sentinel(Sentinel::UnknownIntent)),
    ]
}

fn labels(a: &Answer) -> BTreeSet<IntentType> {
    match a {
        Answer::Types(t) => t.clone(),
        Answer::Sentinel(_) => BTreeSet::new(),
    }
}

struct Brute {
    f1: [f64; 6],
    micro_f1: f64,
    macro_f1: f64,
    exact: f64,
    hamming: f64,
}

/// Textbook definitions, one (example, class) cell at a time.
fn brute(gold: &[Answer], pred: &[Answer]) -> Brute {
    let n = gold.len();
    let mut f1 = [0.0; 6];
    let (mut stp, mut sfp, mut sfn) = (0.0, 0.0, 0.0);
    let mut supported = Vec::new();
    for (k, &t) in IntentType::ALL.iter().enumerate() {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for i in 0..n {
            let g = labels(&gold[i]).contains(&t);
            let p = labels(&pred[i]).contains(&t);
            if g && p {
                tp += 1.0;
            } else if p {
                fp += 1.0;
            } else if g {
                fn_ += 1.0;
            }
        }
        let precision: f64 = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall: f64 = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1[k] = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        if tp + fn_ > 0.0 {
            supported.push(f1[k]);
        }
        stp += tp;
        sfp += fp;
        sfn += fn_;
    }
    let mp: f64 = if stp + sfp > 0.0 { stp / (stp + sfp) } else { 0.0 };
    let mr: f64 = if stp + sfn > 0.0 { stp / (stp + sfn) } else { 0.0 };
    let mut wrong_cells = 0.0;
    let mut exact = 0.0;
    for i in 0..n {
        let mut all_right = true;
        for t in IntentType::ALL {
            if labels(&gold[i]).contains(&t) != labels(&pred[i]).contains(&t) {
                wrong_cells += 1.0;
                all_right = false;
            }
        }
        let sentinels_agree = match (&gold[i], &pred[i]) {
            (Answer::Sentinel(a), Answer::Sentinel(b)) => a == b,
            (Answer::Sentinel(_), Answer::Types(_)) | (Answer::Types(_), Answer::Sentinel(_)) => false,
            (Answer::Types(_), Answer::Types(_)) => true,
        };
        if all_right && sentinels_agree {
            exact += 1.0;
        }
    }
    Brute {
        f1,
        micro_f1: if mp + mr > 0.0 { 2.0 * mp * mr / (mp + mr) } else { 0.0 },
        macro_f1: if supported.is_empty() { 0.0 } else { supported.iter().sum::<f64>() / supported.len() as f64 },
        exact: exact / n as f64,
        hamming: wrong_cells / (6.0 * n as f64),
    }
}

fn dataset(gold: &[Answer], pred: &[Answer]) -> (Vec<LabeledExample>, Table) {
    let mut table = HashMap::new();
    let examples = gold
        .iter()
        .zip(pred)
        .enumerate()
        .map(|(i, (g, p))| {
            let text = format!("request {i}");
            table.insert(text.clone(), outcome(p));
            match g {
                Answer::Types(t) => LabeledExample::seed(&format!("e{i}"), &text, &t.iter().copied().collect::<Vec<_>>()),
                Answer::Sentinel(s) => LabeledExample::negative(&format!("e{i}"), &text, *s),
            }
        })
        .collect();
    (examples, Table(table))
}

const EPS: f64 = 1e-12;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn evaluate_agrees_with_brute_force(
        pairs in prop::collection::vec((arb_answer(false), arb_answer(true)), 1..24)
    ) {
        let (gold, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        // an empty predicted set is what a NoIntentPresent answer means
        let pred: Vec<Answer> = pred
            .into_iter()
            .map(|p| match p {
                Answer::Types(t) if t.is_empty() => Answer::Sentinel(Sentinel::NoIntentPresent),
                other => other,
            })
            .collect();
        let (examples, backend) = dataset(&gold, &pred);
        let r = evaluate(&backend, &examples).unwrap();
        let b = brute(&gold, &pred);
        for (k, c) in r.per_class.iter().enumerate() {
            prop_assert!((c.f1 - b.f1[k]).abs() < EPS, "{}: {} vs {}", c.intent_type, c.f1, b.f1[k]);
        }
        prop_assert!((r.micro_f1 - b.micro_f1).abs() < EPS);
        prop_assert!((r.macro_f1 - b.macro_f1).abs() < EPS);
        prop_assert!((r.exact_match - b.exact).abs() < EPS);
        prop_assert!((r.hamming_loss - b.hamming).abs() < EPS);

        for v in [r.micro_f1, r.macro_f1, r.exact_match, r.hamming_loss] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let active: Vec<f64> = r
            .per_class
            .iter()
            .filter(|c| c.true_positives + c.false_positives + c.false_negatives > 0)
            .map(|c| c.f1)
            .collect();
        if !active.is_empty() {
            let lo = active.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = active.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo - EPS <= r.micro_f1 && r.micro_f1 <= hi + EPS);
        }
    }
}

#[test]
fn worked_four_example_case() {
    use IntentType::*;
    let one = |t| Answer::Types([t].into_iter().collect());
    let gold = [one(Deployment), one(Modification), one(IntentReportRequest), one(Deployment)];
    let pred = [one(Deployment), one(Modification), one(IntentReportRequest), one(Modification)];
    let (examples, backend) = dataset(&gold, &pred);
    let r = evaluate(&backend, &examples).unwrap();
    assert_eq!(r.exact_match, 0.75);
    assert!((r.hamming_loss - 1.0 / 12.0).abs() < EPS);
}

#[test]
fn backend_errors_count_as_empty_predictions() {
    let examples = vec![LabeledExample::seed("a", "unknown to the table", &[IntentType::Deployment])];
    let r = evaluate(&Table(HashMap::new()), &examples).unwrap();
    assert_eq!(r.backend_errors, 1);
    assert_eq!(r.exact_match, 0.0);
    assert_eq!(r.failures.len(), 1);
}

#[test]
fn empty_dataset_is_rejected() {
    assert!(matches!(evaluate(&Table(HashMap::new()), &[]), Err(CorpusError::EmptyDataset)));
}
