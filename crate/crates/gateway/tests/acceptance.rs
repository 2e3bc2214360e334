//! Release acceptance: one PASS/FAIL line per criterion, non-zero exit if
//! any fails. Runs offline against the committed fixtures.

mod common;

use std::cell::Cell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::panic::AssertUnwindSafe;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use intent_gate::{Gateway, GatewayConfig};
use intent_gate_core::canonical;
use intent_gate_core::corpus::{evaluate, score, Corpus, LabeledExample, Prediction, Provenance, Sentinel};
use intent_gate_core::execution::{FulfilmentStatus, Inventory, NetworkStatus, Verdict};
use intent_gate_core::extraction::{parse_llm_response, ExtractorBackend, RuleBackend};
use intent_gate_core::model::{ExtractionOutcome, IntentType};
use intent_gate_core::time::IsoDuration;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde::Deserialize;

type CheckResult = Result<String, String>;
type Criterion = (&'static str, fn() -> CheckResult);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

#[derive(Deserialize)]
struct Case {
    id: String,
    text: String,
    #[serde(default)]
    labels: Vec<IntentType>,
    sentinel: Option<String>,
}

#[derive(Deserialize)]
struct CaseFile {
    cases: Vec<Case>,
}

fn cases(name: &str) -> Result<Vec<Case>, String> {
    let text = std::fs::read_to_string(core_fixture(name)).map_err(|e| format!("{name}: {e}"))?;
    Ok(serde_json::from_str::<CaseFile>(&text).map_err(|e| format!("{name}: {e}"))?.cases)
}

fn agrees(case: &Case, outcome: &ExtractionOutcome) -> bool {
    match (case.sentinel.as_deref(), outcome) {
        (Some("no_intent_present"), ExtractionOutcome::NoIntentPresent) => true,
        (Some("unknown_intent"), ExtractionOutcome::UnknownIntent) => true,
        (None, ExtractionOutcome::Intents { .. }) => {
            outcome.types().into_iter().collect::<BTreeSet<_>>() == case.labels.iter().copied().collect()
        }
        _ => false,
    }
}

fn scenario_suite() -> CheckResult {
    let cases = cases("scenarios.json")?;
    let backend = RuleBackend::bundled();
    let started = Instant::now();
    let wrong: Vec<&str> = cases
        .iter()
        .filter(|c| !backend.classify(&c.text).is_ok_and(|o| agrees(c, &o)))
        .map(|c| c.id.as_str())
        .collect();
    let elapsed = started.elapsed();
    ensure!(wrong.is_empty(), "{} of {} wrong: {wrong:?}", wrong.len(), cases.len());
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    for t in IntentType::ALL {
        ensure!(cases.iter().any(|c| c.labels == [t]), "no single-intent case for {t}");
    }
    use IntentType::*;
    let compound: BTreeSet<_> = [Modification, PerformanceAssurance, RegularNotificationRequest].into();
    ensure!(
        cases.iter().any(|c| c.labels.iter().copied().collect::<BTreeSet<_>>() == compound),
        "no three-intent compound case"
    );
    for s in ["no_intent_present", "unknown_intent"] {
        ensure!(cases.iter().any(|c| c.sentinel.as_deref() == Some(s)), "no {s} case");
    }
    Ok(format!("{}/{} exact in {elapsed:.2?}", cases.len(), cases.len()))
}

fn llm_replay() -> CheckResult {
    let cases = cases("replay_expected.json")?;
    let dir = core_fixture("replay");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
        let path = entry.map_err(|e| e.to_string())?.path();
        let fixture: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let text = fixture["request_text"].as_str().ok_or("fixture without request_text")?;
        let case = cases.iter().find(|c| c.text == text).ok_or_else(|| format!("no expectation for `{text}`"))?;
        let raw = fixture["raw_response"].as_str().ok_or("fixture without raw_response")?;
        let out = parse_llm_response(raw).map_err(|e| format!("{}: {e}", case.id))?;
        ensure!(agrees(case, &out), "{}: got {:?}", case.id, out);
        seen += 1;
    }
    ensure!(seen == cases.len(), "{seen} fixtures for {} expectations", cases.len());
    ensure!(
        cases.iter().any(|c| c.sentinel.is_some() && c.text.contains("deploy")),
        "no sentinel-precedence case"
    );
    Ok(format!("{seen}/{seen} replay fixtures"))
}

fn tiebreak() -> CheckResult {
    let cases = cases("tiebreak.json")?;
    ensure!(cases.len() == 9, "grid has {} cases", cases.len());
    let backend = RuleBackend::bundled();
    for c in &cases {
        let out = backend.classify(&c.text).map_err(|e| e.to_string())?;
        ensure!(agrees(c, &out), "{}: got {:?}", c.id, out.types());
    }
    Ok("9/9".into())
}

#[derive(Debug, Clone)]
enum Step {
    Say(String),
    Tick(u64),
}

fn region() -> impl Strategy<Value = char> {
    prop::sample::select(vec!['A', 'B', 'C', 'D'])
}

fn step() -> impl Strategy<Value = Step> {
    prop_oneof![
        (region(), 1u64..7).prop_map(|(r, n)| Step::Say(format!("Deploy a new network in Region{r} with {n} capacity units."))),
        (1u64..7, 1u64..9).prop_map(|(k, n)| Step::Say(format!("Increase the capacity of net-{k} to {n} units."))),
        (1u64..6, 1u64..60).prop_map(|(k, n)| Step::Say(format!("Assure {} registered users on net-{k}.", n * 100))),
        Just(Step::Say("Summarize the previous request.".into())),
        (1u64..6, 1u64..30).prop_map(|(k, m)| Step::Say(format!("Notify me about net-{k} every {m} minutes."))),
        (region(), 1u64..7).prop_map(|(r, n)| Step::Say(format!(
            "Check whether it is feasible to deploy a network with {n} units in Region{r}."
        ))),
        (region(), 1u64..7).prop_map(|(r, n)| Step::Say(format!(
            "Deploy a new network in Region{r} with {n} capacity units. Before proceeding, ensure that capacity exists in Region{r}."
        ))),
        (1u64..120).prop_map(Step::Tick),
    ]
}

fn legal(from: FulfilmentStatus, to: FulfilmentStatus) -> bool {
    use FulfilmentStatus::*;
    [
        (Pending, Infeasible),
        (Pending, InProgress),
        (Pending, Failed),
        (Pending, Fulfilled),
        (InProgress, Fulfilled),
        (InProgress, Degraded),
        (InProgress, Failed),
        (Degraded, Fulfilled),
        (Fulfilled, Degraded),
    ]
    .contains(&(from, to))
}

fn capacity_conserved(inv: &Inventory) -> Result<(), String> {
    let mut used: BTreeMap<&str, u64> = BTreeMap::new();
    for n in inv.networks.values().filter(|n| n.status != NetworkStatus::Decommissioned) {
        *used.entry(n.region.as_str()).or_default() += n.capacity_units;
    }
    for (region, units) in used {
        let cap = inv.region_capacity.get(region).copied().unwrap_or(0);
        ensure!(units <= cap, "{region} holds {units} units of {cap}");
    }
    Ok(())
}

/// How often each interesting path came up, so a pass is not vacuous.
#[derive(Debug, Default, Clone, Copy)]
struct Coverage {
    built: usize,
    infeasible: usize,
    degraded: usize,
    notifications: usize,
}

fn run_sequence(backend: &Arc<dyn ExtractorBackend>, steps: &[Step], cov: &Cell<Coverage>) -> Result<(), String> {
    let mut seen = cov.get();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = GatewayConfig { event_log_path: Some(dir.path().join("events.jsonl")), ..rule_config() };
    let gw = Gateway::with_backend(config.clone(), backend.clone()).map_err(|e| e.to_string())?;
    let session = gw.create_session().map_err(|e| e.to_string())?;
    for s in steps {
        let before = gw.inventory();
        match s {
            Step::Tick(m) => {
                let events = gw.tick(IsoDuration::from_mins(*m)).map_err(|e| e.to_string())?;
                seen.notifications += events.iter().filter(|e| e.event == "notification").count();
            }
            Step::Say(text) => {
                let o = gw.handle_request_blocking(session, text.clone()).map_err(|e| e.to_string())?;
                let after = gw.inventory();
                let created = after.networks.len() - before.networks.len();
                let deployed = o
                    .records
                    .iter()
                    .filter(|r| r.intent_type == IntentType::Deployment && r.network_id.is_some())
                    .count();
                ensure!(created == deployed, "`{text}` created {created} networks for {deployed} deployments");
                seen.built += created;
                for r in &o.records {
                    let infeasible = r.feasibility.as_ref().is_some_and(|f| f.verdict == Verdict::Infeasible);
                    if r.intent_type == IntentType::Deployment && infeasible {
                        seen.infeasible += 1;
                        ensure!(r.network_id.is_none(), "`{text}`: network built despite an infeasible verdict");
                    }
                    if r.intent_type == IntentType::IntentFeasibilityCheck && infeasible {
                        let subject = o.structured.iter().find(|i| i.id == r.intent_id).and_then(|i| i.subject_intent());
                        if let Some(sibling) = o.records.iter().find(|s| Some(s.intent_id) == subject) {
                            ensure!(sibling.network_id.is_none(), "`{text}`: built after the check said no");
                        }
                    }
                }
            }
        }
        capacity_conserved(&gw.inventory())?;
    }
    let engine = gw.engine_snapshot();
    for rec in engine.records() {
        let mut at = FulfilmentStatus::Pending;
        for t in &rec.transitions {
            seen.degraded += usize::from(t.to == FulfilmentStatus::Degraded);
            ensure!(t.from == at && legal(t.from, t.to), "illegal {:?} -> {:?} on {}", t.from, t.to, rec.id());
            at = t.to;
        }
        ensure!(at == rec.status(), "status does not match transition history");
    }
    let live = canonical::to_string(&engine).map_err(|e| e.to_string())?;
    drop(gw);
    let replayed = Gateway::with_backend(config, backend.clone()).map_err(|e| e.to_string())?;
    let again = canonical::to_string(&replayed.engine_snapshot()).map_err(|e| e.to_string())?;
    ensure!(live == again, "replayed state differs");
    cov.set(seen);
    Ok(())
}

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() })
}

fn execution_properties() -> CheckResult {
    let backend: Arc<dyn ExtractorBackend> = Arc::new(RuleBackend::bundled());
    let cov = Cell::new(Coverage::default());
    let mut runner = runner(1000);
    runner
        .run(&prop::collection::vec(step(), 1..16), |steps| {
            run_sequence(&backend, &steps, &cov).map_err(TestCaseError::fail)
        })
        .map_err(|e| e.to_string())?;
    let c = cov.get();
    ensure!(c.built > 0 && c.infeasible > 0 && c.degraded > 0 && c.notifications > 0, "paths never exercised: {c:?}");
    Ok(format!(
        "1000 sequences, {} networks built, {} infeasible deployments, {} degradations, {} notifications",
        c.built, c.infeasible, c.degraded, c.notifications
    ))
}

fn cadence() -> CheckResult {
    let backend: Arc<dyn ExtractorBackend> = Arc::new(RuleBackend::bundled());
    let frequency = prop_oneof![60u64..=900, 60u64..=86_400];
    let strategy = (frequency, 0u64..=7 * 86_400)
        .prop_flat_map(|(f, t)| (Just(f), Just(t), prop::collection::vec(0..=t, 0..8)));
    let mut runner = runner(500);
    runner
        .run(&strategy, |(f, t, mut cuts)| {
            let gw = Gateway::with_backend(rule_config(), backend.clone()).unwrap();
            let s = gw.create_session().unwrap();
            let o = gw.handle_request_blocking(s, format!("Notify me about net-1 every {f} seconds.")).unwrap();
            let sub = o.records.first().map(|r| r.intent_id).ok_or_else(|| TestCaseError::fail("no subscription"))?;
            cuts.push(t);
            cuts.sort();
            let mut elapsed = 0;
            let mut fires = 0u64;
            for c in cuts {
                let events = gw.tick(IsoDuration(c - elapsed)).unwrap();
                elapsed = c;
                fires += events
                    .iter()
                    .filter(|e| e.event == "notification")
                    .filter(|e| e.data["notification"]["subscription_id"] == serde_json::json!(sub))
                    .count() as u64;
            }
            prop_assert_eq!(fires, t / f, "f={} T={}", f, t);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok("500 random (f, T), exact".into())
}

#[derive(Debug, Clone)]
enum Answer {
    Types(BTreeSet<IntentType>),
    Sentinel(Sentinel),
}

impl Answer {
    fn labels(&self) -> BTreeSet<IntentType> {
        match self {
            Answer::Types(t) => t.clone(),
            Answer::Sentinel(_) => BTreeSet::new(),
        }
    }

    fn prediction(&self) -> Prediction {
        match self {
            Answer::Types(t) => Prediction { labels: t.clone(), sentinel: None, error: None },
            Answer::Sentinel(s) => Prediction { labels: BTreeSet::new(), sentinel: Some(*s), error: None },
        }
    }
}

fn answer() -> impl Strategy<Value = Answer> {
    prop_oneof![
        4 => prop::collection::btree_set(prop::sample::select(IntentType::ALL.to_vec()), 1..4).prop_map(Answer::Types),
        1 => Just(Answer::Sentinel(Sentinel::NoIntentPresent)),
        1 => Just(Answer::Sentinel(Sentinel::UnknownIntent)),
    ]
}

/// Per-class F1, macro-F1 over classes with gold support, exact match and
/// Hamming loss, straight from their definitions.
fn brute(gold: &[Answer], pred: &[Answer]) -> (Vec<f64>, f64, f64, f64) {
    let n = gold.len() as f64;
    let f1 = |tp: f64, fp: f64, fn_: f64| if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
    let mut per_class = Vec::new();
    let mut supported = Vec::new();
    for t in IntentType::ALL {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for (g, p) in gold.iter().zip(pred) {
            match (g.labels().contains(&t), p.labels().contains(&t)) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                _ => {}
            }
        }
        per_class.push(f1(tp, fp, fn_));
        if tp + fn_ > 0.0 {
            supported.push(f1(tp, fp, fn_));
        }
    }
    let macro_f1 = if supported.is_empty() { 0.0 } else { supported.iter().sum::<f64>() / supported.len() as f64 };
    let mut exact = 0.0;
    let mut wrong = 0.0;
    for (g, p) in gold.iter().zip(pred) {
        let diff = g.labels().symmetric_difference(&p.labels()).count() as f64;
        wrong += diff;
        let same_kind = match (g, p) {
            (Answer::Sentinel(a), Answer::Sentinel(b)) => a == b,
            (Answer::Types(_), Answer::Types(_)) => true,
            _ => false,
        };
        if diff == 0.0 && same_kind {
            exact += 1.0;
        }
    }
    (per_class, macro_f1, exact / n, wrong / (6.0 * n))
}

fn examples(gold: &[Answer]) -> Vec<LabeledExample> {
    gold.iter()
        .enumerate()
        .map(|(i, g)| match g {
            Answer::Types(t) => LabeledExample::seed(&format!("e{i}"), &format!("request {i}"), &t.iter().copied().collect::<Vec<_>>()),
            Answer::Sentinel(s) => LabeledExample::negative(&format!("e{i}"), &format!("request {i}"), *s),
        })
        .collect()
}

fn metrics_oracle() -> CheckResult {
    const EPS: f64 = 1e-12;
    let mut runner = runner(100);
    runner
        .run(&prop::collection::vec((answer(), answer()), 1..20), |pairs| {
            let (gold, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let r = score("oracle", &examples(&gold), &pred.iter().map(Answer::prediction).collect::<Vec<_>>()).unwrap();
            let (f1, macro_f1, exact, hamming) = brute(&gold, &pred);
            for (c, want) in r.per_class.iter().zip(&f1) {
                prop_assert!((c.f1 - want).abs() < EPS, "{} F1 {} vs {}", c.intent_type, c.f1, want);
            }
            prop_assert!((r.macro_f1 - macro_f1).abs() < EPS);
            prop_assert!((r.exact_match - exact).abs() < EPS);
            prop_assert!((r.hamming_loss - hamming).abs() < EPS);
            Ok(())
        })
        .map_err(|e| e.to_string())?;

    use IntentType::*;
    let one = |t| Answer::Types([t].into());
    let gold = [one(Deployment), one(Modification), one(IntentReportRequest), one(Deployment)];
    let pred = [one(Deployment), one(Modification), one(IntentReportRequest), one(Modification)];
    let r = score("worked", &examples(&gold), &pred.iter().map(Answer::prediction).collect::<Vec<_>>())
        .map_err(|e| e.to_string())?;
    ensure!(r.exact_match == 0.75, "worked case exact match {}", r.exact_match);
    ensure!((r.hamming_loss - 1.0 / 12.0).abs() < EPS, "worked case Hamming loss {}", r.hamming_loss);
    Ok("100 datasets within 1e-12; worked case 0.75 and 1/12".into())
}

#[derive(Deserialize)]
struct Floor {
    backend: String,
    seed: u64,
    rounds: u32,
    macro_f1: f64,
}

fn cli(args: &[&str]) -> Result<std::process::Output, String> {
    std::process::Command::new(env!("CARGO_BIN_EXE_intent-gate"))
        .args(args)
        .env_remove("INTENT_GATE_BACKEND")
        .output()
        .map_err(|e| e.to_string())
}

fn corpus_determinism() -> CheckResult {
    let floor: Floor = serde_json::from_str(&std::fs::read_to_string(core_fixture("corpus_floor.json")).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure!(floor.backend == "rule", "floor pinned for {}", floor.backend);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let paths = [dir.path().join("a.jsonl"), dir.path().join("b.jsonl")];
    let (seed, rounds) = (floor.seed.to_string(), floor.rounds.to_string());
    for p in &paths {
        let out = cli(&["corpus", "gen", "--seed", &seed, "--rounds", &rounds, "--out", p.to_str().unwrap()])?;
        ensure!(out.status.success(), "corpus gen failed: {}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(&paths[0]).map_err(|e| e.to_string())?;
    ensure!(a == std::fs::read(&paths[1]).map_err(|e| e.to_string())?, "two runs with seed {seed} differ");

    let corpus = Corpus::from_jsonl(&String::from_utf8_lossy(&a)).map_err(|e| e.to_string())?;
    let by_id: HashMap<&str, &LabeledExample> = corpus.examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let rules = RuleBackend::bundled();
    let mut augmented = 0;
    for ex in corpus.examples.iter().filter(|e| e.provenance != Provenance::Seed) {
        let parent = ex.parent.as_deref().and_then(|p| by_id.get(p)).ok_or_else(|| format!("{} has no parent", ex.id))?;
        ensure!(ex.labels == parent.labels && ex.marker == parent.marker, "{} changed its labels", ex.id);
        let got = rules.classify(&ex.text).map_err(|e| e.to_string())?;
        let same = match parent.marker {
            Some(Sentinel::NoIntentPresent) => got == ExtractionOutcome::NoIntentPresent,
            Some(Sentinel::UnknownIntent) => got == ExtractionOutcome::UnknownIntent,
            None => got.types().into_iter().collect::<BTreeSet<_>>() == parent.labels,
        };
        ensure!(same, "{} no longer reads as its parent: {:?}", ex.id, ex.text);
        augmented += 1;
    }

    let report = evaluate(&rules, &corpus.examples).map_err(|e| e.to_string())?;
    ensure!(report.macro_f1 >= floor.macro_f1, "macro-F1 {} below floor {}", report.macro_f1, floor.macro_f1);
    let floor_arg = floor.macro_f1.to_string();
    let out = cli(&["eval", "--dataset", paths[0].to_str().unwrap(), "--backend", "rule", "--min-f1", &floor_arg])?;
    ensure!(out.status.success(), "eval --min-f1 exited {:?}", out.status.code());
    Ok(format!(
        "{} examples byte-identical, {augmented}/{augmented} augmented keep labels, macro-F1 {:.4} >= {}",
        corpus.examples.len(),
        report.macro_f1,
        floor.macro_f1
    ))
}

fn e2e_golden() -> CheckResult {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let run = runtime.block_on(run_script())?;
    let elapsed = started.elapsed();
    check_golden("e2e_outcomes.json", &run.outcomes_golden())?;
    check_golden("e2e_report.json", &run.report_golden())?;
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("4 outcomes and report identical in {elapsed:.2?}"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("scenario suite (rule backend)", scenario_suite),
        ("language-model path on replay fixtures", llm_replay),
        ("report/notification tie-break grid", tiebreak),
        ("execution properties", execution_properties),
        ("notification cadence", cadence),
        ("metrics oracle", metrics_oracle),
        ("corpus determinism", corpus_determinism),
        ("end-to-end golden session", e2e_golden),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let verdict = std::panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match verdict {
            Ok(detail) => println!("PASS  {name}: {detail} [{:.1?}]", started.elapsed()),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
