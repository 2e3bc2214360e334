//! Label-preserving augmentation.
//!
//! Every technique leaves the tokens that drive classification alone:
//! lexicon cue matches, unknown-action verbs, politeness prefixes and
//! entity spans are protected, and no replacement or wrapper text may
//! itself match a lexicon pattern. Labels therefore carry over unchanged.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::seeds::SEEDS_VERSION;
use super::{Corpus, CorpusError, CorpusHeader, LabeledExample, Provenance, CORPUS_FORMAT};
use crate::extraction::extract_entities;
use crate::extraction::lexicon::{tokenize, Lexicon, Pattern};

const BUNDLED: &str = include_str!("../../data/augmentation.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    Paraphrase,
    Erasure,
    ToneShift,
}

impl Technique {
    pub const ALL: [Technique; 3] = [Technique::Paraphrase, Technique::Erasure, Technique::ToneShift];

    pub fn name(self) -> &'static str {
        match self {
            Technique::Paraphrase => "paraphrase",
            Technique::Erasure => "erasure",
            Technique::ToneShift => "tone_shift",
        }
    }

    pub fn provenance(self) -> Provenance {
        match self {
            Technique::Paraphrase => Provenance::Paraphrase,
            Technique::Erasure => Provenance::Erasure,
            Technique::ToneShift => Provenance::ToneShift,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    pub version: String,
    pub erasure_probability: f64,
    /// `(phrase, replacement)` pairs, tried in order.
    pub paraphrases: Vec<(String, String)>,
    /// Tone name to template; `{text}` marks where the request goes.
    pub tones: BTreeMap<String, String>,
}

impl AugmentationConfig {
    pub fn bundled() -> AugmentationConfig {
        serde_json::from_str(BUNDLED).expect("bundled augmentation config parses")
    }

    pub fn from_json(text: &str) -> Result<AugmentationConfig, CorpusError> {
        serde_json::from_str(text).map_err(|e| CorpusError::Config(e.to_string()))
    }
}

/// Augmentation bound to the lexicon whose cues it must preserve.
#[derive(Debug, Clone)]
pub struct Augmenter {
    config: AugmentationConfig,
    lexicon: Lexicon,
    paraphrases: Vec<(Regex, String)>,
}

fn fires(patterns: &[&Pattern], text: &str) -> Option<String> {
    let tokens = tokenize(text);
    patterns.iter().find(|p| !p.find_all(&tokens).is_empty()).map(|p| p.source().to_string())
}

impl Augmenter {
    pub fn new(config: AugmentationConfig, lexicon: Lexicon) -> Result<Augmenter, CorpusError> {
        if !(0.0..=1.0).contains(&config.erasure_probability) {
            return Err(CorpusError::Config("erasure_probability must lie in [0, 1]".into()));
        }
        // politeness prefixes carry no label, so wrappers may use them
        let patterns: Vec<&Pattern> = lexicon.all_patterns().chain(&lexicon.unknown_actions).collect();
        let mut paraphrases = Vec::new();
        for (from, to) in &config.paraphrases {
            if from.trim().is_empty() || to.trim().is_empty() || from.eq_ignore_ascii_case(to) {
                return Err(CorpusError::Config(format!("unusable paraphrase `{from}` -> `{to}`")));
            }
            if let Some(p) = fires(&patterns, to) {
                return Err(CorpusError::Config(format!("replacement `{to}` matches cue `{p}`")));
            }
            let re = Regex::new(&format!(r"(?i)\b{}\b", regex::escape(from)))
                .map_err(|e| CorpusError::Config(e.to_string()))?;
            paraphrases.push((re, to.clone()));
        }
        if config.tones.is_empty() {
            return Err(CorpusError::Config("at least one tone template is required".into()));
        }
        for (name, template) in &config.tones {
            let parts: Vec<&str> = template.split("{text}").collect();
            if parts.len() != 2 {
                return Err(CorpusError::Config(format!("tone `{name}` must contain `{{text}}` exactly once")));
            }
            for part in parts {
                if let Some(p) = fires(&patterns, part) {
                    return Err(CorpusError::Config(format!("tone `{name}` matches cue `{p}`")));
                }
            }
        }
        Ok(Augmenter { config, lexicon, paraphrases })
    }

    pub fn bundled() -> Augmenter {
        Augmenter::new(AugmentationConfig::bundled(), Lexicon::bundled()).expect("bundled config is valid")
    }

    pub fn config(&self) -> &AugmentationConfig {
        &self.config
    }

    pub fn corpus_version(&self) -> String {
        format!("seeds-{SEEDS_VERSION}+aug-{}+lex-{}", self.config.version, self.lexicon.version)
    }

    /// Byte ranges of `text` that augmentation must not touch.
    pub fn protected(&self, text: &str) -> Vec<(usize, usize)> {
        let byte_of: Vec<usize> = text.char_indices().map(|(b, _)| b).chain([text.len()]).collect();
        let tokens = tokenize(text);
        let mut out = Vec::new();
        for p in self
            .lexicon
            .all_patterns()
            .chain(&self.lexicon.unknown_actions)
            .chain(&self.lexicon.politeness_prefixes)
        {
            for (s, e) in p.find_all(&tokens) {
                out.push((byte_of[tokens[s].start], byte_of[tokens[e - 1].end]));
            }
        }
        for ent in extract_entities(text) {
            out.push((byte_of[ent.raw_span.start], byte_of[ent.raw_span.end]));
        }
        out.sort();
        out
    }

    /// One variant of `text`, or `None` when the technique changes nothing.
    pub fn apply(&self, text: &str, technique: Technique, rng: &mut ChaCha8Rng) -> Option<String> {
        let out = match technique {
            Technique::Paraphrase => self.paraphrase(text, rng),
            Technique::Erasure => self.erase(text, rng),
            Technique::ToneShift => {
                let templates: Vec<&String> = self.config.tones.values().collect();
                let t = templates[rng.random_range(0..templates.len())];
                t.replace("{text}", text)
            }
        };
        (out != text).then_some(out)
    }

    fn paraphrase(&self, text: &str, rng: &mut ChaCha8Rng) -> String {
        let protected = self.protected(text);
        let clear = |s: usize, e: usize, taken: &[(usize, usize, &str)]| {
            protected.iter().all(|&(ps, pe)| e <= ps || pe <= s) && taken.iter().all(|&(ts, te, _)| e <= ts || te <= s)
        };
        let mut candidates: Vec<(usize, usize, &str)> = Vec::new();
        for (re, to) in &self.paraphrases {
            for m in re.find_iter(text) {
                if clear(m.start(), m.end(), &candidates) {
                    candidates.push((m.start(), m.end(), to.as_str()));
                }
            }
        }
        if candidates.is_empty() {
            return text.to_string();
        }
        candidates.sort();
        let mut chosen: Vec<bool> = candidates.iter().map(|_| rng.random_bool(0.5)).collect();
        if !chosen.contains(&true) {
            let i = rng.random_range(0..chosen.len());
            chosen[i] = true;
        }
        let mut out = String::with_capacity(text.len());
        let mut at = 0;
        for (&(s, e, to), keep) in candidates.iter().zip(chosen) {
            if !keep {
                continue;
            }
            out.push_str(&text[at..s]);
            if text[s..].starts_with(|c: char| c.is_uppercase()) {
                let mut cs = to.chars();
                out.extend(cs.next().into_iter().flat_map(char::to_uppercase));
                out.push_str(cs.as_str());
            } else {
                out.push_str(to);
            }
            at = e;
        }
        out.push_str(&text[at..]);
        out
    }

    fn erase(&self, text: &str, rng: &mut ChaCha8Rng) -> String {
        let protected = self.protected(text);
        let mut kept = Vec::new();
        let mut offset = 0;
        for word in text.split(' ') {
            let (s, e) = (offset, offset + word.len());
            offset = e + 1;
            // punctuation carries clause structure, so only bare words go
            let bare = !word.is_empty() && word.chars().all(|c| c.is_alphanumeric() || c == '-' || c == '\'');
            let free = protected.iter().all(|&(ps, pe)| e <= ps || pe <= s);
            if bare && free && rng.random_bool(self.config.erasure_probability) {
                continue;
            }
            kept.push(word);
        }
        kept.join(" ")
    }

    /// Variants of `example`, one per technique that changes the text.
    pub fn augment(&self, example: &LabeledExample, seed: u64, techniques: &[Technique]) -> Vec<LabeledExample> {
        techniques
            .iter()
            .filter_map(|&t| {
                let mut rng = sub_rng(seed, &example.id, t);
                let text = self.apply(&example.text, t, &mut rng)?;
                Some(LabeledExample {
                    id: format!("{}~{}~{seed}", example.id, t.name()),
                    text,
                    labels: example.labels.clone(),
                    marker: example.marker,
                    provenance: t.provenance(),
                    parent: Some(example.parent.clone().unwrap_or_else(|| example.id.clone())),
                })
            })
            .collect()
    }
}

/// Independent stream per (seed, example, technique), stable across
/// platforms and across changes to the rest of the corpus.
fn sub_rng(seed: u64, id: &str, technique: Technique) -> ChaCha8Rng {
    let digest = Sha256::digest(format!("{seed}/{id}/{}", technique.name()).as_bytes());
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(bytes)
}

/// Seeds followed by `rounds` rounds of augmentation of every seed.
/// Duplicate texts are kept only once.
pub fn generate_corpus(augmenter: &Augmenter, seeds: &[LabeledExample], seed: u64, rounds: u32) -> Corpus {
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    for ex in seeds {
        if seen.insert(ex.text.clone()) {
            examples.push(ex.clone());
        }
    }
    for round in 0..rounds {
        let round_seed = seed.wrapping_mul(1_000_003).wrapping_add(u64::from(round));
        for ex in seeds {
            for v in augmenter.augment(ex, round_seed, &Technique::ALL) {
                if seen.insert(v.text.clone()) {
                    examples.push(v);
                }
            }
        }
    }
    Corpus {
        header: CorpusHeader {
            format: CORPUS_FORMAT.to_string(),
            corpus_version: augmenter.corpus_version(),
            seed,
            rounds,
        },
        examples,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::seed_examples;

    fn rng(n: u8) -> ChaCha8Rng {
        ChaCha8Rng::from_seed([n; 32])
    }

    #[test]
    fn bundled_config_is_valid() {
        let a = Augmenter::bundled();
        assert!(a.corpus_version().starts_with("seeds-1+aug-"));
        assert_eq!(a.config().tones.len(), 3);
    }

    #[test]
    fn replacements_that_add_cues_are_rejected() {
        let mut cfg = AugmentationConfig::bundled();
        cfg.paraphrases.push(("change".into(), "modify".into()));
        let err = Augmenter::new(cfg, Lexicon::bundled()).unwrap_err();
        assert!(err.to_string().contains("modify"), "{err}");

        let mut cfg = AugmentationConfig::bundled();
        cfg.tones.insert("pushy".into(), "{text} Deploy it now.".into());
        assert!(Augmenter::new(cfg, Lexicon::bundled()).is_err());
    }

    #[test]
    fn protected_covers_cues_and_entities() {
        let a = Augmenter::bundled();
        let text = "Modify net-3 in RegionB.";
        let p = a.protected(text);
        let covered = |needle: &str| {
            let s = text.find(needle).unwrap();
            p.iter().any(|&(ps, pe)| ps <= s && s + needle.len() <= pe)
        };
        assert!(covered("Modify"));
        assert!(covered("net-3"));
        assert!(covered("RegionB"));
    }

    #[test]
    fn paraphrase_skips_protected_text() {
        let a = Augmenter::bundled();
        // "new network" is a deployment cue, so "new" there stays.
        let out = a.apply("Deploy a new network in RegionC.", Technique::Paraphrase, &mut rng(1));
        assert_eq!(out, None);
        let out = a
            .apply("Modify the existing net-1 to address the issues.", Technique::Paraphrase, &mut rng(1))
            .unwrap();
        assert!(out.starts_with("Modify "), "{out}");
        assert!(out.contains("net-1"), "{out}");
    }

    #[test]
    fn erasure_keeps_protected_words_and_punctuation() {
        let a = Augmenter::bundled();
        let text = "Notify me of the status of net-3 every 10 minutes.";
        for n in 0..50 {
            if let Some(out) = a.apply(text, Technique::Erasure, &mut rng(n)) {
                for w in ["Notify", "status", "net-3", "every", "10", "minutes."] {
                    assert!(out.contains(w), "{out}");
                }
            }
        }
    }

    #[test]
    fn tone_shift_wraps_the_request() {
        let a = Augmenter::bundled();
        let out = a.apply("Restart my home router.", Technique::ToneShift, &mut rng(3)).unwrap();
        assert!(out.contains("Restart my home router."));
        assert!(a.config().tones.values().any(|t| t.replace("{text}", "Restart my home router.") == out));
    }

    #[test]
    fn corpus_is_deterministic_and_versioned() {
        let a = Augmenter::bundled();
        let seeds = seed_examples();
        let c1 = generate_corpus(&a, &seeds, 42, 3);
        let c2 = generate_corpus(&a, &seeds, 42, 3);
        assert_eq!(c1.to_jsonl(), c2.to_jsonl());
        assert_ne!(c1.to_jsonl(), generate_corpus(&a, &seeds, 43, 3).to_jsonl());
        assert!(c1.examples.len() > seeds.len() * 2);
        let back = Corpus::from_jsonl(&c1.to_jsonl()).unwrap();
        assert_eq!(back, c1);
    }
}
