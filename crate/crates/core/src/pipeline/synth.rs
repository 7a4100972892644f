//! Synthetic tweet-like corpus with a known decision rule.
//!
//! Positives mention a signal word with probability `signal_rate_pos`.
//! Negatives mention one with probability `signal_rate_neg`, but always
//! directly after a negator word that never occurs in positives. The ideal
//! token-level rule "signal present and no negator" then reaches recall
//! `signal_rate_pos` at precision 1. Everything else is filler: stopwords,
//! pseudo-words, URLs, mentions, hashtags, emoji and stray punctuation.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::hpo::trial_rng;
use crate::textprep::{Record, Stoplist, ENGLISH_STOPWORDS};

const SIGNAL_WORDS: [&str; 4] = ["fever", "cough", "nausea", "headache"];
const NEGATORS: [&str; 2] = ["never", "denies"];
const EMOJI: [&str; 6] = ["\u{1F637}", "\u{1F912}", "\u{1F614}", "\u{1F602}", "\u{2764}\u{FE0F}", "\u{1F64F}"];
const ONSETS: [&str; 12] = ["b", "k", "d", "f", "g", "l", "m", "p", "r", "v", "z", "sh"];
const NUCLEI: [&str; 5] = ["a", "e", "i", "o", "u"];
const CODAS: [&str; 5] = ["", "n", "r", "x", "lt"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Fraction of positives per split; counts are `round(n * rate)`.
    pub positive_rate: f64,
    pub signal_words: Vec<String>,
    pub negators: Vec<String>,
    /// Content-bearing filler; defaults to generated pseudo-words.
    pub noise_words: Vec<String>,
    pub signal_rate_pos: f64,
    pub signal_rate_neg: f64,
    /// Inclusive range of pseudo-word filler per document.
    pub noise_tokens: (usize, usize),
    /// Inclusive range of stopword filler per document.
    pub stopword_tokens: (usize, usize),
    pub seed: u64,
}

/// Deterministic pseudo-words such as "bax" or "shulto".
pub fn pseudo_words(n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    let stop = Stoplist::english();
    'outer: for second in [false, true] {
        for o in ONSETS {
            for v in NUCLEI {
                for c in CODAS {
                    let w = if second {
                        format!("{o}{v}{c}{}", ["to", "ma", "ri"][(o.len() + v.as_bytes()[0] as usize + c.len()) % 3])
                    } else {
                        format!("{o}{v}{c}")
                    };
                    if w.len() >= 3 && !stop.contains(&w) {
                        out.push(w);
                        if out.len() == n {
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    out
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_train: 7600,
            n_val: 400,
            n_test: 10000,
            positive_rate: 1334.0 / 7600.0,
            signal_words: SIGNAL_WORDS.iter().map(|s| s.to_string()).collect(),
            negators: NEGATORS.iter().map(|s| s.to_string()).collect(),
            noise_words: pseudo_words(200),
            signal_rate_pos: 0.95,
            signal_rate_neg: 0.05,
            noise_tokens: (1, 2),
            stopword_tokens: (3, 10),
            seed: 0,
        }
    }
}

/// Train, validation and test splits.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub train: Vec<Record>,
    pub val: Vec<Record>,
    pub test: Vec<Record>,
}

fn is_word(w: &str) -> bool {
    !w.is_empty() && w.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit())
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::config("synth", m));
        for (name, n) in [("n_train", self.n_train), ("n_val", self.n_val), ("n_test", self.n_test)] {
            if n == 0 {
                return bad(format!("{name} must be > 0"));
            }
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return bad("positive_rate must lie in (0, 1)".into());
        }
        for (name, p) in [("signal_rate_pos", self.signal_rate_pos), ("signal_rate_neg", self.signal_rate_neg)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, words) in [
            ("signal_words", &self.signal_words),
            ("negators", &self.negators),
            ("noise_words", &self.noise_words),
        ] {
            if words.is_empty() {
                return bad(format!("{name} must not be empty"));
            }
            if let Some(w) = words.iter().find(|w| !is_word(w)) {
                return bad(format!("{name} entry {w:?} is not a lowercase ascii word"));
            }
        }
        let stop = Stoplist::english();
        for w in self.signal_words.iter().chain(&self.negators).chain(&self.noise_words) {
            if stop.contains(w) {
                return bad(format!("{w:?} is an English stopword"));
            }
        }
        let overlaps = |a: &[String], b: &[String]| a.iter().any(|w| b.contains(w));
        if overlaps(&self.signal_words, &self.negators)
            || overlaps(&self.signal_words, &self.noise_words)
            || overlaps(&self.negators, &self.noise_words)
        {
            return bad("signal, negator and noise vocabularies must be disjoint".into());
        }
        for (name, (lo, hi)) in [("noise_tokens", self.noise_tokens), ("stopword_tokens", self.stopword_tokens)] {
            if lo > hi {
                return bad(format!("{name} range is empty"));
            }
        }
        Ok(())
    }

    pub fn n_positive(n: usize, rate: f64) -> usize {
        (n as f64 * rate).round() as usize
    }
}

struct Generator<'a> {
    spec: &'a SyntheticSpec,
    stopwords: Vec<&'static str>,
}

impl Generator<'_> {
    fn pick<'w, R: Rng>(rng: &mut R, words: &'w [String]) -> &'w str {
        &words[rng.gen_range(0..words.len())]
    }

    fn handle<R: Rng>(&self, rng: &mut R) -> String {
        format!("{}_{}", Self::pick(rng, &self.spec.noise_words), rng.gen_range(1..1000))
    }

    fn document<R: Rng>(&self, rng: &mut R, positive: bool) -> String {
        let s = self.spec;
        let mut tokens: Vec<String> = Vec::new();
        for _ in 0..rng.gen_range(s.noise_tokens.0..=s.noise_tokens.1) {
            tokens.push(Self::pick(rng, &s.noise_words).to_string());
        }
        for _ in 0..rng.gen_range(s.stopword_tokens.0..=s.stopword_tokens.1) {
            tokens.push(self.stopwords[rng.gen_range(0..self.stopwords.len())].to_string());
        }
        tokens.shuffle(rng);

        if positive {
            if rng.gen_bool(s.signal_rate_pos) {
                for _ in 0..rng.gen_range(1..=2) {
                    let at = rng.gen_range(0..=tokens.len());
                    tokens.insert(at, Self::pick(rng, &s.signal_words).to_string());
                }
            }
        } else if rng.gen_bool(s.signal_rate_neg) {
            let at = rng.gen_range(0..=tokens.len());
            let neg = Self::pick(rng, &s.negators).to_string();
            let sig = Self::pick(rng, &s.signal_words).to_string();
            tokens.splice(at..at, [neg, sig]);
        }

        for t in tokens.iter_mut() {
            if rng.gen_bool(0.15) {
                let mut c = t.chars();
                if let Some(first) = c.next() {
                    *t = first.to_ascii_uppercase().to_string() + c.as_str();
                }
            }
            if rng.gen_bool(0.08) {
                t.push_str(["!", "?", "...", ",", "."][rng.gen_range(0..5)]);
            }
        }
        if rng.gen_bool(0.25) {
            tokens.insert(0, format!("@{}", self.handle(rng)));
        }
        if rng.gen_bool(0.25) {
            let at = rng.gen_range(0..=tokens.len());
            tokens.insert(at, format!("#{}", Self::pick(rng, &s.noise_words)));
        }
        if rng.gen_bool(0.2) {
            tokens.push(EMOJI[rng.gen_range(0..EMOJI.len())].to_string());
        }
        if rng.gen_bool(0.3) {
            let slug: String = (0..8).map(|_| rng.sample(rand::distributions::Alphanumeric) as char).collect();
            tokens.push(format!("https://t.co/{slug}"));
        }
        tokens.join(" ")
    }

    fn split(&self, rng: &mut ChaCha8Rng, name: &str, n: usize) -> Vec<Record> {
        let n_pos = SyntheticSpec::n_positive(n, self.spec.positive_rate);
        let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
        labels.shuffle(rng);
        labels
            .into_iter()
            .enumerate()
            .map(|(i, y)| Record {
                id: format!("{name}_{i:05}"),
                text: self.document(rng, y == 1),
                label: Some(y),
            })
            .collect()
    }
}

/// Builds the three splits. Each split draws from its own ChaCha8 stream,
/// so changing one split's size leaves the others unchanged.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus, PipelineError> {
    spec.validate()?;
    let stopwords = ENGLISH_STOPWORDS
        .lines()
        .map(str::trim)
        .filter(|w| w.len() > 1)
        .collect();
    let g = Generator { spec, stopwords };
    Ok(SyntheticCorpus {
        train: g.split(&mut trial_rng(spec.seed, 0), "train", spec.n_train),
        val: g.split(&mut trial_rng(spec.seed, 1), "val", spec.n_val),
        test: g.split(&mut trial_rng(spec.seed, 2), "test", spec.n_test),
    })
}
