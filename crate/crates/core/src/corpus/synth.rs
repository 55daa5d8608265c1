//! Synthetic ADR-like corpora with two partially independent signal channels.
//!
//! Every document mentions exactly one drug. The word right after the drug is
//! the *drug channel*: a symptom word for most positives, a neutral word
//! otherwise. Somewhere away from the drug the *document channel* places a
//! complaint word for most positives. Each channel fails and fires
//! independently of the other, so the two views carry complementary evidence.
//! Symptom and complaint words follow a Zipf-like law so that rare words are
//! only seen often enough in a large pool.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::document::{Document, Label};
use crate::encoder::DrugLexicon;
use crate::error::{Result, VidError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_labeled: usize,
    pub n_unlabeled: usize,
    pub n_test: usize,
    pub positive_rate: f64,
    pub seed: u64,
    pub n_drugs: usize,
    pub n_symptom_words: usize,
    pub n_complaint_words: usize,
    pub n_filler_words: usize,
    /// Probability that a channel carries its cue in a positive document.
    pub signal_rate: f64,
    /// Probability that a channel carries a cue in a negative document.
    pub noise_rate: f64,
    /// Exponent of the rank-frequency law for cue words.
    pub zipf_exponent: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_labeled: 2000,
            n_unlabeled: 8000,
            n_test: 1000,
            positive_rate: 0.092,
            seed: 0,
            n_drugs: 24,
            n_symptom_words: 150,
            n_complaint_words: 150,
            n_filler_words: 200,
            signal_rate: 0.8,
            noise_rate: 0.02,
            zipf_exponent: 0.8,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_labeled", self.n_labeled),
            ("n_unlabeled", self.n_unlabeled),
            ("n_test", self.n_test),
            ("n_drugs", self.n_drugs),
            ("n_symptom_words", self.n_symptom_words),
            ("n_complaint_words", self.n_complaint_words),
            ("n_filler_words", self.n_filler_words),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(VidError::Parameter(format!("{name} must be positive")));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(VidError::Parameter(format!(
                "positive_rate must lie in (0, 1), got {}",
                self.positive_rate
            )));
        }
        for (name, p) in [("signal_rate", self.signal_rate), ("noise_rate", self.noise_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(VidError::Parameter(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !self.zipf_exponent.is_finite() || self.zipf_exponent < 0.0 {
            return Err(VidError::Parameter("zipf_exponent must be finite and non-negative".into()));
        }
        Ok(())
    }
}

/// Labeled, unlabeled and test documents plus the drug lexicon they use.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplits {
    pub labeled: Vec<Document>,
    pub unlabeled: Vec<Document>,
    pub test: Vec<Document>,
    pub drugs: DrugLexicon,
}

const DRUGS: &[&str] = &[
    "seroquel", "prozac", "zoloft", "lexapro", "cymbalta", "paxil", "xanax", "ativan", "lamictal",
    "abilify", "humira", "lyrica", "ambien", "trazodone", "wellbutrin", "effexor", "adderall",
    "vyvanse", "tamiflu", "lipitor", "metformin", "gabapentin", "citalopram", "nexium",
    "synthroid", "plavix", "celebrex", "klonopin", "latuda", "saphris",
];

const SYMPTOMS: &[&str] = &[
    "nausea", "dizzy", "insomnia", "headache", "drowsy", "vomiting", "rash", "tremors", "numb",
    "itchy", "sweating", "fatigue", "cramps", "palpitations", "migraine", "bloated", "constipated",
    "jittery", "foggy", "groggy", "twitching", "nosebleed", "hives", "seizure", "weightgain",
    "hairloss", "drymouth", "blurry", "vertigo", "chills",
];

const COMPLAINTS: &[&str] = &[
    "awful", "horrible", "miserable", "terrible", "worst", "hate", "suffering", "ugh", "wrecked",
    "ruined", "nightmare", "unbearable", "dying", "sick", "wtf", "crying", "regret", "useless",
    "scared", "hell",
];

const NEUTRAL_ADJACENT: &[&str] = &[
    "pill", "dose", "refill", "prescription", "generic", "tablet", "today", "tonight", "bottle",
    "pharmacy", "coupon", "schedule",
];

const FILLER: &[&str] = &[
    "i", "my", "the", "a", "just", "took", "is", "and", "so", "me", "this", "that", "on", "for",
    "with", "at", "doctor", "got", "new", "day", "week", "night", "morning", "again", "still",
    "now", "been", "back", "going", "work", "sleep", "home", "think", "know", "really", "lol",
    "feel", "time", "had", "started", "need", "want", "about", "after", "before", "when", "what",
    "why", "how", "who",
];

const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "gl", "kr", "st"];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];

/// Extends `base` with unique pronounceable pseudo-words until it has `n` entries.
fn word_pool(base: &[&str], n: usize, rng: &mut ChaCha8Rng, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    for w in base.iter().take(n) {
        taken.insert(w.to_string());
        out.push(w.to_string());
    }
    while out.len() < n {
        let syllables = rng.random_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
            w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
        }
        if rng.random_bool(0.5) {
            w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
        }
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Cumulative weights `1 / rank^s` for inverse-CDF sampling.
fn zipf_cdf(n: usize, s: f64) -> Vec<f64> {
    let mut acc = 0.0;
    let mut cdf: Vec<f64> = (1..=n)
        .map(|r| {
            acc += 1.0 / (r as f64).powf(s);
            acc
        })
        .collect();
    for c in &mut cdf {
        *c /= acc;
    }
    cdf
}

fn sample_cdf(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    cdf.partition_point(|&c| c < u).min(cdf.len() - 1)
}

struct Pools {
    drugs: Vec<String>,
    symptoms: Vec<String>,
    complaints: Vec<String>,
    filler: Vec<String>,
    cue_cdf_symptom: Vec<f64>,
    cue_cdf_complaint: Vec<f64>,
}

impl Pools {
    fn new(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut taken: BTreeSet<String> = NEUTRAL_ADJACENT.iter().map(|s| s.to_string()).collect();
        let drugs = word_pool(DRUGS, cfg.n_drugs, rng, &mut taken);
        let symptoms = word_pool(SYMPTOMS, cfg.n_symptom_words, rng, &mut taken);
        let complaints = word_pool(COMPLAINTS, cfg.n_complaint_words, rng, &mut taken);
        let filler = word_pool(FILLER, cfg.n_filler_words, rng, &mut taken);
        let cue_cdf_symptom = zipf_cdf(symptoms.len(), cfg.zipf_exponent);
        let cue_cdf_complaint = zipf_cdf(complaints.len(), cfg.zipf_exponent);
        Self {
            drugs,
            symptoms,
            complaints,
            filler,
            cue_cdf_symptom,
            cue_cdf_complaint,
        }
    }

    fn document(&self, label: Label, cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> String {
        let cue_p = match label {
            Label::Positive => cfg.signal_rate,
            Label::Negative => cfg.noise_rate,
        };
        let drug = &self.drugs[rng.random_range(0..self.drugs.len())];
        let adjacent = if rng.random_bool(cue_p) {
            &self.symptoms[sample_cdf(&self.cue_cdf_symptom, rng)]
        } else {
            NEUTRAL_ADJACENT[rng.random_range(0..NEUTRAL_ADJACENT.len())]
        };
        let complaint = rng
            .random_bool(cue_p)
            .then(|| &self.complaints[sample_cdf(&self.cue_cdf_complaint, rng)]);

        let n_filler = rng.random_range(3..=8);
        let mut words: Vec<&str> = (0..n_filler)
            .map(|_| self.filler[rng.random_range(0..self.filler.len())].as_str())
            .collect();
        let drug_at = rng.random_range(0..=words.len());
        words.insert(drug_at, drug);
        words.insert(drug_at + 1, adjacent);
        if let Some(c) = complaint {
            // keep the complaint at least one word away from the drug window
            let slots: Vec<usize> = (0..=words.len())
                .filter(|&i| i + 1 < drug_at || i > drug_at + 3)
                .collect();
            let at = slots.choose(rng).copied().unwrap_or(words.len());
            words.insert(at, c);
        }
        words.join(" ")
    }

    fn split(
        &self,
        prefix: &str,
        n: usize,
        labeled: bool,
        cfg: &SynthConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Document> {
        let n_pos = (cfg.positive_rate * n as f64).round() as usize;
        let mut labels: Vec<Label> = (0..n)
            .map(|i| if i < n_pos { Label::Positive } else { Label::Negative })
            .collect();
        labels.shuffle(rng);
        labels
            .into_iter()
            .enumerate()
            .map(|(i, label)| {
                let text = self.document(label, cfg, rng);
                let id = format!("{prefix}{:06}", i + 1);
                if labeled {
                    Document::labeled(id, text, label)
                } else {
                    Document::unlabeled(id, text)
                }
            })
            .collect()
    }
}

/// Generates labeled, unlabeled and test sets. Labeled and test sets contain
/// exactly `round(positive_rate * n)` positives; the unlabeled pool is drawn
/// the same way with labels discarded.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<CorpusSplits> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pools = Pools::new(cfg, &mut rng);
    let labeled = pools.split("L", cfg.n_labeled, true, cfg, &mut rng);
    let unlabeled = pools.split("U", cfg.n_unlabeled, false, cfg, &mut rng);
    let test = pools.split("T", cfg.n_test, true, cfg, &mut rng);
    Ok(CorpusSplits {
        labeled,
        unlabeled,
        test,
        drugs: DrugLexicon::new(&pools.drugs),
    })
}

/// Same as [`generate_synthetic`] but also returns the hidden labels of the
/// unlabeled pool, for diagnostics.
pub fn generate_with_pool_labels(cfg: &SynthConfig) -> Result<(CorpusSplits, Vec<Label>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pools = Pools::new(cfg, &mut rng);
    let labeled = pools.split("L", cfg.n_labeled, true, cfg, &mut rng);
    let pool = pools.split("U", cfg.n_unlabeled, true, cfg, &mut rng);
    let test = pools.split("T", cfg.n_test, true, cfg, &mut rng);
    let hidden = pool.iter().map(|d| d.label.expect("generated labeled")).collect();
    let unlabeled = pool
        .into_iter()
        .map(|d| Document::unlabeled(d.id, d.text))
        .collect();
    Ok((
        CorpusSplits {
            labeled,
            unlabeled,
            test,
            drugs: DrugLexicon::new(&pools.drugs),
        },
        hidden,
    ))
}
