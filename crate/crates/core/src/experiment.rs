//! Multi-seed comparison of single-view baselines, view distillation and
//! its initialization ablations on synthetic corpora.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::entropy;
use crate::corpus::{generate_synthetic, CorpusSplits, Label, SynthConfig};
use crate::distill::{
    argmax, student_tag, ensemble_probabilities, finetune, predict_labels, prepare, run_branch, train_teacher, train_teachers,
    Classifier, ExperimentConfig, Readout,
};
use crate::encoder::{tokenize, EncodedDocument, View};
use crate::error::{Result, VidError};
use crate::metrics::{compare_runs, mean_sd, score, MethodRuns, Prf1, Report};

/// One row of the comparison report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    DocView,
    DrugView,
    CombinedView,
    Vid,
    PDocFDoc,
    PDrugFDrug,
    PDocFDrug,
    PDrugFDoc,
    VidLambda0,
}

impl Method {
    /// Report order: view baselines first, then the initialization grid,
    /// then the λ = 0 control.
    pub const ALL: [Method; 9] = [
        Method::DocView,
        Method::DrugView,
        Method::CombinedView,
        Method::Vid,
        Method::PDocFDoc,
        Method::PDrugFDrug,
        Method::PDocFDrug,
        Method::PDrugFDoc,
        Method::VidLambda0,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::DocView => "doc-view",
            Method::DrugView => "drug-view",
            Method::CombinedView => "combined-view",
            Method::Vid => "VID",
            Method::PDocFDoc => "P-Doc-F-Doc",
            Method::PDrugFDrug => "P-Drug-F-Drug",
            Method::PDocFDrug => "P-Doc-F-Drug",
            Method::PDrugFDoc => "P-Drug-F-Doc",
            Method::VidLambda0 => "VID-lambda0",
        }
    }

    /// Case-insensitive lookup by name or short alias (`doc`, `drug`,
    /// `combined`, `vid`, `lambda0`).
    pub fn parse(name: &str) -> Option<Self> {
        let n = name.to_ascii_lowercase();
        let alias = match n.as_str() {
            "doc" => Some(Method::DocView),
            "drug" => Some(Method::DrugView),
            "combined" => Some(Method::CombinedView),
            "lambda0" => Some(Method::VidLambda0),
            _ => None,
        };
        alias.or_else(|| Self::ALL.into_iter().find(|m| m.name().to_ascii_lowercase() == n))
    }

    fn needs_teachers(self) -> bool {
        self != Method::CombinedView
    }

    fn needs_cross_branches(self) -> bool {
        matches!(self, Method::Vid | Method::PDocFDrug | Method::PDrugFDoc | Method::VidLambda0)
    }
}

/// Mean prediction entropy of the doc-view student on the test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyPair {
    /// Fine-tuned with the configured λ.
    pub configured: f64,
    /// Fine-tuned with λ = 0 from the same distilled student.
    pub lambda0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Scores in [`Method::ALL`] order, restricted to what was run.
    pub scores: Vec<(String, Prf1)>,
    pub entropy: Option<EntropyPair>,
    /// Wall-clock time; left out of serialized reports so they stay reproducible.
    #[serde(skip, default)]
    pub seconds: f64,
}

impl SeedResult {
    pub fn get(&self, method: &str) -> Option<Prf1> {
        self.scores.iter().find(|(m, _)| m == method).map(|(_, s)| *s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub config: ExperimentConfig,
    /// Generator settings when each seed drew its own corpus.
    pub synth: Option<SynthConfig>,
    pub methods: Vec<Method>,
    pub seeds: Vec<SeedResult>,
    pub report: Report,
}

impl AblationReport {
    /// Mean entropies `(configured λ, λ = 0)` over seeds, if measured.
    pub fn mean_entropy(&self) -> Option<(f64, f64)> {
        let pairs: Vec<EntropyPair> = self.seeds.iter().filter_map(|s| s.entropy).collect();
        if pairs.is_empty() {
            return None;
        }
        let a: Vec<f64> = pairs.iter().map(|p| p.configured).collect();
        let b: Vec<f64> = pairs.iter().map(|p| p.lambda0).collect();
        Some((mean_sd(&a).0, mean_sd(&b).0))
    }

    pub fn mean_f1(&self, method: &str) -> Option<f64> {
        self.report.row(method).map(|r| r.f1.mean)
    }
}

fn mean_entropy(probs: &[[f64; 2]]) -> f64 {
    probs.iter().map(|p| entropy(p)).sum::<f64>() / probs.len() as f64
}

struct TestSet {
    docs: Vec<EncodedDocument>,
    golds: Vec<Label>,
}

impl TestSet {
    fn score(&self, model: &Classifier) -> Result<Prf1> {
        score(&predict_labels(model, &self.docs)?, &self.golds)
    }

    fn score_ensemble(&self, doc_model: &Classifier, drug_model: &Classifier) -> Result<Prf1> {
        let p = ensemble_probabilities(doc_model, drug_model, &self.docs)?;
        score(&p.into_iter().map(argmax).collect::<Vec<_>>(), &self.golds)
    }
}

fn find<'a>(models: &'a Option<(Classifier, Classifier)>, what: &str) -> Result<&'a (Classifier, Classifier)> {
    models
        .as_ref()
        .ok_or_else(|| VidError::Contract(format!("{what} were not trained for this selection")))
}

/// Trains what `methods` need on one corpus and scores each on its test set.
pub fn run_corpus(corpus: &CorpusSplits, cfg: &ExperimentConfig, methods: &[Method]) -> Result<SeedResult> {
    if methods.is_empty() {
        return Err(VidError::Parameter("no method selected".into()));
    }
    let started = Instant::now();
    let has = |m| methods.contains(&m);
    let prep = prepare(&corpus.labeled, &corpus.unlabeled, &corpus.drugs, cfg)?;
    let test = TestSet {
        docs: corpus
            .test
            .iter()
            .map(|d| tokenize(&d.text, &prep.vocab, cfg.encoder.max_len))
            .collect::<Result<_>>()?,
        golds: corpus
            .test
            .iter()
            .map(|d| d.label.ok_or_else(|| VidError::Schema(format!("test document {:?} has no label", d.id))))
            .collect::<Result<_>>()?,
    };
    if test.docs.is_empty() {
        return Err(VidError::Empty("test set".into()));
    }

    let teachers = match methods.iter().any(|m| m.needs_teachers()) {
        true => Some(train_teachers(&prep, cfg)?),
        false => None,
    };
    let teacher = |v: View| -> Result<&Classifier> {
        Ok(teachers
            .as_ref()
            .ok_or_else(|| VidError::Contract("teachers were not trained".into()))?
            .get(v))
    };

    // Distilled and fine-tuned students, (doc view, drug view).
    let mut cross_distilled: Option<(Classifier, Classifier)> = None;
    let mut cross: Option<(Classifier, Classifier)> = None;
    if methods.iter().any(|m| m.needs_cross_branches()) {
        let (to_doc, to_drug) = rayon::join(
            || run_branch(&prep, teacher(View::Drug)?, teacher(View::Document)?, cfg),
            || run_branch(&prep, teacher(View::Document)?, teacher(View::Drug)?, cfg),
        );
        let (to_doc, to_drug) = (to_doc?, to_drug?);
        cross = Some((to_doc.finetuned, to_drug.finetuned));
        cross_distilled = Some((to_doc.distilled, to_drug.distilled));
    }
    let mut same: Option<(Classifier, Classifier)> = None;
    if has(Method::PDocFDoc) || has(Method::PDrugFDrug) {
        let (d, g) = rayon::join(
            || run_branch(&prep, teacher(View::Document)?, teacher(View::Document)?, cfg),
            || run_branch(&prep, teacher(View::Drug)?, teacher(View::Drug)?, cfg),
        );
        same = Some((d?.finetuned, g?.finetuned));
    }

    let mut scores: Vec<(String, Prf1)> = Vec::new();
    let mut entropy = None;
    for &m in Method::ALL.iter().filter(|m| has(**m)) {
        let s = match m {
            Method::DocView => test.score(teacher(View::Document)?)?,
            Method::DrugView => test.score(teacher(View::Drug)?)?,
            Method::CombinedView => {
                let (combined, _) = train_teacher(&prep.labeled, Readout::Concat, &prep.base, cfg)?;
                test.score(&combined)?
            }
            Method::Vid => {
                let (d, g) = find(&cross, "cross-view students")?;
                test.score_ensemble(d, g)?
            }
            Method::PDocFDoc => test.score(&find(&same, "same-view students")?.0)?,
            Method::PDrugFDrug => test.score(&find(&same, "same-view students")?.1)?,
            Method::PDocFDrug => test.score(&find(&cross, "cross-view students")?.1)?,
            Method::PDrugFDoc => test.score(&find(&cross, "cross-view students")?.0)?,
            Method::VidLambda0 => {
                let control = ExperimentConfig {
                    lambda: 0.0,
                    ..cfg.clone()
                };
                let (dd, gd) = find(&cross_distilled, "distilled students")?;
                let (d0, g0) = rayon::join(
                    || finetune(dd, teacher(View::Document)?, &prep.labeled, &control, &student_tag(View::Document)),
                    || finetune(gd, teacher(View::Drug)?, &prep.labeled, &control, &student_tag(View::Drug)),
                );
                let (d0, g0) = (d0?.0, g0?.0);
                let (d, _) = find(&cross, "cross-view students")?;
                entropy = Some(EntropyPair {
                    configured: mean_entropy(&d.probabilities(&test.docs, 1.0)?),
                    lambda0: mean_entropy(&d0.probabilities(&test.docs, 1.0)?),
                });
                test.score_ensemble(&d0, &g0)?
            }
        };
        scores.push((m.name().to_string(), s));
    }
    Ok(SeedResult {
        seed: cfg.seed,
        scores,
        entropy,
        seconds: started.elapsed().as_secs_f64(),
    })
}

fn collect_report(
    synth: Option<SynthConfig>,
    cfg: &ExperimentConfig,
    methods: &[Method],
    results: Vec<SeedResult>,
) -> Result<AblationReport> {
    let rows: Vec<MethodRuns> = Method::ALL
        .iter()
        .filter(|m| methods.contains(m))
        .map(|m| MethodRuns {
            method: m.name().to_string(),
            runs: results.iter().filter_map(|r| r.get(m.name())).collect(),
        })
        .collect();
    Ok(AblationReport {
        config: cfg.clone(),
        synth,
        methods: methods.to_vec(),
        report: compare_runs(&rows)?,
        seeds: results,
    })
}

fn seeded(cfg: &ExperimentConfig, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        ..cfg.clone()
    }
}

/// Runs `methods` once per model seed on a fixed corpus, seeds in parallel.
pub fn run_on_corpus(
    corpus: &CorpusSplits,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    methods: &[Method],
) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(VidError::Parameter("at least one seed is required".into()));
    }
    cfg.validate()?;
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let r = run_corpus(corpus, &seeded(cfg, seed), methods)?;
            log::info!("seed {seed}: done in {:.1}s", r.seconds);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    collect_report(None, cfg, methods, results)
}

/// Generates a fresh synthetic corpus per seed (corpus and model seeds both
/// set to it) and runs `methods` on each, seeds in parallel.
pub fn run_synthetic(
    synth: &SynthConfig,
    cfg: &ExperimentConfig,
    seeds: &[u64],
    methods: &[Method],
) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(VidError::Parameter("at least one seed is required".into()));
    }
    synth.validate()?;
    cfg.validate()?;
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let corpus = generate_synthetic(&SynthConfig {
                seed,
                ..synth.clone()
            })?;
            let r = run_corpus(&corpus, &seeded(cfg, seed), methods)?;
            log::info!("seed {seed}: done in {:.1}s", r.seconds);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    collect_report(Some(synth.clone()), cfg, methods, results)
}
