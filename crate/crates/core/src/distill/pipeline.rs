use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::classifier::{Classifier, Readout};
use super::config::{derive_seed, ExperimentConfig};
use super::stages::{distill_student, finetune, pseudo_label, train_teacher, transfer_labels, DistillationDataset};
use crate::corpus::{pair_views, validate_corpus, Document, Label, PairedViews};
use crate::encoder::{DrugLexicon, EncoderParams, View, Vocabulary};
use crate::error::{Result, VidError};

/// Shared inputs of every classifier in a run: vocabulary, the common
/// encoder initialization and the paired views of both document sets.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub vocab: Vocabulary,
    pub base: EncoderParams,
    pub labeled: Vec<PairedViews>,
    pub unlabeled: Vec<PairedViews>,
}

/// Builds the vocabulary from `L ∪ U`, initializes the shared encoder and
/// derives both views of every document.
pub fn prepare(
    labeled: &[Document],
    unlabeled: &[Document],
    drugs: &DrugLexicon,
    cfg: &ExperimentConfig,
) -> Result<Prepared> {
    cfg.validate()?;
    validate_corpus(labeled, true)?;
    validate_corpus(unlabeled, false)?;
    if unlabeled.is_empty() {
        return Err(VidError::Empty("unlabeled pool".into()));
    }
    let has = |l| labeled.iter().any(|d| d.label == Some(l));
    if !has(Label::Positive) || !has(Label::Negative) {
        return Err(VidError::DegenerateData("labeled set needs both classes".into()));
    }
    let vocab = Vocabulary::build(labeled.iter().chain(unlabeled).map(|d| d.text.as_str()), drugs);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "encoder-init"));
    let base = EncoderParams::init(cfg.encoder, vocab.len(), &mut rng)?;
    let labeled = pair_views(labeled, &vocab, &base)?;
    let unlabeled = pair_views(unlabeled, &vocab, &base)?;
    Ok(Prepared {
        vocab,
        base,
        labeled,
        unlabeled,
    })
}

/// Both single-view teachers.
#[derive(Debug, Clone)]
pub struct Teachers {
    pub doc: Classifier,
    pub drug: Classifier,
    pub doc_history: Vec<f64>,
    pub drug_history: Vec<f64>,
}

impl Teachers {
    pub fn get(&self, view: View) -> &Classifier {
        match view {
            View::Document => &self.doc,
            View::Drug => &self.drug,
        }
    }
}

pub fn train_teachers(prep: &Prepared, cfg: &ExperimentConfig) -> Result<Teachers> {
    let (doc, drug) = rayon::join(
        || train_teacher(&prep.labeled, Readout::View(View::Document), &prep.base, cfg),
        || train_teacher(&prep.labeled, Readout::View(View::Drug), &prep.base, cfg),
    );
    let (doc, doc_history) = doc?;
    let (drug, drug_history) = drug?;
    Ok(Teachers {
        doc,
        drug,
        doc_history,
        drug_history,
    })
}

pub fn student_tag(view: View) -> String {
    format!("student-{}", view.name())
}

/// A student before and after fine-tuning.
#[derive(Debug, Clone)]
pub struct Branch {
    pub source: View,
    pub target: View,
    pub distilled: Classifier,
    pub finetuned: Classifier,
}

/// Pseudo-labels `U` with `source_teacher`, transfers the labels to `target`,
/// distills a fresh student there and fine-tunes it against the target-view
/// teacher.
pub fn run_branch(
    prep: &Prepared,
    source_teacher: &Classifier,
    target_teacher: &Classifier,
    cfg: &ExperimentConfig,
) -> Result<Branch> {
    let source = source_teacher
        .view()
        .ok_or_else(|| VidError::Contract("source teacher must read a single view".into()))?;
    let target = target_teacher
        .view()
        .ok_or_else(|| VidError::Contract("target teacher must read a single view".into()))?;
    let labels = pseudo_label(source_teacher, &prep.unlabeled, cfg.temperature)?;
    let dataset = transfer_labels(&labels, &prep.unlabeled, target)?;
    if cfg.check_invariants {
        check_transfer_round_trip(&labels, &dataset, prep)?;
    }
    let tag = student_tag(target);
    let distilled = distill_student(&dataset, &prep.base, cfg, &tag)?;
    let (finetuned, _) = finetune(&distilled, target_teacher, &prep.labeled, cfg, &tag)?;
    Ok(Branch {
        source,
        target,
        distilled,
        finetuned,
    })
}

fn check_transfer_round_trip(
    labels: &super::stages::SoftLabelSet,
    dataset: &DistillationDataset,
    prep: &Prepared,
) -> Result<()> {
    let back = transfer_labels(&dataset.labels(), &prep.unlabeled, dataset.view.other())?;
    if back.labels() != *labels {
        return Err(VidError::Contract("label transfer round trip changed (id, label) pairs".into()));
    }
    Ok(())
}

/// Everything a full run produces.
#[derive(Debug, Clone)]
pub struct VidModels {
    pub vocab: Vocabulary,
    pub base: EncoderParams,
    pub teachers: Teachers,
    /// Student in the document view, initialized from drug-view pseudo-labels.
    pub doc_branch: Branch,
    /// Student in the drug view, initialized from document-view pseudo-labels.
    pub drug_branch: Branch,
}

impl VidModels {
    pub fn student(&self, view: View) -> &Classifier {
        match view {
            View::Document => &self.doc_branch.finetuned,
            View::Drug => &self.drug_branch.finetuned,
        }
    }
}

/// Full view distillation: teachers per view, then one cross-view branch
/// per target view. The two branches are independent and run concurrently.
pub fn vid_pipeline(
    labeled: &[Document],
    unlabeled: &[Document],
    drugs: &DrugLexicon,
    cfg: &ExperimentConfig,
) -> Result<VidModels> {
    let prep = prepare(labeled, unlabeled, drugs, cfg)?;
    let teachers = train_teachers(&prep, cfg)?;
    vid_from_teachers(prep, teachers, cfg, [View::Drug, View::Document])
}

/// Runs both cross-view branches given trained teachers. `order` only
/// decides which branch is launched first.
pub fn vid_from_teachers(
    prep: Prepared,
    teachers: Teachers,
    cfg: &ExperimentConfig,
    order: [View; 2],
) -> Result<VidModels> {
    let fingerprints = cfg
        .check_invariants
        .then(|| (teachers.doc.fingerprint(), teachers.drug.fingerprint()));
    let branch_for = |target: View| {
        run_branch(&prep, teachers.get(target.other()), teachers.get(target), cfg)
    };
    let (first, second) = rayon::join(|| branch_for(order[0]), || branch_for(order[1]));
    let (first, second) = (first?, second?);
    let (doc_branch, drug_branch) = if first.target == View::Document {
        (first, second)
    } else {
        (second, first)
    };
    if let Some((d, g)) = fingerprints {
        if teachers.doc.fingerprint() != d || teachers.drug.fingerprint() != g {
            return Err(VidError::Contract("teacher parameters changed during distillation".into()));
        }
    }
    Ok(VidModels {
        vocab: prep.vocab,
        base: prep.base,
        teachers,
        doc_branch,
        drug_branch,
    })
}
