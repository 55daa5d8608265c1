//! The individual steps of view distillation: teacher training, soft
//! pseudo-labeling, cross-view label transfer, student distillation and
//! mixed-objective fine-tuning.

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::classifier::{Classifier, Readout};
use super::config::{derive_seed, ExperimentConfig};
use super::train::{run_epochs, Example, LossWeights, Trainable};
use crate::autodiff::softmax_t;
use crate::corpus::{Label, PairedViews};
use crate::encoder::{EncodedDocument, EncoderParams, View};
use crate::error::{Result, VidError};

/// Probability pairs `(p_negative, p_positive)` keyed by document id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabelSet {
    pub temperature: f64,
    pub labels: BTreeMap<String, [f64; 2]>,
}

impl SoftLabelSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<[f64; 2]> {
        self.labels.get(id).copied()
    }

    /// Hard label per id, ties going to `Negative`.
    pub fn argmax(&self) -> BTreeMap<String, Label> {
        self.labels
            .iter()
            .map(|(id, p)| (id.clone(), argmax(*p)))
            .collect()
    }
}

/// Index of the larger probability; ties resolve to `Negative`.
pub fn argmax(p: [f64; 2]) -> Label {
    if p[1] > p[0] {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// One soft-labeled example in the target view.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillItem {
    pub id: String,
    pub encoded: EncodedDocument,
    /// Target-view representation from the pairing pass.
    pub repr: Vec<f64>,
    pub soft: [f64; 2],
}

/// Soft labels carried over to a target view.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillationDataset {
    pub view: View,
    pub temperature: f64,
    pub items: Vec<DistillItem>,
}

impl DistillationDataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The `(id, label)` pairs this dataset was built from.
    pub fn labels(&self) -> SoftLabelSet {
        SoftLabelSet {
            temperature: self.temperature,
            labels: self.items.iter().map(|it| (it.id.clone(), it.soft)).collect(),
        }
    }
}

fn encoded_docs(pool: &[PairedViews]) -> Vec<EncodedDocument> {
    pool.iter().map(|p| p.encoded.clone()).collect()
}

/// Trains a classifier on one view with hard-label cross-entropy.
///
/// Returns the classifier and its per-epoch training loss.
pub fn train_teacher(
    train: &[PairedViews],
    readout: Readout,
    base: &EncoderParams,
    cfg: &ExperimentConfig,
) -> Result<(Classifier, Vec<f64>)> {
    let labels: Vec<Label> = train
        .iter()
        .map(|p| {
            p.label
                .ok_or_else(|| VidError::Schema(format!("training document {:?} has no label", p.id)))
        })
        .collect::<Result<_>>()?;
    if train.is_empty() {
        return Err(VidError::Empty("teacher training set".into()));
    }
    if !labels.contains(&Label::Positive) || !labels.contains(&Label::Negative) {
        return Err(VidError::DegenerateData("teacher training set has a single class".into()));
    }
    let tag = format!("teacher-{}", readout.tag());
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("{tag}-init")));
    let mut model = Classifier::new(base.clone(), readout, &mut rng);
    let examples: Vec<Example> = train
        .iter()
        .zip(&labels)
        .map(|(p, &l)| Example {
            doc: &p.encoded,
            hard: Some(l),
            soft: None,
        })
        .collect();
    let history = run_epochs(
        &mut model,
        &examples,
        LossWeights::hard_only(),
        cfg.teacher_epochs,
        cfg,
        Trainable::All,
        derive_seed(cfg.seed, &format!("{tag}-order")),
    )?;
    Ok((model, history))
}

/// Soft labels for every pool element from the teacher's own view at
/// `temperature`.
pub fn pseudo_label(teacher: &Classifier, pool: &[PairedViews], temperature: f64) -> Result<SoftLabelSet> {
    if pool.is_empty() {
        return Err(VidError::Empty("pseudo-label pool".into()));
    }
    if !(temperature > 0.0) {
        return Err(VidError::Parameter(format!("temperature must be positive, got {temperature}")));
    }
    let logits = teacher.logits_batch(&encoded_docs(pool))?;
    let mut labels = BTreeMap::new();
    for (p, z) in pool.iter().zip(logits) {
        let q = softmax_t(&z, temperature)?;
        if labels.insert(p.id.clone(), [q[0], q[1]]).is_some() {
            return Err(VidError::DuplicateId(p.id.clone()));
        }
    }
    Ok(SoftLabelSet { temperature, labels })
}

/// Joins soft labels to the pool on document id and keeps the target view.
/// Items follow id order, so the result does not depend on pool order.
pub fn transfer_labels(labels: &SoftLabelSet, pool: &[PairedViews], target: View) -> Result<DistillationDataset> {
    let by_id: HashMap<&str, &PairedViews> = pool.iter().map(|p| (p.id.as_str(), p)).collect();
    let items = labels
        .labels
        .iter()
        .map(|(id, soft)| {
            let p = by_id.get(id.as_str()).ok_or_else(|| VidError::Association(id.clone()))?;
            Ok(DistillItem {
                id: id.clone(),
                encoded: p.encoded.clone(),
                repr: p.repr(target).to_vec(),
                soft: *soft,
            })
        })
        .collect::<Result<_>>()?;
    Ok(DistillationDataset {
        view: target,
        temperature: labels.temperature,
        items,
    })
}

/// Trains a freshly initialized student on the dataset's soft labels with the
/// temperature applied to the student's logits as well.
pub fn distill_student(dataset: &DistillationDataset, base: &EncoderParams, cfg: &ExperimentConfig, tag: &str) -> Result<Classifier> {
    if dataset.is_empty() {
        return Err(VidError::Empty("distillation dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("{tag}-init")));
    let mut student = Classifier::new(base.clone(), Readout::View(dataset.view), &mut rng);
    let examples: Vec<Example> = dataset
        .items
        .iter()
        .map(|it| Example {
            doc: &it.encoded,
            hard: None,
            soft: Some(it.soft),
        })
        .collect();
    run_epochs(
        &mut student,
        &examples,
        LossWeights::soft_only(cfg.temperature),
        cfg.distill_epochs,
        cfg,
        Trainable::All,
        derive_seed(cfg.seed, &format!("{tag}-order")),
    )?;
    Ok(student)
}

/// Teacher outputs at `cfg.temperature`, computed once and frozen.
pub fn teacher_targets(teacher: &Classifier, train: &[PairedViews], temperature: f64) -> Result<Vec<[f64; 2]>> {
    teacher.probabilities(&encoded_docs(train), temperature)
}

fn finetune_examples<'a>(train: &'a [PairedViews], targets: &[[f64; 2]]) -> Result<Vec<Example<'a>>> {
    train
        .iter()
        .zip(targets)
        .map(|(p, q)| {
            let y = p
                .label
                .ok_or_else(|| VidError::Schema(format!("fine-tuning document {:?} has no label", p.id)))?;
            Ok(Example {
                doc: &p.encoded,
                hard: Some(y),
                soft: Some(*q),
            })
        })
        .collect()
}

/// Continues training `student` on labeled data with
/// `(1 - λ) J(student, y) + λ J(student_T, teacher_T)`.
pub fn finetune(
    student: &Classifier,
    teacher: &Classifier,
    train: &[PairedViews],
    cfg: &ExperimentConfig,
    tag: &str,
) -> Result<(Classifier, Vec<f64>)> {
    if student.readout() != teacher.readout() {
        return Err(VidError::Contract(format!(
            "student reads {} but teacher reads {}",
            student.readout().tag(),
            teacher.readout().tag()
        )));
    }
    if !(0.0..=1.0).contains(&cfg.lambda) {
        return Err(VidError::Parameter(format!("lambda must lie in [0, 1], got {}", cfg.lambda)));
    }
    if train.is_empty() {
        return Err(VidError::Empty("fine-tuning set".into()));
    }
    let targets = teacher_targets(teacher, train, cfg.temperature)?;
    let examples = finetune_examples(train, &targets)?;
    let mut model = student.clone();
    let trainable = if cfg.finetune_full_model {
        Trainable::All
    } else {
        Trainable::HeadOnly
    };
    let history = run_epochs(
        &mut model,
        &examples,
        LossWeights::mixed(cfg.lambda, cfg.temperature),
        cfg.finetune_epochs,
        cfg,
        trainable,
        derive_seed(cfg.seed, &format!("{tag}-finetune-order")),
    )?;
    Ok((model, history))
}

/// The fine-tuning objective on one batch with explicit teacher targets.
pub fn finetune_batch_loss(
    student: &Classifier,
    batch: &[(EncodedDocument, Label, [f64; 2])],
    lambda: f64,
    temperature: f64,
) -> Result<f64> {
    let examples: Vec<Example> = batch
        .iter()
        .map(|(d, y, q)| Example {
            doc: d,
            hard: Some(*y),
            soft: Some(*q),
        })
        .collect();
    super::train::batch_loss(student, &examples, LossWeights::mixed(lambda, temperature))
}

/// Plain hard-label cross-entropy on one batch.
pub fn hard_batch_loss(model: &Classifier, batch: &[(EncodedDocument, Label)]) -> Result<f64> {
    let examples: Vec<Example> = batch
        .iter()
        .map(|(d, y)| Example {
            doc: d,
            hard: Some(*y),
            soft: None,
        })
        .collect();
    super::train::batch_loss(model, &examples, LossWeights::hard_only())
}
