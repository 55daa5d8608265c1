//! Mini-batch training of a [`Classifier`] against hard and/or soft targets.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::classifier::Classifier;
use super::config::ExperimentConfig;
use crate::autodiff::{Adam, Tape, Var};
use crate::corpus::Label;
use crate::encoder::{Dropout, EncodedDocument};
use crate::error::Result;

/// One training example; either target may be absent.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub doc: &'a EncodedDocument,
    pub hard: Option<Label>,
    pub soft: Option<[f64; 2]>,
}

/// `hard · J(softmax(z), y) + soft · J(softmax(z / T), q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub hard: f64,
    pub soft: f64,
    pub temperature: f64,
}

impl LossWeights {
    pub fn hard_only() -> Self {
        Self {
            hard: 1.0,
            soft: 0.0,
            temperature: 1.0,
        }
    }

    pub fn soft_only(temperature: f64) -> Self {
        Self {
            hard: 0.0,
            soft: 1.0,
            temperature,
        }
    }

    /// The fine-tuning mix `(1 - λ)` ground truth plus `λ` teacher.
    pub fn mixed(lambda: f64, temperature: f64) -> Self {
        Self {
            hard: 1.0 - lambda,
            soft: lambda,
            temperature,
        }
    }
}

/// Which parameters an optimizer updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trainable {
    All,
    HeadOnly,
}

fn example_loss(tape: &mut Tape, logits: Var, ex: &Example, w: LossWeights) -> Result<Option<Var>> {
    let mut total: Option<Var> = None;
    if let Some(label) = ex.hard {
        let p = tape.softmax(logits, 1.0)?;
        let ce = tape.cross_entropy(p, &label.one_hot())?;
        total = Some(tape.scale(ce, w.hard));
    }
    if let Some(q) = ex.soft {
        let p = tape.softmax(logits, w.temperature)?;
        let ce = tape.cross_entropy(p, &q)?;
        let term = tape.scale(ce, w.soft);
        total = Some(match total {
            Some(t) => tape.add(t, term)?,
            None => term,
        });
    }
    Ok(total)
}

/// Mean per-example loss of `batch` recorded on `tape`.
pub fn batch_loss_var(
    model: &Classifier,
    tape: &mut Tape,
    batch: &[Example],
    w: LossWeights,
    mut dropout: Option<&mut Dropout>,
) -> Result<(Var, super::classifier::ClassifierVars)> {
    let vars = model.bind(tape);
    let mut sum: Option<Var> = None;
    for ex in batch {
        let z = model.logits_var_with(tape, &vars, ex.doc, dropout.as_deref_mut())?;
        if let Some(l) = example_loss(tape, z, ex, w)? {
            sum = Some(match sum {
                Some(s) => tape.add(s, l)?,
                None => l,
            });
        }
    }
    let sum = match sum {
        Some(s) => s,
        None => tape.constant(vec![1], vec![0.0])?,
    };
    let mean = tape.scale(sum, 1.0 / batch.len().max(1) as f64);
    Ok((mean, vars))
}

/// Value of the mean loss over `batch`, without updating anything.
pub fn batch_loss(model: &Classifier, batch: &[Example], w: LossWeights) -> Result<f64> {
    let mut tape = Tape::new();
    let (loss, _) = batch_loss_var(model, &mut tape, batch, w, None)?;
    Ok(tape.scalar(loss))
}

/// Trains `model` for `epochs` shuffled passes and returns the mean training
/// loss of each epoch (measured before each batch's update, with dropout
/// active).
pub fn run_epochs(
    model: &mut Classifier,
    examples: &[Example],
    w: LossWeights,
    epochs: usize,
    cfg: &ExperimentConfig,
    trainable: Trainable,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
    mask_rng.set_stream(1);
    let mut opt = Adam::new(cfg.optimizer);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let batch: Vec<Example> = idx.iter().map(|&i| examples[i]).collect();
            let mut tape = Tape::new();
            let mut dropout = Dropout {
                rate: cfg.dropout,
                rng: &mut mask_rng,
            };
            let (loss, vars) = batch_loss_var(model, &mut tape, &batch, w, Some(&mut dropout))?;
            tape.backward(loss)?;
            total += tape.scalar(loss) * batch.len() as f64;

            let mut handles: Vec<Var> = vars.encoder.flat().to_vec();
            handles.push(vars.head_weight);
            handles.push(vars.head_bias);
            for (t, v) in model.tensors_mut().into_iter().zip(handles) {
                t.grad = Some(match tape.grad(v) {
                    Some(g) => g.to_vec(),
                    None => vec![0.0; t.numel()],
                });
            }
            let mut params = match trainable {
                Trainable::All => model.tensors_mut(),
                Trainable::HeadOnly => {
                    for t in model.encoder.tensors_mut() {
                        t.grad = None;
                    }
                    model.head_tensors_mut()
                }
            };
            opt.step(&mut params)?;
        }
        history.push(total / examples.len().max(1) as f64);
    }
    Ok(history)
}
