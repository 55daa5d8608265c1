use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::{softmax_t, Tape, Tensor, Var};
use crate::encoder::{Dropout, EncodedDocument, EncoderParams, EncoderVars, View};
use crate::error::{Result, VidError};

/// What the linear head reads from the encoder output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Readout {
    /// One view row.
    View(View),
    /// Both view rows concatenated (the combined-view baseline).
    Concat,
}

impl Readout {
    pub fn tag(self) -> &'static str {
        match self {
            Readout::View(v) => v.name(),
            Readout::Concat => "combined",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "doc" => Some(Readout::View(View::Document)),
            "drug" => Some(Readout::View(View::Drug)),
            "combined" => Some(Readout::Concat),
            _ => None,
        }
    }

    fn width(self, d_model: usize) -> usize {
        match self {
            Readout::View(_) => d_model,
            Readout::Concat => 2 * d_model,
        }
    }
}

/// Encoder plus a linear two-class head on a fixed readout.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub encoder: EncoderParams,
    pub head_weight: Tensor,
    pub head_bias: Tensor,
    readout: Readout,
}

/// Tape handles of a bound [`Classifier`].
#[derive(Debug, Clone)]
pub struct ClassifierVars {
    pub encoder: EncoderVars,
    pub head_weight: Var,
    pub head_bias: Var,
}

/// Documents per tape during batched inference.
const INFERENCE_CHUNK: usize = 64;

impl Classifier {
    /// Wraps a copy of `encoder` with a freshly initialized head.
    pub fn new<R: Rng + ?Sized>(encoder: EncoderParams, readout: Readout, rng: &mut R) -> Self {
        let width = readout.width(encoder.config.d_model);
        let head_weight = Tensor::randn(vec![width, 2], 1.0 / (width as f64).sqrt(), rng).trainable();
        let head_bias = Tensor::zeros(vec![2]).trainable();
        Self {
            encoder,
            head_weight,
            head_bias,
            readout,
        }
    }

    pub fn from_parts(encoder: EncoderParams, head_weight: Tensor, head_bias: Tensor, readout: Readout) -> Result<Self> {
        let width = readout.width(encoder.config.d_model);
        if head_weight.shape() != [width, 2] || head_bias.shape() != [2] {
            return Err(VidError::Dimension {
                op: "classifier head",
                left: head_weight.shape().to_vec(),
                right: vec![width, 2],
            });
        }
        Ok(Self {
            encoder,
            head_weight: head_weight.trainable(),
            head_bias: head_bias.trainable(),
            readout,
        })
    }

    pub fn readout(&self) -> Readout {
        self.readout
    }

    /// The view this classifier reads, if it reads exactly one.
    pub fn view(&self) -> Option<View> {
        match self.readout {
            Readout::View(v) => Some(v),
            Readout::Concat => None,
        }
    }

    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = self.encoder.named_tensors();
        out.push(("head.weight".into(), &self.head_weight));
        out.push(("head.bias".into(), &self.head_bias));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = self.encoder.tensors_mut();
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    pub fn head_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.head_weight, &mut self.head_bias]
    }

    /// SHA-256 over every parameter value; equal fingerprints mean
    /// bit-identical parameters.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.readout.tag().as_bytes());
        for (name, t) in self.named_tensors() {
            h.update(name.as_bytes());
            for v in t.data() {
                h.update(v.to_le_bytes());
            }
        }
        super::config::hex(&h.finalize())
    }

    pub fn bind(&self, tape: &mut Tape) -> ClassifierVars {
        ClassifierVars {
            encoder: self.encoder.bind(tape),
            head_weight: tape.leaf(&self.head_weight),
            head_bias: tape.leaf(&self.head_bias),
        }
    }

    /// `[1, 2]` logits of one document.
    pub fn logits_var(&self, tape: &mut Tape, vars: &ClassifierVars, doc: &EncodedDocument) -> Result<Var> {
        self.logits_var_with(tape, vars, doc, None)
    }

    /// [`logits_var`](Self::logits_var) with training-time dropout in the
    /// encoder and on the head input.
    pub fn logits_var_with(
        &self,
        tape: &mut Tape,
        vars: &ClassifierVars,
        doc: &EncodedDocument,
        mut dropout: Option<&mut Dropout>,
    ) -> Result<Var> {
        let enc = self.encoder.forward_with(tape, &vars.encoder, doc, dropout.as_deref_mut())?;
        let features = match self.readout {
            Readout::View(v) => tape.row(enc, v.position(doc))?,
            Readout::Concat => {
                let d = tape.row(enc, View::Document.position(doc))?;
                let g = tape.row(enc, View::Drug.position(doc))?;
                tape.concat_cols(d, g)?
            }
        };
        let features = Dropout::apply(&mut dropout, tape, features)?;
        let z = tape.matmul(features, vars.head_weight)?;
        tape.add_row(z, vars.head_bias)
    }

    pub fn logits(&self, doc: &EncodedDocument) -> Result<[f64; 2]> {
        Ok(self.logits_batch(std::slice::from_ref(doc))?[0])
    }

    pub fn logits_batch(&self, docs: &[EncodedDocument]) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::with_capacity(docs.len());
        for chunk in docs.chunks(INFERENCE_CHUNK) {
            let mut tape = Tape::new();
            let vars = self.bind(&mut tape);
            for doc in chunk {
                let z = self.logits_var(&mut tape, &vars, doc)?;
                let v = tape.value(z);
                out.push([v[0], v[1]]);
            }
        }
        Ok(out)
    }

    /// Class probabilities at `temperature`.
    pub fn probabilities(&self, docs: &[EncodedDocument], temperature: f64) -> Result<Vec<[f64; 2]>> {
        self.logits_batch(docs)?
            .into_iter()
            .map(|z| {
                let p = softmax_t(&z, temperature)?;
                Ok([p[0], p[1]])
            })
            .collect()
    }

    /// The head applied directly to an already-extracted feature vector.
    pub fn head_logits(&self, features: &[f64]) -> Result<[f64; 2]> {
        let (width, _) = self.head_weight.dims2();
        if features.len() != width {
            return Err(VidError::Dimension {
                op: "head_logits",
                left: vec![features.len()],
                right: vec![width, 2],
            });
        }
        let w = self.head_weight.data();
        let b = self.head_bias.data();
        let mut z = [b[0], b[1]];
        for (i, f) in features.iter().enumerate() {
            z[0] += f * w[i * 2];
            z[1] += f * w[i * 2 + 1];
        }
        Ok(z)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::encoder::{encode, tokenize, DrugLexicon, EncoderConfig, Vocabulary};

    fn setup(readout: Readout) -> (Vocabulary, Classifier) {
        let vocab = Vocabulary::build(["this seroquel hitting me hard"], &DrugLexicon::new(["seroquel"]));
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let enc = EncoderParams::init(EncoderConfig::default(), vocab.len(), &mut rng).unwrap();
        (vocab, Classifier::new(enc, readout, &mut rng))
    }

    #[test]
    fn drug_classifier_reads_only_the_drug_row() {
        let (vocab, clf) = setup(Readout::View(View::Drug));
        let doc = tokenize("this seroquel hitting me", &vocab, 64).unwrap();
        let mut enc = encode(&doc, &clf.encoder).unwrap();
        let direct = clf.logits(&doc).unwrap();
        let via_head = clf.head_logits(enc.row(2)).unwrap();
        for (a, b) in direct.iter().zip(via_head) {
            assert!((a - b).abs() < 1e-12);
        }
        // perturbing the document row cannot reach a head that reads row 2
        let d = enc.shape()[1];
        for v in &mut enc.data_mut()[..d] {
            *v += 10.0;
        }
        assert_eq!(clf.head_logits(enc.row(2)).unwrap(), via_head);
    }

    #[test]
    fn concat_head_is_twice_as_wide() {
        let (vocab, clf) = setup(Readout::Concat);
        assert_eq!(clf.head_weight.shape(), &[64, 2]);
        let doc = tokenize("this seroquel", &vocab, 64).unwrap();
        let enc = encode(&doc, &clf.encoder).unwrap();
        let feats: Vec<f64> = enc.row(0).iter().chain(enc.row(doc.drug_position)).copied().collect();
        let a = clf.logits(&doc).unwrap();
        let b = clf.head_logits(&feats).unwrap();
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn batched_and_single_logits_agree() {
        let (vocab, clf) = setup(Readout::View(View::Document));
        let docs: Vec<_> = ["this seroquel", "seroquel hard", "me seroquel me"]
            .iter()
            .map(|t| tokenize(t, &vocab, 64).unwrap())
            .collect();
        let batch = clf.logits_batch(&docs).unwrap();
        for (doc, z) in docs.iter().zip(batch) {
            assert_eq!(clf.logits(doc).unwrap(), z);
        }
    }

    #[test]
    fn fingerprint_detects_any_change() {
        let (_, clf) = setup(Readout::View(View::Document));
        let mut other = clf.clone();
        assert_eq!(clf.fingerprint(), other.fingerprint());
        other.head_bias.data_mut()[0] += 1e-15;
        assert_ne!(clf.fingerprint(), other.fingerprint());
    }
}
