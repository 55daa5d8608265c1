use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vid_core::corpus::{
    generate_synthetic, load_corpus, split_validation, CorpusSplits, Document, Label, SynthConfig,
};
use vid_core::distill::{
    argmax, derive_seed, ensemble_probabilities, load_checkpoint, predict_labels, save_checkpoint, vid_pipeline,
    Classifier, ExperimentConfig, LoadOptions,
};
use vid_core::encoder::{tokenize, DrugLexicon, EncodedDocument, View, Vocabulary};
use vid_core::experiment::{run_on_corpus, AblationReport, Method};
use vid_core::io::write_atomic;
use vid_core::metrics::{score, Prf1};

use crate::args::{AblateArgs, EvalArgs, GenerateArgs, TrainArgs};
use crate::error::CliError;
use crate::settings::Settings;

pub const RUN_DIR_ENV: &str = "VID_RUN_DIR";
pub const CORPUS_MANIFEST: &str = "manifest.json";
pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const LABELED_FILE: &str = "labeled.tsv";
pub const UNLABELED_FILE: &str = "unlabeled.tsv";
pub const TEST_FILE: &str = "test.tsv";
pub const VOCAB_FILE: &str = "vocab.txt";
pub const DRUGS_FILE: &str = "drugs.txt";
pub const DOC_CHECKPOINT: &str = "student-doc";
pub const DRUG_CHECKPOINT: &str = "student-drug";

/// Resolves an output path: absolute paths as given, others under the run root.
pub fn output_dir(out: &Path) -> PathBuf {
    if out.is_absolute() {
        return out.to_path_buf();
    }
    let root = std::env::var_os(RUN_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    root.join(out)
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFile {
    pub name: String,
    pub documents: usize,
    pub sha256: String,
}

/// Written next to a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub synth: SynthConfig,
    pub drugs: Vec<String>,
    pub files: Vec<CorpusFile>,
}

pub fn cmd_generate(args: &GenerateArgs) -> Result<PathBuf, CliError> {
    let synth = SynthConfig {
        n_labeled: args.labeled,
        n_unlabeled: args.unlabeled,
        n_test: args.test,
        positive_rate: args.pos_rate,
        seed: args.seed,
        ..SynthConfig::default()
    };
    synth.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let corpus = generate_synthetic(&synth)?;
    let dir = output_dir(&args.out);
    let mut files = Vec::new();
    for (name, docs, labeled) in [
        (LABELED_FILE, &corpus.labeled, true),
        (UNLABELED_FILE, &corpus.unlabeled, false),
        (TEST_FILE, &corpus.test, true),
    ] {
        let text = vid_core::corpus::corpus_text(docs, labeled)?;
        write_atomic(&dir.join(name), text.as_bytes())?;
        files.push(CorpusFile {
            name: name.to_string(),
            documents: docs.len(),
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    let manifest = CorpusManifest {
        synth,
        drugs: corpus.drugs.iter().map(str::to_string).collect(),
        files,
    };
    write_json(&dir.join(CORPUS_MANIFEST), &manifest)?;
    log::info!("wrote corpus to {}", dir.display());
    Ok(dir)
}

/// A corpus directory read back from disk.
pub struct CorpusDir {
    pub drugs: DrugLexicon,
    pub manifest: Option<CorpusManifest>,
    /// SHA-256 of each file that was read, by name.
    pub hashes: Vec<(String, String)>,
}

impl CorpusDir {
    /// Reads the drug lexicon from `manifest.json`, or from `drugs.txt` when
    /// the directory was not produced by `vid generate`.
    pub fn open(dir: &Path) -> Result<Self, CliError> {
        if !dir.is_dir() {
            return Err(CliError::Data(format!("corpus directory {} does not exist", dir.display())));
        }
        let manifest_path = dir.join(CORPUS_MANIFEST);
        let (drugs, manifest) = if manifest_path.is_file() {
            let m: CorpusManifest = read_json(&manifest_path)?;
            (DrugLexicon::new(m.drugs.iter()), Some(m))
        } else if dir.join(DRUGS_FILE).is_file() {
            (DrugLexicon::load(&dir.join(DRUGS_FILE))?, None)
        } else {
            return Err(CliError::Data(format!(
                "{} has neither {CORPUS_MANIFEST} nor {DRUGS_FILE}",
                dir.display()
            )));
        };
        if drugs.is_empty() {
            return Err(CliError::Data("drug lexicon is empty".into()));
        }
        Ok(Self {
            drugs,
            manifest,
            hashes: Vec::new(),
        })
    }

    /// Loads one file, checking it against the manifest hash when present.
    pub fn load(&mut self, dir: &Path, name: &str, labeled: bool) -> Result<Vec<Document>, CliError> {
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
        let hash = sha256_hex(&bytes);
        if let Some(expected) = self
            .manifest
            .as_ref()
            .and_then(|m| m.files.iter().find(|f| f.name == name))
        {
            if expected.sha256 != hash {
                return Err(CliError::Data(format!("{} does not match its manifest hash", path.display())));
            }
        }
        let loaded = load_corpus(&path, labeled, &self.drugs)?;
        if loaded.dropped > 0 {
            log::warn!("{}: skipped {} rows without a drug mention", path.display(), loaded.dropped);
        }
        self.hashes.push((name.to_string(), hash));
        Ok(loaded.documents)
    }
}

fn encode_all(docs: &[Document], vocab: &Vocabulary, max_len: usize) -> Result<Vec<EncodedDocument>, CliError> {
    Ok(docs
        .iter()
        .map(|d| tokenize(&d.text, vocab, max_len))
        .collect::<vid_core::Result<_>>()?)
}

fn golds(docs: &[Document]) -> Result<Vec<Label>, CliError> {
    docs.iter()
        .map(|d| {
            d.label
                .ok_or_else(|| CliError::Data(format!("document {:?} has no label", d.id)))
        })
        .collect()
}

/// Precision, recall and F1 of each student and their ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewScores {
    pub documents: usize,
    pub doc_view: Prf1,
    pub drug_view: Prf1,
    pub ensemble: Prf1,
}

impl ViewScores {
    pub fn rows(&self) -> [(&'static str, Prf1); 3] {
        [
            ("doc-view", self.doc_view),
            ("drug-view", self.drug_view),
            ("ensemble", self.ensemble),
        ]
    }
}

pub fn score_views(
    doc_model: &Classifier,
    drug_model: &Classifier,
    docs: &[EncodedDocument],
    golds: &[Label],
) -> Result<ViewScores, CliError> {
    let ensemble: Vec<Label> = ensemble_probabilities(doc_model, drug_model, docs)?
        .into_iter()
        .map(argmax)
        .collect();
    Ok(ViewScores {
        documents: docs.len(),
        doc_view: score(&predict_labels(doc_model, docs)?, golds)?,
        drug_view: score(&predict_labels(drug_model, docs)?, golds)?,
        ensemble: score(&ensemble, golds)?,
    })
}

/// Deterministic training metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub train_documents: usize,
    pub unlabeled_documents: usize,
    pub validation: Option<ViewScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub training_seconds: f64,
    pub total_seconds: f64,
}

/// Everything needed to reload and audit a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub seed: u64,
    pub valid_fraction: f64,
    pub corpus_dir: PathBuf,
    pub corpus_files: Vec<(String, String)>,
    pub vocab_file: String,
    pub drugs_file: String,
    pub doc_checkpoint: String,
    pub drug_checkpoint: String,
    pub metrics_file: String,
    pub metrics: TrainMetrics,
    pub timings: Timings,
}

/// Saves into a hidden sibling directory and renames it into place, so a
/// checkpoint directory is either absent or complete.
fn save_checkpoint_dir(model: &Classifier, dir: &Path, config_hash: &str) -> Result<(), CliError> {
    let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or("checkpoint");
    let tmp = dir.with_file_name(format!(".{name}.tmp{}", std::process::id()));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    let saved = save_checkpoint(model, &tmp, config_hash).map_err(CliError::from).and_then(|_| {
        if dir.exists() {
            fs::remove_dir_all(dir)?;
        }
        fs::rename(&tmp, dir)?;
        Ok(())
    });
    if saved.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    saved
}

pub fn cmd_train(args: &TrainArgs) -> Result<PathBuf, CliError> {
    let started = Instant::now();
    let settings = Settings::resolve(&args.model, args.valid_fraction)?;
    let cfg = &settings.experiment;
    let mut corpus = CorpusDir::open(&args.corpus)?;
    let labeled = corpus.load(&args.corpus, LABELED_FILE, true)?;
    let unlabeled = corpus.load(&args.corpus, UNLABELED_FILE, false)?;
    let (train, valid) = if settings.valid_fraction > 0.0 {
        split_validation(&labeled, settings.valid_fraction, derive_seed(cfg.seed, "validation-split"))?
    } else {
        (labeled, Vec::new())
    };

    let training = Instant::now();
    let models = vid_pipeline(&train, &unlabeled, &corpus.drugs, cfg)?;
    let training_seconds = training.elapsed().as_secs_f64();
    let doc_model = models.student(View::Document);
    let drug_model = models.student(View::Drug);

    let validation = if valid.is_empty() {
        None
    } else {
        let docs = encode_all(&valid, &models.vocab, cfg.encoder.max_len)?;
        Some(score_views(doc_model, drug_model, &docs, &golds(&valid)?)?)
    };
    let metrics = TrainMetrics {
        train_documents: train.len(),
        unlabeled_documents: unlabeled.len(),
        validation,
    };

    let out = output_dir(&args.out);
    fs::create_dir_all(&out)?;
    let config_hash = cfg.hash();
    models.vocab.save(&out.join(VOCAB_FILE), &out.join(DRUGS_FILE))?;
    save_checkpoint_dir(doc_model, &out.join(DOC_CHECKPOINT), &config_hash)?;
    save_checkpoint_dir(drug_model, &out.join(DRUG_CHECKPOINT), &config_hash)?;
    write_json(&out.join(METRICS_FILE), &metrics)?;
    let manifest = RunManifest {
        config: cfg.clone(),
        config_hash,
        seed: cfg.seed,
        valid_fraction: settings.valid_fraction,
        corpus_dir: args.corpus.clone(),
        corpus_files: corpus.hashes,
        vocab_file: VOCAB_FILE.into(),
        drugs_file: DRUGS_FILE.into(),
        doc_checkpoint: DOC_CHECKPOINT.into(),
        drug_checkpoint: DRUG_CHECKPOINT.into(),
        metrics_file: METRICS_FILE.into(),
        metrics,
        timings: Timings {
            training_seconds,
            total_seconds: started.elapsed().as_secs_f64(),
        },
    };
    write_json(&out.join(RUN_MANIFEST), &manifest)?;
    if let Some(v) = &manifest.metrics.validation {
        println!("{}", format_scores(&v.rows()));
    }
    log::info!("wrote run to {}", out.display());
    Ok(out)
}

/// Tab-separated `name, precision, recall, f1` table with three decimals.
pub fn format_scores(rows: &[(&str, Prf1)]) -> String {
    let mut s = String::from("model\tprecision\trecall\tf1");
    for (name, p) in rows {
        s.push_str(&format!("\n{name}\t{:.3}\t{:.3}\t{:.3}", p.precision, p.recall, p.f1));
    }
    s
}

/// Scores a trained run on a labeled corpus file.
pub fn cmd_eval(args: &EvalArgs) -> Result<ViewScores, CliError> {
    let manifest: RunManifest = read_json(&args.run.join(RUN_MANIFEST))?;
    let vocab = Vocabulary::load(&args.run.join(&manifest.vocab_file), &args.run.join(&manifest.drugs_file))?;
    let opts = LoadOptions {
        expect_config_hash: Some(&manifest.config_hash),
        expect_vocab_size: Some(vocab.len()),
        force: args.force,
    };
    let doc_model = load_checkpoint(&args.run.join(&manifest.doc_checkpoint), &opts)?;
    let drug_model = load_checkpoint(&args.run.join(&manifest.drug_checkpoint), &opts)?;
    if doc_model.encoder.config != drug_model.encoder.config {
        return Err(CliError::Data("the two checkpoints use different encoder shapes".into()));
    }
    if !args.test.is_file() {
        return Err(CliError::Data(format!("test file {} does not exist", args.test.display())));
    }
    let loaded = load_corpus(&args.test, true, vocab.drugs())?;
    if loaded.dropped > 0 {
        log::warn!("{}: skipped {} rows without a drug mention", args.test.display(), loaded.dropped);
    }
    let docs = encode_all(&loaded.documents, &vocab, doc_model.encoder.config.max_len)?;
    let scores = score_views(&doc_model, &drug_model, &docs, &golds(&loaded.documents)?)?;
    let rows = scores.rows();
    let shown: &[(&str, Prf1)] = if args.per_view { &rows } else { &rows[2..] };
    println!("{}", format_scores(shown));
    Ok(scores)
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<AblationReport, CliError> {
    let settings = Settings::resolve(&args.model, None)?;
    let cfg = &settings.experiment;
    if args.seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let methods: Vec<Method> = if args.only.is_empty() {
        Method::ALL.to_vec()
    } else {
        let mut picked = Vec::new();
        for name in &args.only {
            let m = Method::parse(name).ok_or_else(|| CliError::Usage(format!("unknown method {name:?}")))?;
            if !picked.contains(&m) {
                picked.push(m);
            }
        }
        Method::ALL.iter().copied().filter(|m| picked.contains(m)).collect()
    };
    let mut dir = CorpusDir::open(&args.corpus)?;
    let corpus = CorpusSplits {
        labeled: dir.load(&args.corpus, LABELED_FILE, true)?,
        unlabeled: dir.load(&args.corpus, UNLABELED_FILE, false)?,
        test: dir.load(&args.corpus, TEST_FILE, true)?,
        drugs: dir.drugs.clone(),
    };
    let seeds: Vec<u64> = (0..args.seeds as u64).map(|i| cfg.seed + i).collect();
    let report = run_on_corpus(&corpus, cfg, &seeds, &methods)?;
    let out = output_dir(&args.out);
    let tsv = report.report.to_tsv();
    write_atomic(&out.join("report.tsv"), tsv.as_bytes())?;
    write_json(&out.join("report.json"), &report)?;
    print!("{tsv}");
    if let Some((configured, lambda0)) = report.mean_entropy() {
        println!("# mean test entropy: lambda={} {configured:.4}, lambda=0 {lambda0:.4}", cfg.lambda);
    }
    Ok(report)
}
