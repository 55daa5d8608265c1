//! Acceptance criteria for the library and CLI. Prints one PASS/FAIL line per
//! criterion and exits non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vid_cli::args::{GenerateArgs, ModelFlags, TrainArgs};
use vid_cli::commands::{cmd_generate, cmd_train, DOC_CHECKPOINT, DRUG_CHECKPOINT, METRICS_FILE};
use vid_core::autodiff::gradcheck::{check, relative_error, GradCheck, RELATIVE_FLOOR};
use vid_core::autodiff::{softmax_t, Tape, Tensor, Var};
use vid_core::corpus::{generate_synthetic, Label, SynthConfig};
use vid_core::distill::{
    batch_loss_var, finetune_batch_loss, hard_batch_loss, prepare, pseudo_label, train_teachers, transfer_labels,
    vid_pipeline, Classifier, Example, ExperimentConfig, LossWeights, Readout,
};
use vid_core::encoder::{tokenize, DrugLexicon, Dropout, EncodedDocument, EncoderConfig, EncoderParams, View, Vocabulary};
use vid_core::experiment::{run_synthetic, AblationReport, Method};
use vid_core::metrics::{f1_from, prf1, ConfusionCounts};

const GRAD_TOL: f64 = 1e-4;
const GRAD_CASES: usize = 112;
const GRAD_BUDGET: Duration = Duration::from_secs(60);
const CE_TOL: f64 = 1e-12;
const SOFTMAX_SUM_TOL: f64 = 1e-9;
const SOFTMAX_VECTORS: usize = 1000;
const ABLATION_SEEDS: u64 = 5;
const ABLATION_BUDGET: Duration = Duration::from_secs(30 * 60);
const CROSS_VIEW_MARGIN: f64 = 0.01;

type Outcome = Result<String, String>;

fn weighted_sum(tape: &mut Tape, x: Var, seed: u64) -> vid_core::Result<Var> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = tape.value(x).len();
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let shape = tape.shape(x).to_vec();
    let w = tape.constant(shape, w)?;
    let prod = tape.mul(x, w)?;
    Ok(tape.sum(prod))
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    Tensor::randn(shape, 1.0, rng).trainable()
}

fn rand_dist(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

const OP_KINDS: [&str; 14] = [
    "matmul",
    "matmul_t",
    "add+mul",
    "add_row+scale",
    "gelu",
    "layer_norm",
    "embedding",
    "softmax+cross_entropy",
    "masked softmax",
    "attention",
    "concat_cols+row+mean",
    "dropout",
    "classifier loss (view readout)",
    "classifier loss (concat readout)",
];

fn op_case(kind: usize, case: u64, rng: &mut ChaCha8Rng) -> vid_core::Result<GradCheck> {
    let s = case;
    match kind {
        0 => {
            let (m, k, n) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
            let a = rand_tensor(rng, vec![m, k]);
            let b = rand_tensor(rng, vec![k, n]);
            check(&[a, b], |t, v| {
                let y = t.matmul(v[0], v[1])?;
                weighted_sum(t, y, s)
            })
        }
        1 => {
            let (m, k, n) = (rng.random_range(1..5), rng.random_range(1..5), rng.random_range(1..5));
            let a = rand_tensor(rng, vec![m, k]);
            let b = rand_tensor(rng, vec![n, k]);
            check(&[a, b], |t, v| {
                let y = t.matmul_t(v[0], v[1])?;
                weighted_sum(t, y, s)
            })
        }
        2 => {
            let shape = vec![rng.random_range(1..4), rng.random_range(1..5)];
            let a = rand_tensor(rng, shape.clone());
            let b = rand_tensor(rng, shape);
            check(&[a, b], |t, v| {
                let x = t.add(v[0], v[1])?;
                let y = t.mul(x, v[1])?;
                weighted_sum(t, y, s)
            })
        }
        3 => {
            let (m, n) = (rng.random_range(1..4), rng.random_range(1..5));
            let a = rand_tensor(rng, vec![m, n]);
            let b = rand_tensor(rng, vec![n]);
            let c = rng.random_range(-2.0..2.0);
            check(&[a, b], |t, v| {
                let x = t.add_row(v[0], v[1])?;
                let y = t.scale(x, c);
                weighted_sum(t, y, s)
            })
        }
        4 => {
            let shape = vec![rng.random_range(1..4), rng.random_range(1..5)];
            let a = rand_tensor(rng, shape);
            check(&[a], |t, v| {
                let y = t.gelu(v[0]);
                weighted_sum(t, y, s)
            })
        }
        5 => {
            let (m, n) = (rng.random_range(1..4), rng.random_range(2..7));
            let x = rand_tensor(rng, vec![m, n]);
            let g = rand_tensor(rng, vec![n]);
            let b = rand_tensor(rng, vec![n]);
            check(&[x, g, b], |t, v| {
                let y = t.layer_norm(v[0], v[1], v[2])?;
                weighted_sum(t, y, s)
            })
        }
        6 => {
            let (vocab, d) = (rng.random_range(2..7), rng.random_range(1..5));
            let table = rand_tensor(rng, vec![vocab, d]);
            let ids: Vec<usize> = (0..rng.random_range(1..7)).map(|_| rng.random_range(0..vocab)).collect();
            check(&[table], |t, v| {
                let y = t.embedding(v[0], &ids)?;
                weighted_sum(t, y, s)
            })
        }
        7 => {
            let (m, k) = (rng.random_range(1..4), rng.random_range(2..6));
            let z = rand_tensor(rng, vec![m, k]);
            let temp = rng.random_range(0.5..5.0);
            let target: Vec<f64> = (0..m).flat_map(|_| rand_dist(rng, k)).collect();
            check(&[z], |t, v| {
                let p = t.softmax(v[0], temp)?;
                t.cross_entropy(p, &target)
            })
        }
        8 => {
            let (m, k) = (rng.random_range(1..4), rng.random_range(3..7));
            let z = rand_tensor(rng, vec![m, k]);
            let temp = rng.random_range(0.5..5.0);
            let mut mask = vec![true; k];
            mask[rng.random_range(0..k)] = false;
            check(&[z], |t, v| {
                let p = t.softmax_masked(v[0], temp, Some(&mask))?;
                weighted_sum(t, p, s)
            })
        }
        9 => {
            let (n, d, dh) = (rng.random_range(2..6), rng.random_range(2..5), rng.random_range(1..4));
            let q = rand_tensor(rng, vec![n, dh]);
            let k = rand_tensor(rng, vec![n, dh]);
            let vv = rand_tensor(rng, vec![n, d]);
            let mut mask = vec![true; n];
            if n > 2 {
                mask[n - 1] = false;
            }
            check(&[q, k, vv], |t, v| {
                let y = t.attention(v[0], v[1], v[2], Some(&mask))?;
                weighted_sum(t, y, s)
            })
        }
        10 => {
            let m = rng.random_range(1..4);
            let (ka, kb) = (rng.random_range(1..4), rng.random_range(1..4));
            let a = rand_tensor(rng, vec![m, ka]);
            let b = rand_tensor(rng, vec![m, kb]);
            let r = rng.random_range(0..m);
            check(&[a, b], |t, v| {
                let x = t.concat_cols(v[0], v[1])?;
                let x = t.row(x, r)?;
                let mean = t.mean(x);
                let w = weighted_sum(t, x, s)?;
                t.add(mean, w)
            })
        }
        11 => {
            let shape = vec![rng.random_range(1..4), rng.random_range(2..6)];
            let a = rand_tensor(rng, shape);
            let rate = rng.random_range(0.1..0.6);
            check(&[a], |t, v| {
                let mut mask_rng = ChaCha8Rng::seed_from_u64(s);
                let y = t.dropout(v[0], rate, &mut mask_rng)?;
                weighted_sum(t, y, s)
            })
        }
        12 => classifier_case(Readout::View(if case.is_multiple_of(2) { View::Document } else { View::Drug }), rng),
        _ => classifier_case(Readout::Concat, rng),
    }
}

/// Gradient of the mixed hard/soft batch loss of a small classifier, with
/// dropout under a fixed mask, against central differences over every
/// parameter.
fn classifier_case(readout: Readout, rng: &mut ChaCha8Rng) -> vid_core::Result<GradCheck> {
    let drugs = DrugLexicon::new(["seroquel", "prozac"]);
    let texts = [
        "this seroquel hitting me hard",
        "prozac refill today",
        "seroquel nausea all night long",
        "new prozac dose",
    ];
    let vocab = Vocabulary::build(texts, &drugs);
    let config = EncoderConfig {
        d_model: 8,
        heads: 2,
        layers: 1,
        ff_dim: 12,
        max_len: 10,
    };
    let encoder = EncoderParams::init(config, vocab.len(), rng)?;
    let mut model = Classifier::new(encoder, readout, rng);
    // Larger weights than the default init so that every gradient entry is
    // well above finite-difference noise.
    for t in model.tensors_mut() {
        for v in t.data_mut() {
            *v += rng.random_range(-0.3..0.3);
        }
    }
    let docs: Vec<EncodedDocument> = texts.iter().map(|t| tokenize(t, &vocab, config.max_len)).collect::<vid_core::Result<_>>()?;
    let batch: Vec<Example> = docs
        .iter()
        .map(|d| Example {
            doc: d,
            hard: Some(if rng.random::<bool>() { Label::Positive } else { Label::Negative }),
            soft: Some({
                let q = rand_dist(rng, 2);
                [q[0], q[1]]
            }),
        })
        .collect();
    let w = LossWeights::mixed(rng.random_range(0.0..1.0), rng.random_range(0.5..4.0));
    let mask_seed: u64 = rng.random();
    let loss_of = |m: &Classifier, tape: &mut Tape| -> vid_core::Result<(Var, vid_core::distill::ClassifierVars)> {
        let mut mask_rng = ChaCha8Rng::seed_from_u64(mask_seed);
        let mut dropout = Dropout {
            rate: 0.1,
            rng: &mut mask_rng,
        };
        batch_loss_var(m, tape, &batch, w, Some(&mut dropout))
    };

    let mut tape = Tape::new();
    let (loss, vars) = loss_of(&model, &mut tape)?;
    tape.backward(loss)?;
    let mut handles: Vec<Var> = vars.encoder.flat().to_vec();
    handles.push(vars.head_weight);
    handles.push(vars.head_bias);
    let sizes: Vec<usize> = model.tensors_mut().iter().map(|t| t.numel()).collect();
    let mut analytic = Vec::new();
    for (h, &n) in handles.iter().zip(&sizes) {
        match tape.grad(*h) {
            Some(g) => analytic.extend_from_slice(g),
            None => analytic.extend(std::iter::repeat_n(0.0, n)),
        }
    }

    let eval = |m: &Classifier| -> vid_core::Result<f64> {
        let mut tape = Tape::new();
        let (loss, _) = loss_of(m, &mut tape)?;
        Ok(tape.scalar(loss))
    };
    let step = vid_core::autodiff::gradcheck::FD_STEP;
    let mut numeric = Vec::with_capacity(analytic.len());
    let mut work = model.clone();
    for (ti, &n) in sizes.iter().enumerate() {
        for j in 0..n {
            let orig = work.tensors_mut()[ti].data()[j];
            work.tensors_mut()[ti].data_mut()[j] = orig + step;
            let plus = eval(&work)?;
            work.tensors_mut()[ti].data_mut()[j] = orig - step;
            let minus = eval(&work)?;
            work.tensors_mut()[ti].data_mut()[j] = orig;
            numeric.push((plus - minus) / (2.0 * step));
        }
    }
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (RELATIVE_FLOOR * scale).max(1e-8);
    let max_rel_error = analytic
        .iter()
        .zip(&numeric)
        .map(|(&a, &n)| relative_error(a, n, floor))
        .fold(0.0, f64::max);
    Ok(GradCheck {
        max_rel_error,
        checked: analytic.len(),
    })
}

fn gradient_correctness() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = vec![0.0f64; OP_KINDS.len()];
    let mut coords = 0;
    for case in 0..GRAD_CASES {
        let kind = case % OP_KINDS.len();
        let r = op_case(kind, case as u64, &mut rng).map_err(|e| format!("case {case} ({}): {e}", OP_KINDS[kind]))?;
        worst[kind] = worst[kind].max(r.max_rel_error);
        coords += r.checked;
    }
    let elapsed = started.elapsed();
    let (kind, max) = worst
        .iter()
        .enumerate()
        .fold((0, 0.0), |acc, (i, &e)| if e > acc.1 { (i, e) } else { acc });
    let detail = format!(
        "{GRAD_CASES} cases, {coords} coordinates, max relative error {max:.2e} ({}), {:.1}s",
        OP_KINDS[kind],
        elapsed.as_secs_f64()
    );
    if max < GRAD_TOL && elapsed < GRAD_BUDGET {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn loss_identities() -> Outcome {
    let corpus = generate_synthetic(&SynthConfig {
        n_labeled: 256,
        n_unlabeled: 64,
        n_test: 8,
        positive_rate: 0.3,
        seed: 5,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig::default();
    let prep = prepare(&corpus.labeled, &corpus.unlabeled, &corpus.drugs, &cfg).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let student = Classifier::new(prep.base.clone(), Readout::View(View::Document), &mut rng);

    let mut worst_gap = 0.0f64;
    let mut permutations = 0;
    for chunk in prep.labeled.chunks(cfg.batch_size) {
        let batch: Vec<(EncodedDocument, Label, [f64; 2])> = chunk
            .iter()
            .map(|p| {
                let q = rand_dist(&mut rng, 2);
                (p.encoded.clone(), p.label.expect("labeled"), [q[0], q[1]])
            })
            .collect();
        let hard: Vec<(EncodedDocument, Label)> = batch.iter().map(|(d, y, _)| (d.clone(), *y)).collect();
        let mixed = finetune_batch_loss(&student, &batch, 0.0, cfg.temperature).map_err(|e| e.to_string())?;
        let plain = hard_batch_loss(&student, &hard).map_err(|e| e.to_string())?;
        worst_gap = worst_gap.max((mixed - plain).abs());

        let soft_only = finetune_batch_loss(&student, &batch, 1.0, cfg.temperature).map_err(|e| e.to_string())?;
        for _ in 0..3 {
            let mut labels: Vec<Label> = batch.iter().map(|b| b.1).collect();
            labels.shuffle(&mut rng);
            let permuted: Vec<_> = batch.iter().zip(&labels).map(|((d, _, q), y)| (d.clone(), *y, *q)).collect();
            let again = finetune_batch_loss(&student, &permuted, 1.0, cfg.temperature).map_err(|e| e.to_string())?;
            if again.to_bits() != soft_only.to_bits() {
                return Err(format!("lambda=1 loss changed under label permutation: {soft_only} vs {again}"));
            }
            permutations += 1;
        }
    }
    if worst_gap >= CE_TOL {
        return Err(format!("lambda=0 loss differs from cross-entropy by {worst_gap:.2e}"));
    }

    let mut worst_sum = 0.0f64;
    for _ in 0..SOFTMAX_VECTORS {
        let k = rng.random_range(2..10);
        let spread = rng.random_range(0.1..30.0);
        let z: Vec<f64> = (0..k).map(|_| rng.random_range(-spread..spread)).collect();
        let reference = argmax_of(&softmax_t(&z, 1.0).map_err(|e| e.to_string())?);
        for temp in [0.05, 0.5, 1.0, 2.0, 7.5, 100.0] {
            let p = softmax_t(&z, temp).map_err(|e| e.to_string())?;
            worst_sum = worst_sum.max((p.iter().sum::<f64>() - 1.0).abs());
            if argmax_of(&p) != reference {
                return Err(format!("argmax changed at T={temp} for logits {z:?}"));
            }
        }
    }
    let detail = format!(
        "lambda=0 gap {worst_gap:.1e} over {} batches, {permutations} permutations exact, softmax sum error {worst_sum:.1e} over {SOFTMAX_VECTORS} vectors",
        prep.labeled.len().div_ceil(cfg.batch_size)
    );
    if worst_sum < SOFTMAX_SUM_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn argmax_of(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc })
        .0
}

fn f1_example() -> Outcome {
    let direct = f1_from(0.678, 0.72);
    let counted = prf1(&ConfusionCounts {
        tp: 48816,
        fp: 23184,
        tn: 0,
        fn_: 18984,
    });
    let detail = format!(
        "F1(0.678, 0.72) = {direct:.6} -> {direct:.2}; from counts P={:.3} R={:.3} F1={:.2}",
        counted.precision, counted.recall, counted.f1
    );
    if format!("{direct:.2}") == "0.70" && format!("{:.2}", counted.f1) == "0.70" {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ablation() -> Result<(AblationReport, Duration), String> {
    let cfg = ExperimentConfig {
        check_invariants: true,
        ..Default::default()
    };
    let seeds: Vec<u64> = (0..ABLATION_SEEDS).collect();
    let started = Instant::now();
    let report = run_synthetic(&SynthConfig::default(), &cfg, &seeds, &Method::ALL).map_err(|e| e.to_string())?;
    Ok((report, started.elapsed()))
}

fn mean_f1(report: &AblationReport, m: Method) -> Result<f64, String> {
    report.mean_f1(m.name()).ok_or_else(|| format!("no row for {}", m.name()))
}

fn ensemble_beats_baselines(report: &AblationReport, elapsed: Duration) -> Outcome {
    let vid = mean_f1(report, Method::Vid)?;
    let doc = mean_f1(report, Method::DocView)?;
    let drug = mean_f1(report, Method::DrugView)?;
    let combined = mean_f1(report, Method::CombinedView)?;
    let detail = format!(
        "{ABLATION_SEEDS} seeds: ensemble {vid:.4}, doc-view {doc:.4}, drug-view {drug:.4}, combined-view {combined:.4}, {:.0}s",
        elapsed.as_secs_f64()
    );
    if vid > doc && vid > drug && vid >= combined && elapsed < ABLATION_BUDGET {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn cross_view_init(report: &AblationReport) -> Outcome {
    let cross = mean_f1(report, Method::PDocFDrug)?;
    let same = mean_f1(report, Method::PDrugFDrug)?;
    let detail = format!("P-Doc-F-Drug {cross:.4} vs P-Drug-F-Drug {same:.4} (margin {CROSS_VIEW_MARGIN})");
    if cross >= same - CROSS_VIEW_MARGIN {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn entropy_regularization(report: &AblationReport) -> Outcome {
    let (configured, lambda0) = report.mean_entropy().ok_or("entropy was not measured")?;
    let per_seed: Vec<String> = report
        .seeds
        .iter()
        .filter_map(|s| s.entropy.map(|e| format!("{:.3}/{:.3}", e.configured, e.lambda0)))
        .collect();
    let detail = format!(
        "mean test entropy lambda={} {configured:.4} vs lambda=0 {lambda0:.4} (per seed {})",
        report.config.lambda,
        per_seed.join(" ")
    );
    if configured > lambda0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tree_bytes(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    entries.sort();
    for path in entries {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        out.push((name, fs::read(&path).map_err(|e| e.to_string())?));
    }
    Ok(out)
}

fn training_is_reproducible() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = cmd_generate(&GenerateArgs {
        labeled: 800,
        unlabeled: 1600,
        test: 200,
        pos_rate: 0.3,
        seed: 13,
        out: tmp.path().join("corpus"),
    })
    .map_err(|e| e.to_string())?;
    let train = |name: &str| {
        cmd_train(&TrainArgs {
            corpus: corpus.clone(),
            model: ModelFlags {
                seed: Some(3),
                ..Default::default()
            },
            valid_fraction: None,
            out: tmp.path().join(name),
        })
        .map_err(|e| e.to_string())
    };
    let (a, b) = (train("a")?, train("b")?);
    let mut compared = 0;
    for ckpt in [DOC_CHECKPOINT, DRUG_CHECKPOINT] {
        let (ta, tb) = (tree_bytes(&a.join(ckpt))?, tree_bytes(&b.join(ckpt))?);
        if ta != tb {
            return Err(format!("{ckpt} differs between runs"));
        }
        compared += ta.len();
    }
    let (ma, mb) = (
        fs::read(a.join(METRICS_FILE)).map_err(|e| e.to_string())?,
        fs::read(b.join(METRICS_FILE)).map_err(|e| e.to_string())?,
    );
    if ma != mb {
        return Err("metrics.json differs between runs".into());
    }
    Ok(format!("{compared} checkpoint files and metrics.json byte-identical across two runs"))
}

fn invariants_hold_in_pipeline() -> Outcome {
    let corpus = generate_synthetic(&SynthConfig {
        n_labeled: 200,
        n_unlabeled: 300,
        n_test: 20,
        positive_rate: 0.25,
        seed: 21,
        ..Default::default()
    })
    .map_err(|e| e.to_string())?;
    let cfg = ExperimentConfig {
        teacher_epochs: 2,
        distill_epochs: 2,
        check_invariants: true,
        ..Default::default()
    };
    let models = vid_pipeline(&corpus.labeled, &corpus.unlabeled, &corpus.drugs, &cfg).map_err(|e| e.to_string())?;

    // The returned teachers match a fresh training run, so distillation left them alone.
    let prep = prepare(&corpus.labeled, &corpus.unlabeled, &corpus.drugs, &cfg).map_err(|e| e.to_string())?;
    let fresh = train_teachers(&prep, &cfg).map_err(|e| e.to_string())?;
    for view in [View::Document, View::Drug] {
        if fresh.get(view).fingerprint() != models.teachers.get(view).fingerprint() {
            return Err(format!("{} teacher differs from a fresh run", view.name()));
        }
    }
    // Pseudo-labels survive a round trip through the other view by document id.
    for view in [View::Document, View::Drug] {
        let labels = pseudo_label(models.teachers.get(view), &prep.unlabeled, cfg.temperature).map_err(|e| e.to_string())?;
        let moved = transfer_labels(&labels, &prep.unlabeled, view.other()).map_err(|e| e.to_string())?;
        if moved.labels() != labels {
            return Err(format!("label transfer from the {} view is lossy", view.name()));
        }
    }
    Ok(format!(
        "pipeline ran with check_invariants on; teachers match fresh runs; {} pseudo-labels round-trip in both directions",
        prep.unlabeled.len()
    ))
}

fn main() {
    let mut failures = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} [{n}] {name}: {detail}");
    };
    report(1, "gradient correctness", gradient_correctness());
    report(2, "loss identities", loss_identities());
    report(3, "F1 worked example", f1_example());
    match ablation() {
        Ok((ablation, elapsed)) => {
            print!("{}", ablation.report.to_tsv());
            report(4, "ensemble beats single views", ensemble_beats_baselines(&ablation, elapsed));
            report(5, "cross-view initialization", cross_view_init(&ablation));
            report(6, "teacher term raises entropy", entropy_regularization(&ablation));
        }
        Err(e) => {
            report(4, "ensemble beats single views", Err(e.clone()));
            report(5, "cross-view initialization", Err(e.clone()));
            report(6, "teacher term raises entropy", Err(e));
        }
    }
    report(7, "bit-identical retraining", training_is_reproducible());
    report(8, "in-pipeline invariants", invariants_hold_in_pipeline());
    println!("acceptance: {} of 8 criteria passed", 8 - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
