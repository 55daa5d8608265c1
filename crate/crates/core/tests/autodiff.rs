use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vid_core::autodiff::gradcheck::{check, GradCheck};
use vid_core::autodiff::{cross_entropy, entropy, softmax_t, Tape, Tensor, Var};

const TOL: f64 = 1e-4;
const CASES: u64 = 100;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: Vec<usize>) -> Tensor {
    Tensor::randn(shape, 1.0, rng).trainable()
}

fn rand_dist(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// Projects an arbitrary node to a scalar through fixed random weights so
/// that every output entry contributes to the gradient.
fn weighted_sum(tape: &mut Tape, x: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = tape.value(x).len();
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let shape = tape.shape(x).to_vec();
    let w = tape.constant(shape, w).unwrap();
    let prod = tape.mul(x, w).unwrap();
    tape.sum(prod)
}

fn assert_ok(name: &str, res: GradCheck) {
    assert!(
        res.max_rel_error < TOL,
        "{name}: max relative error {} over {} coords",
        res.max_rel_error,
        res.checked
    );
}

fn naive_matmul(a: &Tensor, b: &Tensor) -> Vec<f64> {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            for p in 0..k {
                out[i * n + j] += a.data()[i * k + p] * b.data()[p * n + j];
            }
        }
    }
    out
}

#[test]
fn matmul_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let a = rand_tensor(&mut rng, vec![3, 4]);
    let b = rand_tensor(&mut rng, vec![4, 2]);
    let mut tape = Tape::new();
    let (va, vb) = (tape.leaf(&a), tape.leaf(&b));
    let out = tape.matmul(va, vb).unwrap();
    for (x, y) in tape.value(out).iter().zip(naive_matmul(&a, &b)) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn softmax_matches_extended_precision() {
    // 40-digit evaluation of exp(z/2) / Σ exp(z/2)
    let expected = [
        0.722_470_840_689_536_8,
        0.108_058_966_070_550_36,
        0.169_470_193_239_912_84,
    ];
    let p = softmax_t(&[3.1, -0.7, 0.2], 2.0).unwrap();
    for (x, y) in p.iter().zip(expected) {
        assert!((x - y).abs() < 1e-12, "{x} vs {y}");
    }
}

#[test]
fn cross_entropy_matches_extended_precision() {
    // -(0.4 ln 0.7 + 0.6 ln 0.3) at 40 digits
    let expected = 0.865_053_660_171_054_5;
    let v = cross_entropy(&[0.7, 0.3], &[0.4, 0.6]).unwrap();
    assert!((v - expected).abs() < 1e-12);
}

#[test]
fn gradcheck_matmul_and_matmul_t() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..CASES {
        let (m, k, n) = (rng.random_range(1..4), rng.random_range(1..5), rng.random_range(1..4));
        let a = rand_tensor(&mut rng, vec![m, k]);
        let b = rand_tensor(&mut rng, vec![k, n]);
        let bt = rand_tensor(&mut rng, vec![n, k]);
        let r = check(&[a.clone(), b], |t, v| {
            let y = t.matmul(v[0], v[1])?;
            Ok(weighted_sum(t, y, case))
        })
        .unwrap();
        assert_ok("matmul", r);
        let r = check(&[a, bt], |t, v| {
            let y = t.matmul_t(v[0], v[1])?;
            Ok(weighted_sum(t, y, case))
        })
        .unwrap();
        assert_ok("matmul_t", r);
    }
}

#[test]
fn gradcheck_elementwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..CASES {
        let shape = vec![rng.random_range(1..4), rng.random_range(1..5)];
        let a = rand_tensor(&mut rng, shape.clone());
        let b = rand_tensor(&mut rng, shape.clone());
        let bias = rand_tensor(&mut rng, vec![shape[1]]);
        let s = rng.random_range(-2.0..2.0);
        let r = check(&[a.clone(), b.clone(), bias], |t, v| {
            let x = t.add(v[0], v[1])?;
            let x = t.mul(x, v[1])?;
            let x = t.add_row(x, v[2])?;
            let x = t.scale(x, s);
            let x = t.gelu(x);
            Ok(weighted_sum(t, x, case))
        })
        .unwrap();
        assert_ok("elementwise", r);
        let r = check(&[a, b], |t, v| {
            let x = t.concat_cols(v[0], v[1])?;
            let x = t.row(x, 0)?;
            let m = t.mean(x);
            let w = weighted_sum(t, x, case);
            t.add(m, w)
        })
        .unwrap();
        assert_ok("concat/row/mean", r);
    }
}

#[test]
fn gradcheck_layer_norm_and_embedding() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..CASES {
        let (m, n) = (rng.random_range(1..4), rng.random_range(2..6));
        let x = rand_tensor(&mut rng, vec![m, n]);
        let g = rand_tensor(&mut rng, vec![n]);
        let b = rand_tensor(&mut rng, vec![n]);
        let r = check(&[x, g, b], |t, v| {
            let y = t.layer_norm(v[0], v[1], v[2])?;
            Ok(weighted_sum(t, y, case))
        })
        .unwrap();
        assert_ok("layer_norm", r);

        let vocab = rng.random_range(2..6);
        let table = rand_tensor(&mut rng, vec![vocab, n]);
        let ids: Vec<usize> = (0..rng.random_range(1..6)).map(|_| rng.random_range(0..vocab)).collect();
        let r = check(&[table], |t, v| {
            let y = t.embedding(v[0], &ids)?;
            Ok(weighted_sum(t, y, case))
        })
        .unwrap();
        assert_ok("embedding", r);
    }
}

#[test]
fn gradcheck_softmax_and_cross_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..CASES {
        let (m, k) = (rng.random_range(1..4), rng.random_range(2..5));
        let z = rand_tensor(&mut rng, vec![m, k]);
        let temp = rng.random_range(0.5..4.0);
        let target: Vec<f64> = (0..m).flat_map(|_| rand_dist(&mut rng, k)).collect();
        let r = check(&[z], |t, v| {
            let p = t.softmax(v[0], temp)?;
            t.cross_entropy(p, &target)
        })
        .unwrap();
        assert_ok("softmax+ce", r);
    }
}

#[test]
fn gradcheck_attention_with_mask() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..CASES {
        let (n, d, dh) = (rng.random_range(2..5), rng.random_range(2..5), rng.random_range(1..4));
        let x = rand_tensor(&mut rng, vec![n, d]);
        let wq = rand_tensor(&mut rng, vec![d, dh]);
        let wk = rand_tensor(&mut rng, vec![d, dh]);
        let wv = rand_tensor(&mut rng, vec![d, dh]);
        let head = rand_tensor(&mut rng, vec![dh, 2]);
        let mut mask = vec![true; n];
        if n > 2 {
            mask[n - 1] = false;
        }
        let target = rand_dist(&mut rng, 2);
        let r = check(&[x, wq, wk, wv, head], |t, v| {
            let q = t.matmul(v[0], v[1])?;
            let k = t.matmul(v[0], v[2])?;
            let vv = t.matmul(v[0], v[3])?;
            let ctx = t.attention(q, k, vv, Some(&mask))?;
            let row = t.row(ctx, 0)?;
            let logits = t.matmul(row, v[4])?;
            let p = t.softmax(logits, 2.0)?;
            t.cross_entropy(p, &target)
        })
        .unwrap();
        assert_ok("attention+softmax+ce", r);
    }
}

proptest! {
    #[test]
    fn softmax_normalizes_and_keeps_argmax(
        logits in prop::collection::vec(-50.0f64..50.0, 2..8),
        t in 0.1f64..100.0,
    ) {
        let p = softmax_t(&logits, t).unwrap();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let am = |v: &[f64]| v.iter().enumerate().fold(0, |b, (i, x)| if *x > v[b] { i } else { b });
        prop_assert_eq!(am(&p), am(&logits));
    }

    #[test]
    fn entropy_grows_with_temperature(
        logits in prop::collection::vec(-10.0f64..10.0, 2..6),
        t1 in 0.1f64..50.0,
        dt in 0.0f64..50.0,
    ) {
        let low = entropy(&softmax_t(&logits, t1).unwrap());
        let high = entropy(&softmax_t(&logits, t1 + dt).unwrap());
        prop_assert!(high >= low - 1e-12);
    }

    #[test]
    fn gibbs_inequality(raw_p in prop::collection::vec(0.01f64..1.0, 3), raw_t in prop::collection::vec(0.01f64..1.0, 3)) {
        let norm = |v: Vec<f64>| { let s: f64 = v.iter().sum(); v.into_iter().map(|x| x / s).collect::<Vec<_>>() };
        let p = norm(raw_p);
        let t = norm(raw_t);
        prop_assert!((cross_entropy(&p, &p).unwrap() - entropy(&p)).abs() < 1e-12);
        prop_assert!(cross_entropy(&p, &t).unwrap() >= entropy(&t) - 1e-12);
    }
}
