//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Every operation appends a node to the [`Tape`]. Nodes only reference
//! earlier nodes, so the insertion order is already a topological order and
//! the backward pass is a single reverse sweep that visits each node once.

use super::tensor::{dims2, matmul_plain, Tensor};
use crate::error::{Result, VidError};

/// Lower clamp applied to predicted probabilities before taking the log.
pub const LOG_CLAMP: f64 = 1e-12;

/// Variance epsilon used by [`Tape::layer_norm`].
pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Gelu(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        // normalized input and 1/std per row
        xhat: Vec<f64>,
        rstd: Vec<f64>,
    },
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Softmax {
        x: Var,
        temperature: f64,
    },
    CrossEntropy {
        pred: Var,
        target: Vec<f64>,
    },
    Sum(Var),
    Row(Var, usize),
    ConcatCols(Var, Var),
}

#[derive(Debug)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    requires_grad: bool,
}

/// Ordered record of operations sufficient for backpropagation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, requires_grad: bool) -> Var {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn node(&self, v: Var) -> &Node {
        &self.nodes[v.0]
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Records a copy of `t` as a leaf. Its `requires_grad` flag is kept.
    pub fn leaf(&mut self, t: &Tensor) -> Var {
        self.push(t.shape().to_vec(), t.data().to_vec(), Op::Leaf, t.requires_grad)
    }

    /// Records a non-differentiable constant.
    pub fn constant(&mut self, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        Ok(self.push(t.shape().to_vec(), t.into_data(), Op::Leaf, false))
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.node(v).shape
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.node(v).value
    }

    pub fn tensor(&self, v: Var) -> Tensor {
        let n = self.node(v);
        Tensor::new(n.shape.clone(), n.value.clone()).expect("tape shapes are valid")
    }

    /// Scalar value of a one-element node.
    pub fn scalar(&self, v: Var) -> f64 {
        let n = self.node(v);
        assert_eq!(n.value.len(), 1, "scalar() on shape {:?}", n.shape);
        n.value[0]
    }

    /// Gradient accumulated on `v` by the last call to [`Tape::backward`].
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Matrix product `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix(a, "matmul")?;
        let (k2, n) = self.matrix(b, "matmul")?;
        if k != k2 {
            return Err(self.dim_err("matmul", a, b));
        }
        let out = matmul_plain(self.value(a), self.value(b), m, k, n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(vec![m, n], out, Op::MatMul(a, b), rg))
    }

    /// Matrix product with the second operand transposed, `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.matrix(a, "matmul_t")?;
        let (n, k2) = self.matrix(b, "matmul_t")?;
        if k != k2 {
            return Err(self.dim_err("matmul_t", a, b));
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let ar = &av[i * k..(i + 1) * k];
            for j in 0..n {
                let br = &bv[j * k..(j + 1) * k];
                out[i * n + j] = ar.iter().zip(br).map(|(x, y)| x * y).sum();
            }
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(vec![m, n], out, Op::MatMulT(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x + y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Add(a, b), rg))
    }

    /// Adds the vector `b` to every row of `a`.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, n) = dims2(self.shape(a));
        if self.node(b).value.len() != n {
            return Err(self.dim_err("add_row", a, b));
        }
        let bv = self.value(b);
        let out: Vec<f64> = self
            .value(a)
            .chunks(n)
            .flat_map(|row| row.iter().zip(bv).map(|(x, y)| x + y))
            .collect();
        debug_assert_eq!(out.len(), m * n);
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), out, Op::AddRow(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        let out = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let rg = self.rg(&[a, b]);
        Ok(self.push(self.shape(a).to_vec(), out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).iter().map(|x| x * s).collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), out, Op::Scale(a, s), rg)
    }

    /// Inverted dropout: zeroes each entry with probability `rate` and scales
    /// survivors by `1 / (1 - rate)`. `rate == 0` returns `a` unchanged.
    pub fn dropout<R: rand::Rng + ?Sized>(&mut self, a: Var, rate: f64, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(VidError::Parameter(format!("dropout rate must lie in [0, 1), got {rate}")));
        }
        if rate == 0.0 {
            return Ok(a);
        }
        let keep = 1.0 / (1.0 - rate);
        let mask = (0..self.value(a).len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let m = self.constant(self.shape(a).to_vec(), mask)?;
        self.mul(a, m)
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, a: Var) -> Var {
        let out = self.value(a).iter().map(|&x| gelu(x)).collect();
        let rg = self.rg(&[a]);
        self.push(self.shape(a).to_vec(), out, Op::Gelu(a), rg)
    }

    /// Per-row layer normalization with affine `gamma`, `beta` of row width.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (m, n) = dims2(self.shape(x));
        if self.value(gamma).len() != n {
            return Err(self.dim_err("layer_norm", x, gamma));
        }
        if self.value(beta).len() != n {
            return Err(self.dim_err("layer_norm", x, beta));
        }
        let xv = self.value(x);
        let g = self.value(gamma);
        let b = self.value(beta);
        let mut xhat = vec![0.0; m * n];
        let mut rstd = vec![0.0; m];
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &xv[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            let r = 1.0 / (var + LAYER_NORM_EPS).sqrt();
            rstd[i] = r;
            for j in 0..n {
                let h = (row[j] - mean) * r;
                xhat[i * n + j] = h;
                out[i * n + j] = h * g[j] + b[j];
            }
        }
        let rg = self.rg(&[x, gamma, beta]);
        let shape = self.shape(x).to_vec();
        Ok(self.push(
            shape,
            out,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
            rg,
        ))
    }

    /// Gathers rows of `table` (shape `[vocab, d]`) for each id.
    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let (vocab, d) = self.matrix(table, "embedding")?;
        if ids.is_empty() {
            return Err(VidError::Empty("embedding lookup with no ids".into()));
        }
        let tv = self.value(table);
        let mut out = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= vocab {
                return Err(VidError::Vocabulary { id, size: vocab });
            }
            out.extend_from_slice(&tv[id * d..(id + 1) * d]);
        }
        let rg = self.rg(&[table]);
        Ok(self.push(
            vec![ids.len(), d],
            out,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    /// Row-wise softmax of `x / temperature`.
    pub fn softmax(&mut self, x: Var, temperature: f64) -> Result<Var> {
        self.softmax_masked(x, temperature, None)
    }

    /// Row-wise softmax of `x / temperature` where columns with
    /// `mask[j] == false` receive exactly zero probability.
    pub fn softmax_masked(&mut self, x: Var, temperature: f64, mask: Option<&[bool]>) -> Result<Var> {
        if !(temperature > 0.0) || !temperature.is_finite() {
            return Err(VidError::Parameter(format!(
                "softmax temperature must be positive and finite, got {temperature}"
            )));
        }
        let (m, n) = dims2(self.shape(x));
        if n < 2 {
            return Err(VidError::Parameter("softmax needs at least two classes".into()));
        }
        if let Some(mask) = mask {
            if mask.len() != n {
                return Err(VidError::Dimension {
                    op: "softmax_masked",
                    left: self.shape(x).to_vec(),
                    right: vec![mask.len()],
                });
            }
            if !mask.iter().any(|&b| b) {
                return Err(VidError::Parameter("softmax mask hides every column".into()));
            }
        }
        let xv = self.value(x);
        if xv.iter().any(|v| v.is_nan()) {
            return Err(VidError::Numeric("NaN in softmax input".into()));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &xv[i * n..(i + 1) * n];
            softmax_row(row, temperature, mask, &mut out[i * n..(i + 1) * n]);
        }
        let rg = self.rg(&[x]);
        Ok(self.push(self.shape(x).to_vec(), out, Op::Softmax { x, temperature }, rg))
    }

    /// `-Σ target · ln(max(pred, ε))` summed over every entry; returns a
    /// one-element node. Rows of `pred` and `target` are distributions.
    pub fn cross_entropy(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let pv = self.value(pred);
        if pv.len() != target.len() {
            return Err(VidError::Dimension {
                op: "cross_entropy",
                left: self.shape(pred).to_vec(),
                right: vec![target.len()],
            });
        }
        let loss = cross_entropy_value(pv, target);
        let rg = self.rg(&[pred]);
        Ok(self.push(
            vec![1],
            vec![loss],
            Op::CrossEntropy {
                pred,
                target: target.to_vec(),
            },
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).iter().sum();
        let rg = self.rg(&[a]);
        self.push(vec![1], vec![s], Op::Sum(a), rg)
    }

    /// Mean over all entries.
    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.value(a).len() as f64;
        let s = self.sum(a);
        self.scale(s, 1.0 / n)
    }

    /// Selects row `i` of a matrix as a `[1, cols]` node.
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var> {
        let (m, n) = dims2(self.shape(a));
        if i >= m {
            return Err(VidError::Parameter(format!("row {i} out of range for {m} rows")));
        }
        let out = self.value(a)[i * n..(i + 1) * n].to_vec();
        let rg = self.rg(&[a]);
        Ok(self.push(vec![1, n], out, Op::Row(a, i), rg))
    }

    /// Horizontal concatenation of two matrices with equal row counts.
    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ma, na) = dims2(self.shape(a));
        let (mb, nb) = dims2(self.shape(b));
        if ma != mb {
            return Err(self.dim_err("concat_cols", a, b));
        }
        let av = self.value(a);
        let bv = self.value(b);
        let mut out = Vec::with_capacity(ma * (na + nb));
        for i in 0..ma {
            out.extend_from_slice(&av[i * na..(i + 1) * na]);
            out.extend_from_slice(&bv[i * nb..(i + 1) * nb]);
        }
        let rg = self.rg(&[a, b]);
        Ok(self.push(vec![ma, na + nb], out, Op::ConcatCols(a, b), rg))
    }

    /// Scaled dot-product attention for one head:
    /// `softmax(q·kᵀ / sqrt(d_k), masked over keys) · v`.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, key_mask: Option<&[bool]>) -> Result<Var> {
        let dk = dims2(self.shape(k)).1;
        let scores = self.matmul_t(q, k)?;
        let scaled = self.scale(scores, 1.0 / (dk as f64).sqrt());
        let probs = self.softmax_masked(scaled, 1.0, key_mask)?;
        self.matmul(probs, v)
    }

    /// Backpropagates from the scalar `loss`, replacing any previous gradients.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.node(loss).value.len() != 1 {
            return Err(VidError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.node(loss).shape
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        self.grads = grads;
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = dims2(self.shape(*a));
                let n = dims2(self.shape(*b)).1;
                let av = self.value(*a);
                let bv = self.value(*b);
                if let Some(ga) = self.acc(*a, grads) {
                    // ga += g · bᵀ
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += g[i * n + j] * bv[p * n + j];
                            }
                            ga[i * k + p] += s;
                        }
                    }
                }
                if let Some(gb) = self.acc(*b, grads) {
                    // gb += aᵀ · g
                    for i in 0..m {
                        for p in 0..k {
                            let a_ip = av[i * k + p];
                            if a_ip == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                gb[p * n + j] += a_ip * g[i * n + j];
                            }
                        }
                    }
                }
            }
            Op::MatMulT(a, b) => {
                let (m, k) = dims2(self.shape(*a));
                let n = dims2(self.shape(*b)).0;
                let av = self.value(*a);
                let bv = self.value(*b);
                if let Some(ga) = self.acc(*a, grads) {
                    // ga += g · b
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            for p in 0..k {
                                ga[i * k + p] += gij * bv[j * k + p];
                            }
                        }
                    }
                }
                if let Some(gb) = self.acc(*b, grads) {
                    // gb += gᵀ · a
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            for p in 0..k {
                                gb[j * k + p] += gij * av[i * k + p];
                            }
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if let Some(gv) = self.acc(*v, grads) {
                        add_into(gv, g);
                    }
                }
            }
            Op::AddRow(a, b) => {
                if let Some(ga) = self.acc(*a, grads) {
                    add_into(ga, g);
                }
                let n = self.value(*b).len();
                if let Some(gb) = self.acc(*b, grads) {
                    for row in g.chunks(n) {
                        add_into(gb, row);
                    }
                }
            }
            Op::Mul(a, b) => {
                let av = self.value(*a);
                let bv = self.value(*b);
                if let Some(ga) = self.acc(*a, grads) {
                    for ((d, gi), bi) in ga.iter_mut().zip(g).zip(bv) {
                        *d += gi * bi;
                    }
                }
                if let Some(gb) = self.acc(*b, grads) {
                    for ((d, gi), ai) in gb.iter_mut().zip(g).zip(av) {
                        *d += gi * ai;
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(ga) = self.acc(*a, grads) {
                    for (d, gi) in ga.iter_mut().zip(g) {
                        *d += gi * s;
                    }
                }
            }
            Op::Gelu(a) => {
                let av = self.value(*a);
                if let Some(ga) = self.acc(*a, grads) {
                    for ((d, gi), &x) in ga.iter_mut().zip(g).zip(av) {
                        *d += gi * gelu_grad(x);
                    }
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            } => {
                let (m, n) = dims2(self.shape(*x));
                let gv = self.value(*gamma);
                if let Some(gg) = self.acc(*gamma, grads) {
                    for i in 0..m {
                        for j in 0..n {
                            gg[j] += g[i * n + j] * xhat[i * n + j];
                        }
                    }
                }
                if let Some(gb) = self.acc(*beta, grads) {
                    for row in g.chunks(n) {
                        add_into(gb, row);
                    }
                }
                if let Some(gx) = self.acc(*x, grads) {
                    let nf = n as f64;
                    for i in 0..m {
                        let mut sum_dh = 0.0;
                        let mut sum_dh_h = 0.0;
                        for j in 0..n {
                            let dh = g[i * n + j] * gv[j];
                            sum_dh += dh;
                            sum_dh_h += dh * xhat[i * n + j];
                        }
                        for j in 0..n {
                            let dh = g[i * n + j] * gv[j];
                            let h = xhat[i * n + j];
                            gx[i * n + j] += rstd[i] * (dh - sum_dh / nf - h * sum_dh_h / nf);
                        }
                    }
                }
            }
            Op::Embedding { table, ids } => {
                let d = dims2(self.shape(*table)).1;
                if let Some(gt) = self.acc(*table, grads) {
                    for (r, &id) in ids.iter().enumerate() {
                        add_into(&mut gt[id * d..(id + 1) * d], &g[r * d..(r + 1) * d]);
                    }
                }
            }
            Op::Softmax { x, temperature } => {
                let n = dims2(&node.shape).1;
                let p = &node.value;
                if let Some(gx) = self.acc(*x, grads) {
                    for (i, row_g) in g.chunks(n).enumerate() {
                        let row_p = &p[i * n..(i + 1) * n];
                        let dot: f64 = row_g.iter().zip(row_p).map(|(a, b)| a * b).sum();
                        for j in 0..n {
                            gx[i * n + j] += row_p[j] * (row_g[j] - dot) / temperature;
                        }
                    }
                }
            }
            Op::CrossEntropy { pred, target } => {
                let pv = self.value(*pred);
                if let Some(gp) = self.acc(*pred, grads) {
                    for ((d, &p), &t) in gp.iter_mut().zip(pv).zip(target) {
                        if p > LOG_CLAMP && t != 0.0 {
                            *d -= g[0] * t / p;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.acc(*a, grads) {
                    for d in ga.iter_mut() {
                        *d += g[0];
                    }
                }
            }
            Op::Row(a, i) => {
                let n = g.len();
                if let Some(ga) = self.acc(*a, grads) {
                    add_into(&mut ga[i * n..(i + 1) * n], g);
                }
            }
            Op::ConcatCols(a, b) => {
                let (m, na) = dims2(self.shape(*a));
                let nb = dims2(self.shape(*b)).1;
                let w = na + nb;
                if let Some(ga) = self.acc(*a, grads) {
                    for i in 0..m {
                        add_into(&mut ga[i * na..(i + 1) * na], &g[i * w..i * w + na]);
                    }
                }
                if let Some(gb) = self.acc(*b, grads) {
                    for i in 0..m {
                        add_into(&mut gb[i * nb..(i + 1) * nb], &g[i * w + na..(i + 1) * w]);
                    }
                }
            }
        }
    }

    /// Gradient buffer for `v`, allocated on first use; `None` when `v`
    /// does not require a gradient.
    fn acc<'g>(&self, v: Var, grads: &'g mut [Option<Vec<f64>>]) -> Option<&'g mut Vec<f64>> {
        let node = &self.nodes[v.0];
        if !node.requires_grad {
            return None;
        }
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
    }

    fn matrix(&self, v: Var, op: &'static str) -> Result<(usize, usize)> {
        match self.shape(v) {
            [r, c] => Ok((*r, *c)),
            other => Err(VidError::Dimension {
                op,
                left: other.to_vec(),
                right: vec![],
            }),
        }
    }

    fn same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(self.dim_err(op, a, b));
        }
        Ok(())
    }

    fn dim_err(&self, op: &'static str, a: Var, b: Var) -> VidError {
        VidError::Dimension {
            op,
            left: self.shape(a).to_vec(),
            right: self.shape(b).to_vec(),
        }
    }
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;

fn gelu(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + 0.044715 * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = SQRT_2_OVER_PI * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    let du = SQRT_2_OVER_PI * (1.0 + 3.0 * 0.044715 * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Max-subtracted softmax of `row / temperature` into `out`.
pub(crate) fn softmax_row(row: &[f64], temperature: f64, mask: Option<&[bool]>, out: &mut [f64]) {
    let visible = |j: usize| mask.is_none_or(|m| m[j]);
    let max = row
        .iter()
        .enumerate()
        .filter(|(j, _)| visible(*j))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (j, (&z, o)) in row.iter().zip(out.iter_mut()).enumerate() {
        *o = if visible(j) {
            ((z - max) / temperature).exp()
        } else {
            0.0
        };
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub(crate) fn cross_entropy_value(pred: &[f64], target: &[f64]) -> f64 {
    -pred
        .iter()
        .zip(target)
        .filter(|(_, &t)| t != 0.0)
        .map(|(&p, &t)| t * p.max(LOG_CLAMP).ln())
        .sum::<f64>()
}

/// Temperature softmax of a plain vector.
pub fn softmax_t(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(VidError::Parameter(format!(
            "softmax temperature must be positive and finite, got {temperature}"
        )));
    }
    if logits.len() < 2 {
        return Err(VidError::Parameter("softmax needs at least two classes".into()));
    }
    if logits.iter().any(|v| v.is_nan()) {
        return Err(VidError::Numeric("NaN in softmax input".into()));
    }
    let mut out = vec![0.0; logits.len()];
    softmax_row(logits, temperature, None, &mut out);
    Ok(out)
}

/// Cross-entropy `-Σ target · ln(max(pred, ε))` of two distributions.
pub fn cross_entropy(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(VidError::Dimension {
            op: "cross_entropy",
            left: vec![pred.len()],
            right: vec![target.len()],
        });
    }
    Ok(cross_entropy_value(pred, target))
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(tape: &mut Tape, shape: Vec<usize>, data: Vec<f64>) -> Var {
        tape.leaf(&Tensor::new(shape, data).unwrap().trainable())
    }

    #[test]
    fn matmul_identity_and_projector() {
        let mut tape = Tape::new();
        let i = tape.leaf(&Tensor::identity(2));
        let m = leaf(&mut tape, vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let out = tape.matmul(i, m).unwrap();
        assert_eq!(tape.value(out), &[1.0, 2.0, 3.0, 4.0]);

        let p = leaf(&mut tape, vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]);
        let m2 = leaf(&mut tape, vec![2, 2], vec![5.0, 6.0, 7.0, 8.0]);
        let out = tape.matmul(p, m2).unwrap();
        assert_eq!(tape.value(out), &[5.0, 6.0, 0.0, 0.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_both_shapes() {
        let mut tape = Tape::new();
        let a = leaf(&mut tape, vec![2, 3], vec![0.0; 6]);
        let b = leaf(&mut tape, vec![2, 3], vec![0.0; 6]);
        let err = tape.matmul(a, b).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]"), "{msg}");
        assert!(matches!(err, VidError::Dimension { .. }));
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax_t(&[0.0, 0.0], 1.0).unwrap(), vec![0.5, 0.5]);
        let p = softmax_t(&[4f64.ln(), 0.0], 2.0).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_bad_temperature_and_nan() {
        assert!(matches!(softmax_t(&[1.0, 2.0], 0.0), Err(VidError::Parameter(_))));
        assert!(matches!(softmax_t(&[1.0, 2.0], -1.0), Err(VidError::Parameter(_))));
        assert!(matches!(softmax_t(&[f64::NAN, 2.0], 1.0), Err(VidError::Numeric(_))));
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![2], vec![f64::NAN, 0.0]);
        assert!(matches!(tape.softmax(x, 1.0), Err(VidError::Numeric(_))));
    }

    #[test]
    fn softmax_is_overflow_safe() {
        let p = softmax_t(&[1000.0, 0.0], 1.0).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_examples() {
        assert!(cross_entropy(&[1.0, 0.0], &[1.0, 0.0]).unwrap().abs() < 1e-10);
        let ln2 = std::f64::consts::LN_2;
        for t in [[1.0, 0.0], [0.3, 0.7], [0.5, 0.5]] {
            assert!((cross_entropy(&[0.5, 0.5], &t).unwrap() - ln2).abs() < 1e-15);
        }
        assert!(matches!(
            cross_entropy(&[0.5, 0.5], &[1.0]),
            Err(VidError::Dimension { .. })
        ));
        // saturated prediction is clamped rather than infinite
        let v = cross_entropy(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((v - (-LOG_CLAMP.ln())).abs() < 1e-9);
    }

    #[test]
    fn backward_requires_scalar() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![3], vec![1.0, 2.0, 3.0]);
        assert!(matches!(tape.backward(x), Err(VidError::Contract(_))));
    }

    #[test]
    fn sum_gives_ones_and_half_square_gives_identity() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![2, 3], vec![1.0, -2.0, 3.0, 0.5, 0.0, 7.0]);
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0; 6]);

        let mut tape = Tape::new();
        let data = vec![1.0, -2.0, 3.0, 0.5];
        let x = leaf(&mut tape, vec![4], data.clone());
        let sq = tape.mul(x, x).unwrap();
        let s = tape.sum(sq);
        let loss = tape.scale(s, 0.5);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(x).unwrap(), data.as_slice());
    }

    #[test]
    fn masked_softmax_zeroes_hidden_columns() {
        let mut tape = Tape::new();
        let x = leaf(&mut tape, vec![1, 3], vec![0.3, 9.0, -1.0]);
        let p = tape.softmax_masked(x, 1.0, Some(&[true, false, true])).unwrap();
        let v = tape.value(p);
        assert_eq!(v[1], 0.0);
        assert!((v[0] + v[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(vec![2], vec![1.0, 2.0]).unwrap();
        let x = leaf(&mut tape, vec![2], vec![3.0, 4.0]);
        let y = tape.mul(c, x).unwrap();
        let s = tape.sum(y);
        tape.backward(s).unwrap();
        assert!(tape.grad(c).is_none());
        assert_eq!(tape.grad(x).unwrap(), &[1.0, 2.0]);
    }
}
