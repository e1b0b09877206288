//! Tape-based reverse-mode automatic differentiation over [`Matrix`] values.
//!
//! Every operation appends a node to the tape in execution order. Calling
//! [`Graph::backward`] walks the tape once in reverse and accumulates
//! gradients into the leaves. Leaf gradients persist across `backward`
//! calls until [`Graph::zero_grad`], so running backward twice doubles them.

use std::borrow::Cow;

use rand::Rng;

use super::special::{gelu_derivative, gelu_scalar};
use super::{Matrix, NumericsError};

/// Handle to a node on a [`Graph`] tape.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Leaf { keep_grad: bool },
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    MaskedSoftmax {
        input: Var,
        active: usize,
    },
    LayerNorm {
        input: Var,
        gain: Var,
        bias: Var,
        normalized: Matrix,
        inv_std: Vec<f64>,
    },
    Gelu(Var),
    Tanh(Var),
    MulConst {
        input: Var,
        factor: Matrix,
    },
    MeanRows {
        input: Var,
        active: usize,
    },
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Matrix,
    },
}

struct Node<'a> {
    value: Cow<'a, Matrix>,
    op: Op,
}

/// A recorded computation. Single-threaded; build one graph per example.
#[derive(Default)]
pub struct Graph<'a> {
    nodes: Vec<Node<'a>>,
    leaf_grads: Vec<Option<Matrix>>,
}

fn finite(op: &'static str, m: Matrix) -> Result<Matrix, NumericsError> {
    if m.is_finite() {
        Ok(m)
    } else {
        Err(NumericsError::NonFinite { op })
    }
}

impl<'a> Graph<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Cow<'a, Matrix>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Adds a differentiable leaf that owns its value.
    pub fn param(&mut self, value: Matrix) -> Result<Var, NumericsError> {
        let value = finite("param", value)?;
        Ok(self.push(Cow::Owned(value), Op::Leaf { keep_grad: true }))
    }

    /// Adds a differentiable leaf borrowing its value.
    pub fn param_ref(&mut self, value: &'a Matrix) -> Result<Var, NumericsError> {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite { op: "param" });
        }
        Ok(self.push(Cow::Borrowed(value), Op::Leaf { keep_grad: true }))
    }

    /// Adds a leaf whose gradient is not retained.
    pub fn constant(&mut self, value: Matrix) -> Result<Var, NumericsError> {
        let value = finite("constant", value)?;
        Ok(self.push(Cow::Owned(value), Op::Leaf { keep_grad: false }))
    }

    pub fn constant_ref(&mut self, value: &'a Matrix) -> Result<Var, NumericsError> {
        if !value.is_finite() {
            return Err(NumericsError::NonFinite { op: "constant" });
        }
        Ok(self.push(Cow::Borrowed(value), Op::Leaf { keep_grad: false }))
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.leaf_grads[v.0].as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Matrix> {
        self.leaf_grads[v.0].take()
    }

    pub fn zero_grad(&mut self) {
        self.leaf_grads.iter_mut().for_each(|g| *g = None);
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let out = finite("matmul", self.value(a).matmul(self.value(b))?)?;
        Ok(self.push(Cow::Owned(out), Op::MatMul(a, b)))
    }

    /// `a × bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let out = finite("matmul_t", self.value(a).matmul_t(self.value(b))?)?;
        Ok(self.push(Cow::Owned(out), Op::MatMulT(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let out = finite("add", self.value(a).add(self.value(b))?)?;
        Ok(self.push(Cow::Owned(out), Op::Add(a, b)))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, NumericsError> {
        let out = finite("scale", self.value(a).scale(factor))?;
        Ok(self.push(Cow::Owned(out), Op::Scale(a, factor)))
    }

    /// Row softmax restricted to the first `active` columns.
    ///
    /// Columns at or beyond `active` get weight exactly 0 and rows at or
    /// beyond `active` are all-zero.
    pub fn masked_softmax_rows(&mut self, x: Var, active: usize) -> Result<Var, NumericsError> {
        let input = self.value(x);
        if active == 0 {
            return Err(NumericsError::InvalidArgument(
                "masked softmax needs at least one active column".into(),
            ));
        }
        if active > input.cols() || active > input.rows() {
            return Err(NumericsError::InvalidArgument(format!(
                "active count {active} exceeds {}x{} input",
                input.rows(),
                input.cols()
            )));
        }
        let out = finite("masked_softmax_rows", masked_softmax(input, active))?;
        Ok(self.push(Cow::Owned(out), Op::MaskedSoftmax { input: x, active }))
    }

    /// Per-row layer normalization with population variance.
    pub fn layer_norm(
        &mut self,
        x: Var,
        gain: Var,
        bias: Var,
        eps: f64,
    ) -> Result<Var, NumericsError> {
        if eps <= 0.0 {
            return Err(NumericsError::InvalidArgument(format!(
                "layer norm epsilon must be positive, got {eps}"
            )));
        }
        let input = self.value(x);
        let (rows, cols) = input.shape();
        for (name, p) in [("gain", gain), ("bias", bias)] {
            if self.value(p).shape() != (1, cols) {
                return Err(NumericsError::shape(
                    if name == "gain" { "layer_norm gain" } else { "layer_norm bias" },
                    (1, cols),
                    self.value(p).shape(),
                ));
            }
        }
        let g = self.value(gain).as_slice();
        let b = self.value(bias).as_slice();
        let mut normalized = Matrix::zeros(rows, cols);
        let mut out = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = input.row(r);
            let mean = row.iter().sum::<f64>() / cols as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
            let inv = 1.0 / (var + eps).sqrt();
            inv_std.push(inv);
            for c in 0..cols {
                let xhat = (row[c] - mean) * inv;
                normalized.set(r, c, xhat);
                out.set(r, c, xhat * g[c] + b[c]);
            }
        }
        let out = finite("layer_norm", out)?;
        Ok(self.push(
            Cow::Owned(out),
            Op::LayerNorm {
                input: x,
                gain,
                bias,
                normalized,
                inv_std,
            },
        ))
    }

    /// Exact GELU, `x·Φ(x)`.
    pub fn gelu(&mut self, x: Var) -> Result<Var, NumericsError> {
        let out = finite("gelu", self.value(x).map(gelu_scalar))?;
        Ok(self.push(Cow::Owned(out), Op::Gelu(x)))
    }

    pub fn tanh(&mut self, x: Var) -> Result<Var, NumericsError> {
        let out = finite("tanh", self.value(x).map(f64::tanh))?;
        Ok(self.push(Cow::Owned(out), Op::Tanh(x)))
    }

    /// Inverted dropout. With `rng = None` (eval mode) or `rate = 0` this is
    /// the identity and returns `x` itself.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        rng: Option<&mut R>,
    ) -> Result<Var, NumericsError> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NumericsError::InvalidArgument(format!(
                "dropout rate must lie in [0, 1), got {rate}"
            )));
        }
        let Some(rng) = rng else { return Ok(x) };
        if rate == 0.0 {
            return Ok(x);
        }
        let (rows, cols) = self.value(x).shape();
        let keep = 1.0 / (1.0 - rate);
        let mut factor = Matrix::zeros(rows, cols);
        for v in factor.as_mut_slice() {
            *v = if rng.gen::<f64>() < rate { 0.0 } else { keep };
        }
        self.mul_const(x, factor, "dropout")
    }

    /// Zeroes every row at or beyond `active`.
    pub fn mask_rows(&mut self, x: Var, active: usize) -> Result<Var, NumericsError> {
        let (rows, cols) = self.value(x).shape();
        if active >= rows {
            return Ok(x);
        }
        let mut factor = Matrix::filled(rows, cols, 1.0);
        for r in active..rows {
            factor.row_mut(r).fill(0.0);
        }
        self.mul_const(x, factor, "mask_rows")
    }

    fn mul_const(
        &mut self,
        x: Var,
        factor: Matrix,
        op: &'static str,
    ) -> Result<Var, NumericsError> {
        let input = self.value(x);
        let mut out = input.clone();
        for (o, f) in out.as_mut_slice().iter_mut().zip(factor.as_slice()) {
            *o *= f;
        }
        let out = finite(op, out)?;
        Ok(self.push(Cow::Owned(out), Op::MulConst { input: x, factor }))
    }

    /// Mean of the first `active` rows, as a `1 × cols` matrix.
    pub fn mean_rows(&mut self, x: Var, active: usize) -> Result<Var, NumericsError> {
        let input = self.value(x);
        if active == 0 || active > input.rows() {
            return Err(NumericsError::InvalidArgument(format!(
                "mean over {active} of {} rows",
                input.rows()
            )));
        }
        let mut out = Matrix::zeros(1, input.cols());
        for r in 0..active {
            for (o, v) in out.as_mut_slice().iter_mut().zip(input.row(r)) {
                *o += v;
            }
        }
        let out = finite("mean_rows", out.scale(1.0 / active as f64))?;
        Ok(self.push(Cow::Owned(out), Op::MeanRows { input: x, active }))
    }

    /// Mean cross-entropy of `n × c` logits against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, NumericsError> {
        let input = self.value(logits);
        if !input.is_finite() {
            return Err(NumericsError::NonFinite { op: "cross_entropy" });
        }
        if labels.len() != input.rows() || input.rows() == 0 {
            return Err(NumericsError::InvalidArgument(format!(
                "{} labels for {} logit rows",
                labels.len(),
                input.rows()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= input.cols()) {
            return Err(NumericsError::InvalidArgument(format!(
                "label {bad} out of range for {} classes",
                input.cols()
            )));
        }
        let n = input.rows();
        let mut probs = Matrix::zeros(n, input.cols());
        let mut loss = 0.0;
        for (r, &label) in labels.iter().enumerate() {
            let row = input.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let log_sum = max + sum.ln();
            loss += log_sum - row[label];
            for (c, v) in row.iter().enumerate() {
                probs.set(r, c, (v - log_sum).exp());
            }
        }
        let out = finite("cross_entropy", Matrix::filled(1, 1, loss / n as f64))?;
        Ok(self.push(
            Cow::Owned(out),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        ))
    }

    /// Reverse pass from a `1 × 1` output, accumulating into leaf gradients.
    pub fn backward(&mut self, output: Var) -> Result<(), NumericsError> {
        if self.value(output).shape() != (1, 1) {
            return Err(NumericsError::NotScalar(self.value(output).shape()));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Matrix::filled(1, 1, 1.0));

        for idx in (0..=output.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf { keep_grad } => {
                    if *keep_grad {
                        match &mut self.leaf_grads[idx] {
                            Some(g) => g.add_assign(&upstream),
                            slot => *slot = Some(upstream),
                        }
                    }
                }
                Op::MatMul(a, b) => {
                    let da = upstream.matmul_t(self.value(*b))?;
                    let db = self.value(*a).t_matmul(&upstream)?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::MatMulT(a, b) => {
                    // C = A·Bᵀ: dA = dC·B, dB = dCᵀ·A
                    let da = upstream.matmul(self.value(*b))?;
                    let db = upstream.t_matmul(self.value(*a))?;
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, upstream.clone());
                    accumulate(&mut grads, *b, upstream);
                }
                Op::Scale(a, f) => {
                    accumulate(&mut grads, *a, upstream.scale(*f));
                }
                Op::MaskedSoftmax { input, active } => {
                    let y = &node.value;
                    let mut dx = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..*active {
                        let yr = &y.row(r)[..*active];
                        let gr = &upstream.row(r)[..*active];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        let out = dx.row_mut(r);
                        for c in 0..*active {
                            out[c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::LayerNorm {
                    input,
                    gain,
                    bias,
                    normalized,
                    inv_std,
                } => {
                    let (rows, cols) = normalized.shape();
                    let g = self.value(*gain).as_slice();
                    let mut dgain = Matrix::zeros(1, cols);
                    let mut dbias = Matrix::zeros(1, cols);
                    let mut dx = Matrix::zeros(rows, cols);
                    let n = cols as f64;
                    for r in 0..rows {
                        let up = upstream.row(r);
                        let xhat = normalized.row(r);
                        let mut sum_d = 0.0;
                        let mut sum_dx = 0.0;
                        for c in 0..cols {
                            let d = up[c] * g[c];
                            sum_d += d;
                            sum_dx += d * xhat[c];
                            dgain.as_mut_slice()[c] += up[c] * xhat[c];
                            dbias.as_mut_slice()[c] += up[c];
                        }
                        let out = dx.row_mut(r);
                        for c in 0..cols {
                            let d = up[c] * g[c];
                            out[c] = inv_std[r] * (d - sum_d / n - xhat[c] * sum_dx / n);
                        }
                    }
                    accumulate(&mut grads, *input, dx);
                    accumulate(&mut grads, *gain, dgain);
                    accumulate(&mut grads, *bias, dbias);
                }
                Op::Gelu(x) => {
                    let xv = self.value(*x);
                    let mut dx = upstream;
                    for (d, &v) in dx.as_mut_slice().iter_mut().zip(xv.as_slice()) {
                        *d *= gelu_derivative(v);
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::Tanh(x) => {
                    let mut dx = upstream;
                    for (d, &y) in dx.as_mut_slice().iter_mut().zip(node.value.as_slice()) {
                        *d *= 1.0 - y * y;
                    }
                    accumulate(&mut grads, *x, dx);
                }
                Op::MulConst { input, factor } => {
                    let mut dx = upstream;
                    for (d, f) in dx.as_mut_slice().iter_mut().zip(factor.as_slice()) {
                        *d *= f;
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::MeanRows { input, active } => {
                    let (rows, cols) = self.value(*input).shape();
                    let mut dx = Matrix::zeros(rows, cols);
                    let share = 1.0 / *active as f64;
                    for r in 0..*active {
                        for (d, u) in dx.row_mut(r).iter_mut().zip(upstream.as_slice()) {
                            *d = u * share;
                        }
                    }
                    accumulate(&mut grads, *input, dx);
                }
                Op::CrossEntropy {
                    logits,
                    labels,
                    probs,
                } => {
                    let scale = upstream.get(0, 0) / labels.len() as f64;
                    let mut dx = probs.clone();
                    for (r, &label) in labels.iter().enumerate() {
                        let v = dx.get(r, label);
                        dx.set(r, label, v - 1.0);
                    }
                    accumulate(&mut grads, *logits, dx.scale(scale));
                }
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot => *slot = Some(g),
    }
}

/// Row softmax over the first `active` columns; other entries are zero.
pub fn masked_softmax(input: &Matrix, active: usize) -> Matrix {
    let (rows, cols) = input.shape();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..active.min(rows) {
        let row = &input.row(r)[..active];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (o, e) in out.row_mut(r).iter_mut().zip(&exps) {
            *o = e / sum;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(v: f64) -> Matrix {
        Matrix::filled(1, 1, v)
    }

    #[test]
    fn scalar_product_chain_rule() {
        let mut g = Graph::new();
        let a = g.param(scalar(2.0)).unwrap();
        let b = g.param(scalar(3.0)).unwrap();
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.value(c).get(0, 0), 6.0);
        g.backward(c).unwrap();
        assert_eq!(g.grad(a).unwrap().get(0, 0), 3.0);
        assert_eq!(g.grad(b).unwrap().get(0, 0), 2.0);
    }

    #[test]
    fn shared_inputs_accumulate_and_repeat_backward_doubles() {
        let mut g = Graph::new();
        let x = g.param(scalar(1.5)).unwrap();
        let y = g.add(x, x).unwrap();
        let z = g.matmul(y, x).unwrap(); // 2x²
        g.backward(z).unwrap();
        assert!((g.grad(x).unwrap().get(0, 0) - 6.0).abs() < 1e-12);
        g.backward(z).unwrap();
        assert!((g.grad(x).unwrap().get(0, 0) - 12.0).abs() < 1e-12);
        g.zero_grad();
        assert!(g.grad(x).is_none());
    }

    #[test]
    fn softmax_masks_columns_and_rows() {
        let mut g = Graph::new();
        let x = g
            .constant(Matrix::from_vec(3, 3, vec![0.0, 0.0, 9.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap())
            .unwrap();
        let y = g.masked_softmax_rows(x, 2).unwrap();
        let v = g.value(y);
        assert_eq!(v.row(0), &[0.5, 0.5, 0.0]);
        let s = 1.0 / (1.0 + (1.0f64).exp());
        assert!((v.get(1, 0) - s).abs() < 1e-15);
        assert_eq!(v.get(1, 2), 0.0);
        assert_eq!(v.row(2), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn softmax_rejects_zero_active() {
        let mut g = Graph::new();
        let x = g.constant(Matrix::zeros(2, 2)).unwrap();
        assert!(g.masked_softmax_rows(x, 0).is_err());
    }

    #[test]
    fn layer_norm_known_rows() {
        let mut g = Graph::new();
        let x = g
            .constant(Matrix::from_vec(2, 2, vec![1.0, -1.0, 4.0, 4.0]).unwrap())
            .unwrap();
        let gain = g.constant(Matrix::filled(1, 2, 1.0)).unwrap();
        let bias = g.constant(Matrix::zeros(1, 2)).unwrap();
        let y = g.layer_norm(x, gain, bias, 1e-12).unwrap();
        let v = g.value(y);
        assert!((v.get(0, 0) - 1.0).abs() < 1e-9 && (v.get(0, 1) + 1.0).abs() < 1e-9);
        assert_eq!(v.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut g = Graph::new();
        let x = g.param(Matrix::filled(2, 2, 3.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(g.dropout(x, 0.0, Some(&mut rng)).unwrap(), x);
        assert_eq!(g.dropout::<ChaCha8Rng>(x, 0.5, None).unwrap(), x);
        assert!(g.dropout(x, 1.0, Some(&mut rng)).is_err());
    }

    #[test]
    fn dropout_scales_survivors() {
        let mut g = Graph::new();
        let x = g.param(Matrix::filled(20, 20, 1.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = g.dropout(x, 0.25, Some(&mut rng)).unwrap();
        let vals = g.value(y).as_slice();
        assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.0 / 0.75).abs() < 1e-15));
        let dropped = vals.iter().filter(|&&v| v == 0.0).count();
        assert!((50..150).contains(&dropped), "{dropped}");
    }

    #[test]
    fn cross_entropy_uniform_and_saturated() {
        let mut g = Graph::new();
        let l = g.constant(Matrix::zeros(1, 2)).unwrap();
        let loss = g.cross_entropy(l, &[1]).unwrap();
        assert!((g.value(loss).get(0, 0) - std::f64::consts::LN_2).abs() < 1e-12);
        let l = g.constant(Matrix::from_vec(1, 2, vec![100.0, 0.0]).unwrap()).unwrap();
        let loss = g.cross_entropy(l, &[0]).unwrap();
        assert!(g.value(loss).get(0, 0) < 1e-6);
    }

    #[test]
    fn non_finite_values_are_rejected() {
        let mut g = Graph::new();
        assert!(matches!(
            g.param(scalar(f64::NAN)),
            Err(NumericsError::NonFinite { .. })
        ));
        let big = g.param(scalar(1e200)).unwrap();
        assert!(matches!(g.matmul(big, big), Err(NumericsError::NonFinite { .. })));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::new();
        let x = g.param(Matrix::zeros(2, 1)).unwrap();
        assert!(matches!(g.backward(x), Err(NumericsError::NotScalar(_))));
    }
}
