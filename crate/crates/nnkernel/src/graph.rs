//! Tape-based reverse-mode differentiation.
//!
//! Every operation appends a node holding its forward value. `backward`
//! walks the tape in reverse creation order, so parents are always visited
//! after their consumers.

use crate::{NnError, Tensor};

/// Handle to a node on a [`Graph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Option<Var> },
    Add(Var, Var),
    Mul(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Elu(Var),
    Relu(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    SliceCols { a: Var, start: usize },
    Reshape(Var),
    StackSteps(Vec<Var>),
    Conv2d { x: Var, k: Var, b: Var },
    Mse { pred: Var, target: Var },
    WeightedSum(Vec<(Var, f64)>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    params: Vec<Var>,
    grads: Option<Vec<Option<Vec<f64>>>>,
}

fn mismatch(op: &'static str, expected: impl Into<String>, got: impl Into<String>) -> NnError {
    NnError::ShapeMismatch {
        op,
        expected: expected.into(),
        got: got.into(),
    }
}

/// `c = a·b + beta·c` for strided row-major views.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    c: &mut [f64],
    beta: f64,
) {
    if m == 0 || n == 0 {
        return;
    }
    assert!(a.len() >= (m - 1) * rsa + (k.max(1) - 1) * csa + 1 || k == 0);
    assert!(b.len() >= (k.max(1) - 1) * rsb + (n - 1) * csb + 1 || k == 0);
    assert!(c.len() >= m * n);
    // SAFETY: the asserts above bound every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn elu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.grads = None;
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    /// Constant input. Receives a gradient but is not reported by
    /// [`Graph::param_grads`].
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Trainable parameter; registration order defines the order of
    /// [`Graph::param_grads`].
    pub fn param(&mut self, t: &Tensor) -> Var {
        let mut t = t.clone();
        t.clear_grad();
        let v = self.push(t, Op::Leaf);
        self.params.push(v);
        v
    }

    pub fn params(&self) -> &[Var] {
        &self.params
    }

    /// `x·wᵀ + b` for `x` of shape (batch, in) and `w` of shape (out, in).
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, NnError> {
        let (xs, ws) = (self.shape(x), self.shape(w));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] {
            return Err(mismatch(
                "linear",
                format!("(batch, {}) input", ws.get(1).copied().unwrap_or(0)),
                format!("{xs:?} against weights {ws:?}"),
            ));
        }
        let (batch, inp, out) = (xs[0], xs[1], ws[0]);
        if let Some(b) = b {
            if self.shape(b) != [out] {
                return Err(mismatch("linear", format!("bias [{out}]"), format!("{:?}", self.shape(b))));
            }
        }
        let mut y = vec![0.0; batch * out];
        gemm(batch, inp, out, self.data(x), inp, 1, self.data(w), 1, inp, &mut y, 0.0);
        if let Some(b) = b {
            let bias = self.data(b);
            for row in y.chunks_mut(out) {
                for (yv, bv) in row.iter_mut().zip(bias) {
                    *yv += bv;
                }
            }
        }
        Ok(self.push(Tensor::from_parts(vec![batch, out], y), Op::Linear { x, w, b }))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), NnError> {
        if self.shape(a) != self.shape(b) {
            return Err(mismatch(op, format!("{:?}", self.shape(a)), format!("{:?}", self.shape(b))));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape("add", a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::from_parts(shape, data), Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NnError> {
        self.same_shape("mul", a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let shape = self.shape(a).to_vec();
        Ok(self.push(Tensor::from_parts(shape, data), Op::Mul(a, b)))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(a).map(f);
        self.push(value, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, elu_scalar, Op::Elu(a))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.unary(a, |x| x.max(0.0), Op::Relu(a))
    }

    /// Concatenates 2-D tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let first = parts.first().ok_or(NnError::EmptyInput("concat_cols"))?;
        let rows = self.shape(*first)[0];
        let mut total = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != rows {
                return Err(mismatch("concat_cols", format!("({rows}, _)"), format!("{s:?}")));
            }
            total += s[1];
        }
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for &p in parts {
                out.extend_from_slice(self.value(p).row(r));
            }
        }
        Ok(self.push(Tensor::from_parts(vec![rows, total], out), Op::ConcatCols(parts.to_vec())))
    }

    /// Concatenates along the leading axis; trailing dimensions must agree.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NnError> {
        let first = parts.first().ok_or(NnError::EmptyInput("concat_rows"))?;
        let tail = self.shape(*first)[1..].to_vec();
        let mut lead = 0;
        let mut out = Vec::new();
        for &p in parts {
            let s = self.shape(p);
            if s[1..] != tail[..] {
                return Err(mismatch("concat_rows", format!("(_, {tail:?})"), format!("{s:?}")));
            }
            lead += s[0];
            out.extend_from_slice(self.data(p));
        }
        let mut shape = vec![lead];
        shape.extend(tail);
        Ok(self.push(Tensor::from_parts(shape, out), Op::ConcatRows(parts.to_vec())))
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var, NnError> {
        let s = self.shape(a);
        if s.len() != 2 || start + len > s[1] || len == 0 {
            return Err(mismatch("slice_cols", format!("2-D with at least {} columns", start + len), format!("{s:?}")));
        }
        let rows = s[0];
        let mut out = Vec::with_capacity(rows * len);
        for r in 0..rows {
            out.extend_from_slice(&self.value(a).row(r)[start..start + len]);
        }
        Ok(self.push(Tensor::from_parts(vec![rows, len], out), Op::SliceCols { a, start }))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, NnError> {
        let value = self.value(a).clone().reshape(shape)?;
        Ok(self.push(value, Op::Reshape(a)))
    }

    /// Stacks `T` tensors of shape (batch, h) into (batch, T, h).
    pub fn stack_steps(&mut self, steps: &[Var]) -> Result<Var, NnError> {
        let first = steps.first().ok_or(NnError::EmptyInput("stack_steps"))?;
        let s0 = self.shape(*first).to_vec();
        if s0.len() != 2 {
            return Err(mismatch("stack_steps", "(batch, h)", format!("{s0:?}")));
        }
        let (batch, h) = (s0[0], s0[1]);
        let t = steps.len();
        let mut out = vec![0.0; batch * t * h];
        for (k, &v) in steps.iter().enumerate() {
            if self.shape(v) != s0.as_slice() {
                return Err(mismatch("stack_steps", format!("{s0:?}"), format!("{:?}", self.shape(v))));
            }
            for b in 0..batch {
                out[(b * t + k) * h..(b * t + k + 1) * h].copy_from_slice(self.value(v).row(b));
            }
        }
        Ok(self.push(Tensor::from_parts(vec![batch, t, h], out), Op::StackSteps(steps.to_vec())))
    }

    /// Valid cross-correlation with stride 1. `x`: (batch, c, h, w);
    /// `k`: (kernels, c, kh, kw); `b`: (kernels).
    pub fn conv2d(&mut self, x: Var, k: Var, b: Var) -> Result<Var, NnError> {
        let xs = self.shape(x).to_vec();
        let ks = self.shape(k).to_vec();
        if xs.len() != 4 || ks.len() != 4 || xs[1] != ks[1] {
            return Err(mismatch("conv2d", format!("(batch, {}, h, w) input", ks.get(1).copied().unwrap_or(0)), format!("{xs:?}")));
        }
        if self.shape(b) != [ks[0]] {
            return Err(mismatch("conv2d", format!("bias [{}]", ks[0]), format!("{:?}", self.shape(b))));
        }
        let (batch, ch, ih, iw) = (xs[0], xs[1], xs[2], xs[3]);
        let (nk, kh, kw) = (ks[0], ks[2], ks[3]);
        if ih < kh || iw < kw {
            return Err(NnError::InputTooSmall {
                rows: ih,
                cols: iw,
                kernel: (kh, kw),
            });
        }
        let (oh, ow) = (ih - kh + 1, iw - kw + 1);
        let (xd, kd, bd) = (self.data(x), self.data(k), self.data(b));
        let mut out = vec![0.0; batch * nk * oh * ow];
        for bi in 0..batch {
            for ki in 0..nk {
                let o = &mut out[(bi * nk + ki) * oh * ow..(bi * nk + ki + 1) * oh * ow];
                o.iter_mut().for_each(|v| *v = bd[ki]);
                for c in 0..ch {
                    let plane = &xd[(bi * ch + c) * ih * iw..(bi * ch + c + 1) * ih * iw];
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let wv = kd[((ki * ch + c) * kh + dy) * kw + dx];
                            for oy in 0..oh {
                                let src = &plane[(oy + dy) * iw + dx..(oy + dy) * iw + dx + ow];
                                let dst = &mut o[oy * ow..(oy + 1) * ow];
                                for (d, s) in dst.iter_mut().zip(src) {
                                    *d += wv * s;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(self.push(Tensor::from_parts(vec![batch, nk, oh, ow], out), Op::Conv2d { x, k, b }))
    }

    /// Mean squared error over all elements, as a 1-element tensor.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var, NnError> {
        if self.value(pred).len() != self.value(target).len() {
            return Err(mismatch("mse", format!("{} elements", self.value(pred).len()), format!("{}", self.value(target).len())));
        }
        let loss = crate::loss::mse_loss(self.data(pred), self.data(target))?;
        Ok(self.push(Tensor::scalar(loss), Op::Mse { pred, target }))
    }

    /// `Σ wᵢ·termᵢ` over scalar terms.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var, NnError> {
        let mut total = 0.0;
        for &(v, w) in terms {
            if self.value(v).len() != 1 {
                return Err(NnError::NotScalar(self.shape(v).to_vec()));
            }
            total += w * self.data(v)[0];
        }
        Ok(self.push(Tensor::scalar(total), Op::WeightedSum(terms.to_vec())))
    }

    /// Reverse pass from a scalar node. Gradients of every node reachable
    /// from `loss` become available through [`Graph::grad`].
    pub fn backward(&mut self, loss: Var) -> Result<(), NnError> {
        if loss.0 >= self.nodes.len() {
            return Err(NnError::NoForward);
        }
        if self.value(loss).len() != 1 {
            return Err(NnError::NotScalar(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(gy) = grads[i].take() else { continue };
            self.propagate(i, &gy, &mut grads);
            grads[i] = Some(gy);
        }
        self.grads = Some(grads);
        Ok(())
    }

    fn propagate(&self, i: usize, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        fn acc<'a>(grads: &'a mut [Option<Vec<f64>>], v: Var, len: usize) -> &'a mut Vec<f64> {
            grads[v.0].get_or_insert_with(|| vec![0.0; len])
        }
        let node = &self.nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Linear { x, w, b } => {
                let (batch, inp) = (self.shape(*x)[0], self.shape(*x)[1]);
                let outd = self.shape(*w)[0];
                let gx = acc(grads, *x, batch * inp);
                gemm(batch, outd, inp, gy, outd, 1, self.data(*w), inp, 1, gx, 1.0);
                let gw = acc(grads, *w, outd * inp);
                gemm(outd, batch, inp, gy, 1, outd, self.data(*x), inp, 1, gw, 1.0);
                if let Some(b) = b {
                    let gb = acc(grads, *b, outd);
                    for row in gy.chunks(outd) {
                        for (g, r) in gb.iter_mut().zip(row) {
                            *g += r;
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    let g = acc(grads, *v, gy.len());
                    g.iter_mut().zip(gy).for_each(|(g, d)| *g += d);
                }
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.data(*a), self.data(*b));
                let ga = acc(grads, *a, gy.len());
                for ((g, d), y) in ga.iter_mut().zip(gy).zip(bd) {
                    *g += d * y;
                }
                let gb = acc(grads, *b, gy.len());
                for ((g, d), x) in gb.iter_mut().zip(gy).zip(ad) {
                    *g += d * x;
                }
            }
            Op::Sigmoid(a) => {
                let g = acc(grads, *a, gy.len());
                for ((g, d), s) in g.iter_mut().zip(gy).zip(out) {
                    *g += d * s * (1.0 - s);
                }
            }
            Op::Tanh(a) => {
                let g = acc(grads, *a, gy.len());
                for ((g, d), t) in g.iter_mut().zip(gy).zip(out) {
                    *g += d * (1.0 - t * t);
                }
            }
            Op::Elu(a) => {
                let xd = self.data(*a);
                let g = acc(grads, *a, gy.len());
                for (((g, d), y), x) in g.iter_mut().zip(gy).zip(out).zip(xd) {
                    *g += if *x > 0.0 { *d } else { d * (y + 1.0) };
                }
            }
            Op::Relu(a) => {
                let xd = self.data(*a);
                let g = acc(grads, *a, gy.len());
                for ((g, d), x) in g.iter_mut().zip(gy).zip(xd) {
                    if *x > 0.0 {
                        *g += d;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let rows = node.value.shape()[0];
                let total = node.value.shape()[1];
                let mut off = 0;
                for p in parts {
                    let w = self.shape(*p)[1];
                    let g = acc(grads, *p, rows * w);
                    for r in 0..rows {
                        let src = &gy[r * total + off..r * total + off + w];
                        g[r * w..(r + 1) * w].iter_mut().zip(src).for_each(|(g, d)| *g += d);
                    }
                    off += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = self.value(*p).len();
                    let g = acc(grads, *p, n);
                    g.iter_mut().zip(&gy[off..off + n]).for_each(|(g, d)| *g += d);
                    off += n;
                }
            }
            Op::SliceCols { a, start } => {
                let (rows, cols) = (self.shape(*a)[0], self.shape(*a)[1]);
                let len = node.value.shape()[1];
                let g = acc(grads, *a, rows * cols);
                for r in 0..rows {
                    let dst = &mut g[r * cols + start..r * cols + start + len];
                    dst.iter_mut().zip(&gy[r * len..(r + 1) * len]).for_each(|(g, d)| *g += d);
                }
            }
            Op::Reshape(a) => {
                let g = acc(grads, *a, gy.len());
                g.iter_mut().zip(gy).for_each(|(g, d)| *g += d);
            }
            Op::StackSteps(steps) => {
                let s = node.value.shape();
                let (batch, t, h) = (s[0], s[1], s[2]);
                for (k, v) in steps.iter().enumerate() {
                    let g = acc(grads, *v, batch * h);
                    for b in 0..batch {
                        let src = &gy[(b * t + k) * h..(b * t + k + 1) * h];
                        g[b * h..(b + 1) * h].iter_mut().zip(src).for_each(|(g, d)| *g += d);
                    }
                }
            }
            Op::Conv2d { x, k, b } => self.conv2d_backward(node, *x, *k, *b, gy, grads),
            Op::Mse { pred, target } => {
                let (pd, td) = (self.data(*pred), self.data(*target));
                let scale = 2.0 * gy[0] / pd.len() as f64;
                let gp = acc(grads, *pred, pd.len());
                for ((g, p), t) in gp.iter_mut().zip(pd).zip(td) {
                    *g += scale * (p - t);
                }
                let gt = acc(grads, *target, td.len());
                for ((g, p), t) in gt.iter_mut().zip(pd).zip(td) {
                    *g -= scale * (p - t);
                }
            }
            Op::WeightedSum(terms) => {
                for (v, w) in terms {
                    acc(grads, *v, 1)[0] += w * gy[0];
                }
            }
        }
    }

    fn conv2d_backward(&self, node: &Node, x: Var, k: Var, b: Var, gy: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let xs = self.shape(x);
        let ks = self.shape(k);
        let (batch, ch, ih, iw) = (xs[0], xs[1], xs[2], xs[3]);
        let (nk, kh, kw) = (ks[0], ks[2], ks[3]);
        let (oh, ow) = (node.value.shape()[2], node.value.shape()[3]);
        let (xd, kd) = (self.data(x), self.data(k));

        let mut gk = vec![0.0; kd.len()];
        let mut gx = vec![0.0; xd.len()];
        let mut gb = vec![0.0; nk];
        for bi in 0..batch {
            for ki in 0..nk {
                let go = &gy[(bi * nk + ki) * oh * ow..(bi * nk + ki + 1) * oh * ow];
                gb[ki] += go.iter().sum::<f64>();
                for c in 0..ch {
                    let base = (bi * ch + c) * ih * iw;
                    for dy in 0..kh {
                        for dx in 0..kw {
                            let widx = ((ki * ch + c) * kh + dy) * kw + dx;
                            let wv = kd[widx];
                            let mut gw = 0.0;
                            for oy in 0..oh {
                                let off = base + (oy + dy) * iw + dx;
                                let grow = &go[oy * ow..(oy + 1) * ow];
                                let src = &xd[off..off + ow];
                                gw += grow.iter().zip(src).map(|(g, s)| g * s).sum::<f64>();
                                let dst = &mut gx[off..off + ow];
                                for (d, g) in dst.iter_mut().zip(grow) {
                                    *d += wv * g;
                                }
                            }
                            gk[widx] += gw;
                        }
                    }
                }
            }
        }
        for (v, g) in [(x, gx), (k, gk), (b, gb)] {
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; g.len()]);
            slot.iter_mut().zip(&g).for_each(|(s, d)| *s += d);
        }
    }

    /// Gradient of the last `backward` loss with respect to `v`; zeros when
    /// `v` does not influence the loss.
    pub fn grad(&self, v: Var) -> Result<Vec<f64>, NnError> {
        let grads = self.grads.as_ref().ok_or(NnError::NoGradient)?;
        Ok(grads
            .get(v.0)
            .and_then(|g| g.clone())
            .unwrap_or_else(|| vec![0.0; self.value(v).len()]))
    }

    /// Gradients of all registered parameters, in registration order.
    pub fn param_grads(&self) -> Result<Vec<Vec<f64>>, NnError> {
        self.params.iter().map(|&v| self.grad(v)).collect()
    }
}
