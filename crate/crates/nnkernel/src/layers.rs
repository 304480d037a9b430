//! Parameter containers for the supported layers, their seeded
//! initialisation, and single-example forward helpers.

use rand::Rng;

use crate::graph::{elu_scalar, Graph, Var};
use crate::{NnError, Tensor};

/// Glorot-uniform draw in `±sqrt(6/(fan_in+fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, shape: &[usize], fan_in: usize, fan_out: usize) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::new(shape, data).expect("shape is positive by construction")
}

/// Four-gate LSTM: input, forget, output and candidate gates, each with a
/// weight matrix over the concatenated `[x, h]` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub w_input: Tensor,
    pub w_forget: Tensor,
    pub w_output: Tensor,
    pub w_cell: Tensor,
    pub b_input: Tensor,
    pub b_forget: Tensor,
    pub b_output: Tensor,
    pub b_cell: Tensor,
}

/// Graph handles for a bound [`LstmParams`].
#[derive(Debug, Clone, Copy)]
pub struct LstmVars {
    hidden_dim: usize,
    weights: Var,
    bias: Var,
}

impl LstmParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, input_dim: usize, hidden_dim: usize) -> Self {
        let cols = input_dim + hidden_dim;
        let mut w = || glorot_uniform(rng, &[hidden_dim, cols], cols, hidden_dim);
        let (w_input, w_forget, w_output, w_cell) = (w(), w(), w(), w());
        let b = || Tensor::zeros(&[hidden_dim]);
        Self {
            input_dim,
            hidden_dim,
            w_input,
            w_forget,
            w_output,
            w_cell,
            b_input: b(),
            b_forget: b(),
            b_output: b(),
            b_cell: b(),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Tensor::zeros(&[hidden_dim, input_dim + hidden_dim]);
        let b = || Tensor::zeros(&[hidden_dim]);
        Self {
            input_dim,
            hidden_dim,
            w_input: w(),
            w_forget: w(),
            w_output: w(),
            w_cell: w(),
            b_input: b(),
            b_forget: b(),
            b_output: b(),
            b_cell: b(),
        }
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![
            &self.w_input,
            &self.w_forget,
            &self.w_output,
            &self.w_cell,
            &self.b_input,
            &self.b_forget,
            &self.b_output,
            &self.b_cell,
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.w_input,
            &mut self.w_forget,
            &mut self.w_output,
            &mut self.w_cell,
            &mut self.b_input,
            &mut self.b_forget,
            &mut self.b_output,
            &mut self.b_cell,
        ]
    }

    /// Registers the eight tensors on `g` (in [`LstmParams::tensors`] order)
    /// and stacks them for a single fused gate product per step.
    pub fn bind(&self, g: &mut Graph) -> Result<LstmVars, NnError> {
        let ws: Vec<Var> = [&self.w_input, &self.w_forget, &self.w_output, &self.w_cell]
            .into_iter()
            .map(|t| g.param(t))
            .collect();
        let bs: Vec<Var> = [&self.b_input, &self.b_forget, &self.b_output, &self.b_cell]
            .into_iter()
            .map(|t| g.param(t))
            .collect();
        Ok(LstmVars {
            hidden_dim: self.hidden_dim,
            weights: g.concat_rows(&ws)?,
            bias: g.concat_rows(&bs)?,
        })
    }
}

impl LstmVars {
    /// Runs the recurrence over `steps` (each `(batch, input_dim)`) and
    /// returns every hidden state.
    pub fn run(&self, g: &mut Graph, steps: &[Var], h0: Var, c0: Var) -> Result<Vec<Var>, NnError> {
        let hd = self.hidden_dim;
        let (mut h, mut c) = (h0, c0);
        let mut out = Vec::with_capacity(steps.len());
        for &x in steps {
            let xh = g.concat_cols(&[x, h])?;
            let z = g.linear(xh, self.weights, Some(self.bias))?;
            let zi = g.slice_cols(z, 0, hd)?;
            let zf = g.slice_cols(z, hd, hd)?;
            let zo = g.slice_cols(z, 2 * hd, hd)?;
            let zc = g.slice_cols(z, 3 * hd, hd)?;
            let i = g.sigmoid(zi);
            let f = g.sigmoid(zf);
            let o = g.sigmoid(zo);
            let cand = g.tanh(zc);
            let keep = g.mul(f, c)?;
            let write = g.mul(i, cand)?;
            c = g.add(keep, write)?;
            let squashed = g.tanh(c);
            h = g.mul(o, squashed)?;
            out.push(h);
        }
        Ok(out)
    }
}

/// Valid-padding, stride-1 convolution bank.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dParams {
    pub in_channels: usize,
    pub num_kernels: usize,
    pub kernel_size: (usize, usize),
    pub stride: (usize, usize),
    /// Shape `(num_kernels, in_channels, kh, kw)`.
    pub kernels: Tensor,
    pub biases: Tensor,
}

#[derive(Debug, Clone, Copy)]
pub struct Conv2dVars {
    kernels: Var,
    biases: Var,
}

impl Conv2dParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, in_channels: usize, num_kernels: usize) -> Self {
        let area = 9;
        Self {
            in_channels,
            num_kernels,
            kernel_size: (3, 3),
            stride: (1, 1),
            kernels: glorot_uniform(rng, &[num_kernels, in_channels, 3, 3], in_channels * area, num_kernels * area),
            biases: Tensor::zeros(&[num_kernels]),
        }
    }

    /// Builds from explicit `(num_kernels, in_channels, 3, 3)` kernels.
    pub fn from_kernels(kernels: Tensor, biases: Tensor) -> Result<Self, NnError> {
        let s = kernels.shape().to_vec();
        if s.len() != 4 || biases.shape() != [s[0]] {
            return Err(NnError::ShapeMismatch {
                op: "conv2d",
                expected: "kernels (k, c, kh, kw) with k biases".into(),
                got: format!("{s:?} / {:?}", biases.shape()),
            });
        }
        Ok(Self {
            in_channels: s[1],
            num_kernels: s[0],
            kernel_size: (s[2], s[3]),
            stride: (1, 1),
            kernels,
            biases,
        })
    }

    pub fn output_dims(&self, in_rows: usize, in_cols: usize) -> Option<(usize, usize)> {
        let (kh, kw) = self.kernel_size;
        (in_rows >= kh && in_cols >= kw).then(|| (in_rows - kh + 1, in_cols - kw + 1))
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.kernels, &self.biases]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernels, &mut self.biases]
    }

    pub fn bind(&self, g: &mut Graph) -> Conv2dVars {
        Conv2dVars {
            kernels: g.param(&self.kernels),
            biases: g.param(&self.biases),
        }
    }
}

impl Conv2dVars {
    pub fn run(&self, g: &mut Graph, x: Var) -> Result<Var, NnError> {
        g.conv2d(x, self.kernels, self.biases)
    }
}

/// Fully-connected layer `y = W·x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct FcParams {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Tensor,
    pub biases: Tensor,
}

#[derive(Debug, Clone, Copy)]
pub struct FcVars {
    weights: Var,
    biases: Var,
}

impl FcParams {
    pub fn init<R: Rng + ?Sized>(rng: &mut R, in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: glorot_uniform(rng, &[out_dim, in_dim], in_dim, out_dim),
            biases: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: Tensor::zeros(&[out_dim, in_dim]),
            biases: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn from_weights(weights: Tensor, biases: Tensor) -> Result<Self, NnError> {
        let s = weights.shape().to_vec();
        if s.len() != 2 || biases.shape() != [s[0]] {
            return Err(NnError::ShapeMismatch {
                op: "fc",
                expected: "weights (out, in) with out biases".into(),
                got: format!("{s:?} / {:?}", biases.shape()),
            });
        }
        Ok(Self {
            in_dim: s[1],
            out_dim: s[0],
            weights,
            biases,
        })
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        vec![&self.weights, &self.biases]
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights, &mut self.biases]
    }

    pub fn bind(&self, g: &mut Graph) -> FcVars {
        FcVars {
            weights: g.param(&self.weights),
            biases: g.param(&self.biases),
        }
    }
}

impl FcVars {
    pub fn run(&self, g: &mut Graph, x: Var) -> Result<Var, NnError> {
        g.linear(x, self.weights, Some(self.biases))
    }
}

/// Elementwise `x` for `x > 0`, `exp(x) − 1` otherwise.
pub fn elu(x: &Tensor) -> Tensor {
    x.map(elu_scalar)
}

/// Runs an LSTM over `seq` of shape `(T, input_dim)` from `(h0, c0)` and
/// returns the `(T, hidden_dim)` hidden states.
pub fn lstm_forward(params: &LstmParams, seq: &Tensor, init_state: (&Tensor, &Tensor)) -> Result<Tensor, NnError> {
    let s = seq.shape();
    if s.len() != 2 || s[1] != params.input_dim {
        return Err(NnError::ShapeMismatch {
            op: "lstm_forward",
            expected: format!("(T, {})", params.input_dim),
            got: format!("{s:?}"),
        });
    }
    let hd = params.hidden_dim;
    for t in [init_state.0, init_state.1] {
        if t.len() != hd {
            return Err(NnError::ShapeMismatch {
                op: "lstm_forward",
                expected: format!("initial state of {hd}"),
                got: format!("{}", t.len()),
            });
        }
    }
    let steps = s[0];
    if steps == 0 {
        return Ok(Tensor::zeros(&[0, hd]));
    }
    let mut g = Graph::new();
    let vars = params.bind(&mut g)?;
    let xs: Vec<Var> = (0..steps)
        .map(|t| g.input(Tensor::new(&[1, params.input_dim], seq.row(t).to_vec()).expect("row")))
        .collect();
    let h0 = g.input(init_state.0.clone().reshape(&[1, hd])?);
    let c0 = g.input(init_state.1.clone().reshape(&[1, hd])?);
    let hs = vars.run(&mut g, &xs, h0, c0)?;
    let data = hs.iter().flat_map(|&h| g.value(h).data().to_vec()).collect();
    Tensor::new(&[steps, hd], data)
}

/// Convolves a `(rows, cols)` input (or `(channels, rows, cols)`) and
/// returns `(num_kernels, rows−kh+1, cols−kw+1)`.
pub fn conv2d_forward(params: &Conv2dParams, input: &Tensor) -> Result<Tensor, NnError> {
    let s = input.shape();
    let (ch, rows, cols) = match *s {
        [r, c] => (1, r, c),
        [ch, r, c] => (ch, r, c),
        _ => {
            return Err(NnError::ShapeMismatch {
                op: "conv2d_forward",
                expected: "(rows, cols) or (channels, rows, cols)".into(),
                got: format!("{s:?}"),
            })
        }
    };
    let mut g = Graph::new();
    let vars = params.bind(&mut g);
    let x = g.input(input.clone().reshape(&[1, ch, rows, cols])?);
    let y = vars.run(&mut g, x)?;
    let out = g.value(y).clone();
    let os = out.shape()[1..].to_vec();
    out.reshape(&os)
}

pub fn fc_forward(params: &FcParams, input: &Tensor) -> Result<Tensor, NnError> {
    if input.len() != params.in_dim {
        return Err(NnError::ShapeMismatch {
            op: "fc_forward",
            expected: format!("{} inputs", params.in_dim),
            got: format!("{}", input.len()),
        });
    }
    let mut g = Graph::new();
    let vars = params.bind(&mut g);
    let x = g.input(input.clone().reshape(&[1, params.in_dim])?);
    let y = vars.run(&mut g, x)?;
    Tensor::new(&[params.out_dim], g.value(y).data().to_vec())
}
