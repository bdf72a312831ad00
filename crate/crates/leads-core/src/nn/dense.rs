//! Fully connected networks with explicit parameter storage.

use ndarray::Array2;
use rand::Rng;

use crate::nn::tape::{Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Linear,
    Relu,
    Tanh,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Linear),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }

    fn apply(self, x: Array2<f64>) -> Array2<f64> {
        match self {
            Activation::Linear => x,
            Activation::Relu => x.mapv(|v| v.max(0.0)),
            Activation::Tanh => x.mapv(f64::tanh),
        }
    }

    fn apply_tape(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Linear => x,
            Activation::Relu => tape.relu(x),
            Activation::Tanh => tape.tanh(x),
        }
    }
}

/// One affine layer; weights are (in, out), bias a single row.
#[derive(Debug, Clone)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array2<f64>,
    pub act: Activation,
}

impl Layer {
    /// Fan-in scaled uniform weights, zero bias.
    pub fn new(in_dim: usize, out_dim: usize, act: Activation, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Layer {
            w: Array2::from_shape_fn((in_dim, out_dim), |_| rng.random_range(-bound..bound)),
            b: Array2::zeros((1, out_dim)),
            act,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.w.ncols()
    }

    /// Affine part followed by the activation.
    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        self.act.apply(x.dot(&self.w) + &self.b)
    }

    /// Push this layer's parameters onto a tape; trainable or frozen.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> [Var; 2] {
        if trainable {
            [tape.param(self.w.clone()), tape.param(self.b.clone())]
        } else {
            [tape.constant(self.w.clone()), tape.constant(self.b.clone())]
        }
    }

    pub fn forward_tape(&self, tape: &mut Tape, vars: [Var; 2], x: Var) -> Var {
        let h = tape.matmul(x, vars[0]);
        let h = tape.add_row(h, vars[1]);
        self.act.apply_tape(tape, h)
    }

    pub fn n_params(&self) -> usize {
        self.w.len() + self.b.len()
    }
}

/// A stack of layers.
#[derive(Debug, Clone)]
pub struct DenseNet {
    pub layers: Vec<Layer>,
}

impl DenseNet {
    /// `dims` lists the input dimension followed by each layer's width;
    /// `acts` gives one activation per layer.
    pub fn new(dims: &[usize], acts: &[Activation], rng: &mut impl Rng) -> Self {
        assert_eq!(dims.len(), acts.len() + 1, "one activation per layer");
        let layers = dims
            .windows(2)
            .zip(acts)
            .map(|(d, act)| Layer::new(d[0], d[1], *act, rng))
            .collect();
        DenseNet { layers }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        let mut h = self.layers[0].forward(x);
        for layer in &self.layers[1..] {
            h = layer.forward(&h);
        }
        h
    }

    /// Parameters on a tape, `[w0, b0, w1, b1, ...]`.
    pub fn bind(&self, tape: &mut Tape, trainable: bool) -> Vec<Var> {
        self.layers
            .iter()
            .flat_map(|l| l.bind(tape, trainable))
            .collect()
    }

    pub fn forward_tape(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Var {
        assert_eq!(vars.len(), 2 * self.layers.len());
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward_tape(tape, [vars[2 * i], vars[2 * i + 1]], h);
        }
        h
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(Layer::n_params).sum()
    }
}

/// Copy a network's (or any parameter group's) values into a flat vector.
/// The order is the bind order: weights then bias, layer by layer.
pub fn flatten_into(out: &mut Vec<f64>, arrays: &[&Array2<f64>]) {
    for a in arrays {
        out.extend(a.iter().copied());
    }
}

/// Inverse of `flatten_into` for mutable parameter groups.
pub fn assign_from_flat(flat: &[f64], arrays: &mut [&mut Array2<f64>]) {
    let mut at = 0;
    for a in arrays.iter_mut() {
        for v in a.iter_mut() {
            *v = flat[at];
            at += 1;
        }
    }
    assert_eq!(at, flat.len(), "flat parameter length mismatch");
}

impl DenseNet {
    pub fn param_refs(&self) -> Vec<&Array2<f64>> {
        self.layers.iter().flat_map(|l| [&l.w, &l.b]).collect()
    }

    pub fn param_refs_mut(&mut self) -> Vec<&mut Array2<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.w, &mut l.b])
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        flatten_into(&mut out, &self.param_refs());
        out
    }

    pub fn assign(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.n_params());
        assign_from_flat(flat, &mut self.param_refs_mut());
    }
}

/// Gradients for bound parameters flattened in bind order; parameters the
/// loss never touched contribute zeros.
pub fn flatten_grads(
    grads: &crate::nn::tape::Gradients,
    vars: &[Var],
    tape: &Tape,
) -> Vec<f64> {
    let mut out = Vec::new();
    for v in vars {
        match grads.wrt(*v) {
            Some(g) => out.extend(g.iter().copied()),
            None => out.extend(std::iter::repeat_n(0.0, tape.value(*v).len())),
        }
    }
    out
}
