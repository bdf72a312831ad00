//! Reverse-mode automatic differentiation over f64 matrices.
//!
//! A `Tape` records a DAG of matrix operations; `backward` walks it once and
//! accumulates gradients for every node that transitively depends on a
//! parameter. Values are batched `Array2`s so the heavy lifting stays in
//! GEMM calls rather than per-scalar graph nodes.

use ndarray::{Array2, Axis};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    /// Row-broadcast add: (n, d) + (1, d).
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// a * x + b elementwise; only the scale matters for the gradient.
    Affine(Var, f64),
    Relu(Var),
    Tanh(Var),
    Exp(Var),
    Ln(Var),
    Softplus(Var),
    Clamp(Var, f64, f64),
    ConcatCols(Vec<Var>),
    /// Row-wise sum: (n, d) -> (n, 1).
    SumCols(Var),
    /// Mean of all entries: -> (1, 1).
    MeanAll(Var),
}

struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

/// Numerically stable log(1 + exp(x)).
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to tape nodes.
pub struct Gradients {
    grads: Vec<Option<Array2<f64>>>,
}

impl Gradients {
    /// Gradient at `v`, if `v` influences the differentiated scalar and
    /// tracks gradients.
    pub fn wrt(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        assert_eq!(val.shape(), [1, 1], "scalar() needs a 1x1 node");
        val[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Input that no gradient flows into.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Input that accumulates a gradient.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.ncols(), vb.nrows(), "matmul inner dimensions");
        let value = va.dot(vb);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, Op::MatMul(a, b), rg)
    }

    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let (vx, vr) = (self.value(x), self.value(row));
        assert_eq!(vr.nrows(), 1, "add_row broadcasts a single row");
        assert_eq!(vx.ncols(), vr.ncols(), "add_row widths");
        let value = vx + vr;
        let rg = self.rg(x) || self.rg(row);
        self.push(value, Op::AddRow(x, row), rg)
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(&Array2<f64>, &Array2<f64>) -> Array2<f64>, op: Op) -> Var {
        let (va, vb) = (self.value(a), self.value(b));
        assert_eq!(va.shape(), vb.shape(), "elementwise shapes");
        let value = f(va, vb);
        let rg = self.rg(a) || self.rg(b);
        self.push(value, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn affine(&mut self, x: Var, scale: f64, shift: f64) -> Var {
        let value = self.value(x).mapv(|v| scale * v + shift);
        let rg = self.rg(x);
        self.push(value, Op::Affine(x, scale), rg)
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.value(x).mapv(f);
        let rg = self.rg(x);
        self.push(value, op, rg)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, Op::Exp(x))
    }

    pub fn ln(&mut self, x: Var) -> Var {
        self.unary(x, f64::ln, Op::Ln(x))
    }

    pub fn softplus_node(&mut self, x: Var) -> Var {
        self.unary(x, softplus, Op::Softplus(x))
    }

    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        assert!(lo < hi);
        self.unary(x, |v| v.clamp(lo, hi), Op::Clamp(x, lo, hi))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        assert!(!parts.is_empty());
        let n = self.value(parts[0]).nrows();
        let total: usize = parts.iter().map(|p| self.value(*p).ncols()).sum();
        let mut value = Array2::zeros((n, total));
        let mut at = 0;
        for p in parts {
            let vp = self.value(*p);
            assert_eq!(vp.nrows(), n, "concat_cols row counts");
            value
                .slice_mut(ndarray::s![.., at..at + vp.ncols()])
                .assign(vp);
            at += vp.ncols();
        }
        let rg = parts.iter().any(|p| self.rg(*p));
        self.push(value, Op::ConcatCols(parts.to_vec()), rg)
    }

    pub fn sum_cols(&mut self, x: Var) -> Var {
        let value = self
            .value(x)
            .sum_axis(Axis(1))
            .insert_axis(Axis(1))
            .to_owned();
        let rg = self.rg(x);
        self.push(value, Op::SumCols(x), rg)
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let v = self.value(x);
        let mean = v.sum() / v.len() as f64;
        let rg = self.rg(x);
        self.push(Array2::from_elem((1, 1), mean), Op::MeanAll(x), rg)
    }

    /// Gradients of the 1x1 node `loss` with respect to every
    /// gradient-tracking node at or below it.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(self.value(loss).shape(), [1, 1], "backward needs a scalar");
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Array2::from_elem((1, 1), 1.0));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].needs_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.accumulate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Gradients { grads }
    }

    fn bump(&self, grads: &mut [Option<Array2<f64>>], v: Var, delta: Array2<f64>) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(g) => *g += &delta,
            slot @ None => *slot = Some(delta),
        }
    }

    fn accumulate(&self, idx: usize, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        match &self.nodes[idx].op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    self.bump(grads, *a, g.dot(&self.value(*b).t()));
                }
                if self.rg(*b) {
                    self.bump(grads, *b, self.value(*a).t().dot(g));
                }
            }
            Op::AddRow(x, row) => {
                self.bump(grads, *x, g.clone());
                if self.rg(*row) {
                    let summed = g.sum_axis(Axis(0)).insert_axis(Axis(0)).to_owned();
                    self.bump(grads, *row, summed);
                }
            }
            Op::Add(a, b) => {
                self.bump(grads, *a, g.clone());
                self.bump(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.bump(grads, *a, g.clone());
                self.bump(grads, *b, -g);
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    self.bump(grads, *a, g * self.value(*b));
                }
                if self.rg(*b) {
                    self.bump(grads, *b, g * self.value(*a));
                }
            }
            Op::Affine(x, scale) => {
                self.bump(grads, *x, g * *scale);
            }
            Op::Relu(x) => {
                let mask = self.value(*x).mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
                self.bump(grads, *x, g * &mask);
            }
            Op::Tanh(x) => {
                let y = &self.nodes[idx].value;
                self.bump(grads, *x, g * &y.mapv(|t| 1.0 - t * t));
            }
            Op::Exp(x) => {
                self.bump(grads, *x, g * &self.nodes[idx].value);
            }
            Op::Ln(x) => {
                self.bump(grads, *x, g / self.value(*x));
            }
            Op::Softplus(x) => {
                let d = self.value(*x).mapv(sigmoid);
                self.bump(grads, *x, g * &d);
            }
            Op::Clamp(x, lo, hi) => {
                let mask = self
                    .value(*x)
                    .mapv(|v| if (*lo..=*hi).contains(&v) { 1.0 } else { 0.0 });
                self.bump(grads, *x, g * &mask);
            }
            Op::ConcatCols(parts) => {
                let mut at = 0;
                for p in parts {
                    let w = self.value(*p).ncols();
                    if self.rg(*p) {
                        let slice = g.slice(ndarray::s![.., at..at + w]).to_owned();
                        self.bump(grads, *p, slice);
                    }
                    at += w;
                }
            }
            Op::SumCols(x) => {
                let vx = self.value(*x);
                let mut d = Array2::zeros(vx.raw_dim());
                for j in 0..vx.ncols() {
                    d.column_mut(j).assign(&g.column(0));
                }
                self.bump(grads, *x, d);
            }
            Op::MeanAll(x) => {
                let vx = self.value(*x);
                let scale = g[[0, 0]] / vx.len() as f64;
                self.bump(grads, *x, Array2::from_elem(vx.raw_dim(), scale));
            }
        }
    }
}
