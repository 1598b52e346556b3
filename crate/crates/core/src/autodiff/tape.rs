//! Define-by-run tape. Each op appends a node holding its value; backward
//! walks the nodes in reverse and accumulates gradients. Gradients for
//! parameters go straight into a [`GradBuffer`].

use rand::Rng;

use super::tensor::gemm;
use super::{AutodiffError, GradBuffer, ParamId, ParamStore, Tensor};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    /// `a @ b` viewed as `m x k` times `k x n`.
    MatMul(usize, usize, [usize; 3]),
    /// `a @ b^T` viewed as `m x k` times `(n x k)^T`.
    MatMulT(usize, usize, [usize; 3]),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddBias(usize, usize),
    Scale(usize, f64),
    ScaleBy(usize, usize),
    Concat(Vec<usize>),
    Slice(usize, usize),
    Reshape(usize),
    Sum(usize),
    Softmax(usize),
    LogSoftmax(usize),
    Log(usize),
    Exp(usize),
    Tanh(usize),
    Sigmoid(usize),
    Elu(usize),
    Max(usize, usize),
    Min(usize, usize),
    Gather(usize, Vec<usize>),
    GatherRows(usize, Vec<usize>),
    Dropout(usize, Vec<f64>),
    MaxRows(usize, Vec<usize>),
    StackRows(Vec<usize>),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::MatMul(..) => "matmul",
            Op::MatMulT(..) => "matmul_t",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::AddBias(..) => "add_bias",
            Op::Scale(..) => "scale",
            Op::ScaleBy(..) => "scale_by",
            Op::Concat(_) => "concat",
            Op::Slice(..) => "slice",
            Op::Reshape(_) => "reshape",
            Op::Sum(_) => "sum",
            Op::Softmax(_) => "softmax",
            Op::LogSoftmax(_) => "log_softmax",
            Op::Log(_) => "log",
            Op::Exp(_) => "exp",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Elu(_) => "elu",
            Op::Max(..) => "max",
            Op::Min(..) => "min",
            Op::Gather(..) => "gather",
            Op::GatherRows(..) => "gather_rows",
            Op::Dropout(..) => "dropout",
            Op::MaxRows(..) => "max_rows",
            Op::StackRows(_) => "stack_rows",
        }
    }
}

struct Node {
    /// `None` for parameters, whose value lives in the store.
    value: Option<Tensor>,
    shape: Vec<usize>,
    op: Op,
    needs_grad: bool,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    done: bool,
    check_finite: bool,
}

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> AutodiffError {
    AutodiffError::Shape {
        op,
        left: a.to_vec(),
        right: b.to_vec(),
    }
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            done: false,
            check_finite: false,
        }
    }

    /// Fails any op whose output contains NaN or infinity.
    pub fn with_finite_checks(mut self, on: bool) -> Self {
        self.check_finite = on;
        self
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id),
            (None, _) => unreachable!("only parameters omit their value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    fn data(&self, i: usize) -> &[f64] {
        &self.value(Var(i)).data
    }

    fn push(&mut self, value: Tensor, op: Op, inputs: &[usize]) -> Result<Var, AutodiffError> {
        if self.check_finite && value.data.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NonFinite(op.name()));
        }
        let needs_grad = inputs.iter().any(|&i| self.nodes[i].needs_grad);
        self.nodes.push(Node {
            shape: value.shape.clone(),
            value: Some(value),
            op,
            needs_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            shape: t.shape.clone(),
            value: Some(t),
            op: Op::Input,
            needs_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, data: Vec<f64>) -> Var {
        self.input(Tensor::vector(data))
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        self.nodes.push(Node {
            shape: self.params.get(id).shape.clone(),
            value: None,
            op: Op::Param(id),
            needs_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    fn dims_left(shape: &[usize]) -> (usize, usize) {
        match shape {
            [k] => (1, *k),
            [m, k] => (*m, *k),
            _ => (0, 0),
        }
    }

    /// `a @ b`. Rank-1 `a` acts as a row vector, rank-1 `b` as a column.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k) = Self::dims_left(&sa);
        let (k2, n) = match sb.as_slice() {
            [k] => (*k, 1),
            [k, n] => (*k, *n),
            _ => (0, 0),
        };
        if k != k2 || k == 0 {
            return Err(shape_err("matmul", &sa, &sb));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.data(a.0), (k, 1), self.data(b.0), (n, 1), 0.0, &mut out);
        let shape = match (sa.len(), sb.len()) {
            (1, 1) => vec![1],
            (1, _) => vec![n],
            (_, 1) => vec![m],
            _ => vec![m, n],
        };
        self.push(Tensor::new(shape, out), Op::MatMul(a.0, b.0, [m, k, n]), &[a.0, b.0])
    }

    /// `a @ b^T`; with `b` of shape `[n, k]` this is a linear map.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let (m, k) = Self::dims_left(&sa);
        let (n, k2) = match sb.as_slice() {
            [k] => (1, *k),
            [n, k] => (*n, *k),
            _ => (0, 0),
        };
        if k != k2 || k == 0 {
            return Err(shape_err("matmul_t", &sa, &sb));
        }
        let mut out = vec![0.0; m * n];
        gemm(m, k, n, self.data(a.0), (k, 1), self.data(b.0), (1, k), 0.0, &mut out);
        let shape = match (sa.len(), sb.len()) {
            (1, 1) => vec![1],
            (1, _) => vec![n],
            (_, 1) => vec![m],
            _ => vec![m, n],
        };
        self.push(Tensor::new(shape, out), Op::MatMulT(a.0, b.0, [m, k, n]), &[a.0, b.0])
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, name: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Var, AutodiffError> {
        if self.shape(a) != self.shape(b) {
            return Err(shape_err(name, self.shape(a), self.shape(b)));
        }
        let data = self.data(a.0).iter().zip(self.data(b.0)).map(|(x, y)| f(*x, *y)).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::new(shape, data), op, &[a.0, b.0])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, Op::Add(a.0, b.0), "add", |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, Op::Sub(a.0, b.0), "sub", |x, y| x - y)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, Op::Mul(a.0, b.0), "mul", |x, y| x * y)
    }

    pub fn maximum(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, Op::Max(a.0, b.0), "max", f64::max)
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.zip(a, b, Op::Min(a.0, b.0), "min", f64::min)
    }

    /// Adds a rank-1 `b` to every row of `a`.
    pub fn add_bias(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let c = *sa.last().unwrap_or(&0);
        if sb.len() != 1 || sb[0] != c {
            return Err(shape_err("add_bias", &sa, &sb));
        }
        let bias = self.data(b.0);
        let data = self
            .data(a.0)
            .iter()
            .enumerate()
            .map(|(i, x)| x + bias[i % c])
            .collect();
        self.push(Tensor::new(sa, data), Op::AddBias(a.0, b.0), &[a.0, b.0])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, AutodiffError> {
        let data = self.data(a.0).iter().map(|x| x * s).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::new(shape, data), Op::Scale(a.0, s), &[a.0])
    }

    /// Multiplies `a` by the single value held in `s`.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var, AutodiffError> {
        if self.shape(s) != [1] {
            return Err(shape_err("scale_by", self.shape(a), self.shape(s)));
        }
        let k = self.data(s.0)[0];
        let data = self.data(a.0).iter().map(|x| x * k).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::new(shape, data), Op::ScaleBy(a.0, s.0), &[a.0, s.0])
    }

    /// Concatenates rank-1 vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, AutodiffError> {
        let mut data = Vec::new();
        for p in parts {
            if self.shape(*p).len() != 1 {
                return Err(shape_err("concat", self.shape(*p), &[]));
            }
            data.extend_from_slice(self.data(p.0));
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        self.push(Tensor::vector(data), Op::Concat(ids.clone()), &ids)
    }

    /// `a[start..start + len]` of a rank-1 vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var, AutodiffError> {
        let sa = self.shape(a).to_vec();
        if sa.len() != 1 || start + len > sa[0] {
            return Err(shape_err("slice", &sa, &[start, len]));
        }
        let data = self.data(a.0)[start..start + len].to_vec();
        self.push(Tensor::vector(data), Op::Slice(a.0, start), &[a.0])
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var, AutodiffError> {
        if shape.iter().product::<usize>() != self.value(a).len() || shape.is_empty() || shape.len() > 2 {
            return Err(shape_err("reshape", self.shape(a), &shape));
        }
        let data = self.data(a.0).to_vec();
        self.push(Tensor::new(shape, data), Op::Reshape(a.0), &[a.0])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let s = self.data(a.0).iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a.0), &[a.0])
    }

    fn rank1(&self, a: Var, op: &'static str) -> Result<(), AutodiffError> {
        if self.shape(a).len() != 1 || self.shape(a)[0] == 0 {
            return Err(shape_err(op, self.shape(a), &[]));
        }
        Ok(())
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.rank1(a, "softmax")?;
        let data = softmax(self.data(a.0));
        self.push(Tensor::vector(data), Op::Softmax(a.0), &[a.0])
    }

    pub fn log_softmax(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.rank1(a, "log_softmax")?;
        let x = self.data(a.0);
        let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + x.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        let data = x.iter().map(|v| v - lse).collect();
        self.push(Tensor::vector(data), Op::LogSoftmax(a.0), &[a.0])
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var, AutodiffError> {
        let data = self.data(a.0).iter().map(|x| f(*x)).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::new(shape, data), op, &[a.0])
    }

    pub fn log(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, Op::Log(a.0), f64::ln)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, Op::Exp(a.0), f64::exp)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, Op::Tanh(a.0), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, Op::Sigmoid(a.0), sigmoid)
    }

    pub fn elu(&mut self, a: Var) -> Result<Var, AutodiffError> {
        self.map(a, Op::Elu(a.0), |x| if x > 0.0 { x } else { x.exp_m1() })
    }

    /// Elements of a rank-1 vector at `idx`, in order.
    pub fn gather(&mut self, a: Var, idx: &[usize]) -> Result<Var, AutodiffError> {
        let sa = self.shape(a).to_vec();
        if sa.len() != 1 || idx.iter().any(|&i| i >= sa[0]) {
            return Err(AutodiffError::Index { op: "gather", shape: sa });
        }
        let x = self.data(a.0);
        let data = idx.iter().map(|&i| x[i]).collect();
        self.push(Tensor::vector(data), Op::Gather(a.0, idx.to_vec()), &[a.0])
    }

    /// Rows of a rank-2 tensor as a `[idx.len(), cols]` tensor.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var, AutodiffError> {
        let sa = self.shape(a).to_vec();
        if sa.len() != 2 || idx.iter().any(|&i| i >= sa[0]) {
            return Err(AutodiffError::Index { op: "gather_rows", shape: sa });
        }
        let c = sa[1];
        let x = self.data(a.0);
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            data.extend_from_slice(&x[i * c..(i + 1) * c]);
        }
        self.push(Tensor::new(vec![idx.len(), c], data), Op::GatherRows(a.0, idx.to_vec()), &[a.0])
    }

    /// One row of a rank-2 tensor as a rank-1 vector.
    pub fn row(&mut self, a: Var, i: usize) -> Result<Var, AutodiffError> {
        let r = self.gather_rows(a, &[i])?;
        let c = self.shape(r)[1];
        self.reshape(r, vec![c])
    }

    /// Inverted dropout with drop probability `p`.
    pub fn dropout<G: Rng + ?Sized>(&mut self, a: Var, p: f64, rng: &mut G) -> Result<Var, AutodiffError> {
        if p <= 0.0 {
            return Ok(a);
        }
        let keep = 1.0 - p;
        let mask: Vec<f64> = (0..self.value(a).len())
            .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let data = self.data(a.0).iter().zip(&mask).map(|(x, m)| x * m).collect();
        let shape = self.shape(a).to_vec();
        self.push(Tensor::new(shape, data), Op::Dropout(a.0, mask), &[a.0])
    }

    /// Column-wise maximum over the rows of a rank-2 tensor.
    pub fn max_rows(&mut self, a: Var) -> Result<Var, AutodiffError> {
        let sa = self.shape(a).to_vec();
        if sa.len() != 2 || sa[0] == 0 {
            return Err(shape_err("max_rows", &sa, &[]));
        }
        let (r, c) = (sa[0], sa[1]);
        let x = self.data(a.0);
        let mut arg = vec![0usize; c];
        for i in 1..r {
            for j in 0..c {
                if x[i * c + j] > x[arg[j] * c + j] {
                    arg[j] = i;
                }
            }
        }
        let data = (0..c).map(|j| x[arg[j] * c + j]).collect();
        self.push(Tensor::vector(data), Op::MaxRows(a.0, arg), &[a.0])
    }

    /// Stacks equal-length rank-1 vectors into a matrix.
    pub fn stack_rows(&mut self, rows: &[Var]) -> Result<Var, AutodiffError> {
        let first = rows.first().ok_or_else(|| shape_err("stack_rows", &[], &[]))?;
        let c = self.shape(*first).to_vec();
        let mut data = Vec::with_capacity(rows.len() * c[0]);
        for r in rows {
            if self.shape(*r) != c.as_slice() || c.len() != 1 {
                return Err(shape_err("stack_rows", &c, self.shape(*r)));
            }
            data.extend_from_slice(self.data(r.0));
        }
        let ids: Vec<usize> = rows.iter().map(|r| r.0).collect();
        self.push(Tensor::new(vec![rows.len(), c[0]], data), Op::StackRows(ids.clone()), &ids)
    }

    /// Backpropagates from a scalar `loss`, adding parameter gradients into
    /// `grads`. A tape supports a single backward pass.
    pub fn backward(&mut self, loss: Var, grads: &mut GradBuffer) -> Result<(), AutodiffError> {
        if self.done {
            return Err(AutodiffError::BackwardTwice);
        }
        if self.shape(loss) != [1] {
            return Err(AutodiffError::NotScalar(self.shape(loss).to_vec()));
        }
        self.done = true;
        let mut g: Vec<Option<Vec<f64>>> = Vec::with_capacity(loss.0 + 1);
        g.resize_with(loss.0 + 1, || None);
        g[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(gi) = g[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            self.backprop(i, &gi, &mut g, grads);
        }
        Ok(())
    }

    fn backprop(&self, i: usize, gi: &[f64], g: &mut [Option<Vec<f64>>], buf: &mut GradBuffer) {
        let node = &self.nodes[i];
        let y = node.value.as_ref().map(|t| t.data.as_slice());
        // Accumulator for input `j`, or `None` if it needs no gradient.
        macro_rules! slot {
            ($j:expr) => {{
                let j: usize = $j;
                let n = &self.nodes[j];
                if !n.needs_grad {
                    None
                } else if let Op::Param(id) = n.op {
                    Some(buf.grads[id.0].as_mut_slice())
                } else {
                    let len = n.shape.iter().product();
                    Some(g[j].get_or_insert_with(|| vec![0.0; len]).as_mut_slice())
                }
            }};
        }
        match &node.op {
            Op::Input | Op::Param(_) => {}
            Op::MatMul(a, b, [m, k, n]) => {
                let (m, k, n) = (*m, *k, *n);
                let av = self.data(*a);
                let bv = self.data(*b);
                if let Some(da) = slot!(*a) {
                    // dA (m x k) += g (m x n) @ B^T
                    gemm(m, n, k, gi, (n, 1), bv, (1, n), 1.0, da);
                }
                if let Some(db) = slot!(*b) {
                    // dB (k x n) += A^T @ g
                    gemm(k, m, n, av, (1, k), gi, (n, 1), 1.0, db);
                }
            }
            Op::MatMulT(a, b, [m, k, n]) => {
                let (m, k, n) = (*m, *k, *n);
                let av = self.data(*a);
                let bv = self.data(*b);
                if let Some(da) = slot!(*a) {
                    // dA (m x k) += g (m x n) @ B (n x k)
                    gemm(m, n, k, gi, (n, 1), bv, (k, 1), 1.0, da);
                }
                if let Some(db) = slot!(*b) {
                    // dB (n x k) += g^T @ A
                    gemm(n, m, k, gi, (1, n), av, (k, 1), 1.0, db);
                }
            }
            Op::Add(a, b) => {
                if let Some(da) = slot!(*a) {
                    add_into(da, gi);
                }
                if let Some(db) = slot!(*b) {
                    add_into(db, gi);
                }
            }
            Op::Sub(a, b) => {
                if let Some(da) = slot!(*a) {
                    add_into(da, gi);
                }
                if let Some(db) = slot!(*b) {
                    db.iter_mut().zip(gi).for_each(|(d, g)| *d -= g);
                }
            }
            Op::Mul(a, b) => {
                let av = self.data(*a);
                let bv = self.data(*b);
                if let Some(da) = slot!(*a) {
                    for k in 0..gi.len() {
                        da[k] += gi[k] * bv[k];
                    }
                }
                if let Some(db) = slot!(*b) {
                    for k in 0..gi.len() {
                        db[k] += gi[k] * av[k];
                    }
                }
            }
            Op::AddBias(a, b) => {
                if let Some(da) = slot!(*a) {
                    add_into(da, gi);
                }
                if let Some(db) = slot!(*b) {
                    let c = db.len();
                    for (k, v) in gi.iter().enumerate() {
                        db[k % c] += v;
                    }
                }
            }
            Op::Scale(a, s) => {
                if let Some(da) = slot!(*a) {
                    da.iter_mut().zip(gi).for_each(|(d, g)| *d += g * s);
                }
            }
            Op::ScaleBy(a, s) => {
                let av = self.data(*a);
                let k = self.data(*s)[0];
                if let Some(da) = slot!(*a) {
                    da.iter_mut().zip(gi).for_each(|(d, g)| *d += g * k);
                }
                if let Some(ds) = slot!(*s) {
                    ds[0] += gi.iter().zip(av).map(|(g, x)| g * x).sum::<f64>();
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let len = self.nodes[p].shape[0];
                    if let Some(dp) = slot!(p) {
                        add_into(dp, &gi[off..off + len]);
                    }
                    off += len;
                }
            }
            Op::Slice(a, start) => {
                if let Some(da) = slot!(*a) {
                    add_into(&mut da[*start..*start + gi.len()], gi);
                }
            }
            Op::Reshape(a) => {
                if let Some(da) = slot!(*a) {
                    add_into(da, gi);
                }
            }
            Op::Sum(a) => {
                if let Some(da) = slot!(*a) {
                    da.iter_mut().for_each(|d| *d += gi[0]);
                }
            }
            Op::Softmax(a) => {
                let y = y.expect("softmax keeps its value");
                let dot: f64 = gi.iter().zip(y).map(|(g, p)| g * p).sum();
                if let Some(da) = slot!(*a) {
                    for k in 0..y.len() {
                        da[k] += y[k] * (gi[k] - dot);
                    }
                }
            }
            Op::LogSoftmax(a) => {
                let y = y.expect("log_softmax keeps its value");
                let total: f64 = gi.iter().sum();
                if let Some(da) = slot!(*a) {
                    for k in 0..y.len() {
                        da[k] += gi[k] - y[k].exp() * total;
                    }
                }
            }
            Op::Log(a) => {
                let x = self.data(*a);
                if let Some(da) = slot!(*a) {
                    for k in 0..x.len() {
                        da[k] += gi[k] / x[k];
                    }
                }
            }
            Op::Exp(a) => {
                let y = y.expect("exp keeps its value");
                if let Some(da) = slot!(*a) {
                    for k in 0..y.len() {
                        da[k] += gi[k] * y[k];
                    }
                }
            }
            Op::Tanh(a) => {
                let y = y.expect("tanh keeps its value");
                if let Some(da) = slot!(*a) {
                    for k in 0..y.len() {
                        da[k] += gi[k] * (1.0 - y[k] * y[k]);
                    }
                }
            }
            Op::Sigmoid(a) => {
                let y = y.expect("sigmoid keeps its value");
                if let Some(da) = slot!(*a) {
                    for k in 0..y.len() {
                        da[k] += gi[k] * y[k] * (1.0 - y[k]);
                    }
                }
            }
            Op::Elu(a) => {
                let y = y.expect("elu keeps its value");
                let x = self.data(*a);
                if let Some(da) = slot!(*a) {
                    for k in 0..y.len() {
                        da[k] += if x[k] > 0.0 { gi[k] } else { gi[k] * (y[k] + 1.0) };
                    }
                }
            }
            Op::Max(a, b) | Op::Min(a, b) => {
                let is_max = matches!(node.op, Op::Max(..));
                let av = self.data(*a);
                let bv = self.data(*b);
                let pick_a: Vec<bool> = av
                    .iter()
                    .zip(bv)
                    .map(|(x, y)| if is_max { x >= y } else { x <= y })
                    .collect();
                if let Some(da) = slot!(*a) {
                    for k in 0..gi.len() {
                        if pick_a[k] {
                            da[k] += gi[k];
                        }
                    }
                }
                if let Some(db) = slot!(*b) {
                    for k in 0..gi.len() {
                        if !pick_a[k] {
                            db[k] += gi[k];
                        }
                    }
                }
            }
            Op::Gather(a, idx) => {
                if let Some(da) = slot!(*a) {
                    for (k, &j) in idx.iter().enumerate() {
                        da[j] += gi[k];
                    }
                }
            }
            Op::GatherRows(a, idx) => {
                let c = self.nodes[*a].shape[1];
                if let Some(da) = slot!(*a) {
                    for (k, &j) in idx.iter().enumerate() {
                        add_into(&mut da[j * c..(j + 1) * c], &gi[k * c..(k + 1) * c]);
                    }
                }
            }
            Op::Dropout(a, mask) => {
                if let Some(da) = slot!(*a) {
                    for k in 0..gi.len() {
                        da[k] += gi[k] * mask[k];
                    }
                }
            }
            Op::MaxRows(a, arg) => {
                let c = arg.len();
                if let Some(da) = slot!(*a) {
                    for j in 0..c {
                        da[arg[j] * c + j] += gi[j];
                    }
                }
            }
            Op::StackRows(rows) => {
                let c = node.shape[1];
                for (k, &r) in rows.iter().enumerate() {
                    if let Some(dr) = slot!(r) {
                        add_into(dr, &gi[k * c..(k + 1) * c]);
                    }
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(x: &[f64]) -> Vec<f64> {
    let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
