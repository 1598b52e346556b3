//! Network building blocks over the autodiff tape.
//!
//! Every block registers its parameters in a [`ParamStore`] under a name
//! prefix at construction and reads them through a [`Tape`] at run time.

use rand::Rng;

use crate::autodiff::{AutodiffError, ParamId, ParamStore, Tape, Tensor, Var};

type R<T> = Result<T, AutodiffError>;

/// `ffn(x) = Wx + b`.
#[derive(Debug, Clone)]
pub struct Ffn {
    pub w: ParamId,
    pub b: ParamId,
}

impl Ffn {
    pub fn new(p: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Ffn {
            w: p.glorot(format!("{name}.w"), vec![output, input], rng),
            b: p.zeros(format!("{name}.b"), vec![output]),
        }
    }

    /// Accepts a vector `[in]` or a matrix of row vectors `[m, in]`.
    pub fn forward(&self, t: &mut Tape, x: Var) -> R<Var> {
        let (w, b) = (t.param(self.w), t.param(self.b));
        let y = t.matmul_t(x, w)?;
        t.add_bias(y, b)
    }
}

/// `mlp(x) = elu(Wx + b)`.
#[derive(Debug, Clone)]
pub struct Mlp(pub Ffn);

impl Mlp {
    pub fn new(p: &mut ParamStore, name: &str, input: usize, output: usize, rng: &mut impl Rng) -> Self {
        Mlp(Ffn::new(p, name, input, output, rng))
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> R<Var> {
        let y = self.0.forward(t, x)?;
        t.elu(y)
    }
}

/// `biaffine(x1, x2) = x1ᵀ U x2 + W [x1; x2] + b`.
#[derive(Debug, Clone)]
pub struct Biaffine {
    pub u: ParamId,
    pub w: ParamId,
    pub b: ParamId,
    pub d1: usize,
    pub d2: usize,
}

impl Biaffine {
    pub fn new(p: &mut ParamStore, name: &str, d1: usize, d2: usize, rng: &mut impl Rng) -> Self {
        Biaffine {
            u: p.glorot(format!("{name}.u"), vec![d1, d2], rng),
            w: p.glorot(format!("{name}.w"), vec![1, d1 + d2], rng),
            b: p.zeros(format!("{name}.b"), vec![1]),
            d1,
            d2,
        }
    }

    /// Scores `x1 [d1]` against every row of `x2 [m, d2]`, giving `[m]`.
    pub fn forward(&self, t: &mut Tape, x1: Var, x2: Var) -> R<Var> {
        let m = t.shape(x2)[0];
        let (u, w, b) = (t.param(self.u), t.param(self.w), t.param(self.b));
        let xu = t.matmul(x1, u)?; // [d2]
        let bil = t.matmul_t(x2, xu)?; // [m]
        let w = t.reshape(w, vec![self.d1 + self.d2])?;
        let w1 = t.slice(w, 0, self.d1)?;
        let w2 = t.slice(w, self.d1, self.d2)?;
        let lin2 = t.matmul_t(x2, w2)?; // [m]
        let lin1 = t.matmul(x1, w1)?; // [1]
        let shift = t.add(lin1, b)?;
        let ones = t.constant(vec![1.0; m]);
        let shift = t.scale_by(ones, shift)?;
        let s = t.add(bil, lin2)?;
        t.add(s, shift)
    }
}

/// `bilinear(x1, x2) = x1ᵀ U_k x2 + b_k` for each of `k` slices.
#[derive(Debug, Clone)]
pub struct Bilinear {
    /// `[k * d1, d2]`, slice `k` occupying rows `k*d1 .. (k+1)*d1`.
    pub u: ParamId,
    pub b: ParamId,
    pub k: usize,
    pub d1: usize,
}

impl Bilinear {
    pub fn new(p: &mut ParamStore, name: &str, d1: usize, d2: usize, k: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / (d1 + d2) as f64).sqrt();
        Bilinear {
            u: p.uniform(format!("{name}.u"), vec![k * d1, d2], bound, rng),
            b: p.zeros(format!("{name}.b"), vec![k]),
            k,
            d1,
        }
    }

    pub fn forward(&self, t: &mut Tape, x1: Var, x2: Var) -> R<Var> {
        let (u, b) = (t.param(self.u), t.param(self.b));
        let ux2 = t.matmul_t(x2, u)?; // [k*d1]
        let ux2 = t.reshape(ux2, vec![self.k, self.d1])?;
        let s = t.matmul(ux2, x1)?; // [k]
        t.add(s, b)
    }
}

/// Single-direction LSTM cell with gates ordered input, forget, cell, output.
#[derive(Debug, Clone)]
pub struct Lstm {
    pub w_ih: ParamId,
    pub w_hh: ParamId,
    pub b: ParamId,
    pub hidden: usize,
}

impl Lstm {
    pub fn new(p: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let w_ih = p.glorot(format!("{name}.w_ih"), vec![4 * hidden, input], rng);
        let w_hh = p.glorot(format!("{name}.w_hh"), vec![4 * hidden, hidden], rng);
        let mut bias = vec![0.0; 4 * hidden];
        bias[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        let b = p.add(format!("{name}.b"), Tensor::vector(bias));
        Lstm { w_ih, w_hh, b, hidden }
    }

    pub fn zero_state(&self, t: &mut Tape) -> (Var, Var) {
        (t.constant(vec![0.0; self.hidden]), t.constant(vec![0.0; self.hidden]))
    }

    /// One step: returns the new `(h, c)`.
    pub fn step(&self, t: &mut Tape, x: Var, (h, c): (Var, Var)) -> R<(Var, Var)> {
        let n = self.hidden;
        let (w_ih, w_hh, b) = (t.param(self.w_ih), t.param(self.w_hh), t.param(self.b));
        let gx = t.matmul_t(x, w_ih)?;
        let gh = t.matmul_t(h, w_hh)?;
        let g = t.add(gx, gh)?;
        let g = t.add(g, b)?;
        let i = t.slice(g, 0, n)?;
        let f = t.slice(g, n, n)?;
        let cand = t.slice(g, 2 * n, n)?;
        let o = t.slice(g, 3 * n, n)?;
        let (i, f, o) = (t.sigmoid(i)?, t.sigmoid(f)?, t.sigmoid(o)?);
        let cand = t.tanh(cand)?;
        let keep = t.mul(f, c)?;
        let write = t.mul(i, cand)?;
        let c2 = t.add(keep, write)?;
        let tc = t.tanh(c2)?;
        let h2 = t.mul(o, tc)?;
        Ok((h2, c2))
    }
}

/// Stacked bidirectional LSTM.
#[derive(Debug, Clone)]
pub struct BiLstm {
    pub layers: Vec<(Lstm, Lstm)>,
}

/// Outputs of [`BiLstm::encode`].
#[derive(Debug, Clone)]
pub struct BiLstmOutput {
    /// Per layer, per position: `[forward; backward]` of size `2H`.
    pub states: Vec<Vec<Var>>,
    /// Per layer: `[backward state at the first position; forward state at
    /// the last position]`.
    pub summary: Vec<Var>,
}

impl BiLstm {
    pub fn new(p: &mut ParamStore, name: &str, input: usize, hidden: usize, layers: usize, rng: &mut impl Rng) -> Self {
        assert!(layers >= 1, "a BiLSTM needs at least one layer");
        let layers = (0..layers)
            .map(|l| {
                let d = if l == 0 { input } else { 2 * hidden };
                (
                    Lstm::new(p, &format!("{name}.l{l}.fwd"), d, hidden, rng),
                    Lstm::new(p, &format!("{name}.l{l}.bwd"), d, hidden, rng),
                )
            })
            .collect();
        BiLstm { layers }
    }

    /// Runs every layer; `dropout` applies to each layer's input from the
    /// second layer on, and is skipped when `rng` is `None`.
    pub fn encode(
        &self,
        t: &mut Tape,
        inputs: &[Var],
        dropout: f64,
        mut rng: Option<&mut dyn rand::RngCore>,
    ) -> Result<BiLstmOutput, AutodiffError> {
        let n = inputs.len();
        if n == 0 {
            return Err(AutodiffError::Shape {
                op: "bilstm",
                left: vec![0],
                right: vec![],
            });
        }
        let mut xs = inputs.to_vec();
        let mut states = Vec::with_capacity(self.layers.len());
        let mut summary = Vec::with_capacity(self.layers.len());
        for (l, (fwd, bwd)) in self.layers.iter().enumerate() {
            if l > 0 {
                if let Some(r) = rng.as_deref_mut() {
                    for x in &mut xs {
                        *x = t.dropout(*x, dropout, r)?;
                    }
                }
            }
            let mut f_out = Vec::with_capacity(n);
            let mut s = fwd.zero_state(t);
            for x in &xs {
                s = fwd.step(t, *x, s)?;
                f_out.push(s.0);
            }
            let mut b_out = vec![f_out[0]; n];
            let mut s = bwd.zero_state(t);
            for k in (0..n).rev() {
                s = bwd.step(t, xs[k], s)?;
                b_out[k] = s.0;
            }
            let layer: Vec<Var> = (0..n)
                .map(|k| t.concat(&[f_out[k], b_out[k]]))
                .collect::<R<_>>()?;
            summary.push(t.concat(&[b_out[0], f_out[n - 1]])?);
            xs = layer.clone();
            states.push(layer);
        }
        Ok(BiLstmOutput { states, summary })
    }
}

/// Rows indexed by vocabulary id.
#[derive(Debug, Clone)]
pub struct Embedding {
    pub table: ParamId,
    pub rows: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new(p: &mut ParamStore, name: &str, rows: usize, dim: usize, rng: &mut impl Rng) -> Self {
        let scale = (3.0 / dim.max(1) as f64).sqrt();
        Embedding {
            table: p.uniform(name.to_string(), vec![rows, dim], scale, rng),
            rows,
            dim,
        }
    }

    /// Row `id`, clamped to the last row.
    pub fn lookup(&self, t: &mut Tape, id: usize) -> R<Var> {
        let table = t.param(self.table);
        t.row(table, id.min(self.rows - 1))
    }
}

/// Character CNN: embeddings of width-`kernel` windows (zero padded at both
/// ends), a linear filter bank, then max-pooling over positions.
#[derive(Debug, Clone)]
pub struct CharCnn {
    pub chars: Embedding,
    pub filters: Ffn,
    pub kernel: usize,
    pub channels: usize,
}

impl CharCnn {
    pub fn new(
        p: &mut ParamStore,
        name: &str,
        alphabet: usize,
        char_dim: usize,
        channels: usize,
        kernel: usize,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(kernel % 2 == 1, "kernel width must be odd");
        CharCnn {
            chars: Embedding::new(p, &format!("{name}.chars"), alphabet, char_dim, rng),
            filters: Ffn::new(p, &format!("{name}.filters"), kernel * char_dim, channels, rng),
            kernel,
            channels,
        }
    }

    /// `ids` are character ids; id 0 is the padding position and maps to a
    /// zero vector. An empty word convolves a single padding-only window.
    pub fn forward(&self, t: &mut Tape, ids: &[usize]) -> R<Var> {
        let dim = self.chars.dim;
        let half = self.kernel / 2;
        let len = ids.len().max(1);
        let zero = t.constant(vec![0.0; dim]);
        let mut embedded = Vec::with_capacity(len + 2 * half);
        for _ in 0..half {
            embedded.push(zero);
        }
        if ids.is_empty() {
            embedded.push(zero);
        }
        for &c in ids {
            embedded.push(if c == 0 { zero } else { self.chars.lookup(t, c)? });
        }
        for _ in 0..half {
            embedded.push(zero);
        }
        let windows: Vec<Var> = (0..len)
            .map(|p| t.concat(&embedded[p..p + self.kernel]))
            .collect::<R<_>>()?;
        let x = t.stack_rows(&windows)?;
        let conv = self.filters.forward(t, x)?;
        t.max_rows(conv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    fn set(p: &mut ParamStore, id: ParamId, data: Vec<f64>) {
        p.get_mut(id).data = data;
    }

    #[test]
    fn ffn_identity() {
        let mut p = ParamStore::new();
        let f = Ffn::new(&mut p, "f", 3, 3, &mut rng());
        set(&mut p, f.w, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let mut t = Tape::new(&p);
        let x = t.constant(vec![0.5, -2.0, 3.0]);
        let y = f.forward(&mut t, x).unwrap();
        assert_eq!(t.value(y).data, vec![0.5, -2.0, 3.0]);
    }

    #[test]
    fn biaffine_zero_params_give_zero_scores() {
        let mut p = ParamStore::new();
        let b = Biaffine::new(&mut p, "b", 2, 3, &mut rng());
        set(&mut p, b.u, vec![0.0; 6]);
        set(&mut p, b.w, vec![0.0; 5]);
        let mut t = Tape::new(&p);
        let x1 = t.constant(vec![1.0, 2.0]);
        let x2 = t.input(Tensor::new(vec![4, 3], (0..12).map(f64::from).collect()));
        let s = b.forward(&mut t, x1, x2).unwrap();
        assert_eq!(t.value(s).data, vec![0.0; 4]);
    }

    #[test]
    fn biaffine_batch_equals_pairwise_loop() {
        let mut p = ParamStore::new();
        let b = Biaffine::new(&mut p, "b", 2, 3, &mut rng());
        set(&mut p, b.b, vec![0.3]);
        let cands: Vec<Vec<f64>> = vec![vec![1.0, -1.0, 0.5], vec![0.2, 0.1, -0.7], vec![2.0, 0.0, 1.0]];
        let x1 = [0.4, -1.5];
        let mut t = Tape::new(&p);
        let x1v = t.constant(x1.to_vec());
        let x2 = t.input(Tensor::new(vec![3, 3], cands.concat()));
        let s = b.forward(&mut t, x1v, x2).unwrap();
        let (u, w) = (&p.get(b.u).data, &p.get(b.w).data);
        for (m, c) in cands.iter().enumerate() {
            let mut want = 0.3;
            for i in 0..2 {
                for j in 0..3 {
                    want += x1[i] * u[i * 3 + j] * c[j];
                }
            }
            want += x1[0] * w[0] + x1[1] * w[1] + c[0] * w[2] + c[1] * w[3] + c[2] * w[4];
            assert!((t.value(s).data[m] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn bilinear_slices_by_hand() {
        let mut p = ParamStore::new();
        let b = Bilinear::new(&mut p, "r", 2, 2, 2, &mut rng());
        // U[0] = I, U[1] = 0
        set(&mut p, b.u, vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let mut t = Tape::new(&p);
        let e1 = t.constant(vec![1.0, 0.0]);
        let s = b.forward(&mut t, e1, e1).unwrap();
        assert_eq!(t.value(s).data, vec![1.0, 0.0]);
    }

    #[test]
    fn zero_lstm_outputs_zero() {
        let mut p = ParamStore::new();
        let enc = BiLstm::new(&mut p, "e", 3, 2, 2, &mut rng());
        for id in p.ids().collect::<Vec<_>>() {
            let n = p.get(id).len();
            set(&mut p, id, vec![0.0; n]);
        }
        let mut t = Tape::new(&p);
        let xs: Vec<Var> = (0..3).map(|k| t.constant(vec![k as f64, 1.0, -1.0])).collect();
        let out = enc.encode(&mut t, &xs, 0.0, None).unwrap();
        for layer in &out.states {
            for s in layer {
                assert!(t.value(*s).data.iter().all(|v| *v == 0.0));
            }
        }
    }

    #[test]
    fn reversed_input_swaps_directions() {
        let mut p = ParamStore::new();
        let enc = BiLstm::new(&mut p, "e", 2, 3, 1, &mut rng());
        // Mirror model: forward and backward cells share weights.
        let (f, b) = enc.layers[0].clone();
        for (x, y) in [(f.w_ih, b.w_ih), (f.w_hh, b.w_hh), (f.b, b.b)] {
            let v = p.get(x).data.clone();
            set(&mut p, y, v);
        }
        let seq = [vec![0.1, 0.2], vec![-0.5, 0.3], vec![0.9, -0.1]];
        let run = |order: &[usize]| {
            let mut t = Tape::new(&p);
            let xs: Vec<Var> = order.iter().map(|&k| t.constant(seq[k].clone())).collect();
            let out = enc.encode(&mut t, &xs, 0.0, None).unwrap();
            out.states[0].iter().map(|v| t.value(*v).data.clone()).collect::<Vec<_>>()
        };
        let a = run(&[0, 1, 2]);
        let r = run(&[2, 1, 0]);
        for k in 0..3 {
            assert_eq!(a[k][..3], r[2 - k][3..]);
            assert_eq!(a[k][3..], r[2 - k][..3]);
        }
    }

    #[test]
    fn char_cnn_hand_convolution() {
        let mut p = ParamStore::new();
        let cnn = CharCnn::new(&mut p, "c", 4, 1, 1, 3, &mut rng());
        set(&mut p, cnn.chars.table, vec![0.0, 1.0, 2.0, 3.0]);
        set(&mut p, cnn.filters.w, vec![1.0, 10.0, 100.0]);
        set(&mut p, cnn.filters.b, vec![0.5]);
        let mut t = Tape::new(&p);
        // word "ab" -> ids [1, 2]; windows [0,1,2] and [1,2,0]
        let y = cnn.forward(&mut t, &[1, 2]).unwrap();
        let w0 = 0.0 + 10.0 * 1.0 + 100.0 * 2.0 + 0.5;
        let w1 = 1.0 + 10.0 * 2.0 + 0.0 + 0.5;
        assert_eq!(t.value(y).data, vec![f64::max(w0, w1)]);
        // Zero kernels give the bias; the empty word still has one window.
        set(&mut p, cnn.filters.w, vec![0.0; 3]);
        let mut t = Tape::new(&p);
        let y = cnn.forward(&mut t, &[]).unwrap();
        assert_eq!(t.value(y).data, vec![0.5]);
    }

    #[test]
    fn blocks_pass_gradient_check() {
        let mut r = rng();
        let mut p = ParamStore::new();
        let enc = BiLstm::new(&mut p, "e", 3, 2, 2, &mut r);
        let cnn = CharCnn::new(&mut p, "c", 5, 2, 3, 3, &mut r);
        let mlp = Mlp::new(&mut p, "m", 4, 3, &mut r);
        let bi = Biaffine::new(&mut p, "b", 3, 4, &mut r);
        let bl = Bilinear::new(&mut p, "l", 3, 4, 2, &mut r);
        let f = |t: &mut Tape| {
            let c = cnn.forward(t, &[1, 4, 2])?;
            let x2 = t.constant(vec![0.3, -0.2, 0.1]);
            let out = enc.encode(t, &[c, x2], 0.0, None)?;
            let s = t.stack_rows(&out.states[1])?;
            let q = mlp.forward(t, out.summary[0])?;
            let sc = bi.forward(t, q, s)?;
            let rel = bl.forward(t, q, out.states[1][0])?;
            let all = t.concat(&[sc, rel])?;
            let ls = t.log_softmax(all)?;
            let g = t.gather(ls, &[1])?;
            t.sum(g)
        };
        let coords: Vec<_> = p
            .ids()
            .flat_map(|id| {
                let n = p.get(id).len();
                (0..n).step_by(1 + n / 7).map(move |k| (id, k))
            })
            .collect();
        let rep = grad_check(&mut p, &coords, 1e-4, f).unwrap();
        assert!(rep.max_rel_error() < 1e-4, "{:?}", rep.worst());
    }
}
