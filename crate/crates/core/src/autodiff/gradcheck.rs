use super::{AutodiffError, GradBuffer, ParamId, ParamStore, Tape, Var};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// (parameter, coordinate, analytic, numeric, relative error)
    pub entries: Vec<(ParamId, usize, f64, f64, f64)>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.entries.iter().map(|e| e.4).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> Option<&(ParamId, usize, f64, f64, f64)> {
        self.entries.iter().max_by(|a, b| a.4.total_cmp(&b.4))
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Compares backpropagated gradients with fourth-order central differences
/// of step `h` at the given coordinates. `f` must build the same
/// deterministic scalar loss on every call.
pub fn grad_check<F>(
    params: &mut ParamStore,
    coords: &[(ParamId, usize)],
    h: f64,
    f: F,
) -> Result<GradCheckReport, AutodiffError>
where
    F: Fn(&mut Tape) -> Result<Var, AutodiffError>,
{
    let mut grads = GradBuffer::new(params);
    {
        let mut tape = Tape::new(params);
        let loss = f(&mut tape)?;
        tape.backward(loss, &mut grads)?;
    }
    let eval = |p: &ParamStore| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new(p);
        let loss = f(&mut tape)?;
        Ok(tape.value(loss).data[0])
    };
    let mut entries = Vec::with_capacity(coords.len());
    for &(id, k) in coords {
        let orig = params.get(id).data[k];
        let mut at = |delta: f64| -> Result<f64, AutodiffError> {
            params.get_mut(id).data[k] = orig + delta;
            eval(params)
        };
        let (p2, p1, m1, m2) = (at(2.0 * h)?, at(h)?, at(-h)?, at(-2.0 * h)?);
        params.get_mut(id).data[k] = orig;
        let numeric = (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * h);
        let analytic = grads.get(id)[k];
        entries.push((id, k, analytic, numeric, relative_error(analytic, numeric)));
    }
    Ok(GradCheckReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;
    use rand::SeedableRng;

    fn all_coords(p: &ParamStore) -> Vec<(ParamId, usize)> {
        p.ids().flat_map(|id| (0..p.get(id).len()).map(move |k| (id, k))).collect()
    }

    #[test]
    fn every_op_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut p = ParamStore::new();
        let w = p.glorot("w", vec![4, 3], &mut rng);
        let m = p.glorot("m", vec![3, 4], &mut rng);
        let b = p.uniform("b", vec![4], 0.5, &mut rng);
        let x = p.uniform("x", vec![3], 1.0, &mut rng);
        let y = p.uniform("y", vec![4], 1.0, &mut rng);
        // Shape errors name both operands.
        {
            let mut t = Tape::new(&p);
            let (mv, xv) = (t.param(m), t.param(x));
            let err = t.matmul(mv, xv).unwrap_err();
            assert!(err.to_string().contains("[3, 4]") && err.to_string().contains("[3]"));
        }
        let f = |t: &mut Tape| {
            let (w, m, b, x, y) = (t.param(w), t.param(m), t.param(b), t.param(x), t.param(y));
            let h = t.matmul_t(x, w)?;
            let h = t.add_bias(h, b)?;
            let e = t.elu(h)?;
            let s = t.sigmoid(y)?;
            let th = t.tanh(e)?;
            let prod = t.mul(th, s)?;
            let mx = t.maximum(prod, y)?;
            let mn = t.minimum(mx, e)?;
            let back = t.matmul(mn, w)?;
            let c = t.concat(&[back, x])?;
            let sl = t.slice(c, 1, 4)?;
            let sum1 = t.sum(sl)?;
            let sc = t.scale_by(y, sum1)?;
            let ls = t.log_softmax(sc)?;
            let sm = t.softmax(y)?;
            let lg = t.log(sm)?;
            let ex = t.exp(lg)?;
            let g = t.gather(ls, &[0, 2, 2])?;
            let rows = t.gather_rows(m, &[2, 0])?;
            let mr = t.max_rows(rows)?;
            let st = t.stack_rows(&[ex, y])?;
            let r1 = t.row(st, 1)?;
            let d = t.sub(r1, ex)?;
            let mt = t.matmul_t(st, m)?;
            let r = t.reshape(mt, vec![6])?;
            let parts = [t.sum(g)?, t.sum(mr)?, t.sum(d)?, t.sum(r)?];
            let total = t.concat(&parts)?;
            let total = t.scale(total, 0.5)?;
            t.sum(total)
        };
        let coords = all_coords(&p);
        let report = grad_check(&mut p, &coords, 1e-4, f).unwrap();
        assert!(report.max_rel_error() < 1e-6, "{:?}", report.worst());
    }

    #[test]
    fn backward_twice_and_non_scalar_are_errors() {
        let mut p = ParamStore::new();
        let a = p.add("a", Tensor::vector(vec![1.0, 2.0]));
        let mut grads = GradBuffer::new(&p);
        let mut t = Tape::new(&p);
        let av = t.param(a);
        assert!(matches!(t.backward(av, &mut grads), Err(AutodiffError::NotScalar(_))));
        let s = t.sum(av).unwrap();
        t.backward(s, &mut grads).unwrap();
        assert_eq!(grads.get(a), &[1.0, 1.0]);
        assert_eq!(t.backward(s, &mut grads), Err(AutodiffError::BackwardTwice));
    }

    #[test]
    fn finite_checks_catch_nan() {
        let mut p = ParamStore::new();
        let a = p.add("a", Tensor::vector(vec![-1.0]));
        let mut t = Tape::new(&p).with_finite_checks(true);
        let av = t.param(a);
        assert_eq!(t.log(av), Err(AutodiffError::NonFinite("log")));
    }
}
