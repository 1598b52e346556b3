//! Backpropagates through a small network and checks it against finite differences.

use arbor::autodiff::{grad_check, GradBuffer, ParamStore, Tape, Tensor};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut params = ParamStore::new();
    let w = params.glorot("w", vec![3, 4], &mut rng);
    let b = params.zeros("b", vec![4]);
    let v = params.glorot("v", vec![4, 2], &mut rng);

    let loss = |t: &mut Tape| {
        let x = t.input(Tensor::new(vec![1, 3], vec![0.5, -1.0, 2.0]));
        let w = t.param(w);
        let h = t.matmul(x, w)?;
        let b = t.param(b);
        let h = t.add_bias(h, b)?;
        let h = t.tanh(h)?;
        let v = t.param(v);
        let o = t.matmul(h, v)?;
        let o = t.reshape(o, vec![2])?;
        let lp = t.log_softmax(o)?;
        let gold = t.gather(lp, &[1])?;
        let s = t.sum(gold)?;
        t.scale(s, -1.0)
    };

    let mut grads = GradBuffer::new(&params);
    let mut tape = Tape::new(&params);
    let l = loss(&mut tape)?;
    tape.backward(l, &mut grads)?;
    println!("loss {:.6}", tape.value(l).data[0]);
    println!("dL/dv {:?}", grads.get(v));

    let coords: Vec<_> = [w, b, v].iter().flat_map(|&id| (0..params.get(id).data.len()).map(move |k| (id, k))).collect();
    let report = grad_check(&mut params, &coords, 1e-4, loss)?;
    println!("{} coordinates, max relative error {:.2e}", coords.len(), report.max_rel_error());
    Ok(())
}
