//! Fits a line with Adam on tape gradients.
//!
//! cargo run --example adam

use infergen::tensor::{Adam, Optimizer, ParamSet, Tape, Tensor, TensorError};

fn main() -> Result<(), TensorError> {
    let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
    let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();

    let mut params = ParamSet::new();
    params.insert("slope", Tensor::scalar(0.0));
    params.insert("intercept", Tensor::scalar(0.0));
    let mut opt = Adam::new(&params, 0.1);

    for step in 0..=500 {
        let mut tape = Tape::new();
        let vars = tape.bind(&params);
        let mut terms = Vec::new();
        for (x, y) in xs.iter().zip(&ys) {
            let xv = tape.constant(Tensor::scalar(*x));
            let pred = tape.mul(vars[0], xv)?;
            let pred = tape.add(pred, vars[1])?;
            let yv = tape.constant(Tensor::scalar(*y));
            let err = tape.sub(pred, yv)?;
            terms.push(tape.mul(err, err)?);
        }
        let total = tape.add_n(&terms)?;
        let loss = tape.scale(total, 1.0 / xs.len() as f64);
        if step % 100 == 0 {
            println!("step {step:3}  mse {:.6}", tape.scalar(loss));
        }
        let grads = tape.backward(loss)?.for_params(&params);
        opt.step(&mut params, &grads)?;
    }
    println!(
        "slope {:.4}, intercept {:.4} after {} steps",
        params.get(0).data()[0],
        params.get(1).data()[0],
        opt.steps_taken()
    );
    Ok(())
}
