//! Reverse-mode differentiation on the tape, checked against central
//! differences.
//!
//! cargo run --example autodiff

use infergen::tensor::{grad_check, Tape, Tensor, TensorError};

fn main() -> Result<(), TensorError> {
    // loss = sum(softmax(tanh(x W)) * c) for a row vector x
    let w = Tensor::matrix(3, 2, vec![0.1, -0.4, 0.3, 0.7, 0.2, -0.5])?;
    let x = Tensor::matrix(1, 3, vec![1.0, 2.0, -1.0])?;
    let c = Tensor::matrix(1, 2, vec![1.0, 3.0])?;

    let mut tape = Tape::new();
    let wv = tape.leaf(w.clone());
    let xv = tape.leaf(x.clone());
    let h = tape.matmul(xv, wv)?;
    let h = tape.tanh(h);
    let p = tape.softmax(h);
    let cv = tape.constant(c.clone());
    let weighted = tape.mul(p, cv)?;
    let loss = tape.sum(weighted);
    println!("loss = {:.6}", tape.scalar(loss));

    let grads = tape.backward(loss)?;
    println!("dL/dW = {:?}", grads.wrt(wv));
    println!("dL/dx = {:?}", grads.wrt(xv));

    let check = grad_check(
        |tape, wv| {
            let xv = tape.constant(x.clone());
            let h = tape.matmul(xv, wv)?;
            let h = tape.tanh(h);
            let p = tape.softmax(h);
            let cv = tape.constant(c.clone());
            let weighted = tape.mul(p, cv)?;
            Ok(tape.sum(weighted))
        },
        &w,
        1e-5,
    )?;
    println!(
        "gradient check on W: {} coordinates, max relative error {:.2e}, passed at 1e-6: {}",
        check.coords_checked,
        check.max_rel_error,
        check.passed(1e-6)
    );
    Ok(())
}
