//! Reverse-mode autodiff on a tape: record operations, run `backward`,
//! and cross-check gradients with central finite differences.
//!
//! ```sh
//! cargo run -p desklearn --example autograd_basics
//! ```

use desklearn::autograd::{grad_check, Tape};
use desklearn::tensor::Tensor;

fn main() -> desklearn::Result<()> {
    // z = (x + y) * w at x=1, y=2, w=3
    let tape = Tape::new();
    let x = tape.leaf(Tensor::scalar(1.0));
    let y = tape.leaf(Tensor::scalar(2.0));
    let w = tape.leaf(Tensor::scalar(3.0));
    let z = x.add(&y)?.mul(&w)?;
    println!("z = (x + y) w = {}", z.item()?);

    tape.backward(&z)?;
    println!("dz/dx = {}  (w)", x.grad().unwrap().item()?);
    println!("dz/dy = {}  (w)", y.grad().unwrap().item()?);
    println!("dz/dw = {}  (x + y)", w.grad().unwrap().item()?);

    // matrix ops are taped the same way
    let tape = Tape::new();
    let a = tape.leaf(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]])?);
    let b = tape.leaf(Tensor::from_rows(&[vec![0.5], vec![-1.0]])?);
    let loss = a.matmul(&b)?.powi(2).sum_all()?;
    tape.backward(&loss)?;
    println!("\nd(sum (A b)^2)/dA = {:?}", a.grad().unwrap());

    // the finite-difference oracle agrees
    let report = grad_check(
        |_, vars| vars[0].matmul(&vars[1])?.powi(2).sum_all(),
        &[
            Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]])?,
            Tensor::from_rows(&[vec![0.5], vec![-1.0]])?,
        ],
        1e-5,
    )?;
    println!(
        "grad check: max abs diff {:.2e}, max rel diff {:.2e}",
        report.max_abs_diff, report.max_rel_diff
    );
    assert!(report.within(1e-4));
    Ok(())
}
