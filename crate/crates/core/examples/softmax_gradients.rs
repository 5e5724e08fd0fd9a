//! Softmax cross-entropy and its gradient `p - y`, checked against central
//! finite differences.

use gcl::numerics::{finite_diff_grad, relative_error, softmax, Tensor1};

fn main() -> gcl::Result<()> {
    let z = Tensor1::from_vec(vec![2.0, -0.5, 0.3, 1.1])?;
    let y = 0;
    let p = softmax(&z)?;
    println!("logits   {:?}", z.data());
    println!("softmax  {:?}", p.data());

    let loss = |v: &[f64]| {
        let p = softmax(&Tensor1::from_vec(v.to_vec()).unwrap()).unwrap();
        -p[y].ln()
    };
    println!("loss     {}", loss(z.data()));

    let analytic: Vec<f64> = p.data().iter().enumerate().map(|(j, &pj)| pj - if j == y { 1.0 } else { 0.0 }).collect();
    let numeric = finite_diff_grad(loss, &z, 1e-6)?;
    println!("p - y    {analytic:?}");
    println!("numeric  {:?}", numeric.data());
    println!("relative error {:.2e}", relative_error(&analytic, numeric.data()));
    Ok(())
}
