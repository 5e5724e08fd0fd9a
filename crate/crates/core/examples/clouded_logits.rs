//! Clouded logits and the GCL loss on a small batch of cosine logits.
//!
//! A tail-class target is pushed down by its cloud, so its loss and
//! gradient grow with the drawn perturbation.

use gcl::gcl::{clouded_logits, compute_cloud_sizes, eval_logits, gcl_loss, sample_epsilon, CloudStrategy, GclConfig};
use gcl::numerics::{RngStream, Tensor2};

fn main() -> gcl::Result<()> {
    let cfg = GclConfig::default();
    let table = compute_cloud_sizes(&[5000, 500, 50], CloudStrategy::LogDiff)?;
    println!("normalized cloud sizes {:?}", table.normalized().data());

    let z = Tensor2::from_rows(&[[0.6, 0.2, 0.1], [0.1, 0.3, 0.5]])?;
    let labels = [0, 2];

    for eps in [[0.0, 0.0], [0.3, 0.3], [0.9, 0.9]] {
        let out = gcl_loss(&z, &labels, &table, &eps, &cfg)?;
        println!("\neps {eps:?}");
        println!("  clouded {:?}", clouded_logits(&z, &table, &eps, &cfg)?.data());
        println!("  loss {:.6}  dL/dz {:?}", out.loss, out.grad.data());
    }

    let mut rng = RngStream::new(0);
    let draws: Vec<f64> = (0..5).map(|_| sample_epsilon(&mut rng, &cfg)).collect();
    println!("\nfive |eps| draws {draws:?}");
    println!("inference logits {:?}", eval_logits(&z, &table, &cfg)?.data());
    Ok(())
}
