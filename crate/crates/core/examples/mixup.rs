//! Mixup on a toy batch: inputs and one-hot targets are blended with the
//! same Beta-distributed coefficient.

use gcl::gcl::{ce_loss_soft, mixup_batch, one_hot};
use gcl::numerics::{RngStream, Tensor2};

fn main() -> gcl::Result<()> {
    let x = Tensor2::from_rows(&[[1.0, 0.0], [0.0, 1.0], [2.0, 2.0], [-1.0, 0.5]])?;
    let labels = [0, 1, 2, 1];
    let targets = one_hot(&labels, 3);

    let mut rng = RngStream::new(5);
    let mixed = mixup_batch(&mut rng, &x, &targets, 1.0)?;
    println!("lambda {:.4}, partners {:?}", mixed.lambda, mixed.partner);
    for i in 0..x.rows() {
        println!("x {:?} -> {:?}   y {:?}", x.row(i), mixed.x.row(i), mixed.targets.row(i));
    }

    let logits = Tensor2::from_rows(&[[2.0, 0.0, -1.0], [0.0, 1.5, 0.0], [0.0, 0.0, 3.0], [0.5, 1.0, 0.0]])?;
    println!("\nsoft-target cross-entropy {:.6}", ce_loss_soft(&logits, &mixed.targets)?.loss);
    Ok(())
}
