//! Save a model with its optimizer state, reload it and confirm the
//! forward pass is bit-identical.

use gcl::model::{Checkpoint, HeadKind, Model};
use gcl::numerics::{RngStream, SgdState, Tensor2};

fn main() -> gcl::Result<()> {
    let mut rng = RngStream::new(3);
    let model = Model::new(&[8, 16, 4], 5, HeadKind::Cosine, &mut rng)?;
    let ckpt = Checkpoint {
        model,
        optimizer: Some(SgdState::new(0.1, 0.9)?),
        iteration: 0,
        config_hash: 0,
    };

    let path = std::env::temp_dir().join("gcl_example.ckpt");
    ckpt.save(&path)?;
    let back = Checkpoint::load(&path)?;
    println!("wrote {} ({} bytes)", path.display(), std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0));
    println!("parameters: {}", back.model.param_count());

    let x = Tensor2::from_vec(3, 8, (0..24).map(|i| (i as f64).cos()).collect())?;
    let a = ckpt.model.logits(&x)?;
    let b = back.model.logits(&x)?;
    let same = a.data().iter().zip(b.data()).all(|(u, v)| u.to_bits() == v.to_bits());
    println!("reloaded logits bit-identical: {same}");
    Ok(())
}
