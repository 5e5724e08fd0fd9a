//! The two training stages run by hand: representation learning with the
//! GCL loss on instance-balanced batches, then classifier re-training with
//! CBEN sampling on the frozen backbone.

use gcl::data::{balanced_test_split, longtail_counts, synth_blobs, BlobSpec, LongTailSpec};
use gcl::model::Model;
use gcl::numerics::RngStream;
use gcl::trainer::{evaluate, train_stage1, train_stage2_crt, TrainConfig};

fn main() -> gcl::Result<()> {
    let blobs = BlobSpec {
        classes: 10,
        dim: 32,
        center_scale: 0.45,
        noise_std: 1.0,
    };
    let counts = longtail_counts(&LongTailSpec {
        head: 500,
        classes: 10,
        gamma: 100.0,
    })?;
    let root = RngStream::new(0);
    let data = root.child("data");
    let train = synth_blobs(&data, &blobs, &counts)?;
    let test = balanced_test_split(&data, &blobs, 200)?;

    let cfg = TrainConfig::default();
    let streams = root.child("train");
    let mut model = Model::new(&cfg.layer_dims(train.dim()), train.classes(), cfg.method.head_kind(), &mut streams.child("init"))?;

    let s1 = train_stage1(&train, &mut model, &cfg, &streams)?;
    let losses = s1.trace.losses();
    println!("stage 1: {} iterations, loss {:.3} -> {:.3}", losses.len(), losses[0], losses[losses.len() - 1]);
    println!("{}", evaluate(&model, &test, train.counts(), &cfg.groups, &cfg.gcl)?);

    let backbone = model.backbone.clone();
    let s2 = train_stage2_crt(&train, &mut model, &cfg, &streams)?;
    println!("stage 2: {} iterations, backbone unchanged: {}", s2.trace.len(), backbone == model.backbone);
    println!("re-training draws per class {:?}", s2.drawn_per_class);
    println!("{}", evaluate(&model, &test, train.counts(), &cfg.groups, &cfg.gcl)?);
    Ok(())
}
