//! Long-tailed Gaussian blobs: count profile, training and balanced test
//! sets, and a CSV round trip.
//!
//!     cargo run --example longtail_data -- [out_dir]

use std::path::PathBuf;

use gcl::data::{balanced_test_split, imbalance_ratio, load_csv, longtail_counts, save_csv, synth_blobs, BlobSpec, LongTailSpec};
use gcl::numerics::RngStream;

fn main() -> gcl::Result<()> {
    let lt = LongTailSpec {
        head: 500,
        classes: 10,
        gamma: 100.0,
    };
    let counts = longtail_counts(&lt)?;
    let blobs = BlobSpec {
        classes: 10,
        dim: 32,
        center_scale: 0.45,
        noise_std: 1.0,
    };
    let data = RngStream::new(7).child("data");
    let train = synth_blobs(&data, &blobs, &counts)?;
    let test = balanced_test_split(&data, &blobs, 200)?;
    println!("{}", train.summary());
    println!("test set: {} samples, counts {:?}", test.len(), test.counts());
    println!("realized imbalance {}", imbalance_ratio(&train)?);

    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let path = dir.join("longtail_train.csv");
    save_csv(&train, &path)?;
    let back = load_csv(&path)?;
    println!("\nwrote {} ({} rows), reload identical: {}", path.display(), back.len(), back.features() == train.features());
    Ok(())
}
