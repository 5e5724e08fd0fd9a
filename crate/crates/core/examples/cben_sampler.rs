//! Class-selection probabilities for the four samplers on a gamma = 100
//! profile, and Monte-Carlo frequencies from a million draws.

use gcl::data::{longtail_counts, LongTailSpec};
use gcl::gcl::{compute_cloud_sizes, CloudStrategy};
use gcl::numerics::RngStream;
use gcl::sampler::{class_pools, class_probs, draw_batch, empirical_class_frequencies, SamplerSpec, SamplerStrategy};

fn main() -> gcl::Result<()> {
    let counts = longtail_counts(&LongTailSpec {
        head: 500,
        classes: 10,
        gamma: 100.0,
    })?;
    let cloud = compute_cloud_sizes(&counts, CloudStrategy::LogDiff)?;
    println!("counts {counts:?}");

    let rng = RngStream::new(1);
    for s in [
        SamplerStrategy::InstanceBalanced,
        SamplerStrategy::EffectiveNumber,
        SamplerStrategy::ClassBasedEffectiveNumber,
        SamplerStrategy::ClassBalanced,
    ] {
        let probs = class_probs(&counts, &cloud, &SamplerSpec::with_strategy(s))?;
        let emp = empirical_class_frequencies(&mut rng.child(&s.to_string()), &probs, 1_000_000);
        let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
        println!("\n{s:>4} analytic  {}", fmt(probs.selection.data()));
        println!("{s:>4} empirical {}", fmt(&emp));
        if let Some(beta) = &probs.beta {
            println!("{s:>4} beta      {}", beta.data().iter().map(|b| format!("{b:.5}")).collect::<Vec<_>>().join(" "));
        }
    }

    // One CBEN batch over a dataset's index pools.
    let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(j, &n)| std::iter::repeat_n(j, n)).collect();
    let pools = class_pools(&labels, counts.len());
    let probs = class_probs(&counts, &cloud, &SamplerSpec::default())?;
    let batch = draw_batch(&mut rng.child("batch"), &probs, &pools, 16)?;
    let classes: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
    println!("\nCBEN batch classes {classes:?}");
    Ok(())
}
