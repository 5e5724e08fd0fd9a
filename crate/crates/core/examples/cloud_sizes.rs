//! Per-class cloud sizes under every built-in strategy for a long-tailed
//! count profile.

use gcl::data::{longtail_counts, LongTailSpec};
use gcl::gcl::{compute_cloud_sizes, CloudStrategy};

fn main() -> gcl::Result<()> {
    let counts = longtail_counts(&LongTailSpec {
        head: 5000,
        classes: 10,
        gamma: 100.0,
    })?;
    println!("counts {counts:?}\n");
    for strategy in [
        CloudStrategy::LogDiff,
        CloudStrategy::PowDiff { exponent: 1.0 / 3.0 },
        CloudStrategy::PowDiff { exponent: 0.25 },
        CloudStrategy::Cosine,
        CloudStrategy::Zero,
    ] {
        let table = compute_cloud_sizes(&counts, strategy)?;
        let shown: Vec<String> = table.normalized().data().iter().map(|d| format!("{d:.3}")).collect();
        println!("{:<28} {}", strategy.to_string(), shown.join(" "));
    }

    println!("\nlog-diff table as CSV:");
    print!("{}", compute_cloud_sizes(&counts, CloudStrategy::LogDiff)?.to_csv());
    Ok(())
}
