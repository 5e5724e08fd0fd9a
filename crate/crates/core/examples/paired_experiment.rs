//! CE baseline against GCL with CBEN classifier re-training on the
//! long-tailed blob corpus, over several seeds.
//!
//!     cargo run --release --example paired_experiment -- [seeds] [out_dir]
//!
//! With an output directory, each seed's reports, traces, cloud and sampler
//! tables, test embeddings and checkpoints are written under `seed<N>/`.

use std::path::PathBuf;

use gcl::trainer::{run_experiment, EvalReport, ExperimentConfig};

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:6.2}", 100.0 * x)).unwrap_or_else(|| "     -".into())
}

fn main() -> gcl::Result<()> {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let out = args.next().map(PathBuf::from);

    let outcomes: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..seeds)
            .map(|seed| {
                s.spawn(move || {
                    run_experiment(&ExperimentConfig {
                        seed,
                        ..ExperimentConfig::default()
                    })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });

    let few = |r: &EvalReport| r.group_acc.few;
    println!("seed   ce top1  gcl top1   ce few  gcl few  gcl few (no cRT)");
    for (seed, outcome) in outcomes.into_iter().enumerate() {
        let o = outcome?;
        let (b, t) = (&o.baseline, &o.treatment);
        println!(
            "{seed:>4}    {}    {}   {}   {}   {}",
            pct(Some(b.report.top1)),
            pct(Some(t.report.top1)),
            pct(few(&b.report)),
            pct(few(&t.report)),
            pct(few(&t.stage1_report)),
        );
        if let Some(dir) = &out {
            o.write_artifacts(&dir.join(format!("seed{seed}")))?;
        }
    }
    Ok(())
}
