//! Acceptance suite: one PASS/FAIL line per criterion, then a single
//! assertion that every line passed.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gcl::cli::grad_suite::{run_suite, SuiteOptions};
use gcl::data::{longtail_counts, LongTailSpec};
use gcl::gcl::{ce_loss, clouded_logits, compute_cloud_sizes, gcl_loss, CloudSizeTable, CloudStrategy, GclConfig};
use gcl::model::Model;
use gcl::numerics::{RngStream, Tensor2};
use gcl::sampler::{class_probs, empirical_class_frequencies, SamplerSpec, SamplerStrategy};
use gcl::trainer::{run_experiment, ExperimentConfig, ExperimentOutcome};

const SEEDS: u64 = 5;

struct Line {
    pass: bool,
    name: &'static str,
    detail: String,
}

fn emit(line: &Line) {
    // Written straight to stdout so the lines survive test output capture.
    let tag = if line.pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[acceptance] {tag}  {}: {}", line.name, line.detail);
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn experiment_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    }
}

fn run_seeds() -> (Vec<ExperimentOutcome>, Duration) {
    let start = Instant::now();
    let outcomes = std::thread::scope(|s| {
        let handles: Vec<_> = (0..SEEDS)
            .map(|seed| s.spawn(move || run_experiment(&experiment_config(seed)).expect("experiment failed")))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    (outcomes, start.elapsed())
}

fn experiments() -> &'static (Vec<ExperimentOutcome>, Duration) {
    static CELL: OnceLock<(Vec<ExperimentOutcome>, Duration)> = OnceLock::new();
    CELL.get_or_init(run_seeds)
}

fn random_tensor(rng: &mut RngStream, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor2 {
    let data = (0..rows * cols).map(|_| lo + (hi - lo) * rng.uniform()).collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

fn gradient_suite() -> Line {
    let start = Instant::now();
    let results = run_suite(&SuiteOptions {
        cases: 20,
        ..SuiteOptions::default()
    })
    .unwrap();
    let secs = start.elapsed().as_secs_f64();
    let worst = results.iter().map(|r| r.max_rel_error).fold(0.0, f64::max);
    let names: Vec<String> = results.iter().map(|r| r.component.to_string()).collect();
    Line {
        pass: worst <= 1e-5 && secs < 30.0,
        name: "gradient suite",
        detail: format!(
            "max rel err {worst:.2e} (limit 1e-5) over 20 cases each of {}; {secs:.2} s (limit 30 s)",
            names.join(", ")
        ),
    }
}

fn reduction_equivalence() -> Line {
    let mut rng = RngStream::new(101);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let b = 1 + rng.index(16);
        let c = 2 + rng.index(9);
        let cfg = GclConfig {
            scale: 1.0 + 59.0 * rng.uniform(),
            ..GclConfig::default()
        };
        let z = random_tensor(&mut rng, b, c, -1.0, 1.0);
        let y: Vec<usize> = (0..b).map(|_| rng.index(c)).collect();
        let table = CloudSizeTable::zeros(c);
        let g = gcl_loss(&z, &y, &table, &vec![0.0; b], &cfg).unwrap();
        let r = ce_loss(&z.scale(cfg.scale), &y).unwrap();
        worst = worst.max((g.loss - r.loss).abs());
    }
    Line {
        pass: worst <= 1e-12,
        name: "reduction equivalence",
        detail: format!("max |GCL - CE(s*z)| = {worst:.2e} over 100 random batches (limit 1e-12)"),
    }
}

fn cloud_size_oracle() -> Line {
    let t = compute_cloud_sizes(&[5000, 500, 50], CloudStrategy::LogDiff).unwrap();
    let expect = [0.0, 0.5, 1.0];
    let oracle_err = t
        .normalized()
        .data()
        .iter()
        .zip(expect)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let strategies = [
        CloudStrategy::LogDiff,
        CloudStrategy::PowDiff { exponent: 1.0 / 3.0 },
        CloudStrategy::PowDiff { exponent: 0.25 },
        CloudStrategy::Cosine,
        CloudStrategy::Zero,
    ];
    let mut rng = RngStream::new(202);
    let mut head_zero = true;
    let mut monotone = true;
    for _ in 0..200 {
        let c = 2 + rng.index(20);
        let counts: Vec<usize> = (0..c).map(|_| 1 + rng.index(5000)).collect();
        let head = (0..c).max_by_key(|&j| counts[j]).unwrap();
        for s in strategies {
            let t = compute_cloud_sizes(&counts, s).unwrap();
            let d = t.normalized().data();
            head_zero &= d[head] == 0.0 && t.raw().data()[head] == 0.0;
            for i in 0..c {
                for j in 0..c {
                    if counts[i] >= counts[j] && d[i] > d[j] {
                        monotone = false;
                    }
                }
            }
        }
    }
    Line {
        pass: oracle_err <= 1e-12 && head_zero && monotone,
        name: "cloud-size oracle",
        detail: format!(
            "log-diff [5000,500,50] -> {:?} (err {oracle_err:.1e}); head delta 0 under all strategies: {head_zero}; \
             nonincreasing in count: {monotone}",
            t.normalized().data()
        ),
    }
}

fn sampler_statistics() -> Line {
    let start = Instant::now();
    let counts = longtail_counts(&LongTailSpec {
        head: 500,
        classes: 10,
        gamma: 100.0,
    })
    .unwrap();
    let cloud = compute_cloud_sizes(&counts, CloudStrategy::LogDiff).unwrap();
    let rarest = counts.len() - 1;
    let root = RngStream::new(303);
    let mut worst = 0.0f64;
    let mut rare = Vec::new();
    for s in [
        SamplerStrategy::InstanceBalanced,
        SamplerStrategy::ClassBasedEffectiveNumber,
        SamplerStrategy::ClassBalanced,
        SamplerStrategy::EffectiveNumber,
    ] {
        let probs = class_probs(&counts, &cloud, &SamplerSpec::with_strategy(s)).unwrap();
        let emp = empirical_class_frequencies(&mut root.child(&s.to_string()), &probs, 1_000_000);
        for j in 0..counts.len() {
            worst = worst.max((emp[j] - probs.selection[j]).abs());
        }
        rare.push(probs.selection[rarest]);
    }
    let secs = start.elapsed().as_secs_f64();
    let ordered = rare[0] < rare[1] && rare[1] < rare[2];
    Line {
        pass: ordered && worst <= 0.005 && secs < 10.0,
        name: "sampler statistics",
        detail: format!(
            "rarest class: IB {:.4} < CBEN {:.4} < CB {:.4}: {ordered}; max MC deviation {worst:.5} at 1e6 draws \
             (limit 0.005); {secs:.2} s (limit 10 s)",
            rare[0], rare[1], rare[2]
        ),
    }
}

fn gap_check() -> Line {
    let mut rng = RngStream::new(404);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for _ in 0..100 {
        let b = 1 + rng.index(16);
        let c = 2 + rng.index(9);
        let cfg = GclConfig {
            scale: 1.0 + 59.0 * rng.uniform(),
            ..GclConfig::default()
        };
        let counts: Vec<usize> = (0..c).map(|_| 1 + rng.index(5000)).collect();
        let table = compute_cloud_sizes(&counts, CloudStrategy::LogDiff).unwrap();
        let delta = table.normalized().data().to_vec();
        let z = random_tensor(&mut rng, b, c, -1.0, 1.0);
        let eps: Vec<f64> = (0..b).map(|_| rng.uniform()).collect();
        let cl = clouded_logits(&z, &table, &eps, &cfg).unwrap();
        for i in 0..b {
            let y = rng.index(c);
            for j in 0..c {
                let clouded_gap = cl.get(i, y) - cl.get(i, j);
                let plain_gap = cfg.scale * (z.get(i, y) - z.get(i, j));
                let predicted = cfg.scale * eps[i] * (delta[j] - delta[y]);
                worst = worst.max(((clouded_gap - plain_gap) - predicted).abs());
                checked += 1;
            }
        }
    }
    Line {
        pass: worst <= 1e-12,
        name: "clouded gap check",
        detail: format!("max |gap shift - s*eps*(delta_j - delta_y)| = {worst:.2e} over {checked} pairs (limit 1e-12)"),
    }
}

fn few(r: &gcl::trainer::EvalReport) -> f64 {
    r.group_acc.few.expect("profile has few-shot classes")
}

fn end_to_end() -> Line {
    let (outs, elapsed) = experiments();
    let few_gain: Vec<f64> = outs.iter().map(|o| 100.0 * (few(&o.treatment.report) - few(&o.baseline.report))).collect();
    let top1_gain: Vec<f64> = outs.iter().map(|o| 100.0 * (o.treatment.report.top1 - o.baseline.report.top1)).collect();
    let (mf, mt) = (median(few_gain.clone()), median(top1_gain.clone()));
    let secs = elapsed.as_secs_f64();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:+.1}")).collect::<Vec<_>>().join(" ");
    Line {
        pass: mf >= 10.0 && mt >= 3.0 && secs < 300.0,
        name: "end-to-end paired experiment",
        detail: format!(
            "median few-group gain {mf:+.2} pts (need >= 10; seeds {}), median top-1 gain {mt:+.2} pts \
             (need >= 3; seeds {}); {secs:.1} s for {SEEDS} seeds (limit 300 s)",
            fmt(&few_gain),
            fmt(&top1_gain)
        ),
    }
}

fn ablation_without_retraining() -> Line {
    let (outs, _) = experiments();
    let gains: Vec<f64> = outs
        .iter()
        .map(|o| 100.0 * (few(&o.treatment.stage1_report) - few(&o.baseline.stage1_report)))
        .collect();
    let m = median(gains.clone());
    Line {
        pass: m > 0.0,
        name: "ablation without re-training",
        detail: format!(
            "GCL stage-1-only minus CE stage-1-only few-group accuracy, median {m:+.2} pts (seeds {:?})",
            gains.iter().map(|g| (g * 10.0).round() / 10.0).collect::<Vec<_>>()
        ),
    }
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn determinism() -> Line {
    let (first, _) = experiments();
    let (second, _) = run_seeds();
    let tmp = tempfile::tempdir().unwrap();
    let mut files = 0;
    let mut same = true;
    for (seed, (a, b)) in first.iter().zip(&second).enumerate() {
        let (da, db) = (tmp.path().join(format!("a{seed}")), tmp.path().join(format!("b{seed}")));
        a.write_artifacts(&da).unwrap();
        b.write_artifacts(&db).unwrap();
        let (fa, fb) = (dir_bytes(&da), dir_bytes(&db));
        files += fa.len();
        same &= fa == fb;
    }
    Line {
        pass: same && files > 0,
        name: "determinism",
        detail: format!("{files} artifact files (reports, traces, tables, checkpoints) byte-identical across reruns: {same}"),
    }
}

fn backbone_bits(m: &Model) -> Vec<u64> {
    m.backbone
        .layers()
        .iter()
        .flat_map(|l| l.weight.data().iter().chain(l.bias.data()).map(|v| v.to_bits()))
        .collect()
}

fn freeze_contract() -> Line {
    let (outs, _) = experiments();
    let mut frozen = true;
    let mut head_moved = true;
    for o in outs {
        let t = &o.treatment;
        frozen &= backbone_bits(&t.stage1_model) == backbone_bits(&t.model);
        head_moved &= t.stage1_model.head != t.model.head;
    }
    Line {
        pass: frozen && head_moved,
        name: "freeze contract",
        detail: format!(
            "backbone bits identical before/after re-training in all {SEEDS} seeds: {frozen}; classifier updated: {head_moved}"
        ),
    }
}

#[test]
fn acceptance() {
    let checks: [fn() -> Line; 9] = [
        gradient_suite,
        reduction_equivalence,
        cloud_size_oracle,
        sampler_statistics,
        gap_check,
        end_to_end,
        ablation_without_retraining,
        determinism,
        freeze_contract,
    ];
    let lines: Vec<Line> = checks.iter().map(|c| c()).collect();
    for l in &lines {
        emit(l);
    }
    let failed: Vec<&str> = lines.iter().filter(|l| !l.pass).map(|l| l.name).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

/// Re-training never lowers recall on the rarest class (median over seeds).
#[test]
fn retraining_keeps_rarest_class_recall() {
    let (outs, _) = experiments();
    let rarest = outs[0].train.classes() - 1;
    let diffs: Vec<f64> = outs
        .iter()
        .map(|o| o.treatment.report.per_class_acc[rarest] - o.treatment.stage1_report.per_class_acc[rarest])
        .collect();
    assert!(median(diffs.clone()) >= 0.0, "{diffs:?}");
}
