//! The `gcl` command line.
//!
//! Exit codes: 0 on success, 1 on internal failures and failed checks,
//! 2 on bad flags, configs or input files.

mod config;
pub mod grad_suite;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

pub use config::{DataSection, GclSection, ModelSection, RunFile, RunSection, SamplerSection, TrainSection};

use crate::data::{balanced_test_split, load_csv_with_classes, longtail_counts, save_csv, synth_blobs, LongTailSpec};
use crate::error::{Error, Result};
use crate::gcl::{compute_cloud_sizes, CloudStrategy};
use crate::model::Checkpoint;
use crate::numerics::RngStream;
use crate::sampler::{class_probs, diagnostics_csv, empirical_class_frequencies, SamplerSpec, SamplerStrategy};
use crate::trainer::{evaluate, run_arm, ExperimentConfig};
use grad_suite::{format_table, run_suite, Component, SuiteOptions};

#[derive(Debug, Parser)]
#[command(name = "gcl", version, about = "Gaussian clouded logits for long-tailed classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a long-tailed training set and a balanced test set.
    GenData(GenDataArgs),
    /// Two-stage training from a TOML config.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the config's test set.
    Eval(EvalArgs),
    /// Compare analytic gradients against finite differences.
    GradCheck(GradCheckArgs),
    /// Compare sampler probabilities against Monte-Carlo frequencies.
    SamplerCheck(SamplerCheckArgs),
    /// Print a finished run, or the cloud and sampler tables for a config.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Output directory (created if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    /// Training samples in the most frequent class.
    #[arg(long, default_value_t = 500)]
    pub head: usize,
    /// Imbalance ratio between the head and tail class.
    #[arg(long, default_value_t = 100.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = ExperimentConfig::default().blobs.center_scale)]
    pub center_scale: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_std: f64,
    #[arg(long, default_value_t = 200)]
    pub test_per_class: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `run.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tolerance: f64,
    /// Random shapes and seeds per component.
    #[arg(long, default_value_t = 20)]
    pub cases: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Test hook: negate one component's analytic gradient.
    #[arg(long, value_name = "COMPONENT")]
    pub inject_sign_flip: Option<String>,
}

#[derive(Debug, Args)]
pub struct SamplerCheckArgs {
    /// Comma-separated class counts; overrides the long-tail profile flags.
    #[arg(long, value_delimiter = ',')]
    pub counts: Option<Vec<usize>>,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 500)]
    pub head: usize,
    #[arg(long, default_value_t = 100.0)]
    pub gamma: f64,
    /// Strategies to check (ib, cb, en, cben); all four by default.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<String>,
    /// Cloud-size strategy feeding CBEN.
    #[arg(long, default_value = "log-diff")]
    pub cloud: String,
    #[arg(long, default_value_t = 0.999)]
    pub a: f64,
    #[arg(long, default_value_t = 0.0009)]
    pub b: f64,
    #[arg(long, default_value_t = 0.999)]
    pub en_beta: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub draws: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted absolute deviation per class.
    #[arg(long, default_value_t = 0.005)]
    pub tolerance: f64,
    /// Also write one diagnostics CSV per strategy here.
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ReportArgs {
    /// A directory written by `gcl train`.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// A run config; prints the data summary, cloud sizes and sampler table.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Whether a command succeeded or a check it ran failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    CheckFailed,
}

/// Parses `args` (including the program name), runs the command and maps
/// the result to an exit code.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_user_error() { 2 } else { 1 })
        }
    }
}

pub fn main() -> ExitCode {
    main_from(std::env::args_os())
}

pub fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::GenData(a) => gen_data(&a),
        Command::Train(a) => train(&a),
        Command::Eval(a) => eval(&a),
        Command::GradCheck(a) => grad_check(&a),
        Command::SamplerCheck(a) => sampler_check(&a),
        Command::Report(a) => report(&a),
    }
}

/// Creates `dir`, refusing to reuse a non-empty one unless `force`.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if let Ok(mut entries) = fs::read_dir(dir) {
        if entries.next().is_some() && !force {
            return Err(Error::Config(format!(
                "output directory {} is not empty (pass --force to write into it)",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, body).map_err(|e| Error::io(&p, e))
}

fn gen_data(a: &GenDataArgs) -> Result<Status> {
    let out = a.out.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    let lt = LongTailSpec {
        head: a.head,
        classes: a.classes,
        gamma: a.gamma,
    };
    let blobs = crate::data::BlobSpec {
        classes: a.classes,
        dim: a.dim,
        center_scale: a.center_scale,
        noise_std: a.noise_std,
    };
    let counts = longtail_counts(&lt).map_err(|e| Error::Config(e.to_string()))?;
    let data = RngStream::new(a.seed).child("data");
    let train = synth_blobs(&data, &blobs, &counts).map_err(|e| Error::Config(e.to_string()))?;
    let test = balanced_test_split(&data, &blobs, a.test_per_class).map_err(|e| Error::Config(e.to_string()))?;
    prepare_out_dir(&out, a.out.force)?;
    save_csv(&train, &out.join("train.csv"))?;
    save_csv(&test, &out.join("test.csv"))?;
    let summary = format!(
        "seed: {}\nrequested gamma: {}\ncenter_scale: {}\nnoise_std: {}\n\n[train]\n{}\n[test]\n{}",
        a.seed,
        a.gamma,
        a.center_scale,
        a.noise_std,
        train.summary(),
        test.summary()
    );
    write(&out, "summary.txt", &summary)?;
    print!("{summary}");
    println!("wrote {}", out.display());
    Ok(Status::Ok)
}

fn load_data(file: &RunFile) -> Result<(crate::data::Dataset, crate::data::Dataset)> {
    let train = load_csv_with_classes(&file.data.train, None)?;
    let test = load_csv_with_classes(&file.data.test, Some(train.classes()))?;
    if test.dim() != train.dim() {
        return Err(Error::Data(format!(
            "{} has {} features but {} has {}",
            file.data.test.display(),
            test.dim(),
            file.data.train.display(),
            train.dim()
        )));
    }
    Ok((train, test))
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn train(a: &TrainArgs) -> Result<Status> {
    let mut file = RunFile::load(&a.config)?;
    if let Some(seed) = a.seed {
        file.run.seed = seed;
    }
    let out = a.out.out.clone().unwrap_or_else(|| file.run.out.clone());
    let cfg = file.train_config()?;
    let (train, test) = load_data(&file)?;
    prepare_out_dir(&out, a.out.force)?;

    let mut snapshot = file.clone();
    snapshot.data.train = absolute(&file.data.train);
    snapshot.data.test = absolute(&file.data.test);
    snapshot.run.out = absolute(&out);
    write(&out, "config.toml", &snapshot.to_toml()?)?;

    let root = RngStream::new(file.run.seed);
    let arm = run_arm(&train, &test, &cfg, &root.child("train"))?;
    arm.write_artifacts(&out, &test)?;
    println!("{}", train.summary());
    if cfg.retrain {
        println!("after representation learning:\n{}", arm.stage1_report);
        println!("after classifier re-training:");
    }
    print!("{}", arm.report);
    println!("wrote {}", out.display());
    Ok(Status::Ok)
}

fn eval(a: &EvalArgs) -> Result<Status> {
    let file = RunFile::load(&a.config)?;
    let cfg = file.train_config()?;
    let (train, test) = load_data(&file)?;
    let ckpt = Checkpoint::load(&a.checkpoint).map_err(|e| match e {
        Error::Contract(msg) | Error::Shape(msg) | Error::Domain(msg) => {
            Error::Data(format!("{}: {msg}", a.checkpoint.display()))
        }
        e => e,
    })?;
    if ckpt.config_hash != cfg.fingerprint() {
        eprintln!("warning: checkpoint was trained with a different config");
    }
    let report = evaluate(&ckpt.model, &test, train.counts(), &cfg.groups, &cfg.gcl)?;
    print!("{report}");
    if let Some(out) = &a.out.out {
        prepare_out_dir(out, a.out.force)?;
        write(out, "report_per_class.csv", &report.per_class_csv())?;
        write(out, "report_summary.csv", &report.summary_csv())?;
        write(out, "report.txt", &report.to_string())?;
    }
    Ok(Status::Ok)
}

fn grad_check(a: &GradCheckArgs) -> Result<Status> {
    let sign_flip = a.inject_sign_flip.as_deref().map(str::parse::<Component>).transpose()?;
    if a.cases == 0 {
        return Err(Error::Config("--cases must be >= 1".into()));
    }
    let results = run_suite(&SuiteOptions {
        cases: a.cases,
        seed: a.seed,
        sign_flip,
    })?;
    print!("{}", format_table(&results, a.tolerance));
    let ok = results.iter().all(|r| r.max_rel_error <= a.tolerance);
    println!("{} (tolerance {:e})", if ok { "all components pass" } else { "gradient check FAILED" }, a.tolerance);
    Ok(if ok { Status::Ok } else { Status::CheckFailed })
}

fn sampler_check(a: &SamplerCheckArgs) -> Result<Status> {
    let counts = match &a.counts {
        Some(c) => c.clone(),
        None => longtail_counts(&LongTailSpec {
            head: a.head,
            classes: a.classes,
            gamma: a.gamma,
        })
        .map_err(|e| Error::Config(e.to_string()))?,
    };
    let strategies: Vec<SamplerStrategy> = if a.strategy.is_empty() {
        vec![
            SamplerStrategy::InstanceBalanced,
            SamplerStrategy::ClassBalanced,
            SamplerStrategy::EffectiveNumber,
            SamplerStrategy::ClassBasedEffectiveNumber,
        ]
    } else {
        a.strategy.iter().map(|s| s.parse()).collect::<Result<_>>()?
    };
    if a.draws == 0 {
        return Err(Error::Config("--draws must be >= 1".into()));
    }
    let cloud_strategy: CloudStrategy = a.cloud.parse()?;
    let cloud = compute_cloud_sizes(&counts, cloud_strategy).map_err(|e| Error::Config(e.to_string()))?;
    if let Some(out) = &a.out.out {
        prepare_out_dir(out, a.out.force)?;
    }
    let rarest = (0..counts.len()).min_by_key(|&j| (counts[j], std::cmp::Reverse(j))).unwrap_or(0);
    let root = RngStream::new(a.seed).child("sampler-check");
    let mut ok = true;
    let mut rarest_probs = Vec::new();
    for strategy in strategies {
        let spec = SamplerSpec {
            strategy,
            a: a.a,
            b: a.b,
            en_beta: a.en_beta,
        };
        let probs = class_probs(&counts, &cloud, &spec).map_err(|e| Error::Config(e.to_string()))?;
        let empirical = empirical_class_frequencies(&mut root.child(&strategy.to_string()), &probs, a.draws);
        println!("strategy {strategy} ({} draws)", a.draws);
        println!("{:>5} {:>6} {:>10} {:>10} {:>10} {:>9}", "class", "count", "rho", "analytic", "empirical", "abs_dev");
        let mut worst = 0.0f64;
        for j in 0..counts.len() {
            let dev = (empirical[j] - probs.selection[j]).abs();
            worst = worst.max(dev);
            println!(
                "{:>5} {:>6} {:>10.6} {:>10.6} {:>10.6} {:>9.6}",
                j, counts[j], probs.rho[j], probs.selection[j], empirical[j], dev
            );
        }
        let pass = worst <= a.tolerance;
        ok &= pass;
        println!("max abs deviation {worst:.6}: {}\n", if pass { "pass" } else { "FAIL" });
        rarest_probs.push((strategy, probs.selection[rarest]));
        if let Some(out) = &a.out.out {
            write(out, &format!("sampler_{strategy}.csv"), &diagnostics_csv(&counts, &probs, &empirical))?;
        }
    }
    let find = |s| rarest_probs.iter().find(|(k, _)| *k == s).map(|&(_, p)| p);
    if let (Some(ib), Some(cben), Some(cb)) = (
        find(SamplerStrategy::InstanceBalanced),
        find(SamplerStrategy::ClassBasedEffectiveNumber),
        find(SamplerStrategy::ClassBalanced),
    ) {
        let ordered = ib < cben && cben < cb;
        println!(
            "rarest class {rarest}: ib {ib:.6} < cben {cben:.6} < cb {cb:.6}: {}",
            if ordered { "holds" } else { "does NOT hold" }
        );
    }
    Ok(if ok { Status::Ok } else { Status::CheckFailed })
}

fn report(a: &ReportArgs) -> Result<Status> {
    if let Some(dir) = &a.run {
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(|e| Error::io(&p, e))
        };
        println!("run {}\n", dir.display());
        print!("{}", read("report.txt")?);
        let trace = read("loss_trace.csv")?;
        if let Some(last) = trace.lines().skip(1).last() {
            println!("\nlast trace row (iteration,lr,loss): {last}");
        }
        println!("\ncloud sizes:\n{}", read("cloud_sizes.csv")?);
        if let Ok(s) = read("sampler.csv") {
            println!("sampler:\n{s}");
        }
        return Ok(Status::Ok);
    }
    let path = a.config.as_ref().expect("clap enforces one of --run/--config");
    let file = RunFile::load(path)?;
    let cfg = file.train_config()?;
    let train = load_csv_with_classes(&file.data.train, None)?;
    print!("{}", train.summary());
    let cloud = compute_cloud_sizes(train.counts(), cfg.gcl.strategy)?;
    println!("\ncloud sizes ({}):\n{}", cfg.gcl.strategy, cloud.to_csv());
    let probs = class_probs(train.counts(), &cloud, &cfg.sampler)?;
    let analytic = probs.selection.data().to_vec();
    println!("sampler ({}), empirical column is the analytic value:\n{}", cfg.sampler.strategy, diagnostics_csv(train.counts(), &probs, &analytic));
    Ok(Status::Ok)
}
