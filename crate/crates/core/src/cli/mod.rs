//! The `lab` command line: config loading, the pipeline commands and the
//! ablation harness.
//!
//! ```text
//! lab <gen-data|pretrain|finetune|certify|report|ablate> --config <path>
//!     [--out <dir>] [--seed <u64>] [--override key=value ...]
//! ```
//!
//! `LAB_THREADS` caps the worker pool. Exit codes: 0 success, 2 config error,
//! 3 missing prerequisite, 4 numeric failure.

mod config;
mod experiment;
mod tables;
mod variant;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub use config::{
    apply_override, AblateConfig, DataConfig, ExperimentConfig, WorldConfig, CONFIG_VERSION,
};
pub use experiment::{
    build_denoiser, certify_stage, finetune_method, finetune_stage, generate_data, pretrain_stage,
    run_variant, seeded_finetune_config, Layout, PretrainSummary, PRETRAIN_REPORT_VERSION,
};
pub use tables::{ablation_csv, mean_std, summary_csv};
pub use variant::{method_label, Variant};

use crate::certify::EvalReport;
use crate::error::{Error, Result};
use crate::io::write_text;
use crate::net::Checkpoint;
use crate::world::Dataset;

#[derive(Debug, Parser)]
#[command(name = "lab", about = "Denoised smoothing experiments at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CommandKind {
    GenData,
    Pretrain,
    Finetune,
    Certify,
    Report,
    Ablate,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample train/test sets from the configured world.
    GenData(Common),
    /// Train the base classifier on clean samples.
    Pretrain(Common),
    /// Fine-tune the pretrained classifier on denoised copies.
    Finetune(Common),
    /// Certify the fine-tuned classifier on the test set.
    Certify(Common),
    /// Merge every eval report under the output directory into one CSV.
    Report(Common),
    /// Run the ablation matrix over the configured seeds.
    Ablate(Common),
}

#[derive(Debug, Clone, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Command {
    fn split(self) -> (CommandKind, Common) {
        match self {
            Command::GenData(c) => (CommandKind::GenData, c),
            Command::Pretrain(c) => (CommandKind::Pretrain, c),
            Command::Finetune(c) => (CommandKind::Finetune, c),
            Command::Certify(c) => (CommandKind::Certify, c),
            Command::Report(c) => (CommandKind::Report, c),
            Command::Ablate(c) => (CommandKind::Ablate, c),
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config, &common.overrides)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var("LAB_THREADS") {
        let n: usize = raw.trim().parse().ok().filter(|n| *n >= 1).ok_or_else(|| {
            Error::config(format!(
                "LAB_THREADS must be a positive integer, got `{raw}`"
            ))
        })?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::config(format!("thread pool: {e}")))
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, common) = cli.command.split();
    let result = load_config(&common).and_then(|cfg| {
        let pool = thread_pool()?;
        pool.install(|| execute(kind, &cfg))
    });
    match result {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            0
        }
        Err(e) => {
            eprintln!("lab: {e}");
            e.exit_code()
        }
    }
}

fn execute(kind: CommandKind, cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let layout = Layout::new(&cfg.output_dir);
    match kind {
        CommandKind::GenData => gen_data(cfg, &layout),
        CommandKind::Pretrain => cmd_pretrain(cfg, &layout),
        CommandKind::Finetune => cmd_finetune(cfg, &layout),
        CommandKind::Certify => cmd_certify(cfg, &layout),
        CommandKind::Report => cmd_report(&layout),
        CommandKind::Ablate => cmd_ablate(cfg, &layout),
    }
}

fn gen_data(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<String>> {
    let (train, test) = generate_data(cfg)?;
    train.save(&layout.train_data())?;
    test.save(&layout.test_data())?;
    let w = &train.world;
    Ok(vec![
        format!(
            "wrote {} and {}",
            layout.train_data().display(),
            layout.test_data().display()
        ),
        format!(
            "n_train={} n_test={} K={} d={} bayes_accuracy_train={:.4} bayes_accuracy_test={:.4}",
            train.samples.len(),
            test.samples.len(),
            w.num_classes(),
            w.dim,
            train.bayes_accuracy(),
            test.bayes_accuracy()
        ),
    ])
}

fn load_data(layout: &Layout) -> Result<(Dataset, Dataset)> {
    Ok((
        Dataset::load(&layout.train_data())?,
        Dataset::load(&layout.test_data())?,
    ))
}

fn check_world(cfg: &ExperimentConfig, data: &Dataset) -> Result<()> {
    if data.world != cfg.world.build()? {
        return Err(Error::config(
            "dataset world differs from the configured world; rerun gen-data",
        ));
    }
    Ok(())
}

fn cmd_pretrain(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<String>> {
    let (train, test) = load_data(layout)?;
    check_world(cfg, &train)?;
    let (clf, summary) = pretrain_stage(cfg, &train, &test)?;
    Checkpoint::new(clf, None).save(&layout.pretrain_checkpoint())?;
    summary.save(&layout.pretrain_report())?;
    Ok(vec![
        format!("wrote {}", layout.pretrain_checkpoint().display()),
        format!(
            "final_loss={:.6} train_accuracy={:.4} test_accuracy={:.4}",
            summary.epoch_losses.last().copied().unwrap_or(f64::NAN),
            summary.train_accuracy,
            summary.test_accuracy
        ),
    ])
}

fn cmd_finetune(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<String>> {
    let (train, _) = load_data(layout)?;
    check_world(cfg, &train)?;
    let base = Checkpoint::load(&layout.pretrain_checkpoint())?.classifier;
    let (clf, report) = finetune_stage(cfg, &cfg.finetune, base, &train, |clf, stats| {
        Checkpoint::new(clf.clone(), None).save(&layout.epoch_checkpoint(stats.epoch))
    })?;
    Checkpoint::new(clf, None).save(&layout.finetune_checkpoint())?;
    report.save(&layout.train_report())?;
    let mut lines = vec![format!(
        "method={} trainable_params={} of {}",
        finetune_method(cfg),
        report.trainable_params,
        report.base_params
    )];
    for e in &report.epochs {
        lines.push(format!(
            "epoch {:>3} sce={:.5} madv={:.5} total={:.5} mask_ratio={:.3}",
            e.epoch, e.sce, e.madv, e.total, e.mask_ratio
        ));
    }
    lines.push(format!("wrote {}", layout.finetune_checkpoint().display()));
    Ok(lines)
}

fn cmd_certify(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<String>> {
    let (_, test) = load_data(layout)?;
    check_world(cfg, &test)?;
    let clf = Checkpoint::load(&layout.finetune_checkpoint())?.classifier;
    let report = certify_stage(cfg, &clf, &test, finetune_method(cfg))?;
    report.save(&layout.eval_report())?;
    let mut lines = vec![format!(
        "method={} sigma={} acr={:.4} clean_accuracy={:.4} abstain_rate={:.4}",
        report.method, report.sigma, report.acr, report.clean_accuracy, report.abstain_rate
    )];
    for c in &report.certified_accuracy {
        lines.push(format!("certified_accuracy@{}={:.4}", c.radius, c.accuracy));
    }
    lines.push(format!("wrote {}", layout.eval_report().display()));
    Ok(lines)
}

fn find_eval_reports(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .map(|e| e.map(|e| e.path()).map_err(|err| Error::io(dir, err)))
        .collect::<Result<_>>()?;
    paths.sort();
    for p in paths {
        if p.is_dir() {
            find_eval_reports(&p, out)?;
        } else if p.file_name().and_then(|n| n.to_str()) == Some("eval.json") {
            out.push(p);
        }
    }
    Ok(())
}

fn cmd_report(layout: &Layout) -> Result<Vec<String>> {
    if !layout.root.is_dir() {
        return Err(Error::Missing(layout.root.clone()));
    }
    let mut paths = Vec::new();
    find_eval_reports(&layout.root, &mut paths)?;
    if paths.is_empty() {
        return Err(Error::Missing(layout.eval_report()));
    }
    let reports = paths
        .iter()
        .map(|p| EvalReport::load(p))
        .collect::<Result<Vec<_>>>()?;
    write_text(&layout.summary_csv(), &summary_csv(&reports)?)?;
    let mut lines: Vec<String> = reports
        .iter()
        .zip(&paths)
        .map(|(r, p)| format!("{:<16} acr={:.4}  ({})", r.method, r.acr, p.display()))
        .collect();
    lines.push(format!("wrote {}", layout.summary_csv().display()));
    Ok(lines)
}

fn cmd_ablate(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<String>> {
    let (train, test) = load_data(layout)?;
    check_world(cfg, &train)?;
    let base = Checkpoint::load(&layout.pretrain_checkpoint())?.classifier;
    let mut rows = Vec::with_capacity(cfg.ablate.variants.len());
    let mut lines = Vec::new();
    for &variant in &cfg.ablate.variants {
        let mut reps = Vec::with_capacity(cfg.ablate.seeds.len());
        for &seed in &cfg.ablate.seeds {
            let run_cfg = ExperimentConfig {
                seed,
                ..cfg.clone()
            };
            let (_, train_report, eval) = run_variant(&run_cfg, variant, &base, &train, &test)?;
            let dir = layout.ablation_run(variant, seed);
            train_report.save(&dir.join("train.json"))?;
            eval.save(&dir.join("eval.json"))?;
            lines.push(format!(
                "{:<16} seed {seed}: acr={:.4}",
                variant.name(),
                eval.acr
            ));
            reps.push(eval);
        }
        rows.push((variant.name().to_string(), reps));
    }
    write_text(&layout.ablation_csv(), &ablation_csv(&rows)?)?;
    lines.push(format!("wrote {}", layout.ablation_csv().display()));
    Ok(lines)
}
