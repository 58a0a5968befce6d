//! Command-line front end: `run` one mode on a dataset, `sweep` a grid,
//! `synth` a correlated vote file, `metrics` recomputed from a log.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use camvo::harness::dataset::{load_dataset, shuffle, Dataset};
use camvo::harness::engine::{self, RunOutput};
use camvo::harness::metrics::{self, per_label_from_pairs};
use camvo::harness::runcfg::{load_config, FileConfig};
use camvo::harness::sweep::{self, SweepGrid};
use camvo::linalg::Matrix;
use camvo::synthgen::{self, SyntheticConfig};
use camvo::types::{ConfidenceMethod, Mode, PolicyConfig};

#[derive(Parser)]
#[command(
    name = "camvo",
    about = "Cost-aware majority voting over annotator pools",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label a dataset with one mode and write the round log and summary.
    Run(RunArgs),
    /// Run a (delta, k_min, seed) grid and write the sweep table.
    Sweep(SweepArgs),
    /// Generate a synthetic correlated vote dataset.
    Synth(SynthArgs),
    /// Recompute metrics from a per-round log.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct PolicyFlags {
    /// Configuration file (key = value lines); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// camvo | ccamvo | baseline | full_majority
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    k_min: Option<usize>,
    #[arg(long)]
    alpha_explore: Option<f64>,
    #[arg(long)]
    lambda_l: Option<f64>,
    #[arg(long)]
    lambda_r: Option<f64>,
    /// exact | beta_cdf | monte_carlo
    #[arg(long)]
    confidence_method: Option<String>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    variance_floor: Option<f64>,
}

impl PolicyFlags {
    fn resolve(&self, seed: u64) -> Result<(PolicyConfig, PathBuf, FileConfig)> {
        let file = match &self.config {
            Some(path) => load_config(path).with_context(|| format!("reading {path:?}"))?,
            None => FileConfig {
                policy: PolicyConfig::default(),
                dataset: None,
                deltas: None,
                k_mins: None,
                seeds: None,
            },
        };
        let mut policy = file.policy.clone();
        policy.seed = seed;
        if let Some(m) = &self.mode {
            policy.mode = Mode::from_str(m)?;
        }
        if let Some(v) = self.delta {
            policy.delta = v;
        }
        if let Some(v) = self.k_min {
            policy.k_min = v;
        }
        if let Some(v) = self.alpha_explore {
            policy.alpha_explore = v;
        }
        if let Some(v) = self.lambda_l {
            policy.lambda_l = v;
        }
        if let Some(v) = self.lambda_r {
            policy.lambda_r = v;
        }
        if let Some(m) = &self.confidence_method {
            policy.confidence_method = ConfidenceMethod::from_str(m)?;
        }
        if let Some(v) = self.mc_samples {
            policy.mc_samples = v;
        }
        if let Some(v) = self.variance_floor {
            policy.variance_floor = v;
        }
        let dataset = self
            .dataset
            .clone()
            .or_else(|| file.dataset.clone())
            .context("no dataset given (use --dataset or a config file)")?;
        Ok((policy, dataset, file))
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    policy: PolicyFlags,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    policy: PolicyFlags,
    /// Base seed; used as the single sweep seed when the grid gives none.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated threshold grid, e.g. 0.9,0.8.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Comma-separated k_min grid, e.g. 1,3.
    #[arg(long, value_delimiter = ',')]
    k_mins: Option<Vec<usize>>,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Also write per-cell round logs and summaries under out-dir/cells.
    #[arg(long)]
    keep_cell_logs: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    rounds: usize,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    alpha_ctx: f64,
    /// Uniform off-diagonal target correlation.
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Label alphabet size.
    #[arg(long, default_value_t = 4)]
    labels: u32,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Rescale latent scores so marginals match the targets exactly.
    #[arg(long)]
    standardize_latent: bool,
    /// Named cost/accuracy preset (currently: mmlu).
    #[arg(long)]
    preset: Option<String>,
    /// Per-arm accuracies; required unless --preset is given.
    #[arg(long, value_delimiter = ',')]
    mu: Option<Vec<f64>>,
    /// Per-arm costs in currency per million tokens.
    #[arg(long, value_delimiter = ',')]
    costs_per_mtok: Option<Vec<f64>>,
}

#[derive(Args)]
struct MetricsArgs {
    /// Per-round log written by `run` or `sweep`.
    #[arg(long)]
    log: PathBuf,
    /// Label alphabet size; inferred from the log when omitted.
    #[arg(long)]
    labels: Option<u32>,
    /// Write the summary JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Metrics(args) => cmd_metrics(args),
    }
}

fn load_and_order(dataset_path: &Path, seed: u64) -> Result<Dataset> {
    let mut ds = load_dataset(dataset_path).with_context(|| format!("loading {dataset_path:?}"))?;
    shuffle(&mut ds.instances, seed);
    Ok(ds)
}

fn write_run_output(out_dir: &Path, output: &mut RunOutput) -> Result<()> {
    fs::create_dir_all(out_dir)?;
    let log_path = out_dir.join("rounds.csv");
    let file = fs::File::create(&log_path)?;
    metrics::write_round_log(std::io::BufWriter::new(file), &output.rounds)?;
    output.summary.log_path = Some(log_path.display().to_string());
    let mut json = serde_json::to_string_pretty(&output.summary)?;
    json.push('\n');
    fs::write(out_dir.join("summary.json"), json)?;
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (policy, dataset_path, _) = args.policy.resolve(args.seed)?;
    let ds = load_and_order(&dataset_path, args.seed)?;
    let arms = ds.header.arm_specs();
    let mut output = engine::run(&policy, &arms, &ds.instances, ds.header.shape())?;
    output.summary.token_fallback_used = ds.token_fallback_used;
    write_run_output(&args.out_dir, &mut output)?;
    let acc = output
        .summary
        .accuracy
        .map(|a| format!("{:.4}", a))
        .unwrap_or_else(|| "n/a".into());
    println!(
        "mode={} rounds={} accuracy={} cost_per_mtok={:.4} fallbacks={}",
        output.summary.mode.as_str(),
        output.summary.total_rounds,
        acc,
        output.summary.cost_per_million_tokens,
        output.summary.fallback_count,
    );
    println!("wrote {}", args.out_dir.join("summary.json").display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let (policy, dataset_path, file) = args.policy.resolve(args.seed)?;
    let grid = SweepGrid {
        deltas: args
            .deltas
            .or(file.deltas)
            .unwrap_or_else(|| vec![policy.delta]),
        k_mins: args
            .k_mins
            .or(file.k_mins)
            .unwrap_or_else(|| vec![policy.k_min]),
        seeds: args.seeds.or(file.seeds).unwrap_or_else(|| vec![args.seed]),
    };
    let ds = load_dataset(&dataset_path).with_context(|| format!("loading {dataset_path:?}"))?;
    let arms = ds.header.arm_specs();
    let cells = sweep::run_sweep(&policy, &arms, &ds.instances, ds.header.shape(), &grid)?;
    fs::create_dir_all(&args.out_dir)?;
    let rows: Vec<_> = cells.iter().map(|c| c.row.clone()).collect();
    let table_path = args.out_dir.join("sweep.csv");
    let file = fs::File::create(&table_path)?;
    sweep::write_sweep_csv(std::io::BufWriter::new(file), &rows)?;
    if args.keep_cell_logs {
        for cell in &cells {
            let dir = args.out_dir.join("cells").join(format!(
                "delta{}_k{}_seed{}",
                cell.row.delta, cell.row.k_min, cell.row.seed
            ));
            let mut output = cell.output.clone();
            output.summary.token_fallback_used = ds.token_fallback_used;
            write_run_output(&dir, &mut output)?;
        }
    }
    println!("wrote {} ({} cells)", table_path.display(), cells.len());
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let (names, costs_per_mtok, mu) = match (args.preset.as_deref(), args.mu, args.costs_per_mtok)
    {
        (Some("mmlu"), None, None) => {
            let p = synthgen::mmlu_preset();
            (p.names, p.cost_per_mtok, p.mu)
        }
        (Some("mmlu"), _, _) => bail!("--preset cannot be combined with --mu/--costs-per-mtok"),
        (Some(other), _, _) => bail!("unknown preset '{other}'"),
        (None, Some(mu), Some(costs)) => {
            if mu.len() != costs.len() {
                bail!("--mu and --costs-per-mtok must have equal length");
            }
            let names = (0..mu.len()).map(|i| format!("arm-{i}")).collect();
            (names, costs, mu)
        }
        (None, _, _) => bail!("give either --preset mmlu or both --mu and --costs-per-mtok"),
    };
    let k = mu.len();
    let config = SyntheticConfig {
        rounds: args.rounds,
        arms: k,
        dim: args.dim,
        mu_targets: mu,
        c_target: uniform_target(k, args.gamma),
        alpha_ctx: args.alpha_ctx,
        sigma: args.sigma,
        seed: args.seed,
        standardize_latent: args.standardize_latent,
        num_labels: args.labels,
    };
    let cost_per_token: Vec<f64> = costs_per_mtok.iter().map(|c| c / 1e6).collect();
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file = fs::File::create(&args.out)?;
    synthgen::emit_replayable(
        &config,
        &names,
        &cost_per_token,
        std::io::BufWriter::new(file),
    )?;
    println!(
        "wrote {} ({} rounds, {k} arms)",
        args.out.display(),
        args.rounds
    );
    Ok(())
}

fn uniform_target(k: usize, gamma: f64) -> Matrix {
    synthgen::uniform_correlation(k, gamma)
}

fn cmd_metrics(args: MetricsArgs) -> Result<()> {
    let rows = metrics::read_round_log(&args.log)?;
    if rows.is_empty() {
        bail!("log {:?} has no rounds", args.log);
    }
    let with_truth = rows.iter().filter(|r| r.true_label.is_some()).count();
    if with_truth != rows.len() {
        bail!(
            "log carries true labels on {with_truth} of {} rounds; metrics need all of them",
            rows.len()
        );
    }
    let pairs: Vec<(u32, u32)> = rows
        .iter()
        .map(|r| (r.predicted, r.true_label.expect("checked above")))
        .collect();
    let labels = args.labels.unwrap_or_else(|| {
        pairs
            .iter()
            .map(|&(p, t)| p.max(t) + 1)
            .max()
            .unwrap_or(2)
            .max(2)
    });
    let hits = pairs.iter().filter(|(p, t)| p == t).count();
    let summary = serde_json::json!({
        "total_rounds": rows.len(),
        "total_cost": rows.last().map(|r| r.cum_cost).unwrap_or(0.0),
        "accuracy": hits as f64 / rows.len() as f64,
        "per_label": per_label_from_pairs(&pairs, labels),
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    match args.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}
