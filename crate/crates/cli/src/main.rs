mod output;
mod svg;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::{json, Value};

use hmgcp::checkpoint::Checkpoint;
use hmgcp::evaluation::{evaluate_model, TllRegion};
use hmgcp::experiment::{preset, run_experiment, ExperimentConfig};
use hmgcp::inference::posterior_bands;
use hmgcp::simulate::{simulate_dataset, GroundTruth, SimConfig};
use hmgcp::{
    fit, load_dataset, Domain, FitConfig, HeterogeneousDataset, LmcHyperparams, MaskBox, RbfParams,
};

use output::{out_dir, with_metadata, write_json, write_text, Metadata, METADATA};

/// Heterogeneous multi-task Gaussian Cox process inference.
#[derive(Parser)]
#[command(name = "hmgcp", version)]
struct Cli {
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic dataset and its ground truth.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Named preset; `--config` takes a simulation config instead.
        #[arg(long)]
        preset: Option<String>,
    },
    /// Fit the model to a dataset.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Take fit settings and initial hyperparameters from a preset.
        #[arg(long)]
        preset: Option<String>,
        /// Initialise hyperparameters from a ground-truth file.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Posterior mean and one-sd band of every task on a lattice.
    Predict {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Lattice points per dimension.
        #[arg(long, num_args = 1.., value_delimiter = ',')]
        grid: Option<Vec<usize>>,
        /// Also write one SVG per task.
        #[arg(long)]
        svg: bool,
    },
    /// EE and TLL of a fitted model.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// JSON array with one mask box (or null) per task.
        #[arg(long)]
        masks: Option<PathBuf>,
        /// Integrate Cox TLL over the whole domain even for masked tasks.
        #[arg(long)]
        full_domain: bool,
    },
    /// Replicated missing-gap experiment on a preset.
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        preset: String,
        #[arg(long)]
        width: Option<f64>,
        #[arg(long)]
        replicates: Option<usize>,
        /// Also fit each Cox task on its own.
        #[arg(long)]
        baseline: bool,
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// `fit --config` file.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct FitFile {
    fit: Option<FitConfig>,
    init: Option<LmcHyperparams>,
}

/// `predict --config` file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
struct PredictConfig {
    grid_counts: Option<Vec<usize>>,
    samples: usize,
    seed: u64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        PredictConfig {
            grid_counts: None,
            samples: 100,
            seed: 0,
        }
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut value: Value =
        serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
    if let Value::Object(map) = &mut value {
        map.remove(METADATA);
    }
    serde_json::from_value(value)
        .with_context(|| format!("unexpected content in {}", path.display()))
}

fn load_model(path: &Path) -> Result<(hmgcp::FittedModel, FitConfig)> {
    let ckpt: Checkpoint = read_json(path)?;
    let config = ckpt.config.clone();
    Ok((ckpt.into_model()?, config))
}

/// Starting hyperparameters when neither a preset nor a config supplies them:
/// two shared basis kernels at a tenth and a third of the mean extent.
fn default_init(dataset: &HeterogeneousDataset) -> Result<LmcHyperparams> {
    let d = &dataset.domain;
    let extent = (0..d.dims()).map(|k| d.extent(k)).sum::<f64>() / d.dims() as f64;
    let kernels = vec![
        RbfParams::new(1.0, (10.0 / extent).powi(2))?,
        RbfParams::new(1.0, (3.0 / extent).powi(2))?,
    ];
    let weights = (0..dataset.num_tasks())
        .map(|i| vec![1.0, if i % 2 == 0 { 0.5 } else { -0.5 }])
        .collect();
    Ok(LmcHyperparams::new(
        kernels,
        weights,
        vec![0.1; dataset.regression.len()],
    )?)
}

fn cmd_simulate(common: Common, preset_name: Option<String>) -> Result<()> {
    let sim: SimConfig = match (&preset_name, &common.config) {
        (Some(name), None) => preset(name)?.sim,
        (None, Some(path)) => read_json(path)?,
        _ => bail!("simulate needs exactly one of --preset or --config"),
    };
    let seed = common.seed.unwrap_or(0);
    let meta = Metadata {
        command: "simulate",
        config: json!({ "preset": preset_name, "sim": sim }),
        seed: Some(seed),
    };
    let (dataset, truth) = simulate_dataset(&sim, seed)?;
    let dir = out_dir(&common.out)?;
    let data: Value = serde_json::from_str(&dataset.to_json())?;
    write_json(
        &dir.join("dataset.json"),
        &with_metadata(data, &meta, None)?,
    )?;
    write_json(
        &dir.join("ground_truth.json"),
        &with_metadata(&truth, &meta, None)?,
    )?;
    info!(
        "wrote dataset.json and ground_truth.json to {}",
        dir.display()
    );
    Ok(())
}

struct FitArgs {
    data: PathBuf,
    preset: Option<String>,
    truth: Option<PathBuf>,
    max_iter: Option<usize>,
    tol: Option<f64>,
}

fn cmd_fit(common: Common, args: FitArgs) -> Result<()> {
    let dataset = load_dataset(&args.data)?;
    let mut config = FitConfig::default();
    let mut init = None;
    if let Some(name) = &args.preset {
        let p = preset(name)?;
        config = p.fit;
        init = Some(p.sim.hyperparams);
    }
    if let Some(path) = &common.config {
        let file: FitFile = read_json(path)?;
        if let Some(f) = file.fit {
            config = f;
        }
        init = file.init.or(init);
    }
    if let Some(path) = &args.truth {
        let truth: GroundTruth = read_json(path)?;
        init = Some(truth.hyperparams);
    }
    let init = match init {
        Some(h) => h,
        None => default_init(&dataset)?,
    };
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if let Some(n) = args.max_iter {
        config.max_iters = n;
    }
    if let Some(t) = args.tol {
        config.tol = t;
    }
    let meta = Metadata {
        command: "fit",
        config: json!({ "data": args.data, "fit": config, "init": init }),
        seed: Some(config.seed),
    };
    let dir = out_dir(&common.out)?;
    let checkpoint_path = dir.join("checkpoint.json");

    match fit(&dataset, &init, &config) {
        Ok((model, mut report)) => {
            let ckpt = Checkpoint::from_model(&model, &config);
            write_json(&checkpoint_path, &with_metadata(&ckpt, &meta, None)?)?;
            let elapsed = std::mem::take(&mut report.elapsed_seconds);
            let mut value =
                with_metadata(&report, &meta, Some(json!({ "elapsed_seconds": elapsed })))?;
            value
                .as_object_mut()
                .expect("object")
                .remove("elapsed_seconds");
            write_json(&dir.join("fit_report.json"), &value)?;
            info!(
                "{} after {} sweeps; wrote checkpoint.json and fit_report.json to {}",
                if report.converged {
                    "converged"
                } else {
                    "stopped"
                },
                report.iterations,
                dir.display()
            );
            Ok(())
        }
        Err(hmgcp::Error::Diverged {
            sweep,
            reason,
            last,
        }) => {
            if let Some(model) = &last {
                let ckpt = Checkpoint::from_model(model, &config);
                write_json(&checkpoint_path, &with_metadata(&ckpt, &meta, None)?)?;
                warn!(
                    "saved the last finite state to {}",
                    checkpoint_path.display()
                );
            }
            Err(hmgcp::Error::Diverged {
                sweep,
                reason,
                last,
            }
            .into())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_predict(
    common: Common,
    checkpoint: PathBuf,
    grid: Option<Vec<usize>>,
    svg_out: bool,
) -> Result<()> {
    let mut cfg: PredictConfig = match &common.config {
        Some(path) => read_json(path)?,
        None => PredictConfig::default(),
    };
    if grid.is_some() {
        cfg.grid_counts = grid;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    let (model, _) = load_model(&checkpoint)?;
    let domain: &Domain = model.domain();
    let counts = match &cfg.grid_counts {
        Some(c) if c.len() == 1 => vec![c[0]; domain.dims()],
        Some(c) => c.clone(),
        None => vec![200; domain.dims()],
    };
    let points = domain.lattice(&counts)?;
    let meta = Metadata {
        command: "predict",
        config: json!({ "checkpoint": checkpoint, "grid_counts": counts, "samples": cfg.samples }),
        seed: Some(cfg.seed),
    };

    let mut text = meta.csv_header();
    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = (0..domain.dims()).map(|d| format!("x{d}")).collect();
    header.extend(["task", "mean", "lower", "upper"].map(String::from));
    csv.write_record(&header)?;

    let dir = out_dir(&common.out)?;
    for task in 0..model.num_tasks() {
        let bands = posterior_bands(&model, task, &points, cfg.samples, cfg.seed)?;
        for (x, b) in points.iter().zip(&bands) {
            let mut row: Vec<String> = x.iter().map(f64::to_string).collect();
            row.push(task.to_string());
            row.extend([b.mean, b.lower, b.upper].map(|v| v.to_string()));
            csv.write_record(&row)?;
        }
        if svg_out {
            let title = format!("task {task} ({})", model.kinds[task].as_str());
            let picture = match domain.dims() {
                1 => {
                    let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
                    let col = |f: fn(&hmgcp::inference::Band) -> f64| {
                        bands.iter().map(f).collect::<Vec<_>>()
                    };
                    Some(svg::band_plot(
                        &title,
                        &xs,
                        &col(|b| b.mean),
                        &col(|b| b.lower),
                        &col(|b| b.upper),
                    ))
                }
                2 => {
                    let means: Vec<f64> = bands.iter().map(|b| b.mean).collect();
                    Some(svg::heatmap(&title, counts[0], counts[1], &means))
                }
                d => {
                    warn!("no SVG for {d}-dimensional inputs");
                    None
                }
            };
            if let Some(p) = picture {
                write_text(&dir.join(format!("task{task}.svg")), &p)?;
            }
        }
    }
    text.push_str(std::str::from_utf8(&csv.into_inner()?)?);
    write_text(&dir.join("predictions.csv"), &text)?;
    info!(
        "wrote predictions.csv ({} rows) to {}",
        points.len() * model.num_tasks(),
        dir.display()
    );
    Ok(())
}

struct EvaluateArgs {
    checkpoint: PathBuf,
    test: PathBuf,
    train: Option<PathBuf>,
    truth: Option<PathBuf>,
    masks: Option<PathBuf>,
    full_domain: bool,
}

fn cmd_evaluate(common: Common, args: EvaluateArgs) -> Result<()> {
    if common.config.is_some() {
        warn!("evaluate takes no config file; ignoring --config");
    }
    let (model, config) = load_model(&args.checkpoint)?;
    let test = load_dataset(&args.test)?;
    let train = match &args.train {
        Some(p) => load_dataset(p)?,
        None => test.emptied(),
    };
    let truth: Option<GroundTruth> = args.truth.as_deref().map(read_json).transpose()?;
    let masks: Vec<Option<MaskBox>> = match &args.masks {
        Some(p) => read_json(p)?,
        None => vec![None; test.num_tasks()],
    };
    if masks.len() != test.num_tasks() {
        bail!("expected {} masks, got {}", test.num_tasks(), masks.len());
    }
    let regions: Vec<TllRegion> = masks
        .iter()
        .map(|m| match m {
            Some(b) if !args.full_domain => TllRegion::Mask(b.clone()),
            _ => TllRegion::FullDomain,
        })
        .collect();
    let metrics = evaluate_model(
        &model,
        &train,
        &test,
        truth.as_ref(),
        &regions,
        &config.quadrature_counts,
    )?;
    let meta = Metadata {
        command: "evaluate",
        config: json!({
            "checkpoint": args.checkpoint,
            "test": args.test,
            "train": args.train,
            "truth": args.truth,
            "masks": masks,
            "full_domain": args.full_domain,
        }),
        seed: common.seed,
    };
    let dir = out_dir(&common.out)?;
    write_json(
        &dir.join("metrics.json"),
        &with_metadata(json!({ "tasks": metrics }), &meta, None)?,
    )?;
    info!("wrote metrics.json to {}", dir.display());
    Ok(())
}

struct ExperimentArgs {
    preset: String,
    width: Option<f64>,
    replicates: Option<usize>,
    baseline: bool,
    threads: Option<usize>,
}

fn cmd_experiment(common: Common, args: ExperimentArgs) -> Result<()> {
    let p = preset(&args.preset)?;
    let mut cfg: ExperimentConfig = match &common.config {
        Some(path) => read_json(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(w) = args.width {
        cfg.width = w;
    }
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = common.seed {
        cfg.base_seed = s;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    cfg.single_task_baseline |= args.baseline;
    // thread count does not change results, so it stays out of the hash
    let mut hashed = serde_json::to_value(&cfg)?;
    hashed.as_object_mut().expect("object").remove("threads");
    let meta = Metadata {
        command: "experiment",
        config: json!({ "preset": args.preset, "experiment": hashed }),
        seed: Some(cfg.base_seed),
    };

    let summary = run_experiment(&p, &cfg)?;
    let mut value = serde_json::to_value(&summary)?;
    let mut elapsed = Vec::new();
    if let Some(reps) = value.get_mut("replicates").and_then(Value::as_array_mut) {
        for r in reps {
            if let Some(obj) = r.as_object_mut() {
                elapsed.push(obj.remove("elapsed_seconds").unwrap_or(Value::Null));
            }
        }
    }
    let value = with_metadata(value, &meta, Some(json!({ "elapsed_seconds": elapsed })))?;
    let dir = out_dir(&common.out)?;
    let name = format!("experiment-{}-w{}.json", args.preset, cfg.width);
    write_json(&dir.join(&name), &value)?;
    info!(
        "EE(Cox-sum) {:.4} ± {:.4} over {} replicates; wrote {}",
        summary.ee_cox_sum.mean,
        summary.ee_cox_sum.sd,
        cfg.replicates,
        dir.join(&name).display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, preset } => cmd_simulate(common, preset),
        Command::Fit {
            common,
            data,
            preset,
            truth,
            max_iter,
            tol,
        } => cmd_fit(
            common,
            FitArgs {
                data,
                preset,
                truth,
                max_iter,
                tol,
            },
        ),
        Command::Predict {
            common,
            checkpoint,
            grid,
            svg,
        } => cmd_predict(common, checkpoint, grid, svg),
        Command::Evaluate {
            common,
            checkpoint,
            test,
            train,
            truth,
            masks,
            full_domain,
        } => cmd_evaluate(
            common,
            EvaluateArgs {
                checkpoint,
                test,
                train,
                truth,
                masks,
                full_domain,
            },
        ),
        Command::Experiment {
            common,
            preset,
            width,
            replicates,
            baseline,
            threads,
        } => cmd_experiment(
            common,
            ExperimentArgs {
                preset,
                width,
                replicates,
                baseline,
                threads,
            },
        ),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numerical = e
                .downcast_ref::<hmgcp::Error>()
                .is_some_and(hmgcp::Error::is_numerical);
            ExitCode::from(if numerical { 1 } else { 2 })
        }
    }
}
