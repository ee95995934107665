use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use piven::bench::report::{render_summary, render_sweep, SWEEP_FILE};
use piven::bench::run::{load_source, predict_ensemble, prepare_split};
use piven::bench::{
    default_data_dir, emit_report, emit_sweep, load_report, load_sweep, preset, run_alpha_sweep,
    run_benchmark, run_hyperparam_sweep, train_ensemble, DataSource, ExperimentConfig,
};
use piven::data::{gen_sine, gen_skew_normal, Delimiter, SineSpec, TargetColumn};
use piven::loss::Variant;
use piven::metrics::MetricsRecord;
use piven::{Error, Result};

/// Environment variable naming the default output directory.
const OUT_DIR_ENV: &str = "PIVEN_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "piven",
    version,
    about = "Prediction intervals with a value prediction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one ensemble on the first split and save its members.
    Train(ExperimentArgs),
    /// Run every split and write a report.
    Bench(ExperimentArgs),
    /// Compare the interval method against QD over a grid of alphas.
    SweepAlpha {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30])]
        alphas: Vec<f64>,
    },
    /// Grid over beta and lambda.
    SweepHparam {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.5, 0.99])]
        betas: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 4.0, 15.0, 40.0])]
        lambdas: Vec<f64>,
    },
    /// Write a synthetic dataset as CSV.
    GenData {
        #[arg(long, value_enum, default_value_t = Generator::Sine)]
        kind: Generator,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.3)]
        noise_scale: f64,
        #[arg(long, default_value_t = 100.0)]
        skew_alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print a saved benchmark or sweep report.
    Report {
        /// Report directory or JSON file.
        path: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Sine,
    SkewNormal,
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    /// TOML experiment file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Start from a bundled UCI preset (boston, concrete, energy, ...).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    /// Directory searched by --preset.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Tabular dataset to load instead of the synthetic generator.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column: 0-based index, header name, or `last`.
    #[arg(long)]
    target: Option<TargetColumn>,
    #[arg(long)]
    delimiter: Option<Delimiter>,
    #[arg(long, value_delimiter = ',')]
    ignore_columns: Option<Vec<usize>>,
    /// Synthetic source: sine or skew_normal.
    #[arg(long, value_enum)]
    synthetic: Option<Generator>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    holdout_n: Option<usize>,
    /// piven, qd, poo, moi or gauss_nll.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Sigmoid steepness of the soft capture indicator.
    #[arg(long)]
    softness: Option<f64>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    /// Initial upper and lower head biases, e.g. `3,-3`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    head_bias_init: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    decay: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    validation_fraction: Option<f64>,
    #[arg(long)]
    ensemble_size: Option<usize>,
    #[arg(long)]
    splits: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// Output directory [default: $PIVEN_OUT_DIR or ./runs, plus <verb>-<dataset>].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    no_predictions: bool,
}

macro_rules! set {
    ($flag:expr => $field:expr) => {
        if let Some(v) = $flag.clone() {
            $field = v;
        }
    };
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => ExperimentConfig::from_file(path)?,
            (None, Some(name)) => {
                let dir = self.data_dir.clone().unwrap_or_else(default_data_dir);
                preset(name, &dir)
                    .ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?
            }
            (None, None) => ExperimentConfig::default(),
        };
        let d = &mut cfg.dataset;
        if let Some(path) = &self.data {
            d.source = DataSource::File;
            if d.name == "sine" {
                d.name = path
                    .file_stem()
                    .map_or_else(|| "table".into(), |s| s.to_string_lossy().into_owned());
            }
            d.path = Some(path.clone());
        }
        if let Some(g) = self.synthetic {
            d.source = match g {
                Generator::Sine => DataSource::Sine,
                Generator::SkewNormal => DataSource::SkewNormal,
            };
        }
        set!(self.target => d.target);
        set!(self.delimiter => d.delimiter);
        set!(self.ignore_columns => d.ignore_columns);
        set!(self.n => d.synthetic.n);
        set!(self.holdout_n => d.holdout_n);
        set!(self.variant => cfg.loss.variant);
        set!(self.alpha => cfg.loss.alpha);
        set!(self.beta => cfg.loss.beta);
        set!(self.lambda => cfg.loss.lambda);
        set!(self.softness => cfg.loss.s);
        set!(self.hidden => cfg.model.hidden);
        if let Some(b) = &self.head_bias_init {
            let [u, l] = b[..] else {
                return Err(Error::Config("--head-bias-init takes two values".into()));
            };
            cfg.model.head_bias_init = (u, l);
        }
        set!(self.seed => cfg.model.seed);
        set!(self.learning_rate => cfg.optimizer.learning_rate);
        set!(self.decay => cfg.optimizer.decay);
        set!(self.batch_size => cfg.optimizer.batch_size);
        set!(self.max_epochs => cfg.optimizer.max_epochs);
        set!(self.patience => cfg.optimizer.patience);
        set!(self.validation_fraction => cfg.optimizer.validation_fraction);
        set!(self.ensemble_size => cfg.ensemble_size);
        set!(self.splits => cfg.splits.count);
        set!(self.test_fraction => cfg.splits.test_fraction);
        set!(self.split_seed => cfg.splits.seed);
        if self.out.is_some() {
            cfg.report.dir = self.out.clone();
        }
        if self.no_predictions {
            cfg.report.persist_predictions = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn out_dir(cfg: &ExperimentConfig, verb: &str) -> PathBuf {
    cfg.report.dir.clone().unwrap_or_else(|| {
        std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(format!("{verb}-{}", cfg.dataset.name))
    })
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn train(args: &ExperimentArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let source = load_source(&cfg)?;
    let split = prepare_split(&cfg, &source, 0)?;
    let members = train_ensemble(&cfg, cfg.model.seed, &split.train, split.valid.as_ref())?;
    let out = predict_ensemble(&members, &split.test, cfg.loss.variant, cfg.loss.alpha)?;
    let y = split.test.targets.to_vec();
    let m = MetricsRecord::compute(&y, &out.lower, &out.upper, &out.value)?;
    for (j, member) in members.iter().enumerate() {
        println!(
            "member {j}: seed {} epochs {} best {}",
            member.seed, member.history.epochs_run, member.history.best_epoch
        );
    }
    println!(
        "test (standardized): PICP {:.4} MPIW {:.4} RMSE {:.4} MAE {:.4}",
        m.picp, m.mpiw, m.rmse, m.mae
    );
    let dir = out_dir(&cfg, "train");
    std::fs::create_dir_all(&dir).map_err(|e| piven_io(&dir, e))?;
    let models = dir.join("models.json");
    let text = serde_json::to_string(&serde_json::json!({
        "config": cfg,
        "normalization": split.stats,
        "members": members,
    }))
    .map_err(|e| Error::Format {
        path: models.clone(),
        message: e.to_string(),
    })?;
    std::fs::write(&models, text).map_err(|e| piven_io(&models, e))?;
    print_written(&[models]);
    Ok(0)
}

fn piven_io(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn bench(args: &ExperimentArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let report = run_benchmark(&cfg)?;
    print!("{}", render_summary(&report));
    print_written(&emit_report(&report, &out_dir(&cfg, "bench"))?);
    Ok(report.failures.first().map_or(0, |f| f.exit_code))
}

fn report(path: &Path) -> Result<i32> {
    let is_sweep =
        path.join(SWEEP_FILE).exists() || path.file_name().is_some_and(|n| n == SWEEP_FILE);
    if is_sweep {
        print!("{}", render_sweep(&load_sweep(path)?));
        return Ok(0);
    }
    let report = load_report(path)?;
    print!("{}", render_summary(&report));
    if !report.predictions.is_empty() {
        let recomputed: Vec<f64> = report
            .predictions
            .iter()
            .map(|p| MetricsRecord::compute(&p.y, &p.lower, &p.upper, &p.value).map(|m| m.picp))
            .collect::<Result<_>>()?;
        println!(
            "per-split PICP from predictions: {}",
            recomputed
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        );
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Train(args) => train(&args),
        Command::Bench(args) => bench(&args),
        Command::SweepAlpha { exp, alphas } => {
            let cfg = exp.resolve()?;
            let sweep = run_alpha_sweep(&cfg, &alphas)?;
            print!("{}", render_sweep(&sweep));
            print_written(&emit_sweep(&sweep, &out_dir(&cfg, "sweep-alpha"))?);
            Ok(0)
        }
        Command::SweepHparam {
            exp,
            betas,
            lambdas,
        } => {
            let cfg = exp.resolve()?;
            let sweep = run_hyperparam_sweep(&cfg, &betas, &lambdas)?;
            print!("{}", render_sweep(&sweep));
            print_written(&emit_sweep(&sweep, &out_dir(&cfg, "sweep-hparam"))?);
            Ok(0)
        }
        Command::GenData {
            kind,
            n,
            seed,
            noise_scale,
            skew_alpha,
            out,
        } => {
            let spec = SineSpec {
                n,
                noise_scale,
                skew_alpha,
                ..SineSpec::default()
            };
            let ds = match kind {
                Generator::Sine => gen_sine(&spec, seed)?,
                Generator::SkewNormal => gen_skew_normal(&spec, seed)?,
            };
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|e| piven_io(parent, e))?;
            }
            ds.write_csv(&out)?;
            print_written(&[out]);
            Ok(0)
        }
        Command::Report { path } => report(&path),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
