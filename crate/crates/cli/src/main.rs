use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use midistill::infotheory::{BinningConfig, BinningStrategy};
use midistill::pipeline::{self, Mode, PipelineConfig, PipelineError, Report};

/// Information-theoretic feature selection and reduction for malware
/// traffic datasets.
#[derive(Parser, Debug)]
#[command(name = "mi-distill", version, about)]
struct Cli {
    #[command(subcommand)]
    mode: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tampering audit, backward elimination and the Optimized dataset.
    Fs(Common),
    /// RRw weights over the Optimized features; needs an `fs` report.
    Rrw(Common),
    /// Autoencoder reduction to an MDRt-wide latent dataset.
    Ae(Common),
    /// Train and score the MLP detector on a dataset.
    Evaluate(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// Dataset CSV; a `<name>.meta.json` sidecar is picked up if present.
    #[arg(long)]
    input: PathBuf,
    /// Name of the 0/1 label column.
    #[arg(long, default_value = "label")]
    label: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    bins: usize,
    /// equal_frequency or equal_width
    #[arg(long, default_value = "equal_frequency")]
    binning: BinningStrategy,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Minimum accuracy, precision and recall the gate must keep.
    #[arg(long, default_value_t = 0.97)]
    gamma: f64,
    /// Random features must rank in this bottom fraction to pass the audit.
    #[arg(long, default_value_t = 0.30)]
    tamper_threshold: f64,
    /// MIFS redundancy weight.
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 10)]
    batch: usize,
    /// Autoencoder bottleneck; defaults to the MDRt of the `fs` report.
    #[arg(long)]
    bottleneck: Option<usize>,
    /// Comma-separated criteria, e.g. `mRMR,MIFS`.
    #[arg(long, default_value = "mRMR,MIFS,CIFE,JMI,CMIM,DISR")]
    algorithms: String,
    /// Feature-selection report; defaults to `<out>/fs_report.json`.
    #[arg(long)]
    fs_report: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn into_config(self, mode: Mode) -> Result<PipelineConfig, PipelineError> {
        let mut config = PipelineConfig::new(mode, self.input, self.out);
        config.label = self.label;
        config.seed = self.seed;
        config.binning = BinningConfig::new(self.bins, self.binning).map_err(PipelineError::config)?;
        config.folds = self.folds;
        config.gamma = self.gamma;
        config.tamper_threshold = self.tamper_threshold;
        config.beta = self.beta;
        config.train.epochs = self.epochs;
        config.train.batch = self.batch;
        config.bottleneck = self.bottleneck;
        config.algorithms = PipelineConfig::parse_algorithms(&self.algorithms)?;
        config.fs_report = self.fs_report;
        config.validate()?;
        Ok(config)
    }
}

fn init_threads() -> Result<(), PipelineError> {
    let Ok(raw) = std::env::var("MIDISTILL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| PipelineError::config(format!("MIDISTILL_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(PipelineError::config)
}

fn summary(report: &Report) -> String {
    match report {
        Report::Fs(r) => format!(
            "mdrt {} selected by {} ({} of {} criteria kept)",
            r.mdrt,
            r.selected_by,
            r.suite.len(),
            r.config.algorithms.len()
        ),
        Report::Rrw(r) => format!("weighted {} features", r.features.len()),
        Report::Ae(r) => format!("encoded {} features into {}", r.dataset.n_features, r.bottleneck),
        Report::Evaluate(r) => format!(
            "test accuracy {}",
            r.metrics
                .accuracy
                .value()
                .map_or_else(|| "undefined".to_string(), |a| format!("{a:.4}"))
        ),
    }
}

fn run(cli: Cli) -> Result<Report, PipelineError> {
    init_threads()?;
    let config = match cli.mode {
        Command::Fs(c) => c.into_config(Mode::Fs),
        Command::Rrw(c) => c.into_config(Mode::Rrw),
        Command::Ae(c) => c.into_config(Mode::Ae),
        Command::Evaluate(c) => c.into_config(Mode::Evaluate),
    }?;
    pipeline::run(&config)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(report) => {
            println!("{}", summary(&report));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
