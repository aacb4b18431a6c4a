use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use passreg::baselines::MethodTag;
use passreg::data::CsvSchema;
use passreg::simgen::ScenarioId;
use passreg_cli::commands::simulated_schema;
use passreg_cli::config::RealDataConfig;
use passreg_cli::{cmd_bench, cmd_evaluate, cmd_fit, cmd_simulate, CliError, EvaluateArgs, ExperimentConfig};

#[derive(Parser)]
#[command(name = "passreg", version, about = "Surrogate-assisted sparse logistic regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one training/test split from a simulation scenario.
    Simulate(Common),
    /// Fit the configured methods on one training set.
    Fit(Common),
    /// Score a saved model on a labeled CSV.
    Evaluate(Evaluate),
    /// Run replicated comparisons of the configured methods.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<ScenarioId>,
    /// Methods to run, comma separated.
    #[arg(long, value_delimiter = ',')]
    method: Vec<MethodTag>,
    /// Labeled training rows.
    #[arg(long)]
    n: Option<usize>,
    /// Total training rows.
    #[arg(long = "N")]
    n_total: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// Training CSV for real-data mode.
    #[arg(long)]
    real_data: Option<PathBuf>,
    #[arg(long)]
    surrogate_col: Option<String>,
    #[arg(long)]
    label_col: Option<String>,
    #[arg(long)]
    utilization_col: Option<String>,
}

#[derive(Args)]
struct Evaluate {
    #[command(flatten)]
    common: Common,
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Labeled CSV to score on.
    #[arg(long)]
    test: PathBuf,
    /// Truth oracle JSON written by `simulate`.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Transform log written by `fit`, replayed on the test features.
    #[arg(long)]
    transforms: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, CliError> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if self.scenario.is_some() {
            cfg.scenario = self.scenario;
        }
        if !self.method.is_empty() {
            cfg.methods = self.method.clone();
        }
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = &self.$flag { cfg.$field = v.clone(); })*
            };
        }
        set!(n => n, n_total => n_total, p => p, test_size => test_size, seed => seed, reps => reps, out => out);
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        if self.cache_dir.is_some() {
            cfg.cache_dir = self.cache_dir.clone();
        }
        if let Some(train) = &self.real_data {
            cfg.real_data.get_or_insert_with(RealDataConfig::default).train = train.clone();
        }
        if let Some(rd) = cfg.real_data.as_mut() {
            self.apply_schema(&mut rd.schema);
        }
        Ok(cfg)
    }

    fn apply_schema(&self, schema: &mut CsvSchema) {
        if let Some(s) = &self.surrogate_col {
            schema.surrogate_col = s.clone();
        }
        if self.label_col.is_some() {
            schema.label_col = self.label_col.clone();
        }
        if self.utilization_col.is_some() {
            schema.utilization_col = self.utilization_col.clone();
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => {
            let dir = cmd_simulate(&c.resolve()?)?;
            println!("{}", dir.display());
        }
        Command::Fit(c) => {
            let out = cmd_fit(&c.resolve()?)?;
            for f in out.files {
                println!("{}", f.display());
            }
        }
        Command::Evaluate(e) => {
            let cfg = e.common.resolve()?;
            let mut schema = cfg
                .real_data
                .as_ref()
                .map_or_else(simulated_schema, |rd| rd.schema.clone());
            e.common.apply_schema(&mut schema);
            let args = EvaluateArgs {
                model: e.model,
                test: e.test,
                schema,
                truth: e.truth,
                transforms: e.transforms,
            };
            let report = cmd_evaluate(&cfg, &args)?;
            println!("{}", serde_json::to_string_pretty(&report).expect("serializable report"));
        }
        Command::Bench(c) => {
            let cfg = c.resolve()?;
            let outcome = cmd_bench(&cfg)?;
            println!(
                "{} replicates, {} failed; results in {}",
                outcome.n_replicates,
                outcome.failed_replicates,
                cfg.out.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
