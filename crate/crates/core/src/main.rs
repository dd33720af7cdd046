use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use ptcflow::bench::{self, run_suite, summary_from_runs, workers_from_env, ExperimentConfig, StrategyKind, SuiteConfig};
use ptcflow::features::Dataset;
use ptcflow::mesh::write_mesh;
use ptcflow::nn::{grid_search, train, write_grid_csv, write_log_csv, Model, TargetTransform, TrainConfig};
use ptcflow::oracle::{generate_dataset, LbfgsOptions, OracleOptions, TrainingCase};
use ptcflow::ptc::solve_nonlinear;
use ptcflow::{Error, Result};

/// Pseudo-transient continuation for stationary incompressible flow, with
/// classical and learned pseudo-time-step controllers.
#[derive(Parser)]
#[command(name = "ptcflow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh the cases of a suite and write them as text meshes.
    Mesh {
        #[command(flatten)]
        suite: SuiteArgs,
        /// Only this case.
        #[arg(long)]
        case: Option<String>,
        /// Directory for `<case>.mesh` files; without it only sizes are printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one case with one strategy.
    Solve {
        #[command(flatten)]
        suite: SuiteArgs,
        #[arg(long)]
        case: String,
        /// iter, err, nn, nc or an.
        #[arg(long, default_value = "iter")]
        strategy: String,
        /// Convergence history CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Harvest oracle training data from the cases' `snapshots`.
    GenData {
        #[command(flatten)]
        suite: SuiteArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Weight of the proximity term keeping optimal steps near the schedule.
        #[arg(long, default_value_t = OracleOptions::default().anchor)]
        anchor: f64,
        /// Objective evaluations per snapshot.
        #[arg(long, default_value_t = LbfgsOptions::default().max_evals)]
        max_evals: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the step-size network on a `gen-data` directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        /// Model file.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Cross-validate network shapes on a `gen-data` directory.
    GridSearch {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        train: TrainArgs,
        #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
        layers: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "16,32,64,128,256")]
        widths: Vec<usize>,
        #[arg(long, default_value_t = 6)]
        folds: usize,
        /// Ranked CSV.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every (case, strategy) pair of a suite and write tables and plots.
    Bench {
        #[command(flatten)]
        suite: SuiteArgs,
        /// Restrict or replace the strategies of every case.
        #[arg(long, value_delimiter = ',')]
        strategies: Option<Vec<String>>,
        /// Artifact directory; defaults to the suite's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Redraw the plots of a finished bench directory from its run CSVs.
    Plot {
        /// A `bench` output directory.
        #[arg(long)]
        runs: PathBuf,
        /// Defaults to `<runs>/plots`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SuiteArgs {
    /// Built-in suite: desk, full or desk-data.
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// Suite file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model for the `nn` strategy; overrides the suite's `model`.
    #[arg(long)]
    model: Option<PathBuf>,
}

impl SuiteArgs {
    fn load(&self) -> Result<SuiteConfig> {
        let mut suite = match (&self.preset, &self.config) {
            (Some(name), _) => bench::preset(name).ok_or_else(|| Error::Config(format!("unknown preset `{name}`")))?,
            (None, Some(path)) => SuiteConfig::from_file(path)?,
            (None, None) => return Err(Error::Config("give --preset or --config".into())),
        };
        if self.model.is_some() {
            suite.model = self.model.clone();
        }
        Ok(suite)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Log,
    Raw,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_delimiter = ',', default_value = "16,16")]
    hidden: Vec<usize>,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 256)]
    batch_size: usize,
    #[arg(long, default_value_t = 5000)]
    max_epochs: usize,
    #[arg(long, default_value_t = 150)]
    patience: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Target::Log)]
    target: Target,
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            hidden: self.hidden.clone(),
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            target: match self.target {
                Target::Log => TargetTransform::Log,
                Target::Raw => TargetTransform::Raw,
            },
            ..Default::default()
        }
    }
}

fn load_model(path: &Path) -> Result<Arc<Model>> {
    let m = Model::load(BufReader::new(File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?))?;
    Ok(Arc::new(m))
}

fn suite_model(suite: &SuiteConfig) -> Result<Option<Arc<Model>>> {
    if !suite.strategies().contains(&StrategyKind::Learned) {
        return Ok(None);
    }
    let path = suite.model.as_ref().ok_or_else(|| Error::Config("strategy `nn` needs --model".into()))?;
    load_model(path).map(Some)
}

fn find_case<'a>(suite: &'a SuiteConfig, id: &str) -> Result<&'a ExperimentConfig> {
    suite.cases.iter().find(|c| c.id == id).ok_or_else(|| Error::Config(format!("no case `{id}` in suite `{}`", suite.name)))
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Dataset::read_csv(BufReader::new(file))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Mesh { suite, case, out } => {
            let suite = suite.load()?;
            if let Some(dir) = &out {
                fs::create_dir_all(dir)?;
            }
            println!("case,vertices,elements");
            for c in suite.cases.iter().filter(|c| case.as_ref().is_none_or(|id| &c.id == id)) {
                let p = c.problem()?;
                println!("{},{},{}", c.id, p.mesh().num_vertices(), p.mesh().num_elements());
                if let Some(dir) = &out {
                    write_mesh(p.mesh(), BufWriter::new(File::create(dir.join(format!("{}.mesh", c.id)))?))?;
                }
            }
            if let Some(id) = case {
                find_case(&suite, &id)?;
            }
            Ok(true)
        }
        Command::Solve { suite, case, strategy, out } => {
            let suite = suite.load()?;
            let c = find_case(&suite, &case)?;
            let kind = StrategyKind::parse(&strategy)?;
            let model = if kind == StrategyKind::Learned {
                let path = suite.model.as_ref().ok_or_else(|| Error::Config("strategy `nn` needs --model".into()))?;
                Some(load_model(path)?)
            } else {
                None
            };
            let problem = c.problem()?;
            let report = solve_nonlinear(&problem, &kind.strategy(model.as_ref())?, &c.solve_options());
            if let Some(path) = out {
                report.write_csv(BufWriter::new(File::create(path)?))?;
            }
            println!(
                "{} {}: {} after {} iterations, residual {:e} -> {:e}{}",
                c.id,
                kind.name(),
                if report.converged { "converged" } else { "not converged" },
                report.iterations,
                report.initial_residual(),
                report.final_residual(),
                report.failure.as_ref().map(|f| format!(" ({f})")).unwrap_or_default()
            );
            Ok(true)
        }
        Command::GenData { suite, seed, anchor, max_evals, out } => {
            let suite = suite.load()?;
            suite.validate()?;
            let cases = suite
                .cases
                .iter()
                .filter(|c| !c.snapshots.is_empty())
                .map(|c| {
                    Ok(TrainingCase {
                        id: c.id.clone(),
                        group: format!("{}-h{}", c.family, c.h_max),
                        problem: c.problem()?,
                        snapshots: c.snapshots.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if cases.is_empty() {
                return Err(Error::Config("no case lists `snapshots`".into()));
            }
            let opts = OracleOptions { lbfgs: LbfgsOptions { max_evals, ..Default::default() }, anchor };
            let g = generate_dataset(&cases, seed, &opts)?;
            fs::create_dir_all(&out)?;
            g.data.write_csv(BufWriter::new(File::create(out.join("data.csv"))?))?;
            g.splits.train.write_csv(BufWriter::new(File::create(out.join("train.csv"))?))?;
            g.splits.validation.write_csv(BufWriter::new(File::create(out.join("validation.csv"))?))?;
            g.splits.test.write_csv(BufWriter::new(File::create(out.join("test.csv"))?))?;
            g.manifest.write(BufWriter::new(File::create(out.join("manifest.txt"))?))?;
            println!(
                "{} samples ({} per group), {} snapshots, {} skipped -> {}",
                g.data.len(),
                g.manifest.balanced_per_group,
                g.manifest.snapshots.len(),
                g.manifest.skipped.len(),
                out.display()
            );
            Ok(true)
        }
        Command::Train { data, train: args, out, log } => {
            let tr = read_dataset(&data.join("train.csv"))?;
            let va = read_dataset(&data.join("validation.csv"))?;
            let (model, history) = train(&tr, &va, &args.config())?;
            model.save(BufWriter::new(File::create(&out)?))?;
            if let Some(path) = log {
                write_log_csv(&history, BufWriter::new(File::create(path)?))?;
            }
            if let Ok(te) = read_dataset(&data.join("test.csv")) {
                if !te.is_empty() {
                    println!("test rmse {:.6}", model.rmse(&te)?);
                }
            }
            println!(
                "{} epochs, train rmse {:.6}, validation rmse {:.6} -> {}",
                model.meta.epochs,
                model.meta.train_rmse,
                model.meta.val_rmse,
                out.display()
            );
            Ok(true)
        }
        Command::GridSearch { data, train: args, layers, widths, folds, out } => {
            let tr = read_dataset(&data.join("train.csv"))?;
            let table = grid_search(&tr, &layers, &widths, folds, &args.config())?;
            write_grid_csv(&table, BufWriter::new(File::create(&out)?))?;
            if let Some(best) = table.first() {
                println!("best {:?}: mean validation rmse {:.6}", best.hidden, best.mean_val_rmse);
            }
            Ok(true)
        }
        Command::Bench { suite, strategies, out } => {
            let mut suite = suite.load()?;
            if let Some(list) = strategies {
                let kinds = list.iter().map(|s| StrategyKind::parse(s)).collect::<Result<Vec<_>>>()?;
                suite = suite.with_strategies(&kinds);
            }
            let dir = out.unwrap_or_else(|| suite.output.clone());
            let model = suite_model(&suite)?;
            let result = run_suite(&suite, model, workers_from_env()?)?;
            result.write_artifacts(&dir)?;
            for m in result.means() {
                println!(
                    "{:<5} {:<5} mean {:>7.2}  converged {}/{}",
                    m.family,
                    m.strategy.name(),
                    m.mean_iterations,
                    m.converged,
                    m.total
                );
            }
            let failed = result.failed_runs();
            if failed > 0 {
                eprintln!("{failed} run(s) could not be executed; see {}", dir.join("runs").join("index.csv").display());
            }
            println!("artifacts in {}", dir.display());
            Ok(failed == 0)
        }
        Command::Plot { runs, out } => {
            let result = summary_from_runs(&runs)?;
            let dir = out.unwrap_or_else(|| runs.join("plots"));
            result.write_plots(&dir)?;
            println!("plots in {}", dir.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = match workers_from_env() {
        Ok(n) => n,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    // a second initialisation can only fail if something already built it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
