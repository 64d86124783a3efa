use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use frozen_ansatz::energy::ObjectiveMode;
use frozen_ansatz::pipeline::{
    self, accuracy_csv, baseline_csv, baseline_rows, load_instances, read_records_dir, records_to_csv,
    reuse_repeated, threshold_table_from_records, train_on, write_instances, write_text, ExperimentOptions,
    FrozenModel, RepeatMode,
};
use frozen_ansatz::search::SaStep;
use frozen_ansatz::tsp::{solve_exact, TspInstance};
use frozen_ansatz::{Error, ErrorClass, SaConfig};

#[derive(Parser)]
#[command(name = "frozen-ansatz", version, about = "Train, freeze and reuse variational TSP circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance family as `<out>/<n>/<index>.json`.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 11)]
        count: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "instances")]
        out: PathBuf,
    },
    /// Solve one instance file exhaustively.
    Solve {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Anneal a topology on instance 0 and write the frozen model plus `trace_<n>.csv`.
    Train {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long = "out-model", default_value = "model.json")]
        out_model: PathBuf,
        /// Directory for `trace_<n>.csv` [default: the model's directory]
        #[arg(long = "trace-dir")]
        trace_dir: Option<PathBuf>,
        #[command(flatten)]
        sa: SaArgs,
    },
    /// Re-optimize a frozen model's angles on every test instance (index >= 1).
    Reuse {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, default_value = "records.csv")]
        out: PathBuf,
        /// Independent evaluations per instance
        #[arg(long, default_value_t = 1)]
        repeats: u32,
        #[command(flatten)]
        sa: SaArgs,
    },
    /// Classical annealing baseline on every instance under a directory.
    Baseline {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "baseline.csv")]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Build `thresholds.csv` and `accuracy.csv` from run-record CSVs.
    Report {
        #[arg(long)]
        records: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Full sweep: generate, train, reuse and report for each city count.
    Experiment {
        #[arg(long, value_delimiter = ',', default_values_t = vec![4, 5, 6, 7])]
        sizes: Vec<usize>,
        #[arg(long = "family-seed", default_value_t = 0)]
        family_seed: u64,
        #[arg(long = "instances-per-size", default_value_t = 11)]
        instances_per_size: u32,
        #[arg(long, default_value_t = 5)]
        repeats: u32,
        #[arg(long = "repeat-mode", value_enum, default_value_t = RepeatArg::Evaluations)]
        repeat_mode: RepeatArg,
        #[arg(long, default_value = "experiment")]
        out: PathBuf,
        #[command(flatten)]
        sa: SaArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum RepeatArg {
    Evaluations,
    Trainings,
}

/// Annealing/optimizer flags. Precedence: flag, then `--config` file, then
/// the base config (reference defaults, or a model's training config).
#[derive(Args, Default)]
struct SaArgs {
    /// TOML file with any SaConfig fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initial temperature [default: 1.0]
    #[arg(long)]
    t0: Option<f64>,
    /// Multiplicative cooling rate [default: 0.999]
    #[arg(long)]
    cooling: Option<f64>,
    /// Temperature floor [default: 0.001]
    #[arg(long = "t-min")]
    t_min: Option<f64>,
    /// Annealing iteration cap [default: 500]
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// VQE runs averaged per fitness evaluation [default: 1]
    #[arg(long = "fitness-runs")]
    fitness_runs: Option<usize>,
    /// Powell runs per VQE run [default: 10]
    #[arg(long)]
    restarts: Option<usize>,
    /// Random parameter vectors scored per VQE run [default: 100]
    #[arg(long)]
    samples: Option<usize>,
    /// Lowest-energy vectors kept as Powell starts [default: 10]
    #[arg(long)]
    keep: Option<usize>,
    /// Measurement shots per evaluation [default: 1024]
    #[arg(long)]
    shots: Option<u32>,
    /// Powell relative tolerance [default: 0.0001]
    #[arg(long = "powell-ftol")]
    powell_ftol: Option<f64>,
    /// Powell iteration cap [default: 100]
    #[arg(long = "powell-max-iter")]
    powell_max_iter: Option<usize>,
    /// Brent line-search tolerance [default: 0.0001]
    #[arg(long = "line-tol")]
    line_tol: Option<f64>,
    /// Optimize the exact expectation instead of the sampled mean
    #[arg(long = "exact-energy")]
    exact_energy: bool,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: available cores]
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    sa: Option<toml::Table>,
}

impl SaArgs {
    fn resolve(&self, base: SaConfig) -> Result<SaConfig, Error> {
        let mut cfg = base;
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            cfg = merge_config_file(cfg, &text, path)?;
        }
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        set!(t0, cooling, t_min, max_iter, fitness_runs, restarts, shots, powell_ftol, powell_max_iter, line_tol, seed);
        if let Some(v) = self.samples {
            cfg.n_samples = v;
        }
        if let Some(v) = self.keep {
            cfg.n_keep = v;
        }
        if self.exact_energy {
            cfg.objective = ObjectiveMode::Exact;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Overlay the `[sa]` table (or a bare table) of a TOML file onto `base`.
fn merge_config_file(base: SaConfig, text: &str, path: &Path) -> Result<SaConfig, Error> {
    let bad = |e: &dyn std::fmt::Display| Error::Malformed {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let table: toml::Table = text.parse().map_err(|e| bad(&e))?;
    let overlay = match toml::Value::Table(table.clone()).try_into::<ConfigFile>() {
        Ok(ConfigFile { sa: Some(sa) }) => sa,
        _ => table,
    };
    let mut merged = toml::Table::try_from(base).map_err(|e| bad(&e))?;
    merged.extend(overlay);
    toml::Value::Table(merged).try_into().map_err(|e| bad(&e))
}

fn init_jobs(jobs: Option<usize>) -> Result<(), Error> {
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Error::InvalidConfig("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    Ok(())
}

fn progress(n: usize, s: &SaStep) {
    eprintln!(
        "sa n={} step={} best={} current={} temperature={} accepted={}",
        n, s.step, s.best_fitness, s.current_fitness, s.temperature, s.accepted
    );
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Gen { n, count, seed, out } => {
            let written = write_instances(&out, n, count, seed)?;
            println!("wrote {} instances to {}", written.len(), out.join(n.to_string()).display());
        }
        Command::Solve { instance } => {
            let inst = TspInstance::load(&instance)?;
            let tour = solve_exact(&inst)?;
            let order: Vec<String> = tour.order.iter().map(ToString::to_string).collect();
            println!("cost={} order={}", tour.cost, order.join(","));
        }
        Command::Train {
            instances,
            n,
            out_model,
            trace_dir,
            sa,
        } => {
            init_jobs(sa.jobs)?;
            let cfg = sa.resolve(SaConfig::default())?;
            let inst = TspInstance::load(pipeline::instance_path(&instances, n, 0))?;
            if inst.n() != n {
                return Err(Error::CityMismatch {
                    model: n,
                    instance: inst.n(),
                });
            }
            let trained = train_on(&inst, &cfg, |s| progress(n, s))?;
            trained.model.save(&out_model)?;
            let dir = trace_dir.unwrap_or_else(|| {
                out_model
                    .parent()
                    .map(Path::to_path_buf)
                    .unwrap_or_default()
            });
            write_text(&dir.join(format!("trace_{n}.csv")), &trained.trace.to_csv())?;
            println!(
                "fitness={} ansatz={} model={}",
                trained.model.training().fitness,
                trained.model.spec(),
                out_model.display()
            );
        }
        Command::Reuse {
            model,
            instances,
            out,
            repeats,
            sa,
        } => {
            init_jobs(sa.jobs)?;
            let model = FrozenModel::load(&model)?;
            let cfg = sa.resolve(model.training().config)?;
            let tests: Vec<TspInstance> = load_instances(&instances, model.n())?
                .into_iter()
                .filter(|i| i.index() != 0)
                .collect();
            if repeats == 0 {
                return Err(Error::InvalidConfig("--repeats must be at least 1".into()));
            }
            let records = reuse_repeated(&model, &tests, &cfg, repeats)?;
            for r in &records {
                eprintln!(
                    "reuse n={} instance={} repeat={} p_opt={} wall_time={:.3}",
                    r.n, r.instance, r.repeat, r.p_opt, r.wall_time
                );
            }
            write_text(&out, &records_to_csv(&records))?;
            println!("wrote {} records to {}", records.len(), out.display());
        }
        Command::Baseline {
            instances,
            seed,
            out,
            jobs,
        } => {
            init_jobs(jobs)?;
            let mut all = Vec::new();
            let mut sizes: Vec<usize> = fs::read_dir(&instances)
                .map_err(|e| Error::Io {
                    path: instances.clone(),
                    source: e,
                })?
                .filter_map(|e| e.ok()?.file_name().to_str()?.parse().ok())
                .collect();
            sizes.sort_unstable();
            for n in sizes {
                all.extend(load_instances(&instances, n)?);
            }
            let rows = baseline_rows(&all, seed)?;
            write_text(&out, &baseline_csv(&rows))?;
            let hits = rows.iter().filter(|r| r.cost == r.exact_cost).count();
            println!("baseline optimal on {hits}/{} instances", rows.len());
        }
        Command::Report { records, out } => {
            let recs = read_records_dir(&records)?;
            if recs.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "no run-record CSV files in {}",
                    records.display()
                )));
            }
            write_text(&out.join("thresholds.csv"), &threshold_table_from_records(&recs).to_csv())?;
            write_text(&out.join("accuracy.csv"), &accuracy_csv(&recs))?;
            println!("wrote thresholds.csv and accuracy.csv to {}", out.display());
        }
        Command::Experiment {
            sizes,
            family_seed,
            instances_per_size,
            repeats,
            repeat_mode,
            out,
            sa,
        } => {
            init_jobs(sa.jobs)?;
            let cfg = sa.resolve(SaConfig::default())?;
            let opts = ExperimentOptions {
                sizes,
                family_seed,
                instances_per_size,
                repeats,
                repeat_mode: match repeat_mode {
                    RepeatArg::Evaluations => RepeatMode::Evaluations,
                    RepeatArg::Trainings => RepeatMode::Trainings,
                },
            };
            let report = pipeline::run_experiment(&opts, &cfg, &out, progress)?;
            print!("{}", report.thresholds.to_csv());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Validation => 2,
                ErrorClass::Io => 3,
                ErrorClass::Computation => 4,
            })
        }
    }
}
