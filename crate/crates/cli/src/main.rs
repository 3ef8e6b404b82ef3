//! `phenolab` command-line driver.
//!
//! Exit status: 0 on success, 1 when the data or configuration fails
//! validation (or a gradient check fails), 2 on usage errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use phenolab::config::RunConfig;
use phenolab::featurize::{build_feature_matrix, FeatureGroup, FeatureRegistry, FitScope, LocationRanking};
use phenolab::ingest::{parse_dataset, write_canonical, Dataset, ParseOptions};
use phenolab::neuralnet::{gradient_check, train, GradCheckConfig, ModelSpec};
use phenolab::runner::{emit, run_ablation, AblationReport, DecimalMark, ReportFormat};
use phenolab::synthgen::{write_dataset, SynthConfig};
use phenolab::tasks::{
    write_examples_csv, Examples, F1Average, GroupSelection, ModelFamily, Phq9Setup, StressSetup, Task,
};
use phenolab::Error;

#[derive(Parser)]
#[command(name = "phenolab", version, about = "Mobile-sensing feature ablation pipeline")]
struct Cli {
    /// Config file: JSON object or `key=value` lines. Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for featurization and training.
    #[arg(long, global = true, env = "PHENOLAB_JOBS")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset and write it back in canonical form.
    Ingest {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the daily feature matrix as features.csv.
    Featurize {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one task/model/group and export its examples, split and model.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        task: Task,
        #[arg(long, default_value = "fcn")]
        model: ModelFamily,
        /// `all` or one feature group.
        #[arg(long, default_value = "all")]
        group: GroupSelection,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the feature-group ablation grid and write report.csv / report.md.
    Ablate {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated tasks (l_h, lm_h, multiclass, phq9).
        #[arg(long, value_delimiter = ',')]
        tasks: Option<Vec<Task>>,
        /// Comma-separated model families (fcn, lstm).
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<ModelFamily>>,
        /// Comma-separated column sets (all, wifi, gps, ...).
        #[arg(long, value_delimiter = ',')]
        groups: Option<Vec<GroupSelection>>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic dataset in canonical layout.
    Synth {
        #[arg(long, default_value_t = 48)]
        users: usize,
        #[arg(long, default_value_t = 70)]
        days: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Feature group whose raw events track the latent stress.
        #[arg(long)]
        plant: Option<FeatureGroup>,
        #[arg(long, default_value_t = 1.0)]
        effect: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check analytic gradients of every architecture against finite differences.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Args)]
struct DataArgs {
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Raw layout: canonical or studentlife.
    #[arg(long)]
    adapter: Option<String>,
    /// Registry manifest (defaults to the built-in registry).
    #[arg(long)]
    registry: Option<PathBuf>,
    /// Fail on the first malformed row instead of skipping it.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// F1 averaging: weighted or macro.
    #[arg(long)]
    f1: Option<F1Average>,
    /// Decimal mark for the markdown report: point or comma.
    #[arg(long)]
    locale: Option<DecimalMark>,
}

#[derive(Debug)]
enum Failure {
    Pipeline(Error),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Pipeline(e)
    }
}

trait Lift<T> {
    fn lift(self) -> Result<T, Failure>;
}

impl<T, E: Into<Error>> Lift<T> for Result<T, E> {
    fn lift(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Pipeline(e.into()))
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |source| Failure::Pipeline(Error::Io { path: path.display().to_string(), source })
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn out_dir(out: Option<PathBuf>, cfg: &mut RunConfig) -> Result<PathBuf, Failure> {
    let dir = out.or_else(|| cfg.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    cfg.out = Some(dir.display().to_string());
    Ok(dir)
}

fn apply_data(cfg: &mut RunConfig, a: &DataArgs) {
    if let Some(d) = &a.data {
        cfg.data = Some(d.display().to_string());
    }
    if let Some(ad) = &a.adapter {
        cfg.adapter = ad.clone();
    }
    if let Some(r) = &a.registry {
        cfg.registry = Some(r.display().to_string());
    }
    cfg.strict |= a.strict;
}

fn apply_run(cfg: &mut RunConfig, r: &RunArgs) {
    let ab = &mut cfg.ablation;
    if let Some(n) = r.rounds {
        ab.n_rounds = n;
    }
    if let Some(s) = r.seed {
        ab.seed_base = s;
    }
    if let Some(e) = r.epochs {
        ab.hyper.epochs = e;
    }
    if let Some(f) = r.f1 {
        ab.f1_average = f;
    }
    if let Some(l) = r.locale {
        cfg.locale = l;
    }
}

fn load_registry(cfg: &RunConfig) -> Result<FeatureRegistry, Failure> {
    match &cfg.registry {
        None => Ok(FeatureRegistry::default_registry()),
        Some(p) => {
            let path = Path::new(p);
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            FeatureRegistry::from_manifest(&text).lift()
        }
    }
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let data = cfg.data.as_ref().ok_or_else(|| Failure::Pipeline(Error::Config("--data is required".into())))?;
    let opts = ParseOptions { strict: cfg.strict, ..Default::default() };
    let parsed = parse_dataset(Path::new(data), cfg.adapter()?, &opts).lift()?;
    let dropped = parsed.report.total_dropped();
    if dropped > 0 {
        eprintln!("ingest: skipped {dropped} rows (run `phenolab ingest` for the per-stream report)");
    }
    Ok(parsed.dataset)
}

fn write_reports(dir: &Path, report: &mut AblationReport, cfg: &RunConfig) -> Result<(), Failure> {
    report.provenance.insert(0, ("run_config".into(), cfg.fingerprint()));
    write_file(&dir.join("report.csv"), emit(report, ReportFormat::Csv, DecimalMark::Point))?;
    write_file(&dir.join("report.md"), emit(report, ReportFormat::Markdown, cfg.locale))?;
    write_file(&dir.join("config.json"), cfg.to_json())?;
    println!("wrote {} (config {})", dir.join("report.csv").display(), cfg.fingerprint());
    Ok(())
}

fn train_exports(ds: &Dataset, registry: &FeatureRegistry, cfg: &RunConfig, dir: &Path) -> Result<(), Failure> {
    let ab = &cfg.ablation;
    let task = ab.tasks[0];
    let model = ab.models[0];
    let columns = ab.selections[0].columns(registry);
    let seed = ab.seed_base;
    let (ex, split, spec) = if task.is_regression() {
        let setup = Phq9Setup::prepare(ds, registry, &ab.extract).lift()?;
        let splits: Vec<_> = setup.folds.iter().map(|f| &f.split).collect();
        write_file(&dir.join("splits.json"), serde_json::to_string_pretty(&splits).expect("splits serialize"))?;
        // examples and model come from the first fold
        let (x, y, split) = setup.fold_data(0, &columns).lift()?;
        let n = y.len();
        let ex = Examples { x, y, users: setup.users.clone(), dates: vec![setup.study_end; n], dropped: setup.dropped };
        let spec = ModelSpec::fcn_phq9(ex.x.row_width(), seed);
        (ex, split.clone(), spec)
    } else {
        let setup = StressSetup::prepare(ds, registry, &ab.extract).lift()?;
        let (ex, split) = setup.examples(task, model.layout(), &columns).lift()?;
        let width = *ex.x.shape().last().expect("examples have a width");
        let spec = match model {
            ModelFamily::Fcn => ModelSpec::fcn_stress(width, task.n_classes(), seed),
            ModelFamily::Lstm => ModelSpec::lstm_stress(width, task.n_classes(), seed),
        };
        (ex, split, spec)
    };
    let path = dir.join("examples.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    write_examples_csv(file, task, &ex, Some(&split))
        .map_err(|e| Failure::Pipeline(Error::Config(format!("writing examples.csv: {e}"))))?;
    write_file(&dir.join("split.json"), split.to_json())?;
    let x_train = ex.x.select_rows(&split.train_rows);
    let y_train: Vec<f64> = split.train_rows.iter().map(|&i| ex.y[i]).collect();
    let trained = train(&spec, &x_train, &y_train, &ab.hyper).lift()?;
    write_file(&dir.join("model.json"), trained.to_json())?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        cfg.merge_text(&text)?;
    }
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Failure::Pipeline(Error::Config(format!("worker pool: {e}"))))?;
    }
    match cli.command {
        Command::Ingest { data, out } => {
            apply_data(&mut cfg, &data);
            let src = cfg.data.clone().ok_or_else(|| Failure::Pipeline(Error::Config("--data is required".into())))?;
            let opts = ParseOptions { strict: cfg.strict, ..Default::default() };
            let parsed = parse_dataset(Path::new(&src), cfg.adapter()?, &opts).lift()?;
            write_canonical(&parsed.dataset, &out).lift()?;
            let report = serde_json::to_string_pretty(&parsed.report).expect("report serializes");
            write_file(&out.join("ingest_report.json"), &report)?;
            println!(
                "{} users, {} rows skipped, {} intervals merged; wrote {}",
                parsed.dataset.users.len(),
                parsed.report.total_dropped(),
                parsed.report.merged_intervals,
                out.display()
            );
        }
        Command::Featurize { data, out } => {
            apply_data(&mut cfg, &data);
            let dir = out_dir(out, &mut cfg)?;
            let ds = load_dataset(&cfg)?;
            let registry = load_registry(&cfg)?;
            let ranking = LocationRanking::fit(&ds, &FitScope::All, cfg.ablation.extract.max_carry_s);
            let matrix = build_feature_matrix(&ds, &registry, &ranking, &cfg.ablation.extract).lift()?;
            let path = dir.join("features.csv");
            let file = fs::File::create(&path).map_err(io_err(&path))?;
            matrix
                .write_csv(file)
                .map_err(|e| Failure::Pipeline(Error::Config(format!("writing features.csv: {e}"))))?;
            write_file(&dir.join("registry.tsv"), registry.to_manifest())?;
            println!("{} user-days x {} features; wrote {}", matrix.rows.len(), registry.len(), path.display());
        }
        Command::Train { data, task, model, group, run, out } => {
            apply_data(&mut cfg, &data);
            apply_run(&mut cfg, &run);
            if !task.models().contains(&model) {
                return Err(Failure::Pipeline(Error::Config(format!(
                    "task {task} does not support model {}",
                    model.as_str()
                ))));
            }
            cfg.ablation.tasks = vec![task];
            cfg.ablation.models = vec![model];
            cfg.ablation.selections = vec![group];
            let dir = out_dir(out, &mut cfg)?;
            let ds = load_dataset(&cfg)?;
            let registry = load_registry(&cfg)?;
            train_exports(&ds, &registry, &cfg, &dir)?;
            let mut report = run_ablation(&ds, &registry, &cfg.ablation).lift()?;
            write_reports(&dir, &mut report, &cfg)?;
        }
        Command::Ablate { data, tasks, models, groups, run, out } => {
            apply_data(&mut cfg, &data);
            apply_run(&mut cfg, &run);
            if let Some(t) = tasks {
                cfg.ablation.tasks = t;
            }
            if let Some(m) = models {
                cfg.ablation.models = m;
            }
            if let Some(g) = groups {
                cfg.ablation.selections = g;
            }
            let dir = out_dir(out, &mut cfg)?;
            let ds = load_dataset(&cfg)?;
            let registry = load_registry(&cfg)?;
            let mut report = run_ablation(&ds, &registry, &cfg.ablation).lift()?;
            let failed: usize = report.cells.iter().map(|c| c.failed_runs).sum();
            if failed > 0 {
                eprintln!("ablate: {failed} runs failed; see failed_runs in the report");
            }
            write_reports(&dir, &mut report, &cfg)?;
        }
        Command::Synth { users, days, seed, plant, effect, noise, out } => {
            let sc = SynthConfig {
                n_users: users,
                n_days: days,
                seed,
                planted_group: plant,
                effect_size: if plant.is_some() { effect } else { 0.0 },
                noise_scale: noise,
                ..Default::default()
            };
            let ds = write_dataset(&sc, &out)?;
            println!("{} users x {} days; wrote {}", ds.users.len(), days, out.display());
        }
        Command::Gradcheck { trials, seed, tolerance } => {
            let gc = GradCheckConfig { n_trials: trials, tolerance, seed, ..Default::default() };
            let specs = [
                ModelSpec::fcn_stress(4, 2, seed).with_layer_sizes(vec![5, 3]),
                ModelSpec::fcn_phq9(4, seed).with_layer_sizes(vec![6, 6, 6]),
                ModelSpec::lstm_stress(3, 2, seed).with_layer_sizes(vec![4, 3]).with_timesteps(3),
            ];
            let mut failed = Vec::new();
            for spec in &specs {
                let r = gradient_check(spec, &gc).lift()?;
                let verdict = if r.passed() { "pass" } else { "FAIL" };
                println!("{:<12} {verdict}  max relative error {:.2e} over {} trials", spec.kind.as_str(), r.max_error(), trials);
                if !r.passed() {
                    failed.push(spec.kind.as_str());
                }
            }
            if !failed.is_empty() {
                return Err(Failure::Check(format!("gradient check failed for {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
