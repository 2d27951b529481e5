//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::classifiers::{Algorithm, Hyperparams, TrainedModel};
use crate::dataset::{
    clean, correlation_matrix, generate_runs, normalize_fit, read_dataset, write_dataset, Dataset, GenerationConfig,
    Scenario,
};
use crate::engine::{parse_param_config, CommandProfile, Simulator};
use crate::error::{FdiError, Result};
use crate::evaluation::{class_metrics, compare, evaluate_model, CompareOptions};
use crate::faults::FaultSchedule;
use crate::runtime::{build_bank, monitor_stream, BankConfig};
use crate::util::sha256_hex;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAULTS: i32 = 2;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(
    name = "turbojet-fdi",
    version,
    about = "Fault detection and isolation for a simulated laboratory turbojet"
)]
pub struct Cli {
    /// Worker threads for dataset generation and comparisons (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// More log output; repeat for more detail.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Generate a labeled dataset from a scenario preset.
    GenDataset(GenDatasetArgs),
    /// Train one classifier on a dataset.
    Train(TrainArgs),
    /// Score a trained model on a dataset.
    Evaluate(EvaluateArgs),
    /// Train and score several classifiers on a train/test pair.
    Compare(CompareArgs),
    /// Run a bank of component models over a telemetry stream.
    Monitor(MonitorArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Fuel command profile: `const:C`, `step:BEFORE,AFTER,AT` or
    /// `ramp:T0:C0,T1:C1,...` (commands as fractions of full flow).
    #[arg(long, default_value = "const:0.8")]
    pub profile: String,
    /// Simulated time, s.
    #[arg(long, default_value_t = 100.0)]
    pub duration: f64,
    /// Sample interval, s.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Fault schedule file (`kind,target,magnitude,t_start,t_end` lines and `noise=<level>`).
    #[arg(long)]
    pub faults: Option<PathBuf>,
    /// Engine and fuel supply parameter file (`key = value` lines).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Measurement noise seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Scenario preset: FD001, FD002, T2 or T3.
    #[arg(long)]
    pub scenario: Scenario,
    /// Number of runs (default: the preset's count for the split).
    #[arg(long)]
    pub runs: Option<u32>,
    /// Id of the first run (default: 0 for train, after the training runs for test).
    #[arg(long)]
    pub run_offset: Option<u32>,
    /// Which preset split to generate.
    #[arg(long, value_enum, default_value_t = Split::Train)]
    pub split: Split,
    /// Run length, s.
    #[arg(long, default_value_t = 100.0)]
    pub duration: f64,
    /// Sample interval, s.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Master seed; each run derives its own.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Relative measurement noise level (twice the standard deviation).
    #[arg(long, default_value_t = 0.02)]
    pub noise: f64,
    /// Drop non-finite rows and winsorize outliers before writing.
    #[arg(long)]
    pub clean: bool,
    /// Also write the feature correlation matrix as CSV.
    #[arg(long)]
    pub correlation: Option<PathBuf>,
    /// Also write normalization statistics of this dataset as JSON.
    #[arg(long)]
    pub norm_stats: Option<PathBuf>,
    /// Output CSV; class names go to a `.meta.json` sidecar.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct HyperparamArgs {
    /// LDA covariance shrinkage in [0, 1].
    #[arg(long)]
    pub shrinkage: Option<f64>,
    /// SVM regularization constant C.
    #[arg(long)]
    pub svm_c: Option<f64>,
    /// SVM passes over the training data.
    #[arg(long)]
    pub svm_epochs: Option<usize>,
    /// SVM initial learning rate.
    #[arg(long)]
    pub svm_eta0: Option<f64>,
    /// KNN neighbour count.
    #[arg(long)]
    pub k: Option<usize>,
    /// Tree depth limit; 0 means unlimited.
    #[arg(long)]
    pub max_depth: Option<usize>,
    /// Minimum samples per tree leaf.
    #[arg(long)]
    pub min_leaf: Option<usize>,
    /// Seed for SVM shuffling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl HyperparamArgs {
    pub fn hyperparams(&self) -> Result<Hyperparams> {
        let mut hp = Hyperparams {
            seed: self.seed,
            ..Hyperparams::default()
        };
        if let Some(v) = self.shrinkage {
            hp.lda.shrinkage = v;
        }
        if let Some(v) = self.svm_c {
            hp.svm.c = v;
        }
        if let Some(v) = self.svm_epochs {
            hp.svm.epochs = v;
        }
        if let Some(v) = self.svm_eta0 {
            hp.svm.eta0 = v;
        }
        if let Some(v) = self.k {
            hp.knn.k = v;
        }
        if let Some(v) = self.max_depth {
            hp.tree.max_depth = (v > 0).then_some(v);
        }
        if let Some(v) = self.min_leaf {
            hp.tree.min_leaf = v;
        }
        hp.validate()?;
        Ok(hp)
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training dataset CSV.
    #[arg(long)]
    pub data: PathBuf,
    /// Algorithm: lda, svm, knn or tree.
    #[arg(long)]
    pub algo: Algorithm,
    /// Train a binary model of this fault class against all other samples.
    #[arg(long)]
    pub component: Option<String>,
    #[command(flatten)]
    pub hp: HyperparamArgs,
    /// Output model JSON.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model JSON.
    #[arg(long)]
    pub model: PathBuf,
    /// Dataset CSV to score.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for metrics.json and confusion.csv.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Training dataset CSV.
    #[arg(long)]
    pub train: PathBuf,
    /// Test dataset CSV.
    #[arg(long)]
    pub test: PathBuf,
    /// Comma-separated algorithms.
    #[arg(long, default_value = "lda,svm,knn,tree")]
    pub algos: String,
    /// Cross-validation folds on the training set; 0 disables.
    #[arg(long, default_value_t = 5)]
    pub cv_folds: usize,
    #[command(flatten)]
    pub hp: HyperparamArgs,
    /// Output directory for report.txt, report.csv and report.json.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct MonitorArgs {
    /// Bank configuration (TOML).
    #[arg(long)]
    pub bank: PathBuf,
    /// Trajectory CSV or JSONL stream; `-` reads standard input.
    #[arg(long, default_value = "-")]
    pub input: String,
    /// Override every entry's debounce count (1 mirrors raw verdicts).
    #[arg(long)]
    pub debounce: Option<usize>,
    /// Status records (JSONL); standard output when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Summary JSON; standard error when absent.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let result = match pool.build() {
        Ok(pool) => pool.install(|| execute(&cli.command)),
        Err(e) => Err(FdiError::Configuration(format!("thread pool: {e}"))),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn execute(command: &Command) -> Result<i32> {
    let done = match command {
        Command::Simulate(a) => simulate(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Monitor(a) => return monitor(a),
    };
    done.map(|()| EXIT_OK)
}

/// Parses the `--profile` syntax.
pub fn parse_profile(s: &str) -> Result<CommandProfile> {
    let bad = || {
        FdiError::Configuration(format!(
            "bad profile '{s}'; expected const:C, step:B,A,T or ramp:T:C,..."
        ))
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
    let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
    let profile = match kind {
        "const" => CommandProfile::Constant(num(rest)?),
        "step" => {
            let v: Vec<f64> = rest.split(',').map(num).collect::<Result<_>>()?;
            let [before, after, at] = v[..] else { return Err(bad()) };
            CommandProfile::Step { before, after, at }
        }
        "ramp" => CommandProfile::PiecewiseLinear(
            rest.split(',')
                .map(|p| {
                    let (t, c) = p.split_once(':').ok_or_else(bad)?;
                    Ok((num(t)?, num(c)?))
                })
                .collect::<Result<_>>()?,
        ),
        _ => return Err(bad()),
    };
    profile.validate()?;
    Ok(profile)
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    ensure_parent(path)?;
    Ok(BufWriter::new(File::create(path)?))
}

fn file_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn file_sha256(path: &Path) -> Result<String> {
    Ok(sha256_hex(&std::fs::read(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub version: String,
    pub parameters: Value,
    /// Input file name to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of the artifact; for models, the embedded content checksum
    /// that ignores the measured training time.
    pub sha256: String,
}

/// `manifest.json` of an output directory: artifact file name to entry.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: BTreeMap<String, ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        if !path.exists() {
            return Ok(Self::default());
        }
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Adds entries for `outputs` to the manifest next to them.
fn record(command: &str, parameters: Value, inputs: &[&Path], outputs: &[(&Path, Option<String>)]) -> Result<()> {
    let mut input_sums = BTreeMap::new();
    for p in inputs {
        input_sums.insert(file_name(p), file_sha256(p)?);
    }
    let mut by_dir: BTreeMap<PathBuf, Vec<(String, ManifestEntry)>> = BTreeMap::new();
    for (path, checksum) in outputs {
        let sha256 = match checksum {
            Some(c) => c.clone(),
            None => file_sha256(path)?,
        };
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        by_dir.entry(dir).or_default().push((
            file_name(path),
            ManifestEntry {
                command: command.to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                parameters: parameters.clone(),
                inputs: input_sums.clone(),
                sha256,
            },
        ));
    }
    for (dir, entries) in by_dir {
        let mut manifest = Manifest::load(&dir)?;
        manifest.artifacts.extend(entries);
        let mut w = create(&dir.join(MANIFEST_NAME))?;
        serde_json::to_writer_pretty(&mut w, &manifest)?;
        w.write_all(b"\n")?;
        w.flush()?;
    }
    Ok(())
}

fn simulate(a: &SimulateArgs) -> Result<()> {
    let profile = parse_profile(&a.profile)?;
    let simulator = match &a.params {
        Some(p) => {
            let (engine, fuel) = parse_param_config(&std::fs::read_to_string(p)?)?;
            Simulator::new(engine, fuel)?
        }
        None => Simulator::default(),
    };
    let schedule = match &a.faults {
        Some(p) => FaultSchedule::parse(&std::fs::read_to_string(p)?)?,
        None => FaultSchedule::default(),
    };
    let traj = simulator.simulate(&profile, a.duration, a.dt, &schedule, a.seed)?;
    let mut w = create(&a.output)?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    log::info!("wrote {} samples to {}", traj.len(), a.output.display());
    let inputs: Vec<&Path> = a.params.iter().chain(&a.faults).map(PathBuf::as_path).collect();
    record(
        "simulate",
        json!({"profile": a.profile, "duration": a.duration, "dt": a.dt, "seed": a.seed}),
        &inputs,
        &[(&a.output, None)],
    )
}

fn gen_dataset(a: &GenDatasetArgs) -> Result<()> {
    let sc = a.scenario;
    let (default_runs, default_offset) = match a.split {
        Split::Train => (sc.default_train_runs(), 0),
        Split::Test => (sc.default_test_runs(), sc.default_train_runs()),
    };
    let mut cfg = GenerationConfig::new(sc, a.runs.unwrap_or(default_runs), a.duration, a.dt, a.seed);
    cfg.first_run = a.run_offset.unwrap_or(default_offset);
    cfg.noise_level = a.noise;
    let mut ds = generate_runs(&cfg)?;
    if a.clean {
        let (cleaned, report) = clean(&ds)?;
        log::info!(
            "clean: {} rows dropped, {} values winsorized",
            report.dropped.len(),
            report.winsorized.len()
        );
        ds = cleaned;
    }
    ensure_parent(&a.output)?;
    write_dataset(&a.output, &ds)?;
    log::info!("wrote {} samples to {}", ds.len(), a.output.display());
    let meta = crate::dataset::meta_path(&a.output);
    let mut outputs: Vec<(&Path, Option<String>)> = vec![(&a.output, None), (&meta, None)];
    if let Some(p) = &a.correlation {
        let mut w = create(p)?;
        correlation_matrix(&ds)?.write_csv(&mut w)?;
        w.flush()?;
        outputs.push((p, None));
    }
    if let Some(p) = &a.norm_stats {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, &normalize_fit(&ds)?)?;
        w.write_all(b"\n")?;
        w.flush()?;
        outputs.push((p, None));
    }
    record(
        "gen-dataset",
        json!({
            "scenario": sc.name(), "runs": cfg.n_runs, "first_run": cfg.first_run,
            "duration": a.duration, "dt": a.dt, "seed": a.seed, "noise": a.noise, "clean": a.clean,
        }),
        &[],
        &outputs,
    )
}

/// Aligns a dataset with a model's classes: identical class lists pass
/// through, a binary component model gets the one-vs-rest view.
fn align_classes(ds: Dataset, model_classes: &[String]) -> Result<Dataset> {
    if ds.class_names == model_classes {
        return Ok(ds);
    }
    if let [_, positive] = model_classes {
        if let Some(i) = ds.class_index(positive).filter(|&i| i > 0) {
            return ds.relabel_binary(i, positive);
        }
    }
    Err(FdiError::Configuration(format!(
        "model classes {model_classes:?} do not match dataset classes {:?}",
        ds.class_names
    )))
}

fn train(a: &TrainArgs) -> Result<()> {
    let hp = a.hp.hyperparams()?;
    let mut ds = read_dataset(&a.data)?;
    if let Some(c) = &a.component {
        let i = ds
            .class_index(c)
            .filter(|&i| i > 0)
            .ok_or_else(|| FdiError::Configuration(format!("no fault class '{c}' in {:?}", ds.class_names)))?;
        ds = ds.relabel_binary(i, &ds.class_names[i].clone())?;
    }
    let model = TrainedModel::fit(a.algo, &ds, &hp)?;
    log::info!("{} trained in {:.3} s", a.algo.display_name(), model.training_time_s);
    ensure_parent(&a.output)?;
    model.save(&a.output)?;
    let checksum = TrainedModel::load(&a.output)?.checksum()?;
    record(
        "train",
        json!({"algorithm": a.algo.tag(), "component": a.component, "hyperparams": hp}),
        &[&a.data],
        &[(&a.output, Some(checksum))],
    )
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let model = TrainedModel::load(&a.model)?;
    let ds = align_classes(read_dataset(&a.data)?, &model.class_names)?;
    let cm = evaluate_model(&model, &ds)?;
    print!("{}", cm.render_percentages());
    println!("accuracy {:.2}%  macro F1 {:.4}", cm.accuracy(), cm.macro_f1());
    std::fs::create_dir_all(&a.output)?;
    let metrics_path = a.output.join("metrics.json");
    let confusion_path = a.output.join("confusion.csv");
    let metrics = json!({
        "algorithm": model.algorithm().tag(),
        "samples": cm.total(),
        "accuracy": cm.accuracy(),
        "macro_f1": cm.macro_f1(),
        "per_class": class_metrics(&cm),
        "confusion": cm,
    });
    let mut w = create(&metrics_path)?;
    serde_json::to_writer_pretty(&mut w, &metrics)?;
    w.write_all(b"\n")?;
    w.flush()?;
    let mut w = create(&confusion_path)?;
    cm.write_csv(&mut w)?;
    w.flush()?;
    record(
        "evaluate",
        json!({"algorithm": model.algorithm().tag()}),
        &[&a.data],
        &[(&metrics_path, None), (&confusion_path, None)],
    )
}

fn compare_cmd(a: &CompareArgs) -> Result<()> {
    let hp = a.hp.hyperparams()?;
    let algorithms = Algorithm::parse_list(&a.algos)?;
    if algorithms.is_empty() {
        return Err(FdiError::Configuration("--algos lists no algorithm".into()));
    }
    let train = read_dataset(&a.train)?;
    let test = read_dataset(&a.test)?;
    let options = CompareOptions {
        cv_folds: (a.cv_folds > 0).then_some(a.cv_folds),
    };
    let report = compare(&algorithms, &train, &test, &hp, options)?;
    let table = report.render_table();
    print!("{table}");
    std::fs::create_dir_all(&a.output)?;
    let paths = [
        a.output.join("report.txt"),
        a.output.join("report.csv"),
        a.output.join("report.json"),
    ];
    std::fs::write(&paths[0], &table)?;
    let mut w = create(&paths[1])?;
    report.write_csv(&mut w)?;
    w.flush()?;
    let mut w = create(&paths[2])?;
    serde_json::to_writer_pretty(&mut w, &report)?;
    w.write_all(b"\n")?;
    w.flush()?;
    record(
        "compare",
        json!({"algorithms": a.algos, "cv_folds": a.cv_folds, "hyperparams": hp}),
        &[&a.train, &a.test],
        &paths.iter().map(|p| (p.as_path(), None)).collect::<Vec<_>>(),
    )
}

/// Exit code 2 when any component turned red.
fn monitor(a: &MonitorArgs) -> Result<i32> {
    let mut cfg = BankConfig::load(&a.bank)?;
    if let Some(m) = a.debounce {
        cfg.debounce = m;
        for e in &mut cfg.entries {
            e.debounce = Some(m);
        }
    }
    let bank = build_bank(&cfg)?;
    let input: Box<dyn BufRead> = if a.input == "-" {
        Box::new(BufReader::new(std::io::stdin().lock()))
    } else {
        Box::new(BufReader::new(
            File::open(&a.input).map_err(|e| FdiError::Stream(format!("{}: {e}", a.input)))?,
        ))
    };
    let output: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    };
    let summary = monitor_stream(input, &bank, output)?;
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    match &a.summary {
        Some(p) => std::fs::write(p, text)?,
        None => eprint!("{text}"),
    }
    Ok(if summary.episode_count() > 0 {
        EXIT_FAULTS
    } else {
        EXIT_OK
    })
}
