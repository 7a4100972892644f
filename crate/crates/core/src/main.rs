use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use clsboost::embedio::{pool_layers, read_embeddings, write_embeddings, EmbeddingMatrix, LayerStack, Pooling, StubEncoder};
use clsboost::gbdt::{self, GbdtConfig};
use clsboost::hpo::{default_gbdt_space, save_log, ParamSpec, Pruning, StudyConfig};
use clsboost::mlphead::{self, HeadConfig, LabeledSet};
use clsboost::pipeline::{
    self, labels_of, load_dataset, make_synthetic, predict_records, run_eval, run_hpo, run_train, write_dataset,
    write_predictions, AtStage, ErrorKind, HpoRequest, Model, PipelineConfig, PipelineError,
    SyntheticSpec,
};
use clsboost::textprep::{Preprocessor, Record, Stoplist, TokenList};

const THREADS_ENV: &str = "CLSBOOST_THREADS";

#[derive(Parser)]
#[command(name = "clsboost", version, about = "Binary text classification over embedding vectors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean, tokenize and drop stopwords; writes id, tokens, label
    Prep(PrepArgs),
    /// Hash-based stand-in embeddings for a tokenized corpus
    EmbedStub(EmbedStubArgs),
    /// Pool several CLSB layer files into one
    Concat(ConcatArgs),
    /// Train the two-layer MLP head on an embedding file
    TrainHead(TrainArgs),
    /// Train the gradient-boosted tree classifier on an embedding file
    TrainGbdt(TrainArgs),
    /// Seeded random search over booster hyperparameters
    Hpo(HpoArgs),
    /// Full train run from a pipeline config
    Run(RunArgs),
    /// Write id, probability and label for every record
    Predict(PredictArgs),
    /// Score predictions against gold labels
    Eval(EvalArgs),
    /// Generate the synthetic train/val/test corpus
    Synth(SynthArgs),
}

#[derive(Args)]
struct PrepArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Input starts with a header line
    #[arg(long)]
    header: bool,
    #[arg(long)]
    no_clean: bool,
    #[arg(long)]
    no_stopwords: bool,
    /// Stoplist file, one word per line (default: built-in English list)
    #[arg(long, conflicts_with = "no_stopwords")]
    stoplist: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedStubArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    layers: usize,
    #[arg(long, default_value = "concat", value_parser = parse_pooling)]
    pooling: Pooling,
    /// Clean and drop stopwords first (for raw, unprepped text)
    #[arg(long)]
    prep: bool,
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct ConcatArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "concat", value_parser = parse_pooling)]
    pooling: Pooling,
    #[arg(required = true)]
    layers: Vec<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    emb: PathBuf,
    /// Labeled dataset whose rows match the embedding rows
    #[arg(long)]
    labels: PathBuf,
    /// Model config JSON (defaults when omitted)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, requires = "val_labels")]
    val_emb: Option<PathBuf>,
    #[arg(long, requires = "val_emb")]
    val_labels: Option<PathBuf>,
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct HpoArgs {
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// JSON list of parameter specs (default booster space when omitted)
    #[arg(long)]
    space: Option<PathBuf>,
    /// Pipeline config with a gbdt model
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: PathBuf,
    /// Study log (NDJSON)
    #[arg(long)]
    log: PathBuf,
    /// Enable median pruning after this many checkpoints
    #[arg(long)]
    prune_warmup: Option<usize>,
    /// Concurrent trials (default: CLSBOOST_THREADS or 1)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pipeline config used to embed `data`
    #[arg(long, conflicts_with = "emb", required_unless_present = "emb")]
    config: Option<PathBuf>,
    /// Precomputed embeddings, rows matching `data`
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Defaults to the config threshold, or 0.5
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out_dir: PathBuf,
    /// SyntheticSpec JSON (defaults when omitted)
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Overrides the spec seed
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_pooling(s: &str) -> std::result::Result<Pooling, String> {
    match s {
        "concat" => Ok(Pooling::Concat),
        "mean" => Ok(Pooling::Mean),
        other => Err(format!("unknown pooling {other:?} (concat or mean)")),
    }
}

type Result<T> = std::result::Result<T, PipelineError>;

fn read_text(path: &Path, stage: &str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| PipelineError::data(stage, format!("{}: {e}", path.display())))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, stage: &str) -> Result<T> {
    serde_json::from_str(&read_text(path, stage)?)
        .map_err(|e| PipelineError::config(stage, format!("{}: {e}", path.display())))
}

fn read_emb(path: &Path) -> Result<EmbeddingMatrix> {
    read_embeddings(path).at("embed").map_err(|mut e| {
        e.message = format!("{}: {}", path.display(), e.message);
        e
    })
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(PipelineError::config("env", format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}

fn prep(a: PrepArgs) -> Result<()> {
    let stoplist = match (a.no_stopwords, &a.stoplist) {
        (true, _) => None,
        (false, None) => Some(Stoplist::english()),
        (false, Some(p)) => Some(Stoplist::from_file(p).at("prep")?),
    };
    let pre = Preprocessor {
        clean: !a.no_clean,
        stoplist,
    };
    let out: Vec<Record> = load_dataset(&a.input, a.header)?
        .into_iter()
        .map(|r| Record {
            text: pre.tokens(&r.text).to_string(),
            ..r
        })
        .collect();
    write_dataset(&out, &a.out)
}

fn embed_stub(a: EmbedStubArgs) -> Result<()> {
    let records = load_dataset(&a.input, a.header)?;
    let pre = if a.prep {
        Preprocessor::default()
    } else {
        Preprocessor {
            clean: false,
            stoplist: None,
        }
    };
    let docs: Vec<TokenList> = records.iter().map(|r| pre.tokens(&r.text)).collect();
    let enc = StubEncoder {
        dim: a.dim,
        seed: a.seed,
        layers: a.layers,
        pooling: a.pooling,
    };
    if enc.layers == 0 {
        return Err(PipelineError::config("embed", "--layers must be >= 1"));
    }
    let m = enc.encode_corpus(&docs).at("embed")?;
    write_embeddings(&m, &a.out).at("embed")
}

fn concat(a: ConcatArgs) -> Result<()> {
    let layers = a.layers.iter().map(|p| read_emb(p)).collect::<Result<Vec<_>>>()?;
    let stack = LayerStack::new(layers).at("concat")?;
    let pooled = pool_layers(&stack, a.pooling).at("concat")?;
    write_embeddings(&pooled, &a.out).at("concat")
}

struct TrainData {
    x: EmbeddingMatrix,
    y: Vec<u8>,
    val: Option<(EmbeddingMatrix, Vec<u8>)>,
}

fn load_pair(emb: &Path, labels: &Path, header: bool) -> Result<(EmbeddingMatrix, Vec<u8>)> {
    let x = read_emb(emb)?;
    let y = labels_of(&load_dataset(labels, header)?, "load")?;
    if x.n_rows() != y.len() {
        return Err(PipelineError::data(
            "load",
            format!("{} has {} rows but {} has {} labels", emb.display(), x.n_rows(), labels.display(), y.len()),
        ));
    }
    Ok((x, y))
}

fn train_data(a: &TrainArgs) -> Result<TrainData> {
    let (x, y) = load_pair(&a.emb, &a.labels, a.header)?;
    let val = match (&a.val_emb, &a.val_labels) {
        (Some(e), Some(l)) => Some(load_pair(e, l, a.header)?),
        _ => None,
    };
    Ok(TrainData { x, y, val })
}

fn train_gbdt(a: TrainArgs) -> Result<()> {
    let cfg: GbdtConfig = match &a.config {
        Some(p) => read_json(p, "config")?,
        None => GbdtConfig::default(),
    };
    cfg.validate().at("config")?;
    let d = train_data(&a)?;
    let valid = d.val.as_ref().map(|(vx, vy)| (vx, vy.as_slice()));
    let (model, _) = gbdt::train(&d.x, &d.y, &cfg, valid).at("train")?;
    gbdt::write_model(&model, &a.out).at("save")
}

fn train_head(a: TrainArgs) -> Result<()> {
    let cfg: HeadConfig = match &a.config {
        Some(p) => read_json(p, "config")?,
        None => HeadConfig::default(),
    };
    cfg.validate().at("config")?;
    let d = train_data(&a)?;
    let train = LabeledSet::new(&d.x, &d.y).at("train")?;
    let val = match &d.val {
        Some((vx, vy)) => Some(LabeledSet::new(vx, vy).at("train")?),
        None => None,
    };
    let (params, _) = mlphead::train_head(train, val, &cfg).at("train")?;
    mlphead::write_head(&params, &a.out).at("save")
}

fn hpo(a: HpoArgs, threads: Option<usize>) -> Result<()> {
    let config = PipelineConfig::from_json(&read_text(&a.config, "config")?)?;
    let space: Vec<ParamSpec> = match &a.space {
        Some(p) => read_json(p, "config")?,
        None => default_gbdt_space(),
    };
    let study = StudyConfig {
        n_trials: a.trials,
        seed: a.seed,
        pruning: a.prune_warmup.map_or(Pruning::Off, |warmup| Pruning::Median { warmup }),
        workers: a.workers.or(threads).unwrap_or(1),
    };
    let result = run_hpo(&HpoRequest {
        config: &config,
        train: &a.train,
        val: &a.val,
        space,
        study,
    })?;
    save_log(&result, &a.log).at("hpo")?;
    let best = result.best();
    let summary = serde_json::json!({
        "trials": result.trials.len(),
        "best_trial": result.best_trial,
        "best_objective": best.and_then(|t| t.objective),
        "best_params": best.map(|t| &t.params),
    });
    println!("{summary}");
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let cfg = PipelineConfig::from_json(&read_text(&a.config, "config")?)?;
    let report = run_train(&cfg, &a.train, a.val.as_deref(), &a.model, a.report.as_deref())?;
    if let Some(v) = report.validation {
        println!("{v}");
    }
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let (records, x, default_threshold) = match (&a.config, &a.emb) {
        (Some(c), _) => {
            let mut cfg = PipelineConfig::from_json(&read_text(c, "config")?)?;
            cfg.header |= a.header;
            let records = load_dataset(&a.data, cfg.header)?;
            let x = pipeline::embed_records(&cfg, &records, &a.data)?;
            (records, x, cfg.threshold)
        }
        (None, Some(e)) => (load_dataset(&a.data, a.header)?, read_emb(e)?, 0.5),
        (None, None) => unreachable!("clap requires --config or --emb"),
    };
    let preds = predict_records(&model, records, &x, a.threshold.unwrap_or(default_threshold))?;
    write_predictions(&preds, &a.out)
}

fn eval(a: EvalArgs) -> Result<()> {
    let report = run_eval(&a.pred, &a.gold, a.header)?;
    println!("{report}");
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut spec: SyntheticSpec = match &a.spec {
        Some(p) => read_json(p, "config")?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let corpus = make_synthetic(&spec)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| PipelineError::data("synth", format!("{}: {e}", a.out_dir.display())))?;
    write_dataset(&corpus.train, &a.out_dir.join("train.tsv"))?;
    write_dataset(&corpus.val, &a.out_dir.join("val.tsv"))?;
    write_dataset(&corpus.test, &a.out_dir.join("test.tsv"))
}

fn dispatch(cmd: Command) -> Result<()> {
    let threads = threads_from_env()?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| PipelineError::new(ErrorKind::Usage, "env", e.to_string()))?;
    }
    match cmd {
        Command::Prep(a) => prep(a),
        Command::EmbedStub(a) => embed_stub(a),
        Command::Concat(a) => concat(a),
        Command::TrainHead(a) => train_head(a),
        Command::TrainGbdt(a) => train_gbdt(a),
        Command::Hpo(a) => hpo(a, threads),
        Command::Run(a) => run(a),
        Command::Predict(a) => predict(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = PipelineError::config("args", e.to_string().trim_end());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.kind.exit_code() as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.kind.exit_code() as u8)
        }
    }
}
