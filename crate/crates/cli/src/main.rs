use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sset_core::io::{
    load_text_tables, read_checkpoint, read_graph, write_checkpoint, write_graph, ProbabilityTable,
};
use sset_core::model::{
    build_views_or_own, ska_gradient_check, Example, Mode, Sampling, SkaModel, TrainState,
};
use sset_core::rerank::rerank_table;
use sset_core::synthetic::{random_text_tables, toy_graph};
use sset_core::{
    evaluate, load_dataset, DatasetManifest, EntityId, KnowledgeGraph, LossSign, RunConfig, Split,
    TrainConfig, Trainer,
};

#[derive(Parser)]
#[command(name = "sset", version, about = "Knowledge graph entity typing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a dataset directory and write the prepared graph artifact.
    Prepare(PrepareArgs),
    /// Train the structural aggregation model.
    Train(TrainArgs),
    /// Write structural type probabilities for a set of entities.
    Infer(InferArgs),
    /// Fuse semantic and structural probabilities.
    Rerank(RerankArgs),
    /// Filtered Hit@k / MR / MRR of a probability file.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on a small graph.
    Gradcheck(GradcheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Fb15ket,
    Yago43ket,
}

#[derive(Args)]
struct PrepareArgs {
    /// Dataset directory with the TSV files.
    #[arg(long)]
    dataset: PathBuf,
    /// Output graph artifact.
    #[arg(long)]
    out: PathBuf,
    /// Check the counts of an official dataset.
    #[arg(long, value_enum)]
    expect: Option<Preset>,
}

#[derive(Args)]
struct ConfigArgs {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Maximum hop order K.
    #[arg(long)]
    k_hops: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Re-ranking pool size k.
    #[arg(long)]
    topk: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.seed {
            cfg.train.seed = v;
        }
        if let Some(v) = self.k_hops {
            cfg.train.hops = v;
        }
        if let Some(v) = self.lambda {
            cfg.train.lambda = v;
        }
        if let Some(v) = self.alpha {
            cfg.rerank.alpha = v;
        }
        if let Some(v) = self.topk {
            cfg.rerank.k = v;
        }
        cfg.train.validate()?;
        cfg.rerank.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset directory or prepared graph artifact.
    #[arg(long)]
    dataset: PathBuf,
    /// Directory holding entity.emb, relation.emb and type.emb.
    #[arg(long)]
    text_emb: Option<PathBuf>,
    /// Teacher probability file for distillation.
    #[arg(long)]
    sem_probs: Option<PathBuf>,
    /// Resume from this checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
    /// Training log; defaults to the output path with a `.log` extension.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Total number of epochs, including any already completed.
    #[arg(long)]
    epochs: Option<usize>,
    /// Train without distillation.
    #[arg(long)]
    no_kd: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output probability file.
    #[arg(long)]
    out: PathBuf,
    /// File with one entity name per line; defaults to every entity.
    #[arg(long)]
    entities: Option<PathBuf>,
    /// Keep only the k largest probabilities per entity (sparse output).
    #[arg(long)]
    topk: Option<usize>,
}

#[derive(Args)]
struct RerankArgs {
    /// Semantic probabilities `p`.
    #[arg(long)]
    sem_probs: PathBuf,
    /// Structural probabilities `q`.
    #[arg(long)]
    probs: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Score file to rank.
    #[arg(long)]
    probs: PathBuf,
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Graph to check on; defaults to the bundled 5-entity toy graph.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 1e-5)]
    step: f64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let graph = if path.is_dir() {
        load_dataset(path, None)
    } else {
        read_graph(path)
    };
    graph.with_context(|| format!("loading {}", path.display()))
}

fn read_probs(path: &Path) -> Result<ProbabilityTable> {
    ProbabilityTable::read(path).with_context(|| format!("reading {}", path.display()))
}

fn summary(g: &KnowledgeGraph) -> String {
    format!(
        "|E|={} |R|={} |T|={} triples={} train={} valid={} test={}",
        g.num_entities(),
        g.num_relations(),
        g.num_types(),
        g.triples().len(),
        g.assertions(Split::Train).len(),
        g.assertions(Split::Valid).len(),
        g.assertions(Split::Test).len()
    )
}

fn prepare(args: PrepareArgs) -> Result<()> {
    ensure!(
        args.dataset.join("entity_text.tsv").is_file(),
        "{} is not a dataset directory (entity_text.tsv missing)",
        args.dataset.display()
    );
    let manifest = args.expect.map(|p| match p {
        Preset::Fb15ket => DatasetManifest::fb15ket(),
        Preset::Yago43ket => DatasetManifest::yago43ket(),
    });
    let g = load_dataset(&args.dataset, manifest.as_ref())?;
    write_graph(&g, &args.out)?;
    println!("{}", summary(&g));
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let run = args.config.load()?;
    let mut cfg: TrainConfig = run.train;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if args.no_kd {
        cfg.kd_enabled = false;
    }
    let graph = load_graph(&args.dataset)?;
    let teacher = match &args.sem_probs {
        Some(p) if cfg.kd_enabled => Some(read_probs(p)?),
        Some(_) => None,
        None if cfg.kd_enabled => {
            bail!("distillation is enabled: pass --sem-probs or --no-kd (or kd = false)")
        }
        None => None,
    };

    let mut state = match &args.checkpoint {
        Some(path) => {
            let state =
                read_checkpoint(path).with_context(|| format!("reading {}", path.display()))?;
            state.model.validate(&graph)?;
            state
        }
        None => {
            let text = args
                .text_emb
                .as_deref()
                .map(|dir| load_text_tables(dir, &graph))
                .transpose()?;
            TrainState::new(&graph, text, &cfg)?
        }
    };
    if state.epoch >= cfg.epochs {
        eprintln!("checkpoint already has {} epochs", state.epoch);
    }

    let trainer = Trainer::new(&graph, &cfg, teacher.as_ref())?;
    let log_path = args.log.unwrap_or_else(|| args.out.with_extension("log"));
    let mut log = OpenOptions::new()
        .create(true)
        .append(args.checkpoint.is_some())
        .write(true)
        .truncate(args.checkpoint.is_none())
        .open(&log_path)
        .with_context(|| format!("opening {}", log_path.display()))?;
    let mut io_err = None;
    trainer.run(&mut state, |s| {
        if let Err(e) = writeln!(log, "{}", s.log_line()) {
            io_err.get_or_insert(e);
        }
        eprintln!("epoch {} loss {:.6} lr {:e}", s.epoch, s.loss_total, s.lr);
    })?;
    if let Some(e) = io_err {
        return Err(e).context("writing training log");
    }
    write_checkpoint(&state, &args.out)?;
    println!("{} epochs -> {}", state.epoch, args.out.display());
    Ok(())
}

fn read_entity_list(path: &Path, g: &KnowledgeGraph) -> Result<Vec<EntityId>> {
    let file = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        let name = line.trim();
        if name.is_empty() {
            continue;
        }
        let e = g
            .entity_id(name)
            .with_context(|| format!("{}:{}: unknown entity {name:?}", path.display(), i + 1))?;
        out.push(e);
    }
    Ok(out)
}

fn infer(args: InferArgs) -> Result<()> {
    let graph = load_graph(&args.dataset)?;
    let state = read_checkpoint(&args.checkpoint)
        .with_context(|| format!("reading {}", args.checkpoint.display()))?;
    let entities = match &args.entities {
        Some(p) => read_entity_list(p, &graph)?,
        None => (0..graph.num_entities()).map(EntityId::from).collect(),
    };
    let rows = state.model.infer_entities(&graph, &entities)?;
    let (ne, nt) = (graph.num_entities(), graph.num_types());
    let table = if args.topk.is_none() && entities.len() == ne {
        ProbabilityTable::dense_from_rows(ne, nt, &rows)?
    } else {
        ProbabilityTable::sparse_from_rows(ne, nt, &rows, args.topk)?
    };
    table.write(&args.out)?;
    println!("{} rows -> {}", rows.len(), args.out.display());
    Ok(())
}

fn rerank(args: RerankArgs) -> Result<()> {
    let run = args.config.load()?;
    let p = read_probs(&args.sem_probs)?;
    let q = read_probs(&args.probs)?;
    let z = rerank_table(&p, &q, &run.rerank, run.train.sem_prob_floor as f32)?;
    z.write(&args.out)?;
    println!(
        "alpha {} k {} -> {}",
        run.rerank.alpha,
        run.rerank.k,
        args.out.display()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let graph = load_graph(&args.dataset)?;
    let split = match args.split.as_str() {
        "test" => Split::Test,
        "valid" => Split::Valid,
        other => bail!("split must be test or valid, got {other:?}"),
    };
    let table = read_probs(&args.probs)?;
    table.check_dims(graph.num_entities(), graph.num_types())?;
    let report = evaluate(
        |e| table.row(e, 0.0),
        graph.assertions(split),
        &graph.all_types_by_entity(),
    )?;
    print!("{}", report.key_values());
    println!("{}", report.tsv_line());
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<bool> {
    let graph = match &args.dataset {
        Some(p) => load_graph(p)?,
        None => toy_graph(),
    };
    let cfg = TrainConfig {
        temps: vec![1.0, 2.0],
        hops: 2,
        struct_dim: 3,
        dim: 4,
        seed: args.seed,
        ..TrainConfig::fb15ket()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let text = random_text_tables::<f64, _>(&graph, 3, &mut rng);
    let model = SkaModel::<f64>::init(&graph, Some(text), &cfg, &mut rng)?;
    let sampling = Sampling::from(&cfg);
    let batch = (0..graph.num_entities())
        .map(|i| {
            let e = EntityId::from(i);
            let plan = build_views_or_own(&graph, e, sampling, Mode::Infer, &mut rng)?;
            let teacher = (0..graph.num_types())
                .map(|j| 0.1 + 0.8 * ((i * 7 + j * 3) % 10) as f64 / 10.0)
                .collect();
            Ok(Example {
                plan,
                teacher: Some(teacher),
            })
        })
        .collect::<sset_core::Result<Vec<_>>>()?;

    let mut worst = 0.0f64;
    for lambda in [0.0, 0.5, 1.0] {
        let r = ska_gradient_check(
            &model,
            &graph,
            &batch,
            lambda,
            LossSign::NegLogLikelihood,
            args.step,
        )?;
        println!(
            "lambda {lambda}: max relative error {:.3e} over {} coordinates",
            r.max_rel_error, r.checked
        );
        worst = worst.max(r.max_rel_error);
    }
    println!("max relative error {worst:.3e}");
    Ok(worst < args.tolerance)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Prepare(a) => prepare(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Infer(a) => infer(a).map(|_| true),
        Command::Rerank(a) => rerank(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
