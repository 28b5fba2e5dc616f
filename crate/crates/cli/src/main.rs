//! `anycq` command-line tool.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad input data, 3 runtime
//! failure.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use anycq::benchgen::{
    generate_qac, generate_qar, generate_template_qac, read_qac, read_qar, verify_qac, verify_qar, write_qac,
    write_qar, LabelBudget, Preset,
};
use anycq::compgraph::PeMode;
use anycq::eval::{evaluate_qac, evaluate_qar, f1_qac, f1_qar, linear_fit_r2, spearman, timing_profile};
use anycq::kg::{load_pair, KnowledgeGraph};
use anycq::policy::PolicyParams;
use anycq::predictor::{augment_with_observed, noisy_perfect, LinkPredictor, PerfectPredictor, TabularPredictor};
use anycq::query::{parse_query, ConjunctiveQuery};
use anycq::search::{solve_qac, solve_qar, SearchConfig, LARGE_QUERY_STEPS, SMALL_QUERY_STEPS};
use anycq::synth::{synthetic_pair, SynthConfig};
use anycq::templates::{QueryType, TRAINING_TYPES};
use anycq::trainer::{train, train_from, TrainConfig, TrainSinks, TrainerState};

#[derive(Parser)]
#[command(name = "anycq", version, about = "Answer conjunctive queries over incomplete knowledge graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a search policy with REINFORCE on small query types.
    Train(TrainArgs),
    /// Evaluate a policy on query answer classification instances.
    EvalQac(EvalArgs),
    /// Evaluate a policy on query answer retrieval instances.
    EvalQar(EvalArgs),
    /// Generate benchmark instances.
    Generate(GenerateArgs),
    /// Answer a single query.
    Solve(SolveArgs),
    /// Measure average search step times.
    Profile(ProfileArgs),
    /// Write a synthetic observed/complete graph pair.
    Synth(SynthArgs),
}

#[derive(Args)]
struct Common {
    /// Random seed.
    #[arg(long, env = "ANYCQ_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training graph (tab-separated head, relation, tail).
    #[arg(long)]
    graph: PathBuf,
    /// Number of parameter updates.
    #[arg(long, alias = "epochs", default_value_t = 2000)]
    batches: usize,
    #[arg(long, default_value_t = 4)]
    batch_size: usize,
    /// Search steps per training episode.
    #[arg(long = "T-train", alias = "t-train", default_value_t = 15)]
    t_train: usize,
    #[arg(long, default_value_t = 0.75)]
    gamma: f64,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 64)]
    mlp_dim: usize,
    /// Comma-separated query types to train on.
    #[arg(long, value_delimiter = ',')]
    types: Vec<QueryType>,
    #[arg(long, default_value = "exact")]
    pe_mode: PeMode,
    /// Policy checkpoint to write. Trainer state goes to `<out>.state`.
    #[arg(long)]
    out: PathBuf,
    /// Metrics log (JSON lines); defaults to `<out>.log.jsonl`.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Continue from a trainer state file.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Save trainer state every this many batches.
    #[arg(long, default_value_t = 0)]
    checkpoint_every: usize,
    /// Log wall time as 0 so logs are byte-identical across runs.
    #[arg(long)]
    no_wall_time: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Split {
    /// Small query types (20 steps by default).
    Small,
    /// Generated large queries (200 steps by default).
    Large,
}

#[derive(Args)]
struct EvalArgs {
    /// Policy checkpoint.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Instance file (JSON lines).
    #[arg(long)]
    instances: PathBuf,
    /// Observable graph.
    #[arg(long)]
    graph_observed: PathBuf,
    /// Complete graph; needed by `perfect` and `noisy:` predictors and by
    /// answer verification.
    #[arg(long)]
    graph_complete: Option<PathBuf>,
    /// `perfect`, `tabular:<path>` or `noisy:<rate>`.
    #[arg(long, default_value = "perfect")]
    predictor: PredictorSpec,
    #[arg(long, value_enum, default_value_t = Split::Large)]
    split: Split,
    /// Search steps; defaults to 20 for small and 200 for large splits.
    #[arg(long)]
    steps: Option<usize>,
    /// Per-search time limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value = "exact")]
    pe_mode: PeMode,
    /// Stop a search once it reaches score 1.
    #[arg(long)]
    stop_at_one: bool,
    /// Worker threads.
    #[arg(long, env = "ANYCQ_JOBS", default_value_t = 1)]
    jobs: usize,
    /// Write the report as JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, ValueEnum)]
enum Task {
    Qac,
    Qar,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    graph_observed: PathBuf,
    #[arg(long)]
    graph_complete: PathBuf,
    #[arg(long, value_enum, default_value_t = Task::Qac)]
    task: Task,
    /// Hub preset: 3hub, 4hub or 5hub.
    #[arg(long, default_value = "3hub", conflicts_with = "template")]
    preset: Preset,
    /// Small query type instead of hub queries (QAC only).
    #[arg(long)]
    template: Option<QueryType>,
    #[arg(long, default_value_t = 15)]
    n_min: usize,
    /// Instances to emit (per arity for QAR).
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Largest QAR arity; instances are emitted for every arity up to it.
    #[arg(long, default_value_t = 1)]
    arity_max: usize,
    /// Oracle time limit per labelling call, in seconds.
    #[arg(long, default_value_t = 30.0)]
    label_timeout: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SolveArgs {
    /// Observable graph.
    #[arg(long)]
    graph: PathBuf,
    /// Complete graph for the perfect predictor; defaults to `--graph`.
    #[arg(long)]
    graph_complete: Option<PathBuf>,
    /// Query text, e.g. `Q(x) := EXISTS y . r(x,y) & s(y,c:a)`.
    #[arg(long)]
    query: String,
    /// Comma-separated candidate answer; classifies instead of retrieving.
    #[arg(long)]
    candidate: Option<String>,
    /// Policy checkpoint; a freshly initialised policy is used if absent.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "perfect")]
    predictor: PredictorSpec,
    #[arg(long, default_value_t = LARGE_QUERY_STEPS)]
    steps: usize,
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
    #[arg(long, default_value = "exact")]
    pe_mode: PeMode,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    graph_observed: PathBuf,
    #[arg(long)]
    graph_complete: Option<PathBuf>,
    /// Instance file whose queries are profiled.
    #[arg(long)]
    instances: PathBuf,
    #[arg(long, value_enum, default_value_t = Task::Qac)]
    task: Task,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = SMALL_QUERY_STEPS)]
    steps: usize,
    #[arg(long, default_value = "exact")]
    pe_mode: PeMode,
    /// Rows as JSON lines; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    entities: usize,
    #[arg(long, default_value_t = 12)]
    relations: usize,
    #[arg(long, default_value_t = 4.0)]
    out_degree: f64,
    #[arg(long, default_value_t = 0.85)]
    observed_fraction: f64,
    /// Directory receiving `observed.tsv` and `complete.tsv`.
    #[arg(long)]
    out_dir: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Debug)]
enum PredictorSpec {
    Perfect,
    Tabular(PathBuf),
    Noisy(f64),
}

impl FromStr for PredictorSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s == "perfect" {
            return Ok(PredictorSpec::Perfect);
        }
        if let Some(p) = s.strip_prefix("tabular:") {
            return Ok(PredictorSpec::Tabular(PathBuf::from(p)));
        }
        if let Some(r) = s.strip_prefix("noisy:") {
            let rate: f64 = r.parse().map_err(|_| format!("bad noise rate `{r}`"))?;
            return Ok(PredictorSpec::Noisy(rate));
        }
        Err(format!("unknown predictor `{s}` (expected perfect, tabular:<path>, noisy:<rate>)"))
    }
}

enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Runtime(m) => m,
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

fn data<E: std::fmt::Display>(ctx: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Data(format!("{ctx}: {e}"))
}

fn runtime<E: std::fmt::Display>(ctx: &str) -> impl FnOnce(E) -> Failure + '_ {
    move |e| Failure::Runtime(format!("{ctx}: {e}"))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

struct Graphs {
    observed: Arc<KnowledgeGraph>,
    complete: Option<Arc<KnowledgeGraph>>,
}

/// Both graphs share one vocabulary.
fn load_graphs(observed: &Path, complete: Option<&Path>) -> Result<Graphs> {
    match complete {
        None => {
            let g = KnowledgeGraph::load_triples(open(observed)?).map_err(data(&observed.display().to_string()))?;
            Ok(Graphs {
                observed: Arc::new(g),
                complete: None,
            })
        }
        Some(c) => {
            let (g, gt) = load_pair(open(observed)?, open(c)?).map_err(data("graph"))?;
            Ok(Graphs {
                observed: Arc::new(g),
                complete: Some(Arc::new(gt)),
            })
        }
    }
}

fn build_predictor(spec: &PredictorSpec, graphs: &Graphs, fallback: bool, seed: u64) -> Result<Box<dyn LinkPredictor>> {
    let complete = || match (&graphs.complete, fallback) {
        (Some(gt), _) => Ok(gt.clone()),
        (None, true) => Ok(graphs.observed.clone()),
        (None, false) => Err(Failure::Usage(
            "this predictor needs --graph-complete".to_owned(),
        )),
    };
    Ok(match spec {
        PredictorSpec::Perfect => Box::new(PerfectPredictor::new(complete()?)),
        PredictorSpec::Noisy(rate) => {
            let gt = complete()?;
            Box::new(noisy_perfect(&gt, *rate, seed).map_err(|e| Failure::Usage(e.to_string()))?)
        }
        PredictorSpec::Tabular(path) => {
            let tab = TabularPredictor::load(open(path)?, graphs.observed.vocab(), 0.0).map_err(data(&path.display().to_string()))?;
            Box::new(augment_with_observed(tab, graphs.observed.clone()))
        }
    })
}

fn load_policy(path: Option<&Path>, seed: u64) -> Result<PolicyParams> {
    match path {
        Some(p) => PolicyParams::load(p).map_err(data(&p.display().to_string())),
        None => Ok(PolicyParams::init(32, 64, &mut ChaCha8Rng::seed_from_u64(seed))),
    }
}

fn timeout(secs: f64) -> Result<Option<Duration>> {
    if secs.is_nan() || secs < 0.0 {
        return Err(Failure::Usage(format!("timeout must be non-negative, got {secs}")));
    }
    Ok((secs > 0.0 && secs.is_finite()).then(|| Duration::from_secs_f64(secs)))
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let graph = KnowledgeGraph::load_triples(open(&a.graph)?).map_err(data(&a.graph.display().to_string()))?;
    let cfg = TrainConfig {
        t_train: a.t_train,
        gamma: a.gamma,
        lr: a.lr,
        batch_size: a.batch_size,
        batches: a.batches,
        hidden_dim: a.hidden_dim,
        mlp_dim: a.mlp_dim,
        pe_mode: a.pe_mode,
        types: if a.types.is_empty() { TRAINING_TYPES.to_vec() } else { a.types },
        seed: a.common.seed,
        checkpoint_every: a.checkpoint_every,
        log_wall_time: !a.no_wall_time,
    };
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let log_path = a.log.unwrap_or_else(|| with_suffix(&a.out, ".log.jsonl"));
    let state_path = with_suffix(&a.out, ".state");
    let append = a.resume.is_some();
    let log_file = std::fs::OpenOptions::new()
        .create(true)
        .write(true)
        .append(append)
        .truncate(!append)
        .open(&log_path)
        .map_err(runtime(&log_path.display().to_string()))?;
    let mut log = BufWriter::new(log_file);
    let mut sinks = TrainSinks {
        log: Some(&mut log),
        checkpoint: Some(&state_path),
    };
    let graph = Arc::new(graph);
    let (state, logs) = match &a.resume {
        Some(p) => {
            let st = TrainerState::load(p).map_err(data(&p.display().to_string()))?;
            train_from(graph, &cfg, st, &mut sinks)
        }
        None => train(graph, &cfg, &mut sinks),
    }
    .map_err(runtime("training"))?;
    log.flush().map_err(runtime("log"))?;
    state.params.save(&a.out).map_err(runtime(&a.out.display().to_string()))?;
    if let Some(last) = logs.last() {
        eprintln!(
            "trained {} batches; last loss {:.4}, mean best score {:.3}",
            state.batch, last.loss, last.mean_best_score
        );
    }
    Ok(())
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn search_config(steps: Option<usize>, split: Split, secs: f64, pe_mode: PeMode, stop_at_one: bool) -> Result<SearchConfig> {
    Ok(SearchConfig {
        steps: steps.unwrap_or(match split {
            Split::Small => SMALL_QUERY_STEPS,
            Split::Large => LARGE_QUERY_STEPS,
        }),
        pe_mode,
        timeout: timeout(secs)?,
        stop_at_one,
    })
}

fn write_report(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    if let Some(p) = path {
        let mut w = create(p)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(runtime("report"))?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(runtime("report"))?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs, task: Task) -> Result<()> {
    if matches!(a.predictor, PredictorSpec::Perfect | PredictorSpec::Noisy(_)) && a.graph_complete.is_none() {
        return Err(Failure::Usage(
            "--predictor perfect/noisy requires --graph-complete".to_owned(),
        ));
    }
    if matches!(task, Task::Qar) && a.graph_complete.is_none() {
        return Err(Failure::Usage("eval-qar needs --graph-complete to verify answers".to_owned()));
    }
    let graphs = load_graphs(&a.graph_observed, a.graph_complete.as_deref())?;
    let pi = build_predictor(&a.predictor, &graphs, false, a.common.seed)?;
    let params = load_policy(Some(&a.checkpoint), a.common.seed)?;
    let cfg = search_config(a.steps, a.split, a.timeout, a.pe_mode, a.stop_at_one)?;
    let vocab = graphs.observed.vocab().clone();
    let report = match task {
        Task::Qac => {
            let insts = read_qac(open(&a.instances)?, &vocab).map_err(data(&a.instances.display().to_string()))?;
            let out = evaluate_qac(&params, &insts, &graphs.observed, pi.as_ref(), &cfg, a.common.seed, a.jobs);
            f1_qac(&out).map_err(data("predictions"))?
        }
        Task::Qar => {
            let insts = read_qar(open(&a.instances)?, &vocab).map_err(data(&a.instances.display().to_string()))?;
            let gt = graphs.complete.as_ref().expect("checked above");
            let out = evaluate_qar(&params, &insts, &graphs.observed, gt, pi.as_ref(), &cfg, a.common.seed, a.jobs);
            f1_qar(&out)
        }
    };
    print!("{}", report.to_table());
    let mut json = report.to_json();
    json["steps"] = cfg.steps.into();
    write_report(a.report.as_deref(), &json)
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    if a.count == 0 || a.arity_max == 0 || a.arity_max > 3 {
        return Err(Failure::Usage("--count must be positive and --arity-max in 1..=3".to_owned()));
    }
    if a.template.is_some() && matches!(a.task, Task::Qar) {
        return Err(Failure::Usage("--template only applies to --task qac".to_owned()));
    }
    let graphs = load_graphs(&a.graph_observed, Some(&a.graph_complete))?;
    let (g, gt) = (&graphs.observed, graphs.complete.as_ref().expect("loaded"));
    let budget = LabelBudget {
        timeout: timeout(a.label_timeout)?,
        ..Default::default()
    };
    let params = a.preset.params(a.n_min);
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let mut w = create(&a.out)?;
    let vocab = gt.vocab();
    match a.task {
        Task::Qac => {
            let (insts, stats) = match a.template {
                Some(ty) => generate_template_qac(g, gt, ty, a.count, &budget, &mut rng),
                None => generate_qac(g, gt, &params, a.count, &budget, &mut rng),
            }
            .map_err(runtime("generation"))?;
            for i in &insts {
                verify_qac(i, g, gt).map_err(runtime("self-check"))?;
            }
            write_qac(&mut w, &insts, vocab).map_err(runtime("write"))?;
            eprintln!("{} instances after {} attempts", insts.len(), stats.attempts);
        }
        Task::Qar => {
            for k in 1..=a.arity_max {
                let (insts, _) =
                    generate_qar(g, gt, &params, a.count, k, &budget, &mut rng).map_err(runtime("generation"))?;
                for i in &insts {
                    verify_qar(i, g, gt).map_err(runtime("self-check"))?;
                }
                write_qar(&mut w, &insts, vocab).map_err(runtime("write"))?;
            }
        }
    }
    w.flush().map_err(runtime("write"))
}

fn cmd_solve(a: SolveArgs) -> Result<()> {
    let graphs = load_graphs(&a.graph, a.graph_complete.as_deref())?;
    let pi = build_predictor(&a.predictor, &graphs, true, a.common.seed)?;
    let params = load_policy(a.checkpoint.as_deref(), a.common.seed)?;
    let named = parse_query(&a.query).map_err(|e| Failure::Data(e.render(&a.query)))?;
    let q = named.bind(graphs.observed.vocab()).map_err(data("query"))?;
    let cfg = SearchConfig {
        steps: a.steps,
        pe_mode: a.pe_mode,
        timeout: timeout(a.timeout)?,
        stop_at_one: false,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let vocab = graphs.observed.vocab();
    let g = &graphs.observed;
    let is_ground = q.arity() == 0;
    match (&a.candidate, is_ground) {
        (Some(c), _) => {
            let tuple = c
                .split(',')
                .map(|n| vocab.entity(n.trim()).ok_or_else(|| Failure::Data(format!("unknown entity `{n}`"))))
                .collect::<Result<Vec<_>>>()?;
            let v = solve_qac(&params, &q, &tuple, g, pi.as_ref(), &cfg, &mut rng).map_err(data("candidate"))?;
            println!("{} {:?}", v.positive, v.score);
        }
        (None, true) => {
            let v = solve_qac(&params, &q, &[], g, pi.as_ref(), &cfg, &mut rng).map_err(data("query"))?;
            println!("{} {:?}", v.positive, v.score);
        }
        (None, false) => {
            let ans = solve_qar(&params, &q, g, pi.as_ref(), &cfg, &mut rng);
            match ans.answer {
                Some(t) => {
                    let names: Vec<&str> = t.iter().map(|e| vocab.entity_name(*e).unwrap_or("?")).collect();
                    println!("{} {:?}", names.join(","), ans.score);
                }
                None => println!("None {:?}", ans.score),
            }
        }
    }
    Ok(())
}

fn cmd_profile(a: ProfileArgs) -> Result<()> {
    let graphs = load_graphs(&a.graph_observed, a.graph_complete.as_deref())?;
    let pi = build_predictor(&PredictorSpec::Perfect, &graphs, true, a.common.seed)?;
    let params = load_policy(a.checkpoint.as_deref(), a.common.seed)?;
    let vocab = graphs.observed.vocab().clone();
    let queries: Vec<ConjunctiveQuery> = match a.task {
        Task::Qac => read_qac(open(&a.instances)?, &vocab)
            .map_err(data("instances"))?
            .into_iter()
            .map(|i| i.query.existentially_close())
            .collect(),
        Task::Qar => read_qar(open(&a.instances)?, &vocab)
            .map_err(data("instances"))?
            .into_iter()
            .map(|i| i.query.existentially_close())
            .collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let rows = timing_profile(&params, &graphs.observed, pi.as_ref(), &queries, a.steps, a.pe_mode, &mut rng);
    let mut out: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    };
    for r in &rows {
        serde_json::to_writer(&mut out, r).map_err(runtime("write"))?;
        out.write_all(b"\n").map_err(runtime("write"))?;
    }
    out.flush().map_err(runtime("write"))?;
    if rows.len() >= 2 {
        let size: Vec<f64> = rows.iter().map(|r| r.size as f64).collect();
        let ast: Vec<f64> = rows.iter().map(|r| r.ast).collect();
        let factor: Vec<f64> = rows.iter().map(|r| r.complexity_factor as f64).collect();
        let per: Vec<f64> = rows.iter().map(|r| r.ast_per_factor).collect();
        eprintln!(
            "rows {}  R2(ast ~ size) {:.3}  spearman(ast/factor, factor) {:.3}",
            rows.len(),
            linear_fit_r2(&size, &ast),
            spearman(&factor, &per)
        );
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    if a.entities == 0 || a.relations == 0 || !(0.0..=1.0).contains(&a.observed_fraction) {
        return Err(Failure::Usage("entities and relations must be positive, fraction in [0,1]".to_owned()));
    }
    let pair = synthetic_pair(&SynthConfig {
        num_entities: a.entities,
        num_relations: a.relations,
        out_degree: a.out_degree,
        observed_fraction: a.observed_fraction,
        seed: a.common.seed,
        ..Default::default()
    });
    std::fs::create_dir_all(&a.out_dir).map_err(runtime(&a.out_dir.display().to_string()))?;
    for (name, g) in [("observed.tsv", &pair.observed), ("complete.tsv", &pair.complete)] {
        let p = a.out_dir.join(name);
        let mut w = create(&p)?;
        g.write_triples(&mut w).and_then(|_| w.flush()).map_err(runtime(&p.display().to_string()))?;
    }
    eprintln!(
        "observed {} facts, complete {} facts",
        pair.observed.num_facts(),
        pair.complete.num_facts()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let res = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::EvalQac(a) => cmd_eval(a, Task::Qac),
        Command::EvalQar(a) => cmd_eval(a, Task::Qar),
        Command::Generate(a) => cmd_generate(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Profile(a) => cmd_profile(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
