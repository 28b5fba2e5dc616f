//! Python bindings: graphs, policies, training, instance generation,
//! solving and evaluation.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use anycq::benchgen::{self, LabelBudget, Preset};
use anycq::compgraph::PeMode;
use anycq::eval::{self as ev, f1_qac, f1_qar};
use anycq::kg::{self, KnowledgeGraph};
use anycq::policy::PolicyParams;
use anycq::predictor::{LinkPredictor, PerfectPredictor};
use anycq::query::{parse_query, DnfQuery};
use anycq::search::{self, SearchConfig};
use anycq::synth::{synthetic_pair as synth_pair, SynthConfig};
use anycq::templates::{QueryType, TRAINING_TYPES};
use anycq::trainer::{self, TrainConfig, TrainSinks};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A knowledge graph over named entities and relations.
#[pyclass(name = "KnowledgeGraph", module = "anycq_py", frozen)]
struct PyGraph {
    inner: Arc<KnowledgeGraph>,
}

#[pymethods]
impl PyGraph {
    /// Read tab-separated `head relation tail` lines.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let f = std::fs::File::open(&path).map_err(|e| PyIOError::new_err(format!("{}: {e}", path.display())))?;
        let g = KnowledgeGraph::load_triples(std::io::BufReader::new(f)).map_err(value_err)?;
        Ok(PyGraph { inner: Arc::new(g) })
    }

    #[staticmethod]
    fn from_triples(triples: Vec<(String, String, String)>) -> PyResult<Self> {
        let text: String = triples.iter().map(|(h, r, t)| format!("{h}\t{r}\t{t}\n")).collect();
        let g = KnowledgeGraph::load_triples(text.as_bytes()).map_err(value_err)?;
        Ok(PyGraph { inner: Arc::new(g) })
    }

    #[getter]
    fn num_entities(&self) -> usize {
        self.inner.num_entities()
    }

    #[getter]
    fn num_relations(&self) -> usize {
        self.inner.num_relations()
    }

    #[getter]
    fn num_facts(&self) -> usize {
        self.inner.num_facts()
    }

    fn contains(&self, head: &str, rel: &str, tail: &str) -> bool {
        let v = self.inner.vocab();
        match (v.entity(head), v.relation(rel), v.entity(tail)) {
            (Some(h), Some(r), Some(t)) => self.inner.contains(r, h, t),
            _ => false,
        }
    }

    fn triples(&self) -> Vec<(String, String, String)> {
        let v = self.inner.vocab();
        self.inner
            .sorted_facts()
            .into_iter()
            .map(|t| {
                (
                    v.entity_name(t.head).unwrap_or_default().to_owned(),
                    v.relation_name(t.rel).unwrap_or_default().to_owned(),
                    v.entity_name(t.tail).unwrap_or_default().to_owned(),
                )
            })
            .collect()
    }

    fn __len__(&self) -> usize {
        self.inner.num_facts()
    }

    fn __repr__(&self) -> String {
        format!(
            "KnowledgeGraph(entities={}, relations={}, facts={})",
            self.inner.num_entities(),
            self.inner.num_relations(),
            self.inner.num_facts()
        )
    }
}

/// Load an observed/complete pair sharing one vocabulary.
#[pyfunction]
fn load_pair(observed: PathBuf, complete: PathBuf) -> PyResult<(PyGraph, PyGraph)> {
    let open = |p: &PathBuf| {
        std::fs::File::open(p)
            .map(std::io::BufReader::new)
            .map_err(|e| PyIOError::new_err(format!("{}: {e}", p.display())))
    };
    let (g, gt) = kg::load_pair(open(&observed)?, open(&complete)?).map_err(value_err)?;
    Ok((PyGraph { inner: Arc::new(g) }, PyGraph { inner: Arc::new(gt) }))
}

#[pyfunction]
#[pyo3(signature = (entities=200, relations=12, out_degree=4.0, observed_fraction=0.85, seed=0))]
fn synthetic_pair(
    entities: usize,
    relations: usize,
    out_degree: f64,
    observed_fraction: f64,
    seed: u64,
) -> (PyGraph, PyGraph) {
    let p = synth_pair(&SynthConfig {
        num_entities: entities,
        num_relations: relations,
        out_degree,
        observed_fraction,
        seed,
        ..Default::default()
    });
    (PyGraph { inner: p.observed }, PyGraph { inner: p.complete })
}

/// Search policy parameters.
#[pyclass(name = "Policy", module = "anycq_py", frozen)]
struct PyPolicy {
    inner: PolicyParams,
}

#[pymethods]
impl PyPolicy {
    #[staticmethod]
    #[pyo3(signature = (hidden_dim=32, mlp_dim=64, seed=0))]
    fn init(hidden_dim: usize, mlp_dim: usize, seed: u64) -> Self {
        PyPolicy {
            inner: PolicyParams::init(hidden_dim, mlp_dim, &mut ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyPolicy {
            inner: PolicyParams::load(&path).map_err(value_err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(|e| PyIOError::new_err(e.to_string()))
    }
}

fn pe_mode(s: &str) -> PyResult<PeMode> {
    s.parse().map_err(PyValueError::new_err)
}

/// Train a policy on `graph`; returns the policy and per-batch logs.
#[pyfunction]
#[pyo3(signature = (graph, batches=2000, batch_size=4, lr=1e-3, gamma=0.75, t_train=15, hidden_dim=32, mlp_dim=64, types=None, pe_mode="exact", seed=0))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    batches: usize,
    batch_size: usize,
    lr: f64,
    gamma: f64,
    t_train: usize,
    hidden_dim: usize,
    mlp_dim: usize,
    types: Option<Vec<String>>,
    pe_mode: &str,
    seed: u64,
) -> PyResult<(PyPolicy, Vec<Bound<'py, PyDict>>)> {
    let types = match types {
        None => TRAINING_TYPES.to_vec(),
        Some(ts) => ts
            .iter()
            .map(|t| t.parse::<QueryType>().map_err(PyValueError::new_err))
            .collect::<PyResult<_>>()?,
    };
    let cfg = TrainConfig {
        t_train,
        gamma,
        lr,
        batch_size,
        batches,
        hidden_dim,
        mlp_dim,
        pe_mode: self::pe_mode(pe_mode)?,
        types,
        seed,
        checkpoint_every: 0,
        log_wall_time: false,
    };
    let (state, logs) = trainer::train(graph.inner.clone(), &cfg, &mut TrainSinks::none())
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let logs = logs
        .iter()
        .map(|l| {
            let d = PyDict::new(py);
            d.set_item("batch", l.batch)?;
            d.set_item("loss", l.loss)?;
            d.set_item("mean_best_score", l.mean_best_score)?;
            Ok(d)
        })
        .collect::<PyResult<_>>()?;
    Ok((PyPolicy { inner: state.params }, logs))
}

fn bind(query: &str, g: &KnowledgeGraph) -> PyResult<DnfQuery> {
    let named = parse_query(query).map_err(|e| PyValueError::new_err(e.render(query)))?;
    named.bind(g.vocab()).map_err(value_err)
}

fn search_cfg(steps: usize, pe_mode: &str, timeout: Option<f64>) -> PyResult<SearchConfig> {
    Ok(SearchConfig {
        steps,
        pe_mode: self::pe_mode(pe_mode)?,
        timeout: timeout.map(Duration::from_secs_f64),
        stop_at_one: false,
    })
}

/// Answer `query` over `graph` with a perfect predictor on `complete`
/// (defaults to `graph`). With `candidate` the result is
/// `(verdict, score)`, otherwise `(answer tuple or None, score)`.
#[pyfunction]
#[pyo3(signature = (policy, graph, query, candidate=None, complete=None, steps=200, pe_mode="exact", timeout=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn solve<'py>(
    py: Python<'py>,
    policy: &PyPolicy,
    graph: &PyGraph,
    query: &str,
    candidate: Option<Vec<String>>,
    complete: Option<&PyGraph>,
    steps: usize,
    pe_mode: &str,
    timeout: Option<f64>,
    seed: u64,
) -> PyResult<(Bound<'py, PyAny>, f64)> {
    let g = &graph.inner;
    let pi = PerfectPredictor::new(complete.map_or_else(|| g.clone(), |c| c.inner.clone()));
    let q = bind(query, g)?;
    let cfg = search_cfg(steps, pe_mode, timeout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = g.vocab();
    if candidate.is_some() || q.arity() == 0 {
        let tuple = candidate
            .unwrap_or_default()
            .iter()
            .map(|n| vocab.entity(n).ok_or_else(|| PyValueError::new_err(format!("unknown entity `{n}`"))))
            .collect::<PyResult<Vec<_>>>()?;
        let v = search::solve_qac(&policy.inner, &q, &tuple, g, &pi, &cfg, &mut rng).map_err(value_err)?;
        return Ok((v.positive.into_pyobject(py)?.to_owned().into_any(), v.score));
    }
    let ans = search::solve_qar(&policy.inner, &q, g, &pi, &cfg, &mut rng);
    let names = ans.answer.map(|t| {
        t.iter()
            .map(|e| vocab.entity_name(*e).unwrap_or_default().to_owned())
            .collect::<Vec<_>>()
    });
    Ok((names.into_pyobject(py)?.into_any(), ans.score))
}

/// Exact answer set of a single-disjunct query over `graph`.
#[pyfunction]
fn answers(graph: &PyGraph, query: &str) -> PyResult<Vec<Vec<String>>> {
    let g = &graph.inner;
    let q = bind(query, g)?;
    let [d] = q.disjuncts.as_slice() else {
        return Err(PyValueError::new_err("expected a conjunctive query"));
    };
    let vocab = g.vocab();
    Ok(ev::answers(d, g)
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?
        .iter()
        .map(|t| t.iter().map(|e| vocab.entity_name(*e).unwrap_or_default().to_owned()).collect())
        .collect())
}

/// Generate benchmark instances as JSON lines. `template` selects a small
/// query type instead of hub queries.
#[pyfunction]
#[pyo3(signature = (observed, complete, count=10, task="qac", preset="3hub", n_min=15, template=None, arity=1, seed=0))]
#[allow(clippy::too_many_arguments)]
fn generate(
    observed: &PyGraph,
    complete: &PyGraph,
    count: usize,
    task: &str,
    preset: &str,
    n_min: usize,
    template: Option<&str>,
    arity: usize,
    seed: u64,
) -> PyResult<String> {
    let (g, gt) = (&observed.inner, &complete.inner);
    let params = preset.parse::<Preset>().map_err(PyValueError::new_err)?.params(n_min);
    let budget = LabelBudget::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen_err = |e: benchgen::GenError| PyRuntimeError::new_err(e.to_string());
    let mut buf = Vec::new();
    match (task, template) {
        ("qac", Some(t)) => {
            let ty: QueryType = t.parse().map_err(PyValueError::new_err)?;
            let (insts, _) = benchgen::generate_template_qac(g, gt, ty, count, &budget, &mut rng).map_err(gen_err)?;
            benchgen::write_qac(&mut buf, &insts, gt.vocab())?;
        }
        ("qac", None) => {
            let (insts, _) = benchgen::generate_qac(g, gt, &params, count, &budget, &mut rng).map_err(gen_err)?;
            benchgen::write_qac(&mut buf, &insts, gt.vocab())?;
        }
        ("qar", None) => {
            if arity == 0 {
                return Err(PyValueError::new_err("arity must be positive"));
            }
            let (insts, _) = benchgen::generate_qar(g, gt, &params, count, arity, &budget, &mut rng).map_err(gen_err)?;
            benchgen::write_qar(&mut buf, &insts, gt.vocab())?;
        }
        _ => return Err(PyValueError::new_err("task must be `qac` or `qar` (templates are qac only)")),
    }
    String::from_utf8(buf).map_err(value_err)
}

/// Evaluate a policy on JSON-lines instances; returns the metrics report
/// as a JSON string.
#[pyfunction]
#[pyo3(signature = (policy, instances, observed, complete, task="qac", steps=200, pe_mode="exact", timeout=None, seed=0))]
#[allow(clippy::too_many_arguments)]
fn evaluate(
    policy: &PyPolicy,
    instances: &str,
    observed: &PyGraph,
    complete: &PyGraph,
    task: &str,
    steps: usize,
    pe_mode: &str,
    timeout: Option<f64>,
    seed: u64,
) -> PyResult<String> {
    let (g, gt) = (&observed.inner, &complete.inner);
    let pi: Box<dyn LinkPredictor> = Box::new(PerfectPredictor::new(gt.clone()));
    let cfg = search_cfg(steps, pe_mode, timeout)?;
    let report = match task {
        "qac" => {
            let insts = benchgen::read_qac(instances.as_bytes(), gt.vocab()).map_err(value_err)?;
            let out = ev::evaluate_qac(&policy.inner, &insts, g, pi.as_ref(), &cfg, seed, 0);
            f1_qac(&out).map_err(value_err)?
        }
        "qar" => {
            let insts = benchgen::read_qar(instances.as_bytes(), gt.vocab()).map_err(value_err)?;
            f1_qar(&ev::evaluate_qar(&policy.inner, &insts, g, gt, pi.as_ref(), &cfg, seed, 0))
        }
        _ => return Err(PyValueError::new_err("task must be `qac` or `qar`")),
    };
    Ok(report.to_json().to_string())
}

/// Add every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(load_pair, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_pair, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(answers, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}

#[pymodule]
fn anycq_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}
