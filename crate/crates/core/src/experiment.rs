//! Experiment configuration, single runs, and method comparisons.
//!
//! Configurations are TOML documents starting with `schema_version = 1`:
//!
//! ```toml
//! schema_version = 1
//!
//! [graph]
//! type = "exponential"   # exponential | geometric | ring | complete
//! n = 16
//! seed = 1               # geometric only; `radius`, `reverse_drop` likewise
//! # file = "graph.txt"   # instead of `type`
//!
//! [problem]
//! kind = "logistic"      # logistic | quadratic
//! dim = 10
//! per_node = 100
//! seed = 7
//! # csv = "data.csv"     # instead of synthetic data; `label_column` = index, name or "last"
//!
//! [algorithm]
//! name = "absaga"        # absaga | sab | ab | saga
//! alpha = "auto"
//! c = 1                  # or "auto"
//! d = 1
//!
//! [run]
//! epochs = 100           # or `iterations`
//! seed = 0
//!
//! [output]
//! trace = "trace.csv"
//! ```
//!
//! Relative paths are resolved against the directory of the configuration file.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use serde::Deserialize;

use crate::algorithms::{
    run_with, CentralizedSaga, InitialPoint, IterationMetrics, Method, NetworkState, Stepper,
};
use crate::digraph::{
    complete_graph, exponential_graph, geometric_digraph, ring_graph, DirectedGraph,
};
use crate::error::{Error, Result};
use crate::problems::{load_csv, synthetic_logistic, synthetic_quadratic, FiniteSumProblem, LabelColumn};
use crate::theory::{
    delta_certificate, max_stepsize, min_comm_rounds, ConvergenceCertificate, ConvergenceInputs,
    NetworkConstants,
};
use crate::weights::WeightSystem;

pub const SCHEMA_VERSION: u32 = 1;

pub const TRACE_HEADER: [&str; 8] = [
    "iteration",
    "epoch",
    "optimality_gap",
    "consensus_error",
    "tracking_error",
    "aux_gap",
    "grads_computed",
    "comm_rounds",
];

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub graph: GraphConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    pub problem: ProblemConfig,
    pub algorithm: AlgorithmConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphType {
    Exponential,
    Geometric,
    Ring,
    Complete,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    #[serde(rename = "type")]
    pub kind: Option<GraphType>,
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub radius: Option<f64>,
    pub reverse_drop: Option<f64>,
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(default = "default_true")]
    pub self_loops: bool,
}

impl Default for WeightsConfig {
    fn default() -> Self {
        Self { self_loops: true }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKindConfig {
    Logistic,
    Quadratic,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum LabelColumnConfig {
    Index(usize),
    Name(String),
}

impl LabelColumnConfig {
    fn to_label_column(&self) -> LabelColumn {
        match self {
            LabelColumnConfig::Index(i) => LabelColumn::Index(*i),
            LabelColumnConfig::Name(s) if s == "last" => LabelColumn::Last,
            LabelColumnConfig::Name(s) => LabelColumn::Name(s.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub kind: ProblemKindConfig,
    pub dim: Option<usize>,
    pub per_node: Option<usize>,
    pub csv: Option<PathBuf>,
    pub label_column: Option<LabelColumnConfig>,
    pub lambda: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmName {
    Absaga,
    Sab,
    Ab,
    Saga,
}

impl AlgorithmName {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmName::Absaga => "absaga",
            AlgorithmName::Sab => "sab",
            AlgorithmName::Ab => "ab",
            AlgorithmName::Saga => "saga",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

/// Either an explicit value or `"auto"`.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum MaybeAuto<T> {
    Auto(Auto),
    Value(T),
}

impl<T: Copy> MaybeAuto<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            MaybeAuto::Auto(_) => None,
            MaybeAuto::Value(v) => Some(*v),
        }
    }
}

fn one_round() -> MaybeAuto<u32> {
    MaybeAuto::Value(1)
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub name: AlgorithmName,
    pub alpha: MaybeAuto<f64>,
    #[serde(default = "one_round")]
    pub c: MaybeAuto<u32>,
    #[serde(default = "one_round")]
    pub d: MaybeAuto<u32>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub iterations: Option<u64>,
    pub epochs: Option<u64>,
    pub record_every: Option<u64>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub trace: Option<PathBuf>,
    pub certificate: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses and validates a configuration; relative paths stay relative.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            Error::config(if key == "." { "<document>".into() } else { key }, e.into_inner().message().trim())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let g = &self.graph;
        match (g.kind, &g.file) {
            (Some(_), Some(_)) => {
                return Err(Error::config("graph", "set exactly one of `type` and `file`"))
            }
            (None, None) => return Err(Error::config("graph", "one of `type` or `file` is required")),
            (Some(kind), None) => {
                if g.n.is_none() {
                    return Err(Error::config("graph.n", "required with `type`"));
                }
                let geometric = kind == GraphType::Geometric;
                if geometric != g.radius.is_some() {
                    return Err(Error::config("graph.radius", "required for, and only for, geometric graphs"));
                }
                if !geometric && g.reverse_drop.is_some() {
                    return Err(Error::config("graph.reverse_drop", "only valid for geometric graphs"));
                }
            }
            (None, Some(_)) => {
                if g.n.is_some() || g.radius.is_some() || g.reverse_drop.is_some() {
                    return Err(Error::config("graph", "`file` excludes `n`, `radius` and `reverse_drop`"));
                }
            }
        }

        let p = &self.problem;
        match &p.csv {
            Some(_) => {
                if p.kind != ProblemKindConfig::Logistic {
                    return Err(Error::config("problem.csv", "csv data requires kind = \"logistic\""));
                }
                if p.per_node.is_some() || p.dim.is_some() {
                    return Err(Error::config("problem", "`csv` excludes `per_node` and `dim`"));
                }
            }
            None => {
                if p.per_node.is_none() {
                    return Err(Error::config("problem.per_node", "required for synthetic data"));
                }
                if p.dim.is_none() {
                    return Err(Error::config("problem.dim", "required for synthetic data"));
                }
                if p.label_column.is_some() {
                    return Err(Error::config("problem.label_column", "only valid with `csv`"));
                }
            }
        }
        if let Some(l) = p.lambda {
            if p.kind == ProblemKindConfig::Quadratic {
                return Err(Error::config("problem.lambda", "only valid for logistic problems"));
            }
            if !(l > 0.0) {
                return Err(Error::config("problem.lambda", "must be positive"));
            }
        }

        if let Some(a) = self.algorithm.alpha.value() {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config("algorithm.alpha", format!("must be positive, got {a}")));
            }
        }
        for (key, v) in [("algorithm.c", self.algorithm.c), ("algorithm.d", self.algorithm.d)] {
            if v.value() == Some(0) {
                return Err(Error::config(key, "must be >= 1"));
            }
        }

        let r = &self.run;
        match (r.iterations, r.epochs) {
            (Some(_), Some(_)) => {
                return Err(Error::config("run", "set exactly one of `iterations` and `epochs`"))
            }
            (None, None) => return Err(Error::config("run", "one of `iterations` or `epochs` is required")),
            (Some(0), None) => return Err(Error::config("run.iterations", "must be >= 1")),
            (None, Some(0)) => return Err(Error::config("run.epochs", "must be >= 1")),
            _ => {}
        }
        if r.record_every == Some(0) {
            return Err(Error::config("run.record_every", "must be >= 1"));
        }
        Ok(())
    }

    /// Reads a configuration file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(q) = p {
                if q.is_relative() {
                    *q = base.join(&*q);
                }
            }
        };
        fix(&mut self.graph.file);
        fix(&mut self.problem.csv);
        fix(&mut self.output.trace);
        fix(&mut self.output.certificate);
        fix(&mut self.output.summary);
    }
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    ExperimentConfig::load(path)
}

pub fn build_graph(cfg: &GraphConfig, self_loops: bool) -> Result<DirectedGraph> {
    let g = match (&cfg.file, cfg.kind) {
        (Some(path), _) => DirectedGraph::read(path)?,
        (None, Some(kind)) => {
            let n = cfg.n.ok_or_else(|| Error::config("graph.n", "required with `type`"))?;
            match kind {
                GraphType::Exponential => exponential_graph(n)?,
                GraphType::Ring => ring_graph(n)?,
                GraphType::Complete => complete_graph(n)?,
                GraphType::Geometric => geometric_digraph(
                    n,
                    cfg.radius.unwrap_or_default(),
                    cfg.reverse_drop.unwrap_or(0.0),
                    cfg.seed,
                )?,
            }
        }
        (None, None) => return Err(Error::config("graph", "no graph source")),
    };
    if self_loops {
        return Ok(g);
    }
    let edges: Vec<(usize, usize)> = g.edges().filter(|(s, t)| s != t).collect();
    DirectedGraph::from_edges(g.n(), &edges)
}

pub fn build_problem(cfg: &ProblemConfig, n: usize) -> Result<FiniteSumProblem> {
    if let Some(path) = &cfg.csv {
        let label = cfg
            .label_column
            .as_ref()
            .map_or(LabelColumn::Last, LabelColumnConfig::to_label_column);
        return load_csv(path, n, &label, cfg.lambda);
    }
    let per_node = cfg.per_node.unwrap_or_default();
    let dim = cfg.dim.unwrap_or_default();
    match cfg.kind {
        ProblemKindConfig::Logistic => synthetic_logistic(n, per_node, dim, cfg.seed, cfg.lambda),
        ProblemKindConfig::Quadratic => synthetic_quadratic(n, per_node, dim, cfg.seed),
    }
}

/// Theory inputs for a weight system and problem at the given run parameters.
pub fn convergence_inputs(
    ws: &WeightSystem,
    prob: &FiniteSumProblem,
    alpha: f64,
    c: u32,
    d: u32,
) -> Result<ConvergenceInputs> {
    ConvergenceInputs::new(
        NetworkConstants::from_weights(ws),
        prob.constants(),
        prob.m_min(),
        prob.m_max(),
        alpha,
        c,
        d,
    )
}

/// Step size and communication rounds after resolving `"auto"` entries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResolvedParameters {
    pub alpha: f64,
    pub c: u32,
    pub d: u32,
    pub alpha_auto: bool,
}

pub fn resolve_parameters(
    ws: &WeightSystem,
    prob: &FiniteSumProblem,
    alpha: Option<f64>,
    c: Option<u32>,
    d: Option<u32>,
) -> Result<ResolvedParameters> {
    let base = convergence_inputs(ws, prob, 1.0, 1, 1)?;
    let rounds = min_comm_rounds(&base);
    let alpha_auto = alpha.is_none();
    Ok(ResolvedParameters {
        alpha: alpha.unwrap_or_else(|| max_stepsize(&base).alpha_bar),
        c: c.unwrap_or(rounds.c),
        d: d.unwrap_or(rounds.d),
        alpha_auto,
    })
}

/// Certificate at resolved parameters, with `"auto"` filled in from theory.
pub fn certify(
    ws: &WeightSystem,
    prob: &FiniteSumProblem,
    alpha: Option<f64>,
    c: Option<u32>,
    d: Option<u32>,
) -> Result<ConvergenceCertificate> {
    let p = resolve_parameters(ws, prob, alpha, c, d)?;
    delta_certificate(&convergence_inputs(ws, prob, p.alpha, p.c, p.d)?)
}

/// Streams trace records to CSV, flushing after every row.
pub struct TraceWriter {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = Self {
            path: path.to_owned(),
            writer: csv::Writer::from_writer(file),
        };
        w.write_fields(&TRACE_HEADER.map(String::from))?;
        Ok(w)
    }

    pub fn write(&mut self, m: &IterationMetrics) -> Result<()> {
        self.write_fields(&format_metrics(m))
    }

    fn write_fields(&mut self, fields: &[String]) -> Result<()> {
        let path = &self.path;
        let to_io = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        self.writer.write_record(fields).map_err(to_io)?;
        self.writer.flush().map_err(|e| Error::io(path, e))
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// One trace row in header order.
pub fn format_metrics(m: &IterationMetrics) -> [String; 8] {
    [
        m.iteration.to_string(),
        fmt_float(m.epoch),
        fmt_float(m.optimality_gap),
        fmt_float(m.consensus_error),
        fmt_float(m.tracking_error),
        fmt_float(m.aux_gap),
        m.grads_computed.to_string(),
        m.comm_rounds.to_string(),
    ]
}

/// Parses a trace CSV written by [`TraceWriter`].
pub fn read_trace(path: &Path) -> Result<Vec<IterationMetrics>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut out = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 2;
        let rec = rec.map_err(|e| Error::DataFormat { line, message: e.to_string() })?;
        let bad = |what: &str| Error::DataFormat { line, message: format!("bad {what}") };
        let f = |i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(TRACE_HEADER[i]));
        let u = |i: usize| rec.get(i).and_then(|s| s.parse::<u64>().ok()).ok_or_else(|| bad(TRACE_HEADER[i]));
        out.push(IterationMetrics {
            iteration: u(0)?,
            epoch: f(1)?,
            optimality_gap: f(2)?,
            consensus_error: f(3)?,
            tracking_error: f(4)?,
            aux_gap: f(5)?,
            grads_computed: u(6)?,
            comm_rounds: u(7)?,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub enum CertificateVerdict {
    Passed,
    Failed,
    NotApplicable(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub algorithm: AlgorithmName,
    pub alpha: f64,
    pub alpha_auto: bool,
    pub c: u32,
    pub d: u32,
    pub iterations: u64,
    pub final_optimality_gap: f64,
    pub epochs: f64,
    pub grads_computed: u64,
    pub comm_rounds: u64,
    pub wall_time_secs: f64,
    pub certificate: Option<CertificateVerdict>,
    pub trace: Option<PathBuf>,
}

impl RunSummary {
    pub fn key_values(&self) -> Vec<(String, String)> {
        let mut kv = vec![
            ("algorithm".to_owned(), self.algorithm.as_str().to_owned()),
            ("alpha".to_owned(), fmt_float(self.alpha)),
            ("alpha_source".to_owned(), if self.alpha_auto { "auto" } else { "explicit" }.to_owned()),
            ("c".to_owned(), self.c.to_string()),
            ("d".to_owned(), self.d.to_string()),
            ("iterations".to_owned(), self.iterations.to_string()),
            ("final_optimality_gap".to_owned(), fmt_float(self.final_optimality_gap)),
            ("epochs".to_owned(), fmt_float(self.epochs)),
            ("grads_computed".to_owned(), self.grads_computed.to_string()),
            ("comm_rounds".to_owned(), self.comm_rounds.to_string()),
            ("wall_time_secs".to_owned(), format!("{:.3}", self.wall_time_secs)),
        ];
        if let Some(v) = &self.certificate {
            let s = match v {
                CertificateVerdict::Passed => "pass".to_owned(),
                CertificateVerdict::Failed => "fail".to_owned(),
                CertificateVerdict::NotApplicable(why) => format!("not_applicable ({why})"),
            };
            kv.push(("certificate".to_owned(), s));
        }
        if let Some(p) = &self.trace {
            kv.push(("trace".to_owned(), p.display().to_string()));
        }
        kv
    }
}

pub fn render_key_values(kv: &[(String, String)]) -> String {
    kv.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs one configured experiment, writing the trace and optional certificate and summary.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let started = Instant::now();
    let graph = build_graph(&cfg.graph, cfg.weights.self_loops).map_err(|e| e.at_stage("graph"))?;
    let ws = Arc::new(WeightSystem::from_graph(&graph).map_err(|e| e.at_stage("weights"))?);
    let prob = build_problem(&cfg.problem, graph.n()).map_err(|e| e.at_stage("problem"))?;
    prob.optimum().map_err(|e| e.at_stage("problem"))?;

    let alg = &cfg.algorithm;
    let params = resolve_parameters(&ws, &prob, alg.alpha.value(), alg.c.value(), alg.d.value())
        .map_err(|e| e.at_stage("theory"))?;

    let certificate = match &cfg.output.certificate {
        None => None,
        Some(path) => {
            let inputs = convergence_inputs(&ws, &prob, params.alpha, params.c, params.d)
                .map_err(|e| e.at_stage("theory"))?;
            let (verdict, text) = match delta_certificate(&inputs) {
                Ok(cert) => {
                    let v = if cert.passed() { CertificateVerdict::Passed } else { CertificateVerdict::Failed };
                    (v, render_key_values(&cert.key_values()))
                }
                Err(Error::CertificateNotApplicable(why)) => {
                    let text = format!("certificate=not_applicable\nreason={why}\n");
                    (CertificateVerdict::NotApplicable(why), text)
                }
                Err(e) => return Err(e.at_stage("theory")),
            };
            write_text(path, &text).map_err(|e| e.at_stage("output"))?;
            Some(verdict)
        }
    };

    let x0 = InitialPoint::zeros(prob.dim());
    let mut stepper: Box<dyn Stepper> = match alg.name {
        AlgorithmName::Saga => Box::new(CentralizedSaga::new(
            &prob,
            &DVector::zeros(prob.dim()),
            params.alpha,
            cfg.run.seed,
        )
        .map_err(|e| e.at_stage("algorithm"))?),
        name => {
            let method = match name {
                AlgorithmName::Absaga => Method::AbSaga,
                AlgorithmName::Sab => Method::SAb,
                _ => Method::Ab,
            };
            Box::new(
                NetworkState::new(method, &prob, ws.clone(), &x0, params.alpha, params.c, params.d, cfg.run.seed)
                    .map_err(|e| e.at_stage("algorithm"))?,
            )
        }
    };

    let per_epoch = stepper.iterations_per_epoch(&prob);
    let iterations = match (cfg.run.iterations, cfg.run.epochs) {
        (Some(k), _) => k,
        (None, Some(e)) => (e as f64 * per_epoch).ceil() as u64,
        (None, None) => return Err(Error::config("run", "one of `iterations` or `epochs` is required")),
    };
    let record_every = cfg.run.record_every.unwrap_or((per_epoch.round() as u64).max(1));

    let mut writer = match &cfg.output.trace {
        Some(p) => Some(TraceWriter::create(p).map_err(|e| e.at_stage("output"))?),
        None => None,
    };
    let mut last: Option<IterationMetrics> = None;
    run_with(stepper.as_mut(), &prob, iterations, record_every, |m| {
        if let Some(w) = writer.as_mut() {
            w.write(m)?;
        }
        last = Some(*m);
        Ok(())
    })
    .map_err(|e| e.at_stage("run"))?;
    let last = last.expect("run_with records the initial state");

    let summary = RunSummary {
        algorithm: alg.name,
        alpha: params.alpha,
        alpha_auto: params.alpha_auto,
        c: params.c,
        d: params.d,
        iterations: last.iteration,
        final_optimality_gap: last.optimality_gap,
        epochs: last.epoch,
        grads_computed: last.grads_computed,
        comm_rounds: last.comm_rounds,
        wall_time_secs: started.elapsed().as_secs_f64(),
        certificate,
        trace: cfg.output.trace.clone(),
    };
    if let Some(path) = &cfg.output.summary {
        write_text(path, &render_key_values(&summary.key_values())).map_err(|e| e.at_stage("output"))?;
    }
    Ok(summary)
}

/// Result of [`compare`]: one summary per configuration and the merged table path.
#[derive(Clone, Debug)]
pub struct Comparison {
    pub names: Vec<String>,
    pub summaries: Vec<RunSummary>,
    pub merged: PathBuf,
}

/// Runs every configuration in parallel and writes `<name>.csv` traces plus `merged.csv`.
///
/// `merged.csv` has an `epoch` column over the integer epochs every run reached and one
/// `gap_<name>` column per run, holding the gap of the latest record at or before that epoch.
pub fn compare(configs: &[ExperimentConfig], out_dir: &Path) -> Result<Comparison> {
    let Some(first) = configs.first() else {
        return Err(Error::InvalidArgument("compare needs at least one configuration".into()));
    };
    for cfg in &configs[1..] {
        if cfg.graph != first.graph || cfg.weights != first.weights {
            return Err(Error::InvalidArgument("configurations use different graphs".into()));
        }
        if cfg.problem != first.problem {
            return Err(Error::InvalidArgument("configurations use different problems".into()));
        }
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let names: Vec<String> = configs
        .iter()
        .map(|c| {
            let base = c.algorithm.name.as_str();
            let k = seen.entry(base).or_insert(0);
            *k += 1;
            if *k == 1 { base.to_owned() } else { format!("{base}_{k}") }
        })
        .collect();
    let jobs: Vec<ExperimentConfig> = configs
        .iter()
        .zip(&names)
        .map(|(c, name)| {
            let mut c = c.clone();
            c.output.trace = Some(out_dir.join(format!("{name}.csv")));
            c
        })
        .collect();

    let results: Vec<Result<RunSummary>> = std::thread::scope(|s| {
        let handles: Vec<_> = jobs.iter().map(|c| s.spawn(move || run_experiment(c))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::NumericalFailure("run panicked".into()))))
            .collect()
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>>>()?;

    let traces = jobs
        .iter()
        .map(|c| read_trace(c.output.trace.as_deref().expect("trace path set above")))
        .collect::<Result<Vec<_>>>()?;
    let last_epoch = traces
        .iter()
        .map(|t| t.last().map_or(0.0, |m| m.epoch).floor() as u64)
        .min()
        .unwrap_or(0);

    let merged = out_dir.join("merged.csv");
    let file = File::create(&merged).map_err(|e| Error::io(&merged, e))?;
    let mut w = csv::Writer::from_writer(file);
    let to_io = |e: csv::Error| Error::io(&merged, std::io::Error::other(e));
    let mut header = vec!["epoch".to_owned()];
    header.extend(names.iter().map(|n| format!("gap_{n}")));
    w.write_record(&header).map_err(to_io)?;
    let mut cursors = vec![0usize; traces.len()];
    for e in 0..=last_epoch {
        let mut row = vec![e.to_string()];
        for (t, cur) in traces.iter().zip(cursors.iter_mut()) {
            while *cur + 1 < t.len() && t[*cur + 1].epoch <= e as f64 {
                *cur += 1;
            }
            row.push(fmt_float(t[*cur].optimality_gap));
        }
        w.write_record(&row).map_err(to_io)?;
    }
    w.flush().map_err(|e| Error::io(&merged, e))?;

    Ok(Comparison {
        names,
        summaries,
        merged,
    })
}
