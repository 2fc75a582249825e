//! Iteration engines: AB-SAGA, deterministic AB, stochastic S-AB, and centralized SAGA.
//!
//! The decentralized methods share one synchronous update,
//!
//! ```text
//! x^{k+1} = A^c (x^k - alpha w^k)
//! w^{k+1} = B^d (w^k + g^{k+1} - g^k)
//! ```
//!
//! and differ only in the local gradient estimate `g_i^{k+1}`: the SAGA estimate
//! for AB-SAGA, one sampled component gradient for S-AB, and the full local
//! gradient for AB.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::problems::{FiniteSumProblem, Optimum};
use crate::weights::{matrix_power, WeightSystem};

/// Table averages are recomputed from scratch after this many incremental updates.
pub const TABLE_REFRESH_EVERY: u64 = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Gradient tracking with SAGA local estimates.
    AbSaga,
    /// Gradient tracking with raw single-sample stochastic gradients.
    SAb,
    /// Gradient tracking with full local gradients.
    Ab,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::AbSaga => "absaga",
            Method::SAb => "sab",
            Method::Ab => "ab",
        }
    }
}

/// Per-node random stream: ChaCha8 seeded with the master seed, stream id = node index.
pub fn node_rng(seed: u64, node: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(node as u64);
    rng
}

/// SAGA gradient table `{grad f_ij(v_ij)}` with its reference points and running mean.
#[derive(Clone, Debug)]
pub struct GradientTable {
    dim: usize,
    grads: Vec<f64>,
    points: Vec<f64>,
    avg: Vec<f64>,
    updates: u64,
}

impl GradientTable {
    /// Table with every slot evaluated at `x0`. `components` lists `(node, component)` per slot.
    fn at_point(prob: &FiniteSumProblem, x0: &[f64], components: &[(usize, usize)]) -> Self {
        let p = prob.dim();
        let mut grads = vec![0.0; components.len() * p];
        for (slot, &(i, j)) in components.iter().enumerate() {
            prob.grad_into(x0, i, j, &mut grads[slot * p..(slot + 1) * p]);
        }
        let mut table = Self {
            dim: p,
            grads,
            points: x0.repeat(components.len()),
            avg: vec![0.0; p],
            updates: 0,
        };
        table.refresh_avg();
        table
    }

    pub fn len(&self) -> usize {
        self.grads.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.grads.is_empty()
    }

    pub fn slot(&self, s: usize) -> &[f64] {
        &self.grads[s * self.dim..(s + 1) * self.dim]
    }

    pub fn point(&self, s: usize) -> &[f64] {
        &self.points[s * self.dim..(s + 1) * self.dim]
    }

    pub fn avg(&self) -> &[f64] {
        &self.avg
    }

    fn refresh_avg(&mut self) {
        self.avg.fill(0.0);
        for row in self.grads.chunks_exact(self.dim) {
            for (a, v) in self.avg.iter_mut().zip(row) {
                *a += v;
            }
        }
        let m = self.len() as f64;
        self.avg.iter_mut().for_each(|a| *a /= m);
    }

    /// SAGA estimate `fresh + (avg - stored_s)` into `out`.
    fn estimate(&self, s: usize, fresh: &[f64], out: &mut [f64]) {
        let stored = self.slot(s);
        for (((o, f), a), st) in out.iter_mut().zip(fresh).zip(&self.avg).zip(stored) {
            *o = f + (a - st);
        }
    }

    /// Replaces slot `s` by `fresh` (evaluated at `point`) and updates the mean.
    fn replace(&mut self, s: usize, fresh: &[f64], point: &[f64]) {
        let p = self.dim;
        let m = self.len();
        if m == 1 {
            self.avg.copy_from_slice(fresh);
        } else {
            let inv = 1.0 / m as f64;
            let old = &self.grads[s * p..(s + 1) * p];
            for ((a, f), o) in self.avg.iter_mut().zip(fresh).zip(old) {
                *a += (f - o) * inv;
            }
        }
        self.grads[s * p..(s + 1) * p].copy_from_slice(fresh);
        self.points[s * p..(s + 1) * p].copy_from_slice(point);
        self.updates += 1;
        if self.updates.is_multiple_of(TABLE_REFRESH_EVERY) {
            self.refresh_avg();
        }
    }

    /// `(1/len) sum_s |v_s - x*|^2`
    fn mean_sq_distance(&self, x_star: &[f64]) -> f64 {
        let total: f64 = self
            .points
            .chunks_exact(self.dim)
            .map(|v| v.iter().zip(x_star).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum();
        total / self.len() as f64
    }

    /// Max deviation between the cached mean and a fresh recomputation.
    pub fn avg_drift(&self) -> f64 {
        let mut fresh = self.clone();
        fresh.refresh_avg();
        fresh
            .avg
            .iter()
            .zip(&self.avg)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct NodeState {
    pub x: DVector<f64>,
    pub w: DVector<f64>,
    pub g: DVector<f64>,
    /// Present for AB-SAGA only.
    pub table: Option<GradientTable>,
    rng: ChaCha8Rng,
}

/// One row of a trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub epoch: f64,
    /// `F(x_bar) - F(x*)` with `x_bar` the plain node average, floored at zero.
    pub optimality_gap: f64,
    /// `|x - A^inf x|^2`
    pub consensus_error: f64,
    /// `|w - B^inf w|^2`
    pub tracking_error: f64,
    /// `sum_i (1/m_i) sum_j |v_ij - x*|^2`; zero for methods without a table.
    pub aux_gap: f64,
    pub grads_computed: u64,
    pub comm_rounds: u64,
}

/// Anything [`run`] can drive.
pub trait Stepper {
    fn step(&mut self, prob: &FiniteSumProblem) -> Result<()>;
    fn metrics(&self, prob: &FiniteSumProblem, optimum: &Optimum) -> Result<IterationMetrics>;
    fn iteration(&self) -> u64;
    /// Iterations that make up one pass over the data.
    fn iterations_per_epoch(&self, prob: &FiniteSumProblem) -> f64;
}

/// Starting point for every node.
#[derive(Clone, Debug)]
pub enum InitialPoint {
    Broadcast(DVector<f64>),
    PerNode(Vec<DVector<f64>>),
}

impl InitialPoint {
    pub fn zeros(dim: usize) -> Self {
        InitialPoint::Broadcast(DVector::zeros(dim))
    }

    fn resolve(&self, n: usize, dim: usize) -> Result<Vec<DVector<f64>>> {
        let points = match self {
            InitialPoint::Broadcast(x) => vec![x.clone(); n],
            InitialPoint::PerNode(xs) => {
                if xs.len() != n {
                    return Err(Error::InvalidArgument(format!(
                        "{} initial points for {n} nodes",
                        xs.len()
                    )));
                }
                xs.clone()
            }
        };
        if let Some(bad) = points.iter().find(|x| x.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "initial point has dimension {}, problem has {dim}",
                bad.len()
            )));
        }
        Ok(points)
    }
}

fn check_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|c| c.is_finite())
}

/// Synchronous network of nodes running one of the gradient-tracking methods.
#[derive(Clone, Debug)]
pub struct NetworkState {
    pub nodes: Vec<NodeState>,
    pub iteration: u64,
    pub weights: Arc<WeightSystem>,
    pub rounds: (u32, u32),
    pub alpha: f64,
    pub method: Method,
    mix_x: DMatrix<f64>,
    mix_w: DMatrix<f64>,
    grads_computed: u64,
}

impl NetworkState {
    /// Initializes `w_i = g_i = grad f_i(x_i^0)` and, for AB-SAGA, a table evaluated at `x_i^0`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        method: Method,
        prob: &FiniteSumProblem,
        weights: Arc<WeightSystem>,
        x0: &InitialPoint,
        alpha: f64,
        c: u32,
        d: u32,
        seed: u64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {alpha}")));
        }
        if c == 0 || d == 0 {
            return Err(Error::InvalidArgument("communication rounds must be >= 1".into()));
        }
        let n = prob.n();
        if weights.n() != n {
            return Err(Error::InvalidArgument(format!(
                "weights are for {} nodes, problem has {n}",
                weights.n()
            )));
        }
        let p = prob.dim();
        let starts = x0.resolve(n, p)?;
        let mut scratch = vec![0.0; p];
        let nodes = starts
            .into_iter()
            .enumerate()
            .map(|(i, x)| {
                let table = (method == Method::AbSaga).then(|| {
                    let slots: Vec<_> = (0..prob.partition()[i]).map(|j| (i, j)).collect();
                    GradientTable::at_point(prob, x.as_slice(), &slots)
                });
                let g = match &table {
                    Some(t) => DVector::from_column_slice(t.avg()),
                    None => {
                        let mut g = DVector::zeros(p);
                        prob.local_grad_into(x.as_slice(), i, g.as_mut_slice(), &mut scratch);
                        g
                    }
                };
                NodeState {
                    x,
                    w: g.clone(),
                    g,
                    table,
                    rng: node_rng(seed, i),
                }
            })
            .collect();
        Ok(Self {
            nodes,
            iteration: 0,
            mix_x: matrix_power(&weights.a, c)?.entries().clone(),
            mix_w: matrix_power(&weights.b, d)?.entries().clone(),
            weights,
            rounds: (c, d),
            alpha,
            method,
            grads_computed: 0,
        })
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn grads_computed(&self) -> u64 {
        self.grads_computed
    }

    /// `(c + d) k` on multi-node networks; a lone node never communicates.
    pub fn comm_rounds(&self) -> u64 {
        if self.n() > 1 {
            u64::from(self.rounds.0 + self.rounds.1) * self.iteration
        } else {
            0
        }
    }

    /// `sum_i w_i` and `sum_i g_i`.
    pub fn tracking_sums(&self) -> (DVector<f64>, DVector<f64>) {
        let p = self.nodes[0].x.len();
        let mut sw = DVector::zeros(p);
        let mut sg = DVector::zeros(p);
        for node in &self.nodes {
            sw += &node.w;
            sg += &node.g;
        }
        (sw, sg)
    }

    /// Every local gradient estimate node `i` could produce at its current state,
    /// one per component index, without advancing anything.
    pub fn enumerate_estimates(&self, prob: &FiniteSumProblem, i: usize) -> Vec<DVector<f64>> {
        let node = &self.nodes[i];
        let p = prob.dim();
        let mut fresh = vec![0.0; p];
        (0..prob.partition()[i])
            .map(|s| {
                prob.grad_into(node.x.as_slice(), i, s, &mut fresh);
                let mut out = DVector::zeros(p);
                match (&node.table, self.method) {
                    (Some(t), _) => t.estimate(s, &fresh, out.as_mut_slice()),
                    (None, Method::Ab) => {
                        let mut scratch = vec![0.0; p];
                        prob.local_grad_into(node.x.as_slice(), i, out.as_mut_slice(), &mut scratch)
                    }
                    (None, _) => out.as_mut_slice().copy_from_slice(&fresh),
                }
                out
            })
            .collect()
    }

    /// Error-state vector bounded by the 4×4 certificate matrix:
    /// `[|x - A^inf x|^2_{pi_r}, n |x_hat - x*|^2, aux_gap, ell^-2 |w - B^inf w|^2_{pi_c}]`
    /// where `x_hat = pi_r^T x`, `|z|^2_{pi_r} = sum_i pi_r,i |z_i|^2` and
    /// `|z|^2_{pi_c} = sum_i |z_i|^2 / pi_c,i`.
    pub fn error_state(&self, optimum: &Optimum, ell: f64) -> [f64; 4] {
        let ws = &self.weights;
        let x_hat = self.weighted_mean(&ws.pi_r);
        let w_sum = self.nodes.iter().fold(DVector::zeros(x_hat.len()), |acc, nd| acc + &nd.w);
        let mut agree = 0.0;
        let mut track = 0.0;
        for (i, node) in self.nodes.iter().enumerate() {
            agree += ws.pi_r[i] * (&node.x - &x_hat).norm_squared();
            track += (&node.w - &w_sum * ws.pi_c[i]).norm_squared() / ws.pi_c[i];
        }
        [
            agree,
            self.n() as f64 * (&x_hat - &optimum.x).norm_squared(),
            self.aux_gap(optimum),
            track / (ell * ell),
        ]
    }

    fn weighted_mean(&self, pi: &DVector<f64>) -> DVector<f64> {
        let p = self.nodes[0].x.len();
        let mut m = DVector::zeros(p);
        for (node, &w) in self.nodes.iter().zip(pi.iter()) {
            m.axpy(w, &node.x, 1.0);
        }
        m
    }

    fn aux_gap(&self, optimum: &Optimum) -> f64 {
        self.nodes
            .iter()
            .filter_map(|nd| nd.table.as_ref())
            .map(|t| t.mean_sq_distance(optimum.x.as_slice()))
            .fold(0.0, |acc, v| acc + v)
    }
}

impl Stepper for NetworkState {
    fn step(&mut self, prob: &FiniteSumProblem) -> Result<()> {
        let n = self.n();
        let p = prob.dim();

        // x^{k+1} = A^c (x^k - alpha w^k)
        let descended: Vec<DVector<f64>> = self
            .nodes
            .iter()
            .map(|nd| &nd.x - &nd.w * self.alpha)
            .collect();
        for (i, node) in self.nodes.iter_mut().enumerate() {
            node.x.fill(0.0);
            for (r, y) in descended.iter().enumerate() {
                let a = self.mix_x[(i, r)];
                if a != 0.0 {
                    node.x.axpy(a, y, 1.0);
                }
            }
        }

        // local estimates g^{k+1}
        let mut fresh = vec![0.0; p];
        let mut scratch = vec![0.0; p];
        let mut correction: Vec<DVector<f64>> = Vec::with_capacity(n);
        for (i, node) in self.nodes.iter_mut().enumerate() {
            let mut g_new = DVector::zeros(p);
            match self.method {
                Method::AbSaga => {
                    let table = node.table.as_mut().expect("AB-SAGA nodes carry a table");
                    let s = node.rng.random_range(0..table.len());
                    prob.grad_into(node.x.as_slice(), i, s, &mut fresh);
                    table.estimate(s, &fresh, g_new.as_mut_slice());
                    table.replace(s, &fresh, node.x.as_slice());
                }
                Method::SAb => {
                    let s = node.rng.random_range(0..prob.partition()[i]);
                    prob.grad_into(node.x.as_slice(), i, s, g_new.as_mut_slice());
                }
                Method::Ab => {
                    prob.local_grad_into(node.x.as_slice(), i, g_new.as_mut_slice(), &mut scratch);
                }
            }
            // (w - g_old) + g_new keeps w == g exactly on a single node
            correction.push((&node.w - &node.g) + &g_new);
            node.g = g_new;
        }

        // w^{k+1} = B^d (w^k + g^{k+1} - g^k)
        for (i, node) in self.nodes.iter_mut().enumerate() {
            node.w.fill(0.0);
            for (r, y) in correction.iter().enumerate() {
                let b = self.mix_w[(i, r)];
                if b != 0.0 {
                    node.w.axpy(b, y, 1.0);
                }
            }
        }

        self.iteration += 1;
        self.grads_computed += match self.method {
            Method::AbSaga | Method::SAb => n as u64,
            Method::Ab => prob.total_components() as u64,
        };
        if self
            .nodes
            .iter()
            .any(|nd| !check_finite(&nd.x) || !check_finite(&nd.w))
        {
            return Err(Error::Divergence {
                iteration: self.iteration,
            });
        }
        Ok(())
    }

    fn metrics(&self, prob: &FiniteSumProblem, optimum: &Optimum) -> Result<IterationMetrics> {
        let p = prob.dim();
        let ws = &self.weights;
        let mut x_bar = DVector::zeros(p);
        for nd in &self.nodes {
            x_bar += &nd.x;
        }
        x_bar /= self.n() as f64;
        let x_hat = self.weighted_mean(&ws.pi_r);
        let w_sum = self.nodes.iter().fold(DVector::zeros(p), |acc, nd| acc + &nd.w);
        let mut consensus = 0.0;
        let mut tracking = 0.0;
        for (i, nd) in self.nodes.iter().enumerate() {
            consensus += (&nd.x - &x_hat).norm_squared();
            tracking += (&nd.w - &w_sum * ws.pi_c[i]).norm_squared();
        }
        Ok(IterationMetrics {
            iteration: self.iteration,
            epoch: self.grads_computed as f64 / prob.total_components() as f64,
            optimality_gap: (prob.value(&x_bar)? - optimum.value).max(0.0),
            consensus_error: consensus,
            tracking_error: tracking,
            aux_gap: self.aux_gap(optimum),
            grads_computed: self.grads_computed,
            comm_rounds: self.comm_rounds(),
        })
    }

    fn iteration(&self) -> u64 {
        self.iteration
    }

    fn iterations_per_epoch(&self, prob: &FiniteSumProblem) -> f64 {
        match self.method {
            Method::Ab => 1.0,
            Method::AbSaga | Method::SAb => prob.total_components() as f64 / self.n() as f64,
        }
    }
}

/// Convenience constructor for AB-SAGA.
#[allow(clippy::too_many_arguments)]
pub fn absaga_init(
    prob: &FiniteSumProblem,
    weights: Arc<WeightSystem>,
    x0: &InitialPoint,
    alpha: f64,
    c: u32,
    d: u32,
    seed: u64,
) -> Result<NetworkState> {
    NetworkState::new(Method::AbSaga, prob, weights, x0, alpha, c, d, seed)
}

/// Single-machine SAGA over the pooled components of every node.
///
/// The state keeps the estimate for the current iterate, so a step is
/// `x <- x - alpha g`, then sample `s` and refresh `g` at the new `x`. The first
/// estimate is the full gradient, which is what SAGA's first step produces when
/// the table is initialized at `x^0`.
#[derive(Clone, Debug)]
pub struct CentralizedSaga {
    pub x: DVector<f64>,
    pub g: DVector<f64>,
    pub table: GradientTable,
    pub alpha: f64,
    pub iteration: u64,
    slots: Vec<(usize, usize)>,
    rng: ChaCha8Rng,
}

impl CentralizedSaga {
    /// Uses the random stream of node 0, so a one-node network replays the same draws.
    pub fn new(prob: &FiniteSumProblem, x0: &DVector<f64>, alpha: f64, seed: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {alpha}")));
        }
        if x0.len() != prob.dim() {
            return Err(Error::InvalidArgument(format!(
                "initial point has dimension {}, problem has {}",
                x0.len(),
                prob.dim()
            )));
        }
        let slots: Vec<_> = prob
            .partition()
            .iter()
            .enumerate()
            .flat_map(|(i, &m)| (0..m).map(move |j| (i, j)))
            .collect();
        let table = GradientTable::at_point(prob, x0.as_slice(), &slots);
        Ok(Self {
            x: x0.clone(),
            g: DVector::from_column_slice(table.avg()),
            table,
            alpha,
            iteration: 0,
            slots,
            rng: node_rng(seed, 0),
        })
    }

    /// The estimates each pooled index would produce at the current `x`.
    pub fn enumerate_estimates(&self, prob: &FiniteSumProblem) -> Vec<DVector<f64>> {
        let p = prob.dim();
        let mut fresh = vec![0.0; p];
        self.slots
            .iter()
            .enumerate()
            .map(|(s, &(i, j))| {
                prob.grad_into(self.x.as_slice(), i, j, &mut fresh);
                let mut out = DVector::zeros(p);
                self.table.estimate(s, &fresh, out.as_mut_slice());
                out
            })
            .collect()
    }
}

impl Stepper for CentralizedSaga {
    fn step(&mut self, prob: &FiniteSumProblem) -> Result<()> {
        self.x = &self.x - &self.g * self.alpha;
        let s = self.rng.random_range(0..self.slots.len());
        let (i, j) = self.slots[s];
        let mut fresh = vec![0.0; prob.dim()];
        prob.grad_into(self.x.as_slice(), i, j, &mut fresh);
        self.table.estimate(s, &fresh, self.g.as_mut_slice());
        self.table.replace(s, &fresh, self.x.as_slice());
        self.iteration += 1;
        if !check_finite(&self.x) || !check_finite(&self.g) {
            return Err(Error::Divergence {
                iteration: self.iteration,
            });
        }
        Ok(())
    }

    fn metrics(&self, prob: &FiniteSumProblem, optimum: &Optimum) -> Result<IterationMetrics> {
        Ok(IterationMetrics {
            iteration: self.iteration,
            epoch: self.iteration as f64 / prob.total_components() as f64,
            optimality_gap: (prob.value(&self.x)? - optimum.value).max(0.0),
            consensus_error: 0.0,
            tracking_error: 0.0,
            aux_gap: 0.0 + self.table.mean_sq_distance(optimum.x.as_slice()),
            grads_computed: self.iteration,
            comm_rounds: 0,
        })
    }

    fn iteration(&self) -> u64 {
        self.iteration
    }

    fn iterations_per_epoch(&self, prob: &FiniteSumProblem) -> f64 {
        prob.total_components() as f64
    }
}

/// A run that stopped early; `trace` holds every record taken before the failure.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    pub trace: Vec<IterationMetrics>,
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Self {
        f.error
    }
}

/// Advances `stepper` by `iterations`, recording at the start, every `record_every`
/// iterations, and at the end. Each record is handed to `observer` as it is taken.
pub fn run_with<S, F>(
    stepper: &mut S,
    prob: &FiniteSumProblem,
    iterations: u64,
    record_every: u64,
    mut observer: F,
) -> Result<()>
where
    S: Stepper + ?Sized,
    F: FnMut(&IterationMetrics) -> Result<()>,
{
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be >= 1".into()));
    }
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be >= 1".into()));
    }
    let optimum = prob.optimum()?;
    observer(&stepper.metrics(prob, optimum)?)?;
    for k in 1..=iterations {
        stepper.step(prob)?;
        if k % record_every == 0 || k == iterations {
            observer(&stepper.metrics(prob, optimum)?)?;
        }
    }
    Ok(())
}

/// Collects the records of [`run_with`] into a trace.
pub fn run<S: Stepper + ?Sized>(
    stepper: &mut S,
    prob: &FiniteSumProblem,
    iterations: u64,
    record_every: u64,
) -> std::result::Result<Vec<IterationMetrics>, RunFailure> {
    let mut trace = Vec::new();
    match run_with(stepper, prob, iterations, record_every, |m| {
        trace.push(*m);
        Ok(())
    }) {
        Ok(()) => Ok(trace),
        Err(error) => Err(RunFailure { error, trace }),
    }
}
