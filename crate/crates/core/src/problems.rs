//! Finite-sum objectives `F(x) = (1/n) sum_i f_i(x)`, `f_i = (1/m_i) sum_j f_ij`.

use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Gradient-norm target for the reference optimum.
pub const OPTIMUM_GRAD_TOL: f64 = 1e-13;
pub const OPTIMUM_MAX_ITERS: usize = 1_000_000;
/// Fraction of synthetic labels flipped.
pub const LABEL_FLIP_PROB: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Quadratic,
    Logistic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemConstants {
    pub ell: f64,
    pub mu: f64,
    pub kappa: f64,
}

impl ProblemConstants {
    pub fn new(ell: f64, mu: f64) -> Result<Self> {
        if !(mu > 0.0 && ell >= mu && ell.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "need ell >= mu > 0, got ell={ell}, mu={mu}"
            )));
        }
        Ok(Self {
            ell,
            mu,
            kappa: ell / mu,
        })
    }
}

/// Reference minimizer of `F`.
#[derive(Clone, Debug)]
pub struct Optimum {
    pub x: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug)]
enum Data {
    /// `f_ij(x) = 1/2 |x - theta_ij|^2`; per node, `m_i * p` row-major targets.
    Quadratic { targets: Vec<Vec<f64>> },
    /// `f_ij(x) = log(1 + exp(-y xi^T x)) + lambda/2 |x|^2`.
    Logistic {
        features: Vec<Vec<f64>>,
        labels: Vec<Vec<f64>>,
        lambda: f64,
    },
}

#[derive(Debug)]
pub struct FiniteSumProblem {
    dim: usize,
    partition: Vec<usize>,
    data: Data,
    optimum: OnceLock<Optimum>,
}

impl Clone for FiniteSumProblem {
    fn clone(&self) -> Self {
        Self {
            dim: self.dim,
            partition: self.partition.clone(),
            data: self.data.clone(),
            optimum: self.optimum.clone(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `log(1 + exp(t))` without overflow.
fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn check_partition<T>(per_node: &[Vec<T>], dim: usize, stride: usize) -> Result<Vec<usize>> {
    if per_node.is_empty() {
        return Err(Error::InvalidArgument("problem needs at least one node".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    per_node
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if v.is_empty() || v.len() % stride != 0 {
                Err(Error::InvalidArgument(format!(
                    "node {i} has {} values, expected a positive multiple of {stride}",
                    v.len()
                )))
            } else {
                Ok(v.len() / stride)
            }
        })
        .collect()
}

impl FiniteSumProblem {
    /// Quadratic components from flat per-node targets (`m_i * dim` values each).
    pub fn quadratic(dim: usize, targets: Vec<Vec<f64>>) -> Result<Self> {
        let partition = check_partition(&targets, dim, dim)?;
        Ok(Self {
            dim,
            partition,
            data: Data::Quadratic { targets },
            optimum: OnceLock::new(),
        })
    }

    /// Logistic components from flat per-node features and `±1` labels.
    pub fn logistic(
        dim: usize,
        features: Vec<Vec<f64>>,
        labels: Vec<Vec<f64>>,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "regularizer must be positive, got {lambda}"
            )));
        }
        let partition = check_partition(&features, dim, dim)?;
        if labels.len() != partition.len()
            || labels.iter().zip(&partition).any(|(l, &m)| l.len() != m)
        {
            return Err(Error::InvalidArgument("labels do not match features".into()));
        }
        if labels.iter().flatten().any(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
        }
        Ok(Self {
            dim,
            partition,
            data: Data::Logistic {
                features,
                labels,
                lambda,
            },
            optimum: OnceLock::new(),
        })
    }

    pub fn kind(&self) -> ProblemKind {
        match self.data {
            Data::Quadratic { .. } => ProblemKind::Quadratic,
            Data::Logistic { .. } => ProblemKind::Logistic,
        }
    }

    pub fn n(&self) -> usize {
        self.partition.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn partition(&self) -> &[usize] {
        &self.partition
    }

    /// `M = max_i m_i`
    pub fn m_max(&self) -> usize {
        *self.partition.iter().max().expect("nonempty partition")
    }

    /// `m = min_i m_i`
    pub fn m_min(&self) -> usize {
        *self.partition.iter().min().expect("nonempty partition")
    }

    pub fn total_components(&self) -> usize {
        self.partition.iter().sum()
    }

    pub fn lambda(&self) -> Option<f64> {
        match self.data {
            Data::Logistic { lambda, .. } => Some(lambda),
            Data::Quadratic { .. } => None,
        }
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::InvalidArgument(format!(
                "node {i} out of range (n={})",
                self.n()
            )));
        }
        if j >= self.partition[i] {
            return Err(Error::InvalidArgument(format!(
                "component {j} out of range for node {i} (m_i={})",
                self.partition[i]
            )));
        }
        Ok(())
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "point has dimension {}, problem has {}",
                x.len(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Writes `grad f_ij(x)` into `out`. Indices are not checked.
    pub(crate) fn grad_into(&self, x: &[f64], i: usize, j: usize, out: &mut [f64]) {
        let p = self.dim;
        match &self.data {
            Data::Quadratic { targets } => {
                let theta = &targets[i][j * p..(j + 1) * p];
                for ((o, xv), t) in out.iter_mut().zip(x).zip(theta) {
                    *o = xv - t;
                }
            }
            Data::Logistic {
                features,
                labels,
                lambda,
            } => {
                let xi = &features[i][j * p..(j + 1) * p];
                let y = labels[i][j];
                let coef = -y * sigmoid(-y * dot(xi, x));
                for ((o, xv), f) in out.iter_mut().zip(x).zip(xi) {
                    *o = coef * f + lambda * xv;
                }
            }
        }
    }

    fn value_unchecked(&self, x: &[f64], i: usize, j: usize) -> f64 {
        let p = self.dim;
        match &self.data {
            Data::Quadratic { targets } => {
                let theta = &targets[i][j * p..(j + 1) * p];
                0.5 * x.iter().zip(theta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            Data::Logistic {
                features,
                labels,
                lambda,
            } => {
                let xi = &features[i][j * p..(j + 1) * p];
                softplus(-labels[i][j] * dot(xi, x)) + 0.5 * lambda * dot(x, x)
            }
        }
    }

    pub fn component_value(&self, x: &DVector<f64>, i: usize, j: usize) -> Result<f64> {
        self.check_dim(x)?;
        self.check_index(i, j)?;
        Ok(self.value_unchecked(x.as_slice(), i, j))
    }

    pub fn component_gradient(&self, x: &DVector<f64>, i: usize, j: usize) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        self.check_index(i, j)?;
        let mut g = DVector::zeros(self.dim);
        self.grad_into(x.as_slice(), i, j, g.as_mut_slice());
        Ok(g)
    }

    /// `grad f_i(x)` into `out`, summing components then dividing by `m_i`.
    pub(crate) fn local_grad_into(&self, x: &[f64], i: usize, out: &mut [f64], scratch: &mut [f64]) {
        out.fill(0.0);
        for j in 0..self.partition[i] {
            self.grad_into(x, i, j, scratch);
            for (o, s) in out.iter_mut().zip(scratch.iter()) {
                *o += s;
            }
        }
        let m = self.partition[i] as f64;
        for o in out.iter_mut() {
            *o /= m;
        }
    }

    pub fn local_full_gradient(&self, x: &DVector<f64>, i: usize) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        self.check_index(i, 0)?;
        let mut g = DVector::zeros(self.dim);
        let mut scratch = vec![0.0; self.dim];
        self.local_grad_into(x.as_slice(), i, g.as_mut_slice(), &mut scratch);
        Ok(g)
    }

    pub fn local_value(&self, x: &DVector<f64>, i: usize) -> Result<f64> {
        self.check_dim(x)?;
        self.check_index(i, 0)?;
        let m = self.partition[i];
        Ok((0..m).map(|j| self.value_unchecked(x.as_slice(), i, j)).sum::<f64>() / m as f64)
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x)?;
        let total: f64 = (0..self.n())
            .map(|i| self.local_value(x, i))
            .sum::<Result<f64>>()?;
        Ok(total / self.n() as f64)
    }

    /// `(F(x), grad F(x))` as node averages.
    pub fn global_value_and_gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        self.check_dim(x)?;
        let mut grad = DVector::zeros(self.dim);
        let mut local = vec![0.0; self.dim];
        let mut scratch = vec![0.0; self.dim];
        for i in 0..self.n() {
            self.local_grad_into(x.as_slice(), i, &mut local, &mut scratch);
            for (g, l) in grad.iter_mut().zip(&local) {
                *g += l;
            }
        }
        grad /= self.n() as f64;
        Ok((self.value(x)?, grad))
    }

    /// Conservative smoothness and strong-convexity constants.
    pub fn constants(&self) -> ProblemConstants {
        match &self.data {
            Data::Quadratic { .. } => ProblemConstants {
                ell: 1.0,
                mu: 1.0,
                kappa: 1.0,
            },
            Data::Logistic {
                features, lambda, ..
            } => {
                let p = self.dim;
                let max_sq = features
                    .iter()
                    .flat_map(|f| f.chunks_exact(p))
                    .map(|xi| dot(xi, xi))
                    .fold(0.0, f64::max);
                let ell = max_sq / 4.0 + lambda;
                ProblemConstants {
                    ell,
                    mu: *lambda,
                    kappa: ell / lambda,
                }
            }
        }
    }

    /// The minimizer of `F`, computed once and cached.
    ///
    /// Quadratic problems use the closed form; logistic problems run full-gradient
    /// descent with step `1/ell` from the origin until `|grad F| <= 1e-13`.
    pub fn optimum(&self) -> Result<&Optimum> {
        if let Some(o) = self.optimum.get() {
            return Ok(o);
        }
        let computed = self.compute_optimum()?;
        Ok(self.optimum.get_or_init(|| computed))
    }

    fn compute_optimum(&self) -> Result<Optimum> {
        let p = self.dim;
        match &self.data {
            Data::Quadratic { targets } => {
                let mut x = DVector::zeros(p);
                for (node, &m) in targets.iter().zip(&self.partition) {
                    let mut local = DVector::zeros(p);
                    for theta in node.chunks_exact(p) {
                        local += DVector::from_column_slice(theta);
                    }
                    x += local / m as f64;
                }
                x /= self.n() as f64;
                let (value, grad) = self.global_value_and_gradient(&x)?;
                Ok(Optimum {
                    x,
                    value,
                    grad_norm: grad.norm(),
                })
            }
            Data::Logistic { .. } => {
                let step = 1.0 / self.constants().ell;
                let mut x = DVector::zeros(p);
                for _ in 0..OPTIMUM_MAX_ITERS {
                    let (value, grad) = self.global_value_and_gradient(&x)?;
                    let grad_norm = grad.norm();
                    if grad_norm <= OPTIMUM_GRAD_TOL {
                        return Ok(Optimum {
                            x,
                            value,
                            grad_norm,
                        });
                    }
                    x.axpy(-step, &grad, 1.0);
                }
                Err(Error::NumericalFailure(format!(
                    "reference optimum: gradient norm above {OPTIMUM_GRAD_TOL:e} after {OPTIMUM_MAX_ITERS} iterations"
                )))
            }
        }
    }
}

/// Synthetic binary classification: unit-norm Gaussian features, labels from a random
/// separator with 5% flips, regularizer `lambda` (default `1/(n m)`).
pub fn synthetic_logistic(
    n: usize,
    per_node: usize,
    dim: usize,
    seed: u64,
    lambda: Option<f64>,
) -> Result<FiniteSumProblem> {
    if n == 0 || per_node == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "synthetic problem needs n, m, p >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let separator = unit_gaussian(&mut rng, dim);
    let mut features = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut f = Vec::with_capacity(per_node * dim);
        let mut l = Vec::with_capacity(per_node);
        for _ in 0..per_node {
            let xi = unit_gaussian(&mut rng, dim);
            let mut y = if dot(&xi, &separator) >= 0.0 { 1.0 } else { -1.0 };
            if rng.random::<f64>() < LABEL_FLIP_PROB {
                y = -y;
            }
            f.extend_from_slice(&xi);
            l.push(y);
        }
        features.push(f);
        labels.push(l);
    }
    let lambda = lambda.unwrap_or(1.0 / (n * per_node) as f64);
    FiniteSumProblem::logistic(dim, features, labels, lambda)
}

fn unit_gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|c| c / norm).collect();
        }
    }
}

/// Synthetic quadratic problem: targets `theta_ij = c_i + e_ij` with standard Gaussian
/// node offsets `c_i` and component noise `e_ij`.
pub fn synthetic_quadratic(n: usize, per_node: usize, dim: usize, seed: u64) -> Result<FiniteSumProblem> {
    if n == 0 || per_node == 0 || dim == 0 {
        return Err(Error::InvalidArgument(
            "synthetic problem needs n, m, p >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let targets = (0..n)
        .map(|_| {
            let centre: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            (0..per_node)
                .flat_map(|_| centre.clone())
                .map(|c: f64| c + rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    FiniteSumProblem::quadratic(dim, targets)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LabelColumn {
    Index(usize),
    Name(String),
    Last,
}

/// Splits `rows` into `n` contiguous blocks; the first `rows % n` blocks get one extra row.
pub fn contiguous_partition(rows: usize, n: usize) -> Result<Vec<usize>> {
    if n == 0 || rows < n {
        return Err(Error::InvalidArgument(format!(
            "cannot split {rows} rows across {n} nodes"
        )));
    }
    Ok((0..n).map(|i| rows / n + usize::from(i < rows % n)).collect())
}

/// Loads a labelled CSV as a logistic problem.
///
/// A first line with any non-numeric field is treated as a header. Features are
/// scaled so the largest row norm is one and `{0,1}` labels become `{-1,+1}`.
/// `lambda` defaults to one over the number of samples.
pub fn load_csv(
    path: &Path,
    n: usize,
    label_column: &LabelColumn,
    lambda: Option<f64>,
) -> Result<FiniteSumProblem> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let line = idx + 1;
        let rec = rec.map_err(|e| Error::DataFormat {
            line: e.position().map_or(line, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let parsed: Vec<Option<f64>> = rec.iter().map(|f| f.parse::<f64>().ok()).collect();
        if idx == 0 && parsed.iter().any(Option::is_none) {
            header = Some(rec.iter().map(str::to_owned).collect());
            continue;
        }
        let line = rec.position().map_or(line, |p| p.line() as usize);
        let values = parsed
            .into_iter()
            .zip(rec.iter())
            .map(|(v, raw)| {
                v.ok_or_else(|| Error::DataFormat {
                    line,
                    message: format!("non-numeric field `{raw}`"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    let width = match rows.first() {
        Some((_, r)) => r.len(),
        None => {
            return Err(Error::InvalidArgument(format!(
                "{} contains no data rows",
                path.display()
            )))
        }
    };
    if width < 2 {
        return Err(Error::DataFormat {
            line: rows[0].0,
            message: "need at least one feature column and a label column".into(),
        });
    }
    let label_idx = match label_column {
        LabelColumn::Index(k) if *k < width => *k,
        LabelColumn::Index(k) => {
            return Err(Error::InvalidArgument(format!(
                "label column {k} out of range ({width} columns)"
            )))
        }
        LabelColumn::Last => width - 1,
        LabelColumn::Name(name) => header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| {
                Error::InvalidArgument(format!("no header column named `{name}`"))
            })?,
    };
    let dim = width - 1;
    let mut features = Vec::with_capacity(rows.len());
    let mut labels = Vec::with_capacity(rows.len());
    for (line, r) in &rows {
        if r.len() != width {
            return Err(Error::DataFormat {
                line: *line,
                message: format!("expected {width} fields, found {}", r.len()),
            });
        }
        let y = match r[label_idx] {
            1.0 => 1.0,
            v if v == 0.0 || v == -1.0 => -1.0,
            v => {
                return Err(Error::DataFormat {
                    line: *line,
                    message: format!("label {v} is not in {{0,1}} or {{-1,+1}}"),
                })
            }
        };
        labels.push(y);
        features.push(
            r.iter()
                .enumerate()
                .filter(|&(k, _)| k != label_idx)
                .map(|(_, &v)| v)
                .collect::<Vec<f64>>(),
        );
    }
    let max_norm = features
        .iter()
        .map(|f| dot(f, f).sqrt())
        .fold(0.0, f64::max);
    if max_norm > 0.0 {
        for f in &mut features {
            f.iter_mut().for_each(|v| *v /= max_norm);
        }
    }
    let partition = contiguous_partition(rows.len(), n)?;
    let mut node_features = Vec::with_capacity(n);
    let mut node_labels = Vec::with_capacity(n);
    let mut start = 0;
    for m in partition {
        node_features.push(features[start..start + m].concat());
        node_labels.push(labels[start..start + m].to_vec());
        start += m;
    }
    let lambda = lambda.unwrap_or(1.0 / rows.len() as f64);
    FiniteSumProblem::logistic(dim, node_features, node_labels, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn quad_1d(nodes: &[&[f64]]) -> FiniteSumProblem {
        FiniteSumProblem::quadratic(1, nodes.iter().map(|v| v.to_vec()).collect()).unwrap()
    }

    #[test]
    fn quadratic_component_gradients() {
        let prob = FiniteSumProblem::quadratic(2, vec![vec![0.0, 0.0, 3.0, -1.0]]).unwrap();
        let at_target = DVector::from_vec(vec![3.0, -1.0]);
        assert_eq!(prob.component_gradient(&at_target, 0, 1).unwrap().norm(), 0.0);
        let e1 = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(prob.component_gradient(&e1, 0, 0).unwrap(), e1);
    }

    #[test]
    fn logistic_gradient_at_origin() {
        let prob =
            FiniteSumProblem::logistic(3, vec![vec![1.0, 0.0, 0.0]], vec![vec![1.0]], 0.1).unwrap();
        let g = prob.component_gradient(&DVector::zeros(3), 0, 0).unwrap();
        assert_eq!(g.as_slice(), &[-0.5, 0.0, 0.0]);
    }

    #[test]
    fn index_errors() {
        let prob = quad_1d(&[&[0.0, 1.0]]);
        let x = DVector::zeros(1);
        assert!(matches!(prob.component_gradient(&x, 1, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(prob.component_gradient(&x, 0, 2), Err(Error::InvalidArgument(_))));
        assert!(prob.component_gradient(&DVector::zeros(2), 0, 0).is_err());
    }

    #[test]
    fn local_gradient_examples() {
        let x = DVector::zeros(1);
        assert_eq!(quad_1d(&[&[-1.0, 1.0]]).local_full_gradient(&x, 0).unwrap()[0], 0.0);
        assert_eq!(quad_1d(&[&[0.0, 2.0]]).local_full_gradient(&x, 0).unwrap()[0], -1.0);
        let single = quad_1d(&[&[0.7]]);
        let y = DVector::from_vec(vec![0.3]);
        assert_eq!(
            single.local_full_gradient(&y, 0).unwrap(),
            single.component_gradient(&y, 0, 0).unwrap()
        );
    }

    #[test]
    fn global_quadratic_example() {
        let prob = quad_1d(&[&[0.0], &[2.0], &[4.0]]);
        let (f, g) = prob.global_value_and_gradient(&DVector::zeros(1)).unwrap();
        // (1/3) * (0 + 2 + 8)
        assert!((f - 10.0 / 3.0).abs() < 1e-15);
        assert!((g[0] + 2.0).abs() < 1e-15);
        let opt = prob.optimum().unwrap();
        assert!((opt.x[0] - 2.0).abs() < 1e-15);
        let (_, g) = prob.global_value_and_gradient(&opt.x).unwrap();
        assert!(g.norm() < 1e-15);
    }

    #[test]
    fn quadratic_optimum_all_equal() {
        let prob = FiniteSumProblem::quadratic(2, vec![vec![1.5, -2.0, 1.5, -2.0], vec![1.5, -2.0]])
            .unwrap();
        assert_eq!(prob.optimum().unwrap().x.as_slice(), &[1.5, -2.0]);
    }

    #[test]
    fn constants_examples() {
        let q = quad_1d(&[&[1.0]]).constants();
        assert_eq!((q.ell, q.mu, q.kappa), (1.0, 1.0, 1.0));

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let prob = FiniteSumProblem::logistic(
            2,
            vec![vec![1.0, 0.0, s, s], vec![0.0, -1.0]],
            vec![vec![1.0, -1.0], vec![1.0]],
            0.1,
        )
        .unwrap();
        let c = prob.constants();
        assert!((c.ell - 0.35).abs() < 1e-12);
        assert_eq!(c.mu, 0.1);
        assert!((c.kappa - 3.5).abs() < 1e-12);

        let zero = FiniteSumProblem::logistic(2, vec![vec![0.0, 0.0]], vec![vec![1.0]], 1.0)
            .unwrap()
            .constants();
        assert_eq!((zero.ell, zero.mu), (1.0, 1.0));
    }

    #[test]
    fn logistic_symmetric_optimum() {
        let xi = [0.6, 0.8];
        let prob = FiniteSumProblem::logistic(
            2,
            vec![vec![xi[0], xi[1], -xi[0], -xi[1]]],
            vec![vec![1.0, -1.0]],
            0.1,
        )
        .unwrap();
        let opt = prob.optimum().unwrap();
        assert!(opt.grad_norm <= 1e-12);
        // x* is a positive multiple of xi
        let cross = opt.x[0] * xi[1] - opt.x[1] * xi[0];
        assert!(cross.abs() < 1e-12);
        assert!(opt.x[0] > 0.0);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((softplus(0.0) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn synthetic_is_deterministic() {
        let a = synthetic_logistic(16, 100, 10, 1, None).unwrap();
        let b = synthetic_logistic(16, 100, 10, 1, None).unwrap();
        let x = DVector::from_element(10, 0.3);
        assert_eq!(a.value(&x).unwrap(), b.value(&x).unwrap());
        assert_eq!(a.partition(), &[100; 16]);
        assert_eq!((a.m_max(), a.m_min()), (100, 100));
        let c = a.constants();
        assert_eq!(c.mu, 1.0 / 1600.0);
        assert!(c.ell <= 0.25 + c.mu + 1e-15);
    }

    #[test]
    fn partition_rule() {
        assert_eq!(contiguous_partition(4, 2).unwrap(), vec![2, 2]);
        assert_eq!(contiguous_partition(5, 2).unwrap(), vec![3, 2]);
        assert!(contiguous_partition(1, 2).is_err());
    }

    fn write_csv(text: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(text.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_partitions_and_labels() {
        let f = write_csv("a,b,label\n1,0,1\n0,2,0\n3,4,1\n0,0,0\n1,1,1\n");
        let prob = load_csv(f.path(), 2, &LabelColumn::Name("label".into()), Some(0.1)).unwrap();
        assert_eq!(prob.partition(), &[3, 2]);
        assert_eq!(prob.dim(), 2);
        // largest row (3,4) has norm 5 and is rescaled to norm 1
        assert!((prob.constants().ell - (0.25 + 0.1)).abs() < 1e-12);

        let f = write_csv("1,0,1\n0,2,-1\n3,4,1\n0,0,-1\n");
        let prob = load_csv(f.path(), 2, &LabelColumn::Index(2), Some(0.1)).unwrap();
        assert_eq!(prob.partition(), &[2, 2]);
    }

    #[test]
    fn csv_errors() {
        let f = write_csv("1,0,1\n0,x,0\n");
        let err = load_csv(f.path(), 1, &LabelColumn::Last, Some(0.1)).unwrap_err();
        assert!(matches!(err, Error::DataFormat { line: 2, .. }), "{err}");

        let f = write_csv("1,0,2\n");
        assert!(matches!(
            load_csv(f.path(), 1, &LabelColumn::Last, Some(0.1)),
            Err(Error::DataFormat { .. })
        ));

        let f = write_csv("1,0,1\n");
        assert!(matches!(
            load_csv(f.path(), 2, &LabelColumn::Last, Some(0.1)),
            Err(Error::InvalidArgument(_))
        ));
    }
}
