//! Row/column stochastic mixing weights and their spectral quantities.
//!
//! Entry `(i, r)` of either matrix is the weight node `i` puts on information
//! arriving from node `r`, so it can be nonzero only when the edge `r -> i` exists.

use nalgebra::{DMatrix, DVector};

use crate::digraph::DirectedGraph;
use crate::error::{Error, Result};

/// Row and column sums must match 1 to this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;
/// Power-iteration stopping tolerance (max-norm change between iterates).
pub const PERRON_TOL: f64 = 1e-14;
/// Target for `sigma^K` when picking the limit horizon `K`.
pub const LIMIT_SIGMA_TARGET: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StochasticKind {
    Row,
    Column,
    Doubly,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StochasticMatrix {
    entries: DMatrix<f64>,
    kind: StochasticKind,
}

impl StochasticMatrix {
    /// Wraps a dense square matrix after checking nonnegativity and the stochasticity `kind` claims.
    pub fn new(entries: DMatrix<f64>, kind: StochasticKind) -> Result<Self> {
        if !entries.is_square() || entries.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "weight matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "weight matrix has negative or non-finite entries".into(),
            ));
        }
        let rows_ok = entries
            .row_iter()
            .all(|r| (r.sum() - 1.0).abs() <= STOCHASTIC_TOL);
        let cols_ok = entries
            .column_iter()
            .all(|c| (c.sum() - 1.0).abs() <= STOCHASTIC_TOL);
        let ok = match kind {
            StochasticKind::Row => rows_ok,
            StochasticKind::Column => cols_ok,
            StochasticKind::Doubly => rows_ok && cols_ok,
        };
        if !ok {
            return Err(Error::InvalidArgument(format!(
                "matrix is not {kind:?}-stochastic within {STOCHASTIC_TOL:e}"
            )));
        }
        Ok(Self { entries, kind })
    }

    pub fn from_rows(rows: &[&[f64]], kind: StochasticKind) -> Result<Self> {
        let n = rows.len();
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        if flat.len() != n * n {
            return Err(Error::InvalidArgument("rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_row_slice(n, n, &flat), kind)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn kind(&self) -> StochasticKind {
        self.kind
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, r: usize) -> f64 {
        self.entries[(i, r)]
    }

    /// Rank-one limit: `1 pi^T` for row-stochastic, `pi 1^T` for column-stochastic.
    pub fn limit(&self, pi: &DVector<f64>) -> DMatrix<f64> {
        let n = self.n();
        match self.kind {
            StochasticKind::Row | StochasticKind::Doubly => {
                DMatrix::from_fn(n, n, |_, r| pi[r])
            }
            StochasticKind::Column => DMatrix::from_fn(n, n, |i, _| pi[i]),
        }
    }
}

fn check_self_loops(g: &DirectedGraph) -> Result<()> {
    if g.self_loops() {
        Ok(())
    } else {
        Err(Error::PreconditionViolation(
            "weights need a self-loop at every node (primitivity)".into(),
        ))
    }
}

/// `a_ir = 1/d_i^in` for every in-neighbour `r` of `i`, self included.
pub fn row_stochastic_from_indegree(g: &DirectedGraph) -> Result<StochasticMatrix> {
    check_self_loops(g)?;
    let n = g.n();
    let mut a = DMatrix::zeros(n, n);
    for (i, sources) in g.in_edges().iter().enumerate() {
        let w = 1.0 / sources.len() as f64;
        for &r in sources {
            a[(i, r)] = w;
        }
    }
    StochasticMatrix::new(a, StochasticKind::Row)
}

/// `b_ir = 1/d_r^out` whenever `r -> i`; each column sums to one.
pub fn column_stochastic_from_outdegree(g: &DirectedGraph) -> Result<StochasticMatrix> {
    check_self_loops(g)?;
    let n = g.n();
    let mut b = DMatrix::zeros(n, n);
    for r in 0..n {
        let targets = g.out_edges(r);
        let w = 1.0 / targets.len() as f64;
        for &i in targets {
            b[(i, r)] = w;
        }
    }
    StochasticMatrix::new(b, StochasticKind::Column)
}

fn perron_cap(n: usize) -> usize {
    let nf = n as f64;
    (100.0 * nf * nf.ln().max(0.0)) as usize + 10_000
}

/// Power iteration `v <- M v` from the uniform vector, renormalized to unit sum.
fn power_iterate(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut next = DVector::zeros(n);
    for _ in 0..perron_cap(n) {
        m.mul_to(&v, &mut next);
        let s = next.sum();
        next /= s;
        let change = (&next - &v).amax();
        std::mem::swap(&mut v, &mut next);
        if change <= PERRON_TOL {
            if v.iter().any(|&p| !(p > 0.0)) {
                return Err(Error::NumericalFailure(
                    "Perron vector has non-positive entries (matrix not irreducible)".into(),
                ));
            }
            return Ok(v);
        }
    }
    Err(Error::NumericalFailure(format!(
        "power iteration did not converge in {} steps (matrix not primitive?)",
        perron_cap(n)
    )))
}

/// Left Perron vector `pi_r` of a row-stochastic matrix: `pi_r^T A = pi_r^T`, `sum = 1`.
pub fn perron_left(a: &StochasticMatrix) -> Result<DVector<f64>> {
    power_iterate(&a.entries.transpose())
}

/// Right Perron vector `pi_c` of a column-stochastic matrix: `B pi_c = pi_c`, `sum = 1`.
pub fn perron_right(b: &StochasticMatrix) -> Result<DVector<f64>> {
    power_iterate(&b.entries)
}

fn spectral_norm(m: DMatrix<f64>) -> f64 {
    m.singular_values().max()
}

/// Spectral norm of `D^{1/2} (M - M^inf) D^{-1/2}`, with `D = diag(pi)` for
/// row-stochastic `M` and `D = diag(pi)^{-1}` for column-stochastic `M`.
///
/// With self-loops on a strongly connected graph this is strictly below one.
pub fn contraction_factor(m: &StochasticMatrix, pi: &DVector<f64>) -> Result<f64> {
    let n = m.n();
    if pi.len() != n {
        return Err(Error::InvalidArgument(format!(
            "Perron vector has length {}, matrix is {n}x{n}",
            pi.len()
        )));
    }
    let diff = &m.entries - m.limit(pi);
    let sqrt_pi = pi.map(f64::sqrt);
    let scaled = match m.kind {
        StochasticKind::Row | StochasticKind::Doubly => {
            DMatrix::from_fn(n, n, |i, r| sqrt_pi[i] * diff[(i, r)] / sqrt_pi[r])
        }
        StochasticKind::Column => {
            DMatrix::from_fn(n, n, |i, r| diff[(i, r)] * sqrt_pi[r] / sqrt_pi[i])
        }
    };
    let sigma = spectral_norm(scaled);
    if !(sigma < 1.0) {
        return Err(Error::NumericalFailure(format!(
            "contraction factor {sigma} is not below 1"
        )));
    }
    Ok(sigma)
}

/// `sqrt(h_r h_c) / (n pi_r^T pi_c)`; equals one for doubly stochastic weights.
pub fn directivity(pi_r: &DVector<f64>, pi_c: &DVector<f64>, n: usize) -> f64 {
    let h_r = spread(pi_r);
    let h_c = spread(pi_c);
    (h_r * h_c).sqrt() / (n as f64 * pi_r.dot(pi_c))
}

/// max/min ratio of a positive vector.
pub fn spread(pi: &DVector<f64>) -> f64 {
    pi.max() / pi.min()
}

/// `M^k` by repeated squaring; `k >= 1`.
pub fn matrix_power(m: &StochasticMatrix, k: u32) -> Result<StochasticMatrix> {
    if k == 0 {
        return Err(Error::InvalidArgument("matrix power needs k >= 1".into()));
    }
    let mut result: Option<DMatrix<f64>> = None;
    let mut base = m.entries.clone();
    let mut e = k;
    loop {
        if e & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(r) => r * &base,
            });
        }
        e >>= 1;
        if e == 0 {
            break;
        }
        base = &base * &base;
    }
    Ok(StochasticMatrix {
        entries: result.expect("k >= 1 sets the result"),
        kind: m.kind,
    })
}

/// Smallest `K` with `sigma^K <= 1e-9` (1 when `sigma` is zero).
pub fn limit_horizon(sigma: f64) -> u32 {
    if sigma <= 0.0 {
        return 1;
    }
    ((LIMIT_SIGMA_TARGET.ln() / sigma.ln()).ceil() as u32).max(1)
}

/// Everything the algorithms and the certificate need to know about the mixing weights.
#[derive(Clone, Debug)]
pub struct WeightSystem {
    pub a: StochasticMatrix,
    pub b: StochasticMatrix,
    pub pi_r: DVector<f64>,
    pub pi_c: DVector<f64>,
    pub a_inf: DMatrix<f64>,
    pub b_inf: DMatrix<f64>,
    pub h_r: f64,
    pub h_c: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    pub psi: f64,
}

impl WeightSystem {
    /// Uses the local `1/d_in`, `1/d_out` rules on a self-looped strongly connected graph.
    pub fn from_graph(g: &DirectedGraph) -> Result<Self> {
        if !crate::digraph::is_strongly_connected(g) {
            return Err(Error::PreconditionViolation(
                "communication graph is not strongly connected".into(),
            ));
        }
        let a = row_stochastic_from_indegree(g)?;
        let b = column_stochastic_from_outdegree(g)?;
        Self::from_matrices(a, b)
    }

    pub fn from_matrices(a: StochasticMatrix, b: StochasticMatrix) -> Result<Self> {
        if a.n() != b.n() {
            return Err(Error::InvalidArgument(format!(
                "A is {0}x{0} but B is {1}x{1}",
                a.n(),
                b.n()
            )));
        }
        if a.kind == StochasticKind::Column || b.kind == StochasticKind::Row {
            return Err(Error::InvalidArgument(
                "A must be row-stochastic and B column-stochastic".into(),
            ));
        }
        let pi_r = perron_left(&a)?;
        let pi_c = perron_right(&b)?;
        let sigma_a = contraction_factor(&a, &pi_r)?;
        let b_col = StochasticMatrix {
            entries: b.entries.clone(),
            kind: StochasticKind::Column,
        };
        let sigma_b = contraction_factor(&b_col, &pi_c)?;
        let n = a.n();
        Ok(Self {
            a_inf: a.limit(&pi_r),
            b_inf: b_col.limit(&pi_c),
            h_r: spread(&pi_r),
            h_c: spread(&pi_c),
            psi: directivity(&pi_r, &pi_c, n),
            a,
            b: b_col,
            pi_r,
            pi_c,
            sigma_a,
            sigma_b,
        })
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn pi_dot(&self) -> f64 {
        self.pi_r.dot(&self.pi_c)
    }

    /// `(K_A, max|A^K_A - A^inf|, K_B, max|B^K_B - B^inf|)` at the predicted horizons.
    pub fn limit_residuals(&self) -> Result<(u32, f64, u32, f64)> {
        let ka = limit_horizon(self.sigma_a);
        let kb = limit_horizon(self.sigma_b);
        let ra = (matrix_power(&self.a, ka)?.entries - &self.a_inf).amax();
        let rb = (matrix_power(&self.b, kb)?.entries - &self.b_inf).amax();
        Ok((ka, ra, kb, rb))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::digraph::{complete_graph, exponential_graph, ring_graph};

    fn two_by_two_row() -> StochasticMatrix {
        StochasticMatrix::from_rows(&[&[0.75, 0.25], &[0.5, 0.5]], StochasticKind::Row).unwrap()
    }

    #[test]
    fn uniform_weights_on_complete_and_two_ring() {
        for g in [complete_graph(3).unwrap(), ring_graph(2).unwrap()] {
            let n = g.n() as f64;
            let a = row_stochastic_from_indegree(&g).unwrap();
            let b = column_stochastic_from_outdegree(&g).unwrap();
            assert!(a.entries().iter().all(|&v| (v - 1.0 / n).abs() < 1e-15));
            assert!(b.entries().iter().all(|&v| (v - 1.0 / n).abs() < 1e-15));
        }
    }

    #[test]
    fn exponential_four_weight_pattern() {
        let g = exponential_graph(4).unwrap();
        let a = row_stochastic_from_indegree(&g).unwrap();
        let b = column_stochastic_from_outdegree(&g).unwrap();
        for i in 0..4 {
            for r in 0..4 {
                let in_row = [i, (i + 3) % 4, (i + 2) % 4].contains(&r);
                assert_eq!(a.get(i, r), if in_row { 1.0 / 3.0 } else { 0.0 });
                let in_col = [r, (r + 1) % 4, (r + 2) % 4].contains(&i);
                assert_eq!(b.get(i, r), if in_col { 1.0 / 3.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn missing_self_loops_rejected() {
        let g = DirectedGraph::from_edges(2, &[(0, 1), (1, 0)]).unwrap();
        assert!(matches!(
            row_stochastic_from_indegree(&g),
            Err(Error::PreconditionViolation(_))
        ));
        assert!(matches!(
            column_stochastic_from_outdegree(&g),
            Err(Error::PreconditionViolation(_))
        ));
    }

    #[test]
    fn perron_two_by_two() {
        // pi A = pi with sum 1: 2x2 solve gives (2/3, 1/3)
        let pi = perron_left(&two_by_two_row()).unwrap();
        assert!((pi[0] - 2.0 / 3.0).abs() < 1e-13);
        assert!((pi[1] - 1.0 / 3.0).abs() < 1e-13);

        let b = StochasticMatrix::from_rows(&[&[0.75, 0.5], &[0.25, 0.5]], StochasticKind::Column)
            .unwrap();
        let pc = perron_right(&b).unwrap();
        assert!((pc[0] - 2.0 / 3.0).abs() < 1e-13);
        assert!((pc[1] - 1.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn perron_circulant_is_uniform() {
        let g = ring_graph(3).unwrap();
        let pi = perron_left(&row_stochastic_from_indegree(&g).unwrap()).unwrap();
        let pc = perron_right(&column_stochastic_from_outdegree(&g).unwrap()).unwrap();
        for k in 0..3 {
            assert!((pi[k] - 1.0 / 3.0).abs() < 1e-13);
            assert!((pc[k] - 1.0 / 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn perron_fails_on_periodic_matrix() {
        let q = StochasticMatrix::from_rows(
            &[&[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &[0.5, 0.0, 0.5]],
            StochasticKind::Row,
        )
        .unwrap();
        // primitive thanks to the self-loop at node 2: converges
        assert!(perron_left(&q).is_ok());
        let r = StochasticMatrix::from_rows(
            &[&[0.0, 0.5, 0.5], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]],
            StochasticKind::Row,
        )
        .unwrap();
        // bipartite (period 2) and not uniform-invariant
        assert!(matches!(perron_left(&r), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn contraction_examples() {
        let uniform = StochasticMatrix::new(DMatrix::from_element(4, 4, 0.25), StochasticKind::Row)
            .unwrap();
        let pi = perron_left(&uniform).unwrap();
        assert!(contraction_factor(&uniform, &pi).unwrap() < 1e-15);

        let a = two_by_two_row();
        let pi = perron_left(&a).unwrap();
        let s = contraction_factor(&a, &pi).unwrap();
        // second eigenvalue is trace - 1 = 1/4; a norm bounds the spectral radius
        assert!((0.25 - 1e-12..1.0).contains(&s), "sigma = {s}");
    }

    #[test]
    fn directivity_examples() {
        let u = DVector::from_element(5, 0.2);
        assert!((directivity(&u, &u, 5) - 1.0).abs() < 1e-12);
        let p = DVector::from_vec(vec![2.0 / 3.0, 1.0 / 3.0]);
        let q = DVector::from_vec(vec![1.0 / 3.0, 2.0 / 3.0]);
        assert!((directivity(&p, &p, 2) - 9.0 / 5.0).abs() < 1e-12);
        assert!((directivity(&p, &q, 2) - 9.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn power_examples() {
        let a = two_by_two_row();
        assert_eq!(matrix_power(&a, 1).unwrap(), a);
        let a2 = matrix_power(&a, 2).unwrap();
        let expect = [[11.0 / 16.0, 5.0 / 16.0], [5.0 / 8.0, 3.0 / 8.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a2.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
        let half = StochasticMatrix::new(DMatrix::from_element(2, 2, 0.5), StochasticKind::Doubly)
            .unwrap();
        assert_eq!(matrix_power(&half, 2).unwrap(), half);
        assert!(matrix_power(&a, 0).is_err());
    }

    #[test]
    fn exponential_system_is_doubly_stochastic() {
        let ws = WeightSystem::from_graph(&exponential_graph(16).unwrap()).unwrap();
        assert!((ws.psi - 1.0).abs() < 1e-10);
        assert!((ws.h_r - 1.0).abs() < 1e-10 && (ws.h_c - 1.0).abs() < 1e-10);
        assert!((ws.pi_dot() - 1.0 / 16.0).abs() < 1e-12);
        assert!(ws.sigma_a < 1.0 && ws.sigma_b < 1.0);
        let (_, ra, _, rb) = ws.limit_residuals().unwrap();
        assert!(ra <= 1e-8 && rb <= 1e-8);
    }

    #[test]
    fn from_matrices_checks_kinds() {
        let a = two_by_two_row();
        assert!(WeightSystem::from_matrices(a.clone(), a).is_err());
    }
}
