//! Directed communication graphs.
//!
//! An edge `r -> i` means node `r` sends to node `i`. Every generator adds a
//! self-loop at each node so that the derived weight matrices are primitive.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Placement attempts before [`geometric_digraph`] gives up.
pub const GEOMETRIC_MAX_RETRIES: usize = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    out_edges: Vec<Vec<usize>>,
    self_loops: bool,
}

impl DirectedGraph {
    /// Builds a graph from per-node out-neighbour lists, validating indices and duplicates.
    pub fn from_out_edges(out_edges: Vec<Vec<usize>>) -> Result<Self> {
        let n = out_edges.len();
        if n == 0 {
            return Err(Error::InvalidArgument("graph must have at least one node".into()));
        }
        for (src, nbrs) in out_edges.iter().enumerate() {
            let mut seen = vec![false; n];
            for &dst in nbrs {
                if dst >= n {
                    return Err(Error::InvalidArgument(format!(
                        "edge {src}->{dst} out of range for n={n}"
                    )));
                }
                if seen[dst] {
                    return Err(Error::InvalidArgument(format!("duplicate edge {src}->{dst}")));
                }
                seen[dst] = true;
            }
        }
        let self_loops = out_edges.iter().enumerate().all(|(i, e)| e.contains(&i));
        Ok(Self {
            n,
            out_edges,
            self_loops,
        })
    }

    /// Builds a graph from an edge list; edges keep their insertion order per source.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut out = vec![Vec::new(); n];
        for &(src, dst) in edges {
            if src >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge {src}->{dst} out of range for n={n}"
                )));
            }
            out[src].push(dst);
        }
        Self::from_out_edges(out)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn out_edges(&self, node: usize) -> &[usize] {
        &self.out_edges[node]
    }

    pub fn self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn edge_count(&self) -> usize {
        self.out_edges.iter().map(Vec::len).sum()
    }

    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        self.out_edges[src].contains(&dst)
    }

    /// All edges as `(src, dst)` pairs, grouped by source.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_edges
            .iter()
            .enumerate()
            .flat_map(|(src, nbrs)| nbrs.iter().map(move |&dst| (src, dst)))
    }

    /// In-neighbour lists (sources of edges into each node), ascending.
    pub fn in_edges(&self) -> Vec<Vec<usize>> {
        let mut inn = vec![Vec::new(); self.n];
        for (src, dst) in self.edges() {
            inn[dst].push(src);
        }
        inn
    }

    /// Writes the edge-list text format: `n`, then one `src dst` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for (src, dst) in self.edges() {
            writeln!(s, "{src} {dst}").expect("writing to a String cannot fail");
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (line, first) = lines.next().ok_or(Error::DataFormat {
            line: 1,
            message: "empty edge list".into(),
        })?;
        let n: usize = first.parse().map_err(|_| Error::DataFormat {
            line,
            message: format!("expected node count, found `{first}`"),
        })?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let mut parts = l.split_whitespace();
            let mut next = || -> Result<usize> {
                parts
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::DataFormat {
                        line,
                        message: format!("expected `src dst`, found `{l}`"),
                    })
            };
            let (src, dst) = (next()?, next()?);
            if parts.next().is_some() {
                return Err(Error::DataFormat {
                    line,
                    message: format!("trailing tokens in `{l}`"),
                });
            }
            edges.push((src, dst));
        }
        Self::from_edges(n, &edges)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_edge_list(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list()).map_err(|e| Error::io(path, e))
    }
}

/// Node `i` sends to `(i + 2^j) mod n` for `j = 0..=floor(log2(n-1))`, plus itself.
pub fn exponential_graph(n: usize) -> Result<DirectedGraph> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "exponential graph needs n >= 2, got {n}"
        )));
    }
    let max_exp = (n - 1).ilog2();
    let out = (0..n)
        .map(|i| {
            std::iter::once(i)
                .chain((0..=max_exp).map(|j| (i + (1usize << j)) % n))
                .collect()
        })
        .collect();
    DirectedGraph::from_out_edges(out)
}

/// Directed ring `i -> i+1 mod n` with self-loops.
pub fn ring_graph(n: usize) -> Result<DirectedGraph> {
    if n == 0 {
        return Err(Error::InvalidArgument("ring needs n >= 1".into()));
    }
    let out = (0..n)
        .map(|i| {
            let mut e = vec![i];
            if n > 1 {
                e.push((i + 1) % n);
            }
            e
        })
        .collect();
    DirectedGraph::from_out_edges(out)
}

/// Complete digraph with self-loops.
pub fn complete_graph(n: usize) -> Result<DirectedGraph> {
    if n == 0 {
        return Err(Error::InvalidArgument("complete graph needs n >= 1".into()));
    }
    DirectedGraph::from_out_edges((0..n).map(|_| (0..n).collect()).collect())
}

/// Random geometric graph in the unit square, directed by independent per-direction drops.
///
/// Placement is redrawn from the same random stream until the result is strongly
/// connected, at most [`GEOMETRIC_MAX_RETRIES`] times.
pub fn geometric_digraph(
    n: usize,
    radius: f64,
    reverse_drop: f64,
    seed: u64,
) -> Result<DirectedGraph> {
    if n == 0 {
        return Err(Error::InvalidArgument("geometric graph needs n >= 1".into()));
    }
    if !(radius > 0.0 && radius <= std::f64::consts::SQRT_2) {
        return Err(Error::InvalidArgument(format!(
            "radius must lie in (0, sqrt 2], got {radius}"
        )));
    }
    if !(0.0..1.0).contains(&reverse_drop) {
        return Err(Error::InvalidArgument(format!(
            "reverse_drop must lie in [0, 1), got {reverse_drop}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..GEOMETRIC_MAX_RETRIES {
        let pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
        let mut out: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        for i in 0..n {
            for j in i + 1..n {
                let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                if dx.hypot(dy) > radius {
                    continue;
                }
                // Both draws happen unconditionally so the stream layout does not
                // depend on reverse_drop.
                let keep_ij = rng.random::<f64>() >= reverse_drop;
                let keep_ji = rng.random::<f64>() >= reverse_drop;
                if keep_ij {
                    out[i].push(j);
                }
                if keep_ji {
                    out[j].push(i);
                }
            }
        }
        let g = DirectedGraph::from_out_edges(out)?;
        if is_strongly_connected(&g) {
            return Ok(g);
        }
    }
    Err(Error::GenerationFailure(format!(
        "no strongly connected placement for n={n}, radius={radius} after {GEOMETRIC_MAX_RETRIES} attempts"
    )))
}

fn reaches_all(adj: &[Vec<usize>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adj.len()
}

/// True iff every node reaches every other node along directed edges.
pub fn is_strongly_connected(g: &DirectedGraph) -> bool {
    reaches_all(&g.out_edges) && reaches_all(&g.in_edges())
}

/// Per-node `(in_degree, out_degree)`, self-loops included.
pub fn degrees(g: &DirectedGraph) -> (Vec<usize>, Vec<usize>) {
    let mut inn = vec![0; g.n];
    for (_, dst) in g.edges() {
        inn[dst] += 1;
    }
    let out = g.out_edges.iter().map(Vec::len).collect();
    (inn, out)
}
