//! Random multigraphs: configuration model, Erdős-Rényi, and the structural
//! diagnostics (sparsity, edge density, neighborhood balls) used to check
//! local tree-likeness.

use std::collections::{BTreeMap, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::canonical::canonical_code;
use crate::error::{Error, Result};

/// Undirected multigraph on vertices `0..n`; self-loops and parallel edges allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiGraph {
    n: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
}

impl MultiGraph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        let mut degrees = vec![0; n];
        for &(u, v) in &edges {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!("edge ({u},{v}) out of range for n = {n}")));
            }
            degrees[u] += 1;
            degrees[v] += 1;
        }
        Ok(Self { n, edges, degrees })
    }

    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            degrees: vec![0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Per-vertex degree; a self-loop counts twice.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn max_degree(&self) -> usize {
        self.degrees.iter().copied().max().unwrap_or(0)
    }

    pub fn self_loops(&self) -> usize {
        self.edges.iter().filter(|(u, v)| u == v).count()
    }

    /// Add an edge, keeping degrees consistent.
    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u < self.n && v < self.n);
        self.edges.push((u, v));
        self.degrees[u] += 1;
        self.degrees[v] += 1;
    }

    pub fn adjacency(&self) -> Adjacency {
        Adjacency::new(self)
    }

    /// Plain-text edge list: `n m` then `m` lines `u v`.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {}", self.n, self.edges.len())?;
        for &(u, v) in &self.edges {
            writeln!(w, "{u} {v}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_edge_list<R: Read>(r: R) -> Result<Self> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() || l.trim_start().starts_with('#') => None,
            other => Some((i + 1, other)),
        });
        let parse_pair = |lineno: usize, line: &str| -> Result<(usize, usize)> {
            let mut it = line.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(Error::Parse(format!("line {lineno}: expected two integers, got '{line}'"))),
            }
        };
        let (lineno, header) = lines.next().ok_or_else(|| Error::Parse("empty edge list".into()))?;
        let (n, m) = parse_pair(lineno, &header?)?;
        let mut edges = Vec::with_capacity(m);
        for (lineno, line) in lines {
            edges.push(parse_pair(lineno, &line?)?);
        }
        if edges.len() != m {
            return Err(Error::Parse(format!("header declares {m} edges, found {}", edges.len())));
        }
        MultiGraph::new(n, edges)
    }
}

/// Compressed adjacency lists. Parallel edges repeat a neighbor; self-loops
/// are kept out of the neighbor lists and counted separately.
#[derive(Debug, Clone)]
pub struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    loops: Vec<usize>,
}

impl Adjacency {
    fn new(g: &MultiGraph) -> Self {
        let mut counts = vec![0usize; g.n + 1];
        let mut loops = vec![0usize; g.n];
        for &(u, v) in &g.edges {
            if u == v {
                loops[u] += 1;
            } else {
                counts[u + 1] += 1;
                counts[v + 1] += 1;
            }
        }
        for i in 0..g.n {
            counts[i + 1] += counts[i];
        }
        let offsets = counts.clone();
        let mut fill = counts;
        let mut targets = vec![0usize; offsets[g.n]];
        for &(u, v) in &g.edges {
            if u != v {
                targets[fill[u]] = v;
                fill[u] += 1;
                targets[fill[v]] = u;
                fill[v] += 1;
            }
        }
        Self { offsets, targets, loops }
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn loops(&self, v: usize) -> usize {
        self.loops[v]
    }

    pub fn n(&self) -> usize {
        self.loops.len()
    }
}

/// Configuration model: uniform random matching of half-edges.
///
/// If the total degree is odd the last vertex receives one extra stub.
pub fn configuration_model<R: Rng + ?Sized>(degrees: &[usize], rng: &mut R) -> MultiGraph {
    let n = degrees.len();
    let mut degs = degrees.to_vec();
    if degs.iter().sum::<usize>() % 2 == 1 {
        *degs.last_mut().expect("odd total implies nonempty") += 1;
    }
    let mut stubs: Vec<usize> = Vec::with_capacity(degs.iter().sum());
    for (v, &d) in degs.iter().enumerate() {
        stubs.extend(std::iter::repeat(v).take(d));
    }
    stubs.shuffle(rng);
    let edges: Vec<(usize, usize)> = stubs.chunks_exact(2).map(|p| (p[0], p[1])).collect();
    MultiGraph {
        n,
        edges,
        degrees: degs,
    }
}

/// Erdős-Rényi graph: each unordered pair present independently with
/// probability `mean_degree / (n - 1)`.
pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, mean_degree: f64, rng: &mut R) -> Result<MultiGraph> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if n == 1 {
        return Ok(MultiGraph::empty(1));
    }
    let p = mean_degree / (n - 1) as f64;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let mut g = MultiGraph::empty(n);
    if p == 0.0 {
        return Ok(g);
    }
    if p == 1.0 {
        for v in 1..n {
            for w in 0..v {
                g.add_edge(w, v);
            }
        }
        return Ok(g);
    }
    // Geometric skipping over the lower-triangular pair sequence (Batagelj & Brandes).
    let log_q = (1.0 - p).ln();
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.gen();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while v < n && w >= v as i64 {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            g.add_edge(w as usize, v);
        }
    }
    Ok(g)
}

/// `(1/n) sum_i D_i 1{D_i >= cutoff}`.
pub fn sparsity_profile(g: &MultiGraph, cutoff: usize) -> f64 {
    if g.n == 0 {
        return 0.0;
    }
    let s: usize = g.degrees.iter().filter(|&&d| d >= cutoff).sum();
    s as f64 / g.n as f64
}

/// `|E| / n`.
pub fn edge_density(g: &MultiGraph) -> f64 {
    if g.n == 0 {
        0.0
    } else {
        g.edges.len() as f64 / g.n as f64
    }
}

/// Induced ball of radius `radius` around `center`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborhoodBall {
    pub center: usize,
    pub radius: usize,
    pub vertex_count: usize,
    /// Edges of the induced subgraph, counting multiplicities and self-loops.
    pub edge_count: usize,
    pub is_tree: bool,
    /// Number of vertices at distance `0, 1, ..., radius`.
    pub generation_sizes: Vec<usize>,
    /// AHU code of the rooted ball when it is a tree.
    pub canonical: Option<String>,
}

impl NeighborhoodBall {
    /// Number of vertices in generation 1 (the root's neighbors).
    pub fn root_offspring(&self) -> usize {
        self.generation_sizes.get(1).copied().unwrap_or(0)
    }
}

pub fn sample_ball(g: &MultiGraph, adj: &Adjacency, center: usize, radius: usize) -> Result<NeighborhoodBall> {
    if center >= g.n {
        return Err(Error::InvalidParameter(format!("center {center} out of range")));
    }
    let mut dist: BTreeMap<usize, usize> = BTreeMap::new();
    let mut parent: BTreeMap<usize, usize> = BTreeMap::new();
    let mut order = vec![center];
    dist.insert(center, 0);
    let mut queue = VecDeque::from([center]);
    while let Some(v) = queue.pop_front() {
        let d = dist[&v];
        if d == radius {
            continue;
        }
        for &w in adj.neighbors(v) {
            if !dist.contains_key(&w) {
                dist.insert(w, d + 1);
                parent.insert(w, v);
                order.push(w);
                queue.push_back(w);
            }
        }
    }
    let vertex_count = order.len();
    let mut edge_count = 0usize;
    for &v in &order {
        edge_count += adj.loops(v);
        // Each non-loop induced edge is seen from both endpoints.
        edge_count += adj.neighbors(v).iter().filter(|w| dist.contains_key(w)).count();
    }
    let loops: usize = order.iter().map(|&v| adj.loops(v)).sum();
    let edge_count = loops + (edge_count - loops) / 2;
    let is_tree = edge_count + 1 == vertex_count;

    let mut generation_sizes = vec![0usize; radius + 1];
    for d in dist.values() {
        generation_sizes[*d] += 1;
    }
    let canonical = is_tree.then(|| {
        let index: BTreeMap<usize, usize> = order.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut children = vec![Vec::new(); order.len()];
        for (&child, &par) in &parent {
            children[index[&par]].push(index[&child]);
        }
        canonical_code(&children, 0)
    });
    Ok(NeighborhoodBall {
        center,
        radius,
        vertex_count,
        edge_count,
        is_tree,
        generation_sizes,
        canonical,
    })
}

/// Empirical law of rooted ball shapes at uniformly sampled centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLaw {
    pub samples: usize,
    pub radius: usize,
    /// Canonical code and relative frequency, most frequent first.
    pub shapes: Vec<(String, f64)>,
    pub non_tree_fraction: f64,
}

impl LocalLaw {
    pub fn frequency(&self, code: &str) -> f64 {
        self.shapes.iter().find(|(c, _)| c == code).map_or(0.0, |(_, f)| *f)
    }

    pub fn dominant(&self) -> Option<&(String, f64)> {
        self.shapes.first()
    }
}

pub fn local_law_estimate<R: Rng + ?Sized>(g: &MultiGraph, radius: usize, samples: usize, rng: &mut R) -> Result<LocalLaw> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    if g.n == 0 {
        return Err(Error::InvalidParameter("graph has no vertices".into()));
    }
    let adj = g.adjacency();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut non_tree = 0usize;
    for _ in 0..samples {
        let center = rng.gen_range(0..g.n);
        let ball = sample_ball(g, &adj, center, radius)?;
        match ball.canonical {
            Some(code) => *counts.entry(code).or_default() += 1,
            None => non_tree += 1,
        }
    }
    let mut shapes: Vec<(String, f64)> = counts
        .into_iter()
        .map(|(c, k)| (c, k as f64 / samples as f64))
        .collect();
    shapes.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(LocalLaw {
        samples,
        radius,
        shapes,
        non_tree_fraction: non_tree as f64 / samples as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn cycle(n: usize) -> MultiGraph {
        MultiGraph::new(n, (0..n).map(|i| (i, (i + 1) % n)).collect()).unwrap()
    }

    #[test]
    fn configuration_model_small_cases() {
        let mut r = rng::from_seed(0);
        let g = configuration_model(&[1, 1], &mut r);
        assert_eq!(g.edges().len(), 1);
        let (u, v) = g.edges()[0];
        assert_eq!((u.min(v), u.max(v)), (0, 1));

        let g = configuration_model(&[2], &mut r);
        assert_eq!(g.edges(), &[(0, 0)]);
        assert_eq!(g.degrees(), &[2]);

        let g = configuration_model(&[1, 1, 1], &mut r);
        assert_eq!(g.degrees(), &[1, 1, 2]);
        assert_eq!(g.num_edges(), 2);
    }

    #[test]
    fn erdos_renyi_edge_cases() {
        let mut r = rng::from_seed(1);
        assert_eq!(erdos_renyi(2, 1.0, &mut r).unwrap().num_edges(), 1);
        assert_eq!(erdos_renyi(5, 0.0, &mut r).unwrap().num_edges(), 0);
        assert_eq!(erdos_renyi(3, 5.0, &mut r), Err(Error::InvalidProbability(2.5)));
        let g = erdos_renyi(10_000, 4.0, &mut r).unwrap();
        let mean = 2.0 * g.num_edges() as f64 / 1e4;
        // sd of the mean degree = 2 sqrt(|E|) / n ≈ 0.028 ; allow 0.1.
        assert!((mean - 4.0).abs() < 0.1, "mean degree {mean}");
        assert!(g.edges().iter().all(|(u, v)| u != v));
    }

    #[test]
    fn erdos_renyi_pairs_are_unique() {
        let g = erdos_renyi(200, 20.0, &mut rng::from_seed(5)).unwrap();
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in g.edges() {
            assert!(seen.insert((u.min(v), u.max(v))));
        }
    }

    #[test]
    fn sparsity_and_density() {
        let g = configuration_model(&[3; 10], &mut rng::from_seed(2));
        assert_eq!(sparsity_profile(&g, 4), 0.0);
        assert_eq!(sparsity_profile(&g, 2), 3.0);
        assert_eq!(sparsity_profile(&g, 0), 2.0 * g.num_edges() as f64 / 10.0);
        assert_eq!(edge_density(&g), 1.5);
        let e = MultiGraph::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(edge_density(&e), 0.5);
    }

    #[test]
    fn balls() {
        let path = MultiGraph::new(3, vec![(0, 1), (1, 2)]).unwrap();
        let adj = path.adjacency();
        let b = sample_ball(&path, &adj, 1, 1).unwrap();
        assert!(b.is_tree);
        assert_eq!(b.generation_sizes, vec![1, 2]);
        assert_eq!(b.canonical.as_deref(), Some("(()())"));

        let tri = cycle(3);
        let b = sample_ball(&tri, &tri.adjacency(), 0, 1).unwrap();
        assert!(!b.is_tree);
        assert_eq!(b.edge_count, 3);

        let multi = MultiGraph::new(2, vec![(0, 1), (0, 1)]).unwrap();
        assert!(!sample_ball(&multi, &multi.adjacency(), 0, 1).unwrap().is_tree);
        let looped = MultiGraph::new(2, vec![(0, 1), (1, 1)]).unwrap();
        assert!(!sample_ball(&looped, &looped.adjacency(), 0, 1).unwrap().is_tree);
        assert!(sample_ball(&looped, &looped.adjacency(), 0, 0).unwrap().is_tree);
    }

    #[test]
    fn star_local_law() {
        let star = MultiGraph::new(6, (1..6).map(|i| (0, i)).collect()).unwrap();
        let law = local_law_estimate(&star, 1, 60_000, &mut rng::from_seed(3)).unwrap();
        assert_eq!(law.non_tree_fraction, 0.0);
        // 5σ of a Bernoulli(1/6) mean over 6e4 draws is ≈ 0.0076.
        assert!((law.frequency("(()()()()())") - 1.0 / 6.0).abs() < 0.0076);
        assert!((law.frequency("(())") - 5.0 / 6.0).abs() < 0.0076);
    }

    #[test]
    fn edge_list_roundtrip_and_errors() {
        let g = configuration_model(&[2, 3, 1, 4], &mut rng::from_seed(4));
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        let back = MultiGraph::read_edge_list(buf.as_slice()).unwrap();
        assert_eq!(back.edges(), g.edges());
        assert_eq!(back.degrees(), g.degrees());
        assert!(MultiGraph::read_edge_list("2 2\n0 1\n".as_bytes()).is_err());
        assert!(MultiGraph::read_edge_list("2 1\n0 5\n".as_bytes()).is_err());
    }
}
