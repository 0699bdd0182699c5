//! Brute-force enumeration of the Boltzmann measure on small graphs.
//!
//! Serves as the ground-truth oracle for the tree recursion, the cavity
//! formulas and the Monte Carlo estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::MultiGraph;

/// Largest number of free spins we enumerate.
pub const MAX_EXACT_SPINS: usize = 24;

const CHUNK_BITS: u32 = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct IsingInstance {
    graph: MultiGraph,
    beta: f64,
    fields: Vec<f64>,
    /// Spins conditioned to +1 (plus boundary).
    pinned: Vec<bool>,
}

impl IsingInstance {
    pub fn new(graph: MultiGraph, beta: f64, fields: Vec<f64>) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be finite and >= 0")));
        }
        if fields.len() != graph.n() {
            return Err(Error::InvalidParameter(format!(
                "{} fields for {} vertices",
                fields.len(),
                graph.n()
            )));
        }
        if fields.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("fields must be finite".into()));
        }
        let pinned = vec![false; graph.n()];
        Ok(Self {
            graph,
            beta,
            fields,
            pinned,
        })
    }

    /// Uniform field `b` on every vertex.
    pub fn uniform(graph: MultiGraph, beta: f64, b: f64) -> Result<Self> {
        let n = graph.n();
        Self::new(graph, beta, vec![b; n])
    }

    /// Condition the listed spins to +1.
    pub fn with_pinned(mut self, vertices: &[usize]) -> Self {
        for &v in vertices {
            self.pinned[v] = true;
        }
        self
    }

    pub fn graph(&self) -> &MultiGraph {
        &self.graph
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn fields(&self) -> &[f64] {
        &self.fields
    }

    pub fn pinned(&self) -> &[bool] {
        &self.pinned
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        Self { beta, ..self.clone() }
    }

    pub fn with_field(&self, vertex: usize, b: f64) -> Self {
        let mut out = self.clone();
        out.fields[vertex] = b;
        out
    }

    pub fn with_edge(&self, u: usize, v: usize) -> Self {
        let mut out = self.clone();
        out.graph.add_edge(u, v);
        out
    }

    fn free_count(&self) -> usize {
        self.pinned.iter().filter(|p| !**p).count()
    }
}

/// Boltzmann averages from full enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub log_z: f64,
    /// `log_z / n`.
    pub pressure: f64,
    pub vertex_magnetizations: Vec<f64>,
    /// `<σ_u σ_v>` per edge, in the graph's edge order (self-loops give 1).
    pub edge_correlations: Vec<f64>,
    /// `(1/n) sum_{i,j} (<σ_i σ_j> - <σ_i><σ_j>)`.
    pub susceptibility: f64,
    /// Full `n x n` correlation matrix, row-major, when requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pair_correlations: Option<Vec<f64>>,
}

impl ExactSolution {
    /// `M_n = (1/n) sum_i <σ_i>`.
    pub fn magnetization(&self) -> f64 {
        let n = self.vertex_magnetizations.len();
        self.vertex_magnetizations.iter().sum::<f64>() / n as f64
    }

    /// `(1/n) sum_{edges} <σ_u σ_v>`, the β-derivative of the pressure.
    pub fn edge_energy(&self) -> f64 {
        let n = self.vertex_magnetizations.len();
        self.edge_correlations.iter().sum::<f64>() / n as f64
    }

    /// `U_n = -(1/n) sum_{edges} <σ_u σ_v>`.
    pub fn internal_energy(&self) -> f64 {
        -self.edge_energy()
    }

    pub fn pair(&self, i: usize, j: usize) -> Option<f64> {
        let n = self.vertex_magnetizations.len();
        self.pair_correlations.as_ref().map(|p| p[i * n + j])
    }
}

/// Weighted sums over a block of configurations, relative to `shift`.
#[derive(Clone)]
struct Partial {
    shift: f64,
    z: f64,
    spin: Vec<f64>,
    edge: Vec<f64>,
    total: f64,
    total_sq: f64,
    pairs: Vec<f64>,
}

impl Partial {
    fn rescale(&mut self, new_shift: f64) {
        let f = (self.shift - new_shift).exp();
        self.z *= f;
        self.total *= f;
        self.total_sq *= f;
        for x in self.spin.iter_mut().chain(self.edge.iter_mut()).chain(self.pairs.iter_mut()) {
            *x *= f;
        }
        self.shift = new_shift;
    }

    fn merge(mut self, mut other: Partial) -> Partial {
        if other.z == 0.0 {
            return self;
        }
        if self.z == 0.0 {
            return other;
        }
        let s = self.shift.max(other.shift);
        self.rescale(s);
        other.rescale(s);
        self.z += other.z;
        self.total += other.total;
        self.total_sq += other.total_sq;
        for (a, b) in self.spin.iter_mut().zip(&other.spin) {
            *a += b;
        }
        for (a, b) in self.edge.iter_mut().zip(&other.edge) {
            *a += b;
        }
        for (a, b) in self.pairs.iter_mut().zip(&other.pairs) {
            *a += b;
        }
        self
    }
}

fn enumerate(inst: &IsingInstance, want_pairs: bool) -> Result<ExactSolution> {
    let n = inst.graph.n();
    let free_count = inst.free_count();
    if free_count > MAX_EXACT_SPINS {
        return Err(Error::TooLarge {
            n: free_count,
            max: MAX_EXACT_SPINS,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("instance has no vertices".into()));
    }
    if n > 64 {
        return Err(Error::TooLarge { n, max: 64 });
    }
    let free: Vec<usize> = (0..n).filter(|&v| !inst.pinned[v]).collect();
    let pinned_mask: u64 = (0..n).filter(|&v| inst.pinned[v]).fold(0, |m, v| m | (1 << v));
    let edges = inst.graph.edges();
    let beta = inst.beta;
    let fields = &inst.fields;
    let total_configs: u64 = 1 << free_count;
    let chunk = 1u64 << CHUNK_BITS.min(free_count as u32);
    let chunks = total_configs / chunk;

    // Bit v of a state is 1 when σ_v = +1.
    let expand = |c: u64| -> u64 {
        let mut state = pinned_mask;
        for (b, &v) in free.iter().enumerate() {
            if c >> b & 1 == 1 {
                state |= 1 << v;
            }
        }
        state
    };
    let spin = |state: u64, v: usize| -> f64 { if state >> v & 1 == 1 { 1.0 } else { -1.0 } };
    let exponent = |state: u64| -> f64 {
        let mut e = 0.0;
        for &(u, v) in edges {
            e += if (state >> u ^ state >> v) & 1 == 0 { beta } else { -beta };
        }
        for (v, &b) in fields.iter().enumerate() {
            e += b * spin(state, v);
        }
        e
    };

    let partials: Vec<Partial> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let start = ci * chunk;
            let states: Vec<u64> = (start..start + chunk).map(expand).collect();
            let exps: Vec<f64> = states.iter().map(|&s| exponent(s)).collect();
            let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut p = Partial {
                shift,
                z: 0.0,
                spin: vec![0.0; n],
                edge: vec![0.0; edges.len()],
                total: 0.0,
                total_sq: 0.0,
                pairs: vec![0.0; if want_pairs { n * n } else { 0 }],
            };
            for (&s, &e) in states.iter().zip(&exps) {
                let w = (e - shift).exp();
                p.z += w;
                let mut total = 0.0;
                for v in 0..n {
                    let sv = spin(s, v);
                    p.spin[v] += w * sv;
                    total += sv;
                }
                p.total += w * total;
                p.total_sq += w * total * total;
                for (k, &(u, v)) in edges.iter().enumerate() {
                    p.edge[k] += w * spin(s, u) * spin(s, v);
                }
                if want_pairs {
                    for i in 0..n {
                        let si = spin(s, i);
                        for j in 0..n {
                            p.pairs[i * n + j] += w * si * spin(s, j);
                        }
                    }
                }
            }
            p
        })
        .collect();
    let acc = partials
        .into_iter()
        .reduce(Partial::merge)
        .expect("at least one chunk");

    let log_z = acc.shift + acc.z.ln();
    let vertex_magnetizations: Vec<f64> = acc.spin.iter().map(|x| (x / acc.z).clamp(-1.0, 1.0)).collect();
    let edge_correlations: Vec<f64> = acc.edge.iter().map(|x| (x / acc.z).clamp(-1.0, 1.0)).collect();
    let mean_total = acc.total / acc.z;
    let susceptibility = ((acc.total_sq / acc.z - mean_total * mean_total) / n as f64).max(0.0);
    let pair_correlations = want_pairs.then(|| acc.pairs.iter().map(|x| (x / acc.z).clamp(-1.0, 1.0)).collect());
    Ok(ExactSolution {
        log_z,
        pressure: log_z / n as f64,
        vertex_magnetizations,
        edge_correlations,
        susceptibility,
        pair_correlations,
    })
}

/// Partition function, magnetizations, edge correlations and susceptibility
/// by summing over every configuration of the free spins.
pub fn solve_exact(inst: &IsingInstance) -> Result<ExactSolution> {
    enumerate(inst, false)
}

/// As [`solve_exact`], additionally filling the full pair-correlation matrix.
pub fn solve_exact_with_pairs(inst: &IsingInstance) -> Result<ExactSolution> {
    enumerate(inst, true)
}

pub fn susceptibility_exact(inst: &IsingInstance) -> Result<f64> {
    Ok(solve_exact(inst)?.susceptibility)
}

/// `m_j = μ(σ_j = +1) − μ(σ_j = −1)`.
pub fn magnetization_with_fields(inst: &IsingInstance, j: usize) -> Result<f64> {
    if j >= inst.graph.n() {
        return Err(Error::InvalidParameter(format!("vertex {j} out of range")));
    }
    Ok(solve_exact(inst)?.vertex_magnetizations[j])
}
