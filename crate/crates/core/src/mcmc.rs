//! Heat-bath (Glauber) dynamics for the Ising measure on a multigraph and
//! thermodynamic integration of the finite-volume pressure over `beta`.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Adjacency, MultiGraph};
use crate::stats::{batch_means_stderr, integrated_autocorr_time, mean, Estimate};

/// Number of batches used for batch-means standard errors.
const BATCHES: usize = 20;

/// Spin configuration with cached neighbor sums `sum_{j~i} sigma_j`.
/// Self-loops are excluded from the sums; they only shift the energy by a
/// constant.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState {
    spins: Vec<i8>,
    local: Vec<i64>,
    pub beta: f64,
    pub b: f64,
}

impl SpinState {
    /// All spins +1.
    pub fn all_up(adj: &Adjacency, beta: f64, b: f64) -> Self {
        Self::from_spins(adj, vec![1; adj.n()], beta, b)
    }

    pub fn from_spins(adj: &Adjacency, spins: Vec<i8>, beta: f64, b: f64) -> Self {
        assert_eq!(spins.len(), adj.n());
        let local = Self::recompute(adj, &spins);
        Self { spins, local, beta, b }
    }

    fn recompute(adj: &Adjacency, spins: &[i8]) -> Vec<i64> {
        (0..adj.n())
            .map(|i| adj.neighbors(i).iter().map(|&j| i64::from(spins[j])).sum())
            .collect()
    }

    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    pub fn local_fields(&self) -> &[i64] {
        &self.local
    }

    /// Whether the cached neighbor sums equal a fresh recomputation.
    pub fn cache_consistent(&self, adj: &Adjacency) -> bool {
        Self::recompute(adj, &self.spins) == self.local
    }

    /// Probability that a heat-bath update at `i` sets `sigma_i = new_spin`.
    pub fn heat_bath_probability(&self, i: usize, new_spin: i8) -> f64 {
        let x = 2.0 * (self.beta * self.local[i] as f64 + self.b);
        let p_up = 1.0 / (1.0 + (-x).exp());
        if new_spin > 0 {
            p_up
        } else {
            1.0 - p_up
        }
    }

    /// `(1/n) sum_{edges} sigma_u sigma_v`, self-loops contributing 1.
    pub fn edge_energy(&self, adj: &Adjacency) -> f64 {
        let n = self.spins.len();
        let twice: i64 = self.spins.iter().zip(&self.local).map(|(&s, &l)| i64::from(s) * l).sum();
        let loops: usize = (0..n).map(|i| adj.loops(i)).sum();
        (twice as f64 / 2.0 + loops as f64) / n as f64
    }

    pub fn magnetization(&self) -> f64 {
        self.spins.iter().map(|&s| f64::from(s)).sum::<f64>() / self.spins.len() as f64
    }

    fn set(&mut self, adj: &Adjacency, i: usize, s: i8) {
        if self.spins[i] != s {
            let delta = 2 * i64::from(s);
            for &j in adj.neighbors(i) {
                self.local[j] += delta;
            }
            self.spins[i] = s;
        }
    }
}

/// `n` heat-bath updates at uniformly chosen sites.
pub fn glauber_sweep<R: Rng + ?Sized>(state: &mut SpinState, adj: &Adjacency, rng: &mut R) {
    let n = state.spins.len();
    for _ in 0..n {
        let i = rng.gen_range(0..n);
        let x = 2.0 * (state.beta * state.local[i] as f64 + state.b);
        let u: f64 = rng.gen();
        // P(up) = 1 / (1 + e^{-x})
        let s = if u * (1.0 + (-x).exp()) < 1.0 { 1 } else { -1 };
        state.set(adj, i, s);
    }
}

/// Per-sweep measurements after burn-in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorTrace {
    pub burn_in: usize,
    pub energy: Vec<f64>,
    pub magnetization: Vec<f64>,
    pub tau_int: f64,
    pub ess: f64,
}

impl EstimatorTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "sweep,energy,magnetization")?;
        for (k, (e, m)) in self.energy.iter().zip(&self.magnetization).enumerate() {
            writeln!(w, "{},{e:.17e},{m:.17e}", self.burn_in + k + 1)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeEnergyEstimate {
    /// `(1/n) sum_{edges} <sigma_u sigma_v>`.
    pub e: Estimate,
    /// `(1/n) sum_i <sigma_i>`.
    pub m: Estimate,
    pub trace: EstimatorTrace,
}

/// Run `sweeps` sweeps from `state`, discarding the first `burn_in`.
pub fn run_chain<R: Rng + ?Sized>(
    state: &mut SpinState,
    adj: &Adjacency,
    sweeps: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<EdgeEnergyEstimate> {
    if burn_in >= sweeps {
        return Err(Error::InvalidParameter(format!("burn-in {burn_in} must be below sweeps {sweeps}")));
    }
    for _ in 0..burn_in {
        glauber_sweep(state, adj, rng);
    }
    let kept = sweeps - burn_in;
    let mut energy = Vec::with_capacity(kept);
    let mut magnetization = Vec::with_capacity(kept);
    for _ in 0..kept {
        glauber_sweep(state, adj, rng);
        energy.push(state.edge_energy(adj));
        magnetization.push(state.magnetization());
    }
    let tau_int = integrated_autocorr_time(&energy);
    let ess = (kept as f64 / tau_int).min(kept as f64);
    let e = Estimate {
        value: mean(&energy),
        stderr: batch_means_stderr(&energy, BATCHES),
    };
    let m = Estimate {
        value: mean(&magnetization),
        stderr: batch_means_stderr(&magnetization, BATCHES),
    };
    Ok(EdgeEnergyEstimate {
        e,
        m,
        trace: EstimatorTrace {
            burn_in,
            energy,
            magnetization,
            tau_int,
            ess,
        },
    })
}

/// Edge-correlation density from a chain started at all spins +1.
pub fn estimate_edge_energy<R: Rng + ?Sized>(
    g: &MultiGraph,
    beta: f64,
    b: f64,
    sweeps: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<EdgeEnergyEstimate> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be >= 0")));
    }
    let adj = g.adjacency();
    let mut state = SpinState::all_up(&adj, beta, b);
    run_chain(&mut state, &adj, sweeps, burn_in, rng)
}

/// Burn-in rule: ten integrated autocorrelation times of a pilot run, and
/// never fewer than `min_sweeps`.
pub fn auto_burn_in<R: Rng + ?Sized>(state: &mut SpinState, adj: &Adjacency, pilot: usize, min_sweeps: usize, rng: &mut R) -> usize {
    let mut pilot_trace = Vec::with_capacity(pilot);
    for _ in 0..pilot {
        glauber_sweep(state, adj, rng);
        pilot_trace.push(state.edge_energy(adj));
    }
    ((10.0 * integrated_autocorr_time(&pilot_trace)).ceil() as usize).max(min_sweeps)
}

/// One grid point of a thermodynamic integration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationPoint {
    pub beta: f64,
    pub e: Estimate,
    pub m: Estimate,
    pub tau_int: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationReport {
    pub psi_n: f64,
    /// Monte Carlo error propagated through the trapezoid weights.
    pub stderr: f64,
    /// Estimated trapezoid error `sum h^3 |f''| / 12`.
    pub quadrature_bias: f64,
    pub b: f64,
    pub n: usize,
    pub points: Vec<IntegrationPoint>,
}

/// Sweep settings for each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSchedule {
    pub sweeps: usize,
    pub burn_in: usize,
}

/// `psi_n(beta, B) = log(2 cosh B) + int_0^beta (1/n) sum_edges <sigma sigma> dbeta'`
/// by the trapezoid rule over `grid` (from 0 to the target, increasing).
/// The chain is carried from one grid point to the next.
pub fn pressure_by_integration<R: Rng + ?Sized>(
    g: &MultiGraph,
    b: f64,
    grid: &[f64],
    schedule: ChainSchedule,
    rng: &mut R,
) -> Result<IntegrationReport> {
    let base = crate::math::ln_cosh(b) + std::f64::consts::LN_2;
    if grid.is_empty() || grid[0] != 0.0 {
        return Err(Error::InvalidParameter("integration grid must start at 0".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("integration grid must be increasing".into()));
    }
    if grid.len() == 1 {
        return Ok(IntegrationReport {
            psi_n: base,
            stderr: 0.0,
            quadrature_bias: 0.0,
            b,
            n: g.n(),
            points: Vec::new(),
        });
    }
    let adj = g.adjacency();
    let mut state = SpinState::all_up(&adj, 0.0, b);
    let mut points = Vec::with_capacity(grid.len());
    for &beta in grid {
        state.beta = beta;
        let est = run_chain(&mut state, &adj, schedule.sweeps, schedule.burn_in, rng)?;
        points.push(IntegrationPoint {
            beta,
            e: est.e,
            m: est.m,
            tau_int: est.trace.tau_int,
        });
    }
    let mut psi = base;
    let mut var = 0.0;
    let mut weights = vec![0.0; points.len()];
    for (i, w) in points.windows(2).enumerate() {
        let h = w[1].beta - w[0].beta;
        psi += 0.5 * h * (w[0].e.value + w[1].e.value);
        weights[i] += 0.5 * h;
        weights[i + 1] += 0.5 * h;
    }
    for (w, p) in weights.iter().zip(&points) {
        var += (w * p.e.stderr).powi(2);
    }
    let mut bias = 0.0;
    for i in 1..points.len().saturating_sub(1) {
        let (a, c, d) = (&points[i - 1], &points[i], &points[i + 1]);
        let (h1, h2) = (c.beta - a.beta, d.beta - c.beta);
        let second = 2.0 * ((d.e.value - c.e.value) / h2 - (c.e.value - a.e.value) / h1) / (h1 + h2);
        let h = 0.5 * (h1 + h2);
        bias += h.powi(3) * second.abs() / 12.0;
    }
    Ok(IntegrationReport {
        psi_n: psi,
        stderr: var.sqrt(),
        quadrature_bias: bias,
        b,
        n: g.n(),
        points,
    })
}

/// Uniform grid `0, step, 2 step, ..., beta_target` (last point exact).
pub fn uniform_grid(beta_target: f64, step: f64) -> Vec<f64> {
    if beta_target <= 0.0 {
        return vec![0.0];
    }
    let k = (beta_target / step).ceil() as usize;
    (0..=k).map(|i| i as f64 * beta_target / k as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{solve_exact, IsingInstance};
    use crate::rng;

    #[test]
    fn detailed_balance_two_spins() {
        let g = MultiGraph::new(2, vec![(0, 1)]).unwrap();
        let adj = g.adjacency();
        let (beta, b) = (0.5, 0.3);
        let weight = |s: &[i8]| (beta * f64::from(s[0] * s[1]) + b * f64::from(s[0] + s[1])).exp();
        for config in 0..4u8 {
            let s = vec![if config & 1 == 1 { 1 } else { -1 }, if config & 2 == 2 { 1 } else { -1 }];
            for i in 0..2 {
                let mut t = s.clone();
                t[i] = -t[i];
                let fwd = SpinState::from_spins(&adj, s.clone(), beta, b).heat_bath_probability(i, t[i]);
                let bwd = SpinState::from_spins(&adj, t.clone(), beta, b).heat_bath_probability(i, s[i]);
                let lhs = weight(&s) * fwd;
                let rhs = weight(&t) * bwd;
                assert!((lhs - rhs).abs() < 1e-14 * lhs.max(rhs), "config {config} site {i}");
            }
        }
    }

    #[test]
    fn cache_survives_many_sweeps() {
        let g = crate::graph::configuration_model(&[3; 200], &mut rng::from_seed(1));
        let adj = g.adjacency();
        let mut st = SpinState::all_up(&adj, 0.6, 0.1);
        let mut r = rng::from_seed(2);
        for _ in 0..1000 {
            glauber_sweep(&mut st, &adj, &mut r);
        }
        assert!(st.cache_consistent(&adj));
    }

    #[test]
    fn seeds_reproduce_traces() {
        let g = crate::graph::configuration_model(&[3; 100], &mut rng::from_seed(1));
        let a = estimate_edge_energy(&g, 0.5, 0.2, 300, 100, &mut rng::from_seed(5)).unwrap();
        let b = estimate_edge_energy(&g, 0.5, 0.2, 300, 100, &mut rng::from_seed(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_graph_magnetization() {
        let g = MultiGraph::empty(1000);
        let est = estimate_edge_energy(&g, 0.7, 0.4, 2000, 100, &mut rng::from_seed(3)).unwrap();
        assert!((est.m.value - 0.4f64.tanh()).abs() < 3.0 * est.m.stderr + 1e-12);
        assert_eq!(est.e.value, 0.0);
    }

    #[test]
    fn single_edge_correlation_matches_exact() {
        let g = MultiGraph::new(2, vec![(0, 1)]).unwrap();
        let exact = solve_exact(&IsingInstance::uniform(g.clone(), 0.5, 0.3).unwrap()).unwrap();
        let est = estimate_edge_energy(&g, 0.5, 0.3, 400_000, 1000, &mut rng::from_seed(4)).unwrap();
        let target = exact.edge_correlations[0] / 2.0;
        assert!((est.e.value - target).abs() < 3.0 * est.e.stderr, "{} vs {target} ± {}", est.e.value, est.e.stderr);
    }

    #[test]
    fn zero_target_integration_is_exact() {
        let g = MultiGraph::new(3, vec![(0, 1)]).unwrap();
        let r = pressure_by_integration(&g, 0.4, &[0.0], ChainSchedule { sweeps: 10, burn_in: 1 }, &mut rng::from_seed(0)).unwrap();
        assert!((r.psi_n - (2.0 * 0.4f64.cosh()).ln()).abs() < 1e-15);
    }

    #[test]
    fn burn_in_must_be_below_sweeps() {
        let g = MultiGraph::empty(3);
        assert!(estimate_edge_energy(&g, 0.1, 0.1, 10, 10, &mut rng::from_seed(0)).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = uniform_grid(0.8, 0.05);
        assert_eq!(g.len(), 17);
        assert_eq!(g[0], 0.0);
        assert!((g[16] - 0.8).abs() < 1e-15);
        assert_eq!(uniform_grid(0.0, 0.05), vec![0.0]);
    }
}
