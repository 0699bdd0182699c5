//! Population dynamics for the distributional cavity recursion
//!
//! ```text
//! h' = B + sum_{i=1}^{K} atanh(tanh(beta) tanh(h_i)),   K ~ rho,  h_i iid ~ h
//! ```
//!
//! The law of `h` is represented by a pool of `N` samples. Each update draws a
//! fresh pool from a frozen snapshot of the previous one. Two pools, started
//! from `h = B` (free) and `h = +inf` (plus), are driven by the same offspring
//! counts and the same resampling indices, which keeps them ordered
//! pointwise; their 1-D Wasserstein distance brackets the fixed point.

use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree_laws::DegreeLaw;
use crate::error::{Error, Result};
use crate::math::edge_message;
use crate::rng;
use crate::stats::{sorted_quantile, Estimate, Welford};

/// Samples per independently seeded block; fixes the random stream layout
/// regardless of the number of worker threads.
const BLOCK: usize = 1024;

/// Quantile levels recorded in the iteration history.
pub const HISTORY_QUANTILES: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPopulation {
    pub samples: Vec<f64>,
    pub beta: f64,
    pub b: f64,
    pub iteration: usize,
}

impl FieldPopulation {
    /// Free start: every sample equal to `B`.
    pub fn free(n: usize, beta: f64, b: f64) -> Self {
        Self {
            samples: vec![b; n],
            beta,
            b,
            iteration: 0,
        }
    }

    /// Plus start: every sample `+inf`; each child then contributes exactly `beta`.
    pub fn plus(n: usize, beta: f64, b: f64) -> Self {
        Self {
            samples: vec![f64::INFINITY; n],
            beta,
            b,
            iteration: 0,
        }
    }

    /// Constant pool at `h`.
    pub fn constant(n: usize, beta: f64, b: f64, h: f64) -> Self {
        Self {
            samples: vec![h; n],
            beta,
            b,
            iteration: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `tanh` of every sample.
    pub fn tanh_samples(&self) -> Vec<f64> {
        self.samples.iter().map(|h| h.tanh()).collect()
    }

    pub fn sorted_tanh(&self) -> Vec<f64> {
        let mut t = self.tanh_samples();
        t.sort_unstable_by(f64::total_cmp);
        t
    }

    pub fn mean(&self) -> Estimate {
        self.samples.iter().copied().collect::<Welford>().estimate()
    }

    /// Write one value per line after a `# {json}` header line.
    pub fn write_checkpoint<W: Write>(&self, mut w: W, header: &CheckpointHeader) -> Result<()> {
        let json = serde_json::to_string(header).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "# {json}")?;
        for h in &self.samples {
            writeln!(w, "{h:e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_checkpoint<R: Read>(r: R) -> Result<(Self, CheckpointHeader)> {
        let mut lines = BufReader::new(r).lines();
        let first = lines.next().ok_or_else(|| Error::Parse("empty checkpoint".into()))??;
        let json = first
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("checkpoint must start with '# {json}'".into()))?;
        let header: CheckpointHeader = serde_json::from_str(json.trim()).map_err(|e| Error::Parse(e.to_string()))?;
        let mut samples = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            samples.push(
                line.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("checkpoint line {}: {e}", i + 2)))?,
            );
        }
        let pop = FieldPopulation {
            samples,
            beta: header.beta,
            b: header.b,
            iteration: header.iteration,
        };
        Ok((pop, header))
    }
}

/// Metadata written in front of a pool checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub beta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub law: crate::degree_laws::LawSpec,
    pub iteration: usize,
    pub seed: u64,
    /// Hash of the experiment configuration that produced the pool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

/// One step of the recursion, randomness keyed by `seed`.
pub fn iterate(pop: &FieldPopulation, offspring_law: &DegreeLaw, seed: u64) -> FieldPopulation {
    let n = pop.len();
    let mut next = vec![0.0; n];
    next.par_chunks_mut(BLOCK).enumerate().for_each(|(block, out)| {
        let mut r = rng::stream(seed, &[block as u64]);
        for slot in out.iter_mut() {
            let k = offspring_law.sample_one(&mut r);
            let mut h = pop.b;
            for _ in 0..k {
                h += edge_message(pop.beta, pop.samples[r.gen_range(0..n)]);
            }
            *slot = h;
        }
    });
    FieldPopulation {
        samples: next,
        beta: pop.beta,
        b: pop.b,
        iteration: pop.iteration + 1,
    }
}

/// Advance two pools with shared offspring counts and resampling indices.
pub fn iterate_coupled(
    lower: &FieldPopulation,
    upper: &FieldPopulation,
    offspring_law: &DegreeLaw,
    seed: u64,
) -> Result<(FieldPopulation, FieldPopulation)> {
    if lower.len() != upper.len() {
        return Err(Error::SizeMismatch(lower.len(), upper.len()));
    }
    let n = lower.len();
    let (beta, b) = (lower.beta, lower.b);
    let mut lo = vec![0.0; n];
    let mut hi = vec![0.0; n];
    lo.par_chunks_mut(BLOCK)
        .zip(hi.par_chunks_mut(BLOCK))
        .enumerate()
        .for_each(|(block, (lo_out, hi_out))| {
            let mut r = rng::stream(seed, &[block as u64]);
            for (l, u) in lo_out.iter_mut().zip(hi_out.iter_mut()) {
                let k = offspring_law.sample_one(&mut r);
                let (mut hl, mut hu) = (b, b);
                for _ in 0..k {
                    let j = r.gen_range(0..n);
                    hl += edge_message(beta, lower.samples[j]);
                    hu += edge_message(beta, upper.samples[j]);
                }
                *l = hl;
                *u = hu;
            }
        });
    let wrap = |samples, it| FieldPopulation {
        samples,
        beta,
        b,
        iteration: it + 1,
    };
    Ok((wrap(lo, lower.iteration), wrap(hi, upper.iteration)))
}

/// Exact W1 distance between two equal-size empirical laws: the mean
/// absolute difference of their order statistics.
pub fn w1_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable_by(f64::total_cmp);
    b.sort_unstable_by(f64::total_cmp);
    Ok(w1_sorted(&a, &b))
}

fn w1_sorted(a: &[f64], b: &[f64]) -> f64 {
    let terms: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    crate::stats::mean(&terms)
}

/// Per-iteration diagnostics on the `tanh` scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// W1 between the free and plus pools.
    pub bracket_gap: f64,
    /// W1 between consecutive free pools.
    pub residual: f64,
    pub free_mean_tanh: f64,
    pub plus_mean_tanh: f64,
    /// Quantiles of the free pool at [`HISTORY_QUANTILES`].
    pub free_quantiles: Vec<f64>,
    /// Largest `free[i] - plus[i]` over the coupled pools (should be <= 0).
    pub max_order_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    /// Free-start pool, the estimate of `h*`.
    pub population: FieldPopulation,
    pub plus_population: FieldPopulation,
    pub w1_residual: f64,
    pub bracket_gap: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub pool_size: usize,
    pub max_iterations: usize,
    /// Stop once the free/plus W1 gap on the `tanh` scale is at most this.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            pool_size: 100_000,
            max_iterations: 1000,
            tol: 1e-3,
            seed: 0,
        }
    }
}

/// Smallest pool the solver accepts.
pub const MIN_POOL: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum SolveError {
    /// `max_iterations` reached before the bracket closed.
    NotConverged(Box<FixedPointResult>),
    Invalid(Error),
}

impl std::fmt::Display for SolveError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SolveError::NotConverged(r) => write!(
                f,
                "population dynamics did not converge in {} iterations (bracket gap {:.3e}, residual {:.3e})",
                r.iterations, r.bracket_gap, r.w1_residual
            ),
            SolveError::Invalid(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SolveError {}

impl From<Error> for SolveError {
    fn from(e: Error) -> Self {
        SolveError::Invalid(e)
    }
}

/// Solve for `h*` by coupled free/plus population dynamics.
pub fn solve(offspring_law: &DegreeLaw, beta: f64, b: f64, cfg: &SolverConfig) -> std::result::Result<FixedPointResult, SolveError> {
    solve_with(offspring_law, beta, b, cfg, iterate_coupled)
}

/// Coupled update used by [`solve_with`].
pub trait CoupledStep: Fn(&FieldPopulation, &FieldPopulation, &DegreeLaw, u64) -> Result<(FieldPopulation, FieldPopulation)> {}

impl<F> CoupledStep for F where F: Fn(&FieldPopulation, &FieldPopulation, &DegreeLaw, u64) -> Result<(FieldPopulation, FieldPopulation)> {}

/// [`solve`] with a caller-supplied coupled update.
pub fn solve_with<S: CoupledStep>(
    offspring_law: &DegreeLaw,
    beta: f64,
    b: f64,
    cfg: &SolverConfig,
    step: S,
) -> std::result::Result<FixedPointResult, SolveError> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!("solver needs B > 0, got {b}")).into());
    }
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be finite and >= 0")).into());
    }
    if cfg.pool_size < MIN_POOL {
        return Err(Error::InvalidParameter(format!("pool size {} below minimum {MIN_POOL}", cfg.pool_size)).into());
    }
    let mut free = FieldPopulation::free(cfg.pool_size, beta, b);
    let mut plus = FieldPopulation::plus(cfg.pool_size, beta, b);
    let mut prev_sorted = free.sorted_tanh();
    let mut history = Vec::new();
    let mut gap = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for t in 1..=cfg.max_iterations.max(1) {
        let (f, p) = step(&free, &plus, offspring_law, rng::derive_seed(cfg.seed, &[t as u64]))?;
        free = f;
        plus = p;
        let max_order_violation = free
            .samples
            .iter()
            .zip(&plus.samples)
            .map(|(l, u)| l - u)
            .fold(f64::NEG_INFINITY, f64::max);
        let sorted_free = free.sorted_tanh();
        let sorted_plus = plus.sorted_tanh();
        gap = w1_sorted(&sorted_free, &sorted_plus);
        residual = w1_sorted(&sorted_free, &prev_sorted);
        history.push(IterationRecord {
            iteration: t,
            bracket_gap: gap,
            residual,
            free_mean_tanh: crate::stats::mean(&sorted_free),
            plus_mean_tanh: crate::stats::mean(&sorted_plus),
            free_quantiles: HISTORY_QUANTILES.iter().map(|&q| sorted_quantile(&sorted_free, q)).collect(),
            max_order_violation,
        });
        prev_sorted = sorted_free;
        if gap <= cfg.tol {
            break;
        }
    }
    let iterations = history.len();
    let result = FixedPointResult {
        population: free,
        plus_population: plus,
        w1_residual: residual,
        bracket_gap: gap,
        iterations,
        converged: gap <= cfg.tol,
        history,
    };
    if result.converged {
        Ok(result)
    } else {
        Err(SolveError::NotConverged(Box::new(result)))
    }
}

/// Fixed point of `h = B + k (atanh(tanh beta tanh h))` reached from `h = B`,
/// iterated until successive values differ by at most `tol`.
pub fn scalar_bethe_fixed_point(k_minus_1: usize, beta: f64, b: f64, tol: f64) -> f64 {
    let k = k_minus_1 as f64;
    let mut h = b;
    for _ in 0..100_000_000u64 {
        let next = b + k * edge_message(beta, h);
        if (next - h).abs() <= tol {
            return next;
        }
        h = next;
    }
    h
}

/// Monte Carlo estimates of both sides of the fixed-point identity
/// `E[L psi(X1, g_L(X2..X_L))] = mean(P) E[psi(X1, X2)]`, with
/// `psi(x, y) = xy / (1 + tanh(beta) xy)` and `X = tanh(h)`, `h` from the pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub lhs: Estimate,
    /// `mean(P) E[psi(X1, g_{K+1}(X2..X_{K+1}))]` with `K ~ rho`.
    pub middle: Estimate,
    pub rhs: Estimate,
}

impl IdentityCheck {
    /// `|lhs - rhs|` and the standard error of that difference.
    pub fn discrepancy(&self) -> (f64, f64) {
        (
            (self.lhs.value - self.rhs.value).abs(),
            self.lhs.stderr.hypot(self.rhs.stderr),
        )
    }
}

fn psi(beta_hat: f64, x: f64, y: f64) -> f64 {
    x * y / (1.0 + beta_hat * x * y)
}

pub fn fixed_point_identity_check<R: Rng + ?Sized>(
    pop: &FieldPopulation,
    root_law: &DegreeLaw,
    offspring_law: &DegreeLaw,
    samples: usize,
    rng: &mut R,
) -> IdentityCheck {
    let n = pop.len();
    let (beta, b) = (pop.beta, pop.b);
    let beta_hat = beta.tanh();
    let p_bar = root_law.mean();
    let draw = |rng: &mut R| pop.samples[rng.gen_range(0..n)];
    let mut lhs = Welford::new();
    let mut mid = Welford::new();
    let mut rhs = Welford::new();
    for _ in 0..samples {
        let l = root_law.sample_one(rng);
        if l == 0 {
            lhs.push(0.0);
        } else {
            let x1 = draw(rng).tanh();
            let mut field = b;
            for _ in 1..l {
                field += edge_message(beta, draw(rng));
            }
            lhs.push(l as f64 * psi(beta_hat, x1, field.tanh()));
        }

        let k = offspring_law.sample_one(rng);
        let x1 = draw(rng).tanh();
        let mut field = b;
        for _ in 0..k {
            field += edge_message(beta, draw(rng));
        }
        mid.push(p_bar * psi(beta_hat, x1, field.tanh()));

        let (x1, x2) = (draw(rng).tanh(), draw(rng).tanh());
        rhs.push(p_bar * psi(beta_hat, x1, x2));
    }
    IdentityCheck {
        lhs: lhs.estimate(),
        middle: mid.estimate(),
        rhs: rhs.estimate(),
    }
}
