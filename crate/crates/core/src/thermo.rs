//! Limiting pressure and thermodynamic quantities from a fixed-point pool.
//!
//! With `L ~ P`, `h_i` i.i.d. from the pool and `t = tanh(beta)`:
//!
//! ```text
//! phi = (P̄/2) log cosh(beta) - (P̄/2) E log(1 + t tanh h1 tanh h2)
//!       + E log(e^B prod(1 + t tanh h_i) + e^-B prod(1 - t tanh h_i))
//! M   = E tanh(B + sum_i atanh(t tanh h_i))
//! U   = -(P̄/2) E (t + tanh h1 tanh h2) / (1 + t tanh h1 tanh h2)
//! ```
//!
//! A [`ThermoSampler`] freezes one set of Monte Carlo draws (the `L`s and the
//! pool indices) so that every quantity, and every finite difference of the
//! pressure, is evaluated with common random numbers.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree_laws::DegreeLaw;
use crate::error::{Error, Result};
use crate::math::{edge_message, ln_cosh, ln_one_plus_tanh_product, log_add_exp};
use crate::stats::{Estimate, Welford};

/// Default finite-difference step in both `beta` and `B`.
pub const DEFAULT_STEP: f64 = 1e-3;

/// One row of a thermodynamic sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoPoint {
    pub beta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub phi: f64,
    pub phi_se: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "M_se")]
    pub m_se: f64,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "U_se")]
    pub u_se: f64,
    pub chi: Option<f64>,
    pub chi_se: Option<f64>,
    /// Specific heat; its thermodynamic limit is conjectural.
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "C_se")]
    pub c_se: Option<f64>,
}

impl ThermoPoint {
    pub const CSV_HEADER: [&'static str; 12] = ["beta", "B", "phi", "phi_se", "M", "M_se", "U", "U_se", "chi", "chi_se", "C", "C_se"];

    pub fn csv_record(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.17e}"));
        vec![
            format!("{}", self.beta),
            format!("{}", self.b),
            format!("{:.17e}", self.phi),
            format!("{:.17e}", self.phi_se),
            format!("{:.17e}", self.m),
            format!("{:.17e}", self.m_se),
            format!("{:.17e}", self.u),
            format!("{:.17e}", self.u_se),
            opt(self.chi),
            opt(self.chi_se),
            opt(self.c),
            opt(self.c_se),
        ]
    }
}

/// Frozen Monte Carlo draws over a fixed pool of cavity fields.
#[derive(Debug, Clone)]
pub struct ThermoSampler<'a> {
    pool: &'a [f64],
    p_bar: f64,
    offsets: Vec<usize>,
    vertex_idx: Vec<u32>,
    pair_idx: Vec<(u32, u32)>,
}

impl<'a> ThermoSampler<'a> {
    /// Draw `samples` root degrees `L ~ root_law`, `L` pool indices for each,
    /// and one independent index pair per sample.
    pub fn new<R: Rng + ?Sized>(pool: &'a [f64], root_law: &DegreeLaw, samples: usize, rng: &mut R) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::InvalidParameter("empty pool".into()));
        }
        if samples == 0 {
            return Err(Error::InvalidParameter("need at least one Monte Carlo sample".into()));
        }
        if pool.len() > u32::MAX as usize {
            return Err(Error::InvalidParameter("pool too large".into()));
        }
        let n = pool.len() as u32;
        let mut offsets = Vec::with_capacity(samples + 1);
        let mut vertex_idx = Vec::new();
        let mut pair_idx = Vec::with_capacity(samples);
        offsets.push(0);
        for _ in 0..samples {
            let l = root_law.sample_one(rng);
            vertex_idx.extend((0..l).map(|_| rng.gen_range(0..n)));
            offsets.push(vertex_idx.len());
            pair_idx.push((rng.gen_range(0..n), rng.gen_range(0..n)));
        }
        Ok(Self {
            pool,
            p_bar: root_law.mean(),
            offsets,
            vertex_idx,
            pair_idx,
        })
    }

    pub fn samples(&self) -> usize {
        self.pair_idx.len()
    }

    /// Per-sample magnetization values, in draw order.
    pub fn magnetization_samples(&self, beta: f64, b: f64) -> Vec<f64> {
        (0..self.samples()).into_par_iter().map(|s| self.magnetization_sample(s, beta, b)).collect()
    }

    /// Per-sample internal-energy values, in draw order.
    pub fn energy_samples(&self, beta: f64) -> Vec<f64> {
        (0..self.samples()).into_par_iter().map(|s| self.energy_sample(s, beta)).collect()
    }

    /// The same draws applied to another pool of equal size.
    pub fn rebind<'b>(&self, pool: &'b [f64]) -> Result<ThermoSampler<'b>> {
        if pool.len() != self.pool.len() {
            return Err(Error::SizeMismatch(self.pool.len(), pool.len()));
        }
        Ok(ThermoSampler {
            pool,
            p_bar: self.p_bar,
            offsets: self.offsets.clone(),
            vertex_idx: self.vertex_idx.clone(),
            pair_idx: self.pair_idx.clone(),
        })
    }

    pub fn mean_degree(&self) -> f64 {
        self.p_bar
    }

    fn neighbors(&self, s: usize) -> impl Iterator<Item = f64> + '_ {
        self.vertex_idx[self.offsets[s]..self.offsets[s + 1]]
            .iter()
            .map(|&i| self.pool[i as usize])
    }

    fn pair(&self, s: usize) -> (f64, f64) {
        let (i, j) = self.pair_idx[s];
        (self.pool[i as usize], self.pool[j as usize])
    }

    /// `log(e^B prod(1 + t x_i) + e^-B prod(1 - t x_i))` for sample `s`.
    fn vertex_term(&self, s: usize, beta: f64, b: f64) -> f64 {
        let mut up = b;
        let mut down = -b;
        for h in self.neighbors(s) {
            if h == f64::INFINITY {
                up += (1.0 + beta.tanh()).ln();
                down += (1.0 - beta.tanh()).ln();
            } else {
                up += ln_one_plus_tanh_product(beta, h);
                down += ln_one_plus_tanh_product(beta, -h);
            }
        }
        log_add_exp(up, down)
    }

    /// `(P̄/2) log cosh beta - (P̄/2) log(1 + t x1 x2)` for sample `s`.
    fn edge_term(&self, s: usize, beta: f64) -> f64 {
        let (h1, h2) = self.pair(s);
        let y = h1.tanh() * h2.tanh();
        0.5 * self.p_bar * (ln_cosh(beta) - (beta.tanh() * y).ln_1p())
    }

    fn pressure_sample(&self, s: usize, beta: f64, b: f64) -> f64 {
        self.edge_term(s, beta) + self.vertex_term(s, beta, b)
    }

    fn magnetization_sample(&self, s: usize, beta: f64, b: f64) -> f64 {
        let field: f64 = b + self.neighbors(s).map(|h| edge_message(beta, h)).sum::<f64>();
        field.tanh()
    }

    fn energy_sample(&self, s: usize, beta: f64) -> f64 {
        let (h1, h2) = self.pair(s);
        let t = beta.tanh();
        let y = h1.tanh() * h2.tanh();
        -0.5 * self.p_bar * (t + y) / (1.0 + t * y)
    }

    fn estimate<F: Fn(usize) -> f64 + Sync + Send>(&self, f: F) -> Estimate {
        let values: Vec<f64> = (0..self.samples()).into_par_iter().map(f).collect();
        values.into_iter().collect::<Welford>().estimate()
    }

    /// Pressure at `(beta, B)`, reflected for `B < 0`.
    pub fn pressure(&self, beta: f64, b: f64) -> Estimate {
        let b = b.abs();
        self.estimate(|s| self.pressure_sample(s, beta, b))
    }

    pub fn magnetization(&self, beta: f64, b: f64) -> Estimate {
        self.estimate(|s| self.magnetization_sample(s, beta, b))
    }

    pub fn internal_energy(&self, beta: f64) -> Estimate {
        self.estimate(|s| self.energy_sample(s, beta))
    }

    /// Centered difference of the pressure in `B` with the pool held fixed.
    pub fn pressure_derivative_b(&self, beta: f64, b: f64, step: f64) -> Estimate {
        self.estimate(|s| (self.pressure_sample(s, beta, b + step) - self.pressure_sample(s, beta, b - step)) / (2.0 * step))
    }

    /// Centered difference of the pressure in `beta` with the pool held fixed.
    pub fn pressure_derivative_beta(&self, beta: f64, b: f64, step: f64) -> Estimate {
        self.estimate(|s| (self.pressure_sample(s, beta + step, b) - self.pressure_sample(s, beta - step, b)) / (2.0 * step))
    }

    /// Per-sample `dphi/dB - M`, so the standard error accounts for the
    /// correlation between the two estimators.
    pub fn magnetization_discrepancy(&self, beta: f64, b: f64, step: f64) -> Estimate {
        self.estimate(|s| {
            (self.pressure_sample(s, beta, b + step) - self.pressure_sample(s, beta, b - step)) / (2.0 * step)
                - self.magnetization_sample(s, beta, b)
        })
    }

    /// Per-sample `dphi/dbeta + U`.
    pub fn energy_discrepancy(&self, beta: f64, b: f64, step: f64) -> Estimate {
        self.estimate(|s| {
            (self.pressure_sample(s, beta + step, b) - self.pressure_sample(s, beta - step, b)) / (2.0 * step)
                + self.energy_sample(s, beta)
        })
    }

    /// `E[F_L(X_1..X_L)]` with `X = tanh h`. Defined only when every sampled
    /// root degree is at least 2; at fixed `beta` it differs from the pressure
    /// by a constant (see [`f_ell`]).
    pub fn mean_f_ell(&self, beta: f64, b: f64) -> Result<Estimate> {
        if (0..self.samples()).any(|s| self.offsets[s + 1] - self.offsets[s] < 2) {
            return Err(Error::InvalidParameter("F_L representation needs root degrees >= 2".into()));
        }
        Ok(self.estimate(|s| {
            let xs: Vec<f64> = self.neighbors(s).map(f64::tanh).collect();
            f_ell(beta.tanh(), b, &xs)
        }))
    }
}

/// `F_l(x_1..x_l) = log(e^B prod(1 + bh x_i) + e^-B prod(1 - bh x_i))
///                  - (1/(l-1)) sum_{i<j} log(1 + bh x_i x_j)`, `l >= 2`.
pub fn f_ell(beta_hat: f64, b: f64, xs: &[f64]) -> f64 {
    assert!(xs.len() >= 2, "F_l needs at least two arguments");
    let up: f64 = b + xs.iter().map(|x| (beta_hat * x).ln_1p()).sum::<f64>();
    let down: f64 = -b + xs.iter().map(|x| (-beta_hat * x).ln_1p()).sum::<f64>();
    let mut pair_sum = 0.0;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            pair_sum += (beta_hat * xs[i] * xs[j]).ln_1p();
        }
    }
    log_add_exp(up, down) - pair_sum / (xs.len() - 1) as f64
}

/// Pressure with fresh draws; see [`ThermoSampler::pressure`].
pub fn pressure<R: Rng + ?Sized>(pool: &[f64], root_law: &DegreeLaw, beta: f64, b: f64, mc_samples: usize, rng: &mut R) -> Result<Estimate> {
    Ok(ThermoSampler::new(pool, root_law, mc_samples, rng)?.pressure(beta, b))
}

pub fn magnetization<R: Rng + ?Sized>(pool: &[f64], root_law: &DegreeLaw, beta: f64, b: f64, mc_samples: usize, rng: &mut R) -> Result<Estimate> {
    Ok(ThermoSampler::new(pool, root_law, mc_samples, rng)?.magnetization(beta, b))
}

/// Internal energy from i.i.d. pool pairs; only the mean degree of `P` enters.
pub fn internal_energy<R: Rng + ?Sized>(pool: &[f64], degree_mean: f64, beta: f64, mc_samples: usize, rng: &mut R) -> Result<Estimate> {
    if pool.is_empty() || mc_samples == 0 {
        return Err(Error::InvalidParameter("need a nonempty pool and samples".into()));
    }
    let t = beta.tanh();
    let w: Welford = (0..mc_samples)
        .map(|_| {
            let y = pool[rng.gen_range(0..pool.len())].tanh() * pool[rng.gen_range(0..pool.len())].tanh();
            -0.5 * degree_mean * (t + y) / (1.0 + t * y)
        })
        .collect();
    Ok(w.estimate())
}

/// Centered difference `(plus - minus) / (2 step)` of two independent
/// estimates, rejected when the propagated noise exceeds `tolerance`.
pub fn centered_difference(minus: Estimate, plus: Estimate, step: f64, tolerance: f64) -> Result<Estimate> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("step {step} must be positive")));
    }
    let stderr = minus.stderr.hypot(plus.stderr) / (2.0 * step);
    if stderr > tolerance {
        return Err(Error::StepTooSmall {
            step,
            ratio: stderr,
        });
    }
    Ok(Estimate {
        value: (plus.value - minus.value) / (2.0 * step),
        stderr,
    })
}

/// `chi = dM/dB` by a centered difference of magnetizations at `B ± step`.
pub fn susceptibility(m_minus: Estimate, m_plus: Estimate, step: f64, tolerance: f64) -> Result<Estimate> {
    centered_difference(m_minus, m_plus, step, tolerance)
}

/// Susceptibility at every interior point of a uniform `B` grid.
pub fn susceptibility_sweep(b_grid: &[f64], m: &[Estimate], tolerance: f64) -> Result<Vec<Estimate>> {
    if b_grid.len() != m.len() || b_grid.len() < 3 {
        return Err(Error::InvalidParameter("need matching grids with at least three points".into()));
    }
    (1..b_grid.len() - 1)
        .map(|i| {
            let step = 0.5 * (b_grid[i + 1] - b_grid[i - 1]);
            if b_grid[i] - step <= 0.0 {
                return Err(Error::InvalidParameter("susceptibility grid must stay in B > 0".into()));
            }
            susceptibility(m[i - 1], m[i + 1], step, tolerance)
        })
        .collect()
}

/// Specific heat `C = -beta^2 dU/dbeta` from energies at `beta ± step`.
/// The limit of `C_n` is not proven to equal this quantity.
pub fn specific_heat(beta: f64, u_minus: Estimate, u_plus: Estimate, step: f64, tolerance: f64) -> Result<Estimate> {
    let d = centered_difference(u_minus, u_plus, step, tolerance)?;
    Ok(Estimate {
        value: -beta * beta * d.value,
        stderr: beta * beta * d.stderr,
    })
}

/// Settings for [`evaluate_point`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointOptions {
    pub solver: crate::population::SolverConfig,
    pub samples: usize,
    pub step: f64,
    /// Largest acceptable standard error of a difference quotient.
    pub tolerance: f64,
    /// Also compute `chi` and `C` from re-solved pools.
    pub derivatives: bool,
}

impl Default for PointOptions {
    fn default() -> Self {
        Self {
            solver: Default::default(),
            samples: 1_000_000,
            step: DEFAULT_STEP,
            tolerance: 1.0,
            derivatives: true,
        }
    }
}

fn solved_pool(
    offspring: &DegreeLaw,
    beta: f64,
    b: f64,
    solver: &crate::population::SolverConfig,
) -> std::result::Result<Vec<f64>, crate::population::SolveError> {
    crate::population::solve(offspring, beta, b, solver).map(|r| r.population.samples)
}

fn paired_quotient(minus: &[f64], plus: &[f64], step: f64, tolerance: f64) -> Result<Estimate> {
    let est = minus
        .iter()
        .zip(plus)
        .map(|(m, p)| (p - m) / (2.0 * step))
        .collect::<Welford>()
        .estimate();
    if est.stderr > tolerance {
        return Err(Error::StepTooSmall {
            step,
            ratio: est.stderr,
        });
    }
    Ok(est)
}

/// `phi`, `M` and `U` at `(beta, B)`, plus `chi` and `C` when requested.
///
/// `chi` and `C` difference pools re-solved at `B ± step` and `beta ± step`
/// with the same solver seed and the same Monte Carlo draws, so the two sides
/// are strongly correlated; their standard errors are conditional on the pools.
/// `B < 0` is handled by reflection. `chi` is skipped when `|B| <= step`, and
/// `C` when `0 < beta < step`.
pub fn evaluate_point(
    root_law: &DegreeLaw,
    beta: f64,
    b: f64,
    opts: &PointOptions,
) -> std::result::Result<ThermoPoint, crate::population::SolveError> {
    let sign = if b < 0.0 { -1.0 } else { 1.0 };
    let b = b.abs();
    let offspring = root_law.size_biased()?;
    let pool = solved_pool(&offspring, beta, b, &opts.solver)?;
    let mut rng = crate::rng::stream(opts.solver.seed, &[u64::MAX]);
    let sampler = ThermoSampler::new(&pool, root_law, opts.samples, &mut rng)?;
    let phi = sampler.pressure(beta, b);
    let m = sampler.magnetization(beta, b);
    let u = sampler.internal_energy(beta);
    let mut point = ThermoPoint {
        beta,
        b: sign * b,
        phi: phi.value,
        phi_se: phi.stderr,
        m: sign * m.value,
        m_se: m.stderr,
        u: u.value,
        u_se: u.stderr,
        chi: None,
        chi_se: None,
        c: None,
        c_se: None,
    };
    if !opts.derivatives {
        return Ok(point);
    }
    let h = opts.step;
    if b > h {
        let lo = solved_pool(&offspring, beta, b - h, &opts.solver)?;
        let hi = solved_pool(&offspring, beta, b + h, &opts.solver)?;
        let m_lo = sampler.rebind(&lo)?.magnetization_samples(beta, b - h);
        let m_hi = sampler.rebind(&hi)?.magnetization_samples(beta, b + h);
        let chi = paired_quotient(&m_lo, &m_hi, h, opts.tolerance)?;
        point.chi = Some(chi.value);
        point.chi_se = Some(chi.stderr);
    }
    if beta == 0.0 {
        point.c = Some(0.0);
        point.c_se = Some(0.0);
    } else if beta >= h {
        let lo = solved_pool(&offspring, beta - h, b, &opts.solver)?;
        let hi = solved_pool(&offspring, beta + h, b, &opts.solver)?;
        let u_lo = sampler.rebind(&lo)?.energy_samples(beta - h);
        let u_hi = sampler.rebind(&hi)?.energy_samples(beta + h);
        let du = paired_quotient(&u_lo, &u_hi, h, opts.tolerance)?;
        point.c = Some(-beta * beta * du.value);
        point.c_se = Some(beta * beta * du.stderr);
    }
    Ok(point)
}

/// Replicated check of `M = dphi/dB` and `U = -dphi/dbeta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeCheck {
    /// Mean over replicas of `dphi/dB - M`.
    pub m: Estimate,
    /// Mean over replicas of `dphi/dbeta + U`.
    pub u: Estimate,
    pub replicas: usize,
}

impl DerivativeCheck {
    /// Both discrepancies within `max(sigmas * stderr, floor)`.
    pub fn passes(&self, sigmas: f64, floor: f64) -> bool {
        [self.m, self.u].iter().all(|d| d.value.abs() <= (sigmas * d.stderr).max(floor))
    }
}

/// Solve `replicas` independent pools at `(beta, B)` and compare the explicit
/// `M` and `U` with centered differences of the pressure on each pool. The
/// standard errors come from the spread across replicas, so they include the
/// finite-pool error and not only the Monte Carlo draws.
pub fn derivative_check(
    root_law: &DegreeLaw,
    beta: f64,
    b: f64,
    step: f64,
    replicas: usize,
    samples: usize,
    solver: &crate::population::SolverConfig,
) -> Result<DerivativeCheck> {
    if replicas < 2 {
        return Err(Error::InvalidParameter("derivative check needs at least two replicas".into()));
    }
    let offspring = root_law.size_biased()?;
    let mut dm = Welford::new();
    let mut du = Welford::new();
    for r in 0..replicas {
        let cfg = crate::population::SolverConfig {
            seed: crate::rng::derive_seed(solver.seed, &[r as u64]),
            ..*solver
        };
        let fp = match crate::population::solve(&offspring, beta, b, &cfg) {
            Ok(fp) => fp,
            Err(crate::population::SolveError::NotConverged(fp)) => {
                return Err(Error::InvalidParameter(format!(
                    "pool did not converge at beta={beta}, B={b} (gap {:.3e})",
                    fp.bracket_gap
                )))
            }
            Err(crate::population::SolveError::Invalid(e)) => return Err(e),
        };
        let mut rng = crate::rng::stream(cfg.seed, &[u64::MAX]);
        let sampler = ThermoSampler::new(&fp.population.samples, root_law, samples, &mut rng)?;
        dm.push(sampler.magnetization_discrepancy(beta, b, step).value);
        du.push(sampler.energy_discrepancy(beta, b, step).value);
    }
    Ok(DerivativeCheck {
        m: dm.estimate(),
        u: du.estimate(),
        replicas,
    })
}

/// `atanh(1/rho_bar)` for `rho_bar > 1`, `+inf` otherwise.
pub fn critical_beta(offspring_mean: f64) -> f64 {
    if offspring_mean > 1.0 {
        (1.0 / offspring_mean).atanh()
    } else {
        f64::INFINITY
    }
}

/// Closed-form evaluation for a deterministic offspring law: every `h_i`
/// equals `h`, every root has `degree` neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularThermo {
    pub phi: f64,
    pub m: f64,
    pub u: f64,
}

pub fn regular_closed_form(degree: usize, beta: f64, b: f64, h: f64) -> RegularThermo {
    let d = degree as f64;
    let x = h.tanh();
    let t = beta.tanh();
    let up = b + d * ln_one_plus_tanh_product(beta, h);
    let down = -b + d * ln_one_plus_tanh_product(beta, -h);
    let phi = 0.5 * d * ln_cosh(beta) - 0.5 * d * (t * x * x).ln_1p() + log_add_exp(up, down);
    let m = (b + d * edge_message(beta, h)).tanh();
    let u = -0.5 * d * (t + x * x) / (1.0 + t * x * x);
    RegularThermo { phi, m, u }
}
