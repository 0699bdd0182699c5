//! Inequality and consistency suites aggregated by the `verify` command.
//!
//! Each suite takes the computation under test as a closure so that a
//! deliberately broken double can be substituted to confirm the suite
//! actually detects faults.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::degree_laws::{DegreeLaw, LawSpec};
use crate::error::Result;
use crate::exact::{solve_exact_with_pairs, ExactSolution, IsingInstance};
use crate::graph::MultiGraph;
use crate::population::{self, CoupledStep, FieldPopulation, SolveError, SolverConfig};
use crate::rng;
use crate::tree::{self, BoundaryCondition, RootedTree};

/// Absolute slack for comparisons between values that agree up to rounding.
const ROUNDING_FLOOR: f64 = 1e-12;

/// Outcome of one suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub cases: usize,
    pub checks: usize,
    pub failures: usize,
    /// Largest violation observed (0 when none).
    pub worst_violation: f64,
    pub passed: bool,
    pub notes: Vec<String>,
}

impl SuiteReport {
    fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            cases: 0,
            checks: 0,
            failures: 0,
            worst_violation: 0.0,
            passed: false,
            notes: Vec::new(),
        }
    }

    /// Record a check that passes when `violation <= tol`.
    fn check(&mut self, violation: f64, tol: f64) {
        self.checks += 1;
        if !(violation <= tol) {
            self.failures += 1;
        }
        if violation > self.worst_violation || violation.is_nan() {
            self.worst_violation = violation;
        }
    }

    fn absorb(&mut self, other: SuiteReport) {
        self.cases += other.cases;
        self.checks += other.checks;
        self.failures += other.failures;
        if other.worst_violation > self.worst_violation || other.worst_violation.is_nan() {
            self.worst_violation = other.worst_violation;
        }
        self.notes.extend(other.notes);
    }

    fn finish(mut self) -> Self {
        self.passed = self.failures == 0 && self.checks > 0;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

/// Random small instance: `n` in `[2, max_n]`, a random connected-ish
/// multigraph, `beta` in `[0, 1.5]`, fields in `[field_min, 1]`.
pub fn random_instance<R: Rng + ?Sized>(max_n: usize, field_min: f64, rng: &mut R) -> IsingInstance {
    let n = rng.gen_range(2..=max_n.max(2));
    let m = rng.gen_range(n - 1..=2 * n);
    let mut edges = Vec::with_capacity(m);
    for v in 1..n {
        edges.push((rng.gen_range(0..v), v));
    }
    while edges.len() < m {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            edges.push((u, v));
        }
    }
    let beta = rng.gen_range(0.0..1.5);
    let fields = (0..n).map(|_| rng.gen_range(field_min..1.0)).collect();
    IsingInstance::new(MultiGraph::new(n, edges).expect("valid edges"), beta, fields).expect("valid instance")
}

fn pair_matrix(sol: &ExactSolution) -> &[f64] {
    sol.pair_correlations.as_deref().unwrap_or(&[])
}

/// GKS: correlations are nonnegative and nondecreasing in `beta`, in each
/// field and under edge addition.
pub fn gks_suite<S>(instances: usize, max_n: usize, tol: f64, seed: u64, solve: S) -> SuiteReport
where
    S: Fn(&IsingInstance) -> Result<ExactSolution> + Sync,
{
    let per_case: Vec<SuiteReport> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, &[i as u64]);
            let mut rep = SuiteReport::new("GKS");
            rep.cases = 1;
            let inst = random_instance(max_n, 0.0, &mut r);
            let n = inst.graph().n();
            let base = match solve(&inst) {
                Ok(s) => s,
                Err(e) => {
                    rep.notes.push(format!("case {i}: {e}"));
                    rep.failures += 1;
                    return rep;
                }
            };
            for &m in &base.vertex_magnetizations {
                rep.check(-m, tol);
            }
            for &c in pair_matrix(&base) {
                rep.check(-c, tol);
            }
            let k = r.gen_range(0..n);
            let (u, v) = (r.gen_range(0..n), r.gen_range(0..n));
            let variants = [
                inst.with_beta(inst.beta() + r.gen_range(0.01..0.5)),
                inst.with_field(k, inst.fields()[k] + r.gen_range(0.01..0.5)),
                inst.with_edge(u, v),
            ];
            for variant in &variants {
                match solve(variant) {
                    Ok(s) => {
                        let before = pair_matrix(&base);
                        let after = pair_matrix(&s);
                        if before.len() != after.len() || before.is_empty() {
                            rep.failures += 1;
                            rep.notes.push(format!("case {i}: pair correlations missing"));
                            continue;
                        }
                        for (a, b) in before.iter().zip(after) {
                            rep.check(a - b, tol);
                        }
                    }
                    Err(e) => {
                        rep.failures += 1;
                        rep.notes.push(format!("case {i}: {e}"));
                    }
                }
            }
            rep
        })
        .collect();
    let mut rep = SuiteReport::new("GKS");
    for r in per_case {
        rep.absorb(r);
    }
    rep.finish()
}

/// GHS: for nonnegative fields every second centered difference
/// `d^2 m_j / dB_k dB_l` is at most `tol`.
pub fn ghs_suite<M>(instances: usize, max_n: usize, step: f64, tol: f64, seed: u64, magnetizations: M) -> SuiteReport
where
    M: Fn(&IsingInstance) -> Result<Vec<f64>> + Sync,
{
    let per_case: Vec<SuiteReport> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, &[i as u64]);
            let mut rep = SuiteReport::new("GHS");
            rep.cases = 1;
            let inst = random_instance(max_n, 2.0 * step, &mut r);
            let n = inst.graph().n();
            for k in 0..n {
                for l in k..n {
                    let shifted = |dk: f64, dl: f64| {
                        let mut f = inst.fields().to_vec();
                        f[k] += dk;
                        f[l] += dl;
                        IsingInstance::new(inst.graph().clone(), inst.beta(), f).and_then(|x| magnetizations(&x))
                    };
                    let corners = [
                        shifted(step, step),
                        shifted(step, -step),
                        shifted(-step, step),
                        shifted(-step, -step),
                    ];
                    if let Some(Err(e)) = corners.iter().find(|c| c.is_err()) {
                        rep.failures += 1;
                        rep.notes.push(format!("case {i}: {e}"));
                        continue;
                    }
                    let [pp, pm, mp, mm] = corners.map(|c| c.unwrap_or_default());
                    for j in 0..n {
                        let second = (pp[j] - pm[j] - mp[j] + mm[j]) / (4.0 * step * step);
                        rep.check(second, tol);
                    }
                }
            }
            rep
        })
        .collect();
    let mut rep = SuiteReport::new("GHS");
    for r in per_case {
        rep.absorb(r);
    }
    rep.finish()
}

/// Settings for the boundary-gap suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoundaryGapSettings {
    pub root_law: LawSpec,
    pub offspring_law: LawSpec,
    pub beta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub max_depth: usize,
    pub trees: usize,
}

impl Default for BoundaryGapSettings {
    fn default() -> Self {
        Self {
            root_law: DegreeLaw::regular(3).spec(),
            offspring_law: DegreeLaw::regular(2).spec(),
            beta: 0.8,
            b: 0.2,
            max_depth: 12,
            trees: 100,
        }
    }
}

/// Boundary gap: `m^{l,+} >= m^{l,f}`, both monotone in `l`, and
/// `l (m^{l,+} - m^{l,f})` below the explicit constant `sup beta / xi`.
pub fn boundary_gap_suite<M>(settings: &BoundaryGapSettings, seed: u64, root_magnetization: M) -> Result<SuiteReport>
where
    M: Fn(&RootedTree, f64, BoundaryCondition, usize) -> f64,
{
    let root = settings.root_law.build()?;
    let offspring = settings.offspring_law.build()?;
    let report = tree::boundary_gap_with(
        &root,
        &offspring,
        settings.beta,
        settings.b,
        settings.max_depth,
        settings.trees,
        &mut rng::stream(seed, &[0]),
        root_magnetization,
    )?;
    let bound = tree::boundary_gap_constant(settings.beta, settings.b);
    let mut rep = SuiteReport::new("boundary gap");
    rep.cases = report.trees;
    for row in &report.rows {
        rep.check(-row.min_gap, 1e-12);
        rep.check(row.max_scaled_gap - bound, 0.0);
    }
    rep.checks += 1;
    if report.monotonicity_violations > 0 {
        rep.failures += 1;
        rep.notes.push(format!("{} trees with non-monotone boundary sequences", report.monotonicity_violations));
    }
    let worst = report.rows.iter().map(|r| r.max_scaled_gap).fold(0.0, f64::max);
    rep.notes.push(format!("max l*gap = {worst:.6e}, bound = {bound:.6e}"));
    Ok(rep.finish())
}

/// Settings for the bracket-collapse suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BracketSettings {
    /// Degree laws `P`; the solver runs on their size-biased laws.
    pub laws: Vec<LawSpec>,
    pub beta: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub solver: SolverConfig,
    /// Slack for quantile monotonicity, in units of `sd / sqrt(N)` of the
    /// `tanh` pool.
    pub quantile_slack_sigmas: f64,
}

impl Default for BracketSettings {
    fn default() -> Self {
        Self {
            laws: vec![DegreeLaw::regular(3).spec(), DegreeLaw::power_law(2.5, 1, 10_000).expect("valid law").spec()],
            beta: 0.8,
            b: 0.2,
            solver: SolverConfig {
                pool_size: 100_000,
                max_iterations: 1000,
                tol: 1e-3,
                seed: 0,
            },
            quantile_slack_sigmas: 5.0,
        }
    }
}

/// Bracket collapse: free-start pools stay below plus-start pools under
/// the shared-randomness coupling, free quantiles are nondecreasing in the
/// iteration count, and the W1 bracket gap reaches the tolerance.
pub fn bracket_collapse_suite<S>(settings: &BracketSettings, seed: u64, step: S) -> Result<SuiteReport>
where
    S: CoupledStep + Copy,
{
    let mut rep = SuiteReport::new("bracket collapse");
    for (idx, spec) in settings.laws.iter().enumerate() {
        rep.cases += 1;
        let offspring = spec.build()?.size_biased()?;
        let cfg = SolverConfig {
            seed: rng::derive_seed(seed, &[idx as u64]),
            ..settings.solver
        };
        let result = match population::solve_with(&offspring, settings.beta, settings.b, &cfg, step) {
            Ok(r) => r,
            Err(SolveError::NotConverged(r)) => {
                rep.failures += 1;
                rep.notes.push(format!("law {idx}: not converged, gap {:.3e}", r.bracket_gap));
                *r
            }
            Err(SolveError::Invalid(e)) => return Err(e),
        };
        let sd = {
            let xs = result.population.tanh_samples();
            let m = crate::stats::mean(&xs);
            (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
        };
        let slack = (settings.quantile_slack_sigmas * sd / (cfg.pool_size as f64).sqrt()).max(ROUNDING_FLOOR);
        let mut prev: Option<&Vec<f64>> = None;
        for rec in &result.history {
            rep.check(rec.max_order_violation, ROUNDING_FLOOR);
            if let Some(p) = prev {
                for (a, b) in p.iter().zip(&rec.free_quantiles) {
                    rep.check(a - b, slack);
                }
            }
            prev = Some(&rec.free_quantiles);
        }
        rep.check(result.bracket_gap - cfg.tol, 0.0);
        rep.notes.push(format!(
            "law {idx}: {} iterations, final gap {:.3e}, quantile slack {:.2e}",
            result.iterations, result.bracket_gap, slack
        ));
    }
    Ok(rep.finish())
}

/// Everything `verify` runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifySettings {
    pub instances: usize,
    pub max_n: usize,
    pub gks_tol: f64,
    pub ghs_step: f64,
    pub ghs_tol: f64,
    pub boundary_gap: BoundaryGapSettings,
    pub bracket: BracketSettings,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            instances: 100,
            max_n: 10,
            gks_tol: 1e-12,
            ghs_step: 1e-3,
            ghs_tol: 1e-8,
            boundary_gap: BoundaryGapSettings::default(),
            bracket: BracketSettings::default(),
        }
    }
}

/// Deliberate defects for checking that the suites fail when they should.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Negate every pair correlation.
    Gks,
    /// Negate every magnetization.
    Ghs,
    /// Swap the free and plus boundary conditions.
    BoundaryGap,
    /// Swap the coupled free and plus pools after each update.
    Bracket,
}

/// Run all suites with the production implementations.
pub fn run_all(settings: &VerifySettings, seed: u64) -> Result<VerifyReport> {
    run_all_with_fault(settings, seed, None)
}

/// [`run_all`], optionally with one suite's computation replaced by a
/// broken double.
pub fn run_all_with_fault(settings: &VerifySettings, seed: u64, fault: Option<Fault>) -> Result<VerifyReport> {
    let gks = gks_suite(settings.instances, settings.max_n, settings.gks_tol, rng::derive_seed(seed, &[1]), |inst| {
        let mut s = solve_exact_with_pairs(inst)?;
        if fault == Some(Fault::Gks) {
            if let Some(p) = s.pair_correlations.as_mut() {
                p.iter_mut().for_each(|c| *c = -*c);
            }
        }
        Ok(s)
    });
    let ghs = ghs_suite(
        settings.instances,
        settings.max_n,
        settings.ghs_step,
        settings.ghs_tol,
        rng::derive_seed(seed, &[2]),
        |inst| {
            let m = crate::exact::solve_exact(inst)?.vertex_magnetizations;
            Ok(if fault == Some(Fault::Ghs) { m.iter().map(|x| -x).collect() } else { m })
        },
    );
    let gap = boundary_gap_suite(&settings.boundary_gap, rng::derive_seed(seed, &[3]), |t, beta, bc, d| {
        let bc = match (fault, bc) {
            (Some(Fault::BoundaryGap), BoundaryCondition::Free) => BoundaryCondition::Plus,
            (Some(Fault::BoundaryGap), BoundaryCondition::Plus) => BoundaryCondition::Free,
            (_, bc) => bc,
        };
        t.root_magnetization_at_depth(beta, bc, d)
    })?;
    let swap = fault == Some(Fault::Bracket);
    let bracket = bracket_collapse_suite(
        &settings.bracket,
        rng::derive_seed(seed, &[4]),
        move |lo: &FieldPopulation, hi: &FieldPopulation, law: &DegreeLaw, s: u64| {
            population::iterate_coupled(lo, hi, law, s).map(|(a, b)| if swap { (b, a) } else { (a, b) })
        },
    )?;
    let suites = vec![gks, ghs, gap, bracket];
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport { suites, passed })
}
