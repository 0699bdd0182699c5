//! Subcommand implementations.

use std::fs::File;
use std::io::BufWriter;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use ising_core::degree_laws::Family;
use ising_core::graph::{configuration_model, edge_density};
use ising_core::mcmc::{pressure_by_integration, uniform_grid, ChainSchedule, IntegrationReport};
use ising_core::population::{self, CheckpointHeader, FixedPointResult, IterationRecord, SolveError, SolverConfig};
use ising_core::thermo::{evaluate_point, PointOptions, ThermoPoint};
use ising_core::verify::{self, Fault, VerifyReport};
use ising_core::{rng, Estimate};

use crate::config::{ExperimentConfig, B_SEQUENCE};
use crate::output::{tag, OutputDir};

/// How a command ended, mapped to the process exit code by `main`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    VerificationFailed,
    NotConverged,
}

// Stream keys separating the randomness used by each command.
const KEY_GENERATE: u64 = 1;
const KEY_FIXED_POINT: u64 = 2;
const KEY_THERMO: u64 = 3;
const KEY_CONVERGENCE: u64 = 4;
const KEY_VERIFY: u64 = 5;

fn solver(cfg: &ExperimentConfig, keys: &[u64]) -> SolverConfig {
    SolverConfig {
        pool_size: cfg.pool_size,
        max_iterations: cfg.max_iterations,
        tol: cfg.tol,
        seed: rng::derive_seed(cfg.seed, keys),
    }
}

#[derive(Serialize)]
struct GraphMeta {
    n: usize,
    edges: usize,
    degree_sum: usize,
    degree_sum_even: bool,
    self_loops: usize,
    max_degree: usize,
    edge_density: f64,
    law: ising_core::LawSpec,
    edge_file: String,
}

pub fn generate(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Status> {
    let law = cfg.build_law()?;
    for (i, &n) in cfg.sizes.iter().enumerate() {
        let degrees = law.sample(&mut rng::stream(cfg.seed, &[KEY_GENERATE, i as u64, 0]), n);
        let g = configuration_model(&degrees, &mut rng::stream(cfg.seed, &[KEY_GENERATE, i as u64, 1]));
        let edge_file = format!("graph_n{n}.edges");
        out.write_text(&edge_file, |w| Ok(g.write_edge_list(w)?))?;
        let degree_sum: usize = g.degrees().iter().sum();
        let meta = GraphMeta {
            n,
            edges: g.num_edges(),
            degree_sum,
            degree_sum_even: degree_sum % 2 == 0,
            self_loops: g.self_loops(),
            max_degree: g.max_degree(),
            edge_density: edge_density(&g),
            law: cfg.law.clone(),
            edge_file: edge_file.clone(),
        };
        out.write_json(&format!("graph_n{n}.json"), &meta)?;
        println!("n={n}: {} edges -> {}", g.num_edges(), out.path(&edge_file).display());
    }
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct ScalarCheck {
    h_scalar: f64,
    pool_mean: f64,
    abs_diff: f64,
    pool_stderr: f64,
}

#[derive(Serialize)]
struct FixedPointDiagnostics {
    beta: f64,
    #[serde(rename = "B")]
    b: f64,
    converged: bool,
    iterations: usize,
    bracket_gap: f64,
    w1_residual: f64,
    tol: f64,
    pool_size: usize,
    pool_mean: Estimate,
    checkpoint: String,
    scalar_check: Option<ScalarCheck>,
    history: Vec<IterationRecord>,
}

fn write_checkpoint(
    cfg: &ExperimentConfig,
    out: &OutputDir,
    result: &FixedPointResult,
    solver_seed: u64,
    name: &str,
) -> Result<()> {
    let header = CheckpointHeader {
        beta: result.population.beta,
        b: result.population.b,
        law: cfg.law.clone(),
        iteration: result.iterations,
        seed: solver_seed,
        config_hash: Some(out.hash().to_string()),
    };
    let path = out.path(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    result.population.write_checkpoint(BufWriter::new(file), &header)?;
    Ok(())
}

fn field_list(b: f64) -> Vec<f64> {
    if b == 0.0 {
        B_SEQUENCE.to_vec()
    } else {
        vec![b]
    }
}

pub fn fixed_point(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Status> {
    let law = cfg.build_law()?;
    let offspring = law.size_biased()?;
    let mut status = Status::Ok;
    for (i, &beta) in cfg.betas.iter().enumerate() {
        for (j, &b_req) in cfg.fields.iter().enumerate() {
            anyhow::ensure!(b_req >= 0.0, "fixed-point needs B >= 0 (use the symmetry B -> -B)");
            for (k, b) in field_list(b_req).into_iter().enumerate() {
                let sc = solver(cfg, &[KEY_FIXED_POINT, i as u64, j as u64, k as u64]);
                let (result, converged) = match population::solve(&offspring, beta, b, &sc) {
                    Ok(r) => (r, true),
                    Err(SolveError::NotConverged(r)) => (*r, false),
                    Err(SolveError::Invalid(e)) => return Err(e.into()),
                };
                let stem = format!("fixed_point_beta{}_B{}", tag(beta), tag(b));
                let checkpoint = format!("{stem}.pool");
                write_checkpoint(cfg, out, &result, sc.seed, &checkpoint)?;
                let pool_mean = result.population.mean();
                let scalar_check = match law.family() {
                    Family::Regular { k } if *k >= 1 => {
                        let h = population::scalar_bethe_fixed_point(k - 1, beta, b, 1e-15);
                        Some(ScalarCheck {
                            h_scalar: h,
                            pool_mean: pool_mean.value,
                            abs_diff: (pool_mean.value - h).abs(),
                            pool_stderr: pool_mean.stderr,
                        })
                    }
                    _ => None,
                };
                let diag = FixedPointDiagnostics {
                    beta,
                    b,
                    converged,
                    iterations: result.iterations,
                    bracket_gap: result.bracket_gap,
                    w1_residual: result.w1_residual,
                    tol: sc.tol,
                    pool_size: sc.pool_size,
                    pool_mean,
                    checkpoint,
                    scalar_check,
                    history: result.history,
                };
                out.write_json(&format!("{stem}.json"), &diag)?;
                if converged {
                    println!(
                        "beta={beta} B={b}: converged in {} iterations, bracket gap {:.3e}, mean h {:.6}",
                        diag.iterations, diag.bracket_gap, pool_mean.value
                    );
                } else {
                    eprintln!(
                        "beta={beta} B={b}: NOT converged after {} iterations, bracket gap {:.3e} > tol {:.1e}, residual {:.3e}",
                        diag.iterations, diag.bracket_gap, sc.tol, diag.w1_residual
                    );
                    status = Status::NotConverged;
                }
            }
        }
    }
    Ok(status)
}

#[derive(Serialize)]
struct LimitRow {
    beta: f64,
    sequence: Vec<ThermoPoint>,
    /// Linear extrapolation in `B` through the two smallest fields.
    extrapolated: ThermoPoint,
}

#[derive(Serialize)]
struct ThermoMeta<'a> {
    law: &'a ising_core::LawSpec,
    k_max: usize,
    pool_size: usize,
    mc_samples: usize,
    tol: f64,
    step: f64,
    points: &'a [ThermoPoint],
    b_to_zero: &'a [LimitRow],
    note: &'static str,
}

fn extrapolate(seq: &[ThermoPoint]) -> ThermoPoint {
    let (p, q) = (&seq[seq.len() - 2], &seq[seq.len() - 1]);
    let lin = |a: f64, b: f64| b - q.b * (a - b) / (p.b - q.b);
    ThermoPoint {
        beta: q.beta,
        b: 0.0,
        phi: lin(p.phi, q.phi),
        phi_se: q.phi_se,
        m: lin(p.m, q.m),
        m_se: q.m_se,
        u: lin(p.u, q.u),
        u_se: q.u_se,
        chi: None,
        chi_se: None,
        c: None,
        c_se: None,
    }
}

pub fn thermo_sweep(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Status> {
    let law = cfg.build_law()?;
    let mut points = Vec::new();
    let mut limits = Vec::new();
    for (i, &beta) in cfg.betas.iter().enumerate() {
        for (j, &b) in cfg.fields.iter().enumerate() {
            let opts = |keys: &[u64], derivatives: bool| PointOptions {
                solver: solver(cfg, keys),
                samples: cfg.mc_samples,
                step: cfg.step,
                derivatives,
                ..Default::default()
            };
            let eval = |b: f64, o: &PointOptions| match evaluate_point(&law, beta, b, o) {
                Ok(p) => Ok(Some(p)),
                Err(SolveError::NotConverged(r)) => {
                    eprintln!("beta={beta} B={b}: NOT converged, bracket gap {:.3e}", r.bracket_gap);
                    Ok(None)
                }
                Err(SolveError::Invalid(e)) => Err(anyhow::Error::from(e)),
            };
            if b == 0.0 {
                let mut seq = Vec::new();
                for (k, bk) in B_SEQUENCE.iter().enumerate() {
                    match eval(*bk, &opts(&[KEY_THERMO, i as u64, j as u64, k as u64], false))? {
                        Some(p) => seq.push(p),
                        None => return Ok(Status::NotConverged),
                    }
                }
                let extrapolated = extrapolate(&seq);
                points.push(extrapolated.clone());
                limits.push(LimitRow {
                    beta,
                    sequence: seq,
                    extrapolated,
                });
            } else {
                match eval(b, &opts(&[KEY_THERMO, i as u64, j as u64], cfg.derivatives))? {
                    Some(p) => points.push(p),
                    None => return Ok(Status::NotConverged),
                }
            }
            let p = points.last().expect("just pushed");
            println!("beta={} B={}: phi={:.6} M={:.6} U={:.6}", p.beta, p.b, p.phi, p.m, p.u);
        }
    }
    let rows: Vec<Vec<String>> = points.iter().map(ThermoPoint::csv_record).collect();
    let csv = out.write_csv("thermo.csv", &ThermoPoint::CSV_HEADER, &rows)?;
    out.write_json(
        "thermo.json",
        &ThermoMeta {
            law: &cfg.law,
            k_max: law.k_max(),
            pool_size: cfg.pool_size,
            mc_samples: cfg.mc_samples,
            tol: cfg.tol,
            step: cfg.step,
            points: &points,
            b_to_zero: &limits,
            note: "C is -beta^2 dU/dbeta of the limiting U; convergence of C_n to it is conjectural",
        },
    )?;
    println!("wrote {}", csv.display());
    Ok(Status::Ok)
}

#[derive(Serialize)]
struct ConvergenceRun {
    n: usize,
    replica: usize,
    report: IntegrationReport,
}

#[derive(Serialize)]
struct ConvergenceSummary {
    beta: f64,
    #[serde(rename = "B")]
    b: f64,
    phi: f64,
    phi_se: f64,
    n: usize,
    mean_psi: f64,
    spread: f64,
    abs_error: f64,
}

pub fn convergence(cfg: &ExperimentConfig, out: &OutputDir) -> Result<Status> {
    let law = cfg.build_law()?;
    let schedule = ChainSchedule {
        sweeps: cfg.sweeps,
        burn_in: cfg.burn_in,
    };
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    let mut runs = Vec::new();
    for (i, &beta) in cfg.betas.iter().enumerate() {
        for (j, &b) in cfg.fields.iter().enumerate() {
            anyhow::ensure!(b > 0.0, "convergence runs need B > 0");
            let opts = PointOptions {
                solver: solver(cfg, &[KEY_CONVERGENCE, i as u64, j as u64]),
                samples: cfg.mc_samples,
                derivatives: false,
                ..Default::default()
            };
            let phi = match evaluate_point(&law, beta, b, &opts) {
                Ok(p) => p,
                Err(SolveError::NotConverged(r)) => {
                    eprintln!("beta={beta} B={b}: NOT converged, bracket gap {:.3e}", r.bracket_gap);
                    return Ok(Status::NotConverged);
                }
                Err(SolveError::Invalid(e)) => return Err(e.into()),
            };
            let grid = uniform_grid(beta, cfg.beta_step);
            for (k, &n) in cfg.sizes.iter().enumerate() {
                let reports: Vec<IntegrationReport> = (0..cfg.replicas)
                    .into_par_iter()
                    .map(|r| {
                        let keys = [KEY_CONVERGENCE, i as u64, j as u64, k as u64, r as u64];
                        let degrees = law.sample(&mut rng::stream(cfg.seed, &[&keys[..], &[0]].concat()), n);
                        let g = configuration_model(&degrees, &mut rng::stream(cfg.seed, &[&keys[..], &[1]].concat()));
                        pressure_by_integration(&g, b, &grid, schedule, &mut rng::stream(cfg.seed, &[&keys[..], &[2]].concat()))
                    })
                    .collect::<ising_core::Result<_>>()?;
                let psi: Vec<f64> = reports.iter().map(|r| r.psi_n).collect();
                let mean = psi.iter().sum::<f64>() / psi.len() as f64;
                let spread = if psi.len() > 1 {
                    (psi.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (psi.len() - 1) as f64).sqrt()
                } else {
                    0.0
                };
                for (r, rep) in reports.into_iter().enumerate() {
                    rows.push(vec![
                        format!("{beta}"),
                        format!("{b}"),
                        format!("{n}"),
                        format!("{r}"),
                        format!("{:.17e}", rep.psi_n),
                        format!("{:.17e}", rep.stderr),
                        format!("{:.17e}", rep.quadrature_bias),
                        format!("{:.17e}", phi.phi),
                        format!("{:.17e}", rep.psi_n - phi.phi),
                    ]);
                    runs.push(ConvergenceRun {
                        n,
                        replica: r,
                        report: rep,
                    });
                }
                println!("beta={beta} B={b} n={n}: mean psi_n - phi = {:+.3e}, spread {spread:.3e}", mean - phi.phi);
                summaries.push(ConvergenceSummary {
                    beta,
                    b,
                    phi: phi.phi,
                    phi_se: phi.phi_se,
                    n,
                    mean_psi: mean,
                    spread,
                    abs_error: (mean - phi.phi).abs(),
                });
            }
        }
    }
    out.write_csv(
        "convergence.csv",
        &["beta", "B", "n", "replica", "psi_n", "psi_se", "quadrature_bias", "phi", "psi_minus_phi"],
        &rows,
    )?;
    #[derive(Serialize)]
    struct Body<'a> {
        summary: &'a [ConvergenceSummary],
        runs: &'a [ConvergenceRun],
    }
    out.write_json(
        "convergence.json",
        &Body {
            summary: &summaries,
            runs: &runs,
        },
    )?;
    Ok(Status::Ok)
}

pub fn run_verify(cfg: &ExperimentConfig, out: &OutputDir, fault: Option<Fault>) -> Result<Status> {
    let report: VerifyReport = verify::run_all_with_fault(&cfg.verify, rng::derive_seed(cfg.seed, &[KEY_VERIFY]), fault)?;
    for s in &report.suites {
        println!(
            "[{}] {}: {} cases, {}/{} checks passed, worst violation {:.2e}",
            if s.passed { "PASS" } else { "FAIL" },
            s.name,
            s.cases,
            s.checks - s.failures,
            s.checks,
            s.worst_violation
        );
        for note in &s.notes {
            println!("    {note}");
        }
    }
    out.write_json("verify.json", &report)?;
    Ok(if report.passed { Status::Ok } else { Status::VerificationFailed })
}
