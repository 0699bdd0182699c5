use ising_core::exact::{solve_exact, IsingInstance};
use ising_core::graph::edge_density;
use ising_core::mcmc::{estimate_edge_energy, pressure_by_integration, uniform_grid, ChainSchedule};
use ising_core::population::{self, w1_distance, SolverConfig};
use ising_core::stats::Welford;
use ising_core::thermo::{evaluate_point, PointOptions, ThermoPoint, ThermoSampler};
use ising_core::{rng, DegreeLaw, MultiGraph};

fn options(pool_size: usize, tol: f64, seed: u64, samples: usize) -> PointOptions {
    PointOptions {
        solver: SolverConfig {
            pool_size,
            max_iterations: 200_000,
            tol,
            seed,
        },
        samples,
        ..Default::default()
    }
}

fn point(law: &DegreeLaw, beta: f64, b: f64, opts: &PointOptions) -> ThermoPoint {
    evaluate_point(law, beta, b, opts).unwrap_or_else(|e| panic!("beta={beta} B={b}: {e}"))
}

#[test]
fn chain_specific_heat() {
    let law = DegreeLaw::regular(2);
    let opts = options(1000, 1e-13, 1, 100);
    for beta in [0.3, 0.7, 1.2] {
        let p = point(&law, beta, 1e-6, &opts);
        let expected = (beta / beta.cosh()).powi(2);
        assert!((p.c.unwrap() - expected).abs() < 1e-3, "beta={beta}: C={:?} vs {expected}", p.c);
        assert!((p.u + beta.tanh()).abs() < 1e-6);
    }
}

#[test]
fn zero_beta_susceptibility_and_limits() {
    let law = DegreeLaw::regular(3);
    let opts = options(1000, 1e-13, 2, 100);
    let b: f64 = 0.4;
    let p = point(&law, 0.0, b, &opts);
    assert!((p.chi.unwrap() - (1.0 / b.cosh()).powi(2)).abs() < 1e-6);
    assert_eq!(p.c, Some(0.0));
    let saturated = point(&law, 0.5, 20.0, &opts);
    assert!((saturated.m - 1.0).abs() < 1e-12);
    let cold = point(&law, 30.0, 0.1, &opts);
    assert!((cold.u + 1.5).abs() < 1e-12, "U = {}", cold.u);
}

#[test]
fn pressure_is_monotone_and_right_continuous() {
    let law = DegreeLaw::poisson(2.0, DegreeLaw::poisson_default_kmax(2.0)).unwrap();
    let mut opts = options(5000, 1e-4, 3, 50_000);
    opts.derivatives = false;
    let phi = |beta: f64, b: f64| point(&law, beta, b, &opts).phi;
    let in_b: Vec<f64> = [0.1, 0.3, 0.6, 1.0].iter().map(|&b| phi(0.5, b)).collect();
    assert!(in_b.windows(2).all(|w| w[1] > w[0]), "{in_b:?}");
    let in_beta: Vec<f64> = [0.0, 0.3, 0.6, 1.0].iter().map(|&beta| phi(beta, 0.2)).collect();
    assert!(in_beta.windows(2).all(|w| w[1] > w[0]), "{in_beta:?}");
    assert!((phi(1e-9, 0.2) - phi(0.0, 0.2)).abs() < 1e-6);
}

fn f_ell_gap(law: &DegreeLaw, beta: f64, b: f64, seed: u64) -> (f64, f64) {
    let cfg = SolverConfig {
        pool_size: 20_000,
        max_iterations: 10_000,
        tol: 1e-5,
        seed,
    };
    let pool = population::solve(&law.size_biased().unwrap(), beta, b, &cfg).unwrap().population;
    let sampler = ThermoSampler::new(&pool.samples, law, 200_000, &mut rng::from_seed(seed)).unwrap();
    let phi = sampler.pressure(beta, b);
    let f = sampler.mean_f_ell(beta, b).unwrap();
    let correction = 0.5 * sampler.mean_degree() * beta.cosh().ln();
    (phi.value - f.value - correction, 3.0 * (phi.stderr + f.stderr) + 1e-10)
}

#[test]
fn f_ell_representation_regular() {
    let law = DegreeLaw::regular(3);
    for (beta, b) in [(0.2, 0.1), (0.8, 0.2), (1.5, 0.05)] {
        let (gap, _) = f_ell_gap(&law, beta, b, 4);
        assert!(gap.abs() < 1e-9, "beta={beta} B={b}: gap {gap:e}");
    }
}

#[test]
fn f_ell_representation_random_degrees() {
    let law = DegreeLaw::explicit(vec![0.0, 0.0, 0.3, 0.4, 0.3]).unwrap();
    for (beta, b) in [(0.3, 0.2), (0.9, 0.1)] {
        let (gap, tol) = f_ell_gap(&law, beta, b, 5);
        assert!(gap.abs() < tol, "beta={beta} B={b}: gap {gap:e} tol {tol:e}");
    }
}

#[test]
fn solver_seed_dependence_shrinks_with_pool_size() {
    let law = DegreeLaw::poisson(3.0, DegreeLaw::poisson_default_kmax(3.0)).unwrap().size_biased().unwrap();
    for n in [1_000, 10_000, 100_000] {
        let solve = |seed| {
            let cfg = SolverConfig {
                pool_size: n,
                max_iterations: 1000,
                tol: 1e-6,
                seed,
            };
            population::solve(&law, 0.5, 0.3, &cfg).unwrap().population
        };
        let (a, b) = (solve(10), solve(11));
        let sd = a.tanh_samples().into_iter().collect::<Welford>().variance().sqrt();
        let d = w1_distance(&a.tanh_samples(), &b.tanh_samples()).unwrap();
        assert!(d <= 5.0 * sd / (n as f64).sqrt(), "N={n}: W1 {d:e}, sd {sd:e}");
    }
}

fn small_graph() -> MultiGraph {
    MultiGraph::new(
        8,
        vec![(0, 1), (1, 2), (2, 3), (3, 0), (4, 5), (5, 6), (6, 7), (7, 4), (0, 4), (2, 6), (1, 1)],
    )
    .unwrap()
}

#[test]
fn integrated_pressure_matches_enumeration() {
    let g = small_graph();
    let (beta, b) = (0.6, 0.3);
    let exact = solve_exact(&IsingInstance::uniform(g.clone(), beta, b).unwrap()).unwrap().pressure;
    let schedule = ChainSchedule {
        sweeps: 20_000,
        burn_in: 1000,
    };
    let report = pressure_by_integration(&g, b, &uniform_grid(beta, 0.02), schedule, &mut rng::from_seed(6)).unwrap();
    let tol = 5.0 * report.stderr + report.quadrature_bias + 1e-3;
    assert!((report.psi_n - exact).abs() < tol, "{} vs {exact} (tol {tol:e})", report.psi_n);
}

#[test]
fn edge_energy_at_zero_beta_and_bounds() {
    let g = MultiGraph::new(6, vec![(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (0, 5), (1, 4)]).unwrap();
    let b: f64 = 0.5;
    let est = estimate_edge_energy(&g, 0.0, b, 20_000, 1000, &mut rng::from_seed(7)).unwrap();
    let expected = edge_density(&g) * b.tanh().powi(2);
    assert!((est.e.value - expected).abs() < 5.0 * est.e.stderr + 1e-3, "{:?} vs {expected}", est.e);
    for beta in [0.0, 0.5, 2.0] {
        let est = estimate_edge_energy(&small_graph(), beta, -0.7, 2000, 500, &mut rng::from_seed(8)).unwrap();
        assert!(est.e.value.abs() <= edge_density(&small_graph()) + 1e-12);
    }
}

#[test]
fn edge_energy_increases_with_beta() {
    let g = small_graph();
    let e: Vec<_> = [0.1, 0.4, 1.0]
        .iter()
        .map(|&beta| estimate_edge_energy(&g, beta, 0.2, 20_000, 1000, &mut rng::from_seed(9)).unwrap().e)
        .collect();
    for w in e.windows(2) {
        assert!(w[1].value > w[0].value - 3.0 * (w[0].stderr + w[1].stderr), "{e:?}");
    }
    for (beta, est) in [0.1, 0.4, 1.0].iter().zip(&e) {
        let exact = solve_exact(&IsingInstance::uniform(g.clone(), *beta, 0.2).unwrap()).unwrap().edge_energy();
        assert!((est.value - exact).abs() < 5.0 * est.stderr + 1e-3, "beta={beta}: {} vs {exact}", est.value);
    }
}
