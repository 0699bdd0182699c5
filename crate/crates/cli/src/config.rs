//! Experiment configuration: a JSON file, then command-line overrides.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use ising_core::verify::VerifySettings;
use ising_core::{DegreeLaw, LawSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Degree law `P` of the graphs; cavity pools use its size-biased law.
    pub law: LawSpec,
    /// Graph sizes for `generate` and `convergence`.
    pub sizes: Vec<usize>,
    pub betas: Vec<f64>,
    /// External fields `B`. `0` means the limit `B -> 0` taken along
    /// [`B_SEQUENCE`].
    pub fields: Vec<f64>,
    pub pool_size: usize,
    pub max_iterations: usize,
    pub tol: f64,
    pub mc_samples: usize,
    /// Finite-difference step for `chi` and `C`.
    pub step: f64,
    /// Compute `chi` and `C` in `thermo-sweep`.
    pub derivatives: bool,
    pub sweeps: usize,
    pub burn_in: usize,
    pub beta_step: f64,
    pub replicas: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub verify: VerifySettings,
}

/// Fields used for `B = 0` requests, in the order they are evaluated.
pub const B_SEQUENCE: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            law: DegreeLaw::regular(3).spec(),
            sizes: vec![1000],
            betas: vec![0.8],
            fields: vec![0.2],
            pool_size: 100_000,
            max_iterations: 1000,
            tol: 1e-3,
            mc_samples: 1_000_000,
            step: 1e-3,
            derivatives: true,
            sweeps: 2000,
            burn_in: 1000,
            beta_step: 0.05,
            replicas: 5,
            seed: 1,
            out: PathBuf::from("out"),
            verify: VerifySettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn build_law(&self) -> Result<DegreeLaw> {
        self.law.build().context("building degree law")
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let bytes = serde_json::to_vec(&canonical).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        anyhow::ensure!(self.betas.iter().all(|b| b.is_finite() && *b >= 0.0), "betas must be finite and >= 0");
        anyhow::ensure!(self.fields.iter().all(|b| b.is_finite()), "fields must be finite");
        anyhow::ensure!(self.step > 0.0, "step must be positive");
        anyhow::ensure!(self.beta_step > 0.0, "beta_step must be positive");
        anyhow::ensure!(self.replicas >= 1, "replicas must be >= 1");
        anyhow::ensure!(self.burn_in < self.sweeps, "burn_in must be below sweeps");
        Ok(())
    }
}
