//! Degree distributions on the nonnegative integers.
//!
//! A [`DegreeLaw`] is a truncated probability mass function together with a
//! family tag. Its size-biased law `rho_k = (k+1) P_{k+1} / mean(P)` is the
//! offspring law of non-root vertices in the local tree limit.

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation level for power laws.
pub const DEFAULT_POWER_LAW_KMAX: usize = 1_000_000;

/// Which generator produced a law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum Family {
    PowerLaw { tau: f64, k_min: usize },
    Poisson { lambda: f64 },
    Regular { k: usize },
    Explicit,
}

/// Serialized description of a degree law: `{family, params, k_max}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawSpec {
    pub family: String,
    #[serde(default)]
    pub params: serde_json::Value,
    #[serde(default)]
    pub k_max: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeLaw {
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    family: Family,
    mean: f64,
    /// Tail constant `c` with `sum_{i>=k} P_i <= c k^{-(tau-1)}`, power laws only.
    tail_constant: Option<f64>,
    /// Mass removed by truncation before renormalization.
    truncated_mass: f64,
}

/// Result of [`DegreeLaw::verify_strongly_finite_mean`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailBound {
    /// Smallest `c` with `tail_sum(k) <= c k^{-(tau-1)}` for all `k >= 1`.
    pub c: f64,
    /// Degree at which the supremum is attained.
    pub argmax_k: usize,
}

impl DegreeLaw {
    /// Build a law from nonnegative weights, renormalizing to unit mass.
    pub fn from_weights(weights: Vec<f64>, family: Family) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidLaw("empty pmf".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidLaw(format!("invalid weight {w}")));
        }
        let total: f64 = crate::stats::pairwise_sum(&weights);
        if total <= 0.0 {
            return Err(Error::InvalidLaw("pmf has zero total mass".into()));
        }
        let mut pmf: Vec<f64> = weights.into_iter().map(|w| w / total).collect();
        while pmf.len() > 1 && *pmf.last().unwrap() == 0.0 {
            pmf.pop();
        }
        Ok(Self::assemble(pmf, family, None, 0.0))
    }

    fn assemble(pmf: Vec<f64>, family: Family, tail_constant: Option<f64>, truncated_mass: f64) -> Self {
        let mean = pmf
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .collect::<Vec<_>>();
        let mean = crate::stats::pairwise_sum(&mean);
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Self {
            pmf,
            cdf,
            family,
            mean,
            tail_constant,
            truncated_mass,
        }
    }

    /// Explicit pmf indexed by degree.
    pub fn explicit(pmf: Vec<f64>) -> Result<Self> {
        Self::from_weights(pmf, Family::Explicit)
    }

    /// Point mass at `k`.
    pub fn regular(k: usize) -> Self {
        let mut pmf = vec![0.0; k + 1];
        pmf[k] = 1.0;
        Self::assemble(pmf, Family::Regular { k }, None, 0.0)
    }

    /// Poisson(lambda) truncated at `k_max` and renormalized.
    pub fn poisson(lambda: f64, k_max: usize) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidLaw(format!("poisson rate {lambda}")));
        }
        if lambda == 0.0 {
            return Ok(Self::assemble(vec![1.0], Family::Poisson { lambda }, None, 0.0));
        }
        let mut log_fact = 0.0;
        let pmf: Vec<f64> = (0..=k_max)
            .map(|k| {
                if k > 0 {
                    log_fact += (k as f64).ln();
                }
                (k as f64 * lambda.ln() - lambda - log_fact).exp()
            })
            .collect();
        let kept: f64 = crate::stats::pairwise_sum(&pmf);
        let mut law = Self::from_weights(pmf, Family::Poisson { lambda })?;
        law.truncated_mass = (1.0 - kept).max(0.0);
        Ok(law)
    }

    /// Default Poisson truncation: far enough that the dropped tail is below 1e-16.
    pub fn poisson_default_kmax(lambda: f64) -> usize {
        (lambda + 12.0 * lambda.sqrt() + 40.0).ceil() as usize
    }

    /// Pure power law `P_k ∝ k^{-tau}` on `k_min..=k_max`.
    pub fn power_law(tau: f64, k_min: usize, k_max: usize) -> Result<Self> {
        if !(tau > 2.0) {
            return Err(Error::InvalidLaw(format!("power-law exponent tau = {tau} must exceed 2")));
        }
        if k_min == 0 || k_max < k_min {
            return Err(Error::InvalidLaw(format!("power-law support [{k_min}, {k_max}]")));
        }
        let mut weights = vec![0.0; k_max + 1];
        for (k, w) in weights.iter_mut().enumerate().skip(k_min) {
            *w = (k as f64).powf(-tau);
        }
        let norm = 1.0 / crate::stats::pairwise_sum(&weights);
        // Untruncated tail beyond k_max, estimated by the integral bound.
        let dropped = norm * (k_max as f64 + 0.5).powf(1.0 - tau) / (tau - 1.0);
        // For k >= k_min: tail(k) <= C (k^-tau + k^{1-tau}/(tau-1)) <= C k^{1-tau} (1/k_min + 1/(tau-1)).
        // For 1 <= k < k_min the tail is 1, which needs c >= (k_min-1)^{tau-1}.
        let c = (norm * (1.0 / k_min as f64 + 1.0 / (tau - 1.0)))
            .max(((k_min - 1) as f64).powf(tau - 1.0));
        let mut law = Self::from_weights(weights, Family::PowerLaw { tau, k_min })?;
        law.tail_constant = Some(c);
        law.truncated_mass = dropped;
        Ok(law)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// Probability of degree `k` (zero outside the support).
    pub fn p(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Largest degree with positive mass.
    pub fn k_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn tail_constant(&self) -> Option<f64> {
        self.tail_constant
    }

    pub fn truncated_mass(&self) -> f64 {
        self.truncated_mass
    }

    /// Second factorial moment over the mean, `sum k(k-1) P_k / mean`, which is
    /// the mean of the size-biased law.
    pub fn size_biased_mean(&self) -> Result<f64> {
        if self.mean <= 0.0 {
            return Err(Error::ZeroMean);
        }
        let terms: Vec<f64> = self
            .pmf
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * (k as f64 - 1.0).max(0.0) * p)
            .collect();
        Ok(crate::stats::pairwise_sum(&terms) / self.mean)
    }

    /// The size-biased law `rho_k = (k+1) P_{k+1} / mean`.
    pub fn size_biased(&self) -> Result<DegreeLaw> {
        if self.mean <= 0.0 {
            return Err(Error::ZeroMean);
        }
        let rho: Vec<f64> = (0..self.pmf.len() - 1)
            .map(|k| (k + 1) as f64 * self.pmf[k + 1] / self.mean)
            .collect();
        let family = match self.family {
            Family::Regular { k } => Family::Regular { k: k - 1 },
            _ => Family::Explicit,
        };
        DegreeLaw::from_weights(rho, family)
    }

    /// `sum_{i >= k} P_i`.
    pub fn tail_sum(&self, k: usize) -> f64 {
        if k == 0 {
            return 1.0;
        }
        if k >= self.pmf.len() {
            return 0.0;
        }
        crate::stats::pairwise_sum(&self.pmf[k..])
    }

    /// All tail sums computed by a backward pass (more accurate than `1 - cdf`).
    pub fn tail_sums(&self) -> Vec<f64> {
        let mut tails = vec![0.0; self.pmf.len() + 1];
        for k in (0..self.pmf.len()).rev() {
            tails[k] = tails[k + 1] + self.pmf[k];
        }
        tails[0] = 1.0;
        tails
    }

    /// Smallest `c` such that the tail sums obey `sum_{i>=k} P_i <= c k^{-(tau-1)}`
    /// for every `k >= 1` in the support.
    pub fn verify_strongly_finite_mean(&self, tau: f64) -> Result<TailBound> {
        if !(tau > 2.0) {
            return Err(Error::InvalidParameter(format!("tau = {tau} must exceed 2")));
        }
        let tails = self.tail_sums();
        let mut best = TailBound { c: 0.0, argmax_k: 1 };
        for (k, &t) in tails.iter().enumerate().take(self.pmf.len()).skip(1) {
            let c = t * (k as f64).powf(tau - 1.0);
            if c > best.c {
                best = TailBound { c, argmax_k: k };
            }
        }
        Ok(best)
    }

    /// Inverse-CDF sample of one degree.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.pmf.len() - 1)
    }

    /// `n` i.i.d. samples.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<usize> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    /// Total-variation distance to an empirical histogram of degrees.
    pub fn tv_distance_to_samples(&self, samples: &[usize]) -> f64 {
        let len = self.pmf.len().max(samples.iter().copied().max().map_or(0, |m| m + 1));
        let mut counts = vec![0usize; len];
        for &s in samples {
            counts[s] += 1;
        }
        let n = samples.len() as f64;
        0.5 * counts
            .iter()
            .enumerate()
            .map(|(k, &c)| (c as f64 / n - self.p(k)).abs())
            .sum::<f64>()
    }

    /// Serializable description. Explicit laws carry their pmf in `params`.
    pub fn spec(&self) -> LawSpec {
        let (family, params) = match &self.family {
            Family::PowerLaw { tau, k_min } => ("power_law", serde_json::json!({"tau": tau, "k_min": k_min})),
            Family::Poisson { lambda } => ("poisson", serde_json::json!({"lambda": lambda})),
            Family::Regular { k } => ("regular", serde_json::json!({"k": k})),
            Family::Explicit => ("explicit", serde_json::json!({"pmf": self.pmf})),
        };
        LawSpec {
            family: family.to_string(),
            params,
            k_max: Some(self.k_max()),
        }
    }

    /// Write the pmf as CSV rows `k,p_k`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["k", "p_k"]).map_err(csv_err)?;
        for (k, p) in self.pmf.iter().enumerate() {
            wtr.write_record([k.to_string(), format!("{p:e}")]).map_err(csv_err)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Read an explicit pmf from CSV rows `k,p_k` (header optional, unlisted degrees are 0).
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(r);
        let mut weights: Vec<f64> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            if rec.len() < 2 {
                return Err(Error::Parse(format!("line {}: expected k,p_k", line + 1)));
            }
            let k: usize = match rec[0].parse() {
                Ok(k) => k,
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::Parse(format!("line {}: {e}", line + 1))),
            };
            let p: f64 = rec[1]
                .parse()
                .map_err(|e| Error::Parse(format!("line {}: {e}", line + 1)))?;
            if weights.len() <= k {
                weights.resize(k + 1, 0.0);
            }
            weights[k] = p;
        }
        Self::explicit(weights)
    }
}

impl LawSpec {
    fn param_f64(&self, name: &str) -> Result<f64> {
        self.params
            .get(name)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| Error::InvalidLaw(format!("{} law needs numeric param '{name}'", self.family)))
    }

    fn param_usize(&self, name: &str) -> Result<Option<usize>> {
        match self.params.get(name) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|x| Some(x as usize))
                .ok_or_else(|| Error::InvalidLaw(format!("param '{name}' must be a nonnegative integer"))),
        }
    }

    /// Build the law this spec describes.
    pub fn build(&self) -> Result<DegreeLaw> {
        match self.family.as_str() {
            "power_law" => {
                let tau = self.param_f64("tau")?;
                let k_min = self.param_usize("k_min")?.unwrap_or(1);
                DegreeLaw::power_law(tau, k_min, self.k_max.unwrap_or(DEFAULT_POWER_LAW_KMAX))
            }
            "poisson" => {
                let lambda = self.param_f64("lambda")?;
                DegreeLaw::poisson(lambda, self.k_max.unwrap_or_else(|| DegreeLaw::poisson_default_kmax(lambda)))
            }
            "regular" => {
                let k = self
                    .param_usize("k")?
                    .ok_or_else(|| Error::InvalidLaw("regular law needs param 'k'".into()))?;
                Ok(DegreeLaw::regular(k))
            }
            "explicit" => {
                let pmf: Vec<f64> = self
                    .params
                    .get("pmf")
                    .and_then(|v| serde_json::from_value(v.clone()).ok())
                    .ok_or_else(|| Error::InvalidLaw("explicit law needs param 'pmf' (array)".into()))?;
                DegreeLaw::explicit(pmf)
            }
            other => Err(Error::InvalidLaw(format!("unknown family '{other}'"))),
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Load a law from a `.json` spec or a `.csv` explicit pmf.
    pub fn load_law(path: &Path) -> Result<DegreeLaw> {
        let file = std::fs::File::open(path)?;
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
            DegreeLaw::read_csv(file)
        } else {
            let spec: LawSpec = serde_json::from_reader(file).map_err(|e| Error::Parse(e.to_string()))?;
            spec.build()
        }
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}
