//! Synthetic correlated-vote data generation.
//!
//! Binary correctness streams with controlled pairwise correlation and
//! context dependence: a Gaussian copula is first calibrated so that the
//! thresholded binaries reproduce a target correlation matrix, then each
//! arm's latent score mixes a context signal with correlated noise and is
//! thresholded at its target marginal.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::correlation::{make_psd, mixing_factor};
use crate::error::{Error, Result};
use crate::harness::dataset::{ArmHeaderSpec, DatasetHeader, DatasetRecord};
use crate::linalg::Matrix;
use crate::numeric::{bivariate_normal_orthant, inv_std_normal_cdf};
use crate::rng::{self, purpose};

/// Everything that defines one synthetic stream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Number of rounds T.
    pub rounds: usize,
    /// Number of arms K.
    pub arms: usize,
    /// Context dimension d.
    pub dim: usize,
    /// Target per-arm marginal correctness probabilities, each in (0, 1).
    pub mu_targets: Vec<f64>,
    /// Target K x K correlation of the binary correctness outcomes.
    pub c_target: Matrix,
    /// Context mixing weight: how much of each arm's weight vector is shared.
    pub alpha_ctx: f64,
    /// Latent noise scale.
    pub sigma: f64,
    pub seed: u64,
    /// Divide the latent score by sqrt(|theta|^2 + sigma^2) before
    /// thresholding so empirical marginals match the targets exactly. Off by
    /// default: the raw latent construction intentionally reproduces the
    /// targets only approximately.
    pub standardize_latent: bool,
    /// Label alphabet size for emitted vote files.
    pub num_labels: u32,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.arms == 0 || self.dim == 0 || self.rounds == 0 {
            return Err(Error::InvalidConfig(
                "rounds, arms, and dim must all be positive".into(),
            ));
        }
        if self.mu_targets.len() != self.arms {
            return Err(Error::DimensionMismatch {
                what: "mu_targets".into(),
                expected: self.arms,
                got: self.mu_targets.len(),
            });
        }
        if self.mu_targets.iter().any(|&m| !m.is_finite() || m <= 0.0 || m >= 1.0) {
            return Err(Error::InvalidConfig(
                "target marginals must lie strictly inside (0, 1)".into(),
            ));
        }
        if self.c_target.size() != self.arms {
            return Err(Error::DimensionMismatch {
                what: "c_target".into(),
                expected: self.arms,
                got: self.c_target.size(),
            });
        }
        for i in 0..self.arms {
            if (self.c_target.at(i, i) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig("c_target diagonal must be 1".into()));
            }
            for j in 0..self.arms {
                let v = self.c_target.at(i, j);
                if !v.is_finite() || v.abs() > 1.0 + 1e-12 {
                    return Err(Error::InvalidConfig(format!(
                        "c_target({i},{j}) = {v} outside [-1, 1]"
                    )));
                }
                if (v - self.c_target.at(j, i)).abs() > 1e-12 {
                    return Err(Error::InvalidConfig("c_target must be symmetric".into()));
                }
            }
        }
        if !(0.0..=1.0).contains(&self.alpha_ctx) {
            return Err(Error::InvalidConfig("alpha_ctx must lie in [0, 1]".into()));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(Error::InvalidConfig("sigma must be positive".into()));
        }
        if self.num_labels < 2 {
            return Err(Error::InvalidConfig("need at least 2 labels".into()));
        }
        Ok(())
    }
}

/// Uniform off-diagonal correlation matrix with the given gamma.
pub fn uniform_correlation(k: usize, gamma: f64) -> Matrix {
    let mut c = Matrix::identity(k);
    for i in 0..k {
        for j in 0..k {
            if i != j {
                *c.at_mut(i, j) = gamma;
            }
        }
    }
    c
}

/// Named cost/accuracy preset for a pool of annotators: per-arm currency
/// cost per million input tokens and mean accuracy.
pub struct Preset {
    pub names: Vec<String>,
    /// Currency per million tokens.
    pub cost_per_mtok: Vec<f64>,
    pub mu: Vec<f64>,
}

/// The seven-arm benchmark pool used by the sensitivity studies.
pub fn mmlu_preset() -> Preset {
    Preset {
        names: vec![
            "llama-3.1-8b".into(),
            "o3-mini".into(),
            "llama-3.3-70b".into(),
            "gpt-4o".into(),
            "claude-3-7-sonnet".into(),
            "o1-mini".into(),
            "claude-3-5-haiku".into(),
        ],
        cost_per_mtok: vec![0.05, 1.1, 0.59, 2.5, 3.0, 1.1, 0.8],
        mu: vec![0.6801, 0.8482, 0.8170, 0.8358, 0.8565, 0.8592, 0.6409],
    }
}

/// Correlation of the thresholded binaries 1{Z > Phi^{-1}(1 - mu)} under a
/// bivariate normal with latent correlation rho.
pub fn binary_correlation(mu_i: f64, mu_j: f64, rho: f64) -> f64 {
    let a = inv_std_normal_cdf(1.0 - mu_i);
    let b = inv_std_normal_cdf(1.0 - mu_j);
    let p11 = bivariate_normal_orthant(a, b, rho);
    (p11 - mu_i * mu_j) / (mu_i * (1.0 - mu_i) * mu_j * (1.0 - mu_j)).sqrt()
}

/// Attainable binary-correlation interval for a pair of marginals
/// (Frechet bounds on the joint success probability).
pub fn attainable_correlation(mu_i: f64, mu_j: f64) -> (f64, f64) {
    let denom = (mu_i * (1.0 - mu_i) * mu_j * (1.0 - mu_j)).sqrt();
    let lo = ((mu_i + mu_j - 1.0).max(0.0) - mu_i * mu_j) / denom;
    let hi = (mu_i.min(mu_j) - mu_i * mu_j) / denom;
    (lo, hi)
}

const RHO_EDGE: f64 = 1.0 - 1e-9;

/// Solve for the latent correlation whose thresholded-binary correlation
/// equals the target, by bisection to 1e-4 on the correlation scale.
pub fn calibrate_pair(mu_i: f64, mu_j: f64, target: f64, i: usize, j: usize) -> Result<f64> {
    let (lo_bound, hi_bound) = attainable_correlation(mu_i, mu_j);
    if target < lo_bound - 1e-9 || target > hi_bound + 1e-9 {
        return Err(Error::UnattainableCorrelation {
            i,
            j,
            target,
            lo: lo_bound,
            hi: hi_bound,
        });
    }
    let f = |rho: f64| binary_correlation(mu_i, mu_j, rho);
    let mut lo = -RHO_EDGE;
    let mut hi = RHO_EDGE;
    let f_lo = f(lo);
    let f_hi = f(hi);
    if target <= f_lo {
        return Ok(lo);
    }
    if target >= f_hi {
        return Ok(hi);
    }
    let mut mid = 0.0;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let val = f(mid);
        if (val - target).abs() <= 1e-4 {
            return Ok(mid);
        }
        if val < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(mid)
}

/// Latent Gaussian correlation matrix reproducing the target binary
/// correlations after thresholding, projected to PSD.
pub fn calibrate_copula(mu_targets: &[f64], c_target: &Matrix) -> Result<Matrix> {
    let k = mu_targets.len();
    let mut r = Matrix::identity(k);
    for i in 0..k {
        for j in i + 1..k {
            let rho = calibrate_pair(mu_targets[i], mu_targets[j], c_target.at(i, j), i, j)?;
            *r.at_mut(i, j) = rho;
            *r.at_mut(j, i) = rho;
        }
    }
    make_psd(&r)
}

/// A generated stream: per-round contexts and per-arm binary correctness.
#[derive(Clone, Debug)]
pub struct SyntheticDataset {
    pub contexts: Vec<Vec<f64>>,
    /// `rewards[t][a]` = 1 when arm a is correct on round t.
    pub rewards: Vec<Vec<u8>>,
}

/// Draw the per-arm weight vectors: a shared component mixed with a unique
/// one, alpha_ctx controlling the shared share.
pub fn draw_weights(config: &SyntheticConfig) -> Vec<Vec<f64>> {
    let mut r = rng::stream(config.seed, &[purpose::SYNTH_WEIGHTS]);
    let shared: Vec<f64> = (0..config.dim).map(|_| rng::std_normal(&mut r)).collect();
    (0..config.arms)
        .map(|_| {
            let unique: Vec<f64> = (0..config.dim).map(|_| rng::std_normal(&mut r)).collect();
            shared
                .iter()
                .zip(&unique)
                .map(|(s, u)| config.alpha_ctx * s + (1.0 - config.alpha_ctx) * u)
                .collect()
        })
        .collect()
}

/// Generate the stream with explicit weight vectors. Exposed so tests can
/// pin the weights (all zeros makes the latent purely noise-driven).
pub fn generate_with_weights(
    config: &SyntheticConfig,
    weights: &[Vec<f64>],
) -> Result<SyntheticDataset> {
    config.validate()?;
    assert_eq!(weights.len(), config.arms);
    let latent_corr = calibrate_copula(&config.mu_targets, &config.c_target)?;
    let factor = mixing_factor(&latent_corr)?;
    let thresholds: Vec<f64> = config
        .mu_targets
        .iter()
        .map(|&m| inv_std_normal_cdf(1.0 - m))
        .collect();
    let scale: Vec<f64> = weights
        .iter()
        .map(|w| {
            if config.standardize_latent {
                (crate::linalg::dot(w, w) + config.sigma * config.sigma).sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let mut r = rng::stream(config.seed, &[purpose::SYNTH_ROUNDS]);
    let mut contexts = Vec::with_capacity(config.rounds);
    let mut rewards = Vec::with_capacity(config.rounds);
    let mut g = vec![0.0; config.arms];
    for _ in 0..config.rounds {
        let x: Vec<f64> = (0..config.dim).map(|_| rng::std_normal(&mut r)).collect();
        for gi in g.iter_mut() {
            *gi = rng::std_normal(&mut r);
        }
        let eps = factor.matvec(&g);
        let row: Vec<u8> = (0..config.arms)
            .map(|a| {
                let z = (crate::linalg::dot(&weights[a], &x) + config.sigma * eps[a]) / scale[a];
                u8::from(z > thresholds[a])
            })
            .collect();
        contexts.push(x);
        rewards.push(row);
    }
    Ok(SyntheticDataset { contexts, rewards })
}

/// Generate the full stream from the configuration alone.
pub fn generate_dataset(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let weights = draw_weights(config);
    generate_with_weights(config, &weights)
}

/// Generate and write a replayable vote file. Correct arms vote the true
/// label; incorrect arms vote a deterministic uniformly random wrong label.
/// Token counts are the constant 1, so reported costs are pure rate sums.
pub fn emit_replayable<W: Write>(
    config: &SyntheticConfig,
    arm_names: &[String],
    cost_per_token: &[f64],
    out: W,
) -> Result<()> {
    config.validate()?;
    if cost_per_token.len() != config.arms || arm_names.len() != config.arms {
        return Err(Error::DimensionMismatch {
            what: "arm cost/name lists".into(),
            expected: config.arms,
            got: cost_per_token.len().min(arm_names.len()),
        });
    }
    let data = generate_dataset(config)?;
    let m = config.num_labels;
    let mut label_rng = rng::stream(config.seed, &[purpose::SYNTH_LABELS]);
    let header = DatasetHeader {
        d: config.dim,
        k: config.arms,
        m,
        arms: arm_names
            .iter()
            .zip(cost_per_token)
            .map(|(name, &rho)| ArmHeaderSpec {
                name: name.clone(),
                rho,
            })
            .collect(),
    };
    let mut records = Vec::with_capacity(config.rounds);
    for (t, (x, row)) in data.contexts.iter().zip(&data.rewards).enumerate() {
        let truth = rng::below(&mut label_rng, u64::from(m)) as u32;
        let votes: Vec<Option<u32>> = row
            .iter()
            .map(|&correct| {
                if correct == 1 {
                    Some(truth)
                } else {
                    // Uniform over the m - 1 wrong labels.
                    let mut w = rng::below(&mut label_rng, u64::from(m) - 1) as u32;
                    if w >= truth {
                        w += 1;
                    }
                    Some(w)
                }
            })
            .collect();
        records.push(DatasetRecord {
            id: format!("synth-{t:06}"),
            embedding: x.clone(),
            tokens: Some(vec![1; config.arms]),
            votes: Some(votes),
            label: Some(truth),
            text: None,
        });
    }
    crate::harness::dataset::write_dataset(out, &header, &records)
}
