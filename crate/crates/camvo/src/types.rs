//! Shared domain types. No algorithmic logic beyond invariant enforcement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Full re-inversion cadence for the maintained ridge inverse: rank-one
/// updates in between, a Cholesky re-anchor every this many updates.
pub const REINVERSION_PERIOD: u32 = 1000;

/// One annotator: identity, display name, and cost per input token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub arm_id: u32,
    pub name: String,
    /// Cost per input token (currency units). Must be nonnegative.
    pub cost_per_token: f64,
}

/// One data item to label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub instance_id: String,
    /// Context embedding of the configured dimension d.
    pub embedding: Vec<f64>,
    /// Per-arm input token counts, one per arm, each >= 1.
    pub token_counts: Vec<u64>,
    /// Per-arm cached vote labels in [0, M); required for replay.
    pub cached_labels: Option<Vec<u32>>,
    /// Ground-truth label, when the dataset carries one.
    pub true_label: Option<u32>,
}

/// Engine mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Camvo,
    Ccamvo,
    Baseline,
    FullMajority,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Camvo => "camvo",
            Mode::Ccamvo => "ccamvo",
            Mode::Baseline => "baseline",
            Mode::FullMajority => "full_majority",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "camvo" => Ok(Mode::Camvo),
            "ccamvo" => Ok(Mode::Ccamvo),
            "baseline" => Ok(Mode::Baseline),
            "full_majority" => Ok(Mode::FullMajority),
            other => Err(Error::InvalidConfig(format!("unknown mode '{other}'"))),
        }
    }
}

/// Subset vote-confidence computation method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfidenceMethod {
    Exact,
    BetaCdf,
    MonteCarlo,
}

impl std::str::FromStr for ConfidenceMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ConfidenceMethod::Exact),
            "beta_cdf" => Ok(ConfidenceMethod::BetaCdf),
            "monte_carlo" => Ok(ConfidenceMethod::MonteCarlo),
            other => Err(Error::InvalidConfig(format!(
                "unknown confidence method '{other}'"
            ))),
        }
    }
}

/// Run policy parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Target subset vote confidence in [0, 1].
    pub delta: f64,
    /// Minimum number of arms queried per round.
    pub k_min: usize,
    /// Exploration width multiplier for the linear bandit bound.
    pub alpha_explore: f64,
    /// Ridge regularizer for the bandit state (> 0).
    pub lambda_l: f64,
    /// Laplace smoothing strength (>= 0).
    pub lambda_r: f64,
    pub mode: Mode,
    pub confidence_method: ConfidenceMethod,
    /// Draw count for Monte-Carlo confidence.
    pub mc_samples: usize,
    pub seed: u64,
    /// Variance floor for Beta-moment fitting.
    pub variance_floor: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            delta: 0.9,
            k_min: 1,
            alpha_explore: 0.25,
            lambda_l: 1.0,
            lambda_r: 1.0,
            mode: Mode::Camvo,
            confidence_method: ConfidenceMethod::BetaCdf,
            mc_samples: 5000,
            seed: 0,
            variance_floor: 1e-6,
        }
    }
}

/// Per-round, per-arm confidence pipeline output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    /// Raw linear estimate e' A^{-1} b.
    pub q: f64,
    /// Exploration width alpha * sqrt(e' A^{-1} e).
    pub width: f64,
    /// Lower bound clip(q - width, 0, 1).
    pub theta: f64,
    /// Beta-mixture posterior of correctness.
    pub l_bar: f64,
    /// Laplace-smoothed lower bound used by the subset search.
    pub l: f64,
    /// Vote weight mu * max(q, 0).
    pub omega: f64,
}

/// Chosen arm set with its estimated vote confidence and monetary cost.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetDecision {
    /// Selected arm ids, ascending.
    pub arms: Vec<usize>,
    pub confidence: f64,
    pub cost: f64,
    pub fell_back_to_all: bool,
}

impl SubsetDecision {
    pub fn bitmask(&self) -> u64 {
        self.arms.iter().fold(0u64, |m, &i| m | (1 << i))
    }
}

/// Everything observed in one round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based round index.
    pub t: usize,
    pub decision: SubsetDecision,
    /// Votes of the selected arms, aligned with `decision.arms`.
    pub votes: Vec<u32>,
    pub predicted: u32,
    /// Agreement rewards of the selected arms, aligned with `decision.arms`.
    pub rewards: Vec<u8>,
    pub true_label: Option<u32>,
    pub cumulative_cost: f64,
    pub cumulative_accuracy: Option<f64>,
}

/// Welford running statistics of a scalar stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations from the running mean.
    pub m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += (x - self.mean) * delta;
    }

    /// Population variance (divides by count).
    pub fn population_variance(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.m2 / self.count as f64
        }
    }
}

/// Shape parameters of one fitted Beta component.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaShapes {
    pub alpha: f64,
    pub beta: f64,
}

/// Full online state of one annotator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    /// Ridge Gram matrix lambda_l I + sum e e'.
    pub a: Matrix,
    /// Maintained inverse of `a`.
    pub a_inv: Matrix,
    /// Reward-weighted context sum.
    pub b: Vec<f64>,
    /// Number of rounds in which this arm's parameters were updated.
    pub queries: u64,
    /// Rounds (among `queries`) where the arm agreed with the prediction.
    pub correct: u64,
    /// Observed-confidence statistics per agreement class, indexed [h=0, h=1].
    pub class_stats: [RunningStats; 2],
    /// Fitted Beta shapes per agreement class, indexed [h=0, h=1]; None until
    /// that class has at least two samples.
    pub beta: [Option<BetaShapes>; 2],
    updates_since_reinversion: u32,
}

impl ArmState {
    pub fn new(dim: usize, lambda_l: f64) -> Self {
        assert!(lambda_l > 0.0, "ridge regularizer must be positive");
        Self {
            a: Matrix::scaled_identity(dim, lambda_l),
            a_inv: Matrix::scaled_identity(dim, 1.0 / lambda_l),
            b: vec![0.0; dim],
            queries: 0,
            correct: 0,
            class_stats: [RunningStats::default(), RunningStats::default()],
            beta: [None, None],
            updates_since_reinversion: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// Relative accuracy mu, materialized from the exact integer ratio.
    /// Optimistically 1 before the first update.
    pub fn mu(&self) -> f64 {
        if self.queries == 0 {
            1.0
        } else {
            self.correct as f64 / self.queries as f64
        }
    }

    /// Both Beta components, (h=1, h=0), once each class has enough samples
    /// for a moment fit. A class whose observations are all identical (zero
    /// variance) would fit a floored-variance delta spike, so the mixture
    /// stays inactive until both classes show genuine spread.
    pub fn mixture(&self) -> Option<(BetaShapes, BetaShapes)> {
        if self.class_stats[0].population_variance() <= 0.0
            || self.class_stats[1].population_variance() <= 0.0
        {
            return None;
        }
        match (self.beta[1], self.beta[0]) {
            (Some(one), Some(zero)) => Some((one, zero)),
            _ => None,
        }
    }

    /// Ridge update after observing reward `r` for context `e`:
    /// A += e e', b += r e, and the query/agreement counters advance.
    pub fn ridge_update(&mut self, e: &[f64], r: u8) {
        debug_assert_eq!(e.len(), self.dim());
        self.a.add_outer(e, 1.0);
        self.a_inv.sherman_morrison_update(e);
        if r > 0 {
            for (bi, ei) in self.b.iter_mut().zip(e) {
                *bi += ei;
            }
            self.correct += 1;
        }
        self.queries += 1;
        self.updates_since_reinversion += 1;
        if self.updates_since_reinversion >= REINVERSION_PERIOD {
            if let Ok(fresh) = self.a.cholesky_inverse() {
                self.a_inv = fresh;
            }
            self.updates_since_reinversion = 0;
        }
        self.debug_check_inverse();
    }

    /// Debug-build invariant: the maintained inverse tracks A to 1e-8.
    pub fn debug_check_inverse(&self) {
        #[cfg(debug_assertions)]
        {
            let prod = self.a_inv.matmul(&self.a);
            let n = self.dim();
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { 1.0 } else { 0.0 };
                    debug_assert!(
                        (prod.at(i, j) - want).abs() < 1e-8,
                        "inverse drifted at ({i},{j}): {}",
                        prod.at(i, j)
                    );
                }
            }
        }
    }
}

/// A validated run context binding the shared dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunContext {
    pub arms: usize,
    pub dim: usize,
    pub labels: u32,
    pub seed: u64,
}

/// Shape of a dataset as declared by its header.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetShape {
    pub d: usize,
    pub k: usize,
    pub m: u32,
}

/// Check a policy configuration against the arm roster and dataset shape.
pub fn validate_run_config(
    config: &PolicyConfig,
    arms: &[ArmSpec],
    shape: &DatasetShape,
) -> Result<RunContext> {
    let k = arms.len();
    if k == 0 {
        return Err(Error::InvalidConfig("no arms configured".into()));
    }
    if k > 20 {
        return Err(Error::InvalidConfig(format!(
            "{k} arms exceeds the exact-enumeration limit of 20"
        )));
    }
    if shape.k != k {
        return Err(Error::DimensionMismatch {
            what: "arm count".into(),
            expected: k,
            got: shape.k,
        });
    }
    let mut seen = vec![false; k];
    for spec in arms {
        let id = spec.arm_id as usize;
        if id >= k || seen[id] {
            return Err(Error::InvalidConfig(format!(
                "arm ids must be unique and contiguous from 0; offending id {}",
                spec.arm_id
            )));
        }
        seen[id] = true;
        if !spec.cost_per_token.is_finite() || spec.cost_per_token < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "arm {} has invalid cost per token {}",
                spec.arm_id, spec.cost_per_token
            )));
        }
    }
    if shape.m < 2 {
        return Err(Error::InvalidConfig(format!(
            "need at least 2 labels, got M = {}",
            shape.m
        )));
    }
    if shape.d == 0 {
        return Err(Error::InvalidConfig("embedding dimension must be >= 1".into()));
    }
    if config.k_min == 0 {
        return Err(Error::InvalidConfig("k_min must be >= 1".into()));
    }
    if config.k_min > k {
        return Err(Error::KminExceedsArms {
            k_min: config.k_min,
            arms: k,
        });
    }
    if !(0.0..=1.0).contains(&config.delta) {
        return Err(Error::InvalidConfig(format!(
            "delta must lie in [0, 1], got {}",
            config.delta
        )));
    }
    if !config.alpha_explore.is_finite() || config.alpha_explore < 0.0 {
        return Err(Error::InvalidConfig("alpha_explore must be >= 0".into()));
    }
    if !config.lambda_l.is_finite() || config.lambda_l <= 0.0 {
        return Err(Error::InvalidConfig("lambda_l must be > 0".into()));
    }
    if !config.lambda_r.is_finite() || config.lambda_r < 0.0 {
        return Err(Error::InvalidConfig("lambda_r must be >= 0".into()));
    }
    if !config.variance_floor.is_finite() || config.variance_floor <= 0.0 {
        return Err(Error::InvalidConfig("variance_floor must be > 0".into()));
    }
    if config.mc_samples == 0 {
        return Err(Error::InvalidConfig("mc_samples must be >= 1".into()));
    }
    if config.mode == Mode::Ccamvo && config.confidence_method != ConfidenceMethod::MonteCarlo {
        return Err(Error::InvalidConfig(
            "mode ccamvo requires confidence_method monte_carlo".into(),
        ));
    }
    Ok(RunContext {
        arms: k,
        dim: shape.d,
        labels: shape.m,
        seed: config.seed,
    })
}

/// Check one instance against the run context.
pub fn validate_instance(instance: &Instance, ctx: &RunContext) -> Result<()> {
    if instance.embedding.len() != ctx.dim {
        return Err(Error::DimensionMismatch {
            what: format!("embedding of instance {}", instance.instance_id),
            expected: ctx.dim,
            got: instance.embedding.len(),
        });
    }
    if instance.token_counts.len() != ctx.arms {
        return Err(Error::DimensionMismatch {
            what: format!("token counts of instance {}", instance.instance_id),
            expected: ctx.arms,
            got: instance.token_counts.len(),
        });
    }
    if instance.token_counts.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "instance {} has a zero token count",
            instance.instance_id
        )));
    }
    if let Some(votes) = &instance.cached_labels {
        if votes.len() != ctx.arms {
            return Err(Error::MissingVote {
                instance: instance.instance_id.clone(),
                arm: votes.len().min(ctx.arms),
            });
        }
        for &v in votes {
            if v >= ctx.labels {
                return Err(Error::LabelOutOfRange {
                    instance: instance.instance_id.clone(),
                    label: v,
                    m: ctx.labels,
                });
            }
        }
    }
    if let Some(y) = instance.true_label {
        if y >= ctx.labels {
            return Err(Error::LabelOutOfRange {
                instance: instance.instance_id.clone(),
                label: y,
                m: ctx.labels,
            });
        }
    }
    Ok(())
}
