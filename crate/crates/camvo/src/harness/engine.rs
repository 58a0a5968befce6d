//! The online run loop for all four modes.
//!
//! `camvo` runs the full adaptive pipeline: per-arm confidence records, the
//! min-cost subset search, weighted majority over the selected votes, and
//! parameter updates on multi-arm rounds. `ccamvo` swaps the subset
//! confidence for Monte-Carlo evaluation under the live correlation
//! estimate. `full_majority` forces the full arm set through the same
//! pipeline, and `baseline` is the classic online weighted majority that
//! queries everything.
//!
//! State never sees ground truth: rewards are agreement with the round's
//! own prediction.

use serde::{Deserialize, Serialize};

use crate::confidence;
use crate::correlation::CorrelationState;
use crate::error::{Error, Result};
use crate::harness::metrics::{self, LabelMetrics};
use crate::linalg::Matrix;
use crate::oracle::{self, SubsetQuery};
use crate::rng;
use crate::types::{
    validate_instance, validate_run_config, ArmSpec, ArmState, ConfidenceMethod, DatasetShape,
    Instance, Mode, PolicyConfig, RoundRecord, RunContext, SubsetDecision,
};
use crate::vote::{self, OnlineMajorityState};

/// Where a round's votes come from. Replay reads the instance's cached
/// labels; other implementations can bridge to live annotators.
pub trait VoteSource {
    fn votes(&mut self, instance: &Instance, arms: &[usize]) -> Result<Vec<u32>>;
}

/// Votes replayed from the instance's cached labels.
pub struct ReplaySource;

impl VoteSource for ReplaySource {
    fn votes(&mut self, instance: &Instance, arms: &[usize]) -> Result<Vec<u32>> {
        let cached = instance.cached_labels.as_ref().ok_or(Error::MissingVote {
            instance: instance.instance_id.clone(),
            arm: arms.first().copied().unwrap_or(0),
        })?;
        arms.iter()
            .map(|&a| {
                cached.get(a).copied().ok_or(Error::MissingVote {
                    instance: instance.instance_id.clone(),
                    arm: a,
                })
            })
            .collect()
    }
}

/// Aggregated result of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub mode: Mode,
    pub total_rounds: usize,
    pub total_cost: f64,
    pub cost_per_million_tokens: f64,
    pub accuracy: Option<f64>,
    pub per_label: Option<Vec<LabelMetrics>>,
    /// Rounds where no subset certified the threshold and the engine
    /// queried everything.
    pub fallback_count: usize,
    pub token_fallback_used: bool,
    pub log_path: Option<String>,
    pub config: PolicyConfig,
}

/// Summary plus the full per-round trace.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub rounds: Vec<RoundRecord>,
}

/// Validate and run on replayed votes. Instances are consumed in the given
/// order; shuffle beforehand if desired.
pub fn run(
    config: &PolicyConfig,
    arms: &[ArmSpec],
    instances: &[Instance],
    shape: DatasetShape,
) -> Result<RunOutput> {
    let ctx = validate_run_config(config, arms, &shape)?;
    for inst in instances {
        validate_instance(inst, &ctx)?;
    }
    let mut source = ReplaySource;
    run_with_source(config, arms, instances, ctx, &mut source)
}

/// Run with an arbitrary vote source. The context must come from
/// [`validate_run_config`].
pub fn run_with_source(
    config: &PolicyConfig,
    arms: &[ArmSpec],
    instances: &[Instance],
    ctx: RunContext,
    source: &mut dyn VoteSource,
) -> Result<RunOutput> {
    match config.mode {
        Mode::Baseline => run_baseline(config, arms, instances, ctx, source),
        Mode::Camvo | Mode::Ccamvo | Mode::FullMajority => {
            run_adaptive(config, arms, instances, ctx, source)
        }
    }
}

struct Tracker {
    rounds: Vec<RoundRecord>,
    cum_cost: f64,
    labeled: u64,
    correct: u64,
    fallback_count: usize,
    token_basis: f64,
}

impl Tracker {
    fn new(capacity: usize) -> Self {
        Self {
            rounds: Vec::with_capacity(capacity),
            cum_cost: 0.0,
            labeled: 0,
            correct: 0,
            fallback_count: 0,
            token_basis: 0.0,
        }
    }

    fn push(
        &mut self,
        t: usize,
        instance: &Instance,
        decision: SubsetDecision,
        votes: Vec<u32>,
        predicted: u32,
        rewards: Vec<u8>,
    ) {
        if decision.fell_back_to_all {
            self.fallback_count += 1;
        }
        self.cum_cost += decision.cost;
        let k = instance.token_counts.len() as f64;
        self.token_basis += instance.token_counts.iter().sum::<u64>() as f64 / k;
        let cumulative_accuracy = instance.true_label.map(|y| {
            self.labeled += 1;
            if predicted == y {
                self.correct += 1;
            }
            self.correct as f64 / self.labeled as f64
        });
        self.rounds.push(RoundRecord {
            t,
            decision,
            votes,
            predicted,
            rewards,
            true_label: instance.true_label,
            cumulative_cost: self.cum_cost,
            cumulative_accuracy,
        });
    }

    fn into_output(self, config: &PolicyConfig, num_labels: u32) -> RunOutput {
        let accuracy = metrics::accuracy(&self.rounds);
        let per_label = metrics::per_label_metrics(&self.rounds, num_labels);
        let summary = RunSummary {
            mode: config.mode,
            total_rounds: self.rounds.len(),
            total_cost: self.cum_cost,
            cost_per_million_tokens: metrics::cost_per_million_tokens(
                self.cum_cost,
                self.token_basis,
            ),
            accuracy,
            per_label,
            fallback_count: self.fallback_count,
            token_fallback_used: false,
            log_path: None,
            config: config.clone(),
        };
        RunOutput {
            summary,
            rounds: self.rounds,
        }
    }
}

fn per_round_costs(arms: &[ArmSpec], instance: &Instance) -> Vec<f64> {
    arms.iter()
        .zip(&instance.token_counts)
        .map(|(spec, &tokens)| spec.cost_per_token * tokens as f64)
        .collect()
}

fn run_adaptive(
    config: &PolicyConfig,
    arms: &[ArmSpec],
    instances: &[Instance],
    ctx: RunContext,
    source: &mut dyn VoteSource,
) -> Result<RunOutput> {
    let k = ctx.arms;
    let eps = config.variance_floor;
    let mut states: Vec<ArmState> = (0..k).map(|_| ArmState::new(ctx.dim, config.lambda_l)).collect();
    let mut corr = CorrelationState::new(k);
    let identity = Matrix::identity(k);
    let all_arms: Vec<usize> = (0..k).collect();
    let mut tracker = Tracker::new(instances.len());

    for (idx, instance) in instances.iter().enumerate() {
        let t = idx + 1;
        let e = &instance.embedding;
        let mut records = Vec::with_capacity(k);
        for state in &states {
            records.push(confidence::evaluate_arm(
                state,
                e,
                config.alpha_explore,
                config.lambda_r,
                t as u64,
                eps,
            )?);
        }
        let lower_bounds: Vec<f64> = records.iter().map(|r| r.l).collect();
        let weights: Vec<f64> = records.iter().map(|r| r.omega).collect();
        let costs = per_round_costs(arms, instance);

        // Monte-Carlo marginals: the correlated variant simulates from each
        // arm's relative accuracy under the live correlation estimate; the
        // independent variant simulates straight from the lower bounds.
        let marginals: Vec<f64> = match config.mode {
            Mode::Ccamvo => states
                .iter()
                .map(|s| s.mu().clamp(1e-6, 1.0 - 1e-6))
                .collect(),
            _ => lower_bounds.iter().map(|l| l.clamp(1e-6, 1.0 - 1e-6)).collect(),
        };
        let correlation = match config.mode {
            Mode::Ccamvo => corr.correlation_matrix(),
            _ => &identity,
        };
        let query = SubsetQuery {
            lower_bounds: &lower_bounds,
            weights: &weights,
            costs: &costs,
            delta: config.delta,
            k_min: config.k_min,
            method: config.confidence_method,
            correlation: (config.confidence_method == ConfidenceMethod::MonteCarlo)
                .then_some(correlation),
            marginals: (config.confidence_method == ConfidenceMethod::MonteCarlo)
                .then_some(marginals.as_slice()),
            mc_samples: config.mc_samples,
            mc_stream_key: rng::derive_key(config.seed, &[t as u64]),
        };
        let decision = if config.mode == Mode::FullMajority {
            SubsetDecision {
                arms: all_arms.clone(),
                confidence: oracle::subset_confidence(&query, &all_arms)?,
                cost: costs.iter().sum(),
                fell_back_to_all: false,
            }
        } else {
            oracle::find_min_cost_subset(&query)?
        };

        let votes = source.votes(instance, &decision.arms)?;
        for &v in &votes {
            if v >= ctx.labels {
                return Err(Error::LabelOutOfRange {
                    instance: instance.instance_id.clone(),
                    label: v,
                    m: ctx.labels,
                });
            }
        }
        let selected_weights: Vec<f64> = decision.arms.iter().map(|&a| weights[a]).collect();
        let predicted = vote::weighted_majority(&votes, &selected_weights, ctx.labels);
        let rewards = vote::rewards_from_vote(&votes, predicted);

        // Single-arm rounds carry no information: the lone vote always
        // agrees with itself, so state stays untouched.
        if decision.arms.len() > 1 {
            for (j, &arm) in decision.arms.iter().enumerate() {
                let observed = records[arm].q.clamp(0.0, 1.0);
                states[arm].ridge_update(e, rewards[j]);
                confidence::update_beta_params(&mut states[arm], observed, rewards[j], eps);
            }
            if config.mode == Mode::Ccamvo {
                corr.update(&decision.arms, &rewards);
            }
        }

        tracker.push(t, instance, decision, votes, predicted, rewards);
    }
    Ok(tracker.into_output(config, ctx.labels))
}

fn run_baseline(
    config: &PolicyConfig,
    arms: &[ArmSpec],
    instances: &[Instance],
    ctx: RunContext,
    source: &mut dyn VoteSource,
) -> Result<RunOutput> {
    let k = ctx.arms;
    let all_arms: Vec<usize> = (0..k).collect();
    let mut state = OnlineMajorityState::new(k);
    let mut tracker = Tracker::new(instances.len());
    for (idx, instance) in instances.iter().enumerate() {
        let votes = source.votes(instance, &all_arms)?;
        for &v in &votes {
            if v >= ctx.labels {
                return Err(Error::LabelOutOfRange {
                    instance: instance.instance_id.clone(),
                    label: v,
                    m: ctx.labels,
                });
            }
        }
        let (predicted, rewards) = state.step(&votes, ctx.labels);
        let costs = per_round_costs(arms, instance);
        let decision = SubsetDecision {
            arms: all_arms.clone(),
            // The baseline has no confidence model.
            confidence: 0.0,
            cost: costs.iter().sum(),
            fell_back_to_all: false,
        };
        tracker.push(idx + 1, instance, decision, votes, predicted, rewards);
    }
    Ok(tracker.into_output(config, ctx.labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{self, SyntheticConfig};

    fn synthetic_inputs(
        rounds: usize,
        k: usize,
        seed: u64,
    ) -> (Vec<ArmSpec>, Vec<Instance>, DatasetShape) {
        let config = SyntheticConfig {
            rounds,
            arms: k,
            dim: 4,
            mu_targets: (0..k).map(|i| 0.55 + 0.08 * i as f64).collect(),
            c_target: synthgen::uniform_correlation(k, 0.2),
            alpha_ctx: 0.1,
            sigma: 0.5,
            seed,
            standardize_latent: true,
            num_labels: 4,
        };
        let names: Vec<String> = (0..k).map(|i| format!("arm-{i}")).collect();
        let costs: Vec<f64> = (0..k).map(|i| 1e-7 * (i + 1) as f64).collect();
        let mut buf = Vec::new();
        synthgen::emit_replayable(&config, &names, &costs, &mut buf).unwrap();
        let ds = crate::harness::dataset::load_dataset_from(std::io::Cursor::new(buf)).unwrap();
        (ds.header.arm_specs(), ds.instances, ds.header.shape())
    }

    fn camvo_config(delta: f64, k_min: usize, seed: u64) -> PolicyConfig {
        PolicyConfig {
            delta,
            k_min,
            seed,
            confidence_method: ConfidenceMethod::BetaCdf,
            ..PolicyConfig::default()
        }
    }

    #[test]
    fn cold_start_selects_everything_under_high_threshold() {
        let (arms, instances, shape) = synthetic_inputs(1, 4, 3);
        let out = run(&camvo_config(0.96, 1, 0), &arms, &instances, shape).unwrap();
        let first = &out.rounds[0];
        assert_eq!(first.decision.arms, vec![0, 1, 2, 3]);
        assert!(first.decision.fell_back_to_all);
    }

    #[test]
    fn single_arm_rounds_leave_state_untouched() {
        // delta = 0 accepts the cheapest singleton every round, so nothing
        // is ever learned and every round repeats the same choice.
        let (arms, instances, shape) = synthetic_inputs(30, 3, 5);
        let out = run(&camvo_config(0.0, 1, 1), &arms, &instances, shape).unwrap();
        for r in &out.rounds {
            assert_eq!(r.decision.arms.len(), 1);
            assert_eq!(r.rewards, vec![1]);
        }
        assert_eq!(out.summary.fallback_count, 0);
    }

    #[test]
    fn forcing_k_min_to_k_matches_full_majority_mode() {
        let (arms, instances, shape) = synthetic_inputs(120, 3, 7);
        let mut cfg = camvo_config(1.0, 3, 9);
        let camvo = run(&cfg, &arms, &instances, shape).unwrap();
        cfg.mode = Mode::FullMajority;
        let full = run(&cfg, &arms, &instances, shape).unwrap();
        let a: Vec<u32> = camvo.rounds.iter().map(|r| r.predicted).collect();
        let b: Vec<u32> = full.rounds.iter().map(|r| r.predicted).collect();
        assert_eq!(a, b);
        assert!((camvo.summary.total_cost - full.summary.total_cost).abs() < 1e-12);
    }

    #[test]
    fn delta_one_with_exact_method_queries_everything() {
        let (arms, instances, shape) = synthetic_inputs(40, 3, 11);
        let mut cfg = camvo_config(1.0, 1, 2);
        cfg.confidence_method = ConfidenceMethod::Exact;
        let out = run(&cfg, &arms, &instances, shape).unwrap();
        let full_cost: f64 = instances
            .iter()
            .map(|i| per_round_costs(&arms, i).iter().sum::<f64>())
            .sum();
        assert!(out.rounds.iter().all(|r| r.decision.arms.len() == 3));
        assert!((out.summary.total_cost - full_cost).abs() < 1e-12);
    }

    #[test]
    fn runs_are_deterministic_given_seed() {
        let (arms, instances, shape) = synthetic_inputs(80, 3, 13);
        for mode in [Mode::Camvo, Mode::Ccamvo, Mode::Baseline, Mode::FullMajority] {
            let mut cfg = camvo_config(0.9, 1, 4);
            cfg.mode = mode;
            if mode == Mode::Ccamvo {
                cfg.confidence_method = ConfidenceMethod::MonteCarlo;
                cfg.mc_samples = 300;
            }
            let a = run(&cfg, &arms, &instances, shape).unwrap();
            let b = run(&cfg, &arms, &instances, shape).unwrap();
            assert_eq!(
                metrics::round_log_to_string(&a.rounds),
                metrics::round_log_to_string(&b.rounds),
                "mode {mode:?} diverged"
            );
        }
    }

    #[test]
    fn cumulative_cost_is_conserved() {
        let (arms, instances, shape) = synthetic_inputs(60, 3, 17);
        let out = run(&camvo_config(0.85, 1, 5), &arms, &instances, shape).unwrap();
        let mut acc = 0.0;
        for r in &out.rounds {
            acc += r.decision.cost;
            assert!((r.cumulative_cost - acc).abs() < 1e-9);
        }
        assert!((out.summary.total_cost - acc).abs() < 1e-12);
    }

    #[test]
    fn adaptive_cost_never_exceeds_baseline_cost() {
        let (arms, instances, shape) = synthetic_inputs(150, 4, 19);
        let camvo = run(&camvo_config(0.9, 1, 6), &arms, &instances, shape).unwrap();
        let mut cfg = camvo_config(0.9, 1, 6);
        cfg.mode = Mode::Baseline;
        let baseline = run(&cfg, &arms, &instances, shape).unwrap();
        assert!(camvo.summary.total_cost <= baseline.summary.total_cost + 1e-12);
    }

    #[test]
    fn ccamvo_runs_and_tracks_correlations() {
        let (arms, instances, shape) = synthetic_inputs(100, 3, 23);
        let cfg = PolicyConfig {
            delta: 0.9,
            k_min: 1,
            seed: 7,
            mode: Mode::Ccamvo,
            confidence_method: ConfidenceMethod::MonteCarlo,
            mc_samples: 400,
            ..PolicyConfig::default()
        };
        let out = run(&cfg, &arms, &instances, shape).unwrap();
        assert_eq!(out.rounds.len(), 100);
        assert!(out.summary.accuracy.is_some());
    }

    #[test]
    fn baseline_accrues_full_cost_every_round() {
        let (arms, instances, shape) = synthetic_inputs(25, 3, 29);
        let mut cfg = camvo_config(0.5, 1, 8);
        cfg.mode = Mode::Baseline;
        let out = run(&cfg, &arms, &instances, shape).unwrap();
        let want: f64 = instances
            .iter()
            .map(|i| per_round_costs(&arms, i).iter().sum::<f64>())
            .sum();
        assert!((out.summary.total_cost - want).abs() < 1e-12);
    }

    #[test]
    fn external_vote_sources_plug_into_the_run_loop() {
        // A non-replay source standing in for live annotators.
        struct Contrarian;
        impl VoteSource for Contrarian {
            fn votes(&mut self, instance: &Instance, arms: &[usize]) -> crate::error::Result<Vec<u32>> {
                let flip = u32::from(instance.instance_id.len() % 2 == 0);
                Ok(arms.iter().map(|&a| (a as u32 + flip) % 2).collect())
            }
        }
        let (arms, mut instances, shape) = synthetic_inputs(30, 3, 41);
        for inst in &mut instances {
            inst.cached_labels = None; // force the external source
        }
        let cfg = camvo_config(0.9, 1, 3);
        let ctx = crate::types::validate_run_config(&cfg, &arms, &shape).unwrap();
        let mut source = Contrarian;
        let out = run_with_source(&cfg, &arms, &instances, ctx, &mut source).unwrap();
        assert_eq!(out.rounds.len(), 30);
        assert!(out.rounds.iter().all(|r| r.votes.iter().all(|&v| v < 4)));
    }

    #[test]
    fn single_arm_baseline_predicts_its_own_labels() {
        let instances: Vec<Instance> = (0..20)
            .map(|i| Instance {
                instance_id: format!("i{i}"),
                embedding: vec![0.0; 2],
                token_counts: vec![1],
                cached_labels: Some(vec![i % 3]),
                true_label: Some((i + 1) % 3),
            })
            .collect();
        let arms = vec![ArmSpec {
            arm_id: 0,
            name: "solo".into(),
            cost_per_token: 1.0,
        }];
        let cfg = PolicyConfig {
            mode: Mode::Baseline,
            ..PolicyConfig::default()
        };
        let shape = DatasetShape { d: 2, k: 1, m: 3 };
        let out = run(&cfg, &arms, &instances, shape).unwrap();
        for (r, inst) in out.rounds.iter().zip(&instances) {
            assert_eq!(r.predicted, inst.cached_labels.as_ref().unwrap()[0]);
        }
    }

    #[test]
    fn replay_source_reports_missing_votes() {
        let (arms, mut instances, shape) = synthetic_inputs(5, 3, 31);
        instances[2].cached_labels = None;
        let err = run(&camvo_config(0.9, 1, 9), &arms, &instances, shape).unwrap_err();
        assert!(err.to_string().contains("missing vote"), "{err}");
    }
}
