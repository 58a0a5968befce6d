//! Subset vote-confidence computation and the min-cost subset search.
//!
//! Confidence of a candidate arm set is the probability that the arms
//! voting correctly carry strictly more than half the set's total weight,
//! treating each arm's correctness as Bernoulli at its lower bound. Three
//! routes: exact enumeration over sub-coalitions, a Beta-CDF approximation,
//! and Monte-Carlo sampling under an estimated correlation matrix.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::numeric::reg_inc_beta;
use crate::rng::{self, purpose};
use crate::types::{ConfidenceMethod, SubsetDecision};

/// Inputs for one subset search.
#[derive(Clone, Debug)]
pub struct SubsetQuery<'a> {
    /// Per-arm correctness lower bounds L, length K.
    pub lower_bounds: &'a [f64],
    /// Per-arm nonnegative vote weights, length K.
    pub weights: &'a [f64],
    /// Per-arm query costs for this instance (rate x tokens), length K.
    pub costs: &'a [f64],
    pub delta: f64,
    pub k_min: usize,
    pub method: ConfidenceMethod,
    /// K x K correlation estimate (Monte-Carlo only).
    pub correlation: Option<&'a Matrix>,
    /// Per-arm marginal correctness probabilities (Monte-Carlo only).
    pub marginals: Option<&'a [f64]>,
    pub mc_samples: usize,
    /// Stream key already bound to (run seed, round); the subset mask is
    /// mixed in per evaluation.
    pub mc_stream_key: u64,
}

/// Exact subset confidence: sum over all winning sub-coalitions of the
/// product of per-arm correctness/incorrectness probabilities. A coalition
/// wins only with strictly more than half the total weight.
pub fn subset_confidence_exact(arms: &[usize], lower_bounds: &[f64], weights: &[f64]) -> Result<f64> {
    let n = arms.len();
    if n > 20 {
        return Err(Error::SubsetTooLarge(n));
    }
    let w: Vec<f64> = arms.iter().map(|&i| weights[i]).collect();
    let l: Vec<f64> = arms.iter().map(|&i| lower_bounds[i]).collect();
    let half = 0.5 * w.iter().sum::<f64>();
    let mut total = 0.0;
    for mask in 0u32..(1u32 << n) {
        let mut coalition_weight = 0.0;
        let mut prob = 1.0;
        for j in 0..n {
            if mask & (1 << j) != 0 {
                coalition_weight += w[j];
                prob *= l[j];
            } else {
                prob *= 1.0 - l[j];
            }
        }
        if coalition_weight > half {
            total += prob;
        }
    }
    Ok(total)
}

/// Beta-CDF approximation: 1 - F_Beta(1/2; W_L, W - W_L) with
/// W_L = sum of weight-scaled lower bounds and W the total weight.
pub fn subset_confidence_beta(arms: &[usize], lower_bounds: &[f64], weights: &[f64]) -> f64 {
    let mut w_total = 0.0;
    let mut w_l = 0.0;
    for &i in arms {
        w_total += weights[i];
        w_l += weights[i] * lower_bounds[i];
    }
    // Limits of the incomplete beta at degenerate shapes.
    if w_l <= 0.0 {
        return 0.0;
    }
    if w_total - w_l <= 0.0 {
        return 1.0;
    }
    1.0 - reg_inc_beta(w_l, w_total - w_l, 0.5)
}

/// Monte-Carlo subset confidence under correlated arm outcomes: draw
/// correctness vectors from the copula sampler restricted to the subset and
/// count the draws where the correct arms strictly out-weigh the rest.
/// Deterministic given the stream key; the subset mask is mixed in so
/// evaluations are order-independent.
pub fn subset_confidence_mc(
    arms: &[usize],
    marginals: &[f64],
    weights: &[f64],
    correlation: &Matrix,
    samples: usize,
    stream_key: u64,
) -> Result<f64> {
    let n = arms.len();
    if n > 20 {
        return Err(Error::SubsetTooLarge(n));
    }
    let mask: u64 = arms.iter().fold(0, |m, &i| m | (1 << i));
    let mut sub_corr = Matrix::identity(n);
    for (a, &i) in arms.iter().enumerate() {
        for (b, &j) in arms.iter().enumerate() {
            *sub_corr.at_mut(a, b) = if a == b { 1.0 } else { correlation.at(i, j) };
        }
    }
    let sub_mu: Vec<f64> = arms.iter().map(|&i| marginals[i]).collect();
    let w: Vec<f64> = arms.iter().map(|&i| weights[i]).collect();
    let half = 0.5 * w.iter().sum::<f64>();
    let mut rng = rng::stream(stream_key, &[purpose::MC_CONFIDENCE, mask]);
    let rows = crate::correlation::sample_correlated_binary(samples, &sub_mu, &sub_corr, &mut rng)?;
    let mut wins = 0usize;
    for row in rows {
        let mut correct_weight = 0.0;
        for (j, wj) in w.iter().enumerate() {
            if row & (1 << j) != 0 {
                correct_weight += wj;
            }
        }
        if correct_weight > half {
            wins += 1;
        }
    }
    Ok(wins as f64 / samples as f64)
}

/// Confidence of one arm set under the query's configured method.
pub fn subset_confidence(query: &SubsetQuery<'_>, arms: &[usize]) -> Result<f64> {
    match query.method {
        ConfidenceMethod::Exact => {
            subset_confidence_exact(arms, query.lower_bounds, query.weights)
        }
        ConfidenceMethod::BetaCdf => {
            Ok(subset_confidence_beta(arms, query.lower_bounds, query.weights))
        }
        ConfidenceMethod::MonteCarlo => {
            let corr = query.correlation.ok_or_else(|| {
                Error::InvalidConfig("monte_carlo confidence needs a correlation matrix".into())
            })?;
            let mu = query.marginals.ok_or_else(|| {
                Error::InvalidConfig("monte_carlo confidence needs per-arm marginals".into())
            })?;
            subset_confidence_mc(
                arms,
                mu,
                query.weights,
                corr,
                query.mc_samples,
                query.mc_stream_key,
            )
        }
    }
}

fn arms_of_mask(mask: u32, k: usize) -> Vec<usize> {
    (0..k).filter(|&i| mask & (1 << i) != 0).collect()
}

/// Cheapest subset of size >= k_min whose confidence clears delta.
///
/// Candidates are enumerated in ascending cost order with early exit; among
/// equal-cost feasible candidates the higher confidence wins, then the
/// lexicographically smallest arm set. When nothing qualifies the full set
/// is returned with `fell_back_to_all` set.
pub fn find_min_cost_subset(query: &SubsetQuery<'_>) -> Result<SubsetDecision> {
    let k = query.lower_bounds.len();
    assert_eq!(query.weights.len(), k);
    assert_eq!(query.costs.len(), k);
    if k == 0 {
        return Err(Error::InvalidConfig("subset search over zero arms".into()));
    }
    if k > 20 {
        return Err(Error::SubsetTooLarge(k));
    }
    let k_min = query.k_min.min(k);
    let full_mask = ((1u64 << k) - 1) as u32;

    // Subset costs by shared-prefix recursion: cost(m) = cost(m without its
    // lowest bit) + cost of that bit.
    let mut cost = vec![0.0f64; 1 << k];
    for mask in 1u32..=full_mask {
        let low = mask.trailing_zeros() as usize;
        cost[mask as usize] = cost[(mask & (mask - 1)) as usize] + query.costs[low];
    }
    let mut candidates: Vec<u32> = (1..=full_mask)
        .filter(|m| m.count_ones() as usize >= k_min)
        .collect();
    candidates.sort_by(|a, b| cost[*a as usize].total_cmp(&cost[*b as usize]));

    let mut idx = 0;
    while idx < candidates.len() {
        // Evaluate the whole equal-cost group before deciding.
        let group_cost = cost[candidates[idx] as usize];
        let mut best: Option<(f64, Vec<usize>)> = None;
        while idx < candidates.len() && cost[candidates[idx] as usize] == group_cost {
            let arms = arms_of_mask(candidates[idx], k);
            let conf = subset_confidence(query, &arms)?;
            if conf >= query.delta {
                let better = match &best {
                    None => true,
                    Some((best_conf, best_arms)) => {
                        conf > *best_conf || (conf == *best_conf && arms < *best_arms)
                    }
                };
                if better {
                    best = Some((conf, arms));
                }
            }
            idx += 1;
        }
        if let Some((conf, arms)) = best {
            return Ok(SubsetDecision {
                arms,
                confidence: conf,
                cost: group_cost,
                fell_back_to_all: false,
            });
        }
    }

    // Nothing qualified: query everything.
    let arms = arms_of_mask(full_mask, k);
    let conf = subset_confidence(query, &arms)?;
    Ok(SubsetDecision {
        arms,
        confidence: conf,
        cost: cost[full_mask as usize],
        fell_back_to_all: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn single_arm_confidence_is_its_lower_bound() {
        let got = subset_confidence_exact(&[0], &[0.8], &[1.0]).unwrap();
        assert!(close(got, 0.8, 1e-15));
    }

    #[test]
    fn three_equal_arms_enumerate_correctly() {
        let got = subset_confidence_exact(&[0, 1, 2], &[0.9; 3], &[1.0; 3]).unwrap();
        assert!(close(got, 0.972, 1e-12)); // 3 * 0.9^2 * 0.1 + 0.9^3
    }

    #[test]
    fn dominant_weight_reduces_to_dictator_probability() {
        let got =
            subset_confidence_exact(&[0, 1, 2], &[0.7, 0.9, 0.9], &[3.0, 1.0, 1.0]).unwrap();
        assert!(close(got, 0.7, 1e-12));
    }

    #[test]
    fn oversized_subduring_exact_is_rejected() {
        let arms: Vec<usize> = (0..21).collect();
        let l = vec![0.5; 21];
        let w = vec![1.0; 21];
        assert!(subset_confidence_exact(&arms, &l, &w).is_err());
    }

    #[test]
    fn beta_approximation_is_exact_at_symmetric_half() {
        let got = subset_confidence_beta(&[0, 1, 2], &[0.5; 3], &[1.0, 2.0, 0.5]);
        assert!(close(got, 0.5, 1e-10));
    }

    #[test]
    fn beta_approximation_tracks_three_arm_exact_value() {
        let got = subset_confidence_beta(&[0, 1, 2], &[0.9; 3], &[1.0; 3]);
        assert!((got - 0.972).abs() < 0.05, "{got}");
    }

    #[test]
    fn beta_single_arm_documents_approximation_gap() {
        // 1 - F_Beta(0.5; 0.8, 0.2) is close to, but not exactly, 0.8.
        let got = subset_confidence_beta(&[0], &[0.8], &[1.0]);
        assert!(got > 0.0 && got < 1.0);
        assert!((got - 0.8).abs() > 1e-4, "approximation is not the identity");
    }

    #[test]
    fn beta_degenerate_shapes_hit_limits() {
        assert_eq!(subset_confidence_beta(&[0, 1], &[0.0, 0.0], &[1.0, 1.0]), 0.0);
        assert_eq!(subset_confidence_beta(&[0, 1], &[1.0, 1.0], &[1.0, 1.0]), 1.0);
        assert_eq!(subset_confidence_beta(&[0], &[0.5], &[0.0]), 0.0);
    }

    #[test]
    fn monte_carlo_matches_exact_under_independence() {
        let l = [0.9, 0.9, 0.9];
        let w = [1.0, 1.0, 1.0];
        let exact = subset_confidence_exact(&[0, 1, 2], &l, &w).unwrap();
        let c = Matrix::identity(3);
        let n = 100_000;
        let got = subset_confidence_mc(&[0, 1, 2], &l, &w, &c, n, 77).unwrap();
        let se = (exact * (1.0 - exact) / n as f64).sqrt();
        assert!((got - exact).abs() < 4.0 * se, "{got} vs {exact}");
    }

    #[test]
    fn monte_carlo_comonotone_arms_vote_as_one() {
        let mu = [0.8, 0.8, 0.8];
        let w = [1.0, 1.0, 1.0];
        let mut ones = Matrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                *ones.at_mut(i, j) = 1.0;
            }
        }
        let got = subset_confidence_mc(&[0, 1, 2], &mu, &w, &ones, 50_000, 5).unwrap();
        assert!((got - 0.8).abs() < 0.01, "{got}");
    }

    #[test]
    fn monte_carlo_single_draw_is_reproducible() {
        let mu = [0.5, 0.5];
        let w = [1.0, 1.0];
        let c = Matrix::identity(2);
        let a = subset_confidence_mc(&[0, 1], &mu, &w, &c, 1, 123).unwrap();
        let b = subset_confidence_mc(&[0, 1], &mu, &w, &c, 1, 123).unwrap();
        assert_eq!(a, b);
        assert!(a == 0.0 || a == 1.0);
    }

    fn exact_query<'a>(
        l: &'a [f64],
        w: &'a [f64],
        costs: &'a [f64],
        delta: f64,
        k_min: usize,
    ) -> SubsetQuery<'a> {
        SubsetQuery {
            lower_bounds: l,
            weights: w,
            costs,
            delta,
            k_min,
            method: ConfidenceMethod::Exact,
            correlation: None,
            marginals: None,
            mc_samples: 1,
            mc_stream_key: 0,
        }
    }

    #[test]
    fn search_picks_cheapest_feasible_singleton() {
        let l = [0.9, 0.95];
        let w = [1.0, 1.0];
        let costs = [1.0, 10.0];
        let d = find_min_cost_subset(&exact_query(&l, &w, &costs, 0.85, 1)).unwrap();
        assert_eq!(d.arms, vec![0]);
        assert!(close(d.cost, 1.0, 1e-12));
        assert!(!d.fell_back_to_all);
        assert!(close(d.confidence, 0.9, 1e-12));
    }

    #[test]
    fn search_falls_back_when_nothing_certifies() {
        let l = [0.9, 0.95];
        let w = [1.0, 1.0];
        let costs = [1.0, 10.0];
        let d = find_min_cost_subset(&exact_query(&l, &w, &costs, 0.99, 1)).unwrap();
        assert_eq!(d.arms, vec![0, 1]);
        assert!(d.fell_back_to_all);
        assert!(close(d.confidence, 0.855, 1e-12)); // 0.9 * 0.95
    }

    #[test]
    fn cardinality_floor_forces_the_full_set() {
        let l = [0.9, 0.9, 0.9];
        let w = [1.0, 1.0, 1.0];
        let costs = [1.0, 2.0, 3.0];
        let d = find_min_cost_subset(&exact_query(&l, &w, &costs, 0.5, 3)).unwrap();
        assert_eq!(d.arms, vec![0, 1, 2]);
        assert!(!d.fell_back_to_all);
    }

    #[test]
    fn search_handles_larger_pools_within_the_limit() {
        let k = 12;
        let l = vec![0.7; k];
        let w = vec![1.0; k];
        let costs: Vec<f64> = (0..k).map(|i| (i + 1) as f64).collect();
        let d = find_min_cost_subset(&exact_query(&l, &w, &costs, 0.999, 1)).unwrap();
        assert_eq!(d.arms.len(), k);
        assert!(d.fell_back_to_all);
        assert!((0.0..=1.0).contains(&d.confidence));

        let too_many = vec![0.5; 21];
        let weights = vec![1.0; 21];
        let costs = vec![1.0; 21];
        assert!(find_min_cost_subset(&exact_query(&too_many, &weights, &costs, 0.5, 1)).is_err());
    }

    #[test]
    fn equal_cost_ties_prefer_confidence_then_lexicographic() {
        // Singletons all cost 1; arm 2 has the highest bound.
        let l = [0.6, 0.7, 0.9];
        let w = [1.0, 1.0, 1.0];
        let costs = [1.0, 1.0, 1.0];
        let d = find_min_cost_subset(&exact_query(&l, &w, &costs, 0.55, 1)).unwrap();
        assert_eq!(d.arms, vec![2]);
        // With identical bounds the smallest arm set wins.
        let l = [0.8, 0.8, 0.8];
        let d = find_min_cost_subset(&exact_query(&l, &w, &costs, 0.55, 1)).unwrap();
        assert_eq!(d.arms, vec![0]);
    }

    proptest! {
        #[test]
        fn exact_is_monotone_in_each_lower_bound(
            k in 2usize..5,
            seed in 0u64..1000,
            bump_idx in 0usize..5,
        ) {
            let mut r = crate::rng::stream(seed, &[0x99]);
            let l: Vec<f64> = (0..k).map(|_| 0.05 + 0.9 * crate::rng::unit_open(&mut r)).collect();
            let w: Vec<f64> = (0..k).map(|_| 0.1 + crate::rng::unit_open(&mut r)).collect();
            let arms: Vec<usize> = (0..k).collect();
            let base = subset_confidence_exact(&arms, &l, &w).unwrap();
            let mut bumped = l.clone();
            let i = bump_idx % k;
            bumped[i] = (bumped[i] + 0.05).min(1.0);
            let after = subset_confidence_exact(&arms, &bumped, &w).unwrap();
            prop_assert!(after + 1e-12 >= base, "bumping L[{i}] lowered confidence");
        }

        #[test]
        fn chosen_cost_is_monotone_in_delta(
            seed in 0u64..500,
        ) {
            let mut r = crate::rng::stream(seed, &[0xA1]);
            let k = 4;
            let l: Vec<f64> = (0..k).map(|_| 0.3 + 0.68 * crate::rng::unit_open(&mut r)).collect();
            let w: Vec<f64> = (0..k).map(|_| 0.2 + crate::rng::unit_open(&mut r)).collect();
            let costs: Vec<f64> = (0..k).map(|_| 0.1 + 5.0 * crate::rng::unit_open(&mut r)).collect();
            let mut last_cost = f64::INFINITY;
            // Decreasing delta can only make the chosen subset cheaper.
            for &delta in &[0.99, 0.9, 0.7, 0.5, 0.2] {
                let d = find_min_cost_subset(&exact_query(&l, &w, &costs, delta, 1)).unwrap();
                prop_assert!(d.cost <= last_cost + 1e-12);
                last_cost = d.cost;
            }
        }

        #[test]
        fn singleton_confidence_equals_lower_bound(
            lb in 0.0f64..1.0,
            weight in 0.01f64..5.0,
        ) {
            let got = subset_confidence_exact(&[0], &[lb], &[weight]).unwrap();
            prop_assert!((got - lb).abs() < 1e-12);
        }
    }
}
