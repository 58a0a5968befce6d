//! Per-arm confidence pipeline: linear-bandit estimate with a pessimistic
//! width, a two-component Beta-mixture posterior calibrating that estimate
//! into a correctness probability, Laplace smoothing toward 1/2, and the
//! vote weight.

use crate::error::{Error, Result};
use crate::numeric::beta_ln_pdf;
use crate::types::{ArmState, BetaShapes, ConfidenceRecord};

/// Linear estimate for one arm: q = e' A^{-1} b, width = alpha sqrt(e' A^{-1} e),
/// and the clipped lower bound theta = clip(q - width, 0, 1).
pub fn linucb_estimate(state: &ArmState, e: &[f64], alpha_explore: f64) -> Result<(f64, f64, f64)> {
    if e.len() != state.dim() {
        return Err(Error::DimensionMismatch {
            what: "query embedding".into(),
            expected: state.dim(),
            got: e.len(),
        });
    }
    let ax = state.a_inv.matvec(e);
    let q = crate::linalg::dot(&ax, &state.b);
    let quad = crate::linalg::dot(&ax, e).max(0.0);
    let width = alpha_explore * quad.sqrt();
    if !q.is_finite() || !width.is_finite() {
        return Err(Error::NonFinite("linear confidence estimate".into()));
    }
    let theta = (q - width).clamp(0.0, 1.0);
    Ok((q, width, theta))
}

/// Two-component posterior P(correct | observed value) with prior weights
/// (mu, 1 - mu) on the agree/disagree Beta components.
///
/// Until both components are fitted (each class needs two samples) the
/// estimator is the identity: the input passes through unchanged.
pub fn beta_mixture_posterior(state: &ArmState, q: f64, epsilon: f64) -> f64 {
    let Some((one, zero)) = state.mixture() else {
        return q;
    };
    let mu = state.mu();
    if mu >= 1.0 {
        return 1.0;
    }
    if mu <= 0.0 {
        return 0.0;
    }
    // Densities evaluated away from the endpoints so shapes below 1 cannot
    // produce infinities.
    let qc = q.clamp(epsilon, 1.0 - epsilon);
    let log_one = mu.ln() + beta_ln_pdf(qc, one.alpha, one.beta);
    let log_zero = (1.0 - mu).ln() + beta_ln_pdf(qc, zero.alpha, zero.beta);
    let diff = log_zero - log_one;
    if diff > 700.0 {
        0.0
    } else if diff < -700.0 {
        1.0
    } else {
        1.0 / (1.0 + diff.exp())
    }
}

/// Laplace smoothing with weight w = lambda_r * ln(t + 1):
/// L = (l_bar * n + w / 2) / (n + w).
pub fn regularize(l_bar: f64, n: u64, lambda_r: f64, t: u64) -> f64 {
    if lambda_r == 0.0 {
        return l_bar;
    }
    let w = lambda_r * ((t + 1) as f64).ln();
    regularize_with_weight(l_bar, n as f64, w)
}

/// Smoothing with an explicit weight; a convex combination of `l_bar` and 1/2.
pub fn regularize_with_weight(l_bar: f64, n: f64, w: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&l_bar));
    if n + w <= 0.0 {
        return l_bar;
    }
    (l_bar * n + 0.5 * w) / (n + w)
}

/// Vote weight mu * q, clamped below at zero so a vote can never count
/// against its own label.
pub fn vote_weight(mu: f64, q: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&mu));
    mu * q.max(0.0)
}

/// Push one observed confidence value into the agreement-class statistics
/// and refit that class's Beta shapes by the method of moments once it has
/// at least two samples. The variance is floored at `epsilon`; a
/// nonpositive concentration is clamped to `epsilon`.
pub fn update_beta_params(state: &mut ArmState, q: f64, h: u8, epsilon: f64) {
    debug_assert!((0.0..=1.0).contains(&q), "observed value must be pre-clipped");
    debug_assert!(h <= 1);
    let stats = &mut state.class_stats[h as usize];
    stats.push(q);
    if stats.count < 2 {
        return;
    }
    let s2 = stats.population_variance().max(epsilon);
    // Keep the mean strictly inside (0, 1) so both shapes stay positive.
    let m = stats.mean.clamp(epsilon, 1.0 - epsilon);
    let mut nu = m * (1.0 - m) / s2 - 1.0;
    if nu <= 0.0 {
        nu = epsilon;
    }
    state.beta[h as usize] = Some(BetaShapes {
        alpha: m * nu,
        beta: (1.0 - m) * nu,
    });
}

/// Run the full pipeline for one arm at round `t` (whose state still holds
/// the pre-round counters).
pub fn evaluate_arm(
    state: &ArmState,
    e: &[f64],
    alpha_explore: f64,
    lambda_r: f64,
    t: u64,
    epsilon: f64,
) -> Result<ConfidenceRecord> {
    let (q, width, theta) = linucb_estimate(state, e, alpha_explore)?;
    let l_bar = beta_mixture_posterior(state, theta, epsilon);
    let l = regularize(l_bar, state.queries, lambda_r, t);
    let omega = vote_weight(state.mu(), q);
    Ok(ConfidenceRecord {
        q,
        width,
        theta,
        l_bar,
        l,
        omega,
    })
}
