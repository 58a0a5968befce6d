//! Online pairwise correlation of annotator rewards and correlated binary
//! sampling through a Gaussian copula.
//!
//! The running estimator follows the single-pass recurrences exactly as the
//! engine consumes them: univariate statistics first, then pairwise
//! deviation products taken against the already-updated means. The pairwise
//! products therefore carry a small (vanishing) finite-sample shrinkage
//! relative to the batch sample covariance; see the module tests.

#![allow(clippy::needless_range_loop)]

use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::linalg::Matrix;
use crate::numeric::std_normal_cdf;
use crate::rng;

/// Running pairwise correlation statistics across K arms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationState {
    /// Per-arm observation counts.
    pub counts: Vec<u64>,
    /// Per-arm running means of the 0/1 rewards.
    pub means: Vec<f64>,
    /// Per-arm running standard deviations (sample, n-1 denominator).
    pub sigmas: Vec<f64>,
    /// Accumulated deviation products; diagonal holds the univariate M2.
    pub m: Matrix,
    /// Pairwise co-occurrence counts.
    pub pair_counts: Vec<u64>,
    /// Current correlation estimate; identity until data arrives.
    pub c: Matrix,
    k: usize,
}

impl CorrelationState {
    pub fn new(k: usize) -> Self {
        Self {
            counts: vec![0; k],
            means: vec![0.0; k],
            sigmas: vec![0.0; k],
            m: Matrix::zeros(k),
            pair_counts: vec![0; k * k],
            c: Matrix::identity(k),
            k,
        }
    }

    pub fn arms(&self) -> usize {
        self.k
    }

    pub fn correlation_matrix(&self) -> &Matrix {
        &self.c
    }

    /// Fold one round of rewards for the selected arms into the estimate.
    /// `selected` lists arm indices; `rewards` aligns with it.
    pub fn update(&mut self, selected: &[usize], rewards: &[u8]) {
        debug_assert_eq!(selected.len(), rewards.len());
        // Univariate pass: Welford mean/M2 per selected arm.
        for (&i, &r) in selected.iter().zip(rewards) {
            let r = f64::from(r);
            let old_mean = self.means[i];
            self.counts[i] += 1;
            let delta = r - old_mean;
            self.means[i] = old_mean + delta / self.counts[i] as f64;
            *self.m.at_mut(i, i) += (r - self.means[i]) * delta;
            self.sigmas[i] = if self.counts[i] > 1 {
                (self.m.at(i, i) / (self.counts[i] - 1) as f64).sqrt()
            } else {
                0.0
            };
        }
        // Pairwise pass against the freshly updated means.
        for (a, (&i, &ri)) in selected.iter().zip(rewards).enumerate() {
            for (&j, &rj) in selected.iter().zip(rewards).skip(a + 1) {
                let di = f64::from(ri) - self.means[i];
                let dj = f64::from(rj) - self.means[j];
                let mij = self.m.at(i, j) + di * dj;
                *self.m.at_mut(i, j) = mij;
                *self.m.at_mut(j, i) = mij;
                let n = {
                    self.pair_counts[i * self.k + j] += 1;
                    self.pair_counts[j * self.k + i] = self.pair_counts[i * self.k + j];
                    self.pair_counts[i * self.k + j]
                };
                if n > 1 && self.sigmas[i] > 0.0 && self.sigmas[j] > 0.0 {
                    let cov = mij / (n - 1) as f64;
                    let rho = (cov / (self.sigmas[i] * self.sigmas[j])).clamp(-1.0, 1.0);
                    *self.c.at_mut(i, j) = rho;
                    *self.c.at_mut(j, i) = rho;
                }
                // A zero sigma leaves the previous entry in place.
            }
        }
    }
}

/// Project a symmetric matrix to a positive semidefinite correlation matrix:
/// clamp eigenvalues below 1e-10 up to 1e-10, reconstruct, and rescale to a
/// unit diagonal.
pub fn make_psd(c_est: &Matrix) -> Result<Matrix> {
    const FLOOR: f64 = 1e-10;
    let n = c_est.size();
    let (vals, v) = c_est.jacobi_eigen()?;
    let clamped: Vec<f64> = vals.iter().map(|&l| l.max(FLOOR)).collect();
    let mut rebuilt = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += v.at(i, k) * clamped[k] * v.at(j, k);
            }
            *rebuilt.at_mut(i, j) = s;
        }
    }
    let scale: Vec<f64> = (0..n).map(|i| rebuilt.at(i, i).sqrt()).collect();
    let mut out = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            *out.at_mut(i, j) = if i == j {
                1.0
            } else {
                (rebuilt.at(i, j) / (scale[i] * scale[j])).clamp(-1.0, 1.0)
            };
        }
    }
    Ok(out)
}

/// A factor B with B B' equal to the given PSD matrix: Cholesky when the
/// matrix is numerically positive definite, eigen square root otherwise.
pub(crate) fn mixing_factor(c_psd: &Matrix) -> Result<Matrix> {
    if let Ok(l) = c_psd.cholesky() {
        return Ok(l);
    }
    let n = c_psd.size();
    let (vals, v) = c_psd.jacobi_eigen()?;
    let mut b = Matrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            *b.at_mut(i, k) = v.at(i, k) * vals[k].max(0.0).sqrt();
        }
    }
    Ok(b)
}

/// Draw `n` correlated binary outcome rows over K arms through a Gaussian
/// copula: latent normals with correlation `make_psd(c_est)` are pushed
/// through the standard normal CDF and thresholded at the marginals. Row
/// bit j holds arm j's outcome.
pub fn sample_correlated_binary(
    n: usize,
    mu: &[f64],
    c_est: &Matrix,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<u32>> {
    let k = mu.len();
    assert_eq!(c_est.size(), k);
    assert!(k <= 32, "bitmask rows support at most 32 arms");
    debug_assert!(mu.iter().all(|&m| m > 0.0 && m < 1.0));
    let c_psd = make_psd(c_est)?;
    let factor = mixing_factor(&c_psd)?;
    let mut rows = Vec::with_capacity(n);
    let mut g = vec![0.0; k];
    for _ in 0..n {
        for gi in g.iter_mut() {
            *gi = rng::std_normal(rng);
        }
        let z = factor.matvec(&g);
        let mut row = 0u32;
        for j in 0..k {
            let u = std_normal_cdf(z[j]);
            if u < mu[j] {
                row |= 1 << j;
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, purpose};

    // The pairwise recurrence shrinks each increment by (n-1)/n, so the
    // estimate approaches its limit at a log(n)/n rate.
    #[test]
    fn comoving_arms_approach_full_correlation() {
        let mut st = CorrelationState::new(2);
        let rounds = 20_000u64;
        for t in 0..rounds {
            let r = u8::from(t % 2 == 0);
            st.update(&[0, 1], &[r, r]);
        }
        let gap = 2.0 * (rounds as f64).ln() / rounds as f64;
        assert!(st.c.at(0, 1) > 1.0 - gap, "rho = {}", st.c.at(0, 1));
    }

    #[test]
    fn complementary_arms_approach_negative_one() {
        let mut st = CorrelationState::new(2);
        let rounds = 20_000u64;
        for t in 0..rounds {
            let r = u8::from(t % 2 == 0);
            st.update(&[0, 1], &[r, 1 - r]);
        }
        let gap = 2.0 * (rounds as f64).ln() / rounds as f64;
        assert!(st.c.at(0, 1) < -1.0 + gap, "rho = {}", st.c.at(0, 1));
    }

    #[test]
    fn univariate_recurrence_matches_hand_computation() {
        let mut st = CorrelationState::new(1);
        for &r in &[1u8, 0, 1] {
            st.update(&[0], &[r]);
        }
        assert!((st.means[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((st.m.at(0, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((st.sigmas[0] - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_arm_leaves_correlation_at_identity() {
        let mut st = CorrelationState::new(2);
        for t in 0..20 {
            st.update(&[0, 1], &[1, u8::from(t % 2 == 0)]);
        }
        // Arm 0 never varies: sigma 0, entry untouched.
        assert_eq!(st.c.at(0, 1), 0.0);
    }

    /// The running estimator against the batch sample correlation. The
    /// pairwise products use post-update means, which shrinks each increment
    /// by (n-1)/n; the gap decays like log(n)/n and a replay of the same
    /// recurrence reproduces the estimate bit for bit.
    #[test]
    fn estimator_approaches_batch_sample_correlation() {
        let k = 3;
        let n_rounds = 10_000usize;
        let mut r = rng::stream(5, &[0x51]);
        let mut st = CorrelationState::new(k);
        let mut data: Vec<Vec<f64>> = (0..k).map(|_| Vec::with_capacity(n_rounds)).collect();
        for _ in 0..n_rounds {
            // Correlated Bernoullis from a shared latent coin.
            let shared = rng::unit_open(&mut r) < 0.5;
            let rewards: Vec<u8> = (0..k)
                .map(|_| {
                    let flip = rng::unit_open(&mut r) < 0.25;
                    u8::from(shared ^ flip)
                })
                .collect();
            st.update(&[0, 1, 2], &rewards);
            for (col, &v) in data.iter_mut().zip(&rewards) {
                col.push(f64::from(v));
            }
        }
        // Batch sample correlation.
        let n = n_rounds as f64;
        let mean: Vec<f64> = data.iter().map(|c| c.iter().sum::<f64>() / n).collect();
        let sd: Vec<f64> = data
            .iter()
            .zip(&mean)
            .map(|(c, m)| (c.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
            .collect();
        for i in 0..k {
            for j in i + 1..k {
                let cov = data[i]
                    .iter()
                    .zip(&data[j])
                    .map(|(a, b)| (a - mean[i]) * (b - mean[j]))
                    .sum::<f64>()
                    / (n - 1.0);
                let batch = cov / (sd[i] * sd[j]);
                let got = st.c.at(i, j);
                // log(1e4)/1e4 scale shrinkage.
                assert!(
                    (got - batch).abs() < 2e-3,
                    "({i},{j}): running {got} vs batch {batch}"
                );
            }
        }
        // Replaying the recurrence independently reproduces it exactly.
        let mut replay = CorrelationState::new(k);
        for t in 0..n_rounds {
            let rewards: Vec<u8> = (0..k).map(|a| data[a][t] as u8).collect();
            replay.update(&[0, 1, 2], &rewards);
        }
        for i in 0..k {
            for j in 0..k {
                assert_eq!(replay.c.at(i, j), st.c.at(i, j));
            }
        }
    }

    #[test]
    fn psd_projection_fixes_invalid_offdiagonal() {
        let m = Matrix::from_rows(&[vec![1.0, 1.2], vec![1.2, 1.0]]);
        let p = make_psd(&m).unwrap();
        assert!((p.at(0, 0) - 1.0).abs() < 1e-12);
        assert!(p.at(0, 1) <= 1.0 && p.at(0, 1) >= -1.0);
        let (vals, _) = p.jacobi_eigen().unwrap();
        assert!(vals.iter().all(|&l| l >= -1e-12));
    }

    #[test]
    fn psd_projection_is_identity_on_identity() {
        let p = make_psd(&Matrix::identity(4)).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((p.at(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_projection_is_idempotent() {
        let m = Matrix::from_rows(&[
            vec![1.0, 0.9, -0.8],
            vec![0.9, 1.0, 0.7],
            vec![-0.8, 0.7, 1.0],
        ]);
        let once = make_psd(&m).unwrap();
        let twice = make_psd(&once).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((once.at(i, j) - twice.at(i, j)).abs() < 1e-10);
            }
        }
        let (vals, _) = once.jacobi_eigen().unwrap();
        assert!(vals.iter().all(|&l| l >= -1e-12));
    }

    #[test]
    fn independent_sampling_preserves_marginals_and_decorrelates() {
        let mu = [0.3, 0.62, 0.85];
        let n = 1_000_000usize;
        let mut r = rng::stream(21, &[purpose::COPULA_SAMPLE]);
        let rows = sample_correlated_binary(n, &mu, &Matrix::identity(3), &mut r).unwrap();
        let mut means = [0.0f64; 3];
        let mut cross = [0.0f64; 3]; // pairs (0,1), (0,2), (1,2)
        for &row in &rows {
            let x: [f64; 3] = [
                f64::from(row & 1),
                f64::from((row >> 1) & 1),
                f64::from((row >> 2) & 1),
            ];
            for (m, v) in means.iter_mut().zip(&x) {
                *m += v;
            }
            cross[0] += x[0] * x[1];
            cross[1] += x[0] * x[2];
            cross[2] += x[1] * x[2];
        }
        for m in &mut means {
            *m /= n as f64;
        }
        for (j, &target) in mu.iter().enumerate() {
            let se = (target * (1.0 - target) / n as f64).sqrt();
            assert!(
                (means[j] - target).abs() < 3.0 * se + 1e-9,
                "column {j}: {} vs {target}",
                means[j]
            );
        }
        let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
        for (idx, &(i, j)) in pairs.iter().enumerate() {
            let cov = cross[idx] / n as f64 - means[i] * means[j];
            let corr = cov
                / ((means[i] * (1.0 - means[i])).sqrt() * (means[j] * (1.0 - means[j])).sqrt());
            assert!(corr.abs() < 0.02, "pair ({i},{j}) corr {corr}");
        }
    }

    #[test]
    fn comonotone_sampling_yields_identical_columns() {
        let mu = [0.7, 0.7, 0.7];
        let mut ones = Matrix::zeros(3);
        for i in 0..3 {
            for j in 0..3 {
                *ones.at_mut(i, j) = 1.0;
            }
        }
        let mut r = rng::stream(22, &[purpose::COPULA_SAMPLE]);
        let rows = sample_correlated_binary(20_000, &mu, &ones, &mut r).unwrap();
        for &row in &rows {
            assert!(row == 0 || row == 0b111, "columns diverged: {row:03b}");
        }
    }

    #[test]
    fn sampling_is_deterministic_given_seed() {
        let mu = [0.4, 0.6];
        let c = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 1.0]]);
        let mut r1 = rng::stream(9, &[purpose::COPULA_SAMPLE, 3]);
        let mut r2 = rng::stream(9, &[purpose::COPULA_SAMPLE, 3]);
        let a = sample_correlated_binary(500, &mu, &c, &mut r1).unwrap();
        let b = sample_correlated_binary(500, &mu, &c, &mut r2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empirical_binary_correlation_is_monotone_in_latent_rho() {
        let mu = [0.5, 0.5];
        let n = 200_000;
        let mut last = -2.0;
        for &rho in &[0.0, 0.5, 0.9] {
            let c = Matrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]);
            let mut r = rng::stream(31, &[purpose::COPULA_SAMPLE, rho.to_bits()]);
            let rows = sample_correlated_binary(n, &mu, &c, &mut r).unwrap();
            let mut m0 = 0.0;
            let mut m1 = 0.0;
            let mut x01 = 0.0;
            for &row in &rows {
                let a = f64::from(row & 1);
                let b = f64::from((row >> 1) & 1);
                m0 += a;
                m1 += b;
                x01 += a * b;
            }
            m0 /= n as f64;
            m1 /= n as f64;
            let corr = (x01 / n as f64 - m0 * m1)
                / ((m0 * (1.0 - m0)).sqrt() * (m1 * (1.0 - m1)).sqrt());
            assert!(corr > last + 0.05, "rho {rho}: corr {corr} after {last}");
            last = corr;
        }
    }
}
