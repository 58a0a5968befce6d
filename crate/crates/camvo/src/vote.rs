//! Weighted majority voting, agreement rewards, and the online
//! weighted-majority baseline that always queries every arm.

/// Label with the maximal total weight among the labels actually voted for.
/// Ties break toward the smallest label index.
pub fn weighted_majority(votes: &[u32], weights: &[f64], num_labels: u32) -> u32 {
    assert!(!votes.is_empty(), "weighted majority needs at least one vote");
    assert_eq!(votes.len(), weights.len(), "votes and weights must align");
    let m = num_labels as usize;
    let mut tally = vec![0.0f64; m];
    let mut present = vec![false; m];
    for (&v, &w) in votes.iter().zip(weights) {
        debug_assert!(w >= 0.0, "vote weights must be nonnegative");
        let v = v as usize;
        tally[v] += w;
        present[v] = true;
    }
    let mut best: Option<(u32, f64)> = None;
    for label in 0..m {
        if !present[label] {
            continue;
        }
        match best {
            Some((_, w)) if tally[label] <= w => {}
            _ => best = Some((label as u32, tally[label])),
        }
    }
    best.expect("at least one label is present").0
}

/// Agreement rewards: 1 for every arm that voted the predicted label.
pub fn rewards_from_vote(votes: &[u32], predicted: u32) -> Vec<u8> {
    votes.iter().map(|&v| u8::from(v == predicted)).collect()
}

/// State of the online weighted-majority baseline: per-arm agreement counts
/// with its own past predictions. Weights start at 1 (uniform first vote)
/// and become empirical agreement rates afterwards.
#[derive(Clone, Debug)]
pub struct OnlineMajorityState {
    agree: Vec<u64>,
    rounds: u64,
}

impl OnlineMajorityState {
    pub fn new(num_arms: usize) -> Self {
        Self {
            agree: vec![0; num_arms],
            rounds: 0,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        if self.rounds == 0 {
            vec![1.0; self.agree.len()]
        } else {
            self.agree
                .iter()
                .map(|&a| a as f64 / self.rounds as f64)
                .collect()
        }
    }

    /// One baseline round: predict with the current weights over all K
    /// votes, then fold the agreement outcomes into the weights.
    pub fn step(&mut self, votes: &[u32], num_labels: u32) -> (u32, Vec<u8>) {
        assert_eq!(votes.len(), self.agree.len(), "baseline needs all K votes");
        let predicted = weighted_majority(votes, &self.weights(), num_labels);
        let rewards = rewards_from_vote(votes, predicted);
        self.rounds += 1;
        for (count, &r) in self.agree.iter_mut().zip(&rewards) {
            *count += u64::from(r);
        }
        (predicted, rewards)
    }
}

/// Single baseline step as a pure function: predicts with the given weights
/// and returns the weights updated to the empirical agreement rates implied
/// by `(agree_counts + reward) / (rounds + 1)`.
pub fn baseline_step(
    agree_counts: &[u64],
    rounds: u64,
    votes: &[u32],
    num_labels: u32,
) -> (u32, Vec<f64>) {
    let mut st = OnlineMajorityState {
        agree: agree_counts.to_vec(),
        rounds,
    };
    let (predicted, _) = st.step(votes, num_labels);
    (predicted, st.weights())
}
