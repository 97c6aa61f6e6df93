//! Finite action-set learning automaton primitives.
//!
//! An automaton over `n` actions is fully described by its action
//! probability vector. Reinforcement follows the linear reward-inaction
//! scheme under a binary (P-model) environment:
//!
//! ```text
//! reward:   q_i <- q_i + λ(1 - q_i)       (chosen action i)
//!           q_j <- q_j - λ q_j            (every j != i)
//! penalty:  q unchanged
//! ```
//!
//! The reward step is a convex combination of `q` and the unit vector `e_i`,
//! so the sum stays at one without any renormalization pass.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance on `Σq = 1`.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Up to this many entries, `top_k` uses a bounded insertion buffer.
const SMALL_K: usize = 16;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutomatonError {
    #[error("invalid action-set size: {0}")]
    InvalidSize(String),
    #[error("action index {index} out of range for {len} actions")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("learning rate must satisfy 0 < λ < 1, got {0}")]
    InvalidLearningRate(f64),
    #[error("not a probability distribution: {0}")]
    NotADistribution(String),
}

/// Binary environment response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Response {
    Penalty,
    Reward,
}

impl Response {
    pub fn from_hit(hit: bool) -> Self {
        if hit {
            Response::Reward
        } else {
            Response::Penalty
        }
    }

    pub fn value(self) -> u8 {
        match self {
            Response::Penalty => 0,
            Response::Reward => 1,
        }
    }
}

/// Step size λ, restricted to the open interval (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct LearningRate(f64);

impl LearningRate {
    pub fn new(lambda: f64) -> Result<Self, AutomatonError> {
        if lambda > 0.0 && lambda < 1.0 {
            Ok(Self(lambda))
        } else {
            Err(AutomatonError::InvalidLearningRate(lambda))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for LearningRate {
    type Error = AutomatonError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<LearningRate> for f64 {
    fn from(rate: LearningRate) -> f64 {
        rate.0
    }
}

/// The action probability vector `q(t)` of one automaton.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProbabilityVector {
    probs: Vec<f64>,
}

impl ActionProbabilityVector {
    /// Uniform distribution over `n` actions.
    pub fn uniform(n: usize) -> Result<Self, AutomatonError> {
        if n == 0 {
            return Err(AutomatonError::InvalidSize(
                "an automaton needs at least one action".into(),
            ));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Wraps an explicit distribution, checking non-negativity and the sum.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self, AutomatonError> {
        if probs.is_empty() {
            return Err(AutomatonError::InvalidSize(
                "an automaton needs at least one action".into(),
            ));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(AutomatonError::NotADistribution(format!(
                "component {i} = {p} is outside [0, 1]"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(AutomatonError::NotADistribution(format!(
                "components sum to {sum}"
            )));
        }
        Ok(Self { probs })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.probs.get(index).copied()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.probs
    }

    /// Applies one linear reward-inaction step in place.
    ///
    /// On [`Response::Penalty`] the vector is left untouched.
    pub fn lri_update(
        &mut self,
        chosen: usize,
        response: Response,
        rate: LearningRate,
    ) -> Result<(), AutomatonError> {
        if chosen >= self.probs.len() {
            return Err(AutomatonError::IndexOutOfRange {
                index: chosen,
                len: self.probs.len(),
            });
        }
        if response == Response::Penalty {
            return Ok(());
        }
        let lambda = rate.get();
        for (j, q) in self.probs.iter_mut().enumerate() {
            if j == chosen {
                *q += lambda * (1.0 - *q);
            } else {
                *q -= lambda * *q;
            }
        }
        Ok(())
    }

    /// Value-returning form of [`lri_update`](Self::lri_update).
    pub fn updated(
        &self,
        chosen: usize,
        response: Response,
        rate: LearningRate,
    ) -> Result<Self, AutomatonError> {
        let mut next = self.clone();
        next.lri_update(chosen, response, rate)?;
        Ok(next)
    }

    /// Indices of the `min(k, n)` most probable actions, most probable first.
    /// Equal probabilities rank by lower index.
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        let n = self.probs.len();
        let k = k.min(n);
        if k == 0 {
            return Vec::new();
        }
        let by_rank = |a: &usize, b: &usize| rank_order(&self.probs, *a, *b);
        if k <= SMALL_K && k < n {
            // Insertion into a k-slot buffer, no n-sized scratch.
            let mut best: Vec<usize> = Vec::with_capacity(k + 1);
            for i in 0..n {
                if best.len() == k && by_rank(&i, &best[k - 1]) != Ordering::Less {
                    continue;
                }
                let at = best.partition_point(|b| by_rank(b, &i) == Ordering::Less);
                best.insert(at, i);
                best.truncate(k);
            }
            return best;
        }
        let mut idx: Vec<usize> = (0..n).collect();
        if k < n {
            idx.select_nth_unstable_by(k - 1, by_rank);
            idx.truncate(k);
        }
        idx.sort_unstable_by(by_rank);
        idx
    }

    /// Draws an action index with probability `q_i`.
    pub fn sample_action<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut cumulative = 0.0;
        for (i, q) in self.probs.iter().enumerate() {
            cumulative += q;
            if u < cumulative {
                return i;
            }
        }
        // Rounding left `u` above the final cumulative sum.
        self.probs
            .iter()
            .rposition(|q| *q > 0.0)
            .unwrap_or(self.probs.len() - 1)
    }

    /// Grows the action set to `new_n`. Each new action is seeded with mass
    /// `1/new_n` and the whole vector is then renormalized, so the learned
    /// ratios between existing actions are kept.
    pub fn expand_actions(&mut self, new_n: usize) -> Result<(), AutomatonError> {
        let old_n = self.probs.len();
        if new_n < old_n {
            return Err(AutomatonError::InvalidSize(format!(
                "cannot shrink from {old_n} to {new_n} actions"
            )));
        }
        if new_n == old_n {
            return Ok(());
        }
        let seed = 1.0 / new_n as f64;
        self.probs.resize(new_n, seed);
        let total: f64 = self.probs.iter().sum();
        for q in &mut self.probs {
            *q /= total;
        }
        Ok(())
    }

    /// Value-returning form of [`expand_actions`](Self::expand_actions).
    pub fn expanded(&self, new_n: usize) -> Result<Self, AutomatonError> {
        let mut next = self.clone();
        next.expand_actions(new_n)?;
        Ok(next)
    }

    /// `|Σq - 1|`.
    pub fn normalization_error(&self) -> f64 {
        (self.probs.iter().sum::<f64>() - 1.0).abs()
    }
}

/// Descending probability, then ascending index.
fn rank_order(probs: &[f64], a: usize, b: usize) -> Ordering {
    probs[b]
        .partial_cmp(&probs[a])
        .unwrap_or(Ordering::Equal)
        .then(a.cmp(&b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rate(l: f64) -> LearningRate {
        LearningRate::new(l).unwrap()
    }

    fn assert_close(got: &[f64], want: &[f64]) {
        assert_eq!(got.len(), want.len());
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() <= 1e-12, "got {got:?}, want {want:?}");
        }
    }

    #[test]
    fn uniform_vectors() {
        assert_eq!(
            ActionProbabilityVector::uniform(4).unwrap().as_slice(),
            &[0.25; 4]
        );
        assert_eq!(ActionProbabilityVector::uniform(1).unwrap().as_slice(), &[1.0]);
        let ten = ActionProbabilityVector::uniform(10).unwrap();
        assert!(ten.as_slice().iter().all(|q| *q == 0.1));
        assert!(ten.normalization_error() <= NORMALIZATION_TOLERANCE);
        assert!(matches!(
            ActionProbabilityVector::uniform(0),
            Err(AutomatonError::InvalidSize(_))
        ));
    }

    #[test]
    fn learning_rate_is_open_interval() {
        assert!(LearningRate::new(0.99).is_ok());
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(LearningRate::new(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn reward_moves_mass_to_chosen() {
        let q = ActionProbabilityVector::from_probs(vec![0.5, 0.5]).unwrap();
        let next = q.updated(0, Response::Reward, rate(0.2)).unwrap();
        // 0.5 + 0.2 * 0.5 and 0.5 - 0.2 * 0.5
        assert_close(next.as_slice(), &[0.6, 0.4]);
        assert!(next.normalization_error() <= NORMALIZATION_TOLERANCE);
    }

    #[test]
    fn penalty_is_inaction() {
        let q = ActionProbabilityVector::from_probs(vec![0.3, 0.7]).unwrap();
        for l in [0.01, 0.5, 0.99] {
            assert_eq!(q.updated(1, Response::Penalty, rate(l)).unwrap(), q);
        }
    }

    #[test]
    fn absorbing_vertex_is_fixed() {
        let q = ActionProbabilityVector::from_probs(vec![1.0, 0.0]).unwrap();
        let next = q.updated(0, Response::Reward, rate(0.5)).unwrap();
        assert_eq!(next.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn update_rejects_bad_index() {
        let mut q = ActionProbabilityVector::uniform(3).unwrap();
        assert_eq!(
            q.lri_update(3, Response::Reward, rate(0.1)),
            Err(AutomatonError::IndexOutOfRange { index: 3, len: 3 })
        );
        assert_eq!(q, ActionProbabilityVector::uniform(3).unwrap());
    }

    #[test]
    fn top_k_examples() {
        let q = ActionProbabilityVector::from_probs(vec![0.1, 0.6, 0.3]).unwrap();
        assert_eq!(q.top_k(2), vec![1, 2]);
        let tie = ActionProbabilityVector::from_probs(vec![0.5, 0.5]).unwrap();
        assert_eq!(tie.top_k(1), vec![0]);
        let q = ActionProbabilityVector::from_probs(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(q.top_k(10), vec![2, 1, 0]);
        assert!(q.top_k(0).is_empty());
    }

    #[test]
    fn top_k_uniform_is_index_order() {
        let q = ActionProbabilityVector::uniform(7).unwrap();
        assert_eq!(q.top_k(4), vec![0, 1, 2, 3]);
        assert_eq!(q.top_k(7), (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn sample_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let left = ActionProbabilityVector::from_probs(vec![1.0, 0.0]).unwrap();
        let right = ActionProbabilityVector::from_probs(vec![0.0, 1.0]).unwrap();
        for _ in 0..1000 {
            assert_eq!(left.sample_action(&mut rng), 0);
            assert_eq!(right.sample_action(&mut rng), 1);
        }
    }

    #[test]
    fn sample_frequencies_pass_chi_square() {
        let q = ActionProbabilityVector::from_probs(vec![0.3, 0.7]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0xFA1A);
        let draws = 10_000usize;
        let mut hist = [0usize; 2];
        for _ in 0..draws {
            hist[q.sample_action(&mut rng)] += 1;
        }
        let chi2: f64 = hist
            .iter()
            .zip(q.as_slice())
            .map(|(&obs, &p)| {
                let exp = p * draws as f64;
                (obs as f64 - exp).powi(2) / exp
            })
            .sum();
        // 1 dof; 3σ two-sided corresponds to χ² ≤ 9.
        assert!(chi2 <= 9.0, "chi2 = {chi2}, hist = {hist:?}");
        let sigma = (0.3f64 * 0.7 / draws as f64).sqrt();
        let freq0 = hist[0] as f64 / draws as f64;
        assert!((freq0 - 0.3).abs() <= 3.0 * sigma);
    }

    #[test]
    fn sample_is_reproducible() {
        let q = ActionProbabilityVector::uniform(5).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        let xs: Vec<_> = (0..200).map(|_| q.sample_action(&mut a)).collect();
        let ys: Vec<_> = (0..200).map(|_| q.sample_action(&mut b)).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn expand_examples() {
        let q = ActionProbabilityVector::from_probs(vec![0.5, 0.5]).unwrap();
        assert_eq!(q.expanded(2).unwrap(), q);

        let single = ActionProbabilityVector::uniform(1).unwrap();
        assert_close(single.expanded(2).unwrap().as_slice(), &[2.0 / 3.0, 1.0 / 3.0]);

        // [1/3, 1/3, 1/3] + 1/4, renormalized by 5/4.
        let three = ActionProbabilityVector::uniform(3).unwrap();
        let four = three.expanded(4).unwrap();
        assert_close(four.as_slice(), &[4.0 / 15.0, 4.0 / 15.0, 4.0 / 15.0, 0.2]);
        assert!(four.normalization_error() <= NORMALIZATION_TOLERANCE);
    }

    #[test]
    fn expand_rejects_shrink() {
        let q = ActionProbabilityVector::uniform(3).unwrap();
        assert!(matches!(q.expanded(2), Err(AutomatonError::InvalidSize(_))));
    }

    #[test]
    fn closed_form_convergence() {
        for l in [0.05, 0.1, 0.5] {
            let mut q = ActionProbabilityVector::uniform(4).unwrap();
            let q0 = q.as_slice()[2];
            for t in 1..=100 {
                q.lri_update(2, Response::Reward, rate(l)).unwrap();
                let expected = 1.0 - (1.0 - q0) * (1.0 - l).powi(t);
                assert!((q.as_slice()[2] - expected).abs() <= 1e-9);
            }
        }
    }

    #[derive(Debug, Clone)]
    enum Op {
        Update { chosen: usize, reward: bool, lambda: f64 },
        Expand { extra: usize },
    }

    fn op_strategy() -> impl Strategy<Value = Op> {
        prop_oneof![
            4 => (0usize..64, any::<bool>(), 0.001f64..0.999)
                .prop_map(|(chosen, reward, lambda)| Op::Update { chosen, reward, lambda }),
            1 => (0usize..3).prop_map(|extra| Op::Expand { extra }),
        ]
    }

    proptest! {
        #[test]
        fn stays_normalized(n in 1usize..12, ops in prop::collection::vec(op_strategy(), 0..200)) {
            let mut q = ActionProbabilityVector::uniform(n).unwrap();
            for op in ops {
                match op {
                    Op::Update { chosen, reward, lambda } => {
                        let chosen = chosen % q.len();
                        q.lri_update(chosen, Response::from_hit(reward), rate(lambda)).unwrap();
                    }
                    Op::Expand { extra } => q.expand_actions(q.len() + extra).unwrap(),
                }
                prop_assert!(q.normalization_error() <= NORMALIZATION_TOLERANCE);
                prop_assert!(q.as_slice().iter().all(|p| *p >= 0.0));
            }
        }

        #[test]
        fn reward_is_monotone(probs in prop::collection::vec(0.0f64..1.0, 1..10),
                              chosen in 0usize..10, lambda in 0.001f64..0.999) {
            let total: f64 = probs.iter().sum();
            prop_assume!(total > 0.0);
            let q = ActionProbabilityVector::from_probs(
                probs.iter().map(|p| p / total).collect()
            );
            prop_assume!(q.is_ok());
            let q = q.unwrap();
            let chosen = chosen % q.len();
            let next = q.updated(chosen, Response::Reward, rate(lambda)).unwrap();
            if q.as_slice()[chosen] < 1.0 {
                prop_assert!(next.as_slice()[chosen] > q.as_slice()[chosen]);
            }
            for j in (0..q.len()).filter(|j| *j != chosen) {
                prop_assert!(next.as_slice()[j] <= q.as_slice()[j]);
            }
        }

        #[test]
        fn top_k_is_deterministic_and_sorted(probs in prop::collection::vec(0.0f64..1.0, 1..20), k in 1usize..25) {
            let total: f64 = probs.iter().sum();
            prop_assume!(total > 0.0);
            let q = ActionProbabilityVector::from_probs(probs.iter().map(|p| p / total).collect());
            prop_assume!(q.is_ok());
            let q = q.unwrap();
            let a = q.top_k(k);
            prop_assert_eq!(&a, &q.top_k(k));
            prop_assert_eq!(a.len(), k.min(q.len()));
            // Against a full stable sort.
            let mut full: Vec<usize> = (0..q.len()).collect();
            full.sort_by(|x, y| q.as_slice()[*y].partial_cmp(&q.as_slice()[*x]).unwrap());
            prop_assert_eq!(&a[..], &full[..a.len()]);
        }
    }
}
