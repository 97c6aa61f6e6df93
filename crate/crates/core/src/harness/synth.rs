//! Synthetic launch streams drawn from a known first-order Markov chain.
//!
//! The generator uses `ChaCha8Rng` seeded with `seed_from_u64(seed)`, so a
//! given spec reproduces the same stream on every platform.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::ingest::{EventStream, UserStream};
use crate::engine::LaunchEvent;

const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_apps: usize,
    /// Row-stochastic; `transition_matrix[i][j]` is P(next = j | current = i).
    pub transition_matrix: Vec<Vec<f64>>,
    pub n_events: usize,
    pub seed: u64,
    pub inter_arrival_ms: u64,
    pub user: String,
}

impl SyntheticSpec {
    pub fn new(transition_matrix: Vec<Vec<f64>>, n_events: usize, seed: u64) -> Self {
        Self {
            n_apps: transition_matrix.len(),
            transition_matrix,
            n_events,
            seed,
            inter_arrival_ms: 1_000,
            user: "synthetic".to_owned(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_apps == 0 {
            return Err(SynthError::Spec("n_apps must be positive".into()));
        }
        if self.n_events == 0 {
            return Err(SynthError::Spec("n_events must be positive".into()));
        }
        if self.inter_arrival_ms == 0 {
            return Err(SynthError::Spec("inter_arrival_ms must be positive".into()));
        }
        if self.transition_matrix.len() != self.n_apps {
            return Err(SynthError::Spec(format!(
                "matrix has {} rows, expected {}",
                self.transition_matrix.len(),
                self.n_apps
            )));
        }
        for (i, row) in self.transition_matrix.iter().enumerate() {
            if row.len() != self.n_apps {
                return Err(SynthError::Spec(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    self.n_apps
                )));
            }
            if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(SynthError::Spec(format!("row {i} has a negative or non-finite entry")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(SynthError::Spec(format!("row {i} sums to {sum}, not 1")));
            }
        }
        Ok(())
    }
}

/// Canonical name of synthetic app `index`.
pub fn app_name(index: usize) -> String {
    format!("app{index}")
}

/// `n × n` matrix whose row `i` puts `peak` on app `(i + 1) mod n` and
/// spreads the remainder evenly over the other apps.
pub fn peaked_matrix(n: usize, peak: f64) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![1.0]];
    }
    let rest = (1.0 - peak) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if j == (i + 1) % n { peak } else { rest })
                .collect()
        })
        .collect()
}

pub fn synth_markov(spec: &SyntheticSpec) -> Result<EventStream, SynthError> {
    spec.validate()?;
    let rows: Vec<WeightedIndex<f64>> = spec
        .transition_matrix
        .iter()
        .enumerate()
        .map(|(i, row)| {
            WeightedIndex::new(row).map_err(|e| SynthError::Spec(format!("row {i}: {e}")))
        })
        .collect::<Result<_, _>>()?;
    let names: Vec<String> = (0..spec.n_apps).map(app_name).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut current = rng.gen_range(0..spec.n_apps);
    let mut events = Vec::with_capacity(spec.n_events);
    for step in 0..spec.n_events {
        if step > 0 {
            current = rows[current].sample(&mut rng);
        }
        events.push(LaunchEvent::new(
            spec.user.clone(),
            step as u64 * spec.inter_arrival_ms,
            names[current].clone(),
        ));
    }
    Ok(EventStream {
        users: vec![UserStream {
            user: spec.user.clone(),
            events,
        }],
    })
}
