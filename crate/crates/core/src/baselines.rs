//! Most-recently-used and most-frequently-used reference predictors.
//!
//! Neither looks at timestamps. Both are keyed by the same [`AppId`]s the
//! engine assigns, so the three predictors can be scored on identical
//! prediction points.

use crate::registry::AppId;

/// Observe-then-predict contract shared by the baselines.
pub trait Baseline {
    fn observe(&mut self, app: AppId);
    fn predict(&self, k: usize) -> Vec<AppId>;
}

/// Apps ordered by last use, most recent first, without duplicates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecencyList {
    order: Vec<AppId>,
}

impl RecencyList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn as_slice(&self) -> &[AppId] {
        &self.order
    }
}

impl Baseline for RecencyList {
    fn observe(&mut self, app: AppId) {
        match self.order.iter().position(|a| *a == app) {
            Some(pos) => self.order[..=pos].rotate_right(1),
            None => self.order.insert(0, app),
        }
    }

    fn predict(&self, k: usize) -> Vec<AppId> {
        self.order.iter().take(k).copied().collect()
    }
}

/// Launch tallies indexed by [`AppId`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrequencyTable {
    counts: Vec<u64>,
}

impl FrequencyTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, app: AppId) -> u64 {
        self.counts.get(app.index()).copied().unwrap_or(0)
    }
}

impl Baseline for FrequencyTable {
    fn observe(&mut self, app: AppId) {
        if app.index() >= self.counts.len() {
            self.counts.resize(app.index() + 1, 0);
        }
        self.counts[app.index()] += 1;
    }

    /// Highest count first; equal counts by lower id. Apps never observed
    /// are not offered.
    fn predict(&self, k: usize) -> Vec<AppId> {
        let mut seen: Vec<usize> = (0..self.counts.len()).filter(|i| self.counts[*i] > 0).collect();
        let k = k.min(seen.len());
        if k == 0 {
            return Vec::new();
        }
        let by_rank = |a: &usize, b: &usize| self.counts[*b].cmp(&self.counts[*a]).then(a.cmp(b));
        if k < seen.len() {
            seen.select_nth_unstable_by(k - 1, by_rank);
            seen.truncate(k);
        }
        seen.sort_unstable_by(by_rank);
        seen.into_iter().map(AppId).collect()
    }
}
