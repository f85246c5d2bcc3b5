//! Drift allocation rules.
//!
//! A strategy sees only the current state and hands out at most one unit of
//! drift among the alive particles.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Slack allowed on the unit budget.
pub const BUDGET_SLACK: f64 = 1e-12;

/// Read-only view of a particle system handed to a strategy.
#[derive(Debug, Clone, Copy)]
pub struct StateView<'a> {
    pub positions: &'a [f64],
    pub alive: &'a [bool],
    /// Indices of alive particles in increasing order.
    pub alive_indices: &'a [usize],
    pub t: f64,
    laggard_hint: Option<usize>,
}

impl<'a> StateView<'a> {
    pub fn new(positions: &'a [f64], alive: &'a [bool], alive_indices: &'a [usize], t: f64) -> Self {
        Self { positions, alive, alive_indices, t, laggard_hint: None }
    }

    /// Attaches a precomputed laggard index; it must agree with [`Self::laggard`].
    pub fn with_laggard(mut self, laggard: Option<usize>) -> Self {
        self.laggard_hint = laggard;
        self
    }

    /// Lowest alive particle, lowest index on ties.
    pub fn laggard(&self) -> Option<usize> {
        if self.laggard_hint.is_some() {
            return self.laggard_hint;
        }
        lowest(self.positions, self.alive_indices)
    }
}

pub(crate) fn lowest(positions: &[f64], indices: &[usize]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for &i in indices {
        match best {
            Some(b) if positions[i] >= positions[b] => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Sparse drift weights over `len` particles. Unlisted particles get zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriftAllocation {
    len: usize,
    entries: Vec<(usize, f64)>,
}

impl DriftAllocation {
    pub fn zeros(len: usize) -> Self {
        Self { len, entries: Vec::new() }
    }

    pub fn clear(&mut self, len: usize) {
        self.len = len;
        self.entries.clear();
    }

    /// Adds weight `w` to particle `i`. Zero weights are dropped.
    pub fn push(&mut self, i: usize, w: f64) {
        if w != 0.0 {
            self.entries.push((i, w));
        }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.entries.iter().filter(|e| e.0 == i).map(|e| e.1).sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.len];
        for &(i, x) in &self.entries {
            w[i] += x;
        }
        w
    }

    /// Checks non-negativity, the unit budget, and that only alive
    /// particles are weighted.
    pub fn validate(&self, alive: &[bool]) -> Result<()> {
        if alive.len() != self.len {
            return Err(Error::Contract(format!(
                "allocation covers {} particles, system has {}",
                self.len,
                alive.len()
            )));
        }
        for &(i, w) in &self.entries {
            if i >= self.len {
                return Err(Error::Contract(format!("index {i} out of range")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::Contract(format!("weight {w} on particle {i}")));
            }
            if !alive[i] {
                return Err(Error::Contract(format!("absorbed particle {i} weighted {w}")));
            }
        }
        let total = self.total();
        if total > 1.0 + BUDGET_SLACK {
            return Err(Error::Contract(format!("drift budget exceeded: {total}")));
        }
        Ok(())
    }
}

/// A pure drift allocation rule.
pub trait Strategy: Send + Sync {
    fn name(&self) -> &str;

    /// Writes the allocation for `state` into `out` (already cleared).
    fn allocate(&self, state: &StateView<'_>, out: &mut DriftAllocation);

    /// Convenience wrapper returning a fresh allocation.
    fn allocation(&self, state: &StateView<'_>) -> DriftAllocation {
        let mut out = DriftAllocation::zeros(state.positions.len());
        self.allocate(state, &mut out);
        out
    }
}

/// Full unit drift on the laggard.
#[derive(Debug, Clone, Copy, Default)]
pub struct PushTheLaggard;

impl Strategy for PushTheLaggard {
    fn name(&self) -> &str {
        "push-the-laggard"
    }

    fn allocate(&self, state: &StateView<'_>, out: &mut DriftAllocation) {
        if let Some(i) = state.laggard() {
            out.push(i, 1.0);
        }
    }
}

/// No drift at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct NullStrategy;

impl Strategy for NullStrategy {
    fn name(&self) -> &str {
        "null"
    }

    fn allocate(&self, _: &StateView<'_>, _: &mut DriftAllocation) {}
}

/// `1/n` to each of the `n` alive particles.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl Strategy for Uniform {
    fn name(&self) -> &str {
        "uniform"
    }

    fn allocate(&self, state: &StateView<'_>, out: &mut DriftAllocation) {
        let n = state.alive_indices.len();
        if n == 0 {
            return;
        }
        let w = 1.0 / n as f64;
        for &i in state.alive_indices {
            out.push(i, w);
        }
    }
}

/// Full unit drift on the highest alive particle.
#[derive(Debug, Clone, Copy, Default)]
pub struct PushTheLeader;

impl Strategy for PushTheLeader {
    fn name(&self) -> &str {
        "push-the-leader"
    }

    fn allocate(&self, state: &StateView<'_>, out: &mut DriftAllocation) {
        let mut best: Option<usize> = None;
        for &i in state.alive_indices {
            match best {
                Some(b) if state.positions[i] <= state.positions[b] => {}
                _ => best = Some(i),
            }
        }
        if let Some(i) = best {
            out.push(i, 1.0);
        }
    }
}

/// Weights proportional to `1/xᵢ`, normalized to a unit budget.
#[derive(Debug, Clone, Copy, Default)]
pub struct ProportionalInverse;

impl Strategy for ProportionalInverse {
    fn name(&self) -> &str {
        "proportional"
    }

    fn allocate(&self, state: &StateView<'_>, out: &mut DriftAllocation) {
        let total: f64 = state.alive_indices.iter().map(|&i| 1.0 / state.positions[i]).sum();
        if !(total > 0.0) || !total.is_finite() {
            return;
        }
        for &i in state.alive_indices {
            out.push(i, (1.0 / state.positions[i]) / total);
        }
    }
}

/// Push-the-laggard, null, uniform, push-the-leader and proportional, in that order.
pub fn builtin_strategies() -> Vec<Arc<dyn Strategy>> {
    vec![
        Arc::new(PushTheLaggard),
        Arc::new(NullStrategy),
        Arc::new(Uniform),
        Arc::new(PushTheLeader),
        Arc::new(ProportionalInverse),
    ]
}

/// Name → strategy lookup, seeded with the built-ins.
#[derive(Clone)]
pub struct StrategyRegistry {
    map: BTreeMap<String, Arc<dyn Strategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        let mut map = BTreeMap::new();
        for s in builtin_strategies() {
            map.insert(s.name().to_string(), s);
        }
        Self { map }
    }
}

impl StrategyRegistry {
    /// Registers a custom strategy, replacing any with the same name.
    pub fn register(&mut self, strategy: Arc<dyn Strategy>) {
        self.map.insert(strategy.name().to_string(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Strategy>> {
        self.map
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown strategy '{name}'; known: {}", self.names().join(", "))))
    }

    pub fn names(&self) -> Vec<String> {
        self.map.keys().cloned().collect()
    }
}
