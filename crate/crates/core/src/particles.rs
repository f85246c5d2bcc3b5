//! Discrete-time simulation in scaled coordinates (space / √K, time / K).
//!
//! A particle at scaled position `x` with drift weight `w` moves by
//! `√h·ξ + √K·h·w` per step. The absorbed system kills particles that
//! reach the origin, optionally also through a Brownian-bridge crossing
//! test between grid times. The Atlas model has no absorption and always
//! pushes its lowest particle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{profile_abs_raw, u1_raw};
use crate::observables::{DriftEntry, RecordMeta, Snapshot, SystemKind, TrajectoryRecord};
use crate::strategies::{DriftAllocation, StateView, Strategy};

/// Default step `0.1/K`.
pub fn default_step(k: u64) -> f64 {
    0.1 / k as f64
}

/// When to sample a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordSpec {
    /// Spacing of laggard / alive-count samples.
    pub series_every: f64,
    /// Times at which the sorted alive positions are stored.
    pub snapshot_times: Vec<f64>,
    /// Keep the per-step drift recipients (needed by the identity residuals).
    pub log_drift: bool,
}

impl Default for RecordSpec {
    fn default() -> Self {
        Self { series_every: 0.005, snapshot_times: Vec::new(), log_drift: false }
    }
}

/// Step indices for a run of `n` steps of size `h` from `t0`.
struct Schedule {
    series_stride: u64,
    snapshots: Vec<u64>,
}

impl Schedule {
    fn new(spec: &RecordSpec, t0: f64, h: f64, n: u64) -> Result<Self> {
        let series_stride = ((spec.series_every / h).round() as u64).max(1);
        let mut snapshots = Vec::with_capacity(spec.snapshot_times.len());
        for &ts in &spec.snapshot_times {
            let k = ((ts - t0) / h).round();
            if k < 0.0 || k as u64 > n {
                return Err(domain(format!("snapshot time {ts} outside run [{t0}, {}]", t0 + n as f64 * h)));
            }
            snapshots.push(k as u64);
        }
        snapshots.sort_unstable();
        snapshots.dedup();
        Ok(Self { series_stride, snapshots })
    }

    fn series_at(&self, step: u64, n: u64) -> bool {
        step % self.series_stride == 0 || step == n
    }

    fn snapshot_at(&self, step: u64, n: u64) -> bool {
        step == 0 || step == n || self.snapshots.binary_search(&step).is_ok()
    }
}

fn step_count(t0: f64, t_end: f64, h: f64) -> Result<u64> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(domain(format!("step must be positive, got {h}")));
    }
    if !(t_end > t0) {
        return Err(domain(format!("t_end = {t_end} must exceed current time {t0}")));
    }
    Ok(((t_end - t0) / h).round().max(1.0) as u64)
}

/// `K` drifted Brownian particles absorbed at the origin.
#[derive(Debug, Clone)]
pub struct ParticleSystem {
    k: u64,
    positions: Vec<f64>,
    alive: Vec<bool>,
    alive_idx: Vec<usize>,
    laggard: Option<usize>,
    t: f64,
    seed: u64,
    step_count: u64,
    /// Brownian-bridge crossing test between grid times.
    pub bridge: bool,
    rng: ChaCha8Rng,
    drift: Vec<f64>,
    alloc: DriftAllocation,
}

/// `K` particles at scaled position `1/√K`, all alive, at `t = 0`.
pub fn init_river(k: u64, seed: u64) -> Result<ParticleSystem> {
    if k == 0 {
        return Err(domain("K must be at least 1"));
    }
    let n = k as usize;
    Ok(ParticleSystem {
        k,
        positions: vec![1.0 / (k as f64).sqrt(); n],
        alive: vec![true; n],
        alive_idx: (0..n).collect(),
        laggard: Some(0),
        t: 0.0,
        seed,
        step_count: 0,
        bridge: true,
        rng: ChaCha8Rng::seed_from_u64(seed),
        drift: vec![0.0; n],
        alloc: DriftAllocation::zeros(n),
    })
}

impl ParticleSystem {
    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn alive(&self) -> &[bool] {
        &self.alive
    }

    pub fn alive_count(&self) -> usize {
        self.alive_idx.len()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Scaled laggard `Z_K`, absent after extinction.
    pub fn laggard(&self) -> Option<f64> {
        self.laggard.map(|i| self.positions[i])
    }

    /// Sorted positions of the alive particles.
    pub fn sorted_alive(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.alive_idx.iter().map(|&i| self.positions[i]).collect();
        v.sort_unstable_by(f64::total_cmp);
        v
    }

    /// Advances one step of size `h`.
    pub fn step(&mut self, strat: &dyn Strategy, h: f64) -> Result<()> {
        self.step_inner(strat, h, None, None)
    }

    /// Like [`Self::step`] with the Gaussian increments supplied, one per alive
    /// particle in index order.
    pub fn step_with_noise(&mut self, strat: &dyn Strategy, h: f64, noise: &[f64]) -> Result<()> {
        if noise.len() != self.alive_idx.len() {
            return Err(domain(format!(
                "{} noise values for {} alive particles",
                noise.len(),
                self.alive_idx.len()
            )));
        }
        self.step_inner(strat, h, Some(noise), None)
    }

    fn step_inner(
        &mut self,
        strat: &dyn Strategy,
        h: f64,
        noise: Option<&[f64]>,
        mut log: Option<&mut Vec<DriftEntry>>,
    ) -> Result<()> {
        if !(h > 0.0) {
            return Err(domain(format!("step must be positive, got {h}")));
        }
        let mut alloc = std::mem::take(&mut self.alloc);
        alloc.clear(self.positions.len());
        {
            let view = StateView::new(&self.positions, &self.alive, &self.alive_idx, self.t)
                .with_laggard(self.laggard);
            strat.allocate(&view, &mut alloc);
        }
        alloc.validate(&self.alive)?;
        for &(i, w) in alloc.entries() {
            self.drift[i] += w;
            if let Some(log) = log.as_deref_mut() {
                log.push(DriftEntry { t: self.t, index: i as u32, weight: w, position: self.positions[i] });
            }
        }

        let sqrt_h = h.sqrt();
        let push = (self.k as f64).sqrt() * h;
        let mut kept = 0;
        let mut best: Option<usize> = None;
        for r in 0..self.alive_idx.len() {
            let i = self.alive_idx[r];
            let x = self.positions[i];
            let xi: f64 = match noise {
                Some(n) => n[r],
                None => StandardNormal.sample(&mut self.rng),
            };
            let y = x + sqrt_h * xi + push * self.drift[i];
            let absorbed = y <= 0.0 || (self.bridge && {
                let p = (-2.0 * x * y / h).exp();
                p > 0.0 && self.rng.gen::<f64>() < p
            });
            if absorbed {
                self.positions[i] = 0.0;
                self.alive[i] = false;
            } else {
                self.positions[i] = y;
                self.alive_idx[kept] = i;
                kept += 1;
                if best.is_none_or(|b| y < self.positions[b]) {
                    best = Some(i);
                }
            }
        }
        self.alive_idx.truncate(kept);
        self.laggard = best;
        for &(i, _) in alloc.entries() {
            self.drift[i] = 0.0;
        }
        self.alloc = alloc;
        self.step_count += 1;
        self.t += h;
        Ok(())
    }
}

/// Runs the absorbed system under `strat` until `t_end` or extinction.
pub fn run(
    sys: &mut ParticleSystem,
    strat: &dyn Strategy,
    t_end: f64,
    h: f64,
    spec: &RecordSpec,
) -> Result<TrajectoryRecord> {
    let t0 = sys.t;
    let n = step_count(t0, t_end, h)?;
    let sched = Schedule::new(spec, t0, h, n)?;
    let mut rec = TrajectoryRecord::new(RecordMeta {
        kind: SystemKind::Absorbed,
        k: sys.k,
        seed: sys.seed,
        strategy: strat.name().to_string(),
        h,
        bridge: sys.bridge,
        t_start: t0,
        t_end: t0 + n as f64 * h,
    });
    let mut log = spec.log_drift.then(Vec::new);

    let observe = |sys: &ParticleSystem, rec: &mut TrajectoryRecord, step: u64, t: f64| {
        if sched.series_at(step, n) {
            rec.push_series(t, sys.laggard(), sys.alive_count());
        }
        if sched.snapshot_at(step, n) {
            rec.push_snapshot(Snapshot { t, positions: sys.sorted_alive() });
        }
    };

    observe(sys, &mut rec, 0, t0);
    for step in 1..=n {
        sys.step_inner(strat, h, None, log.as_mut())?;
        let t = t0 + step as f64 * h;
        sys.t = t;
        if sys.alive_idx.is_empty() {
            rec.extinction_time = Some(t);
            // remaining schedule: absent laggard, zero survivors
            for s in step..=n {
                let ts = t0 + s as f64 * h;
                if sched.series_at(s, n) {
                    rec.push_series(ts, None, 0);
                }
                if sched.snapshot_at(s, n) {
                    rec.push_snapshot(Snapshot { t: ts, positions: Vec::new() });
                }
            }
            break;
        }
        observe(sys, &mut rec, step, t);
    }
    rec.drift_log = log;
    Ok(rec)
}

/// Finite Atlas model: no absorption, the lowest particle is pushed.
#[derive(Debug, Clone)]
pub struct AtlasSystem {
    k: u64,
    positions: Vec<f64>,
    t: f64,
    seed: u64,
    rng: ChaCha8Rng,
}

impl AtlasSystem {
    /// Atlas system at the given scaled positions.
    pub fn from_positions(k: u64, positions: Vec<f64>, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(domain("K must be at least 1"));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(domain("positions must be finite"));
        }
        Ok(Self { k, positions, t: 0.0, seed, rng: ChaCha8Rng::seed_from_u64(seed) })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Index of the lowest particle (lowest index on ties).
    pub fn laggard_index(&self) -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, &x) in self.positions.iter().enumerate() {
            if best.is_none_or(|b| x < self.positions[b]) {
                best = Some(i);
            }
        }
        best
    }

    pub fn laggard(&self) -> Option<f64> {
        self.laggard_index().map(|i| self.positions[i])
    }

    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.positions.clone();
        v.sort_unstable_by(f64::total_cmp);
        v
    }

    /// One step; returns the index that received the push.
    fn step(&mut self, h: f64, lag: usize) -> usize {
        let sqrt_h = h.sqrt();
        let push = (self.k as f64).sqrt() * h;
        for x in self.positions.iter_mut() {
            let xi: f64 = StandardNormal.sample(&mut self.rng);
            *x += sqrt_h * xi;
        }
        self.positions[lag] += push;
        self.t += h;
        lag
    }
}

/// XORed into a sampling seed to seed the dynamics that follow, so the
/// initial configuration and the driving noise use unrelated streams.
pub const NOISE_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

/// Initial density for an Atlas system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AtlasProfile {
    /// `u₁(½,x)` on `x ≥ K^{-γ}`, zero below.
    UBar { gamma: f64 },
    /// `u₁(½,x)` on `x > 0`, the constant 2 on `[−K^{-4γ₃}, 0]`.
    UUnder { gamma3: f64 },
    /// Piecewise-linear density through `(x, density)` knots, zero outside.
    Table { xs: Vec<f64>, density: Vec<f64> },
    Zero,
}

/// Mass of `u₁(½,·)` left beyond the truncation point.
pub const ATLAS_TAIL_MASS: f64 = 1e-6;

impl AtlasProfile {
    fn check(&self) -> Result<()> {
        let in_range = |g: f64| g > 0.0 && g < 1.0 / 96.0;
        match self {
            AtlasProfile::UBar { gamma } if !in_range(*gamma) => {
                Err(Error::Precondition(format!("gamma {gamma} outside (0, 1/96)")))
            }
            AtlasProfile::UUnder { gamma3 } if !in_range(*gamma3) => {
                Err(Error::Precondition(format!("gamma3 {gamma3} outside (0, 1/96)")))
            }
            AtlasProfile::Table { xs, density } => {
                if xs.len() != density.len() || xs.len() < 2 {
                    return Err(domain("table needs matching knots, at least two"));
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(domain("table knots must increase"));
                }
                if density.iter().any(|&d| !(d >= 0.0)) {
                    return Err(domain("negative density in profile table"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Density at scaled position `x` for scale `K`.
    pub fn density(&self, k: u64, x: f64) -> f64 {
        let kf = k as f64;
        match self {
            AtlasProfile::UBar { gamma } => {
                if x >= kf.powf(-gamma) {
                    u1_raw(0.5, x)
                } else {
                    0.0
                }
            }
            AtlasProfile::UUnder { gamma3 } => {
                if x > 0.0 {
                    u1_raw(0.5, x)
                } else if x >= -kf.powf(-4.0 * gamma3) {
                    2.0
                } else {
                    0.0
                }
            }
            AtlasProfile::Table { xs, density } => {
                if x < xs[0] || x > *xs.last().unwrap() {
                    return 0.0;
                }
                let j = xs.partition_point(|&k| k <= x).clamp(1, xs.len() - 1);
                let (x0, x1) = (xs[j - 1], xs[j]);
                let f = (x - x0) / (x1 - x0);
                density[j - 1] + f * (density[j] - density[j - 1])
            }
            AtlasProfile::Zero => 0.0,
        }
    }

    /// Sampling window and a dominating constant for thinning.
    fn support(&self, k: u64) -> Option<(f64, f64, f64)> {
        let kf = k as f64;
        let x_trunc = || truncation_point(ATLAS_TAIL_MASS / kf.sqrt());
        match self {
            AtlasProfile::UBar { gamma } => Some((kf.powf(-gamma), x_trunc(), 2.0)),
            AtlasProfile::UUnder { gamma3 } => Some((-kf.powf(-4.0 * gamma3), x_trunc(), 2.0)),
            AtlasProfile::Table { xs, density } => {
                let top = density.iter().copied().fold(0.0, f64::max);
                (top > 0.0).then(|| (xs[0], *xs.last().unwrap(), top))
            }
            AtlasProfile::Zero => None,
        }
    }
}

/// Smallest `x` with `∫ₓ^∞ u₁(½,y) dy ≤ mass`.
fn truncation_point(mass: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while profile_abs_raw(0.5, hi) > mass {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if profile_abs_raw(0.5, mid) > mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Samples a Poisson point process with intensity `√K·profile(x)` by
/// thinning, and wraps it as an Atlas system seeded with `seed`.
pub fn sample_atlas_initial(profile: &AtlasProfile, k: u64, seed: u64) -> Result<AtlasSystem> {
    if k == 0 {
        return Err(domain("K must be at least 1"));
    }
    profile.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut positions = Vec::new();
    if let Some((lo, hi, top)) = profile.support(k) {
        let sk = (k as f64).sqrt();
        let mean = top * sk * (hi - lo);
        let n = if mean > 0.0 {
            Poisson::new(mean).map_err(|e| domain(e.to_string()))?.sample(&mut rng) as u64
        } else {
            0
        };
        for _ in 0..n {
            let x = rng.gen_range(lo..hi);
            let d = profile.density(k, x);
            if d < 0.0 {
                return Err(domain(format!("negative density {d} at {x}")));
            }
            if d > top * (1.0 + 1e-12) {
                return Err(domain(format!("density {d} at {x} exceeds thinning bound {top}")));
            }
            if rng.gen::<f64>() * top < d {
                positions.push(x);
            }
        }
        positions.sort_unstable_by(f64::total_cmp);
    }
    // stepping noise comes from an independent stream
    AtlasSystem::from_positions(k, positions, seed ^ NOISE_SEED_MIX)
}

/// Positions `0, g₁, g₁+g₂, …` with i.i.d. `Exp(rate)` gaps.
pub fn exp_gap_positions(n: usize, rate: f64, seed: u64) -> Result<Vec<f64>> {
    let exp = Exp::new(rate).map_err(|e| domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = 0.0;
    Ok((0..n)
        .map(|i| {
            if i > 0 {
                x += exp.sample(&mut rng);
            }
            x
        })
        .collect())
}

/// Runs an Atlas system to `t_end`. The drift log holds the laggard at
/// the start of every step.
pub fn run_atlas(sys: &mut AtlasSystem, t_end: f64, h: f64, spec: &RecordSpec) -> Result<TrajectoryRecord> {
    if sys.is_empty() {
        return Err(domain("Atlas system has no particles"));
    }
    let t0 = sys.t;
    let n = step_count(t0, t_end, h)?;
    let sched = Schedule::new(spec, t0, h, n)?;
    let mut rec = TrajectoryRecord::new(RecordMeta {
        kind: SystemKind::Atlas,
        k: sys.k,
        seed: sys.seed,
        strategy: "push-the-laggard".into(),
        h,
        bridge: false,
        t_start: t0,
        t_end: t0 + n as f64 * h,
    });
    let mut log = spec.log_drift.then(Vec::new);
    let count = sys.len();

    let observe = |sys: &AtlasSystem, rec: &mut TrajectoryRecord, step: u64, t: f64| {
        if sched.series_at(step, n) {
            rec.push_series(t, sys.laggard(), count);
        }
        if sched.snapshot_at(step, n) {
            rec.push_snapshot(Snapshot { t, positions: sys.sorted() });
        }
    };

    observe(sys, &mut rec, 0, t0);
    for step in 1..=n {
        let lag = sys.laggard_index().expect("non-empty");
        if let Some(log) = log.as_mut() {
            log.push(DriftEntry { t: sys.t, index: lag as u32, weight: 1.0, position: sys.positions[lag] });
        }
        sys.step(h, lag);
        let t = t0 + step as f64 * h;
        sys.t = t;
        observe(sys, &mut rec, step, t);
    }
    rec.drift_log = log;
    Ok(rec)
}

/// Outcome of a rank-coupled pair run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceReport {
    pub steps: u64,
    /// Steps after which `B`'s i-th smallest was below `A`'s for some shared rank.
    pub sorted_violations: u64,
    /// Steps after which `B`'s laggard was below `A`'s.
    pub laggard_violations: u64,
    /// Largest amount by which `A` exceeded `B` at a shared rank.
    pub worst_gap: f64,
}

impl DominanceReport {
    pub fn sorted_fraction(&self) -> f64 {
        1.0 - self.sorted_violations as f64 / self.steps as f64
    }

    pub fn laggard_fraction(&self) -> f64 {
        1.0 - self.laggard_violations as f64 / self.steps as f64
    }
}

/// Advances `a` and `b` with the same Gaussian increment for equal ranks
/// (i-th smallest of each) and checks that `b` stays above `a` rank by rank.
///
/// Noise comes from `a`'s generator; `b`'s is left untouched.
pub fn coupled_run(a: &mut AtlasSystem, b: &mut AtlasSystem, t_end: f64, h: f64) -> Result<DominanceReport> {
    if a.is_empty() || b.is_empty() {
        return Err(domain("coupled systems must be non-empty"));
    }
    if b.len() > a.len() {
        return Err(Error::Precondition(format!("B has {} particles, more than A's {}", b.len(), a.len())));
    }
    if a.k != b.k {
        return Err(Error::Precondition("systems use different scales".into()));
    }
    a.positions.sort_unstable_by(f64::total_cmp);
    b.positions.sort_unstable_by(f64::total_cmp);
    let shared = b.len();
    if let Some(i) = (0..shared).find(|&i| b.positions[i] < a.positions[i]) {
        return Err(Error::Precondition(format!(
            "initial dominance fails at rank {i}: {} < {}",
            b.positions[i], a.positions[i]
        )));
    }
    let n = step_count(a.t.max(b.t), t_end, h)?;
    let sqrt_h = h.sqrt();
    let push = (a.k as f64).sqrt() * h;
    let mut report = DominanceReport { steps: n, sorted_violations: 0, laggard_violations: 0, worst_gap: 0.0 };
    for _ in 0..n {
        for r in 0..a.len() {
            let xi: f64 = StandardNormal.sample(&mut a.rng);
            a.positions[r] += sqrt_h * xi;
            if r < shared {
                b.positions[r] += sqrt_h * xi;
            }
        }
        a.positions[0] += push;
        b.positions[0] += push;
        a.positions.sort_unstable_by(f64::total_cmp);
        b.positions.sort_unstable_by(f64::total_cmp);
        a.t += h;
        b.t += h;

        let mut violated = false;
        for r in 0..shared {
            let gap = a.positions[r] - b.positions[r];
            if gap > 0.0 {
                violated = true;
                report.worst_gap = report.worst_gap.max(gap);
            }
        }
        report.sorted_violations += violated as u64;
        report.laggard_violations += (b.positions[0] < a.positions[0]) as u64;
    }
    Ok(report)
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl McEstimate {
    /// Bernoulli estimate from `hits` out of `n`.
    pub fn from_hits(hits: u64, n: u64) -> Self {
        let p = hits as f64 / n as f64;
        Self { mean: p, stderr: (p * (1.0 - p) / n as f64).sqrt(), samples: n }
    }
}

const PATHS_PER_CHUNK: u64 = 1000;

/// Probability that Brownian motion from `a` stays inside `(0, b)` up to
/// time `t`, estimated from `paths` Euler paths of step `h` with bridge
/// crossing tests at both barriers.
///
/// Paths are simulated in fixed chunks, each with its own ChaCha stream, so
/// the estimate does not depend on the rayon thread count.
pub fn confinement_mc(t: f64, a: f64, b: f64, paths: u64, h: f64, seed: u64) -> Result<McEstimate> {
    if !(a > 0.0 && a < b) || !(t >= 0.0) || !(h > 0.0) || paths == 0 {
        return Err(domain(format!("need 0 < a < b, t >= 0, h > 0, paths > 0 (a={a}, b={b}, t={t}, h={h})")));
    }
    let steps = (t / h).round() as u64;
    let sqrt_h = h.sqrt();
    let chunks = paths.div_ceil(PATHS_PER_CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let n = PATHS_PER_CHUNK.min(paths - c * PATHS_PER_CHUNK);
            let mut hits = 0;
            'path: for _ in 0..n {
                let mut x = a;
                for _ in 0..steps {
                    let xi: f64 = StandardNormal.sample(&mut rng);
                    let y = x + sqrt_h * xi;
                    if y <= 0.0 || y >= b {
                        continue 'path;
                    }
                    let lo = (-2.0 * x * y / h).exp();
                    let hi = (-2.0 * (b - x) * (b - y) / h).exp();
                    if rng.gen::<f64>() < lo + hi - lo * hi {
                        continue 'path;
                    }
                    x = y;
                }
                hits += 1;
            }
            hits
        })
        .sum();
    Ok(McEstimate::from_hits(hits, paths))
}
