//! Trajectory records and the empirical functionals computed from them.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{self, cdf_raw, heat_time_integral_raw};
use crate::stefan::{csv_err, HydroProfile};

/// Which dynamics produced a record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Absorbed,
    Atlas,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub kind: SystemKind,
    pub k: u64,
    pub seed: u64,
    pub strategy: String,
    pub h: f64,
    pub bridge: bool,
    pub t_start: f64,
    pub t_end: f64,
}

/// Sorted alive positions at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub positions: Vec<f64>,
}

/// Drift handed to one particle over the step starting at `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEntry {
    pub t: f64,
    pub index: u32,
    pub weight: f64,
    /// Position of the recipient at the start of the step.
    pub position: f64,
}

/// Output of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub meta: RecordMeta,
    pub times: Vec<f64>,
    /// Scaled laggard; `None` once every particle is absorbed.
    pub laggard: Vec<Option<f64>>,
    pub alive: Vec<usize>,
    /// Always includes the start and the end of the run.
    pub snapshots: Vec<Snapshot>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub drift_log: Option<Vec<DriftEntry>>,
    pub extinction_time: Option<f64>,
}

impl TrajectoryRecord {
    pub fn new(meta: RecordMeta) -> Self {
        Self {
            meta,
            times: Vec::new(),
            laggard: Vec::new(),
            alive: Vec::new(),
            snapshots: Vec::new(),
            drift_log: None,
            extinction_time: None,
        }
    }

    pub(crate) fn push_series(&mut self, t: f64, laggard: Option<f64>, alive: usize) {
        self.times.push(t);
        self.laggard.push(laggard);
        self.alive.push(alive);
    }

    pub(crate) fn push_snapshot(&mut self, s: Snapshot) {
        self.snapshots.push(s);
    }

    pub fn k(&self) -> u64 {
        self.meta.k
    }

    /// Snapshot recorded within half a step of `t`.
    pub fn snapshot_at(&self, t: f64) -> Option<&Snapshot> {
        let tol = 0.5 * self.meta.h;
        self.snapshots.iter().find(|s| (s.t - t).abs() <= tol)
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("records always hold a final snapshot")
    }

    /// Laggard at the recorded time nearest `t`, within half a step.
    pub fn laggard_at(&self, t: f64) -> Option<Option<f64>> {
        let tol = 0.5 * self.meta.h;
        self.times.iter().position(|&s| (s - t).abs() <= tol).map(|i| self.laggard[i])
    }

    /// `t, Z_K, alive_count` rows; an absent laggard is an empty field.
    pub fn write_series_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "Z_K", "alive_count"]).map_err(csv_err)?;
        for ((t, z), n) in self.times.iter().zip(&self.laggard).zip(&self.alive) {
            let z = z.map(|v| v.to_string()).unwrap_or_default();
            out.write_record([t.to_string(), z, n.to_string()]).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// `t, x, U_K` triples at every stored particle position.
    pub fn write_tail_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "x", "U_K"]).map_err(csv_err)?;
        let sk = (self.meta.k as f64).sqrt();
        for s in &self.snapshots {
            let n = s.positions.len();
            for (i, x) in s.positions.iter().enumerate() {
                let u = (n - 1 - i) as f64 / sk;
                out.write_record([s.t.to_string(), x.to_string(), u.to_string()]).map_err(csv_err)?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Metadata and schedule, without the bulk series.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": crate::SCHEMA_VERSION,
            "meta": self.meta,
            "series_times": self.times.len(),
            "snapshot_times": self.snapshots.iter().map(|s| s.t).collect::<Vec<_>>(),
            "extinction_time": self.extinction_time,
            "survivors": self.alive.last(),
        })
    }
}

fn check_sorted(snapshot: &[f64]) -> Result<()> {
    if snapshot.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("snapshot is not sorted ascending".into()));
    }
    Ok(())
}

/// `U_K(t,x) = #{positions > x}/√K` for an ascending snapshot.
pub fn tail_count(snapshot: &[f64], k: u64, x: f64) -> Result<f64> {
    check_sorted(snapshot)?;
    Ok(tail_count_sorted(snapshot, k, x))
}

fn tail_count_sorted(snapshot: &[f64], k: u64, x: f64) -> f64 {
    let above = snapshot.len() - snapshot.partition_point(|&p| p <= x);
    above as f64 / (k as f64).sqrt()
}

/// `V_K(t,x) = #{positions ≤ x}/√K`.
pub fn distribution_count(snapshot: &[f64], k: u64, x: f64) -> Result<f64> {
    check_sorted(snapshot)?;
    Ok(snapshot.partition_point(|&p| p <= x) as f64 / (k as f64).sqrt())
}

/// Earliest time from which the survivor count is taken as final.
pub const ASYMPTOTIC_TIME: f64 = 1.0;

/// Final scaled survivor count `U_K(∞)`, read at the end of the run.
///
/// Runs that stop before `t = 1` without going extinct are rejected with
/// [`Error::Advisory`]: the boundary has not yet detached.
pub fn survivors_scaled(record: &TrajectoryRecord) -> Result<f64> {
    let last = record.final_snapshot();
    if record.extinction_time.is_none() && last.t < ASYMPTOTIC_TIME - 1e-12 {
        return Err(Error::Advisory(format!(
            "run ends at t = {} before the survivor count settles",
            last.t
        )));
    }
    Ok(tail_count_sorted(&last.positions, record.meta.k, 0.0))
}

/// Empirical remainder of the integral identity at `(t, x)`.
///
/// For the absorbed system this is
/// `U_K(t,x) − G_K(t,x) − Σᵢ∫₀ᵗ φᵢ(s)·pᴺ(t−s, Xᵢ(s), x) ds`;
/// for the Atlas model it is
/// `V_K(t,x) − ∫p(t,x−y)V_K(0,y)dy + ∫₀ᵗ p(t−s, x − W_K(s)) ds`.
/// The drift integrals freeze the recipient at its step-start position
/// (matching the Euler drift) and integrate the kernel exactly in time.
pub fn identity_residual(record: &TrajectoryRecord, t: f64, x: f64) -> Result<f64> {
    let log = record
        .drift_log
        .as_ref()
        .ok_or_else(|| Error::Capability("record was produced without a drift log".into()))?;
    let snap = record
        .snapshot_at(t)
        .ok_or_else(|| domain(format!("no snapshot at t = {t}")))?;
    let t = snap.t;
    let t0 = record.meta.t_start;
    if !(t > t0) {
        return Err(domain("identity residual needs t after the start of the run"));
    }
    let h = record.meta.h;
    let k = record.meta.k;
    let sk = (k as f64).sqrt();

    // ∫_{s}^{min(s+h,t)} p(t−u, δ) du for each logged step before t
    let drift_integral = |kernel: &dyn Fn(f64, f64) -> f64| -> f64 {
        log.iter()
            .take_while(|e| e.t < t - 1e-12 * t.max(1.0))
            .map(|e| {
                let hi = t - e.t;
                let lo = (hi - h).max(0.0);
                e.weight * (kernel(hi, e.position) - kernel(lo, e.position))
            })
            .sum()
    };

    match record.meta.kind {
        SystemKind::Absorbed => {
            if x < 0.0 {
                return Err(domain("x must be non-negative"));
            }
            let u = tail_count_sorted(&snap.positions, k, x);
            let g = kernels::g_term(k, t - t0, x)?;
            let drift = drift_integral(&|tau, pos| {
                heat_time_integral_raw(tau, pos - x) + heat_time_integral_raw(tau, pos + x)
            });
            Ok(u - g - drift)
        }
        SystemKind::Atlas => {
            let v = snap.partition_point_le(x) as f64 / sk;
            let initial = &record.snapshots[0].positions;
            let spread: f64 = initial.iter().map(|&y| cdf_raw(t - t0, x - y)).sum::<f64>() / sk;
            let drift = drift_integral(&|tau, pos| heat_time_integral_raw(tau, x - pos));
            Ok(v - spread + drift)
        }
    }
}

impl Snapshot {
    fn partition_point_le(&self, x: f64) -> usize {
        self.positions.partition_point(|&p| p <= x)
    }
}

/// Weighted sup-deviations of a record from the hydrodynamic limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    /// `sup |U_K(t,x) − U*(t,x)|·t^{3/4}` over snapshots in range and the x grid.
    pub tail: f64,
    /// `sup |Z_K(t) − z(t)|` over recorded times in range.
    pub laggard: f64,
}

/// Compares a record with the limit over `t_range` and `x_grid`.
pub fn sup_deviation(
    record: &TrajectoryRecord,
    profile: &HydroProfile,
    t_range: (f64, f64),
    x_grid: &[f64],
) -> Result<Deviation> {
    let (t0, t1) = t_range;
    let slack = 0.5 * record.meta.h;
    if t0 < record.meta.t_start - slack || t1 > record.meta.t_end + slack {
        return Err(domain(format!(
            "record covers [{}, {}], requested [{t0}, {t1}]",
            record.meta.t_start, record.meta.t_end
        )));
    }
    if t1 > 0.5 && t1 > profile.boundary().t_max() + 1e-12 {
        return Err(domain(format!("boundary solved only up to {}", profile.boundary().t_max())));
    }
    let k = record.meta.k;
    let mut tail = 0.0f64;
    for s in record.snapshots.iter().filter(|s| s.t >= t0 - slack && s.t <= t1 + slack && s.t > 0.0) {
        let w = s.t.powf(0.75);
        for &x in x_grid {
            let d = (tail_count_sorted(&s.positions, k, x) - profile.tail(s.t, x)?).abs();
            tail = tail.max(d * w);
        }
    }
    let mut laggard = 0.0f64;
    for (t, z) in record.times.iter().zip(&record.laggard) {
        if *t < t0 - slack || *t > t1 + slack {
            continue;
        }
        if let Some(z) = z {
            laggard = laggard.max((z - profile.z(t.min(profile.boundary().t_max()))?).abs());
        }
    }
    Ok(Deviation { tail, laggard })
}

/// `sup{w(s) − w(s') : s ≤ s'}`; zero iff the sequence is nondecreasing.
pub fn seminorm(values: &[f64]) -> f64 {
    let mut running_max = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &v in values {
        running_max = running_max.max(v);
        worst = worst.max(running_max - v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_count_examples() {
        let s = [0.5; 4];
        assert_eq!(tail_count(&s, 4, 0.3).unwrap(), 2.0);
        assert_eq!(tail_count(&s, 4, 0.5).unwrap(), 0.0);
        assert_eq!(tail_count(&[], 4, -1.0).unwrap(), 0.0);
        assert!(matches!(tail_count(&[0.2, 0.1], 4, 0.0), Err(Error::Contract(_))));
        assert_eq!(distribution_count(&[0.1, 0.2, 0.3], 9, 0.2).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn seminorm_values() {
        assert_eq!(seminorm(&[0.0, 0.1, 0.2]), 0.0);
        assert!((seminorm(&[0.0, 0.5, 0.2, 0.4, 0.1]) - 0.4).abs() < 1e-15);
        assert_eq!(seminorm(&[]), 0.0);
    }

    fn meta(kind: SystemKind) -> RecordMeta {
        RecordMeta {
            kind,
            k: 4,
            seed: 0,
            strategy: "null".into(),
            h: 0.01,
            bridge: true,
            t_start: 0.0,
            t_end: 0.5,
        }
    }

    #[test]
    fn survivors_needs_settled_run() {
        let mut r = TrajectoryRecord::new(meta(SystemKind::Absorbed));
        r.push_snapshot(Snapshot { t: 0.5, positions: vec![0.1, 0.2] });
        assert!(matches!(survivors_scaled(&r), Err(Error::Advisory(_))));
        r.extinction_time = Some(0.4);
        r.snapshots.last_mut().unwrap().positions.clear();
        assert_eq!(survivors_scaled(&r).unwrap(), 0.0);
    }

    #[test]
    fn residual_needs_drift_log() {
        let mut r = TrajectoryRecord::new(meta(SystemKind::Absorbed));
        r.push_snapshot(Snapshot { t: 0.5, positions: vec![0.1] });
        assert!(matches!(identity_residual(&r, 0.5, 0.0), Err(Error::Capability(_))));
    }

    #[test]
    fn csv_formats() {
        let mut r = TrajectoryRecord::new(meta(SystemKind::Absorbed));
        r.push_series(0.0, Some(0.5), 2);
        r.push_series(0.5, None, 0);
        r.push_snapshot(Snapshot { t: 0.0, positions: vec![0.5, 0.5] });
        let mut buf = Vec::new();
        r.write_series_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,Z_K,alive_count\n0,0.5,2\n0.5,,0\n");
        let mut buf = Vec::new();
        r.write_tail_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,x,U_K\n0,0.5,0.5\n0,0.5,0\n");
    }
}
