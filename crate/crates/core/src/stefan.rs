//! Moving-boundary phase: the free boundary `z(t)` for `t ≥ 1/2` and the
//! tail profile `U*(t,x)` on both sides of the transition.
//!
//! The boundary solves, for every `t > 1/2`,
//!
//! ```text
//! Λ(t − ½, z(t)) = ∫_{1/2}^t p(t − s, z(t) − z(s)) ds,      z(½) = 0.
//! ```
//!
//! The solver marches on a uniform grid with the history frozen. On each
//! grid interval the displacement `z(t) − z(s)` is held at its interval
//! average and the time integral of the heat kernel is taken in closed form,
//! so the `(t − s)^{-1/2}` singularity at the newest interval is integrated
//! exactly.

use std::cell::RefCell;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{self, heat_raw, heat_time_integral_raw, FOUR_OVER_SQRT_PI};

/// Time at which the boundary detaches from the origin.
pub const T_DETACH: f64 = 0.5;

/// Leading coefficient of `z(½ + u) ≈ c·u²` as `u ↓ 0`, `c = 1/√π`.
///
/// Matching orders in the small-time expansion of the boundary equation
/// gives `c·Λ₀'(0) = Λ₃(0) = (a₃/6)·∫₀^∞ y³Φ̃(1,y) dy = a₃/16` with
/// `a₃ = −∂³u₁(½,0) = 16/√π`, i.e. `z''(½) = 2/√π`.
pub const QUADRATIC_COEFF: f64 = 0.564_189_583_547_756_3;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_ROOT_TOL: f64 = 1e-8;

/// Absolute tolerance for `Λ` inside the solver; well under `root_tol`.
const LAMBDA_TOL: f64 = 1e-11;

/// Bracket width, in units of `√dt`, searched above the previous value.
const BRACKET_WIDTHS: f64 = 10.0;

/// Knobs for [`solve_boundary_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub t_max: f64,
    pub dt: f64,
    pub root_tol: f64,
    /// Constant offset added to the memory side of the equation.
    pub perturbation: f64,
}

impl SolverOptions {
    pub fn new(t_max: f64, dt: f64, root_tol: f64) -> Self {
        Self { t_max, dt, root_tol, perturbation: 0.0 }
    }
}

/// A grid step where the root fell below the previous value and was clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampEvent {
    pub t: f64,
    pub decrease: f64,
}

/// Solved free boundary on a uniform grid starting at `t = 1/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
    /// Largest residual magnitude over the solved grid points.
    pub residual_tol: f64,
    pub options: SolverOptions,
    pub clamped: Vec<ClampEvent>,
}

impl BoundaryCurve {
    /// Builds a curve from explicit values, e.g. to probe the residual of a
    /// trial boundary. `grid` must start at 1/2 and be uniform.
    pub fn from_values(dt: f64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !(dt > 0.0) {
            return Err(domain("curve needs at least one value and dt > 0"));
        }
        let grid = (0..values.len()).map(|i| T_DETACH + i as f64 * dt).collect::<Vec<_>>();
        let t_max = *grid.last().unwrap();
        Ok(Self {
            grid,
            values,
            residual_tol: f64::NAN,
            options: SolverOptions::new(t_max, dt, DEFAULT_ROOT_TOL),
            clamped: Vec::new(),
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dt(&self) -> f64 {
        self.options.dt
    }

    pub fn t_max(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    /// `z(t)`, piecewise linear on the grid, zero before detachment.
    ///
    /// Panics when `t` is past the end of the grid.
    pub fn z(&self, t: f64) -> f64 {
        if t <= T_DETACH {
            return 0.0;
        }
        let (k, frac) = self.locate(t);
        if frac == 0.0 {
            self.values[k]
        } else {
            self.values[k] + frac * (self.values[k + 1] - self.values[k])
        }
    }

    /// Index `k` and fraction with `t = grid[k] + frac·dt`.
    fn locate(&self, t: f64) -> (usize, f64) {
        let dt = self.dt();
        let last = self.grid.len() - 1;
        let pos = (t - T_DETACH) / dt;
        assert!(
            pos <= last as f64 + 1e-9,
            "t = {t} beyond curve end {}",
            self.t_max()
        );
        let k = (pos.floor() as usize).min(last);
        let frac = pos - k as f64;
        if k == last || frac < 1e-9 {
            (k, 0.0)
        } else if frac > 1.0 - 1e-9 {
            (k + 1, 0.0)
        } else {
            (k, frac)
        }
    }

    fn check_range(&self, t: f64) -> Result<()> {
        if t < T_DETACH || t > self.t_max() + 1e-12 {
            return Err(domain(format!(
                "t = {t} outside boundary grid [{T_DETACH}, {}]",
                self.t_max()
            )));
        }
        Ok(())
    }

    /// `∫_{1/2}^t p(t − s, z_t − z(s)) ds` with the product rule of the solver.
    fn memory(&self, t: f64, z_t: f64) -> f64 {
        let (k, frac) = self.locate(t);
        let dt = self.dt();
        let mut acc = 0.0;
        for j in 0..k {
            let mid = 0.5 * (self.values[j] + self.values[j + 1]);
            acc += interval_heat(t - self.grid[j], t - self.grid[j + 1], z_t - mid);
        }
        if frac > 0.0 {
            let mid = 0.5 * (self.values[k] + z_t);
            acc += heat_time_integral_raw(frac * dt, z_t - mid);
        }
        acc
    }

    /// Tail profile `U*(t,x)` for `t ≥ 1/2` and `x ≥ z(t)`.
    pub fn eval_tail_moving(&self, t: f64, x: f64) -> Result<f64> {
        self.check_range(t)?;
        let z_t = self.z(t);
        if x < z_t - 1e-12 {
            return Err(domain(format!("x = {x} lies left of the boundary z({t}) = {z_t}")));
        }
        Ok(self.tail_moving_raw(t, x))
    }

    fn tail_moving_raw(&self, t: f64, x: f64) -> f64 {
        // s ∈ [0, ½]: z ≡ 0 and the Neumann kernel is 2p.
        let early = 2.0 * (heat_time_integral_raw(t, x) - heat_time_integral_raw(t - T_DETACH, x));
        let (k, frac) = self.locate(t);
        let dt = self.dt();
        let mut late = 0.0;
        for j in 0..k {
            let mid = 0.5 * (self.values[j] + self.values[j + 1]);
            let (hi, lo) = (t - self.grid[j], t - self.grid[j + 1]);
            late += interval_heat(hi, lo, mid - x) + interval_heat(hi, lo, mid + x);
        }
        if frac > 0.0 {
            let mid = 0.5 * (self.values[k] + self.z(t));
            let tau = frac * dt;
            late += heat_time_integral_raw(tau, mid - x) + heat_time_integral_raw(tau, mid + x);
        }
        2.0 * heat_raw(t, x) + early + late
    }

    /// Writes `t,z` rows with a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "z"]).map_err(csv_err)?;
        for (t, z) in self.grid.iter().zip(&self.values) {
            out.write_record([t.to_string(), z.to_string()]).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// `∫_{lo}^{hi} p(τ, δ) dτ` in closed form.
#[inline]
fn interval_heat(hi: f64, lo: f64, delta: f64) -> f64 {
    heat_time_integral_raw(hi, delta) - heat_time_integral_raw(lo, delta)
}

/// Residual `Λ(t−½, z(t)) − ∫_{1/2}^t p(t−s, z(t)−z(s)) ds` of a curve.
pub fn boundary_residual(curve: &BoundaryCurve, t: f64) -> Result<f64> {
    curve.check_range(t)?;
    if t == T_DETACH {
        return Ok(0.0);
    }
    let z_t = curve.z(t);
    Ok(kernels::lambda_lhs_tol(t - T_DETACH, z_t, LAMBDA_TOL)? - curve.memory(t, z_t))
}

/// Solves for the free boundary on `[1/2, t_max]` with step `dt`.
pub fn solve_boundary(t_max: f64, dt: f64, root_tol: f64) -> Result<BoundaryCurve> {
    solve_boundary_with(SolverOptions::new(t_max, dt, root_tol))
}

struct Tolerance {
    residual: f64,
}

impl roots::Convergency<f64> for Tolerance {
    fn is_root_found(&mut self, y: f64) -> bool {
        y.abs() <= self.residual
    }
    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= 1e-15 * x1.abs().max(1e-3)
    }
    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter >= 200
    }
}

/// Time-marching solve with an optional constant perturbation.
pub fn solve_boundary_with(opts: SolverOptions) -> Result<BoundaryCurve> {
    let SolverOptions { t_max, dt, root_tol, perturbation } = opts;
    if !(t_max > T_DETACH) {
        return Err(domain(format!("t_max must exceed 1/2, got {t_max}")));
    }
    if !(dt > 0.0) || !(root_tol > 0.0) {
        return Err(domain("dt and root_tol must be positive"));
    }
    let n = ((t_max - T_DETACH) / dt - 1e-9).ceil() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| T_DETACH + i as f64 * dt).collect();
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    let mut clamped = Vec::new();
    let mut max_residual = 0.0f64;

    for i in 1..=n {
        let t = grid[i];
        let prev = values[i - 1];
        let lambda_err = RefCell::new(None);
        let residual = |z: f64| -> f64 {
            let lam = match kernels::lambda_lhs_tol(t - T_DETACH, z, LAMBDA_TOL) {
                Ok(v) => v,
                Err(e) => {
                    lambda_err.borrow_mut().get_or_insert(e);
                    return f64::NAN;
                }
            };
            let mut mem = 0.0;
            for j in 0..i - 1 {
                let mid = 0.5 * (values[j] + values[j + 1]);
                mem += interval_heat(t - grid[j], t - grid[j + 1], z - mid);
            }
            // newest interval: average displacement (z − prev)/2
            mem += heat_time_integral_raw(t - grid[i - 1], 0.5 * (z - prev));
            lam - perturbation - mem
        };

        let lo = prev;
        let r_lo = residual(lo);
        if let Some(e) = lambda_err.take() {
            return Err(e);
        }
        let z = if r_lo.abs() <= root_tol {
            lo
        } else if r_lo > 0.0 {
            // root lies below the previous value
            let floor = prev - BRACKET_WIDTHS * dt.sqrt();
            let below = find_root(&residual, floor, lo, root_tol).map_err(|reason| Error::Solver {
                t,
                reason: format!("decreasing step not bracketed: {reason}"),
            })?;
            let decrease = prev - below;
            if decrease > root_tol {
                clamped.push(ClampEvent { t, decrease });
            }
            prev
        } else {
            let hi = prev + BRACKET_WIDTHS * dt.sqrt();
            let r_hi = residual(hi);
            if !(r_hi >= 0.0) {
                return Err(Error::Solver {
                    t,
                    reason: format!(
                        "root not bracketed in [{lo}, {hi}]: residuals {r_lo:.3e}, {r_hi:.3e}"
                    ),
                });
            }
            find_root(&residual, lo, hi, root_tol).map_err(|reason| Error::Solver { t, reason })?
        };
        if let Some(e) = lambda_err.take() {
            return Err(e);
        }
        if clamped.last().is_none_or(|c| c.t != t) {
            max_residual = max_residual.max(residual(z).abs());
        }
        values.push(z);
    }

    Ok(BoundaryCurve {
        grid,
        values,
        residual_tol: max_residual,
        options: opts,
        clamped,
    })
}

fn find_root<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> std::result::Result<f64, String> {
    let mut conv = Tolerance { residual: 0.25 * tol };
    roots::find_root_brent(lo, hi, f, &mut conv).map_err(|e| format!("{e:?}"))
}

/// Re-solves with the memory side offset by `f_sup` and returns
/// `sup_t |z_perturbed(t) − z(t)|` over the curve's grid.
pub fn stability_probe(curve: &BoundaryCurve, f_sup: f64) -> Result<f64> {
    if !(f_sup >= 0.0) {
        return Err(domain(format!("perturbation must be non-negative, got {f_sup}")));
    }
    if f_sup == 0.0 {
        return Ok(0.0);
    }
    let perturbed = solve_boundary_with(SolverOptions { perturbation: f_sup, ..curve.options })?;
    Ok(curve
        .values
        .iter()
        .zip(&perturbed.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Deterministic limit `U*(t,x)` across both phases.
#[derive(Debug, Clone)]
pub struct HydroProfile {
    boundary: BoundaryCurve,
}

impl HydroProfile {
    pub fn new(boundary: BoundaryCurve) -> Self {
        Self { boundary }
    }

    pub fn boundary(&self) -> &BoundaryCurve {
        &self.boundary
    }

    /// `z(t)`, zero during the absorption phase.
    pub fn z(&self, t: f64) -> Result<f64> {
        if t > T_DETACH {
            self.boundary.check_range(t)?;
        }
        Ok(self.boundary.z(t))
    }

    /// `U*(t,x)` for `t > 0`, `x ≥ 0`. Left of the boundary the tail is
    /// flat at its boundary value, since no mass lies below `z(t)`.
    pub fn tail(&self, t: f64, x: f64) -> Result<f64> {
        if t <= T_DETACH {
            return kernels::tail_absorption_phase(t, x);
        }
        self.boundary.check_range(t)?;
        if x < 0.0 {
            return Err(domain(format!("position must be non-negative, got {x}")));
        }
        let z_t = self.boundary.z(t);
        Ok(self.boundary.tail_moving_raw(t, x.max(z_t)))
    }
}

/// Conservation defect `max |U*(t, z(t)) − 4/√π|` over grid times in `[t0, t1]`.
pub fn conservation_defect(curve: &BoundaryCurve, t0: f64, t1: f64) -> f64 {
    curve
        .grid
        .iter()
        .filter(|&&t| t >= t0 - 1e-12 && t <= t1 + 1e-12)
        .map(|&t| (curve.tail_moving_raw(t, curve.z(t)) - FOUR_OVER_SQRT_PI).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_arguments() {
        assert!(solve_boundary(0.5, 1e-3, 1e-8).is_err());
        assert!(solve_boundary(1.0, 0.0, 1e-8).is_err());
        assert!(solve_boundary(1.0, 1e-3, 0.0).is_err());
    }

    #[test]
    fn pinned_start_and_monotone() {
        let c = solve_boundary(1.0, 5e-3, 1e-8).unwrap();
        assert_eq!(c.values()[0], 0.0);
        assert!(c.values().windows(2).all(|w| w[1] >= w[0]));
        assert!(c.values().last().unwrap() > &0.0);
    }

    #[test]
    fn residual_within_tolerance_on_grid() {
        let c = solve_boundary(0.8, 5e-3, 1e-8).unwrap();
        for &t in &c.grid()[1..] {
            let r = boundary_residual(&c, t).unwrap();
            assert!(r.abs() <= 1e-8, "residual {r} at {t}");
        }
        assert!(c.residual_tol <= 1e-8);
        assert!(boundary_residual(&c, 0.9).is_err());
        assert!(boundary_residual(&c, 0.4).is_err());
    }

    #[test]
    fn interpolation_is_linear() {
        let c = BoundaryCurve::from_values(0.1, vec![0.0, 0.2, 0.3]).unwrap();
        assert!((c.z(0.55) - 0.1).abs() < 1e-12);
        assert!((c.z(0.65) - 0.25).abs() < 1e-12);
        assert_eq!(c.z(0.3), 0.0);
        assert_eq!(c.z(0.7), 0.3);
    }

    #[test]
    fn moving_tail_rejects_left_of_boundary() {
        let c = BoundaryCurve::from_values(0.1, vec![0.0, 0.2, 0.3]).unwrap();
        assert!(c.eval_tail_moving(0.7, 0.1).is_err());
        assert!(c.eval_tail_moving(0.7, 0.3).is_ok());
        assert!(c.eval_tail_moving(0.9, 0.5).is_err());
    }

    #[test]
    fn stability_probe_zero_is_zero() {
        let c = solve_boundary(0.7, 1e-2, 1e-8).unwrap();
        assert_eq!(stability_probe(&c, 0.0).unwrap(), 0.0);
        assert!(stability_probe(&c, -1.0).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let c = BoundaryCurve::from_values(0.25, vec![0.0, 0.1]).unwrap();
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,z\n0.5,0\n0.75,0.1\n");
    }
}
