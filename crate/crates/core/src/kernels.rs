//! Closed-form kernels: Gaussian heat kernel and its tails, the Neumann
//! kernel, the absorbed-Brownian tail, the absorption-phase profile and its
//! density, the boundary-equation left side `Λ`, and the two-barrier
//! confinement series.
//!
//! Public functions validate their arguments and return [`Result`]. The
//! `*_raw` helpers skip validation and are used on hot paths by the solver
//! and the observables.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Result};
use crate::quad;

/// `4/√π`, the limiting scaled survivor count.
pub const FOUR_OVER_SQRT_PI: f64 = 2.256_758_334_191_025;

/// Half-width of the window, in units of `√t`, outside which Gaussian
/// integrands are dropped.
pub const GAUSS_TRUNCATION: f64 = 10.0;

/// Default length of the confinement series.
pub const DEFAULT_CONFINEMENT_TERMS: usize = 10;

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("time must be positive, got {t}")))
    }
}

#[inline]
pub(crate) fn heat_raw(t: f64, x: f64) -> f64 {
    (-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt()
}

/// Pr(B(t) > x) through `erfc`, accurate in the far tail.
#[inline]
pub(crate) fn tail_raw(t: f64, x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2 / t.sqrt())
}

/// Pr(B(t) ≤ x).
#[inline]
pub(crate) fn cdf_raw(t: f64, x: f64) -> f64 {
    tail_raw(t, -x)
}

/// `∫₀ᵗ p(s, x) ds = 2t·p(t,x) − 2|x|·Φ̃(t,|x|)`; zero at `t = 0`.
#[inline]
pub(crate) fn heat_time_integral_raw(t: f64, x: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let ax = x.abs();
    2.0 * t * heat_raw(t, ax) - 2.0 * ax * tail_raw(t, ax)
}

#[inline]
pub(crate) fn profile_abs_raw(t: f64, x: f64) -> f64 {
    2.0 * heat_raw(t, x) + 2.0 * heat_time_integral_raw(t, x)
}

#[inline]
pub(crate) fn u1_raw(t: f64, x: f64) -> f64 {
    2.0 * x / t * heat_raw(t, x) + 4.0 * tail_raw(t, x)
}

/// Standard heat kernel `p(t,x) = (2πt)^{-1/2} exp(−x²/2t)`.
pub fn heat_kernel(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    Ok(heat_raw(t, x))
}

/// Spatial derivative `∂ₓp(t,x) = −(x/t)·p(t,x)`.
pub fn heat_kernel_dx(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    Ok(-x / t * heat_raw(t, x))
}

/// Brownian tail `Φ̃(t,x) = Pr(B(t) > x)`.
pub fn bm_tail(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    Ok(tail_raw(t, x))
}

/// Brownian distribution function `Φ(t,x) = Pr(B(t) ≤ x)`.
pub fn bm_cdf(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    Ok(cdf_raw(t, x))
}

/// Neumann heat kernel `p(t,y−x) + p(t,y+x)`.
pub fn neumann_kernel(t: f64, y: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    Ok(heat_raw(t, y - x) + heat_raw(t, y + x))
}

/// `ψ(t,y,x) = Φ(t,y−x) − Φ̃(t,y+x)`.
///
/// This is the probability that a Brownian motion started at `y` and
/// absorbed at the origin lies above `x` at time `t`. It vanishes at
/// `y = 0`, and at `t = 0` it is the indicator of `y > x`.
pub fn absorbed_tail(t: f64, y: f64, x: f64) -> Result<f64> {
    if y < 0.0 || x < 0.0 {
        return Err(domain(format!("positions must be non-negative, got y={y}, x={x}")));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(domain(format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(if y > x { 1.0 } else { 0.0 });
    }
    // Φ(t,y−x) = Φ̃(t,x−y); written as a difference of tails so that large
    // x keeps relative accuracy.
    Ok((tail_raw(t, x - y) - tail_raw(t, x + y)).max(0.0))
}

/// Expected scaled count left over from the initial cluster at `1/√K`:
/// `G_K(t,x) = √K·ψ(t, 1/√K, x)`.
pub fn g_term(k: u64, t: f64, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(domain("K must be at least 1"));
    }
    check_time(t)?;
    let sk = (k as f64).sqrt();
    Ok(sk * absorbed_tail(t, 1.0 / sk, x)?)
}

/// Density of the absorption-phase profile,
/// `u₁(t,x) = −2∂ₓp(t,x) + 4Φ̃(t,x)`.
pub fn density_u1(t: f64, x: f64) -> Result<f64> {
    check_time(t)?;
    if x < 0.0 {
        return Err(domain(format!("position must be non-negative, got {x}")));
    }
    Ok(u1_raw(t, x))
}

/// `∫₀ᵗ p(t−s, x) ds` in closed form.
pub fn heat_time_integral(t: f64, x: f64) -> Result<f64> {
    if t < 0.0 || !t.is_finite() {
        return Err(domain(format!("time must be non-negative, got {t}")));
    }
    Ok(heat_time_integral_raw(t, x))
}

/// Absorption-phase tail profile `U*(t,x) = 2p(t,x) + ∫₀ᵗ 2p(t−s,x) ds`
/// for `0 < t ≤ 1/2`.
pub fn tail_absorption_phase(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0 && t <= 0.5) {
        return Err(domain(format!("absorption phase requires 0 < t ≤ 1/2, got {t}")));
    }
    if x < 0.0 {
        return Err(domain(format!("position must be non-negative, got {x}")));
    }
    Ok(profile_abs_raw(t, x))
}

/// `U*(½,0) − U*(½,y)`, the mass of `u₁(½,·)` on `[0, y]`.
#[inline]
pub(crate) fn deficit_half(y: f64) -> f64 {
    FOUR_OVER_SQRT_PI - profile_abs_raw(0.5, y)
}

/// `Λ(t,z) = ∫₀^∞ p(t,z−y)·(U*(½,0) − U*(½,y)) dy`, to absolute tolerance
/// `abs_tol`.
pub fn lambda_lhs_tol(t: f64, z: f64, abs_tol: f64) -> Result<f64> {
    check_time(t)?;
    let half_width = GAUSS_TRUNCATION * t.sqrt();
    let hi = z + half_width;
    if hi <= 0.0 {
        return Ok(0.0);
    }
    let lo = (z - half_width).max(0.0);
    let r = quad::integrate_split(
        |y| heat_raw(t, z - y) * deficit_half(y),
        lo,
        hi,
        &[z],
        abs_tol,
    )?;
    Ok(r.value)
}

/// [`lambda_lhs_tol`] at the default quadrature tolerance.
pub fn lambda_lhs(t: f64, z: f64) -> Result<f64> {
    lambda_lhs_tol(t, z, quad::DEFAULT_ABS_TOL)
}

/// Probability that `a + B(s)` stays inside `(0, b)` up to time `t`,
/// from the first `n_terms` terms of the eigenfunction series.
pub fn confinement_prob(t: f64, a: f64, b: f64, n_terms: usize) -> Result<f64> {
    if !(a > 0.0 && a < b) {
        return Err(domain(format!("need 0 < a < b, got a={a}, b={b}")));
    }
    if n_terms == 0 {
        return Err(domain("series needs at least one term"));
    }
    if t < 0.0 || !t.is_finite() {
        return Err(domain(format!("time must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    let sum = (0..n_terms).map(|n| confinement_term(t, a, b, n)).sum::<f64>();
    Ok(sum.clamp(0.0, 1.0))
}

/// Magnitude bound on the first omitted term of the confinement series.
pub fn confinement_truncation_bound(t: f64, b: f64, n_terms: usize) -> f64 {
    let m = (2 * n_terms + 1) as f64;
    4.0 / (m * PI) * (-(m * m) * PI * PI * t / (2.0 * b * b)).exp()
}

fn confinement_term(t: f64, a: f64, b: f64, n: usize) -> f64 {
    let m = (2 * n + 1) as f64;
    4.0 / (m * PI) * (m * PI * a / b).sin() * (-(m * m) * PI * PI * t / (2.0 * b * b)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn heat_kernel_values() {
        close(heat_kernel(1.0, 0.0).unwrap(), 0.398_942_280_4, 1e-10);
        close(heat_kernel(0.5, 0.0).unwrap(), 0.564_189_583_5, 1e-10);
        assert_eq!(heat_kernel(2.0, 3.0).unwrap(), heat_kernel(2.0, -3.0).unwrap());
        assert!(heat_kernel(0.0, 1.0).is_err());
        assert!(heat_kernel(-1.0, 1.0).is_err());
    }

    #[test]
    fn heat_kernel_dx_values() {
        assert_eq!(heat_kernel_dx(1.0, 0.0).unwrap(), 0.0);
        close(heat_kernel_dx(1.0, 1.0).unwrap(), -0.241_970_724_5, 1e-10);
        let h = 1e-5;
        let fd = (heat_kernel(1.0, 1.0 + h).unwrap() - heat_kernel(1.0, 1.0 - h).unwrap()) / (2.0 * h);
        close(fd, heat_kernel_dx(1.0, 1.0).unwrap(), 1e-8);
        assert!(heat_kernel_dx(0.0, 1.0).is_err());
    }

    #[test]
    fn bm_tail_values() {
        assert_eq!(bm_tail(1.0, 0.0).unwrap(), 0.5);
        close(bm_tail(1.0, 2.0).unwrap(), 0.022_750_13, 1e-8);
        close(bm_tail(4.0, 2.0).unwrap(), 0.158_655_25, 1e-8);
        assert!(bm_tail(0.0, 0.0).is_err());
    }

    #[test]
    fn far_tail_keeps_relative_accuracy() {
        // Φ̃(1,10) = 7.619853024160527e-24
        let v = bm_tail(1.0, 10.0).unwrap();
        assert!((v / 7.619_853_024_160_527e-24 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn neumann_values() {
        for x in [0.0, 0.3, 1.7] {
            close(neumann_kernel(1.0, 0.0, x).unwrap(), 2.0 * heat_kernel(1.0, x).unwrap(), 1e-15);
        }
        // p(1,0) + p(1,2)
        close(neumann_kernel(1.0, 1.0, 1.0).unwrap(), 0.452_933_25, 1e-8);
        assert_eq!(neumann_kernel(0.7, 0.2, 1.3).unwrap(), neumann_kernel(0.7, 1.3, 0.2).unwrap());
        assert!(neumann_kernel(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn absorbed_tail_values() {
        for (t, x) in [(0.1, 0.5), (1.0, 2.0), (3.0, 0.01)] {
            assert_eq!(absorbed_tail(t, 0.0, x).unwrap(), 0.0);
        }
        // t = 0 is the indicator of y > x
        assert_eq!(absorbed_tail(0.0, 2.0, 1.0).unwrap(), 1.0);
        assert_eq!(absorbed_tail(0.0, 0.5, 1.0).unwrap(), 0.0);
        close(absorbed_tail(1.0, 1.0, 1.0).unwrap(), 0.477_249_87, 1e-8);
        assert!(absorbed_tail(1.0, -0.1, 1.0).is_err());
        assert!(absorbed_tail(1.0, 0.1, -1.0).is_err());
    }

    #[test]
    fn g_term_values() {
        let direct = 2.0 * (bm_cdf(0.5, 0.5).unwrap() - bm_tail(0.5, 0.5).unwrap());
        close(g_term(4, 0.5, 0.0).unwrap(), direct, 1e-14);
        let limit = 2.0 * heat_kernel(0.5, 0.0).unwrap();
        assert!((g_term(1_000_000, 0.5, 0.0).unwrap() - limit).abs() <= 1e-3);
        assert!(g_term(4, 0.5, 40.0).unwrap() < 1e-100);
        assert!(g_term(0, 0.5, 0.0).is_err());
    }

    #[test]
    fn u1_boundary_and_decay() {
        close(density_u1(0.5, 0.0).unwrap(), 2.0, 1e-15);
        assert!(density_u1(0.5, 12.0).unwrap() < 1e-30);
        assert!(density_u1(0.5, -1.0).is_err());
        assert!(density_u1(0.0, 1.0).is_err());
    }

    #[test]
    fn absorption_profile_values() {
        close(tail_absorption_phase(0.5, 0.0).unwrap(), FOUR_OVER_SQRT_PI, 1e-14);
        assert!(tail_absorption_phase(0.5, 15.0).unwrap() < 1e-40);
        assert!(tail_absorption_phase(0.6, 0.0).is_err());
        assert!(tail_absorption_phase(0.0, 0.0).is_err());
        // small-t divergence like 2/√(2πt)
        let t = 0.01;
        let leading = 2.0 / (2.0 * PI * t).sqrt();
        let v = tail_absorption_phase(t, 0.0).unwrap();
        assert!((v / leading - 1.0).abs() < 0.03, "{v} vs {leading}");
        close(v, leading + 2.0 * (2.0 * t / PI).sqrt(), 1e-12);
    }

    #[test]
    fn lambda_limits_and_monotone() {
        assert!(lambda_lhs(1.0, -20.0).unwrap().abs() < 1e-12);
        close(lambda_lhs(1.0, 40.0).unwrap(), FOUR_OVER_SQRT_PI, 1e-8);
        assert!(lambda_lhs(1.0, 0.2).unwrap() > lambda_lhs(1.0, 0.1).unwrap());
        assert!(lambda_lhs(0.0, 0.1).is_err());
    }

    #[test]
    fn confinement_values() {
        assert_eq!(confinement_prob(0.0, 0.5, 1.0, 3).unwrap(), 1.0);
        close(confinement_prob(1.0, 0.5, 1.0, 5).unwrap(), 0.009_157_0, 1e-7);
        let lead = 4.0 / PI * (-PI * PI / 2.0).exp();
        close(confinement_prob(1.0, 0.5, 1.0, 5).unwrap(), lead, 1e-12);
        assert!(confinement_prob(1.0, 1e-9, 1.0, 10).unwrap() < 1e-9);
        assert!(confinement_prob(1.0, 0.0, 1.0, 10).is_err());
        assert!(confinement_prob(1.0, 1.0, 1.0, 10).is_err());
        assert!(confinement_prob(1.0, 0.5, 1.0, 0).is_err());
    }

    #[test]
    fn confinement_series_settles() {
        for t in [0.5, 1.0, 2.0] {
            for a in [0.1, 0.5, 0.9] {
                let p3 = confinement_prob(t, a, 1.0, 3).unwrap();
                let p10 = confinement_prob(t, a, 1.0, 10).unwrap();
                assert!((p3 - p10).abs() < 1e-12);
            }
        }
        assert!(confinement_truncation_bound(0.5, 1.0, 3) < 1e-12);
    }
}
