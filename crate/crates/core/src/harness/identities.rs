//! Kernel identities checked against adaptive quadrature.

use crate::error::Result;
use crate::kernels::{bm_cdf, density_u1, heat_kernel, heat_time_integral, neumann_kernel, tail_absorption_phase};
use crate::quad::integrate;

use super::Check;

/// Tolerance the identities must meet.
pub const IDENTITY_TOL: f64 = 1e-6;
const QUAD_TOL: f64 = 1e-12;

fn time_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0]
}

fn space_grid() -> Vec<f64> {
    (0..=12).map(|i| i as f64 * 0.25).collect()
}

/// `∫₀ᵗ p(t−s, x) ds` by quadrature, after `s = t − u²` to remove the
/// endpoint singularity.
pub fn time_integral_by_quadrature(t: f64, x: f64) -> Result<f64> {
    let f = |u: f64| 2.0 * u * heat_kernel(u * u, x).unwrap_or(0.0);
    Ok(integrate(f, 0.0, t.sqrt(), QUAD_TOL)?.value)
}

/// Worst error of the closed form for `∫₀ᵗ p(t−s, x) ds`.
pub fn time_integral_identity() -> Result<f64> {
    let mut worst = 0.0f64;
    for t in time_grid() {
        for x in space_grid() {
            let lhs = time_integral_by_quadrature(t, x)?;
            worst = worst.max((lhs - heat_time_integral(t, x)?).abs());
        }
    }
    Ok(worst)
}

/// Worst error of `∫₀ᵗ p(t−s, x) ds = 2∫_{−∞}^{−|x|} Φ(t, y) dy`.
pub fn cdf_integral_identity() -> Result<f64> {
    let mut worst = 0.0f64;
    for t in time_grid() {
        for x in space_grid() {
            let lhs = time_integral_by_quadrature(t, x)?;
            let top = -x.abs();
            let lo = top - 12.0 * t.sqrt();
            let rhs = 2.0 * integrate(|y| bm_cdf(t, y).unwrap_or(0.0), lo, top, QUAD_TOL)?.value;
            worst = worst.max((lhs - rhs).abs());
        }
    }
    Ok(worst)
}

/// Worst error of the reflected-kernel semigroup property.
pub fn neumann_semigroup() -> Result<f64> {
    let cases = [
        (0.3, 0.4, 0.7, 1.1),
        (0.1, 0.1, 0.0, 0.0),
        (0.5, 1.0, 2.0, 0.3),
        (1.0, 0.25, 0.0, 1.5),
    ];
    let mut worst = 0.0f64;
    for (t, s, z, x) in cases {
        let f = |y: f64| neumann_kernel(t, y, x).unwrap_or(0.0) * neumann_kernel(s, z, y).unwrap_or(0.0);
        let hi = x.max(z) + 12.0 * (t + s).sqrt();
        let lhs = crate::quad::integrate_split(f, 0.0, hi, &[x, z], QUAD_TOL)?.value;
        worst = worst.max((lhs - neumann_kernel(t + s, z, x)?).abs());
    }
    Ok(worst)
}

/// Worst error between the absorption-phase tail and the integrated density.
pub fn tail_density_consistency() -> Result<f64> {
    let mut worst = 0.0f64;
    for t in [0.1f64, 0.3, 0.5] {
        for x in [0.0, 0.5, 1.0, 2.0] {
            let hi = x + 12.0 * t.sqrt();
            let lhs = integrate(|y| density_u1(t, y).unwrap_or(0.0), x, hi, QUAD_TOL)?.value;
            worst = worst.max((lhs - tail_absorption_phase(t, x)?).abs());
        }
    }
    Ok(worst)
}

/// The four identities as checks at [`IDENTITY_TOL`].
pub fn kernel_identity_checks() -> Result<Vec<Check>> {
    let named: [(&str, fn() -> Result<f64>); 4] = [
        ("time-integral-closed-form", time_integral_identity),
        ("time-integral-cdf-form", cdf_integral_identity),
        ("neumann-semigroup", neumann_semigroup),
        ("tail-density-consistency", tail_density_consistency),
    ];
    named
        .iter()
        .map(|(name, f)| {
            let err = f()?;
            Ok(Check::at_most(name, err, IDENTITY_TOL))
        })
        .collect()
}
