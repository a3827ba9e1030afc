//! Velocity from vorticity: the spectral law on the periodic grid and the
//! real-space kernel formulas evaluated by midpoint quadrature.
//!
//! Real-space integrals run over the fundamental domain centred at the
//! reference point, using minimum-image displacements. Cells whose node
//! coincides with a kernel singularity are omitted; each omitted cell
//! contributes at most `O(h |omega|_inf)`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{NsError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{norm, GridSpec, Point};
use crate::spectral::{self, evaluate_jet, Axis, Spectrum};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Relative tolerance on the vorticity mean accepted by the spectral law.
pub const MEAN_TOL: f64 = 1e-10;

#[inline]
fn perp(a: Point) -> Point {
    [-a[1], a[0]]
}

fn check_mean(omega: &ScalarField) -> Result<()> {
    let mean = omega.mean();
    let tol = MEAN_TOL * omega.sup_norm();
    if mean.abs() > tol && mean != 0.0 {
        return Err(NsError::NonZeroMeanVorticity { mean, tol });
    }
    Ok(())
}

/// Spectral Biot-Savart law `u_hat = -i k^perp / |k|^2 omega_hat` with the
/// `k = 0` slot set to `u_inf`.
pub fn velocity_spectral(w: &Spectrum, u_inf: [f64; 2]) -> (Spectrum, Spectrum) {
    let mut a = w.apply(|k1, k2| {
        let kk = k1 * k1 + k2 * k2;
        if kk == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, k2 / kk)
        }
    });
    let mut b = w.apply(|k1, k2| {
        let kk = k1 * k1 + k2 * k2;
        if kk == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, -k1 / kk)
        }
    });
    for s in [&mut a, &mut b] {
        s.clear_nyquist(Axis::X1);
        s.clear_nyquist(Axis::X2);
    }
    a.coeffs[0] = Complex64::new(u_inf[0], 0.0);
    b.coeffs[0] = Complex64::new(u_inf[1], 0.0);
    (a, b)
}

/// Divergence-free velocity with curl `omega` and constant part `u_inf`.
/// The vorticity must have zero mean, otherwise no periodic velocity exists.
pub fn velocity_from_vorticity(omega: &ScalarField, u_inf: [f64; 2]) -> Result<VectorField> {
    if !(u_inf[0].is_finite() && u_inf[1].is_finite()) {
        return Err(NsError::InvalidArgument("u_inf must be finite".into()));
    }
    let w = spectral::to_spectral(omega)?;
    check_mean(omega)?;
    let (a, b) = velocity_spectral(&w, u_inf);
    let (u1, u2) = spectral::to_physical_pair(&a, &b);
    Ok(VectorField { grid: omega.grid, u1, u2, u_inf })
}

/// Spectral velocity at an arbitrary point (trigonometric interpolant).
pub fn velocity_at(omega: &ScalarField, x: Point) -> Result<[f64; 2]> {
    let w = spectral::to_spectral(omega)?;
    check_mean(omega)?;
    let (a, b) = velocity_spectral(&w, [0.0, 0.0]);
    Ok([evaluate_jet(&a, x).value, evaluate_jet(&b, x).value])
}

/// `F(x, y) = (x - y)^perp / |x - y|^2 + y^perp / |y|^2`, undefined at
/// `y = 0` and `y = x`.
pub fn kernel_f(x: Point, y: Point) -> Result<[f64; 2]> {
    let d = [x[0] - y[0], x[1] - y[1]];
    let dd = d[0] * d[0] + d[1] * d[1];
    let yy = y[0] * y[0] + y[1] * y[1];
    if dd == 0.0 || yy == 0.0 {
        return Err(NsError::InvalidArgument("Biot-Savart kernel evaluated at a singular point".into()));
    }
    let (pd, py) = (perp(d), perp(y));
    Ok([pd[0] / dd + py[0] / yy, pd[1] / dd + py[1] / yy])
}

/// `G(x, y) = (x - y)^perp/|x - y|^2 - (x + y)^perp/|x + y|^2 + 2 y^perp/|y|^2`,
/// undefined at `y in {0, x, -x}`.
pub fn kernel_g(x: Point, y: Point) -> Result<[f64; 2]> {
    let a = [x[0] - y[0], x[1] - y[1]];
    let b = [x[0] + y[0], x[1] + y[1]];
    let (aa, bb, yy) = (a[0] * a[0] + a[1] * a[1], b[0] * b[0] + b[1] * b[1], y[0] * y[0] + y[1] * y[1]);
    if aa == 0.0 || bb == 0.0 || yy == 0.0 {
        return Err(NsError::InvalidArgument("symmetrized kernel evaluated at a singular point".into()));
    }
    let (pa, pb, py) = (perp(a), perp(b), perp(y));
    Ok([
        pa[0] / aa - pb[0] / bb + 2.0 * py[0] / yy,
        pa[1] / aa - pb[1] / bb + 2.0 * py[1] / yy,
    ])
}

/// True when displacement `d` lies in the grid cell centred at `s`.
#[inline]
fn in_cell(grid: &GridSpec, d: Point, s: Point) -> bool {
    (d[0] - s[0]).abs() < 0.5 * grid.h1() && (d[1] - s[1]).abs() < 0.5 * grid.h2()
}

/// Midpoint quadrature of `(1/2pi) int k(y) omega(y) dy` over nodes whose
/// displacement `d` from `center` satisfies `keep(d)`. Rows are summed in
/// parallel and combined in index order, so the result is deterministic.
fn quadrature(
    omega: &ScalarField,
    center: Point,
    keep: impl Fn(Point) -> bool + Sync,
    kernel: impl Fn(Point) -> [f64; 2] + Sync,
) -> [f64; 2] {
    let g = omega.grid;
    let rows: Vec<[f64; 2]> = (0..g.n1)
        .into_par_iter()
        .map(|i1| {
            let mut acc = [0.0; 2];
            for i2 in 0..g.n2 {
                let d = g.min_image(g.node(i1, i2), center);
                if !keep(d) {
                    continue;
                }
                let w = omega.at(i1, i2);
                if w == 0.0 {
                    continue;
                }
                let k = kernel(d);
                acc[0] += k[0] * w;
                acc[1] += k[1] * w;
            }
            acc
        })
        .collect();
    let mut s = [0.0; 2];
    for r in rows {
        s[0] += r[0];
        s[1] += r[1];
    }
    let c = g.cell_area() / TWO_PI;
    [s[0] * c, s[1] * c]
}

fn check_point(p: Point, what: &str) -> Result<()> {
    if !(p[0].is_finite() && p[1].is_finite()) {
        return Err(NsError::InvalidArgument(format!("{what} must be finite")));
    }
    Ok(())
}

/// `u(x) - u(base)` by midpoint quadrature of the kernel `F` over the
/// fundamental domain centred at `base`.
pub fn bs_weak(omega: &ScalarField, x: Point, base: Point) -> Result<[f64; 2]> {
    let g = omega.grid;
    check_point(x, "x")?;
    check_point(base, "base")?;
    omega.check_finite()?;
    let xr = g.min_image(x, base);
    if xr == [0.0, 0.0] {
        return Ok([0.0, 0.0]);
    }
    Ok(quadrature(
        omega,
        base,
        |d| !in_cell(&g, d, [0.0, 0.0]) && !in_cell(&g, d, xr),
        |d| kernel_f(xr, d).unwrap_or([0.0, 0.0]),
    ))
}

/// Partial integral `(1/2pi) int_{|y - base| <= R} F(x - base, y - base) omega(y) dy`.
pub fn bs_truncated(omega: &ScalarField, x: Point, radius: f64, base: Point) -> Result<[f64; 2]> {
    let g = omega.grid;
    check_point(x, "x")?;
    check_point(base, "base")?;
    omega.check_finite()?;
    if !(radius > 0.0) {
        return Err(NsError::InvalidArgument(format!("radius {radius} must be positive")));
    }
    if radius > g.max_radius() {
        return Err(NsError::RadiusTooLarge { radius, max: g.max_radius() });
    }
    let xr = g.min_image(x, base);
    let r2 = radius * radius;
    Ok(quadrature(
        omega,
        base,
        |d| d[0] * d[0] + d[1] * d[1] <= r2 && !in_cell(&g, d, [0.0, 0.0]) && !in_cell(&g, d, xr),
        |d| kernel_f(xr, d).unwrap_or([0.0, 0.0]),
    ))
}

/// `u(center + x) + u(center - x) - 2 u(center)` by quadrature of `G`;
/// `x` is the offset from `center`.
pub fn symmetrized_difference(omega: &ScalarField, x: Point, center: Point) -> Result<[f64; 2]> {
    let g = omega.grid;
    check_point(x, "x")?;
    check_point(center, "center")?;
    omega.check_finite()?;
    if x == [0.0, 0.0] {
        return Ok([0.0, 0.0]);
    }
    let mx = [-x[0], -x[1]];
    Ok(quadrature(
        omega,
        center,
        |d| !in_cell(&g, d, [0.0, 0.0]) && !in_cell(&g, d, x) && !in_cell(&g, d, mx),
        |d| kernel_g(x, d).unwrap_or([0.0, 0.0]),
    ))
}

/// `|symmetrized_difference| / (|x| |omega|_inf)`, the quantity bounded by a
/// universal constant.
pub fn symmetrized_ratio(omega: &ScalarField, x: Point, center: Point) -> Result<f64> {
    let v = symmetrized_difference(omega, x, center)?;
    let den = norm(x) * omega.sup_norm();
    Ok(if den == 0.0 { 0.0 } else { norm(v) / den })
}

/// Convergence of the truncated integral towards the spectral answer.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncationStudy {
    pub radii: Vec<f64>,
    pub values: Vec<[f64; 2]>,
    pub reference: [f64; 2],
    pub errors: Vec<f64>,
}

impl TruncationStudy {
    pub fn run(omega: &ScalarField, x: Point, base: Point, radii: &[f64]) -> Result<Self> {
        if radii.is_empty() || radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(NsError::InvalidArgument("radii must be nonempty and strictly increasing".into()));
        }
        let ux = velocity_at(omega, x)?;
        let ub = velocity_at(omega, base)?;
        let reference = [ux[0] - ub[0], ux[1] - ub[1]];
        let mut values = Vec::with_capacity(radii.len());
        let mut errors = Vec::with_capacity(radii.len());
        for &r in radii {
            let v = bs_truncated(omega, x, r, base)?;
            errors.push(norm([v[0] - reference[0], v[1] - reference[1]]));
            values.push(v);
        }
        Ok(Self { radii: radii.to_vec(), values, reference, errors })
    }

    /// Least-squares slope of `-log(error)` against `log(R)`.
    pub fn order(&self) -> f64 {
        fit_order(&self.radii, &self.errors)
    }
}

/// Least-squares order `p` in `error ~ C x^{-p}`.
pub fn fit_order(x: &[f64], err: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let le: Vec<f64> = err.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let me = le.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&le).map(|(a, b)| (a - mx) * (b - me)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    -num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_vorticity_gives_background() {
        let g = GridSpec::square(16, 2.0 * PI).unwrap();
        let u = velocity_from_vorticity(&ScalarField::zeros(g), [1.0, 0.0]).unwrap();
        assert!(u.u1.values.iter().all(|v| (v - 1.0).abs() < 1e-15));
        assert!(u.u2.sup_norm() < 1e-15);
    }

    #[test]
    fn sine_vorticity_matches_streamfunction() {
        let g = GridSpec::square(32, 2.0 * PI).unwrap();
        let w = ScalarField::from_fn(g, |x| x[0].sin());
        let u = velocity_from_vorticity(&w, [0.5, -0.25]).unwrap();
        let e2 = ScalarField::from_fn(g, |x| -x[0].cos() - 0.25);
        assert!(u.u1.values.iter().all(|v| (v - 0.5).abs() < 1e-14));
        assert!((&u.u2 - &e2).sup_norm() < 1e-14);
    }

    #[test]
    fn nonzero_mean_is_rejected() {
        let g = GridSpec::square(16, 2.0 * PI).unwrap();
        let w = ScalarField::from_fn(g, |x| 1.0 + x[0].sin());
        let err = velocity_from_vorticity(&w, [0.0, 0.0]).unwrap_err();
        assert!(matches!(err, NsError::NonZeroMeanVorticity { .. }));
        assert!(err.to_string().contains("torus"));
    }

    #[test]
    fn kernels_reject_singular_points() {
        assert!(kernel_f([1.0, 0.0], [0.0, 0.0]).is_err());
        assert!(kernel_f([1.0, 0.0], [1.0, 0.0]).is_err());
        assert!(kernel_g([1.0, 0.0], [-1.0, 0.0]).is_err());
        let g = kernel_g([0.3, 0.2], [1.0, -2.0]).unwrap();
        let g2 = kernel_g([0.3, 0.2], [-1.0, 2.0]).unwrap();
        assert!((g[0] + g2[0]).abs() < 1e-15 && (g[1] + g2[1]).abs() < 1e-15);
    }

    #[test]
    fn identity_cases_are_exact_zero() {
        let g = GridSpec::square(16, 2.0 * PI).unwrap();
        let w = ScalarField::from_fn(g, |x| x[0].sin());
        let c = g.center();
        assert_eq!(bs_weak(&w, c, c).unwrap(), [0.0, 0.0]);
        assert_eq!(symmetrized_difference(&w, [0.0, 0.0], c).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn truncated_rejects_large_radius() {
        let g = GridSpec::square(16, 8.0).unwrap();
        let w = ScalarField::zeros(g);
        assert_eq!(bs_truncated(&w, [1.0, 1.0], 1.5, g.center()).unwrap(), [0.0, 0.0]);
        assert!(matches!(bs_truncated(&w, [1.0, 1.0], 2.5, g.center()), Err(NsError::RadiusTooLarge { .. })));
    }

    #[test]
    fn fit_order_recovers_power_law() {
        let x = [2.0, 4.0, 8.0, 16.0];
        let e: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(-1.5)).collect();
        assert!((fit_order(&x, &e) - 1.5).abs() < 1e-12);
    }
}
