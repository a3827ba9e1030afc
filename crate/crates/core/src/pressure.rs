//! Pressure, modified pressure `q = p + |u|^2/2`, and the representation of
//! `q` by absolutely convergent kernel integrals.
//!
//! The kernel integrals are midpoint-rule convolutions over the periodic
//! cell. Kernels are sampled at minimum-image displacements with the
//! singular `z = 0` sample omitted. The far-field kernel `chi^c K` decays
//! only like `|z|^{-2}`, so it is summed over a square of periodic images.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{NsError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{GridSpec, Point};
use crate::spectral::{
    self, check_divergence_free, dealiased_products, periodic_convolution, smooth_step, smooth_step_derivative,
    to_physical, vector_to_spectral, Spectrum,
};
use crate::ulnorm::{ball_sum_at, z_r, LocalizationBump};

/// Default number of periodic image rings summed for the far-field kernel.
pub const IMAGE_RINGS: usize = 8;

/// Pressure `p = sum R_k R_l (u_k u_l)` with zero mean, from dealiased
/// products. Rejects velocities that are not divergence-free.
pub fn pressure_spectral(u: &VectorField) -> Result<ScalarField> {
    let (a, b) = vector_to_spectral(u)?;
    check_divergence_free(&a, &b)?;
    Ok(to_physical(&pressure_from_spectra(&a, &b)?))
}

fn pressure_from_spectra(a: &Spectrum, b: &Spectrum) -> Result<Spectrum> {
    let [s11, s12, s22] = dealiased_products(a, b)?;
    let g = a.grid;
    let mut p = Spectrum::zeros(g);
    for i1 in 0..g.n1 {
        let k1 = g.k1(i1);
        for i2 in 0..g.n2 {
            let k2 = g.k2(i2);
            let kk = k1 * k1 + k2 * k2;
            if kk == 0.0 {
                continue;
            }
            let idx = g.index(i1, i2);
            let v = s11.coeffs[idx] * (k1 * k1) + s12.coeffs[idx] * (2.0 * k1 * k2) + s22.coeffs[idx] * (k2 * k2);
            p.coeffs[idx] = -v / kk;
        }
    }
    p.clear_nyquist(spectral::Axis::X1);
    p.clear_nyquist(spectral::Axis::X2);
    Ok(p)
}

/// `q = p + |u|^2 / 2` with the mean-zero pressure.
pub fn modified_pressure(u: &VectorField) -> Result<ScalarField> {
    let p = pressure_spectral(u)?;
    Ok(&p + &u.energy_density())
}

/// Residual `| -Delta p - div((u.grad) u) | / |div((u.grad) u)|` in the
/// spectral l2 norm, with the same dealiased products.
pub fn pressure_residual(u: &VectorField, p: &ScalarField) -> Result<f64> {
    let (a, b) = vector_to_spectral(u)?;
    let [s11, s12, s22] = dealiased_products(&a, &b)?;
    let ps = spectral::to_spectral(p)?;
    let g = u.grid;
    let (mut num, mut den) = (0.0, 0.0);
    for i1 in 0..g.n1 {
        let k1 = g.k1(i1);
        for i2 in 0..g.n2 {
            if g.is_nyquist(i1, i2) {
                continue;
            }
            let k2 = g.k2(i2);
            let idx = g.index(i1, i2);
            let rhs: Complex64 =
                -(s11.coeffs[idx] * (k1 * k1) + s12.coeffs[idx] * (2.0 * k1 * k2) + s22.coeffs[idx] * (k2 * k2));
            let lhs = ps.coeffs[idx] * (k1 * k1 + k2 * k2);
            num += (lhs - rhs).norm_sqr();
            den += rhs.norm_sqr();
        }
    }
    Ok(if den == 0.0 { num.sqrt() } else { (num / den).sqrt() })
}

/// Radial cut-off `chi(z) = S(2|z|/r - 1)` built on the smooth step: equal
/// to 1 on `|z| <= r/2` and to 0 on `|z| >= r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub scale: f64,
}

impl CutoffProfile {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(NsError::InvalidArgument(format!("cut-off scale {scale} must be positive")));
        }
        Ok(Self { scale })
    }

    pub fn value(&self, z: Point) -> f64 {
        smooth_step(2.0 * z[0].hypot(z[1]) / self.scale - 1.0)
    }

    pub fn grad(&self, z: Point) -> [f64; 2] {
        let r = z[0].hypot(z[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let d = smooth_step_derivative(2.0 * r / self.scale - 1.0) * 2.0 / self.scale;
        [d * z[0] / r, d * z[1] / r]
    }
}

/// `M_kl(z) = (2 z_k d_l chi - delta_kl (z . grad chi)) / |z|^2`, indices 0 or 1.
pub fn kernel_m(k: usize, l: usize, z: Point, chi: &CutoffProfile) -> f64 {
    let rr = z[0] * z[0] + z[1] * z[1];
    if rr == 0.0 {
        return 0.0;
    }
    let g = chi.grad(z);
    let zg = z[0] * g[0] + z[1] * g[1];
    let delta = if k == l { 1.0 } else { 0.0 };
    (2.0 * z[k] * g[l] - delta * zg) / rr
}

/// `K_kl(z) = (2 z_k z_l - |z|^2 delta_kl) / |z|^4`, indices 0 or 1.
pub fn kernel_k(k: usize, l: usize, z: Point) -> f64 {
    let rr = z[0] * z[0] + z[1] * z[1];
    if rr == 0.0 {
        return 0.0;
    }
    let delta = if k == l { 1.0 } else { 0.0 };
    (2.0 * z[k] * z[l] - rr * delta) / (rr * rr)
}

/// Cut Biot-Savart kernel `chi(z) z^perp / |z|^2` of the near-field term.
pub fn kernel_near(z: Point, chi: &CutoffProfile) -> [f64; 2] {
    let rr = z[0] * z[0] + z[1] * z[1];
    if rr == 0.0 {
        return [0.0, 0.0];
    }
    let c = chi.value(z) / rr;
    [-z[1] * c, z[0] * c]
}

/// `sum over images |a|,|b| <= rings of chi^c K_kl(z + (a l1, b l2))`, the
/// origin sample itself omitted.
pub fn far_kernel_images(grid: &GridSpec, k: usize, l: usize, z: Point, chi: &CutoffProfile, rings: usize) -> f64 {
    let m = rings as i64;
    let mut s = 0.0;
    for a in -m..=m {
        for b in -m..=m {
            let w = [z[0] + a as f64 * grid.l1, z[1] + b as f64 * grid.l2];
            if w == [0.0, 0.0] {
                continue;
            }
            s += (1.0 - chi.value(w)) * kernel_k(k, l, w);
        }
    }
    s
}

fn sample(grid: &GridSpec, f: impl Fn(Point) -> f64 + Sync) -> ScalarField {
    use rayon::prelude::*;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i1, i2) = (idx / grid.n2, idx % grid.n2);
            f(grid.displacement(i1, i2))
        })
        .collect();
    ScalarField { grid: *grid, values }
}

/// `q = q0 + q1 + q2 + q3(., x0)` on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PressureDecomposition {
    pub q0: f64,
    pub q1: ScalarField,
    pub q2: ScalarField,
    pub q3: ScalarField,
    /// Anchor point, snapped to the nearest grid node.
    pub x0: Point,
    pub x0_node: (usize, usize),
    pub cutoff: CutoffProfile,
}

impl PressureDecomposition {
    pub fn total(&self) -> ScalarField {
        let s = &(&self.q1 + &self.q2) + &self.q3;
        s.map(|v| v + self.q0)
    }
}

/// Representation with the default number of image rings.
pub fn q_decomposition(
    u: &VectorField,
    omega: &ScalarField,
    x0: Point,
    cutoff: &CutoffProfile,
) -> Result<PressureDecomposition> {
    q_decomposition_with(u, omega, x0, cutoff, IMAGE_RINGS)
}

/// Evaluate the representation. `q0` is anchored so that the sum equals
/// [`modified_pressure`] at `x0`; `q3` vanishes at `x0` by construction.
pub fn q_decomposition_with(
    u: &VectorField,
    omega: &ScalarField,
    x0: Point,
    cutoff: &CutoffProfile,
    image_rings: usize,
) -> Result<PressureDecomposition> {
    let grid = u.grid;
    if omega.grid != grid {
        return Err(NsError::GridMismatch("vorticity and velocity grids differ".into()));
    }
    let max = grid.min_length() / 8.0;
    if cutoff.scale > max {
        return Err(NsError::RadiusTooLarge { radius: cutoff.scale, max });
    }
    omega.check_finite()?;
    let q = modified_pressure(u)?;
    let (u1, u2) = (&u.u1, &u.u2);
    let c = 1.0 / (2.0 * PI);

    let kn1 = sample(&grid, |z| kernel_near(z, cutoff)[0]);
    let kn2 = sample(&grid, |z| kernel_near(z, cutoff)[1]);
    let q1a = periodic_convolution(&kn1, &u1.zip_map(omega, |a, b| a * b))?;
    let q1b = periodic_convolution(&kn2, &u2.zip_map(omega, |a, b| a * b))?;
    let q1 = &(&q1a + &q1b) * c;

    let prods = [u1.zip_map(u1, |a, b| a * b), u1.zip_map(u2, |a, b| a * b), u2.zip_map(u2, |a, b| a * b)];
    let prod = |k: usize, l: usize| &prods[k + l];

    let mut q2 = ScalarField::zeros(grid);
    let mut q3 = ScalarField::zeros(grid);
    for k in 0..2 {
        for l in 0..2 {
            let m = sample(&grid, |z| kernel_m(k, l, z, cutoff));
            q2 = &q2 + &periodic_convolution(&m, prod(k, l))?;
            let kf = sample(&grid, |z| far_kernel_images(&grid, k, l, z, cutoff, image_rings));
            q3 = &q3 + &periodic_convolution(&kf, prod(k, l))?;
        }
    }
    let q2 = &q2 * (0.5 * c);
    let q3 = &q3 * c;

    let node = grid.nearest_node(x0);
    let x0s = grid.node(node.0, node.1);
    let idx = grid.index(node.0, node.1);
    let q3_anchor = q3.values[idx];
    let q3 = q3.map(|v| v - q3_anchor);
    let q0 = q.values[idx] - q1.values[idx] - q2.values[idx];
    Ok(PressureDecomposition { q0, q1, q2, q3, x0: x0s, x0_node: node, cutoff: *cutoff })
}

/// Localized pressure flux and the three right-hand terms of its bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QFluxReport {
    /// `int q (u . grad phi) dx`.
    pub value: f64,
    /// `(r/R) |omega|_inf |u|^2_{L2(B(x0,3R))}`, `|u|^3_{L2(B(x0,3R))}/(rR)`,
    /// `sup_z |u|^3_{L2(B(z,2R))} / R^2`.
    pub terms: [f64; 3],
    pub radius: f64,
    pub r: f64,
}

impl QFluxReport {
    pub fn rhs(&self) -> f64 {
        self.terms.iter().sum()
    }

    pub fn ratio(&self) -> f64 {
        let r = self.rhs();
        if r == 0.0 {
            0.0
        } else {
            self.value.abs() / r
        }
    }
}

/// Evaluate the localized pressure flux for the bump `phi_{R,x0}`; `r` is the
/// cut-off scale entering the bound. Requires `R <= min(l1, l2)/8` so that
/// every ball involved fits in the periodic cell.
pub fn q_flux_term(u: &VectorField, q: &ScalarField, bump: &LocalizationBump, r: f64) -> Result<QFluxReport> {
    let grid = u.grid;
    if q.grid != grid {
        return Err(NsError::GridMismatch("pressure and velocity grids differ".into()));
    }
    let max = grid.min_length() / 8.0;
    if bump.radius > max {
        return Err(NsError::RadiusTooLarge { radius: bump.radius, max });
    }
    if !(r > 0.0 && r <= bump.radius) {
        return Err(NsError::InvalidArgument(format!("need 0 < r <= R, got r = {r}, R = {}", bump.radius)));
    }
    u.u1.check_finite()?;
    u.u2.check_finite()?;
    q.check_finite()?;
    let mut s = 0.0;
    for idx in 0..grid.len() {
        let d = grid.min_image(grid.node_of(idx), bump.center);
        let gphi = bump.grad_at(d);
        if gphi == [0.0, 0.0] {
            continue;
        }
        s += q.values[idx] * (u.u1.values[idx] * gphi[0] + u.u2.values[idx] * gphi[1]);
    }
    let value = s * grid.cell_area();

    let omega = spectral::curl(u)?;
    let w_inf = omega.sup_norm();
    let sq = u.u1.zip_map(&u.u2, |a, b| a * a + b * b);
    let l3 = ball_sum_at(&sq, bump.center, 3.0 * bump.radius).sqrt();
    let z2 = z_r(u, 2.0 * bump.radius)?;
    let big_r = bump.radius;
    let terms = [(r / big_r) * w_inf * l3 * l3, l3.powi(3) / (r * big_r), z2.powi(3) / (big_r * big_r)];
    Ok(QFluxReport { value, terms, radius: big_r, r })
}
