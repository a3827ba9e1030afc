//! Fourier representation on the periodic grid and the multiplier operators
//! built on it: heat propagator, derivatives, Riesz transforms, Leray-Hopf
//! projection, the smooth low-pass splitting `Q_delta`, and the projected
//! nonlinearity.
//!
//! Coefficients are normalized as `c_k = (1/N) sum_x f(x) e^{-i k.x}`, so the
//! `k = 0` coefficient is the grid mean and `f(x) = sum_k c_k e^{i k.x}`.
//! Multipliers define the `k = 0` value of every Riesz-type symbol as zero.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{NsError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{GridSpec, Point};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative spectral divergence above which a velocity is rejected.
pub const DIVERGENCE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

impl Axis {
    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Axis::X1),
            2 => Ok(Axis::X2),
            _ => Err(NsError::InvalidArgument(format!("axis must be 1 or 2, got {i}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub grid: GridSpec,
    pub coeffs: Vec<Complex64>,
}

struct Plan2d {
    n1: usize,
    n2: usize,
    fwd1: Arc<dyn Fft<f64>>,
    inv1: Arc<dyn Fft<f64>>,
    fwd2: Arc<dyn Fft<f64>>,
    inv2: Arc<dyn Fft<f64>>,
}

impl Plan2d {
    fn new(n1: usize, n2: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n1,
            n2,
            fwd1: planner.plan_fft_forward(n1),
            inv1: planner.plan_fft_inverse(n1),
            fwd2: planner.plan_fft_forward(n2),
            inv2: planner.plan_fft_inverse(n2),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let (p1, p2) = if inverse { (&self.inv1, &self.inv2) } else { (&self.fwd1, &self.fwd2) };
        // contiguous axis 2
        p2.process(data);
        let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
        transpose(data, &mut t, self.n1, self.n2);
        p1.process(&mut t);
        transpose(&t, data, self.n2, self.n1);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], rows: usize, cols: usize) {
    const B: usize = 16;
    for rb in (0..rows).step_by(B) {
        for cb in (0..cols).step_by(B) {
            for r in rb..(rb + B).min(rows) {
                for c in cb..(cb + B).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}

fn plan(grid: &GridSpec) -> Arc<Plan2d> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, usize), Arc<Plan2d>>>> = OnceLock::new();
    let map = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = map.lock().expect("fft plan cache poisoned");
    guard.entry((grid.n1, grid.n2)).or_insert_with(|| Arc::new(Plan2d::new(grid.n1, grid.n2))).clone()
}

fn forward_raw(grid: &GridSpec, mut data: Vec<Complex64>) -> Vec<Complex64> {
    let p = plan(grid);
    debug_assert_eq!(p.n1 * p.n2, data.len());
    p.run(&mut data, false);
    let s = 1.0 / grid.len() as f64;
    data.iter_mut().for_each(|c| *c *= s);
    data
}

fn inverse_raw(grid: &GridSpec, mut data: Vec<Complex64>) -> Vec<Complex64> {
    plan(grid).run(&mut data, true);
    data
}

#[inline]
fn neg_index(grid: &GridSpec, i1: usize, i2: usize) -> usize {
    grid.index((grid.n1 - i1) % grid.n1, (grid.n2 - i2) % grid.n2)
}

/// Forward transform. Rejects non-finite samples.
pub fn to_spectral(f: &ScalarField) -> Result<Spectrum> {
    f.check_finite()?;
    let data = f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    Ok(Spectrum { grid: f.grid, coeffs: forward_raw(&f.grid, data) })
}

/// Forward transform of two real fields with one complex FFT.
pub fn to_spectral_pair(a: &ScalarField, b: &ScalarField) -> Result<(Spectrum, Spectrum)> {
    a.check_finite()?;
    b.check_finite()?;
    if a.grid != b.grid {
        return Err(NsError::GridMismatch("pair transform on different grids".into()));
    }
    let grid = a.grid;
    let data = a.values.iter().zip(&b.values).map(|(&x, &y)| Complex64::new(x, y)).collect();
    let z = forward_raw(&grid, data);
    let mut sa = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut sb = sa.clone();
    for i1 in 0..grid.n1 {
        for i2 in 0..grid.n2 {
            let k = grid.index(i1, i2);
            let zk = z[k];
            let zm = z[neg_index(&grid, i1, i2)].conj();
            sa[k] = 0.5 * (zk + zm);
            sb[k] = -0.5 * I * (zk - zm);
        }
    }
    Ok((Spectrum { grid, coeffs: sa }, Spectrum { grid, coeffs: sb }))
}

/// Inverse transform; the imaginary residue of a non-Hermitian spectrum is dropped.
pub fn to_physical(s: &Spectrum) -> ScalarField {
    let z = inverse_raw(&s.grid, s.coeffs.clone());
    ScalarField { grid: s.grid, values: z.iter().map(|c| c.re).collect() }
}

/// Inverse transform of two Hermitian spectra with one complex FFT.
pub fn to_physical_pair(a: &Spectrum, b: &Spectrum) -> (ScalarField, ScalarField) {
    let data = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + I * y).collect();
    let z = inverse_raw(&a.grid, data);
    (
        ScalarField { grid: a.grid, values: z.iter().map(|c| c.re).collect() },
        ScalarField { grid: a.grid, values: z.iter().map(|c| c.im).collect() },
    )
}

impl Spectrum {
    pub fn zeros(grid: GridSpec) -> Self {
        Self { grid, coeffs: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Apply a real or complex symbol `m(k1, k2)` slot by slot.
    pub fn apply(&self, m: impl Fn(f64, f64) -> Complex64) -> Spectrum {
        let g = &self.grid;
        let mut out = self.coeffs.clone();
        for i1 in 0..g.n1 {
            let k1 = g.k1(i1);
            for i2 in 0..g.n2 {
                let idx = g.index(i1, i2);
                out[idx] *= m(k1, g.k2(i2));
            }
        }
        Spectrum { grid: self.grid, coeffs: out }
    }

    /// Zero the Nyquist slots along `axis` (needed after odd symbols).
    pub fn clear_nyquist(&mut self, axis: Axis) {
        let g = self.grid;
        match axis {
            Axis::X1 => {
                for i2 in 0..g.n2 {
                    self.coeffs[g.index(g.n1 / 2, i2)] = Complex64::new(0.0, 0.0);
                }
            }
            Axis::X2 => {
                for i1 in 0..g.n1 {
                    self.coeffs[g.index(i1, g.n2 / 2)] = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    pub fn dealias(&mut self) {
        for (c, keep) in self.coeffs.iter_mut().zip(self.grid.dealias_mask()) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    /// Discrete Parseval: `sum_x |f|^2 / N = sum_k |c_k|^2`.
    pub fn power(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn add(&self, other: &Spectrum) -> Spectrum {
        Spectrum {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &Spectrum) -> Spectrum {
        Spectrum {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Spectrum {
        Spectrum { grid: self.grid, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }
}

/// Multiplier `exp(-tau |k|^2)`.
pub fn heat_propagate(s: &Spectrum, tau: f64) -> Result<Spectrum> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(NsError::NegativeTime(tau));
    }
    Ok(s.apply(|k1, k2| Complex64::new((-tau * (k1 * k1 + k2 * k2)).exp(), 0.0)))
}

/// Multiplier `(i k_axis)^order`, `1 <= order <= 4`.
pub fn derivative(s: &Spectrum, axis: Axis, order: u32) -> Result<Spectrum> {
    if !(1..=4).contains(&order) {
        return Err(NsError::InvalidArgument(format!("derivative order {order} outside 1..=4")));
    }
    let mut out = s.apply(|k1, k2| {
        let k = if axis == Axis::X1 { k1 } else { k2 };
        (I * k).powu(order)
    });
    if order % 2 == 1 {
        out.clear_nyquist(axis);
    }
    Ok(out)
}

/// Riesz transform, symbol `i k_axis / |k|`, zero at `k = 0`.
pub fn riesz(s: &Spectrum, axis: Axis) -> Spectrum {
    let mut out = s.apply(|k1, k2| {
        let r = k1.hypot(k2);
        if r == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            let k = if axis == Axis::X1 { k1 } else { k2 };
            I * (k / r)
        }
    });
    out.clear_nyquist(axis);
    out
}

/// Apply the Leray-Hopf symbol `I - k k^T / |k|^2` to a pair of spectra.
/// The `k = 0` slot is passed through.
pub fn leray_spectral(a: &Spectrum, b: &Spectrum) -> (Spectrum, Spectrum) {
    let g = a.grid;
    let mut pa = a.coeffs.clone();
    let mut pb = b.coeffs.clone();
    for i1 in 0..g.n1 {
        let k1 = g.k1(i1);
        for i2 in 0..g.n2 {
            let k2 = g.k2(i2);
            let kk = k1 * k1 + k2 * k2;
            if kk == 0.0 {
                continue;
            }
            let idx = g.index(i1, i2);
            let dot = (a.coeffs[idx] * k1 + b.coeffs[idx] * k2) / kk;
            pa[idx] = a.coeffs[idx] - dot * k1;
            pb[idx] = b.coeffs[idx] - dot * k2;
        }
    }
    (Spectrum { grid: g, coeffs: pa }, Spectrum { grid: g, coeffs: pb })
}

fn vector_from_spectra(a: &Spectrum, b: &Spectrum) -> VectorField {
    let (u1, u2) = to_physical_pair(a, b);
    VectorField { grid: a.grid, u_inf: [a.coeffs[0].re, b.coeffs[0].re], u1, u2 }
}

pub fn vector_to_spectral(v: &VectorField) -> Result<(Spectrum, Spectrum)> {
    to_spectral_pair(&v.u1, &v.u2)
}

pub fn leray_project(v: &VectorField) -> Result<VectorField> {
    let (a, b) = vector_to_spectral(v)?;
    let (pa, pb) = leray_spectral(&a, &b);
    let mut out = vector_from_spectra(&pa, &pb);
    out.u_inf = v.u_inf;
    Ok(out)
}

/// Spectral divergence `i k . u_hat`.
pub fn divergence_spectral(a: &Spectrum, b: &Spectrum) -> Spectrum {
    let mut out = a.apply(|k1, _| I * k1).add(&b.apply(|_, k2| I * k2));
    out.clear_nyquist(Axis::X1);
    out.clear_nyquist(Axis::X2);
    out
}

/// Spectral curl `i k1 u2_hat - i k2 u1_hat`.
pub fn curl_spectral(a: &Spectrum, b: &Spectrum) -> Spectrum {
    let mut out = b.apply(|k1, _| I * k1).sub(&a.apply(|_, k2| I * k2));
    out.clear_nyquist(Axis::X1);
    out.clear_nyquist(Axis::X2);
    out
}

pub fn curl(v: &VectorField) -> Result<ScalarField> {
    let (a, b) = vector_to_spectral(v)?;
    Ok(to_physical(&curl_spectral(&a, &b)))
}

pub fn divergence(v: &VectorField) -> Result<ScalarField> {
    let (a, b) = vector_to_spectral(v)?;
    Ok(to_physical(&divergence_spectral(&a, &b)))
}

/// `|k . u_hat|_2 / | |k| u_hat |_2`; zero for constant fields.
pub fn relative_divergence(a: &Spectrum, b: &Spectrum) -> f64 {
    let g = a.grid;
    let (mut num, mut den) = (0.0, 0.0);
    for i1 in 0..g.n1 {
        let k1 = g.k1(i1);
        for i2 in 0..g.n2 {
            let k2 = g.k2(i2);
            let idx = g.index(i1, i2);
            num += (a.coeffs[idx] * k1 + b.coeffs[idx] * k2).norm_sqr();
            den += (k1 * k1 + k2 * k2) * (a.coeffs[idx].norm_sqr() + b.coeffs[idx].norm_sqr());
        }
    }
    if den == 0.0 {
        0.0
    } else {
        (num / den).sqrt()
    }
}

pub fn check_divergence_free(a: &Spectrum, b: &Spectrum) -> Result<()> {
    let rel = relative_divergence(a, b);
    if rel > DIVERGENCE_TOL {
        Err(NsError::NotDivergenceFree { rel, tol: DIVERGENCE_TOL })
    } else {
        Ok(())
    }
}

/// C-infinity monotone transition: 1 for `t <= 0`, 0 for `t >= 1`,
/// `f(1-t) / (f(1-t) + f(t))` with `f(t) = exp(-1/t)` in between.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        let a = (-1.0 / (1.0 - t)).exp();
        let b = (-1.0 / t).exp();
        a / (a + b)
    }
}

/// Derivative of [`smooth_step`].
pub fn smooth_step_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    let s = 1.0 - t;
    let a = (-1.0 / s).exp();
    let b = (-1.0 / t).exp();
    let da = -a / (s * s);
    let db = b / (t * t);
    (da * b - a * db) / ((a + b) * (a + b))
}

/// Radial low-pass profile: 1 for `r <= 1`, 0 for `r >= 2`, [`smooth_step`] between.
pub fn low_pass_profile(r: f64) -> f64 {
    smooth_step(r - 1.0)
}

/// `Q_delta`: multiplier `chi_hat(|k| / delta)` applied componentwise.
pub fn low_pass(v: &VectorField, delta: f64) -> Result<VectorField> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(NsError::InvalidArgument(format!("cutoff frequency {delta} must be positive")));
    }
    let (a, b) = vector_to_spectral(v)?;
    let m = |k1: f64, k2: f64| Complex64::new(low_pass_profile(k1.hypot(k2) / delta), 0.0);
    Ok(vector_from_spectra(&a.apply(m), &b.apply(m)))
}

/// Dealiased products `(u1 u1, u1 u2, u2 u2)` from velocity spectra.
pub fn dealiased_products(a: &Spectrum, b: &Spectrum) -> Result<[Spectrum; 3]> {
    let (mut a, mut b) = (a.clone(), b.clone());
    a.dealias();
    b.dealias();
    let (u1, u2) = to_physical_pair(&a, &b);
    let p11 = u1.zip_map(&u1, |x, y| x * y);
    let p12 = u1.zip_map(&u2, |x, y| x * y);
    let p22 = u2.zip_map(&u2, |x, y| x * y);
    let (mut s11, mut s22) = to_spectral_pair(&p11, &p22)?;
    let mut s12 = to_spectral(&p12)?;
    s11.dealias();
    s12.dealias();
    s22.dealias();
    Ok([s11, s12, s22])
}

/// `P div(u (x) u)` in spectral form, from dealiased products.
pub fn nonlinear_spectral(a: &Spectrum, b: &Spectrum) -> Result<(Spectrum, Spectrum)> {
    let [s11, s12, s22] = dealiased_products(a, b)?;
    let n1 = divergence_spectral(&s11, &s12);
    let n2 = divergence_spectral(&s12, &s22);
    Ok(leray_spectral(&n1, &n2))
}

/// `P (u . grad) u`, evaluated as `P div(u (x) u)` with dealiased products.
/// Rejects velocities that are not divergence-free.
pub fn nonlinear_term(u: &VectorField) -> Result<VectorField> {
    let (a, b) = vector_to_spectral(u)?;
    check_divergence_free(&a, &b)?;
    let (n1, n2) = nonlinear_spectral(&a, &b)?;
    Ok(vector_from_spectra(&n1, &n2))
}

/// Alternate form `P(grad |u|^2/2 + u^perp omega)`, with `u^perp = (-u2, u1)`.
/// The gradient part is annihilated by the projection.
pub fn nonlinear_term_rotational(u: &VectorField) -> Result<VectorField> {
    let (mut a, mut b) = vector_to_spectral(u)?;
    check_divergence_free(&a, &b)?;
    a.dealias();
    b.dealias();
    let w = to_physical(&curl_spectral(&a, &b));
    let (u1, u2) = to_physical_pair(&a, &b);
    let e = u1.zip_map(&u2, |x, y| 0.5 * (x * x + y * y));
    let f1 = u2.zip_map(&w, |x, y| -x * y);
    let f2 = u1.zip_map(&w, |x, y| x * y);
    let (mut g1, mut g2) = to_spectral_pair(&f1, &f2)?;
    let mut es = to_spectral(&e)?;
    g1.dealias();
    g2.dealias();
    es.dealias();
    let mut e1 = es.apply(|k1, _| I * k1);
    let mut e2 = es.apply(|_, k2| I * k2);
    e1.clear_nyquist(Axis::X1);
    e2.clear_nyquist(Axis::X2);
    let (p1, p2) = leray_spectral(&g1.add(&e1), &g2.add(&e2));
    Ok(vector_from_spectra(&p1, &p2))
}

/// Inverse Laplacian `(-Delta)^{-1}` on mean-zero spectra (k = 0 set to zero).
pub fn inverse_neg_laplacian(s: &Spectrum) -> Spectrum {
    s.apply(|k1, k2| {
        let kk = k1 * k1 + k2 * k2;
        Complex64::new(if kk == 0.0 { 0.0 } else { 1.0 / kk }, 0.0)
    })
}

/// Periodic convolution `sum_y kernel(x - y) g(y) dA` by the midpoint rule.
/// `kernel` is sampled at the minimum-image displacements, i.e. slot
/// `(i1, i2)` holds the kernel at [`GridSpec::displacement`].
pub fn periodic_convolution(kernel: &ScalarField, g: &ScalarField) -> Result<ScalarField> {
    let (kh, gh) = to_spectral_pair(kernel, g)?;
    let scale = g.grid.len() as f64 * g.grid.cell_area();
    let prod = Spectrum {
        grid: g.grid,
        coeffs: kh.coeffs.iter().zip(&gh.coeffs).map(|(a, b)| a * b * scale).collect(),
    };
    Ok(to_physical(&prod))
}

/// Kernel weights of a multiplier: `(1/N) sum_k m(k) e^{ik.z}` at every
/// displacement slot, so that `(M f)(x) = sum_z w(z) f(x - z)`.
pub fn multiplier_weights(grid: &GridSpec, m: impl Fn(f64, f64) -> Complex64) -> ScalarField {
    let ones = Spectrum { grid: *grid, coeffs: vec![Complex64::new(1.0, 0.0); grid.len()] };
    let w = to_physical(&ones.apply(m));
    let s = 1.0 / grid.len() as f64;
    w.map(|v| v * s)
}

/// `l1` norm of multiplier weights, i.e. the sup-norm operator norm of the
/// discrete multiplier.
pub fn multiplier_operator_norm(grid: &GridSpec, m: impl Fn(f64, f64) -> Complex64) -> f64 {
    multiplier_weights(grid, m).values.iter().map(|v| v.abs()).sum()
}

/// `sqrt(tau) |d_axis S(tau)|_{inf -> inf}` on this grid.
pub fn heat_gradient_constant(grid: &GridSpec, tau: f64, axis: Axis) -> f64 {
    let norm = multiplier_operator_norm(grid, |k1, k2| {
        let k = if axis == Axis::X1 { k1 } else { k2 };
        I * k * (-tau * (k1 * k1 + k2 * k2)).exp()
    });
    tau.sqrt() * norm
}

/// `sqrt(tau) |div S(tau) P|_{inf -> inf}` for the map from a symmetric
/// tensor field `F_{kl}` to `sum_{k,l} d_k S(tau) P_{jl} F_{kl}`, bounded by
/// `max_j sum_{k,l}` of the scalar kernel norms.
pub fn div_heat_leray_constant(grid: &GridSpec, tau: f64) -> f64 {
    let mut best: f64 = 0.0;
    for j in 0..2 {
        let mut row = 0.0;
        for k in 0..2 {
            for l in 0..2 {
                row += multiplier_operator_norm(grid, |k1, k2| {
                    let kv = [k1, k2];
                    let kk = k1 * k1 + k2 * k2;
                    if kk == 0.0 {
                        return Complex64::new(0.0, 0.0);
                    }
                    let delta = if j == l { 1.0 } else { 0.0 };
                    let p = delta - kv[j] * kv[l] / kk;
                    I * kv[k] * p * (-tau * kk).exp()
                });
            }
        }
        best = best.max(row);
    }
    tau.sqrt() * best
}

/// Values and derivatives of the trigonometric interpolant at a point.
#[derive(Debug, Clone, Copy)]
pub struct PointJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [[f64; 2]; 2],
}

/// Evaluate the Fourier series (value, gradient, Hessian) at an arbitrary
/// point. Nyquist slots are skipped so the interpolant is real.
pub fn evaluate_jet(s: &Spectrum, x: Point) -> PointJet {
    let g = &s.grid;
    let e2: Vec<Complex64> = (0..g.n2).map(|i2| Complex64::from_polar(1.0, g.k2(i2) * x[1])).collect();
    let mut acc = [Complex64::new(0.0, 0.0); 6];
    for i1 in 0..g.n1 {
        if i1 == g.n1 / 2 {
            continue;
        }
        let k1 = g.k1(i1);
        let (mut s0, mut s2, mut s22) =
            (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
        let row = &s.coeffs[g.index(i1, 0)..g.index(i1, 0) + g.n2];
        for i2 in 0..g.n2 {
            if i2 == g.n2 / 2 {
                continue;
            }
            let k2 = g.k2(i2);
            let t = row[i2] * e2[i2];
            s0 += t;
            s2 += t * k2;
            s22 += t * (k2 * k2);
        }
        let e1 = Complex64::from_polar(1.0, k1 * x[0]);
        acc[0] += e1 * s0;
        acc[1] += e1 * s0 * k1;
        acc[2] += e1 * s2;
        acc[3] += e1 * s0 * (k1 * k1);
        acc[4] += e1 * s2 * k1;
        acc[5] += e1 * s22;
    }
    PointJet {
        value: acc[0].re,
        grad: [(I * acc[1]).re, (I * acc[2]).re],
        hess: [[-acc[3].re, -acc[4].re], [-acc[4].re, -acc[5].re]],
    }
}

/// Continuous sup norm of the trigonometric interpolant: the largest grid
/// extrema of `|f|` are polished by safeguarded Newton steps on the Fourier
/// series. Never returns less than the grid maximum.
pub fn refined_sup_norm(s: &Spectrum, f: &ScalarField, candidates: usize) -> f64 {
    let g = &f.grid;
    let grid_max = f.sup_norm();
    if grid_max == 0.0 {
        return 0.0;
    }
    let mut extrema: Vec<(f64, usize, usize)> = Vec::new();
    for i1 in 0..g.n1 {
        for i2 in 0..g.n2 {
            let v = f.at(i1, i2).abs();
            let mut is_max = true;
            'nb: for d1 in [g.n1 - 1, 0, 1] {
                for d2 in [g.n2 - 1, 0, 1] {
                    if (d1, d2) == (0, 0) {
                        continue;
                    }
                    if f.at((i1 + d1) % g.n1, (i2 + d2) % g.n2).abs() > v {
                        is_max = false;
                        break 'nb;
                    }
                }
            }
            if is_max {
                extrema.push((v, i1, i2));
            }
        }
    }
    extrema.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut best = grid_max;
    let (h1, h2) = (g.h1(), g.h2());
    for &(v0, i1, i2) in extrema.iter().take(candidates.max(1)) {
        if v0 < 0.5 * grid_max {
            break;
        }
        let sign = f.at(i1, i2).signum();
        let start = g.node(i1, i2);
        let mut x = start;
        let mut val = sign * evaluate_jet(s, x).value;
        for _ in 0..30 {
            let jet = evaluate_jet(s, x);
            let gr = [sign * jet.grad[0], sign * jet.grad[1]];
            let h = [[sign * jet.hess[0][0], sign * jet.hess[0][1]], [sign * jet.hess[1][0], sign * jet.hess[1][1]]];
            let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
            // Newton on -f for a maximum needs a negative definite Hessian
            let mut step = if h[0][0] < 0.0 && det > 0.0 {
                [-(h[1][1] * gr[0] - h[0][1] * gr[1]) / det, -(-h[1][0] * gr[0] + h[0][0] * gr[1]) / det]
            } else {
                [gr[0] * h1 * h1 * 0.1, gr[1] * h2 * h2 * 0.1]
            };
            let mut accepted = false;
            for _ in 0..20 {
                let trial = [x[0] + step[0], x[1] + step[1]];
                if (trial[0] - start[0]).abs() > 1.5 * h1 || (trial[1] - start[1]).abs() > 1.5 * h2 {
                    step = [0.5 * step[0], 0.5 * step[1]];
                    continue;
                }
                let tv = sign * evaluate_jet(s, trial).value;
                if tv >= val {
                    x = trial;
                    let gain = tv - val;
                    val = tv;
                    accepted = gain > 0.0;
                    break;
                }
                step = [0.5 * step[0], 0.5 * step[1]];
            }
            if !accepted || step[0].abs() < 1e-14 * h1 && step[1].abs() < 1e-14 * h2 {
                break;
            }
        }
        best = best.max(val);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> GridSpec {
        GridSpec::square(n, 2.0 * PI).unwrap()
    }

    fn random_field(g: GridSpec, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ScalarField::new(g, (0..g.len()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn constant_has_only_mean_mode() {
        let g = grid(16);
        let s = to_spectral(&ScalarField::constant(g, 3.5)).unwrap();
        assert!((s.coeffs[0].re - 3.5).abs() < 1e-14);
        assert!(s.coeffs[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn cosine_has_two_symmetric_modes() {
        let g = grid(16);
        let s = to_spectral(&ScalarField::from_fn(g, |x| x[0].cos())).unwrap();
        for (i, c) in s.coeffs.iter().enumerate() {
            let expected = if i == g.index(1, 0) || i == g.index(15, 0) { 0.5 } else { 0.0 };
            assert!((c - Complex64::new(expected, 0.0)).norm() < 1e-14, "slot {i}: {c}");
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let g = GridSpec::new(32, 16, 3.0, 1.0).unwrap();
        let f = random_field(g, 7);
        let s = to_spectral(&f).unwrap();
        let back = to_physical(&s);
        let err = (&back - &f).sup_norm();
        assert!(err <= 1e-12 * f.sup_norm(), "round trip error {err}");
        let mean_sq: f64 = f.values.iter().map(|v| v * v).sum::<f64>() / g.len() as f64;
        assert!((s.power() - mean_sq).abs() < 1e-13);
    }

    #[test]
    fn pair_transforms_match_single() {
        let g = grid(16);
        let a = random_field(g, 1);
        let b = random_field(g, 2);
        let (sa, sb) = to_spectral_pair(&a, &b).unwrap();
        let ra = to_spectral(&a).unwrap();
        let rb = to_spectral(&b).unwrap();
        for i in 0..g.len() {
            assert!((sa.coeffs[i] - ra.coeffs[i]).norm() < 1e-14);
            assert!((sb.coeffs[i] - rb.coeffs[i]).norm() < 1e-14);
        }
        let (pa, pb) = to_physical_pair(&sa, &sb);
        assert!((&pa - &a).sup_norm() < 1e-13);
        assert!((&pb - &b).sup_norm() < 1e-13);
    }

    #[test]
    fn non_finite_input_is_rejected() {
        let g = grid(8);
        let mut f = ScalarField::zeros(g);
        f.values[3] = f64::NAN;
        assert!(matches!(to_spectral(&f), Err(NsError::NonFinite { index: 3, .. })));
    }

    #[test]
    fn heat_constant_and_plane_wave() {
        let g = grid(16);
        let c = to_spectral(&ScalarField::constant(g, 2.0)).unwrap();
        let out = to_physical(&heat_propagate(&c, 0.7).unwrap());
        assert!(out.values.iter().all(|v| (v - 2.0).abs() < 1e-14));

        let k = [2.0, -3.0];
        let f = ScalarField::from_fn(g, |x| (k[0] * x[0] + k[1] * x[1]).cos());
        let tau = 0.05;
        let out = to_physical(&heat_propagate(&to_spectral(&f).unwrap(), tau).unwrap());
        let decay = (-tau * 13.0f64).exp();
        let exact = f.map(|v| v * decay);
        assert!((&out - &exact).sup_norm() < 1e-13);
        assert!(heat_propagate(&c, -1e-3).is_err());
    }

    #[test]
    fn derivative_examples() {
        let g = grid(16);
        let s = to_spectral(&ScalarField::from_fn(g, |x| x[0].sin())).unwrap();
        let d = to_physical(&derivative(&s, Axis::X1, 1).unwrap());
        let exact = ScalarField::from_fn(g, |x| x[0].cos());
        assert!((&d - &exact).sup_norm() < 1e-13);
        let c = to_spectral(&ScalarField::constant(g, 4.0)).unwrap();
        for order in 1..=4 {
            assert!(to_physical(&derivative(&c, Axis::X2, order).unwrap()).sup_norm() < 1e-14);
        }
        assert!(derivative(&s, Axis::X1, 5).is_err());
        assert!(derivative(&s, Axis::X1, 0).is_err());
    }

    #[test]
    fn riesz_examples() {
        let g = grid(16);
        let c = to_spectral(&ScalarField::constant(g, 1.0)).unwrap();
        assert!(to_physical(&riesz(&c, Axis::X1)).sup_norm() == 0.0);

        let s = to_spectral(&ScalarField::from_fn(g, |x| x[0].cos())).unwrap();
        let twice = to_physical(&riesz(&riesz(&s, Axis::X1), Axis::X1));
        let exact = ScalarField::from_fn(g, |x| -x[0].cos());
        assert!((&twice - &exact).sup_norm() < 1e-14);

        // symbol oracle at xi = (1,1): i/sqrt(2); R1 cos(x1+x2) = -sin(x1+x2)/sqrt(2)
        let s = to_spectral(&ScalarField::from_fn(g, |x| (x[0] + x[1]).cos())).unwrap();
        let r = to_physical(&riesz(&s, Axis::X1));
        let exact = ScalarField::from_fn(g, |x| -(x[0] + x[1]).sin() / 2f64.sqrt());
        assert!((&r - &exact).sup_norm() < 1e-14);
    }

    #[test]
    fn leray_examples() {
        let g = grid(16);
        let grad = VectorField::from_fn(g, |x| [x[0].cos(), 0.0]);
        let p = leray_project(&grad).unwrap();
        assert!(p.sup_norm() < 1e-14);

        let v = VectorField::from_fn(g, |x| [(x[0] + x[1]).cos(), 0.0]);
        let p = leray_project(&v).unwrap();
        let e1 = ScalarField::from_fn(g, |x| 0.5 * (x[0] + x[1]).cos());
        assert!((&p.u1 - &e1).sup_norm() < 1e-14);
        assert!((&p.u2 + &e1).sup_norm() < 1e-14);

        let tg = VectorField::from_fn(g, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin()]);
        let p = leray_project(&tg).unwrap();
        assert!(p.sub(&tg).sup_norm() < 1e-14);

        let c = VectorField::constant(g, [0.3, -1.0]);
        let p = leray_project(&c).unwrap();
        assert_eq!(p.u_inf, [0.3, -1.0]);
        assert!(p.sub(&c).sup_norm() < 1e-14);
    }

    #[test]
    fn low_pass_passes_and_blocks() {
        let g = grid(32);
        let inside = VectorField::from_fn(g, |x| [x[1].sin(), (2.0 * x[0]).cos()]);
        let q = low_pass(&inside, 2.0).unwrap();
        assert!(q.sub(&inside).sup_norm() < 1e-14);
        let outside = VectorField::from_fn(g, |x| [(4.0 * x[1]).sin(), (5.0 * x[0]).cos()]);
        let q = low_pass(&outside, 2.0).unwrap();
        assert!(q.sup_norm() < 1e-14);
        assert!(low_pass(&inside, 0.0).is_err());
    }

    #[test]
    fn smooth_step_is_monotone_with_consistent_derivative() {
        let mut prev = 1.0;
        for i in 0..=1000 {
            let t = -0.1 + 1.2 * i as f64 / 1000.0;
            let v = smooth_step(t);
            assert!(v <= prev + 1e-15 && (0.0..=1.0).contains(&v));
            prev = v;
            let e = 1e-6;
            if t > e && t < 1.0 - e {
                let fd = (smooth_step(t + e) - smooth_step(t - e)) / (2.0 * e);
                assert!((fd - smooth_step_derivative(t)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn nonlinear_term_examples() {
        let g = grid(32);
        let c = VectorField::constant(g, [1.0, 2.0]);
        assert!(nonlinear_term(&c).unwrap().sup_norm() < 1e-14);
        let shear = VectorField::from_fn(g, |x| [(x[1]).sin() + 0.3 * (2.0 * x[1]).cos(), 0.0]);
        assert!(nonlinear_term(&shear).unwrap().sup_norm() < 1e-13);
        let tg = VectorField::from_fn(g, |x| [x[0].sin() * x[1].cos(), -x[0].cos() * x[1].sin()]);
        assert!(nonlinear_term(&tg).unwrap().sup_norm() < 1e-13);
        let bad = VectorField::from_fn(g, |x| [x[0].sin(), 0.0]);
        assert!(matches!(nonlinear_term(&bad), Err(NsError::NotDivergenceFree { .. })));
    }

    #[test]
    fn refined_sup_finds_off_grid_peak() {
        let g = grid(16);
        let x0 = [1.234, 2.71];
        let f = ScalarField::from_fn(g, |x| 2.0 * (x[0] - x0[0]).cos() * (x[1] - x0[1]).cos());
        let s = to_spectral(&f).unwrap();
        assert!(f.sup_norm() < 1.999);
        let r = refined_sup_norm(&s, &f, 4);
        assert!((r - 2.0).abs() < 1e-12, "refined {r}");
    }

    #[test]
    fn young_bound_for_periodic_convolution() {
        let g = GridSpec::square(32, 5.0).unwrap();
        for seed in 0..5 {
            let f = random_field(g, 100 + seed);
            let h = random_field(g, 200 + seed);
            let conv = periodic_convolution(&f, &h).unwrap();
            let l1 = f.values.iter().map(|v| v.abs()).sum::<f64>() * g.cell_area();
            assert!(conv.sup_norm() <= l1 * h.sup_norm() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn periodic_convolution_matches_direct_sum() {
        let g = GridSpec::new(8, 16, 2.0, 3.0).unwrap();
        let k = random_field(g, 11);
        let f = random_field(g, 12);
        let conv = periodic_convolution(&k, &f).unwrap();
        for &(i1, i2) in &[(0, 0), (3, 5), (7, 15)] {
            let mut s = 0.0;
            for j1 in 0..g.n1 {
                for j2 in 0..g.n2 {
                    let d1 = (i1 + g.n1 - j1) % g.n1;
                    let d2 = (i2 + g.n2 - j2) % g.n2;
                    s += k.at(d1, d2) * f.at(j1, j2);
                }
            }
            s *= g.cell_area();
            assert!((conv.at(i1, i2) - s).abs() < 1e-12);
        }
    }
}
