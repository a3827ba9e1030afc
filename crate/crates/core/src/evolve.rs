//! Time integration: the Picard construction of the mild solution, an
//! integrating-factor Runge-Kutta integrator for the vorticity equation, the
//! exact heat solver, and energy bookkeeping.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::biot_savart::{velocity_from_vorticity, velocity_spectral};
use crate::error::{NsError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{GridSpec, Point};
use crate::spectral::{
    self, curl_spectral, div_heat_leray_constant, heat_propagate, nonlinear_spectral, refined_sup_norm,
    relative_divergence, to_physical, to_physical_pair, to_spectral, to_spectral_pair, vector_to_spectral, Spectrum,
};
use crate::ulnorm::LocalizationBump;

/// Courant number above which a vorticity step is refused.
pub const CFL_LIMIT: f64 = 0.5;
/// Tolerance of the state invariants (curl consistency, divergence).
pub const INVARIANT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Picard,
    EtdVorticity,
    Heat,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Picard => "picard",
            Scheme::EtdVorticity => "etd_vorticity",
            Scheme::Heat => "heat",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "picard" => Ok(Scheme::Picard),
            "etd_vorticity" => Ok(Scheme::EtdVorticity),
            "heat" => Ok(Scheme::Heat),
            _ => Err(NsError::InvalidArgument(format!(
                "unknown scheme '{s}' (expected picard, etd_vorticity or heat)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Number of Duhamel sub-intervals of `[0, T]`.
    pub picard_nodes: usize,
    pub dealias: bool,
}

impl SolverConfig {
    pub fn new(nu: f64, dt: f64, t_end: f64) -> Self {
        Self {
            nu,
            dt,
            t_end,
            scheme: Scheme::EtdVorticity,
            picard_tol: 1e-12,
            picard_max_iter: 100,
            picard_nodes: 64,
            dealias: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(NsError::InvalidArgument(format!("viscosity nu = {} must be positive", self.nu)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(NsError::InvalidArgument(format!("time step dt = {} must be positive", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(NsError::NegativeTime(self.t_end));
        }
        if !(self.picard_tol > 0.0) {
            return Err(NsError::InvalidArgument(format!("picard_tol = {} must be positive", self.picard_tol)));
        }
        if self.picard_nodes < 2 || self.picard_nodes % 2 != 0 {
            return Err(NsError::InvalidArgument(format!(
                "picard_nodes = {} must be even and >= 2",
                self.picard_nodes
            )));
        }
        Ok(())
    }
}

/// Scalar diagnostics of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    pub sup_u: f64,
    pub sup_omega: f64,
    /// `1/2 int |u|^2`.
    pub energy: f64,
    /// `int omega^2`.
    pub enstrophy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub u: VectorField,
    pub omega: ScalarField,
    pub diagnostics: Vec<Diagnostics>,
}

impl SolverState {
    /// State from a velocity; the vorticity is its spectral curl.
    pub fn from_velocity(u: VectorField, t: f64) -> Result<Self> {
        let (a, b) = vector_to_spectral(&u)?;
        spectral::check_divergence_free(&a, &b)?;
        let omega = to_physical(&curl_spectral(&a, &b));
        let mut s = Self { t, u, omega, diagnostics: Vec::new() };
        s.record();
        Ok(s)
    }

    pub fn from_vorticity(omega: ScalarField, u_inf: [f64; 2], t: f64) -> Result<Self> {
        let u = velocity_from_vorticity(&omega, u_inf)?;
        let mut s = Self { t, u, omega, diagnostics: Vec::new() };
        s.record();
        Ok(s)
    }

    pub fn diagnose(&self) -> Diagnostics {
        Diagnostics {
            t: self.t,
            sup_u: self.u.sup_norm(),
            sup_omega: self.omega.sup_norm(),
            energy: self.u.energy(),
            enstrophy: self.omega.l2_norm().powi(2),
        }
    }

    fn record(&mut self) {
        let d = self.diagnose();
        self.diagnostics.push(d);
    }

    /// Sup of the trigonometric interpolant of `omega`, polished off-grid.
    pub fn refined_sup_omega(&self) -> Result<f64> {
        let s = to_spectral(&self.omega)?;
        Ok(refined_sup_norm(&s, &self.omega, 6))
    }

    /// `omega = curl u` and `div u = 0`, both to [`INVARIANT_TOL`] relative.
    pub fn check_invariants(&self) -> Result<()> {
        let (a, b) = vector_to_spectral(&self.u)?;
        let rel = relative_divergence(&a, &b);
        if rel > INVARIANT_TOL {
            return Err(NsError::NotDivergenceFree { rel, tol: INVARIANT_TOL });
        }
        let c = to_physical(&curl_spectral(&a, &b));
        let scale = self.omega.sup_norm().max(self.u.sup_norm() * 1e-300);
        let err = (&c - &self.omega).sup_norm();
        if scale > 0.0 && err > INVARIANT_TOL * scale {
            return Err(NsError::InvalidArgument(format!(
                "vorticity inconsistent with curl u: relative error {:e}",
                err / scale
            )));
        }
        Ok(())
    }
}

/// Precomputed wavenumber tables for the vorticity nonlinearity.
struct Tables {
    k1: Vec<f64>,
    k2: Vec<f64>,
    inv_kk: Vec<f64>,
    mask: Vec<bool>,
}

impl Tables {
    fn new(grid: &GridSpec, dealias: bool) -> Self {
        let n = grid.len();
        let mut t = Tables { k1: vec![0.0; n], k2: vec![0.0; n], inv_kk: vec![0.0; n], mask: vec![true; n] };
        let dm = grid.dealias_mask();
        for i1 in 0..grid.n1 {
            for i2 in 0..grid.n2 {
                let idx = grid.index(i1, i2);
                let (k1, k2) = (grid.k1(i1), grid.k2(i2));
                t.k1[idx] = k1;
                t.k2[idx] = k2;
                let kk = k1 * k1 + k2 * k2;
                t.inv_kk[idx] = if kk == 0.0 { 0.0 } else { 1.0 / kk };
                t.mask[idx] = if dealias { dm[idx] } else { !grid.is_nyquist(i1, i2) };
            }
        }
        t
    }
}

/// Integrating-factor RK4 integrator for
/// `omega_t + (u_inf + u').grad omega = nu Delta omega`.
///
/// Diffusion and the constant background advection are integrated exactly
/// through the factor `exp((-nu |k|^2 - i k.u_inf) t)`; the mean-zero
/// advection `-div(u' omega)` is treated explicitly with dealiased products.
pub struct VorticityIntegrator {
    pub grid: GridSpec,
    pub nu: f64,
    pub dt: f64,
    pub u_inf: [f64; 2],
    pub t: f64,
    omega_hat: Spectrum,
    tables: Tables,
    e_full: Vec<Complex64>,
    e_half: Vec<Complex64>,
    /// Sup of `|u|` at the last evaluated state (for the CFL check).
    last_sup_u: f64,
    t0: f64,
    steps: u64,
}

impl VorticityIntegrator {
    pub fn new(state: &SolverState, cfg: &SolverConfig) -> Result<Self> {
        cfg.validate()?;
        let grid = state.u.grid;
        let mut omega_hat = to_spectral(&state.omega)?;
        if omega_hat.coeffs[0].norm() > crate::biot_savart::MEAN_TOL * state.omega.sup_norm().max(f64::MIN_POSITIVE) {
            return Err(NsError::NonZeroMeanVorticity {
                mean: omega_hat.coeffs[0].re,
                tol: crate::biot_savart::MEAN_TOL * state.omega.sup_norm(),
            });
        }
        omega_hat.coeffs[0] = Complex64::new(0.0, 0.0);
        omega_hat.clear_nyquist(spectral::Axis::X1);
        omega_hat.clear_nyquist(spectral::Axis::X2);
        let tables = Tables::new(&grid, cfg.dealias);
        let u_inf = state.u.u_inf;
        let factor = |tau: f64| -> Vec<Complex64> {
            (0..grid.len())
                .map(|i| {
                    let (k1, k2) = (tables.k1[i], tables.k2[i]);
                    let l = Complex64::new(-cfg.nu * (k1 * k1 + k2 * k2), -(k1 * u_inf[0] + k2 * u_inf[1]));
                    (l * tau).exp()
                })
                .collect()
        };
        let e_full = factor(cfg.dt);
        let e_half = factor(0.5 * cfg.dt);
        Ok(Self {
            grid,
            nu: cfg.nu,
            dt: cfg.dt,
            u_inf,
            t: state.t,
            omega_hat,
            tables,
            e_full,
            e_half,
            last_sup_u: state.u.sup_norm(),
            t0: state.t,
            steps: 0,
        })
    }

    /// `-div(u' omega)` for the mean-zero velocity `u'` of `w`.
    fn rhs(&self, w: &[Complex64]) -> Result<Vec<Complex64>> {
        let g = self.grid;
        let t = &self.tables;
        let zero = Complex64::new(0.0, 0.0);
        let mut a = Spectrum::zeros(g);
        let mut b = Spectrum::zeros(g);
        let mut c = Spectrum::zeros(g);
        for i in 0..g.len() {
            if t.mask[i] {
                let s = w[i] * t.inv_kk[i];
                a.coeffs[i] = Complex64::new(-s.im * t.k2[i], s.re * t.k2[i]);
                b.coeffs[i] = Complex64::new(s.im * t.k1[i], -s.re * t.k1[i]);
                c.coeffs[i] = w[i];
            }
        }
        let (u1, u2) = to_physical_pair(&a, &b);
        let om = to_physical(&c);
        let f1 = u1.zip_map(&om, |x, y| x * y);
        let f2 = u2.zip_map(&om, |x, y| x * y);
        let (p1, p2) = to_spectral_pair(&f1, &f2)?;
        let mut out = vec![zero; g.len()];
        for i in 0..g.len() {
            if t.mask[i] {
                let d = p1.coeffs[i] * t.k1[i] + p2.coeffs[i] * t.k2[i];
                out[i] = Complex64::new(d.im, -d.re);
            }
        }
        Ok(out)
    }

    pub fn cfl(&self) -> f64 {
        self.last_sup_u * self.dt / self.grid.h1().min(self.grid.h2())
    }

    /// Advance by one step. Refuses when the Courant number of the current
    /// state exceeds [`CFL_LIMIT`].
    pub fn step(&mut self) -> Result<()> {
        let cfl = self.cfl();
        if cfl > CFL_LIMIT {
            return Err(NsError::CflViolation { cfl, limit: CFL_LIMIT });
        }
        let h = self.dt;
        let w = &self.omega_hat.coeffs;
        let (ef, eh) = (&self.e_full, &self.e_half);
        let n = w.len();
        let ka = self.rhs(w)?;
        let s: Vec<Complex64> = (0..n).map(|i| eh[i] * (w[i] + ka[i] * (0.5 * h))).collect();
        let kb = self.rhs(&s)?;
        let s: Vec<Complex64> = (0..n).map(|i| eh[i] * w[i] + kb[i] * (0.5 * h)).collect();
        let kc = self.rhs(&s)?;
        let s: Vec<Complex64> = (0..n).map(|i| ef[i] * w[i] + eh[i] * kc[i] * h).collect();
        let kd = self.rhs(&s)?;
        let next: Vec<Complex64> = (0..n)
            .map(|i| ef[i] * w[i] + (ef[i] * ka[i] + eh[i] * (kb[i] + kc[i]) * 2.0 + kd[i]) * (h / 6.0))
            .collect();
        if let Some(index) = next.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(NsError::NonFinite { what: "vorticity spectrum", index });
        }
        self.omega_hat.coeffs = next;
        self.steps += 1;
        self.t = self.t0 + self.steps as f64 * h;
        let (a, b) = velocity_spectral(&self.omega_hat, self.u_inf);
        let (u1, u2) = to_physical_pair(&a, &b);
        self.last_sup_u = u1.values.iter().zip(&u2.values).fold(0.0_f64, |m, (x, y)| m.max(x.hypot(*y)));
        Ok(())
    }

    pub fn omega_spectrum(&self) -> &Spectrum {
        &self.omega_hat
    }

    /// Current state in physical space (diagnostics list left empty).
    pub fn state(&self) -> SolverState {
        let omega = to_physical(&self.omega_hat);
        let (a, b) = velocity_spectral(&self.omega_hat, self.u_inf);
        let (u1, u2) = to_physical_pair(&a, &b);
        let u = VectorField { grid: self.grid, u1, u2, u_inf: self.u_inf };
        SolverState { t: self.t, u, omega, diagnostics: Vec::new() }
    }
}

/// One integrating-factor step from `state`; the returned state carries the
/// input's diagnostics plus the new record.
pub fn vorticity_step(state: &SolverState, cfg: &SolverConfig) -> Result<SolverState> {
    if cfg.scheme != Scheme::EtdVorticity {
        return Err(NsError::InvalidArgument(format!("vorticity_step needs etd_vorticity, got {}", cfg.scheme.name())));
    }
    if !cfg.dealias {
        return Err(NsError::InvalidArgument("vorticity_step requires dealiasing".into()));
    }
    let mut it = VorticityIntegrator::new(state, cfg)?;
    it.step()?;
    let mut next = it.state();
    next.diagnostics = state.diagnostics.clone();
    next.record();
    Ok(next)
}

/// Exact heat flow `u(t) = S(nu t) u0`.
pub fn heat_solve(u0: &ScalarField, nu: f64, t: f64) -> Result<ScalarField> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(NsError::InvalidArgument(format!("diffusivity {nu} must be positive")));
    }
    if !(t >= 0.0) {
        return Err(NsError::NegativeTime(t));
    }
    Ok(to_physical(&heat_propagate(&to_spectral(u0)?, nu * t)?))
}

/// `int |grad u|^2` by Parseval.
pub fn gradient_energy(u: &VectorField) -> Result<f64> {
    let (a, b) = vector_to_spectral(u)?;
    let g = u.grid;
    let mut s = 0.0;
    for i1 in 0..g.n1 {
        let k1 = g.k1(i1);
        for i2 in 0..g.n2 {
            let k2 = g.k2(i2);
            let idx = g.index(i1, i2);
            s += (k1 * k1 + k2 * k2) * (a.coeffs[idx].norm_sqr() + b.coeffs[idx].norm_sqr());
        }
    }
    Ok(s * g.area())
}

/// Localized energy balance for one bump: `d/dt int phi e` against
/// `int q u.grad phi + nu int phi Delta e - nu int phi |grad u|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBalance {
    pub bump: LocalizationBump,
    pub initial: f64,
    pub current: f64,
    /// Time integral of the right-hand side (trapezoid rule).
    pub integrated_rhs: f64,
    last_rhs: f64,
    scale: f64,
}

impl LocalBalance {
    pub fn residual(&self) -> f64 {
        let r = (self.current - self.initial - self.integrated_rhs).abs();
        if self.scale > 0.0 {
            r / self.scale
        } else {
            r
        }
    }
}

/// `(int phi e, int q u.grad phi + nu int phi Delta e - nu int phi |grad u|^2)`.
fn local_terms(u: &VectorField, nu: f64, bump: &LocalizationBump) -> Result<(f64, f64)> {
    let g = u.grid;
    let phi = bump.field(&g);
    let gphi = bump.grad_field(&g);
    let e = u.energy_density();
    let q = crate::pressure::modified_pressure(u)?;
    let es = to_spectral(&e)?;
    let lap_e = to_physical(&es.apply(|k1, k2| Complex64::new(-(k1 * k1 + k2 * k2), 0.0)));
    let (a, b) = vector_to_spectral(u)?;
    let mut grad_sq = ScalarField::zeros(g);
    for s in [&a, &b] {
        for axis in [spectral::Axis::X1, spectral::Axis::X2] {
            let d = to_physical(&spectral::derivative(s, axis, 1)?);
            grad_sq = grad_sq.zip_map(&d, |x, y| x + y * y);
        }
    }
    let (mut flux, mut visc, mut diss, mut mass) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..g.len() {
        flux += q.values[i] * (u.u1.values[i] * gphi.u1.values[i] + u.u2.values[i] * gphi.u2.values[i]);
        visc += phi.values[i] * lap_e.values[i];
        diss += phi.values[i] * grad_sq.values[i];
        mass += phi.values[i] * e.values[i];
    }
    let da = g.cell_area();
    Ok((mass * da, da * (flux + nu * (visc - diss))))
}

/// Global energy equality `E(t) + D(t) = E(0)` with
/// `D(t) = nu int_0^t int |grad u|^2` accumulated by the trapezoid rule, plus
/// optional localized balances.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyLedger {
    pub nu: f64,
    pub t: f64,
    pub e0: f64,
    pub energy: f64,
    pub dissipation: f64,
    last_rate: f64,
    pub locals: Vec<LocalBalance>,
}

impl EnergyLedger {
    pub fn new(state: &SolverState, nu: f64, bumps: &[LocalizationBump]) -> Result<Self> {
        let energy = state.u.energy();
        let rate = nu * gradient_energy(&state.u)?;
        let mut locals = Vec::with_capacity(bumps.len());
        for b in bumps {
            b.check_fits(&state.u.grid)?;
            let (mass, rhs) = local_terms(&state.u, nu, b)?;
            locals.push(LocalBalance {
                bump: *b,
                initial: mass,
                current: mass,
                integrated_rhs: 0.0,
                last_rhs: rhs,
                scale: mass.abs().max(f64::MIN_POSITIVE),
            });
        }
        Ok(Self { nu, t: state.t, e0: energy, energy, dissipation: 0.0, last_rate: rate, locals })
    }

    /// Advance with precomputed energy and `int |grad u|^2` at time `t`.
    pub fn update_values(&mut self, t: f64, energy: f64, grad_energy: f64) {
        let rate = self.nu * grad_energy;
        self.dissipation += 0.5 * (t - self.t) * (self.last_rate + rate);
        self.last_rate = rate;
        self.energy = energy;
        self.t = t;
    }

    pub fn update(&mut self, next: &SolverState) -> Result<()> {
        let dt = next.t - self.t;
        for l in &mut self.locals {
            let (mass, rhs) = local_terms(&next.u, self.nu, &l.bump)?;
            l.integrated_rhs += 0.5 * dt * (l.last_rhs + rhs);
            l.last_rhs = rhs;
            l.current = mass;
            l.scale = l.scale.max(mass.abs());
        }
        let ge = gradient_energy(&next.u)?;
        self.update_values(next.t, next.u.energy(), ge);
        Ok(())
    }

    /// `|E + D - E(0)| / E(0)`, or the absolute value when `E(0) = 0`.
    pub fn residual(&self) -> f64 {
        let r = (self.energy + self.dissipation - self.e0).abs();
        if self.e0 > 0.0 {
            r / self.e0
        } else {
            r
        }
    }
}

/// Ledger advanced from `prev` by the state `next`.
pub fn energy_ledger_update(prev: &EnergyLedger, next: &SolverState) -> Result<EnergyLedger> {
    let mut l = prev.clone();
    l.update(next)?;
    Ok(l)
}

/// Measured `sup_tau sqrt(tau) |div S(tau) P|` over `tau = nu T 2^-j`,
/// `j = 0..=8`, on this grid.
pub fn estimate_c0(grid: &GridSpec, nu: f64, horizon: f64) -> f64 {
    (0..=8)
        .map(|j| div_heat_leray_constant(grid, nu * horizon * 0.5f64.powi(j)))
        .fold(0.0_f64, f64::max)
}

/// Fixed point of the discretized Duhamel map on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub times: Vec<f64>,
    pub states: Vec<VectorField>,
    pub c0: f64,
    /// Estimated contraction factor `8 C0 M sqrt(T / nu)`.
    pub kappa: f64,
    /// Sup distance between consecutive iterates over the time nodes.
    pub distances: Vec<f64>,
    pub iterations: usize,
    /// Difference at `T` between the solutions on `N` and `N/2` sub-intervals.
    pub quadrature_error: f64,
}

impl PicardSolution {
    pub fn final_state(&self) -> &VectorField {
        self.states.last().expect("at least one node")
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.distances.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect()
    }
}

/// Weights of the product trapezoid rule with the heat factor integrated
/// exactly: `int_0^D e^{-a s} [N_i s/D + N_{i+1} (1 - s/D)] ds`.
fn duhamel_weights(x: f64, delta: f64) -> (f64, f64, f64) {
    let (g, phi1) = if x < 1e-3 {
        (0.5 - x / 3.0 + x * x / 8.0 - x * x * x / 30.0, 1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        let e = (-x).exp();
        ((1.0 - e * (1.0 + x)) / (x * x), (1.0 - e) / x)
    };
    (( -x).exp(), delta * g, delta * (phi1 - g))
}

#[allow(clippy::too_many_arguments)]
fn picard_fixed_point(
    a0: &Spectrum,
    b0: &Spectrum,
    nu: f64,
    horizon: f64,
    nodes: usize,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<(Spectrum, Spectrum)>, Vec<f64>)> {
    let grid = a0.grid;
    let delta = horizon / nodes as f64;
    let free: Vec<(Spectrum, Spectrum)> = (0..=nodes)
        .map(|i| {
            let tau = nu * delta * i as f64;
            Ok((heat_propagate(a0, tau)?, heat_propagate(b0, tau)?))
        })
        .collect::<Result<_>>()?;
    let mut decay = vec![0.0; grid.len()];
    let mut w0 = vec![0.0; grid.len()];
    let mut w1 = vec![0.0; grid.len()];
    for i1 in 0..grid.n1 {
        for i2 in 0..grid.n2 {
            let idx = grid.index(i1, i2);
            let (k1, k2) = (grid.k1(i1), grid.k2(i2));
            let (e, a, b) = duhamel_weights(nu * (k1 * k1 + k2 * k2) * delta, delta);
            decay[idx] = e;
            w0[idx] = a;
            w1[idx] = b;
        }
    }
    let mut u = free.clone();
    let mut distances = Vec::new();
    for iter in 0..max_iter {
        let nl: Vec<(Spectrum, Spectrum)> =
            u.iter().map(|(a, b)| nonlinear_spectral(a, b)).collect::<Result<_>>()?;
        let mut next = Vec::with_capacity(nodes + 1);
        next.push(free[0].clone());
        let mut acc1 = vec![Complex64::new(0.0, 0.0); grid.len()];
        let mut acc2 = acc1.clone();
        for i in 0..nodes {
            for j in 0..grid.len() {
                acc1[j] = acc1[j] * decay[j] + nl[i].0.coeffs[j] * w0[j] + nl[i + 1].0.coeffs[j] * w1[j];
                acc2[j] = acc2[j] * decay[j] + nl[i].1.coeffs[j] * w0[j] + nl[i + 1].1.coeffs[j] * w1[j];
            }
            let (fa, fb) = &free[i + 1];
            let na = Spectrum { grid, coeffs: fa.coeffs.iter().zip(&acc1).map(|(f, a)| f - a).collect() };
            let nb = Spectrum { grid, coeffs: fb.coeffs.iter().zip(&acc2).map(|(f, a)| f - a).collect() };
            next.push((na, nb));
        }
        let mut d: f64 = 0.0;
        for (p, q) in u.iter().zip(&next) {
            let (x, y) = to_physical_pair(&q.0.sub(&p.0), &q.1.sub(&p.1));
            let m = x.values.iter().zip(&y.values).fold(0.0_f64, |m, (a, b)| m.max(a.hypot(*b)));
            d = d.max(m);
        }
        if !d.is_finite() {
            return Err(NsError::NonFinite { what: "Picard iterate", index: iter });
        }
        distances.push(d);
        u = next;
        if d <= tol {
            return Ok((u, distances));
        }
    }
    let n = distances.len();
    let ratio = if n >= 2 && distances[n - 2] > 0.0 { distances[n - 1] / distances[n - 2] } else { f64::NAN };
    Err(NsError::PicardNoConvergence { iterations: max_iter, ratio, distance: distances[n - 1] })
}

/// Picard iteration for the mild solution
/// `u(t) = S(nu t) u0 - int_0^t div S(nu (t - s)) P (u (x) u)(s) ds` on
/// `[0, T]`. Refuses horizons whose estimated contraction factor is `>= 1`.
pub fn picard_local_solve(u0: &VectorField, cfg: &SolverConfig, horizon: f64) -> Result<PicardSolution> {
    cfg.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(NsError::InvalidArgument(format!("horizon {horizon} must be positive")));
    }
    let (a0, b0) = vector_to_spectral(u0)?;
    spectral::check_divergence_free(&a0, &b0)?;
    let grid = u0.grid;
    let m = u0.sup_norm();
    let c0 = estimate_c0(&grid, cfg.nu, horizon);
    let kappa = 8.0 * c0 * m * (horizon / cfg.nu).sqrt();
    if kappa >= 1.0 {
        let suggested = horizon * (0.5 / kappa).powi(2);
        return Err(NsError::NotContractive { kappa, horizon, suggested });
    }
    let nodes = cfg.picard_nodes;
    let (fine, distances) =
        picard_fixed_point(&a0, &b0, cfg.nu, horizon, nodes, cfg.picard_tol, cfg.picard_max_iter)?;
    let (coarse, _) =
        picard_fixed_point(&a0, &b0, cfg.nu, horizon, nodes / 2, cfg.picard_tol, cfg.picard_max_iter)?;
    let to_field = |(a, b): &(Spectrum, Spectrum)| {
        let (u1, u2) = to_physical_pair(a, b);
        VectorField { grid, u1, u2, u_inf: u0.u_inf }
    };
    let states: Vec<VectorField> = fine.iter().map(to_field).collect();
    let coarse_end = to_field(coarse.last().expect("nodes"));
    let quadrature_error = states.last().expect("nodes").sub(&coarse_end).sup_norm();
    let times = (0..=nodes).map(|i| horizon * i as f64 / nodes as f64).collect();
    let iterations = distances.len();
    Ok(PicardSolution { times, states, c0, kappa, distances, iterations, quadrature_error })
}

/// Shipped initial-condition families. Velocities include the background
/// `u_inf` passed to [`InitialCondition::state`].
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    Constant { value: [f64; 2] },
    /// `u = (A sin(2 pi m x2 / l2), 0)`.
    Shear { amplitude: f64, mode: usize },
    /// `u = A (sin(k1 x1) cos(k2 x2), -(k1/k2) cos(k1 x1) sin(k2 x2))`, `k_i = 2 pi / l_i`.
    TaylorGreen { amplitude: f64 },
    /// Gaussian vortex of circulation `gamma` and core parameter `sigma0`
    /// (vorticity `gamma/(4 pi sigma) exp(-r^2 / (4 sigma))`), centred in
    /// the cell, minus its mean.
    LambOseen { circulation: f64, sigma0: f64 },
    /// Random vorticity with modes `kmin <= |m| <= kmax` (integer indices),
    /// scaled to grid sup `amplitude`.
    RandomBandlimited { kmin: f64, kmax: f64, amplitude: f64, seed: u64 },
}

impl InitialCondition {
    pub fn family(&self) -> &'static str {
        match self {
            InitialCondition::Constant { .. } => "constant",
            InitialCondition::Shear { .. } => "shear",
            InitialCondition::TaylorGreen { .. } => "taylor_green",
            InitialCondition::LambOseen { .. } => "lamb_oseen",
            InitialCondition::RandomBandlimited { .. } => "random_bandlimited",
        }
    }

    pub fn state(&self, grid: &GridSpec, u_inf: [f64; 2]) -> Result<SolverState> {
        let g = *grid;
        match *self {
            InitialCondition::Constant { value } => {
                SolverState::from_velocity(VectorField::constant(g, [value[0] + u_inf[0], value[1] + u_inf[1]]), 0.0)
            }
            InitialCondition::Shear { amplitude, mode } => {
                let k = 2.0 * PI * mode as f64 / g.l2;
                let mut u = VectorField::from_fn(g, |x| [amplitude * (k * x[1]).sin() + u_inf[0], u_inf[1]]);
                u.u_inf = u_inf;
                SolverState::from_velocity(u, 0.0)
            }
            InitialCondition::TaylorGreen { amplitude } => {
                let (k1, k2) = (2.0 * PI / g.l1, 2.0 * PI / g.l2);
                let mut u = VectorField::from_fn(g, |x| {
                    [
                        amplitude * (k1 * x[0]).sin() * (k2 * x[1]).cos() + u_inf[0],
                        -amplitude * (k1 / k2) * (k1 * x[0]).cos() * (k2 * x[1]).sin() + u_inf[1],
                    ]
                });
                u.u_inf = u_inf;
                SolverState::from_velocity(u, 0.0)
            }
            InitialCondition::LambOseen { circulation, sigma0 } => {
                let w = lamb_oseen_vorticity(grid, circulation, sigma0, g.center())?;
                SolverState::from_vorticity(w, u_inf, 0.0)
            }
            InitialCondition::RandomBandlimited { kmin, kmax, amplitude, seed } => {
                let w = random_bandlimited(grid, kmin, kmax, amplitude, seed)?;
                SolverState::from_vorticity(w, u_inf, 0.0)
            }
        }
    }
}

/// Mean-free Gaussian vortex `gamma/(4 pi s) exp(-r^2/(4 s)) - gamma/|cell|`
/// with `r` the minimum-image distance to `center`.
pub fn lamb_oseen_vorticity(grid: &GridSpec, circulation: f64, sigma: f64, center: Point) -> Result<ScalarField> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(NsError::InvalidArgument(format!("core parameter {sigma} must be positive")));
    }
    let bg = circulation / grid.area();
    Ok(ScalarField::from_fn(*grid, |x| {
        let d = grid.min_image(x, center);
        circulation / (4.0 * PI * sigma) * (-(d[0] * d[0] + d[1] * d[1]) / (4.0 * sigma)).exp() - bg
    }))
}

/// Random real vorticity with Gaussian coefficients on the integer modes
/// `kmin <= |m| <= kmax`, normalized to grid sup `amplitude`.
pub fn random_bandlimited(grid: &GridSpec, kmin: f64, kmax: f64, amplitude: f64, seed: u64) -> Result<ScalarField> {
    let limit = grid.dealias_fraction * grid.n1.min(grid.n2) as f64 / 2.0;
    if !(kmin >= 1.0 && kmax >= kmin && kmax < limit) {
        return Err(NsError::InvalidArgument(format!(
            "band [{kmin}, {kmax}] must satisfy 1 <= kmin <= kmax < {limit}"
        )));
    }
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(NsError::InvalidArgument(format!("amplitude {amplitude} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut s = Spectrum::zeros(*grid);
    let km = kmax.floor() as i64;
    for m1 in 0..=km {
        for m2 in -km..=km {
            if m1 == 0 && m2 <= 0 {
                continue;
            }
            let r = ((m1 * m1 + m2 * m2) as f64).sqrt();
            let (re, im): (f64, f64) = (normal.sample(&mut rng), normal.sample(&mut rng));
            if r < kmin || r > kmax {
                continue;
            }
            let c = Complex64::new(re, im);
            let i1 = m1.rem_euclid(grid.n1 as i64) as usize;
            let i2 = m2.rem_euclid(grid.n2 as i64) as usize;
            let j1 = (-m1).rem_euclid(grid.n1 as i64) as usize;
            let j2 = (-m2).rem_euclid(grid.n2 as i64) as usize;
            s.coeffs[grid.index(i1, i2)] = c;
            s.coeffs[grid.index(j1, j2)] = c.conj();
        }
    }
    let f = to_physical(&s);
    let m = f.sup_norm();
    if m == 0.0 {
        return Err(NsError::InvalidArgument("empty band".into()));
    }
    let mut out = f.map(|v| v * amplitude / m);
    let mean = out.mean();
    out = out.map(|v| v - mean);
    Ok(out)
}

/// Options of [`run_vorticity`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Observer and state diagnostics every this many steps (and at the end).
    pub output_every: usize,
    pub check_invariants: bool,
    /// Bumps whose localized energy balance is tracked at every step.
    pub bumps: Vec<LocalizationBump>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { output_every: 1, check_invariants: false, bumps: Vec::new() }
    }
}

/// Per-step record of a vorticity run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Diagnostics at every output time, starting with `t = 0`.
    pub diagnostics: Vec<Diagnostics>,
    /// `|E + D - E(0)| / E(0)` after every step.
    pub energy_residuals: Vec<f64>,
    pub ledger: EnergyLedger,
    pub final_state: SolverState,
    pub steps: usize,
}

/// Number of steps of size `dt` covering `[0, t_end]`; `t_end` must be a
/// multiple of `dt` up to rounding.
pub fn step_count(dt: f64, t_end: f64) -> Result<usize> {
    let n = (t_end / dt).round();
    if (n * dt - t_end).abs() > 1e-9 * t_end.max(dt) {
        return Err(NsError::InvalidArgument(format!("t_end = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Integrate the vorticity equation to `cfg.t_end`, calling `observer` on
/// the initial state and at every output step.
pub fn run_vorticity(
    initial: &SolverState,
    cfg: &SolverConfig,
    opts: &RunOptions,
    mut observer: impl FnMut(&SolverState) -> Result<()>,
) -> Result<Trajectory> {
    let steps = step_count(cfg.dt, cfg.t_end)?;
    let every = opts.output_every.max(1);
    let mut it = VorticityIntegrator::new(initial, cfg)?;
    let mut ledger = EnergyLedger::new(initial, cfg.nu, &opts.bumps)?;
    let area = initial.u.grid.area();
    let u_inf = initial.u.u_inf;
    let mut first = it.state();
    first.diagnostics.push(first.diagnose());
    if opts.check_invariants {
        first.check_invariants()?;
    }
    observer(&first)?;
    let mut diagnostics = vec![first.diagnose()];
    let mut energy_residuals = Vec::with_capacity(steps);
    let mut last = first;
    for n in 1..=steps {
        it.step()?;
        let output = n % every == 0 || n == steps;
        if opts.bumps.is_empty() {
            let (e, ge) = spectral_energies(it.omega_spectrum(), u_inf, area);
            ledger.update_values(it.t, e, ge);
        }
        if output || !opts.bumps.is_empty() {
            let mut st = it.state();
            if !opts.bumps.is_empty() {
                ledger.update(&st)?;
            }
            if output {
                if opts.check_invariants {
                    st.check_invariants()?;
                }
                let d = st.diagnose();
                st.diagnostics.push(d);
                diagnostics.push(d);
                observer(&st)?;
                last = st;
            }
        }
        energy_residuals.push(ledger.residual());
    }
    last.diagnostics = diagnostics.clone();
    Ok(Trajectory { diagnostics, energy_residuals, ledger, final_state: last, steps })
}

/// `(1/2 int |u|^2, int |grad u|^2)` from a vorticity spectrum by Parseval.
pub fn spectral_energies(w: &Spectrum, u_inf: [f64; 2], area: f64) -> (f64, f64) {
    let g = &w.grid;
    let (mut e, mut z) = (0.0, 0.0);
    for i1 in 0..g.n1 {
        let k1 = g.k1(i1);
        for i2 in 0..g.n2 {
            if g.is_nyquist(i1, i2) {
                continue;
            }
            let k2 = g.k2(i2);
            let kk = k1 * k1 + k2 * k2;
            if kk == 0.0 {
                continue;
            }
            let p = w.coeffs[g.index(i1, i2)].norm_sqr();
            e += p / kk;
            z += p;
        }
    }
    (0.5 * area * (e + u_inf[0] * u_inf[0] + u_inf[1] * u_inf[1]), area * z)
}
