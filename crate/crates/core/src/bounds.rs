//! Monitors for a priori growth, local energy and enstrophy bounds, fitted
//! constants, and a discrete Gronwall check.
//!
//! Every monitor divides an observed quantity by the structural right-hand
//! side of its bound evaluated with unit constant. Constants are never
//! asserted; they are fitted as the supremum of the ratio.

use std::f64::consts::PI;

use crate::error::{NsError, Result};
use crate::evolve::{heat_solve, SolverState};
use crate::field::ScalarField;
use crate::grid::{GridSpec, Point};
use crate::spectral::{derivative, to_physical, to_spectral, Axis};
use crate::ulnorm::{ball_count, ball_sums, ul_norm, weighted_integral_at, z_r, WeightFunction};

/// Minimal aspect ratio `l1 / l2` accepted as a strip.
pub const STRIP_ASPECT: f64 = 4.0;

/// One evaluation of a monitored inequality.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRecord {
    pub name: &'static str,
    pub t: f64,
    pub lhs: f64,
    pub rhs_shape: f64,
    pub ratio: f64,
    /// The observation radius outgrew the torus and was clipped.
    pub saturated: bool,
}

impl BoundRecord {
    pub fn new(name: &'static str, t: f64, lhs: f64, rhs_shape: f64, saturated: bool) -> Result<Self> {
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs_shape };
        if !(ratio.is_finite() && ratio >= 0.0) || lhs.is_nan() {
            return Err(NsError::NonFinite { what: name, index: 0 });
        }
        Ok(Self { name, t, lhs, rhs_shape, ratio, saturated })
    }
}

/// Sup of a ratio series over an ensemble at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantFit {
    pub name: String,
    pub value: f64,
    pub members: usize,
    pub records: usize,
    pub resolution: String,
}

impl ConstantFit {
    /// Fit over all non-saturated records.
    pub fn from_records<'a>(
        name: &str,
        members: usize,
        resolution: &str,
        records: impl IntoIterator<Item = &'a BoundRecord>,
    ) -> Self {
        let mut value: f64 = 0.0;
        let mut count = 0;
        for r in records.into_iter().filter(|r| !r.saturated) {
            value = value.max(r.ratio);
            count += 1;
        }
        Self { name: name.to_string(), value, members, records: count, resolution: resolution.to_string() }
    }

    /// `max(a, b) / min(a, b)`, infinite when exactly one of them is zero.
    pub fn spread(&self, other: &ConstantFit) -> f64 {
        let (lo, hi) = (self.value.min(other.value), self.value.max(other.value));
        if hi == 0.0 {
            1.0
        } else if lo == 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// Whether two fits agree within the given factor.
    pub fn stable_with(&self, other: &ConstantFit, factor: f64) -> bool {
        self.spread(other) <= factor
    }
}

/// `max{R0, c7 sqrt(nu t), c7 |u0| |w0| t^2}` with `R0 = |u0| / |w0|`.
pub fn radius_schedule(t: f64, nu: f64, u0_inf_norm: f64, omega0_inf_norm: f64, c7: f64) -> Result<f64> {
    if !(omega0_inf_norm > 0.0) {
        return Err(NsError::InvalidArgument("radius schedule needs nonzero initial vorticity".into()));
    }
    if t < 0.0 {
        return Err(NsError::NegativeTime(t));
    }
    let r0 = u0_inf_norm / omega0_inf_norm;
    Ok(r0.max(c7 * (nu * t).sqrt()).max(c7 * u0_inf_norm * omega0_inf_norm * t * t))
}

/// Monitored inequalities along vorticity trajectories.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonitorKind {
    /// `|u| <= |u0| exp(|w0| t)`.
    ExpGrowth,
    /// `|u| <= |u0| exp(|u0|^2 t / nu)`.
    ExpGrowthViscous,
    /// `|u| <= |u0| (1 + |w0| t)`.
    LinearGrowth,
    /// `|u| <= |u0| (1 + |w0| t + (sqrt(nu t) / R0)^{1/2})`.
    LinearGrowthRefined,
    /// `Z_R <= R |u0|` with `R` from the schedule or fixed.
    UlEnergy { c7: f64, radius: Option<f64> },
    /// `sup_x int_{B(x,R)} w^2 <= |u0|^2 (1 + R^2/(nu t) + R t |w0| / sqrt(nu t))`.
    Enstrophy { c7: f64, radius: Option<f64> },
    /// `sup_x (pi R^2)^{-1} int_{B(x,R)} w^2 <= |u0|^2 / (nu t)`.
    EnstrophyAverage { c7: f64, radius: Option<f64> },
    /// `|u| + sqrt(nu t) |w| <= |u0| (1 + Re^5)`, `Re = l2 |u0| / nu`, on strips.
    Strip,
}

impl MonitorKind {
    pub fn name(&self) -> &'static str {
        match self {
            MonitorKind::ExpGrowth => "exp_growth",
            MonitorKind::ExpGrowthViscous => "exp_growth_viscous",
            MonitorKind::LinearGrowth => "linear_growth",
            MonitorKind::LinearGrowthRefined => "linear_growth_refined",
            MonitorKind::UlEnergy { .. } => "ul_energy",
            MonitorKind::Enstrophy { .. } => "enstrophy",
            MonitorKind::EnstrophyAverage { .. } => "enstrophy_average",
            MonitorKind::Strip => "strip",
        }
    }

    /// Parse a monitor name; `c7` and `radius` feed the radius-based monitors.
    pub fn parse(name: &str, c7: f64, radius: Option<f64>) -> Result<Self> {
        Ok(match name {
            "exp_growth" => MonitorKind::ExpGrowth,
            "exp_growth_viscous" => MonitorKind::ExpGrowthViscous,
            "linear_growth" => MonitorKind::LinearGrowth,
            "linear_growth_refined" => MonitorKind::LinearGrowthRefined,
            "ul_energy" => MonitorKind::UlEnergy { c7, radius },
            "enstrophy" => MonitorKind::Enstrophy { c7, radius },
            "enstrophy_average" => MonitorKind::EnstrophyAverage { c7, radius },
            "strip" => MonitorKind::Strip,
            other => return Err(NsError::InvalidArgument(format!("unknown monitor {other:?}"))),
        })
    }
}

/// A monitor bound to the initial data of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitor {
    pub kind: MonitorKind,
    pub nu: f64,
    pub grid: GridSpec,
    pub sup_u0: f64,
    pub sup_omega0: f64,
}

impl Monitor {
    pub fn new(kind: MonitorKind, initial: &SolverState, nu: f64) -> Result<Self> {
        if !(nu > 0.0) {
            return Err(NsError::InvalidArgument(format!("viscosity {nu} must be positive")));
        }
        let grid = initial.u.grid;
        if kind == MonitorKind::Strip && grid.l1 < STRIP_ASPECT * grid.l2 {
            return Err(NsError::NotAStrip { l1: grid.l1, l2: grid.l2 });
        }
        Ok(Self { kind, nu, grid, sup_u0: initial.u.sup_norm(), sup_omega0: initial.omega.sup_norm() })
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    /// Observation radius at time `t`, clipped to the torus, and whether it was clipped.
    fn radius(&self, t: f64, c7: f64, fixed: Option<f64>) -> Result<(f64, bool)> {
        let r = match fixed {
            Some(r) => r,
            None => radius_schedule(t, self.nu, self.sup_u0, self.sup_omega0, c7)?,
        };
        let max = self.grid.max_radius();
        Ok(if r > max { (max, true) } else { (r, false) })
    }

    pub fn record(&self, s: &SolverState) -> Result<BoundRecord> {
        let name = self.name();
        let t = s.t;
        let (u0, w0, nu) = (self.sup_u0, self.sup_omega0, self.nu);
        match self.kind {
            MonitorKind::ExpGrowth => BoundRecord::new(name, t, s.u.sup_norm(), u0 * (w0 * t).exp(), false),
            MonitorKind::ExpGrowthViscous => {
                BoundRecord::new(name, t, s.u.sup_norm(), u0 * (u0 * u0 * t / nu).exp(), false)
            }
            MonitorKind::LinearGrowth => BoundRecord::new(name, t, s.u.sup_norm(), u0 * (1.0 + w0 * t), false),
            MonitorKind::LinearGrowthRefined => {
                let extra = if w0 > 0.0 { ((nu * t).sqrt() * w0 / u0).sqrt() } else { 0.0 };
                BoundRecord::new(name, t, s.u.sup_norm(), u0 * (1.0 + w0 * t + extra), false)
            }
            MonitorKind::UlEnergy { c7, radius } => {
                let (r, sat) = self.radius(t, c7, radius)?;
                BoundRecord::new(name, t, z_r(&s.u, r)?, r * u0, sat)
            }
            MonitorKind::Enstrophy { c7, radius } => {
                let (r, sat) = self.radius(t, c7, radius)?;
                let lhs = sup_ball_sum(&s.omega.map(|v| v * v), r)?;
                let shape = if t > 0.0 {
                    u0 * u0 * (1.0 + r * r / (nu * t) + r * t * w0 / (nu * t).sqrt())
                } else {
                    f64::INFINITY
                };
                BoundRecord::new(name, t, lhs, shape, sat)
            }
            MonitorKind::EnstrophyAverage { c7, radius } => {
                let (r, sat) = self.radius(t, c7, radius)?;
                let lhs = sup_ball_sum(&s.omega.map(|v| v * v), r)? / (PI * r * r);
                let shape = if t > 0.0 { u0 * u0 / (nu * t) } else { f64::INFINITY };
                BoundRecord::new(name, t, lhs, shape, sat)
            }
            MonitorKind::Strip => {
                let re = self.grid.l2 * u0 / nu;
                let lhs = s.u.sup_norm() + (nu * t).sqrt() * s.omega.sup_norm();
                BoundRecord::new(name, t, lhs, u0 * (1.0 + re.powi(5)), false)
            }
        }
    }

    /// Fold over a sampled trajectory whose first entry is the initial state.
    pub fn series(&self, traj: &[SolverState]) -> Result<Vec<BoundRecord>> {
        traj.iter().map(|s| self.record(s)).collect()
    }
}

fn sup_ball_sum(g: &ScalarField, r: f64) -> Result<f64> {
    Ok(ball_sums(g, r)?.values.iter().cloned().fold(0.0_f64, f64::max))
}

fn series_of(kind: MonitorKind, traj: &[SolverState], nu: f64) -> Result<Vec<BoundRecord>> {
    let first = traj.first().ok_or_else(|| NsError::InvalidArgument("empty trajectory".into()))?;
    Monitor::new(kind, first, nu)?.series(traj)
}

/// Exponential growth bound, both the vorticity and the viscous shapes.
pub fn monitor_exp_growth(traj: &[SolverState], nu: f64) -> Result<(Vec<BoundRecord>, Vec<BoundRecord>)> {
    Ok((series_of(MonitorKind::ExpGrowth, traj, nu)?, series_of(MonitorKind::ExpGrowthViscous, traj, nu)?))
}

/// Linear growth bound, plain and refined shapes.
pub fn monitor_linear_growth(traj: &[SolverState], nu: f64) -> Result<(Vec<BoundRecord>, Vec<BoundRecord>)> {
    Ok((series_of(MonitorKind::LinearGrowth, traj, nu)?, series_of(MonitorKind::LinearGrowthRefined, traj, nu)?))
}

pub fn monitor_ul_energy(traj: &[SolverState], nu: f64, c7: f64) -> Result<Vec<BoundRecord>> {
    series_of(MonitorKind::UlEnergy { c7, radius: None }, traj, nu)
}

/// Local enstrophy, raw and area-averaged.
pub fn monitor_enstrophy(traj: &[SolverState], nu: f64, c7: f64) -> Result<(Vec<BoundRecord>, Vec<BoundRecord>)> {
    Ok((
        series_of(MonitorKind::Enstrophy { c7, radius: None }, traj, nu)?,
        series_of(MonitorKind::EnstrophyAverage { c7, radius: None }, traj, nu)?,
    ))
}

pub fn monitor_strip(traj: &[SolverState], nu: f64) -> Result<Vec<BoundRecord>> {
    series_of(MonitorKind::Strip, traj, nu)
}

/// Outcome of [`gronwall_check`] on a sampled time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    /// `f + int g` at every node.
    pub lhs: Vec<f64>,
    /// `a + int b f` at every node.
    pub hypothesis_rhs: Vec<f64>,
    /// `a exp(int b)` at every node.
    pub conclusion_rhs: Vec<f64>,
    pub hypothesis_holds: bool,
    pub conclusion_holds: bool,
    /// `max (lhs - a exp(int b)) / max(1, a exp(int b))`.
    pub max_excess: f64,
    /// `max |lhs - a exp(int b)| / max(1, a exp(int b))`.
    pub max_gap: f64,
}

/// Check `f + int g <= a + int b f` and `f + int g <= a exp(int b)` at
/// every node, integrals by the trapezoid rule, with relative tolerance `tol`.
pub fn gronwall_check(t: &[f64], f: &[f64], g: &[f64], b: &[f64], a: f64, tol: f64) -> Result<GronwallReport> {
    let n = t.len();
    if n == 0 || f.len() != n || g.len() != n || b.len() != n {
        return Err(NsError::InvalidArgument("series must share a nonempty time grid".into()));
    }
    if a < 0.0 || f.iter().chain(g).chain(b).any(|v| !(*v >= 0.0)) {
        return Err(NsError::InvalidArgument("Gronwall data must be nonnegative".into()));
    }
    if t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(NsError::InvalidArgument("time grid must be increasing".into()));
    }
    let (mut ig, mut ibf, mut ib) = (0.0, 0.0, 0.0);
    let mut lhs = Vec::with_capacity(n);
    let mut hyp = Vec::with_capacity(n);
    let mut con = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            let dt = t[i] - t[i - 1];
            ig += 0.5 * dt * (g[i] + g[i - 1]);
            ibf += 0.5 * dt * (b[i] * f[i] + b[i - 1] * f[i - 1]);
            ib += 0.5 * dt * (b[i] + b[i - 1]);
        }
        lhs.push(f[i] + ig);
        hyp.push(a + ibf);
        con.push(a * ib.exp());
    }
    let rel = |x: f64, r: f64| (x - r) / r.max(1.0);
    let hypothesis_holds = lhs.iter().zip(&hyp).all(|(x, r)| rel(*x, *r) <= tol);
    let max_excess = lhs.iter().zip(&con).map(|(x, r)| rel(*x, *r)).fold(f64::NEG_INFINITY, f64::max);
    let max_gap = lhs.iter().zip(&con).map(|(x, r)| rel(*x, *r).abs()).fold(0.0_f64, f64::max);
    Ok(GronwallReport {
        lhs,
        hypothesis_rhs: hyp,
        conclusion_rhs: con,
        hypothesis_holds,
        conclusion_holds: max_excess <= tol,
        max_excess,
        max_gap,
    })
}

/// Options of [`monitor_heat_ul`].
#[derive(Debug, Clone, PartialEq)]
pub struct HeatUlOptions {
    /// Scale of the weight `exp(-|x - c| / R)` in the weighted energy bound.
    pub weight_radius: f64,
    /// Centre `c` of the weight; the cell centre when `None`.
    pub center: Option<Point>,
    /// Trapezoid sub-steps per output interval for the dissipation integral.
    pub substeps: usize,
}

impl Default for HeatUlOptions {
    fn default() -> Self {
        Self { weight_radius: 1.0, center: None, substeps: 64 }
    }
}

/// Weighted energy bound with unit constant (`weighted`) and averaged local
/// energy on the growing radius `sqrt(1 + nu t)` against `|u0|^2_{ul}`
/// (`local`) for the heat flow `u_t = nu lap u`, sampled at `times`.
/// Squares are summed over the components.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatUlSeries {
    pub weighted: Vec<BoundRecord>,
    pub local: Vec<BoundRecord>,
}

pub fn monitor_heat_ul(
    components: &[ScalarField],
    nu: f64,
    times: &[f64],
    opts: &HeatUlOptions,
) -> Result<HeatUlSeries> {
    let first = components.first().ok_or_else(|| NsError::InvalidArgument("no components".into()))?;
    let grid = first.grid;
    for c in components {
        c.check_finite()?;
        if c.grid != grid {
            return Err(NsError::GridMismatch("heat components differ in grid".into()));
        }
    }
    if times.first() != Some(&0.0) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(NsError::InvalidArgument("output times must start at 0 and increase".into()));
    }
    let rw = opts.weight_radius;
    let weight = WeightFunction::exponential_scaled(rw)?;
    let center = opts.center.unwrap_or_else(|| grid.center());
    let at = |t: f64| -> Result<Vec<ScalarField>> { components.iter().map(|c| heat_solve(c, nu, t)).collect() };
    let square = |u: &[ScalarField]| -> ScalarField {
        let mut s = ScalarField::zeros(grid);
        for c in u {
            s = s.zip_map(c, |a, b| a + b * b);
        }
        s
    };
    let dissipation = |u: &[ScalarField]| -> Result<f64> {
        let mut dens = ScalarField::zeros(grid);
        for c in u {
            let s = to_spectral(c)?;
            let a = to_physical(&derivative(&s, Axis::X1, 1)?);
            let b = to_physical(&derivative(&s, Axis::X2, 1)?);
            dens = dens.zip_map(&a.zip_map(&b, |x, y| x * x + y * y), |p, q| p + q);
        }
        Ok(weighted_integral_at(&dens, center, &weight))
    };
    let sq0 = square(components);
    let ul0 = ul_norm(&sq0.map(f64::sqrt), 2.0, 1.0)?.powi(2);
    let initial_weighted = weighted_integral_at(&sq0, center, &weight);
    let mut weighted = Vec::with_capacity(times.len());
    let mut local = Vec::with_capacity(times.len());
    let mut integral = 0.0;
    let mut prev_t = 0.0;
    let mut prev_rate = dissipation(components)?;
    for &t in times {
        if t > prev_t {
            let m = opts.substeps.max(1);
            for j in 1..=m {
                let tj = prev_t + (t - prev_t) * j as f64 / m as f64;
                let tp = prev_t + (t - prev_t) * (j - 1) as f64 / m as f64;
                let rate = dissipation(&at(tj)?)?;
                integral += 0.5 * (tj - tp) * (prev_rate + rate);
                prev_rate = rate;
            }
            prev_t = t;
        }
        let sq = square(&at(t)?);
        let lhs = weighted_integral_at(&sq, center, &weight) + nu * integral;
        let rhs = initial_weighted * (nu * t / (rw * rw)).exp();
        weighted.push(BoundRecord::new("heat_weighted", t, lhs, rhs, false)?);
        let r = (1.0 + nu * t).sqrt();
        let max = grid.max_radius();
        let (rc, sat) = if r > max { (max, true) } else { (r, false) };
        let lhs = sup_ball_sum(&sq, rc)? / (rc * rc);
        local.push(BoundRecord::new("heat_local", t, lhs, ul0, sat)?);
    }
    Ok(HeatUlSeries { weighted, local })
}

/// Discrete ball area `|B_R|` on this grid, for normalizing local masses.
pub fn discrete_ball_area(grid: &GridSpec, radius: f64) -> f64 {
    ball_count(grid, radius) as f64 * grid.cell_area()
}
