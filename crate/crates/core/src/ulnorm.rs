//! Uniformly local norms, weighted equivalents and localization bumps.
//!
//! Balls wrap periodically and contain the nodes at distance `<= R` from the
//! centre (with a relative slack of `1e-12` so symmetric nodes are treated
//! alike). Sups run over every grid node as a centre.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{NsError, Result};
use crate::field::{ScalarField, VectorField};
use crate::grid::{GridSpec, Point};
use crate::spectral::periodic_convolution;

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type TailFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Radius up to which the envelope is integrated numerically.
pub const ENVELOPE_RADIUS: f64 = 1000.0;
/// Largest ratio of consecutive dyadic shell integrals accepted as decay
/// when no analytic tail bound is available.
pub const GROWTH_RATIO: f64 = 0.75;

/// A nonnegative weight `rho` on `R^dim` together with its envelope
/// `rho~(x) = sup_{|y - x| <= 1} rho(y)`.
#[derive(Clone)]
pub struct WeightFunction {
    pub name: String,
    pub dim: usize,
    pub params: Vec<(String, f64)>,
    rho: PointFn,
    envelope: PointFn,
    tail_bound: Option<TailFn>,
}

impl fmt::Debug for WeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("params", &self.params)
            .field("tail_bound", &self.tail_bound.is_some())
            .finish()
    }
}

fn radius_of(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl WeightFunction {
    /// Custom weight. `tail_bound(R)` must bound `int_{|x| > R} rho~`; when
    /// absent, integrability is judged by the decay of dyadic shell integrals.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        rho: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        envelope: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        tail_bound: Option<Box<dyn Fn(f64) -> f64 + Send + Sync>>,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(NsError::InvalidArgument(format!("weight dimension {dim} must be 1 or 2")));
        }
        Ok(Self {
            name: name.into(),
            dim,
            params: Vec::new(),
            rho: Arc::new(rho),
            envelope: Arc::new(envelope),
            tail_bound: tail_bound.map(Arc::from),
        })
    }

    /// `e^{-|x|}` on the plane.
    pub fn exponential() -> Self {
        Self {
            name: "exp".into(),
            dim: 2,
            params: Vec::new(),
            rho: Arc::new(|x| (-radius_of(x)).exp()),
            envelope: Arc::new(|x| (-(radius_of(x) - 1.0).max(0.0)).exp()),
            tail_bound: Some(Arc::new(|r| 2.0 * PI * (-(r - 1.0)).exp() * (r + 1.0))),
        }
    }

    /// `e^{-|x|/R}`, the rescaled exponential weight.
    pub fn exponential_scaled(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(NsError::InvalidArgument(format!("weight scale {scale} must be positive")));
        }
        let s = scale;
        Ok(Self {
            name: "exp_scaled".into(),
            dim: 2,
            params: vec![("scale".into(), s)],
            rho: Arc::new(move |x| (-radius_of(x) / s).exp()),
            envelope: Arc::new(move |x| (-(radius_of(x) - 1.0).max(0.0) / s).exp()),
            tail_bound: Some(Arc::new(move |r| 2.0 * PI * s * (-(r - 1.0) / s).exp() * (r + s))),
        })
    }

    /// `(m + |x|)^{-m}` on the plane; admissible for `m > 2`.
    pub fn algebraic(m: f64) -> Result<Self> {
        if !(m > 0.0 && m.is_finite()) {
            return Err(NsError::InvalidArgument(format!("exponent {m} must be positive")));
        }
        let tail: Option<TailFn> = if m > 2.0 {
            Some(Arc::new(move |r| 2.0 * PI * (m + r - 1.0).powf(2.0 - m) / (m - 2.0)))
        } else {
            None
        };
        Ok(Self {
            name: "algebraic".into(),
            dim: 2,
            params: vec![("m".into(), m)],
            rho: Arc::new(move |x| (m + radius_of(x)).powf(-m)),
            envelope: Arc::new(move |x| (m + (radius_of(x) - 1.0).max(0.0)).powf(-m)),
            tail_bound: tail,
        })
    }

    /// One-dimensional spike weight `sum_k k^{-1/2} 1_[-k-1/k, -k]`: it is
    /// integrable, but its envelope is not.
    pub fn spike() -> Self {
        Self {
            name: "spike".into(),
            dim: 1,
            params: Vec::new(),
            rho: Arc::new(|x| spike_value(x[0])),
            envelope: Arc::new(|x| spike_envelope(x[0])),
            tail_bound: None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.rho)(x)
    }

    pub fn envelope(&self, x: &[f64]) -> f64 {
        (self.envelope)(x)
    }
}

fn spike_value(x: f64) -> f64 {
    if x > -1.0 {
        return 0.0;
    }
    let k = (-x).floor();
    // x in [-k-1/k, -k] for k = floor(-x) or the interval of k lies left of x
    let mut v: f64 = 0.0;
    for kk in [k, k - 1.0] {
        if kk >= 1.0 && x >= -kk - 1.0 / kk && x <= -kk {
            v = v.max(kk.powf(-0.5));
        }
    }
    v
}

fn spike_envelope(x: f64) -> f64 {
    // intervals [-k-1/k, -k] meeting [x-1, x+1]; the smallest such k wins
    let lo = x - 1.0;
    let hi = x + 1.0;
    let kmin = (-hi - 1.0).floor().max(1.0);
    let mut k = kmin;
    while -k >= lo {
        if -k - 1.0 / k <= hi && -k >= lo {
            return k.powf(-0.5);
        }
        k += 1.0;
    }
    0.0
}

/// Outcome of the two admissibility assumptions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub weight: String,
    /// `rho > 0` somewhere on the sampling box.
    pub positive: bool,
    /// Envelope integral estimate (numerical part plus tail).
    pub envelope_integral: f64,
    pub integrable: bool,
    /// Dyadic shell integrals of the envelope, innermost first.
    pub shell_integrals: Vec<f64>,
    pub detail: String,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.positive && self.integrable
    }

    pub fn to_error(&self) -> Option<NsError> {
        if !self.positive {
            Some(NsError::InadmissibleWeight(format!(
                "{}: assumption (a) fails, rho vanishes on every sample",
                self.weight
            )))
        } else if !self.integrable {
            Some(NsError::InadmissibleWeight(format!(
                "{}: assumption (b) fails, envelope not integrable ({})",
                self.weight, self.detail
            )))
        } else {
            None
        }
    }
}

fn shell_edges() -> Vec<f64> {
    let mut e = vec![0.0, 1.0];
    while *e.last().unwrap() < ENVELOPE_RADIUS {
        let next = (2.0 * e.last().unwrap()).min(ENVELOPE_RADIUS);
        e.push(next);
    }
    e
}

fn shell_integral(w: &WeightFunction, a: f64, b: f64) -> f64 {
    const NR: usize = 400;
    const NT: usize = 64;
    let dr = (b - a) / NR as f64;
    let mut s = 0.0;
    for i in 0..NR {
        let r = a + (i as f64 + 0.5) * dr;
        if w.dim == 1 {
            s += (w.envelope(&[r]) + w.envelope(&[-r])) * dr;
        } else {
            let mut ang = 0.0;
            for j in 0..NT {
                let t = 2.0 * PI * (j as f64 + 0.5) / NT as f64;
                ang += w.envelope(&[r * t.cos(), r * t.sin()]);
            }
            s += ang * (2.0 * PI / NT as f64) * r * dr;
        }
    }
    s
}

/// Check assumption (a) by sampling `rho` on `[-10, 10]^dim` and assumption
/// (b) by integrating the envelope over dyadic shells up to
/// [`ENVELOPE_RADIUS`], closed by the weight's tail bound or, lacking one,
/// by a geometric-decay test on the shell integrals.
pub fn admissibility_check(w: &WeightFunction) -> AdmissibilityReport {
    let samples = 201;
    let coord = |i: usize| -10.0 + 20.0 * i as f64 / (samples - 1) as f64;
    let positive = if w.dim == 1 {
        (0..samples).any(|i| w.eval(&[coord(i)]) > 0.0)
    } else {
        (0..samples).any(|i| (0..samples).any(|j| w.eval(&[coord(i), coord(j)]) > 0.0))
    };
    let edges = shell_edges();
    let shells: Vec<f64> = edges.windows(2).map(|e| shell_integral(w, e[0], e[1])).collect();
    let inner: f64 = shells.iter().sum();
    let (integrable, total, detail) = match &w.tail_bound {
        Some(tail) => {
            let t = tail(ENVELOPE_RADIUS);
            let total = inner + t;
            (total.is_finite(), total, format!("tail bound {t:e} beyond radius {ENVELOPE_RADIUS}"))
        }
        None => {
            // compare full dyadic shells only (the last one may be truncated)
            let full = &shells[1..shells.len() - 1];
            let ratios: Vec<f64> = full.windows(2).map(|p| p[1] / p[0].max(f64::MIN_POSITIVE)).collect();
            let tail_ratios = &ratios[ratios.len().saturating_sub(3)..];
            let worst = tail_ratios.iter().cloned().fold(0.0_f64, f64::max);
            let ok = worst <= GROWTH_RATIO;
            let last = *shells.last().unwrap();
            let total = if ok { inner + last * worst / (1.0 - worst) } else { f64::INFINITY };
            (ok, total, format!("consecutive shell ratio {worst:.3} (limit {GROWTH_RATIO})"))
        }
    };
    AdmissibilityReport {
        weight: w.name.clone(),
        positive,
        envelope_integral: total,
        integrable,
        shell_integrals: shells,
        detail,
    }
}

#[inline]
fn ball_slack(radius: f64) -> f64 {
    radius * radius * (1.0 + 1e-12)
}

fn check_radius(grid: &GridSpec, radius: f64) -> Result<()> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(NsError::InvalidArgument(format!("radius {radius} must be positive")));
    }
    if radius > grid.max_radius() * (1.0 + 1e-12) {
        return Err(NsError::RadiusTooLarge { radius, max: grid.max_radius() });
    }
    Ok(())
}

/// Half-widths (in nodes along axis 2) of the discrete ball, per row offset.
fn ball_rows(grid: &GridSpec, radius: f64) -> Vec<(isize, usize)> {
    let r2 = ball_slack(radius);
    let (h1, h2) = (grid.h1(), grid.h2());
    let m1 = (radius / h1).floor() as isize + 1;
    let mut rows = Vec::new();
    for d1 in -m1..=m1 {
        let y = d1 as f64 * h1;
        let rem = r2 - y * y;
        if rem < 0.0 {
            continue;
        }
        let mut w = (rem.sqrt() / h2).floor() as isize + 1;
        while w >= 0 && (w as f64 * h2).powi(2) > rem {
            w -= 1;
        }
        if w >= 0 {
            rows.push((d1, w as usize));
        }
    }
    rows
}

/// Number of nodes in the discrete ball of the given radius.
pub fn ball_count(grid: &GridSpec, radius: f64) -> usize {
    ball_rows(grid, radius).iter().map(|&(_, w)| 2 * w + 1).sum()
}

/// `sum_{|y - x| <= R} g(y) dA` for every centre `x`, via row prefix sums.
pub fn ball_sums(g: &ScalarField, radius: f64) -> Result<ScalarField> {
    let grid = g.grid;
    check_radius(&grid, radius)?;
    let (n1, n2) = (grid.n1, grid.n2);
    let prefix: Vec<Vec<f64>> = (0..n1)
        .map(|i1| {
            let mut p = Vec::with_capacity(3 * n2 + 1);
            p.push(0.0);
            let mut s = 0.0;
            for j in 0..3 * n2 {
                s += g.at(i1, j % n2);
                p.push(s);
            }
            p
        })
        .collect();
    let rows = ball_rows(&grid, radius);
    let da = grid.cell_area();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let (i1, i2) = (idx / n2, idx % n2);
            let mut s = 0.0;
            for &(d1, w) in &rows {
                let r = (i1 as isize + d1).rem_euclid(n1 as isize) as usize;
                let a = i2 + n2 - w;
                let b = i2 + n2 + w;
                s += prefix[r][b + 1] - prefix[r][a];
            }
            s * da
        })
        .collect();
    Ok(ScalarField { grid, values })
}

/// Brute-force ball sum at one centre; the oracle for [`ball_sums`].
pub fn ball_sum_at(g: &ScalarField, x: Point, radius: f64) -> f64 {
    let grid = g.grid;
    let r2 = ball_slack(radius);
    let mut s = 0.0;
    for i1 in 0..grid.n1 {
        for i2 in 0..grid.n2 {
            let d = grid.min_image(grid.node(i1, i2), x);
            if d[0] * d[0] + d[1] * d[1] <= r2 {
                s += g.at(i1, i2);
            }
        }
    }
    s * grid.cell_area()
}

/// `sup_x (int_{B(x,R)} |f|^p)^{1/p}` over all grid centres.
pub fn ul_norm(f: &ScalarField, p: f64, radius: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(NsError::InvalidArgument(format!("exponent {p} must be >= 1")));
    }
    f.check_finite()?;
    let masses = ball_sums(&f.map(|v| v.abs().powf(p)), radius)?;
    Ok(masses.values.iter().cloned().fold(0.0_f64, f64::max).powf(1.0 / p))
}

/// Hoelder-normalized variant `sup_x (|B|^{-1} int_B |f|^p)^{1/p}` with the
/// discrete ball measure, nondecreasing in `p`.
pub fn ul_norm_normalized(f: &ScalarField, p: f64, radius: f64) -> Result<f64> {
    let mass = ul_norm(f, p, radius)?.powf(p);
    let area = ball_count(&f.grid, radius) as f64 * f.grid.cell_area();
    Ok((mass / area).powf(1.0 / p))
}

/// `sup_x (int rho(x - y) |f(y)|^p dy)^{1/p}` with the weight sampled at
/// minimum-image displacements (its tail beyond the fundamental domain is
/// dropped). Rejects inadmissible or non-planar weights.
pub fn weighted_norm(f: &ScalarField, p: f64, w: &WeightFunction) -> Result<f64> {
    let report = admissibility_check(w);
    if let Some(e) = report.to_error() {
        return Err(e);
    }
    weighted_norm_unchecked(f, p, w)
}

/// [`weighted_norm`] without the admissibility check, for repeated use of a
/// weight already known to pass.
pub fn weighted_norm_unchecked(f: &ScalarField, p: f64, w: &WeightFunction) -> Result<f64> {
    if w.dim != 2 {
        return Err(NsError::InvalidArgument(format!("weight {} is not planar", w.name)));
    }
    if !(p >= 1.0 && p.is_finite()) {
        return Err(NsError::InvalidArgument(format!("exponent {p} must be >= 1")));
    }
    f.check_finite()?;
    let grid = f.grid;
    let kernel = weight_samples(&grid, w);
    let conv = periodic_convolution(&kernel, &f.map(|v| v.abs().powf(p)))?;
    let m = conv.values.iter().cloned().fold(0.0_f64, f64::max);
    Ok(m.max(0.0).powf(1.0 / p))
}

/// Weight sampled at the displacement slots of the grid.
pub fn weight_samples(grid: &GridSpec, w: &WeightFunction) -> ScalarField {
    let mut values = vec![0.0; grid.len()];
    for i1 in 0..grid.n1 {
        for i2 in 0..grid.n2 {
            values[grid.index(i1, i2)] = w.eval(&grid.displacement(i1, i2));
        }
    }
    ScalarField { grid: *grid, values }
}

/// Weighted energy `int rho(x - y) g(y) dy` at a single centre by direct
/// quadrature over minimum-image displacements.
pub fn weighted_integral_at(g: &ScalarField, x: Point, w: &WeightFunction) -> f64 {
    let grid = g.grid;
    let mut s = 0.0;
    for i1 in 0..grid.n1 {
        for i2 in 0..grid.n2 {
            let d = grid.min_image(grid.node(i1, i2), x);
            s += w.eval(&d) * g.at(i1, i2);
        }
    }
    s * grid.cell_area()
}

/// `phi = psi^2` with `psi(s) = 1 - S(s - 1)` in `s = |x - x0| / R` and the
/// quintic smoothstep `S(t) = 6t^5 - 15t^4 + 10t^3`, so `phi = 1` on
/// `B(x0, R)` and `phi = 0` outside `B(x0, 2R)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationBump {
    pub center: Point,
    pub radius: f64,
}

fn quintic(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

fn quintic_derivative(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        0.0
    } else {
        30.0 * t * t * (1.0 - t) * (1.0 - t)
    }
}

/// `sup |S'| = 30/16`.
const QUINTIC_SLOPE: f64 = 1.875;

impl LocalizationBump {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(NsError::InvalidArgument(format!("bump radius {radius} must be positive")));
        }
        Ok(Self { center, radius })
    }

    pub fn psi_at_distance(&self, r: f64) -> f64 {
        1.0 - quintic(r / self.radius - 1.0)
    }

    /// `phi` at a displacement `d` from the centre.
    pub fn value_at(&self, d: Point) -> f64 {
        let p = self.psi_at_distance(d[0].hypot(d[1]));
        p * p
    }

    /// `grad phi` at a displacement `d` from the centre.
    pub fn grad_at(&self, d: Point) -> [f64; 2] {
        let r = d[0].hypot(d[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let psi = self.psi_at_distance(r);
        let dpsi = -quintic_derivative(r / self.radius - 1.0) / self.radius;
        let c = 2.0 * psi * dpsi / r;
        [c * d[0], c * d[1]]
    }

    /// `C3 = 2 sup |grad psi|`, so that `|grad phi| <= C3 phi^{1/2}`.
    pub fn c3(&self) -> f64 {
        2.0 * QUINTIC_SLOPE / self.radius
    }

    pub fn field(&self, grid: &GridSpec) -> ScalarField {
        ScalarField::from_fn(*grid, |x| self.value_at(grid.min_image(x, self.center)))
    }

    pub fn grad_field(&self, grid: &GridSpec) -> VectorField {
        let mut v = VectorField::from_fn(*grid, |x| self.grad_at(grid.min_image(x, self.center)));
        v.u_inf = [0.0, 0.0];
        v
    }

    /// Support `B(x0, 2R)` must not wrap onto itself.
    pub fn check_fits(&self, grid: &GridSpec) -> Result<()> {
        if 2.0 * self.radius > grid.min_length() / 2.0 {
            return Err(NsError::RadiusTooLarge { radius: 2.0 * self.radius, max: grid.min_length() / 2.0 });
        }
        Ok(())
    }
}

/// `E_R(x) = 1/2 int_{B(x,R)} |u|^2`.
pub fn local_energy(u: &VectorField, x: Point, radius: f64) -> Result<f64> {
    check_radius(&u.grid, radius)?;
    Ok(ball_sum_at(&u.energy_density(), x, radius))
}

/// `|g|_{L^2(B(x,R))}` for a vector field.
pub fn local_l2(u: &VectorField, x: Point, radius: f64) -> Result<f64> {
    Ok((2.0 * local_energy(u, x, radius)?).sqrt())
}

/// `Z_R(u) = sup_x |u|_{L^2(B(x,R))}`.
pub fn z_r(u: &VectorField, radius: f64) -> Result<f64> {
    let sq = u.u1.zip_map(&u.u2, |a, b| a * a + b * b);
    let masses = ball_sums(&sq, radius)?;
    Ok(masses.values.iter().cloned().fold(0.0_f64, f64::max).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_norms() {
        let g = GridSpec::square(256, 16.0).unwrap();
        let c = ScalarField::constant(g, -2.0);
        for p in [1.0, 2.0, 4.0] {
            let v = ul_norm(&c, p, 1.0).unwrap();
            let exact = 2.0 * PI.powf(1.0 / p);
            assert!((v - exact).abs() / exact < 0.02, "p={p}: {v} vs {exact}");
        }
        assert_eq!(ul_norm(&ScalarField::zeros(g), 2.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn ball_sums_match_brute_force() {
        let g = GridSpec::new(32, 16, 8.0, 6.0).unwrap();
        let f = ScalarField::from_fn(g, |x| (x[0] * 0.7).sin() + (x[1] * 2.1).cos() + x[0] * 0.01);
        let s = ball_sums(&f, 1.3).unwrap();
        for &(i1, i2) in &[(0, 0), (5, 15), (31, 7), (16, 8)] {
            let b = ball_sum_at(&f, g.node(i1, i2), 1.3);
            assert!((s.at(i1, i2) - b).abs() < 1e-12, "{} vs {b}", s.at(i1, i2));
        }
    }

    #[test]
    fn radius_limit() {
        let g = GridSpec::square(32, 8.0).unwrap();
        let c = ScalarField::constant(g, 1.0);
        assert!(ul_norm(&c, 2.0, 2.0).is_ok());
        assert!(matches!(ul_norm(&c, 2.0, 2.1), Err(NsError::RadiusTooLarge { .. })));
    }

    #[test]
    fn builtin_weights_are_admissible() {
        let e = admissibility_check(&WeightFunction::exponential());
        assert!(e.passed());
        assert!((e.envelope_integral - 5.0 * PI).abs() < 1e-2, "{}", e.envelope_integral);
        let a = admissibility_check(&WeightFunction::algebraic(3.0).unwrap());
        assert!(a.passed());
    }

    #[test]
    fn spike_weight_fails_b_only() {
        let r = admissibility_check(&WeightFunction::spike());
        assert!(r.positive);
        assert!(!r.integrable);
        assert!(r.to_error().unwrap().to_string().contains("(b)"));
        let n = r.shell_integrals.len();
        assert!(r.shell_integrals[n - 2] > r.shell_integrals[n - 3]);
    }

    #[test]
    fn spike_envelope_dominates_weight() {
        for i in 0..4000 {
            let x = -40.0 + i as f64 * 0.01;
            let env = spike_envelope(x);
            for d in [-1.0, -0.5, 0.0, 0.5, 1.0] {
                assert!(spike_value(x + d) <= env + 1e-15, "x={x} d={d}");
            }
        }
    }

    #[test]
    fn weighted_norm_of_constant() {
        let g = GridSpec::square(256, 48.0).unwrap();
        let c = ScalarField::constant(g, 3.0);
        let v = weighted_norm(&c, 2.0, &WeightFunction::exponential()).unwrap();
        let exact = 3.0 * (2.0 * PI).sqrt();
        assert!((v - exact).abs() / exact < 1e-3, "{v} vs {exact}");
        assert!(matches!(
            weighted_norm(&c, 2.0, &WeightFunction::spike()),
            Err(NsError::InadmissibleWeight(_))
        ));
    }

    #[test]
    fn bump_gradient_bound_holds_at_every_node() {
        let g = GridSpec::square(128, 16.0).unwrap();
        let b = LocalizationBump::new([3.0, 11.0], 2.5).unwrap();
        let phi = b.field(&g);
        let gr = b.grad_field(&g);
        for i in 0..g.len() {
            let m = gr.u1.values[i].hypot(gr.u2.values[i]);
            assert!(m <= b.c3() * phi.values[i].sqrt() * (1.0 + 1e-12) + 1e-15);
        }
        assert_eq!(b.value_at([0.5, 0.0]), 1.0);
        assert_eq!(b.value_at([5.0, 0.1]), 0.0);
    }

    #[test]
    fn local_energy_and_z_r_of_constant() {
        let g = GridSpec::square(256, 16.0).unwrap();
        let u = VectorField::constant(g, [2.0, 0.0]);
        let e = local_energy(&u, g.center(), 2.0).unwrap();
        assert!((e - 0.5 * 4.0 * PI * 4.0).abs() / e < 0.01);
        let z = z_r(&u, 2.0).unwrap();
        assert!((z - 2.0 * PI.sqrt() * 2.0).abs() / z < 0.01);
    }
}
