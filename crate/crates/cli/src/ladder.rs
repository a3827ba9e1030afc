//! Refinement ladders against exact or spectral references.

use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use nsul_core::biot_savart::{fit_order, TruncationStudy};
use nsul_core::evolve::{run_vorticity, InitialCondition, RunOptions};
use nsul_core::pressure::{modified_pressure, q_decomposition, CutoffProfile};
use nsul_core::GridSpec;

use crate::config::ExperimentConfig;
use crate::table::Table;

#[derive(Debug, Clone, PartialEq)]
pub struct LadderReport {
    pub study: String,
    /// Grid size or truncation radius per level.
    pub parameters: Vec<f64>,
    pub errors: Vec<f64>,
    /// Least-squares order of `error ~ parameter^-p`.
    pub order: f64,
}

impl LadderReport {
    /// `level,parameter,error,order` with the pairwise order from the previous level.
    pub fn table(&self) -> Table {
        let mut t = Table::new(vec!["level".into(), "parameter".into(), "error".into(), "order".into()]);
        for (i, (p, e)) in self.parameters.iter().zip(&self.errors).enumerate() {
            let order = if i == 0 {
                f64::NAN
            } else {
                (self.errors[i - 1] / e).ln() / (p / self.parameters[i - 1]).ln()
            };
            t.rows.push(vec![i as f64, *p, *e, order]);
        }
        t
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.errors.windows(2).all(|w| w[1] < w[0])
    }
}

fn refined(grid: &GridSpec, level: usize) -> Result<GridSpec> {
    Ok(GridSpec::new(grid.n1 << level, grid.n2 << level, grid.l1, grid.l2)?)
}

/// Taylor-Green vortex against its exact decay.
pub fn taylor_green_error(grid: &GridSpec, cfg: &ExperimentConfig) -> Result<f64> {
    let amplitude = match cfg.ic {
        InitialCondition::TaylorGreen { amplitude } => amplitude,
        _ => 1.0,
    };
    let s = InitialCondition::TaylorGreen { amplitude }.state(grid, cfg.u_inf)?;
    let mut solver = cfg.solver.clone();
    solver.scheme = nsul_core::evolve::Scheme::EtdVorticity;
    let opts = RunOptions { output_every: usize::MAX, ..Default::default() };
    let traj = run_vorticity(&s, &solver, &opts, |_| Ok(()))?;
    let (k1, k2) = (2.0 * PI / grid.l1, 2.0 * PI / grid.l2);
    let decay = (-solver.nu * (k1 * k1 + k2 * k2) * solver.t_end).exp();
    let mut exact = s.u.clone();
    exact.u1 = exact.u1.map(|v| cfg.u_inf[0] + (v - cfg.u_inf[0]) * decay);
    exact.u2 = exact.u2.map(|v| cfg.u_inf[1] + (v - cfg.u_inf[1]) * decay);
    Ok(traj.final_state.u.sub(&exact).sup_norm() / exact.sup_norm())
}

/// Relative sup error of the four-term pressure representation on
/// Taylor-Green data.
pub fn q_representation_error(grid: &GridSpec) -> Result<f64> {
    let s = InitialCondition::TaylorGreen { amplitude: 1.0 }.state(grid, [0.0, 0.0])?;
    let cutoff = CutoffProfile::new(grid.min_length() / 12.0)?;
    let x0 = [grid.l1 / 4.0, grid.l2 / 8.0];
    let d = q_decomposition(&s.u, &s.omega, x0, &cutoff)?;
    let q = modified_pressure(&s.u)?;
    Ok(d.total().zip_map(&q, |a, b| a - b).sup_norm() / q.sup_norm())
}

pub fn convergence_ladder(cfg: &ExperimentConfig, levels: usize) -> Result<LadderReport> {
    if levels < 2 {
        bail!("a ladder needs at least 2 levels");
    }
    let study = cfg.ladder_study.clone();
    let (parameters, errors) = match study.as_str() {
        "taylor_green" => {
            let mut p = Vec::new();
            let mut e = Vec::new();
            for j in 0..levels {
                let g = refined(&cfg.grid, j)?;
                p.push(g.n1 as f64);
                e.push(taylor_green_error(&g, cfg).with_context(|| format!("level {j}"))?);
            }
            (p, e)
        }
        "q_decomposition" => {
            let mut p = Vec::new();
            let mut e = Vec::new();
            for j in 0..levels {
                let g = refined(&cfg.grid, j)?;
                p.push(g.n1 as f64);
                e.push(q_representation_error(&g).with_context(|| format!("level {j}"))?);
            }
            (p, e)
        }
        "bs_truncated" => {
            let g = cfg.grid;
            let s = cfg.ic.state(&g, cfg.u_inf)?;
            let base = g.center();
            let (i1, i2) = g.nearest_node([base[0] + 1.0, base[1]]);
            let x = g.node(i1, i2);
            let max = g.max_radius();
            let radii: Vec<f64> = (0..levels).map(|j| max / (1u64 << (levels - 1 - j)) as f64).collect();
            let st = TruncationStudy::run(&s.omega, x, base, &radii)?;
            (radii, st.errors)
        }
        other => bail!("unknown ladder study {other:?}"),
    };
    let order = fit_order(&parameters, &errors);
    Ok(LadderReport { study, parameters, errors, order })
}
