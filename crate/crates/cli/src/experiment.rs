//! Single runs and seeded ensembles.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nsul_core::bounds::{monitor_heat_ul, BoundRecord, ConstantFit, HeatUlOptions, Monitor, MonitorKind};
use nsul_core::evolve::{heat_solve, picard_local_solve, run_vorticity, step_count, RunOptions, Scheme, SolverState};
use nsul_core::VectorField;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, HEAT_MONITORS};
use crate::snapshot::Snapshot;
use crate::table::{format_f64, Table};

pub const DIAGNOSTIC_COLUMNS: [&str; 5] = ["t", "sup_u", "sup_omega", "energy", "enstrophy"];

/// Everything a run produces, before it touches the filesystem.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub table: Table,
    pub records: BTreeMap<String, Vec<BoundRecord>>,
    pub snapshots: Vec<Snapshot>,
    pub fits: Vec<ConstantFit>,
    /// Relative energy-equality residual at the end, for vorticity runs.
    pub energy_residual: Option<f64>,
}

pub fn resolution(cfg: &ExperimentConfig) -> String {
    format!("{}x{} dt={}", cfg.grid.n1, cfg.grid.n2, format_f64(cfg.solver.dt))
}

struct Collector<'a> {
    cfg: &'a ExperimentConfig,
    monitors: Vec<Monitor>,
    states: Vec<[f64; 5]>,
    records: BTreeMap<String, Vec<BoundRecord>>,
    snapshots: Vec<Snapshot>,
    pending: Vec<f64>,
}

impl<'a> Collector<'a> {
    fn new(cfg: &'a ExperimentConfig, initial: &SolverState) -> Result<Self> {
        let mut monitors = Vec::new();
        for name in cfg.monitors.iter().filter(|m| !HEAT_MONITORS.contains(&m.as_str())) {
            let kind = MonitorKind::parse(name, cfg.c7, cfg.radius)?;
            monitors.push(Monitor::new(kind, initial, cfg.solver.nu)?);
        }
        let mut pending = cfg.snapshots.clone();
        pending.sort_by(f64::total_cmp);
        Ok(Self { cfg, monitors, states: Vec::new(), records: BTreeMap::new(), snapshots: Vec::new(), pending })
    }

    fn observe(&mut self, s: &SolverState) -> nsul_core::Result<()> {
        let d = s.diagnose();
        self.states.push([d.t, d.sup_u, d.sup_omega, d.energy, d.enstrophy]);
        for m in &self.monitors {
            let r = m.record(s)?;
            self.records.entry(m.name().to_string()).or_default().push(r);
        }
        let half = 0.5 * self.cfg.solver.dt;
        while self.pending.first().is_some_and(|ts| s.t >= ts - half) {
            self.pending.remove(0);
            self.snapshots.push(Snapshot::from_state(s));
        }
        Ok(())
    }

    fn finish(self, energy_residual: Option<f64>) -> Result<RunOutcome> {
        let cfg = self.cfg;
        let mut header: Vec<String> = DIAGNOSTIC_COLUMNS.iter().map(|s| s.to_string()).collect();
        for m in &cfg.monitors {
            for suffix in ["lhs", "rhs", "ratio"] {
                header.push(format!("{m}_{suffix}"));
            }
        }
        let mut table = Table::new(header);
        for (i, d) in self.states.iter().enumerate() {
            let mut row = d.to_vec();
            for m in &cfg.monitors {
                let r = self
                    .records
                    .get(m)
                    .and_then(|v| v.get(i))
                    .with_context(|| format!("monitor {m} has no record for row {i}"))?;
                row.extend([r.lhs, r.rhs_shape, r.ratio]);
            }
            table.rows.push(row);
        }
        let res = resolution(cfg);
        let fits = cfg
            .monitors
            .iter()
            .map(|m| ConstantFit::from_records(m, 1, &res, self.records.get(m).into_iter().flatten()))
            .collect();
        Ok(RunOutcome { table, records: self.records, snapshots: self.snapshots, fits, energy_residual })
    }
}

/// Run the configured experiment in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let initial = cfg.ic.state(&cfg.grid, cfg.u_inf).context("building the initial condition")?;
    let mut col = Collector::new(cfg, &initial)?;
    let every = cfg.output_every;
    match cfg.solver.scheme {
        Scheme::EtdVorticity => {
            let opts = RunOptions { output_every: every, check_invariants: cfg.check_invariants, bumps: Vec::new() };
            let traj = run_vorticity(&initial, &cfg.solver, &opts, |s| col.observe(s))?;
            col.finish(Some(traj.ledger.residual()))
        }
        Scheme::Picard => {
            let sol = picard_local_solve(&initial.u, &cfg.solver, cfg.solver.t_end)?;
            let last = sol.states.len() - 1;
            for (i, (t, u)) in sol.times.iter().zip(&sol.states).enumerate() {
                if i % every == 0 || i == last {
                    col.observe(&SolverState::from_velocity(u.clone(), *t)?)?;
                }
            }
            col.finish(None)
        }
        Scheme::Heat => {
            let steps = step_count(cfg.solver.dt, cfg.solver.t_end)?;
            let mut times = Vec::new();
            for n in 0..=steps {
                if n % every == 0 || n == steps {
                    times.push(n as f64 * cfg.solver.dt);
                }
            }
            let nu = cfg.solver.nu;
            for &t in &times {
                let u = VectorField {
                    grid: cfg.grid,
                    u1: heat_solve(&initial.u.u1, nu, t)?,
                    u2: heat_solve(&initial.u.u2, nu, t)?,
                    u_inf: initial.u.u_inf,
                };
                col.observe(&SolverState::from_velocity(u, t)?)?;
            }
            if cfg.monitors.iter().any(|m| HEAT_MONITORS.contains(&m.as_str())) {
                let opts = HeatUlOptions { weight_radius: cfg.heat_radius, center: None, substeps: cfg.heat_substeps };
                let series = monitor_heat_ul(&[initial.u.u1.clone(), initial.u.u2.clone()], nu, &times, &opts)?;
                col.records.insert("heat_weighted".into(), series.weighted);
                col.records.insert("heat_local".into(), series.local);
            }
            col.finish(None)
        }
    }
}

/// Manifest: the resolved config (rerunnable as is) under a comment block
/// with the code version and fitted constants.
pub fn manifest_text(cfg: &ExperimentConfig, fits: &[ConstantFit], extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    s.push_str("# nsul run manifest\n");
    s.push_str(&format!("# version = {}\n", env!("CARGO_PKG_VERSION")));
    s.push_str(&format!("# resolution = {}\n", resolution(cfg)));
    for (k, v) in extra {
        s.push_str(&format!("# {k} = {v}\n"));
    }
    for f in fits {
        s.push_str(&format!("# fit.{} = {} ({} records, {} members)\n", f.name, format_f64(f.value), f.records, f.members));
    }
    s.push_str(&cfg.to_text());
    s
}

/// Run and write CSV, snapshots and manifest into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let outcome = execute(cfg)?;
    let csv_path = out.join(&cfg.csv);
    fs::write(&csv_path, outcome.table.to_bytes()).with_context(|| format!("writing {}", csv_path.display()))?;
    for (k, snap) in outcome.snapshots.iter().enumerate() {
        let p = out.join(format!("snapshot_{k:03}.nsul"));
        fs::write(&p, snap.to_bytes()?).with_context(|| format!("writing {}", p.display()))?;
    }
    let mut extra = Vec::new();
    if let Some(r) = outcome.energy_residual {
        extra.push(("energy_residual", format_f64(r)));
    }
    let m = out.join(&cfg.manifest);
    fs::write(&m, manifest_text(cfg, &outcome.fits, &extra)).with_context(|| format!("writing {}", m.display()))?;
    Ok(outcome)
}

/// Aggregated ensemble result.
#[derive(Debug, Clone)]
pub struct EnsembleOutcome {
    pub fits: Vec<ConstantFit>,
    pub members: Vec<RunOutcome>,
}

impl EnsembleOutcome {
    pub fn fit(&self, name: &str) -> Option<&ConstantFit> {
        self.fits.iter().find(|f| f.name == name)
    }

    /// `monitor,value,members,records,resolution` rows.
    pub fn report_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(["monitor", "value", "members", "records", "resolution"]).expect("memory");
        for f in &self.fits {
            w.write_record([
                f.name.clone(),
                format_f64(f.value),
                f.members.to_string(),
                f.records.to_string(),
                f.resolution.clone(),
            ])
            .expect("memory");
        }
        w.into_inner().expect("memory")
    }
}

/// Config of ensemble member `i`: random band-limited data with seed `seed + i`.
pub fn member_config(cfg: &ExperimentConfig, seed: u64, i: usize) -> Result<ExperimentConfig> {
    let c = cfg.with("ic.family", "random_bandlimited")?;
    Ok(c.with("ic.seed", &seed.wrapping_add(i as u64).to_string())?)
}

/// Run `count` members in parallel and fit every monitor over all of them.
pub fn ensemble_in_memory(cfg: &ExperimentConfig, count: usize, seed: u64) -> Result<EnsembleOutcome> {
    if count == 0 {
        bail!("ensemble count must be at least 1");
    }
    let members: Vec<RunOutcome> = (0..count)
        .into_par_iter()
        .map(|i| {
            let c = member_config(cfg, seed, i)?;
            execute(&c).with_context(|| format!("ensemble member {i} (seed {})", seed.wrapping_add(i as u64)))
        })
        .collect::<Result<_>>()?;
    let res = resolution(cfg);
    let fits = cfg
        .monitors
        .iter()
        .map(|m| ConstantFit::from_records(m, count, &res, members.iter().flat_map(|o| o.records.get(m).into_iter().flatten())))
        .collect();
    Ok(EnsembleOutcome { fits, members })
}

/// Ensemble with member CSVs under `out/members` and the fit report in `out/fits.csv`.
pub fn ensemble(cfg: &ExperimentConfig, count: usize, seed: u64, out: &Path) -> Result<EnsembleOutcome> {
    let outcome = ensemble_in_memory(cfg, count, seed)?;
    let dir = out.join("members");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, m) in outcome.members.iter().enumerate() {
        fs::write(dir.join(format!("member_{i:04}.csv")), m.table.to_bytes())?;
    }
    fs::write(out.join("fits.csv"), outcome.report_bytes())?;
    let extra = [("ensemble.count", count.to_string()), ("ensemble.seed", seed.to_string())];
    fs::write(out.join(&cfg.manifest), manifest_text(cfg, &outcome.fits, &extra))?;
    Ok(outcome)
}
