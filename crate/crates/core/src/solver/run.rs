use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::scheme::{advance, cross_terms, Layout};
use super::{resolve, Dm1Problem, GridField, GridSpec, Problem, SchemeConfig, SchemeOptions};
use crate::error::{config, Result};
use crate::mbs::MbsModel;

/// Barrier check of one recorded field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichRecord {
    pub t: f64,
    pub lower: f64,
    pub upper: f64,
    pub tol: f64,
    pub min: f64,
    pub max: f64,
    /// `max(k̲ − tol − min U, max U − k̄ − tol)`; nonpositive when the field
    /// lies between the barriers.
    pub violation: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RunFlags {
    /// Some central gradient left the box the coefficients were sampled on.
    pub gradient_exceeded: bool,
    /// A positivity clamp inside `N` was active at some node.
    pub guard_engaged: bool,
    /// The boundary influence estimate is wider than the padding.
    pub margin_exhausted: bool,
    pub sandwich_violated: bool,
}

#[derive(Debug, Clone)]
pub struct Run {
    pub problem: String,
    pub variable: String,
    pub grid: Arc<GridSpec>,
    pub config: SchemeConfig,
    pub fields: Vec<GridField>,
    pub sandwich: Vec<SandwichRecord>,
    pub flags: RunFlags,
    pub max_gradient: f64,
    /// Per-axis distance the boundary can influence by the final time.
    pub reach: Vec<f64>,
    pub notes: Vec<String>,
}

impl Run {
    pub fn last(&self) -> &GridField {
        self.fields.last().expect("a run records at least the initial field")
    }

    /// Nodes whose distance to every face is at least `max(reach, padding·dx)`
    /// on that axis; the boundary cannot influence them within the run.
    pub fn audited_nodes(&self) -> Vec<usize> {
        let g = &self.grid;
        let dx = g.dx();
        (0..g.len())
            .filter(|&i| {
                let x = g.coords(i);
                (0..g.dim()).all(|k| {
                    let gap = self.reach[k].max(g.padding as f64 * dx[k]);
                    x[k] - g.x_box[k].0 >= gap - 1e-12 && g.x_box[k].1 - x[k] >= gap - 1e-12
                })
            })
            .collect()
    }
}

pub fn initial_values<P: Problem + ?Sized>(problem: &P, grid: &GridSpec) -> Vec<f64> {
    (0..grid.len()).map(|i| problem.initial(&grid.coords(i))).collect()
}

/// Advance `initial` through `cfg.n_steps` steps, recording the initial field,
/// every `record_every`-th field and the last one. Problems with barriers get
/// every recorded field checked against `[k̲ − tol, k̄ + tol]` with
/// `tol = 2·dx·(1 + K₀)`; a violation is flagged, not fatal.
pub fn run_problem<P: Problem + ?Sized>(
    problem: &P,
    grid: &GridSpec,
    cfg: &SchemeConfig,
    initial: Vec<f64>,
) -> Result<Run> {
    grid.validate()?;
    if initial.len() != grid.len() {
        return Err(config(format!("initial data has {} values for {} nodes", initial.len(), grid.len())));
    }
    super::cfl_limit(problem, grid, &cfg.lf_dissipation, cfg.lip_u)?;
    let grid = Arc::new(grid.clone());
    let layout = Layout::new(&grid);
    let cross = cross_terms(problem);
    let mut flags = RunFlags::default();
    let mut max_gradient = 0.0_f64;
    let mut fields = vec![GridField::new(grid.clone(), 0.0, initial)?];
    let mut values = fields[0].values.clone();
    for k in 0..cfg.n_steps {
        let t = k as f64 * cfg.dt;
        let (next, stats) = advance(problem, &layout, cfg, &cross, &values, t);
        values = next;
        max_gradient = max_gradient.max(stats.max_gradient);
        flags.guard_engaged |= stats.guard;
        if (k + 1) % cfg.record_every == 0 || k + 1 == cfg.n_steps {
            fields.push(GridField::new(grid.clone(), (k + 1) as f64 * cfg.dt, values.clone())?);
        }
    }
    let mut notes = Vec::new();
    if max_gradient > cfg.p_box {
        flags.gradient_exceeded = true;
        notes.push(format!(
            "central gradients reached {max_gradient:.4e}, beyond the sampled box {:.4e}",
            cfg.p_box
        ));
    }
    if flags.guard_engaged {
        notes.push("positivity clamp engaged".to_string());
    }
    // domain of dependence: 4√(aᵢᵢt) for diffusion plus (sup|μ| + θᵢ)t
    let a = problem.diffusion();
    let te = cfg.t_end();
    let dx = grid.dx();
    let mut reaches = Vec::with_capacity(grid.dim());
    for i in 0..grid.dim() {
        let reach = 4.0 * (a[(i, i)] * te).sqrt() + (problem.drift_sup() + cfg.lf_dissipation[i]) * te;
        reaches.push(reach);
        let margin = grid.padding as f64 * dx[i];
        if reach > margin {
            flags.margin_exhausted = true;
            notes.push(format!("axis {i}: boundary influence {reach:.4e} exceeds padding {margin:.4e}"));
        }
    }

    let mut sandwich = Vec::new();
    if let Some(bp) = problem.barriers() {
        let tol = 2.0 * grid.max_dx() * (1.0 + bp.k0);
        for f in &fields {
            let min = f.values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let (lower, upper) = (bp.lower(f.t), bp.upper(f.t));
            let violation = (lower - tol - min).max(max - upper - tol);
            let ok = violation <= 0.0;
            flags.sandwich_violated |= !ok;
            sandwich.push(SandwichRecord { t: f.t, lower, upper, tol, min, max, violation, ok });
        }
        if flags.sandwich_violated {
            notes.push("some recorded field leaves the barrier sandwich".to_string());
        }
    }
    Ok(Run {
        problem: problem.name().to_string(),
        variable: problem.variable().to_string(),
        grid,
        config: cfg.clone(),
        fields,
        sandwich,
        flags,
        max_gradient,
        reach: reaches,
        notes,
    })
}

/// Solve the pricing equation in `U` from `U₀`. Requires positivity of
/// `U + h + ξ` along the lower barrier.
pub fn solve(m: &MbsModel, grid: &GridSpec, opts: &SchemeOptions) -> Result<Run> {
    let problem = Dm1Problem::new(m)?;
    let cfg = resolve(&problem, grid, opts)?;
    run_problem(&problem, grid, &cfg, initial_values(&problem, grid))
}
