use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{initial_values, resolve, run_problem, Dm1Problem, Dm2Problem, GaugedProblem, GridSpec, Problem, SchemeOptions};
use crate::error::{config, Result};
use crate::mbs::MbsModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementRow {
    pub grid: String,
    pub dx: f64,
    /// Sup-norm difference to the previous (coarser) solution.
    pub diff: Option<f64>,
    /// `log₂` of the ratio of successive differences.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub grid: String,
    pub dx: f64,
    /// `sup |u − 𝓘(v)|` at the final time.
    pub gap: f64,
}

fn study_options(opts: &SchemeOptions, horizon: f64) -> SchemeOptions {
    let mut o = opts.clone();
    o.t_end = Some(opts.t_end.unwrap_or(0.5 * horizon));
    o.record_every = None;
    o.dt = None;
    o
}

fn final_values<P: Problem + ?Sized>(problem: &P, grid: &GridSpec, opts: &SchemeOptions) -> Result<Vec<f64>> {
    let mut cfg = resolve(problem, grid, opts)?;
    cfg.record_every = cfg.n_steps.max(1);
    let run = run_problem(problem, grid, &cfg, initial_values(problem, grid))?;
    Ok(run.last().values.clone())
}

/// Successive sup-norm differences at the coarse nodes for grids that each
/// refine the previous one by 2 on the same box. All runs stop at `t_end`
/// (default `T/2`) with their own stable time step.
pub fn refinement_study_with<P: Problem + ?Sized>(
    problem: &P,
    grids: &[GridSpec],
    opts: &SchemeOptions,
) -> Result<Vec<RefinementRow>> {
    if grids.len() < 3 {
        return Err(config(format!("a refinement study needs at least 3 grids, got {}", grids.len())));
    }
    for w in grids.windows(2) {
        if !w[0].is_refined_by(&w[1]) {
            return Err(config(format!("grid {} is not a 2x refinement of {}", w[1].label(), w[0].label())));
        }
    }
    let opts = study_options(opts, problem.horizon());
    let mut rows: Vec<RefinementRow> = Vec::new();
    let mut prev: Option<(GridSpec, Vec<f64>)> = None;
    for g in grids {
        let vals = final_values(problem, g, &opts)?;
        let diff = prev.as_ref().map(|(pg, pv)| {
            let fine_strides = g.strides();
            (0..pg.len())
                .map(|i| {
                    let j: usize = pg.multi_index(i).iter().zip(&fine_strides).map(|(k, s)| 2 * k * s).sum();
                    (pv[i] - vals[j]).abs()
                })
                .fold(0.0, f64::max)
        });
        let order = match (rows.last().and_then(|r| r.diff), diff) {
            (Some(d0), Some(d1)) if d0 > 0.0 && d1 > 0.0 => Some((d0 / d1).log2()),
            _ => None,
        };
        rows.push(RefinementRow { grid: g.label(), dx: g.max_dx(), diff, order });
        prev = Some((g.clone(), vals));
    }
    Ok(rows)
}

/// [`refinement_study_with`] for the pricing equation in `U`.
pub fn refinement_study(m: &MbsModel, grids: &[GridSpec], opts: &SchemeOptions) -> Result<Vec<RefinementRow>> {
    refinement_study_with(&Dm1Problem::new(m)?, grids, opts)
}

/// CSV with columns `grid,dx,diff,order`; missing entries are empty.
pub fn refinement_csv(rows: &[RefinementRow]) -> String {
    let mut out = String::from("grid,dx,diff,order\n");
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.16e}")).unwrap_or_default();
    for r in rows {
        let _ = writeln!(out, "{},{:.16e},{},{}", r.grid, r.dx, opt(r.diff), opt(r.order));
    }
    out
}

/// Solve the reformulated equation in `u` and its affine-gauge form in `v`
/// on each grid, and compare `u` with `𝓘(v)` at `t_end` (default `T/2`).
pub fn change_of_variable_study(m: &MbsModel, grids: &[GridSpec], opts: &SchemeOptions) -> Result<Vec<GapRow>> {
    let pu = Dm2Problem::new(m)?;
    let pv = GaugedProblem::affine(m)?;
    let opts = study_options(opts, m.big_t);
    grids
        .iter()
        .map(|g| {
            let u = final_values(&pu, g, &opts)?;
            let v = final_values(&pv, g, &opts)?;
            let gap = u.iter().zip(&v).map(|(a, b)| (a - pv.to_u(*b)).abs()).fold(0.0, f64::max);
            Ok(GapRow { grid: g.label(), dx: g.max_dx(), gap })
        })
        .collect()
}
