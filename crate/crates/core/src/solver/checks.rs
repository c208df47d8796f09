use std::collections::HashMap;

use super::scheme::{cross_terms, rate, stencil, Offset};
use super::{GridSpec, Problem, Run, SchemeConfig};
use crate::error::{config, Result};
use crate::mbs::{lipschitz_bound, RegularityData};
use crate::report::{CheckReport, SampleRecord};
use crate::sampling::{par_samples, uniform, uniform_box};

/// Tolerance for ordering and monotonicity at the discrete level.
const ORDER_TOL: f64 = 1e-12;

/// `max (a − b)⁺` over recorded times and nodes of two runs with the same
/// grid and scheme. Passes iff it is at most 1e-12.
pub fn discrete_comparison(a: &Run, b: &Run) -> Result<CheckReport> {
    if a.grid != b.grid {
        return Err(config("runs use different grids"));
    }
    if a.config != b.config || a.problem != b.problem {
        return Err(config("runs use different schemes or problems"));
    }
    if a.fields.len() != b.fields.len() || a.fields.iter().zip(&b.fields).any(|(fa, fb)| fa.t != fb.t) {
        return Err(config("runs record different times"));
    }
    let mut report = CheckReport::new("discrete_comparison", 0);
    for (fa, fb) in a.fields.iter().zip(&b.fields) {
        let (k, gap) = fa
            .values
            .iter()
            .zip(&fb.values)
            .map(|(x, y)| (x - y).max(0.0))
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
        let rec = SampleRecord::new()
            .with_scalar("t", fa.t)
            .with("x", fa.grid.coords(k).as_slice().to_vec())
            .with_scalar("a", fa.values[k])
            .with_scalar("b", fb.values[k]);
        report.record(gap, rec);
    }
    let mut report = report.finish();
    report.pass = report.max_violation <= ORDER_TOL;
    Ok(report)
}

/// Largest adjacent difference quotient along any axis.
fn max_quotient(grid: &GridSpec, values: &[f64]) -> (f64, usize) {
    let strides = grid.strides();
    let dx = grid.dx();
    let mut best = (0.0, 0);
    for i in 0..values.len() {
        let idx = grid.multi_index(i);
        for k in 0..grid.dim() {
            if idx[k] + 1 < grid.nodes[k] {
                let q = (values[i + strides[k]] - values[i]).abs() / dx[k];
                if q > best.0 {
                    best = (q, i);
                }
            }
        }
    }
    best
}

/// Difference quotients of every recorded field against the regularity
/// bound plus a slack of `2·dx·bound`. For runs in `U` the `u`-scale bound is
/// raised by `sup|∇h|`, since `U = u − h − ξ`.
pub fn lipschitz_audit(run: &Run, rd: &RegularityData) -> CheckReport {
    let mut report = CheckReport::new("lipschitz_audit", 0);
    let dx = run.grid.max_dx();
    let shift = if run.variable == "U" { rd.sup_grad_h } else { 0.0 };
    for f in &run.fields {
        let (q, i) = max_quotient(&f.grid, &f.values);
        let bound = lipschitz_bound(rd, f.t).1 + shift;
        let rec = SampleRecord::new()
            .with_scalar("t", f.t)
            .with("x", f.grid.coords(i).as_slice().to_vec())
            .with_scalar("quotient", q)
            .with_scalar("bound", bound);
        report.record(q - bound * (1.0 + 2.0 * dx), rec);
    }
    report.note(format!("C = {}, M = {}", rd.c, rd.big_m));
    let mut report = report.finish();
    report.pass = report.max_violation <= 0.0;
    report
}

/// Random local configurations with central gradients inside the sampled box:
/// raising any stencil value by 1e-6 must not lower the updated center value
/// (tolerance 1e-12).
pub fn monotonicity_probe<P: Problem + ?Sized>(
    problem: &P,
    grid: &GridSpec,
    cfg: &SchemeConfig,
    n_samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    super::cfl_limit(problem, grid, &cfg.lf_dissipation, cfg.lip_u)?;
    let n = grid.dim();
    let dx = grid.dx();
    let cross = cross_terms(problem);
    let offsets = stencil(n, &cross);
    let (lo, hi) = problem.state_range();
    let pb = cfg.p_box;
    let t_max = cfg.t_end().max(cfg.dt);
    let delta = 1e-6;
    let dmin = dx.iter().copied().fold(f64::INFINITY, f64::min);
    let items = par_samples(n_samples, seed, |_, rng| {
        let x = uniform_box(rng, &grid.x_box);
        let t = uniform(rng, 0.0, t_max).min(problem.horizon() * (1.0 - 1e-12));
        let c = uniform(rng, lo, hi);
        let slope: Vec<f64> = (0..n).map(|_| uniform(rng, -0.5 * pb, 0.5 * pb)).collect();
        let mut vals: HashMap<Offset, f64> = HashMap::new();
        for o in &offsets {
            let lin: f64 = (0..n).map(|k| o[k] as f64 * slope[k] * dx[k]).sum();
            let noise = if *o == [0; 3] { 0.0 } else { uniform(rng, -0.25 * pb * dmin, 0.25 * pb * dmin) };
            vals.insert(*o, c + lin + noise);
        }
        let update = |bump: Option<Offset>| {
            let get = |o: Offset| vals[&o] + if Some(o) == bump { delta } else { 0.0 };
            let center = get([0; 3]);
            center + cfg.dt * rate(problem, &x, t, &dx, &cfg.lf_dissipation, &cross, get).0
        };
        let base = update(None);
        let mut worst = f64::NEG_INFINITY;
        let mut worst_o = [0; 3];
        for o in &offsets {
            let drop = base - update(Some(*o));
            if drop > worst {
                worst = drop;
                worst_o = *o;
            }
        }
        let rec = SampleRecord::new()
            .with("x", x.as_slice().to_vec())
            .with_scalar("t", t)
            .with_scalar("u", c)
            .with("slope", slope)
            .with("offset", worst_o[..n].iter().map(|&v| v as f64).collect());
        (worst, rec)
    });
    let mut report = CheckReport::from_samples("monotonicity_probe", seed, items);
    report.pass = report.max_violation <= ORDER_TOL;
    Ok(report)
}
