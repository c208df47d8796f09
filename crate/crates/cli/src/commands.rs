use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde_json::{json, Value};
use visc_core::hamiltonian::{
    check_degenerate_ellipticity, check_gradient_modulus, check_osgood_structure_cp7, check_structure_cp6,
};
use visc_core::mbs::{
    barrier_residuals, compute_barriers, dm2_structure_constants, transformed_problem, validate_model, MbsModel,
};
use visc_core::osgood::{classify, default_eps, divergence_score, ode_flow, scores_csv, trajectory_csv, GammaKind, OsgoodFunction};
use visc_core::sampling::{stream_rng, uniform};
use visc_core::solver::{
    fields_csv, mc_oracle, refinement_csv, refinement_study, solve as solve_model, GridField, GridSpec, SchemeOptions,
};
use visc_core::transform::{GaugeFunction, Transformation};
use visc_core::{CheckReport, Error, Result};

use crate::artifacts::{read_input, Artifacts};
use crate::Common;

fn load_model(path: &Path) -> Result<(MbsModel, Value)> {
    let (text, digest) = read_input(path)?;
    Ok((MbsModel::from_json(&text)?, digest))
}

fn load_grid(path: &Path) -> Result<(GridSpec, Value)> {
    let (text, digest) = read_input(path)?;
    Ok((GridSpec::from_json(&text)?, digest))
}

fn load_scheme(path: Option<&Path>) -> Result<(SchemeOptions, Value)> {
    match path {
        Some(p) => {
            let (text, digest) = read_input(p)?;
            Ok((SchemeOptions::from_json(&text)?, digest))
        }
        None => Ok((SchemeOptions::default(), Value::Null)),
    }
}

fn status(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

pub fn solve(model: &Path, grid: &Path, scheme: Option<&Path>, common: &Common) -> Result<bool> {
    let (m, model_digest) = load_model(model)?;
    let (g, grid_digest) = load_grid(grid)?;
    let (opts, scheme_digest) = load_scheme(scheme)?;
    let config = json!({ "model": model_digest, "grid": grid_digest, "scheme": scheme_digest });
    let mut out = Artifacts::new(&common.out, "solve", config, common.seed)?;
    let run = solve_model(&m, &g, &opts)?;
    out.csv("solution.csv", &fields_csv(&run.fields, &run.variable))?;
    let pass = !run.flags.sandwich_violated;
    out.json(
        "run.json",
        &json!({
            "problem": run.problem,
            "variable": run.variable,
            "grid": *run.grid,
            "scheme": run.config,
            "flags": run.flags,
            "sandwich": run.sandwich,
            "max_gradient": run.max_gradient,
            "reach": run.reach,
            "notes": run.notes,
            "pass": pass,
        }),
    )?;
    println!(
        "{} solve: {} steps of {:.3e} on {}, sandwich {}",
        status(pass),
        run.config.n_steps,
        run.config.dt,
        run.grid.label(),
        if pass { "holds" } else { "violated" }
    );
    for note in &run.notes {
        println!("  note: {note}");
    }
    out.finish(pass)
}

pub fn check_conditions(model: &Path, samples: usize, radius: f64, common: &Common) -> Result<bool> {
    let (m, digest) = load_model(model)?;
    let config = json!({ "model": digest, "samples": samples, "radius": radius });
    let mut out = Artifacts::new(&common.out, "check-conditions", config, common.seed)?;
    let seed = common.seed;
    let mut reports: Vec<CheckReport> = vec![validate_model(&m, samples, seed)];
    let mut errors: Vec<String> = Vec::new();
    match barrier_residuals(&m, samples, seed.wrapping_add(1)) {
        Ok(r) => reports.push(r),
        Err(e) => errors.push(format!("barrier_residuals: {e}")),
    }
    let structure = transformed_problem(&m).and_then(|tp| Ok((tp, dm2_structure_constants(&m, radius)?)));
    match structure {
        Ok((tp, k)) => {
            let h = &tp.hamiltonian;
            let checks: [(&str, Result<CheckReport>); 4] = [
                ("ellipticity", check_degenerate_ellipticity(h, samples, seed.wrapping_add(2))),
                ("gradient_modulus", check_gradient_modulus(h, radius, samples, seed.wrapping_add(3))),
                ("cp6", check_structure_cp6(h, radius, (k.nu2, k.nu2r), samples, seed.wrapping_add(4))),
                (
                    "cp7",
                    check_osgood_structure_cp7(h, &k.gauge, &k.gamma, k.nu_hat, radius, samples, seed.wrapping_add(5)),
                ),
            ];
            for (name, r) in checks {
                match r {
                    Ok(r) => reports.push(r),
                    Err(e) => errors.push(format!("{name}: {e}")),
                }
            }
        }
        Err(e) => errors.push(format!("reformulation: {e}")),
    }
    let pass = errors.is_empty() && reports.iter().all(|r| r.pass);
    for r in &reports {
        println!("{} {}: max violation {:.3e}", status(r.pass), r.check, r.max_violation);
    }
    for e in &errors {
        println!("FAIL {e}");
    }
    out.json("conditions.json", &json!({ "reports": reports, "errors": errors, "pass": pass }))?;
    out.finish(pass)
}

pub fn barriers(model: &Path, points: usize, common: &Common) -> Result<bool> {
    let (m, digest) = load_model(model)?;
    let config = json!({ "model": digest, "points": points });
    let mut out = Artifacts::new(&common.out, "barriers", config, common.seed)?;
    let bp = compute_barriers(&m)?;
    out.csv("barriers.csv", &bp.table_csv(points.max(1)))?;
    let pass = bp.xi_condition();
    out.json(
        "barriers.json",
        &json!({
            "inf_u0": bp.inf_u0,
            "c0": bp.c0,
            "K0": bp.k0,
            "m0": bp.m0,
            "M0": bp.big_m0,
            "xi_condition": pass,
        }),
    )?;
    println!(
        "{} barriers: c0 = {:.6e}, K0 = {:.6e}, m0 = {:.6e}, M0 = {:.6e}",
        status(pass),
        bp.c0,
        bp.k0,
        bp.m0,
        bp.big_m0
    );
    out.finish(pass)
}

pub fn osgood_demo(gamma: &str, f0: f64, dt: f64, t_flow: f64, common: &Common) -> Result<bool> {
    let g = OsgoodFunction::parse(gamma)?;
    let config = json!({ "gamma": gamma, "f0": f0, "dt": dt, "T": t_flow });
    let mut out = Artifacts::new(&common.out, "osgood-demo", config, common.seed)?;
    let flow = ode_flow(&g, f0, t_flow, dt)?;
    let zero = ode_flow(&g, 0.0, t_flow, dt)?;
    let zero_ok = zero.values.iter().all(|v| *v == 0.0);
    let eps = default_eps();
    let scores = divergence_score(&g, &eps)?;
    let class = classify(&scores);
    let t_last = *flow.times.last().expect("flow has a first point");
    let f_last = *flow.values.last().expect("flow has a first point");
    // f' = −f log f has the solution f0^(e^{−t}) while it stays below 1/e
    let closed = match g.kind {
        GammaKind::Xlog if f0 > 0.0 => {
            let exact = f0.powf((-t_last).exp());
            Some((exact, (f_last - exact).abs() / exact))
        }
        _ => None,
    };
    let pass = zero_ok && closed.is_none_or(|(_, rel)| rel <= 0.01);
    out.csv("flow.csv", &trajectory_csv(&flow))?;
    out.csv("scores.csv", &scores_csv(&eps, &scores))?;
    out.json(
        "osgood.json",
        &json!({
            "gamma": g.label(),
            "tag": g.tag,
            "classification": class,
            "final_time": t_last,
            "final_value": f_last,
            "saturated": flow.saturated,
            "closed_form": closed.map(|c| c.0),
            "closed_form_rel_error": closed.map(|c| c.1),
            "zero_flow_exact": zero_ok,
            "pass": pass,
        }),
    )?;
    println!("{} osgood-demo: {} classified {:?}, f({t_last}) = {f_last:.6e}", status(pass), g.label(), class);
    out.finish(pass)
}

pub fn convergence(model: &Path, grids: &[PathBuf], scheme: Option<&Path>, common: &Common) -> Result<bool> {
    let (m, digest) = load_model(model)?;
    let loaded = grids.iter().map(|p| load_grid(p)).collect::<Result<Vec<_>>>()?;
    let (opts, scheme_digest) = load_scheme(scheme)?;
    let grid_digests: Vec<Value> = loaded.iter().map(|(_, d)| d.clone()).collect();
    let config = json!({ "model": digest, "grids": grid_digests, "scheme": scheme_digest });
    let mut out = Artifacts::new(&common.out, "convergence", config, common.seed)?;
    let specs: Vec<GridSpec> = loaded.into_iter().map(|(g, _)| g).collect();
    let rows = refinement_study(&m, &specs, &opts)?;
    out.csv("convergence.csv", &refinement_csv(&rows))?;
    out.json("convergence.json", &json!({ "rows": rows }))?;
    for r in &rows {
        let mut line = format!("{:>12}  dx {:.4e}", r.grid, r.dx);
        if let Some(d) = r.diff {
            let _ = write!(line, "  diff {d:.4e}");
        }
        if let Some(o) = r.order {
            let _ = write!(line, "  order {o:.3}");
        }
        println!("{line}");
    }
    out.finish(true)
}

/// Multilinear interpolation of a field at `x`, which must lie in the box.
fn interpolate(field: &GridField, x: &DVector<f64>) -> Result<f64> {
    let g = &field.grid;
    let n = g.dim();
    if x.len() != n {
        return Err(Error::Config(format!("point has {} coordinates, grid has {n}", x.len())));
    }
    let dx = g.dx();
    let strides = g.strides();
    let mut base = 0;
    let mut frac = vec![0.0; n];
    for k in 0..n {
        let (lo, hi) = g.x_box[k];
        if !(lo..=hi).contains(&x[k]) {
            return Err(Error::Config(format!("coordinate {k} = {} is outside [{lo}, {hi}]", x[k])));
        }
        let s = ((x[k] - lo) / dx[k]).min((g.nodes[k] - 1) as f64);
        let i = (s.floor() as usize).min(g.nodes[k] - 2);
        frac[k] = s - i as f64;
        base += i * strides[k];
    }
    let mut acc = 0.0;
    for corner in 0..(1usize << n) {
        let mut w = 1.0;
        let mut idx = base;
        for k in 0..n {
            if corner >> k & 1 == 1 {
                w *= frac[k];
                idx += strides[k];
            } else {
                w *= 1.0 - frac[k];
            }
        }
        if w != 0.0 {
            acc += w * field.values[idx];
        }
    }
    Ok(acc)
}

fn parse_point(text: &str) -> Result<DVector<f64>> {
    let coords = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::Config(format!("point `{text}`: {e}"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(coords))
}

pub fn oracle_compare(
    model: &Path,
    point: &str,
    t: f64,
    paths: usize,
    steps: usize,
    grid: Option<&Path>,
    common: &Common,
) -> Result<bool> {
    let (m, digest) = load_model(model)?;
    let x = parse_point(point)?;
    let (g, grid_digest) = match grid {
        Some(p) => load_grid(p)?,
        None => {
            let nodes = [401, 101, 41][m.n.clamp(1, 3) - 1];
            (GridSpec::uniform(m.domain_box(), nodes)?, Value::Null)
        }
    };
    let config = json!({
        "model": digest,
        "grid": grid_digest,
        "point": x.as_slice(),
        "t": t,
        "paths": paths,
        "steps": steps,
    });
    let mut out = Artifacts::new(&common.out, "oracle-compare", config, common.seed)?;
    let run = solve_model(&m, &g, &SchemeOptions::until(t))?;
    let solver = interpolate(run.last(), &x)?;
    let (mc, stderr) = mc_oracle(&m, &x, t, paths, steps, common.seed)?;
    let gap = (solver - mc).abs();
    let pass = gap <= 3.0 * stderr;
    out.json(
        "oracle.json",
        &json!({
            "point": x.as_slice(),
            "t": t,
            "solver": solver,
            "mc": mc,
            "stderr": stderr,
            "gap": gap,
            "grid": g.label(),
            "pass": pass,
        }),
    )?;
    println!("{} oracle-compare: solver {solver:.8e}, mc {mc:.8e} ± {stderr:.2e}, gap/stderr {:.3}", status(pass), gap / stderr);
    out.finish(pass)
}

pub fn transform_roundtrip(gauge: &str, a: f64, b: f64, eps0: f64, samples: usize, common: &Common) -> Result<bool> {
    let lo = a - 0.5 * eps0;
    let hi = b + 0.5 * eps0;
    let tr = Transformation::new(GaugeFunction::parse(gauge, lo, hi)?, lo, hi)?;
    let config = json!({ "gauge": gauge, "a": a, "b": b, "eps0": eps0, "samples": samples });
    let mut out = Artifacts::new(&common.out, "transform-roundtrip", config, common.seed)?;
    let big_lambda = (0..=10_000).map(|i| tr.gauge.z(lo + (hi - lo) * i as f64 / 10_000.0)).fold(0.0, f64::max);
    let mut rng = stream_rng(common.seed, 0);
    let mut us: Vec<f64> = (0..samples).map(|_| uniform(&mut rng, lo, hi)).collect();
    us.sort_by(f64::total_cmp);
    let mut csv = String::from("u,v,u_back,error,deriv_error\n");
    let (mut round, mut deriv) = (0.0_f64, 0.0_f64);
    let mut monotone = true;
    let mut prev: Option<(f64, f64)> = None;
    for &u in &us {
        let v = tr.psi(u)?;
        let back = tr.psi_inverse(v)?;
        let (d1, _) = tr.inverse_derivatives(v)?;
        let e = (back - u).abs();
        let de = (d1 * d1 - tr.gauge.z(back)).abs();
        round = round.max(e);
        deriv = deriv.max(de);
        if let Some((pu, pb)) = prev {
            if u > pu && back <= pb {
                monotone = false;
            }
        }
        prev = Some((u, back));
        let _ = writeln!(csv, "{u:.16e},{v:.16e},{back:.16e},{e:.16e},{de:.16e}");
    }
    let deriv_tol = 1e-8 * (1.0 + big_lambda);
    let pass = round <= 1e-10 && deriv <= deriv_tol && monotone;
    out.csv("roundtrip.csv", &csv)?;
    out.json(
        "roundtrip.json",
        &json!({
            "range": [tr.range().0, tr.range().1],
            "max_roundtrip_error": round,
            "max_derivative_error": deriv,
            "derivative_tolerance": deriv_tol,
            "monotone": monotone,
            "pass": pass,
        }),
    )?;
    println!(
        "{} transform-roundtrip: max |I(Psi(u)) - u| = {round:.3e}, derivative identity {deriv:.3e}",
        status(pass)
    );
    out.finish(pass)
}
