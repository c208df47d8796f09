//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any criterion fails.

use std::f64::consts::LN_10;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use visc_core::hamiltonian::{
    check_degenerate_ellipticity, check_gradient_modulus, check_osgood_structure_cp7, check_structure_cp6,
    local_gauge, HamiltonianSpec,
};
use visc_core::mbs::forms::{DriftForm, SpatialForm, TimeForm, VolForm};
use visc_core::mbs::{
    barrier_residuals, compute_barriers, dm2_structure_constants, growth_constant, lower_barrier,
    regularity_constant, transformed_problem, upper_barrier, MbsModel, RegularityBounds,
};
use visc_core::osgood::{divergence_score, ode_flow, OsgoodFunction};
use visc_core::solver::{
    change_of_variable_study, discrete_comparison, initial_values, lipschitz_audit, mc_oracle, resolve,
    run_problem, solve, Dm1Problem, GridSpec, Run, SchemeOptions,
};
use visc_core::transform::{GaugeFunction, GaugeKind};
use visc_core::{CheckReport, ModulusFamily, Result};

type Outcome = Result<(bool, String)>;

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn flat(h0: f64, r0: f64, tau: f64, u0: f64) -> MbsModel {
    let mut m = MbsModel::zero(1);
    m.h = SpatialForm::Constant { value: h0 };
    m.r = TimeForm::Constant { value: r0 };
    m.tau = tau;
    m.u0 = SpatialForm::Constant { value: u0 };
    m
}

fn barrier_correctness() -> Outcome {
    // (model, k̲(t), c₀, K₀) from the ODE k' = −r₀k + (τ − r₀)h₀
    let (h0, tau, u0) = (0.7, 1.3, 0.2);
    let a = flat(h0, 0.0, tau, u0);
    let lower_a = move |t: f64| u0 + tau * h0 * t;
    let c0_a = lower_a(1.0).max(u0);
    let k0_a = tau * h0;

    let (h0, r0, tau, u0) = (0.4, 0.25, 0.6, 0.3);
    let b = flat(h0, r0, tau, u0);
    let lower_b = move |t: f64| (-r0 * t).exp() * u0 + (tau - r0) * h0 * (1.0 - (-r0 * t).exp()) / r0;
    let c0_b = lower_b(1.0).max(u0);
    let k0_b = ((tau - r0) * h0 - c0_b * r0).max(0.0);

    type Case<'a> = (&'a MbsModel, &'a dyn Fn(f64) -> f64, f64, f64);
    let cases: [Case; 2] =
        [(&a, &lower_a, c0_a, k0_a), (&b, &lower_b, c0_b, k0_b)];
    let mut worst = 0.0_f64;
    for (m, lower, c0, k0) in cases {
        for i in 0..1000 {
            let t = m.big_t * i as f64 / 1000.0;
            worst = worst.max((lower_barrier(m, t)? - lower(t)).abs());
            worst = worst.max((upper_barrier(m, t)? - (k0 * t + c0)).abs());
        }
    }
    let mut residual = f64::NEG_INFINITY;
    let mut ok = worst <= 1e-8;
    for m in [&a, &b, &MbsModel::desk()] {
        let rep = barrier_residuals(m, 10_000, 1)?;
        ok &= rep.pass;
        residual = residual.max(rep.max_violation);
    }
    Ok((ok, format!("closed-form error {worst:.2e}, worst residual {residual:.2e}")))
}

fn degenerate_2d() -> MbsModel {
    let mut m = MbsModel::zero(2);
    m.d = 1;
    m.sigma = VolForm::Constant { matrix: vec![vec![0.8], vec![0.0]] };
    m.mu = DriftForm::Sine { amplitude: vec![0.1, 0.1], frequency: vec![1.0, 1.0] };
    m.r = TimeForm::Constant { value: 0.03 };
    m.h = SpatialForm::Gaussian { amplitude: 0.3, center: vec![0.0, 0.0], width: 1.0 };
    m.tau = 0.06;
    m.rho = 0.5;
    m.u0 = SpatialForm::Cosine { offset: 0.0, amplitude: 0.2, wavevector: vec![0.0, 1.0] };
    m.x_box = Some(vec![(-3.0, 3.0), (-3.0, 3.0)]);
    m
}

/// Runs of two initial data under one scheme: the nonlinearity and bounds of
/// the lower model, widened to cover the upper one.
fn ordered_pair(lo: &MbsModel, hi_u0: SpatialForm, nodes: usize) -> Result<(Run, Run)> {
    let mut hi = lo.clone();
    hi.u0 = hi_u0;
    let p_hi = Dm1Problem::new(&hi)?;
    let p = Dm1Problem::new(lo)?.with_bounds(p_hi.state_range, p_hi.p_box);
    let grid = GridSpec::uniform(lo.domain_box(), nodes)?;
    let cfg = resolve(&p, &grid, &SchemeOptions::default())?;
    let a = run_problem(&p, &grid, &cfg, initial_values(&Dm1Problem::new(lo)?, &grid))?;
    let b = run_problem(&p, &grid, &cfg, initial_values(&p_hi, &grid))?;
    Ok((a, b))
}

fn discrete_comparison_criterion() -> Outcome {
    let desk = MbsModel::desk();
    let mut decaying = desk.clone();
    decaying.h_decay = 0.5;
    let mut strong = desk.clone();
    strong.rho = 0.9;
    let pairs = [
        ("bump", desk.clone(), SpatialForm::Gaussian { amplitude: 0.3, center: vec![0.5], width: 0.4 }, 201),
        ("constants", {
            let mut m = desk.clone();
            m.u0 = SpatialForm::Constant { value: -0.1 };
            m
        }, SpatialForm::Constant { value: 0.1 }, 201),
        ("cosine", {
            let mut m = decaying;
            m.u0 = SpatialForm::Cosine { offset: 0.0, amplitude: 0.2, wavevector: vec![1.5] };
            m
        }, SpatialForm::Cosine { offset: 0.05, amplitude: 0.2, wavevector: vec![1.5] }, 201),
        ("rational", {
            let mut m = strong;
            m.u0 = SpatialForm::RationalBump { amplitude: -0.2, center: vec![0.0] };
            m
        }, SpatialForm::RationalBump { amplitude: 0.2, center: vec![1.0] }, 201),
        ("degenerate-2d", degenerate_2d(), SpatialForm::Cosine {
            offset: 0.1,
            amplitude: 0.2,
            wavevector: vec![0.0, 1.0],
        }, 101),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, lo, hi_u0, nodes) in pairs {
        let (a, b) = ordered_pair(&lo, hi_u0, nodes)?;
        let rep = discrete_comparison(&a, &b)?;
        ok &= rep.pass;
        parts.push(format!("{name} {:.1e}", rep.max_violation));
    }
    Ok((ok, format!("max (a-b)+ per pair: {}", parts.join(", "))))
}

fn sandwich() -> Outcome {
    let m = MbsModel::desk();
    let grid = GridSpec::uniform(m.domain_box(), 201)?;
    let run = solve(&m, &grid, &SchemeOptions::default())?;
    let worst = run.sandwich.iter().map(|s| s.violation).fold(f64::NEG_INFINITY, f64::max);
    let ok = !run.sandwich.is_empty() && run.sandwich.iter().all(|s| s.ok);
    Ok((ok, format!("{} fields to t={:.4}, worst margin {worst:.3e} (tol {:.3e})", run.sandwich.len(), run.last().t, run.sandwich[0].tol)))
}

fn heat_oracles() -> Outcome {
    let m = MbsModel::heat();
    let grid = GridSpec::uniform(m.domain_box(), 401)?;
    let t = 0.5;
    let run = solve(&m, &grid, &SchemeOptions::until(t))?;
    let last = run.last();
    let decay = (-t).exp();
    let sup_err = run
        .audited_nodes()
        .into_iter()
        .map(|i| (last.values[i] - decay * grid.coords(i)[0].cos()).abs())
        .fold(0.0, f64::max);
    let full_err = (0..grid.len())
        .map(|i| (last.values[i] - decay * grid.coords(i)[0].cos()).abs())
        .fold(0.0, f64::max);
    let mut ok = sup_err <= 5e-3 && (last.t - t).abs() < 1e-12;
    let mut worst_z = 0.0_f64;
    // probe nodes at x = 0, π/4, −3π/5
    for (k, seed) in [(200usize, 11u64), (225, 12), (140, 13)] {
        let x = grid.coords(k);
        let (est, se) = mc_oracle(&m, &x, t, 200_000, 50, seed)?;
        let z = (last.values[k] - est).abs() / se;
        worst_z = worst_z.max(z);
        ok &= z <= 3.0;
    }
    Ok((ok, format!("sup error {sup_err:.3e} on audited nodes ({full_err:.3e} incl. edges), worst |solver-mc|/stderr {worst_z:.2}")))
}

fn change_of_variable() -> Outcome {
    let m = MbsModel::desk();
    let grids = [51, 101, 201]
        .into_iter()
        .map(|n| GridSpec::uniform(m.domain_box(), n))
        .collect::<Result<Vec<_>>>()?;
    let rows = change_of_variable_study(&m, &grids, &SchemeOptions::default())?;
    let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
    let shrinking = gaps.windows(2).all(|w| w[1] < w[0]);
    let ok = shrinking && *gaps.last().unwrap() <= 5e-3;
    Ok((ok, format!("gaps {}", gaps.iter().map(|g| format!("{g:.3e}")).collect::<Vec<_>>().join(" > "))))
}

fn structural_checks() -> Outcome {
    const N: usize = 10_000;
    let mut reports: Vec<(String, CheckReport)> = Vec::new();

    let ex1 = HamiltonianSpec::example1();
    let gauge = GaugeFunction::new(GaugeKind::ShiftSq, ex1.a, ex1.b)?;
    reports.push(("example1 ellipticity".into(), check_degenerate_ellipticity(&ex1, N, 1)?));
    reports.push(("example1 gradient".into(), check_gradient_modulus(&ex1, 1.0, N, 2)?));
    reports.push((
        "example1 cp6".into(),
        check_structure_cp6(&ex1, 2.0, (ModulusFamily::zero(), ModulusFamily::linear(1.0)), N, 3)?,
    ));
    reports.push((
        "example1 cp7".into(),
        check_osgood_structure_cp7(&ex1, &gauge, &OsgoodFunction::xlog(), ModulusFamily::linear(7.0), 1.0, N, 4)?,
    ));

    let m = MbsModel::desk();
    let big_r = 2.0;
    let dm2 = transformed_problem(&m)?.hamiltonian;
    let k = dm2_structure_constants(&m, big_r)?;
    // the Γ rate recomputed from its constants
    let big_m0 = compute_barriers(&m)?.big_m0;
    let rate = m.rho * ((k.c2 * big_m0).powi(2) / (4.0 * k.lambda2) + k.c2);
    let rate_gap = (k.gamma.eval_unchecked(1.0) - rate).abs() / rate;
    reports.push(("mbs-dm2 ellipticity".into(), check_degenerate_ellipticity(&dm2, N, 5)?));
    reports.push(("mbs-dm2 gradient".into(), check_gradient_modulus(&dm2, big_r, N, 6)?));
    reports.push(("mbs-dm2 cp6".into(), check_structure_cp6(&dm2, big_r, (k.nu2, k.nu2r), N, 7)?));
    reports.push((
        "mbs-dm2 cp7".into(),
        check_osgood_structure_cp7(&dm2, &k.gauge, &k.gamma, k.nu_hat, big_r, N, 8)?,
    ));

    let flipped = check_degenerate_ellipticity(&HamiltonianSpec::pos_trace(1), N, 9)?;
    let mut ok = !flipped.pass && rate_gap <= 1e-12;
    let mut worst = f64::NEG_INFINITY;
    let mut failing = Vec::new();
    for (name, rep) in &reports {
        let pass = rep.pass && rep.max_violation <= 1e-9;
        ok &= pass;
        worst = worst.max(rep.max_violation);
        if !pass {
            failing.push(name.clone());
        }
    }
    let tail = if failing.is_empty() { String::new() } else { format!("; failing: {}", failing.join(", ")) };
    Ok((ok, format!("{} checks, worst violation {worst:.2e}, +tr(X) rejected: {}{tail}", reports.len(), !flipped.pass)))
}

fn example1_identity() -> Outcome {
    let h = HamiltonianSpec::example1();
    let g = GaugeFunction::new(GaugeKind::ShiftSq, h.a - h.eps0, h.b + h.eps0)?;
    let hz = local_gauge(&h, &g)?;
    let x = DVector::from_element(1, 0.0);
    let zero_p = DVector::from_element(1, 0.0);
    let (mut coef, mut ident) = (0.0_f64, 0.0_f64);
    for k in 0..1000 {
        // quasi-random states via the golden-ratio sequence
        let s = (0.5 + k as f64 * 0.618_033_988_749_895) % 1.0;
        let w = (0.25 + k as f64 * 0.754_877_666_246_693) % 1.0;
        let u = h.a + 1e-3 + s * (h.b - h.a - 1e-3);
        let p = DVector::from_element(1, 10.0 * w - 5.0 + 1e-3);
        let xm = DMatrix::from_element(1, 1, 6.0 * s * w - 3.0);
        let f0 = hz.eval(&x, 0.0, u, &zero_p, &xm)?;
        let fp = hz.eval(&x, 0.0, u, &p, &xm)?;
        coef = coef.max(((fp - f0) / p.norm_squared()).abs());
        let expect = -xm.trace() + if u > 0.0 { u * u.ln() } else { 0.0 };
        ident = ident.max((fp - expect).abs());
    }
    Ok((coef <= 1e-12 && ident <= 1e-10, format!("|p|^2 coefficient {coef:.2e}, identity error {ident:.2e}")))
}

fn osgood_demo() -> Outcome {
    let delta = 1e-3;
    let flow = ode_flow(&OsgoodFunction::xlog(), delta, 1.0, 1e-4)?;
    let t_last = *flow.times.last().unwrap();
    let exact = delta.powf((-t_last).exp());
    let rel = (flow.values.last().unwrap() - exact).abs() / exact;
    let zero = ode_flow(&OsgoodFunction::xlog(), 0.0, 1.0, 1e-4)?;
    let stays_zero = zero.values.iter().all(|v| *v == 0.0);

    let eps: Vec<f64> = (1..=12).map(|k| 10f64.powi(-k)).collect();
    let lin = divergence_score(&OsgoodFunction::linear(1.0, 1.0), &eps)?;
    let lin_err = lin
        .iter()
        .enumerate()
        .map(|(i, s)| (s - (i + 1) as f64 * LN_10).abs() / ((i + 1) as f64 * LN_10))
        .fold(0.0, f64::max);
    let sqrt = divergence_score(&OsgoodFunction::power(0.5, 1.0), &eps)?;
    let sqrt_err = (sqrt.last().unwrap() - 2.0).abs();
    let ok = (t_last - 1.0).abs() < 1e-9 && rel <= 0.01 && stays_zero && lin_err <= 1e-6 && sqrt_err <= 1e-4;
    Ok((
        ok,
        format!("flow rel error {rel:.2e}, zero flow exact: {stays_zero}, linear score rel error {lin_err:.2e}, sqrt score gap {sqrt_err:.2e}"),
    ))
}

fn lipschitz() -> Outcome {
    let synthetic = RegularityBounds {
        lip_mu: 1.0,
        lambda2_prime_sup: 2.0,
        w_sup: 1.0,
        lambda1_prime_min: 1.0,
        lambda2_sup: 1.0,
        sigma_t_norm: 1.0,
        lip_w: 0.0,
        lip_f: 1.0,
    };
    let c = growth_constant(&synthetic, 0.5);
    let mut ok = c == 5.0;
    let mut parts = vec![format!("C = {c}")];

    let heat = MbsModel::heat();
    let g = GridSpec::uniform(heat.domain_box(), 401)?;
    let run = solve(&heat, &g, &SchemeOptions::until(0.5))?;
    let rep = lipschitz_audit(&run, &regularity_constant(&heat, 1.0)?);
    ok &= rep.pass;
    parts.push(format!("heat margin {:.3e}", rep.max_violation));

    let desk = MbsModel::desk();
    let g = GridSpec::uniform(desk.domain_box(), 201)?;
    let run = solve(&desk, &g, &SchemeOptions::default())?;
    let rd = regularity_constant(&desk, 1.0)?;
    let rep = lipschitz_audit(&run, &rd);
    ok &= rep.pass;
    parts.push(format!("desk margin {:.3e} (C = {:.4})", rep.max_violation, rd.c));
    Ok((ok, parts.join(", ")))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "barrier correctness", budget: secs(5), run: barrier_correctness },
        Criterion { id: 2, name: "discrete comparison", budget: secs(60), run: discrete_comparison_criterion },
        Criterion { id: 3, name: "sandwich", budget: secs(120), run: sandwich },
        Criterion { id: 4, name: "linear-case oracles", budget: secs(120), run: heat_oracles },
        Criterion { id: 5, name: "change of variable", budget: None, run: change_of_variable },
        Criterion { id: 6, name: "structural checks", budget: secs(30), run: structural_checks },
        Criterion { id: 7, name: "example-1 transform identity", budget: None, run: example1_identity },
        Criterion { id: 8, name: "osgood demo", budget: None, run: osgood_demo },
        Criterion { id: 9, name: "lipschitz audit", budget: None, run: lipschitz },
    ];
    let mut failures = 0;
    for c in criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = c.budget.is_none_or(|b| elapsed < b);
        let (pass, detail) = match outcome {
            Ok((pass, detail)) => (pass && in_time, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = c.budget.map(|b| format!(" / {}s", b.as_secs())).unwrap_or_default();
        println!(
            "{} criterion {}: {} [{:.1}s{budget}] {detail}",
            if pass { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed.as_secs_f64()
        );
        if !pass {
            failures += 1;
        }
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failures} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
