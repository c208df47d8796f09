use std::sync::Arc;

use nalgebra::DVector;

use super::*;
use crate::mbs::forms::{DriftForm, SpatialForm, TimeForm, VolForm};
use crate::mbs::{regularity_constant, MbsModel};

fn model_1d() -> MbsModel {
    let mut m = MbsModel::zero(1);
    m.x_box = Some(vec![(-2.0, 2.0)]);
    m
}

fn degenerate_2d() -> MbsModel {
    let mut m = MbsModel::zero(2);
    m.d = 1;
    m.sigma = VolForm::Constant { matrix: vec![vec![0.8], vec![0.0]] };
    m.rho = 0.0;
    m.u0 = SpatialForm::Cosine { offset: 2.0, amplitude: 1.0, wavevector: vec![0.0, 1.5] };
    m.x_box = Some(vec![(-2.0, 2.0), (-2.0, 2.0)]);
    m
}

fn correlated_2d() -> MbsModel {
    let mut m = MbsModel::desk();
    m.n = 2;
    m.d = 2;
    m.sigma = VolForm::Constant { matrix: vec![vec![0.3, 0.1], vec![0.1, 0.3]] };
    m.mu = DriftForm::Sine { amplitude: vec![0.1, -0.05], frequency: vec![1.0, 2.0] };
    m.h = SpatialForm::Gaussian { amplitude: 0.5, center: vec![0.0, 0.5], width: 1.0 };
    m.x_box = Some(vec![(-3.0, 3.0), (-3.0, 3.0)]);
    m
}

fn field(grid: &GridSpec, f: impl Fn(&DVector<f64>) -> f64) -> GridField {
    let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
    GridField::new(Arc::new(grid.clone()), 0.0, values).unwrap()
}

#[test]
fn grid_validation_and_indexing() {
    assert!(GridSpec::uniform(vec![(0.0, 1.0)], 7).is_err());
    assert!(GridSpec::new(vec![(0.0, 1.0)], vec![9], 1.5, 1).is_err());
    assert!(GridSpec::new(vec![(0.0, 1.0)], vec![9], 0.5, 0).is_err());
    assert!(GridSpec::uniform(vec![(1.0, 1.0)], 9).is_err());
    let g = GridSpec::new(vec![(0.0, 1.0), (-1.0, 1.0)], vec![9, 11], 0.9, 2).unwrap();
    assert_eq!(g.len(), 99);
    assert_eq!(g.strides(), vec![11, 1]);
    let i = 3 * 11 + 10;
    assert_eq!(g.multi_index(i), vec![3, 10]);
    assert!(!g.is_interior(i));
    assert_eq!(g.nearest_interior(i), 3 * 11 + 9);
    let x = g.coords(i);
    assert!((x[0] - 0.375).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    let back = GridSpec::from_json(&serde_json::to_string(&g).unwrap()).unwrap();
    assert_eq!(g, back);
}

#[test]
fn constant_field_follows_the_discount_ode() {
    let r0 = 0.3;
    let mut m = model_1d();
    m.r = TimeForm::Constant { value: r0 };
    m.mu = DriftForm::Sine { amplitude: vec![0.7], frequency: vec![2.0] };
    m.u0 = SpatialForm::Constant { value: 0.8 };
    let p = Dm1Problem::new(&m).unwrap();
    let g = GridSpec::uniform(vec![(-2.0, 2.0)], 41).unwrap();
    let cfg = resolve(&p, &g, &SchemeOptions::until(0.5)).unwrap();
    let f0 = field(&g, |_| 0.8);
    let f1 = step(&f0, &p, &cfg).unwrap();
    for v in &f1.values {
        assert!((v - (0.8 - cfg.dt * r0 * 0.8)).abs() < 1e-15);
    }
    // Over a run the scheme is exactly the Euler iteration for U' = −rU.
    let run = run_problem(&p, &g, &cfg, f0.values.clone()).unwrap();
    let euler = 0.8 * (1.0 - cfg.dt * r0).powi(cfg.n_steps as i32);
    assert!(run.last().values.iter().all(|v| (v - euler).abs() < 1e-14));
    assert!((euler - 0.8 * (-r0 * 0.5f64).exp()).abs() < 1e-3);
}

#[test]
fn constant_field_with_cash_flow_reduces_to_euler() {
    // U' = −r(U + h) + τh with constant h
    let (r0, h0, tau) = (0.2, 0.4, 0.9);
    let mut m = model_1d();
    m.r = TimeForm::Constant { value: r0 };
    m.h = SpatialForm::Constant { value: h0 };
    m.tau = tau;
    let p = Dm1Problem::new(&m).unwrap();
    let g = GridSpec::uniform(vec![(-2.0, 2.0)], 21).unwrap();
    let cfg = resolve(&p, &g, &SchemeOptions::until(0.6)).unwrap();
    let run = run_problem(&p, &g, &cfg, vec![0.1; g.len()]).unwrap();
    let mut u = 0.1;
    for _ in 0..cfg.n_steps {
        u += cfg.dt * (-r0 * (u + h0) + tau * h0);
    }
    assert!(run.last().values.iter().all(|v| (v - u).abs() < 1e-14));
}

#[test]
fn linear_profile_is_transported_upwind() {
    let mu0 = 0.6;
    let mut m = model_1d();
    m.sigma = VolForm::Constant { matrix: vec![vec![0.0]] };
    m.mu = DriftForm::Constant { value: vec![mu0] };
    m.rho = 0.0;
    let p = Dm1Problem::new(&m).unwrap();
    let g = GridSpec::uniform(vec![(-2.0, 2.0)], 41).unwrap();
    let cfg = resolve(&p, &g, &SchemeOptions::until(0.5)).unwrap();
    let slope = 1.7;
    let f0 = field(&g, |x| slope * x[0]);
    let f1 = step(&f0, &p, &cfg).unwrap();
    for i in 1..g.len() - 1 {
        let x = g.coords(i)[0];
        assert!((f1.values[i] - slope * (x + cfg.dt * mu0)).abs() < 1e-13);
    }
}

#[test]
fn zero_step_is_the_identity() {
    let m = MbsModel::desk();
    let p = Dm1Problem::new(&m).unwrap();
    let g = GridSpec::uniform(m.domain_box(), 33).unwrap();
    let mut cfg = resolve(&p, &g, &SchemeOptions::default()).unwrap();
    cfg.dt = 0.0;
    let f0 = field(&g, |x| (x[0]).sin());
    assert_eq!(step(&f0, &p, &cfg).unwrap(), f0);
}

#[test]
fn unstable_step_is_rejected() {
    let m = MbsModel::heat();
    let p = Dm1Problem::new(&m).unwrap();
    let g = GridSpec::uniform(m.domain_box(), 101).unwrap();
    let mut cfg = resolve(&p, &g, &SchemeOptions::default()).unwrap();
    cfg.dt = 2.0 * cfg.dt_limit;
    let f0 = field(&g, |x| x[0].cos());
    assert!(matches!(step(&f0, &p, &cfg), Err(crate::Error::Config(_))));
    let opts = SchemeOptions { dt: Some(1.0), ..Default::default() };
    assert!(resolve(&p, &g, &opts).is_err());
}

#[test]
fn non_monotone_cross_diffusion_is_rejected() {
    let mut m = MbsModel::zero(2);
    m.sigma = VolForm::Constant { matrix: vec![vec![0.1, 0.0], vec![1.0, 0.1]] };
    let p = Dm1Problem::new(&m).unwrap();
    let g = GridSpec::uniform(vec![(-1.0, 1.0), (-1.0, 1.0)], 21).unwrap();
    assert!(matches!(resolve(&p, &g, &SchemeOptions::default()), Err(crate::Error::Config(_))));
}

#[test]
fn heat_case_matches_the_closed_form() {
    let m = MbsModel::heat();
    let g = GridSpec::uniform(m.domain_box(), 401).unwrap();
    let run = solve(&m, &g, &SchemeOptions::until(0.5)).unwrap();
    let last = run.last();
    assert!((last.t - 0.5).abs() < 1e-12);
    let err = |nodes: Vec<usize>| {
        nodes
            .into_iter()
            .map(|i| (last.values[i] - (-0.5f64).exp() * g.coords(i)[0].cos()).abs())
            .fold(0.0, f64::max)
    };
    let audited = run.audited_nodes();
    assert!(audited.len() > 100);
    let inner = err(audited);
    assert!(inner <= 5e-3, "sup error {inner}");
    // the reflecting edge costs O(dx) near the faces only
    let full = err((0..g.len()).collect());
    assert!(full > inner && full < g.max_dx());
    assert!(!run.flags.sandwich_violated);
}

#[test]
fn default_run_stops_one_step_before_maturity() {
    let m = MbsModel::desk();
    let g = GridSpec::uniform(m.domain_box(), 81).unwrap();
    let run = solve(&m, &g, &SchemeOptions::default()).unwrap();
    let t_last = run.last().t;
    assert!((t_last + run.config.dt - m.big_t).abs() < 1e-12);
    assert_eq!(run.fields[0].t, 0.0);
}

#[test]
fn zero_model_stays_zero() {
    let mut m = MbsModel::zero(1);
    m.x_box = Some(vec![(-1.0, 1.0)]);
    let g = GridSpec::uniform(m.domain_box(), 51).unwrap();
    let run = solve(&m, &g, &SchemeOptions::default()).unwrap();
    assert!(run.fields.iter().all(|f| f.values.iter().all(|v| *v == 0.0)));
}

#[test]
fn data_along_the_degenerate_direction_is_a_fixed_point() {
    let m = degenerate_2d();
    let g = GridSpec::uniform(m.domain_box(), 41).unwrap();
    let run = solve(&m, &g, &SchemeOptions::default()).unwrap();
    let f0 = &run.fields[0];
    for f in &run.fields {
        for i in 0..g.len() {
            if g.is_interior(i) {
                assert!((f.values[i] - f0.values[i]).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn desk_run_stays_between_the_barriers() {
    let m = MbsModel::desk();
    let g = GridSpec::uniform(m.domain_box(), 161).unwrap();
    let run = solve(&m, &g, &SchemeOptions::default()).unwrap();
    assert!(!run.sandwich.is_empty());
    assert!(run.sandwich.iter().all(|s| s.ok), "{:?}", run.sandwich);
    assert!(!run.flags.gradient_exceeded && !run.flags.guard_engaged);
}

#[test]
fn probe_confirms_monotonicity() {
    for m in [MbsModel::desk(), correlated_2d(), degenerate_2d()] {
        let p = Dm1Problem::new(&m).unwrap();
        let nodes = if m.n == 1 { 161 } else { 31 };
        let g = GridSpec::uniform(m.domain_box(), nodes).unwrap();
        let cfg = resolve(&p, &g, &SchemeOptions::default()).unwrap();
        let rep = monotonicity_probe(&p, &g, &cfg, 1000, 17).unwrap();
        assert!(rep.pass, "{}", rep.to_json());
    }
    let m = MbsModel::desk();
    let p = GaugedProblem::affine(&m).unwrap();
    let g = GridSpec::uniform(m.domain_box(), 161).unwrap();
    let cfg = resolve(&p, &g, &SchemeOptions::default()).unwrap();
    let rep = monotonicity_probe(&p, &g, &cfg, 1000, 18).unwrap();
    assert!(rep.pass, "{}", rep.to_json());
}

#[test]
fn probe_catches_missing_dissipation() {
    let m = MbsModel::desk();
    let p = Dm1Problem::new(&m).unwrap();
    let g = GridSpec::uniform(m.domain_box(), 41).unwrap();
    let mut cfg = resolve(&p, &g, &SchemeOptions::default()).unwrap();
    cfg.lf_dissipation = vec![0.0];
    cfg.p_box *= 20.0;
    let rep = monotonicity_probe(&p, &g, &cfg, 500, 3).unwrap();
    assert!(!rep.pass);
}

fn pair_runs(m_low: &MbsModel, m_high: &MbsModel, g: &GridSpec) -> (Run, Run) {
    let hi = Dm1Problem::new(m_high).unwrap();
    let p = Dm1Problem::new(m_low).unwrap().with_bounds(hi.state_range, hi.p_box);
    let cfg = resolve(&p, g, &SchemeOptions::default()).unwrap();
    let a = run_problem(&p, g, &cfg, initial_values(&Dm1Problem::new(m_low).unwrap(), g)).unwrap();
    let b = run_problem(&p, g, &cfg, initial_values(&hi, g)).unwrap();
    (a, b)
}

#[test]
fn comparison_of_identical_runs() {
    let m = MbsModel::desk();
    let g = GridSpec::uniform(m.domain_box(), 81).unwrap();
    let (a, b) = pair_runs(&m, &m, &g);
    let rep = discrete_comparison(&a, &b).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.max_violation, 0.0);
}

#[test]
fn comparison_of_shifted_constants() {
    let r0 = 0.4;
    let mut lo = model_1d();
    lo.r = TimeForm::Constant { value: r0 };
    lo.u0 = SpatialForm::Constant { value: 0.2 };
    let mut hi = lo.clone();
    hi.u0 = SpatialForm::Constant { value: 0.3 };
    let g = GridSpec::uniform(lo.domain_box(), 41).unwrap();
    let (a, b) = pair_runs(&lo, &hi, &g);
    assert!(discrete_comparison(&a, &b).unwrap().pass);
    for (fa, fb) in a.fields.iter().zip(&b.fields) {
        let gap = fb.values[7] - fa.values[7];
        let euler = 0.1 * (1.0 - a.config.dt * r0).powf(fa.t / a.config.dt);
        assert!((gap - euler).abs() < 1e-12);
        assert!((gap - 0.1 * (-r0 * fa.t).exp()).abs() < 1e-3);
    }
}

#[test]
fn comparison_with_a_bump() {
    let lo = MbsModel::desk();
    let mut hi = lo.clone();
    hi.u0 = SpatialForm::Gaussian { amplitude: 0.3, center: vec![0.5], width: 0.4 };
    let g = GridSpec::uniform(lo.domain_box(), 81).unwrap();
    let (a, b) = pair_runs(&lo, &hi, &g);
    let rep = discrete_comparison(&a, &b).unwrap();
    assert!(rep.pass, "{}", rep.to_json());
    let rev = discrete_comparison(&b, &a).unwrap();
    assert!(!rev.pass);
}

#[test]
fn comparison_rejects_mismatched_runs() {
    let m = MbsModel::desk();
    let a = solve(&m, &GridSpec::uniform(m.domain_box(), 41).unwrap(), &SchemeOptions::default()).unwrap();
    let b = solve(&m, &GridSpec::uniform(m.domain_box(), 43).unwrap(), &SchemeOptions::default()).unwrap();
    assert!(discrete_comparison(&a, &b).is_err());
}

#[test]
fn monte_carlo_heat_case() {
    let m = MbsModel::heat();
    let x = DVector::from_vec(vec![0.4]);
    let (est, se) = mc_oracle(&m, &x, 0.5, 40_000, 20, 1).unwrap();
    let exact = (-0.5f64).exp() * 0.4f64.cos();
    assert!((est - exact).abs() <= 3.0 * se, "{est} vs {exact} ± {se}");
}

#[test]
fn monte_carlo_deterministic_integrand() {
    let mut m = model_1d();
    m.rho = 0.0;
    m.h = SpatialForm::Constant { value: 0.3 };
    m.tau = 0.7;
    m.mu = DriftForm::Sine { amplitude: vec![0.2], frequency: vec![1.0] };
    let (est, se) = mc_oracle(&m, &DVector::from_vec(vec![0.1]), 0.6, 100, 10, 2).unwrap();
    assert!((est - 0.7 * 0.3 * 0.6).abs() < 1e-14);
    assert!(se < 1e-14);
}

#[test]
fn monte_carlo_error_scales_with_paths() {
    let m = MbsModel::heat();
    let x = DVector::from_vec(vec![1.0]);
    let (_, s1) = mc_oracle(&m, &x, 0.5, 20_000, 10, 5).unwrap();
    let (_, s2) = mc_oracle(&m, &x, 0.5, 40_000, 10, 5).unwrap();
    let ratio = s2 / s1;
    assert!((ratio - 0.5f64.sqrt()).abs() <= 0.2 * 0.5f64.sqrt(), "{ratio}");
}

#[test]
fn monte_carlo_requires_linear_case() {
    assert!(mc_oracle(&MbsModel::desk(), &DVector::zeros(1), 0.5, 10, 10, 0).is_err());
}

#[test]
fn monte_carlo_is_reproducible() {
    let m = MbsModel::heat();
    let x = DVector::from_vec(vec![0.2]);
    assert_eq!(mc_oracle(&m, &x, 0.3, 1000, 5, 9).unwrap(), mc_oracle(&m, &x, 0.3, 1000, 5, 9).unwrap());
}

#[test]
fn lipschitz_audit_of_heat_case() {
    let m = MbsModel::heat();
    let g = GridSpec::uniform(m.domain_box(), 201).unwrap();
    let run = solve(&m, &g, &SchemeOptions::until(0.5)).unwrap();
    let rd = regularity_constant(&m, 1.0).unwrap();
    let rep = lipschitz_audit(&run, &rd);
    assert!(rep.pass, "{}", rep.to_json());
    let q_last = rep.samples;
    assert_eq!(q_last, run.fields.len());
    // quotients never exceed Lip(U₀) = 1
    let last = run.last();
    let dx = g.dx()[0];
    let q = last.values.windows(2).map(|w| (w[1] - w[0]).abs() / dx).fold(0.0, f64::max);
    assert!(q <= 1.0);
}

#[test]
fn lipschitz_audit_of_constant_data() {
    let mut m = model_1d();
    m.u0 = SpatialForm::Constant { value: 0.5 };
    m.h = SpatialForm::Constant { value: 0.2 };
    let g = GridSpec::uniform(m.domain_box(), 41).unwrap();
    let run = solve(&m, &g, &SchemeOptions::default()).unwrap();
    let rd = regularity_constant(&m, 1.0).unwrap();
    let rep = lipschitz_audit(&run, &rd);
    assert!(rep.pass);
    assert!(rep.worst_sample.unwrap().get("quotient").unwrap()[0] < 1e-12);
}

fn nested(x_box: Vec<(f64, f64)>, first: usize, k: usize) -> Vec<GridSpec> {
    let mut out = Vec::new();
    let mut n = first;
    for _ in 0..k {
        out.push(GridSpec::uniform(x_box.clone(), n).unwrap());
        n = 2 * (n - 1) + 1;
    }
    out
}

#[test]
fn refinement_of_heat_case() {
    let m = MbsModel::heat();
    let rows = refinement_study(&m, &nested(m.domain_box(), 51, 4), &SchemeOptions::until(0.5)).unwrap();
    assert!(rows[0].diff.is_none() && rows[1].order.is_none());
    for r in &rows[2..] {
        let o = r.order.unwrap();
        assert!((0.8..=2.2).contains(&o), "{rows:?}");
    }
    let csv = refinement_csv(&rows);
    assert!(csv.starts_with("grid,dx,diff,order\n51,"));
}

#[test]
fn refinement_of_zero_model() {
    let mut m = MbsModel::zero(1);
    m.x_box = Some(vec![(-1.0, 1.0)]);
    let rows = refinement_study(&m, &nested(m.domain_box(), 11, 3), &SchemeOptions::default()).unwrap();
    assert!(rows.iter().skip(1).all(|r| r.diff == Some(0.0)));
}

#[test]
fn refinement_of_transported_bump_is_first_order() {
    let mut m = model_1d();
    m.x_box = Some(vec![(-3.0, 3.0)]);
    m.sigma = VolForm::Constant { matrix: vec![vec![0.0]] };
    m.mu = DriftForm::Constant { value: vec![1.0] };
    m.rho = 0.0;
    m.u0 = SpatialForm::Gaussian { amplitude: 1.0, center: vec![0.0], width: 0.5 };
    let rows = refinement_study(&m, &nested(m.domain_box(), 201, 4), &SchemeOptions::until(0.5)).unwrap();
    for r in &rows[2..] {
        let o = r.order.unwrap();
        assert!((0.7..=1.3).contains(&o), "{rows:?}");
    }
}

#[test]
fn refinement_requires_nested_grids() {
    let m = MbsModel::heat();
    let b = m.domain_box();
    let grids = vec![
        GridSpec::uniform(b.clone(), 21).unwrap(),
        GridSpec::uniform(b.clone(), 41).unwrap(),
        GridSpec::uniform(b.clone(), 83).unwrap(),
    ];
    assert!(matches!(refinement_study(&m, &grids, &SchemeOptions::default()), Err(crate::Error::Config(_))));
    assert!(refinement_study(&m, &grids[..2], &SchemeOptions::default()).is_err());
}

#[test]
fn gauge_table_inverts_psi() {
    let m = MbsModel::desk();
    let p = GaugedProblem::affine(&m).unwrap();
    let (lo, hi) = p.state_range();
    for k in 0..=100 {
        let v = lo + (hi - lo) * k as f64 / 100.0;
        let u = p.to_u(v);
        assert!((p.transformation.psi(u).unwrap() - v).abs() < 1e-10);
    }
}

#[test]
fn gauged_nonlinearity_matches_the_transformed_hamiltonian() {
    use crate::hamiltonian::transform_hamiltonian;
    use crate::mbs::transformed_problem;
    use nalgebra::DMatrix;
    let m = MbsModel::desk();
    let p = GaugedProblem::affine(&m).unwrap();
    let h = transformed_problem(&m).unwrap().hamiltonian;
    let ht = transform_hamiltonian(&h, &p.transformation).unwrap();
    let a = m.diffusion();
    let (lo, hi) = p.state_range();
    for k in 0..40 {
        let x = DVector::from_vec(vec![-3.0 + 0.15 * k as f64]);
        let v = lo + (hi - lo) * k as f64 / 39.0;
        let q = DVector::from_vec(vec![0.05 * k as f64 - 1.0]);
        let xm = DMatrix::from_element(1, 1, 0.3);
        // F̃ = −½tr(aX) − ⟨μ,p⟩ + N_v
        let expect = ht.eval(&x, 0.4, v, &q, &xm).unwrap();
        let got = -0.5 * (&a * &xm).trace() - m.mu(&x).dot(&q) + p.nonlinearity(&x, 0.4, v, &q);
        assert!((got - expect).abs() < 1e-8 * (1.0 + expect.abs()), "{got} vs {expect}");
    }
}

#[test]
fn change_of_variable_gap_shrinks() {
    let m = MbsModel::desk();
    let grids = nested(m.domain_box(), 41, 3);
    let rows = change_of_variable_study(&m, &grids, &SchemeOptions::until(0.5)).unwrap();
    assert!(rows.windows(2).all(|w| w[1].gap < w[0].gap), "{rows:?}");
}

#[test]
fn fields_csv_layout() {
    let g = GridSpec::uniform(vec![(0.0, 1.0), (0.0, 1.0)], 8).unwrap();
    let f = field(&g, |x| x[0] + x[1]);
    let csv = fields_csv(&[f], "U");
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,x2,U");
    assert_eq!(csv.lines().count(), 65);
}
