use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GridField, GridSpec, Problem};
use crate::error::{config, Result};
use crate::sampling::{par_samples, uniform, uniform_box};

const COEFF_SAMPLES: usize = 10_000;
const COEFF_SEED: u64 = 0x7e7a;
const COEFF_INFLATION: f64 = 1.2;

/// User-facing scheme settings; anything left out is derived.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeOptions {
    /// Lax–Friedrichs coefficients `θᵢ`.
    pub theta: Option<Vec<f64>>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub record_every: Option<usize>,
}

impl SchemeOptions {
    pub fn until(t_end: f64) -> Self {
        SchemeOptions { t_end: Some(t_end), ..Default::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Resolved scheme: `n_steps` explicit steps of size `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub lf_dissipation: Vec<f64>,
    pub dt: f64,
    pub n_steps: usize,
    pub record_every: usize,
    /// Bound on `|∂N/∂u|` over the sampled state set.
    pub lip_u: f64,
    /// Gradient box the coefficients were sampled on.
    pub p_box: f64,
    /// Largest stable `dt` for these coefficients.
    pub dt_limit: f64,
}

impl SchemeConfig {
    pub fn t_end(&self) -> f64 {
        self.dt * self.n_steps as f64
    }
}

fn fd_step(scale: f64) -> f64 {
    1e-6 * (1.0 + scale)
}

/// `θᵢ ≥ sup |∂N/∂pᵢ|` and `L_u ≥ sup |∂N/∂u|` by central differences at
/// 10⁴ states drawn from the box, `[0, T)`, the problem's state range and the
/// gradient box, inflated by 20%.
pub fn estimate_coefficients<P: Problem + ?Sized>(problem: &P, grid: &GridSpec) -> (Vec<f64>, f64) {
    let n = problem.dim();
    let (lo, hi) = problem.state_range();
    let pb = problem.gradient_box();
    let horizon = problem.horizon();
    let dp = fd_step(pb);
    let du = fd_step(lo.abs().max(hi.abs()));
    let samples = par_samples(COEFF_SAMPLES, COEFF_SEED, |_, rng| {
        let x = uniform_box(rng, &grid.x_box);
        let t = uniform(rng, 0.0, horizon) * (1.0 - 1e-12);
        let u = uniform(rng, lo, hi);
        let p = DVector::from_fn(n, |_, _| uniform(rng, -pb, pb));
        let mut dn = vec![0.0; n];
        for (j, d) in dn.iter_mut().enumerate() {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[j] += dp;
            pm[j] -= dp;
            *d = ((problem.nonlinearity(&x, t, u, &pp) - problem.nonlinearity(&x, t, u, &pm)) / (2.0 * dp)).abs();
        }
        let duv = ((problem.nonlinearity(&x, t, u + du, &p) - problem.nonlinearity(&x, t, u - du, &p)) / (2.0 * du)).abs();
        (dn, duv)
    });
    let mut theta = vec![0.0_f64; n];
    let mut lip_u = 0.0_f64;
    for (dn, duv) in samples {
        for (t, d) in theta.iter_mut().zip(dn) {
            *t = t.max(d);
        }
        lip_u = lip_u.max(duv);
    }
    (theta.into_iter().map(|t| COEFF_INFLATION * t).collect(), COEFF_INFLATION * lip_u)
}

/// `cfl · 1/(Σᵢ (aᵢᵢ/dxᵢ² + (sup|μ| + θᵢ)/dxᵢ) + L_u)`.
///
/// Also rejects diffusion matrices whose axis weights
/// `½aᵢᵢ/dxᵢ² − Σⱼ |aᵢⱼ|/(2dxᵢdxⱼ)` turn negative, since the cross stencil is
/// then not monotone.
pub fn cfl_limit<P: Problem + ?Sized>(problem: &P, grid: &GridSpec, theta: &[f64], lip_u: f64) -> Result<f64> {
    let n = grid.dim();
    if problem.dim() != n || theta.len() != n {
        return Err(config(format!(
            "dimension mismatch: problem {}, grid {n}, θ has {} entries",
            problem.dim(),
            theta.len()
        )));
    }
    if theta.iter().any(|t| !(*t >= 0.0)) || !(lip_u >= 0.0) {
        return Err(config("θ and L_u must be nonnegative"));
    }
    let a = problem.diffusion();
    let dx = grid.dx();
    for i in 0..n {
        let cross: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)].abs() / (2.0 * dx[i] * dx[j])).sum();
        let w = 0.5 * a[(i, i)] / (dx[i] * dx[i]) - cross;
        if w < -1e-12 * (1.0 + cross) {
            return Err(config(format!(
                "diffusion is not diagonally dominant enough for a monotone stencil on axis {i} (weight {w:e})"
            )));
        }
    }
    let mu = problem.drift_sup();
    let denom: f64 = (0..n).map(|i| a[(i, i)] / (dx[i] * dx[i]) + (mu + theta[i]) / dx[i]).sum::<f64>() + lip_u;
    Ok(if denom > 0.0 { grid.cfl_safety / denom } else { f64::INFINITY })
}

/// Resolve options into a concrete scheme. Without `t_end` the run stops at
/// `T − dt`, the last time at which the scheme evaluates `N` inside `[0, T)`.
/// `dt` is shortened so that `t_end` is hit exactly.
pub fn resolve<P: Problem + ?Sized>(problem: &P, grid: &GridSpec, opts: &SchemeOptions) -> Result<SchemeConfig> {
    grid.validate()?;
    let (est_theta, lip_u) = estimate_coefficients(problem, grid);
    let theta = match &opts.theta {
        Some(t) => {
            if t.len() != grid.dim() {
                return Err(config(format!("θ needs {} entries, got {}", grid.dim(), t.len())));
            }
            t.clone()
        }
        None => est_theta,
    };
    let limit = cfl_limit(problem, grid, &theta, lip_u)?;
    let dt_max = match opts.dt {
        Some(dt) if !(dt > 0.0) => return Err(config(format!("dt must be positive, got {dt}"))),
        Some(dt) if dt > limit => {
            return Err(config(format!("dt = {dt} exceeds the stability limit {limit}")));
        }
        Some(dt) => dt,
        None => limit,
    };
    let horizon = problem.horizon();
    let (dt, n_steps) = match opts.t_end {
        Some(te) => {
            if !(0.0..=horizon).contains(&te) {
                return Err(config(format!("t_end = {te} is outside [0, {horizon}]")));
            }
            let n = (te / dt_max - 1e-9).ceil().max(if te > 0.0 { 1.0 } else { 0.0 }) as usize;
            (if n == 0 { dt_max } else { te / n as f64 }, n)
        }
        None => {
            let n = ((horizon / dt_max - 1e-9).ceil() as usize).max(2);
            (horizon / n as f64, n - 1)
        }
    };
    let record_every = match opts.record_every {
        Some(0) => return Err(config("record_every must be at least 1")),
        Some(k) => k,
        None => (n_steps / 10).max(1),
    };
    Ok(SchemeConfig {
        lf_dissipation: theta,
        dt,
        n_steps,
        record_every,
        lip_u,
        p_box: problem.gradient_box(),
        dt_limit: limit,
    })
}

/// Per-grid data reused across steps.
pub(crate) struct Layout {
    pub coords: Vec<DVector<f64>>,
    pub interior: Vec<bool>,
    pub nearest: Vec<usize>,
    pub strides: Vec<isize>,
    pub dx: Vec<f64>,
}

impl Layout {
    pub fn new(grid: &GridSpec) -> Self {
        let len = grid.len();
        Layout {
            coords: (0..len).map(|i| grid.coords(i)).collect(),
            interior: (0..len).map(|i| grid.is_interior(i)).collect(),
            nearest: (0..len).map(|i| grid.nearest_interior(i)).collect(),
            strides: grid.strides().into_iter().map(|s| s as isize).collect(),
            dx: grid.dx(),
        }
    }
}

pub(crate) type Offset = [i8; 3];

fn unit(k: usize, s: i8) -> Offset {
    let mut o = [0; 3];
    o[k] = s;
    o
}

fn pair(i: usize, si: i8, j: usize, sj: i8) -> Offset {
    let mut o = [0; 3];
    o[i] = si;
    o[j] = sj;
    o
}

/// Stencil offsets used by [`rate`] in dimension `n`.
pub(crate) fn stencil(n: usize, cross: &[(usize, usize, f64)]) -> Vec<Offset> {
    let mut out = vec![[0; 3]];
    for k in 0..n {
        out.push(unit(k, 1));
        out.push(unit(k, -1));
    }
    for &(i, j, a) in cross {
        if a > 0.0 {
            out.push(pair(i, 1, j, 1));
            out.push(pair(i, -1, j, -1));
        } else {
            out.push(pair(i, 1, j, -1));
            out.push(pair(i, -1, j, 1));
        }
    }
    out
}

/// Off-diagonal entries of `a` that are not zero.
pub(crate) fn cross_terms<P: Problem + ?Sized>(problem: &P) -> Vec<(usize, usize, f64)> {
    let a = problem.diffusion();
    let n = problem.dim();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if a[(i, j)] != 0.0 {
                out.push((i, j, a[(i, j)]));
            }
        }
    }
    out
}

/// Semi-discrete right-hand side at one node, and `max |p̄ᵢ|` there.
pub(crate) fn rate<P: Problem + ?Sized, G: Fn(Offset) -> f64>(
    problem: &P,
    x: &DVector<f64>,
    t: f64,
    dx: &[f64],
    theta: &[f64],
    cross: &[(usize, usize, f64)],
    get: G,
) -> (f64, f64) {
    let n = dx.len();
    let a = problem.diffusion();
    let mu = problem.drift(x);
    let c = get([0; 3]);
    let mut up = [0.0; 3];
    let mut dn = [0.0; 3];
    let mut p = DVector::zeros(n);
    let mut r = 0.0;
    let mut pmax = 0.0_f64;
    for k in 0..n {
        up[k] = get(unit(k, 1));
        dn[k] = get(unit(k, -1));
        let second = up[k] + dn[k] - 2.0 * c;
        r += 0.5 * a[(k, k)] * second / (dx[k] * dx[k]) + 0.5 * theta[k] * second / dx[k];
        r += if mu[k] > 0.0 { mu[k] * (up[k] - c) / dx[k] } else { mu[k] * (c - dn[k]) / dx[k] };
        p[k] = (up[k] - dn[k]) / (2.0 * dx[k]);
        pmax = pmax.max(p[k].abs());
    }
    for &(i, j, aij) in cross {
        let axis = up[i] + dn[i] + up[j] + dn[j];
        let diag = if aij > 0.0 {
            get(pair(i, 1, j, 1)) + get(pair(i, -1, j, -1))
        } else {
            get(pair(i, 1, j, -1)) + get(pair(i, -1, j, 1))
        };
        r += aij.abs() * (diag + 2.0 * c - axis) / (2.0 * dx[i] * dx[j]);
    }
    (r - problem.nonlinearity(x, t, c, &p), pmax)
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct StepStats {
    pub max_gradient: f64,
    pub guard: bool,
}

pub(crate) fn advance<P: Problem + ?Sized>(
    problem: &P,
    layout: &Layout,
    cfg: &SchemeConfig,
    cross: &[(usize, usize, f64)],
    values: &[f64],
    t: f64,
) -> (Vec<f64>, StepStats) {
    let n = layout.dx.len();
    let updated: Vec<(f64, f64, bool)> = (0..values.len())
        .into_par_iter()
        .map(|i| {
            if !layout.interior[i] {
                return (f64::NAN, 0.0, false);
            }
            let get = |o: Offset| {
                let k = (0..n).fold(i as isize, |k, d| k + o[d] as isize * layout.strides[d]);
                values[k as usize]
            };
            let x = &layout.coords[i];
            let (r, pmax) = rate(problem, x, t, &layout.dx, &cfg.lf_dissipation, cross, get);
            let c = values[i];
            (c + cfg.dt * r, pmax, problem.guard(x, t, c))
        })
        .collect();
    let mut stats = StepStats::default();
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for &(v, pmax, g) in &updated {
        out.push(v);
        stats.max_gradient = stats.max_gradient.max(pmax);
        stats.guard |= g;
    }
    for i in 0..out.len() {
        if !layout.interior[i] {
            out[i] = updated[layout.nearest[i]].0;
        }
    }
    (out, stats)
}

/// One explicit Euler step. Fails before computing anything when `dt`
/// exceeds the stability limit of the coefficients in `cfg`.
pub fn step<P: Problem + ?Sized>(field: &GridField, problem: &P, cfg: &SchemeConfig) -> Result<GridField> {
    let grid = &field.grid;
    let limit = cfl_limit(problem, grid, &cfg.lf_dissipation, cfg.lip_u)?;
    if !(cfg.dt >= 0.0) || cfg.dt > limit * (1.0 + 1e-12) {
        return Err(config(format!("dt = {} violates the stability limit {limit}", cfg.dt)));
    }
    if cfg.dt == 0.0 {
        return Ok(field.clone());
    }
    let layout = Layout::new(grid);
    let cross = cross_terms(problem);
    let (values, _) = advance(problem, &layout, cfg, &cross, &field.values, field.t);
    GridField::new(grid.clone(), field.t + cfg.dt, values)
}
