use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mbs::{compute_barriers, BarrierPair, MbsModel};
use crate::transform::{GaugeKind, Transformation};

/// `∂t U = ½tr(a∇²U) + ⟨μ,∇U⟩ − N(x, t, U, ∇U)` with constant `a`.
pub trait Problem: Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn diffusion(&self) -> &DMatrix<f64>;
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `max_i sup |μ_i|`
    fn drift_sup(&self) -> f64;
    fn nonlinearity(&self, x: &DVector<f64>, t: f64, u: f64, p: &DVector<f64>) -> f64;
    fn initial(&self, x: &DVector<f64>) -> f64;
    fn horizon(&self) -> f64;
    /// Values the solution is expected to take; `N` is sampled here.
    fn state_range(&self) -> (f64, f64);
    /// Componentwise gradient bound used when sampling `N`.
    fn gradient_box(&self) -> f64;
    /// True when a positivity clamp inside `N` is active at this state.
    fn guard(&self, _x: &DVector<f64>, _t: f64, _u: f64) -> bool {
        false
    }
    /// Name of the unknown in output files.
    fn variable(&self) -> &str {
        "U"
    }
    /// Barriers for the sandwich check, if the unknown is `U`.
    fn barriers(&self) -> Option<&BarrierPair> {
        None
    }
}

fn require_xi(m: &MbsModel) -> Result<BarrierPair> {
    let bp = compute_barriers(m)?;
    if !bp.xi_condition() {
        return Err(Error::Model(format!("ξ + h + k̲ > 0 fails (m0 = {}); positivity is not guaranteed", bp.m0)));
    }
    Ok(bp)
}

fn barrier_extent(m: &MbsModel, bp: &BarrierPair) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=200 {
        let t = m.big_t * i as f64 / 200.0;
        lo = lo.min(bp.lower(t));
        hi = hi.max(bp.upper(t));
    }
    (lo, hi)
}

/// `P = 2(Lip U₀ + sup|∇h|) + 1`
fn default_gradient_box(m: &MbsModel) -> f64 {
    let b = m.bounds();
    2.0 * (b.lip_u0 + b.sup_grad_h) + 1.0
}

/// The pricing equation in `U` with
/// `N = ρ|σᵀp|²/max(U + h + ξ, m₀/2) + r(U + h) − τh`.
#[derive(Debug, Clone)]
pub struct Dm1Problem {
    pub model: MbsModel,
    pub barriers: BarrierPair,
    a: DMatrix<f64>,
    sigma: DMatrix<f64>,
    floor: f64,
    pub state_range: (f64, f64),
    pub p_box: f64,
}

impl Dm1Problem {
    pub fn new(m: &MbsModel) -> Result<Self> {
        let barriers = require_xi(m)?;
        let state_range = barrier_extent(m, &barriers);
        Ok(Dm1Problem {
            model: m.clone(),
            a: m.diffusion(),
            sigma: m.sigma_matrix(),
            floor: 0.5 * barriers.m0,
            state_range,
            p_box: default_gradient_box(m),
            barriers,
        })
    }

    /// Widen the sampled state set, e.g. to share one scheme between runs
    /// with different initial data.
    pub fn with_bounds(mut self, range: (f64, f64), p_box: f64) -> Self {
        self.state_range = (self.state_range.0.min(range.0), self.state_range.1.max(range.1));
        self.p_box = self.p_box.max(p_box);
        self
    }

    fn positive_part(&self, x: &DVector<f64>, t: f64, u: f64) -> f64 {
        u + self.model.h(x, t) + self.model.xi.value(t)
    }
}

impl Problem for Dm1Problem {
    fn name(&self) -> &str {
        "dm1"
    }

    fn dim(&self) -> usize {
        self.model.n
    }

    fn diffusion(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        self.model.mu(x)
    }

    fn drift_sup(&self) -> f64 {
        self.model.mu.max_abs_component()
    }

    fn nonlinearity(&self, x: &DVector<f64>, t: f64, u: f64, p: &DVector<f64>) -> f64 {
        let m = &self.model;
        let h = m.h(x, t);
        let q = if m.rho == 0.0 {
            0.0
        } else {
            let s = self.sigma.tr_mul(p);
            m.rho * s.norm_squared() / self.positive_part(x, t, u).max(self.floor)
        };
        q + m.r.value(t) * (u + h) - m.tau * h
    }

    fn initial(&self, x: &DVector<f64>) -> f64 {
        self.model.u0(x)
    }

    fn horizon(&self) -> f64 {
        self.model.big_t
    }

    fn state_range(&self) -> (f64, f64) {
        self.state_range
    }

    fn gradient_box(&self) -> f64 {
        self.p_box
    }

    fn guard(&self, x: &DVector<f64>, t: f64, u: f64) -> bool {
        self.model.rho != 0.0 && self.positive_part(x, t, u) < self.floor
    }

    fn barriers(&self) -> Option<&BarrierPair> {
        Some(&self.barriers)
    }
}

/// The positive reformulation in `u = U + h + ξ` with
/// `N = ρ|σᵀp − w|²/max(u, m₀/2) + ru + g`.
#[derive(Debug, Clone)]
pub struct Dm2Problem {
    pub model: MbsModel,
    pub barriers: BarrierPair,
    a: DMatrix<f64>,
    sigma: DMatrix<f64>,
    floor: f64,
    pub p_box: f64,
}

impl Dm2Problem {
    pub fn new(m: &MbsModel) -> Result<Self> {
        let barriers = require_xi(m)?;
        Ok(Dm2Problem {
            model: m.clone(),
            a: m.diffusion(),
            sigma: m.sigma_matrix(),
            floor: 0.5 * barriers.m0,
            p_box: default_gradient_box(m),
            barriers,
        })
    }
}

impl Problem for Dm2Problem {
    fn name(&self) -> &str {
        "dm2"
    }

    fn dim(&self) -> usize {
        self.model.n
    }

    fn diffusion(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        self.model.mu(x)
    }

    fn drift_sup(&self) -> f64 {
        self.model.mu.max_abs_component()
    }

    fn nonlinearity(&self, x: &DVector<f64>, t: f64, u: f64, p: &DVector<f64>) -> f64 {
        let m = &self.model;
        let q = if m.rho == 0.0 {
            0.0
        } else {
            let w = self.sigma.tr_mul(&(p - m.grad_h(x, t)));
            m.rho * w.norm_squared() / u.max(self.floor)
        };
        q + m.r.value(t) * u + m.g(x, t)
    }

    fn initial(&self, x: &DVector<f64>) -> f64 {
        self.model.u0_positive(x)
    }

    fn horizon(&self) -> f64 {
        self.model.big_t
    }

    fn state_range(&self) -> (f64, f64) {
        (self.barriers.m0, self.barriers.big_m0)
    }

    fn gradient_box(&self) -> f64 {
        self.p_box
    }

    fn guard(&self, _x: &DVector<f64>, _t: f64, u: f64) -> bool {
        u < self.floor
    }

    fn variable(&self) -> &str {
        "u"
    }
}

/// Cubic Hermite table for `𝓘` on `[0, Ψ(upper)]`, using `𝓘' = √z(𝓘)`.
#[derive(Debug, Clone)]
struct InverseTable {
    v_max: f64,
    step: f64,
    u: Vec<f64>,
    du: Vec<f64>,
}

impl InverseTable {
    fn new(tr: &Transformation, n: usize) -> Result<Self> {
        let (_, v_max) = tr.range();
        let step = v_max / n as f64;
        let mut u = Vec::with_capacity(n + 1);
        let mut du = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let uk = tr.psi_inverse((k as f64 * step).min(v_max))?;
            u.push(uk);
            du.push(tr.gauge.z(uk).sqrt());
        }
        Ok(InverseTable { v_max, step, u, du })
    }

    fn eval(&self, v: f64) -> f64 {
        let v = v.clamp(0.0, self.v_max);
        let k = ((v / self.step) as usize).min(self.u.len() - 2);
        let s = (v - k as f64 * self.step) / self.step;
        let (s2, s3) = (s * s, s * s * s);
        (2.0 * s3 - 3.0 * s2 + 1.0) * self.u[k]
            + (s3 - 2.0 * s2 + s) * self.step * self.du[k]
            + (-2.0 * s3 + 3.0 * s2) * self.u[k + 1]
            + (s3 - s2) * self.step * self.du[k + 1]
    }
}

/// The reformulated problem written in `v = Ψ(u)`:
/// `N_v = −(𝓘''/(2𝓘'))|σᵀp|² + N_u(𝓘, 𝓘'p)/𝓘'`.
#[derive(Debug, Clone)]
pub struct GaugedProblem {
    pub inner: Dm2Problem,
    pub transformation: Transformation,
    table: InverseTable,
    state_range: (f64, f64),
    p_box: f64,
}

impl GaugedProblem {
    /// Gauge `kind` on `[m₀, M₀]` with margin `m₀/2`.
    pub fn new(m: &MbsModel, kind: GaugeKind) -> Result<Self> {
        let inner = Dm2Problem::new(m)?;
        let (m0, big_m0) = (inner.barriers.m0, inner.barriers.big_m0);
        let tr = Transformation::for_domain(kind, m0, big_m0, 0.5 * m0)?;
        let table = InverseTable::new(&tr, 4096)?;
        let state_range = (tr.psi(m0)?, tr.psi(big_m0)?);
        let min_root = (0..=1000)
            .map(|k| tr.gauge.z(m0 + (big_m0 - m0) * k as f64 / 1000.0).sqrt())
            .fold(f64::INFINITY, f64::min);
        let p_box = inner.p_box / min_root;
        Ok(GaugedProblem { inner, transformation: tr, table, state_range, p_box })
    }

    /// The affine gauge `z = (u − m₀/2)²`.
    pub fn affine(m: &MbsModel) -> Result<Self> {
        let bp = require_xi(m)?;
        Self::new(m, GaugeKind::AffineSq { lambda1: 1.0, lambda2: 0.5 * bp.m0 })
    }

    /// `𝓘(v)`, with `v` clamped to the range of `Ψ`.
    pub fn to_u(&self, v: f64) -> f64 {
        self.table.eval(v)
    }
}

impl Problem for GaugedProblem {
    fn name(&self) -> &str {
        "dm2-gauged"
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn diffusion(&self) -> &DMatrix<f64> {
        self.inner.diffusion()
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        self.inner.drift(x)
    }

    fn drift_sup(&self) -> f64 {
        self.inner.drift_sup()
    }

    fn nonlinearity(&self, x: &DVector<f64>, t: f64, v: f64, p: &DVector<f64>) -> f64 {
        let u = self.table.eval(v);
        let d1 = self.transformation.gauge.z(u).sqrt();
        let d2 = 0.5 * self.transformation.gauge.z_prime(u);
        let s = self.inner.sigma.tr_mul(p);
        -0.5 * d2 / d1 * s.norm_squared() + self.inner.nonlinearity(x, t, u, &(p * d1)) / d1
    }

    fn initial(&self, x: &DVector<f64>) -> f64 {
        let u = self.inner.initial(x);
        self.transformation.psi(u).unwrap_or_else(|_| {
            let (lo, hi) = self.transformation.range();
            if u < self.transformation.base_point {
                lo
            } else {
                hi
            }
        })
    }

    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }

    fn state_range(&self) -> (f64, f64) {
        self.state_range
    }

    fn gradient_box(&self) -> f64 {
        self.p_box
    }

    fn guard(&self, _x: &DVector<f64>, _t: f64, v: f64) -> bool {
        !(0.0..=self.table.v_max).contains(&v)
    }

    fn variable(&self) -> &str {
        "v"
    }
}
