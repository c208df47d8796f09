//! Evaluatable Hamiltonians `F(x, t, u, p, X)` for `∂t u + F(x,t,u,∇u,∇²u) = 0`,
//! their gauge transforms, fixtures and sampled structural checks.

mod checks;
mod fixtures;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{config, Error, Result};
use crate::transform::{GaugeFunction, Transformation};

pub use checks::{
    check_degenerate_ellipticity, check_gradient_modulus, check_osgood_structure_cp7, check_structure_cp6,
    check_structure_cp6_with,
};
pub use fixtures::{fixture, Reparametrization};

pub type HamFn = dyn Fn(&DVector<f64>, f64, f64, &DVector<f64>, &DMatrix<f64>) -> Result<f64> + Send + Sync;

/// A Hamiltonian with its declared domain. Evaluation accepts
/// `u ∈ [a − ε₀, b + ε₀]` and `t ∈ [0, horizon)`; `x_box` is where checkers
/// draw spatial points.
#[derive(Clone)]
pub struct HamiltonianSpec {
    pub name: String,
    pub dim: usize,
    pub a: f64,
    pub b: f64,
    pub eps0: f64,
    pub horizon: f64,
    pub x_box: Vec<(f64, f64)>,
    f: Arc<HamFn>,
}

impl fmt::Debug for HamiltonianSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("a", &self.a)
            .field("b", &self.b)
            .field("eps0", &self.eps0)
            .field("horizon", &self.horizon)
            .finish_non_exhaustive()
    }
}

impl HamiltonianSpec {
    pub fn new<F>(name: &str, dim: usize, (a, b): (f64, f64), eps0: f64, f: F) -> Self
    where
        F: Fn(&DVector<f64>, f64, f64, &DVector<f64>, &DMatrix<f64>) -> Result<f64> + Send + Sync + 'static,
    {
        Self {
            name: name.to_string(),
            dim,
            a,
            b,
            eps0,
            horizon: 1.0,
            x_box: vec![(-1.0, 1.0); dim],
            f: Arc::new(f),
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_box(mut self, x_box: Vec<(f64, f64)>) -> Self {
        self.x_box = x_box;
        self
    }

    /// Closed evaluation interval `[a − ε₀, b + ε₀]`.
    pub fn eval_domain(&self) -> (f64, f64) {
        (self.a - self.eps0, self.b + self.eps0)
    }

    pub fn eval(&self, x: &DVector<f64>, t: f64, u: f64, p: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
        let (lo, hi) = self.eval_domain();
        if !(lo..=hi).contains(&u) {
            return Err(Error::Domain { what: "u", value: u, lo, hi });
        }
        if !(0.0..self.horizon).contains(&t) {
            return Err(Error::Domain { what: "t", value: t, lo: 0.0, hi: self.horizon });
        }
        if x.len() != self.dim || p.len() != self.dim || m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(config(format!("{}: argument dimensions do not match N = {}", self.name, self.dim)));
        }
        let asym = (m - m.transpose()).amax();
        if asym > 1e-12 * (1.0 + m.amax()) {
            return Err(config(format!("{}: X is not symmetric (asymmetry {asym:e})", self.name)));
        }
        self.eval_unchecked(x, t, u, p, m)
    }

    /// Evaluate without argument checks; non-finite results are still errors.
    pub fn eval_unchecked(
        &self,
        x: &DVector<f64>,
        t: f64,
        u: f64,
        p: &DVector<f64>,
        m: &DMatrix<f64>,
    ) -> Result<f64> {
        let v = (self.f)(x, t, u, p, m)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!("{} at u = {u}", self.name)))
        }
    }
}

/// Free-function form of [`HamiltonianSpec::eval`].
pub fn eval_hamiltonian(
    h: &HamiltonianSpec,
    x: &DVector<f64>,
    t: f64,
    u: f64,
    p: &DVector<f64>,
    m: &DMatrix<f64>,
) -> Result<f64> {
    h.eval(x, t, u, p, m)
}

/// `F̃(v, p, X) = F(𝓘, 𝓘'p, 𝓘'X + 𝓘'' p⊗p) / 𝓘'`, posed on `v ∈ Ψ([base, upper])`.
///
/// The transformation must satisfy `a − ε₀ ≤ base ≤ a` and `b ≤ upper ≤ b + ε₀`.
pub fn transform_hamiltonian(h: &HamiltonianSpec, tr: &Transformation) -> Result<HamiltonianSpec> {
    let (lo, hi) = h.eval_domain();
    if !(tr.base_point >= lo && tr.base_point <= h.a && tr.upper <= hi && tr.upper >= h.b) {
        return Err(config(format!(
            "transformation on [{}, {}] does not match the domain [{}, {}] with margin {}",
            tr.base_point, tr.upper, h.a, h.b, h.eps0
        )));
    }
    let inner = h.clone();
    let t = tr.clone();
    let (v0, v1) = tr.range();
    let f = move |x: &DVector<f64>, time: f64, v: f64, p: &DVector<f64>, m: &DMatrix<f64>| {
        let u = t.psi_inverse(v)?;
        let (d1, d2) = t.derivatives_at_u(u);
        let pp = p * p.transpose();
        Ok(inner.eval_unchecked(x, time, u, &(p * d1), &(m * d1 + pp * d2))? / d1)
    };
    Ok(HamiltonianSpec {
        name: format!("{}~{:?}", h.name, tr.gauge.kind),
        dim: h.dim,
        a: v0,
        b: v1,
        eps0: 0.0,
        horizon: h.horizon,
        x_box: h.x_box.clone(),
        f: Arc::new(f),
    })
}

/// `F_z(u, p, X) = F(u, √z p, √z X + z'/2 p⊗p) / √z`, on the same domain.
/// This is `F̃` written at `u = 𝓘(v)`.
pub fn local_gauge(h: &HamiltonianSpec, gauge: &GaugeFunction) -> Result<HamiltonianSpec> {
    let (lo, hi) = h.eval_domain();
    if !gauge.covers(lo, hi) {
        return Err(config(format!(
            "gauge domain [{}, {}] does not cover [{lo}, {hi}]",
            gauge.domain.0, gauge.domain.1
        )));
    }
    let inner = h.clone();
    let g = *gauge;
    let f = move |x: &DVector<f64>, t: f64, u: f64, p: &DVector<f64>, m: &DMatrix<f64>| {
        let s = g.z(u).sqrt();
        let k = 0.5 * g.z_prime(u);
        let pp = p * p.transpose();
        Ok(inner.eval_unchecked(x, t, u, &(p * s), &(m * s + pp * k))? / s)
    };
    Ok(HamiltonianSpec { name: format!("{}_z", h.name), f: Arc::new(f), ..h.clone() })
}

/// `F_Φ(v, q, Y) = F(Φ(v), Φ'q, Φ'Y + Φ'' q⊗q) / Φ'` on `v ∈ [c, d]`.
pub fn compose(h: &HamiltonianSpec, phi: Reparametrization, (c, d): (f64, f64), eps0: f64) -> Result<HamiltonianSpec> {
    let (lo, hi) = h.eval_domain();
    for v in [c - eps0, d + eps0] {
        let u = phi.value(v);
        if !(u.is_finite() && (lo..=hi).contains(&u)) || !(phi.d1(v) > 0.0) {
            return Err(config(format!("{phi:?} maps v = {v} outside the domain [{lo}, {hi}]")));
        }
    }
    let inner = h.clone();
    let f = move |x: &DVector<f64>, t: f64, v: f64, q: &DVector<f64>, m: &DMatrix<f64>| {
        let d1 = phi.d1(v);
        let d2 = phi.d2(v);
        let qq = q * q.transpose();
        Ok(inner.eval_unchecked(x, t, phi.value(v), &(q * d1), &(m * d1 + qq * d2))? / d1)
    };
    Ok(HamiltonianSpec {
        name: format!("{}∘{phi:?}", h.name),
        a: c,
        b: d,
        eps0,
        f: Arc::new(f),
        ..h.clone()
    })
}
