//! The pricing model
//!
//! `∂t U − ½tr(σσᵀ∇²U) − ⟨μ,∇U⟩ + ρ|σᵀ∇U|²/(U+h+ξ) + r(U+h) − τh = 0`,
//! its analytic barriers, the positive reformulation in `u = U + h + ξ` and
//! the constants that control its regularity.

mod barriers;
mod dm2;
pub mod forms;
mod regularity;
mod validate;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::quadrature::grid_maximize;
use forms::{DriftForm, SpatialForm, TimeForm, VolForm};

pub use barriers::{barrier_residuals, compute_barriers, lower_barrier, upper_barrier, BarrierPair};
pub use dm2::{dm2_structure_constants, transformed_problem, Dm2Constants, TransformedProblem};
pub use regularity::{growth_constant, lipschitz_bound, regularity_constant, RegularityBounds, RegularityData};
pub use validate::validate_model;

/// Optional declared bounds. When present they replace the analytic values
/// and are themselves checked by [`validate_model`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredBounds {
    pub sup_mu: Option<f64>,
    pub lip_mu: Option<f64>,
    pub sup_h: Option<f64>,
    pub sup_grad_h: Option<f64>,
    pub lip_grad_h: Option<f64>,
    pub sup_u0: Option<f64>,
    pub lip_u0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MbsModel {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub sigma: VolForm,
    pub mu: DriftForm,
    pub r: TimeForm,
    pub xi: TimeForm,
    /// Spatial factor of the cash flow; `h(x, t) = S(x)·e^{−h_decay·t}`.
    pub h: SpatialForm,
    #[serde(default)]
    pub h_decay: f64,
    pub rho: f64,
    pub tau: f64,
    #[serde(rename = "T")]
    pub big_t: f64,
    #[serde(rename = "U0")]
    pub u0: SpatialForm,
    #[serde(default)]
    pub bounds: DeclaredBounds,
    /// Truncated spatial box used for grid scans and sampling.
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub x_box: Option<Vec<(f64, f64)>>,
}

/// Bounds on the model data used by the barrier and regularity formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelBounds {
    pub sup_mu: f64,
    pub lip_mu: f64,
    pub sup_h: f64,
    pub inf_h: f64,
    pub sup_grad_h: f64,
    pub lip_grad_h: f64,
    pub inf_u0: f64,
    pub sup_u0: f64,
    pub lip_u0: f64,
    /// Operator norm of σ.
    pub sigma_norm: f64,
    /// Frobenius norm of σ.
    pub sigma_frobenius: f64,
    pub sup_r: f64,
    pub inf_xi: f64,
    /// `sup |g|` over the box.
    pub sup_g: f64,
    /// Lipschitz constant of `g(·, t)` over the box.
    pub lip_g: f64,
}

impl MbsModel {
    /// A one-dimensional desk-scale model with a Gaussian cash-flow bump.
    pub fn desk() -> Self {
        MbsModel {
            n: 1,
            d: 1,
            sigma: VolForm::Constant { matrix: vec![vec![0.3]] },
            mu: DriftForm::Sine { amplitude: vec![0.1], frequency: vec![1.0] },
            r: TimeForm::Constant { value: 0.03 },
            xi: TimeForm::Exponential { a: 1.0, k: 0.03 },
            h: SpatialForm::Gaussian { amplitude: 0.5, center: vec![0.0], width: 1.0 },
            h_decay: 0.0,
            rho: 0.5,
            tau: 0.06,
            big_t: 1.0,
            u0: SpatialForm::Constant { value: 0.0 },
            bounds: DeclaredBounds::default(),
            x_box: Some(vec![(-4.0, 4.0)]),
        }
    }

    /// Model with `μ = 0`, `σ = I`, `r = 0`, `ξ = 1`, `h = 0`, `U₀ = 0`.
    pub fn zero(n: usize) -> Self {
        let eye: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        MbsModel {
            n,
            d: n,
            sigma: VolForm::Constant { matrix: eye },
            mu: DriftForm::Constant { value: vec![0.0; n] },
            r: TimeForm::Constant { value: 0.0 },
            xi: TimeForm::Constant { value: 1.0 },
            h: SpatialForm::Constant { value: 0.0 },
            h_decay: 0.0,
            rho: 0.5,
            tau: 1.0,
            big_t: 1.0,
            u0: SpatialForm::Constant { value: 0.0 },
            bounds: DeclaredBounds::default(),
            x_box: None,
        }
    }

    /// Linear heat case `∂t U = U''` with `U₀ = cos`: `ρ = 0`, `σ = √2`,
    /// `μ = 0`, `r = 0`, `h = 0`. `ξ ≡ 2` keeps `U + h + ξ` positive.
    pub fn heat() -> Self {
        MbsModel {
            n: 1,
            d: 1,
            sigma: VolForm::Constant { matrix: vec![vec![2f64.sqrt()]] },
            mu: DriftForm::Constant { value: vec![0.0] },
            r: TimeForm::Constant { value: 0.0 },
            xi: TimeForm::Constant { value: 2.0 },
            h: SpatialForm::Constant { value: 0.0 },
            h_decay: 0.0,
            rho: 0.0,
            tau: 1.0,
            big_t: 1.0,
            u0: SpatialForm::Cosine { offset: 0.0, amplitude: 1.0, wavevector: vec![1.0] },
            bounds: DeclaredBounds::default(),
            x_box: Some(vec![(-2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI)]),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: MbsModel = serde_json::from_str(text)?;
        m.check_structure()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    /// Shape and sign checks that make every formula well defined.
    pub fn check_structure(&self) -> Result<()> {
        let (rows, cols) = self.sigma.shape()?;
        if self.n == 0 || self.n > 3 {
            return Err(config(format!("N must be in 1..=3, got {}", self.n)));
        }
        if rows != self.n || cols != self.d || self.d > self.n || self.d == 0 {
            return Err(config(format!("sigma must be N×d with 1 ≤ d ≤ N, got {rows}×{cols} for N={}", self.n)));
        }
        if self.mu.dim() != self.n {
            return Err(config(format!("mu has dimension {}, expected {}", self.mu.dim(), self.n)));
        }
        if let DriftForm::Sine { amplitude, frequency } = &self.mu {
            if amplitude.len() != frequency.len() {
                return Err(config("mu amplitude and frequency lengths differ"));
            }
        }
        for (name, f) in [("h", &self.h), ("U0", &self.u0)] {
            f.validate()?;
            if let Some(k) = f.dim() {
                if k != self.n {
                    return Err(config(format!("{name} is written for dimension {k}, expected {}", self.n)));
                }
            }
        }
        if !(self.big_t > 0.0) {
            return Err(config(format!("T must be positive, got {}", self.big_t)));
        }
        if !(self.rho >= 0.0 && self.tau >= 0.0 && self.h_decay >= 0.0) {
            return Err(config("rho, tau and h_decay must be nonnegative"));
        }
        if let Some(b) = &self.x_box {
            if b.len() != self.n || b.iter().any(|(lo, hi)| !(hi > lo)) {
                return Err(config("box must have N nonempty intervals"));
            }
        }
        Ok(())
    }

    pub fn domain_box(&self) -> Vec<(f64, f64)> {
        self.x_box.clone().unwrap_or_else(|| vec![(-4.0, 4.0); self.n])
    }

    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        self.sigma.matrix()
    }

    /// `σσᵀ`
    pub fn diffusion(&self) -> DMatrix<f64> {
        let s = self.sigma.matrix();
        &s * s.transpose()
    }

    pub fn mu(&self, x: &DVector<f64>) -> DVector<f64> {
        self.mu.value(x)
    }

    fn decay(&self, t: f64) -> f64 {
        (-self.h_decay * t).exp()
    }

    pub fn h(&self, x: &DVector<f64>, t: f64) -> f64 {
        self.h.value(x) * self.decay(t)
    }

    pub fn grad_h(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        self.h.gradient(x) * self.decay(t)
    }

    pub fn hess_h(&self, x: &DVector<f64>, t: f64) -> DMatrix<f64> {
        self.h.hessian(x) * self.decay(t)
    }

    pub fn dt_h(&self, x: &DVector<f64>, t: f64) -> f64 {
        -self.h_decay * self.h(x, t)
    }

    /// `(inf_x h(·,t), sup_x h(·,t))`
    pub fn h_range(&self, t: f64) -> (f64, f64) {
        let (lo, hi) = self.h.range();
        let k = self.decay(t);
        (lo * k, self.bounds.sup_h.unwrap_or(hi) * k)
    }

    /// `w = σᵀ∇h`
    pub fn w(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        self.sigma.matrix().transpose() * self.grad_h(x, t)
    }

    /// Source of the positive reformulation:
    /// `g = −∂t h + ½tr(σσᵀ∇²h) + ⟨μ,∇h⟩ − τh − (ξ' + rξ)`.
    pub fn g(&self, x: &DVector<f64>, t: f64) -> f64 {
        let a = self.diffusion();
        -self.dt_h(x, t) + 0.5 * (a * self.hess_h(x, t)).trace() + self.mu(x).dot(&self.grad_h(x, t))
            - self.tau * self.h(x, t)
            - (self.xi.derivative(t) + self.r.value(t) * self.xi.value(t))
    }

    pub fn u0(&self, x: &DVector<f64>) -> f64 {
        self.u0.value(x)
    }

    /// Initial datum of the positive reformulation, `U₀ + h(·,0) + ξ(0)`.
    pub fn u0_positive(&self, x: &DVector<f64>) -> f64 {
        self.u0(x) + self.h(x, 0.0) + self.xi.value(0.0)
    }

    /// Tensor grid over the box with `per_dim` points per axis.
    pub(crate) fn box_grid(&self, per_dim: usize) -> Vec<DVector<f64>> {
        let b = self.domain_box();
        let mut pts = vec![DVector::zeros(self.n)];
        for (k, &(lo, hi)) in b.iter().enumerate() {
            let mut next = Vec::with_capacity(pts.len() * per_dim);
            for p in &pts {
                for i in 0..per_dim {
                    let mut q = p.clone();
                    q[k] = lo + (hi - lo) * i as f64 / (per_dim - 1) as f64;
                    next.push(q);
                }
            }
            pts = next;
        }
        pts
    }

    fn scan_per_dim(&self) -> usize {
        match self.n {
            1 => 2001,
            2 => 151,
            _ => 41,
        }
    }

    /// Bounds used by the constant formulas. Quantities without a closed form
    /// (`sup |g|`, `Lip g`) come from a grid scan over the box at 21 times,
    /// with a 5% safety factor on the Lipschitz estimate.
    pub fn bounds(&self) -> ModelBounds {
        let b = &self.bounds;
        let (inf_h, sup_h) = self.h.range();
        let (inf_u0, sup_u0) = self.u0.range();
        let s = self.sigma.matrix();
        let sigma_norm = if s.is_empty() { 0.0 } else { s.clone().svd(false, false).singular_values.max() };
        let (_, sup_r) = self.r.range(self.big_t);
        let (inf_xi, _) = self.xi.range(self.big_t);

        let pts = self.box_grid(self.scan_per_dim());
        let mut sup_g = 0.0_f64;
        let mut lip_g = 0.0_f64;
        let step = 1e-5;
        for k in 0..=20 {
            let t = self.big_t * k as f64 / 20.0;
            for x in &pts {
                sup_g = sup_g.max(self.g(x, t).abs());
                let mut grad2 = 0.0;
                for i in 0..self.n {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    grad2 += ((self.g(&xp, t) - self.g(&xm, t)) / (2.0 * step)).powi(2);
                }
                lip_g = lip_g.max(grad2.sqrt());
            }
        }
        ModelBounds {
            sup_mu: b.sup_mu.unwrap_or_else(|| self.mu.sup_norm()),
            lip_mu: b.lip_mu.unwrap_or_else(|| self.mu.lipschitz()),
            sup_h: b.sup_h.unwrap_or(sup_h),
            inf_h,
            sup_grad_h: b.sup_grad_h.unwrap_or_else(|| self.h.gradient_sup()),
            lip_grad_h: b.lip_grad_h.unwrap_or_else(|| self.h.hessian_sup()),
            inf_u0,
            sup_u0: b.sup_u0.unwrap_or(sup_u0),
            lip_u0: b.lip_u0.unwrap_or_else(|| self.u0.gradient_sup()),
            sigma_norm,
            sigma_frobenius: s.norm(),
            sup_r,
            inf_xi,
            sup_g,
            lip_g: 1.05 * lip_g,
        }
    }

    /// `sup_t` of a scalar function of time on `[0, T]`.
    pub(crate) fn time_sup<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        grid_maximize(f, 0.0, self.big_t, 1001).1
    }
}
