//! Spatial Lipschitz growth of the solution.
//!
//! In the variable `v` with `u = 𝓘(v) = m₀(e^{2v/m₀} + 1)/2` on
//! `[0, V₁]`, `V₁ = (m₀/2)log(2M₀/m₀ − 1)`, the reformulated equation has
//! coefficients
//!
//! * `λ₁(v) = (log(𝓘^ρ/√𝓘'))' = (2ρ/m₀)E/(E+1) − 1/m₀`, `E = e^{2v/m₀}`,
//! * `λ₂(v) = −2ρ/𝓘(v)`,
//! * `w = σᵀ∇h`,
//! * `f = ρ|w|²/(𝓘𝓘') + (g + r𝓘)/𝓘'`,
//!
//! and `|v(x,t) − v(y,t)| ≤ 2M e^{Ct}|x − y|` for `M > Lip(v₀)/2`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{compute_barriers, MbsModel};
use crate::error::{precondition, Error, Result};

/// The constants entering the growth constant `C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityBounds {
    pub lip_mu: f64,
    pub lambda2_prime_sup: f64,
    pub w_sup: f64,
    pub lambda1_prime_min: f64,
    pub lambda2_sup: f64,
    pub sigma_t_norm: f64,
    pub lip_w: f64,
    pub lip_f: f64,
}

/// `C = 2Lip(μ) + ‖λ₂'‖²‖w‖²/(4 min λ₁') + 2‖λ₂‖‖σᵀ‖Lip(w) + Lip(f)(1/(2M) + 1)`.
/// The second term is taken as 0 when its numerator vanishes.
pub fn growth_constant(b: &RegularityBounds, big_m: f64) -> f64 {
    let num = (b.lambda2_prime_sup * b.w_sup).powi(2);
    let second = if num == 0.0 { 0.0 } else { num / (4.0 * b.lambda1_prime_min) };
    2.0 * b.lip_mu + second + 2.0 * b.lambda2_sup * b.sigma_t_norm * b.lip_w + b.lip_f * (1.0 / (2.0 * big_m) + 1.0)
}

#[derive(Debug, Clone)]
pub struct RegularityData {
    model: MbsModel,
    pub m0: f64,
    pub big_m0: f64,
    /// Upper end `V₁` of the working interval.
    pub v_max: f64,
    pub big_m: f64,
    /// Bound on `Lip(v₀)`.
    pub lip_v0: f64,
    pub bounds: RegularityBounds,
    pub c: f64,
    /// `sup |∇h|`, needed to go from `u` back to `U`.
    pub sup_grad_h: f64,
}

impl RegularityData {
    fn e(&self, v: f64) -> f64 {
        (2.0 * v / self.m0).exp()
    }

    /// `(𝓘, 𝓘', 𝓘'')`
    pub fn inverse(&self, v: f64) -> (f64, f64, f64) {
        let e = self.e(v);
        (0.5 * self.m0 * (e + 1.0), e, 2.0 * e / self.m0)
    }

    pub fn lambda1(&self, v: f64) -> f64 {
        let e = self.e(v);
        2.0 * self.model.rho / self.m0 * e / (e + 1.0) - 1.0 / self.m0
    }

    pub fn lambda1_prime(&self, v: f64) -> f64 {
        let e = self.e(v);
        4.0 * self.model.rho / (self.m0 * self.m0) * e / (e + 1.0).powi(2)
    }

    pub fn lambda2(&self, v: f64) -> f64 {
        -2.0 * self.model.rho / self.inverse(v).0
    }

    pub fn w(&self, x: &DVector<f64>, t: f64) -> DVector<f64> {
        self.model.w(x, t)
    }

    pub fn f(&self, x: &DVector<f64>, t: f64, v: f64) -> f64 {
        let (i0, i1, _) = self.inverse(v);
        let m = &self.model;
        m.rho * self.w(x, t).norm_squared() / (i0 * i1) + (m.g(x, t) + m.r.value(t) * i0) / i1
    }
}

/// Regularity data for `M > Lip(v₀)/2`, where `Lip(v₀) ≤ Lip(U₀) + sup|∇h|`
/// because `𝓘' ≥ 1` on the working interval.
pub fn regularity_constant(m: &MbsModel, big_m: f64) -> Result<RegularityData> {
    let bp = compute_barriers(m)?;
    if !bp.xi_condition() {
        return Err(Error::Model(format!("ξ + h + k̲ > 0 fails (m0 = {})", bp.m0)));
    }
    let mb = m.bounds();
    let lip_v0 = mb.lip_u0 + mb.sup_grad_h;
    if !(big_m > 0.5 * lip_v0) {
        return Err(precondition(format!("M = {big_m} must exceed Lip(v0)/2 = {}", 0.5 * lip_v0)));
    }
    let (m0, big_m0) = (bp.m0, bp.big_m0.max(bp.m0));
    let rho = m.rho;
    let e1 = 2.0 * big_m0 / m0 - 1.0;
    let v_max = 0.5 * m0 * e1.ln();

    let w_sup = mb.sigma_norm * mb.sup_grad_h;
    let lip_w = mb.sigma_norm * mb.lip_grad_h;
    let lambda1_prime_min = 4.0 * rho / (m0 * m0) * e1 / (e1 + 1.0).powi(2);
    let lambda2_sup = 2.0 * rho / m0;
    let lambda2_prime_sup = 2.0 * rho / (m0 * m0);

    // x-part: |w|² has Lipschitz constant 2‖w‖Lip(w) and 𝓘𝓘' ≥ m₀, 𝓘' ≥ 1.
    let lip_fx = 2.0 * rho * w_sup * lip_w / m0 + mb.lip_g;
    // v-part: sup of |∂f/∂v| over the working interval.
    let r_sup = mb.sup_r.abs().max(m.r.range(m.big_t).0.abs());
    let lip_fv = (0..=10_000)
        .map(|k| {
            let v = v_max * k as f64 / 10_000.0;
            let e = (2.0 * v / m0).exp();
            let (i0, i1, i2) = (0.5 * m0 * (e + 1.0), e, 2.0 * e / m0);
            rho * w_sup * w_sup * (i1 * i1 + i0 * i2) / (i0 * i1).powi(2)
                + mb.sup_g * i2 / (i1 * i1)
                + r_sup * (1.0 - i0 * i2 / (i1 * i1)).abs()
        })
        .fold(0.0, f64::max);
    let bounds = RegularityBounds {
        lip_mu: mb.lip_mu,
        lambda2_prime_sup,
        w_sup,
        lambda1_prime_min,
        lambda2_sup,
        sigma_t_norm: mb.sigma_norm,
        lip_w,
        lip_f: lip_fx + lip_fv,
    };
    let c = growth_constant(&bounds, big_m);
    Ok(RegularityData {
        model: m.clone(),
        m0,
        big_m0,
        v_max,
        big_m,
        lip_v0,
        bounds,
        c,
        sup_grad_h: mb.sup_grad_h,
    })
}

/// `(2M e^{Ct}, 2M(2M₀/m₀ − 1)e^{Ct})`: the bound in `v` and the bound it
/// implies for `u` through `sup 𝓘' = 2M₀/m₀ − 1`.
pub fn lipschitz_bound(rd: &RegularityData, t: f64) -> (f64, f64) {
    let v_scale = 2.0 * rd.big_m * (rd.c * t).exp();
    (v_scale, v_scale * (2.0 * rd.big_m0 / rd.m0 - 1.0))
}
