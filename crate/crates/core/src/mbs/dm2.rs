//! The positive reformulation `u = U + h + ξ`:
//!
//! `∂t u − ½tr(σσᵀ∇²u) − ⟨μ,∇u⟩ + ρ|σᵀ∇u − σᵀ∇h|²/u + ru + g = 0`,
//!
//! posed on `[m₀, M₀]`, together with constants under which its structural
//! hypotheses hold.

use nalgebra::{DMatrix, DVector};

use super::{compute_barriers, BarrierPair, MbsModel, ModelBounds};
use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSpec;
use crate::osgood::OsgoodFunction;
use crate::report::ModulusFamily;
use crate::transform::{GaugeFunction, GaugeKind};

#[derive(Debug, Clone)]
pub struct TransformedProblem {
    pub hamiltonian: HamiltonianSpec,
    pub barriers: BarrierPair,
    pub model: MbsModel,
}

impl TransformedProblem {
    /// `u₀ = U₀ + h(·, 0) + ξ(0)`
    pub fn initial(&self, x: &DVector<f64>) -> f64 {
        self.model.u0_positive(x)
    }
}

/// Build the reformulated Hamiltonian on `[m₀, M₀]` with margin `m₀/2`.
/// Fails with a model error when `ξ + h + k̲ > 0` does not hold.
pub fn transformed_problem(m: &MbsModel) -> Result<TransformedProblem> {
    let barriers = compute_barriers(m)?;
    if !barriers.xi_condition() {
        return Err(Error::Model(format!(
            "ξ + h + k̲ > 0 fails: inf(k̲ + h + ξ) = {}; positivity of u is not guaranteed",
            barriers.m0
        )));
    }
    let model = m.clone();
    let a = model.diffusion();
    let s = model.sigma_matrix();
    let f = move |x: &DVector<f64>, t: f64, u: f64, p: &DVector<f64>, xm: &DMatrix<f64>| {
        let w = s.transpose() * (p - model.grad_h(x, t));
        Ok(-0.5 * (&a * xm).trace() - model.mu(x).dot(p)
            + model.rho * w.norm_squared() / u
            + model.r.value(t) * u
            + model.g(x, t))
    };
    let hamiltonian = HamiltonianSpec::new("mbs-dm2", m.n, (barriers.m0, barriers.big_m0), 0.5 * barriers.m0, f)
        .with_horizon(m.big_t)
        .with_box(m.domain_box());
    Ok(TransformedProblem { hamiltonian, barriers, model: m.clone() })
}

/// Candidate constants for the structural hypotheses of the reformulated
/// problem at gradient radius `R`.
#[derive(Debug, Clone)]
pub struct Dm2Constants {
    /// Modulus in `|x − y|(|p| + 1)`.
    pub nu2: ModulusFamily,
    /// Modulus in `2ε₃`.
    pub nu2r: ModulusFamily,
    /// Gauge `z = (λ₁u − λ₂)²` on `[m₀, M₀]`.
    pub gauge: GaugeFunction,
    pub lambda1: f64,
    pub lambda2: f64,
    pub c1: f64,
    pub c2: f64,
    /// Linear Γ at rate `ρ((C₂M₀)²/(4λ₂) + C₂)`.
    pub gamma: OsgoodFunction,
    /// `ν̂_R(s) = C₁·s`
    pub nu_hat: ModulusFamily,
    pub bounds: ModelBounds,
}

/// Constants for the reformulated problem with `λ₁ = 1`, `λ₂ = m₀/2`.
///
/// With `ζ(u) = λ₁u − λ₂` and `ζ_m = ζ(m₀)`:
/// * `K₃ = ρ‖w‖²(2λ₁M₀ − λ₂)/(ζ_m m₀)² + (‖r‖λ₂ + ‖g‖λ₁)/ζ_m²` bounds the
///   `u`-Lipschitz constant of the zeroth-order terms after gauging;
/// * `C₂ = max(2‖w‖/m₀², K₃/ρ)`;
/// * `C₁ = ‖σ‖²R(λ₁/(4ζ_m²) + ρ/(2ζ_m m₀)) + ρ‖w‖²/(2ζ_m³m₀) + (‖r‖M₀ + ‖g‖)/(2ζ_m³)`.
///
/// When `ρ = 0` the rate is `K₃` itself.
pub fn dm2_structure_constants(m: &MbsModel, r_radius: f64) -> Result<Dm2Constants> {
    let bp = compute_barriers(m)?;
    if !bp.xi_condition() {
        return Err(Error::Model(format!("ξ + h + k̲ > 0 fails (m0 = {})", bp.m0)));
    }
    let b = m.bounds();
    let (m0, big_m0) = (bp.m0, bp.big_m0);
    let rho = m.rho;
    let sig = b.sigma_norm;
    let w_sup = sig * b.sup_grad_h;

    let nu2 = ModulusFamily::linear(
        b.lip_mu + 2.0 * rho * sig * sig * b.lip_grad_h * (r_radius + b.sup_grad_h) / m0 + b.lip_g,
    );
    let nu2r = ModulusFamily::linear(0.5 * b.sigma_frobenius * b.sigma_frobenius);

    let lambda1 = 1.0;
    let lambda2 = 0.5 * lambda1 * m0;
    let zeta_m = lambda1 * m0 - lambda2;
    let r_sup = b.sup_r.abs().max(m.r.range(m.big_t).0.abs());
    let k3 = rho * w_sup * w_sup * (2.0 * lambda1 * big_m0 - lambda2) / (zeta_m * m0).powi(2)
        + (r_sup * lambda2 + b.sup_g * lambda1) / (zeta_m * zeta_m);
    let (c2, rate) = if rho > 0.0 {
        let c2 = (2.0 * w_sup / (m0 * m0)).max(k3 / rho);
        (c2, rho * ((c2 * big_m0).powi(2) / (4.0 * lambda2) + c2))
    } else {
        (0.0, k3)
    };
    let c1 = sig * sig * r_radius * (lambda1 / (4.0 * zeta_m * zeta_m) + rho / (2.0 * zeta_m * m0))
        + rho * w_sup * w_sup / (2.0 * zeta_m.powi(3) * m0)
        + (r_sup * big_m0 + b.sup_g) / (2.0 * zeta_m.powi(3));

    let gauge = GaugeFunction::new(GaugeKind::AffineSq { lambda1, lambda2 }, m0, big_m0.max(m0 * (1.0 + 1e-12)))?;
    let width = (big_m0 - m0).max(0.0);
    let l = ((gauge.big_lambda0 / gauge.lambda0).sqrt() * width).max(1.0);
    let gamma = OsgoodFunction::linear(rate.max(1e-12), l);
    Ok(Dm2Constants {
        nu2,
        nu2r,
        gauge,
        lambda1,
        lambda2,
        c1,
        c2,
        gamma,
        nu_hat: ModulusFamily::linear(c1),
        bounds: b,
    })
}
