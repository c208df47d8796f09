//! Spatially constant sub- and supersolutions.
//!
//! `k̲(t) = e^{−R(t)}(inf U₀ + ∫₀ᵗ e^{R(s)} m(s) ds)` with `R = ∫₀ r` and
//! `m(s) = inf_x (τ − r(s))h(x, s)`, and `k̄(t) = K₀t + c₀`.

use std::fmt::Write as _;

use nalgebra::DVector;

use super::MbsModel;
use crate::error::{precondition, Error, Result};
use crate::quadrature::{adaptive_simpson, grid_maximize, grid_minimize};
use crate::report::{CheckReport, SampleRecord};
use crate::sampling::{par_samples, uniform, uniform_box};

/// Residual tolerance for the barrier inequalities.
pub const RESIDUAL_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct BarrierPair {
    model: MbsModel,
    pub inf_u0: f64,
    pub k0: f64,
    pub c0: f64,
    pub m0: f64,
    pub big_m0: f64,
}

impl BarrierPair {
    /// `m(s) = inf_x (τ − r(s))h(x, s)`, using the sign of `τ − r`.
    pub fn source_inf(&self, s: f64) -> f64 {
        source_inf(&self.model, s)
    }

    /// `k̲(t)` for `t ∈ [0, T]`.
    pub fn lower(&self, t: f64) -> f64 {
        lower_unchecked(&self.model, self.inf_u0, t)
    }

    /// `k̲'(t) = −r(t)k̲(t) + m(t)`
    pub fn lower_prime(&self, t: f64) -> f64 {
        -self.model.r.value(t) * self.lower(t) + self.source_inf(t)
    }

    pub fn upper(&self, t: f64) -> f64 {
        self.k0 * t + self.c0
    }

    pub fn upper_prime(&self, _t: f64) -> f64 {
        self.k0
    }

    /// `ξ + h + k̲ > 0`, equivalently `m₀ > 0`.
    pub fn xi_condition(&self) -> bool {
        self.m0 > 0.0
    }

    /// CSV table `t,k_lower,k_upper` on `n` equally spaced times in `[0, T)`.
    pub fn table_csv(&self, n: usize) -> String {
        let mut out = String::from("t,k_lower,k_upper\n");
        for i in 0..n {
            let t = self.model.big_t * i as f64 / n as f64;
            let _ = writeln!(out, "{t:.16e},{:.16e},{:.16e}", self.lower(t), self.upper(t));
        }
        out
    }
}

fn source_inf(m: &MbsModel, s: f64) -> f64 {
    let c = m.tau - m.r.value(s);
    let (lo, hi) = m.h_range(s);
    if c >= 0.0 {
        c * lo
    } else {
        c * hi
    }
}

fn source_sup(m: &MbsModel, s: f64) -> f64 {
    let c = m.tau - m.r.value(s);
    let (lo, hi) = m.h_range(s);
    if c >= 0.0 {
        c * hi
    } else {
        c * lo
    }
}

fn lower_unchecked(m: &MbsModel, inf_u0: f64, t: f64) -> f64 {
    if t == 0.0 {
        return inf_u0;
    }
    let integral = adaptive_simpson(|s| m.r.integral(s).exp() * source_inf(m, s), 0.0, t, 1e-13)
        .unwrap_or(f64::NAN);
    (-m.r.integral(t)).exp() * (inf_u0 + integral)
}

/// Barrier constants `c₀ = max(sup U₀, sup k̲)`,
/// `K₀ = sup ((τ−r)h − c₀r)⁺/(1 + t·r)`, and the interval
/// `m₀ = inf(k̲ + h + ξ)`, `M₀ = K₀T + c₀ + sup(h + ξ)`.
pub fn compute_barriers(m: &MbsModel) -> Result<BarrierPair> {
    m.check_structure()?;
    let (inf_u0, sup_u0) = m.u0.range();
    let sup_u0 = m.bounds.sup_u0.unwrap_or(sup_u0);
    let big_t = m.big_t;
    let sup_lower = m.time_sup(|t| lower_unchecked(m, inf_u0, t));
    let c0 = sup_u0.max(sup_lower);
    let k0 = m.time_sup(|t| {
        let r = m.r.value(t);
        (source_sup(m, t) - c0 * r).max(0.0) / (1.0 + t * r)
    });
    let (_, m0) = grid_minimize(|t| lower_unchecked(m, inf_u0, t) + m.h_range(t).0 + m.xi.value(t), 0.0, big_t, 1001);
    let (_, sup_hxi) = grid_maximize(|t| m.h_range(t).1 + m.xi.value(t), 0.0, big_t, 1001);
    let big_m0 = k0 * big_t + c0 + sup_hxi;
    for (name, v) in [("c0", c0), ("K0", k0), ("m0", m0), ("M0", big_m0)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("barrier constant {name}")));
        }
    }
    Ok(BarrierPair { model: m.clone(), inf_u0, k0, c0, m0, big_m0 })
}

fn check_time(m: &MbsModel, t: f64) -> Result<()> {
    if (0.0..m.big_t).contains(&t) {
        Ok(())
    } else {
        Err(Error::Domain { what: "t", value: t, lo: 0.0, hi: m.big_t })
    }
}

pub fn lower_barrier(m: &MbsModel, t: f64) -> Result<f64> {
    check_time(m, t)?;
    let (inf_u0, _) = m.u0.range();
    Ok(lower_unchecked(m, inf_u0, t))
}

pub fn upper_barrier(m: &MbsModel, t: f64) -> Result<f64> {
    check_time(m, t)?;
    Ok(compute_barriers(m)?.upper(t))
}

/// Operator residuals of the two barriers at sampled `(x, t)`:
/// `k̲' + r(k̲ + h) − τh ≤ 1e-8` and `k̄' + r(k̄ + h) − τh ≥ −1e-8`.
/// The reported violation is the larger of the sub-residual and the negated
/// super-residual.
pub fn barrier_residuals(m: &MbsModel, n_samples: usize, seed: u64) -> Result<CheckReport> {
    let bp = compute_barriers(m)?;
    if !bp.xi_condition() {
        return Err(precondition(format!("ξ + h + k̲ > 0 fails (m0 = {})", bp.m0)));
    }
    let bx = m.domain_box();
    let items = par_samples(n_samples, seed, |_, rng| {
        let x: DVector<f64> = uniform_box(rng, &bx);
        let t = uniform(rng, 0.0, m.big_t);
        let r = m.r.value(t);
        let h = m.h(&x, t);
        let kl = bp.lower(t);
        let ku = bp.upper(t);
        let sub = bp.lower_prime(t) + r * (kl + h) - m.tau * h;
        let sup = bp.upper_prime(t) + r * (ku + h) - m.tau * h;
        let rec = SampleRecord::new()
            .with("x", x.as_slice().to_vec())
            .with_scalar("t", t)
            .with_scalar("residual_sub", sub)
            .with_scalar("residual_super", sup);
        (sub.max(-sup), rec)
    });
    let mut report = CheckReport::from_samples("barrier_residuals", seed, items);
    report.pass = report.max_violation <= RESIDUAL_TOL;
    Ok(report)
}
