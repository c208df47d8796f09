//! Osgood-type functions Γ on `[0, l]`, divergence scores of `∫ dr/Γ(r)`,
//! the brute-force supremum formula behind the `xlog` entry, and explicit
//! Euler flows of `f' = Γ(f)`.

use std::f64::consts::E;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{config, precondition, Error, Result};
use crate::quadrature::{grid_maximize, try_adaptive_simpson};

const INV_E: f64 = 1.0 / E;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OsgoodTag {
    OsgoodClaimed,
    NonOsgoodClaimed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GammaKind {
    /// `Γ(r) = L·r`
    Linear { rate: f64 },
    /// `Γ(r) = r^γ`
    Power { exponent: f64 },
    /// `r·log(1/r)` on `(0, 1/e)`, then constant `1/e`.
    Xlog,
    /// `θ ↦ Γ(scale·θ)`
    Rescaled { inner: Box<GammaKind>, scale: f64 },
}

impl GammaKind {
    fn eval(&self, h: f64) -> f64 {
        match self {
            GammaKind::Linear { rate } => rate * h,
            GammaKind::Power { exponent } => {
                if h == 0.0 {
                    0.0
                } else {
                    h.powf(*exponent)
                }
            }
            GammaKind::Xlog => {
                if h <= 0.0 {
                    0.0
                } else if h < INV_E {
                    -h * h.ln()
                } else {
                    INV_E
                }
            }
            GammaKind::Rescaled { inner, scale } => inner.eval(scale * h),
        }
    }

    fn label(&self) -> String {
        match self {
            GammaKind::Linear { rate } => format!("linear:{rate}"),
            GammaKind::Power { exponent } => format!("power:{exponent}"),
            GammaKind::Xlog => "xlog".to_string(),
            GammaKind::Rescaled { inner, scale } => format!("{}@{scale}", inner.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OsgoodFunction {
    pub kind: GammaKind,
    pub l: f64,
    pub tag: OsgoodTag,
}

impl OsgoodFunction {
    pub fn linear(rate: f64, l: f64) -> Self {
        Self { kind: GammaKind::Linear { rate }, l, tag: OsgoodTag::OsgoodClaimed }
    }

    pub fn power(exponent: f64, l: f64) -> Self {
        let tag = if exponent >= 1.0 { OsgoodTag::OsgoodClaimed } else { OsgoodTag::NonOsgoodClaimed };
        Self { kind: GammaKind::Power { exponent }, l, tag }
    }

    /// The `xlog` catalog entry on `[0, 1/e + 1/2]`.
    pub fn xlog() -> Self {
        Self { kind: GammaKind::Xlog, l: INV_E + 0.5, tag: OsgoodTag::OsgoodClaimed }
    }

    /// Parse a catalog identifier: `linear:L`, `power:γ` or `xlog`.
    /// Linear and power entries live on `[0, 1]`.
    pub fn parse(id: &str) -> Result<Self> {
        let (name, arg) = match id.split_once(':') {
            Some((n, a)) => (n.trim(), Some(a.trim())),
            None => (id.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| config(format!("Γ identifier `{id}` needs a parameter")))?
                .parse::<f64>()
                .map_err(|e| config(format!("Γ identifier `{id}`: {e}")))
        };
        match name {
            "linear" => {
                let rate = num(arg)?;
                if !(rate > 0.0) {
                    return Err(config(format!("linear Γ needs a positive rate, got {rate}")));
                }
                Ok(Self::linear(rate, 1.0))
            }
            "power" => {
                let g = num(arg)?;
                if !(g > 0.0) {
                    return Err(config(format!("power Γ needs a positive exponent, got {g}")));
                }
                Ok(Self::power(g, 1.0))
            }
            "xlog" if arg.is_none() => Ok(Self::xlog()),
            _ => Err(config(format!("unknown Γ identifier `{id}`"))),
        }
    }

    pub fn label(&self) -> String {
        self.kind.label()
    }

    /// Same function on the shorter domain `[0, l]`.
    pub fn truncated(&self, l: f64) -> Result<Self> {
        if !(l > 0.0 && l <= self.l) {
            return Err(config(format!("cannot truncate Γ on [0, {}] to [0, {l}]", self.l)));
        }
        Ok(Self { l, ..self.clone() })
    }

    /// Same function on a domain extended to `[0, l]`. Only meaningful for
    /// entries defined by a single formula (linear, power).
    pub fn extended(&self, l: f64) -> Self {
        Self { l: l.max(self.l), ..self.clone() }
    }

    /// `Γ₀(θ) = Γ(scale·θ)` on `[0, l/scale]`.
    pub fn rescaled(&self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(config(format!("rescale factor must be positive, got {scale}")));
        }
        Ok(Self {
            kind: GammaKind::Rescaled { inner: Box::new(self.kind.clone()), scale },
            l: self.l / scale,
            tag: self.tag,
        })
    }

    /// Γ(h) without the domain check.
    pub fn eval_unchecked(&self, h: f64) -> f64 {
        self.kind.eval(h)
    }
}

pub fn gamma_eval(gamma: &OsgoodFunction, h: f64) -> Result<f64> {
    if !(0.0..=gamma.l).contains(&h) {
        return Err(Error::Domain { what: "h", value: h, lo: 0.0, hi: gamma.l });
    }
    Ok(gamma.kind.eval(h))
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `sup_{x ∈ [lo, hi]} [ψ(x) − ψ(x+h)]` with `ψ(x) = x·log x`, extended by 0
/// for `x ≤ 0`. Grid search followed by a local ternary refinement.
pub fn sup_formula(h: f64, interval: (f64, f64), n_grid: usize) -> Result<f64> {
    if n_grid < 100 {
        return Err(precondition(format!("sup_formula needs n_grid ≥ 100, got {n_grid}")));
    }
    if !(h >= 0.0) {
        return Err(precondition(format!("sup_formula needs h ≥ 0, got {h}")));
    }
    let (lo, hi) = interval;
    if !(hi > lo) {
        return Err(config(format!("empty interval [{lo}, {hi}]")));
    }
    let phi = |x: f64| xlogx(x) - xlogx(x + h);
    // ψ has kinks at 0 and -h; include them as candidates so the refinement
    // does not have to find them.
    let (_, mut best) = grid_maximize(phi, lo, hi, n_grid);
    for x in [0.0, -h] {
        if (lo..=hi).contains(&x) {
            best = best.max(phi(x));
        }
    }
    Ok(best)
}

/// `∫_ε^l dr/Γ(r)` for each ε, in the order given (which must be decreasing).
/// Computed in `s = log r`, accumulating segment by segment.
pub fn divergence_score(gamma: &OsgoodFunction, eps: &[f64]) -> Result<Vec<f64>> {
    let mut prev = gamma.l;
    for &e in eps {
        if !(e > 0.0 && e < gamma.l) {
            return Err(Error::Domain { what: "eps", value: e, lo: 0.0, hi: gamma.l });
        }
        if e >= prev && prev != gamma.l {
            return Err(config("eps sequence must be strictly decreasing"));
        }
        prev = e;
    }
    let integrand = |s: f64| -> Result<f64> {
        let r = s.exp();
        let g = gamma.kind.eval(r);
        if g <= 0.0 {
            return Err(Error::Division { location: r });
        }
        Ok(r / g)
    };
    let mut out = Vec::with_capacity(eps.len());
    let mut upper = gamma.l.ln();
    let mut acc = 0.0;
    for &e in eps {
        let lower = e.ln();
        acc += try_adaptive_simpson(integrand, lower, upper, 1e-11)?;
        out.push(acc);
        upper = lower;
    }
    Ok(out)
}

/// The ε sequence 10⁻², …, 10⁻¹² used for classification.
pub fn default_eps() -> Vec<f64> {
    (2..=12).map(|k| 10f64.powi(-k)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    OsgoodConsistent,
    NonOsgoodConsistent,
    Inconclusive,
}

/// Heuristic label from a score sequence: "osgood-consistent" iff each of
/// the last two increments exceeds half of the one before it. This is a
/// numerical indication, never a proof of divergence.
pub fn classify(scores: &[f64]) -> Classification {
    if scores.len() < 4 {
        return Classification::Inconclusive;
    }
    let inc: Vec<f64> = scores.windows(2).map(|w| w[1] - w[0]).collect();
    let n = inc.len();
    let growing = |a: f64, b: f64| a > 0.0 && b > 0.5 * a;
    if growing(inc[n - 3], inc[n - 2]) && growing(inc[n - 2], inc[n - 1]) {
        Classification::OsgoodConsistent
    } else {
        Classification::NonOsgoodConsistent
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub step: f64,
    pub saturated: bool,
}

/// Explicit Euler flow `f_{i+1} = f_i + dt·Γ(f_i)` from `f0` over `[0, t_flow]`,
/// clamped at `l`.
pub fn ode_flow(gamma: &OsgoodFunction, f0: f64, t_flow: f64, dt: f64) -> Result<FlowTrajectory> {
    if !(0.0..gamma.l).contains(&f0) {
        return Err(Error::Domain { what: "f0", value: f0, lo: 0.0, hi: gamma.l });
    }
    if !(dt > 0.0 && t_flow > 0.0 && dt <= t_flow) {
        return Err(precondition(format!("need 0 < dt ≤ T_flow, got dt={dt}, T_flow={t_flow}")));
    }
    let n = (t_flow / dt - 1e-9).ceil() as usize;
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut f = f0;
    let mut saturated = false;
    times.push(0.0);
    values.push(f);
    for i in 1..=n {
        f += dt * gamma.kind.eval(f);
        if f > gamma.l {
            f = gamma.l;
            saturated = true;
        }
        times.push(i as f64 * dt);
        values.push(f);
    }
    Ok(FlowTrajectory { times, values, step: dt, saturated })
}

pub fn trajectory_csv(traj: &FlowTrajectory) -> String {
    let mut out = String::from("t,f\n");
    for (t, f) in traj.times.iter().zip(&traj.values) {
        let _ = writeln!(out, "{t:.16e},{f:.16e}");
    }
    out
}

pub fn scores_csv(eps: &[f64], scores: &[f64]) -> String {
    let mut out = String::from("eps,score\n");
    for (e, s) in eps.iter().zip(scores) {
        let _ = writeln!(out, "{e:.16e},{s:.16e}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xlog_values() {
        let g = OsgoodFunction::xlog();
        assert_eq!(gamma_eval(&g, 0.0).unwrap(), 0.0);
        assert!((gamma_eval(&g, INV_E).unwrap() - INV_E).abs() < 1e-15);
        let h = E.powi(-2);
        assert!((gamma_eval(&g, h).unwrap() - 2.0 * h).abs() < 1e-15);
        assert!(matches!(gamma_eval(&g, 0.9), Err(Error::Domain { .. })));
        assert!(matches!(gamma_eval(&g, -1e-3), Err(Error::Domain { .. })));
    }

    #[test]
    fn sup_formula_matches_xlog() {
        let i = (-0.5, INV_E);
        assert_eq!(sup_formula(0.0, i, 1000).unwrap(), 0.0);
        assert!((sup_formula(INV_E, i, 1000).unwrap() - INV_E).abs() < 1e-6);
        let h = E.powi(-2);
        assert!((sup_formula(h, i, 1000).unwrap() - 2.0 * h).abs() < 1e-6);
        assert!(sup_formula(0.1, i, 10).is_err());
    }

    #[test]
    fn linear_scores_are_logs() {
        let g = OsgoodFunction::linear(1.0, 1.0);
        let eps = default_eps();
        let s = divergence_score(&g, &eps).unwrap();
        for (k, v) in (2..=12).zip(&s) {
            let exact = k as f64 * 10f64.ln();
            assert!(((v - exact) / exact).abs() < 1e-6);
        }
        assert_eq!(classify(&s), Classification::OsgoodConsistent);
    }

    #[test]
    fn sqrt_scores_converge() {
        let g = OsgoodFunction::power(0.5, 1.0);
        let s = divergence_score(&g, &default_eps()).unwrap();
        assert!((s.last().unwrap() - 2.0).abs() < 1e-4);
        assert_eq!(classify(&s), Classification::NonOsgoodConsistent);
    }

    #[test]
    fn xlog_scores_match_closed_form() {
        // antiderivative of 1/(r log(1/r)) is -log log(1/r)
        let g = OsgoodFunction::xlog().truncated(INV_E).unwrap();
        let eps = default_eps();
        let s = divergence_score(&g, &eps).unwrap();
        for (e, v) in eps.iter().zip(&s) {
            let exact = (1.0 / e).ln().ln();
            assert!((v - exact).abs() < 1e-8, "{v} vs {exact}");
        }
        assert_eq!(classify(&s), Classification::OsgoodConsistent);
    }

    #[test]
    fn zero_gamma_reports_location() {
        let g = OsgoodFunction::linear(0.0, 1.0);
        let e = divergence_score(&g, &[0.5]).unwrap_err();
        assert!(matches!(e, Error::Division { .. }));
    }

    #[test]
    fn flow_from_zero_stays_zero() {
        for g in [OsgoodFunction::xlog(), OsgoodFunction::linear(3.0, 1.0), OsgoodFunction::power(0.5, 1.0)] {
            let tr = ode_flow(&g, 0.0, 1.0, 1e-3).unwrap();
            assert!(tr.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn xlog_flow_matches_closed_form() {
        // with g = log(1/f): g' = -g, hence f(t) = δ^(e^{-t})
        let d: f64 = 1e-3;
        let tr = ode_flow(&OsgoodFunction::xlog(), d, 1.0, 1e-4).unwrap();
        let f1 = *tr.values.last().unwrap();
        let exact = d.powf((-1.0f64).exp());
        assert!(((f1 - exact) / exact).abs() < 1e-2);
        assert!(!tr.saturated);
    }

    #[test]
    fn sqrt_flow_escapes_zero() {
        let f0 = 1e-12;
        let tr = ode_flow(&OsgoodFunction::power(0.5, 10.0), f0, 1.0, 1e-4).unwrap();
        let exact = (f0.sqrt() + 0.5_f64).powi(2);
        assert!((tr.values.last().unwrap() - exact).abs() < 1e-2);
    }

    #[test]
    fn flow_saturates_at_l() {
        let tr = ode_flow(&OsgoodFunction::linear(10.0, 1.0), 0.5, 1.0, 0.1).unwrap();
        assert!(tr.saturated);
        assert_eq!(*tr.values.last().unwrap(), 1.0);
    }

    #[test]
    fn parse_catalog() {
        assert_eq!(OsgoodFunction::parse("xlog").unwrap(), OsgoodFunction::xlog());
        assert_eq!(OsgoodFunction::parse("linear:2").unwrap().kind, GammaKind::Linear { rate: 2.0 });
        assert_eq!(OsgoodFunction::parse("power:0.5").unwrap().tag, OsgoodTag::NonOsgoodClaimed);
        assert!(OsgoodFunction::parse("cubic").is_err());
    }
}
