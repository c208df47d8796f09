use std::f64::consts::E;

use super::HamiltonianSpec;
use crate::error::{config, Result};
use crate::mbs::{transformed_problem, MbsModel};

/// Scalar reparametrizations `u = Φ(v)` used to compose Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reparametrization {
    Log,
    Arctan,
}

impl Reparametrization {
    pub fn value(&self, v: f64) -> f64 {
        match self {
            Reparametrization::Log => v.ln(),
            Reparametrization::Arctan => v.atan(),
        }
    }

    pub fn d1(&self, v: f64) -> f64 {
        match self {
            Reparametrization::Log => 1.0 / v,
            Reparametrization::Arctan => 1.0 / (1.0 + v * v),
        }
    }

    pub fn d2(&self, v: f64) -> f64 {
        match self {
            Reparametrization::Log => -1.0 / (v * v),
            Reparametrization::Arctan => -2.0 * v / (1.0 + v * v).powi(2),
        }
    }
}

fn phi_example1(u: f64) -> f64 {
    if u > 0.0 {
        (u * u + u) * u.ln()
    } else {
        0.0
    }
}

/// `g(p) = sign(p)·log(1 + |p|)`
pub(crate) fn signed_log1p(p: f64) -> f64 {
    p.signum() * p.abs().ln_1p()
}

impl HamiltonianSpec {
    /// `−tr(X) + |p|²/(u+1) + φ(u)` with `φ(u) = (u²+u)·log u` for `u > 0`
    /// and 0 otherwise, on `[−1/2, 1/e]` with margin `1/4`.
    pub fn example1() -> Self {
        HamiltonianSpec::new("example1", 1, (-0.5, 1.0 / E), 0.25, |_x, _t, u, p, m| {
            Ok(-m.trace() + p.norm_squared() / (u + 1.0) + phi_example1(u))
        })
    }

    /// `−(X − |p|^γ)` in one dimension.
    pub fn example2_power(gamma: f64) -> Self {
        HamiltonianSpec::new("example2-power", 1, (-10.0, 10.0), 1.0, move |_x, _t, _u, p, m| {
            Ok(-(m[(0, 0)] - p[0].abs().powf(gamma)))
        })
    }

    /// `−(X + g(p))` with `g(p) = sign(p)·log(1+|p|)` in one dimension.
    pub fn example2_log() -> Self {
        HamiltonianSpec::new("example2-log", 1, (-10.0, 10.0), 1.0, |_x, _t, _u, p, m| {
            Ok(-(m[(0, 0)] + signed_log1p(p[0])))
        })
    }

    /// `−tr(X)`
    pub fn neg_trace(n: usize) -> Self {
        HamiltonianSpec::new("neg-trace", n, (-1.0, 1.0), 0.5, |_x, _t, _u, _p, m| Ok(-m.trace()))
    }

    /// `+tr(X)`, which is not degenerate elliptic.
    pub fn pos_trace(n: usize) -> Self {
        HamiltonianSpec::new("pos-trace", n, (-1.0, 1.0), 0.5, |_x, _t, _u, _p, m| Ok(m.trace()))
    }

    /// `−tr(X) + |p|²`
    pub fn neg_trace_plus_sq(n: usize) -> Self {
        HamiltonianSpec::new("neg-trace-plus-sq", n, (-1.0, 1.0), 0.5, |_x, _t, _u, p, m| {
            Ok(-m.trace() + p.norm_squared())
        })
    }
}

/// Fixture lookup by identifier: `example1`, `example2-power[:γ]` (γ = 1/2
/// by default), `example2-log`, `mbs-dm2` (the desk model), `neg-trace:N`,
/// `pos-trace:N`.
pub fn fixture(id: &str) -> Result<HamiltonianSpec> {
    let (name, arg) = match id.split_once(':') {
        Some((n, a)) => (n, Some(a)),
        None => (id, None),
    };
    let num = |a: Option<&str>, default: f64| -> Result<f64> {
        match a {
            None => Ok(default),
            Some(s) => s.trim().parse().map_err(|e| config(format!("fixture `{id}`: {e}"))),
        }
    };
    match name {
        "example1" => Ok(HamiltonianSpec::example1()),
        "example2-power" => Ok(HamiltonianSpec::example2_power(num(arg, 0.5)?)),
        "example2-log" => Ok(HamiltonianSpec::example2_log()),
        "mbs-dm2" => Ok(transformed_problem(&MbsModel::desk())?.hamiltonian),
        "neg-trace" => Ok(HamiltonianSpec::neg_trace(num(arg, 1.0)? as usize)),
        "pos-trace" => Ok(HamiltonianSpec::pos_trace(num(arg, 1.0)? as usize)),
        _ => Err(config(format!("unknown fixture `{id}`"))),
    }
}
