//! Gauge functions `z > 0` and the change of variable
//! `Ψ(u) = ∫_{base}^{u} dτ / √z(τ)` with its inverse `𝓘`.
//!
//! Derivatives of the inverse follow from the gauge alone:
//! `𝓘'(v) = √z(𝓘(v))` and `𝓘''(v) = z'(𝓘(v)) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::quadrature::{adaptive_simpson, grid_maximize, grid_minimize};

const TABLE_SIZE: usize = 512;
const PSI_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GaugeKind {
    /// `z ≡ 1`
    Unit,
    /// `z = (λ₁u − λ₂)²`
    AffineSq { lambda1: f64, lambda2: f64 },
    /// `z = (u + 1)²`
    ShiftSq,
    /// `z = e^{−2u}`
    Exp,
    /// `z = (2u/m₀ − 1)²`, whose inverse from base `m₀` is
    /// `𝓘(v) = m₀(e^{2v/m₀} + 1)/2`.
    MbsExp { m0: f64, big_m0: f64 },
    /// `z = (u²+1)²(β − ½ arctan²u)²`, needs `8β > π²`.
    Arctan { beta: f64 },
}

impl GaugeKind {
    /// Parse `unit`, `affine-sq:λ1,λ2`, `shift-sq`, `exp`, `mbs-exp:m0,M0`
    /// or `arctan:β`.
    pub fn parse(id: &str) -> Result<Self> {
        let (name, args) = match id.split_once(':') {
            Some((n, a)) => (n.trim(), a.trim()),
            None => (id.trim(), ""),
        };
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| config(format!("gauge `{id}`: {e}"))))
                .collect::<Result<_>>()?
        };
        let want = |n: usize| -> Result<()> {
            if nums.len() == n {
                Ok(())
            } else {
                Err(config(format!("gauge `{id}` expects {n} parameter(s), got {}", nums.len())))
            }
        };
        let kind = match name {
            "unit" => {
                want(0)?;
                GaugeKind::Unit
            }
            "affine-sq" => {
                want(2)?;
                GaugeKind::AffineSq { lambda1: nums[0], lambda2: nums[1] }
            }
            "shift-sq" => {
                want(0)?;
                GaugeKind::ShiftSq
            }
            "exp" => {
                want(0)?;
                GaugeKind::Exp
            }
            "mbs-exp" => {
                want(2)?;
                GaugeKind::MbsExp { m0: nums[0], big_m0: nums[1] }
            }
            "arctan" => {
                want(1)?;
                GaugeKind::Arctan { beta: nums[0] }
            }
            _ => return Err(config(format!("unknown gauge `{id}`"))),
        };
        kind.validate()?;
        Ok(kind)
    }

    fn validate(&self) -> Result<()> {
        match *self {
            GaugeKind::MbsExp { m0, big_m0 } if !(m0 > 0.0 && big_m0 > m0) => {
                Err(config(format!("mbs-exp gauge needs 0 < m0 < M0, got m0={m0}, M0={big_m0}")))
            }
            GaugeKind::Arctan { beta } if !(8.0 * beta > std::f64::consts::PI.powi(2)) => {
                Err(config(format!("arctan gauge needs 8β > π², got β={beta}")))
            }
            GaugeKind::AffineSq { lambda1, lambda2 } if !(lambda1.is_finite() && lambda2.is_finite()) => {
                Err(config("affine-sq gauge parameters must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn z(&self, u: f64) -> f64 {
        match *self {
            GaugeKind::Unit => 1.0,
            GaugeKind::AffineSq { lambda1, lambda2 } => (lambda1 * u - lambda2).powi(2),
            GaugeKind::ShiftSq => (u + 1.0).powi(2),
            GaugeKind::Exp => (-2.0 * u).exp(),
            GaugeKind::MbsExp { m0, .. } => (2.0 * u / m0 - 1.0).powi(2),
            GaugeKind::Arctan { beta } => {
                let w = beta - 0.5 * u.atan().powi(2);
                ((u * u + 1.0) * w).powi(2)
            }
        }
    }

    pub fn z_prime(&self, u: f64) -> f64 {
        match *self {
            GaugeKind::Unit => 0.0,
            GaugeKind::AffineSq { lambda1, lambda2 } => 2.0 * lambda1 * (lambda1 * u - lambda2),
            GaugeKind::ShiftSq => 2.0 * (u + 1.0),
            GaugeKind::Exp => -2.0 * (-2.0 * u).exp(),
            GaugeKind::MbsExp { m0, .. } => 4.0 / m0 * (2.0 * u / m0 - 1.0),
            GaugeKind::Arctan { beta } => {
                let a = u.atan();
                let w = beta - 0.5 * a * a;
                2.0 * (u * u + 1.0) * w * (2.0 * u * w - a)
            }
        }
    }

    /// Natural working interval, when the gauge carries one.
    pub fn default_domain(&self) -> Option<(f64, f64)> {
        match *self {
            GaugeKind::MbsExp { m0, big_m0 } => Some((m0, big_m0)),
            _ => None,
        }
    }
}

/// A gauge together with the interval `[a, b]` on which it is used and its
/// bounds `z([a, b]) ⊂ [λ₀, Λ₀]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeFunction {
    pub kind: GaugeKind,
    pub domain: (f64, f64),
    pub lambda0: f64,
    #[serde(rename = "Lambda0")]
    pub big_lambda0: f64,
}

impl GaugeFunction {
    /// Fails when `z` is not bounded below by a positive constant on `[a, b]`.
    pub fn new(kind: GaugeKind, a: f64, b: f64) -> Result<Self> {
        kind.validate()?;
        if !(b > a) {
            return Err(config(format!("gauge domain [{a}, {b}] is empty")));
        }
        let (_, lo) = grid_minimize(|u| kind.z(u), a, b, 2001);
        let (_, hi) = grid_maximize(|u| kind.z(u), a, b, 2001);
        let lo = lo.min(kind.z(a)).min(kind.z(b));
        let hi = hi.max(kind.z(a)).max(kind.z(b));
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(config(format!("gauge {kind:?} is not positive on [{a}, {b}] (min z = {lo})")));
        }
        Ok(Self { kind, domain: (a, b), lambda0: lo, big_lambda0: hi })
    }

    pub fn parse(id: &str, a: f64, b: f64) -> Result<Self> {
        Self::new(GaugeKind::parse(id)?, a, b)
    }

    pub fn z(&self, u: f64) -> f64 {
        self.kind.z(u)
    }

    pub fn z_prime(&self, u: f64) -> f64 {
        self.kind.z_prime(u)
    }

    pub fn covers(&self, lo: f64, hi: f64) -> bool {
        self.domain.0 <= lo && hi <= self.domain.1
    }
}

/// `Ψ` and `𝓘` for a gauge on `[base, hi]`, with a cumulative table used to
/// bracket inversions.
#[derive(Debug, Clone)]
pub struct Transformation {
    pub gauge: GaugeFunction,
    pub base_point: f64,
    pub upper: f64,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Transformation {
    /// Transformation on `[base, upper]`; the gauge must be positive there.
    pub fn new(gauge: GaugeFunction, base: f64, upper: f64) -> Result<Self> {
        if !gauge.covers(base, upper) {
            return Err(config(format!(
                "gauge domain [{}, {}] does not cover [{base}, {upper}]",
                gauge.domain.0, gauge.domain.1
            )));
        }
        let step = (upper - base) / TABLE_SIZE as f64;
        let nodes: Vec<f64> =
            (0..=TABLE_SIZE).map(|i| if i == TABLE_SIZE { upper } else { base + step * i as f64 }).collect();
        let mut cumulative = Vec::with_capacity(nodes.len());
        cumulative.push(0.0);
        let mut acc = 0.0;
        for w in nodes.windows(2) {
            acc += adaptive_simpson(|t| 1.0 / gauge.z(t).sqrt(), w[0], w[1], PSI_TOL)?;
            cumulative.push(acc);
        }
        Ok(Self { gauge, base_point: base, upper, nodes, cumulative })
    }

    /// The transformation used for a Hamiltonian on `[a, b]` with margin
    /// `ε₀`: base point `a − ε₀/2`, upper end `b + ε₀/2`.
    pub fn for_domain(kind: GaugeKind, a: f64, b: f64, eps0: f64) -> Result<Self> {
        let lo = a - 0.5 * eps0;
        let hi = b + 0.5 * eps0;
        Self::new(GaugeFunction::new(kind, lo, hi)?, lo, hi)
    }

    /// `Ψ` on `[base, upper]`.
    pub fn psi(&self, u: f64) -> Result<f64> {
        if !(self.base_point..=self.upper).contains(&u) {
            return Err(Error::Domain { what: "u", value: u, lo: self.base_point, hi: self.upper });
        }
        Ok(self.psi_unchecked(u))
    }

    fn psi_unchecked(&self, u: f64) -> f64 {
        let i = self.bracket(&self.nodes, u);
        let partial = adaptive_simpson(|t| 1.0 / self.gauge.z(t).sqrt(), self.nodes[i], u, PSI_TOL)
            .unwrap_or(f64::NAN);
        self.cumulative[i] + partial
    }

    /// Index `i` with `table[i] ≤ x`, clamped to the last segment.
    fn bracket(&self, table: &[f64], x: f64) -> usize {
        let i = table.partition_point(|&t| t <= x);
        i.saturating_sub(1).min(table.len() - 2)
    }

    /// Range of `Ψ`, i.e. `[0, Ψ(upper)]`.
    pub fn range(&self) -> (f64, f64) {
        (0.0, *self.cumulative.last().expect("table is non-empty"))
    }

    /// `𝓘(v)`: table bracketing, then Newton steps kept inside the bracket by
    /// bisection.
    pub fn psi_inverse(&self, v: f64) -> Result<f64> {
        let (lo_v, hi_v) = self.range();
        // a few ulps of slack so that grid endpoints computed in floating
        // point are accepted
        let slack = 4.0 * f64::EPSILON * (1.0 + hi_v);
        if !(v >= lo_v - slack && v <= hi_v + slack) {
            return Err(Error::Range { what: "v", value: v, lo: lo_v, hi: hi_v });
        }
        let v = v.clamp(lo_v, hi_v);
        let i = self.bracket(&self.cumulative, v);
        let (mut a, mut b) = (self.nodes[i], self.nodes[i + 1]);
        let (c0, c1) = (self.cumulative[i], self.cumulative[i + 1]);
        // linear interpolation inside the bracket as the starting point
        let mut u = if c1 > c0 { a + (b - a) * (v - c0) / (c1 - c0) } else { a };
        for _ in 0..100 {
            let r = self.cumulative[i]
                + adaptive_simpson(|t| 1.0 / self.gauge.z(t).sqrt(), self.nodes[i], u, PSI_TOL)?
                - v;
            if r.abs() <= 1e-13 {
                break;
            }
            if r > 0.0 {
                b = u;
            } else {
                a = u;
            }
            let newton = u - r * self.gauge.z(u).sqrt();
            u = if newton > a && newton < b { newton } else { 0.5 * (a + b) };
            if b - a <= 1e-15 * (1.0 + u.abs()) {
                break;
            }
        }
        Ok(u)
    }

    /// `(𝓘'(v), 𝓘''(v)) = (√z(𝓘(v)), z'(𝓘(v))/2)`.
    pub fn inverse_derivatives(&self, v: f64) -> Result<(f64, f64)> {
        let u = self.psi_inverse(v)?;
        Ok(self.derivatives_at_u(u))
    }

    /// `(√z(u), z'(u)/2)`, the inverse derivatives expressed at `u = 𝓘(v)`.
    pub fn derivatives_at_u(&self, u: f64) -> (f64, f64) {
        (self.gauge.z(u).sqrt(), 0.5 * self.gauge.z_prime(u))
    }
}
