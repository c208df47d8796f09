//! Sampled verification of the model assumptions.

use nalgebra::DVector;

use super::{compute_barriers, MbsModel};
use crate::report::{CheckReport, SampleRecord, PASS_THRESHOLD};
use crate::sampling::{par_samples, uniform, uniform_box};

const NAMES: [&str; 5] = ["P1", "P2", "P3", "dt_h", "XI"];

/// Checks each assumption at `n_samples` random `(x, y, t, s)` and lists the
/// failing ones by name:
///
/// * `P1`: `|μ| ≤ sup μ` and `|μ(x) − μ(y)| ≤ Lip(μ)|x − y|`;
/// * `P2`: `0 ≤ h ≤ sup h`, `|∇h| ≤ sup |∇h|`, `ξ > 0`;
/// * `P3`: `0 ≤ U₀ ≤ sup U₀` and `|U₀(x) − U₀(y)| ≤ Lip(U₀)|x − y|`;
/// * `dt_h`: `|h(x,t) − h(x,s)| ≤ κ sup h |t − s|`;
/// * `XI`: `ξ(t) + h(x,t) + k̲(t) > 0`.
///
/// Violations are relative to `1 + bound`. Structural errors in the model are
/// reported as a failed `structure` entry.
pub fn validate_model(m: &MbsModel, n_samples: usize, seed: u64) -> CheckReport {
    let mut report = CheckReport::new("validate_model", seed);
    if let Err(e) = m.check_structure() {
        report.fail("structure");
        report.note(e.to_string());
        return report;
    }
    let barriers = match compute_barriers(m) {
        Ok(b) => b,
        Err(e) => {
            report.fail("structure");
            report.note(e.to_string());
            return report;
        }
    };
    let b = m.bounds();
    if m.x_box.is_none() {
        report.note("sup/inf taken over the default box [-4, 4]^N");
    }
    let bx = m.domain_box();
    let big_t = m.big_t;
    let rel = |v: f64, bound: f64| (v - bound) / (1.0 + bound.abs());

    let items = par_samples(n_samples, seed, |_, rng| {
        let x: DVector<f64> = uniform_box(rng, &bx);
        let y: DVector<f64> = uniform_box(rng, &bx);
        let t = uniform(rng, 0.0, big_t);
        let s = uniform(rng, 0.0, big_t);
        let dxy = (&x - &y).norm();

        let p1 = rel(m.mu(&x).norm(), b.sup_mu).max(rel((m.mu(&x) - m.mu(&y)).norm(), b.lip_mu * dxy));
        let hx = m.h(&x, t);
        let p2 = (-hx)
            .max(rel(hx, b.sup_h))
            .max(rel(m.grad_h(&x, t).norm(), b.sup_grad_h))
            .max(if m.xi.value(t) > 0.0 { f64::NEG_INFINITY } else { 1.0 });
        let u0x = m.u0(&x);
        let p3 = (-u0x)
            .max(rel(u0x, b.sup_u0))
            .max(rel((u0x - m.u0(&y)).abs(), b.lip_u0 * dxy));
        let dth = rel((hx - m.h(&x, s)).abs(), m.h_decay * b.sup_h * (t - s).abs());
        let pos = m.xi.value(t) + hx + barriers.lower(t);
        let xi = if pos > 0.0 { -pos } else { 1.0 - pos };

        let v = [p1, p2, p3, dth, xi];
        let rec = SampleRecord::new()
            .with("x", x.as_slice().to_vec())
            .with("y", y.as_slice().to_vec())
            .with_scalar("t", t)
            .with_scalar("s", s)
            .with("violations", v.to_vec());
        (v, rec)
    });

    let mut per_check = [f64::NEG_INFINITY; 5];
    for (v, rec) in items {
        for (acc, vi) in per_check.iter_mut().zip(v) {
            *acc = acc.max(vi);
        }
        report.record(v.iter().copied().fold(f64::NEG_INFINITY, f64::max), rec);
    }
    // XI is also decided from the grid minimum behind m₀.
    if !barriers.xi_condition() {
        per_check[4] = per_check[4].max(1.0 - barriers.m0);
    }
    report.max_violation = report.max_violation.max(per_check[4]);
    for (name, v) in NAMES.iter().zip(per_check) {
        if !(v <= PASS_THRESHOLD) {
            report.fail(*name);
        }
    }
    report.finish()
}
