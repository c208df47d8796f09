//! Sampled falsification of the structural hypotheses on `F`.

use nalgebra::{DMatrix, DVector};

use super::HamiltonianSpec;
use crate::error::{config, precondition, Error, Result};
use crate::linalg::{block_diag, clip_sym, clip_vec, coupling, flatten, min_eigenvalue, sym_norm};
use crate::osgood::{gamma_eval, OsgoodFunction};
use crate::report::{CheckReport, ModulusFamily, SampleRecord};
use crate::sampling::{gaussian_mat, gaussian_sym, gaussian_vec, log_uniform, par_samples, uniform, uniform_box, SampleRng};
use crate::transform::GaugeFunction;

fn wrap(sample: &SampleRecord, e: Error) -> Error {
    Error::Evaluation { sample: Box::new(sample.clone()), source: Box::new(e) }
}

fn collect(check: &str, seed: u64, items: Vec<Result<(f64, SampleRecord)>>) -> Result<CheckReport> {
    let items: Vec<(f64, SampleRecord)> = items.into_iter().collect::<Result<_>>()?;
    Ok(CheckReport::from_samples(check, seed, items))
}

fn time(rng: &mut SampleRng, h: &HamiltonianSpec) -> f64 {
    uniform(rng, 0.0, h.horizon)
}

/// Vector in the closed `r`-ball whose norm is log-uniform on `[1e-9·r, r]`
/// half of the time, so that behavior near 0 is probed.
fn ball_vec(rng: &mut SampleRng, n: usize, r: f64) -> DVector<f64> {
    let dir = gaussian_vec(rng, n);
    let norm = dir.norm();
    if norm == 0.0 {
        return DVector::zeros(n);
    }
    let radius = if uniform(rng, 0.0, 1.0) < 0.5 { r * log_uniform(rng, 1e-9, 1.0) } else { uniform(rng, 0.0, r) };
    dir * (radius / norm)
}

fn ball_sym(rng: &mut SampleRng, n: usize, r: f64) -> DMatrix<f64> {
    let scale = r * log_uniform(rng, 1e-3, 1.0);
    clip_sym(gaussian_sym(rng, n) * scale, r)
}

/// Degenerate ellipticity: `F(…, X+Y) ≤ F(…, X)` for `Y = AᵀA`.
pub fn check_degenerate_ellipticity(h: &HamiltonianSpec, n_samples: usize, seed: u64) -> Result<CheckReport> {
    if n_samples == 0 {
        return Err(precondition("n_samples must be at least 1"));
    }
    let n = h.dim;
    let (lo, hi) = h.eval_domain();
    let items = par_samples(n_samples, seed, |_, rng| {
        let x = uniform_box(rng, &h.x_box);
        let t = time(rng, h);
        let u = uniform(rng, lo, hi);
        let p = gaussian_vec(rng, n) * log_uniform(rng, 1e-2, 10.0);
        let m = gaussian_sym(rng, n) * log_uniform(rng, 1e-2, 10.0);
        let a = gaussian_mat(rng, n, n) * log_uniform(rng, 1e-2, 10.0);
        let y = a.transpose() * &a;
        let rec = SampleRecord::new()
            .with("x", x.as_slice().to_vec())
            .with_scalar("t", t)
            .with_scalar("u", u)
            .with("p", p.as_slice().to_vec())
            .with("X", flatten(&m))
            .with("Y", flatten(&y));
        let f0 = h.eval(&x, t, u, &p, &m).map_err(|e| wrap(&rec, e))?;
        let f1 = h.eval(&x, t, u, &p, &(&m + &y)).map_err(|e| wrap(&rec, e))?;
        Ok((f1 - f0, rec))
    });
    collect("degenerate_ellipticity", seed, items)
}

const BINS: usize = 24;

/// Modulus in `p`: `|F(…,p,X) − F(…,q,X)| ≤ ν(|p−q|)` for `|p|, |q|, ‖X‖ ≤ R`.
///
/// The increments are binned by `log|p−q|`. The slope of the bin envelope
/// over the smallest half of the bins selects a linear or power candidate,
/// whose coefficient is the smallest one dominating every sample. The check
/// fails when the envelope of the smallest bin is not small relative to the
/// largest one.
pub fn check_gradient_modulus(h: &HamiltonianSpec, r: f64, n_samples: usize, seed: u64) -> Result<CheckReport> {
    if !(r > 0.0) {
        return Err(precondition(format!("R must be positive, got {r}")));
    }
    if n_samples == 0 {
        return Err(precondition("n_samples must be at least 1"));
    }
    let n = h.dim;
    let items: Vec<Result<(f64, f64, SampleRecord)>> = par_samples(n_samples, seed, |_, rng| {
        let x = uniform_box(rng, &h.x_box);
        let t = time(rng, h);
        let u = uniform(rng, h.a, h.b);
        let m = ball_sym(rng, n, r);
        let mut p = ball_vec(rng, n, r);
        let dir = gaussian_vec(rng, n);
        let s = log_uniform(rng, 1e-9 * r, 2.0 * r);
        // A quarter of the pairs straddle p = 0 at the scale of the increment.
        if uniform(rng, 0.0, 1.0) < 0.25 {
            let norm = p.norm();
            if norm > 0.0 {
                p *= s.min(r) * log_uniform(rng, 1e-6, 1.0) / norm;
            }
        }
        let q = clip_vec(&p + dir.normalize() * s, r);
        let rec = SampleRecord::new()
            .with("x", x.as_slice().to_vec())
            .with_scalar("t", t)
            .with_scalar("u", u)
            .with("p", p.as_slice().to_vec())
            .with("q", q.as_slice().to_vec())
            .with("X", flatten(&m));
        let fp = h.eval(&x, t, u, &p, &m).map_err(|e| wrap(&rec, e))?;
        let fq = h.eval(&x, t, u, &q, &m).map_err(|e| wrap(&rec, e))?;
        Ok(((&p - &q).norm(), (fp - fq).abs(), rec))
    });
    let items: Vec<(f64, f64, SampleRecord)> = items.into_iter().collect::<Result<_>>()?;
    let data: Vec<&(f64, f64, SampleRecord)> = items.iter().filter(|(s, _, _)| *s > 0.0).collect();

    let mut report = CheckReport::new("gradient_modulus", seed);
    let d_max = data.iter().map(|(_, d, _)| *d).fold(0.0, f64::max);
    if d_max == 0.0 {
        let fitted = ModulusFamily::zero();
        for (s, d, rec) in &items {
            report.record(d - fitted.eval(*s), rec.clone());
        }
        report.fitted_modulus = Some(fitted);
        return Ok(report.finish());
    }

    let ls_min = data.iter().map(|(s, _, _)| s.ln()).fold(f64::INFINITY, f64::min);
    let ls_max = data.iter().map(|(s, _, _)| s.ln()).fold(f64::NEG_INFINITY, f64::max);
    let width = ((ls_max - ls_min) / BINS as f64).max(1e-300);
    // (envelope, s at the envelope) per bin
    let mut env = vec![(0.0_f64, f64::NAN); BINS];
    for (s, d, _) in &data {
        let k = (((s.ln() - ls_min) / width) as usize).min(BINS - 1);
        if *d > env[k].0 || env[k].1.is_nan() {
            env[k] = (*d, *s);
        }
    }
    let filled: Vec<(f64, f64)> = env.iter().copied().filter(|(_, s)| !s.is_nan()).collect();
    let lower: Vec<(f64, f64)> =
        filled.iter().take(filled.len().div_ceil(2)).copied().filter(|(d, _)| *d > 0.0).collect();
    let slope = if lower.len() >= 2 {
        let k = lower.len() as f64;
        let mx = lower.iter().map(|(_, s)| s.ln()).sum::<f64>() / k;
        let my = lower.iter().map(|(d, _)| d.ln()).sum::<f64>() / k;
        let sxy: f64 = lower.iter().map(|(d, s)| (s.ln() - mx) * (d.ln() - my)).sum();
        let sxx: f64 = lower.iter().map(|(_, s)| (s.ln() - mx).powi(2)).sum();
        if sxx > 0.0 {
            sxy / sxx
        } else {
            1.0
        }
    } else {
        1.0
    };
    let fitted = if slope >= 0.9 {
        ModulusFamily::linear(data.iter().map(|(s, d, _)| d / s).fold(0.0, f64::max))
    } else {
        let g = slope.clamp(0.05, 1.0);
        ModulusFamily::power(data.iter().map(|(s, d, _)| d / s.powf(g)).fold(0.0, f64::max), g)
    };
    report.note(format!("envelope slope over small |p-q| bins: {slope:.4}"));

    let smallest = filled.first().map(|e| e.0).unwrap_or(0.0);
    let largest = filled.iter().map(|e| e.0).fold(0.0, f64::max);
    let vanishing = smallest <= 1e-2 * largest;
    for (s, d, rec) in &items {
        report.record(d - fitted.eval(*s), rec.clone());
    }
    report.fitted_modulus = Some(fitted);
    if !vanishing {
        report.max_violation = report.max_violation.max(smallest);
        report.fail("binned sup does not vanish as |p-q| -> 0");
    }
    Ok(report.finish())
}

/// Coupled-block constraint test: returns `(ε₁, ε₂)` when `(X, Y)` with the
/// given `ε₃` satisfies both matrix inequalities, with `ε₁` and `ε₂` as small
/// as the bisection allows.
fn cp5_epsilons(x: &DMatrix<f64>, y: &DMatrix<f64>, e3: f64) -> Option<(f64, f64)> {
    let n = x.nrows();
    let d = block_diag(x, y);
    let j = coupling(n);
    let id = DMatrix::<f64>::identity(2 * n, 2 * n);
    let e1 = (-min_eigenvalue(&d)).max(0.0);
    let feasible = |e2: f64| min_eigenvalue(&(&j * e2 + &id * e3 - &d)) >= 0.0;
    if feasible(0.0) {
        return Some((e1, 0.0));
    }
    let mut hi = 1e-3_f64.max(sym_norm(&d));
    let mut k = 0;
    while !feasible(hi) {
        hi *= 2.0;
        k += 1;
        if k > 60 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some((e1, hi))
}

/// See [`check_structure_cp6_with`]; uses block scale `R/8`.
pub fn check_structure_cp6(
    h: &HamiltonianSpec,
    r: f64,
    candidate: (ModulusFamily, ModulusFamily),
    n_samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    check_structure_cp6_with(h, r, candidate, n_samples, seed, r / 8.0)
}

/// Coupled second-order structure with candidate moduli `(ν₂, ν₂,R)`:
///
/// `F(x,t,u,p,X+Z) − F(y,t,u,p,−Y+Z) ≥ −ν₂(|x−y|(|p|+1) + ε₂|x−y|²) − ν₂,R(2ε₃)`
///
/// for `(X, Y)` obeying the coupled-block constraint with `ε₁, ε₂, ε₃`.
/// Pairs are drawn as `X = A + E₁`, `Y = −A + E₂` at `block_scale` and kept
/// only if both eigenvalue tests pass and `R ≥ max(ε₁, 2ε₂+ε₃) + 2ε₃`. The
/// first two samples are the fixed cases `X = Y = 0`, `x = y` and `X = −Y`
/// with `‖X‖ ≤ ε₃`.
pub fn check_structure_cp6_with(
    h: &HamiltonianSpec,
    r: f64,
    (nu2, nu2r): (ModulusFamily, ModulusFamily),
    n_samples: usize,
    seed: u64,
    block_scale: f64,
) -> Result<CheckReport> {
    if !(r > 0.0 && block_scale > 0.0) {
        return Err(precondition(format!("need R > 0 and block scale > 0, got R={r}, scale={block_scale}")));
    }
    if n_samples == 0 {
        return Err(precondition("n_samples must be at least 1"));
    }
    if !nu2.is_valid() || !nu2r.is_valid() {
        return Err(config("candidate moduli must have nonnegative coefficients and exponents in (0, 1]"));
    }
    const ATTEMPTS: usize = 2000;
    let n = h.dim;
    let results = par_samples(n_samples, seed, |i, rng| -> Result<(f64, SampleRecord, usize)> {
        let x = uniform_box(rng, &h.x_box);
        let t = time(rng, h);
        let u = uniform(rng, h.a, h.b);
        let p = ball_vec(rng, n, r);
        let zm = ball_sym(rng, n, r);
        let mut rejected = 0;
        let (y_pt, xm, ym, e1, e2, e3, zm) = match i {
            0 => {
                let z0 = DMatrix::zeros(n, n);
                (x.clone(), z0.clone(), z0.clone(), 0.0, 0.0, 0.0, z0)
            }
            1 => {
                let e3 = r * uniform(rng, 0.01, 0.3);
                let xm = clip_sym(gaussian_sym(rng, n), 1.0) * e3;
                let e1 = sym_norm(&xm);
                let ym = -&xm;
                (x.clone(), xm, ym, e1, 0.0, e3, zm)
            }
            _ => loop {
                if rejected >= ATTEMPTS {
                    return Err(Error::Sampling(format!(
                        "sample {i}: no admissible (X, Y) in {ATTEMPTS} draws; use a smaller block scale"
                    )));
                }
                let s = block_scale * log_uniform(rng, 1e-3, 1.0);
                let a = gaussian_sym(rng, n) * s;
                let small = s * log_uniform(rng, 1e-3, 1.0);
                let xm = &a + gaussian_sym(rng, n) * small;
                let ym = -&a + gaussian_sym(rng, n) * small;
                let lmax = -min_eigenvalue(&(-(&xm + &ym) * 0.5));
                let e3 = lmax.max(0.0) * (1.0 + uniform(rng, 0.0, 0.5)) + small * uniform(rng, 0.0, 0.1);
                let Some((e1, e2)) = cp5_epsilons(&xm, &ym, e3) else {
                    rejected += 1;
                    continue;
                };
                if r < e1.max(2.0 * e2 + e3) + 2.0 * e3 {
                    rejected += 1;
                    continue;
                }
                let dir = gaussian_vec(rng, n);
                let mut y_pt = &x + dir.normalize() * log_uniform(rng, 1e-4, 1.0);
                for (k, &(lo, hi)) in h.x_box.iter().enumerate() {
                    y_pt[k] = y_pt[k].clamp(lo, hi);
                }
                break (y_pt, xm, ym, e1, e2, e3, zm);
            },
        };
        let rec = SampleRecord::new()
            .with("x", x.as_slice().to_vec())
            .with("y", y_pt.as_slice().to_vec())
            .with_scalar("t", t)
            .with_scalar("u", u)
            .with("p", p.as_slice().to_vec())
            .with("X", flatten(&xm))
            .with("Y", flatten(&ym))
            .with("Z", flatten(&zm))
            .with("eps", vec![e1, e2, e3]);
        let fx = h.eval(&x, t, u, &p, &(&xm + &zm)).map_err(|e| wrap(&rec, e))?;
        let fy = h.eval(&y_pt, t, u, &p, &(&zm - &ym)).map_err(|e| wrap(&rec, e))?;
        let dxy = (&x - &y_pt).norm();
        let rhs = -nu2.eval(dxy * (p.norm() + 1.0) + e2 * dxy * dxy) - nu2r.eval(2.0 * e3);
        Ok((rhs - (fx - fy), rec, rejected))
    });
    let mut report = CheckReport::new("structure_cp6", seed);
    let mut rejected = 0usize;
    for item in results {
        let (v, rec, rej) = item?;
        rejected += rej;
        report.record(v, rec);
    }
    let total = rejected + n_samples;
    let rate = rejected as f64 / total as f64;
    if rate > 0.999 {
        return Err(Error::Sampling(format!(
            "rejection rate {rate:.5} exceeds 99.9%; use a smaller block scale"
        )));
    }
    report.note(format!("rejection rate {rate:.4}"));
    Ok(report.finish())
}

/// Osgood structure with gauge `z`, modulus `Γ` and candidate `ν̂_R`:
///
/// `(1/λ)F(x,t,u,λq,λX+κ q⊗q) − (1/λ̂)F(x,t,v,λ̂q,λ̂X+κ̂ q⊗q)
///     ≥ −Γ(u−v) − ν̂_R((|λ²−z(u)| + |λ̂²−z(v)|)(1+|q|+‖X‖))`
///
/// over `a ≤ v ≤ u ≤ b`, `λ, λ̂ ∈ [inf √z, sup √z]` on `[a, b]`, `2κ ≤ z'(u)`,
/// `2κ̂ ≥ z'(v)`, `|q|, ‖X‖ ≤ R`. Samples concentrate on the canonical values
/// `λ = √z(u)`, `κ = z'(u)/2` and on small perturbations of them.
///
/// `Γ` must be defined on `[0, b − a]`; the note records whether it also
/// covers `√(Λ₀/λ₀)(b − a)`.
pub fn check_osgood_structure_cp7(
    h: &HamiltonianSpec,
    gauge: &GaugeFunction,
    gamma: &OsgoodFunction,
    candidate: ModulusFamily,
    r: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CheckReport> {
    if !gauge.covers(h.a, h.b) {
        return Err(config(format!(
            "gauge domain [{}, {}] does not cover [{}, {}]",
            gauge.domain.0, gauge.domain.1, h.a, h.b
        )));
    }
    let width = h.b - h.a;
    if gamma.l < width {
        return Err(config(format!("Γ is defined on [0, {}] but b − a = {width}", gamma.l)));
    }
    if !(r > 0.0) || n_samples == 0 || !candidate.is_valid() {
        return Err(precondition("need R > 0, n_samples ≥ 1 and a valid candidate modulus"));
    }
    let n = h.dim;
    // λ ranges over √z on [a, b], not on the whole gauge domain; [a, b] may
    // be a single point.
    let (lam_lo, lam_hi) = if width > 0.0 {
        let local = GaugeFunction::new(gauge.kind, h.a, h.b)?;
        (local.lambda0.sqrt(), local.big_lambda0.sqrt())
    } else {
        let z = gauge.z(h.a).sqrt();
        (z, z)
    };
    let items = par_samples(n_samples, seed, |_, rng| {
        let x = uniform_box(rng, &h.x_box);
        let t = time(rng, h);
        let q = ball_vec(rng, n, r);
        let m = ball_sym(rng, n, r);
        let (u, v) = if uniform(rng, 0.0, 1.0) < 0.2 {
            let u = uniform(rng, h.a, h.b);
            (u, u)
        } else {
            let d = if uniform(rng, 0.0, 1.0) < 0.5 {
                width * log_uniform(rng, 1e-9, 1.0)
            } else {
                uniform(rng, 0.0, width)
            };
            let v = uniform(rng, h.a, h.b - d);
            ((v + d).min(h.b), v)
        };
        let pick_lambda = |rng: &mut SampleRng, w: f64| -> f64 {
            let c = gauge.z(w).sqrt();
            let k = uniform(rng, 0.0, 3.0);
            let l = if k < 1.0 {
                c
            } else if k < 2.0 {
                let sgn = if uniform(rng, 0.0, 1.0) < 0.5 { -1.0 } else { 1.0 };
                c + sgn * (lam_hi - lam_lo).max(1e-12) * log_uniform(rng, 1e-9, 1e-1)
            } else {
                uniform(rng, lam_lo, lam_hi)
            };
            l.clamp(lam_lo, lam_hi)
        };
        let pick_shift = |rng: &mut SampleRng| -> f64 {
            if uniform(rng, 0.0, 1.0) < 0.5 {
                0.0
            } else {
                log_uniform(rng, 1e-9, 10.0)
            }
        };
        let lam = pick_lambda(rng, u);
        let lam_hat = pick_lambda(rng, v);
        let kappa = 0.5 * gauge.z_prime(u) - pick_shift(rng);
        let kappa_hat = 0.5 * gauge.z_prime(v) + pick_shift(rng);
        let rec = SampleRecord::new()
            .with("x", x.as_slice().to_vec())
            .with_scalar("t", t)
            .with_scalar("u", u)
            .with_scalar("v", v)
            .with("q", q.as_slice().to_vec())
            .with("X", flatten(&m))
            .with("lambda", vec![lam, lam_hat])
            .with("kappa", vec![kappa, kappa_hat]);
        let qq = &q * q.transpose();
        let fu = h.eval(&x, t, u, &(&q * lam), &(&m * lam + &qq * kappa)).map_err(|e| wrap(&rec, e))? / lam;
        let fv = h
            .eval(&x, t, v, &(&q * lam_hat), &(&m * lam_hat + &qq * kappa_hat))
            .map_err(|e| wrap(&rec, e))?
            / lam_hat;
        let g = gamma_eval(gamma, u - v).map_err(|e| wrap(&rec, e))?;
        let s = ((lam * lam - gauge.z(u)).abs() + (lam_hat * lam_hat - gauge.z(v)).abs())
            * (1.0 + q.norm() + sym_norm(&m));
        Ok((-(fu - fv + g + candidate.eval(s)), rec))
    });
    let mut report = collect("osgood_structure_cp7", seed, items)?;
    let needed = (lam_hi / lam_lo) * width;
    report.note(format!(
        "Γ domain [0, {}]; b − a = {width}; √(Λ₀/λ₀)(b − a) = {needed}{}",
        gamma.l,
        if gamma.l >= needed { "" } else { " (not covered)" }
    ));
    Ok(report.finish())
}
