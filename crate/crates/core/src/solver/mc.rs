use nalgebra::DVector;

use crate::error::{precondition, Result};
use crate::mbs::MbsModel;
use crate::quadrature::pairwise_sum;
use crate::sampling::{gaussian_vec, par_samples};

/// Feynman–Kac estimate of `U(x, t)` for `ρ = 0`:
///
/// `E[D(t)U₀(X_t) + ∫₀ᵗ D(s)(τ − r(t−s))h(X_s, t−s) ds]`,
/// `D(s) = exp(−∫_{t−s}^t r)`, `dX = μ(X)ds + σ dW`, `X₀ = x`.
///
/// Coefficients are read at the reversed time `t − s`. Paths use
/// Euler–Maruyama with `n_steps` steps and the trapezoidal rule for the
/// running term; path `k` draws from stream `k` of `seed`. Returns the
/// estimate and its standard error.
pub fn mc_oracle(
    m: &MbsModel,
    x: &DVector<f64>,
    t: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if m.rho != 0.0 {
        return Err(precondition(format!("the Monte Carlo oracle needs rho = 0, got {}", m.rho)));
    }
    m.check_structure()?;
    if x.len() != m.n || !(t >= 0.0 && t < m.big_t) || n_paths < 2 || n_steps == 0 {
        return Err(precondition("need x in R^N, t in [0, T), at least 2 paths and 1 step"));
    }
    let sigma = m.sigma_matrix();
    let ds = t / n_steps as f64;
    let r_t = m.r.integral(t);
    let discount = |s: f64| (-(r_t - m.r.integral(t - s))).exp();
    let running = |y: &DVector<f64>, s: f64| discount(s) * (m.tau - m.r.value(t - s)) * m.h(y, t - s);
    let values = par_samples(n_paths, seed, |_, rng| {
        let mut y = x.clone();
        let mut acc = 0.5 * running(&y, 0.0);
        for k in 1..=n_steps {
            let dw = gaussian_vec(rng, m.d) * ds.sqrt();
            y = &y + m.mu(&y) * ds + &sigma * dw;
            let s = k as f64 * ds;
            acc += if k == n_steps { 0.5 } else { 1.0 } * running(&y, s);
        }
        discount(t) * m.u0(&y) + acc * ds
    });
    let n = n_paths as f64;
    let mean = pairwise_sum(&values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}
