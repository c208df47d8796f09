//! Deterministic per-sample random streams.
//!
//! Every sample draws from its own ChaCha8 stream keyed by `(seed, index)`,
//! so results do not depend on thread count or scheduling.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

pub type SampleRng = ChaCha8Rng;

pub fn stream_rng(seed: u64, index: u64) -> SampleRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Evaluate `f` for every sample index in parallel; the output is in index
/// order.
pub fn par_samples<T, F>(n: usize, seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut SampleRng) -> T + Sync + Send,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i);
            f(i, &mut rng)
        })
        .collect()
}

pub fn uniform(rng: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Log-uniform draw on `[lo, hi]` with `0 < lo < hi`.
pub fn log_uniform(rng: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + (hi.ln() - lo.ln()) * rng.random::<f64>()).exp()
}

pub fn normal(rng: &mut SampleRng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn gaussian_vec(rng: &mut SampleRng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| normal(rng))
}

pub fn gaussian_mat(rng: &mut SampleRng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// Symmetric matrix with standard normal entries on and above the diagonal.
pub fn gaussian_sym(rng: &mut SampleRng, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = normal(rng);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub fn uniform_box(rng: &mut SampleRng, bounds: &[(f64, f64)]) -> DVector<f64> {
    DVector::from_iterator(bounds.len(), bounds.iter().map(|&(lo, hi)| uniform(rng, lo, hi)))
}
