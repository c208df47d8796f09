//! Named analytic coefficient forms with exact derivatives and global bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

/// Scalar functions of time, used for `r` and `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "kebab-case")]
pub enum TimeForm {
    Constant { value: f64 },
    /// `a + b·t`
    Affine { a: f64, b: f64 },
    /// `a·e^{k·t}`
    Exponential { a: f64, k: f64 },
}

impl TimeForm {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            TimeForm::Constant { value } => value,
            TimeForm::Affine { a, b } => a + b * t,
            TimeForm::Exponential { a, k } => a * (k * t).exp(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            TimeForm::Constant { .. } => 0.0,
            TimeForm::Affine { b, .. } => b,
            TimeForm::Exponential { a, k } => a * k * (k * t).exp(),
        }
    }

    /// `∫₀ᵗ`
    pub fn integral(&self, t: f64) -> f64 {
        match *self {
            TimeForm::Constant { value } => value * t,
            TimeForm::Affine { a, b } => a * t + 0.5 * b * t * t,
            TimeForm::Exponential { a, k } => {
                if k == 0.0 {
                    a * t
                } else {
                    a * (k * t).exp_m1() / k
                }
            }
        }
    }

    /// `(inf, sup)` over `[0, T]`; every form is monotone in `t`.
    pub fn range(&self, big_t: f64) -> (f64, f64) {
        let (a, b) = (self.value(0.0), self.value(big_t));
        (a.min(b), a.max(b))
    }
}

/// Drift `μ(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "kebab-case")]
pub enum DriftForm {
    Constant { value: Vec<f64> },
    /// `μᵢ = Aᵢ sin(kᵢ xᵢ)`
    Sine { amplitude: Vec<f64>, frequency: Vec<f64> },
}

impl DriftForm {
    pub fn dim(&self) -> usize {
        match self {
            DriftForm::Constant { value } => value.len(),
            DriftForm::Sine { amplitude, .. } => amplitude.len(),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            DriftForm::Constant { value } => DVector::from_column_slice(value),
            DriftForm::Sine { amplitude, frequency } => {
                DVector::from_fn(amplitude.len(), |i, _| amplitude[i] * (frequency[i] * x[i]).sin())
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            DriftForm::Constant { value } => value.iter().map(|v| v * v).sum::<f64>().sqrt(),
            DriftForm::Sine { amplitude, .. } => amplitude.iter().map(|v| v * v).sum::<f64>().sqrt(),
        }
    }

    /// Global Lipschitz constant (the Jacobian is diagonal).
    pub fn lipschitz(&self) -> f64 {
        match self {
            DriftForm::Constant { .. } => 0.0,
            DriftForm::Sine { amplitude, frequency } => {
                amplitude.iter().zip(frequency).map(|(a, k)| (a * k).abs()).fold(0.0, f64::max)
            }
        }
    }

    /// Largest component magnitude, used for upwinding bounds.
    pub fn max_abs_component(&self) -> f64 {
        match self {
            DriftForm::Constant { value } => value.iter().map(|v| v.abs()).fold(0.0, f64::max),
            DriftForm::Sine { amplitude, .. } => amplitude.iter().map(|v| v.abs()).fold(0.0, f64::max),
        }
    }
}

/// Volatility `σ`, an `N×d` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "kebab-case")]
pub enum VolForm {
    Constant { matrix: Vec<Vec<f64>> },
}

impl VolForm {
    pub fn matrix(&self) -> DMatrix<f64> {
        match self {
            VolForm::Constant { matrix } => {
                let rows = matrix.len();
                let cols = matrix.first().map_or(0, Vec::len);
                DMatrix::from_fn(rows, cols, |i, j| matrix[i][j])
            }
        }
    }

    pub fn shape(&self) -> Result<(usize, usize)> {
        match self {
            VolForm::Constant { matrix } => {
                let cols = matrix.first().map_or(0, Vec::len);
                if matrix.iter().any(|r| r.len() != cols) {
                    return Err(config("sigma rows have different lengths"));
                }
                Ok((matrix.len(), cols))
            }
        }
    }
}

/// Spatial profiles used for `U₀` and for the spatial factor of `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "kebab-case")]
pub enum SpatialForm {
    Constant { value: f64 },
    /// `A·exp(−|x−c|²/(2w²))`
    Gaussian { amplitude: f64, center: Vec<f64>, width: f64 },
    /// `A/(1 + |x−c|²)`
    RationalBump { amplitude: f64, center: Vec<f64> },
    /// `offset + amplitude·cos(k·x)`
    Cosine { offset: f64, amplitude: f64, wavevector: Vec<f64> },
}

fn diff(x: &DVector<f64>, c: &[f64]) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| x[i] - c[i])
}

impl SpatialForm {
    /// Dimension the form is written for, if it fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            SpatialForm::Constant { .. } => None,
            SpatialForm::Gaussian { center, .. } | SpatialForm::RationalBump { center, .. } => Some(center.len()),
            SpatialForm::Cosine { wavevector, .. } => Some(wavevector.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SpatialForm::Gaussian { width, .. } = self {
            if !(*width > 0.0) {
                return Err(config(format!("gaussian width must be positive, got {width}")));
            }
        }
        Ok(())
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            SpatialForm::Constant { value } => *value,
            SpatialForm::Gaussian { amplitude, center, width } => {
                amplitude * (-diff(x, center).norm_squared() / (2.0 * width * width)).exp()
            }
            SpatialForm::RationalBump { amplitude, center } => amplitude / (1.0 + diff(x, center).norm_squared()),
            SpatialForm::Cosine { offset, amplitude, wavevector } => {
                offset + amplitude * DVector::from_column_slice(wavevector).dot(x).cos()
            }
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = x.len();
        match self {
            SpatialForm::Constant { .. } => DVector::zeros(n),
            SpatialForm::Gaussian { width, center, .. } => {
                let d = diff(x, center);
                d * (-self.value(x) / (width * width))
            }
            SpatialForm::RationalBump { amplitude, center } => {
                let d = diff(x, center);
                let q = 1.0 + d.norm_squared();
                d * (-2.0 * amplitude / (q * q))
            }
            SpatialForm::Cosine { amplitude, wavevector, .. } => {
                let k = DVector::from_column_slice(wavevector);
                let s = k.dot(x).sin();
                k * (-amplitude * s)
            }
        }
    }

    pub fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        match self {
            SpatialForm::Constant { .. } => DMatrix::zeros(n, n),
            SpatialForm::Gaussian { width, center, .. } => {
                let d = diff(x, center);
                let w2 = width * width;
                let v = self.value(x);
                (&d * d.transpose() / (w2 * w2) - DMatrix::identity(n, n) / w2) * v
            }
            SpatialForm::RationalBump { amplitude, center } => {
                let d = diff(x, center);
                let q = 1.0 + d.norm_squared();
                &d * d.transpose() * (8.0 * amplitude / q.powi(3)) - DMatrix::identity(n, n) * (2.0 * amplitude / (q * q))
            }
            SpatialForm::Cosine { amplitude, wavevector, .. } => {
                let k = DVector::from_column_slice(wavevector);
                let c = k.dot(x).cos();
                &k * k.transpose() * (-amplitude * c)
            }
        }
    }

    /// `(inf, sup)` over ℝᴺ.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            SpatialForm::Constant { value } => (value, value),
            SpatialForm::Gaussian { amplitude, .. } | SpatialForm::RationalBump { amplitude, .. } => {
                (amplitude.min(0.0), amplitude.max(0.0))
            }
            SpatialForm::Cosine { offset, amplitude, ref wavevector } => {
                if wavevector.iter().all(|k| *k == 0.0) {
                    (offset + amplitude, offset + amplitude)
                } else {
                    (offset - amplitude.abs(), offset + amplitude.abs())
                }
            }
        }
    }

    /// `sup |∇·|`, which is also the global Lipschitz constant.
    pub fn gradient_sup(&self) -> f64 {
        match *self {
            SpatialForm::Constant { .. } => 0.0,
            // attained at |x − c| = w
            SpatialForm::Gaussian { amplitude, width, .. } => amplitude.abs() / width * (-0.5f64).exp(),
            // attained at |x − c| = 1/√3
            SpatialForm::RationalBump { amplitude, .. } => amplitude.abs() * 9.0 / (8.0 * 3f64.sqrt()),
            SpatialForm::Cosine { amplitude, ref wavevector, .. } => {
                amplitude.abs() * wavevector.iter().map(|k| k * k).sum::<f64>().sqrt()
            }
        }
    }

    /// `sup ‖∇²·‖`, the Lipschitz constant of the gradient.
    pub fn hessian_sup(&self) -> f64 {
        match *self {
            SpatialForm::Constant { .. } => 0.0,
            SpatialForm::Gaussian { amplitude, width, .. } => amplitude.abs() / (width * width),
            SpatialForm::RationalBump { amplitude, .. } => 2.0 * amplitude.abs(),
            SpatialForm::Cosine { amplitude, ref wavevector, .. } => {
                amplitude.abs() * wavevector.iter().map(|k| k * k).sum::<f64>()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::grid_maximize;

    fn forms() -> Vec<SpatialForm> {
        vec![
            SpatialForm::Gaussian { amplitude: 0.7, center: vec![0.3], width: 0.8 },
            SpatialForm::RationalBump { amplitude: 1.3, center: vec![-0.2] },
            SpatialForm::Cosine { offset: 1.0, amplitude: 0.5, wavevector: vec![2.0] },
        ]
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for f in forms() {
            for x0 in [-1.1, 0.0, 0.4, 2.0] {
                let x = DVector::from_element(1, x0);
                let h = 1e-5;
                let xp = DVector::from_element(1, x0 + h);
                let xm = DVector::from_element(1, x0 - h);
                let g = (f.value(&xp) - f.value(&xm)) / (2.0 * h);
                assert!((g - f.gradient(&x)[0]).abs() < 1e-8, "{f:?}");
                let hh = (f.gradient(&xp)[0] - f.gradient(&xm)[0]) / (2.0 * h);
                assert!((hh - f.hessian(&x)[(0, 0)]).abs() < 1e-7, "{f:?}");
            }
        }
    }

    #[test]
    fn analytic_sups_match_scans() {
        for f in forms() {
            let (_, g) = grid_maximize(|s| f.gradient(&DVector::from_element(1, s))[0].abs(), -6.0, 6.0, 4001);
            assert!((g - f.gradient_sup()).abs() < 1e-9, "{f:?}: {g} vs {}", f.gradient_sup());
            let (_, hs) = grid_maximize(|s| f.hessian(&DVector::from_element(1, s))[(0, 0)].abs(), -6.0, 6.0, 4001);
            assert!((hs - f.hessian_sup()).abs() < 1e-9, "{f:?}: {hs} vs {}", f.hessian_sup());
        }
    }

    #[test]
    fn time_forms() {
        let e = TimeForm::Exponential { a: 2.0, k: 0.1 };
        let h = 1e-6;
        assert!(((e.integral(1.0 + h) - e.integral(1.0 - h)) / (2.0 * h) - e.value(1.0)).abs() < 1e-8);
        assert!(((e.value(1.0 + h) - e.value(1.0 - h)) / (2.0 * h) - e.derivative(1.0)).abs() < 1e-8);
        let a = TimeForm::Affine { a: 1.0, b: -0.5 };
        assert_eq!(a.integral(2.0), 1.0);
        assert_eq!(a.range(2.0), (0.0, 1.0));
    }
}
