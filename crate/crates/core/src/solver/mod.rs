//! Explicit monotone finite differences on a truncated box.
//!
//! Every problem is written as
//! `∂t U = ½tr(a∇²U) + ⟨μ,∇U⟩ − N(x, t, U, ∇U)`
//! and advanced with central second differences, upwind drift and a
//! Lax–Friedrichs treatment of `N`.

mod checks;
mod mc;
mod problem;
mod run;
mod scheme;
mod study;

use std::fmt::Write as _;
use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

pub use checks::{discrete_comparison, lipschitz_audit, monotonicity_probe};
pub use mc::mc_oracle;
pub use problem::{Dm1Problem, Dm2Problem, GaugedProblem, Problem};
pub use run::{initial_values, run_problem, solve, Run, RunFlags, SandwichRecord};
pub use scheme::{cfl_limit, estimate_coefficients, resolve, step, SchemeConfig, SchemeOptions};
pub use study::{
    change_of_variable_study, refinement_csv, refinement_study, refinement_study_with, GapRow, RefinementRow,
};

/// Tensor grid over a box. The first and last node of every axis form the
/// boundary ring; `padding` is the number of nodes next to the boundary that
/// are treated as a margin against boundary influence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "box")]
    pub x_box: Vec<(f64, f64)>,
    pub nodes: Vec<usize>,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_padding")]
    pub padding: usize,
}

fn default_cfl() -> f64 {
    0.9
}

fn default_padding() -> usize {
    4
}

impl GridSpec {
    pub fn new(x_box: Vec<(f64, f64)>, nodes: Vec<usize>, cfl_safety: f64, padding: usize) -> Result<Self> {
        let g = GridSpec { x_box, nodes, cfl_safety, padding };
        g.validate()?;
        Ok(g)
    }

    /// Uniform grid with the default safety factor and padding.
    pub fn uniform(x_box: Vec<(f64, f64)>, nodes: usize) -> Result<Self> {
        let n = x_box.len();
        Self::new(x_box, vec![nodes; n], default_cfl(), default_padding())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let g: GridSpec = serde_json::from_str(text)?;
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_box.is_empty() || self.x_box.len() > 3 || self.x_box.len() != self.nodes.len() {
            return Err(config("grid needs 1 to 3 dimensions with one node count each"));
        }
        if self.nodes.iter().any(|&n| n < 8) {
            return Err(config(format!("every axis needs at least 8 nodes, got {:?}", self.nodes)));
        }
        if self.x_box.iter().any(|(lo, hi)| !(hi > lo)) {
            return Err(config("grid box intervals must be nonempty"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(config(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if self.padding < 1 {
            return Err(config("padding must be at least 1"));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn dx(&self) -> Vec<f64> {
        self.x_box.iter().zip(&self.nodes).map(|(&(lo, hi), &n)| (hi - lo) / (n - 1) as f64).collect()
    }

    pub fn max_dx(&self) -> f64 {
        self.dx().into_iter().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat-index strides, last axis fastest.
    pub fn strides(&self) -> Vec<usize> {
        let n = self.dim();
        let mut s = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            s[k] = s[k + 1] * self.nodes[k + 1];
        }
        s
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            idx[k] = flat % self.nodes[k];
            flat /= self.nodes[k];
        }
        idx
    }

    pub fn coords(&self, flat: usize) -> DVector<f64> {
        let idx = self.multi_index(flat);
        let dx = self.dx();
        DVector::from_fn(self.dim(), |k, _| self.x_box[k].0 + idx[k] as f64 * dx[k])
    }

    pub fn is_interior(&self, flat: usize) -> bool {
        self.multi_index(flat).iter().zip(&self.nodes).all(|(&i, &n)| i >= 1 && i + 2 <= n)
    }

    /// Nearest interior node of a boundary node.
    pub fn nearest_interior(&self, flat: usize) -> usize {
        let idx = self.multi_index(flat);
        let s = self.strides();
        idx.iter().zip(&self.nodes).zip(&s).map(|((&i, &n), &st)| i.clamp(1, n - 2) * st).sum()
    }

    /// Whether `fine` refines `self` by a factor 2 on the same box.
    pub fn is_refined_by(&self, fine: &GridSpec) -> bool {
        self.x_box == fine.x_box
            && self.nodes.len() == fine.nodes.len()
            && self.nodes.iter().zip(&fine.nodes).all(|(&c, &f)| f - 1 == 2 * (c - 1))
    }

    /// `"201"` or `"101x101"`
    pub fn label(&self) -> String {
        self.nodes.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("x")
    }
}

/// Values of the unknown at every node at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub grid: Arc<GridSpec>,
    pub t: f64,
    pub values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Arc<GridSpec>, t: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(config(format!("field has {} values for {} nodes", values.len(), grid.len())));
        }
        Ok(GridField { grid, t, values })
    }

    pub fn max_abs_diff(&self, other: &GridField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// CSV snapshot with columns `t, x1..xN, <name>`.
pub fn fields_csv(fields: &[GridField], name: &str) -> String {
    let mut out = String::from("t");
    if let Some(f) = fields.first() {
        for k in 0..f.grid.dim() {
            let _ = write!(out, ",x{}", k + 1);
        }
    }
    let _ = writeln!(out, ",{name}");
    for f in fields {
        for (i, v) in f.values.iter().enumerate() {
            let _ = write!(out, "{:.16e}", f.t);
            for c in f.grid.coords(i).iter() {
                let _ = write!(out, ",{c:.16e}");
            }
            let _ = writeln!(out, ",{v:.16e}");
        }
    }
    out
}

#[cfg(test)]
mod tests;
