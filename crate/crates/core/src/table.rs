//! Dense tables over the finite context-action grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real-valued function on the context-action grid, stored row-major
/// (one row per context).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    n_contexts: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl Table {
    pub fn zeros(n_contexts: usize, n_actions: usize) -> Self {
        Self {
            n_contexts,
            n_actions,
            values: vec![0.0; n_contexts * n_actions],
        }
    }

    pub fn constant(n_contexts: usize, n_actions: usize, value: f64) -> Self {
        Self {
            n_contexts,
            n_actions,
            values: vec![value; n_contexts * n_actions],
        }
    }

    /// Build from a flat row-major slice.
    pub fn from_flat(n_contexts: usize, n_actions: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_contexts * n_actions {
            return Err(Error::Dimension(format!(
                "table needs {} entries, got {}",
                n_contexts * n_actions,
                values.len()
            )));
        }
        Ok(Self {
            n_contexts,
            n_actions,
            values,
        })
    }

    /// Build from nested rows `rows[context][action]`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_contexts = rows.len();
        if n_contexts == 0 {
            return Err(Error::Dimension("table needs at least one row".into()));
        }
        let n_actions = rows[0].len();
        let mut values = Vec::with_capacity(n_contexts * n_actions);
        for row in rows {
            if row.len() != n_actions {
                return Err(Error::Dimension("ragged table rows".into()));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            n_contexts,
            n_actions,
            values,
        })
    }

    pub fn n_contexts(&self) -> usize {
        self.n_contexts
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn same_shape(&self, other: &Table) -> bool {
        self.n_contexts == other.n_contexts && self.n_actions == other.n_actions
    }

    #[inline]
    pub fn get(&self, context: usize, action: usize) -> f64 {
        self.values[context * self.n_actions + action]
    }

    #[inline]
    pub fn set(&mut self, context: usize, action: usize, value: f64) {
        self.values[context * self.n_actions + action] = value;
    }

    /// One context's row.
    pub fn row(&self, context: usize) -> &[f64] {
        let start = context * self.n_actions;
        &self.values[start..start + self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Table {
        Table {
            n_contexts: self.n_contexts,
            n_actions: self.n_actions,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Entrywise sum over one context's row against another slice.
    pub fn row_dot(&self, context: usize, other: &[f64]) -> f64 {
        self.row(context)
            .iter()
            .zip(other)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean norm of the full table seen as a vector.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Per-entry clip to `[-bound, bound]`.
    pub fn clip(&self, bound: f64) -> Table {
        self.map(|v| v.clamp(-bound, bound))
    }
}

/// Validate that `p` is a probability vector: nonnegative entries summing
/// to one within [`crate::tol::PMF_SUM`].
pub fn validate_pmf(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidPmf(format!("{what}: empty")));
    }
    if p.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidPmf(format!("{what}: negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > crate::tol::PMF_SUM {
        return Err(Error::InvalidPmf(format!("{what}: sums to {sum}, expected 1")));
    }
    Ok(())
}
