use crate::model::{Grid, State};
use crate::{Error, Result};

/// Provenance carried by every value or policy table.
#[derive(Clone, Debug, PartialEq)]
pub struct TableMeta {
    pub solver: String,
    pub iterations: usize,
    pub tol: f64,
    pub final_change: f64,
    pub params_hash: String,
    /// Smallest threshold change the producing solver can resolve. Used as
    /// slack when checking policy monotonicity.
    pub resolution: f64,
}

impl TableMeta {
    /// Metadata for tables that were built by hand rather than solved.
    pub fn synthetic(params_hash: impl Into<String>) -> Self {
        TableMeta {
            solver: "synthetic".into(),
            iterations: 0,
            tol: 0.0,
            final_change: 0.0,
            params_hash: params_hash.into(),
            resolution: 0.0,
        }
    }

    pub fn converged(&self) -> bool {
        self.final_change < self.tol || (self.tol == 0.0 && self.final_change == 0.0)
    }
}

/// Dense cost-to-go table over the state grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    grid: Grid,
    j: Vec<f64>,
    pub meta: TableMeta,
}

impl ValueTable {
    pub fn new(grid: Grid, j: Vec<f64>, meta: TableMeta) -> Result<Self> {
        if j.len() != grid.len() {
            return Err(Error::Domain(format!(
                "value table has {} entries, grid needs {}",
                j.len(),
                grid.len()
            )));
        }
        if let Some(bad) = j.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at {}", grid.state(bad))));
        }
        Ok(ValueTable { grid, j, meta })
    }

    pub fn zeros(grid: Grid, meta: TableMeta) -> Self {
        ValueTable {
            grid,
            j: vec![0.0; grid.len()],
            meta,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.j
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.j
    }

    pub fn get(&self, s: &State) -> Result<f64> {
        Ok(self.j[self.grid.try_index(s)?])
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.j[idx]
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &ValueTable) -> f64 {
        self.j
            .iter()
            .zip(&other.j)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
