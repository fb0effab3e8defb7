//! The per-state price problem and its closed-form solution.
//!
//! With `Delta = J(i+1, y, D) - J(i, y, D)` the only part of the Bellman
//! minimisation that depends on the threshold `u` is
//!
//! ```text
//! f(u, Delta) = b E[(T - t_min) 1{T >= u}] - alpha P[T >= u] Delta
//! ```
//!
//! whose maximiser is `clamp(t_min + alpha Delta / b, t_min, t_max)` for
//! every trapezoid.

use crate::model::{Grid, ModelParams, State, TrapezoidPdf};
use crate::solvers::TableMeta;
use crate::{Error, Result};

fn check_u(params: &ModelParams, u: f64) -> Result<()> {
    if (params.t_min()..=params.t_max()).contains(&u) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "threshold {u} outside [{}, {}]",
            params.t_min(),
            params.t_max()
        )))
    }
}

/// `f(u, Delta)` per idle appliance.
pub fn objective_f(params: &ModelParams, pdf: &TrapezoidPdf, u: f64, delta: f64) -> Result<f64> {
    check_u(params, u)?;
    let (p, excess) = pdf.tail(u);
    Ok(params.b() * excess - params.alpha() * p * delta)
}

/// Maximiser of [`objective_f`]. Ties at either saturation point resolve to
/// the saturated endpoint.
pub fn optimal_price_threshold(params: &ModelParams, delta: f64) -> f64 {
    threshold_for(params.alpha() * delta, params.b(), params.t_min(), params.t_max())
}

#[inline]
pub(crate) fn threshold_for(alpha_delta: f64, b: f64, t_min: f64, t_max: f64) -> f64 {
    if alpha_delta >= b * (t_max - t_min) {
        t_max
    } else if alpha_delta <= 0.0 {
        t_min
    } else {
        t_min + alpha_delta / b
    }
}

/// `max_u f(u, Delta)`.
pub fn phi(params: &ModelParams, pdf: &TrapezoidPdf, delta: f64) -> f64 {
    let u = optimal_price_threshold(params, delta);
    objective_f(params, pdf, u, delta).expect("optimal threshold lies in the support")
}

/// Broadcast price that makes a zone at temperature `u` indifferent.
pub fn price_of_threshold(params: &ModelParams, u: f64) -> Result<f64> {
    check_u(params, u)?;
    Ok(params.b() * (u - params.t_min()))
}

pub fn threshold_of_price(params: &ModelParams, price: f64) -> Result<f64> {
    if params.b() <= 0.0 {
        return Err(Error::Domain("price does not determine a threshold when b = 0".into()));
    }
    let u = params.t_min() + price / params.b();
    check_u(params, u)?;
    Ok(u)
}

/// Dense map from state to broadcast threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyTable {
    grid: Grid,
    u: Vec<f64>,
    pub meta: TableMeta,
}

impl PolicyTable {
    pub fn new(grid: Grid, u: Vec<f64>, meta: TableMeta) -> Result<Self> {
        if u.len() != grid.len() {
            return Err(Error::Domain(format!(
                "policy has {} entries, grid needs {}",
                u.len(),
                grid.len()
            )));
        }
        if let Some(bad) = u.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite threshold at {}", grid.state(bad))));
        }
        Ok(PolicyTable { grid, u, meta })
    }

    /// Same threshold everywhere.
    pub fn constant(grid: Grid, u: f64, meta: TableMeta) -> Self {
        PolicyTable {
            grid,
            u: vec![u; grid.len()],
            meta,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn get(&self, s: &State) -> Result<f64> {
        Ok(self.u[self.grid.try_index(s)?])
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.u[idx]
    }

    /// Checks that every entry sits in the comfort band of `params` and that
    /// the grid matches.
    pub fn check_against(&self, params: &ModelParams) -> Result<()> {
        if self.grid != params.grid() {
            return Err(Error::Domain(format!(
                "policy grid {:?} does not match model grid {:?}",
                self.grid,
                params.grid()
            )));
        }
        for (idx, &u) in self.u.iter().enumerate() {
            if !(params.t_min()..=params.t_max()).contains(&u) {
                return Err(Error::Domain(format!(
                    "threshold {u} at {} outside the comfort band",
                    self.grid.state(idx)
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSpec;
    use approx::assert_relative_eq;

    fn params(alpha_target: f64) -> ModelParams {
        // alpha = 1 / (1 + r dt), so pick r_disc to hit the requested alpha.
        let base = ParamSpec::reference().build().unwrap();
        ParamSpec {
            r_disc: (1.0 / alpha_target - 1.0) / base.dt(),
            ..ParamSpec::reference()
        }
        .build()
        .unwrap()
    }

    #[test]
    fn threshold_branches() {
        let p = params(0.9);
        assert_relative_eq!(p.alpha(), 0.9, epsilon = 1e-12);
        assert_eq!(optimal_price_threshold(&p, -1.0 / 0.9), 0.0);
        assert_eq!(optimal_price_threshold(&p, 11.0 / 0.9), 10.0);
        assert_relative_eq!(optimal_price_threshold(&p, 5.0), 4.5, epsilon = 1e-9);
        // Ties go to the endpoint.
        assert_eq!(optimal_price_threshold(&p, 0.0), 0.0);
    }

    #[test]
    fn objective_examples() {
        let p = params(0.9);
        let pdf = TrapezoidPdf::new(0.0, 10.0, 5.0).unwrap();
        assert_eq!(objective_f(&p, &pdf, 10.0, 3.0).unwrap(), 0.0);
        assert_relative_eq!(objective_f(&p, &pdf, 0.0, 0.0).unwrap(), 35.0 / 9.0, epsilon = 1e-12);
        assert_relative_eq!(phi(&p, &pdf, 0.0), 35.0 / 9.0, epsilon = 1e-12);
        assert_eq!(phi(&p, &pdf, 1e6), 0.0);
        let big = 12.0;
        for j in 0..=100 {
            let u = 0.1 * f64::from(j);
            assert!(objective_f(&p, &pdf, u, big).unwrap() <= 1e-12);
        }
        assert!(objective_f(&p, &pdf, 10.5, 0.0).is_err());
    }

    #[test]
    fn price_mapping() {
        let p = ParamSpec {
            b: 2.0,
            t_min: 1.0,
            alpha0: 5.0,
            ..ParamSpec::reference()
        }
        .build()
        .unwrap();
        assert_relative_eq!(price_of_threshold(&p, 3.0).unwrap(), 4.0);
        assert_relative_eq!(threshold_of_price(&p, 4.0).unwrap(), 3.0);
        assert_eq!(price_of_threshold(&p, 1.0).unwrap(), 0.0);
        assert!(price_of_threshold(&p, 0.5).is_err());
        let q = ParamSpec::reference().build().unwrap();
        assert_relative_eq!(price_of_threshold(&q, 4.5).unwrap(), 4.5);
    }
}
